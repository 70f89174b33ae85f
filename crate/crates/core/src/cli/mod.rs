//! Manifest-driven experiment runner behind the `besov-lab` binary.

pub mod suites;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::besov::{
    besov_norm_cp, besov_norm_difference, cp_profile_with, default_hajlasz_levels, default_sampler,
    dyadic_scales, hajlasz_norm, BesovParams, CpOptions,
};
use crate::capacity::{
    qc_check, solve_condenser, verify_capacity_lower, verify_capacity_upper, write_trace_csv,
    CondenserSpec, QcOptions, SolverConfig,
};
use crate::constructions::{psi_profile, ConstructionSpec};
use crate::error::{Error, Result};
use crate::grid::{write_grid_function, Domain};
use crate::homeo::{dichotomy_sweep, DichotomyOptions, Homeomorphism, MAX_LEVELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Norm,
    Capacity,
    Dichotomy,
    QcCheck,
    VerifyLemmas,
    PsiProfile,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Norm => "norm",
            Command::Capacity => "capacity",
            Command::Dichotomy => "dichotomy",
            Command::QcCheck => "qc-check",
            Command::VerifyLemmas => "verify-lemmas",
            Command::PsiProfile => "psi-profile",
        }
    }
}

/// Condenser problems for the `capacity` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CapacityTask {
    /// One annulus condenser at ratio `R/r`.
    Annulus { ratio: f64 },
    /// One pair of parallel segments.
    Segments {
        length: f64,
        distance: f64,
        radius: f64,
    },
    /// Solver against explicit construction over annulus ratios.
    Upper { ratios: Vec<f64> },
    /// Segment pairs over a `λ` sweep.
    Lower { lambdas: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyTask {
    pub levels: usize,
    /// Amplitudes `b_j`; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    /// Fine indices to sweep; `params.q` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_stride: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QcTask {
    pub probes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadruplings: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condenser_probes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiTask {
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for every artifact; `.` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// File name stem; the command name when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
    /// Also dump the evaluated or solved grid function.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub grid: bool,
    /// Also write the solver trace of single capacity solves.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub trace: bool,
}

/// One experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub command: Command,
    pub seed: u64,
    pub params: BesovParams,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<ConstructionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Homeomorphism>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<CapacityTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dichotomy: Option<DichotomyTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qc: Option<QcTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParams(format!("manifest: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidParams(format!("manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn solver(&self) -> SolverConfig {
        self.solver.unwrap_or_default()
    }
}

fn missing(section: &str, cmd: Command) -> String {
    format!("{section}: required by the {} command", cmd.as_str())
}

/// Every problem with the manifest, each prefixed by the offending field.
/// Nothing is executed.
pub fn validate(m: &ExperimentManifest) -> Vec<String> {
    let mut out = Vec::new();
    for d in m.params.diagnostics() {
        out.push(format!("params: {d}"));
    }
    if let Err(e) = m.domain.validate() {
        out.push(format!("domain: {e}"));
    }
    if let Some(solver) = &m.solver {
        if let Err(e) = solver.validate() {
            out.push(format!("solver: {e}"));
        }
    }
    if let Some(map) = &m.map {
        if let Err(e) = map.validate() {
            out.push(format!("map: {e}"));
        }
    }
    let quarter = 0.25 * m.domain.side_length;
    match m.command {
        Command::Norm => match &m.construction {
            None => out.push(missing("construction", m.command)),
            Some(c) => match c.support_radius() {
                Err(e) => out.push(format!("construction: {e}")),
                Ok(r) if r > quarter * (1.0 + 1e-12) => out.push(format!(
                    "construction: support radius {r} exceeds L/4 = {quarter}, \
                     violating the tail-correction precondition"
                )),
                Ok(_) => {}
            },
        },
        Command::Capacity => {
            if m.params.q < 1.0 || m.params.p < 1.0 {
                out.push("params.q: convex solver requires q ≥ 1 and p ≥ 1".into());
            }
            if m.params.q.is_infinite() || m.params.p.is_infinite() {
                out.push("params: convex solver requires finite p and q".into());
            }
            match &m.capacity {
                None => out.push(missing("capacity", m.command)),
                Some(CapacityTask::Annulus { ratio }) if !(*ratio > 1.0) => {
                    out.push(format!("capacity.ratio: must exceed 1, got {ratio}"))
                }
                Some(CapacityTask::Upper { ratios }) if ratios.iter().any(|r| !(*r > 1.0)) => {
                    out.push("capacity.ratios: every ratio must exceed 1".into())
                }
                Some(CapacityTask::Lower { lambdas, radius }) => {
                    if lambdas.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
                        out.push("capacity.lambdas: every λ must lie in (0, 1]".into());
                    }
                    if *radius > quarter {
                        out.push(format!(
                            "capacity.radius: {radius} exceeds L/4 = {quarter}, \
                             violating the tail-correction precondition"
                        ));
                    }
                }
                Some(CapacityTask::Segments { radius, .. }) if *radius > quarter => out.push(format!(
                    "capacity.radius: {radius} exceeds L/4 = {quarter}, \
                     violating the tail-correction precondition"
                )),
                Some(_) => {}
            }
        }
        Command::Dichotomy => {
            if m.map.is_none() {
                out.push(missing("map", m.command));
            }
            match &m.dichotomy {
                None => out.push(missing("dichotomy", m.command)),
                Some(t) => {
                    if t.levels == 0 || t.levels > MAX_LEVELS {
                        out.push(format!(
                            "dichotomy.levels: must lie in 1..={MAX_LEVELS}, got {}",
                            t.levels
                        ));
                    }
                    if let Some(b) = &t.amplitudes {
                        if b.len() < t.levels {
                            out.push(format!(
                                "dichotomy.amplitudes: need {} values, got {}",
                                t.levels,
                                b.len()
                            ));
                        }
                    }
                    if let Some(qs) = &t.qs {
                        if qs.iter().any(|q| !(*q >= 1.0)) {
                            out.push("dichotomy.qs: every q must be >= 1".into());
                        }
                    }
                }
            }
        }
        Command::QcCheck => {
            if m.map.is_none() {
                out.push(missing("map", m.command));
            }
            match &m.qc {
                None => out.push(missing("qc", m.command)),
                Some(t) if t.probes < 1000 => {
                    out.push(format!("qc.probes: at least 1000 required, got {}", t.probes))
                }
                Some(_) => {}
            }
        }
        Command::PsiProfile => match &m.psi {
            None => out.push(missing("psi", m.command)),
            Some(t) if t.ratios.is_empty() || t.ratios.iter().any(|r| !(*r > 1.0 && r.is_finite())) => {
                out.push("psi.ratios: need finite ratios > 1".into())
            }
            Some(_) => {}
        },
        Command::VerifyLemmas => {}
    }
    out
}

/// Files written and rows produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// One line per experiment row, as printed.
    pub summary: Vec<String>,
    /// Non-zero when the run finished but a result is unconverged or a
    /// property check failed.
    pub status: i32,
}

/// Exit status for an error: 2 validation, 3 numerical, 4 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::NonFinite { .. } => 3,
        Error::Io { .. } | Error::Format(_) => 4,
        _ => 2,
    }
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

struct Sink {
    dir: PathBuf,
    stem: String,
    files: Vec<PathBuf>,
}

impl Sink {
    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    fn csv(&mut self, suffix: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(suffix);
        let err = |e: csv::Error| Error::io(&path, std::io::Error::other(e.to_string()));
        let mut w = csv::Writer::from_path(&path).map_err(err)?;
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, suffix: &str, value: &T) -> Result<()> {
        let path = self.path(suffix);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::io(&path, std::io::Error::other(e.to_string())))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs a validated manifest, writing its artifacts below `output.dir`.
pub fn run(m: &ExperimentManifest) -> Result<RunOutcome> {
    let problems = validate(m);
    if !problems.is_empty() {
        return Err(Error::InvalidParams(problems.join("; ")));
    }
    let dir = m.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut sink = Sink {
        dir,
        stem: m.output.stem.clone().unwrap_or_else(|| m.command.as_str().replace('-', "_")),
        files: Vec::new(),
    };
    let mut summary = Vec::new();
    let mut status = 0;
    let params = &m.params;
    let domain = m.domain;
    match m.command {
        Command::Norm => {
            let c = m.construction.as_ref().ok_or_else(|| Error::InvalidParams(missing("construction", m.command)))?;
            let g = c.build(domain)?;
            let diff = besov_norm_difference(&g, params, &default_sampler(&domain, m.seed)?)?;
            let profile = cp_profile_with(
                &g,
                params,
                &dyadic_scales(&domain, 64),
                CpOptions {
                    seed: m.seed,
                    ..CpOptions::default()
                },
            )?;
            let cp = besov_norm_cp(&profile)?;
            let haj = hajlasz_norm(&g, params, &default_hajlasz_levels(&domain))?;
            let kind = serde_json::to_value(c)
                .ok()
                .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(String::from))
                .unwrap_or_default();
            sink.csv(
                ".csv",
                &["construction", "side_length", "resolution", "s", "p", "q", "difference", "cp", "hajlasz", "seed"],
                &[vec![
                    kind.clone(),
                    f(domain.side_length),
                    domain.resolution.to_string(),
                    f(params.s),
                    f(params.p),
                    f(params.q),
                    f(diff),
                    f(cp),
                    f(haj),
                    m.seed.to_string(),
                ]],
            )?;
            summary.push(format!("{kind}: difference {diff:.6} cp {cp:.6} hajlasz {haj:.6}"));
            if m.output.grid {
                let path = sink.path(".grid");
                write_grid_function(&path, &g)?;
                sink.files.push(path);
            }
        }
        Command::Capacity => {
            let task = m.capacity.as_ref().ok_or_else(|| Error::InvalidParams(missing("capacity", m.command)))?;
            let cfg = m.solver();
            match task {
                CapacityTask::Annulus { .. } | CapacityTask::Segments { .. } => {
                    let spec = match task {
                        CapacityTask::Annulus { ratio } => CondenserSpec::annulus_with_ratio(domain, *ratio)?,
                        CapacityTask::Segments {
                            length,
                            distance,
                            radius,
                        } => CondenserSpec::parallel_segments(domain, *length, *distance, *radius)?,
                        _ => unreachable!(),
                    };
                    let res = solve_condenser(&spec, params, &default_sampler(&domain, m.seed)?, &cfg, None)?;
                    sink.csv(
                        ".csv",
                        &["lambda", "value", "initial", "iterations", "converged", "seed"],
                        &[vec![
                            f(spec.lambda()),
                            f(res.value),
                            f(res.initial_objective.powf(1.0 / params.q)),
                            res.iterations.to_string(),
                            res.converged.to_string(),
                            m.seed.to_string(),
                        ]],
                    )?;
                    summary.push(format!(
                        "condenser: value {:.6} after {} iterations{}",
                        res.value,
                        res.iterations,
                        if res.converged { "" } else { " (unconverged)" }
                    ));
                    if m.output.trace {
                        let path = sink.path("_trace.csv");
                        write_trace_csv(&res.trace, &path)?;
                        sink.files.push(path);
                    }
                    if m.output.grid {
                        let path = sink.path(".grid");
                        write_grid_function(&path, &res.u)?;
                        sink.files.push(path);
                    }
                    if !res.converged {
                        status = 3;
                    }
                }
                CapacityTask::Upper { ratios } => {
                    let rows = verify_capacity_upper(ratios, params, &domain, &cfg, m.seed)?;
                    let table: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| {
                            vec![
                                f(r.ratio),
                                f(r.solver),
                                f(r.construction),
                                r.iterations.to_string(),
                                r.converged.to_string(),
                            ]
                        })
                        .collect();
                    sink.csv(".csv", &["ratio", "solver", "construction", "iterations", "converged"], &table)?;
                    for r in &rows {
                        summary.push(format!(
                            "ratio {}: solver {:.6} construction {:.6}",
                            r.ratio, r.solver, r.construction
                        ));
                        if !r.converged {
                            status = 3;
                        }
                    }
                }
                CapacityTask::Lower { lambdas, radius } => {
                    let rep = verify_capacity_lower(lambdas, *radius, params, &domain, &cfg, m.seed)?;
                    let table: Vec<Vec<String>> = rep
                        .rows
                        .iter()
                        .map(|r| {
                            vec![
                                f(r.target),
                                f(r.lambda),
                                f(r.value),
                                r.iterations.to_string(),
                                r.converged.to_string(),
                            ]
                        })
                        .collect();
                    sink.csv(".csv", &["target", "lambda", "value", "iterations", "converged"], &table)?;
                    sink.json(".json", &rep)?;
                    for r in &rep.rows {
                        summary.push(format!("λ {:.4}: value {:.6}", r.lambda, r.value));
                    }
                    summary.push(format!("fitted slope {:.4}", rep.slope));
                    if !rep.excluded.is_empty() {
                        status = 3;
                    }
                }
            }
        }
        Command::Dichotomy => {
            let phi = m.map.as_ref().ok_or_else(|| Error::InvalidParams(missing("map", m.command)))?;
            let task = m.dichotomy.as_ref().ok_or_else(|| Error::InvalidParams(missing("dichotomy", m.command)))?;
            let b = task.amplitudes.clone().unwrap_or_else(|| vec![1.0; task.levels]);
            let qs = task.qs.clone().unwrap_or_else(|| vec![params.q]);
            let mut opts = DichotomyOptions {
                seed: m.seed,
                ..DichotomyOptions::default()
            };
            if let Some(stride) = task.level_stride {
                opts.level_stride = stride;
            }
            let rep = dichotomy_sweep(phi, task.levels, &b, params.s, params.p, &qs, &domain, &opts)?;
            let path = sink.path(".csv");
            rep.write_csv(&path)?;
            sink.files.push(path);
            sink.json(".json", &rep)?;
            for r in &rep.rows {
                summary.push(format!(
                    "{} q={} N_lv={}: ratio {:.6}",
                    r.family, r.q, r.n_lv, r.ratio
                ));
            }
            for s in rep.slopes.iter().filter(|s| s.construction.is_none()) {
                summary.push(format!("q={}: slope {:.4}", s.q, s.slope));
            }
        }
        Command::QcCheck => {
            let phi = m.map.as_ref().ok_or_else(|| Error::InvalidParams(missing("map", m.command)))?;
            let task = m.qc.as_ref().ok_or_else(|| Error::InvalidParams(missing("qc", m.command)))?;
            let mut opts = QcOptions {
                probes: task.probes,
                seed: m.seed,
                region: domain,
                solver: m.solver.unwrap_or(QcOptions::default().solver),
                ..QcOptions::default()
            };
            if let Some(k) = task.quadruplings {
                opts.quadruplings = k;
            }
            if let Some(c) = task.condenser_probes {
                opts.condenser_probes = c;
            }
            let rep = qc_check(phi, params, &opts)?;
            sink.json(".json", &rep)?;
            summary.push(format!(
                "{}: {} (H_hat {:.4}, trend {:.3}, {} census bins)",
                rep.label,
                rep.verdict.as_str(),
                rep.h_hat,
                rep.trend_slope,
                rep.census_bins
            ));
        }
        Command::PsiProfile => {
            let task = m.psi.as_ref().ok_or_else(|| Error::InvalidParams(missing("psi", m.command)))?;
            let rows = psi_profile(&task.ratios, params, domain, m.seed)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![f(r.ratio), f(r.norm), f(r.bound)])
                .collect();
            sink.csv(".csv", &["ratio", "norm", "bound"], &table)?;
            for r in &rows {
                summary.push(format!("ratio {}: norm {:.6} bound {:.6}", r.ratio, r.norm, r.bound));
            }
        }
        Command::VerifyLemmas => {
            let opts = suites::SuiteOptions {
                s: params.s,
                seed: m.seed,
                ..suites::SuiteOptions::default()
            };
            let rows = suites::all_suites(&opts)?;
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.suite.clone(),
                        r.check.clone(),
                        f(r.measured),
                        f(r.lower),
                        f(r.upper),
                        if r.passed { "pass" } else { "fail" }.to_string(),
                    ]
                })
                .collect();
            sink.csv(".csv", &["suite", "check", "measured", "lower", "upper", "result"], &table)?;
            for r in &rows {
                summary.push(format!(
                    "{:<5} {:<16} {} = {:.6}",
                    if r.passed { "pass" } else { "FAIL" },
                    r.suite,
                    r.check,
                    r.measured
                ));
                if !r.passed {
                    status = 3;
                }
            }
        }
    }
    Ok(RunOutcome {
        files: sink.files,
        summary,
        status,
    })
}
