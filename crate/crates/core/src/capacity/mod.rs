//! Condenser capacities `inf { ‖u‖ : u <= 0 on E, u >= 1 on F }` by
//! projected subgradient descent on the difference-norm objective.

mod lemmas;
mod qc;

pub use lemmas::{
    verify_capacity_lower, verify_capacity_upper, LowerReport, LowerRow, UpperRow,
};
pub use qc::{qc_check, CondenserProbe, QcOptions, QcReport, TrendPoint, Verdict};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::besov::difference::{inner_norms, offset_coefficients};
use crate::besov::BesovParams;
use crate::constructions::{default_truncation, make_annulus_condenser};
use crate::error::{Error, Result};
use crate::grid::{lattice_difference_power, Domain, GridFunction, OffsetSampler, Point};

/// Plate holding the complement of the enclosing ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Plate {
    E,
    F,
}

/// Two disjoint node sets inside the ball `B(center, radius)`; every node
/// outside the ball belongs to `exterior`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondenserSpec {
    pub domain: Domain,
    pub e_mask: Vec<bool>,
    pub f_mask: Vec<bool>,
    pub center: Point,
    pub radius: f64,
    pub exterior: Plate,
    /// `(r, R)` when `F = B̄(center, r)` and `E` is the complement of
    /// `B(center, R)`; enables the explicit warm start.
    pub annulus: Option<(f64, f64)>,
}

fn diameter(domain: &Domain, mask: &[bool]) -> f64 {
    let n = domain.resolution;
    let pts: Vec<Point> = mask
        .iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(k, _)| domain.node(k / n, k % n))
        .collect();
    let mut d = 0.0_f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max((pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]));
        }
    }
    d
}

/// Whether the set nodes of `mask` form one 8-connected component.
pub fn grid_connected(mask: &[bool], n: usize) -> bool {
    let Some(start) = mask.iter().position(|m| *m) else {
        return false;
    };
    let mut seen = vec![false; mask.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(k) = stack.pop() {
        count += 1;
        let (i, j) = ((k / n) as i64, (k % n) as i64);
        for di in -1..=1 {
            for dj in -1..=1 {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                    continue;
                }
                let m = a as usize * n + b as usize;
                if mask[m] && !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
    }
    count == mask.iter().filter(|m| **m).count()
}

impl CondenserSpec {
    pub fn new(
        domain: Domain,
        e_mask: Vec<bool>,
        f_mask: Vec<bool>,
        center: Point,
        radius: f64,
        exterior: Plate,
    ) -> Result<Self> {
        let spec = CondenserSpec {
            domain,
            e_mask,
            f_mask,
            center,
            radius,
            exterior,
            annulus: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `F = B̄(c, r)`, `E = R^2 \ B(c, R)`, with `c` the node nearest the
    /// origin, so that `F` holds at least one node.
    pub fn annulus(domain: Domain, inner: f64, outer: f64) -> Result<Self> {
        domain.validate()?;
        if !(inner > 0.0 && inner < outer) {
            return Err(Error::Geometry(format!(
                "annulus needs 0 < r < R, got r = {inner}, R = {outer}"
            )));
        }
        let n = domain.resolution;
        let c = domain.node(n / 2, n / 2);
        let mut e_mask = vec![false; domain.len()];
        let mut f_mask = vec![false; domain.len()];
        for i in 0..n {
            for j in 0..n {
                let x = domain.node(i, j);
                let d = (x[0] - c[0]).hypot(x[1] - c[1]);
                if d <= inner {
                    f_mask[i * n + j] = true;
                } else if d >= outer {
                    e_mask[i * n + j] = true;
                }
            }
        }
        let mut spec = CondenserSpec::new(domain, e_mask, f_mask, c, outer, Plate::E)?;
        spec.annulus = Some((inner, outer));
        Ok(spec)
    }

    /// Largest annulus about the central node fitting the estimator's
    /// support disc, at ratio `R/r`.
    pub fn annulus_with_ratio(domain: Domain, ratio: f64) -> Result<Self> {
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(Error::InvalidParams(format!("annulus ratio must exceed 1, got {ratio}")));
        }
        let n = domain.resolution;
        let c = domain.node(n / 2, n / 2);
        let outer = 0.25 * domain.side_length - c[0].hypot(c[1]);
        CondenserSpec::annulus(domain, outer / ratio, outer)
    }

    /// Two horizontal one-node-wide segments of `length` at vertical distance
    /// `distance`, centred in `B(c, radius)`, `E` below `F`, exterior in `E`.
    pub fn parallel_segments(domain: Domain, length: f64, distance: f64, radius: f64) -> Result<Self> {
        domain.validate()?;
        let n = domain.resolution;
        let h = domain.spacing();
        let c = domain.node(n / 2, n / 2);
        let rows = (distance / h).round() as i64;
        let cols = (length / h).round() as i64;
        if rows < 2 || cols < 1 {
            return Err(Error::Geometry(format!(
                "segments of length {length} at distance {distance} are below grid resolution"
            )));
        }
        let (ci, cj) = ((n / 2) as i64, (n / 2) as i64);
        let lo_row = ci - rows / 2;
        let hi_row = lo_row + rows;
        let j0 = cj - cols / 2;
        let mut e_mask = vec![false; domain.len()];
        let mut f_mask = vec![false; domain.len()];
        for j in j0..=j0 + cols {
            for (row, mask) in [(lo_row, &mut e_mask), (hi_row, &mut f_mask)] {
                if row < 0 || j < 0 || row >= n as i64 || j >= n as i64 {
                    return Err(Error::Geometry("segment leaves the box".into()));
                }
                // Rows index x2, columns x1.
                mask[j as usize * n + row as usize] = true;
            }
        }
        CondenserSpec::new(domain, e_mask, f_mask, c, radius, Plate::E)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        let len = self.domain.len();
        if self.e_mask.len() != len || self.f_mask.len() != len {
            return Err(Error::Geometry(format!(
                "masks must have {len} nodes, got {} and {}",
                self.e_mask.len(),
                self.f_mask.len()
            )));
        }
        if self.e_mask.iter().zip(&self.f_mask).any(|(a, b)| *a && *b) {
            return Err(Error::Geometry("condenser plates E and F overlap".into()));
        }
        let reach = self.center[0].hypot(self.center[1]) + self.radius;
        if !(self.radius > 0.0) || reach > 0.25 * self.domain.side_length * (1.0 + 1e-12) {
            return Err(Error::Geometry(format!(
                "enclosing ball reaches {reach}, beyond the support disc of radius L/4 = {}",
                0.25 * self.domain.side_length
            )));
        }
        let n = self.domain.resolution;
        let inside = |k: usize| {
            let x = self.domain.node(k / n, k % n);
            (x[0] - self.center[0]).hypot(x[1] - self.center[1]) < self.radius
        };
        let (inner_mask, inner_name) = match self.exterior {
            Plate::E => (&self.f_mask, "F"),
            Plate::F => (&self.e_mask, "E"),
        };
        if !inner_mask.iter().any(|m| *m) {
            return Err(Error::Geometry(format!("plate {inner_name} is empty")));
        }
        if inner_mask.iter().enumerate().any(|(k, m)| *m && !inside(k)) {
            return Err(Error::Geometry(format!(
                "plate {inner_name} must lie inside the enclosing ball"
            )));
        }
        let free = (0..len).any(|k| inside(k) && !self.e_mask[k] && !self.f_mask[k]);
        if !free {
            return Err(Error::Geometry("condenser has no free nodes".into()));
        }
        Ok(())
    }

    /// `min(diam E, diam F) / R`, capped at 1; the exterior plate has
    /// infinite diameter.
    pub fn lambda(&self) -> f64 {
        let de = match self.exterior {
            Plate::E => f64::INFINITY,
            Plate::F => diameter(&self.domain, &self.e_mask),
        };
        let df = match self.exterior {
            Plate::F => f64::INFINITY,
            Plate::E => diameter(&self.domain, &self.f_mask),
        };
        (de.min(df) / self.radius).min(1.0)
    }

    /// Whether both finite plates are 8-connected.
    pub fn connected(&self) -> bool {
        let n = self.domain.resolution;
        (self.exterior == Plate::E || grid_connected(&self.e_mask, n))
            && (self.exterior == Plate::F || grid_connected(&self.f_mask, n))
    }

    /// The same condenser with the roles of `E` and `F` exchanged.
    pub fn swapped(&self) -> Self {
        CondenserSpec {
            domain: self.domain,
            e_mask: self.f_mask.clone(),
            f_mask: self.e_mask.clone(),
            center: self.center,
            radius: self.radius,
            exterior: match self.exterior {
                Plate::E => Plate::F,
                Plate::F => Plate::E,
            },
            annulus: None,
        }
    }

    fn exterior_value(&self) -> f64 {
        match self.exterior {
            Plate::E => 0.0,
            Plate::F => 1.0,
        }
    }

    /// `Some(v)` for nodes whose value is prescribed.
    fn fixed(&self) -> Vec<Option<f64>> {
        let n = self.domain.resolution;
        (0..self.domain.len())
            .map(|k| {
                let x = self.domain.node(k / n, k % n);
                if self.e_mask[k] {
                    Some(0.0)
                } else if self.f_mask[k] {
                    Some(1.0)
                } else if (x[0] - self.center[0]).hypot(x[1] - self.center[1]) >= self.radius {
                    Some(self.exterior_value())
                } else {
                    None
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// `a` in the step rule `a / sqrt(iter)`; steps move `u` by at most
    /// this much at any node.
    pub step: f64,
    /// Stop once the relative objective decrease stays below this for
    /// `patience` accepted steps.
    pub tolerance: f64,
    pub patience: usize,
    /// Halvings tried before a step is declared stationary.
    pub max_backtracks: usize,
    /// `|t|^{p-2} t` becomes `(t^2 + ε^2)^{(p-2)/2} t` in the subgradient.
    pub epsilon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 300,
            step: 0.25,
            tolerance: 1e-5,
            patience: 5,
            max_backtracks: 30,
            epsilon: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0
            || !(self.step > 0.0 && self.step.is_finite())
            || !(self.tolerance > 0.0)
            || !(self.epsilon >= 0.0)
            || self.patience == 0
        {
            return Err(Error::InvalidParams(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub step: f64,
    pub feasibility_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Minimizer on the box nodes; equals the exterior value outside the
    /// enclosing ball.
    pub u: GridFunction,
    /// `‖u‖`, the `q`-th root of `objective`.
    pub value: f64,
    pub objective: f64,
    /// Objective of the (projected) starting point.
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let err = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["iter", "objective", "step", "feasibility_violations"])
        .map_err(err)?;
    for r in trace {
        w.write_record([
            r.iter.to_string(),
            format!("{:.16e}", r.objective),
            format!("{:.16e}", r.step),
            r.feasibility_violations.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `d(x, E) / (d(x, E) + d(x, F))`, the exterior counted with its plate.
fn distance_ratio(spec: &CondenserSpec) -> Vec<f64> {
    let d = &spec.domain;
    let n = d.resolution;
    let pts = |mask: &[bool]| -> Vec<Point> {
        mask.iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(k, _)| d.node(k / n, k % n))
            .collect()
    };
    let (pe, pf) = (pts(&spec.e_mask), pts(&spec.f_mask));
    (0..d.len())
        .into_par_iter()
        .map(|k| {
            let x = d.node(k / n, k % n);
            let ext = (spec.radius - (x[0] - spec.center[0]).hypot(x[1] - spec.center[1])).max(0.0);
            let near = |ps: &[Point]| {
                ps.iter()
                    .map(|p| (p[0] - x[0]).hypot(p[1] - x[1]))
                    .fold(f64::INFINITY, f64::min)
            };
            let mut de = near(&pe);
            let mut df = near(&pf);
            match spec.exterior {
                Plate::E => de = de.min(ext),
                Plate::F => df = df.min(ext),
            }
            if de + df == 0.0 {
                0.0
            } else {
                de / (de + df)
            }
        })
        .collect()
}

struct Problem<'a> {
    params: &'a BesovParams,
    sampler: &'a OffsetSampler,
    coeffs: Vec<(i64, i64, f64)>,
    domain: Domain,
    support: f64,
    /// Indices of free nodes.
    free: Vec<usize>,
    lo: f64,
    hi: f64,
}

impl Problem<'_> {
    fn grid(&self, w: Vec<f64>) -> Result<GridFunction> {
        GridFunction::from_values(self.domain, w, Some(self.support))
    }

    fn objective(&self, w: &GridFunction) -> f64 {
        let inner = inner_norms(w, self.sampler, self.params.p);
        let q = self.params.q;
        inner
            .iter()
            .flatten()
            .zip(&self.coeffs)
            .map(|(v, c)| c.2 * v.powf(q))
            .sum()
    }

    /// Subgradient of the objective at the free nodes.
    fn gradient(&self, w: &GridFunction, epsilon: f64) -> Vec<f64> {
        let (p, q) = (self.params.p, self.params.q);
        let h2 = w.spacing() * w.spacing();
        let Some(bbox) = w.nonzero_box() else {
            return vec![0.0; self.free.len()];
        };
        // d/dw of c A^{q/p} with A = h^2 Σ |Δw|^p is
        // c q A^{q/p - 1} h^2 Σ ±ψ(Δw).
        let weights: Vec<f64> = self
            .coeffs
            .par_iter()
            .map(|&(a, b, c)| {
                let s = h2 * lattice_difference_power(w, &bbox, (a, b), p);
                if s > 0.0 {
                    c * q * s.powf(q / p - 1.0) * h2
                } else {
                    0.0
                }
            })
            .collect();
        let psi = |t: f64| -> f64 {
            if epsilon > 0.0 {
                (t * t + epsilon * epsilon).powf(0.5 * (p - 2.0)) * t
            } else if p == 2.0 {
                t
            } else if p == 4.0 {
                t * t * t
            } else {
                t.abs().powf(p - 2.0) * t
            }
        };
        let n = self.domain.resolution;
        self.free
            .par_iter()
            .map(|&k| {
                let (i, j) = ((k / n) as i64, (k % n) as i64);
                let wz = w.get_ext(i, j);
                let mut g = 0.0;
                for (&(a, b, _), &wt) in self.coeffs.iter().zip(&weights) {
                    if wt == 0.0 {
                        continue;
                    }
                    let back = wz - w.get_ext(i - a, j - b);
                    let fwd = w.get_ext(i + a, j + b) - wz;
                    g += wt * (psi(back) - psi(fwd));
                }
                g
            })
            .collect()
    }
}

/// Minimizes `‖u‖^q` over `u` with `u = 0` on `E`, `u = 1` on `F`, the
/// exterior value outside the enclosing ball and `0 <= u <= 1` elsewhere.
///
/// Steps follow `a / sqrt(iter)` along the normalized negative subgradient,
/// halved until the objective does not increase, so the trace is
/// non-increasing and the result is never worse than the start.
pub fn solve_condenser(
    spec: &CondenserSpec,
    params: &BesovParams,
    sampler: &OffsetSampler,
    cfg: &SolverConfig,
    warm_start: Option<&GridFunction>,
) -> Result<SolveResult> {
    spec.validate()?;
    params.validate()?;
    cfg.validate()?;
    if !(params.p.is_finite() && params.q.is_finite()) || params.p < 1.0 || params.q < 1.0 {
        return Err(Error::InvalidParams(format!(
            "convex solver requires finite p, q >= 1, got p = {}, q = {}",
            params.p, params.q
        )));
    }
    let h = spec.domain.spacing();
    if (sampler.spacing - h).abs() > 1e-12 * h {
        return Err(Error::Precondition(format!(
            "sampler spacing {} does not match grid spacing {h}",
            sampler.spacing
        )));
    }
    if let Some(w) = warm_start {
        if w.domain() != &spec.domain {
            return Err(Error::Precondition("warm start lives on a different grid".into()));
        }
    }
    let ext = spec.exterior_value();
    let fixed = spec.fixed();
    let free: Vec<usize> = (0..fixed.len()).filter(|&k| fixed[k].is_none()).collect();
    let coeffs: Vec<(i64, i64, f64)> = sampler
        .levels
        .iter()
        .zip(offset_coefficients(params, sampler))
        .flat_map(|(level, cs)| {
            level
                .offsets
                .iter()
                .zip(cs)
                .map(|(&(a, b), c)| (a, b, c))
                .collect::<Vec<_>>()
        })
        .collect();
    let problem = Problem {
        params,
        sampler,
        coeffs,
        domain: spec.domain,
        support: spec.center[0].hypot(spec.center[1]) + spec.radius,
        free,
        lo: -ext,
        hi: 1.0 - ext,
    };
    let start: Vec<f64> = match (warm_start, spec.annulus) {
        (Some(w), _) => w.values().to_vec(),
        (None, Some((r, big_r))) => {
            let c = make_annulus_condenser(spec.center, r, big_r, default_truncation(r, big_r), spec.domain)?;
            c.grid.values().to_vec()
        }
        (None, None) => distance_ratio(spec),
    };
    // Project onto the feasible set, in the shifted variable w = u - ext.
    let mut w: Vec<f64> = start
        .iter()
        .zip(&fixed)
        .map(|(&v, fx)| match fx {
            Some(val) => val - ext,
            None => {
                let v = if v.is_finite() { v } else { 0.0 };
                v.clamp(0.0, 1.0) - ext
            }
        })
        .collect();
    let mut grid = problem.grid(w.clone())?;
    let mut obj = problem.objective(&grid);
    let initial_objective = obj;
    let mut trace = vec![TraceRow {
        iter: 0,
        objective: obj,
        step: 0.0,
        feasibility_violations: 0,
    }];
    let mut quiet = 0;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let g = problem.gradient(&grid, cfg.epsilon);
        let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if gmax == 0.0 || !gmax.is_finite() {
            if !gmax.is_finite() {
                return Err(Error::Numerical("non-finite subgradient".into()));
            }
            converged = true;
            break;
        }
        let mut step = cfg.step / (iter as f64).sqrt();
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let mut trial = w.clone();
            for (&k, gk) in problem.free.iter().zip(&g) {
                trial[k] = (w[k] - step * gk / gmax).clamp(problem.lo, problem.hi);
            }
            let tg = problem.grid(trial.clone())?;
            let tobj = problem.objective(&tg);
            if tobj <= obj {
                accepted = Some((trial, tg, tobj));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, tg, tobj)) = accepted else {
            converged = true;
            break;
        };
        let rel = if obj > 0.0 { (obj - tobj) / obj } else { 0.0 };
        w = trial;
        grid = tg;
        obj = tobj;
        trace.push(TraceRow {
            iter,
            objective: obj,
            step,
            feasibility_violations: 0,
        });
        if rel < cfg.tolerance {
            quiet += 1;
            if quiet >= cfg.patience {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    if !obj.is_finite() {
        return Err(Error::Numerical("non-finite objective".into()));
    }
    let u: Vec<f64> = w.iter().map(|v| v + ext).collect();
    let u = if ext == 0.0 {
        GridFunction::from_values(spec.domain, u, Some(problem.support))?
    } else {
        GridFunction::from_values(spec.domain, u, None)?
    };
    Ok(SolveResult {
        u,
        value: obj.powf(1.0 / params.q),
        objective: obj,
        initial_objective,
        iterations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::{besov_norm_difference, default_sampler};

    fn setup(n: usize) -> (Domain, OffsetSampler, BesovParams) {
        let d = Domain::new(4.0, n).unwrap();
        let s = default_sampler(&d, 7).unwrap();
        (d, s, BesovParams::scaling_invariant(0.5, 2.0).unwrap())
    }

    #[test]
    fn overlapping_plates_rejected() {
        let d = Domain::new(4.0, 16).unwrap();
        let e = vec![true; d.len()];
        let mut f = vec![false; d.len()];
        f[8 * 16 + 8] = true;
        assert!(CondenserSpec::new(d, e, f, [0.0, 0.0], 1.0, Plate::E).is_err());
    }

    #[test]
    fn annulus_descends_from_construction() {
        let (d, s, p) = setup(32);
        let spec = CondenserSpec::annulus_with_ratio(d, 4.0).unwrap();
        let cfg = SolverConfig {
            max_iters: 40,
            ..SolverConfig::default()
        };
        let res = solve_condenser(&spec, &p, &s, &cfg, None).unwrap();
        assert!(res.objective <= res.initial_objective);
        for pair in res.trace.windows(2) {
            assert!(pair[1].objective <= pair[0].objective * (1.0 + 1e-12));
        }
        // Feasibility.
        let n = d.resolution;
        for k in 0..d.len() {
            let v = res.u.get(k / n, k % n);
            assert!((0.0..=1.0).contains(&v));
            if spec.e_mask[k] {
                assert_eq!(v, 0.0);
            }
            if spec.f_mask[k] {
                assert_eq!(v, 1.0);
            }
        }
        let direct = besov_norm_difference(&res.u, &p, &s).unwrap();
        assert!((direct - res.value).abs() <= 1e-10 * direct, "{direct} vs {}", res.value);
    }

    #[test]
    fn swapping_plates_mirrors_solution() {
        let (d, s, p) = setup(32);
        let spec = CondenserSpec::parallel_segments(d, 0.5, 0.5, 0.9).unwrap();
        let cfg = SolverConfig {
            max_iters: 15,
            ..SolverConfig::default()
        };
        let a = solve_condenser(&spec, &p, &s, &cfg, None).unwrap();
        let swapped = spec.swapped();
        let warm: Vec<f64> = a.u.values().iter().map(|v| 1.0 - v).collect();
        let warm = GridFunction::from_values(d, warm, None).unwrap();
        let zero = SolverConfig {
            max_iters: 1,
            step: 1e-30,
            ..cfg
        };
        let b = solve_condenser(&swapped, &p, &s, &zero, Some(&warm)).unwrap();
        assert!((a.value - b.value).abs() <= 1e-8 * a.value, "{} vs {}", a.value, b.value);
        assert!((a.initial_objective
            - solve_condenser(&swapped, &p, &s, &zero, None).unwrap().initial_objective)
            .abs()
            <= 1e-8 * a.initial_objective);
    }

    #[test]
    fn geometry_helpers() {
        let d = Domain::new(4.0, 32).unwrap();
        let spec = CondenserSpec::parallel_segments(d, 0.5, 0.5, 0.9).unwrap();
        assert!(spec.connected());
        let lam = spec.lambda();
        assert!((lam - 0.5 / 0.9).abs() < 1e-12, "{lam}");
        let ann = CondenserSpec::annulus_with_ratio(d, 64.0).unwrap();
        assert_eq!(ann.f_mask.iter().filter(|m| **m).count(), 1);
        assert_eq!(ann.lambda(), 0.0);
        let p = BesovParams::scaling_invariant(0.5, 0.5);
        if let Ok(p) = p {
            let s = default_sampler(&d, 1).unwrap();
            assert!(solve_condenser(&ann, &p, &s, &SolverConfig::default(), None).is_err());
        }
    }
}
