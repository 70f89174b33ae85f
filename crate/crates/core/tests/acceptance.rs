//! End-to-end acceptance run. Prints one `PASS`/`FAIL` line per criterion
//! and exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use besov_lab::besov::{
    besov_norm_cp, besov_norm_difference, besov_norm_oracle, cp_profile, default_hajlasz_levels,
    default_outer_radius, default_sampler, dyadic_scales, hajlasz_norm, BesovParams,
};
use besov_lab::capacity::{qc_check, QcOptions, Verdict};
use besov_lab::cli::suites::{
    anisotropy_suite, capacity_lower_suite, capacity_upper_suite, dyadic_stack_suite,
    equal_stack_suite, CheckRow, SuiteOptions,
};
use besov_lab::constructions::corpus;
use besov_lab::error::Result;
use besov_lab::grid::{Domain, OffsetSampler};
use besov_lab::homeo::{dichotomy_sweep, DichotomyOptions, Homeomorphism};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn from_rows(rows: Vec<CheckRow>) -> Result<Outcome> {
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} {} = {:.4}", r.suite, r.check, r.measured))
        .collect();
    let detail = if failed.is_empty() {
        format!("{} checks in range", rows.len())
    } else {
        failed.join("; ")
    };
    outcome(failed.is_empty(), detail)
}

fn oracle_equivalence() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for n in [8, 12, 16] {
        let d = Domain::new(8.0, n)?;
        let sampler = OffsetSampler::exhaustive(&d, default_outer_radius(&d))?;
        for q in [2.0, 4.0] {
            let p = BesovParams::scaling_invariant(0.5, q)?;
            for m in corpus(1.0)? {
                let g = m.sample(d)?;
                let a = besov_norm_difference(&g, &p, &sampler)?;
                let b = besov_norm_oracle(&g, &p)?;
                let rel = if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
                worst = worst.max(rel);
            }
        }
    }
    outcome(worst <= 1e-10, format!("worst relative gap {worst:.2e}"))
}

/// `[min, max]` over the corpus of difference/C_p and difference/Hajłasz,
/// and the largest pairwise disagreement factor.
fn brackets(n: usize, p: &BesovParams) -> Result<([f64; 4], f64)> {
    let d = Domain::new(8.0, n)?;
    let sampler = default_sampler(&d, 1)?;
    let scales = dyadic_scales(&d, 64);
    let levels = default_hajlasz_levels(&d);
    let mut b = [f64::INFINITY, 0.0, f64::INFINITY, 0.0];
    let mut factor = 1.0_f64;
    for m in corpus(1.0)? {
        let g = m.sample(d)?;
        let diff = besov_norm_difference(&g, p, &sampler)?;
        let cp = besov_norm_cp(&cp_profile(&g, p, &scales)?)?;
        let haj = hajlasz_norm(&g, p, &levels)?;
        let (r1, r2) = (diff / cp, diff / haj);
        b = [b[0].min(r1), b[1].max(r1), b[2].min(r2), b[3].max(r2)];
        let all = [diff, cp, haj];
        let hi = all.iter().copied().fold(0.0, f64::max);
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        factor = factor.max(hi / lo);
    }
    Ok((b, factor))
}

fn characterization_bracket() -> Result<Outcome> {
    let mut factor = 1.0_f64;
    let mut drift = 0.0_f64;
    for s in [0.3, 0.5, 0.7] {
        for q in [2.0, 2.0 / s, 8.0] {
            let p = BesovParams::scaling_invariant(s, q)?;
            let (coarse, f64_) = brackets(64, &p)?;
            let (fine, _) = brackets(128, &p)?;
            factor = factor.max(f64_);
            for (a, b) in coarse.iter().zip(&fine) {
                drift = drift.max((b / a - 1.0).abs());
            }
        }
    }
    outcome(
        factor <= 5.0 && drift < 0.2,
        format!("largest disagreement factor {factor:.3} (N=64), bracket drift {drift:.3}"),
    )
}

fn scaling_invariance() -> Result<Outcome> {
    let d = Domain::new(8.0, 128)?;
    let sampler = default_sampler(&d, 1)?;
    let mut worst = 0.0_f64;
    for q in [2.0, 4.0] {
        let p = BesovParams::scaling_invariant(0.5, q)?;
        for m in corpus(0.5)? {
            let base = besov_norm_difference(&m.sample(d)?, &p, &sampler)?;
            for lambda in [0.5, 2.0] {
                let v = besov_norm_difference(&m.dilated(lambda).sample(d)?, &p, &sampler)?;
                worst = worst.max((v / base - 1.0).abs());
            }
        }
    }
    outcome(worst <= 0.25, format!("largest relative change {worst:.3}"))
}

fn stack_brackets() -> Result<Outcome> {
    let opts = SuiteOptions::default();
    let mut rows = dyadic_stack_suite(&opts)?;
    rows.extend(equal_stack_suite(&opts)?);
    from_rows(rows)
}

fn capacity_upper() -> Result<Outcome> {
    from_rows(capacity_upper_suite(&SuiteOptions::default())?)
}

fn capacity_lower() -> Result<Outcome> {
    from_rows(capacity_lower_suite(&SuiteOptions::default())?)
}

fn dichotomy() -> Result<Outcome> {
    let phi = Homeomorphism::RadialStretch { alpha: 2.0 };
    let d = Domain::new(4.0, 64)?;
    let rep = dichotomy_sweep(&phi, 5, &[1.0; 5], 0.5, 4.0, &[2.0, 4.0], &d, &DichotomyOptions::default())?;
    let flat = rep.slope(4.0).unwrap_or(f64::NAN);
    let growing = rep.slope(2.0).unwrap_or(f64::NAN);
    outcome(
        flat.abs() <= 0.1 && (growing - 0.25).abs() <= 0.4 * 0.25,
        format!("slope {flat:.4} at q=4, {growing:.4} at q=2"),
    )
}

fn anisotropy() -> Result<Outcome> {
    from_rows(anisotropy_suite(&SuiteOptions::default())?)
}

fn qc_verdicts() -> Result<Outcome> {
    let p = BesovParams::scaling_invariant(0.5, 2.0)?;
    let opts = QcOptions::default();
    let cases = [
        (Homeomorphism::identity(), Verdict::BiLipschitzLike),
        (Homeomorphism::diag(1.5, 1.5), Verdict::BiLipschitzLike),
        (Homeomorphism::RadialStretch { alpha: 2.0 }, Verdict::QcNotBiLipschitzLike),
        (Homeomorphism::cusp(30)?, Verdict::DistortionUnbounded),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (phi, want) in cases {
        let rep = qc_check(&phi, &p, &opts)?;
        ok &= rep.verdict == want;
        detail.push(format!("{} -> {}", rep.label, rep.verdict.as_str()));
    }
    outcome(ok, detail.join(", "))
}

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir().expect("temp dir");
    let manifest = dir.path().join("lemmas.toml");
    std::fs::write(
        &manifest,
        "command = \"verify-lemmas\"\nseed = 7\n\n[params]\nn = 2\ns = 0.5\np = 4.0\nq = 2.0\n\
         scaling_invariant = true\n\n[domain]\nside_length = 4.0\nresolution = 64\n",
    )
    .expect("write manifest");
    let run = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_besov-lab"))
            .arg("--manifest")
            .arg(&manifest)
            .arg("--sequential")
            .arg("--out-dir")
            .arg(out)
            .output()
            .expect("spawn besov-lab")
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (ra, rb) = (run(&a), run(&b));
    let file = "verify_lemmas.csv";
    let (fa, fb) = (std::fs::read(a.join(file)), std::fs::read(b.join(file)));
    // Summaries name the output directory, which differs by design.
    let summary = |o: &std::process::Output| {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .filter(|l| !l.starts_with("wrote "))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let same = match (&fa, &fb) {
        (Ok(x), Ok(y)) => x == y && !x.is_empty(),
        _ => false,
    };
    outcome(
        same && summary(&ra) == summary(&rb) && ra.status.code() == rb.status.code(),
        format!(
            "exit codes {:?}/{:?}, {} bytes, identical: {same}",
            ra.status.code(),
            rb.status.code(),
            fa.map(|x| x.len()).unwrap_or(0)
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("characterization bracket", characterization_bracket),
        ("scaling invariance", scaling_invariance),
        ("bump-stack brackets", stack_brackets),
        ("annulus capacity upper bound", capacity_upper),
        ("segment capacity lower bound", capacity_lower),
        ("composition dichotomy", dichotomy),
        ("anisotropic box exponent", anisotropy),
        ("qc-check verdicts", qc_verdicts),
        ("determinism", determinism),
    ];
    // `cargo test -- <filter>` runs matching criteria only.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let (passed, detail) = match check() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {detail} ({:.1}s)",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
