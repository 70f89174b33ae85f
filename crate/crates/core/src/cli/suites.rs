//! Property suites behind `verify-lemmas`: two-sided brackets for bump
//! stacks, the capacity bounds, and the anisotropic-box exponent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::besov::separated::{separated_norm, Patch, SeparatedOptions};
use crate::besov::{besov_norm_difference, default_sampler, lq_sum, BesovParams};
use crate::capacity::{verify_capacity_lower, verify_capacity_upper, SolverConfig};
use crate::constructions::{make_anisotropic_box, make_dyadic_stack, BumpFamily, StackMode};
use crate::error::Result;
use crate::grid::{tent, Domain, Point};

/// One checked property: `measured` must lie in `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub suite: String,
    pub check: String,
    pub measured: f64,
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

impl CheckRow {
    fn new(suite: &str, check: String, measured: f64, lower: f64, upper: f64) -> Self {
        CheckRow {
            suite: suite.into(),
            check,
            measured,
            lower,
            upper,
            passed: measured.is_finite() && measured >= lower && measured <= upper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteOptions {
    pub s: f64,
    pub seed: u64,
    /// Amplitude draws per bracket.
    pub draws: usize,
    pub stack_resolution: usize,
    pub capacity_resolution: usize,
    pub anisotropy_resolution: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            s: 0.5,
            seed: 0,
            draws: 3,
            stack_resolution: 256,
            capacity_resolution: 64,
            anisotropy_resolution: 256,
        }
    }
}

/// Largest relative deviation from the mean.
pub fn spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values
        .iter()
        .map(|v| (v / mean - 1.0).abs())
        .fold(0.0, f64::max)
}

fn amplitudes(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(0.2..1.0)).collect()
}

/// `‖max(0, 1 - |x|/r)‖_{L^p(R^2)}`.
pub fn tent_lp(r: f64, p: f64) -> f64 {
    (2.0 * std::f64::consts::PI * r * r / ((p + 1.0) * (p + 2.0))).powf(1.0 / p)
}

fn patches(fam: &BumpFamily) -> Vec<Patch<'static>> {
    fam.radii
        .iter()
        .zip(&fam.amplitudes)
        .map(|(&r, &b)| Patch::new(r, move |y: Point| b * tent(y, [0.0, 0.0], r, 1.0)))
        .collect()
}

/// Centres on the `x1` axis with 9-dilates disjoint by a 1% margin.
pub fn collinear_centers(radii: &[f64]) -> Vec<Point> {
    let mut out: Vec<Point> = vec![[0.0, 0.0]];
    for w in radii.windows(2) {
        let last = out[out.len() - 1][0];
        out.push([last + 9.09 * (w[0] + w[1]), 0.0]);
    }
    let mid = 0.5 * out[out.len() - 1][0];
    out.iter().map(|c| [c[0] - mid, 0.0]).collect()
}

const RADII: [f64; 3] = [0.25, 0.5, 1.0];

fn qs(s: f64) -> [f64; 2] {
    [2.0, 2.0 / s]
}

/// Concentric and 9-disjoint dyadic stacks: the norm over `‖b‖_q`, and over
/// `‖(2^{js} R^{-s} ‖f_j‖_p)_j‖_q`, must not depend on `R` by more than 30%.
pub fn dyadic_stack_suite(opts: &SuiteOptions) -> Result<Vec<CheckRow>> {
    let name = "dyadic-stack";
    let mut rows = Vec::new();
    let domain = Domain::new(4.0, opts.stack_resolution)?;
    let sampler = default_sampler(&domain, opts.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for draw in 0..opts.draws {
        let b = amplitudes(&mut rng, 6);
        for q in qs(opts.s) {
            let params = BesovParams::scaling_invariant(opts.s, q)?;
            let bq = lq_sum(b.iter().copied(), q);
            let ratios = RADII
                .iter()
                .map(|&r| {
                    let (_, g) = make_dyadic_stack(&[[0.0, 0.0]], r, &b, StackMode::Concentric, domain)?;
                    Ok(besov_norm_difference(&g, &params, &sampler)? / bq)
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(CheckRow::new(
                name,
                format!("concentric draw {draw} q={q}: spread over R"),
                spread(&ratios),
                0.0,
                0.3,
            ));
        }
    }
    for draw in 0..opts.draws {
        let b = amplitudes(&mut rng, 4);
        for q in qs(opts.s) {
            let params = BesovParams::scaling_invariant(opts.s, q)?;
            let p = params.p;
            let mut cs = Vec::new();
            for &big_r in &RADII {
                let radii: Vec<f64> = (0..4).map(|j| big_r * 0.5f64.powi(j)).collect();
                let fam = BumpFamily::new(collinear_centers(&radii), radii.clone(), b.clone())?;
                fam.require_nine_disjoint()?;
                let norm = separated_norm(&patches(&fam), &params, &SeparatedOptions::default())?;
                let weights = radii.iter().zip(&b).enumerate().map(|(j, (&r, &bj))| {
                    2f64.powf(j as f64 * opts.s) * big_r.powf(-opts.s) * bj * tent_lp(r, p)
                });
                cs.push(norm / lq_sum(weights, q));
            }
            rows.push(CheckRow::new(
                name,
                format!("disjoint draw {draw} q={q}: lower constant"),
                cs.iter().copied().fold(f64::INFINITY, f64::min),
                1e-3,
                f64::INFINITY,
            ));
            rows.push(CheckRow::new(
                name,
                format!("disjoint draw {draw} q={q}: spread over R"),
                spread(&cs),
                0.0,
                0.3,
            ));
        }
    }
    // The separated estimator against the grid on two collinear bumps.
    let params = BesovParams::scaling_invariant(opts.s, 2.0)?;
    let radii = [1.0, 0.5];
    let fam = BumpFamily::new(collinear_centers(&radii), radii.to_vec(), vec![1.0, 0.7])?;
    let wide = Domain::new(32.0, 512)?;
    let grid = besov_norm_difference(&fam.sample(wide)?, &params, &default_sampler(&wide, opts.seed)?)?;
    let sep = separated_norm(&patches(&fam), &params, &SeparatedOptions::default())?;
    rows.push(CheckRow::new(name, "separated / grid on a disjoint pair".into(), sep / grid, 0.9, 1.1));
    Ok(rows)
}

/// Equal-radius 9-disjoint stacks: the norm over `‖b‖_p` must not depend on
/// `R` or the ball count by more than 30%.
pub fn equal_stack_suite(opts: &SuiteOptions) -> Result<Vec<CheckRow>> {
    let name = "equal-stack";
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    for draw in 0..opts.draws {
        let b = amplitudes(&mut rng, 8);
        for q in qs(opts.s) {
            let params = BesovParams::scaling_invariant(opts.s, q)?;
            let mut ratios = Vec::new();
            for &big_r in &RADII {
                for m in [1usize, 2, 4, 8] {
                    let radii = vec![big_r; m];
                    let fam = BumpFamily::new(collinear_centers(&radii), radii, b[..m].to_vec())?;
                    fam.require_nine_disjoint()?;
                    let norm = separated_norm(&patches(&fam), &params, &SeparatedOptions::default())?;
                    ratios.push(norm / lq_sum(b[..m].iter().copied(), params.p));
                }
            }
            rows.push(CheckRow::new(
                name,
                format!("draw {draw} q={q}: spread over R and m"),
                spread(&ratios),
                0.0,
                0.3,
            ));
            rows.push(CheckRow::new(
                name,
                format!("draw {draw} q={q}: lower constant"),
                ratios.iter().copied().fold(f64::INFINITY, f64::min),
                1e-3,
                f64::INFINITY,
            ));
        }
    }
    let params = BesovParams::scaling_invariant(opts.s, 2.0)?;
    let radii = [0.5, 0.5];
    let fam = BumpFamily::new(collinear_centers(&radii), radii.to_vec(), vec![1.0, 0.6])?;
    let wide = Domain::new(32.0, 512)?;
    let grid = besov_norm_difference(&fam.sample(wide)?, &params, &default_sampler(&wide, opts.seed)?)?;
    let sep = separated_norm(&patches(&fam), &params, &SeparatedOptions::default())?;
    rows.push(CheckRow::new(name, "separated / grid on an equal pair".into(), sep / grid, 0.9, 1.1));
    Ok(rows)
}

/// Segment condensers: the value against `λ` grows no faster than
/// `λ^{1/q + 0.3}` and stays positive.
pub fn capacity_lower_suite(opts: &SuiteOptions) -> Result<Vec<CheckRow>> {
    let name = "capacity-lower";
    let mut rows = Vec::new();
    let domain = Domain::new(4.0, opts.capacity_resolution)?;
    let cfg = SolverConfig::default();
    for q in qs(opts.s) {
        let params = BesovParams::scaling_invariant(opts.s, q)?;
        let rep = verify_capacity_lower(&[0.125, 0.25, 0.5, 1.0], 0.9, &params, &domain, &cfg, opts.seed)?;
        rows.push(CheckRow::new(name, format!("q={q}: fitted slope"), rep.slope, f64::NEG_INFINITY, 1.0 / q + 0.3));
        rows.push(CheckRow::new(name, format!("q={q}: smallest value"), rep.floor, 1e-6, f64::INFINITY));
        rows.push(CheckRow::new(
            name,
            format!("q={q}: unconverged members"),
            rep.excluded.len() as f64,
            0.0,
            0.0,
        ));
    }
    let params = BesovParams::scaling_invariant(opts.s, 2.0)?;
    let small = verify_capacity_lower(&[0.5], 0.45, &params, &domain, &cfg, opts.seed)?;
    let large = verify_capacity_lower(&[0.5], 0.9, &params, &domain, &cfg, opts.seed)?;
    rows.push(CheckRow::new(
        name,
        "R doubled at fixed λ: relative change".into(),
        (large.rows[0].value / small.rows[0].value - 1.0).abs(),
        0.0,
        0.25,
    ));
    Ok(rows)
}

/// Annulus condensers: solver and construction decrease strictly in `R/r`
/// and the solver never exceeds the construction.
pub fn capacity_upper_suite(opts: &SuiteOptions) -> Result<Vec<CheckRow>> {
    let name = "capacity-upper";
    let domain = Domain::new(4.0, opts.capacity_resolution)?;
    let params = BesovParams::scaling_invariant(opts.s, 2.0)?;
    let table = verify_capacity_upper(&[2.0, 8.0, 32.0], &params, &domain, &SolverConfig::default(), opts.seed)?;
    let mut rows = Vec::new();
    for r in &table {
        rows.push(CheckRow::new(
            name,
            format!("ratio {}: solver / construction", r.ratio),
            r.solver / r.construction,
            0.0,
            1.0,
        ));
    }
    for w in table.windows(2) {
        rows.push(CheckRow::new(
            name,
            format!("solver {} -> {}: next / previous", w[0].ratio, w[1].ratio),
            w[1].solver / w[0].solver,
            0.0,
            1.0 - 1e-9,
        ));
        rows.push(CheckRow::new(
            name,
            format!("construction {} -> {}: next / previous", w[0].ratio, w[1].ratio),
            w[1].construction / w[0].construction,
            0.0,
            1.0 - 1e-9,
        ));
    }
    Ok(rows)
}

/// `(aspect, norm)` of the anisotropic box `A1 = A2/aspect` and the fitted
/// log-log slope, at `q = p`.
pub fn anisotropy_fit(s: f64, aspects: &[f64], a2: f64, domain: &Domain, seed: u64) -> Result<(Vec<(f64, f64)>, f64)> {
    let params = BesovParams::scaling_invariant(s, 2.0 / s)?;
    let sampler = default_sampler(domain, seed)?;
    let pts = aspects
        .iter()
        .map(|&a| {
            let (u, _) = make_anisotropic_box(a2 / a, a2, *domain)?;
            Ok((a, besov_norm_difference(&u, &params, &sampler)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok((pts, cov / var))
}

/// Norm of the anisotropic box grows like `aspect^{s/2}` within 30%.
pub fn anisotropy_suite(opts: &SuiteOptions) -> Result<Vec<CheckRow>> {
    let domain = Domain::new(8.0, opts.anisotropy_resolution)?;
    let (_, slope) = anisotropy_fit(opts.s, &[1.0, 2.0, 4.0, 8.0], 0.7, &domain, opts.seed)?;
    let target = 0.5 * opts.s;
    Ok(vec![CheckRow::new(
        "anisotropic-box",
        "norm vs aspect: fitted exponent".into(),
        slope,
        0.7 * target,
        1.3 * target,
    )])
}

/// Every suite in a fixed order.
pub fn all_suites(opts: &SuiteOptions) -> Result<Vec<CheckRow>> {
    let mut rows = dyadic_stack_suite(opts)?;
    rows.extend(equal_stack_suite(opts)?);
    rows.extend(capacity_lower_suite(opts)?);
    rows.extend(capacity_upper_suite(opts)?);
    rows.extend(anisotropy_suite(opts)?);
    Ok(rows)
}
