use serde::Serialize;

use super::{solve_condenser, CondenserSpec, SolverConfig};
use crate::besov::{besov_norm_difference, default_sampler, BesovParams};
use crate::constructions::{default_truncation, make_annulus_condenser};
use crate::error::{Error, Result};
use crate::grid::Domain;

/// Solver and explicit-construction norms of one annulus condenser.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperRow {
    pub ratio: f64,
    pub inner: f64,
    pub outer: f64,
    pub solver: f64,
    pub construction: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Annuli `B̄(c, R/ratio) ⊂ B(c, R)` with `R` as large as the support disc
/// allows; the solver starts from the explicit construction, so its value
/// never exceeds the construction's.
pub fn verify_capacity_upper(
    ratios: &[f64],
    params: &BesovParams,
    domain: &Domain,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<Vec<UpperRow>> {
    if let Some(r) = ratios.iter().find(|r| !(**r > 1.0)) {
        return Err(Error::InvalidParams(format!("annulus ratios must exceed 1, got {r}")));
    }
    let sampler = default_sampler(domain, seed)?;
    ratios
        .iter()
        .map(|&ratio| {
            let spec = CondenserSpec::annulus_with_ratio(*domain, ratio)?;
            let (r, big_r) = spec.annulus.unwrap_or((0.0, 0.0));
            let c = make_annulus_condenser(spec.center, r, big_r, default_truncation(r, big_r), *domain)?;
            let construction = besov_norm_difference(&c.grid, params, &sampler)?;
            let res = solve_condenser(&spec, params, &sampler, cfg, Some(&c.grid))?;
            Ok(UpperRow {
                ratio,
                inner: r,
                outer: big_r,
                solver: res.value,
                construction,
                iterations: res.iterations,
                converged: res.converged,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerRow {
    /// Requested `λ`.
    pub target: f64,
    /// `min(diam E, diam F) / R` of the realized node sets.
    pub lambda: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerReport {
    pub rows: Vec<LowerRow>,
    /// Log-log slope of value against `λ` over converged rows.
    pub slope: f64,
    /// Smallest converged value.
    pub floor: f64,
    /// Requested `λ` of rows left out of the fit.
    pub excluded: Vec<f64>,
}

/// Two parallel segments of length `λR` at distance `R/2` inside `B(c, R)`,
/// the exterior grounded with `E`.
pub fn verify_capacity_lower(
    lambdas: &[f64],
    radius: f64,
    params: &BesovParams,
    domain: &Domain,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<LowerReport> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
        return Err(Error::InvalidParams(format!("λ must lie in (0, 1], got {l}")));
    }
    let sampler = default_sampler(domain, seed)?;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &target in lambdas {
        let spec = CondenserSpec::parallel_segments(*domain, target * radius, 0.5 * radius, radius)?;
        let res = solve_condenser(&spec, params, &sampler, cfg, None)?;
        rows.push(LowerRow {
            target,
            lambda: spec.lambda(),
            value: res.value,
            iterations: res.iterations,
            converged: res.converged,
        });
    }
    let used: Vec<&LowerRow> = rows.iter().filter(|r| r.converged).collect();
    let excluded = rows.iter().filter(|r| !r.converged).map(|r| r.target).collect();
    let (slope, floor) = if used.len() >= 2 {
        let m = used.len() as f64;
        let xs: Vec<f64> = used.iter().map(|r| r.lambda.ln()).collect();
        let ys: Vec<f64> = used.iter().map(|r| r.value.ln()).collect();
        let mx = xs.iter().sum::<f64>() / m;
        let my = ys.iter().sum::<f64>() / m;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        (cov / var, used.iter().map(|r| r.value).fold(f64::INFINITY, f64::min))
    } else {
        (f64::NAN, used.iter().map(|r| r.value).fold(f64::INFINITY, f64::min))
    };
    Ok(LowerReport {
        rows,
        slope,
        floor,
        excluded,
    })
}
