use rayon::prelude::*;
use serde::Serialize;

use super::BesovParams;
use crate::error::{Error, Result};
use crate::grid::{
    build_offset_sampler, lattice_difference_power, levels_to_resolution, Domain,
    GridFunction, OffsetSampler,
};

/// Offsets per dyadic level kept by [`default_sampler`].
pub const DEFAULT_SAMPLES_PER_LEVEL: usize = 96;

/// Per-level contribution to a difference-norm evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelTrace {
    pub k: u32,
    /// Outer radius of the annulus.
    pub t: f64,
    /// `q`-power mean of `‖f(.+h) - f‖_p` over the level's offsets.
    pub inner: f64,
    /// Weighted contribution of the level to `‖f‖^q`.
    pub term: f64,
}

/// Breakdown of a norm evaluation; serializes to the JSON trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormTrace {
    pub value: f64,
    pub levels: Vec<LevelTrace>,
    /// Analytic contribution of `|h|` beyond the outer radius (q-th power).
    pub tail: f64,
    /// Lipschitz-based estimate of the omitted sub-grid contribution (q-th
    /// power). Reported only, never added to `value`.
    pub truncation_estimate: f64,
}

/// Outer radius used by the default sampler and the oracle.
pub fn default_outer_radius(domain: &Domain) -> f64 {
    0.5 * domain.side_length
}

/// Stratified sampler down to nearest-neighbour offsets with outer radius `L/2`.
pub fn default_sampler(domain: &Domain, seed: u64) -> Result<OffsetSampler> {
    let outer = default_outer_radius(domain);
    build_offset_sampler(
        domain,
        outer,
        levels_to_resolution(domain, outer),
        DEFAULT_SAMPLES_PER_LEVEL,
        seed,
    )
}

pub(crate) fn check_support(f: &GridFunction) -> Result<f64> {
    let l = f.domain().side_length;
    match f.support_radius() {
        None => Err(Error::Precondition(
            "support radius must be declared: tail correction needs compact support".into(),
        )),
        Some(r) if r > 0.25 * l * (1.0 + 1e-12) => Err(Error::Precondition(format!(
            "support radius {r} exceeds L/4 = {}; tail correction precondition violated",
            0.25 * l
        ))),
        Some(r) => Ok(r),
    }
}

fn check_sampler(f: &GridFunction, sampler: &OffsetSampler) -> Result<()> {
    let h = f.spacing();
    if (sampler.spacing - h).abs() > 1e-12 * h {
        return Err(Error::Precondition(format!(
            "sampler spacing {} does not match grid spacing {h}",
            sampler.spacing
        )));
    }
    if sampler.levels.is_empty() {
        return Err(Error::Precondition("sampler has no levels".into()));
    }
    Ok(())
}

#[inline]
pub(crate) fn offset_length(offset: (i64, i64), spacing: f64) -> f64 {
    ((offset.0 * offset.0 + offset.1 * offset.1) as f64).sqrt() * spacing
}

/// `‖f(.+h) - f‖_{L^p(R^2)}` for every sampled offset, grouped by level.
pub(crate) fn inner_norms(f: &GridFunction, sampler: &OffsetSampler, p: f64) -> Vec<Vec<f64>> {
    let Some(bbox) = f.nonzero_box() else {
        return sampler
            .levels
            .iter()
            .map(|l| vec![0.0; l.offsets.len()])
            .collect();
    };
    let h2 = f.spacing() * f.spacing();
    sampler
        .levels
        .iter()
        .map(|level| {
            level
                .offsets
                .par_iter()
                .map(|&off| {
                    let s = lattice_difference_power(f, &bbox, off, p);
                    if p.is_infinite() {
                        s
                    } else {
                        (h2 * s).powf(1.0 / p)
                    }
                })
                .collect()
        })
        .collect()
}

/// Per-offset multipliers `c_h` with `‖f‖^q = Σ_h c_h ‖Δ_h f‖_p^q`, the tail
/// included. Finite `q` only.
pub(crate) fn offset_coefficients(params: &BesovParams, sampler: &OffsetSampler) -> Vec<Vec<f64>> {
    let q = params.q;
    let n = f64::from(params.n);
    let outer = &sampler.levels[0];
    let tail_factor =
        params.sphere_measure() * outer.outer.powf(-q * params.s) / (q * params.s);
    sampler
        .levels
        .iter()
        .enumerate()
        .map(|(li, level)| {
            level
                .offsets
                .iter()
                .map(|&off| {
                    let r = offset_length(off, sampler.spacing);
                    let mut c = level.weight * r.powf(-q * params.s - n);
                    if li == 0 {
                        c += tail_factor / level.offsets.len() as f64;
                    }
                    c
                })
                .collect()
        })
        .collect()
}

pub(crate) fn aggregate(
    params: &BesovParams,
    sampler: &OffsetSampler,
    inner: &[Vec<f64>],
) -> (f64, Vec<LevelTrace>, f64) {
    let q = params.q;
    let n = f64::from(params.n);
    let h = sampler.spacing;
    let mut traces = Vec::with_capacity(sampler.levels.len());
    if q.is_infinite() {
        let mut sup = 0.0_f64;
        for (level, vals) in sampler.levels.iter().zip(inner) {
            let mut lsup = 0.0_f64;
            let mut imax = 0.0_f64;
            for (&off, &v) in level.offsets.iter().zip(vals) {
                lsup = lsup.max(offset_length(off, h).powf(-params.s) * v);
                imax = imax.max(v);
            }
            sup = sup.max(lsup);
            traces.push(LevelTrace {
                k: level.k,
                t: level.outer,
                inner: imax,
                term: lsup,
            });
        }
        return (sup, traces, 0.0);
    }
    let mut total = 0.0;
    for (level, vals) in sampler.levels.iter().zip(inner) {
        let mut term = 0.0;
        let mut mean_q = 0.0;
        for (&off, &v) in level.offsets.iter().zip(vals) {
            let vq = v.powf(q);
            term += level.weight * offset_length(off, h).powf(-q * params.s - n) * vq;
            mean_q += vq;
        }
        mean_q /= vals.len() as f64;
        total += term;
        traces.push(LevelTrace {
            k: level.k,
            t: level.outer,
            inner: mean_q.powf(1.0 / q),
            term,
        });
    }
    let outer = &sampler.levels[0];
    let c_q = traces[0].inner.powf(q);
    let tail = params.sphere_measure() * c_q * outer.outer.powf(-q * params.s) / (q * params.s);
    total += tail;
    (total.powf(1.0 / q), traces, tail)
}

/// Difference-definition estimate of `‖f‖_{B^s_{p,q}}` over the sampler's
/// offsets, plus the analytic tail beyond its outer radius.
pub fn besov_norm_difference(
    f: &GridFunction,
    params: &BesovParams,
    sampler: &OffsetSampler,
) -> Result<f64> {
    Ok(besov_norm_difference_traced(f, params, sampler)?.value)
}

pub fn besov_norm_difference_traced(
    f: &GridFunction,
    params: &BesovParams,
    sampler: &OffsetSampler,
) -> Result<NormTrace> {
    params.validate()?;
    check_support(f)?;
    check_sampler(f, sampler)?;
    let inner = inner_norms(f, sampler, params.p);
    let (value, levels, tail) = aggregate(params, sampler, &inner);
    let truncation_estimate = if params.q.is_finite() {
        let rho = sampler.inner_radius();
        let q = params.q;
        let lip = f.discrete_lipschitz();
        let supp = f.support_measure();
        params.sphere_measure() * (lip * supp.powf(1.0 / params.p)).powf(q)
            * rho.powf(q * (1.0 - params.s))
            / (q * (1.0 - params.s))
    } else {
        0.0
    };
    Ok(NormTrace {
        value,
        levels,
        tail,
        truncation_estimate,
    })
}

/// Largest resolution accepted by the exhaustive oracle.
pub const ORACLE_MAX_RESOLUTION: usize = 32;

/// Exhaustive reference for [`besov_norm_difference`] with outer radius `L/2`.
pub fn besov_norm_oracle(f: &GridFunction, params: &BesovParams) -> Result<f64> {
    besov_norm_oracle_with_radius(f, params, default_outer_radius(f.domain()))
}

/// Direct double sum over node pairs `(x, x + h)` for every lattice offset
/// `0 < |h| < outer_radius`, with the same analytic tail beyond it. Written
/// independently of the sampled estimator.
pub fn besov_norm_oracle_with_radius(
    f: &GridFunction,
    params: &BesovParams,
    outer_radius: f64,
) -> Result<f64> {
    params.validate()?;
    check_support(f)?;
    let n = f.resolution();
    if n > ORACLE_MAX_RESOLUTION {
        return Err(Error::Precondition(format!(
            "oracle is quartic in N; N = {n} exceeds {ORACLE_MAX_RESOLUTION}"
        )));
    }
    let ni = n as i64;
    let h = f.spacing();
    let (s, p, q) = (params.s, params.p, params.q);
    let dim = f64::from(params.n);
    let at = |i: i64, j: i64| -> f64 {
        if (0..ni).contains(&i) && (0..ni).contains(&j) {
            f.get(i as usize, j as usize)
        } else {
            0.0
        }
    };
    let m = (outer_radius / h).ceil() as i64 + 1;
    let mut sum = 0.0;
    let mut sup = 0.0_f64;
    let mut outer_sum_q = 0.0;
    let mut outer_count = 0usize;
    for di in -m..=m {
        for dj in -m..=m {
            if di == 0 && dj == 0 {
                continue;
            }
            let len = ((di * di + dj * dj) as f64).sqrt() * h;
            if len >= outer_radius {
                continue;
            }
            // All x with x or x + h in the box.
            let mut acc = 0.0;
            let mut mx = 0.0_f64;
            for xi in (-di.max(0))..(ni - di.min(0)) {
                for xj in (-dj.max(0))..(ni - dj.min(0)) {
                    let d = (at(xi + di, xj + dj) - at(xi, xj)).abs();
                    if p.is_infinite() {
                        mx = mx.max(d);
                    } else {
                        acc += d.powf(p);
                    }
                }
            }
            let inner = if p.is_infinite() {
                mx
            } else {
                (h * h * acc).powf(1.0 / p)
            };
            if q.is_infinite() {
                sup = sup.max(len.powf(-s) * inner);
                continue;
            }
            sum += h * h * len.powf(-q * s - dim) * inner.powf(q);
            if len >= 0.5 * outer_radius {
                outer_sum_q += inner.powf(q);
                outer_count += 1;
            }
        }
    }
    if q.is_infinite() {
        return Ok(sup);
    }
    if outer_count > 0 {
        let c_q = outer_sum_q / outer_count as f64;
        sum += params.sphere_measure() * c_q * outer_radius.powf(-q * s) / (q * s);
    }
    Ok(sum.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_offset_sampler, sample, tent, OffsetSampler};
    use approx::assert_relative_eq;

    fn tent_grid(l: f64, n: usize, r: f64) -> GridFunction {
        let d = Domain::new(l, n).unwrap();
        sample(|x| tent(x, [0.0, 0.0], r, 1.0), d, Some(r)).unwrap()
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let d = Domain::new(4.0, 16).unwrap();
        let f = GridFunction::zeros(d);
        let p = BesovParams::scaling_invariant(0.5, 2.0).unwrap();
        let s = default_sampler(&d, 0).unwrap();
        assert_eq!(besov_norm_difference(&f, &p, &s).unwrap(), 0.0);
        assert_eq!(besov_norm_oracle(&f, &p).unwrap(), 0.0);
    }

    #[test]
    fn homogeneity_is_exact() {
        let f = tent_grid(8.0, 32, 1.5);
        let p = BesovParams::scaling_invariant(0.5, 3.0).unwrap();
        let s = default_sampler(f.domain(), 4).unwrap();
        let base = besov_norm_difference(&f, &p, &s).unwrap();
        for lambda in [-3.0, 0.5, 7.0] {
            let v = besov_norm_difference(&f.scaled(lambda), &p, &s).unwrap();
            assert_relative_eq!(v / base, f64::abs(lambda), max_relative = 1e-12);
        }
    }

    #[test]
    fn missing_or_wide_support_is_rejected() {
        let d = Domain::new(4.0, 16).unwrap();
        let f = sample(|x| tent(x, [0.0, 0.0], 1.0, 1.0), d, None).unwrap();
        let p = BesovParams::scaling_invariant(0.5, 2.0).unwrap();
        let s = default_sampler(&d, 0).unwrap();
        assert!(besov_norm_difference(&f, &p, &s).is_err());
        let wide = sample(|x| tent(x, [0.0, 0.0], 1.5, 1.0), d, Some(1.5)).unwrap();
        assert!(besov_norm_difference(&wide, &p, &s).is_err());
    }

    #[test]
    fn sampler_spacing_must_match() {
        let f = tent_grid(4.0, 16, 1.0);
        let p = BesovParams::scaling_invariant(0.5, 2.0).unwrap();
        let other = Domain::new(4.0, 32).unwrap();
        let s = default_sampler(&other, 0).unwrap();
        assert!(besov_norm_difference(&f, &p, &s).is_err());
    }

    #[test]
    fn oracle_guard_and_spike() {
        let big = tent_grid(8.0, 64, 1.0);
        let p = BesovParams::scaling_invariant(0.5, 2.0).unwrap();
        assert!(besov_norm_oracle(&big, &p).is_err());
        let d = Domain::new(8.0, 8).unwrap();
        let mut v = vec![0.0; 64];
        v[3 * 8 + 3] = 1.0;
        let spike = GridFunction::from_values(d, v, Some(2.0)).unwrap();
        let o = besov_norm_oracle(&spike, &p).unwrap();
        assert!(o.is_finite() && o > 0.0);
    }

    #[test]
    fn exhaustive_estimator_equals_oracle() {
        for (n, q) in [(8, 2.0), (16, 4.0), (16, f64::INFINITY)] {
            let f = tent_grid(4.0, n, 1.0);
            let p = BesovParams::scaling_invariant(0.5, q).unwrap();
            let s = OffsetSampler::exhaustive(f.domain(), 2.0).unwrap();
            let a = besov_norm_difference(&f, &p, &s).unwrap();
            let b = besov_norm_oracle(&f, &p).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn sampled_estimator_close_to_oracle() {
        // Tent radius 1, L = 8, N = 32, s = 1/2, p = q = 4.
        let f = tent_grid(8.0, 32, 1.0);
        let p = BesovParams::scaling_invariant(0.5, 4.0).unwrap();
        let oracle = besov_norm_oracle(&f, &p).unwrap();
        let s = build_offset_sampler(f.domain(), 4.0, 6, 96, 11).unwrap();
        let est = besov_norm_difference(&f, &p, &s).unwrap();
        assert!(((est - oracle) / oracle).abs() < 0.05, "{est} vs {oracle}");
    }

    #[test]
    fn trace_reports_levels_and_truncation() {
        let f = tent_grid(8.0, 32, 1.0);
        let p = BesovParams::scaling_invariant(0.5, 2.0).unwrap();
        let s = default_sampler(f.domain(), 0).unwrap();
        let t = besov_norm_difference_traced(&f, &p, &s).unwrap();
        assert_eq!(t.levels.len(), s.levels.len());
        assert!(t.tail > 0.0 && t.truncation_estimate > 0.0);
        let total: f64 = t.levels.iter().map(|l| l.term).sum::<f64>() + t.tail;
        assert_relative_eq!(total.sqrt(), t.value, max_relative = 1e-12);
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"levels\""));
    }

    #[test]
    fn coefficients_reproduce_aggregate() {
        let f = tent_grid(8.0, 32, 1.0);
        let p = BesovParams::scaling_invariant(0.5, 3.0).unwrap();
        let s = default_sampler(f.domain(), 2).unwrap();
        let inner = inner_norms(&f, &s, p.p);
        let c = offset_coefficients(&p, &s);
        let via_c: f64 = c
            .iter()
            .flatten()
            .zip(inner.iter().flatten())
            .map(|(c, v)| c * v.powf(3.0))
            .sum();
        let (value, _, _) = aggregate(&p, &s, &inner);
        assert_relative_eq!(via_c.powf(1.0 / 3.0), value, max_relative = 1e-12);
    }
}
