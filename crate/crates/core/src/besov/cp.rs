use std::collections::HashMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::difference::{LevelTrace, NormTrace};
use super::BesovParams;
use crate::error::{Error, Result};
use crate::grid::{lattice_difference_power, Domain, GridFunction};

/// Offset budget for ball averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpOptions {
    /// Offsets kept per dyadic ring of each ball; rings with fewer lattice
    /// points are enumerated exhaustively.
    pub samples_per_annulus: usize,
    pub seed: u64,
}

impl Default for CpOptions {
    fn default() -> Self {
        CpOptions {
            samples_per_annulus: 128,
            seed: 0,
        }
    }
}

/// `C_p(f)(t)` at a decreasing list of scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpProfile {
    pub scales: Vec<(f64, f64)>,
    pub params: BesovParams,
    /// `(Lip f · |supp f|^{1/p})^q t_min^{q(1-s)} / (q(1-s))`: what the
    /// scales below the smallest one would add at most, up to constants.
    pub truncation_estimate: f64,
}

/// Dyadic scales `L/2, L/4, ...`, stopping before `2h`.
pub fn dyadic_scales(domain: &Domain, count: usize) -> Vec<f64> {
    let h = domain.spacing();
    (0..count)
        .map(|k| 0.5 * domain.side_length * 0.5f64.powi(k as i32))
        .take_while(|&t| t >= 2.0 * h)
        .collect()
}

pub fn cp_profile(f: &GridFunction, params: &BesovParams, scales: &[f64]) -> Result<CpProfile> {
    cp_profile_with(f, params, scales, CpOptions::default())
}

/// Ball-oscillation profile
/// `C_p(f)(t) = (∫ ⨍_{B(x,t)} |f(x) - f(y)|^p dy dx)^{1/p}` on the lattice.
///
/// Swapping the order of summation turns the ball average into the mean of
/// `‖f(.+h) - f‖_p^p` over lattice offsets `|h| < t` (the zero offset
/// included), which is what is computed; each ball is split into dyadic
/// rings that are subsampled independently.
pub fn cp_profile_with(
    f: &GridFunction,
    params: &BesovParams,
    scales: &[f64],
    opts: CpOptions,
) -> Result<CpProfile> {
    params.validate()?;
    let h = f.spacing();
    let half = 0.5 * f.domain().side_length;
    let mut sorted = scales.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(Error::Precondition(format!("duplicate scale {}", w[0])));
        }
    }
    for &t in &sorted {
        if !(t > h) {
            return Err(Error::Precondition(format!(
                "scale {t} is not above the grid spacing {h}"
            )));
        }
        if t > half * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!("scale {t} exceeds L/2 = {half}")));
        }
    }
    let p = params.p;
    let bbox = f.nonzero_box();
    let mut cache: HashMap<(i64, i64), f64> = HashMap::new();
    let mut out = Vec::with_capacity(sorted.len());
    for (si, &t) in sorted.iter().enumerate() {
        let rings = ball_rings(t, h, opts, si as u64);
        let ball_count: usize = 1 + rings.iter().map(|r| r.0).sum::<usize>();
        let missing: Vec<(i64, i64)> = rings
            .iter()
            .flat_map(|r| r.1.iter().copied())
            .filter(|o| !cache.contains_key(o))
            .collect();
        let fresh: Vec<f64> = match &bbox {
            None => vec![0.0; missing.len()],
            Some(b) => missing
                .par_iter()
                .map(|&o| lattice_difference_power(f, b, o, p))
                .collect(),
        };
        for (o, v) in missing.into_iter().zip(fresh) {
            cache.insert(o, v);
        }
        let value = if p.is_infinite() {
            rings
                .iter()
                .flat_map(|r| r.1.iter())
                .map(|o| cache[o])
                .fold(0.0, f64::max)
        } else {
            let mut total = 0.0;
            for (count, offs) in &rings {
                let mean: f64 = offs.iter().map(|o| cache[o]).sum::<f64>() / offs.len() as f64;
                total += *count as f64 * mean;
            }
            (h * h * total / ball_count as f64).powf(1.0 / p)
        };
        out.push((t, value));
    }
    let truncation_estimate = match (params.q.is_finite(), sorted.last()) {
        (true, Some(&tmin)) => {
            let q = params.q;
            let lip = f.discrete_lipschitz();
            let supp = f.support_measure();
            (lip * supp.powf(1.0 / p)).powf(q) * tmin.powf(q * (1.0 - params.s))
                / (q * (1.0 - params.s))
        }
        _ => 0.0,
    };
    Ok(CpProfile {
        scales: out,
        params: *params,
        truncation_estimate,
    })
}

/// Dyadic rings `[t/2^{m+1}, t/2^m)` partitioning the punctured ball of
/// radius `t`; the last ring reaches down to the nearest neighbours. Returns
/// `(lattice count, kept offsets)` per ring.
fn ball_rings(t: f64, h: f64, opts: CpOptions, stream: u64) -> Vec<(usize, Vec<(i64, i64)>)> {
    let m = (t / h).ceil() as i64;
    let mut rings: Vec<Vec<(i64, i64)>> = Vec::new();
    let mut bounds = Vec::new();
    let mut outer = t;
    loop {
        let inner = 0.5 * outer;
        if inner < h {
            bounds.push((0.0, outer));
            break;
        }
        bounds.push((inner, outer));
        outer = inner;
    }
    rings.resize(bounds.len(), Vec::new());
    for i in -m..=m {
        for j in -m..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let len = ((i * i + j * j) as f64).sqrt() * h;
            if len >= t {
                continue;
            }
            let idx = bounds
                .iter()
                .position(|&(lo, hi)| len >= lo && len < hi)
                .expect("ring partition covers the ball");
            rings[idx].push((i, j));
        }
    }
    rings
        .into_iter()
        .enumerate()
        .filter(|(_, r)| !r.is_empty())
        .map(|(ri, all)| {
            let count = all.len();
            if count <= opts.samples_per_annulus {
                (count, all)
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    opts.seed ^ (stream << 40) ^ ((ri as u64) << 20) ^ 0x5eed,
                );
                let mut picked =
                    index::sample(&mut rng, count, opts.samples_per_annulus).into_vec();
                picked.sort_unstable();
                (count, picked.into_iter().map(|k| all[k]).collect())
            }
        })
        .collect()
}

pub fn besov_norm_cp(profile: &CpProfile) -> Result<f64> {
    Ok(besov_norm_cp_traced(profile)?.value)
}

/// `(∫ [t^{-s} C_p(f)(t)]^q dt/t)^{1/q}` as a Riemann sum in `ln t` over the
/// profile's scales (weight `ln 2` each for dyadic scales), plus
/// `C(t_max)^q t_max^{-sq}/(sq)` for `t > t_max`.
pub fn besov_norm_cp_traced(profile: &CpProfile) -> Result<NormTrace> {
    if profile.scales.is_empty() {
        return Err(Error::Precondition("empty C_p profile".into()));
    }
    if profile.scales.len() < 3 {
        return Err(Error::Precondition(format!(
            "C_p quadrature needs at least 3 scales, got {}",
            profile.scales.len()
        )));
    }
    let s = profile.params.s;
    let q = profile.params.q;
    let weighted: Vec<f64> = profile
        .scales
        .iter()
        .map(|&(t, c)| t.powf(-s) * c)
        .collect();
    let mut levels = Vec::with_capacity(profile.scales.len());
    if q.is_infinite() {
        let sup = weighted.iter().copied().fold(0.0, f64::max);
        for (k, (&(t, c), w)) in profile.scales.iter().zip(&weighted).enumerate() {
            levels.push(LevelTrace {
                k: k as u32,
                t,
                inner: c,
                term: *w,
            });
        }
        return Ok(NormTrace {
            value: sup,
            levels,
            tail: 0.0,
            truncation_estimate: 0.0,
        });
    }
    let powered: Vec<f64> = weighted.iter().map(|w| w.powf(q)).collect();
    let m = profile.scales.len();
    let gap = |k: usize| (profile.scales[k].0 / profile.scales[k + 1].0).ln();
    let mut total = 0.0;
    for k in 0..m {
        let (t, c) = profile.scales[k];
        // Each scale stands for the log-interval halfway to its neighbours;
        // the end scales mirror their single gap, so dyadic scales all get ln 2.
        let below = if k + 1 < m { gap(k) } else { gap(k - 1) };
        let above = if k > 0 { gap(k - 1) } else { gap(k) };
        let term = 0.5 * (below + above) * powered[k];
        total += term;
        levels.push(LevelTrace {
            k: k as u32,
            t,
            inner: c,
            term,
        });
    }
    let (tmax, cmax) = profile.scales[0];
    let tail = cmax.powf(q) * tmax.powf(-s * q) / (s * q);
    total += tail;
    Ok(NormTrace {
        value: total.powf(1.0 / q),
        levels,
        tail,
        truncation_estimate: profile.truncation_estimate,
    })
}
