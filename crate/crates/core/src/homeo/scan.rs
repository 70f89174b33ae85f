use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Homeomorphism;
use crate::error::{Error, Result};
use crate::grid::{Domain, Point};

/// Smallest probe count accepted by the scans.
pub const MIN_PROBES: usize = 1000;

/// A probe triple `x, y = x + d u, z = x + d v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QsTriple {
    pub x: Point,
    pub y: Point,
    pub z: Point,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QsScan {
    /// Largest observed `|φx - φy| / |φx - φz|`.
    pub h_hat: f64,
    pub worst: Option<QsTriple>,
    pub probes: usize,
    /// Candidates redrawn because a point left the region.
    pub resampled: usize,
}

/// `max |φx - φy| / |φx - φz|` over seeded random triples with
/// `|x - y| = |x - z|` in the box of `region`.
pub fn quasisymmetry_scan(phi: &Homeomorphism, probes: usize, seed: u64, region: &Domain) -> Result<f64> {
    Ok(quasisymmetry_scan_with(phi, probes, seed, region, 0.0)?.h_hat)
}

/// [`quasisymmetry_scan`] keeping every point out of the open ball of
/// radius `exclude_radius` about the origin. Distances are log-uniform in
/// `[1e-6 L, L/2]`. The first `P` probes of a run do not depend on the
/// total count, so longer runs extend shorter ones.
pub fn quasisymmetry_scan_with(
    phi: &Homeomorphism,
    probes: usize,
    seed: u64,
    region: &Domain,
    exclude_radius: f64,
) -> Result<QsScan> {
    phi.validate()?;
    region.validate()?;
    if probes < MIN_PROBES {
        return Err(Error::InvalidParams(format!(
            "quasisymmetry scan needs at least {MIN_PROBES} probes, got {probes}"
        )));
    }
    let half = 0.5 * region.side_length;
    if !(exclude_radius >= 0.0 && exclude_radius < half) {
        return Err(Error::InvalidParams(format!(
            "excluded radius {exclude_radius} must lie in [0, L/2)"
        )));
    }
    let admissible = |p: Point| {
        p[0].abs() <= half && p[1].abs() <= half && p[0].hypot(p[1]) >= exclude_radius
    };
    let (dmin, dmax) = ((1e-6 * region.side_length).ln(), half.ln());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = QsScan {
        h_hat: 0.0,
        worst: None,
        probes,
        resampled: 0,
    };
    let mut taken = 0;
    while taken < probes {
        let x = [rng.gen_range(-half..=half), rng.gen_range(-half..=half)];
        let d = rng.gen_range(dmin..=dmax).exp();
        let (a, b) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
        let u = [d * a.cos(), d * a.sin()];
        let v = [d * b.cos(), d * b.sin()];
        let y = [x[0] + u[0], x[1] + u[1]];
        let z = [x[0] + v[0], x[1] + v[1]];
        if !(admissible(x) && admissible(y) && admissible(z)) {
            out.resampled += 1;
            if out.resampled > 1000 * probes {
                return Err(Error::Geometry("quasisymmetry region rejects almost every triple".into()));
            }
            continue;
        }
        let (py, pz) = (phi.local_difference(x, u), phi.local_difference(x, v));
        let den = pz[0].hypot(pz[1]);
        if den == 0.0 {
            out.resampled += 1;
            continue;
        }
        let ratio = py[0].hypot(py[1]) / den;
        if !ratio.is_finite() {
            return Err(Error::Numerical(format!("non-finite image ratio at {x:?}")));
        }
        if ratio > out.h_hat {
            out.h_hat = ratio;
            out.worst = Some(QsTriple { x, y, z, ratio });
        }
        taken += 1;
    }
    Ok(out)
}

/// Node-count measure of the Jacobian levels
/// `A_k = {2^{-2(k+1)} <= |J| < 2^{-2k}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCensus {
    /// Nonempty levels inside the requested range, ascending in `k`.
    pub entries: Vec<(i32, f64)>,
    /// Measure of nodes with `J = 0`.
    pub zero_measure: f64,
    /// Measure of nodes with `J = ∞` or `k` outside the requested range.
    pub outside_measure: f64,
    pub domain: Domain,
}

impl LevelCensus {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum::<f64>() + self.zero_measure + self.outside_measure
    }

    pub fn nonempty_bins(&self) -> usize {
        self.entries.len()
    }
}

/// Level index of a positive finite Jacobian in dimension 2.
pub fn level_index(j: f64) -> i32 {
    // 2^{-2(k+1)} <= j < 2^{-2k}  ⇔  k = ceil(-log2(j)/2) - 1, with exact
    // powers of 4 landing in the bin whose lower bound they equal.
    let e = -j.log2() / 2.0;
    let k = e.ceil() as i32 - 1;
    let lower = 2f64.powi(-2 * (k + 1));
    if j < lower {
        k + 1
    } else if j >= 2f64.powi(-2 * k) {
        k - 1
    } else {
        k
    }
}

pub fn jacobian_level_census(
    phi: &Homeomorphism,
    domain: &Domain,
    k_range: RangeInclusive<i32>,
) -> Result<LevelCensus> {
    phi.validate()?;
    domain.validate()?;
    let h2 = domain.spacing().powi(2);
    let n = domain.resolution;
    let mut bins: BTreeMap<i32, usize> = BTreeMap::new();
    let (mut zero, mut outside) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            let x = domain.node(i, j);
            let jac = phi.jacobian_det(x).abs();
            if jac.is_nan() {
                return Err(Error::Numerical(format!("Jacobian is NaN at {x:?}")));
            }
            if jac == 0.0 {
                zero += 1;
            } else if jac.is_infinite() {
                outside += 1;
            } else {
                let k = level_index(jac);
                if k_range.contains(&k) {
                    *bins.entry(k).or_default() += 1;
                } else {
                    outside += 1;
                }
            }
        }
    }
    Ok(LevelCensus {
        entries: bins.into_iter().map(|(k, c)| (k, c as f64 * h2)).collect(),
        zero_measure: zero as f64 * h2,
        outside_measure: outside as f64 * h2,
        domain: *domain,
    })
}
