use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{solve_condenser, CondenserSpec, Plate, SolverConfig};
use crate::besov::{default_sampler, BesovParams};
use crate::error::{Error, Result};
use crate::grid::{Domain, Point};
use crate::homeo::{jacobian_level_census, quasisymmetry_scan_with, Homeomorphism, LevelCensus, QsTriple};

/// At most this many Jacobian levels for a bi-Lipschitz-like verdict.
pub const MAX_BILIPSCHITZ_BINS: usize = 3;
/// At most this distortion for a bi-Lipschitz-like verdict.
pub const MAX_BILIPSCHITZ_H: f64 = 8.0;
/// Log-log growth of `H_hat` in the probe count marking unbounded distortion:
/// doubling per quadrupling.
pub const UNBOUNDED_TREND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    BiLipschitzLike,
    QcNotBiLipschitzLike,
    DistortionUnbounded,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::BiLipschitzLike => "bi-Lipschitz-like",
            Verdict::QcNotBiLipschitzLike => "QC-not-biLipschitz-like",
            Verdict::DistortionUnbounded => "distortion-unbounded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcOptions {
    /// Probe count of the first scan; later scans quadruple it.
    pub probes: usize,
    pub quadruplings: u32,
    pub seed: u64,
    /// Region of the scans and the census grid.
    pub region: Domain,
    pub census_range: (i32, i32),
    /// Pulled-back annulus condensers solved for the audit trail.
    pub condenser_probes: usize,
    pub condenser_resolution: usize,
    /// `R/r` of the image annuli.
    pub condenser_ratio: f64,
    pub solver: SolverConfig,
}

impl Default for QcOptions {
    fn default() -> Self {
        QcOptions {
            probes: 1000,
            quadruplings: 3,
            seed: 0,
            region: Domain {
                side_length: 4.0,
                resolution: 128,
            },
            census_range: (-64, 64),
            condenser_probes: 2,
            condenser_resolution: 32,
            condenser_ratio: 4.0,
            solver: SolverConfig {
                max_iters: 60,
                ..SolverConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendPoint {
    pub probes: usize,
    pub h_hat: f64,
    pub worst: Option<QsTriple>,
    pub resampled: usize,
}

/// Annulus `B̄(φx, r) ⊂ B(φx, R)` pulled back through `φ` and solved on a
/// grid around `x`, next to the same annulus solved in the image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondenserProbe {
    pub x: Point,
    pub image_inner: f64,
    pub image_outer: f64,
    /// Radius of the source ball containing the pulled-back annulus.
    pub source_radius: f64,
    pub source_value: f64,
    pub image_value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QcReport {
    pub map: Homeomorphism,
    pub label: String,
    pub verdict: Verdict,
    pub h_hat: f64,
    pub trend: Vec<TrendPoint>,
    /// Fitted exponent of `H_hat` against the probe count.
    pub trend_slope: f64,
    pub census: LevelCensus,
    pub census_bins: usize,
    pub condensers: Vec<CondenserProbe>,
    /// Condenser probes dropped because the annulus left the box or a
    /// plate held no node.
    pub skipped: usize,
    pub options: QcOptions,
}

fn pulled_back_probe(
    phi: &Homeomorphism,
    x: Point,
    d: f64,
    opts: &QcOptions,
    params: &BesovParams,
    image_value: f64,
) -> Result<Option<CondenserProbe>> {
    let dir = phi.local_difference(x, [d, 0.0]);
    let outer = dir[0].hypot(dir[1]);
    let inner = outer / opts.condenser_ratio;
    let fx = phi.forward(x);
    let mut reach = 0.0_f64;
    for a in 0..64 {
        let t = std::f64::consts::TAU * a as f64 / 64.0;
        let y = phi.inverse([fx[0] + outer * t.cos(), fx[1] + outer * t.sin()]);
        reach = reach.max((y[0] - x[0]).hypot(y[1] - x[1]));
    }
    let half = 0.5 * opts.region.side_length;
    if !(reach.is_finite() && reach > 0.0) || x[0].abs() + reach > half || x[1].abs() + reach > half {
        return Ok(None);
    }
    let radius = 1.05 * reach;
    let n = opts.condenser_resolution;
    let local = Domain::new(4.0 * radius * 1.1, n)?;
    let c = local.node(n / 2, n / 2);
    let mut e_mask = vec![false; local.len()];
    let mut f_mask = vec![false; local.len()];
    for i in 0..n {
        for j in 0..n {
            let y = local.node(i, j);
            let v = phi.local_difference(x, [y[0] - c[0], y[1] - c[1]]);
            let dist = v[0].hypot(v[1]);
            if dist <= inner {
                f_mask[i * n + j] = true;
            } else if dist >= outer {
                e_mask[i * n + j] = true;
            }
        }
    }
    let Ok(spec) = CondenserSpec::new(local, e_mask, f_mask, c, radius, Plate::E) else {
        return Ok(None);
    };
    let sampler = default_sampler(&local, opts.seed)?;
    let res = solve_condenser(&spec, params, &sampler, &opts.solver, None)?;
    Ok(Some(CondenserProbe {
        x,
        image_inner: inner,
        image_outer: outer,
        source_radius: radius,
        source_value: res.value,
        image_value,
        converged: res.converged,
    }))
}

/// Scans the map's distortion at growing probe counts, takes its Jacobian
/// census, and solves a few pulled-back annulus condensers for the record.
///
/// The verdict is `distortion-unbounded` when `H_hat` grows at least like
/// the square root of the probe count, `bi-Lipschitz-like` when the census
/// has at most three levels and `H_hat <= 8`, and `QC-not-biLipschitz-like`
/// otherwise. These are heuristics.
pub fn qc_check(phi: &Homeomorphism, params: &BesovParams, opts: &QcOptions) -> Result<QcReport> {
    phi.validate()?;
    params.validate()?;
    if opts.quadruplings == 0 {
        return Err(Error::InvalidParams("trend test needs at least one quadrupling".into()));
    }
    let mut trend = Vec::new();
    for i in 0..=opts.quadruplings {
        let probes = opts.probes * 4usize.pow(i);
        let scan = quasisymmetry_scan_with(phi, probes, opts.seed, &opts.region, 0.0)?;
        trend.push(TrendPoint {
            probes,
            h_hat: scan.h_hat,
            worst: scan.worst,
            resampled: scan.resampled,
        });
    }
    let xs: Vec<f64> = trend.iter().map(|t| (t.probes as f64).ln()).collect();
    let ys: Vec<f64> = trend.iter().map(|t| t.h_hat.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let trend_slope = cov / var;
    let h_hat = trend.last().map(|t| t.h_hat).unwrap_or(0.0);

    let census = jacobian_level_census(phi, &opts.region, opts.census_range.0..=opts.census_range.1)?;
    let census_bins = census.nonempty_bins() + usize::from(census.outside_measure > 0.0);

    let verdict = if trend_slope >= UNBOUNDED_TREND {
        Verdict::DistortionUnbounded
    } else if census_bins <= MAX_BILIPSCHITZ_BINS && h_hat <= MAX_BILIPSCHITZ_H {
        Verdict::BiLipschitzLike
    } else {
        Verdict::QcNotBiLipschitzLike
    };

    let mut condensers = Vec::new();
    let mut skipped = 0;
    if opts.condenser_probes > 0 {
        let image_domain = Domain::new(4.0, opts.condenser_resolution)?;
        let spec = CondenserSpec::annulus_with_ratio(image_domain, opts.condenser_ratio)?;
        let sampler = default_sampler(&image_domain, opts.seed)?;
        let image_value = solve_condenser(&spec, params, &sampler, &opts.solver, None)?.value;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
        let quarter = 0.25 * opts.region.side_length;
        for _ in 0..opts.condenser_probes {
            let x = [rng.gen_range(-quarter..quarter), rng.gen_range(-quarter..quarter)];
            let d = rng
                .gen_range((1e-3 * quarter).ln()..(0.25 * quarter).ln())
                .exp();
            match pulled_back_probe(phi, x, d, opts, params, image_value)? {
                Some(p) => condensers.push(p),
                None => skipped += 1,
            }
        }
    }
    Ok(QcReport {
        map: phi.clone(),
        label: phi.label(),
        verdict,
        h_hat,
        trend,
        trend_slope,
        census,
        census_bins,
        condensers,
        skipped,
        options: *opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> QcOptions {
        QcOptions {
            condenser_probes: 0,
            region: Domain::new(4.0, 64).unwrap(),
            ..QcOptions::default()
        }
    }

    #[test]
    fn verdicts() {
        let p = BesovParams::scaling_invariant(0.5, 2.0).unwrap();
        let id = qc_check(&Homeomorphism::identity(), &p, &quick()).unwrap();
        assert_eq!(id.verdict, Verdict::BiLipschitzLike);
        assert!(id.h_hat <= 1.0 + 1e-9);
        let rs = qc_check(&Homeomorphism::RadialStretch { alpha: 2.0 }, &p, &quick()).unwrap();
        assert_eq!(rs.verdict, Verdict::QcNotBiLipschitzLike, "{:?}", rs.trend);
        let cusp = qc_check(&Homeomorphism::cusp(30).unwrap(), &p, &quick()).unwrap();
        assert_eq!(cusp.verdict, Verdict::DistortionUnbounded, "{:?}", cusp.trend);
    }
}
