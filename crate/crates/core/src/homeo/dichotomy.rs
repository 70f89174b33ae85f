//! Bump families placed on distinct Jacobian levels of a map, comparing
//! `‖G‖` with `‖G ∘ φ‖` as the number of levels grows.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scan::level_index;
use super::Homeomorphism;
use crate::besov::separated::{separated_pieces, Patch, SeparatedOptions, SeparatedProfile};
use crate::besov::BesovParams;
use crate::error::{Error, Result};
use crate::grid::{tent, Domain, Point};

/// Largest supported number of levels.
pub const MAX_LEVELS: usize = 6;

const BOUNDARY_SAMPLES: usize = 64;

/// Which side carries the dyadic radii.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DichotomyConstruction {
    /// Source balls of equal radius `r`, image bumps of radius `~ 2^{-k_j} r`.
    ImageDyadic,
    /// Image bumps of equal radius, source balls of radius `~ 2^{k_j} r`.
    SourceDyadic,
}

impl DichotomyConstruction {
    pub const ALL: [DichotomyConstruction; 2] =
        [DichotomyConstruction::ImageDyadic, DichotomyConstruction::SourceDyadic];

    pub fn tag(self) -> &'static str {
        match self {
            DichotomyConstruction::ImageDyadic => "image-dyadic",
            DichotomyConstruction::SourceDyadic => "source-dyadic",
        }
    }

    fn scale(self, k: i32) -> f64 {
        match self {
            DichotomyConstruction::ImageDyadic => 2f64.powi(-k),
            DichotomyConstruction::SourceDyadic => 1.0,
        }
    }

    fn source_scale(self, k: i32) -> f64 {
        match self {
            DichotomyConstruction::ImageDyadic => 1.0,
            DichotomyConstruction::SourceDyadic => 2f64.powi(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DichotomyOptions {
    /// Gap between the Jacobian levels of consecutive bumps.
    pub level_stride: u32,
    /// Direction of the ray carrying the centres.
    pub ray_angle: f64,
    pub separated: SeparatedOptions,
    /// Recorded in the report rows.
    pub seed: u64,
}

impl Default for DichotomyOptions {
    fn default() -> Self {
        DichotomyOptions {
            level_stride: 6,
            ray_angle: 0.3,
            separated: SeparatedOptions::default(),
            seed: 0,
        }
    }
}

/// Centres, radii and measured distortion of one construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub construction: DichotomyConstruction,
    pub levels: Vec<i32>,
    pub centers: Vec<Point>,
    pub image_centers: Vec<Point>,
    pub r: f64,
    /// Radii of the source balls `B_j ⊃ supp(g_j ∘ φ)`.
    pub source_radii: Vec<f64>,
    /// Radii of the image bumps `g_j`.
    pub image_radii: Vec<f64>,
    /// `min_j` inner radius of `φ(B_j)` over its nominal scale.
    pub c_phi: f64,
    /// `max_j` outer radius of `φ(B_j)` over its nominal scale.
    pub big_c_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyRow {
    pub family: String,
    pub alpha: Option<f64>,
    pub s: f64,
    pub q: f64,
    pub p: f64,
    pub n_lv: usize,
    pub norm_g: f64,
    pub norm_g_phi: f64,
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub q: f64,
    /// `None` for the maximum over both constructions.
    pub construction: Option<DichotomyConstruction>,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub map: Homeomorphism,
    pub s: f64,
    pub p: f64,
    pub amplitudes: Vec<f64>,
    pub options: DichotomyOptions,
    pub placements: Vec<Placement>,
    pub rows: Vec<DichotomyRow>,
    pub slopes: Vec<SlopeFit>,
}

impl DichotomyReport {
    /// Fitted exponent of the larger of the two ratios against `N_lv`.
    pub fn slope(&self, q: f64) -> Option<f64> {
        self.slopes
            .iter()
            .find(|f| f.q == q && f.construction.is_none())
            .map(|f| f.slope)
    }

    pub fn rows_for(&self, q: f64, construction: DichotomyConstruction) -> Vec<&DichotomyRow> {
        let suffix = format!(":{}", construction.tag());
        self.rows
            .iter()
            .filter(|r| r.q == q && r.family.ends_with(&suffix))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["family", "alpha", "s", "q", "p", "N_lv", "norm_G", "norm_GoPhi", "ratio", "seed"])
            .map_err(|e| csv_error(path, e))?;
        for r in &self.rows {
            let alpha = r.alpha.map(|a| format!("{a:.16e}")).unwrap_or_default();
            w.write_record([
                r.family.clone(),
                alpha,
                format!("{:.16e}", r.s),
                format!("{:.16e}", r.q),
                format!("{:.16e}", r.p),
                r.n_lv.to_string(),
                format!("{:.16e}", r.norm_g),
                format!("{:.16e}", r.norm_g_phi),
                format!("{:.16e}", r.ratio),
                r.seed.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

fn ray(opts: &DichotomyOptions) -> Point {
    [opts.ray_angle.cos(), opts.ray_angle.sin()]
}

/// Distance along the ray at which `|J|` equals the geometric midpoint
/// `2^{-2k-1}` of level `k`.
fn midpoint_radius(phi: &Homeomorphism, e: Point, k: i32, half: f64) -> Result<f64> {
    let target = -2.0 * f64::from(k) - 1.0;
    let g = |t: f64| phi.jacobian_det([t * e[0], t * e[1]]).abs().log2() - target;
    let (mut lo, mut hi) = (1e-150_f64.ln(), half.ln());
    let (glo, ghi) = (g(lo.exp()), g(hi.exp()));
    if !(glo.is_finite() && ghi.is_finite()) || glo.signum() == ghi.signum() {
        return Err(Error::Geometry(format!(
            "Jacobian level {k} is not crossed along the ray"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid.exp()).signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Levels visited along the ray, starting next to the one at `|x| = L/4`.
fn ray_levels(phi: &Homeomorphism, e: Point, n: usize, stride: u32, half: f64) -> Result<Vec<i32>> {
    let at = |t: f64| phi.jacobian_det([t * e[0], t * e[1]]).abs();
    let (outer, inner) = (at(0.5 * half), at(1e-3 * half));
    if !(outer.is_finite() && inner.is_finite() && outer > 0.0 && inner > 0.0) {
        return Err(Error::Geometry("Jacobian degenerates along the ray".into()));
    }
    let (ka, kb) = (level_index(outer), level_index(inner));
    if ka == kb {
        return Err(Error::Precondition(format!(
            "{} has a single Jacobian level along the ray",
            phi.label()
        )));
    }
    let dir = (kb - ka).signum();
    Ok((0..n as i32).map(|j| ka + dir * (1 + stride as i32 * j)).collect())
}

fn boundary(phi: &Homeomorphism, x: Point, radius: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for a in 0..BOUNDARY_SAMPLES {
        let t = 2.0 * PI * a as f64 / BOUNDARY_SAMPLES as f64;
        let d = phi.local_difference(x, [radius * t.cos(), radius * t.sin()]);
        let v = d[0].hypot(d[1]);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn within_level(phi: &Homeomorphism, x: Point, radius: f64, k: i32) -> bool {
    (0..BOUNDARY_SAMPLES).all(|a| {
        let t = 2.0 * PI * a as f64 / BOUNDARY_SAMPLES as f64;
        let y = [x[0] + radius * t.cos(), x[1] + radius * t.sin()];
        let j = phi.jacobian_det(y).abs();
        j.is_finite() && j > 0.0 && level_index(j) == k
    }) && level_index(phi.jacobian_det(x).abs()) == k
}

fn nine_disjoint(centers: &[Point], radii: &[f64]) -> bool {
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let d = (centers[i][0] - centers[j][0]).hypot(centers[i][1] - centers[j][1]);
            if d < 9.0 * (radii[i] + radii[j]) {
                return false;
            }
        }
    }
    true
}

/// Centres on the ray at the midpoints of `n` Jacobian levels spaced by the
/// stride, with `r` halved from `L` until the balls sit inside their levels,
/// have pairwise disjoint 9-dilates on both sides, and stay in the box.
pub fn place_bumps(
    phi: &Homeomorphism,
    n: usize,
    construction: DichotomyConstruction,
    domain: &Domain,
    opts: &DichotomyOptions,
) -> Result<Placement> {
    phi.validate()?;
    domain.validate()?;
    if n == 0 || n > MAX_LEVELS {
        return Err(Error::InfeasibleLevels {
            requested: n,
            max_feasible: MAX_LEVELS,
        });
    }
    if opts.level_stride == 0 {
        return Err(Error::InvalidParams("level stride must be positive".into()));
    }
    let half = 0.5 * domain.side_length;
    let e = ray(opts);
    let levels = ray_levels(phi, e, n, opts.level_stride, half)?;
    let mut centers = Vec::with_capacity(n);
    for &k in &levels {
        let t = midpoint_radius(phi, e, k, half)?;
        centers.push([t * e[0], t * e[1]]);
    }
    let image_centers: Vec<Point> = centers.iter().map(|&x| phi.forward(x)).collect();
    let inside = |x: Point, r: f64| x[0].abs() + r <= half && x[1].abs() + r <= half;
    let mut r = domain.side_length;
    while r > 1e-300 {
        r *= 0.5;
        let source_radii: Vec<f64> = levels.iter().map(|&k| construction.source_scale(k) * r).collect();
        let ok_source = centers
            .iter()
            .zip(&source_radii)
            .zip(&levels)
            .all(|((&x, &rho), &k)| inside(x, rho) && within_level(phi, x, rho, k))
            && nine_disjoint(&centers, &source_radii);
        if !ok_source {
            continue;
        }
        let mut c_phi = f64::INFINITY;
        let mut big_c_phi = 0.0_f64;
        for ((&x, &rho), &k) in centers.iter().zip(&source_radii).zip(&levels) {
            let (lo, hi) = boundary(phi, x, rho);
            let scale = construction.scale(k) * r;
            c_phi = c_phi.min(lo / scale);
            big_c_phi = big_c_phi.max(hi / scale);
        }
        if !(c_phi > 0.0 && big_c_phi.is_finite()) {
            continue;
        }
        let outer: Vec<f64> = levels.iter().map(|&k| big_c_phi * construction.scale(k) * r).collect();
        let ok_image = image_centers
            .iter()
            .zip(&outer)
            .all(|(&y, &rho)| inside(y, rho))
            && nine_disjoint(&image_centers, &outer);
        if !ok_image {
            continue;
        }
        let image_radii = levels.iter().map(|&k| c_phi * construction.scale(k) * r).collect();
        return Ok(Placement {
            construction,
            levels,
            centers,
            image_centers,
            r,
            source_radii,
            image_radii,
            c_phi,
            big_c_phi,
        });
    }
    Err(Error::Geometry(format!(
        "no radius satisfies the placement constraints for {} levels",
        n
    )))
}

/// Least-squares slope of `ln y` against `ln x`.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// Runs both constructions for `N = 1..=n_lv` levels and every `q` in `qs`,
/// sharing one set of piece profiles across `N` and `q`.
pub fn dichotomy_sweep(
    phi: &Homeomorphism,
    n_lv: usize,
    b: &[f64],
    s: f64,
    p: f64,
    qs: &[f64],
    domain: &Domain,
    opts: &DichotomyOptions,
) -> Result<DichotomyReport> {
    if n_lv > MAX_LEVELS {
        return Err(Error::InfeasibleLevels {
            requested: n_lv,
            max_feasible: MAX_LEVELS,
        });
    }
    if n_lv == 0 {
        return Err(Error::InvalidParams("at least one level is required".into()));
    }
    if b.len() < n_lv || b.iter().take(n_lv).any(|v| !v.is_finite() || *v == 0.0) {
        return Err(Error::InvalidParams(format!(
            "need {n_lv} finite nonzero amplitudes, got {:?}",
            b
        )));
    }
    let param_sets: Vec<BesovParams> = qs
        .iter()
        .map(|&q| {
            let params = BesovParams::with_p(s, p, q)?;
            params.validate()?;
            Ok(params)
        })
        .collect::<Result<_>>()?;
    let mut placements = Vec::new();
    for c in DichotomyConstruction::ALL {
        match place_bumps(phi, n_lv, c, domain, opts) {
            Ok(pl) => placements.push(pl),
            Err(Error::Geometry(_)) => {
                let max_feasible = (1..n_lv)
                    .rev()
                    .find(|&m| place_bumps(phi, m, c, domain, opts).is_ok())
                    .unwrap_or(0);
                return Err(Error::InfeasibleLevels {
                    requested: n_lv,
                    max_feasible,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut per_construction: Vec<Vec<Vec<f64>>> = Vec::new();
    for pl in &placements {
        let image: Vec<Patch> = pl
            .image_radii
            .iter()
            .zip(b)
            .map(|(&rho, &amp)| Patch::new(rho, move |w: Point| amp * tent(w, [0.0, 0.0], rho, 1.0)))
            .collect();
        let source: Vec<Patch> = pl
            .centers
            .iter()
            .zip(&pl.source_radii)
            .zip(pl.image_radii.iter().zip(b))
            .map(|((&x, &rho), (&rg, &amp))| {
                Patch::new(rho, move |y: Point| {
                    amp * tent(phi.local_difference(x, y), [0.0, 0.0], rg, 1.0)
                })
            })
            .collect();
        let g_pieces = separated_pieces(&image, p, &opts.separated)?;
        let h_pieces = separated_pieces(&source, p, &opts.separated)?;
        let family = format!("{}:{}", phi.label(), pl.construction.tag());
        let mut ratios_by_q = Vec::new();
        for params in &param_sets {
            let mut ratios = Vec::new();
            for n in 1..=n_lv {
                let norm_g = SeparatedProfile::sum(&g_pieces[..n]).norm(params)?;
                let norm_g_phi = SeparatedProfile::sum(&h_pieces[..n]).norm(params)?;
                if !(norm_g.is_finite() && norm_g_phi.is_finite() && norm_g > 0.0) {
                    return Err(Error::Numerical(format!(
                        "degenerate norms {norm_g} / {norm_g_phi} at N = {n}"
                    )));
                }
                let ratio = norm_g_phi / norm_g;
                ratios.push(ratio);
                rows.push(DichotomyRow {
                    family: family.clone(),
                    alpha: phi.alpha(),
                    s,
                    q: params.q,
                    p,
                    n_lv: n,
                    norm_g,
                    norm_g_phi,
                    ratio,
                    seed: opts.seed,
                });
            }
            if n_lv >= 2 {
                let pts: Vec<(f64, f64)> = ratios.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect();
                slopes.push(SlopeFit {
                    q: params.q,
                    construction: Some(pl.construction),
                    slope: loglog_slope(&pts),
                });
            }
            ratios_by_q.push(ratios);
        }
        per_construction.push(ratios_by_q);
    }
    if n_lv >= 2 {
        for (qi, params) in param_sets.iter().enumerate() {
            let pts: Vec<(f64, f64)> = (0..n_lv)
                .map(|i| {
                    let m = per_construction.iter().map(|c| c[qi][i]).fold(0.0, f64::max);
                    ((i + 1) as f64, m)
                })
                .collect();
            slopes.push(SlopeFit {
                q: params.q,
                construction: None,
                slope: loglog_slope(&pts),
            });
        }
    }
    Ok(DichotomyReport {
        map: phi.clone(),
        s,
        p,
        amplitudes: b[..n_lv].to_vec(),
        options: *opts,
        placements,
        rows,
        slopes,
    })
}

/// [`dichotomy_sweep`] at the single exponent triple of `params`.
pub fn dichotomy_experiment(
    phi: &Homeomorphism,
    n_lv: usize,
    b: &[f64],
    params: &BesovParams,
    domain: &Domain,
) -> Result<DichotomyReport> {
    params.validate()?;
    dichotomy_sweep(
        phi,
        n_lv,
        b,
        params.s,
        params.p,
        &[params.q],
        domain,
        &DichotomyOptions::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain() -> Domain {
        Domain::new(4.0, 64).unwrap()
    }

    #[test]
    fn placement_satisfies_constraints() {
        let phi = Homeomorphism::RadialStretch { alpha: 2.0 };
        for c in DichotomyConstruction::ALL {
            let pl = place_bumps(&phi, 4, c, &domain(), &DichotomyOptions::default()).unwrap();
            assert_eq!(pl.levels, vec![0, 6, 12, 18]);
            for (x, k) in pl.centers.iter().zip(&pl.levels) {
                let j = phi.jacobian_det(*x);
                assert!((j.log2() + 2.0 * f64::from(*k) + 1.0).abs() < 1e-9);
            }
            assert!(nine_disjoint(&pl.centers, &pl.source_radii));
            assert!(pl.c_phi > 0.0 && pl.big_c_phi >= pl.c_phi);
            // Source supports lie inside the source balls.
            for ((&x, &rho), &rg) in pl.centers.iter().zip(&pl.source_radii).zip(&pl.image_radii) {
                assert!(boundary(&phi, x, rho).0 >= rg * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn rejects_too_many_levels() {
        let phi = Homeomorphism::RadialStretch { alpha: 2.0 };
        let p = BesovParams::scaling_invariant(0.5, 4.0).unwrap();
        let err = dichotomy_experiment(&phi, 7, &[1.0; 7], &p, &domain()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleLevels { requested: 7, max_feasible: 6 }));
        let id = Homeomorphism::identity();
        assert!(dichotomy_experiment(&id, 2, &[1.0; 2], &p, &domain()).is_err());
    }

    #[test]
    fn single_level_ratio_is_order_one() {
        let phi = Homeomorphism::RadialStretch { alpha: 2.0 };
        let p = BesovParams::scaling_invariant(0.5, 2.0).unwrap();
        let rep = dichotomy_experiment(&phi, 1, &[1.0], &p, &domain()).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for r in &rep.rows {
            assert!(r.ratio > 0.2 && r.ratio < 5.0, "{r:?}");
        }
        assert!(rep.slope(2.0).is_none());
    }
}
