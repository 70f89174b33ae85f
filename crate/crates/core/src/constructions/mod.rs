//! Tent stacks, the logarithmic condenser function and the anisotropic box
//! test function, plus a small corpus of smooth compactly supported
//! functions for estimator comparisons.

mod corpus;

pub use corpus::{corpus, CorpusMember, CORPUS_SIZE};

use serde::{Deserialize, Serialize};

use crate::besov::{besov_norm_difference, default_sampler, BesovParams};
use crate::error::{Error, Result};
use crate::grid::{sample, tent, Domain, GridFunction, Point};

/// Sum of tents `b_j max(0, 1 - |x - x_j| / r_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFamily {
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl BumpFamily {
    pub fn new(centers: Vec<Point>, radii: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        let fam = BumpFamily {
            centers,
            radii,
            amplitudes,
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.centers.len();
        if m == 0 || self.radii.len() != m || self.amplitudes.len() != m {
            return Err(Error::Geometry(format!(
                "bump family needs matching non-empty centers/radii/amplitudes, got {}/{}/{}",
                m,
                self.radii.len(),
                self.amplitudes.len()
            )));
        }
        if let Some(r) = self.radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::Geometry(format!("radius must be positive, got {r}")));
        }
        if let Some(b) = self.amplitudes.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::Geometry(format!("amplitude must be >= 0, got {b}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.centers
            .iter()
            .zip(&self.radii)
            .zip(&self.amplitudes)
            .map(|((c, r), b)| tent(x, *c, *r, *b))
            .sum()
    }

    /// `Lip f_j = b_j / r_j`.
    pub fn lipschitz(&self, j: usize) -> f64 {
        self.amplitudes[j] / self.radii[j]
    }

    /// Radius of the smallest origin-centred disc containing every support.
    pub fn support_radius(&self) -> f64 {
        self.centers
            .iter()
            .zip(&self.radii)
            .map(|(c, r)| c[0].hypot(c[1]) + r)
            .fold(0.0, f64::max)
    }

    /// Whether the dilates `9 B_j` are pairwise disjoint.
    pub fn nine_disjoint(&self) -> bool {
        self.first_overlap().is_none()
    }

    fn first_overlap(&self) -> Option<(usize, usize)> {
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                let (ca, cb) = (self.centers[a], self.centers[b]);
                let d = (ca[0] - cb[0]).hypot(ca[1] - cb[1]);
                if d < 9.0 * (self.radii[a] + self.radii[b]) {
                    return Some((a, b));
                }
            }
        }
        None
    }

    pub fn require_nine_disjoint(&self) -> Result<()> {
        match self.first_overlap() {
            None => Ok(()),
            Some((a, b)) => Err(Error::Geometry(format!(
                "9-dilates of bumps {a} and {b} overlap"
            ))),
        }
    }

    pub fn sample(&self, domain: Domain) -> Result<GridFunction> {
        sample(|x| self.eval(x), domain, Some(self.support_radius()))
    }
}

/// Placement of a dyadic stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StackMode {
    /// All bumps share one center.
    Concentric,
    /// Bumps at distinct centers with pairwise disjoint 9-dilates.
    Disjoint,
}

/// Tents of radii `2^{-j} R` and heights `b_j`, `j = 0..J-1`.
///
/// In concentric mode `centers` holds either one point or `J` equal points.
pub fn make_dyadic_stack(
    centers: &[Point],
    radius: f64,
    b: &[f64],
    mode: StackMode,
    domain: Domain,
) -> Result<(BumpFamily, GridFunction)> {
    let j = b.len();
    if j == 0 || j > 16 {
        return Err(Error::Geometry(format!("stack length must be in 1..=16, got {j}")));
    }
    let centers: Vec<Point> = match mode {
        StackMode::Concentric => {
            if centers.is_empty() || centers.iter().any(|c| c != &centers[0]) {
                return Err(Error::Geometry("concentric stack needs one common center".into()));
            }
            if centers.len() != 1 && centers.len() != j {
                return Err(Error::Geometry(format!(
                    "expected 1 or {j} centers, got {}",
                    centers.len()
                )));
            }
            vec![centers[0]; j]
        }
        StackMode::Disjoint => {
            if centers.len() != j {
                return Err(Error::Geometry(format!(
                    "expected {j} centers, got {}",
                    centers.len()
                )));
            }
            centers.to_vec()
        }
    };
    let radii = (0..j).map(|k| radius * 0.5f64.powi(k as i32)).collect();
    let fam = BumpFamily::new(centers, radii, b.to_vec())?;
    if mode == StackMode::Disjoint {
        fam.require_nine_disjoint()?;
    }
    let g = fam.sample(domain)?;
    Ok((fam, g))
}

/// Tents of common radius `R` whose 9-dilates are pairwise disjoint.
pub fn make_equal_stack(
    centers: &[Point],
    radius: f64,
    b: &[f64],
    domain: Domain,
) -> Result<(BumpFamily, GridFunction)> {
    if centers.len() != b.len() {
        return Err(Error::Geometry(format!(
            "{} centers for {} amplitudes",
            centers.len(),
            b.len()
        )));
    }
    let fam = BumpFamily::new(centers.to_vec(), vec![radius; b.len()], b.to_vec())?;
    fam.require_nine_disjoint()?;
    let g = fam.sample(domain)?;
    Ok((fam, g))
}

/// Value at relative distance `σ` of the logarithmic stack
/// `Σ_{j<J} (j+1)^{-1} max(0, 1 - 2^j σ)`.
pub fn xi(sigma: f64, truncation: usize) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParams(format!("xi needs σ in (0,1), got {sigma}")));
    }
    if truncation == 0 {
        return Err(Error::InvalidParams("xi needs J >= 1".into()));
    }
    Ok((0..truncation)
        .map(|j| (1.0 - 2f64.powi(j as i32) * sigma).max(0.0) / (j + 1) as f64)
        .sum())
}

/// Concentric logarithmic stack of radius `R` with `J` terms.
pub fn unit_stack(center: Point, radius: f64, truncation: usize) -> BumpFamily {
    let j = truncation.max(1);
    BumpFamily {
        centers: vec![center; j],
        radii: (0..j).map(|k| radius * 0.5f64.powi(k as i32)).collect(),
        amplitudes: (0..j).map(|k| 1.0 / (k + 1) as f64).collect(),
    }
}

/// `u = min(1, F / ξ(r/R))` for the logarithmic stack `F` centred at `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondenserFunction {
    pub center: Point,
    pub inner: f64,
    pub outer: f64,
    pub truncation: usize,
    pub xi: f64,
    pub grid: GridFunction,
}

impl CondenserFunction {
    pub fn eval(&self, x: Point) -> f64 {
        condenser_value(x, self.center, self.outer, self.truncation, self.xi)
    }
}

fn condenser_value(x: Point, center: Point, outer: f64, truncation: usize, xi: f64) -> f64 {
    let d = (x[0] - center[0]).hypot(x[1] - center[1]) / outer;
    if d >= 1.0 {
        return 0.0;
    }
    let f: f64 = (0..truncation)
        .map(|j| (1.0 - 2f64.powi(j as i32) * d).max(0.0) / (j + 1) as f64)
        .sum();
    (f / xi).min(1.0)
}

/// Smallest truncation for which every term reaching radius `r` is kept.
pub fn default_truncation(inner: f64, outer: f64) -> usize {
    ((outer / inner).log2().ceil() as usize + 1).clamp(1, 16)
}

pub fn make_annulus_condenser(
    x0: Point,
    inner: f64,
    outer: f64,
    truncation: usize,
    domain: Domain,
) -> Result<CondenserFunction> {
    domain.validate()?;
    if !(inner > 0.0 && inner < outer) {
        return Err(Error::Geometry(format!(
            "condenser needs 0 < r < R, got r = {inner}, R = {outer}"
        )));
    }
    let reach = x0[0].hypot(x0[1]) + outer;
    if reach > 0.25 * domain.side_length * (1.0 + 1e-12) {
        return Err(Error::Geometry(format!(
            "condenser support radius {reach} exceeds L/4 = {}",
            0.25 * domain.side_length
        )));
    }
    let xi = xi(inner / outer, truncation)?;
    let grid = sample(
        |x| condenser_value(x, x0, outer, truncation, xi),
        domain,
        Some(reach),
    )?;
    Ok(CondenserFunction {
        center: x0,
        inner,
        outer,
        truncation,
        xi,
        grid,
    })
}

/// One row of a Ψ profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiRow {
    pub ratio: f64,
    pub norm: f64,
    /// `c' / ξ(r/R)` with `c'` the measured norm of the unit stack.
    pub bound: f64,
}

/// Measured norms of the annulus condensers with `R = L/4` and `r = R/ratio`,
/// next to the bound `c'/ξ(1/ratio)`.
pub fn psi_profile(
    ratios: &[f64],
    params: &BesovParams,
    domain: Domain,
    seed: u64,
) -> Result<Vec<PsiRow>> {
    if let Some(r) = ratios.iter().find(|r| !(r.is_finite() && **r > 1.0)) {
        return Err(Error::InvalidParams(format!("ratios must be finite and > 1, got {r}")));
    }
    let outer = 0.25 * domain.side_length;
    let sampler = default_sampler(&domain, seed)?;
    let mut rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let inner = outer / ratio;
        let trunc = default_truncation(inner, outer);
        let u = make_annulus_condenser([0.0, 0.0], inner, outer, trunc, domain)?;
        let norm = besov_norm_difference(&u.grid, params, &sampler)?;
        let stack = unit_stack([0.0, 0.0], outer, trunc).sample(domain)?;
        let c_prime = besov_norm_difference(&stack, params, &sampler)?;
        rows.push(PsiRow {
            ratio,
            norm,
            bound: c_prime / u.xi,
        });
    }
    Ok(rows)
}

/// `u = clamp(2 - max(|x1|/A1, |x2|/A2), 0, 1)`: one on
/// `Q = [-A1, A1] × [-A2, A2]`, zero outside `2Q`, and the full-box mask `Z`.
pub fn make_anisotropic_box(a1: f64, a2: f64, domain: Domain) -> Result<(GridFunction, Vec<bool>)> {
    domain.validate()?;
    if !(a1 > 0.0 && a1 <= a2) {
        return Err(Error::Geometry(format!("need 0 < A1 <= A2, got {a1}, {a2}")));
    }
    if 3.0 * a2 > 0.5 * domain.side_length {
        return Err(Error::Geometry(format!(
            "box 3·A2 = {} exceeds L/2 = {}",
            3.0 * a2,
            0.5 * domain.side_length
        )));
    }
    let support = 2.0 * a1.hypot(a2);
    let u = sample(
        |x| (2.0 - (x[0].abs() / a1).max(x[1].abs() / a2)).clamp(0.0, 1.0),
        domain,
        Some(support),
    )?;
    Ok((u, vec![true; domain.len()]))
}

/// Serializable description of any construction in this module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstructionSpec {
    Tent {
        center: Point,
        radius: f64,
        amplitude: f64,
    },
    DyadicStack {
        centers: Vec<Point>,
        radius: f64,
        amplitudes: Vec<f64>,
        mode: StackMode,
    },
    EqualStack {
        centers: Vec<Point>,
        radius: f64,
        amplitudes: Vec<f64>,
    },
    AnnulusCondenser {
        center: Point,
        inner: f64,
        outer: f64,
        truncation: usize,
    },
    AnisotropicBox {
        a1: f64,
        a2: f64,
    },
    Corpus {
        index: usize,
        unit: f64,
    },
}

impl ConstructionSpec {
    pub fn build(&self, domain: Domain) -> Result<GridFunction> {
        match self {
            ConstructionSpec::Tent {
                center,
                radius,
                amplitude,
            } => BumpFamily::new(vec![*center], vec![*radius], vec![*amplitude])?.sample(domain),
            ConstructionSpec::DyadicStack {
                centers,
                radius,
                amplitudes,
                mode,
            } => Ok(make_dyadic_stack(centers, *radius, amplitudes, *mode, domain)?.1),
            ConstructionSpec::EqualStack {
                centers,
                radius,
                amplitudes,
            } => Ok(make_equal_stack(centers, *radius, amplitudes, domain)?.1),
            ConstructionSpec::AnnulusCondenser {
                center,
                inner,
                outer,
                truncation,
            } => Ok(make_annulus_condenser(*center, *inner, *outer, *truncation, domain)?.grid),
            ConstructionSpec::AnisotropicBox { a1, a2 } => {
                Ok(make_anisotropic_box(*a1, *a2, domain)?.0)
            }
            ConstructionSpec::Corpus { index, unit } => CorpusMember::new(*index, *unit)?.sample(domain),
        }
    }

    /// Declared support radius of the constructed function.
    pub fn support_radius(&self) -> Result<f64> {
        Ok(match self {
            ConstructionSpec::Tent { center, radius, .. } => center[0].hypot(center[1]) + radius,
            ConstructionSpec::DyadicStack {
                centers, radius, ..
            } => centers
                .iter()
                .enumerate()
                .map(|(j, c)| c[0].hypot(c[1]) + radius * 0.5f64.powi(j as i32))
                .fold(0.0, f64::max),
            ConstructionSpec::EqualStack {
                centers, radius, ..
            } => centers
                .iter()
                .map(|c| c[0].hypot(c[1]) + radius)
                .fold(0.0, f64::max),
            ConstructionSpec::AnnulusCondenser { center, outer, .. } => {
                center[0].hypot(center[1]) + outer
            }
            ConstructionSpec::AnisotropicBox { a1, a2 } => 2.0 * a1.hypot(*a2),
            ConstructionSpec::Corpus { index, unit } => CorpusMember::new(*index, *unit)?.support_radius(),
        })
    }
}
