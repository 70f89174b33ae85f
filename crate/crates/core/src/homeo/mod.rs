//! Planar homeomorphisms with exact inverses and Jacobians, composition of
//! functions with them, and distortion diagnostics.

mod dichotomy;
mod scan;

pub use dichotomy::{
    dichotomy_experiment, dichotomy_sweep, place_bumps, DichotomyConstruction, DichotomyOptions,
    DichotomyReport, DichotomyRow, Placement, SlopeFit, MAX_LEVELS,
};
pub use scan::{
    jacobian_level_census, level_index, quasisymmetry_scan, quasisymmetry_scan_with, LevelCensus,
    QsScan, QsTriple,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{sample, Domain, GridFunction, Point};

pub type Matrix = [[f64; 2]; 2];

/// Deepest dyadic node of the cusp map.
pub const MAX_CUSP_DEPTH: u32 = 40;

/// A planar homeomorphism with closed-form inverse and derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Homeomorphism {
    /// `x ↦ A x + t`.
    Affine { matrix: Matrix, translation: Point },
    /// `x ↦ |x|^{α-1} x`.
    RadialStretch { alpha: f64 },
    /// `(x1, x2) ↦ (x1 + m x2, x2)`.
    Shear { m: f64 },
    /// `(x1, x2) ↦ (ψ(x1), x2)` with `ψ` odd, piecewise affine, equal to `t^3`
    /// at `t = 2^{-j}`, `0 <= j <= depth`, linear on `[0, 2^{-depth}]` and the
    /// identity for `|t| >= 1`. Its eccentricity `1/ψ'` grows like `4^j`
    /// towards the line `x1 = 0`, so it is not quasiconformal.
    Cusp { depth: u32 },
    /// `outer ∘ inner`.
    Composition {
        outer: Box<Homeomorphism>,
        inner: Box<Homeomorphism>,
    },
}

fn mat_vec(m: &Matrix, v: Point) -> Point {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn det(m: &Matrix) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn cusp_segment(t: f64) -> (f64, f64) {
    // Returns (left node, slope) of the segment holding t in (2^{-depth}, 1).
    let j = (-t.log2()).floor().max(0.0);
    let lo = 2f64.powf(-j - 1.0);
    let slope = 1.75 * 4f64.powf(-j);
    (lo, slope)
}

fn cusp_forward(t: f64, depth: u32) -> f64 {
    let a = t.abs();
    let floor = 2f64.powi(-(depth as i32));
    let v = if a >= 1.0 {
        a
    } else if a <= floor {
        a * floor * floor
    } else {
        let (lo, slope) = cusp_segment(a);
        lo.powi(3) + slope * (a - lo)
    };
    v.copysign(t)
}

fn cusp_inverse(y: f64, depth: u32) -> f64 {
    let a = y.abs();
    let floor = 2f64.powi(-(depth as i32));
    let v = if a >= 1.0 {
        a
    } else if a <= floor.powi(3) {
        a / (floor * floor)
    } else {
        let j = (-a.log2() / 3.0).floor().max(0.0);
        let lo = 2f64.powf(-j - 1.0);
        lo + (a - lo.powi(3)) / (1.75 * 4f64.powf(-j))
    };
    v.copysign(y)
}

fn cusp_slope(t: f64, depth: u32) -> f64 {
    let a = t.abs();
    let floor = 2f64.powi(-(depth as i32));
    if a >= 1.0 {
        1.0
    } else if a <= floor {
        floor * floor
    } else {
        cusp_segment(a).1
    }
}

impl Homeomorphism {
    pub fn identity() -> Self {
        Self::diag(1.0, 1.0)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Homeomorphism::Affine {
            matrix: [[a, 0.0], [0.0, b]],
            translation: [0.0, 0.0],
        }
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Homeomorphism::Affine {
            matrix: [[c, -s], [s, c]],
            translation: [0.0, 0.0],
        }
    }

    pub fn translation(t: Point) -> Self {
        Homeomorphism::Affine {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
            translation: t,
        }
    }

    pub fn cusp(depth: u32) -> Result<Self> {
        let h = Homeomorphism::Cusp { depth };
        h.validate()?;
        Ok(h)
    }

    pub fn compose(outer: Homeomorphism, inner: Homeomorphism) -> Self {
        Homeomorphism::Composition {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Homeomorphism::Affine { matrix, translation } => {
                let d = det(matrix);
                if !(d.is_finite() && d != 0.0) || translation.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "affine map must be invertible and finite, det = {d}"
                    )));
                }
            }
            Homeomorphism::RadialStretch { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "radial stretch needs alpha > 0, got {alpha}"
                    )));
                }
            }
            Homeomorphism::Shear { m } => {
                if !m.is_finite() {
                    return Err(Error::InvalidParams(format!("shear factor must be finite, got {m}")));
                }
            }
            Homeomorphism::Cusp { depth } => {
                if *depth == 0 || *depth > MAX_CUSP_DEPTH {
                    return Err(Error::InvalidParams(format!(
                        "cusp depth must be in 1..={MAX_CUSP_DEPTH}, got {depth}"
                    )));
                }
            }
            Homeomorphism::Composition { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            Homeomorphism::Affine { matrix, translation } => {
                if matrix[0][1] == 0.0 && matrix[1][0] == 0.0 && translation == &[0.0, 0.0] {
                    if matrix[0][0] == 1.0 && matrix[1][1] == 1.0 {
                        "identity".into()
                    } else {
                        format!("diag({},{})", matrix[0][0], matrix[1][1])
                    }
                } else {
                    "affine".into()
                }
            }
            Homeomorphism::RadialStretch { alpha } => format!("radial_stretch({alpha})"),
            Homeomorphism::Shear { m } => format!("shear({m})"),
            Homeomorphism::Cusp { depth } => format!("cusp({depth})"),
            Homeomorphism::Composition { outer, inner } => {
                format!("{}∘{}", outer.label(), inner.label())
            }
        }
    }

    /// Exponent `α` of a radial stretch.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Homeomorphism::RadialStretch { alpha } => Some(*alpha),
            _ => None,
        }
    }

    pub fn forward(&self, x: Point) -> Point {
        match self {
            Homeomorphism::Affine { matrix, translation } => {
                let y = mat_vec(matrix, x);
                [y[0] + translation[0], y[1] + translation[1]]
            }
            Homeomorphism::RadialStretch { alpha } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return [0.0, 0.0];
                }
                let f = r.powf(alpha - 1.0);
                [f * x[0], f * x[1]]
            }
            Homeomorphism::Shear { m } => [x[0] + m * x[1], x[1]],
            Homeomorphism::Cusp { depth } => [cusp_forward(x[0], *depth), x[1]],
            Homeomorphism::Composition { outer, inner } => outer.forward(inner.forward(x)),
        }
    }

    pub fn inverse(&self, y: Point) -> Point {
        match self {
            Homeomorphism::Affine { matrix, translation } => {
                let d = det(matrix);
                let v = [y[0] - translation[0], y[1] - translation[1]];
                [
                    (matrix[1][1] * v[0] - matrix[0][1] * v[1]) / d,
                    (-matrix[1][0] * v[0] + matrix[0][0] * v[1]) / d,
                ]
            }
            Homeomorphism::RadialStretch { alpha } => {
                Homeomorphism::RadialStretch { alpha: 1.0 / alpha }.forward(y)
            }
            Homeomorphism::Shear { m } => [y[0] - m * y[1], y[1]],
            Homeomorphism::Cusp { depth } => [cusp_inverse(y[0], *depth), y[1]],
            Homeomorphism::Composition { outer, inner } => inner.inverse(outer.inverse(y)),
        }
    }

    /// The inverse as a homeomorphism of the same families.
    pub fn inverse_map(&self) -> Option<Homeomorphism> {
        match self {
            Homeomorphism::Affine { matrix, translation } => {
                let d = det(matrix);
                let inv = [
                    [matrix[1][1] / d, -matrix[0][1] / d],
                    [-matrix[1][0] / d, matrix[0][0] / d],
                ];
                let t = mat_vec(&inv, *translation);
                Some(Homeomorphism::Affine {
                    matrix: inv,
                    translation: [-t[0], -t[1]],
                })
            }
            Homeomorphism::RadialStretch { alpha } => {
                Some(Homeomorphism::RadialStretch { alpha: 1.0 / alpha })
            }
            Homeomorphism::Shear { m } => Some(Homeomorphism::Shear { m: -m }),
            Homeomorphism::Cusp { .. } => None,
            Homeomorphism::Composition { outer, inner } => Some(Homeomorphism::compose(
                inner.inverse_map()?,
                outer.inverse_map()?,
            )),
        }
    }

    /// Derivative `Dφ(x)`; entries may be infinite at the origin for a
    /// radial stretch with `α < 1`.
    pub fn jacobian_matrix(&self, x: Point) -> Matrix {
        match self {
            Homeomorphism::Affine { matrix, .. } => *matrix,
            Homeomorphism::RadialStretch { alpha } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    let v = if *alpha > 1.0 {
                        0.0
                    } else if *alpha == 1.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    };
                    return [[v, 0.0], [0.0, v]];
                }
                let f = r.powf(alpha - 1.0);
                let (u0, u1) = (x[0] / r, x[1] / r);
                let a = alpha - 1.0;
                [
                    [f * (1.0 + a * u0 * u0), f * a * u0 * u1],
                    [f * a * u0 * u1, f * (1.0 + a * u1 * u1)],
                ]
            }
            Homeomorphism::Shear { m } => [[1.0, *m], [0.0, 1.0]],
            Homeomorphism::Cusp { depth } => [[cusp_slope(x[0], *depth), 0.0], [0.0, 1.0]],
            Homeomorphism::Composition { outer, inner } => {
                mat_mul(&outer.jacobian_matrix(inner.forward(x)), &inner.jacobian_matrix(x))
            }
        }
    }

    pub fn jacobian_det(&self, x: Point) -> f64 {
        match self {
            Homeomorphism::RadialStretch { alpha } => {
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return det(&self.jacobian_matrix(x));
                }
                alpha * r.powf(2.0 * (alpha - 1.0))
            }
            _ => det(&self.jacobian_matrix(x)),
        }
    }

    /// `φ(x0 + y) - φ(x0)`, accurate even when `|y|` is many orders of
    /// magnitude below `|x0|`.
    pub fn local_difference(&self, x0: Point, y: Point) -> Point {
        match self {
            Homeomorphism::Affine { matrix, .. } => mat_vec(matrix, y),
            Homeomorphism::Shear { m } => [y[0] + m * y[1], y[1]],
            Homeomorphism::RadialStretch { alpha } => {
                let r2 = x0[0] * x0[0] + x0[1] * x0[1];
                if r2 == 0.0 {
                    return self.forward(y);
                }
                let x1 = [x0[0] + y[0], x0[1] + y[1]];
                let r1 = x1[0].hypot(x1[1]);
                if r1 == 0.0 {
                    let f0 = self.forward(x0);
                    return [-f0[0], -f0[1]];
                }
                // |x0 + y|^{α-1} = b (1 + t)^{(α-1)/2}, b = |x0|^{α-1}.
                let t = (2.0 * (x0[0] * y[0] + x0[1] * y[1]) + y[0] * y[0] + y[1] * y[1]) / r2;
                let b = r2.sqrt().powf(alpha - 1.0);
                let a = b * (1.0 + t).powf(0.5 * (alpha - 1.0));
                let diff = b * (0.5 * (alpha - 1.0) * t.ln_1p()).exp_m1();
                [a * y[0] + diff * x0[0], a * y[1] + diff * x0[1]]
            }
            Homeomorphism::Cusp { .. } => {
                let a = self.forward(x0);
                let b = self.forward([x0[0] + y[0], x0[1] + y[1]]);
                [b[0] - a[0], b[1] - a[1]]
            }
            Homeomorphism::Composition { outer, inner } => {
                let w = inner.local_difference(x0, y);
                outer.local_difference(inner.forward(x0), w)
            }
        }
    }
}

/// A function to be composed with a homeomorphism.
pub enum FunctionSource<'a> {
    /// Evaluated exactly at the image points.
    Analytic(&'a (dyn Fn(Point) -> f64 + Sync)),
    /// Bilinear interpolation of grid values, zero outside the box.
    Grid(&'a GridFunction),
}

/// Bilinear interpolation of cell-centred grid values at `x`.
pub fn bilinear(f: &GridFunction, x: Point) -> f64 {
    let d = f.domain();
    let h = d.spacing();
    let a = (x[0] + 0.5 * d.side_length) / h - 0.5;
    let b = (x[1] + 0.5 * d.side_length) / h - 0.5;
    let (i, j) = (a.floor(), b.floor());
    let (ta, tb) = (a - i, b - j);
    let (i, j) = (i as i64, j as i64);
    (1.0 - ta) * (1.0 - tb) * f.get_ext(i, j)
        + ta * (1.0 - tb) * f.get_ext(i + 1, j)
        + (1.0 - ta) * tb * f.get_ext(i, j + 1)
        + ta * tb * f.get_ext(i + 1, j + 1)
}

/// Samples `f ∘ φ` at the nodes of `domain`.
pub fn compose_function(
    f: FunctionSource<'_>,
    phi: &Homeomorphism,
    domain: Domain,
    support_radius: Option<f64>,
) -> Result<GridFunction> {
    phi.validate()?;
    match f {
        FunctionSource::Analytic(g) => sample(|x| g(phi.forward(x)), domain, support_radius),
        FunctionSource::Grid(g) => sample(|x| bilinear(g, phi.forward(x)), domain, support_radius),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::tent;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn family() -> Vec<Homeomorphism> {
        vec![
            Homeomorphism::identity(),
            Homeomorphism::diag(1.0, 4.0),
            Homeomorphism::rotation(0.7),
            Homeomorphism::Affine {
                matrix: [[1.2, 0.3], [-0.4, 0.9]],
                translation: [0.1, -0.2],
            },
            Homeomorphism::RadialStretch { alpha: 2.0 },
            Homeomorphism::RadialStretch { alpha: 0.5 },
            Homeomorphism::Shear { m: 0.8 },
            Homeomorphism::cusp(20).unwrap(),
            Homeomorphism::compose(
                Homeomorphism::Shear { m: -0.5 },
                Homeomorphism::RadialStretch { alpha: 1.5 },
            ),
        ]
    }

    fn probes() -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        (0..100)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect()
    }

    #[test]
    fn round_trip() {
        for phi in family() {
            let mut worst = 0.0_f64;
            for x in probes() {
                let back = phi.inverse(phi.forward(x));
                worst = worst.max((back[0] - x[0]).abs().max((back[1] - x[1]).abs()));
            }
            assert!(worst <= 1e-10, "{}: {worst}", phi.label());
            if let Some(inv) = phi.inverse_map() {
                let x = [0.3, -0.7];
                let a = inv.forward(phi.forward(x));
                assert!((a[0] - x[0]).abs() < 1e-12 && (a[1] - x[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for phi in family() {
            for x in probes() {
                if x[0].hypot(x[1]) < 0.05 || matches!(phi, Homeomorphism::Cusp { .. }) {
                    continue;
                }
                let e = 1e-6;
                let fx = |d: Point| phi.forward([x[0] + d[0], x[1] + d[1]]);
                let (a, b) = (fx([e, 0.0]), fx([-e, 0.0]));
                let (c, d) = (fx([0.0, e]), fx([0.0, -e]));
                let m = [
                    [(a[0] - b[0]) / (2.0 * e), (c[0] - d[0]) / (2.0 * e)],
                    [(a[1] - b[1]) / (2.0 * e), (c[1] - d[1]) / (2.0 * e)],
                ];
                let fd = det(&m);
                let j = phi.jacobian_det(x);
                assert!(((fd - j) / j).abs() < 1e-5, "{} at {x:?}: {fd} vs {j}", phi.label());
            }
        }
    }

    #[test]
    fn cusp_is_piecewise_cubic_interpolant() {
        let phi = Homeomorphism::cusp(30).unwrap();
        for j in 0..=30 {
            let t = 2f64.powi(-j);
            let y = phi.forward([t, 1.0]);
            assert!((y[0] - t.powi(3)).abs() <= 1e-15 * t.powi(3).max(1e-300) * 10.0);
            assert_eq!(phi.forward([-t, 0.0])[0], -y[0]);
        }
        assert_eq!(phi.forward([3.0, 0.5]), [3.0, 0.5]);
        let mid = phi.jacobian_det([0.75, 0.0]);
        assert!((mid - 1.75).abs() < 1e-15);
    }

    #[test]
    fn radial_examples() {
        let phi = Homeomorphism::RadialStretch { alpha: 2.0 };
        assert_eq!(phi.forward([1.0, 0.0]), [1.0, 0.0]);
        assert_eq!(phi.forward([2.0, 0.0]), [4.0, 0.0]);
        assert!((phi.jacobian_det([2.0, 0.0]) - 8.0).abs() < 1e-12);
        let id = Homeomorphism::RadialStretch { alpha: 1.0 };
        assert_eq!(id.forward([0.3, 0.4]), [0.3, 0.4]);
        assert!((id.jacobian_det([0.3, 0.4]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn local_difference_is_accurate() {
        let phi = Homeomorphism::RadialStretch { alpha: 2.0 };
        let x0 = [0.6, -0.2];
        let y = [3e-3, 1e-3];
        let a = phi.forward(x0);
        let b = phi.forward([x0[0] + y[0], x0[1] + y[1]]);
        let d = phi.local_difference(x0, y);
        assert!((d[0] - (b[0] - a[0])).abs() < 1e-14 && (d[1] - (b[1] - a[1])).abs() < 1e-14);
        // Far below the resolution of x0: the derivative takes over.
        let tiny = [1e-20, -3e-20];
        let d = phi.local_difference(x0, tiny);
        let lin = mat_vec(&phi.jacobian_matrix(x0), tiny);
        assert!((d[0] / lin[0] - 1.0).abs() < 1e-12 && (d[1] / lin[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composition_examples() {
        let d = Domain::new(4.0, 32).unwrap();
        let t = |x: Point| tent(x, [0.0, 0.0], 1.0, 1.0);
        let plain = sample(t, d, Some(1.0)).unwrap();
        let id = compose_function(FunctionSource::Analytic(&t), &Homeomorphism::identity(), d, Some(1.0)).unwrap();
        assert_eq!(plain.values(), id.values());
        let phi = Homeomorphism::RadialStretch { alpha: 2.0 };
        let c = compose_function(FunctionSource::Analytic(&t), &phi, d, Some(1.0)).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                let x = d.node(i, j);
                let r2 = x[0] * x[0] + x[1] * x[1];
                assert!((c.get(i, j) - (1.0 - r2).max(0.0)).abs() < 1e-14);
            }
        }
        let zero = |_: Point| 0.0;
        assert!(compose_function(FunctionSource::Analytic(&zero), &phi, d, None).unwrap().is_zero());
        let viagrid = compose_function(FunctionSource::Grid(&plain), &Homeomorphism::identity(), d, Some(1.0)).unwrap();
        for (a, b) in viagrid.values().iter().zip(plain.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn serde_round_trip() {
        for phi in family() {
            let text = serde_json::to_string(&phi).unwrap();
            let back: Homeomorphism = serde_json::from_str(&text).unwrap();
            assert_eq!(back, phi);
        }
        assert!(Homeomorphism::RadialStretch { alpha: -1.0 }.validate().is_err());
        assert!(Homeomorphism::diag(0.0, 1.0).validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn composed_round_trip(
            alpha in 0.3f64..3.0,
            m in -2.0f64..2.0,
            depth in 1u32..30,
            x in -2.0f64..2.0,
            y in -2.0f64..2.0,
        ) {
            let phi = Homeomorphism::compose(
                Homeomorphism::Shear { m },
                Homeomorphism::compose(Homeomorphism::RadialStretch { alpha }, Homeomorphism::cusp(depth).unwrap()),
            );
            let back = phi.inverse(phi.forward([x, y]));
            proptest::prop_assert!((back[0] - x).abs() < 1e-9 && (back[1] - y).abs() < 1e-9, "{:?}", back);
            proptest::prop_assert!(phi.jacobian_det([x, y]) >= 0.0);
        }
    }
}
