//! Uniform planar grids, sampled functions, shifted differences and `L^p`
//! quadrature.
//!
//! Nodes are cell centered: node `(i, j)` sits at
//! `(-L/2 + (i + 1/2) h, -L/2 + (j + 1/2) h)` with `h = L / N`, so every
//! Riemann sum carries the uniform weight `h^2`. Values are stored row-major
//! with `i` (the first coordinate) as the row index.
//!
//! Functions are extended by zero outside the box. Difference norms used by
//! the estimators are taken over the whole infinite lattice, which is exact
//! for zero-extended data and lets offsets exceed the box.

mod io;
mod sampler;

pub use io::{read_grid_function, write_grid_function, GRID_MAGIC, GRID_VERSION};
pub use sampler::{build_offset_sampler, levels_to_resolution, OffsetLevel, OffsetSampler};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension of every grid in this crate.
pub const DIM: u32 = 2;

pub type Point = [f64; 2];

/// The box `[-L/2, L/2]^2` discretized with `N` cell-centered nodes per axis.
/// Powers of two keep dyadic annuli aligned with the lattice; any even
/// `N >= 8` is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub side_length: f64,
    pub resolution: usize,
}

impl Domain {
    pub fn new(side_length: f64, resolution: usize) -> Result<Self> {
        let d = Domain {
            side_length,
            resolution,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side_length.is_finite() && self.side_length > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "side length must be positive and finite, got {}",
                self.side_length
            )));
        }
        if self.resolution < 8 || self.resolution % 2 == 1 {
            return Err(Error::InvalidDomain(format!(
                "resolution must be even and >= 8, got {}",
                self.resolution
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.side_length / self.resolution as f64
    }

    #[inline]
    pub fn coord(&self, i: i64) -> f64 {
        -0.5 * self.side_length + (i as f64 + 0.5) * self.spacing()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        [self.coord(i as i64), self.coord(j as i64)]
    }

    /// Index of the node nearest to `x` along one axis (may be out of range).
    #[inline]
    pub fn nearest_index(&self, x: f64) -> i64 {
        ((x + 0.5 * self.side_length) / self.spacing() - 0.5).round() as i64
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        self.resolution == 0
    }

    pub fn area(&self) -> f64 {
        self.side_length * self.side_length
    }
}

/// Inclusive index rectangle holding every nonzero node of a grid function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBox {
    pub i0: i64,
    pub i1: i64,
    pub j0: i64,
    pub j1: i64,
}

impl IndexBox {
    #[inline]
    pub fn contains(&self, i: i64, j: i64) -> bool {
        i >= self.i0 && i <= self.i1 && j >= self.j0 && j <= self.j1
    }
}

/// Real samples on a [`Domain`], zero outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    values: Vec<f64>,
    support_radius: Option<f64>,
}

impl GridFunction {
    /// Wraps raw row-major values, checking finiteness and the declared support.
    pub fn from_values(
        domain: Domain,
        values: Vec<f64>,
        support_radius: Option<f64>,
    ) -> Result<Self> {
        domain.validate()?;
        let n = domain.resolution;
        if values.len() != n * n {
            return Err(Error::Precondition(format!(
                "expected {} values, got {}",
                n * n,
                values.len()
            )));
        }
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    i: idx / n,
                    j: idx % n,
                    value: v,
                });
            }
        }
        let f = GridFunction {
            domain,
            values,
            support_radius,
        };
        if let Some(r) = support_radius {
            if let Some((i, j)) = f.support_violation(r) {
                return Err(Error::Precondition(format!(
                    "value {} at node ({i}, {j}) lies outside declared support radius {r}",
                    f.get(i, j)
                )));
            }
        }
        Ok(f)
    }

    pub fn zeros(domain: Domain) -> Self {
        GridFunction {
            domain,
            values: vec![0.0; domain.len()],
            support_radius: Some(0.0),
        }
    }

    #[inline]
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.domain.resolution
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.domain.spacing()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// Replaces the declared support radius after checking it.
    pub fn with_support_radius(mut self, radius: Option<f64>) -> Result<Self> {
        if let Some(r) = radius {
            if let Some((i, j)) = self.support_violation(r) {
                return Err(Error::Precondition(format!(
                    "node ({i}, {j}) is nonzero outside radius {r}"
                )));
            }
        }
        self.support_radius = radius;
        Ok(self)
    }

    fn support_violation(&self, r: f64) -> Option<(usize, usize)> {
        let n = self.resolution();
        for i in 0..n {
            for j in 0..n {
                let v = self.values[i * n + j];
                if v != 0.0 {
                    let [x, y] = self.domain.node(i, j);
                    if x.hypot(y) > r {
                        return Some((i, j));
                    }
                }
            }
        }
        None
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.domain.resolution + j]
    }

    /// Value at a lattice index, zero outside the box.
    #[inline]
    pub fn get_ext(&self, i: i64, j: i64) -> f64 {
        let n = self.domain.resolution as i64;
        if i < 0 || j < 0 || i >= n || j >= n {
            0.0
        } else {
            self.values[(i * n + j) as usize]
        }
    }

    /// `lambda * f`, keeping the support declaration.
    pub fn scaled(&self, lambda: f64) -> Self {
        GridFunction {
            domain: self.domain,
            values: self.values.iter().map(|v| lambda * v).collect(),
            support_radius: self.support_radius,
        }
    }

    /// Pointwise sum; both operands must share a domain.
    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::Precondition("domains differ".into()));
        }
        let support_radius = match (self.support_radius, other.support_radius) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Ok(GridFunction {
            domain: self.domain,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
            support_radius,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Smallest index rectangle containing every nonzero node, `None` for f = 0.
    pub fn nonzero_box(&self) -> Option<IndexBox> {
        let n = self.resolution();
        let mut b = IndexBox {
            i0: i64::MAX,
            i1: i64::MIN,
            j0: i64::MAX,
            j1: i64::MIN,
        };
        let mut any = false;
        for i in 0..n {
            for j in 0..n {
                if self.values[i * n + j] != 0.0 {
                    any = true;
                    b.i0 = b.i0.min(i as i64);
                    b.i1 = b.i1.max(i as i64);
                    b.j0 = b.j0.min(j as i64);
                    b.j1 = b.j1.max(j as i64);
                }
            }
        }
        any.then_some(b)
    }

    /// Largest difference between neighbouring nodes divided by the spacing,
    /// counting the zero extension. A grid proxy for `Lip(f)`.
    pub fn discrete_lipschitz(&self) -> f64 {
        let n = self.resolution() as i64;
        let mut m = 0.0_f64;
        for i in -1..n {
            for j in -1..n {
                let v = self.get_ext(i, j);
                m = m.max((self.get_ext(i + 1, j) - v).abs());
                m = m.max((self.get_ext(i, j + 1) - v).abs());
            }
        }
        m / self.spacing()
    }

    /// Lebesgue measure of the nonzero set (node count times `h^2`).
    pub fn support_measure(&self) -> f64 {
        let h = self.spacing();
        self.values.iter().filter(|v| **v != 0.0).count() as f64 * h * h
    }
}

/// Samples `f` at every node center.
pub fn sample<F>(f: F, domain: Domain, support_radius: Option<f64>) -> Result<GridFunction>
where
    F: Fn(Point) -> f64,
{
    domain.validate()?;
    let n = domain.resolution;
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = f(domain.node(i, j));
            if !v.is_finite() {
                return Err(Error::NonFinite { i, j, value: v });
            }
            values.push(v);
        }
    }
    GridFunction::from_values(domain, values, support_radius)
}

/// `f(x + h) - f(x)` on the box, where partners leaving the box read as zero.
pub fn shift_difference(f: &GridFunction, offset: (i64, i64)) -> Result<GridFunction> {
    let n = f.resolution();
    let (di, dj) = offset;
    if di.unsigned_abs() as usize >= n || dj.unsigned_abs() as usize >= n {
        return Err(Error::OffsetOutOfRange(di, dj, n));
    }
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n as i64 {
        for j in 0..n as i64 {
            values.push(f.get_ext(i + di, j + dj) - f.get_ext(i, j));
        }
    }
    Ok(GridFunction {
        domain: f.domain,
        values,
        support_radius: None,
    })
}

/// `(h^2 sum |v|^p)^(1/p)`, or the max norm for `p = inf`.
pub fn lp_norm(f: &GridFunction, p: f64) -> f64 {
    if p.is_infinite() {
        return f.max_abs();
    }
    let h = f.spacing();
    let s: f64 = f.values.iter().map(|v| v.abs().powf(p)).sum();
    (h * h * s).powf(1.0 / p)
}

/// `sum_x |f(x + h) - f(x)|^p` over the infinite lattice, without the `h^2`
/// weight; for `p = inf` the max of `|f(x + h) - f(x)|`.
///
/// Only nodes in `support` and its translate by `-offset` can contribute, so
/// the cost is proportional to the support box rather than the grid.
pub fn lattice_difference_power(
    f: &GridFunction,
    support: &IndexBox,
    offset: (i64, i64),
    p: f64,
) -> f64 {
    let (di, dj) = offset;
    if di == 0 && dj == 0 {
        return 0.0;
    }
    let inf = p.is_infinite();
    let int_p = if p == p.round() && (1.0..=16.0).contains(&p) {
        Some(p as i32)
    } else {
        None
    };
    let pw = |d: f64| -> f64 {
        let a = d.abs();
        match int_p {
            Some(k) => a.powi(k),
            None => a.powf(p),
        }
    };
    let mut acc = 0.0;
    let mut mx = 0.0_f64;
    // x in the support box: full difference.
    for i in support.i0..=support.i1 {
        for j in support.j0..=support.j1 {
            let d = f.get_ext(i + di, j + dj) - f.get_ext(i, j);
            if inf {
                mx = mx.max(d.abs());
            } else {
                acc += pw(d);
            }
        }
    }
    // x outside the support box with x + h inside it: only f(x + h) survives.
    for i in support.i0..=support.i1 {
        for j in support.j0..=support.j1 {
            if !support.contains(i - di, j - dj) {
                let v = f.get_ext(i, j);
                if inf {
                    mx = mx.max(v.abs());
                } else {
                    acc += pw(v);
                }
            }
        }
    }
    if inf {
        mx
    } else {
        acc
    }
}

/// `L^p` norm over the plane of `f(. + h) - f` for a lattice offset.
pub fn lattice_difference_norm(f: &GridFunction, offset: (i64, i64), p: f64) -> f64 {
    match f.nonzero_box() {
        None => 0.0,
        Some(b) => {
            let s = lattice_difference_power(f, &b, offset, p);
            if p.is_infinite() {
                s
            } else {
                let h = f.spacing();
                (h * h * s).powf(1.0 / p)
            }
        }
    }
}

/// Tent `b * max(0, 1 - |x - c| / r)`.
#[inline]
pub fn tent(x: Point, center: Point, radius: f64, amplitude: f64) -> f64 {
    let d = (x[0] - center[0]).hypot(x[1] - center[1]);
    amplitude * (1.0 - d / radius).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tent_fn(domain: Domain, r: f64) -> GridFunction {
        sample(|x| tent(x, [0.0, 0.0], r, 1.0), domain, Some(r)).unwrap()
    }

    #[test]
    fn domain_rejects_bad_resolution() {
        assert!(Domain::new(4.0, 13).is_err());
        assert!(Domain::new(4.0, 12).is_ok());
        assert!(Domain::new(4.0, 4).is_err());
        assert!(Domain::new(-1.0, 16).is_err());
        assert!(Domain::new(4.0, 16).is_ok());
    }

    #[test]
    fn sample_zero_function() {
        let d = Domain::new(3.0, 16).unwrap();
        let f = sample(|_| 0.0, d, None).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn sample_tent_peak_and_boundary_ring() {
        // L = 4, N = 16 has no node exactly at the origin; the four central
        // nodes sit at distance h / sqrt(2) and carry the peak value there.
        let d = Domain::new(4.0, 16).unwrap();
        let f = tent_fn(d, 1.0);
        let h = d.spacing();
        let centre = 1.0 - h / 2f64.sqrt();
        assert_relative_eq!(f.get(7, 7), centre, epsilon = 1e-15);
        assert_relative_eq!(f.get(8, 8), centre, epsilon = 1e-15);
        // Peak of the sampled tent at the node nearest the origin.
        let shifted = sample(|x| tent(x, d.node(8, 8), 1.0, 1.0), d, None).unwrap();
        assert_eq!(shifted.get(8, 8), 1.0);
        for k in 0..16 {
            assert_eq!(f.get(0, k), 0.0);
            assert_eq!(f.get(15, k), 0.0);
            assert_eq!(f.get(k, 0), 0.0);
            assert_eq!(f.get(k, 15), 0.0);
        }
    }

    #[test]
    fn sample_gaussian_corner_value() {
        let d = Domain::new(8.0, 64).unwrap();
        let f = sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp(), d, None).unwrap();
        // Corner node at (-3.9375, -3.9375): exp(-31.0078125) = 3.41e-14.
        let c = d.coord(0);
        let expected = (-(2.0 * c * c)).exp();
        assert_relative_eq!(f.get(0, 0), expected, max_relative = 1e-14);
        assert!(f.get(0, 0) <= 1.2e-13);
        // Nodes straddle the origin, so the centre value is exp(-2 (h/2)^2).
        let h = d.spacing();
        assert_relative_eq!(f.get(31, 31), (-(h * h) / 2.0).exp(), epsilon = 1e-15);
    }

    #[test]
    fn sample_rejects_non_finite() {
        let d = Domain::new(2.0, 8).unwrap();
        let err = sample(|x| if x[0] > 0.8 { f64::NAN } else { 0.0 }, d, None).unwrap_err();
        assert!(matches!(err, Error::NonFinite { i: 7, .. }));
    }

    #[test]
    fn support_declaration_is_checked() {
        let d = Domain::new(4.0, 16).unwrap();
        assert!(sample(|x| tent(x, [0.0, 0.0], 1.0, 1.0), d, Some(0.5)).is_err());
    }

    #[test]
    fn shift_difference_of_constant_has_boundary_column() {
        let d = Domain::new(2.0, 8).unwrap();
        let f = sample(|_| 3.0, d, None).unwrap();
        let g = shift_difference(&f, (1, 0)).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expected = if i == 7 { -3.0 } else { 0.0 };
                assert_eq!(g.get(i, j), expected);
            }
        }
        let z = shift_difference(&f, (0, 0)).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn shift_difference_rejects_large_offsets() {
        let d = Domain::new(2.0, 8).unwrap();
        let f = GridFunction::zeros(d);
        assert!(matches!(
            shift_difference(&f, (8, 0)),
            Err(Error::OffsetOutOfRange(8, 0, 8))
        ));
        assert!(shift_difference(&f, (-7, 7)).is_ok());
    }

    #[test]
    fn shift_difference_tent_quarter_offset() {
        // L = 4, N = 16: offset N/4 = 4 nodes = one unit of length.
        let d = Domain::new(4.0, 16).unwrap();
        let f = tent_fn(d, 1.0);
        let g = shift_difference(&f, (4, 0)).unwrap();
        // Direct evaluation of tent(x + e1) - tent(x) at the nodes.
        let mut direct = 0.0_f64;
        for i in 0..16 {
            for j in 0..16 {
                let [x, y] = d.node(i, j);
                let v = tent([x + 1.0, y], [0.0, 0.0], 1.0, 1.0) - tent([x, y], [0.0, 0.0], 1.0, 1.0);
                direct = direct.max(v.abs());
            }
        }
        assert_relative_eq!(g.max_abs(), direct, epsilon = 1e-15);
        assert!(g.max_abs() <= 1.0);
        assert!(g.max_abs() > 0.8);
    }

    #[test]
    fn lp_norm_examples() {
        let d = Domain::new(2.0, 8).unwrap();
        assert_eq!(lp_norm(&GridFunction::zeros(d), 2.0), 0.0);
        let one = sample(|_| 1.0, d, None).unwrap();
        assert_relative_eq!(lp_norm(&one, 2.0), 2.0, epsilon = 1e-14);
        assert_eq!(lp_norm(&one, f64::INFINITY), 1.0);
    }

    #[test]
    fn lp_norm_of_tent_converges() {
        let target = (std::f64::consts::PI / 6.0).sqrt();
        let mut prev = f64::INFINITY;
        for n in [32, 64, 128, 256] {
            let d = Domain::new(4.0, n).unwrap();
            let err = (lp_norm(&tent_fn(d, 1.0), 2.0) - target).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn lattice_difference_counts_mass_leaving_the_box() {
        let d = Domain::new(4.0, 16).unwrap();
        let f = tent_fn(d, 1.0);
        // Offsets beyond the support diameter see two disjoint copies.
        let p = 3.0;
        let full = 2.0 * lp_norm(&f, p).powf(p);
        for off in [(9, 0), (0, 16), (40, -3)] {
            let v = lattice_difference_norm(&f, off, p).powf(p);
            assert_relative_eq!(v, full, max_relative = 1e-13);
        }
        // Inside the box the zero-extended shift agrees with the lattice sum.
        let g = shift_difference(&f, (3, 1)).unwrap();
        assert_relative_eq!(
            lp_norm(&g, p),
            lattice_difference_norm(&f, (3, 1), p),
            max_relative = 1e-13
        );
    }
}
