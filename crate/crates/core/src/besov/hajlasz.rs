use rayon::prelude::*;

use super::{lq_sum, BesovParams};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Domain, GridFunction};

/// One dyadic level of a fractional Hajłasz gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct HajlaszLevel {
    /// Pairs at distance `2^{-k-1} <= |x - y| < 2^{-k}` are controlled.
    pub k: i32,
    /// `g_k` on the box nodes.
    pub g: GridFunction,
    /// `h^2 Σ g_k^p` over nodes outside the box (where `f` vanishes but
    /// `g_k` need not); for `p = ∞` the exterior maximum instead.
    pub exterior: f64,
}

impl HajlaszLevel {
    /// `‖g_k‖_{L^p(R^2)}`, exterior nodes included.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            lp_norm(&self.g, p).max(self.exterior)
        } else {
            let h = self.g.spacing();
            let inside: f64 = self.g.values().iter().map(|v| v.abs().powf(p)).sum();
            (h * h * inside + self.exterior).powf(1.0 / p)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HajlaszGradient {
    pub levels: Vec<HajlaszLevel>,
    pub s: f64,
    pub p: f64,
    /// `‖f‖_p`, used for the feasible gradients `2^{(k+1)s}|f|`.
    pub f_lp: f64,
}

/// Levels `k` from the coarsest with `2^{-k} <= L/2` down to the finest whose
/// annulus still holds nearest-neighbour offsets.
pub fn default_hajlasz_levels(domain: &Domain) -> Vec<i32> {
    let coarse = (-(0.5 * domain.side_length).log2()).ceil() as i32;
    let fine = (1.0 / domain.spacing()).log2().ceil() as i32 - 1;
    (coarse..=fine).collect()
}

/// Half-sup gradient
/// `g_k(x) = ½ sup { |f(x) - f(y)| / |x - y|^s : 2^{-k-1} <= |x - y| < 2^{-k} }`
/// over lattice nodes `y` of the zero-extended grid.
pub fn hajlasz_halfsup_gradient(
    f: &GridFunction,
    params: &BesovParams,
    levels: &[i32],
) -> Result<HajlaszGradient> {
    params.validate()?;
    let h = f.spacing();
    let n = f.resolution() as i64;
    let mut out = Vec::with_capacity(levels.len());
    for &k in levels {
        let outer = 2f64.powi(-k);
        let inner = 0.5 * outer;
        if outer > f.domain().side_length {
            return Err(Error::Precondition(format!(
                "level {k} (|x - y| < {outer}) exceeds the box side {}",
                f.domain().side_length
            )));
        }
        let m = (outer / h).ceil() as i64;
        let mut offsets = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                let len = ((i * i + j * j) as f64).sqrt() * h;
                if len >= inner && len < outer {
                    offsets.push((i, j, len.powf(-params.s)));
                }
            }
        }
        let Some(bbox) = f.nonzero_box() else {
            out.push(HajlaszLevel {
                k,
                g: GridFunction::zeros(*f.domain()),
                exterior: 0.0,
            });
            continue;
        };
        // Outside bbox ⊕ m both f(x) and every f(x + o) vanish.
        let (i0, i1) = (bbox.i0 - m, bbox.i1 + m);
        let (j0, j1) = (bbox.j0 - m, bbox.j1 + m);
        let rows: Vec<Vec<f64>> = (i0..=i1)
            .into_par_iter()
            .map(|i| {
                (j0..=j1)
                    .map(|j| {
                        let fx = f.get_ext(i, j);
                        let mut best = 0.0_f64;
                        for &(di, dj, w) in &offsets {
                            let d = (fx - f.get_ext(i + di, j + dj)).abs() * w;
                            if d > best {
                                best = d;
                            }
                        }
                        0.5 * best
                    })
                    .collect()
            })
            .collect();
        let mut values = vec![0.0; f.domain().len()];
        let mut exterior = 0.0_f64;
        for (ri, row) in rows.iter().enumerate() {
            let i = i0 + ri as i64;
            for (ci, &g) in row.iter().enumerate() {
                let j = j0 + ci as i64;
                if (0..n).contains(&i) && (0..n).contains(&j) {
                    values[i as usize * n as usize + j as usize] = g;
                } else if params.p.is_infinite() {
                    exterior = exterior.max(g);
                } else {
                    exterior += h * h * g.powf(params.p);
                }
            }
        }
        out.push(HajlaszLevel {
            k,
            g: GridFunction::from_values(*f.domain(), values, None)?,
            exterior,
        });
    }
    Ok(HajlaszGradient {
        levels: out,
        s: params.s,
        p: params.p,
        f_lp: lp_norm(f, params.p),
    })
}

/// `(Σ_k ‖g_k‖_p^q)^{1/q}` over all `k ∈ Z`.
///
/// On every level the smaller of the half-sup gradient and the feasible
/// `2^{(k+1)s}|f|` is used; levels coarser than the gradient's coarsest
/// use the latter, summed in closed form. Levels finer than the grid carry
/// no node pairs and are omitted.
pub fn hajlasz_upper_bound(grad: &HajlaszGradient, params: &BesovParams) -> Result<f64> {
    if grad.levels.is_empty() {
        return Err(Error::Precondition("Hajłasz gradient has no levels".into()));
    }
    let (s, q) = (grad.s, params.q);
    let trivial = |k: i32| 2f64.powf(f64::from(k + 1) * s) * grad.f_lp;
    let per_level = grad
        .levels
        .iter()
        .map(|l| l.lp_norm(grad.p).min(trivial(l.k)));
    let coarsest = grad.levels.iter().map(|l| l.k).min().unwrap_or(0);
    if q.is_infinite() {
        let inner = lq_sum(per_level, q);
        return Ok(inner.max(trivial(coarsest - 1)));
    }
    let mut total: f64 = per_level.map(|v| v.powf(q)).sum();
    // Σ_{k < coarsest} (2^{(k+1)s} ‖f‖_p)^q
    total += grad.f_lp.powf(q) * 2f64.powf(f64::from(coarsest) * s * q)
        / (1.0 - 2f64.powf(-s * q));
    Ok(total.powf(1.0 / q))
}

/// [`hajlasz_upper_bound`] of the half-sup gradient on `levels`.
pub fn hajlasz_norm(f: &GridFunction, params: &BesovParams, levels: &[i32]) -> Result<f64> {
    let grad = hajlasz_halfsup_gradient(f, params, levels)?;
    hajlasz_upper_bound(&grad, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample, tent};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> BesovParams {
        BesovParams::scaling_invariant(0.5, 4.0).unwrap()
    }

    #[test]
    fn default_levels() {
        let d = Domain::new(8.0, 64).unwrap();
        assert_eq!(default_hajlasz_levels(&d), vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn constant_on_support_gives_zero() {
        let d = Domain::new(4.0, 16).unwrap();
        let g = hajlasz_halfsup_gradient(&GridFunction::zeros(d), &params(), &[0, 1]).unwrap();
        assert!(g.levels.iter().all(|l| l.g.is_zero() && l.exterior == 0.0));
        assert_eq!(hajlasz_upper_bound(&g, &params()).unwrap(), 0.0);
    }

    #[test]
    fn feasibility_scan_random() {
        let d = Domain::new(4.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v = vec![0.0; 256];
        for i in 4..12 {
            for j in 4..12 {
                v[i * 16 + j] = rng.gen_range(-1.0..1.0);
            }
        }
        let f = GridFunction::from_values(d, v, Some(1.3)).unwrap();
        let levels = default_hajlasz_levels(&d);
        let grad = hajlasz_halfsup_gradient(&f, &params(), &levels).unwrap();
        let h = d.spacing();
        let mut violations = 0;
        for lvl in &grad.levels {
            let outer = 2f64.powi(-lvl.k);
            for a in 0..256i64 {
                for b in 0..256i64 {
                    let (ai, aj, bi, bj) = (a / 16, a % 16, b / 16, b % 16);
                    let dist = (((ai - bi).pow(2) + (aj - bj).pow(2)) as f64).sqrt() * h;
                    if dist < 0.5 * outer || dist >= outer {
                        continue;
                    }
                    let lhs = (f.get_ext(ai, aj) - f.get_ext(bi, bj)).abs();
                    let rhs = dist.powf(0.5)
                        * (lvl.g.get(ai as usize, aj as usize) + lvl.g.get(bi as usize, bj as usize));
                    if lhs > rhs * (1.0 + 1e-12) {
                        violations += 1;
                    }
                }
            }
        }
        assert_eq!(violations, 0);
    }

    #[test]
    fn tent_fine_level_matches_lipschitz_scale() {
        let d = Domain::new(4.0, 64).unwrap();
        let f = sample(|x| tent(x, [0.0, 0.0], 1.0, 1.0), d, Some(1.0)).unwrap();
        let k = 3;
        let grad = hajlasz_halfsup_gradient(&f, &params(), &[k]).unwrap();
        let top = 0.5 * 2f64.powf(-f64::from(k) * 0.5);
        let ratio = grad.levels[0].g.max_abs() / top;
        assert!(ratio <= 1.0 && ratio >= 2f64.powf(-0.5) * 0.95, "{ratio}");
    }

    #[test]
    fn lq_monotone_and_homogeneous() {
        let d = Domain::new(8.0, 64).unwrap();
        let f = sample(|x| tent(x, [0.3, 0.0], 1.2, 1.0), d, Some(1.6)).unwrap();
        let p = params();
        let grad = hajlasz_halfsup_gradient(&f, &p, &default_hajlasz_levels(&d)).unwrap();
        let mut prev = f64::INFINITY;
        for q in [1.0, 2.0, 4.0, 8.0, f64::INFINITY] {
            let v = hajlasz_upper_bound(&grad, &p.with_q(q)).unwrap();
            assert!(v <= prev * (1.0 + 1e-12), "q = {q}");
            prev = v;
        }
        let a = hajlasz_norm(&f, &p, &default_hajlasz_levels(&d)).unwrap();
        let b = hajlasz_norm(&f.scaled(-3.0), &p, &default_hajlasz_levels(&d)).unwrap();
        assert_relative_eq!(b / a, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn empty_gradient_rejected() {
        let g = HajlaszGradient {
            levels: vec![],
            s: 0.5,
            p: 4.0,
            f_lp: 1.0,
        };
        assert!(hajlasz_upper_bound(&g, &params()).is_err());
    }
}
