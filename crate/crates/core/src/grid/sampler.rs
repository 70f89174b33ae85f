use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Domain;
use crate::error::{Error, Result};

/// Lattice offsets whose length lies in `[inner, outer)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetLevel {
    pub k: u32,
    pub inner: f64,
    pub outer: f64,
    pub offsets: Vec<(i64, i64)>,
    /// Number of lattice offsets in the annulus, sampled or not.
    pub lattice_count: usize,
    /// Area represented by each kept offset: `lattice_count * h^2 / offsets.len()`.
    pub weight: f64,
}

impl OffsetLevel {
    pub fn is_exhaustive(&self) -> bool {
        self.offsets.len() == self.lattice_count
    }
}

/// Stratified discretization of `dh` over dyadic annuli
/// `2^(-k-1) H <= |h| < 2^(-k) H`, `k = 0, 1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSampler {
    pub outer_radius: f64,
    pub spacing: f64,
    pub samples_per_level: usize,
    pub seed: u64,
    pub levels: Vec<OffsetLevel>,
    pub warnings: Vec<String>,
}

impl OffsetSampler {
    /// Sampler keeping every lattice offset with `0 < |h| < outer_radius`.
    pub fn exhaustive(domain: &Domain, outer_radius: f64) -> Result<Self> {
        let levels = levels_to_resolution(domain, outer_radius);
        build_offset_sampler(domain, outer_radius, levels, usize::MAX, 0)
    }

    pub fn offset_count(&self) -> usize {
        self.levels.iter().map(|l| l.offsets.len()).sum()
    }

    /// Radius below which no offsets are represented.
    pub fn inner_radius(&self) -> f64 {
        self.levels
            .last()
            .map(|l| l.inner)
            .unwrap_or(self.outer_radius)
    }

    pub fn is_exhaustive(&self) -> bool {
        self.levels.iter().all(OffsetLevel::is_exhaustive)
    }

    /// Total lattice measure of all annuli, `h^2` times the lattice count.
    pub fn lattice_measure(&self) -> f64 {
        let h2 = self.spacing * self.spacing;
        self.levels
            .iter()
            .map(|l| l.lattice_count as f64 * h2)
            .sum()
    }
}

/// Number of dyadic levels needed for the innermost annulus to reach the
/// nearest-neighbour offsets.
pub fn levels_to_resolution(domain: &Domain, outer_radius: f64) -> usize {
    let ratio = outer_radius / domain.spacing();
    (ratio.log2().floor().max(0.0) as usize) + 1
}

#[inline]
fn in_annulus(i: i64, j: i64, spacing: f64, inner: f64, outer: f64) -> bool {
    let len = ((i * i + j * j) as f64).sqrt() * spacing;
    len >= inner && len < outer
}

/// Builds the per-level offset sets. Levels with fewer than
/// `samples_per_level` lattice points keep all of them; larger levels keep a
/// uniform subsample drawn from a stream seeded by `(seed, k)`.
pub fn build_offset_sampler(
    domain: &Domain,
    outer_radius: f64,
    levels: usize,
    samples_per_level: usize,
    seed: u64,
) -> Result<OffsetSampler> {
    domain.validate()?;
    if !(outer_radius > 0.0 && outer_radius <= domain.side_length) {
        return Err(Error::Precondition(format!(
            "outer radius {outer_radius} must lie in (0, L = {}]",
            domain.side_length
        )));
    }
    if samples_per_level < 4 {
        return Err(Error::Precondition(format!(
            "samples per level must be >= 4, got {samples_per_level}"
        )));
    }
    let h = domain.spacing();
    let mut out = Vec::with_capacity(levels);
    let mut warnings = Vec::new();
    for k in 0..levels as u32 {
        let outer = outer_radius * 0.5f64.powi(k as i32);
        let inner = 0.5 * outer;
        let m = (outer / h).ceil() as i64;
        let mut all = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                if in_annulus(i, j, h, inner, outer) {
                    all.push((i, j));
                }
            }
        }
        if all.is_empty() {
            let msg = format!("level {k} ([{inner}, {outer})) holds no lattice offset; dropped");
            warnings.push(msg);
            continue;
        }
        let count = all.len();
        let offsets = if count <= samples_per_level {
            all
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(k) << 32 | 0x9e37));
            let mut picked = index::sample(&mut rng, count, samples_per_level).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|idx| all[idx]).collect()
        };
        let weight = count as f64 * h * h / offsets.len() as f64;
        out.push(OffsetLevel {
            k,
            inner,
            outer,
            offsets,
            lattice_count: count,
            weight,
        });
    }
    Ok(OffsetSampler {
        outer_radius,
        spacing: h,
        samples_per_level,
        seed,
        levels: out,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn small_grid_is_exhaustive() {
        let d = Domain::new(4.0, 16).unwrap();
        let s = build_offset_sampler(&d, 2.0, 3, 1000, 1).unwrap();
        assert_eq!(s.levels.len(), 3);
        assert!(s.is_exhaustive());
    }

    #[test]
    fn same_seed_same_offsets() {
        let d = Domain::new(4.0, 16).unwrap();
        let a = build_offset_sampler(&d, 2.0, 3, 8, 7).unwrap();
        let b = build_offset_sampler(&d, 2.0, 3, 8, 7).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_exhaustive());
        let c = build_offset_sampler(&d, 2.0, 3, 8, 8).unwrap();
        assert_ne!(a.levels[0].offsets, c.levels[0].offsets);
    }

    #[test]
    fn ring_count_matches_enumeration() {
        // Annulus 1 <= |h| < 2 on N = 64, L = 4 (h = 1/16): lattice radii 16..32.
        let d = Domain::new(4.0, 64).unwrap();
        let s = build_offset_sampler(&d, 2.0, 1, 1_000_000, 0).unwrap();
        let mut brute = 0;
        for i in -40i64..=40 {
            for j in -40i64..=40 {
                let r2 = i * i + j * j;
                if (256..1024).contains(&r2) {
                    brute += 1;
                }
            }
        }
        assert_eq!(s.levels[0].lattice_count, brute);
        assert_eq!(s.levels[0].offsets.len(), brute);
    }

    #[test]
    fn offsets_respect_annuli_and_are_distinct() {
        let d = Domain::new(8.0, 64).unwrap();
        let s = build_offset_sampler(&d, 4.0, 6, 32, 3).unwrap();
        for l in &s.levels {
            let set: HashSet<_> = l.offsets.iter().collect();
            assert_eq!(set.len(), l.offsets.len());
            for &(i, j) in &l.offsets {
                assert!(in_annulus(i, j, s.spacing, l.inner, l.outer));
            }
        }
    }

    #[test]
    fn empty_levels_are_dropped_with_warning() {
        let d = Domain::new(4.0, 16).unwrap();
        // h = 1/4; level 3 is [1/8, 1/4), which holds no lattice offset.
        let s = build_offset_sampler(&d, 2.0, 4, 100, 0).unwrap();
        assert_eq!(s.levels.len(), 3);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn preconditions() {
        let d = Domain::new(4.0, 16).unwrap();
        assert!(build_offset_sampler(&d, 5.0, 3, 100, 0).is_err());
        assert!(build_offset_sampler(&d, 2.0, 3, 3, 0).is_err());
    }

    #[test]
    fn exhaustive_covers_punctured_disc() {
        let d = Domain::new(4.0, 16).unwrap();
        let s = OffsetSampler::exhaustive(&d, 2.0).unwrap();
        let brute = (-8i64..=8)
            .flat_map(|i| (-8i64..=8).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                let r = ((i * i + j * j) as f64).sqrt() * 0.25;
                r > 0.0 && r < 2.0
            })
            .count();
        assert_eq!(s.offset_count(), brute);
    }
}
