//! Deterministic sampling: seeded pseudo-random boxes and low-discrepancy
//! Halton points.
//!
//! Scale-invariant systems live on positive orthants, so positive axes are
//! sampled log-uniformly and unbounded ones uniformly.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HALTON_BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// The `index`-th element of the van der Corput sequence in the given base.
pub fn halton(index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index + 1; // skip the leading zero
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Axis of a sampling box.
#[derive(Debug, Clone, Copy)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub log_scale: bool,
}

impl Axis {
    pub fn linear(lo: f64, hi: f64) -> Axis {
        Axis {
            lo,
            hi,
            log_scale: false,
        }
    }

    pub fn log(lo: f64, hi: f64) -> Axis {
        assert!(lo > 0.0 && hi > lo);
        Axis {
            lo,
            hi,
            log_scale: true,
        }
    }

    fn map(&self, t: f64) -> f64 {
        if self.log_scale {
            (self.lo.ln() + t * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + t * (self.hi - self.lo)
        }
    }
}

/// `n` quasi-random (Halton) points in the box; reproducible without a seed.
pub fn halton_points(n: usize, axes: &[Axis]) -> Vec<DVector<f64>> {
    assert!(axes.len() <= HALTON_BASES.len(), "too many dimensions for the Halton bases");
    (0..n as u64)
        .map(|i| {
            DVector::from_iterator(
                axes.len(),
                axes.iter()
                    .enumerate()
                    .map(|(d, a)| a.map(halton(i, HALTON_BASES[d]))),
            )
        })
        .collect()
}

/// `n` seeded pseudo-random points in the box.
pub fn random_points(n: usize, axes: &[Axis], seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            DVector::from_iterator(
                axes.len(),
                axes.iter().map(|a| a.map(rng.random::<f64>())),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base2_prefix() {
        let seq: Vec<f64> = (0..4).map(|i| halton(i, 2)).collect();
        assert_eq!(seq, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn points_stay_in_box() {
        let axes = [Axis::log(0.1, 10.0), Axis::linear(-2.0, 2.0)];
        for p in halton_points(64, &axes)
            .into_iter()
            .chain(random_points(64, &axes, 7))
        {
            assert!(p[0] >= 0.1 && p[0] <= 10.0);
            assert!(p[1] >= -2.0 && p[1] <= 2.0);
        }
    }

    #[test]
    fn seeding_is_deterministic() {
        let axes = [Axis::linear(0.0, 1.0)];
        assert_eq!(random_points(8, &axes, 42), random_points(8, &axes, 42));
        assert_ne!(random_points(8, &axes, 42), random_points(8, &axes, 43));
    }
}
