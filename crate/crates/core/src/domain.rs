use nalgebra::DVector;

use crate::error::{Error, Result};

/// Open interval of admissible values. Unbounded ends are `-inf` / `inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// The whole real line.
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Strictly positive reals, the natural domain of concentrations and of
    /// the scaling group.
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && v > self.lo && v < self.hi
    }

    pub fn check(&self, v: f64) -> Result<f64> {
        if self.contains(v) {
            Ok(v)
        } else {
            Err(Error::DomainValue {
                value: v,
                domain: *self,
            })
        }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Index of the first component of `x` outside its interval, if any.
pub fn first_violation(domain: &[Interval], x: &DVector<f64>) -> Option<usize> {
    (0..x.len()).find(|&i| !domain[i].contains(x[i]))
}

pub fn state_in_domain(domain: &[Interval], x: &DVector<f64>) -> bool {
    first_violation(domain, x).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_ends_are_excluded() {
        assert!(!Interval::POSITIVE.contains(0.0));
        assert!(Interval::POSITIVE.contains(1e-300));
        assert!(Interval::REAL.contains(-1e300));
        assert!(!Interval::REAL.contains(f64::NAN));
    }

    #[test]
    fn violation_reports_first_component() {
        let d = vec![Interval::POSITIVE, Interval::REAL];
        let x = DVector::from_vec(vec![-1.0, 2.0]);
        assert_eq!(first_violation(&d, &x), Some(0));
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(first_violation(&d, &x), None);
    }
}
