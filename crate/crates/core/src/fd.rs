//! Central finite differences with a relative step rule.
//!
//! The step for a coordinate with magnitude `s` is `h_rel * max(1, |s|)`,
//! which balances truncation against rounding for double precision.

use nalgebra::{DMatrix, DVector};

/// Default relative step.
pub const DEFAULT_STEP: f64 = 1e-6;

pub fn step(scale: f64, h_rel: f64) -> f64 {
    h_rel * scale.abs().max(1.0)
}

/// d/dt f(t) by a central difference.
pub fn derivative(f: impl Fn(f64) -> f64, t: f64, h_rel: f64) -> f64 {
    let h = step(t, h_rel);
    (f(t + h) - f(t - h)) / (2.0 * h)
}

/// Gradient of a scalar field.
pub fn gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h_rel: f64) -> DVector<f64> {
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut xp = x.clone();
    for i in 0..n {
        let h = step(x[i], h_rel);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Jacobian of a vector field, one column per coordinate.
pub fn jacobian(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h_rel: f64,
) -> DMatrix<f64> {
    let n = x.len();
    let mut xp = x.clone();
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let h = step(x[i], h_rel);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        cols.push((fp - fm) / (2.0 * h));
    }
    DMatrix::from_columns(&cols)
}
