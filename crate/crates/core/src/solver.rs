//! Adaptive Dormand-Prince 5(4) integration with 4th-order dense output.
//!
//! The solver integrates one smooth piece at a time; discontinuity handling
//! (input breakpoints) lives in [`crate::dynamics::simulate`], which restarts
//! the integration exactly at the breakpoint times.

use nalgebra::DVector;

use crate::domain::{first_violation, Interval};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step size; estimated automatically when absent.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        // invariance identities are tested to 1e-6; the integrator error has
        // to sit well below that
        SolverOptions {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: None,
            max_steps: 1_000_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        SolverOptions {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// b - bhat, for the embedded 4th-order error estimate
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// dense-output weights
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step's interpolation polynomial.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    /// Signed step length; the segment covers `t0 ..= t0 + h`.
    pub h: f64,
    rcont: [DVector<f64>; 5],
}

impl DenseSegment {
    pub fn eval(&self, t: f64) -> DVector<f64> {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)))
    }
}

/// A continuous solution: the accepted grid plus per-step dense output.
#[derive(Debug, Clone)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub segments: Vec<DenseSegment>,
}

impl Solution {
    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_state(&self) -> &DVector<f64> {
        self.states.last().unwrap()
    }

    fn forward(&self) -> bool {
        self.end_time() >= self.start_time()
    }

    /// Dense evaluation; agrees with the grid states exactly at grid points.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        // exact at grid points by construction of the interpolant, but look
        // the endpoint states up directly to avoid rounding at the seams
        if t == self.start_time() {
            return self.states[0].clone();
        }
        if t == self.end_time() {
            return self.end_state().clone();
        }
        let fw = self.forward();
        let k = self
            .times
            .partition_point(|&g| if fw { g < t } else { g > t });
        if k < self.times.len() && self.times[k] == t {
            return self.states[k].clone();
        }
        let idx = self
            .segments
            .partition_point(|s| if fw { s.t0 + s.h < t } else { s.t0 + s.h > t });
        let idx = idx.min(self.segments.len() - 1);
        self.segments[idx].eval(t)
    }

    /// Append a continuation piece that starts where `self` ends.
    pub fn extend_with(&mut self, mut other: Solution) {
        self.times.extend(other.times.drain(..).skip(1));
        self.states.extend(other.states.drain(..).skip(1));
        self.segments.append(&mut other.segments);
    }
}

fn error_norm(err: &DVector<f64>, y0: &DVector<f64>, y1: &DVector<f64>, opts: &SolverOptions) -> f64 {
    let n = err.len();
    let mut acc = 0.0;
    for i in 0..n {
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sc;
        acc += r * r;
    }
    (acc / n as f64).sqrt()
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &DVector<f64>, f0: &DVector<f64>, dir: f64, span: f64, opts: &SolverOptions) -> Result<f64>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let n = y0.len() as f64;
    let sc = |y: &DVector<f64>, v: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..y.len() {
            let s = opts.atol + opts.rtol * y[i].abs();
            let r = v[i] / s;
            acc += r * r;
        }
        (acc / n).sqrt()
    };
    let d0 = sc(y0, y0);
    let d1 = sc(y0, f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1 = y0 + dir * h0 * f0;
    let f1 = f(t0 + dir * h0, &y1)?;
    let d2 = sc(y0, &(&f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok(h1.min(100.0 * h0).min(span))
}

/// Integrate `dy/dt = f(t, y)` from `t0` to `t1` (either direction).
///
/// When `domain` is given, the state is required to stay inside it; leaving
/// it produces [`Error::DomainExit`] with the crossing time located on the
/// dense output.
pub fn integrate<F>(
    mut f: F,
    t_span: (f64, f64),
    y0: &DVector<f64>,
    opts: &SolverOptions,
    domain: Option<&[Interval]>,
) -> Result<Solution>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let (t0, t1) = t_span;
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidArgument("rtol and atol must be positive".into()));
    }
    let mut sol = Solution {
        times: vec![t0],
        states: vec![y0.clone()],
        segments: Vec::new(),
    };
    if t0 == t1 {
        return Ok(sol);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();

    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = f(t, &y)?;
    let mut h = match opts.h_init {
        Some(h) => h.abs().min(span),
        None => initial_step(&mut f, t0, &y, &k1, dir, span, opts)?,
    };
    let mut rejected = false;
    let mut eval_err: Option<Error> = None;

    for _ in 0..opts.max_steps {
        if (t - t1).abs() <= 1e-14 * span.max(t1.abs()) || dir * (t1 - t) <= 0.0 {
            return Ok(sol);
        }
        h = h.min(dir * (t1 - t));
        if h <= 1e-14 * t.abs().max(1.0) {
            // a persistent evaluation failure is more informative than the
            // step underflow it causes
            return Err(eval_err.unwrap_or(Error::StepUnderflow { time: t }));
        }
        let hs = dir * h;

        // stages
        let mut k = Vec::with_capacity(7);
        k.push(k1.clone());
        let mut failed = false;
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    ys += hs * A[s][j] * kj;
                }
            }
            match f(t + C[s] * hs, &ys) {
                Ok(ks) => {
                    if ks.iter().any(|v| !v.is_finite()) {
                        failed = true;
                        k.push(ks);
                        break;
                    }
                    k.push(ks);
                }
                Err(e) => {
                    // evaluation failure inside a trial step: treat like an
                    // error-norm rejection and retry with a smaller step
                    eval_err = Some(e);
                    failed = true;
                    break;
                }
            }
        }
        if failed || k.len() < 7 {
            h *= 0.5;
            rejected = true;
            continue;
        }
        // FSAL: stage 7 uses the b row, so k[6] = f(t + h, y_new)
        let y_new = {
            let mut ys = y.clone();
            for (j, kj) in k.iter().take(6).enumerate() {
                if A[6][j] != 0.0 {
                    ys += hs * A[6][j] * kj;
                }
            }
            ys
        };
        let mut err_vec = DVector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err_vec += hs * E[j] * kj;
            }
        }
        let err = if y_new.iter().all(|v| v.is_finite()) {
            error_norm(&err_vec, &y, &y_new, opts)
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            // accept
            let ydiff = &y_new - &y;
            let bspl = hs * &k[0] - &ydiff;
            let mut r5 = DVector::zeros(y.len());
            for (j, kj) in k.iter().enumerate() {
                if D[j] != 0.0 {
                    r5 += hs * D[j] * kj;
                }
            }
            let rcont4 = &ydiff - hs * &k[6] - &bspl;
            let seg = DenseSegment {
                t0: t,
                h: hs,
                rcont: [y.clone(), ydiff, bspl, rcont4, r5],
            };
            let t_new = t + hs;
            if let Some(dom) = domain {
                if let Some(comp) = first_violation(dom, &y_new) {
                    let time = locate_domain_exit(dom, &seg, t, t_new);
                    return Err(Error::DomainExit { time, component: comp });
                }
            }
            sol.segments.push(seg);
            sol.times.push(t_new);
            sol.states.push(y_new.clone());
            t = t_new;
            y = y_new;
            k1 = k.pop().unwrap();
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, if rejected { 1.0 } else { 10.0 });
            h *= fac;
            rejected = false;
            eval_err = None;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0).min(0.9);
            rejected = true;
        }
    }
    Err(Error::StepBudget { time: t })
}

/// Bisect the dense output for the first time the state leaves the domain.
fn locate_domain_exit(domain: &[Interval], seg: &DenseSegment, t_in: f64, t_out: f64) -> f64 {
    let mut lo = t_in;
    let mut hi = t_out;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if first_violation(domain, &seg.eval(mid)).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn decay(_: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-y)
    }

    #[test]
    fn linear_decay_endpoint() {
        let y0 = DVector::from_vec(vec![1.0]);
        let sol = integrate(decay, (0.0, 1.0), &y0, &SolverOptions::default(), None).unwrap();
        assert_relative_eq!(sol.end_state()[0], (-1.0f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn dense_output_matches_closed_form() {
        let y0 = DVector::from_vec(vec![1.0]);
        let sol = integrate(decay, (0.0, 5.0), &y0, &SolverOptions::default(), None).unwrap();
        for k in 0..100 {
            let t = 5.0 * k as f64 / 99.0;
            assert_relative_eq!(sol.eval(t)[0], (-t).exp(), max_relative = 1e-7);
        }
        // exact agreement on the grid
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert_eq!(sol.eval(*t)[0], y[0]);
        }
    }

    #[test]
    fn backward_integration() {
        let y0 = DVector::from_vec(vec![1.0]);
        let sol = integrate(decay, (1.0, 0.0), &y0, &SolverOptions::default(), None).unwrap();
        assert_relative_eq!(sol.end_state()[0], 1.0f64.exp(), max_relative = 1e-8);
        assert_relative_eq!(sol.eval(0.5)[0], 0.5f64.exp(), max_relative = 1e-7);
    }

    #[test]
    fn oscillator_energy() {
        let f = |_: f64, y: &DVector<f64>| Ok(DVector::from_vec(vec![y[1], -y[0]]));
        let y0 = DVector::from_vec(vec![1.0, 0.0]);
        let sol = integrate(f, (0.0, 20.0), &y0, &SolverOptions::default(), None).unwrap();
        let e = sol.end_state();
        assert_relative_eq!(e[0], 20.0f64.cos(), max_relative = 1e-6);
        assert_relative_eq!(e[1], -20.0f64.sin(), max_relative = 1e-6);
    }

    #[test]
    fn blow_up_reports_last_time() {
        // dy/dt = y^2 from y(0) = 1 blows up at t = 1
        let f = |_: f64, y: &DVector<f64>| Ok(DVector::from_vec(vec![y[0] * y[0]]));
        let y0 = DVector::from_vec(vec![1.0]);
        let err = integrate(f, (0.0, 2.0), &y0, &SolverOptions::default(), None).unwrap_err();
        match err {
            Error::StepUnderflow { time } => assert!((time - 1.0).abs() < 1e-2, "time = {time}"),
            other => panic!("expected step underflow, got {other:?}"),
        }
    }

    #[test]
    fn domain_exit_locates_crossing() {
        // dy/dt = -1 from y(0) = 0.5 leaves the positive orthant at t = 0.5
        let f = |_: f64, _: &DVector<f64>| Ok(DVector::from_vec(vec![-1.0]));
        let y0 = DVector::from_vec(vec![0.5]);
        let dom = [Interval::POSITIVE];
        let err = integrate(f, (0.0, 2.0), &y0, &SolverOptions::default(), Some(&dom)).unwrap_err();
        match err {
            Error::DomainExit { time, component } => {
                assert_eq!(component, 0);
                assert_relative_eq!(time, 0.5, epsilon = 1e-9);
            }
            other => panic!("expected domain exit, got {other:?}"),
        }
    }

    #[test]
    fn tightening_tolerance_reduces_error() {
        let y0 = DVector::from_vec(vec![1.0]);
        let coarse = integrate(
            decay,
            (0.0, 1.0),
            &y0,
            &SolverOptions::with_tolerances(1e-6, 1e-8),
            None,
        )
        .unwrap();
        let fine = integrate(
            decay,
            (0.0, 1.0),
            &y0,
            &SolverOptions::with_tolerances(5e-7, 5e-9),
            None,
        )
        .unwrap();
        let exact = (-1.0f64).exp();
        let e_coarse = (coarse.end_state()[0] - exact).abs();
        let e_fine = (fine.end_state()[0] - exact).abs();
        assert!(e_fine <= e_coarse.max(1e-12));
    }
}
