//! Numerical verification of equivariance, black-box I/O invariance and the
//! first-order PDE conditions on normal-form coordinates.

use nalgebra::{DMatrix, DVector};

use crate::domain::first_violation;
use crate::dynamics::{simulate, DynamicalSystem};
use crate::error::{Error, Result};
use crate::fd;
use crate::groups::{StateTransformationFamily, TransformationGroup};
use crate::sample::{random_points, Axis};
use crate::signals::{transform_signal, InputSignal};
use crate::solver::SolverOptions;

/// Raw residuals of the equivariance identities at one point:
/// `r_f = f(rho_p(x), pi_p(u)) - (d rho_p/dx)(x) f(x, u)` and
/// `r_h = h(rho_p(x)) - h(x)`.
#[derive(Debug, Clone)]
pub struct EquivarianceResidual {
    pub r_f: DVector<f64>,
    pub r_h: f64,
    /// `max(1, |f(x,u)|_inf)`, the normalization used for verdicts.
    pub f_scale: f64,
}

impl EquivarianceResidual {
    /// Largest residual after normalizing `r_f` by the vector-field magnitude.
    pub fn max_normalized(&self) -> f64 {
        (self.r_f.amax() / self.f_scale).max(self.r_h.abs())
    }
}

pub fn equivariance_residual(
    system: &DynamicalSystem,
    group: &TransformationGroup,
    family: &StateTransformationFamily,
    x: &DVector<f64>,
    u: f64,
    p: f64,
) -> Result<EquivarianceResidual> {
    let rho_x = family.apply(p, x);
    if let Some(c) = first_violation(&system.state_domain, &rho_x) {
        return Err(Error::DomainValue {
            value: rho_x[c],
            domain: system.state_domain[c],
        });
    }
    let fx = system.f(x, u);
    let lhs = system.f(&rho_x, group.apply(p, u));
    let rhs = family.jacobian(p, x) * &fx;
    let r_h = system.output(&rho_x) - system.output(x);
    Ok(EquivarianceResidual {
        r_f: lhs - rhs,
        r_h,
        f_scale: fx.amax().max(1.0),
    })
}

/// One sampled point of a residual sweep, exportable as a CSV row.
#[derive(Debug, Clone)]
pub struct ResidualSample {
    pub x: DVector<f64>,
    pub u: f64,
    pub p: f64,
    pub r_f: f64,
    pub r_h: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub samples: Vec<ResidualSample>,
    pub max_residual: f64,
    pub worst: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub n: usize,
    pub seed: u64,
    pub x_axes: Vec<Axis>,
    pub u_axis: Axis,
    pub p_axis: Axis,
}

impl SweepOptions {
    pub fn new(x_axes: Vec<Axis>, u_axis: Axis) -> Self {
        SweepOptions {
            n: 100,
            seed: 0,
            x_axes,
            u_axis,
            p_axis: Axis::linear(-2.0, 2.0),
        }
    }
}

/// Max normalized residual over a sample of `(x, u, p)` points.
pub fn equivariance_sweep(
    system: &DynamicalSystem,
    group: &TransformationGroup,
    family: &StateTransformationFamily,
    opts: &SweepOptions,
) -> Result<SweepReport> {
    if opts.n == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one sample".into()));
    }
    let mut axes = opts.x_axes.clone();
    axes.push(opts.u_axis);
    axes.push(opts.p_axis);
    let points = random_points(opts.n, &axes, opts.seed);
    let n = system.dim;
    let mut samples = Vec::with_capacity(opts.n);
    let mut max_residual = 0.0;
    let mut worst = 0;
    for pt in points {
        let x = DVector::from_iterator(n, (0..n).map(|i| pt[i]));
        let u = pt[n];
        let p = pt[n + 1];
        let r = equivariance_residual(system, group, family, &x, u, p)?;
        let m = r.max_normalized();
        if m > max_residual {
            max_residual = m;
            worst = samples.len();
        }
        samples.push(ResidualSample {
            x,
            u,
            p,
            r_f: r.r_f.amax() / r.f_scale,
            r_h: r.r_h.abs(),
        });
    }
    Ok(SweepReport {
        samples,
        max_residual,
        worst,
    })
}

/// Compare the outputs of `(x0, u)` and `(rho_p(x0), pi_p(u))` on a shared
/// grid of at least 200 points and return the max absolute deviation.
///
/// This tests the sufficient witness `x0' = rho_p(x0)`, not existence of an
/// adjusted initial condition in general. Only outputs are compared.
pub fn invariance_io_test(
    system: &DynamicalSystem,
    group: &TransformationGroup,
    family: &StateTransformationFamily,
    x0: &DVector<f64>,
    u: &InputSignal,
    p: f64,
    t_span: (f64, f64),
    opts: &SolverOptions,
) -> Result<f64> {
    let x0p = family.apply(p, x0);
    let up = transform_signal(group, p, u);
    let a = simulate(system, x0, u, t_span, opts)?;
    let b = simulate(system, &x0p, &up, t_span, opts)?;
    let n_grid = 200;
    let mut max_dev: f64 = 0.0;
    for k in 0..=n_grid {
        let t = t_span.0 + (t_span.1 - t_span.0) * k as f64 / n_grid as f64;
        let ya = system.output(&a.state_at(t));
        let yb = system.output(&b.state_at(t));
        max_dev = max_dev.max((ya - yb).abs());
    }
    Ok(max_dev)
}

/// Residuals of the normal-form PDE conditions at `x`:
/// `E_rho delta_z = 0` (componentwise) and `E_rho delta_p = 1`, with
/// `E_rho g = sum_i eta_i(x) dg/dx_i` the infinitesimal generator.
pub fn pde_residuals(
    family: &StateTransformationFamily,
    delta_z: impl Fn(&DVector<f64>) -> DVector<f64>,
    delta_p: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
) -> (DVector<f64>, f64) {
    pde_residuals_with_step(family, delta_z, delta_p, x, fd::DEFAULT_STEP)
}

pub fn pde_residuals_with_step(
    family: &StateTransformationFamily,
    delta_z: impl Fn(&DVector<f64>) -> DVector<f64>,
    delta_p: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    h_rel: f64,
) -> (DVector<f64>, f64) {
    let eta = family.infinitesimal(x);
    let jz = fd::jacobian(&delta_z, x, h_rel);
    let gp = fd::gradient(&delta_p, x, h_rel);
    (jz * &eta, gp.dot(&eta) - 1.0)
}

/// Smallest singular value of the row-scaled Jacobian of `(delta_z, delta_p)`
/// at `x`. Values above ~1e-8 indicate functional independence.
pub fn functional_independence(
    delta_z: impl Fn(&DVector<f64>) -> DVector<f64>,
    delta_p: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
) -> f64 {
    let jz = fd::jacobian(&delta_z, x, fd::DEFAULT_STEP);
    let gp = fd::gradient(&delta_p, x, fd::DEFAULT_STEP);
    let n = x.len();
    let m = jz.nrows();
    let mut j = DMatrix::zeros(m + 1, n);
    j.view_mut((0, 0), (m, n)).copy_from(&jz);
    j.view_mut((m, 0), (1, n)).copy_from(&gp.transpose());
    for mut row in j.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    j.singular_values().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Interval;
    use approx::assert_relative_eq;

    /// Scale-invariant feed-forward system in original coordinates.
    fn feedforward() -> DynamicalSystem {
        let (a, b, c, d) = (1.0, 4.0, 10.0, 4.0);
        DynamicalSystem::new(
            "feed-forward",
            2,
            vec![Interval::POSITIVE, Interval::REAL],
            move |x, u| {
                DVector::from_vec(vec![
                    -a * x[0] + b * u,
                    c * u / (x[0] + u) - d * x[1],
                ])
            },
            |x| x[1],
        )
    }

    fn ff_family() -> StateTransformationFamily {
        StateTransformationFamily::scaling_mask(2, &[true, false])
    }

    #[test]
    fn feedforward_is_equivariant() {
        let sys = feedforward();
        let g = TransformationGroup::scaling();
        let fam = ff_family();
        let opts = SweepOptions::new(
            vec![Axis::log(0.1, 10.0), Axis::linear(0.1, 3.0)],
            Axis::log(0.05, 5.0),
        );
        let report = equivariance_sweep(&sys, &g, &fam, &opts).unwrap();
        assert!(report.max_residual <= 1e-8, "max = {}", report.max_residual);
    }

    #[test]
    fn identity_parameter_gives_zero_residual() {
        let sys = feedforward();
        let g = TransformationGroup::scaling();
        let fam = ff_family();
        let x = DVector::from_vec(vec![1.7, 0.4]);
        let r = equivariance_residual(&sys, &g, &fam, &x, 0.8, 0.0).unwrap();
        assert!(r.max_normalized() <= 1e-10);
    }

    #[test]
    fn quadratic_input_term_breaks_equivariance() {
        // dx/dt = -a x + b u^2 under the same rho: the first residual
        // component is b u^2 (e^{2p} - e^p)
        let (a, b, c, d) = (1.0, 4.0, 10.0, 4.0);
        let sys = DynamicalSystem::new(
            "broken feed-forward",
            2,
            vec![Interval::POSITIVE, Interval::REAL],
            move |x, u| {
                DVector::from_vec(vec![
                    -a * x[0] + b * u * u,
                    c * u / (x[0] + u) - d * x[1],
                ])
            },
            |x| x[1],
        );
        let g = TransformationGroup::scaling();
        let fam = ff_family();
        let x = DVector::from_vec(vec![2.0, 0.5]);
        let (u, p) = (0.7, 0.9);
        let r = equivariance_residual(&sys, &g, &fam, &x, u, p).unwrap();
        let expected = b * u * u * ((2.0 * p).exp() - p.exp());
        assert_relative_eq!(r.r_f[0], expected, max_relative = 1e-10);
        assert!(r.max_normalized() > 1e-3);
    }

    #[test]
    fn state_leaving_domain_is_reported() {
        let sys = feedforward();
        let g = TransformationGroup::scaling();
        // a family that drags x negative for p > 0
        let fam = StateTransformationFamily::new(2, |p, x| {
            DVector::from_vec(vec![x[0] - 10.0 * p, x[1]])
        });
        let x = DVector::from_vec(vec![1.0, 0.5]);
        assert!(matches!(
            equivariance_residual(&sys, &g, &fam, &x, 1.0, 1.0),
            Err(Error::DomainValue { .. })
        ));
    }

    #[test]
    fn feedforward_pde_conditions() {
        // delta_z = y, delta_p = log x; at (2, 3): E delta_p = 2 * (1/2) = 1
        let fam = ff_family();
        let x = DVector::from_vec(vec![2.0, 3.0]);
        let (rz, rp) = pde_residuals(
            &fam,
            |x| DVector::from_vec(vec![x[1]]),
            |x| x[0].ln(),
            &x,
        );
        assert!(rz.amax() <= 1e-9);
        assert!(rp.abs() <= 1e-9);
    }

    #[test]
    fn wrong_candidate_fails_pde() {
        // delta_p = x at (2, 3): E delta_p = x * 1 = 2, residual 1
        let fam = ff_family();
        let x = DVector::from_vec(vec![2.0, 3.0]);
        let (_, rp) = pde_residuals(
            &fam,
            |x| DVector::from_vec(vec![x[1]]),
            |x| x[0],
            &x,
        );
        assert_relative_eq!(rp, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn analytic_coordinates_are_independent() {
        let x = DVector::from_vec(vec![2.0, 3.0]);
        let sv = functional_independence(
            |x| DVector::from_vec(vec![x[1]]),
            |x| x[0].ln(),
            &x,
        );
        assert!(sv > 1e-8, "smallest singular value {sv}");
    }
}
