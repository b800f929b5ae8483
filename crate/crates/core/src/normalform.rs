//! The normal form of input-invariant systems: a universal integral-feedback
//! part (`p_hat`, `u_hat = pi_{-p_hat}(u)`) wired to a system-specific
//! variable part (`f_z`, `h_e`, `h_z`), plus the coordinate machinery to move
//! between a system's original coordinates and this form.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::domain::Interval;
use crate::dynamics::{piecewise_integrate, DynamicalSystem, Trajectory};
use crate::error::{Error, Result};
use crate::fd;
use crate::groups::{StateTransformationFamily, TransformationGroup};
use crate::sample::{random_points, Axis};
use crate::signals::InputSignal;
use crate::solver::SolverOptions;

pub type VariableField = Arc<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync>;
pub type ErrorMap = Arc<dyn Fn(&DVector<f64>, f64) -> f64 + Send + Sync>;
pub type ZOutputMap = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type ZScalarMap = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type ZGradientMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// The variable part of the normal form together with its input group.
///
/// The induced flat system has state `(z, p_hat)` of dimension `dim_z + 1`
/// and dynamics `dp_hat/dt = e = h_e(z, u_hat)`, `dz/dt = f_z(z, u_hat)`
/// with `u_hat = pi_{-p_hat}(u)`. By construction the variable part depends
/// on the input only through `u_hat`.
#[derive(Clone)]
pub struct NormalFormSystem {
    pub group: TransformationGroup,
    pub dim_z: usize,
    f_z: VariableField,
    h_e: ErrorMap,
    h_z: ZOutputMap,
    pub z_domain: Vec<Interval>,
    pub label: String,
}

impl NormalFormSystem {
    pub fn new(
        label: impl Into<String>,
        group: TransformationGroup,
        dim_z: usize,
        z_domain: Vec<Interval>,
        f_z: impl Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
        h_e: impl Fn(&DVector<f64>, f64) -> f64 + Send + Sync + 'static,
        h_z: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(z_domain.len(), dim_z);
        NormalFormSystem {
            group,
            dim_z,
            f_z: Arc::new(f_z),
            h_e: Arc::new(h_e),
            h_z: Arc::new(h_z),
            z_domain,
            label: label.into(),
        }
    }

    pub fn f_z(&self, z: &DVector<f64>, u_hat: f64) -> DVector<f64> {
        (self.f_z)(z, u_hat)
    }

    pub fn h_e(&self, z: &DVector<f64>, u_hat: f64) -> f64 {
        (self.h_e)(z, u_hat)
    }

    pub fn h_z(&self, z: &DVector<f64>) -> f64 {
        (self.h_z)(z)
    }
}

impl std::fmt::Debug for NormalFormSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormalFormSystem")
            .field("label", &self.label)
            .field("dim_z", &self.dim_z)
            .field("group", &self.group.label)
            .finish()
    }
}

/// Integrate the normal form from `(z0, p_hat0)` and record the channels
/// `y`, `uhat`, `e` and `phat`.
pub fn simulate_normal_form(
    nf: &NormalFormSystem,
    z0: &DVector<f64>,
    p_hat0: f64,
    u: &InputSignal,
    t_span: (f64, f64),
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if z0.len() != nf.dim_z {
        return Err(Error::InvalidArgument(format!(
            "z0 has dimension {}, normal form has {}",
            z0.len(),
            nf.dim_z
        )));
    }
    let m = nf.dim_z;
    let mut w0 = DVector::zeros(m + 1);
    w0.rows_mut(0, m).copy_from(z0);
    w0[m] = p_hat0;
    let mut domain = nf.z_domain.clone();
    domain.push(Interval::REAL);

    let rhs = |t: f64, w: &DVector<f64>| -> Result<DVector<f64>> {
        let z = w.rows(0, m).into_owned();
        let u_hat = nf.group.apply_checked(-w[m], u.eval(t)?)?;
        let mut dw = DVector::zeros(m + 1);
        dw.rows_mut(0, m).copy_from(&nf.f_z(&z, u_hat));
        dw[m] = nf.h_e(&z, u_hat);
        Ok(dw)
    };
    let solution = piecewise_integrate(rhs, u, t_span, &w0, opts, Some(&domain))?;

    let mut y = Vec::with_capacity(solution.times.len());
    let mut uhat = Vec::with_capacity(solution.times.len());
    let mut e = Vec::with_capacity(solution.times.len());
    let mut phat = Vec::with_capacity(solution.times.len());
    for (t, w) in solution.times.iter().zip(&solution.states) {
        let z = w.rows(0, m).into_owned();
        let uh = nf.group.apply(-w[m], u.eval(*t)?);
        y.push(nf.h_z(&z));
        uhat.push(uh);
        e.push(nf.h_e(&z, uh));
        phat.push(w[m]);
    }
    Ok(Trajectory::new(
        solution,
        vec![
            ("y".into(), y),
            ("uhat".into(), uhat),
            ("e".into(), e),
            ("phat".into(), phat),
        ],
    ))
}

/// The normal form as a plain dynamical system over `(z, p_hat)`, together
/// with the canonical equivariance witness `rho_p(z, p_hat) = (z, p_hat + p)`.
pub fn as_flat_system(nf: &NormalFormSystem) -> (DynamicalSystem, StateTransformationFamily) {
    let m = nf.dim_z;
    let nf_f = nf.clone();
    let nf_h = nf.clone();
    let mut domain = nf.z_domain.clone();
    domain.push(Interval::REAL);
    let system = DynamicalSystem::new(
        format!("{} (flat)", nf.label),
        m + 1,
        domain,
        move |w, u| {
            let z = w.rows(0, m).into_owned();
            let u_hat = nf_f.group.apply(-w[m], u);
            let mut dw = DVector::zeros(m + 1);
            dw.rows_mut(0, m).copy_from(&nf_f.f_z(&z, u_hat));
            dw[m] = nf_f.h_e(&z, u_hat);
            dw
        },
        move |w| nf_h.h_z(&w.rows(0, m).into_owned()),
    );
    (system, StateTransformationFamily::shift_last(m + 1))
}

/// A candidate transformation `x -> (z, p_hat)` with its inverse and an
/// optional analytic Jacobian of the forward map.
#[derive(Clone)]
pub struct CoordinateChange {
    pub forward: Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    pub inverse: Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    pub jacobian: Option<Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>>,
}

impl CoordinateChange {
    pub fn new(
        forward: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        inverse: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        CoordinateChange {
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
            jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    pub fn jacobian_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(x),
            None => fd::jacobian(self.forward.as_ref(), x, fd::DEFAULT_STEP),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoordinateChangeOptions {
    /// Sample count for the round-trip and structure checks.
    pub n_samples: usize,
    pub seed: u64,
    /// Box for the `z` coordinates during the checks.
    pub z_box: Vec<Axis>,
    pub p_range: (f64, f64),
    pub u_box: Axis,
    pub roundtrip_tol: f64,
    pub structure_tol: f64,
    /// Domain of the produced variable part.
    pub z_domain: Vec<Interval>,
}

impl CoordinateChangeOptions {
    pub fn new(z_box: Vec<Axis>, u_box: Axis, z_domain: Vec<Interval>) -> Self {
        CoordinateChangeOptions {
            n_samples: 200,
            seed: 0,
            z_box,
            p_range: (-2.0, 2.0),
            u_box,
            roundtrip_tol: 1e-8,
            structure_tol: 1e-6,
            z_domain,
        }
    }
}

/// Push the system through a candidate coordinate change and verify that the
/// result actually is a normal form.
///
/// The transformed vector field is
/// `f*(z, p_hat, u) = (d delta/dx)(delta_inv(z, p_hat)) f(delta_inv(z, p_hat), u)`.
/// A valid candidate must satisfy the structure identity
/// `f*(z, p_hat, u) = f*(z, 0, pi_{-p_hat}(u))` — checked on random samples;
/// a violation rejects the candidate with [`Error::StructureCheck`].
pub fn apply_coordinate_change(
    system: &DynamicalSystem,
    group: &TransformationGroup,
    change: &CoordinateChange,
    opts: &CoordinateChangeOptions,
) -> Result<NormalFormSystem> {
    let n = system.dim;
    let m = n - 1;
    assert_eq!(opts.z_box.len(), m);
    let mut axes = opts.z_box.clone();
    axes.push(Axis::linear(opts.p_range.0, opts.p_range.1));
    axes.push(opts.u_box);
    let samples = random_points(opts.n_samples, &axes, opts.seed);

    let f_star = {
        let sys = system.clone();
        let change = change.clone();
        move |w: &DVector<f64>, u: f64| -> DVector<f64> {
            let x = (change.inverse)(w);
            change.jacobian_at(&x) * sys.f(&x, u)
        }
    };

    // round trip: delta(delta_inv(w)) must be the identity on the samples
    for (i, pt) in samples.iter().enumerate() {
        let w = pt.rows(0, n).into_owned();
        let back = (change.forward)(&(change.inverse)(&w));
        let residual = (&back - &w).amax();
        if !(residual <= opts.roundtrip_tol) {
            return Err(Error::RoundTrip { residual, index: i });
        }
    }

    // structure check: f* may depend on (p_hat, u) only through pi_{-p_hat}(u)
    for (i, pt) in samples.iter().enumerate() {
        let w = pt.rows(0, n).into_owned();
        let u = pt[n];
        let lhs = f_star(&w, u);
        let mut w0 = w.clone();
        w0[m] = 0.0;
        let rhs = f_star(&w0, group.apply(-w[m], u));
        let scale = rhs.amax().max(1.0);
        let residual = (&lhs - &rhs).amax() / scale;
        if !(residual <= opts.structure_tol) {
            return Err(Error::StructureCheck { residual, index: i });
        }
    }

    let f_star = Arc::new(f_star);
    let f_star_h = f_star.clone();
    let inv = change.inverse.clone();
    let h = system.output_map();
    Ok(NormalFormSystem::new(
        format!("{} (normal form)", system.label),
        group.clone(),
        m,
        opts.z_domain.clone(),
        move |z, u_hat| {
            let mut w = DVector::zeros(m + 1);
            w.rows_mut(0, m).copy_from(z);
            f_star(&w, u_hat).rows(0, m).into_owned()
        },
        move |z, u_hat| {
            let mut w = DVector::zeros(m + 1);
            w.rows_mut(0, m).copy_from(z);
            f_star_h(&w, u_hat)[m]
        },
        move |z| {
            let mut w = DVector::zeros(m + 1);
            w.rows_mut(0, m).copy_from(z);
            h(&inv(&w))
        },
    ))
}

/// Reparametrize `p_hat` by an analytic gauge function `tau_p(z)`
/// (`tau_z` is fixed to the identity). Produces an equivalent normal form
/// with, in general, a different set of transmissible inputs.
pub fn gauge_transform(
    nf: &NormalFormSystem,
    tau_p: ZScalarMap,
    grad_tau_p: Option<ZGradientMap>,
) -> NormalFormSystem {
    let grad: ZGradientMap = match grad_tau_p {
        Some(g) => g,
        None => {
            let tau = tau_p.clone();
            Arc::new(move |z: &DVector<f64>| fd::gradient(tau.as_ref(), z, fd::DEFAULT_STEP))
        }
    };
    let nf_f = nf.clone();
    let nf_e = nf.clone();
    let nf_y = nf.clone();
    let tau_f = tau_p.clone();
    let tau_e = tau_p;
    NormalFormSystem::new(
        format!("{} (gauged)", nf.label),
        nf.group.clone(),
        nf.dim_z,
        nf.z_domain.clone(),
        move |z, u_tilde| {
            let u = nf_f.group.apply(tau_f(z), u_tilde);
            nf_f.f_z(z, u)
        },
        move |z, u_tilde| {
            let u = nf_e.group.apply(tau_e(z), u_tilde);
            nf_e.h_e(z, u) + grad(z).dot(&nf_e.f_z(z, u))
        },
        move |z| nf_y.h_z(z),
    )
}

/// A cross-section for rectifying a group action: the level set
/// `Sigma = {x : anchor(x) = 0}` with a chart for the remaining coordinates.
#[derive(Clone)]
pub struct CrossSection {
    pub anchor: Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    pub chart: Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
}

impl CrossSection {
    pub fn new(
        anchor: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        chart: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        CrossSection {
            anchor: Arc::new(anchor),
            chart: Arc::new(chart),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RectifyOptions {
    /// Scanned range of the orbit flow parameter.
    pub s_range: (f64, f64),
    pub rtol: f64,
    pub atol: f64,
}

impl Default for RectifyOptions {
    fn default() -> Self {
        RectifyOptions {
            s_range: (-50.0, 50.0),
            rtol: 1e-12,
            atol: 1e-14,
        }
    }
}

/// Numerically construct canonical coordinates at `x`: flow the orbit ODE
/// `dx/ds = eta(x)` until it hits the cross-section, and return
/// `(z, p_hat) = (chart(foot point), -s*)`.
///
/// The orbit must cross the section exactly once inside the scanned range;
/// zero crossings give [`Error::OrbitEscape`], several give
/// [`Error::AmbiguousCrossing`].
pub fn rectify_group_action(
    family: &StateTransformationFamily,
    section: &CrossSection,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    rectify_group_action_with(family, section, x, &RectifyOptions::default())
}

pub fn rectify_group_action_with(
    family: &StateTransformationFamily,
    section: &CrossSection,
    x: &DVector<f64>,
    opts: &RectifyOptions,
) -> Result<(DVector<f64>, f64)> {
    let solver_opts = SolverOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        ..Default::default()
    };
    let rhs = |_: f64, y: &DVector<f64>| -> Result<DVector<f64>> { Ok(family.infinitesimal(y)) };

    // crossings as (s, foot point)
    let mut crossings: Vec<(f64, DVector<f64>)> = Vec::new();
    if (section.anchor)(x).abs() == 0.0 {
        crossings.push((0.0, x.clone()));
    }
    for end in [opts.s_range.1, opts.s_range.0] {
        let sol = crate::solver::integrate(rhs, (0.0, end), x, &solver_opts, None)?;
        let g_vals: Vec<f64> = sol.states.iter().map(|y| (section.anchor)(y)).collect();
        for i in 1..g_vals.len() {
            let (ga, gb) = (g_vals[i - 1], g_vals[i]);
            if ga == 0.0 && sol.times[i - 1] != 0.0 {
                crossings.push((sol.times[i - 1], sol.states[i - 1].clone()));
            }
            if ga * gb < 0.0 {
                // bisect the dense output for the event
                let mut lo = sol.times[i - 1];
                let mut hi = sol.times[i];
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid == lo || mid == hi {
                        break;
                    }
                    let gm = (section.anchor)(&sol.eval(mid));
                    if gm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (gm > 0.0) == (ga > 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if (hi - lo).abs() <= 1e-13 * lo.abs().max(1.0) {
                        break;
                    }
                }
                let s = 0.5 * (lo + hi);
                crossings.push((s, sol.eval(s)));
            }
        }
        // the last grid value may be exactly zero
        if let Some(&g_last) = g_vals.last() {
            if g_last == 0.0 && *sol.times.last().unwrap() != 0.0 {
                crossings.push((sol.end_time(), sol.end_state().clone()));
            }
        }
    }

    // both scans include s = 0; deduplicate near-identical crossing parameters
    crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    crossings.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-9 * a.0.abs().max(1.0));

    match crossings.len() {
        0 => Err(Error::OrbitEscape {
            lo: opts.s_range.0,
            hi: opts.s_range.1,
        }),
        1 => {
            let (s_star, foot) = crossings.pop().unwrap();
            Ok(((section.chart)(&foot), -s_star))
        }
        count => Err(Error::AmbiguousCrossing { count }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scaling_family_2d() -> StateTransformationFamily {
        StateTransformationFamily::scaling_mask(2, &[true, false])
    }

    #[test]
    fn rectify_scaling_family() {
        // orbit through (2, 3) hits {x = 1} at s = -log 2
        let fam = scaling_family_2d();
        let section = CrossSection::new(|x| x[0] - 1.0, |x| DVector::from_vec(vec![x[1]]));
        let (z, p_hat) =
            rectify_group_action(&fam, &section, &DVector::from_vec(vec![2.0, 3.0])).unwrap();
        assert_relative_eq!(p_hat, 2.0f64.ln(), epsilon = 1e-9);
        assert_relative_eq!(z[0], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn rectify_translation_family() {
        // rho_p(x) = x + p with Sigma = {x = 0}: p_hat = x
        let fam = StateTransformationFamily::new(1, |p, x| DVector::from_vec(vec![x[0] + p]))
            .with_generator(|x| DVector::from_vec(vec![1.0 + 0.0 * x[0]]));
        let section = CrossSection::new(|x| x[0], |_| DVector::zeros(0));
        for x0 in [-3.0, 0.7, 12.0] {
            let (_, p_hat) =
                rectify_group_action(&fam, &section, &DVector::from_vec(vec![x0])).unwrap();
            assert_relative_eq!(p_hat, x0, epsilon = 1e-9);
        }
    }

    #[test]
    fn rectify_bistable_family() {
        // orbit (e^s 2, e^s 4, 1) hits {x2 = 1} at s = -log 4
        let fam = StateTransformationFamily::scaling_mask(3, &[true, true, false]);
        let section = CrossSection::new(
            |x| x[1] - 1.0,
            |x| DVector::from_vec(vec![x[0] / x[1], x[2]]),
        );
        let (z, p_hat) =
            rectify_group_action(&fam, &section, &DVector::from_vec(vec![2.0, 4.0, 1.0])).unwrap();
        assert_relative_eq!(p_hat, 4.0f64.ln(), epsilon = 1e-9);
        assert_relative_eq!(z[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(z[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn orbit_escape_is_reported() {
        let fam = scaling_family_2d();
        // anchor is always positive: no crossing exists
        let section = CrossSection::new(|x| x[0] * x[0] + 1.0, |x| DVector::from_vec(vec![x[1]]));
        assert!(matches!(
            rectify_group_action(&fam, &section, &DVector::from_vec(vec![2.0, 3.0])),
            Err(Error::OrbitEscape { .. })
        ));
    }

    #[test]
    fn ambiguous_crossing_is_reported() {
        // translation orbit crosses {x^2 = 1} at both x = -1 and x = 1
        let fam = StateTransformationFamily::new(1, |p, x| DVector::from_vec(vec![x[0] + p]))
            .with_generator(|x| DVector::from_vec(vec![1.0 + 0.0 * x[0]]));
        let section = CrossSection::new(|x| x[0] * x[0] - 1.0, |_| DVector::zeros(0));
        assert!(matches!(
            rectify_group_action(&fam, &section, &DVector::from_vec(vec![0.2])),
            Err(Error::AmbiguousCrossing { count: 2 })
        ));
    }
}
