//! Constant transmissible inputs of a normal form: input values `u_TI` that
//! zero the adaptation error at an equilibrium of the variable part, found by
//! damped multistart Newton and classified through the closed-loop Jacobian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::domain::state_in_domain;
use crate::error::{Error, Result};
use crate::fd;
use crate::normalform::NormalFormSystem;
use crate::sample::{halton_points, Axis};
use crate::signals::InputSignal;
use crate::solver::SolverOptions;

pub const DEFAULT_N_STARTS: usize = 128;

/// Residual threshold every reported root must satisfy.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-10;

/// Margin for calling an eigenvalue real part zero.
pub const STABILITY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stable,
    Unstable,
    Marginal,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::Marginal => "marginal",
        })
    }
}

/// A constant input that zeroes the adaptation error.
///
/// The variable part may have several equilibria sharing the same `u_value`
/// (it can itself be multistable); all of them are kept in `z_equilibria`
/// and `z_star` is the representative: after classification, the equilibrium
/// whose closed loop is most stable.
#[derive(Debug, Clone)]
pub struct TransmissibleInput {
    pub u_value: f64,
    pub z_star: DVector<f64>,
    pub z_equilibria: Vec<DVector<f64>>,
    pub classification: Option<Classification>,
    /// Closed-loop Jacobian spectrum at `(z_star, p_hat = 0)`.
    pub eigenvalues: Vec<Complex<f64>>,
    pub degenerate: bool,
    pub residual: f64,
}

/// Search region for the Newton starts: a box over `(z, u_hat)`.
#[derive(Debug, Clone)]
pub struct SearchBox {
    pub z: Vec<Axis>,
    pub u: Axis,
}

impl SearchBox {
    pub fn new(z: Vec<Axis>, u: Axis) -> Self {
        SearchBox { z, u }
    }

    fn axes(&self) -> Vec<Axis> {
        let mut axes = self.z.clone();
        axes.push(self.u);
        axes
    }

    fn contains(&self, v: &DVector<f64>) -> bool {
        self.axes()
            .iter()
            .enumerate()
            .all(|(i, a)| v[i] >= a.lo && v[i] <= a.hi)
    }
}

fn stacked_residual(nf: &NormalFormSystem, v: &DVector<f64>) -> DVector<f64> {
    let m = nf.dim_z;
    let z = v.rows(0, m).into_owned();
    let u = v[m];
    let mut r = DVector::zeros(m + 1);
    r.rows_mut(0, m).copy_from(&nf.f_z(&z, u));
    r[m] = nf.h_e(&z, u);
    r
}

/// Damped Newton on `(f_z, h_e) = 0`; returns the converged point or None.
fn newton(nf: &NormalFormSystem, start: &DVector<f64>) -> Option<DVector<f64>> {
    let mut v = start.clone();
    let mut r = stacked_residual(nf, &v);
    for _ in 0..100 {
        let rn = r.amax();
        if !rn.is_finite() {
            return None;
        }
        if rn <= 1e-13 {
            return Some(v);
        }
        let jac = fd::jacobian(|w| stacked_residual(nf, w), &v, fd::DEFAULT_STEP);
        let step = jac.lu().solve(&r)?;
        // backtracking line search on the residual norm
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &v - lambda * &step;
            let rt = stacked_residual(nf, &trial);
            if rt.amax().is_finite() && rt.amax() < rn {
                v = trial;
                r = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if r.amax() <= 1e-12 {
        Some(v)
    } else {
        None
    }
}

/// Find all constant transmissible inputs inside the search box.
///
/// Roots are deduplicated twice: coincident `(z, u_hat)` roots are merged at
/// relative distance 1e-6, and roots sharing the same `u_value` are merged
/// into one [`TransmissibleInput`] carrying every `z` equilibrium. The result
/// is sorted by `u_value`; classification is left empty (see
/// [`classify_stability`]).
pub fn find_constant_transmissible(
    nf: &NormalFormSystem,
    search_box: &SearchBox,
    n_starts: usize,
) -> Result<Vec<TransmissibleInput>> {
    if n_starts == 0 {
        return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
    }
    if search_box.z.len() != nf.dim_z {
        return Err(Error::InvalidArgument(format!(
            "search box has {} z axes, normal form has {}",
            search_box.z.len(),
            nf.dim_z
        )));
    }
    let m = nf.dim_z;
    let mut roots: Vec<DVector<f64>> = Vec::new();
    for start in halton_points(n_starts, &search_box.axes()) {
        let Some(v) = newton(nf, &start) else {
            continue;
        };
        if !search_box.contains(&v) || !state_in_domain(&nf.z_domain, &v.rows(0, m).into_owned()) {
            continue;
        }
        if stacked_residual(nf, &v).amax() > ROOT_RESIDUAL_TOL {
            continue;
        }
        let known = roots
            .iter()
            .any(|r| (r - &v).amax() <= 1e-6 * v.amax().max(1.0));
        if !known {
            roots.push(v);
        }
    }

    // group coincident u values: a multistable variable part yields several
    // z equilibria for one transmissible input
    roots.sort_by(|a, b| a[m].partial_cmp(&b[m]).unwrap());
    let mut out: Vec<TransmissibleInput> = Vec::new();
    for v in roots {
        let u = v[m];
        let z = v.rows(0, m).into_owned();
        let residual = stacked_residual(nf, &v).amax();
        let jac = fd::jacobian(|w| stacked_residual(nf, w), &v, fd::DEFAULT_STEP);
        let degenerate = smallest_singular_value(&jac) <= 1e-10 * jac.amax().max(1.0);
        match out
            .iter_mut()
            .find(|ti| (ti.u_value - u).abs() <= 1e-6 * u.abs().max(1.0))
        {
            Some(ti) => {
                ti.z_equilibria.push(z);
                ti.residual = ti.residual.max(residual);
                ti.degenerate = ti.degenerate || degenerate;
            }
            None => out.push(TransmissibleInput {
                u_value: u,
                z_star: z.clone(),
                z_equilibria: vec![z],
                classification: None,
                eigenvalues: Vec::new(),
                degenerate,
                residual,
            }),
        }
    }
    Ok(out)
}

fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, &s| a.min(s))
}

/// Spectrum of the closed-loop Jacobian at `(z, p_hat = 0)` with the external
/// input held at `u`.
pub fn closed_loop_eigenvalues(
    nf: &NormalFormSystem,
    z: &DVector<f64>,
    u: f64,
) -> Vec<Complex<f64>> {
    let m = nf.dim_z;
    let mut w = DVector::zeros(m + 1);
    w.rows_mut(0, m).copy_from(z);
    let jac = fd::jacobian(
        |w: &DVector<f64>| {
            let z = w.rows(0, m).into_owned();
            let u_hat = nf.group.apply(-w[m], u);
            let mut dw = DVector::zeros(m + 1);
            dw.rows_mut(0, m).copy_from(&nf.f_z(&z, u_hat));
            dw[m] = nf.h_e(&z, u_hat);
            dw
        },
        &w,
        fd::DEFAULT_STEP,
    );
    jac.complex_eigenvalues().iter().cloned().collect()
}

fn classify_spectrum(eigs: &[Complex<f64>]) -> Classification {
    let max_re = eigs.iter().fold(f64::NEG_INFINITY, |a, e| a.max(e.re));
    if max_re < -STABILITY_EPS {
        Classification::Stable
    } else if max_re > STABILITY_EPS {
        Classification::Unstable
    } else {
        Classification::Marginal
    }
}

/// Fill in the stability classification of a candidate.
///
/// Every equilibrium in `z_equilibria` is examined; `z_star` becomes the one
/// with the most negative spectral abscissa and the candidate counts as
/// stable when any of its equilibria is.
pub fn classify_stability(nf: &NormalFormSystem, cand: &TransmissibleInput) -> TransmissibleInput {
    let mut best: Option<(f64, DVector<f64>, Vec<Complex<f64>>)> = None;
    let mut any_stable = false;
    let mut any_marginal = false;
    for z in &cand.z_equilibria {
        let eigs = closed_loop_eigenvalues(nf, z, cand.u_value);
        let max_re = eigs.iter().fold(f64::NEG_INFINITY, |a, e| a.max(e.re));
        match classify_spectrum(&eigs) {
            Classification::Stable => any_stable = true,
            Classification::Marginal => any_marginal = true,
            Classification::Unstable => {}
        }
        if best.as_ref().is_none_or(|(re, _, _)| max_re < *re) {
            best = Some((max_re, z.clone(), eigs));
        }
    }
    let (_, z_star, eigenvalues) = best.expect("candidate without equilibria");
    let classification = if any_stable {
        Classification::Stable
    } else if any_marginal {
        Classification::Marginal
    } else {
        Classification::Unstable
    };
    TransmissibleInput {
        z_star,
        eigenvalues,
        classification: Some(classification),
        ..cand.clone()
    }
}

/// [`find_constant_transmissible`] followed by [`classify_stability`].
pub fn find_and_classify(
    nf: &NormalFormSystem,
    search_box: &SearchBox,
    n_starts: usize,
) -> Result<Vec<TransmissibleInput>> {
    Ok(find_constant_transmissible(nf, search_box, n_starts)?
        .iter()
        .map(|c| classify_stability(nf, c))
        .collect())
}

/// Sampled evidence for the basin of a transmissible input: the fraction of
/// quasi-random initial conditions in `region` (a box over `(z, p_hat)`)
/// that converge to `(z_star, 0)` under the constant input within `horizon`.
pub fn basin_sample(
    nf: &NormalFormSystem,
    ti: &TransmissibleInput,
    region: &[Axis],
    n_samples: usize,
    horizon: f64,
    tol: f64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "basin fraction is undefined for zero samples".into(),
        ));
    }
    if region.len() != nf.dim_z + 1 {
        return Err(Error::InvalidArgument(format!(
            "region has {} axes, expected {} for (z, p_hat)",
            region.len(),
            nf.dim_z + 1
        )));
    }
    let m = nf.dim_z;
    let u = InputSignal::constant(ti.u_value);
    let opts = SolverOptions::default();
    let mut converged = 0usize;
    for pt in halton_points(n_samples, region) {
        let z0 = pt.rows(0, m).into_owned();
        let p0 = pt[m];
        // failed runs (domain exit, step underflow) count as non-converged
        let Ok(traj) = crate::normalform::simulate_normal_form(nf, &z0, p0, &u, (0.0, horizon), &opts)
        else {
            continue;
        };
        let end = traj.end_state();
        let z_err = (end.rows(0, m) - &ti.z_star).amax();
        if end[m].abs() <= tol && z_err <= tol {
            converged += 1;
        }
    }
    Ok(converged as f64 / n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Interval;
    use crate::groups::TransformationGroup;
    use approx::assert_relative_eq;

    // dz/dt = u_hat/(1 + u_hat) - z, e = -1 + 4 u_hat (up to scale):
    // a one-dimensional variable part with the single root u = 1/4
    fn toy_nf() -> NormalFormSystem {
        NormalFormSystem::new(
            "toy",
            TransformationGroup::scaling(),
            1,
            vec![Interval::REAL],
            |z, u| DVector::from_vec(vec![u / (1.0 + u) - z[0]]),
            |_, u| -1.0 + 4.0 * u,
            |z| z[0],
        )
    }

    #[test]
    fn single_root_is_found_and_stable() {
        let nf = toy_nf();
        let sb = SearchBox::new(vec![Axis::linear(0.0, 2.0)], Axis::log(0.01, 10.0));
        let roots = find_and_classify(&nf, &sb, 64).unwrap();
        assert_eq!(roots.len(), 1);
        let ti = &roots[0];
        assert_relative_eq!(ti.u_value, 0.25, epsilon = 1e-10);
        assert_relative_eq!(ti.z_star[0], 0.2, epsilon = 1e-10);
        assert!(ti.residual <= ROOT_RESIDUAL_TOL);
        assert_eq!(ti.classification, Some(Classification::Stable));
        assert!(!ti.degenerate);
    }

    #[test]
    fn sign_flip_makes_it_unstable() {
        // reversing the error direction flips the feedback sign
        let nf = NormalFormSystem::new(
            "toy flipped",
            TransformationGroup::scaling(),
            1,
            vec![Interval::REAL],
            |z, u| DVector::from_vec(vec![u / (1.0 + u) - z[0]]),
            |_, u| 1.0 - 4.0 * u,
            |z| z[0],
        );
        let sb = SearchBox::new(vec![Axis::linear(0.0, 2.0)], Axis::log(0.01, 10.0));
        let roots = find_and_classify(&nf, &sb, 64).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].classification, Some(Classification::Unstable));
    }

    #[test]
    fn no_roots_is_empty_not_an_error() {
        let nf = NormalFormSystem::new(
            "rootless",
            TransformationGroup::scaling(),
            1,
            vec![Interval::REAL],
            |z, _| DVector::from_vec(vec![-z[0]]),
            |_, u| 1.0 + u * u,
            |z| z[0],
        );
        let sb = SearchBox::new(vec![Axis::linear(-1.0, 1.0)], Axis::linear(-2.0, 2.0));
        assert!(find_constant_transmissible(&nf, &sb, 32).unwrap().is_empty());
    }

    #[test]
    fn zero_starts_is_rejected() {
        let nf = toy_nf();
        let sb = SearchBox::new(vec![Axis::linear(0.0, 2.0)], Axis::log(0.01, 10.0));
        assert!(find_constant_transmissible(&nf, &sb, 0).is_err());
    }

    #[test]
    fn basin_fraction_of_stable_toy_is_one() {
        let nf = toy_nf();
        let sb = SearchBox::new(vec![Axis::linear(0.0, 2.0)], Axis::log(0.01, 10.0));
        let ti = &find_and_classify(&nf, &sb, 64).unwrap()[0];
        let region = [Axis::linear(0.05, 1.0), Axis::linear(-1.0, 1.0)];
        let frac = basin_sample(&nf, ti, &region, 16, 40.0, 1e-4).unwrap();
        assert_eq!(frac, 1.0);
    }

    #[test]
    fn empty_basin_region_is_an_error() {
        let nf = toy_nf();
        let sb = SearchBox::new(vec![Axis::linear(0.0, 2.0)], Axis::log(0.01, 10.0));
        let ti = &find_and_classify(&nf, &sb, 64).unwrap()[0];
        let region = [Axis::linear(0.05, 1.0), Axis::linear(-1.0, 1.0)];
        assert!(basin_sample(&nf, ti, &region, 0, 10.0, 1e-4).is_err());
    }
}
