//! One-parameter Lie groups of input transformations and families of state
//! transformations, with numerically computed infinitesimals.
//!
//! All groups are required to be parametrized additively: `apply(0, .)` is the
//! identity and `apply(p2, apply(p1, .)) = apply(p1 + p2, .)`.
//! [`verify_group_axioms`] is the gatekeeper for user-supplied groups; no
//! automatic reparametrization is attempted.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::domain::Interval;
use crate::error::{Error, Result};
use crate::fd;

pub type ScalarMap = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type StateMap = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type StateJacobianMap = Arc<dyn Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type GeneratorMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// An additively parametrized one-parameter group `{pi_p}` acting on input
/// values.
#[derive(Clone)]
pub struct TransformationGroup {
    apply: ScalarMap,
    pub domain: Interval,
    pub label: String,
}

impl TransformationGroup {
    pub fn new(
        label: impl Into<String>,
        domain: Interval,
        apply: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TransformationGroup {
            apply: Arc::new(apply),
            domain,
            label: label.into(),
        }
    }

    /// Scaling `pi_p(u) = e^p u` on the positive reals.
    pub fn scaling() -> Self {
        Self::new("scaling", Interval::POSITIVE, |p, u| p.exp() * u)
    }

    /// Translation `pi_p(u) = u + p` on the reals.
    pub fn translation() -> Self {
        Self::new("translation", Interval::REAL, |p, u| u + p)
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "scaling" => Some(Self::scaling()),
            "translation" => Some(Self::translation()),
            _ => None,
        }
    }

    pub fn apply(&self, p: f64, u: f64) -> f64 {
        (self.apply)(p, u)
    }

    /// Apply and fail if the image leaves the group's domain.
    pub fn apply_checked(&self, p: f64, u: f64) -> Result<f64> {
        self.domain.check(self.apply(p, u))
    }

    /// `d/dp pi_p(u)` at `p = 0` by a central difference.
    pub fn infinitesimal(&self, u: f64) -> f64 {
        fd::derivative(|p| self.apply(p, u), 0.0, fd::DEFAULT_STEP)
    }
}

impl std::fmt::Debug for TransformationGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformationGroup")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Worst-case absolute residuals of the group axioms over a sample grid.
#[derive(Debug, Clone, Copy)]
pub struct AxiomReport {
    pub identity: f64,
    pub composition: f64,
    pub inverse: f64,
    pub tol: f64,
}

impl AxiomReport {
    pub fn max_residual(&self) -> f64 {
        self.identity.max(self.composition).max(self.inverse)
    }

    pub fn pass(&self) -> bool {
        self.max_residual() <= self.tol
    }
}

/// Check identity, additive composition and inverse on the grid
/// `values x params (x params)`.
pub fn verify_group_axioms(
    group: &TransformationGroup,
    values: &[f64],
    params: &[f64],
    tol: f64,
) -> Result<AxiomReport> {
    if values.is_empty() || params.is_empty() {
        return Err(Error::InvalidArgument(
            "verify_group_axioms needs at least one value and one parameter sample".into(),
        ));
    }
    let mut identity: f64 = 0.0;
    let mut composition: f64 = 0.0;
    let mut inverse: f64 = 0.0;
    for &u in values {
        identity = identity.max((group.apply(0.0, u) - u).abs());
        for &p1 in params {
            inverse = inverse.max((group.apply(-p1, group.apply(p1, u)) - u).abs());
            for &p2 in params {
                let lhs = group.apply(p2, group.apply(p1, u));
                let rhs = group.apply(p1 + p2, u);
                composition = composition.max((lhs - rhs).abs());
            }
        }
    }
    Ok(AxiomReport {
        identity,
        composition,
        inverse,
        tol,
    })
}

/// An additively parametrized family `{rho_p}` of state transformations.
#[derive(Clone)]
pub struct StateTransformationFamily {
    apply: StateMap,
    jacobian_x: Option<StateJacobianMap>,
    generator: Option<GeneratorMap>,
    pub dim: usize,
}

impl StateTransformationFamily {
    pub fn new(
        dim: usize,
        apply: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        StateTransformationFamily {
            apply: Arc::new(apply),
            jacobian_x: None,
            generator: None,
            dim,
        }
    }

    /// Analytic Jacobian `d rho_p / dx`; otherwise it is computed by central
    /// finite differences.
    pub fn with_jacobian(
        mut self,
        jac: impl Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian_x = Some(Arc::new(jac));
        self
    }

    /// Closed-form infinitesimal `eta(x) = d/dp rho_p(x)|_{p=0}`.
    pub fn with_generator(
        mut self,
        gen: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.generator = Some(Arc::new(gen));
        self
    }

    /// `rho_p(x) = e^p x_i` on the masked components, identity elsewhere.
    /// Comes with analytic Jacobian and generator.
    pub fn scaling_mask(dim: usize, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), dim);
        let m1 = mask.to_vec();
        let m2 = mask.to_vec();
        let m3 = mask.to_vec();
        Self::new(dim, move |p, x| {
            let s = p.exp();
            DVector::from_fn(x.len(), |i, _| if m1[i] { s * x[i] } else { x[i] })
        })
        .with_jacobian(move |p, x| {
            let s = p.exp();
            DMatrix::from_fn(x.len(), x.len(), |i, j| {
                if i != j {
                    0.0
                } else if m2[i] {
                    s
                } else {
                    1.0
                }
            })
        })
        .with_generator(move |x| {
            DVector::from_fn(x.len(), |i, _| if m3[i] { x[i] } else { 0.0 })
        })
    }

    /// The canonical action on normal-form coordinates:
    /// `rho_p(z, p_hat) = (z, p_hat + p)`.
    pub fn shift_last(dim: usize) -> Self {
        Self::new(dim, move |p, x| {
            let mut y = x.clone();
            y[dim - 1] += p;
            y
        })
        .with_jacobian(move |_, x| DMatrix::identity(x.len(), x.len()))
        .with_generator(move |x| {
            let mut e = DVector::zeros(x.len());
            e[dim - 1] = 1.0;
            e
        })
    }

    pub fn apply(&self, p: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.apply)(p, x)
    }

    pub fn jacobian(&self, p: f64, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.jacobian_x {
            Some(j) => j(p, x),
            None => fd::jacobian(|x| self.apply(p, x), x, fd::DEFAULT_STEP),
        }
    }

    /// `eta(x) = d/dp rho_p(x)` at `p = 0`.
    pub fn infinitesimal(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.generator {
            Some(g) => g(x),
            None => {
                let h = fd::step(0.0, fd::DEFAULT_STEP);
                (self.apply(h, x) - self.apply(-h, x)) / (2.0 * h)
            }
        }
    }
}

impl std::fmt::Debug for StateTransformationFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateTransformationFamily")
            .field("dim", &self.dim)
            .field("analytic_jacobian", &self.jacobian_x.is_some())
            .field("analytic_generator", &self.generator.is_some())
            .finish()
    }
}
