//! ODE system representation and adaptive simulation with dense output.

use std::sync::Arc;

use nalgebra::DVector;

use crate::domain::{first_violation, Interval};
use crate::error::{Error, Result};
use crate::signals::InputSignal;
use crate::solver::{integrate, Solution, SolverOptions};

pub type VectorField = Arc<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync>;
pub type OutputMap = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// `dx/dt = f(x, u)`, `y = h(x)` on a per-component state domain.
#[derive(Clone)]
pub struct DynamicalSystem {
    pub dim: usize,
    f: VectorField,
    h: OutputMap,
    pub state_domain: Vec<Interval>,
    pub label: String,
}

impl DynamicalSystem {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        state_domain: Vec<Interval>,
        f: impl Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
        h: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert!(dim >= 1);
        assert_eq!(state_domain.len(), dim);
        DynamicalSystem {
            dim,
            f: Arc::new(f),
            h: Arc::new(h),
            state_domain,
            label: label.into(),
        }
    }

    pub fn f(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        (self.f)(x, u)
    }

    pub fn output(&self, x: &DVector<f64>) -> f64 {
        (self.h)(x)
    }

    pub fn vector_field(&self) -> VectorField {
        self.f.clone()
    }

    pub fn output_map(&self) -> OutputMap {
        self.h.clone()
    }
}

impl std::fmt::Debug for DynamicalSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DynamicalSystem")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish()
    }
}

/// A dense-output solution together with named derived scalar channels
/// recorded on the accepted time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    solution: Solution,
    channels: Vec<(String, Vec<f64>)>,
}

impl Trajectory {
    pub(crate) fn new(solution: Solution, channels: Vec<(String, Vec<f64>)>) -> Self {
        for (name, data) in &channels {
            assert_eq!(data.len(), solution.times.len(), "channel {name}");
        }
        Trajectory { solution, channels }
    }

    pub fn times(&self) -> &[f64] {
        &self.solution.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.solution.states
    }

    pub fn end_time(&self) -> f64 {
        self.solution.end_time()
    }

    pub fn end_state(&self) -> &DVector<f64> {
        self.solution.end_state()
    }

    /// Continuous interpolation of the state.
    pub fn state_at(&self, t: f64) -> DVector<f64> {
        self.solution.eval(t)
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|(n, _)| n.as_str()).collect()
    }
}

/// Simulate over `t_span`, restarting exactly at every input breakpoint so
/// discontinuities never sit inside a step.
pub fn simulate(
    system: &DynamicalSystem,
    x0: &DVector<f64>,
    u: &InputSignal,
    t_span: (f64, f64),
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if x0.len() != system.dim {
        return Err(Error::InvalidArgument(format!(
            "x0 has dimension {}, system has {}",
            x0.len(),
            system.dim
        )));
    }
    if let Some(c) = first_violation(&system.state_domain, x0) {
        return Err(Error::InvalidArgument(format!(
            "x0 component {c} = {} outside the state domain",
            x0[c]
        )));
    }
    let solution = piecewise_integrate(
        |t, x| Ok(system.f(x, u.eval(t)?)),
        u,
        t_span,
        x0,
        opts,
        Some(&system.state_domain),
    )?;
    let y = solution
        .states
        .iter()
        .map(|x| system.output(x))
        .collect::<Vec<_>>();
    Ok(Trajectory::new(solution, vec![("y".into(), y)]))
}

/// Split `t_span` at the signal's breakpoints and integrate piece by piece.
pub(crate) fn piecewise_integrate<F>(
    mut f: F,
    u: &InputSignal,
    t_span: (f64, f64),
    x0: &DVector<f64>,
    opts: &SolverOptions,
    domain: Option<&[Interval]>,
) -> Result<Solution>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let (t0, t1) = t_span;
    let mut cuts = vec![t0];
    if t1 > t0 {
        cuts.extend(u.breakpoints(t0, t1));
    } else {
        let mut b = u.breakpoints(t1, t0);
        b.reverse();
        cuts.extend(b);
    }
    cuts.push(t1);

    let mut sol: Option<Solution> = None;
    let mut x = x0.clone();
    for w in cuts.windows(2) {
        let piece = integrate(&mut f, (w[0], w[1]), &x, opts, domain)?;
        x = piece.end_state().clone();
        match &mut sol {
            None => sol = Some(piece),
            Some(s) => s.extend_with(piece),
        }
    }
    Ok(sol.unwrap())
}
