use crate::domain::Interval;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("time {0} is negative; signals are defined for t >= 0")]
    NegativeTime(f64),

    #[error("value {value} lies outside the admissible domain {domain}")]
    DomainValue { value: f64, domain: Interval },

    #[error("state left its domain at t = {time} (component {component})")]
    DomainExit { time: f64, component: usize },

    #[error("step size underflow at t = {time}; the solution appears stiff or blows up")]
    StepUnderflow { time: f64 },

    #[error("step budget exhausted at t = {time}")]
    StepBudget { time: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coordinate round-trip failed: |delta(delta_inv(w)) - w| = {residual:.3e} at sample {index}")]
    RoundTrip { residual: f64, index: usize },

    #[error(
        "structure check failed: |f*(z,p,u) - f*(z,0,pi_-p(u))| = {residual:.3e} at sample {index}; \
         the candidate coordinate change does not produce a normal form"
    )]
    StructureCheck { residual: f64, index: usize },

    #[error("group orbit did not cross the section within s in [{lo}, {hi}]")]
    OrbitEscape { lo: f64, hi: f64 },

    #[error("group orbit crosses the section {count} times; the cross-section is ambiguous")]
    AmbiguousCrossing { count: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
