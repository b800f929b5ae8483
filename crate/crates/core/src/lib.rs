//! Numerical toolkit for input-invariant dynamical systems.
//!
//! Systems whose input/output behaviour is unchanged when the input is moved
//! along a one-parameter transformation group (scaled, shifted, ...) admit a
//! universal normal form: an integral feedback estimating the transformation
//! parameter, feeding a back-transformed input into an invariant variable
//! part. This crate verifies such invariances numerically, performs the
//! coordinate changes into the normal form, rectifies group actions to find
//! those coordinates, analyzes constant transmissible inputs, and ships three
//! worked example systems.

pub mod domain;
pub mod dynamics;
pub mod equivariance;
pub mod error;
pub mod examples;
pub mod fd;
pub mod groups;
pub mod normalform;
pub mod sample;
pub mod signals;
pub mod solver;
pub mod transmissible;

pub use domain::Interval;
pub use dynamics::{simulate, DynamicalSystem, Trajectory};
pub use equivariance::{
    equivariance_residual, equivariance_sweep, functional_independence, invariance_io_test,
    pde_residuals, EquivarianceResidual, SweepOptions, SweepReport,
};
pub use error::{Error, Result};
pub use groups::{
    verify_group_axioms, AxiomReport, StateTransformationFamily, TransformationGroup,
};
pub use normalform::{
    apply_coordinate_change, as_flat_system, gauge_transform, rectify_group_action,
    simulate_normal_form, CoordinateChange, CoordinateChangeOptions, CrossSection,
    NormalFormSystem, RectifyOptions,
};
pub use sample::Axis;
pub use signals::{transform_signal, Generator, InputSignal, Interpolation, Segment};
pub use solver::{Solution, SolverOptions};
pub use transmissible::{
    basin_sample, classify_stability, find_and_classify, find_constant_transmissible,
    Classification, SearchBox, TransmissibleInput,
};
