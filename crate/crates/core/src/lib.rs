//! Projection-free optimization over the probability simplex with Frank-Wolfe
//! methods whose step size adapts to both the relative smoothness constant `L`
//! and the triangle scaling exponent `γ` of a Bregman divergence.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] – reference functions, Bregman divergences and an empirical
//!   triangle-scaling-exponent estimator.
//! * [`simplex`] – the clipped probability simplex, its linear minimization
//!   oracle and the diameter/boundary constants used by rate bounds.
//! * [`objectives`] – D-optimal design, Poisson linear inverse and quadratic
//!   objectives with exact gradients.
//! * [`solver`] – the four Frank-Wolfe variants (fully adaptive, `γ`-adaptive,
//!   `L`-adaptive, fixed), trace records and rate diagnostics.
//! * [`distributed`] – an in-process centralized network of quadratic nodes
//!   with gradient aggregation, similarity estimation and the induced geometry.
//! * [`experiments`] – batch runner writing CSV traces and summaries.

pub mod distributed;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod objectives;
pub mod simplex;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{BregmanDivergence, ReferenceFunction, TseEstimate, TseSample};
pub use objectives::{DOptimalDesign, Objective, PoissonInverse, QuadraticObjective};
pub use simplex::{ClippedSimplex, SetConstants};
pub use solver::{
    IterationRecord, RejectionParity, SolverConfig, SolverRun, Termination, Variant,
};

/// Dense column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
