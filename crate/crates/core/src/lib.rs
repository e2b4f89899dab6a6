//! Proximal and proximal-linearized ADMM with variable metrics for
//! `min g(Ax) + h(x)`, together with certificates for the parameter choices
//! and audits of the inequalities behind their convergence guarantees.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod functions;
pub mod linops;
pub mod params;
pub mod problems;
pub mod rates;
pub mod rng;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use functions::{ProxFunction, Quadratic, SmoothFunction};
pub use linops::{LinearMap, MetricMatrix};
pub use params::{ConstantsBundle, MeritRegime, MetricSchedule, Variant};
pub use solver::{ProblemSpec, Solver, SolverConfig, Stopping, XSolver};
pub use trace::{Trace, TraceRecord};
