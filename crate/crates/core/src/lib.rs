//! Distributionally robust stochastic optimization over Wasserstein balls.
//!
//! The crate centers on the worst-case expectation problem: given a finite
//! nominal distribution, a ground metric with transport order `p`, and a
//! radius `theta`, compute `sup { E_mu[psi] : W_p(mu, nu) <= theta }` through
//! its one-dimensional convex dual, certify whether a worst-case
//! distribution is attained, and construct it (or a near-optimal escaping
//! sequence) with the at-most-one-split structure. Application solvers
//! (newsvendor, uncertainty quantification, worst-case VaR, affine
//! objectives, on/off point-process control, a continuum transportation
//! variant), phi-divergence baselines and radius calibration are layered on
//! top, each validated against an independent brute-force oracle.

pub mod affine;
pub mod calibrate;
pub mod distribution;
pub mod divergence;
pub mod drtp;
pub mod dual;
pub mod error;
pub mod io;
pub mod metric;
pub mod newsvendor;
pub mod numeric;
pub mod objective;
pub mod oracle;
pub mod parallel;
pub mod phi_baseline;
pub mod process;
pub mod simplex;
pub mod space;
pub mod transport;
pub mod uq;
pub mod var;
pub mod worst_case;

pub use distribution::{Atom, DiscreteDistribution};
pub use divergence::{expectation_gap_bound, phi_divergence, PhiKind};
pub use dual::{
    dual_objective, phi_regularize, solve_dual, DualSolution, Existence, RegularizedValue,
    WassersteinBall,
};
pub use error::{Error, Result};
pub use metric::{GroundMetric, MetricKind};
pub use objective::{estimate_kappa, Builtin, Growth, KappaEstimate, Objective};
pub use oracle::primal_oracle;
pub use space::PointSpace;
pub use transport::{wasserstein_1d_fast, wasserstein_distance, wasserstein_lp, TransportPlan};
pub use worst_case::{
    construct_worst_case, epsilon_optimal_sequence, robust_lower_bound_vk, TransportRecord,
    WorstCaseDistribution,
};
