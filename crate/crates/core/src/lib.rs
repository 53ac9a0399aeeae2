//! Elastic-net regularization `½‖Kx − y‖² + α‖x‖₁ + (β/2)‖x‖²` for dense
//! linear inverse problems.
//!
//! Two active-set solvers are provided: a regularized semismooth Newton
//! method ([`rssn_solve`]) that converges fast locally, and a regularized
//! feature-sign search ([`rfss_solve`]) that decreases the objective at every
//! step and always terminates. Around them sit simple oracles
//! ([`reference`]), parameter rules ([`params`]) and seeded problem
//! generators ([`generate`]).
//!
//! ```
//! use elastinet::{rssn_solve, Problem, RegParams, RssnOptions};
//! use nalgebra::{DMatrix, DVector};
//!
//! let p = Problem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![3.0, 1.0])).unwrap();
//! let r = RegParams::new(1.0, 1.0).unwrap();
//! let res = rssn_solve(&p, &r, &RssnOptions::default()).unwrap();
//! assert!((res.solution[0] - 1.0).abs() < 1e-12);
//! assert_eq!(res.solution[1], 0.0);
//! ```

mod error;
pub mod functional;
pub mod generate;
mod linalg;
pub mod params;
pub mod reference;
pub mod rfss;
pub mod rssn;
mod types;

pub use error::{Error, Result};
pub use functional::{
    aux_objective, check_optimality, kkt_residual, kkt_residual_norm, objective, soft_shrink,
    zero_minimizer_threshold, OptimalityCheck,
};
pub use linalg::operator_norm_estimate;
pub use rfss::{rfss_solve, rfss_solve_from, RfssOptions};
pub use rssn::{rssn_solve, rssn_solve_from, ActiveSetRule, RssnOptions};
pub use types::{
    is_consistent, ActiveSet, ConsistentTriple, Problem, ProblemBuilder, RegParams, SignPattern,
    SolveResult, SourceCertificate, Status,
};

pub use nalgebra;
