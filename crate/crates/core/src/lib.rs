//! Adaptive kernel-based method of lines for one-dimensional time-dependent
//! boundary value problems.
//!
//! The solution is represented by a multiquadric interpolant on a set of
//! collocation points. At every output time the set is rebuilt by
//! leave-one-out cross-validation refinement, and the semi-discrete system is
//! advanced with a variable-step BDF integrator.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::result_large_err)]

pub mod dae;
pub mod densela;
pub mod driver;
pub mod error;
pub mod interp;
pub mod kernel;
pub mod mol;
pub mod output;
pub mod problems;
pub mod refine;
pub mod serde_ext;

pub use dae::{BdfMethod, IntegratorConfig};
pub use driver::{solve_adaptive, AdaptiveConfig, Failure, LevelRecord, RunReport, Termination};
pub use error::{Error, Result};
pub use interp::{fit, loocv_indicator, Interpolant};
pub use kernel::Deriv;
pub use mol::ProblemDef;
pub use problems::{BenchmarkId, BenchmarkOptions};
pub use refine::{PointSet, RefineConfig};
