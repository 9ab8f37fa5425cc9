//! Deterministic, probability-free pathwise stochastic calculus at desk
//! scale: cadlag paths in finite-dimensional normed spaces, quadratic
//! (co)variations along sequences of partitions, vector Stieltjes and
//! Ito-Follmer integration, and a term-by-term Ito-formula verifier.
//!
//! Everything is a pure function of its inputs; fixtures are seeded and the
//! mathematical core contains no randomness. Limits over partition indices
//! are replaced by finite traces judged by the explicit stall rule in
//! [`trace`].

pub mod calculus;
pub mod error;
pub mod ito;
pub mod linalg;
pub mod partition;
pub mod path;
pub mod quadvar;
pub mod report;
pub mod scenario;
pub mod space;
pub mod stieltjes;
pub mod trace;

pub use error::{Error, Result};
pub use path::{CadlagPath, FVPath, Interpolation, OscMode, PathLike};
pub use space::{BilinearMap, MatrixNorm, NormKind, NormedSpace, Vector};
pub use trace::{ConvergenceTrace, Verdict};
