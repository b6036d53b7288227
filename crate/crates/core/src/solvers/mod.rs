//! Relaxation, Richardson and Krylov drivers sharing one preconditioner role.

pub mod krylov;
pub mod precond;
pub mod relaxation;
pub mod report;
pub mod richardson;

pub use krylov::{bicgstab, gmres};
pub use precond::{ExactInverse, Identity, Ilu0Preconditioner, Preconditioner, ZeroOperator};
pub use relaxation::{Relaxation, RelaxationKind, RelaxationSpec};
pub use report::{ConvergenceReport, SolveControl, SolveOutcome};
pub use richardson::{hybrid_richardson, richardson};
