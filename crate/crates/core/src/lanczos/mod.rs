//! Block Lanczos recurrence with Krylov–Schur style restarts and partial
//! reorthogonalization.

mod baseline;
mod monitor;
mod state;

pub use baseline::{baseline_block_lanczos, BaselineOutput};
pub use monitor::{w_column, OrthoMonitor, WFormula, WInputs};
pub use state::{LanczosState, OverlapAudit, Reorth};
