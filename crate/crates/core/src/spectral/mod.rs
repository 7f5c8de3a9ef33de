//! Matrix functions: dense Hermitian eigendecomposition, support-restricted
//! fractional powers, and the structured diagonal-plus-rank-one solver.

mod eigh;
mod secular;

pub use eigh::{
    eigh, matrix_power, support_power, trace_product, EigenSystem, TraceProduct,
    DEFAULT_SUPPORT_TOL, HERMITIAN_TOL,
};
pub use secular::{sqrt_diag_plus_rank_one, DiagPlusRankOne, SecularRoot, DEFLATION_GAP};
