//! Truncated multimode Fock spaces: basis indexing, ladder operators, kets,
//! and density operators with structure tags.

mod density;
pub(crate) mod ket;
mod ladder;
mod space;

pub use density::{
    apply_on_mode, hermitian_deviation, require_hermitian, trace_of, DensityOperator, Frame,
    FramedDiag, InvariantReport, RankOneTerm, Structure, PSD_REL_TOL, TRACE_TOL,
};
pub(crate) use density::outer;
pub use ket::{tensor_ket, Ket};
pub use ladder::{annihilation, creation, number_operator, SparseOperator};
pub use space::{build_space, SpaceDescriptor, DEFAULT_DENSE_LIMIT, DEFAULT_STRUCTURED_LIMIT};
