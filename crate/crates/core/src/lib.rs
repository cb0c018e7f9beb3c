//! t-svd algebra, an exact state-vector simulator, quantum singular value
//! estimation and a context-aware recommendation pipeline built on them.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod qsim;
pub mod qsve;
pub mod recsys;
pub mod tensor;
pub mod tsvd;

pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentKind, RunReport};
pub use linalg::{CMatrix, FullSvd};
pub use qsim::{RegisterLayout, StateVector};
pub use tensor::{ComplexTensor, DenseTensor, Tensor, Tube};
pub use tsvd::{FftConvention, SliceSvdSet, TSvdFactors};
