//! Dense tensors with reverse-mode automatic differentiation.

mod check;
mod params;
mod tape;
mod tensor;

pub use check::{finite_diff_check, relative_error, GradCheckReport, RELATIVE_FLOOR};
pub use params::{Checkpoint, Param, ParamStore, SavedTensor};
pub use tape::{logistic_scalar, softplus_scalar, Gradients, Tape, Var};
pub use tensor::Tensor;
