//! Small reverse-mode differentiation engine.
//!
//! Values are dense `f64` matrices. A [`Tape`] records one forward pass
//! (affine layers, relu, masked softmax, losses); [`Tape::backward`] replays
//! the adjoints in reverse and accumulates gradients into the
//! [`ParameterStore`] the parameters were read from. Tapes are per
//! minibatch and are consumed by `backward`.

mod fdcheck;
mod params;
mod tape;
mod tensor;

pub use fdcheck::{finite_difference_check, finite_difference_report, FdReport};
pub use params::{ParamId, ParameterStore};
pub use tape::{floored_ln, masked_softmax_values, PairTerm, Tape, Var, LOG_FLOOR};
pub use tensor::Tensor;
