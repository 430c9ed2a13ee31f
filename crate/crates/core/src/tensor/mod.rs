//! Dense matrices and a reverse-mode differentiation tape.

mod matrix;
mod tape;

pub use matrix::Matrix;
pub use tape::{Elementwise, Gradients, NodeId, Reduction, Tape, Var};

pub(crate) use tape::sigmoid;
