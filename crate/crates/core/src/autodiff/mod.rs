//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every operation of a forward pass. Parameters live in a
//! [`ParamStore`] outside the tape and enter it as leaves; after
//! [`Tape::backward`] their gradients are read back from [`Gradients`].
//!
//! ```
//! use progslu::autodiff::{ParamStore, Tape, Tensor};
//!
//! let mut store = ParamStore::new();
//! let w = store.add("w", Tensor::vector(vec![0.5, -1.0]));
//! let mut tape = Tape::new();
//! let x = tape.param(&store, w);
//! let y = tape.sigmoid(x);
//! let loss = tape.sum(y);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.param(w).unwrap().len(), 2);
//! ```

mod gradcheck;
mod lstm;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{
    check_all_primitives, check_primitive, grad_check, relative_error, GradCheckReport,
    PRIMITIVE_OPS,
};
pub use lstm::{lstm_step, LstmVars};
pub use params::{glorot_uniform, ParamId, ParamStore, Parameter};
pub use tape::{sigmoid, softmax, Gradients, Tape, Var, PROB_FLOOR};
pub use tensor::{argmax, Tensor};
