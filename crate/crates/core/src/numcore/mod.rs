//! Dense tensors, reverse-mode autodiff, recurrent cells, the Adagrad
//! optimizer and a finite-difference gradient checker.

pub mod biaffine;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod tensor;

pub use biaffine::{biaffine, biaffine_labels, biaffine_with_bias, BiaffineBias};
pub use gradcheck::grad_check;
pub use init::{glorot_uniform, orthogonal, uniform};
pub use graph::{dropout_mask, CustomOp, Grad, Gradients, Graph, Var};
pub use lstm::{bilstm_encode, lstm_step, BiLstm, BiLstmLayer, LstmCell, LstmStep, LstmVariant};
pub use optim::{adagrad_update, Adagrad};
pub use params::{read_tensors, ParamEntry, ParamId, ParamStore};
pub use tensor::{argmax, log_sum_exp, sigmoid, softmax, Float, Tensor, DTYPE};
