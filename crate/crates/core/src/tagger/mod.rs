//! Bi-LSTM-CRF part-of-speech tagger.
//!
//! Each word is represented by its pretrained vector, a trainable word
//! vector and an attention-weighted average of its character embeddings.
//! Neighbouring token vectors are concatenated within a fixed window, fed
//! to a peephole bi-LSTM, projected to per-tag emission scores and decoded
//! by a linear-chain CRF.

pub mod crf;
mod model;

pub use crf::{crf_gradients, crf_log_likelihood, crf_log_partition, crf_nll, crf_path_score, viterbi_decode};
pub use model::{
    train_tagger, TagResult, TaggerConfig, TaggerModel, TaggerNet, TaggerVocabs, EMPTY_WORD, UNKNOWN_CHAR,
};
pub(crate) use model::{accuracy_of, load_tagger_files, placeholder_embeddings, save_tagger_files, NO_RNG};
