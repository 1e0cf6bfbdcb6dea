//! Tagging and dependency parsing for low-resource treebanks, with
//! feature-level neural stacking on models trained for a related,
//! well-resourced language.
//!
//! The crate is organized bottom-up:
//!
//! * [`treebank`]: CoNLL-U reading and writing, validation, splitting.
//! * [`numcore`]: tensors, autodiff, LSTM cells, Adagrad.
//! * [`tagger`]: bi-LSTM-CRF part-of-speech tagger.
//! * [`parser`]: biaffine graph-based dependency parser.
//! * [`stacking`]: stacked tagger and parser built on trained base models.
//! * [`langmodel`]: Kneser-Ney n-gram model for corpus selection.
//! * [`eval`]: attachment scores, jackknifing, cross-fold validation.
//! * [`synth`]: toy source and target treebanks.

pub mod config;
pub mod error;
pub mod eval;
pub mod langmodel;
pub mod numcore;
pub mod parser;
pub mod persist;
pub mod stacking;
pub mod synth;
pub mod tagger;
pub mod train;
pub mod treebank;
pub mod vocab;

pub use error::{Error, Result};
