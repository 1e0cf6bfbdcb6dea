//! Graph-based dependency parser with biaffine arc and label scoring.
//!
//! Words and tags are embedded, encoded by a bi-LSTM with coupled
//! input-forget cells and projected by four MLPs. Arcs are scored with a
//! biaffine matrix, labels with a per-label biaffine tensor, and heads are
//! read off greedily or with a maximum spanning arborescence.

pub mod decode;
mod model;

pub use decode::{decode_greedy, decode_mst, decode_mst_single_root, tree_score};
pub use model::{
    train_parser, Decoder, Features, Mlp, ParseResult, ParserConfig, ParserModel, ParserNet, ParserVocabs, ROOT,
};
pub(crate) use model::{check_treebank, dev_uas, load_parser_files, save_parser_files};
