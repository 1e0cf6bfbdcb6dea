//! Feature-level stacking of a target-language tagger and parser on top
//! of trained base models.
//!
//! A stacked model owns a copy of its base. The tagger appends the base
//! tagger's emission vector to each target token vector before windowing.
//! The parser feeds the base parser's last bi-LSTM states into the target
//! bi-LSTM, adds the base MLP outputs to the target MLP outputs and scores
//! arcs with tensors copied from the base parser. Training updates the
//! target and the base feature layers together.

mod parser;
mod tagger;

pub use parser::{
    target_tensors, train_stacked_parser, zero_target_mlps, StackedParser, StackedParserConfig,
};
pub use tagger::{train_stacked_tagger, StackedTagger, StackedTaggerConfig};

use crate::numcore::ParamStore;

pub const BASE: &str = "base";
pub const TARGET: &str = "target";

/// A store holding `base` under the `base/` namespace. Because it is
/// absorbed first, the base network's parameter ids stay valid.
fn absorb_base(base: &ParamStore) -> ParamStore {
    let mut store = ParamStore::new();
    let offset = store.absorb(base, &format!("{BASE}/"));
    debug_assert_eq!(offset, 0);
    store
}
