use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{boolean, Configurable};
use crate::error::{Error, Result};
use crate::numcore::{Float, Gradients, Graph, ParamId, ParamStore, Tensor};
use crate::parser::{
    check_treebank, dev_uas, load_parser_files, save_parser_files, Decoder, Features, ParseResult, ParserConfig,
    ParserModel, ParserNet, ParserVocabs,
};
use crate::persist;
use crate::tagger::NO_RNG;
use crate::train::{train_loop, TrainReport};
use crate::treebank::Sentence;
use crate::vocab::{Embeddings, Vocab};

use super::{absorb_base, BASE, TARGET};

#[derive(Clone, Debug, PartialEq)]
pub struct StackedParserConfig {
    /// Target network settings. `arc_dim` and `rel_dim` are overridden by
    /// the base parser's.
    pub target: ParserConfig,
    pub train_base_embeddings: bool,
}

impl Default for StackedParserConfig {
    fn default() -> Self {
        StackedParserConfig {
            target: ParserConfig {
                layers: 1,
                hidden: 900,
                ..ParserConfig::default()
            },
            train_base_embeddings: false,
        }
    }
}

impl StackedParserConfig {
    pub fn desk() -> Self {
        StackedParserConfig {
            target: ParserConfig::desk(),
            train_base_embeddings: false,
        }
    }
}

impl Configurable for StackedParserConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "train_base_embeddings" => self.train_base_embeddings = boolean(key, value)?,
            _ => return self.target.set(key, value),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![("train_base_embeddings", self.train_base_embeddings.to_string())];
        v.extend(self.target.entries());
        v
    }
}

/// A target parser whose inputs include the base parser's last bi-LSTM
/// states and whose MLP outputs are added to the base MLP outputs.
#[derive(Clone, Debug)]
pub struct StackedParser {
    pub config: StackedParserConfig,
    pub base_config: ParserConfig,
    pub store: ParamStore,
    pub base: ParserNet,
    pub target: ParserNet,
}

impl StackedParser {
    pub fn new(
        base: &ParserModel,
        config: &StackedParserConfig,
        train: &[Sentence],
        embeddings: Option<&Embeddings>,
    ) -> Self {
        let own = ParserVocabs::build(train);
        // Base labels first so the copied tensor slices line up.
        let rels = Vocab::build(
            &[],
            base.net
                .vocabs
                .rels
                .items()
                .iter()
                .chain(own.rels.items())
                .map(String::as_str),
        );
        let vocabs = ParserVocabs { rels, ..own };
        let mut s = Self::assemble(base, config, vocabs, embeddings);
        s.copy_base_tensors();
        s
    }

    fn assemble(
        base: &ParserModel,
        config: &StackedParserConfig,
        vocabs: ParserVocabs,
        embeddings: Option<&Embeddings>,
    ) -> Self {
        let mut store = absorb_base(&base.store);
        let mut config = config.clone();
        config.target.arc_dim = base.net.arc_dep.out_dim(&base.store);
        config.target.rel_dim = base.net.rel_dep.out_dim(&base.store);
        let mut rng = ChaCha8Rng::seed_from_u64(config.target.train.seed);
        let target = ParserNet::new(
            &mut store,
            &format!("{TARGET}/parser"),
            &config.target,
            vocabs,
            embeddings,
            2 * base.net.hidden(),
            &mut rng,
        );
        let mut s = StackedParser {
            config,
            base_config: base.config.clone(),
            store,
            base: base.net.clone(),
            target,
        };
        s.apply_freezing();
        s
    }

    fn apply_freezing(&mut self) {
        let all: Vec<ParamId> = self.store.ids().collect();
        for id in all {
            self.store.set_trainable(id, true);
        }
        for (_, id) in self.target.pretrained.iter().chain(&self.base.pretrained) {
            self.store.set_trainable(*id, false);
        }
        if !self.config.train_base_embeddings {
            for id in self.base.input_params() {
                self.store.set_trainable(id, false);
            }
        }
        // Scoring happens with the target's copies.
        self.store.set_trainable(self.base.u_arc, false);
        self.store.set_trainable(self.base.u_rel, false);
    }

    /// Target scoring tensors start as copies of the base ones. Labels the
    /// base never saw keep their fresh initialization.
    fn copy_base_tensors(&mut self) {
        let u_arc = self.store.get(self.base.u_arc).clone();
        *self.store.get_mut(self.target.u_arc) = u_arc;
        let base_rel = self.store.get(self.base.u_rel).clone();
        let slice = base_rel.len() / base_rel.shape()[0].max(1);
        let n_base = self.base.vocabs.rels.len();
        let target_rel = self.store.get_mut(self.target.u_rel);
        target_rel.data_mut()[..n_base * slice].copy_from_slice(base_rel.data());
    }

    pub fn base_feature_params(&self) -> Vec<ParamId> {
        self.base.feature_params()
    }

    /// Target input vectors, root position first.
    pub fn stack_parse_inputs(&self, sentence: &Sentence) -> Result<Vec<Vec<Float>>> {
        if self.target.extra_dim != 2 * self.base.hidden() {
            return Err(Error::shape(format!(
                "target expects {} base features, base states have {}",
                self.target.extra_dim,
                2 * self.base.hidden()
            )));
        }
        let mut g = Graph::new(&self.store);
        let (forms, tags) = (sentence.forms(), sentence.tags());
        let states = self.base.states(&mut g, &forms, &tags, None, NO_RNG);
        let inputs = self.target.inputs(&mut g, &forms, &tags, Some(&states));
        Ok(inputs.iter().map(|&v| g.value(v).data().to_vec()).collect())
    }

    pub fn parse(&self, sentence: &Sentence, decoder: Decoder) -> ParseResult {
        stacked_parse(&self.base, &self.target, &self.store, sentence, decoder)
    }

    /// Like [`ParserModel::parse_all`].
    pub fn parse_all(&self, sentences: &[Sentence], decoder: Decoder) -> Vec<Sentence> {
        sentences
            .iter()
            .map(|s| {
                let mut r = self.parse(s, decoder);
                if !r.tree {
                    r = self.parse(s, Decoder::Mst);
                }
                s.with_parse(&r.heads, &r.deprels)
            })
            .collect()
    }

    pub fn loss_and_grads<R: Rng>(
        &self,
        store: &ParamStore,
        sentence: &Sentence,
        rng: Option<&mut R>,
    ) -> Result<(Float, Gradients)> {
        stacked_loss(&self.base, &self.target, store, sentence, rng)
    }

    pub fn save(&self, dir: &Path, report: Option<&TrainReport>) -> Result<()> {
        persist::save_store(dir, &self.store)?;
        save_parser_files(dir, "base.", &self.base_config, &self.base)?;
        persist::save_text(dir, persist::CONFIG, &self.config.to_text())?;
        save_parser_files(dir, "target.", &self.config.target, &self.target)?;
        if let Some(r) = report {
            persist::save_text(dir, persist::BEST_EPOCH, &format!("{}\n", r.best_epoch))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (base_config, base_vocabs, base_emb) = load_parser_files(dir, "base.", &format!("{BASE}/parser"))?;
        let base = ParserModel::with_vocabs(&base_config, base_vocabs, base_emb.as_ref());
        let mut config = StackedParserConfig::default();
        config.apply(&persist::load_pairs(dir, persist::CONFIG)?)?;
        let (_, vocabs, emb) = load_parser_files(dir, "target.", &format!("{TARGET}/parser"))?;
        let mut s = Self::assemble(&base, &config, vocabs, emb.as_ref());
        persist::load_store(dir, &mut s.store)?;
        s.apply_freezing();
        Ok(s)
    }
}

fn stacked_features<R: Rng>(
    base: &ParserNet,
    target: &ParserNet,
    g: &mut Graph,
    sentence: &Sentence,
    mut rng: Option<&mut R>,
) -> Features {
    let (forms, tags) = (sentence.forms(), sentence.tags());
    let base_states = base.states(g, &forms, &tags, None, rng.as_deref_mut());
    let base_f = base.mlp_features(g, &base_states);
    let states = target.states(g, &forms, &tags, Some(&base_states), rng.as_deref_mut());
    let f = target.mlp_features(g, &states);
    let f = f.add(g, &base_f);
    target.dropout_features(g, &f, rng)
}

fn stacked_parse(
    base: &ParserNet,
    target: &ParserNet,
    store: &ParamStore,
    sentence: &Sentence,
    decoder: Decoder,
) -> ParseResult {
    let mut g = Graph::new(store);
    let f = stacked_features(base, target, &mut g, sentence, NO_RNG);
    target.decode(&mut g, &f, decoder)
}

fn stacked_loss<R: Rng>(
    base: &ParserNet,
    target: &ParserNet,
    store: &ParamStore,
    sentence: &Sentence,
    rng: Option<&mut R>,
) -> Result<(Float, Gradients)> {
    let (heads, rels) = target.gold(sentence)?;
    let mut g = Graph::new(store);
    let f = stacked_features(base, target, &mut g, sentence, rng);
    let l = target.loss(&mut g, &f, &heads, &rels);
    g.check_finite()?;
    Ok((g.scalar(l), g.backward(l)))
}

/// Trains the stacked parser, updating target and base feature layers,
/// and keeps the epoch with the best dev UAS.
pub fn train_stacked_parser(
    base: &ParserModel,
    train: &[Sentence],
    dev: &[Sentence],
    config: &StackedParserConfig,
    embeddings: Option<&Embeddings>,
) -> Result<(StackedParser, TrainReport)> {
    check_treebank(train).map_err(|e| match e {
        Error::Empty(_) => Error::Empty("target treebank"),
        e => e,
    })?;
    let mut model = StackedParser::new(base, config, train, embeddings);
    let train: Vec<&Sentence> = train.iter().filter(|s| !s.is_empty()).collect();
    let select: Vec<Sentence> = if dev.is_empty() {
        train.iter().map(|s| (*s).clone()).collect()
    } else {
        dev.to_vec()
    };
    let decoder = model.config.target.decoder;
    let opts = model.config.target.train.clone();
    let StackedParser { store, base, target, .. } = &mut model;
    let (base, target) = (&*base, &*target);
    let report = train_loop(
        store,
        train.len(),
        &opts,
        |s, i, rng| stacked_loss(base, target, s, train[i], Some(rng)),
        |s| dev_uas(&select, decoder, |x, d| stacked_parse(base, target, s, x, d)),
    )?;
    Ok((model, report))
}

/// Zeroes every target MLP so the target contributes nothing to the
/// features; scores then come from the base MLPs alone.
pub fn zero_target_mlps(stacked: &mut StackedParser) {
    for m in stacked.target.mlps() {
        stacked.store.get_mut(m.w).fill(0.0);
        stacked.store.get_mut(m.b).fill(0.0);
    }
}

/// Target scoring tensors, for inspection.
pub fn target_tensors(stacked: &StackedParser) -> (&Tensor, &Tensor) {
    (stacked.store.get(stacked.target.u_arc), stacked.store.get(stacked.target.u_rel))
}
