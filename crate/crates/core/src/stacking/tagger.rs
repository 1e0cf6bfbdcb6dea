use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{boolean, Configurable};
use crate::error::{Error, Result};
use crate::numcore::{Float, Gradients, Graph, ParamId, ParamStore, Var};
use crate::persist;
use crate::tagger::{
    accuracy_of, crf_nll, load_tagger_files, save_tagger_files, TagResult, TaggerConfig, TaggerModel, TaggerNet,
    TaggerVocabs, NO_RNG,
};
use crate::train::{train_loop, TrainReport};
use crate::treebank::Sentence;
use crate::vocab::Embeddings;

use super::{absorb_base, BASE, TARGET};

#[derive(Clone, Debug, PartialEq)]
pub struct StackedTaggerConfig {
    pub target: TaggerConfig,
    /// Update the base tagger's embedding-level parameters too.
    pub train_base_embeddings: bool,
    /// Update only the target transition matrix.
    pub crf_only: bool,
}

impl Default for StackedTaggerConfig {
    fn default() -> Self {
        StackedTaggerConfig {
            target: TaggerConfig::default(),
            train_base_embeddings: false,
            crf_only: false,
        }
    }
}

impl StackedTaggerConfig {
    pub fn desk() -> Self {
        StackedTaggerConfig {
            target: TaggerConfig::desk(),
            ..Default::default()
        }
    }
}

impl Configurable for StackedTaggerConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "train_base_embeddings" => self.train_base_embeddings = boolean(key, value)?,
            "crf_only" => self.crf_only = boolean(key, value)?,
            _ => return self.target.set(key, value),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("train_base_embeddings", self.train_base_embeddings.to_string()),
            ("crf_only", self.crf_only.to_string()),
        ];
        v.extend(self.target.entries());
        v
    }
}

/// A target tagger reading the emission vectors of a base tagger. Both
/// networks live in one store, under `base/` and `target/`.
#[derive(Clone, Debug)]
pub struct StackedTagger {
    pub config: StackedTaggerConfig,
    pub base_config: TaggerConfig,
    pub store: ParamStore,
    pub base: TaggerNet,
    pub target: TaggerNet,
}

impl StackedTagger {
    /// Copies `base` into a fresh store and adds an untrained target
    /// tagger whose vocabularies come from `train`.
    pub fn new(
        base: &TaggerModel,
        config: &StackedTaggerConfig,
        train: &[Sentence],
        embeddings: Option<&Embeddings>,
    ) -> Result<Self> {
        let vocabs = TaggerVocabs::build(train, config.target.universal_tags)?;
        Ok(Self::assemble(base, config, vocabs, embeddings))
    }

    fn assemble(
        base: &TaggerModel,
        config: &StackedTaggerConfig,
        vocabs: TaggerVocabs,
        embeddings: Option<&Embeddings>,
    ) -> Self {
        let mut store = absorb_base(&base.store);
        let mut rng = ChaCha8Rng::seed_from_u64(config.target.train.seed);
        let target = TaggerNet::new(
            &mut store,
            &format!("{TARGET}/tagger"),
            &config.target,
            vocabs,
            embeddings,
            base.net.num_tags(),
            &mut rng,
        );
        let mut s = StackedTagger {
            config: config.clone(),
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
            self.store.set_trainable(id, !self.config.crf_only);
        }
        for (_, id) in self.target.pretrained.iter().chain(&self.base.pretrained) {
            self.store.set_trainable(*id, false);
        }
        if !self.config.train_base_embeddings || self.config.crf_only {
            for id in self.base.input_params() {
                self.store.set_trainable(id, false);
            }
        }
        // The base CRF never sees a loss.
        self.store.set_trainable(self.base.transitions, false);
        if self.config.crf_only {
            self.store.set_trainable(self.target.transitions, true);
        }
    }

    /// Base parameters that receive gradients during stacked training.
    pub fn base_feature_params(&self) -> Vec<ParamId> {
        self.base.feature_params()
    }

    fn base_emissions<R: Rng>(&self, g: &mut Graph, forms: &[&str], rng: Option<&mut R>) -> Vec<Var> {
        let (_, em) = self.base.features(g, forms, None, rng);
        (0..forms.len()).map(|i| g.row(em, i)).collect()
    }

    /// Windowed target input vectors: target embeddings and base emissions
    /// per token, then the context window.
    pub fn stack_tag_inputs(&self, sentence: &Sentence) -> Result<Vec<Vec<Float>>> {
        if self.target.extra_dim != self.base.num_tags() {
            return Err(Error::shape(format!(
                "target expects {} base features, base has {} tags",
                self.target.extra_dim,
                self.base.num_tags()
            )));
        }
        let mut g = Graph::new(&self.store);
        let forms = sentence.forms();
        let extra = self.base_emissions(&mut g, &forms, NO_RNG);
        let inputs = self.target.inputs(&mut g, &forms, Some(&extra));
        Ok(inputs.iter().map(|&v| g.value(v).data().to_vec()).collect())
    }

    pub fn tag(&self, sentence: &Sentence) -> TagResult {
        stacked_tag(&self.base, &self.target, &self.store, sentence)
    }

    pub fn tag_all(&self, sentences: &[Sentence]) -> Vec<Sentence> {
        sentences.iter().map(|s| s.with_tags(&self.tag(s).tags)).collect()
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
        save_tagger_files(dir, "base.", &self.base_config, &self.base)?;
        persist::save_text(dir, persist::CONFIG, &self.config.to_text())?;
        save_tagger_files(dir, "target.", &self.config.target, &self.target)?;
        if let Some(r) = report {
            persist::save_text(dir, persist::BEST_EPOCH, &format!("{}\n", r.best_epoch))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (base_config, base_vocabs, base_emb) = load_tagger_files(dir, "base.", &format!("{BASE}/tagger"))?;
        let base = TaggerModel::with_vocabs(&base_config, base_vocabs, base_emb.as_ref());
        let mut config = StackedTaggerConfig::default();
        config.apply(&persist::load_pairs(dir, persist::CONFIG)?)?;
        let (_, vocabs, emb) = load_tagger_files(dir, "target.", &format!("{TARGET}/tagger"))?;
        let mut s = Self::assemble(&base, &config, vocabs, emb.as_ref());
        persist::load_store(dir, &mut s.store)?;
        s.apply_freezing();
        Ok(s)
    }
}

fn stacked_features<R: Rng>(
    base: &TaggerNet,
    target: &TaggerNet,
    g: &mut Graph,
    forms: &[&str],
    mut rng: Option<&mut R>,
) -> (Vec<Var>, Var) {
    let (_, em) = base.features(g, forms, None, rng.as_deref_mut());
    let extra: Vec<Var> = (0..forms.len()).map(|i| g.row(em, i)).collect();
    target.features(g, forms, Some(&extra), rng)
}

fn stacked_tag(base: &TaggerNet, target: &TaggerNet, store: &ParamStore, sentence: &Sentence) -> TagResult {
    if sentence.is_empty() {
        return TagResult {
            tags: vec![],
            emissions: vec![],
            hidden: vec![],
        };
    }
    let mut g = Graph::new(store);
    let (hidden, emissions) = stacked_features(base, target, &mut g, &sentence.forms(), NO_RNG);
    target.decode(&g, &hidden, emissions)
}

fn stacked_loss<R: Rng>(
    base: &TaggerNet,
    target: &TaggerNet,
    store: &ParamStore,
    sentence: &Sentence,
    rng: Option<&mut R>,
) -> Result<(Float, Gradients)> {
    let gold = target.gold_ids(sentence)?;
    let mut g = Graph::new(store);
    let (_, emissions) = stacked_features(base, target, &mut g, &sentence.forms(), rng);
    let t = g.param(target.transitions);
    let l = crf_nll(&mut g, emissions, t, &gold);
    g.check_finite()?;
    Ok((g.scalar(l), g.backward(l)))
}

/// Trains the stacked tagger jointly with the base feature layers,
/// keeping the epoch with the best dev accuracy.
pub fn train_stacked_tagger(
    base: &TaggerModel,
    train: &[Sentence],
    dev: &[Sentence],
    config: &StackedTaggerConfig,
    embeddings: Option<&Embeddings>,
) -> Result<(StackedTagger, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Empty("target treebank"));
    }
    let mut model = StackedTagger::new(base, config, train, embeddings)?;
    let train: Vec<&Sentence> = train.iter().filter(|s| !s.is_empty()).collect();
    let select: Vec<Sentence> = if dev.is_empty() {
        train.iter().map(|s| (*s).clone()).collect()
    } else {
        dev.to_vec()
    };
    let StackedTagger { store, base, target, .. } = &mut model;
    let (base, target) = (&*base, &*target);
    let report = train_loop(
        store,
        train.len(),
        &config.target.train,
        |s, i, rng| stacked_loss(base, target, s, train[i], Some(rng)),
        |s| Ok(accuracy_of(&select, |x| stacked_tag(base, target, s, x).tags)),
    )?;
    Ok((model, report))
}
