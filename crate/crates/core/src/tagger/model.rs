use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::crf::{crf_nll, viterbi_decode};
use crate::config::{boolean, ranged, Configurable};
use crate::error::{Error, Result};
use crate::numcore::{
    glorot_uniform, uniform, BiLstm, Float, Gradients, Graph, LstmVariant, ParamId, ParamStore, Tensor, Var,
};
use crate::persist;
use crate::train::{train_loop, TrainOptions, TrainReport};
use crate::treebank::{Sentence, UD_POS_TAGS};
use crate::vocab::{lookup_with_lowercase, Embeddings, Vocab, UNKNOWN};

pub const UNKNOWN_CHAR: &str = "<unk-char>";
pub const EMPTY_WORD: &str = "<empty>";

#[derive(Clone, Debug, PartialEq)]
pub struct TaggerConfig {
    /// Trainable word table width (the pretrained width comes from the file).
    pub word_dim: usize,
    pub char_dim: usize,
    pub attn_dim: usize,
    pub window: usize,
    pub hidden: usize,
    pub layers: usize,
    pub dropout: Float,
    /// Use the 17 universal tags as the output inventory.
    pub universal_tags: bool,
    pub train: TrainOptions,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            word_dim: 50,
            char_dim: 30,
            attn_dim: 30,
            window: 1,
            hidden: 300,
            layers: 1,
            dropout: 0.15,
            universal_tags: true,
            train: TrainOptions::default(),
        }
    }
}

impl TaggerConfig {
    /// Small dimensions for tests and synthetic data.
    pub fn desk() -> Self {
        TaggerConfig {
            word_dim: 16,
            char_dim: 8,
            attn_dim: 8,
            hidden: 24,
            dropout: 0.0,
            train: TrainOptions {
                learning_rate: 0.1,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

impl Configurable for TaggerConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "word_dim" => self.word_dim = ranged(key, value, 0, 4096)?,
            "char_dim" => self.char_dim = ranged(key, value, 1, 4096)?,
            "attn_dim" => self.attn_dim = ranged(key, value, 1, 4096)?,
            "window" => self.window = ranged(key, value, 0, 16)?,
            "hidden" => self.hidden = ranged(key, value, 1, 4096)?,
            "layers" => self.layers = ranged(key, value, 1, 8)?,
            "dropout" => self.dropout = ranged(key, value, 0.0, 0.95)?,
            "universal_tags" => self.universal_tags = boolean(key, value)?,
            _ => return self.train.set(key, value),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("word_dim", self.word_dim.to_string()),
            ("char_dim", self.char_dim.to_string()),
            ("attn_dim", self.attn_dim.to_string()),
            ("window", self.window.to_string()),
            ("hidden", self.hidden.to_string()),
            ("layers", self.layers.to_string()),
            ("dropout", self.dropout.to_string()),
            ("universal_tags", self.universal_tags.to_string()),
        ];
        v.extend(self.train.entries());
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggerVocabs {
    pub words: Vocab,
    pub chars: Vocab,
    pub tags: Vocab,
}

impl TaggerVocabs {
    pub fn build(sentences: &[Sentence], universal_tags: bool) -> Result<Self> {
        let tokens = || sentences.iter().flat_map(|s| &s.tokens);
        let words = Vocab::build(&[UNKNOWN], tokens().map(|t| t.form.as_str()));
        let mut chars = Vocab::build(&[UNKNOWN_CHAR, EMPTY_WORD], []);
        for t in tokens() {
            for c in t.form.chars() {
                chars.insert(c.encode_utf8(&mut [0; 4]));
            }
        }
        let tags = if universal_tags {
            let tags = Vocab::build(&[], UD_POS_TAGS);
            if let Some(t) = tokens().find(|t| tags.get(&t.upos).is_none()) {
                return Err(Error::UnknownLabel {
                    label: t.upos.clone(),
                    inventory: "universal POS tags",
                });
            }
            tags
        } else {
            let set: std::collections::BTreeSet<&str> = tokens().map(|t| t.upos.as_str()).collect();
            Vocab::build(&[], set)
        };
        Ok(TaggerVocabs { words, chars, tags })
    }
}

/// Tagger parameters as ids into a shared [`ParamStore`], so several
/// networks can live in one store.
#[derive(Clone, Debug)]
pub struct TaggerNet {
    pub vocabs: TaggerVocabs,
    pub pretrained: Option<(Vocab, ParamId)>,
    pub window: usize,
    pub dropout: Float,
    /// Width of per-token features appended by the caller.
    pub extra_dim: usize,
    pub word_table: ParamId,
    pub char_table: ParamId,
    pub attn_proj: ParamId,
    pub attn_bias: ParamId,
    pub attn_query: ParamId,
    pub pad: ParamId,
    pub lstm: BiLstm,
    pub emit_w: ParamId,
    pub emit_b: ParamId,
    pub transitions: ParamId,
}

impl TaggerNet {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        config: &TaggerConfig,
        vocabs: TaggerVocabs,
        pretrained: Option<&Embeddings>,
        extra_dim: usize,
        rng: &mut R,
    ) -> Self {
        let pretrained = pretrained.map(|e| {
            let id = store.add(format!("{prefix}/pretrained"), e.vectors.clone(), false);
            (e.vocab.clone(), id)
        });
        let pre_dim = pretrained.as_ref().map_or(0, |(_, id)| store.get(*id).cols());
        let word_table = store.add(
            format!("{prefix}/words"),
            Tensor::zeros(&[vocabs.words.len(), config.word_dim]),
            true,
        );
        let char_bound = (3.0 / config.char_dim as Float).sqrt();
        let char_table = store.add(
            format!("{prefix}/chars"),
            uniform(&[vocabs.chars.len(), config.char_dim], char_bound, rng),
            true,
        );
        let attn_proj = store.add(
            format!("{prefix}/attn/proj"),
            glorot_uniform(config.attn_dim, config.char_dim, rng),
            true,
        );
        let attn_bias = store.add(format!("{prefix}/attn/bias"), Tensor::zeros(&[config.attn_dim]), true);
        let attn_query = store.add(
            format!("{prefix}/attn/query"),
            glorot_uniform(1, config.attn_dim, rng).reshape(&[config.attn_dim]).unwrap(),
            true,
        );
        let token_dim = pre_dim + config.word_dim + config.char_dim + extra_dim;
        let pad = store.add(
            format!("{prefix}/pad"),
            uniform(&[token_dim], (3.0 / token_dim as Float).sqrt(), rng),
            true,
        );
        let lstm = BiLstm::new(
            store,
            &format!("{prefix}/lstm"),
            LstmVariant::Peephole,
            (2 * config.window + 1) * token_dim,
            config.hidden,
            config.layers,
            rng,
        );
        let n_tags = vocabs.tags.len();
        let emit_w = store.add(
            format!("{prefix}/emit/w"),
            glorot_uniform(n_tags, 2 * config.hidden, rng),
            true,
        );
        let emit_b = store.add(format!("{prefix}/emit/b"), Tensor::zeros(&[n_tags]), true);
        let transitions = store.add(
            format!("{prefix}/transitions"),
            Tensor::zeros(&[n_tags + 2, n_tags + 2]),
            true,
        );
        TaggerNet {
            vocabs,
            pretrained,
            window: config.window,
            dropout: config.dropout,
            extra_dim,
            word_table,
            char_table,
            attn_proj,
            attn_bias,
            attn_query,
            pad,
            lstm,
            emit_w,
            emit_b,
            transitions,
        }
    }

    pub fn num_tags(&self) -> usize {
        self.vocabs.tags.len()
    }

    /// Width of one token's vector before windowing.
    pub fn token_dim(&self, store: &ParamStore) -> usize {
        store.get(self.pad).len()
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        (2 * self.window + 1) * self.token_dim(store)
    }

    /// Embedding-level parameters.
    pub fn input_params(&self) -> Vec<ParamId> {
        let mut v: Vec<ParamId> = self.pretrained.iter().map(|(_, id)| *id).collect();
        v.extend([
            self.word_table,
            self.char_table,
            self.attn_proj,
            self.attn_bias,
            self.attn_query,
            self.pad,
        ]);
        v
    }

    /// Bi-LSTM and emission parameters: everything between the input
    /// vectors and the emission vector.
    pub fn feature_params(&self) -> Vec<ParamId> {
        let mut v = self.lstm.params();
        v.extend([self.emit_w, self.emit_b]);
        v
    }

    /// Attention-weighted average of the word's character embeddings.
    pub fn char_attention(&self, g: &mut Graph, word: &str) -> Var {
        let rows: Vec<usize> = word
            .chars()
            .map(|c| self.vocabs.chars.get_or(c.encode_utf8(&mut [0; 4]), 0))
            .collect();
        if rows.is_empty() {
            return g.lookup(self.char_table, 1);
        }
        let embs: Vec<Var> = rows.iter().map(|&r| g.lookup(self.char_table, r)).collect();
        let (p, b, q) = (g.param(self.attn_proj), g.param(self.attn_bias), g.param(self.attn_query));
        let scores: Vec<Var> = embs
            .iter()
            .map(|&e| {
                let z = g.matvec(p, e);
                let z = g.add(z, b);
                let t = g.tanh(z);
                g.dot(q, t)
            })
            .collect();
        let scores = g.concat(&scores);
        let weights = g.softmax(scores);
        let stacked = g.stack_rows(&embs);
        g.vecmat(weights, stacked)
    }

    /// Per-token vector: pretrained, trainable word, character attention.
    pub fn token_vector(&self, g: &mut Graph, form: &str) -> Var {
        let mut parts = Vec::with_capacity(3);
        if let Some((vocab, id)) = &self.pretrained {
            parts.push(g.lookup(*id, lookup_with_lowercase(vocab, form, 0)));
        }
        parts.push(g.lookup(self.word_table, lookup_with_lowercase(&self.vocabs.words, form, 0)));
        parts.push(self.char_attention(g, form));
        g.concat(&parts)
    }

    /// Concatenates each position with its `window` neighbours on both
    /// sides, padding outside the sentence.
    pub fn windowed(&self, g: &mut Graph, tokens: &[Var]) -> Vec<Var> {
        let pad = g.param(self.pad);
        let w = self.window as isize;
        (0..tokens.len() as isize)
            .map(|t| {
                let parts: Vec<Var> = (t - w..=t + w)
                    .map(|j| {
                        if j < 0 || j >= tokens.len() as isize {
                            pad
                        } else {
                            tokens[j as usize]
                        }
                    })
                    .collect();
                g.concat(&parts)
            })
            .collect()
    }

    /// Windowed input vectors; `extra` is appended to each token first.
    pub fn inputs(&self, g: &mut Graph, forms: &[&str], extra: Option<&[Var]>) -> Vec<Var> {
        let tokens: Vec<Var> = forms
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let v = self.token_vector(g, f);
                match extra {
                    Some(x) => g.concat(&[v, x[i]]),
                    None => v,
                }
            })
            .collect();
        self.windowed(g, &tokens)
    }

    /// Returns `(hidden, emissions)`; emissions are `[n, tags]`. Dropout is
    /// applied when `rng` is given.
    pub fn features<R: Rng>(
        &self,
        g: &mut Graph,
        forms: &[&str],
        extra: Option<&[Var]>,
        mut rng: Option<&mut R>,
    ) -> (Vec<Var>, Var) {
        let inputs: Vec<Var> = self
            .inputs(g, forms, extra)
            .into_iter()
            .map(|x| g.dropout(x, self.dropout, rng.as_deref_mut()))
            .collect();
        let hidden = self.lstm.encode(g, &inputs, self.dropout, rng);
        let (w, b) = (g.param(self.emit_w), g.param(self.emit_b));
        let rows: Vec<Var> = hidden
            .iter()
            .map(|&h| {
                let z = g.matvec(w, h);
                g.add(z, b)
            })
            .collect();
        let emissions = g.stack_rows(&rows);
        (hidden, emissions)
    }

    pub fn gold_ids(&self, sentence: &Sentence) -> Result<Vec<usize>> {
        sentence
            .tokens
            .iter()
            .map(|t| {
                self.vocabs.tags.get(&t.upos).ok_or_else(|| Error::UnknownLabel {
                    label: t.upos.clone(),
                    inventory: "tagger tag set",
                })
            })
            .collect()
    }

    /// CRF negative log-likelihood of the gold tags.
    pub fn loss<R: Rng>(
        &self,
        g: &mut Graph,
        forms: &[&str],
        gold: &[usize],
        extra: Option<&[Var]>,
        rng: Option<&mut R>,
    ) -> Var {
        let (_, emissions) = self.features(g, forms, extra, rng);
        let t = g.param(self.transitions);
        crf_nll(g, emissions, t, gold)
    }

    /// Viterbi decoding of already computed features.
    pub fn decode(&self, g: &Graph, hidden: &[Var], emissions: Var) -> TagResult {
        let em = g.value(emissions);
        let ids = viterbi_decode(em, g.params().get(self.transitions));
        TagResult {
            tags: ids.iter().map(|&i| self.vocabs.tags.item(i).to_string()).collect(),
            emissions: (0..em.rows()).map(|i| em.row(i).to_vec()).collect(),
            hidden: hidden.iter().map(|&h| g.value(h).data().to_vec()).collect(),
        }
    }
}

/// Output of [`TaggerModel::tag`]; all three have one entry per token.
#[derive(Clone, Debug, PartialEq)]
pub struct TagResult {
    pub tags: Vec<String>,
    pub emissions: Vec<Vec<Float>>,
    pub hidden: Vec<Vec<Float>>,
}

/// A trained tagger: its parameters plus the network that reads them.
#[derive(Clone, Debug)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    pub store: ParamStore,
    pub net: TaggerNet,
}

pub(crate) const NET: &str = "tagger";
pub(crate) const NO_RNG: Option<&mut ChaCha8Rng> = None;

impl TaggerModel {
    /// Fresh, untrained model with vocabularies built from `train`.
    pub fn new(config: &TaggerConfig, train: &[Sentence], embeddings: Option<&Embeddings>) -> Result<Self> {
        let vocabs = TaggerVocabs::build(train, config.universal_tags)?;
        Ok(Self::with_vocabs(config, vocabs, embeddings))
    }

    pub fn with_vocabs(config: &TaggerConfig, vocabs: TaggerVocabs, embeddings: Option<&Embeddings>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
        let mut store = ParamStore::new();
        let net = TaggerNet::new(&mut store, NET, config, vocabs, embeddings, 0, &mut rng);
        TaggerModel {
            config: config.clone(),
            store,
            net,
        }
    }

    /// Loss and gradients of one sentence under `store`.
    pub fn loss_and_grads<R: Rng>(
        &self,
        store: &ParamStore,
        sentence: &Sentence,
        rng: Option<&mut R>,
    ) -> Result<(Float, Gradients)> {
        let gold = self.net.gold_ids(sentence)?;
        let mut g = Graph::new(store);
        let l = self.net.loss(&mut g, &sentence.forms(), &gold, None, rng);
        g.check_finite()?;
        Ok((g.scalar(l), g.backward(l)))
    }

    pub fn tag(&self, sentence: &Sentence) -> TagResult {
        tag_with(&self.net, &self.store, sentence)
    }

    /// Copies of `sentences` with predicted tags.
    pub fn tag_all(&self, sentences: &[Sentence]) -> Vec<Sentence> {
        sentences.iter().map(|s| s.with_tags(&self.tag(s).tags)).collect()
    }

    pub fn save(&self, dir: &Path, report: Option<&TrainReport>) -> Result<()> {
        persist::save_store(dir, &self.store)?;
        save_tagger_files(dir, "", &self.config, &self.net)?;
        if let Some(r) = report {
            persist::save_text(dir, persist::BEST_EPOCH, &format!("{}\n", r.best_epoch))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (config, vocabs, embeddings) = load_tagger_files(dir, "", NET)?;
        let mut model = Self::with_vocabs(&config, vocabs, embeddings.as_ref());
        persist::load_store(dir, &mut model.store)?;
        Ok(model)
    }
}

pub(crate) fn tag_with(net: &TaggerNet, store: &ParamStore, sentence: &Sentence) -> TagResult {
    if sentence.is_empty() {
        return TagResult {
            tags: vec![],
            emissions: vec![],
            hidden: vec![],
        };
    }
    let mut g = Graph::new(store);
    let (hidden, emissions) = net.features(&mut g, &sentence.forms(), None, NO_RNG);
    net.decode(&g, &hidden, emissions)
}

pub(crate) fn save_tagger_files(dir: &Path, prefix: &str, config: &TaggerConfig, net: &TaggerNet) -> Result<()> {
    persist::save_text(dir, &format!("{prefix}{}", persist::CONFIG), &config.to_text())?;
    persist::save_vocab(dir, &format!("{prefix}words"), &net.vocabs.words)?;
    persist::save_vocab(dir, &format!("{prefix}chars"), &net.vocabs.chars)?;
    persist::save_vocab(dir, &format!("{prefix}tags"), &net.vocabs.tags)?;
    if let Some((vocab, _)) = &net.pretrained {
        persist::save_vocab(dir, &format!("{prefix}pretrained"), vocab)?;
    }
    Ok(())
}

/// Reads config and vocabularies. The pretrained table comes back as a
/// zero placeholder of the saved shape; loading the store fills it in.
pub(crate) fn load_tagger_files(
    dir: &Path,
    prefix: &str,
    param_prefix: &str,
) -> Result<(TaggerConfig, TaggerVocabs, Option<Embeddings>)> {
    let mut config = TaggerConfig::default();
    config.apply(&persist::load_pairs(dir, &format!("{prefix}{}", persist::CONFIG))?)?;
    let vocabs = TaggerVocabs {
        words: persist::load_vocab(dir, &format!("{prefix}words"))?,
        chars: persist::load_vocab(dir, &format!("{prefix}chars"))?,
        tags: persist::load_vocab(dir, &format!("{prefix}tags"))?,
    };
    let embeddings = placeholder_embeddings(dir, prefix, &format!("{param_prefix}/pretrained"))?;
    Ok((config, vocabs, embeddings))
}

pub(crate) fn placeholder_embeddings(dir: &Path, prefix: &str, param: &str) -> Result<Option<Embeddings>> {
    let name = format!("{prefix}pretrained");
    if !persist::has_vocab(dir, &name) {
        return Ok(None);
    }
    let vocab = persist::load_vocab(dir, &name)?;
    let saved = persist::saved_tensor(dir, param)?
        .ok_or_else(|| Error::Format(format!("missing parameter {param}")))?;
    Ok(Some(Embeddings {
        vocab,
        vectors: Tensor::zeros(saved.shape()),
    }))
}

/// Percentage of tokens whose predicted tag equals the gold tag.
pub(crate) fn accuracy_of(gold: &[Sentence], predicted: impl Fn(&Sentence) -> Vec<String>) -> Float {
    let (mut total, mut right) = (0usize, 0usize);
    for s in gold {
        let tags = predicted(s);
        total += s.len();
        right += s.tokens.iter().zip(&tags).filter(|(t, p)| &t.upos == *p).count();
    }
    if total == 0 {
        0.0
    } else {
        100.0 * right as Float / total as Float
    }
}

/// Trains a tagger; the epoch with the best `dev` accuracy is kept (the
/// training set stands in when `dev` is empty).
pub fn train_tagger(
    train: &[Sentence],
    dev: &[Sentence],
    config: &TaggerConfig,
    embeddings: Option<&Embeddings>,
) -> Result<(TaggerModel, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Empty("training treebank"));
    }
    let mut model = TaggerModel::new(config, train, embeddings)?;
    let train: Vec<&Sentence> = train.iter().filter(|s| !s.is_empty()).collect();
    let select: Vec<Sentence> = if dev.is_empty() {
        train.iter().map(|s| (*s).clone()).collect()
    } else {
        dev.to_vec()
    };
    let TaggerModel { store, net, .. } = &mut model;
    let probe = TaggerModel {
        config: config.clone(),
        store: ParamStore::new(),
        net: net.clone(),
    };
    let report = train_loop(
        store,
        train.len(),
        &config.train,
        |s, i, rng| probe.loss_and_grads(s, train[i], Some(rng)),
        |s| Ok(accuracy_of(&select, |x| tag_with(net, s, x).tags)),
    )?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::grad_check;

    pub(crate) fn toy() -> Vec<Sentence> {
        vec![
            Sentence::from_rows(&[("the", "DET", 2, "det"), ("dog", "NOUN", 3, "nsubj"), ("runs", "VERB", 0, "root")]),
            Sentence::from_rows(&[("a", "DET", 2, "det"), ("cat", "NOUN", 3, "nsubj"), ("sleeps", "VERB", 0, "root")]),
        ]
    }

    fn tiny_config() -> TaggerConfig {
        TaggerConfig {
            word_dim: 3,
            char_dim: 3,
            attn_dim: 2,
            hidden: 3,
            dropout: 0.0,
            ..TaggerConfig::desk()
        }
    }

    #[test]
    fn dims_follow_window_and_parts() {
        let emb = Embeddings {
            vocab: Vocab::build(&[UNKNOWN], ["the"]),
            vectors: Tensor::zeros(&[2, 50]),
        };
        let config = TaggerConfig {
            word_dim: 50,
            char_dim: 30,
            hidden: 4,
            ..TaggerConfig::default()
        };
        let m = TaggerModel::new(&config, &toy(), Some(&emb)).unwrap();
        assert_eq!(m.net.input_dim(&m.store), 390);
        assert_eq!(m.net.num_tags(), 17);
    }

    #[test]
    fn window_zero_is_identity_and_padding_fills_edges() {
        let mut config = tiny_config();
        config.window = 0;
        let m = TaggerModel::new(&config, &toy(), None).unwrap();
        let mut g = Graph::new(&m.store);
        let v = m.net.token_vector(&mut g, "dog");
        let w = m.net.windowed(&mut g, &[v]);
        assert_eq!(g.value(w[0]), g.value(v));

        config.window = 2;
        let m = TaggerModel::new(&config, &toy(), None).unwrap();
        let mut g = Graph::new(&m.store);
        let v = m.net.token_vector(&mut g, "dog");
        let w = m.net.windowed(&mut g, &[v]);
        let d = g.value(v).len();
        let pad = m.store.get(m.net.pad).data();
        let out = g.value(w[0]).data();
        assert_eq!(out.len(), 5 * d);
        for slot in [0, 1, 3, 4] {
            assert_eq!(&out[slot * d..(slot + 1) * d], pad);
        }
        assert_eq!(&out[2 * d..3 * d], g.value(v).data());
    }

    #[test]
    fn char_attention_cases() {
        let m = TaggerModel::new(&tiny_config(), &toy(), None).unwrap();
        let table = m.store.get(m.net.char_table);
        let row = |c: &str| table.row(m.net.vocabs.chars.get(c).unwrap()).to_vec();
        let mut g = Graph::new(&m.store);
        let single = m.net.char_attention(&mut g, "a");
        assert_eq!(g.value(single).data(), row("a").as_slice());
        let repeated = m.net.char_attention(&mut g, "ttt");
        for (x, y) in g.value(repeated).data().iter().zip(row("t")) {
            assert!((x - y).abs() < 1e-15);
        }
        let empty = m.net.char_attention(&mut g, "");
        assert_eq!(g.value(empty).data(), table.row(1));
        let unseen = m.net.char_attention(&mut g, "Z");
        assert_eq!(g.value(unseen).data(), table.row(0));
    }

    #[test]
    fn char_attention_hand_scores() {
        let mut m = TaggerModel::new(&tiny_config(), &toy(), None).unwrap();
        let net = m.net.clone();
        let (ia, ib) = (net.vocabs.chars.get("a").unwrap(), net.vocabs.chars.get("t").unwrap());
        let table = m.store.get_mut(net.char_table);
        table.row_mut(ia).copy_from_slice(&[1.0, 0.0, 0.0]);
        table.row_mut(ib).copy_from_slice(&[0.0, 1.0, 0.0]);
        *m.store.get_mut(net.attn_proj) = Tensor::new(vec![2, 3], vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        *m.store.get_mut(net.attn_bias) = Tensor::zeros(&[2]);
        *m.store.get_mut(net.attn_query) = Tensor::vector(vec![2.0 / (1.0 as Float).tanh(), 0.0]);
        let mut g = Graph::new(&m.store);
        let out = net.char_attention(&mut g, "at");
        let e2 = (2.0 as Float).exp();
        let expect = [e2 / (e2 + 1.0), 1.0 / (e2 + 1.0), 0.0];
        for (x, y) in g.value(out).data().iter().zip(expect) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn gradient_check_three_tokens() {
        let mut config = tiny_config();
        config.train.seed = 3;
        let mut m = TaggerModel::new(&config, &toy(), None).unwrap();
        // Move the zero-initialized tables off the origin.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for id in [m.net.word_table, m.net.transitions, m.net.emit_b] {
            let shape = m.store.get(id).shape().to_vec();
            *m.store.get_mut(id) = uniform(&shape, 0.5, &mut rng);
        }
        let s = toy()[0].clone();
        let probe = m.clone();
        let err = grad_check(
            &mut m.store,
            |st| probe.loss_and_grads(st, &s, NO_RNG).unwrap(),
            1e-5,
            12,
            0,
        );
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn overfits_one_sentence_and_is_deterministic() {
        let data = vec![toy()[0].clone()];
        let mut config = TaggerConfig::desk();
        config.train.epochs = 60;
        config.train.stop_at = Some(100.0);
        let (m, r) = train_tagger(&data, &[], &config, None).unwrap();
        assert_eq!(m.tag(&data[0]).tags, vec!["DET", "NOUN", "VERB"]);
        assert_eq!(r.best_score, 100.0);
        let (m2, _) = train_tagger(&data, &[], &config, None).unwrap();
        assert_eq!(m.store, m2.store);
        let t = m.tag(&data[0]);
        assert_eq!(t, m.tag(&data[0]));
        assert_eq!(t.emissions.len(), 3);
        assert_eq!(t.hidden.len(), 3);
    }

    #[test]
    fn rejects_empty_and_unknown_tags() {
        assert!(train_tagger(&[], &[], &TaggerConfig::desk(), None).is_err());
        let bad = vec![Sentence::from_rows(&[("x", "NOUNX", 0, "root")])];
        assert!(matches!(
            train_tagger(&bad, &[], &TaggerConfig::desk(), None),
            Err(Error::UnknownLabel { .. })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let emb = Embeddings::parse("the 0.5 0.25\ndog 1 -1\n").unwrap();
        let mut config = tiny_config();
        config.train.epochs = 2;
        let (m, r) = train_tagger(&toy(), &[], &config, Some(&emb)).unwrap();
        m.save(dir.path(), Some(&r)).unwrap();
        let back = TaggerModel::load(dir.path()).unwrap();
        assert_eq!(back.store, m.store);
        assert_eq!(back.config, m.config);
        for s in toy() {
            assert_eq!(back.tag(&s), m.tag(&s));
        }
    }
}
