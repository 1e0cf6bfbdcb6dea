use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::decode::{decode_greedy, decode_mst_single_root};
use crate::config::{ranged, Configurable};
use crate::error::{Error, Result};
use crate::eval::attachment_scores;
use crate::numcore::{
    argmax, glorot_uniform, uniform, BiLstm, Float, Gradients, Graph, LstmVariant, ParamId, ParamStore, Tensor, Var,
};
use crate::persist;
use crate::tagger::{placeholder_embeddings, NO_RNG};
use crate::train::{train_loop, TrainOptions, TrainReport};
use crate::treebank::{validate_heads, Sentence};
use crate::vocab::{lookup_with_lowercase, Embeddings, Vocab, UNKNOWN};

pub const ROOT: &str = "<root>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Decoder {
    #[default]
    Greedy,
    Mst,
}

impl FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Decoder::Greedy),
            "mst" => Ok(Decoder::Mst),
            _ => Err(Error::InvalidArgument(format!("decoder must be greedy or mst, found {s:?}"))),
        }
    }
}

impl std::fmt::Display for Decoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decoder::Greedy => "greedy",
            Decoder::Mst => "mst",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParserConfig {
    pub word_dim: usize,
    pub tag_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub arc_dim: usize,
    pub rel_dim: usize,
    pub dropout: Float,
    /// Negative-side slope of the MLP activation.
    pub slope: Float,
    pub decoder: Decoder,
    pub train: TrainOptions,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            word_dim: 100,
            tag_dim: 100,
            hidden: 400,
            layers: 3,
            arc_dim: 500,
            rel_dim: 100,
            dropout: 0.33,
            slope: 0.1,
            decoder: Decoder::Greedy,
            train: TrainOptions::default(),
        }
    }
}

impl ParserConfig {
    /// One small layer; for tests and synthetic data.
    pub fn desk() -> Self {
        ParserConfig {
            word_dim: 16,
            tag_dim: 8,
            hidden: 32,
            layers: 1,
            arc_dim: 32,
            rel_dim: 16,
            dropout: 0.0,
            train: TrainOptions {
                learning_rate: 0.05,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

impl Configurable for ParserConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "word_dim" => self.word_dim = ranged(key, value, 0, 4096)?,
            "tag_dim" => self.tag_dim = ranged(key, value, 0, 4096)?,
            "hidden" => self.hidden = ranged(key, value, 1, 4096)?,
            "layers" => self.layers = ranged(key, value, 1, 8)?,
            "arc_dim" => self.arc_dim = ranged(key, value, 1, 4096)?,
            "rel_dim" => self.rel_dim = ranged(key, value, 1, 4096)?,
            "dropout" => self.dropout = ranged(key, value, 0.0, 0.95)?,
            "slope" => self.slope = ranged(key, value, 0.0, 1.0)?,
            "decoder" => self.decoder = value.parse()?,
            _ => return self.train.set(key, value),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("word_dim", self.word_dim.to_string()),
            ("tag_dim", self.tag_dim.to_string()),
            ("hidden", self.hidden.to_string()),
            ("layers", self.layers.to_string()),
            ("arc_dim", self.arc_dim.to_string()),
            ("rel_dim", self.rel_dim.to_string()),
            ("dropout", self.dropout.to_string()),
            ("slope", self.slope.to_string()),
            ("decoder", self.decoder.to_string()),
        ];
        v.extend(self.train.entries());
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParserVocabs {
    pub words: Vocab,
    pub tags: Vocab,
    pub rels: Vocab,
}

impl ParserVocabs {
    pub fn build(sentences: &[Sentence]) -> Self {
        let tokens = || sentences.iter().flat_map(|s| &s.tokens);
        let tags: BTreeSet<&str> = tokens().map(|t| t.upos.as_str()).collect();
        let rels: BTreeSet<&str> = tokens().map(|t| t.deprel.as_str()).collect();
        ParserVocabs {
            words: Vocab::build(&[UNKNOWN, ROOT], tokens().map(|t| t.form.as_str())),
            tags: Vocab::build(&[UNKNOWN, ROOT], tags),
            rels: Vocab::build(&[], rels),
        }
    }
}

/// `leaky_relu(W x + b)`.
#[derive(Clone, Copy, Debug)]
pub struct Mlp {
    pub w: ParamId,
    pub b: ParamId,
}

impl Mlp {
    fn new<R: Rng>(store: &mut ParamStore, name: &str, out: usize, input: usize, rng: &mut R) -> Self {
        Mlp {
            w: store.add(format!("{name}/w"), glorot_uniform(out, input, rng), true),
            b: store.add(format!("{name}/b"), Tensor::zeros(&[out]), true),
        }
    }

    pub fn out_dim(&self, store: &ParamStore) -> usize {
        store.get(self.b).len()
    }

    fn apply(&self, g: &mut Graph, x: Var, slope: Float) -> Var {
        let (w, b) = (g.param(self.w), g.param(self.b));
        let z = g.matvec(w, x);
        let z = g.add(z, b);
        g.leaky_relu(z, slope)
    }
}

/// Per-position MLP outputs, root position first.
#[derive(Clone, Debug)]
pub struct Features {
    pub arc_dep: Vec<Var>,
    pub arc_head: Vec<Var>,
    pub rel_dep: Vec<Var>,
    pub rel_head: Vec<Var>,
}

impl Features {
    /// Position-wise sum of two feature sets.
    pub fn add(&self, g: &mut Graph, other: &Features) -> Features {
        let mut sum = |a: &[Var], b: &[Var]| a.iter().zip(b).map(|(&x, &y)| g.add(x, y)).collect();
        Features {
            arc_dep: sum(&self.arc_dep, &other.arc_dep),
            arc_head: sum(&self.arc_head, &other.arc_head),
            rel_dep: sum(&self.rel_dep, &other.rel_dep),
            rel_head: sum(&self.rel_head, &other.rel_head),
        }
    }

    fn map(&self, mut f: impl FnMut(Var) -> Var) -> Features {
        let mut m = |xs: &[Var]| xs.iter().map(|&x| f(x)).collect();
        Features {
            arc_dep: m(&self.arc_dep),
            arc_head: m(&self.arc_head),
            rel_dep: m(&self.rel_dep),
            rel_head: m(&self.rel_head),
        }
    }
}

/// Output of a parse; one head and label per token.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseResult {
    pub heads: Vec<usize>,
    pub deprels: Vec<String>,
    /// `(n + 1) x (n + 1)`, dependents by row, heads by column; the
    /// diagonal and row 0 are `-inf`.
    pub arc_scores: Tensor,
    /// Whether `heads` forms a tree.
    pub tree: bool,
}

/// Parser parameters as ids into a shared [`ParamStore`].
#[derive(Clone, Debug)]
pub struct ParserNet {
    pub vocabs: ParserVocabs,
    pub pretrained: Option<(Vocab, ParamId)>,
    pub dropout: Float,
    pub slope: Float,
    /// Width of per-position features appended by the caller.
    pub extra_dim: usize,
    pub word_table: ParamId,
    pub tag_table: ParamId,
    pub lstm: BiLstm,
    pub arc_dep: Mlp,
    pub arc_head: Mlp,
    pub rel_dep: Mlp,
    pub rel_head: Mlp,
    /// `(arc_dim + 1) x arc_dim`.
    pub u_arc: ParamId,
    /// `rels x (rel_dim + 1) x (rel_dim + 1)`.
    pub u_rel: ParamId,
}

impl ParserNet {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        config: &ParserConfig,
        vocabs: ParserVocabs,
        pretrained: Option<&Embeddings>,
        extra_dim: usize,
        rng: &mut R,
    ) -> Self {
        let pretrained = pretrained.map(|e| {
            let id = store.add(format!("{prefix}/pretrained"), e.vectors.clone(), false);
            (e.vocab.clone(), id)
        });
        let pre_dim = pretrained.as_ref().map_or(0, |(_, id)| store.get(*id).cols());
        let bound = |d: usize| (3.0 / d.max(1) as Float).sqrt();
        let word_table = store.add(
            format!("{prefix}/words"),
            uniform(&[vocabs.words.len(), config.word_dim], bound(config.word_dim), rng),
            true,
        );
        let tag_table = store.add(
            format!("{prefix}/tags"),
            uniform(&[vocabs.tags.len(), config.tag_dim], bound(config.tag_dim), rng),
            true,
        );
        let input_dim = pre_dim + config.word_dim + config.tag_dim + extra_dim;
        let lstm = BiLstm::new(
            store,
            &format!("{prefix}/lstm"),
            LstmVariant::CoupledInputForget,
            input_dim,
            config.hidden,
            config.layers,
            rng,
        );
        let r = 2 * config.hidden;
        let arc_dep = Mlp::new(store, &format!("{prefix}/mlp/arc_dep"), config.arc_dim, r, rng);
        let arc_head = Mlp::new(store, &format!("{prefix}/mlp/arc_head"), config.arc_dim, r, rng);
        let rel_dep = Mlp::new(store, &format!("{prefix}/mlp/rel_dep"), config.rel_dim, r, rng);
        let rel_head = Mlp::new(store, &format!("{prefix}/mlp/rel_head"), config.rel_dim, r, rng);
        let (da, dr, l) = (config.arc_dim, config.rel_dim, vocabs.rels.len());
        let u_arc = store.add(
            format!("{prefix}/u_arc"),
            uniform(&[da + 1, da], (6.0 / (2 * da + 1) as Float).sqrt(), rng),
            true,
        );
        let u_rel = store.add(
            format!("{prefix}/u_rel"),
            uniform(&[l, dr + 1, dr + 1], (6.0 / (2 * dr + 2) as Float).sqrt(), rng),
            true,
        );
        ParserNet {
            vocabs,
            pretrained,
            dropout: config.dropout,
            slope: config.slope,
            extra_dim,
            word_table,
            tag_table,
            lstm,
            arc_dep,
            arc_head,
            rel_dep,
            rel_head,
            u_arc,
            u_rel,
        }
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        self.pretrained.as_ref().map_or(0, |(_, id)| store.get(*id).cols())
            + store.get(self.word_table).cols()
            + store.get(self.tag_table).cols()
            + self.extra_dim
    }

    pub fn hidden(&self) -> usize {
        self.lstm.output_dim() / 2
    }

    pub fn mlps(&self) -> [Mlp; 4] {
        [self.arc_dep, self.arc_head, self.rel_dep, self.rel_head]
    }

    pub fn input_params(&self) -> Vec<ParamId> {
        let mut v: Vec<ParamId> = self.pretrained.iter().map(|(_, id)| *id).collect();
        v.extend([self.word_table, self.tag_table]);
        v
    }

    /// Bi-LSTM and MLP parameters.
    pub fn feature_params(&self) -> Vec<ParamId> {
        let mut v = self.lstm.params();
        for m in self.mlps() {
            v.extend([m.w, m.b]);
        }
        v
    }

    /// Input vectors for the root position followed by each token.
    pub fn inputs(&self, g: &mut Graph, forms: &[&str], tags: &[&str], extra: Option<&[Var]>) -> Vec<Var> {
        let root = std::iter::once((ROOT, ROOT));
        root.chain(forms.iter().copied().zip(tags.iter().copied()))
            .enumerate()
            .map(|(i, (form, tag))| {
                let mut parts = Vec::with_capacity(4);
                if let Some((vocab, id)) = &self.pretrained {
                    let row = if i == 0 { 0 } else { lookup_with_lowercase(vocab, form, 0) };
                    parts.push(g.lookup(*id, row));
                }
                let word = if i == 0 { 1 } else { lookup_with_lowercase(&self.vocabs.words, form, 0) };
                parts.push(g.lookup(self.word_table, word));
                let tag = if i == 0 { 1 } else { self.vocabs.tags.get_or(tag, 0) };
                parts.push(g.lookup(self.tag_table, tag));
                if let Some(x) = extra {
                    parts.push(x[i]);
                }
                g.concat(&parts)
            })
            .collect()
    }

    /// Bi-LSTM outputs, root position first.
    pub fn states<R: Rng>(
        &self,
        g: &mut Graph,
        forms: &[&str],
        tags: &[&str],
        extra: Option<&[Var]>,
        mut rng: Option<&mut R>,
    ) -> Vec<Var> {
        let xs: Vec<Var> = self
            .inputs(g, forms, tags, extra)
            .into_iter()
            .map(|x| g.dropout(x, self.dropout, rng.as_deref_mut()))
            .collect();
        self.lstm.encode(g, &xs, self.dropout, rng)
    }

    /// The four MLP heads applied to every position (no dropout).
    pub fn mlp_features(&self, g: &mut Graph, states: &[Var]) -> Features {
        let mut run = |m: Mlp| states.iter().map(|&r| m.apply(g, r, self.slope)).collect();
        Features {
            arc_dep: run(self.arc_dep),
            arc_head: run(self.arc_head),
            rel_dep: run(self.rel_dep),
            rel_head: run(self.rel_head),
        }
    }

    pub fn dropout_features<R: Rng>(&self, g: &mut Graph, f: &Features, mut rng: Option<&mut R>) -> Features {
        f.map(|x| g.dropout(x, self.dropout, rng.as_deref_mut()))
    }

    /// `S[d][h] = [arc_dep(d); 1]ᵀ U_arc arc_head(h)` as an `(n+1) x (n+1)`
    /// node. Diagonal entries are left in; callers exclude them.
    pub fn arc_scores(&self, g: &mut Graph, f: &Features) -> Var {
        let one = g.input(vec![1.0]);
        let dep: Vec<Var> = f.arc_dep.iter().map(|&x| g.concat(&[x, one])).collect();
        let dep = g.stack_rows(&dep);
        let head = g.stack_rows(&f.arc_head);
        let u = g.param(self.u_arc);
        let left = g.matmul(dep, u);
        g.matmul_t(left, head)
    }

    /// Label scores for the arc `head -> dep`, both sides extended by 1.
    pub fn label_scores(&self, g: &mut Graph, f: &Features, dep: usize, head: usize) -> Var {
        let one = g.input(vec![1.0]);
        let u = g.concat(&[f.rel_dep[dep], one]);
        let v = g.concat(&[f.rel_head[head], one]);
        let w = g.param(self.u_rel);
        g.bilinear(u, w, v)
    }

    /// Mean over tokens of head cross-entropy plus label cross-entropy
    /// under the gold head.
    pub fn loss(&self, g: &mut Graph, f: &Features, heads: &[usize], rels: &[usize]) -> Var {
        let s = self.arc_scores(g, f);
        let mut terms = Vec::with_capacity(2 * heads.len());
        for (i, (&h, &r)) in heads.iter().zip(rels).enumerate() {
            let d = i + 1;
            let row = g.row(s, d);
            terms.push(g.cross_entropy(row, h, Some(d)));
            let ls = self.label_scores(g, f, d, h);
            terms.push(g.cross_entropy(ls, r, None));
        }
        let total = g.sum(&terms);
        g.affine(total, 1.0 / heads.len() as Float, 0.0)
    }

    /// Decodes heads, then labels under the decoded heads.
    pub fn decode(&self, g: &mut Graph, f: &Features, decoder: Decoder) -> ParseResult {
        let s = self.arc_scores(g, f);
        let mut scores = g.value(s).clone();
        let n = scores.rows() - 1;
        for h in 0..=n {
            scores.set(0, h, Float::NEG_INFINITY);
            scores.set(h, h, Float::NEG_INFINITY);
        }
        let (heads, tree) = match decoder {
            Decoder::Greedy => decode_greedy(&scores),
            Decoder::Mst => (decode_mst_single_root(&scores), true),
        };
        let deprels = self.labels(g, f, &heads);
        ParseResult {
            heads,
            deprels,
            arc_scores: scores,
            tree,
        }
    }

    pub fn labels(&self, g: &mut Graph, f: &Features, heads: &[usize]) -> Vec<String> {
        heads
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let ls = self.label_scores(g, f, i + 1, h);
                self.vocabs.rels.item(argmax(g.value(ls).data())).to_string()
            })
            .collect()
    }

    pub fn gold(&self, sentence: &Sentence) -> Result<(Vec<usize>, Vec<usize>)> {
        let rels = sentence
            .tokens
            .iter()
            .map(|t| {
                self.vocabs.rels.get(&t.deprel).ok_or_else(|| Error::UnknownLabel {
                    label: t.deprel.clone(),
                    inventory: "parser label set",
                })
            })
            .collect::<Result<_>>()?;
        Ok((sentence.heads(), rels))
    }
}

#[derive(Clone, Debug)]
pub struct ParserModel {
    pub config: ParserConfig,
    pub store: ParamStore,
    pub net: ParserNet,
}

pub(crate) const NET: &str = "parser";

impl ParserModel {
    pub fn new(config: &ParserConfig, train: &[Sentence], embeddings: Option<&Embeddings>) -> Self {
        Self::with_vocabs(config, ParserVocabs::build(train), embeddings)
    }

    pub fn with_vocabs(config: &ParserConfig, vocabs: ParserVocabs, embeddings: Option<&Embeddings>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
        let mut store = ParamStore::new();
        let net = ParserNet::new(&mut store, NET, config, vocabs, embeddings, 0, &mut rng);
        ParserModel {
            config: config.clone(),
            store,
            net,
        }
    }

    /// Arc score matrix for the given words and tags.
    pub fn score_arcs(&self, forms: &[&str], tags: &[&str]) -> Result<Tensor> {
        if forms.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        let mut g = Graph::new(&self.store);
        let states = self.net.states(&mut g, forms, tags, None, NO_RNG);
        let f = self.net.mlp_features(&mut g, &states);
        Ok(self.net.decode(&mut g, &f, Decoder::Greedy).arc_scores)
    }

    /// Parses with the sentence's own POS tags.
    pub fn parse(&self, sentence: &Sentence, decoder: Decoder) -> ParseResult {
        parse_with(&self.net, &self.store, sentence, decoder)
    }

    /// Copies of `sentences` with predicted trees. Greedy outputs that are
    /// not trees are re-decoded with the spanning-tree decoder.
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
        parser_loss(&self.net, store, sentence, rng)
    }

    pub fn save(&self, dir: &Path, report: Option<&TrainReport>) -> Result<()> {
        persist::save_store(dir, &self.store)?;
        save_parser_files(dir, "", &self.config, &self.net)?;
        if let Some(r) = report {
            persist::save_text(dir, persist::BEST_EPOCH, &format!("{}\n", r.best_epoch))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let (config, vocabs, embeddings) = load_parser_files(dir, "", NET)?;
        let mut model = Self::with_vocabs(&config, vocabs, embeddings.as_ref());
        persist::load_store(dir, &mut model.store)?;
        Ok(model)
    }
}

pub(crate) fn parser_loss<R: Rng>(
    net: &ParserNet,
    store: &ParamStore,
    sentence: &Sentence,
    mut rng: Option<&mut R>,
) -> Result<(Float, Gradients)> {
    let (heads, rels) = net.gold(sentence)?;
    let mut g = Graph::new(store);
    let states = net.states(&mut g, &sentence.forms(), &sentence.tags(), None, rng.as_deref_mut());
    let f = net.mlp_features(&mut g, &states);
    let f = net.dropout_features(&mut g, &f, rng);
    let l = net.loss(&mut g, &f, &heads, &rels);
    g.check_finite()?;
    Ok((g.scalar(l), g.backward(l)))
}

pub(crate) fn parse_with(net: &ParserNet, store: &ParamStore, sentence: &Sentence, decoder: Decoder) -> ParseResult {
    let mut g = Graph::new(store);
    let states = net.states(&mut g, &sentence.forms(), &sentence.tags(), None, NO_RNG);
    let f = net.mlp_features(&mut g, &states);
    net.decode(&mut g, &f, decoder)
}

pub(crate) fn save_parser_files(dir: &Path, prefix: &str, config: &ParserConfig, net: &ParserNet) -> Result<()> {
    persist::save_text(dir, &format!("{prefix}{}", persist::CONFIG), &config.to_text())?;
    persist::save_vocab(dir, &format!("{prefix}words"), &net.vocabs.words)?;
    persist::save_vocab(dir, &format!("{prefix}tags"), &net.vocabs.tags)?;
    persist::save_vocab(dir, &format!("{prefix}rels"), &net.vocabs.rels)?;
    if let Some((vocab, _)) = &net.pretrained {
        persist::save_vocab(dir, &format!("{prefix}pretrained"), vocab)?;
    }
    Ok(())
}

pub(crate) fn load_parser_files(
    dir: &Path,
    prefix: &str,
    param_prefix: &str,
) -> Result<(ParserConfig, ParserVocabs, Option<Embeddings>)> {
    let mut config = ParserConfig::default();
    config.apply(&persist::load_pairs(dir, &format!("{prefix}{}", persist::CONFIG))?)?;
    let vocabs = ParserVocabs {
        words: persist::load_vocab(dir, &format!("{prefix}words"))?,
        tags: persist::load_vocab(dir, &format!("{prefix}tags"))?,
        rels: persist::load_vocab(dir, &format!("{prefix}rels"))?,
    };
    let embeddings = placeholder_embeddings(dir, prefix, &format!("{param_prefix}/pretrained"))?;
    Ok((config, vocabs, embeddings))
}

/// Rejects empty treebanks and sentences whose heads are out of range or
/// cyclic.
pub(crate) fn check_treebank(train: &[Sentence]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Empty("training treebank"));
    }
    for (i, s) in train.iter().enumerate() {
        if let Some(v) = validate_heads(&s.heads()).into_iter().find(|v| !v.is_warning()) {
            return Err(Error::InvalidArgument(format!("sentence {}: {}", i + 1, v.message)));
        }
    }
    Ok(())
}

/// Trains a parser; the epoch with the best dev UAS (greedy decoding) is
/// kept, with the training set standing in for an empty `dev`.
pub fn train_parser(
    train: &[Sentence],
    dev: &[Sentence],
    config: &ParserConfig,
    embeddings: Option<&Embeddings>,
) -> Result<(ParserModel, TrainReport)> {
    check_treebank(train)?;
    let mut model = ParserModel::new(config, train, embeddings);
    let train: Vec<&Sentence> = train.iter().filter(|s| !s.is_empty()).collect();
    let select: Vec<Sentence> = if dev.is_empty() {
        train.iter().map(|s| (*s).clone()).collect()
    } else {
        dev.to_vec()
    };
    let ParserModel { store, net, .. } = &mut model;
    let net = &*net;
    let report = train_loop(
        store,
        train.len(),
        &config.train,
        |s, i, rng| parser_loss(net, s, train[i], Some(rng)),
        |s| dev_uas(&select, config.decoder, |x, d| parse_with(net, s, x, d)),
    )?;
    Ok((model, report))
}

/// UAS over `dev` with punctuation, repairing non-trees the way
/// [`ParserModel::parse_all`] does.
pub(crate) fn dev_uas(
    dev: &[Sentence],
    decoder: Decoder,
    parse: impl Fn(&Sentence, Decoder) -> ParseResult,
) -> Result<Float> {
    let predicted: Vec<Sentence> = dev
        .iter()
        .map(|s| {
            let mut r = parse(s, decoder);
            if !r.tree {
                r = parse(s, Decoder::Mst);
            }
            s.with_parse(&r.heads, &r.deprels)
        })
        .collect();
    Ok(attachment_scores(dev, &predicted, true)?.uas())
}
