//! Interpolated modified Kneser-Ney n-gram model, sentence ranking by
//! divergence from the training corpus, and lexicon matching.
//!
//! Probabilities are linear, log-probabilities are base 10. The predicted
//! vocabulary is every training type plus `</s>` and `<unk>`; `<s>` only
//! ever appears as context.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

const UNK_ID: u32 = 0;
const BOS_ID: u32 = 1;
const EOS_ID: u32 = 2;

/// Used for an order whose count-of-counts give a discount outside `(0, k)`.
pub const FALLBACK_DISCOUNTS: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Clone, Copy, Debug, Default)]
struct ContextStats {
    total: f64,
    // Continuations with adjusted count 1, 2, and 3 or more.
    n: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct NgramLM {
    order: usize,
    words: Vec<String>,
    ids: HashMap<String, u32>,
    /// `counts[n - 1]`: adjusted counts of n-grams.
    counts: Vec<HashMap<Vec<u32>, u64>>,
    /// `contexts[n - 1]`: stats of the (n-1)-word contexts of order-n grams.
    contexts: Vec<HashMap<Vec<u32>, ContextStats>>,
    discounts: Vec<[f64; 3]>,
    pruned: bool,
}

impl NgramLM {
    /// Trains on tokenized sentences. With `prune_singletons`, words seen
    /// once are replaced by `<unk>` before counting.
    pub fn train(corpus: &[Vec<String>], order: usize, prune_singletons: bool) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        if corpus.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for s in corpus {
            for w in s {
                if matches!(w.as_str(), BOS | EOS | UNK) {
                    continue;
                }
                *freq.entry(w).or_default() += 1;
            }
        }
        let mut kept: Vec<&str> = freq
            .iter()
            .filter(|&(_, &c)| !prune_singletons || c > 1)
            .map(|(w, _)| *w)
            .collect();
        kept.sort_unstable();
        let mut lm = Self::empty(order, kept.iter().copied(), prune_singletons);

        let mut raw: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
        for s in corpus {
            let mut padded = vec![BOS_ID];
            padded.extend(s.iter().map(|w| lm.word_id(w)));
            padded.push(EOS_ID);
            for end in 1..padded.len() {
                for n in 1..=order.min(end + 1) {
                    let g = &padded[end + 1 - n..=end];
                    *raw[n - 1].entry(g.to_vec()).or_default() += 1;
                }
            }
        }

        // Lower orders count distinct left extensions, except n-grams
        // pinned to the sentence start, which have none.
        let mut counts: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
        counts[order - 1] = raw[order - 1].clone();
        for n in (1..order).rev() {
            for (g, &c) in &raw[n - 1] {
                if g[0] == BOS_ID {
                    counts[n - 1].insert(g.clone(), c);
                }
            }
            for g in raw[n].keys() {
                if g[1] != BOS_ID {
                    *counts[n - 1].entry(g[1..].to_vec()).or_default() += 1;
                }
            }
        }
        lm.set_counts(counts);
        Ok(lm)
    }

    fn empty<'a>(order: usize, words: impl Iterator<Item = &'a str>, pruned: bool) -> Self {
        let mut lm = NgramLM {
            order,
            words: vec![],
            ids: HashMap::new(),
            counts: vec![],
            contexts: vec![],
            discounts: vec![],
            pruned,
        };
        for w in [UNK, BOS, EOS].into_iter().chain(words) {
            if !lm.ids.contains_key(w) {
                lm.ids.insert(w.to_string(), lm.words.len() as u32);
                lm.words.push(w.to_string());
            }
        }
        lm
    }

    fn set_counts(&mut self, counts: Vec<HashMap<Vec<u32>, u64>>) {
        self.discounts = counts.iter().map(estimate_discounts).collect();
        self.contexts = counts
            .iter()
            .map(|table| {
                let mut ctx: HashMap<Vec<u32>, ContextStats> = HashMap::new();
                for (g, &c) in table {
                    let st = ctx.entry(g[..g.len() - 1].to_vec()).or_default();
                    st.total += c as f64;
                    st.n[c.min(3) as usize - 1] += 1.0;
                }
                ctx
            })
            .collect();
        self.counts = counts;
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn pruned(&self) -> bool {
        self.pruned
    }

    /// `[D1, D2, D3+]` for n-grams of order `n` (1-based).
    pub fn discounts(&self, n: usize) -> [f64; 3] {
        self.discounts[n - 1]
    }

    /// Every type the model predicts, `</s>` and `<unk>` included.
    pub fn vocabulary(&self) -> Vec<&str> {
        self.words.iter().filter(|w| *w != BOS).map(String::as_str).collect()
    }

    fn id(&self, w: &str) -> u32 {
        self.ids.get(w).copied().unwrap_or(UNK_ID)
    }

    // Literal markers inside a sentence count as unknown words.
    fn word_id(&self, w: &str) -> u32 {
        match self.id(w) {
            BOS_ID | EOS_ID => UNK_ID,
            id => id,
        }
    }

    fn predicted(&self) -> usize {
        self.words.len() - 1
    }

    fn discount(&self, n: usize, c: u64) -> f64 {
        match c {
            0 => 0.0,
            c => self.discounts[n - 1][c.min(3) as usize - 1],
        }
    }

    fn prob_ids(&self, context: &[u32], w: u32) -> f64 {
        let n = context.len() + 1;
        let lower = if context.is_empty() {
            1.0 / self.predicted() as f64
        } else {
            self.prob_ids(&context[1..], w)
        };
        let Some(st) = self.contexts[n - 1].get(context) else {
            return lower;
        };
        let mut key = context.to_vec();
        key.push(w);
        let c = self.counts[n - 1].get(&key).copied().unwrap_or(0);
        let d = self.discounts[n - 1];
        let gamma = (d[0] * st.n[0] + d[1] * st.n[1] + d[2] * st.n[2]) / st.total;
        (c as f64 - self.discount(n, c)) / st.total + gamma * lower
    }

    /// `p(word | context)`. Only the last `order - 1` context words matter.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let ids: Vec<u32> = context.iter().map(|w| self.id(w)).collect();
        let keep = ids.len().min(self.order - 1);
        self.prob_ids(&ids[ids.len() - keep..], self.id(word))
    }

    /// Per-event log10 probabilities of `tokens` followed by `</s>`.
    pub fn token_logprobs<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut history = vec![BOS_ID];
        let mut out = Vec::with_capacity(tokens.len() + 1);
        for w in tokens.iter().map(|t| self.word_id(t.as_ref())).chain([EOS_ID]) {
            let keep = history.len().min(self.order - 1);
            out.push(self.prob_ids(&history[history.len() - keep..], w).log10());
            history.push(w);
        }
        out
    }

    /// Total log10 probability including the end-of-sentence event.
    pub fn sentence_logprob<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        self.token_logprobs(tokens).iter().sum()
    }

    /// Per-event perplexity over a corpus.
    pub fn perplexity(&self, corpus: &[Vec<String>]) -> f64 {
        let events: usize = corpus.iter().map(|s| s.len() + 1).sum();
        let total: f64 = corpus.iter().map(|s| self.sentence_logprob(s)).sum();
        10f64.powf(-total / events.max(1) as f64)
    }

    /// Every context with at least one observed continuation, shortest
    /// first; the empty context comes first.
    pub fn contexts(&self) -> Vec<Vec<String>> {
        let mut out = vec![];
        for table in &self.contexts {
            let mut ctx: Vec<Vec<String>> = table
                .keys()
                .map(|c| c.iter().map(|&i| self.words[i as usize].clone()).collect())
                .collect();
            ctx.sort();
            out.extend(ctx);
        }
        out
    }

    /// Plain-text dump of the adjusted counts; [`NgramLM::from_text`]
    /// rebuilds an identical model.
    pub fn to_text(&self) -> String {
        let mut s = format!("order\t{}\npruned\t{}\n", self.order, self.pruned);
        for w in &self.words[3..] {
            let _ = writeln!(s, "word\t{w}");
        }
        for (i, table) in self.counts.iter().enumerate() {
            let mut rows: Vec<(String, u64)> = table
                .iter()
                .map(|(g, &c)| {
                    let words: Vec<&str> = g.iter().map(|&x| self.words[x as usize].as_str()).collect();
                    (words.join(" "), c)
                })
                .collect();
            rows.sort();
            for (g, c) in rows {
                let _ = writeln!(s, "{}\t{c}\t{g}", i + 1);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<String> {
            match lines.next() {
                Some((i, l)) => match l.split_once('\t') {
                    Some((k, v)) if k == key => Ok(v.to_string()),
                    _ => Err(bad(i, &format!("expected {key}"))),
                },
                None => Err(Error::Format("truncated language model".into())),
            }
        };
        let order: usize = header("order")?
            .parse()
            .map_err(|_| Error::Format("bad n-gram order".into()))?;
        let pruned = header("pruned")? == "true";
        if order == 0 {
            return Err(Error::Format("n-gram order must be at least 1".into()));
        }
        let mut words = vec![];
        let mut grams = vec![];
        for (i, l) in lines {
            let fields: Vec<&str> = l.split('\t').collect();
            match fields.as_slice() {
                ["word", w] => words.push(*w),
                [n, c, g] => {
                    let n: usize = n.parse().map_err(|_| bad(i, "bad order"))?;
                    let c: u64 = c.parse().map_err(|_| bad(i, "bad count"))?;
                    let g: Vec<&str> = g.split(' ').collect();
                    if n == 0 || n > order || g.len() != n || c == 0 {
                        return Err(bad(i, "malformed n-gram row"));
                    }
                    grams.push((g, c));
                }
                _ => return Err(bad(i, "unrecognized line")),
            }
        }
        let mut lm = Self::empty(order, words.into_iter(), pruned);
        let mut counts: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
        for (g, c) in grams {
            let ids: Vec<u32> = g
                .iter()
                .map(|w| {
                    lm.ids
                        .get(*w)
                        .copied()
                        .ok_or_else(|| Error::Format(format!("n-gram word {w:?} is not in the vocabulary")))
                })
                .collect::<Result<_>>()?;
            counts[ids.len() - 1].insert(ids, c);
        }
        lm.set_counts(counts);
        Ok(lm)
    }
}

/// `[D1, D2, D3+]` from the count-of-counts of one order.
fn estimate_discounts(table: &HashMap<Vec<u32>, u64>) -> [f64; 3] {
    let mut t = [0f64; 5];
    for &c in table.values() {
        if (1..=4).contains(&c) {
            t[c as usize] += 1.0;
        }
    }
    let y = t[1] / (t[1] + 2.0 * t[2]);
    let d = [
        1.0 - 2.0 * y * t[2] / t[1],
        2.0 - 3.0 * y * t[3] / t[2],
        3.0 - 4.0 * y * t[4] / t[3],
    ];
    let ok = d.iter().enumerate().all(|(k, &x)| x.is_finite() && x > 0.0 && x < (k + 1) as f64);
    if ok {
        d
    } else {
        FALLBACK_DISCOUNTS
    }
}

/// Divisor of the length-normalized score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Tokens plus the end-of-sentence event.
    #[default]
    WithEnd,
    Tokens,
}

impl Normalization {
    fn divisor(self, len: usize) -> f64 {
        match self {
            Normalization::WithEnd => (len + 1) as f64,
            Normalization::Tokens => len.max(1) as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRecord {
    pub text: String,
    pub tokens: usize,
    pub logprob: f64,
    pub normalized: f64,
    pub hits: Vec<String>,
}

impl SelectionRecord {
    /// Tab-separated row: rank, normalized, total, length, hits, sentence.
    pub fn to_row(&self, rank: usize) -> String {
        let hits = if self.hits.is_empty() {
            "_".to_string()
        } else {
            self.hits.join(",")
        };
        format!(
            "{rank}\t{:.6}\t{:.6}\t{}\t{hits}\t{}",
            self.normalized, self.logprob, self.tokens, self.text
        )
    }
}

/// Keeps sentences whose length lies within `bounds` (inclusive) and sorts
/// them by normalized log10 likelihood, lowest first. Ties keep input order.
pub fn rank_by_divergence(
    lm: &NgramLM,
    sentences: &[Vec<String>],
    bounds: (usize, usize),
    norm: Normalization,
    lexicon: &[String],
) -> Vec<SelectionRecord> {
    let (lo, hi) = bounds;
    let kept: Vec<&Vec<String>> = sentences.iter().filter(|s| (lo..=hi).contains(&s.len())).collect();
    let hits = match_lexicon(&kept, lexicon);
    let mut out: Vec<SelectionRecord> = kept
        .iter()
        .zip(hits)
        .map(|(s, hits)| {
            let logprob = lm.sentence_logprob(s);
            SelectionRecord {
                text: s.join(" "),
                tokens: s.len(),
                logprob,
                normalized: logprob / norm.divisor(s.len()),
                hits,
            }
        })
        .collect();
    out.sort_by(|a, b| a.normalized.total_cmp(&b.normalized));
    out
}

/// Lexicon terms found in each sentence, compared case-insensitively.
/// Multiword terms must match a contiguous run of tokens. Hits come in
/// sorted term order, each once.
pub fn match_lexicon<S: AsRef<[String]>>(sentences: &[S], lexicon: &[String]) -> Vec<Vec<String>> {
    let terms: BTreeSet<Vec<String>> = lexicon
        .iter()
        .map(|t| t.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>())
        .filter(|t| !t.is_empty())
        .collect();
    sentences
        .iter()
        .map(|s| {
            let lower: Vec<String> = s.as_ref().iter().map(|w| w.to_lowercase()).collect();
            terms
                .iter()
                .filter(|t| lower.windows(t.len()).any(|w| w == t.as_slice()))
                .map(|t| t.join(" "))
                .collect()
        })
        .collect()
}

/// Splits lines on whitespace, dropping blank lines.
pub fn read_corpus(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}
