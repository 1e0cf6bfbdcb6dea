//! Attachment scores, tagging accuracy, agreement, per-category breakdown,
//! jackknifing and cross-fold validation.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numcore::Float;
use crate::treebank::Sentence;

pub const PUNCT: &str = "PUNCT";
pub const OTHERS: &str = "Others";

/// Token counts behind UAS, LAS and tagging accuracy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScoreReport {
    pub tokens: usize,
    pub correct_heads: usize,
    pub correct_labeled: usize,
    pub correct_tags: usize,
}

fn pct(k: usize, n: usize) -> Float {
    if n == 0 {
        0.0
    } else {
        100.0 * k as Float / n as Float
    }
}

impl ScoreReport {
    pub fn uas(&self) -> Float {
        pct(self.correct_heads, self.tokens)
    }

    pub fn las(&self) -> Float {
        pct(self.correct_labeled, self.tokens)
    }

    pub fn tag_accuracy(&self) -> Float {
        pct(self.correct_tags, self.tokens)
    }

    pub fn merge(&mut self, other: &ScoreReport) {
        self.tokens += other.tokens;
        self.correct_heads += other.correct_heads;
        self.correct_labeled += other.correct_labeled;
        self.correct_tags += other.correct_tags;
    }

    fn count(gold: &Sentence, pred: &Sentence, include_punct: bool) -> Self {
        let mut r = ScoreReport::default();
        for (g, p) in gold.tokens.iter().zip(&pred.tokens) {
            if !include_punct && g.upos == PUNCT {
                continue;
            }
            r.tokens += 1;
            r.correct_tags += usize::from(g.upos == p.upos);
            if g.head == p.head {
                r.correct_heads += 1;
                r.correct_labeled += usize::from(g.deprel == p.deprel);
            }
        }
        r
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tokens {}  UAS {:.2}  LAS {:.2}  POS {:.2}",
            self.tokens,
            round2(self.uas()),
            round2(self.las()),
            round2(self.tag_accuracy())
        )
    }
}

/// Rounds to two decimals, halves away from zero. A tolerance of 1e-9
/// absorbs binary representation error (0.125 * 100 may land just below
/// 12.5).
pub fn round2(x: Float) -> Float {
    let y = x * 100.0;
    (y.abs() + 0.5 + 1e-9).floor().copysign(y) / 100.0
}

fn aligned(gold: &[Sentence], pred: &[Sentence]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment {
            index: gold.len().min(pred.len()),
            msg: format!("{} gold sentences but {} predicted", gold.len(), pred.len()),
        });
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Alignment {
                index: i + 1,
                msg: format!("gold has {} tokens, predicted has {}", g.len(), p.len()),
            });
        }
    }
    Ok(())
}

/// Counts over all aligned tokens; tokens tagged `PUNCT` in the gold data
/// are skipped unless `include_punct`.
pub fn attachment_scores(gold: &[Sentence], predicted: &[Sentence], include_punct: bool) -> Result<ScoreReport> {
    aligned(gold, predicted)?;
    let mut total = ScoreReport::default();
    for (g, p) in gold.iter().zip(predicted) {
        total.merge(&ScoreReport::count(g, p, include_punct));
    }
    Ok(total)
}

pub fn tagging_accuracy(gold: &[Sentence], predicted: &[Sentence]) -> Result<Float> {
    Ok(attachment_scores(gold, predicted, true)?.tag_accuracy())
}

/// Share of the baseline's error removed by the improved system, in
/// percent, rounded to two decimals.
pub fn relative_error_reduction(baseline: Float, improved: Float) -> Result<Float> {
    for v in [baseline, improved] {
        if !(0.0..=100.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{v} is not a percentage")));
        }
    }
    if baseline >= 100.0 {
        return Err(Error::InvalidArgument("baseline has no error to reduce".into()));
    }
    let before = 100.0 - baseline;
    let after = 100.0 - improved;
    Ok(round2((before - after) / before * 100.0))
}

/// Agreement of `b` with `a`, treating `a` as gold:
/// `(tag accuracy, UAS, LAS)`.
pub fn inter_annotator_agreement(a: &[Sentence], b: &[Sentence]) -> Result<(Float, Float, Float)> {
    let r = attachment_scores(a, b, true)?;
    Ok((r.tag_accuracy(), r.uas(), r.las()))
}

/// Scores per grammar category. A sentence counts towards every category
/// it carries (only its first with `primary_only`); sentences without
/// categories are grouped under [`OTHERS`].
pub fn per_category_scores(
    gold: &[Sentence],
    predicted: &[Sentence],
    include_punct: bool,
    primary_only: bool,
) -> Result<BTreeMap<String, ScoreReport>> {
    aligned(gold, predicted)?;
    let mut table: BTreeMap<String, ScoreReport> = BTreeMap::new();
    for (g, p) in gold.iter().zip(predicted) {
        let r = ScoreReport::count(g, p, include_punct);
        let cats: Vec<&str> = if g.categories.is_empty() {
            vec![OTHERS]
        } else if primary_only {
            vec![g.categories[0].as_str()]
        } else {
            g.categories.iter().map(String::as_str).collect()
        };
        for c in cats {
            table.entry(c.to_string()).or_default().merge(&r);
        }
    }
    Ok(table)
}

/// Assigns `0..n` to `k` folds after a seeded shuffle; each fold keeps
/// ascending order and sizes differ by at most one.
pub fn fold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("{k} folds for {n} sentences")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (j, i) in order.into_iter().enumerate() {
        folds[j % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    for &i in fold {
        held[i] = true;
    }
    (0..n).filter(|&i| !held[i]).collect()
}

fn pick(items: &[Sentence], idx: &[usize]) -> Vec<Sentence> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// Treebank with automatically predicted tags; `gold_tags` keeps the
/// originals.
#[derive(Clone, Debug, PartialEq)]
pub struct Jackknifed {
    pub sentences: Vec<Sentence>,
    pub gold_tags: Vec<Vec<String>>,
    pub folds: Vec<Vec<usize>>,
}

impl Jackknifed {
    pub fn accuracy(&self) -> Float {
        let (mut n, mut ok) = (0, 0);
        for (s, gold) in self.sentences.iter().zip(&self.gold_tags) {
            n += s.len();
            ok += s.tokens.iter().zip(gold).filter(|(t, g)| &t.upos == *g).count();
        }
        pct(ok, n)
    }
}

/// k-fold jackknifing: `tag_fold(train, held_out)` trains on the other
/// folds and returns predicted tags for each held-out sentence.
pub fn jackknife_tags<F>(treebank: &[Sentence], k: usize, seed: u64, mut tag_fold: F) -> Result<Jackknifed>
where
    F: FnMut(&[Sentence], &[Sentence]) -> Result<Vec<Vec<String>>>,
{
    let folds = fold_partition(treebank.len(), k, seed)?;
    let mut sentences = treebank.to_vec();
    for fold in &folds {
        let train = pick(treebank, &complement(treebank.len(), fold));
        let held = pick(treebank, fold);
        let tags = tag_fold(&train, &held)?;
        if tags.len() != held.len() {
            return Err(Error::Alignment {
                index: tags.len(),
                msg: "tagger returned the wrong number of sentences".into(),
            });
        }
        for (&i, t) in fold.iter().zip(tags) {
            if t.len() != treebank[i].len() {
                return Err(Error::Alignment {
                    index: i + 1,
                    msg: "tagger returned the wrong number of tags".into(),
                });
            }
            sentences[i] = treebank[i].with_tags(&t);
        }
    }
    Ok(Jackknifed {
        sentences,
        gold_tags: treebank.iter().map(|s| s.tags().iter().map(|t| t.to_string()).collect()).collect(),
        folds,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossFoldReport {
    pub folds: Vec<ScoreReport>,
    pub mean_uas: Float,
    pub mean_las: Float,
}

/// Cross-fold validation. For each fold the remaining folds train, the
/// first `dev_fraction` of the held-out fold (rounded down) is the dev set
/// and the rest is the test set. `run(train, dev, test)` returns parsed
/// copies of `test`. Means are unweighted over folds.
pub fn cross_fold_validate<F>(
    treebank: &[Sentence],
    folds: usize,
    dev_fraction: Float,
    seed: u64,
    include_punct: bool,
    mut run: F,
) -> Result<CrossFoldReport>
where
    F: FnMut(&[Sentence], &[Sentence], &[Sentence]) -> Result<Vec<Sentence>>,
{
    if !(0.0..1.0).contains(&dev_fraction) {
        return Err(Error::InvalidArgument(format!("dev fraction {dev_fraction} outside [0, 1)")));
    }
    let parts = fold_partition(treebank.len(), folds, seed)?;
    let mut reports = Vec::with_capacity(folds);
    for fold in &parts {
        let train = pick(treebank, &complement(treebank.len(), fold));
        let cut = (fold.len() as Float * dev_fraction).floor() as usize;
        let dev = pick(treebank, &fold[..cut]);
        let test = pick(treebank, &fold[cut..]);
        let predicted = run(&train, &dev, &test)?;
        reports.push(attachment_scores(&test, &predicted, include_punct)?);
    }
    let k = reports.len() as Float;
    Ok(CrossFoldReport {
        mean_uas: reports.iter().map(ScoreReport::uas).sum::<Float>() / k,
        mean_las: reports.iter().map(ScoreReport::las).sum::<Float>() / k,
        folds: reports,
    })
}
