//! Toy treebanks drawn from a small dependency grammar.
//!
//! A clause is a subject, a verb, an optional object, an optional
//! prepositional phrase, an optional adverb and a final period. A
//! [`Grammar`] may flip the side on which one relation attaches and may
//! add discourse particles, which is enough to build a source language
//! and a related target language.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::treebank::{Sentence, Token};

const NOUNS: &[&str] = &[
    "dog", "cat", "man", "woman", "child", "teacher", "car", "house", "book", "river", "garden", "market", "bird",
    "table", "letter", "friend", "city", "road", "song", "phone",
];
const ADJS: &[&str] = &["big", "small", "old", "new", "red", "quiet", "happy", "long", "cold", "busy"];
const DETS: &[&str] = &["the", "a", "this", "that"];
const PRONS: &[&str] = &["he", "she", "they", "we"];
const TRANSITIVE: &[&str] = &["sees", "likes", "finds", "reads", "buys", "takes", "wants", "opens"];
const INTRANSITIVE: &[&str] = &["sleeps", "runs", "waits", "sings", "falls", "smiles"];
const ADPS: &[&str] = &["in", "near", "with", "behind", "under"];
const ADVS: &[&str] = &["today", "slowly", "again", "there", "often"];
const PARTICLES: &[&str] = &["lah", "leh", "lor", "meh"];

#[derive(Clone, Debug, PartialEq)]
pub struct Grammar {
    /// Relation whose dependents attach on the opposite side.
    pub flip: Option<&'static str>,
    /// Chance of a clause-final discourse particle.
    pub particles: f64,
}

impl Grammar {
    pub fn source() -> Self {
        Grammar {
            flip: None,
            particles: 0.0,
        }
    }

    /// Source grammar with adjectives after their noun, plus particles.
    pub fn target() -> Self {
        Grammar {
            flip: Some("amod"),
            particles: 0.4,
        }
    }
}

struct Node {
    form: &'static str,
    tag: &'static str,
    rel: &'static str,
    left: Vec<Node>,
    right: Vec<Node>,
}

impl Node {
    fn leaf(form: &'static str, tag: &'static str, rel: &'static str) -> Self {
        Node {
            form,
            tag,
            rel,
            left: vec![],
            right: vec![],
        }
    }

    fn attach(&mut self, g: &Grammar, child: Node, left: bool) {
        if left != (g.flip == Some(child.rel)) {
            self.left.push(child);
        } else {
            self.right.push(child);
        }
    }

    fn linearize(self, head: usize, out: &mut Vec<(&'static str, &'static str, usize, &'static str)>) {
        // Positions are fixed only after the left subtrees are laid out.
        let mut pending = vec![];
        for c in self.left {
            pending.push(out.len());
            c.linearize(usize::MAX, out);
        }
        let me = out.len() + 1;
        out.push((self.form, self.tag, head, self.rel));
        for p in pending {
            fix_root(out, p, me);
        }
        for c in self.right {
            c.linearize(me, out);
        }
    }
}

// Points the pending subtree root laid out from `start` at `head`.
fn fix_root(out: &mut [(&'static str, &'static str, usize, &'static str)], start: usize, head: usize) {
    if let Some(t) = out[start..].iter_mut().find(|t| t.2 == usize::MAX) {
        t.2 = head;
    }
}

fn noun_phrase<R: Rng>(g: &Grammar, rng: &mut R, rel: &'static str) -> Node {
    if rel == "nsubj" && rng.random_bool(0.25) {
        return Node::leaf(PRONS.choose(rng).unwrap(), "PRON", rel);
    }
    let mut n = Node::leaf(NOUNS.choose(rng).unwrap(), "NOUN", rel);
    if rng.random_bool(0.8) {
        n.attach(g, Node::leaf(DETS.choose(rng).unwrap(), "DET", "det"), true);
    }
    for _ in 0..rng.random_range(0..=2) {
        n.attach(g, Node::leaf(ADJS.choose(rng).unwrap(), "ADJ", "amod"), true);
    }
    // Determiners come first whatever side adjectives take.
    n.left.sort_by_key(|c| c.rel != "det");
    n
}

fn clause<R: Rng>(g: &Grammar, rng: &mut R) -> Node {
    let transitive = rng.random_bool(0.6);
    let verbs = if transitive { TRANSITIVE } else { INTRANSITIVE };
    let mut v = Node::leaf(verbs.choose(rng).unwrap(), "VERB", "root");
    v.attach(g, noun_phrase(g, rng, "nsubj"), true);
    if transitive {
        v.attach(g, noun_phrase(g, rng, "dobj"), false);
    }
    if rng.random_bool(0.4) {
        let mut pp = noun_phrase(g, rng, "nmod");
        pp.left.insert(0, Node::leaf(ADPS.choose(rng).unwrap(), "ADP", "case"));
        v.attach(g, pp, false);
    }
    if rng.random_bool(0.3) {
        v.attach(g, Node::leaf(ADVS.choose(rng).unwrap(), "ADV", "advmod"), false);
    }
    if g.particles > 0.0 && rng.random_bool(g.particles) {
        v.attach(g, Node::leaf(PARTICLES.choose(rng).unwrap(), "PART", "discourse"), false);
    }
    v.attach(g, Node::leaf(".", "PUNCT", "punct"), false);
    v
}

/// `n` sentences from `grammar`, reproducible from `seed`.
pub fn generate(grammar: &Grammar, n: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut rows = vec![];
            clause(grammar, &mut rng).linearize(0, &mut rows);
            Sentence::new(
                rows.iter()
                    .enumerate()
                    .map(|(i, &(form, tag, head, rel))| Token::new(i + 1, form, tag, head, rel))
                    .collect(),
            )
        })
        .collect()
}

/// Source and target treebanks for transfer experiments.
pub fn source_target(n_source: usize, n_target: usize, seed: u64) -> (Vec<Sentence>, Vec<Sentence>) {
    (
        generate(&Grammar::source(), n_source, seed),
        generate(&Grammar::target(), n_target, seed.wrapping_add(1)),
    )
}
