//! CoNLL-U treebanks: data model, reading, writing, structural validation
//! and seeded corpus splitting.
//!
//! Only the basic-token layer is modeled. Multiword-token ranges (`3-4`)
//! and empty nodes (`5.1`) are skipped when reading. Of the ten columns,
//! ID, FORM, UPOS, HEAD and DEPREL are kept; everything else is written
//! back as `_`.
//!
//! Sentence-level grammar categories travel in a comment line of the form
//! `# categories = Topic Prominence,Copula Deletion`.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const CATEGORY_PREFIX: &str = "categories";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub upos: String,
    /// Index of the head token; 0 is the artificial root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(index: usize, form: &str, upos: &str, head: usize, deprel: &str) -> Self {
        Token {
            index,
            form: form.to_string(),
            upos: upos.to_string(),
            head,
            deprel: deprel.to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub categories: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence {
            tokens,
            categories: Vec::new(),
        }
    }

    /// Builds a sentence from `(form, upos, head, deprel)` tuples.
    pub fn from_rows(rows: &[(&str, &str, usize, &str)]) -> Self {
        let tokens = rows
            .iter()
            .enumerate()
            .map(|(i, (f, p, h, d))| Token::new(i + 1, f, p, *h, d))
            .collect();
        Sentence::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    pub fn tags(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.upos.as_str()).collect()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    pub fn deprels(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.deprel.as_str()).collect()
    }

    pub fn with_tags(&self, tags: &[String]) -> Sentence {
        let mut s = self.clone();
        for (t, tag) in s.tokens.iter_mut().zip(tags) {
            t.upos = tag.clone();
        }
        s
    }

    pub fn with_parse(&self, heads: &[usize], deprels: &[String]) -> Sentence {
        let mut s = self.clone();
        for ((t, &h), d) in s.tokens.iter_mut().zip(heads).zip(deprels) {
            t.head = h;
            t.deprel = d.clone();
        }
        s
    }

    fn check_writable(&self) -> Result<()> {
        let n = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            let bad = |msg: String| Error::invalid(format!("token {}: {msg}", i + 1));
            if t.index != i + 1 {
                return Err(bad(format!("index {} out of sequence", t.index)));
            }
            if t.form.is_empty() {
                return Err(bad("empty form".into()));
            }
            if t.head > n {
                return Err(bad(format!("head {} exceeds sentence length {n}", t.head)));
            }
            if t.head == t.index {
                return Err(bad("token heads itself".into()));
            }
            if [&t.form, &t.upos, &t.deprel]
                .iter()
                .any(|f| f.contains(['\t', '\n']))
            {
                return Err(bad("field contains a tab or newline".into()));
            }
        }
        Ok(())
    }
}

/// Universal POS tags as used by the English UD v1 treebank.
pub const UD_POS_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

/// Dependency relations of the English UD v1 treebank.
pub const UD_ENGLISH_DEPRELS: [&str; 47] = [
    "acl", "acl:relcl", "advcl", "advmod", "amod", "appos", "aux", "auxpass", "case", "cc",
    "cc:preconj", "ccomp", "compound", "compound:prt", "conj", "cop", "csubj", "csubjpass", "dep",
    "det", "det:predet", "discourse", "dislocated", "dobj", "expl", "foreign", "goeswith", "iobj",
    "list", "mark", "mwe", "name", "neg", "nmod", "nmod:npmod", "nmod:poss", "nmod:tmod", "nsubj",
    "nsubjpass", "nummod", "parataxis", "punct", "remnant", "reparandum", "root", "vocative",
    "xcomp",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelInventory {
    pub pos_tags: BTreeSet<String>,
    pub deprels: BTreeSet<String>,
}

impl LabelInventory {
    /// The 17 universal POS tags and 47 English dependency relations.
    pub fn universal() -> Self {
        LabelInventory {
            pos_tags: UD_POS_TAGS.iter().map(|s| s.to_string()).collect(),
            deprels: UD_ENGLISH_DEPRELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Every tag and label that occurs in `sentences`.
    pub fn from_treebank(sentences: &[Sentence]) -> Self {
        let tokens = sentences.iter().flat_map(|s| &s.tokens);
        LabelInventory {
            pos_tags: tokens.clone().map(|t| t.upos.clone()).collect(),
            deprels: tokens.map(|t| t.deprel.clone()).collect(),
        }
    }
}

pub fn parse_conllu(text: &str) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    // Line number of each token in `current`, for head-range errors.
    let mut lines: Vec<usize> = Vec::new();

    let finish = |s: &mut Sentence, lines: &mut Vec<usize>, out: &mut Vec<Sentence>| -> Result<()> {
        let n = s.tokens.len();
        for (t, &line) in s.tokens.iter().zip(lines.iter()) {
            if t.head > n {
                return Err(Error::Parse {
                    line,
                    msg: format!("head {} out of range for a {n}-token sentence", t.head),
                });
            }
        }
        if n > 0 {
            out.push(std::mem::take(s));
        } else {
            *s = Sentence::default();
        }
        lines.clear();
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut current, &mut lines, &mut sentences)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == CATEGORY_PREFIX {
                    current.categories = value
                        .split(',')
                        .map(str::trim)
                        .filter(|c| !c.is_empty())
                        .map(str::to_string)
                        .collect();
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let err = |msg: String| Error::Parse { line: line_no, msg };
        if cols.len() != 10 {
            return Err(err(format!("expected 10 tab-separated columns, found {}", cols.len())));
        }
        if cols[0].contains(['-', '.']) {
            continue;
        }
        let index: usize = cols[0]
            .parse()
            .map_err(|_| err(format!("malformed ID {:?}", cols[0])))?;
        if index != current.tokens.len() + 1 {
            return Err(err(format!(
                "ID {index} out of sequence, expected {}",
                current.tokens.len() + 1
            )));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| err(format!("malformed HEAD {:?}", cols[6])))?;
        current.tokens.push(Token {
            index,
            form: cols[1].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
        lines.push(line_no);
    }
    finish(&mut current, &mut lines, &mut sentences)?;
    Ok(sentences)
}

pub fn write_conllu(sentences: &[Sentence]) -> Result<String> {
    let mut out = String::new();
    for s in sentences {
        s.check_writable()?;
        if !s.categories.is_empty() {
            out.push_str(&format!("# {CATEGORY_PREFIX} = {}\n", s.categories.join(",")));
        }
        for t in &s.tokens {
            let field = |f: &str| if f.is_empty() { "_".to_string() } else { f.to_string() };
            out.push_str(&format!(
                "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_\n",
                t.index,
                t.form,
                field(&t.upos),
                t.head,
                field(&t.deprel)
            ));
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    UnknownPos,
    UnknownDeprel,
    Cycle,
    Unreachable,
    MultiRoot,
    HeadOutOfRange,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::UnknownPos => "unknown-pos",
            ViolationKind::UnknownDeprel => "unknown-deprel",
            ViolationKind::Cycle => "cycle",
            ViolationKind::Unreachable => "unreachable",
            ViolationKind::MultiRoot => "multi-root",
            ViolationKind::HeadOutOfRange => "head-out-of-range",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// 1-based token index the violation is attached to.
    pub token: usize,
    pub message: String,
}

impl Violation {
    /// Multiple roots are tolerated; everything else is an error.
    pub fn is_warning(&self) -> bool {
        self.kind == ViolationKind::MultiRoot
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at token {}: {}", self.kind, self.token, self.message)
    }
}

/// Checks labels against `inventory` and that the heads form a tree
/// rooted at node 0.
pub fn validate(sentence: &Sentence, inventory: &LabelInventory) -> Vec<Violation> {
    let mut out = Vec::new();
    for t in &sentence.tokens {
        if !inventory.pos_tags.contains(&t.upos) {
            out.push(Violation {
                kind: ViolationKind::UnknownPos,
                token: t.index,
                message: format!("POS tag {:?} not in inventory", t.upos),
            });
        }
        if !inventory.deprels.contains(&t.deprel) {
            out.push(Violation {
                kind: ViolationKind::UnknownDeprel,
                token: t.index,
                message: format!("dependency label {:?} not in inventory", t.deprel),
            });
        }
    }
    out.extend(validate_heads(&sentence.heads()));
    out
}

/// Structural checks on a head vector (`heads[i]` is the head of token
/// `i + 1`).
pub fn validate_heads(heads: &[usize]) -> Vec<Violation> {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unvisited,
        OnPath,
        Rooted,
        Broken,
    }
    let n = heads.len();
    let mut out = Vec::new();
    let mut state = vec![State::Unvisited; n + 1];
    state[0] = State::Rooted;

    for (i, &h) in heads.iter().enumerate() {
        if h > n {
            out.push(Violation {
                kind: ViolationKind::HeadOutOfRange,
                token: i + 1,
                message: format!("head {h} exceeds sentence length {n}"),
            });
            state[i + 1] = State::Broken;
        }
    }

    let mut cyclic = vec![false; n + 1];
    for start in 1..=n {
        if state[start] != State::Unvisited {
            continue;
        }
        let mut path = Vec::new();
        let mut node = start;
        let outcome = loop {
            match state[node] {
                State::Rooted => break State::Rooted,
                State::Broken => break State::Broken,
                State::OnPath => {
                    let pos = path.iter().position(|&p| p == node).unwrap();
                    let cycle = &path[pos..];
                    for &c in cycle {
                        cyclic[c] = true;
                    }
                    let mut members: Vec<usize> = cycle.to_vec();
                    members.sort_unstable();
                    out.push(Violation {
                        kind: ViolationKind::Cycle,
                        token: members[0],
                        message: format!("cycle through tokens {members:?}"),
                    });
                    break State::Broken;
                }
                State::Unvisited => {
                    state[node] = State::OnPath;
                    path.push(node);
                    node = heads[node - 1];
                }
            }
        };
        for &p in &path {
            state[p] = outcome;
        }
    }

    for i in 1..=n {
        if state[i] == State::Broken && !cyclic[i] && heads[i - 1] <= n {
            out.push(Violation {
                kind: ViolationKind::Unreachable,
                token: i,
                message: "token is not reachable from the root".into(),
            });
        }
    }

    let roots: Vec<usize> = (1..=n).filter(|&i| heads[i - 1] == 0).collect();
    if roots.len() > 1 {
        out.push(Violation {
            kind: ViolationKind::MultiRoot,
            token: roots[1],
            message: format!("{} tokens attach to the root: {roots:?}", roots.len()),
        });
    }
    out
}

/// True when `heads` forms a tree rooted at 0 (multiple root children allowed).
pub fn is_tree(heads: &[usize]) -> bool {
    validate_heads(heads).iter().all(Violation::is_warning)
}

/// Seeded random split into `(train, dev, test)`.
///
/// Dev and test receive `round(N · ratio)` items, train takes the rest.
/// Items are shuffled with Fisher-Yates driven by ChaCha8 seeded from
/// `seed`; each split keeps the original corpus order.
pub fn split_corpus<T: Clone>(
    items: &[T],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (tr, dv, te) = ratios;
    if [tr, dv, te].iter().any(|r| !(0.0..=1.0).contains(r)) || (tr + dv + te - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios {ratios:?} must be fractions summing to 1"
        )));
    }
    if items.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let n = items.len();
    let n_dev = ((n as f64) * dv).round() as usize;
    let n_test = (((n as f64) * te).round() as usize).min(n - n_dev.min(n));
    let n_dev = n_dev.min(n);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut dev_idx = order[..n_dev].to_vec();
    let mut test_idx = order[n_dev..n_dev + n_test].to_vec();
    let mut train_idx = order[n_dev + n_test..].to_vec();
    for v in [&mut train_idx, &mut dev_idx, &mut test_idx] {
        v.sort_unstable();
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((pick(&train_idx), pick(&dev_idx), pick(&test_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "1\tI\t_\tPRON\t_\t_\t2\tnsubj\t_\t_\n2\tgo\t_\tVERB\t_\t_\t0\troot\t_\t_\n";

    #[test]
    fn empty_input() {
        assert!(parse_conllu("").unwrap().is_empty());
        assert_eq!(write_conllu(&[]).unwrap(), "");
    }

    #[test]
    fn minimal_tree() {
        let s = parse_conllu(TWO).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens[1].head, 0);
        assert_eq!(s[0].tokens[0].upos, "PRON");
    }

    #[test]
    fn head_out_of_range_names_line() {
        let text = "# c\n1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n2\tb\t_\tX\t_\t_\t5\tdep\t_\t_\n3\tc\t_\tX\t_\t_\t1\tdep\t_\t_\n";
        match parse_conllu(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_fields() {
        assert!(matches!(parse_conllu("x\ta\t_\tX\t_\t_\t0\troot\t_\t_\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_conllu("1\ta\t_\tX\t_\t_\tz\troot\t_\t_\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_conllu("1\ta\tX\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn skips_multiword_and_empty_nodes() {
        let text = "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tdo\t_\tAUX\t_\t_\t3\taux\t_\t_\n2\tn't\t_\tPART\t_\t_\t3\tneg\t_\t_\n3\tgo\t_\tVERB\t_\t_\t0\troot\t_\t_\n3.1\tx\t_\tX\t_\t_\t_\t_\t_\t_\n";
        let s = parse_conllu(text).unwrap();
        assert_eq!(s[0].len(), 3);
    }

    #[test]
    fn categories_round_trip() {
        let mut s = parse_conllu(TWO).unwrap();
        s[0].categories = vec!["Copula Deletion".into()];
        let text = write_conllu(&s).unwrap();
        assert!(text.contains("# categories = Copula Deletion\n"));
        assert_eq!(parse_conllu(&text).unwrap(), s);
    }

    #[test]
    fn multiple_categories() {
        let text = format!("# categories = Topic Prominence, Discourse Particles\n{TWO}");
        let s = parse_conllu(&text).unwrap();
        assert_eq!(s[0].categories, vec!["Topic Prominence", "Discourse Particles"]);
    }

    #[test]
    fn writer_rejects_bad_heads() {
        let s = Sentence::from_rows(&[("a", "X", 3, "dep")]);
        assert!(write_conllu(&[s]).is_err());
    }

    #[test]
    fn validate_clean_tree() {
        let s = parse_conllu(TWO).unwrap().remove(0);
        assert!(validate(&s, &LabelInventory::universal()).is_empty());
    }

    #[test]
    fn validate_two_cycle() {
        let s = Sentence::from_rows(&[("a", "NOUN", 2, "dep"), ("b", "NOUN", 1, "dep")]);
        let v = validate(&s, &LabelInventory::universal());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Cycle);
    }

    #[test]
    fn validate_unknown_pos() {
        let s = Sentence::from_rows(&[("a", "NOUNX", 0, "root")]);
        let v = validate(&s, &LabelInventory::universal());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::UnknownPos);
    }

    #[test]
    fn validate_unreachable_and_range() {
        // 1 -> 2 -> 3 -> 2 (cycle {2,3}), 1 unreachable; 4 has head 9.
        let v = validate_heads(&[2, 3, 2, 9]);
        let kinds: Vec<_> = v.iter().map(|x| (x.kind, x.token)).collect();
        assert!(kinds.contains(&(ViolationKind::Cycle, 2)));
        assert!(kinds.contains(&(ViolationKind::Unreachable, 1)));
        assert!(kinds.contains(&(ViolationKind::HeadOutOfRange, 4)));
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn multi_root_is_warning() {
        let v = validate_heads(&[0, 0]);
        assert_eq!(v.len(), 1);
        assert!(v[0].is_warning());
        assert!(is_tree(&[0, 0]));
    }

    #[test]
    fn self_loop_is_cycle() {
        let v = validate_heads(&[0, 2]);
        assert_eq!(v[0].kind, ViolationKind::Cycle);
    }

    #[test]
    fn universal_inventory_sizes() {
        let inv = LabelInventory::universal();
        assert_eq!(inv.pos_tags.len(), 17);
        assert_eq!(inv.deprels.len(), 47);
    }

    #[test]
    fn split_sizes_match_treebank_proportions() {
        let items: Vec<usize> = (0..1200).collect();
        let (tr, dv, te) = split_corpus(&items, (0.75, 0.125, 0.125), 1).unwrap();
        assert_eq!((tr.len(), dv.len(), te.len()), (900, 150, 150));
    }

    #[test]
    fn split_single_item() {
        let (tr, dv, te) = split_corpus(&["s"], (1.0, 0.0, 0.0), 3).unwrap();
        assert_eq!((tr, dv.len(), te.len()), (vec!["s"], 0, 0));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let items: Vec<usize> = (0..57).collect();
        let a = split_corpus(&items, (0.6, 0.2, 0.2), 42).unwrap();
        let b = split_corpus(&items, (0.6, 0.2, 0.2), 42).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).chain(&a.2).copied().collect();
        all.sort_unstable();
        assert_eq!(all, items);
    }

    #[test]
    fn split_rejects_bad_ratios() {
        assert!(split_corpus(&[1], (0.5, 0.2, 0.2), 0).is_err());
        assert!(split_corpus::<u8>(&[], (1.0, 0.0, 0.0), 0).is_err());
    }
}
