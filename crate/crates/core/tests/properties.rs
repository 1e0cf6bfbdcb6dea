use proptest::prelude::*;

use stackparse::langmodel::NgramLM;
use stackparse::numcore::{Float, Tensor};
use stackparse::parser::{decode_mst, ParserConfig, ParserModel};
use stackparse::stacking::{StackedParser, StackedParserConfig, StackedTagger, StackedTaggerConfig};
use stackparse::tagger::{crf_log_partition, crf_path_score, viterbi_decode, TaggerConfig, TaggerModel};
use stackparse::treebank::{is_tree, parse_conllu, validate, write_conllu, LabelInventory, Sentence, Token};
use stackparse::vocab::{Embeddings, Vocab, UNKNOWN};

/// A random tree: token i+1 attaches to an earlier node of a shuffled order.
fn tree() -> impl Strategy<Value = Sentence> {
    (1usize..12)
        .prop_flat_map(|n| {
            (
                shuffled(n),
                prop::collection::vec(any::<prop::sample::Index>(), n),
                prop::collection::vec("[a-zé中'.-]{1,6}", n),
                prop::collection::vec(prop::sample::select(vec!["NOUN", "VERB", "DET", "ADJ", "PUNCT"]), n),
                prop::collection::vec(prop::sample::select(vec!["nsubj", "dobj", "det", "amod", "punct"]), n),
            )
        })
        .prop_map(|(order, picks, forms, tags, rels)| {
            let n = order.len();
            let mut heads = vec![0; n];
            for k in 1..n {
                heads[order[k] - 1] = order[picks[k].index(k)];
            }
            let tokens = (0..n)
                .map(|i| {
                    let rel = if heads[i] == 0 { "root" } else { rels[i] };
                    Token::new(i + 1, &forms[i], tags[i], heads[i], rel)
                })
                .collect();
            Sentence::new(tokens)
        })
}

/// 1..=n in random order.
fn shuffled(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((1..=n).collect::<Vec<_>>()).prop_shuffle()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0..3.0 as Float, rows * cols).prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

proptest! {
    #[test]
    fn conllu_round_trip(trees in prop::collection::vec(tree(), 1..6)) {
        let text = write_conllu(&trees).unwrap();
        prop_assert_eq!(&parse_conllu(&text).unwrap(), &trees);
        let inv = LabelInventory::universal();
        for s in &trees {
            prop_assert!(is_tree(&s.heads()));
            prop_assert!(validate(s, &inv).is_empty());
        }
    }

    #[test]
    fn mst_is_a_tree_at_least_as_good_as_any_other(
        (s, other) in (1usize..8).prop_flat_map(|n| (matrix(n + 1, n + 1), tree_heads(n)))
    ) {
        let heads = decode_mst(&s);
        prop_assert!(is_tree(&heads));
        let score = |h: &[usize]| h.iter().enumerate().map(|(i, &h)| s.get(i + 1, h)).sum::<Float>();
        prop_assert!(score(&heads) >= score(&other) - 1e-9);
    }

    #[test]
    fn crf_partition_bounds_best_path((em, tr) in (1usize..6, 1usize..5).prop_flat_map(|(n, t)| (matrix(n, t), matrix(t + 2, t + 2)))) {
        let best = viterbi_decode(&em, &tr);
        let log_z = crf_log_partition(&em, &tr);
        let top = crf_path_score(&em, &tr, &best);
        let (n, t) = (em.rows() as Float, em.cols() as Float);
        prop_assert!(top <= log_z + 1e-9);
        prop_assert!(log_z <= top + n * t.ln() + 1e-9);
    }

    #[test]
    fn kneser_ney_distributions_normalize(
        corpus in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 1..7), 1..8),
        order in 1usize..5,
        prune in any::<bool>(),
    ) {
        let corpus: Vec<Vec<String>> = corpus.iter().map(|s| s.iter().map(|w| w.to_string()).collect()).collect();
        let lm = NgramLM::train(&corpus, order, prune).unwrap();
        let vocab = lm.vocabulary();
        for ctx in lm.contexts() {
            let c: Vec<&str> = ctx.iter().map(String::as_str).collect();
            let total: f64 = vocab.iter().map(|w| lm.prob(&c, w)).sum();
            prop_assert!((total - 1.0).abs() < 1e-9, "{:?} sums to {}", c, total);
        }
    }
}

fn tree_heads(n: usize) -> impl Strategy<Value = Vec<usize>> {
    (shuffled(n), prop::collection::vec(any::<prop::sample::Index>(), n)).prop_map(|(order, picks)| {
        let mut heads = vec![0; order.len()];
        for k in 1..order.len() {
            heads[order[k] - 1] = order[picks[k].index(k)];
        }
        heads
    })
}

fn toy() -> Vec<Sentence> {
    vec![
        Sentence::from_rows(&[("the", "DET", 2, "det"), ("dog", "NOUN", 3, "nsubj"), ("runs", "VERB", 0, "root")]),
        Sentence::from_rows(&[("cat", "NOUN", 0, "root"), ("lah", "PART", 1, "discourse")]),
    ]
}

fn embeddings(dim: usize) -> Option<Embeddings> {
    (dim > 0).then(|| Embeddings {
        vocab: Vocab::build(&[UNKNOWN], ["dog"]),
        vectors: Tensor::zeros(&[2, dim]),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stacked_tagger_input_width(word in 1usize..6, chars in 1usize..6, window in 0usize..3, pre in 0usize..5) {
        let base = TaggerModel::new(&TaggerConfig { hidden: 2, ..TaggerConfig::desk() }, &toy(), None).unwrap();
        let target = TaggerConfig { word_dim: word, char_dim: chars, attn_dim: 2, window, hidden: 2, ..TaggerConfig::desk() };
        let emb = embeddings(pre);
        let s = StackedTagger::new(&base, &StackedTaggerConfig { target, ..Default::default() }, &toy(), emb.as_ref()).unwrap();
        for x in s.stack_tag_inputs(&toy()[0]).unwrap() {
            prop_assert_eq!(x.len(), (2 * window + 1) * (pre + word + chars + 17));
        }
    }

    #[test]
    fn stacked_parser_input_width(word in 1usize..6, tag in 1usize..6, base_hidden in 1usize..6, pre in 0usize..5) {
        let base_config = ParserConfig { hidden: base_hidden, layers: 1, arc_dim: 2, rel_dim: 2, ..ParserConfig::desk() };
        let base = ParserModel::new(&base_config, &toy(), None);
        let target = ParserConfig { word_dim: word, tag_dim: tag, hidden: 2, ..ParserConfig::desk() };
        let emb = embeddings(pre);
        let s = StackedParser::new(&base, &StackedParserConfig { target, ..Default::default() }, &toy(), emb.as_ref());
        let want = word + pre + tag + 2 * base_hidden;
        prop_assert_eq!(s.target.input_dim(&s.store), want);
        for x in s.stack_parse_inputs(&toy()[0]).unwrap() {
            prop_assert_eq!(x.len(), want);
        }
    }
}
