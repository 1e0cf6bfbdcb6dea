//! Head selection over an arc score matrix.
//!
//! `scores` is `(n + 1) x (n + 1)`: row `d` holds the scores of every
//! candidate head for dependent `d`, column 0 is the root, and row 0 is
//! ignored. Returned head vectors have one entry per token (`heads[d - 1]`
//! is the head of token `d`).

use crate::numcore::{Float, Tensor};
use crate::treebank::is_tree;

fn check(scores: &Tensor) -> usize {
    assert!(
        scores.shape().len() == 2 && scores.rows() == scores.cols() && scores.rows() >= 1,
        "arc scores must be square (n + 1) x (n + 1)"
    );
    scores.rows() - 1
}

/// Sum of the scores of the chosen arcs.
pub fn tree_score(scores: &Tensor, heads: &[usize]) -> Float {
    heads.iter().enumerate().map(|(i, &h)| scores.get(i + 1, h)).sum()
}

/// Best head for every token independently, ties to the smaller index.
/// The result may contain cycles; the flag is `true` when it is a tree.
pub fn decode_greedy(scores: &Tensor) -> (Vec<usize>, bool) {
    let n = check(scores);
    let heads: Vec<usize> = (1..=n)
        .map(|d| {
            let mut best = 0;
            for h in 0..=n {
                if h != d && scores.get(d, h) > scores.get(d, best) {
                    best = h;
                }
            }
            best
        })
        .collect();
    let tree = is_tree(&heads);
    (heads, tree)
}

/// Maximum spanning arborescence rooted at 0 (Chu-Liu/Edmonds). Any
/// number of tokens may attach to the root.
pub fn decode_mst(scores: &Tensor) -> Vec<usize> {
    let n = check(scores);
    // w[h][d]: score of the arc h -> d.
    let w: Vec<Vec<Float>> = (0..=n)
        .map(|h| {
            (0..=n)
                .map(|d| {
                    if d == 0 || h == d {
                        Float::NEG_INFINITY
                    } else {
                        scores.get(d, h)
                    }
                })
                .collect()
        })
        .collect();
    let parent = chu_liu_edmonds(&w);
    parent[1..].to_vec()
}

/// Like [`decode_mst`] but with exactly one token attached to the root:
/// every root child of the unconstrained tree is tried as the only one and
/// the best resulting tree wins (ties to the smaller child index).
pub fn decode_mst_single_root(scores: &Tensor) -> Vec<usize> {
    let free = decode_mst(scores);
    let children: Vec<usize> = (1..=free.len()).filter(|&d| free[d - 1] == 0).collect();
    if children.len() <= 1 {
        return free;
    }
    let n = free.len();
    let mut best: Option<(Float, Vec<usize>)> = None;
    for r in 1..=n {
        let mut s = scores.clone();
        for d in (1..=n).filter(|&d| d != r) {
            s.set(d, 0, Float::NEG_INFINITY);
        }
        let heads = decode_mst(&s);
        if heads.iter().filter(|&&h| h == 0).count() != 1 {
            continue;
        }
        let total = tree_score(scores, &heads);
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, heads));
        }
    }
    best.map_or(free, |(_, h)| h)
}

/// `w[h][d]` over nodes `0..m`, node 0 the root. Returns `parent` with
/// `parent[0] = 0`.
fn chu_liu_edmonds(w: &[Vec<Float>]) -> Vec<usize> {
    let m = w.len();
    let mut parent = vec![0usize; m];
    for d in 1..m {
        let mut best = 0;
        for h in 1..m {
            if w[h][d] > w[best][d] {
                best = h;
            }
        }
        parent[d] = best;
    }
    let Some(cycle) = find_cycle(&parent) else {
        return parent;
    };
    let in_cycle: Vec<bool> = (0..m).map(|v| cycle.contains(&v)).collect();

    // Contracted graph: surviving nodes keep their order, the cycle becomes
    // the last node.
    let keep: Vec<usize> = (0..m).filter(|&v| !in_cycle[v]).collect();
    let c = keep.len();
    let mut w2 = vec![vec![Float::NEG_INFINITY; c + 1]; c + 1];
    // Which cycle node an arc into the cycle enters, and which cycle node
    // an arc out of the cycle leaves from.
    let mut enter = vec![usize::MAX; c + 1];
    let mut leave = vec![usize::MAX; c + 1];
    for (i, &u) in keep.iter().enumerate() {
        for (j, &v) in keep.iter().enumerate() {
            w2[i][j] = w[u][v];
        }
        for &v in &cycle {
            let s = w[u][v] - w[parent[v]][v];
            if enter[i] == usize::MAX || s > w2[i][c] {
                w2[i][c] = s;
                enter[i] = v;
            }
        }
        for &v in &cycle {
            if leave[i] == usize::MAX || w[v][u] > w2[c][i] {
                w2[c][i] = w[v][u];
                leave[i] = v;
            }
        }
    }
    let sub = chu_liu_edmonds(&w2);

    let mut out = parent.clone();
    for (j, &v) in keep.iter().enumerate().skip(1) {
        let p = sub[j];
        out[v] = if p == c { leave[j] } else { keep[p] };
    }
    let from = sub[c];
    out[enter[from]] = keep[from];
    out
}

fn find_cycle(parent: &[usize]) -> Option<Vec<usize>> {
    let m = parent.len();
    // 0 = unvisited, 1 = on the current walk, 2 = done.
    let mut state = vec![0u8; m];
    state[0] = 2;
    for start in 1..m {
        let mut walk = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            walk.push(v);
            v = parent[v];
        }
        if state[v] == 1 {
            let pos = walk.iter().position(|&x| x == v).unwrap();
            return Some(walk[pos..].to_vec());
        }
        for x in walk {
            state[x] = 2;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[Float]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Every head assignment that forms a tree.
    pub(crate) fn brute_force(scores: &Tensor) -> Vec<usize> {
        let n = scores.rows() - 1;
        let mut heads = vec![0usize; n];
        let mut best: Option<(Float, Vec<usize>)> = None;
        loop {
            if is_tree(&heads) {
                let s = tree_score(scores, &heads);
                if best.as_ref().is_none_or(|(b, _)| s > *b) {
                    best = Some((s, heads.clone()));
                }
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best.unwrap().1;
                }
                heads[i] += 1;
                if heads[i] <= n {
                    break;
                }
                heads[i] = 0;
                i += 1;
            }
        }
    }

    const NI: Float = Float::NEG_INFINITY;

    #[test]
    fn greedy_tree_and_cycle() {
        let s = matrix(&[&[NI, 0.0, 0.0], &[5.0, NI, 1.0], &[0.0, 3.0, NI]]);
        assert_eq!(decode_greedy(&s), (vec![0, 1], true));
        assert_eq!(decode_mst(&s), vec![0, 1]);

        let s = matrix(&[&[NI, 0.0, 0.0], &[0.0, NI, 4.0], &[0.0, 4.0, NI]]);
        assert_eq!(decode_greedy(&s), (vec![2, 1], false));
        assert!(is_tree(&decode_mst(&s)));
    }

    #[test]
    fn equal_scores_attach_to_root() {
        let mut s = Tensor::full(&[4, 4], 0.5);
        for i in 0..4 {
            s.set(i, i, NI);
        }
        assert_eq!(decode_greedy(&s).0, vec![0, 0, 0]);
    }

    #[test]
    fn single_token() {
        let s = matrix(&[&[NI, 0.0], &[-3.0, NI]]);
        assert_eq!(decode_greedy(&s), (vec![0], true));
        assert_eq!(decode_mst(&s), vec![0]);
        assert_eq!(decode_mst_single_root(&s), vec![0]);
    }

    #[test]
    fn three_token_cycle_matches_enumeration() {
        // Greedy picks 1 <- 2 <- 3 <- 1.
        let s = matrix(&[
            &[NI, 0.0, 0.0, 0.0],
            &[1.0, NI, 2.0, 9.0],
            &[0.5, 8.0, NI, 1.0],
            &[2.0, 1.0, 7.0, NI],
        ]);
        let (g, tree) = decode_greedy(&s);
        assert!(!tree, "{g:?}");
        assert_eq!(decode_mst(&s), brute_force(&s));
    }

    #[test]
    fn random_matrices_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..=4);
            let mut s = Tensor::zeros(&[n + 1, n + 1]);
            for d in 0..=n {
                for h in 0..=n {
                    s.set(d, h, if d == h { NI } else { rng.random_range(-5.0..5.0) });
                }
            }
            let mst = decode_mst(&s);
            assert!(is_tree(&mst));
            assert_eq!(mst, brute_force(&s));
            let (greedy, tree) = decode_greedy(&s);
            if tree {
                assert_eq!(greedy, mst);
            }
            let one = decode_mst_single_root(&s);
            assert!(is_tree(&one));
            assert_eq!(one.iter().filter(|&&h| h == 0).count(), 1);
            assert!(tree_score(&s, &one) <= tree_score(&s, &mst) + 1e-12);
        }
    }

    #[test]
    fn single_root_constraint_rehomes_extra_root_children() {
        let s = matrix(&[&[NI, 0.0, 0.0], &[5.0, NI, 1.0], &[5.0, 0.5, NI]]);
        assert_eq!(decode_mst(&s), vec![0, 0]);
        // 1 <- 2 <- root scores 6.0, beating 2 <- 1 <- root at 5.5.
        assert_eq!(decode_mst_single_root(&s), vec![2, 0]);
    }

    #[test]
    fn row_shift_keeps_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = Tensor::zeros(&[4, 4]);
        for d in 0..4 {
            for h in 0..4 {
                s.set(d, h, if d == h { NI } else { rng.random_range(-1.0..1.0) });
            }
        }
        let before = (decode_greedy(&s).0, decode_mst(&s));
        for h in 0..4 {
            let v = s.get(2, h);
            s.set(2, h, v + 3.0);
        }
        assert_eq!((decode_greedy(&s).0, decode_mst(&s)), before);
    }
}
