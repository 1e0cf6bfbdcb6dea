//! Linear-chain CRF with explicit start and stop states.
//!
//! Emissions are `[n, T]`. Transitions are `[(T + 2), (T + 2)]` where
//! `trans[i][j]` scores moving from tag `i` to tag `j`, row `T` is the
//! start state and column `T + 1` the stop state.

use crate::numcore::{log_sum_exp, CustomOp, Float, Graph, Tensor, Var};

fn dims(emissions: &Tensor, transitions: &Tensor) -> (usize, usize) {
    let (n, t) = (emissions.rows(), emissions.cols());
    assert_eq!(
        transitions.shape(),
        [t + 2, t + 2],
        "transitions must be (T+2)x(T+2) for T = {t}"
    );
    (n, t)
}

/// Forward scores `alpha[t][j]`.
fn forward(emissions: &Tensor, trans: &Tensor) -> Vec<Vec<Float>> {
    let (n, tags) = dims(emissions, trans);
    let start = tags;
    let mut alpha = Vec::with_capacity(n);
    alpha.push(
        (0..tags)
            .map(|j| trans.get(start, j) + emissions.get(0, j))
            .collect::<Vec<_>>(),
    );
    let mut buf = vec![0.0; tags];
    for t in 1..n {
        let prev = &alpha[t - 1];
        let row = (0..tags)
            .map(|j| {
                for i in 0..tags {
                    buf[i] = prev[i] + trans.get(i, j);
                }
                log_sum_exp(&buf) + emissions.get(t, j)
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

/// Backward scores `beta[t][i]`, including the stop transition.
fn backward(emissions: &Tensor, trans: &Tensor) -> Vec<Vec<Float>> {
    let (n, tags) = dims(emissions, trans);
    let stop = tags + 1;
    let mut beta = vec![vec![0.0; tags]; n];
    for i in 0..tags {
        beta[n - 1][i] = trans.get(i, stop);
    }
    let mut buf = vec![0.0; tags];
    for t in (0..n.saturating_sub(1)).rev() {
        for i in 0..tags {
            for j in 0..tags {
                buf[j] = trans.get(i, j) + emissions.get(t + 1, j) + beta[t + 1][j];
            }
            beta[t][i] = log_sum_exp(&buf);
        }
    }
    beta
}

/// `log Z`, the log-sum-exp of every path score.
pub fn crf_log_partition(emissions: &Tensor, transitions: &Tensor) -> Float {
    let (n, tags) = dims(emissions, transitions);
    if n == 0 {
        return transitions.get(tags, tags + 1);
    }
    let alpha = forward(emissions, transitions);
    let last: Vec<Float> = (0..tags)
        .map(|j| alpha[n - 1][j] + transitions.get(j, tags + 1))
        .collect();
    log_sum_exp(&last)
}

/// Score of one tag path: emissions plus transitions, start and stop included.
pub fn crf_path_score(emissions: &Tensor, transitions: &Tensor, path: &[usize]) -> Float {
    let (n, tags) = dims(emissions, transitions);
    assert_eq!(path.len(), n, "path length must equal sentence length");
    let mut prev = tags;
    let mut s = 0.0;
    for (t, &y) in path.iter().enumerate() {
        s += transitions.get(prev, y) + emissions.get(t, y);
        prev = y;
    }
    s + transitions.get(prev, tags + 1)
}

/// Negative log-likelihood of `gold`: `log Z − score(gold)`.
pub fn crf_log_likelihood(emissions: &Tensor, transitions: &Tensor, gold: &[usize]) -> Float {
    let z = crf_log_partition(emissions, transitions);
    let s = crf_path_score(emissions, transitions, gold);
    if z == s {
        0.0
    } else {
        z - s
    }
}

/// Highest-scoring tag path. Ties go to the lowest tag index.
pub fn viterbi_decode(emissions: &Tensor, transitions: &Tensor) -> Vec<usize> {
    let (n, tags) = dims(emissions, transitions);
    if n == 0 {
        return Vec::new();
    }
    let (start, stop) = (tags, tags + 1);
    let mut score: Vec<Float> = (0..tags)
        .map(|j| transitions.get(start, j) + emissions.get(0, j))
        .collect();
    let mut back = vec![vec![0usize; tags]; n];
    for t in 1..n {
        let mut next = vec![0.0; tags];
        for j in 0..tags {
            let mut best = 0;
            let mut best_score = score[0] + transitions.get(0, j);
            for i in 1..tags {
                let s = score[i] + transitions.get(i, j);
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            back[t][j] = best;
            next[j] = best_score + emissions.get(t, j);
        }
        score = next;
    }
    let mut last = 0;
    let mut last_score = score[0] + transitions.get(0, stop);
    for j in 1..tags {
        let s = score[j] + transitions.get(j, stop);
        if s > last_score {
            last = j;
            last_score = s;
        }
    }
    let mut path = vec![last; n];
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    path
}

/// Gradients of the negative log-likelihood with respect to emissions and
/// transitions: expected counts under the model minus gold counts.
pub fn crf_gradients(emissions: &Tensor, transitions: &Tensor, gold: &[usize]) -> (Tensor, Tensor) {
    let (n, tags) = dims(emissions, transitions);
    let (start, stop) = (tags, tags + 1);
    let mut ge = Tensor::zeros(emissions.shape());
    let mut gt = Tensor::zeros(transitions.shape());
    if n == 0 {
        return (ge, gt);
    }
    let alpha = forward(emissions, transitions);
    let beta = backward(emissions, transitions);
    let log_z = log_sum_exp(&(0..tags).map(|j| alpha[n - 1][j] + beta[n - 1][j]).collect::<Vec<_>>());

    for t in 0..n {
        for j in 0..tags {
            let p = (alpha[t][j] + beta[t][j] - log_z).exp();
            ge.set(t, j, p);
            if t == 0 {
                gt.set(start, j, gt.get(start, j) + p);
            }
            if t == n - 1 {
                gt.set(j, stop, gt.get(j, stop) + p);
            }
        }
    }
    for t in 1..n {
        for i in 0..tags {
            for j in 0..tags {
                let lp = alpha[t - 1][i] + transitions.get(i, j) + emissions.get(t, j) + beta[t][j] - log_z;
                gt.set(i, j, gt.get(i, j) + lp.exp());
            }
        }
    }
    let mut prev = start;
    for (t, &y) in gold.iter().enumerate() {
        ge.set(t, y, ge.get(t, y) - 1.0);
        gt.set(prev, y, gt.get(prev, y) - 1.0);
        prev = y;
    }
    gt.set(prev, stop, gt.get(prev, stop) - 1.0);
    (ge, gt)
}

struct CrfNll {
    gold: Vec<usize>,
}

impl CustomOp for CrfNll {
    fn name(&self) -> &'static str {
        "crf_nll"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
        let (mut ge, mut gt) = crf_gradients(inputs[0], inputs[1], &self.gold);
        let g = grad.data()[0];
        ge.data_mut().iter_mut().for_each(|v| *v *= g);
        gt.data_mut().iter_mut().for_each(|v| *v *= g);
        vec![ge, gt]
    }
}

/// CRF negative log-likelihood on the tape. `emissions` is `[n, T]`.
pub fn crf_nll(g: &mut Graph, emissions: Var, transitions: Var, gold: &[usize]) -> Var {
    let value = crf_log_likelihood(g.value(emissions), g.value(transitions), gold);
    g.custom(
        &[emissions, transitions],
        Tensor::scalar(value),
        Box::new(CrfNll {
            gold: gold.to_vec(),
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{grad_check, ParamStore};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    /// Every tag path of length `n` over `tags` labels.
    fn all_paths(n: usize, tags: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..tags).map(move |y| {
                        let mut q = p.clone();
                        q.push(y);
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn one_token_two_tags_uniform() {
        let em = Tensor::zeros(&[1, 2]);
        let tr = Tensor::zeros(&[4, 4]);
        let loss = crf_log_likelihood(&em, &tr, &[0]);
        assert!((loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn partition_matches_enumeration_3x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let em = random(&mut rng, &[3, 3]);
        let tr = random(&mut rng, &[5, 5]);
        let paths = all_paths(3, 3);
        assert_eq!(paths.len(), 27);
        let scores: Vec<Float> = paths.iter().map(|p| crf_path_score(&em, &tr, p)).collect();
        assert!((crf_log_partition(&em, &tr) - log_sum_exp(&scores)).abs() < 1e-10);
        let best = paths
            .iter()
            .max_by(|a, b| crf_path_score(&em, &tr, a).total_cmp(&crf_path_score(&em, &tr, b)))
            .unwrap();
        assert_eq!(&viterbi_decode(&em, &tr), best);
    }

    #[test]
    fn certain_gold_has_zero_loss() {
        // Only the path 1 -> 0 -> 1 is allowed.
        let tags = 2;
        let mut tr = Tensor::full(&[4, 4], Float::NEG_INFINITY);
        tr.set(tags, 1, 0.0);
        tr.set(1, 0, 0.0);
        tr.set(0, 1, 0.0);
        tr.set(1, tags + 1, 0.0);
        let em = Tensor::new(vec![3, 2], vec![0.3, 0.1, -0.2, 0.5, 1.0, 2.0]).unwrap();
        assert_eq!(crf_log_likelihood(&em, &tr, &[1, 0, 1]), 0.0);
        assert_eq!(viterbi_decode(&em, &tr), vec![1, 0, 1]);
    }

    #[test]
    fn single_token_viterbi() {
        let em = Tensor::new(vec![1, 3], vec![0.5, 0.2, 0.1]).unwrap();
        let mut tr = Tensor::zeros(&[5, 5]);
        tr.set(3, 1, 0.4); // start -> 1
        tr.set(2, 4, 0.6); // 2 -> stop
        // Scores: 0.5, 0.6, 0.7
        assert_eq!(viterbi_decode(&em, &tr), vec![2]);
    }

    #[test]
    fn all_zero_picks_lowest_indices() {
        let em = Tensor::zeros(&[4, 3]);
        let tr = Tensor::zeros(&[5, 5]);
        assert_eq!(viterbi_decode(&em, &tr), vec![0, 0, 0, 0]);
    }

    #[test]
    fn emission_shift_changes_partition_and_gold_equally() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let em = random(&mut rng, &[3, 3]);
        let tr = random(&mut rng, &[5, 5]);
        let gold = [2, 0, 1];
        let mut shifted = em.clone();
        shifted.row_mut(1).iter_mut().for_each(|v| *v += 3.5);
        let dz = crf_log_partition(&shifted, &tr) - crf_log_partition(&em, &tr);
        let ds = crf_path_score(&shifted, &tr, &gold) - crf_path_score(&em, &tr, &gold);
        assert!((dz - 3.5).abs() < 1e-12);
        assert!((ds - 3.5).abs() < 1e-12);
        assert!((crf_log_likelihood(&shifted, &tr, &gold) - crf_log_likelihood(&em, &tr, &gold)).abs() < 1e-12);
        assert_eq!(viterbi_decode(&shifted, &tr), viterbi_decode(&em, &tr));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut store = ParamStore::new();
        let e = store.add("e", random(&mut rng, &[4, 3]), true);
        let t = store.add("t", random(&mut rng, &[5, 5]), true);
        let gold = [1, 1, 0, 2];
        let err = grad_check(
            &mut store,
            |s| {
                let mut g = Graph::new(s);
                let ev = g.param(e);
                let tv = g.param(t);
                let l = crf_nll(&mut g, ev, tv, &gold);
                (g.scalar(l), g.backward(l))
            },
            1e-5,
            usize::MAX,
            0,
        );
        assert!(err < 1e-6, "{err}");
    }
}
