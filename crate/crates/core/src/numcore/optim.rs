use std::collections::HashMap;

use super::graph::Gradients;
use super::params::{ParamId, ParamStore};
use super::tensor::{Float, Tensor};
use crate::error::{Error, Result};

/// Adagrad with L2 regularization folded into the gradient.
///
/// For every touched coordinate: `g += λ·p`, `acc += g²`,
/// `p -= lr · g / (sqrt(acc) + ε)`. Row-sparse gradients (embedding
/// lookups) only update the rows they touched.
#[derive(Clone, Debug)]
pub struct Adagrad {
    pub learning_rate: Float,
    pub epsilon: Float,
    pub l2: Float,
    accum: HashMap<ParamId, Tensor>,
}

impl Default for Adagrad {
    fn default() -> Self {
        Adagrad::new(0.01, 1e-6)
    }
}

impl Adagrad {
    pub fn new(learning_rate: Float, l2: Float) -> Self {
        Adagrad {
            learning_rate,
            epsilon: 1e-8,
            l2,
            accum: HashMap::new(),
        }
    }

    pub fn accumulator(&self, id: ParamId) -> Option<&Tensor> {
        self.accum.get(&id)
    }

    /// Applies one update to every trainable parameter that has a gradient.
    pub fn update(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<()> {
        for (id, grad) in grads.iter() {
            if !grad.tensor.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {}", store.name(id))));
            }
        }
        for (id, grad) in grads.iter() {
            if !store.is_trainable(id) {
                continue;
            }
            let param = store.get_mut(id);
            let acc = self
                .accum
                .entry(id)
                .or_insert_with(|| Tensor::zeros(param.shape()));
            let cols = param.cols();
            let ranges: Vec<std::ops::Range<usize>> = match &grad.rows {
                Some(rows) => rows.iter().map(|&r| r * cols..(r + 1) * cols).collect(),
                None => vec![0..param.len()],
            };
            let (p, a, g) = (param.data_mut(), acc.data_mut(), grad.tensor.data());
            for range in ranges {
                for k in range {
                    let gk = g[k] + self.l2 * p[k];
                    a[k] += gk * gk;
                    p[k] -= self.learning_rate * gk / (a[k].sqrt() + self.epsilon);
                }
            }
        }
        Ok(())
    }
}

/// Single Adagrad update, returning the new parameter values.
pub fn adagrad_update(
    state: &mut Adagrad,
    store: &mut ParamStore,
    grads: &Gradients,
) -> Result<()> {
    state.update(store, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Graph;

    /// Loss `Σ c·p` has gradient `c` everywhere.
    fn linear_grads(store: &ParamStore, id: ParamId, c: Float) -> Gradients {
        let mut g = Graph::new(store);
        let p = g.param(id);
        let k = g.constant(Tensor::full(store.get(id).shape(), c));
        let l = g.dot(p, k);
        g.backward(l)
    }

    #[test]
    fn first_step_closed_form() {
        let mut s = ParamStore::new();
        let id = s.add("p", Tensor::vector(vec![0.5]), true);
        let mut opt = Adagrad::new(0.01, 0.0);
        let grads = linear_grads(&s, id, 1.0);
        opt.update(&mut s, &grads).unwrap();
        let delta = s.get(id).data()[0] - 0.5;
        assert!((delta - (-0.01 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn second_step_uses_accumulated_squares() {
        let mut s = ParamStore::new();
        let id = s.add("p", Tensor::vector(vec![0.0]), true);
        let mut opt = Adagrad::new(0.01, 0.0);
        let grads = linear_grads(&s, id, 1.0);
        opt.update(&mut s, &grads).unwrap();
        let before = s.get(id).data()[0];
        opt.update(&mut s, &grads).unwrap();
        let delta = s.get(id).data()[0] - before;
        assert!((delta - (-0.01 / (2f64.sqrt() + 1e-8))).abs() < 1e-15);
        assert_eq!(opt.accumulator(id).unwrap().data(), &[2.0]);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = ParamStore::new();
        let id = s.add("p", Tensor::vector(vec![0.25, -3.0]), true);
        let mut opt = Adagrad::new(0.01, 0.0);
        let grads = linear_grads(&s, id, 0.0);
        opt.update(&mut s, &grads).unwrap();
        assert_eq!(s.get(id).data(), &[0.25, -3.0]);
    }

    #[test]
    fn frozen_params_are_skipped() {
        let mut s = ParamStore::new();
        let id = s.add("p", Tensor::vector(vec![1.0]), false);
        let mut opt = Adagrad::default();
        let grads = linear_grads(&s, id, 1.0);
        opt.update(&mut s, &grads).unwrap();
        assert_eq!(s.get(id).data(), &[1.0]);
    }

    #[test]
    fn sparse_rows_only() {
        let mut s = ParamStore::new();
        let id = s.add("e", Tensor::full(&[3, 2], 1.0), true);
        let mut g = Graph::new(&s);
        let r = g.lookup(id, 1);
        let l = g.dot(r, r);
        let grads = g.backward(l);
        drop(g);
        let mut opt = Adagrad::new(0.1, 1e-3);
        opt.update(&mut s, &grads).unwrap();
        assert_eq!(s.get(id).row(0), &[1.0, 1.0]);
        assert_eq!(s.get(id).row(2), &[1.0, 1.0]);
        assert!(s.get(id).row(1)[0] < 1.0);
    }

    #[test]
    fn nan_gradient_is_an_error() {
        let mut s = ParamStore::new();
        let id = s.add("p", Tensor::vector(vec![1.0]), true);
        let mut grads = linear_grads(&s, id, 1.0);
        grads.scale(Float::NAN);
        assert!(Adagrad::default().update(&mut s, &grads).is_err());
    }
}
