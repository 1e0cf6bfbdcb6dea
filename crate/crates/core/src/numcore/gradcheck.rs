use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::Gradients;
use super::params::ParamStore;
use super::tensor::Float;

/// Compares autodiff gradients with central finite differences.
///
/// `loss_fn` must be deterministic. For every trainable parameter up to
/// `max_coords` coordinates are sampled (all of them when the tensor is
/// smaller); the return value is the largest
/// `|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)` seen. The store is restored
/// to its original values before returning.
pub fn grad_check<F>(
    store: &mut ParamStore,
    loss_fn: F,
    epsilon: Float,
    max_coords: usize,
    seed: u64,
) -> Float
where
    F: Fn(&ParamStore) -> (Float, Gradients),
{
    let (_, grads) = loss_fn(store);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Float = 0.0;
    for id in store.trainable_ids() {
        let analytic = grads.dense(id, store);
        let n = store.get(id).len();
        let coords: Vec<usize> = if n <= max_coords {
            (0..n).collect()
        } else {
            sample(&mut rng, n, max_coords).into_vec()
        };
        for k in coords {
            let orig = store.get(id).data()[k];
            store.get_mut(id).data_mut()[k] = orig + epsilon;
            let (plus, _) = loss_fn(store);
            store.get_mut(id).data_mut()[k] = orig - epsilon;
            let (minus, _) = loss_fn(store);
            store.get_mut(id).data_mut()[k] = orig;
            let fd = (plus - minus) / (2.0 * epsilon);
            let ad = analytic.data()[k];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}
