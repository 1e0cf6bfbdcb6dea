//! Epoch loop shared by every model: seeded shuffling, mini-batch
//! gradient averaging, Adagrad, and dev-based epoch selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ranged, Configurable};
use crate::error::{Error, Result};
use crate::numcore::{Adagrad, Float, Gradients, ParamStore};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: Float,
    pub l2: Float,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once the selection score reaches this value.
    pub stop_at: Option<Float>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 50,
            learning_rate: 0.01,
            l2: 1e-6,
            batch_size: 1,
            seed: 1,
            stop_at: None,
        }
    }
}

impl Configurable for TrainOptions {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "epochs" => self.epochs = ranged(key, value, 1, 100_000)?,
            "learning_rate" => self.learning_rate = ranged(key, value, 1e-9, 10.0)?,
            "l2" => self.l2 = ranged(key, value, 0.0, 1.0)?,
            "batch_size" => self.batch_size = ranged(key, value, 1, 100_000)?,
            "seed" => self.seed = ranged(key, value, 0, u64::MAX)?,
            "stop_at" => {
                self.stop_at = match value {
                    "none" => None,
                    v => Some(ranged(key, v, 0.0, 100.0)?),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("l2", self.l2.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("stop_at", self.stop_at.map_or("none".into(), |v| v.to_string())),
        ]
    }
}

/// What happened during training. Epochs are 1-based.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub best_epoch: usize,
    pub best_score: Float,
    pub scores: Vec<Float>,
    pub losses: Vec<Float>,
}

/// Runs `opts.epochs` epochs over `n` examples.
///
/// `loss` returns the loss and gradients of example `i`; the RNG it gets
/// drives dropout. `score` evaluates the current parameters (higher is
/// better). The parameters of the best-scoring epoch are left in `store`;
/// ties keep the earlier epoch.
pub fn train_loop<L, S>(
    store: &mut ParamStore,
    n: usize,
    opts: &TrainOptions,
    mut loss: L,
    mut score: S,
) -> Result<TrainReport>
where
    L: FnMut(&ParamStore, usize, &mut ChaCha8Rng) -> Result<(Float, Gradients)>,
    S: FnMut(&ParamStore) -> Result<Float>,
{
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_0f_7a41);
    let mut optim = Adagrad::new(opts.learning_rate, opts.l2);
    let mut order: Vec<usize> = (0..n).collect();
    let mut report = TrainReport {
        best_score: Float::NEG_INFINITY,
        ..Default::default()
    };
    let mut best = store.clone();
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(opts.batch_size.max(1)) {
            let mut grads = Gradients::default();
            for &i in batch {
                let (l, g) = loss(store, i, &mut rng)?;
                total += l;
                grads.accumulate(g);
            }
            grads.scale(1.0 / batch.len() as Float);
            optim.update(store, &grads)?;
        }
        report.losses.push(total / n as Float);
        let s = score(store)?;
        report.scores.push(s);
        if s > report.best_score {
            report.best_score = s;
            report.best_epoch = epoch;
            best = store.clone();
        }
        if opts.stop_at.is_some_and(|t| s >= t) {
            break;
        }
    }
    *store = best;
    Ok(report)
}
