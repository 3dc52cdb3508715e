//! Mini-batch training loop shared by every model.

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Adam, AdamConfig, Gradients, ParamSet, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam plus a gradient accumulator. Each example gets its own tape; the
/// batch gradient is the mean over the batch.
pub struct Trainer<T: Scalar> {
    pub adam: Adam<T>,
    grads: Gradients<T>,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::parameter("batch size must be positive"));
        }
        Ok(Self {
            adam: Adam::new(config, params)?,
            grads: Gradients::for_params(params),
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// One pass over `items` in a freshly shuffled order. `loss` receives a
    /// per-example seed for dropout and may return `None` to skip an item.
    /// Returns the mean loss over the items that were used.
    pub fn epoch<E, F>(&mut self, params: &mut ParamSet<T>, items: &[E], mut loss: F) -> Result<f64>
    where
        F: FnMut(&mut Tape<'_, T>, &E, u64) -> Result<Option<Var>>,
    {
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut self.rng);
        let (mut total, mut used, mut in_batch) = (0.0, 0usize, 0usize);
        for &i in &order {
            let seed = self.rng.next_u64();
            let mut tape = Tape::new(params);
            let Some(root) = loss(&mut tape, &items[i], seed)? else { continue };
            let value = tape.scalar(root).as_f64();
            if !value.is_finite() {
                return Err(Error::Numeric(format!("loss became {value}")));
            }
            tape.backward(root, &mut self.grads)?;
            total += value;
            used += 1;
            in_batch += 1;
            if in_batch == self.batch_size {
                self.apply(params, in_batch)?;
                in_batch = 0;
            }
        }
        if in_batch > 0 {
            self.apply(params, in_batch)?;
        }
        Ok(if used == 0 { 0.0 } else { total / used as f64 })
    }

    fn apply(&mut self, params: &mut ParamSet<T>, n: usize) -> Result<()> {
        self.grads.scale(T::one() / T::lit(n as f64));
        params.load_grads(&self.grads)?;
        self.adam.step(params)?;
        self.grads.reset();
        Ok(())
    }
}

/// Early-stopping bookkeeping on a "higher is better" dev metric.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    pub patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None, best_epoch: 0, since_best: 0 }
    }

    /// Records a dev score; returns true when it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.best_epoch = epoch;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best.map(|b| (self.best_epoch, b))
    }
}
