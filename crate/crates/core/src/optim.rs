//! ADAM with a step-decay learning rate, mini-batching over a shuffled
//! dataset, and the accept-only-if-better training guard.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kspace::{DataItem, SamplingPattern};
use crate::varnet::{batch_gradient, cost_over_dataset, Gradients, VnParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr0: f64,
    pub drop_factor: f64,
    pub drop_every_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    /// Per-cycle training: 8 epochs from 2e-4, dropped by 0.25 every 2 epochs,
    /// batches of 8.
    pub fn paper() -> Self {
        Self {
            lr0: 2e-4,
            drop_factor: 0.25,
            drop_every_epochs: 2,
            epochs: 8,
            batch_size: 8,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Pre-training: 80 epochs from 2e-4, halved every 5 epochs, batches of 8.
    pub fn paper_pretrain() -> Self {
        Self {
            drop_factor: 0.5,
            drop_every_epochs: 5,
            epochs: 80,
            ..Self::paper()
        }
    }

    /// Short per-cycle schedule for small synthetic problems.
    pub fn desk() -> Self {
        Self {
            lr0: 1e-3,
            drop_factor: 0.5,
            drop_every_epochs: 2,
            epochs: 4,
            batch_size: 4,
            ..Self::paper()
        }
    }

    pub fn desk_pretrain() -> Self {
        Self {
            lr0: 2e-3,
            drop_factor: 0.5,
            drop_every_epochs: 10,
            epochs: 30,
            batch_size: 4,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr0 > 0.0
            && self.lr0.is_finite()
            && self.drop_factor > 0.0
            && self.drop_factor <= 1.0
            && self.drop_every_epochs > 0
            && self.epochs > 0
            && self.batch_size > 0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid ADAM config {self:?}")))
        }
    }

    /// `lr0 * drop_factor^floor((epoch - 1) / drop_every_epochs)`, epochs counted from 1.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let drops = (epoch.max(1) - 1) / self.drop_every_epochs;
        self.lr0 * self.drop_factor.powi(drops as i32)
    }
}

/// Moment estimates, step counter and current learning rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(config: &AdamConfig, param_count: usize) -> Self {
        Self {
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
            lr: config.lr0,
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }
}

/// One bias-corrected ADAM update of `params` with the current `state.lr`.
pub fn adam_step(state: &mut AdamState, params: &mut VnParams, grads: &Gradients) -> Result<()> {
    let n = params.values().len();
    if grads.values().len() != n || state.m.len() != n {
        return Err(Error::shape(format!(
            "ADAM state for {} parameters, gradient has {}, network has {n}",
            state.m.len(),
            grads.values().len()
        )));
    }
    if !grads.is_finite() {
        return Err(Error::non_finite("gradient passed to ADAM"));
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let values = params.values_mut();
    for i in 0..n {
        let g = grads.values()[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        values[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    if !params.is_finite() {
        return Err(Error::non_finite("parameters after ADAM step"));
    }
    Ok(())
}

/// Training loop where each batch may use its own sampling pattern.
///
/// `sp_for_batch` receives the running batch index (0-based, counted across
/// epochs). Returns the trained parameters; the caller evaluates the cost.
pub fn train_with_patterns<'a, F>(
    config: &AdamConfig,
    params: &VnParams,
    dataset: &[DataItem],
    seed: u64,
    mut sp_for_batch: F,
) -> Result<VnParams>
where
    F: FnMut(usize) -> Result<Cow<'a, SamplingPattern>>,
{
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut params = params.clone();
    let mut state = AdamState::new(config, params.values().len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut batch_index = 0;
    for epoch in 1..=config.epochs {
        state.lr = config.learning_rate(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let sp = sp_for_batch(batch_index)?;
            batch_index += 1;
            let batch: Vec<&DataItem> = chunk.iter().map(|&i| &dataset[i]).collect();
            let (_, grads) = batch_gradient(&params, &sp, &batch)?;
            adam_step(&mut state, &mut params, &grads)?;
        }
    }
    Ok(params)
}

/// `epochs * ceil(N_i / batch_size)` ADAM steps on one fixed pattern.
///
/// Returns the trained parameters and their cost over `dataset`.
pub fn train_epochs(
    config: &AdamConfig,
    params: &VnParams,
    sp: &SamplingPattern,
    dataset: &[DataItem],
    seed: u64,
) -> Result<(VnParams, f64)> {
    let trained = train_with_patterns(config, params, dataset, seed, |_| Ok(Cow::Borrowed(sp)))?;
    let cost = cost_over_dataset(&trained, sp, dataset)?;
    Ok((trained, cost))
}

/// Outcome of a guarded training run.
#[derive(Clone, Debug)]
pub struct Guarded {
    pub params: VnParams,
    pub cost: f64,
    pub accepted: bool,
}

/// Trains and keeps the result only if its cost does not exceed `cost_prev`.
///
/// A run that diverges numerically counts as a rejection.
pub fn guarded_train_from(
    config: &AdamConfig,
    params_prev: &VnParams,
    cost_prev: f64,
    sp: &SamplingPattern,
    dataset: &[DataItem],
    seed: u64,
) -> Result<Guarded> {
    let rejected = || Guarded {
        params: params_prev.clone(),
        cost: cost_prev,
        accepted: false,
    };
    match train_epochs(config, params_prev, sp, dataset, seed) {
        Ok((params, cost)) if cost <= cost_prev => Ok(Guarded {
            params,
            cost,
            accepted: true,
        }),
        Ok(_) | Err(Error::NonFinite { .. }) => Ok(rejected()),
        Err(e) => Err(e),
    }
}

/// [`guarded_train_from`] with the incoming cost evaluated here.
pub fn guarded_train(
    config: &AdamConfig,
    params_prev: &VnParams,
    sp: &SamplingPattern,
    dataset: &[DataItem],
    seed: u64,
) -> Result<Guarded> {
    let cost_prev = cost_over_dataset(params_prev, sp, dataset)?;
    guarded_train_from(config, params_prev, cost_prev, sp, dataset, seed)
}
