use log::info;
use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::{Architecture, DenoiserParams};
use crate::condition::{Condition, COND_DIM};
use crate::diffusion::{forward_sample_array, DiffusionSchedule};
use crate::error::{Error, Result};
use crate::layout::{encode, Layout, LayoutTensor, N_MAX, ROW_DIM};
use crate::rng::{self, SeededRng};
use crate::rules::penalty_rows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub condition_dropout_p: f64,
    pub design_penalty_lambda: f64,
    pub seed: u64,
    pub hidden: usize,
    pub context: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            condition_dropout_p: 0.1,
            design_penalty_lambda: 0.1,
            seed: 0,
            hidden: 256,
            context: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Config {
                path: format!("train.{field}"),
                message: message.into(),
            })
        };
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", "must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", "must be in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.condition_dropout_p) {
            return bad("condition_dropout_p", "must be in [0, 1]");
        }
        if !(self.design_penalty_lambda >= 0.0 && self.design_penalty_lambda.is_finite()) {
            return bad("design_penalty_lambda", "must be non-negative");
        }
        if self.hidden == 0 {
            return bad("hidden", "must be positive");
        }
        if self.context == 0 {
            return bad("context", "must be positive");
        }
        Ok(())
    }

    pub fn architecture(&self, timesteps: usize) -> Architecture {
        Architecture {
            hidden: self.hidden,
            context: self.context,
            timesteps,
        }
    }
}

/// One encoded training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub x0: LayoutTensor,
    pub cond: [f64; COND_DIM],
}

impl TrainExample {
    pub fn new(layout: &Layout, condition: &Condition) -> Result<Self> {
        Ok(Self {
            x0: encode(layout)?,
            cond: condition.vector(),
        })
    }
}

/// Noised inputs for one batch, stacked as `B·N_MAX × ROW_DIM` blocks.
#[derive(Debug, Clone)]
pub struct NoisedBatch {
    pub steps: Vec<usize>,
    pub eps: Array2<f64>,
    pub xt: Array2<f64>,
    pub conds: Vec<[f64; COND_DIM]>,
}

impl NoisedBatch {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Per example, in this order: `t ~ U{1..T}`, `ε ~ N(0, I)`, then the dropout coin.
pub fn draw_noised_batch(
    examples: &[&TrainExample],
    sched: &DiffusionSchedule,
    condition_dropout_p: f64,
    rng: &mut SeededRng,
) -> NoisedBatch {
    let b = examples.len();
    let mut steps = Vec::with_capacity(b);
    let mut eps = Array2::zeros((b * N_MAX, ROW_DIM));
    let mut xt = Array2::zeros((b * N_MAX, ROW_DIM));
    let mut conds = Vec::with_capacity(b);
    for (i, ex) in examples.iter().enumerate() {
        let t = rng.random_range(1..=sched.timesteps());
        let e = rng::normal_array(rng, N_MAX, ROW_DIM);
        let noised = forward_sample_array(ex.x0.as_array().view(), t, e.view(), sched)
            .expect("t drawn in range");
        let drop = rng.random_bool(condition_dropout_p);
        let block = s![i * N_MAX..(i + 1) * N_MAX, ..];
        eps.slice_mut(block).assign(&e);
        xt.slice_mut(block).assign(&noised);
        steps.push(t);
        conds.push(if drop { [0.0; COND_DIM] } else { ex.cond });
    }
    NoisedBatch {
        steps,
        eps,
        xt,
        conds,
    }
}

/// Batch loss `mean_b ‖ε − ε̂‖² + λ·R(x̂_0)` and its gradient with respect to `ε̂`.
pub fn noise_objective(
    batch: &NoisedBatch,
    eps_hat: ArrayView2<'_, f64>,
    sched: &DiffusionSchedule,
    lambda: f64,
) -> (f64, Array2<f64>) {
    let b = batch.len() as f64;
    let diff = &batch.eps - &eps_hat;
    let mut loss = diff.iter().map(|v| v * v).sum::<f64>() / b;
    let mut grad = diff * (-2.0 / b);
    if lambda == 0.0 {
        return (loss, grad);
    }
    for (i, &t) in batch.steps.iter().enumerate() {
        let ab = sched.alpha_bar(t);
        let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
        let block = s![i * N_MAX..(i + 1) * N_MAX, ..];
        let x0_hat = (&batch.xt.slice(block) - &(&eps_hat.slice(block) * sb)) / sa;
        let mut d_x0 = Array2::zeros((N_MAX, ROW_DIM));
        let r = penalty_rows(x0_hat.view(), d_x0.view_mut());
        loss += lambda * r / b;
        // x̂_0 = (x_t − √(1−ᾱ)·ε̂)/√ᾱ
        grad.slice_mut(block)
            .scaled_add(-lambda * sb / (sa * b), &d_x0);
    }
    (loss, grad)
}

/// Draws a noised batch from `rng` and returns the loss and parameter gradients.
pub fn loss_and_grad(
    params: &DenoiserParams,
    examples: &[&TrainExample],
    sched: &DiffusionSchedule,
    cfg: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<(f64, DenoiserParams)> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("batch is empty".into()));
    }
    let batch = draw_noised_batch(examples, sched, cfg.condition_dropout_p, rng);
    let (eps_hat, cache) = params.forward(batch.xt.view(), &batch.steps, &batch.conds);
    let (loss, d_out) = noise_objective(&batch, eps_hat.view(), sched, cfg.design_penalty_lambda);
    Ok((loss, params.backward(&cache, &d_out)))
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    m: DenoiserParams,
    v: DenoiserParams,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(params: &DenoiserParams, cfg: &TrainConfig) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
        }
    }

    pub fn step(&mut self, params: &mut DenoiserParams, grads: &DenoiserParams) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let ps = params.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, m), v), g) in ps.into_iter().zip(ms).zip(vs).zip(grads.tensors()) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: DenoiserParams,
    /// Mean loss per epoch, weighted by batch size.
    pub epoch_losses: Vec<f64>,
}

/// Trains from a seeded initialization. `on_epoch(epoch, mean_loss)` runs after every epoch
/// (epochs are numbered from 1).
pub fn train(
    dataset: &[TrainExample],
    cfg: &TrainConfig,
    sched: &DiffusionSchedule,
    on_epoch: &mut dyn FnMut(usize, f64),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("training dataset is empty".into()));
    }
    if dataset.len() < cfg.batch_size {
        return Err(Error::Data(format!(
            "training dataset has {} examples, fewer than batch_size {}",
            dataset.len(),
            cfg.batch_size
        )));
    }
    let mut params = DenoiserParams::init(cfg.architecture(sched.timesteps()), cfg.seed);
    let mut adam = Adam::new(&params, cfg);
    let mut shuffle_rng = rng::seeded(cfg.seed, rng::streams::SHUFFLE);
    let mut noise_rng = rng::seeded(cfg.seed, rng::streams::NOISE);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&TrainExample> = chunk.iter().map(|&i| &dataset[i]).collect();
            let (loss, grads) = loss_and_grad(&params, &batch, sched, cfg, &mut noise_rng)?;
            if !loss.is_finite() {
                return Err(Error::Data(format!("non-finite loss in epoch {epoch}")));
            }
            adam.step(&mut params, &grads);
            total += loss * chunk.len() as f64;
        }
        if !params.is_finite() {
            return Err(Error::Data(format!("non-finite weights after epoch {epoch}")));
        }
        let mean = total / dataset.len() as f64;
        info!("epoch {epoch} loss {mean:.6}");
        on_epoch(epoch, mean);
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome {
        params,
        epoch_losses,
    })
}
