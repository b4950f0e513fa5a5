//! Noise-prediction network `ε_θ(x_t, t, c)`.
//!
//! One MLP is shared across all component slots. Each slot sees its own row,
//! a sinusoidal time embedding, the condition vector, and a global context
//! vector (mean over slots of a linear projection of every row), so the
//! network is permutation-equivariant over slots.
//!
//! Gradients are derived by hand; see `backward`.

mod io;
mod train;

pub use io::{load_weights, save_weights, LoadedModel, WeightsSidecar, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use train::{
    draw_noised_batch, loss_and_grad, noise_objective, train, Adam, NoisedBatch, TrainConfig,
    TrainExample, TrainOutcome,
};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::condition::{Condition, COND_DIM};
use crate::diffusion::NoisePredictor;
use crate::error::{Error, Result};
use crate::layout::{LayoutTensor, N_MAX, ROW_DIM};
use crate::rng::{self, SeededRng};
use rand::RngExt;

pub const TIME_DIM: usize = 32;

/// Layer widths. Slot count and row width are fixed by the layout encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub hidden: usize,
    pub context: usize,
    /// Number of diffusion steps the time embedding is normalized by.
    pub timesteps: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: 256,
            context: 64,
            timesteps: 200,
        }
    }
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        ROW_DIM + TIME_DIM + COND_DIM + self.context
    }

    fn shapes(&self) -> [(usize, usize); 8] {
        let (i, h, c) = (self.input_dim(), self.hidden, self.context);
        [
            (ROW_DIM, c),
            (1, c),
            (i, h),
            (1, h),
            (h, h),
            (1, h),
            (h, ROW_DIM),
            (1, ROW_DIM),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|(r, c)| r * c).sum()
    }
}

/// Names of the parameter tensors in their fixed storage order.
pub const TENSOR_NAMES: [&str; 8] = [
    "context.weight",
    "context.bias",
    "layer1.weight",
    "layer1.bias",
    "layer2.weight",
    "layer2.bias",
    "layer3.weight",
    "layer3.bias",
];

/// Weights and biases. Weight matrices are stored `fan_in × fan_out` and applied as `row · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    arch: Architecture,
    pub context_w: Array2<f64>,
    pub context_b: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

/// Activations kept from the forward pass for backpropagation.
pub struct ForwardCache {
    rows: Array2<f64>,
    input: Array2<f64>,
    pre1: Array2<f64>,
    h1: Array2<f64>,
    pre2: Array2<f64>,
    h2: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// 16 sine/cosine pairs of `t / T` at frequencies spaced geometrically from 1 to 1000.
pub fn time_embedding(t: usize, timesteps: usize) -> [f64; TIME_DIM] {
    let s = t as f64 / timesteps as f64;
    let half = TIME_DIM / 2;
    let mut out = [0.0; TIME_DIM];
    for k in 0..half {
        let freq = 1000f64.powf(k as f64 / (half - 1) as f64);
        out[k] = (freq * s).sin();
        out[half + k] = (freq * s).cos();
    }
    out
}

impl DenoiserParams {
    pub fn zeros(arch: Architecture) -> Self {
        let sh = arch.shapes();
        Self {
            arch,
            context_w: Array2::zeros(sh[0]),
            context_b: Array1::zeros(sh[1].1),
            w1: Array2::zeros(sh[2]),
            b1: Array1::zeros(sh[3].1),
            w2: Array2::zeros(sh[4]),
            b2: Array1::zeros(sh[5].1),
            w3: Array2::zeros(sh[6]),
            b3: Array1::zeros(sh[7].1),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut p = Self::zeros(arch);
        let mut rng = rng::seeded(seed, rng::streams::INIT);
        let fill = |w: &mut Array2<f64>, rng: &mut SeededRng| {
            let (fan_in, fan_out) = w.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-limit..limit));
        };
        fill(&mut p.context_w, &mut rng);
        fill(&mut p.w1, &mut rng);
        fill(&mut p.w2, &mut rng);
        fill(&mut p.w3, &mut rng);
        p
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.arch)
    }

    /// Parameter tensors as flat slices in storage order.
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.context_w.as_slice().expect("standard layout"),
            self.context_b.as_slice().expect("standard layout"),
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.w3.as_slice().expect("standard layout"),
            self.b3.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.context_w.as_slice_mut().expect("standard layout"),
            self.context_b.as_slice_mut().expect("standard layout"),
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
            self.w3.as_slice_mut().expect("standard layout"),
            self.b3.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Forward pass over a batch of stacked slot rows (`B·N_MAX × ROW_DIM`).
    /// `steps[b]` and `conds[b]` belong to example `b`.
    pub fn forward(
        &self,
        rows: ArrayView2<'_, f64>,
        steps: &[usize],
        conds: &[[f64; COND_DIM]],
    ) -> (Array2<f64>, ForwardCache) {
        let batch = steps.len();
        assert_eq!(rows.dim(), (batch * N_MAX, ROW_DIM), "row block shape");
        assert_eq!(conds.len(), batch, "one condition per example");
        let ctx_dim = self.arch.context;

        let projected = rows.dot(&self.context_w) + &self.context_b;
        let mut input = Array2::zeros((batch * N_MAX, self.arch.input_dim()));
        input.slice_mut(s![.., ..ROW_DIM]).assign(&rows);
        let off_time = ROW_DIM;
        let off_cond = off_time + TIME_DIM;
        let off_ctx = off_cond + COND_DIM;
        for b in 0..batch {
            let block = b * N_MAX..(b + 1) * N_MAX;
            let context = projected
                .slice(s![block.clone(), ..])
                .mean_axis(Axis(0))
                .expect("non-empty block");
            let temb = time_embedding(steps[b], self.arch.timesteps);
            for r in block {
                let mut row = input.row_mut(r);
                for (k, v) in temb.iter().enumerate() {
                    row[off_time + k] = *v;
                }
                for (k, v) in conds[b].iter().enumerate() {
                    row[off_cond + k] = *v;
                }
                for k in 0..ctx_dim {
                    row[off_ctx + k] = context[k];
                }
            }
        }

        let pre1 = input.dot(&self.w1) + &self.b1;
        let h1 = pre1.mapv(silu);
        let pre2 = h1.dot(&self.w2) + &self.b2;
        let h2 = pre2.mapv(silu);
        let out = h2.dot(&self.w3) + &self.b3;
        let cache = ForwardCache {
            rows: rows.to_owned(),
            input,
            pre1,
            h1,
            pre2,
            h2,
        };
        (out, cache)
    }

    /// Parameter gradients given `d_out = ∂L/∂output`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>) -> DenoiserParams {
        let mut g = self.zeros_like();
        g.w3 = cache.h2.t().dot(d_out);
        g.b3 = d_out.sum_axis(Axis(0));

        let mut d_pre2 = d_out.dot(&self.w3.t());
        d_pre2.zip_mut_with(&cache.pre2, |d, &z| *d *= silu_grad(z));
        g.w2 = cache.h1.t().dot(&d_pre2);
        g.b2 = d_pre2.sum_axis(Axis(0));

        let mut d_pre1 = d_pre2.dot(&self.w2.t());
        d_pre1.zip_mut_with(&cache.pre1, |d, &z| *d *= silu_grad(z));
        g.w1 = cache.input.t().dot(&d_pre1);
        g.b1 = d_pre1.sum_axis(Axis(0));

        // Context enters every slot of its example; its projection is averaged over slots.
        let off_ctx = ROW_DIM + TIME_DIM + COND_DIM;
        let d_input_ctx = d_pre1.dot(&self.w1.slice(s![off_ctx.., ..]).t());
        let batch = d_out.nrows() / N_MAX;
        let mut d_projected = Array2::zeros((batch * N_MAX, self.arch.context));
        for b in 0..batch {
            let block = b * N_MAX..(b + 1) * N_MAX;
            let d_ctx = d_input_ctx.slice(s![block.clone(), ..]).sum_axis(Axis(0)) / N_MAX as f64;
            for r in block {
                d_projected.row_mut(r).assign(&d_ctx);
            }
        }
        g.context_w = cache.rows.t().dot(&d_projected);
        g.context_b = d_projected.sum_axis(Axis(0));
        g
    }

    /// Noise prediction for a single state.
    pub fn predict_eps(
        &self,
        xt: &LayoutTensor,
        t: usize,
        cond: Option<&Condition>,
    ) -> LayoutTensor {
        let c = cond.map_or([0.0; COND_DIM], Condition::vector);
        let (out, _) = self.forward(xt.as_array().view(), &[t], &[c]);
        LayoutTensor::from_array(out).expect("output keeps the slot shape")
    }

    pub(crate) fn check_timesteps(&self, timesteps: usize) -> Result<()> {
        if self.arch.timesteps != timesteps {
            return Err(Error::Weights(format!(
                "weights were trained for {} timesteps, schedule has {timesteps}",
                self.arch.timesteps
            )));
        }
        if !self.is_finite() {
            return Err(Error::Weights("weights contain non-finite values".into()));
        }
        Ok(())
    }
}

impl NoisePredictor for DenoiserParams {
    fn predict_batch(
        &self,
        states: &[Array2<f64>],
        t: usize,
        conds: &[[f64; COND_DIM]],
    ) -> Vec<Array2<f64>> {
        if states.is_empty() {
            return Vec::new();
        }
        let views: Vec<_> = states.iter().map(|s| s.view()).collect();
        let rows = ndarray::concatenate(Axis(0), &views).expect("equal slot shapes");
        let steps = vec![t; states.len()];
        let (out, _) = self.forward(rows.view(), &steps, conds);
        (0..states.len())
            .map(|b| out.slice(s![b * N_MAX..(b + 1) * N_MAX, ..]).to_owned())
            .collect()
    }
}
