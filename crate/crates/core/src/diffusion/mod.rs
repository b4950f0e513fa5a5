//! Forward noising, the reverse ancestral sampler and masked-inpainting refinement.

mod sampler;
mod schedule;

pub use sampler::{
    forward_sample, forward_sample_array, refine, refine_batch, reverse_chain, reverse_step,
    reverse_step_array, sample, sample_batch, RefineRequest, SamplerConfig,
};
pub use schedule::{DiffusionSchedule, ScheduleConfig};

use ndarray::Array2;

use crate::condition::COND_DIM;

/// Anything that predicts the noise component of a batch of states at timestep `t`.
pub trait NoisePredictor {
    fn predict_batch(
        &self,
        states: &[Array2<f64>],
        t: usize,
        conds: &[[f64; COND_DIM]],
    ) -> Vec<Array2<f64>>;
}

impl<F> NoisePredictor for F
where
    F: Fn(&Array2<f64>, usize, &[f64; COND_DIM]) -> Array2<f64>,
{
    fn predict_batch(
        &self,
        states: &[Array2<f64>],
        t: usize,
        conds: &[[f64; COND_DIM]],
    ) -> Vec<Array2<f64>> {
        states
            .iter()
            .zip(conds)
            .map(|(x, c)| self(x, t, c))
            .collect()
    }
}
