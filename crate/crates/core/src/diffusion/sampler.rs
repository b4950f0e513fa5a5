use ndarray::{Array2, ArrayView2, Zip};

use super::{DiffusionSchedule, NoisePredictor};
use crate::condition::{Condition, COND_DIM};
use crate::error::{Error, Result};
use crate::layout::{
    decode_min_len, encode, Layout, LayoutTensor, COL_CX, COL_H, N_MAX, ROW_DIM,
};
use crate::rng::{self, SeededRng};
use crate::rules::{project_pinned, RuleConfig};

/// Closed-form forward jump `x_t = √ᾱ_t·x_0 + √(1-ᾱ_t)·ε` on arrays of any shape.
pub fn forward_sample_array(
    x0: ArrayView2<'_, f64>,
    t: usize,
    eps: ArrayView2<'_, f64>,
    sched: &DiffusionSchedule,
) -> Result<Array2<f64>> {
    sched.check(t)?;
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(Zip::from(x0)
        .and(eps)
        .map_collect(|&x, &e| a * x + b * e))
}

pub fn forward_sample(
    x0: &LayoutTensor,
    t: usize,
    eps: &LayoutTensor,
    sched: &DiffusionSchedule,
) -> Result<LayoutTensor> {
    let xt = forward_sample_array(x0.as_array().view(), t, eps.as_array().view(), sched)?;
    LayoutTensor::from_array(xt)
}

/// One ancestral step with `σ_t² = β_t`; the noise term is dropped at `t = 1`.
pub fn reverse_step_array(
    xt: ArrayView2<'_, f64>,
    t: usize,
    eps_hat: ArrayView2<'_, f64>,
    z: ArrayView2<'_, f64>,
    sched: &DiffusionSchedule,
) -> Result<Array2<f64>> {
    sched.check(t)?;
    let alpha = sched.alpha(t);
    let coef = (1.0 - alpha) / (1.0 - sched.alpha_bar(t)).sqrt();
    let scale = 1.0 / alpha.sqrt();
    let sigma = if t == 1 { 0.0 } else { sched.beta(t).sqrt() };
    Ok(Zip::from(xt)
        .and(eps_hat)
        .and(z)
        .map_collect(|&x, &e, &n| scale * (x - coef * e) + sigma * n))
}

pub fn reverse_step(
    xt: &LayoutTensor,
    t: usize,
    eps_hat: &LayoutTensor,
    z: &LayoutTensor,
    sched: &DiffusionSchedule,
) -> Result<LayoutTensor> {
    let prev = reverse_step_array(
        xt.as_array().view(),
        t,
        eps_hat.as_array().view(),
        z.as_array().view(),
        sched,
    )?;
    LayoutTensor::from_array(prev)
}

/// Runs the reverse chain for `t = t_start..=1` on a batch of states in lockstep.
///
/// `guide(chain, x_t, eps_hat, t)` may replace the prediction before the step;
/// `after(chain, x_{t-1}, t-1, rng)` may edit the new state. Each chain draws its
/// step noise from its own generator, so results do not depend on batch composition.
#[allow(clippy::too_many_arguments)]
fn run_chains(
    states: &mut [Array2<f64>],
    rngs: &mut [SeededRng],
    conds: &[[f64; COND_DIM]],
    t_start: usize,
    sched: &DiffusionSchedule,
    predictor: &dyn NoisePredictor,
    guide: &mut dyn FnMut(usize, &Array2<f64>, Array2<f64>, usize) -> Array2<f64>,
    after: &mut dyn FnMut(usize, &mut Array2<f64>, usize, &mut SeededRng),
) -> Result<()> {
    sched.check(t_start)?;
    for t in (1..=t_start).rev() {
        let predictions = predictor.predict_batch(states, t, conds);
        for (b, eps_hat) in predictions.into_iter().enumerate() {
            let eps = guide(b, &states[b], eps_hat, t);
            let (rows, cols) = states[b].dim();
            let z = if t > 1 {
                rng::normal_array(&mut rngs[b], rows, cols)
            } else {
                Array2::zeros((rows, cols))
            };
            states[b] = reverse_step_array(states[b].view(), t, eps.view(), z.view(), sched)?;
            after(b, &mut states[b], t - 1, &mut rngs[b]);
        }
    }
    Ok(())
}

/// Plain reverse chain over arbitrary-shape states with per-chain generators.
pub fn reverse_chain(
    states: &mut [Array2<f64>],
    rngs: &mut [SeededRng],
    t_start: usize,
    sched: &DiffusionSchedule,
    predictor: &dyn NoisePredictor,
) -> Result<()> {
    let conds = vec![[0.0; COND_DIM]; states.len()];
    run_chains(
        states,
        rngs,
        &conds,
        t_start,
        sched,
        predictor,
        &mut |_, _, eps, _| eps,
        &mut |_, _, _, _| {},
    )
}

/// Per-request sampling settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub condition: Option<Condition>,
    /// Apply the design-rule projection every `k` reverse steps and after the last; 0 disables.
    pub projection_every: usize,
    pub rules: RuleConfig,
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            condition: None,
            projection_every: 25,
            rules: RuleConfig::default(),
        }
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.condition = Some(condition);
        self
    }

    pub fn with_projection_every(mut self, k: usize) -> Self {
        self.projection_every = k;
        self
    }

    fn cond_vector(&self) -> [f64; COND_DIM] {
        self.condition
            .as_ref()
            .map_or([0.0; COND_DIM], Condition::vector)
    }
}

/// Moves the clean-state estimate onto its design-rule projection and returns the
/// noise prediction consistent with the corrected estimate.
fn projected_eps(
    xt: &Array2<f64>,
    eps_hat: Array2<f64>,
    t: usize,
    sched: &DiffusionSchedule,
    rules: &RuleConfig,
    pinned: &[usize],
) -> Array2<f64> {
    let ab = sched.alpha_bar(t);
    let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
    let mut x0_hat = (xt - &(&eps_hat * sb)) / sa;
    let estimate = LayoutTensor::from_array(x0_hat.clone()).expect("slot shape");
    let decoded = decode_min_len(&estimate, N_MAX);
    let projected = project_pinned(&decoded, pinned, rules);
    let mut moved = false;
    for (slot, (d, p)) in decoded.components.iter().zip(&projected.components).enumerate() {
        if !d.visible {
            continue;
        }
        let delta = [p.cx - d.cx, p.cy - d.cy, p.w - d.w, p.h - d.h];
        for (k, dv) in delta.iter().enumerate() {
            if *dv != 0.0 {
                x0_hat[[slot, COL_CX + k]] += 2.0 * dv;
                moved = true;
            }
        }
    }
    debug_assert_eq!(COL_CX + 3, COL_H);
    if !moved {
        return eps_hat;
    }
    (xt - &(&x0_hat * sa)) / sb
}

fn projection_due(cfg: &SamplerConfig, t_start: usize, t: usize) -> bool {
    let k = cfg.projection_every;
    k > 0 && t > 1 && (t_start - t + 1) % k == 0
}

/// Generates one layout from pure noise.
pub fn sample(
    cfg: &SamplerConfig,
    denoiser: &dyn NoisePredictor,
    sched: &DiffusionSchedule,
) -> Result<Layout> {
    Ok(sample_batch(std::slice::from_ref(cfg), denoiser, sched)?.remove(0))
}

/// Generates one layout per config in lockstep; each result equals the single-config call.
pub fn sample_batch(
    cfgs: &[SamplerConfig],
    denoiser: &dyn NoisePredictor,
    sched: &DiffusionSchedule,
) -> Result<Vec<Layout>> {
    let t_max = sched.timesteps();
    let mut rngs: Vec<SeededRng> = cfgs
        .iter()
        .map(|c| rng::seeded(c.seed, rng::streams::SAMPLE))
        .collect();
    let mut states: Vec<Array2<f64>> = rngs
        .iter_mut()
        .map(|r| rng::normal_array(r, N_MAX, ROW_DIM))
        .collect();
    let conds: Vec<_> = cfgs.iter().map(SamplerConfig::cond_vector).collect();
    run_chains(
        &mut states,
        &mut rngs,
        &conds,
        t_max,
        sched,
        denoiser,
        &mut |b, xt, eps, t| {
            if projection_due(&cfgs[b], t_max, t) {
                projected_eps(xt, eps, t, sched, &cfgs[b].rules, &[])
            } else {
                eps
            }
        },
        &mut |_, _, _, _| {},
    )?;
    Ok(states
        .into_iter()
        .zip(cfgs)
        .map(|(x, cfg)| {
            let layout = decode_min_len(&LayoutTensor::from_array(x).expect("slot shape"), 0);
            if cfg.projection_every > 0 {
                project_pinned(&layout, &[], &cfg.rules)
            } else {
                layout
            }
        })
        .collect())
}

/// A feedback request: regenerate everything except the pinned components.
#[derive(Debug, Clone)]
pub struct RefineRequest {
    pub original: Layout,
    pub pinned: Vec<usize>,
    pub t_start: usize,
    pub sampler: SamplerConfig,
}

/// Masked inpainting: re-noise the original to `t_start`, run the reverse chain, and after
/// every step overwrite pinned rows with the original re-noised to the new timestep.
pub fn refine(
    original: &Layout,
    pinned: &[usize],
    cfg: &SamplerConfig,
    t_start: usize,
    denoiser: &dyn NoisePredictor,
    sched: &DiffusionSchedule,
) -> Result<Layout> {
    let request = RefineRequest {
        original: original.clone(),
        pinned: pinned.to_vec(),
        t_start,
        sampler: cfg.clone(),
    };
    Ok(refine_batch(std::slice::from_ref(&request), denoiser, sched)?.remove(0))
}

pub fn refine_batch(
    requests: &[RefineRequest],
    denoiser: &dyn NoisePredictor,
    sched: &DiffusionSchedule,
) -> Result<Vec<Layout>> {
    let mut starts = Vec::with_capacity(requests.len());
    for r in requests {
        sched.check(r.t_start)?;
        if let Some(&bad) = r.pinned.iter().find(|&&i| i >= r.original.len()) {
            return Err(Error::ComponentIndex {
                index: bad,
                len: r.original.len(),
            });
        }
        starts.push(r.t_start);
    }
    // Lockstep requires a shared start; group by t_start, preserving request order.
    let mut out: Vec<Option<Layout>> = vec![None; requests.len()];
    let mut distinct = starts.clone();
    distinct.sort_unstable();
    distinct.dedup();
    for t_start in distinct {
        let idx: Vec<usize> = (0..requests.len())
            .filter(|&i| starts[i] == t_start)
            .collect();
        let group: Vec<&RefineRequest> = idx.iter().map(|&i| &requests[i]).collect();
        for (i, layout) in idx.into_iter().zip(refine_group(&group, t_start, denoiser, sched)?) {
            out[i] = Some(layout);
        }
    }
    Ok(out.into_iter().map(|l| l.expect("every request handled")).collect())
}

fn refine_group(
    requests: &[&RefineRequest],
    t_start: usize,
    denoiser: &dyn NoisePredictor,
    sched: &DiffusionSchedule,
) -> Result<Vec<Layout>> {
    let mut rngs: Vec<SeededRng> = requests
        .iter()
        .map(|r| rng::seeded(r.sampler.seed, rng::streams::SAMPLE))
        .collect();
    let originals: Vec<Array2<f64>> = requests
        .iter()
        .map(|r| encode(&r.original).map(LayoutTensor::into_array))
        .collect::<Result<_>>()?;
    let mut states = Vec::with_capacity(requests.len());
    for (x0, rng) in originals.iter().zip(rngs.iter_mut()) {
        let eps = rng::normal_array(rng, N_MAX, ROW_DIM);
        states.push(forward_sample_array(x0.view(), t_start, eps.view(), sched)?);
    }
    let conds: Vec<_> = requests.iter().map(|r| r.sampler.cond_vector()).collect();
    run_chains(
        &mut states,
        &mut rngs,
        &conds,
        t_start,
        sched,
        denoiser,
        &mut |b, xt, eps, t| {
            let r = requests[b];
            if projection_due(&r.sampler, t_start, t) {
                projected_eps(xt, eps, t, sched, &r.sampler.rules, &r.pinned)
            } else {
                eps
            }
        },
        &mut |b, x, t_prev, rng| {
            let r = requests[b];
            let x0 = &originals[b];
            if t_prev == 0 {
                for &slot in &r.pinned {
                    x.row_mut(slot).assign(&x0.row(slot));
                }
                return;
            }
            let eps = rng::normal_array(rng, N_MAX, ROW_DIM);
            let renoised = forward_sample_array(x0.view(), t_prev, eps.view(), sched)
                .expect("t_prev is in range");
            for &slot in &r.pinned {
                x.row_mut(slot).assign(&renoised.row(slot));
            }
        },
    )?;
    Ok(states
        .into_iter()
        .zip(requests)
        .map(|(x, r)| {
            let tensor = LayoutTensor::from_array(x).expect("slot shape");
            let mut layout = decode_min_len(&tensor, r.original.len());
            layout.canvas = r.original.canvas;
            if r.sampler.projection_every > 0 {
                layout = project_pinned(&layout, &r.pinned, &r.sampler.rules);
            }
            // Pinned rows were restored exactly; copy the originals to drop round-trip noise.
            for &slot in &r.pinned {
                layout.components[slot] = r.original.components[slot];
            }
            layout
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Component, ComponentType};

    fn zero_predictor() -> impl Fn(&Array2<f64>, usize, &[f64; COND_DIM]) -> Array2<f64> {
        |x: &Array2<f64>, _t: usize, _c: &[f64; COND_DIM]| Array2::zeros(x.dim())
    }

    fn sched() -> DiffusionSchedule {
        DiffusionSchedule::linear(40, 1e-3, 0.05).unwrap()
    }

    #[test]
    fn zero_noise_forward_scales_input() {
        let s = sched();
        let x0 = Array2::from_elem((2, 3), 0.7);
        let xt = forward_sample_array(x0.view(), 10, Array2::zeros((2, 3)).view(), &s).unwrap();
        assert!(xt.iter().all(|v| (v - 0.7 * s.alpha_bar(10).sqrt()).abs() < 1e-15));
    }

    #[test]
    fn tiny_betas_keep_data() {
        let s = DiffusionSchedule::linear(5, 1e-12, 1e-12).unwrap();
        let x0 = Array2::from_elem((1, 4), -0.3);
        let eps = Array2::from_elem((1, 4), 1.0);
        let xt = forward_sample_array(x0.view(), 5, eps.view(), &s).unwrap();
        assert!(xt.iter().all(|v| (v + 0.3).abs() < 1e-5));
    }

    #[test]
    fn timestep_bounds_checked() {
        let s = sched();
        let x = Array2::zeros((1, 1));
        assert!(forward_sample_array(x.view(), 0, x.view(), &s).is_err());
        assert!(forward_sample_array(x.view(), 41, x.view(), &s).is_err());
        assert!(reverse_step_array(x.view(), 41, x.view(), x.view(), &s).is_err());
    }

    #[test]
    fn reverse_step_scalar_value() {
        // α = 0.9, ᾱ = 0.72 at t = 2.
        let s = DiffusionSchedule::from_betas(vec![0.2, 0.1]).unwrap();
        assert!((s.alpha_bar(2) - 0.72).abs() < 1e-15);
        let one = |v| Array2::from_elem((1, 1), v);
        let prev = reverse_step_array(one(1.0).view(), 2, one(0.5).view(), one(0.0).view(), &s)
            .unwrap()[[0, 0]];
        let expected = (1.0 / 0.9f64.sqrt()) * (1.0 - (0.1 / 0.28f64.sqrt()) * 0.5);
        assert!((prev - expected).abs() < 1e-14);
        assert!((prev - 0.954490).abs() < 1e-6);
    }

    #[test]
    fn final_step_ignores_noise() {
        let s = sched();
        let one = |v| Array2::from_elem((1, 1), v);
        let a = reverse_step_array(one(0.4).view(), 1, one(0.1).view(), one(5.0).view(), &s).unwrap();
        let b = reverse_step_array(one(0.4).view(), 1, one(0.1).view(), one(0.0).view(), &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_prediction_rescales() {
        let s = sched();
        let one = |v| Array2::from_elem((1, 1), v);
        let prev = reverse_step_array(one(0.8).view(), 7, one(0.0).view(), one(0.0).view(), &s).unwrap();
        assert!((prev[[0, 0]] - 0.8 / s.alpha(7).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic_and_batch_consistent() {
        let s = sched();
        let p = zero_predictor();
        let cfgs: Vec<_> = (0..3).map(|i| SamplerConfig::new(40 + i)).collect();
        let batch = sample_batch(&cfgs, &p, &s).unwrap();
        for (cfg, b) in cfgs.iter().zip(&batch) {
            let single = sample(cfg, &p, &s).unwrap();
            assert_eq!(single.to_json(), b.to_json());
        }
        assert_ne!(batch[0], batch[1]);
    }

    #[test]
    fn disabled_projection_returns_raw_decode() {
        let s = sched();
        let p = zero_predictor();
        let cfg = SamplerConfig::new(3).with_projection_every(0);
        let out = sample(&cfg, &p, &s).unwrap();
        let mut rngs = vec![rng::seeded(3, rng::streams::SAMPLE)];
        let mut states = vec![rng::normal_array(&mut rngs[0], N_MAX, ROW_DIM)];
        reverse_chain(&mut states, &mut rngs, 40, &s, &p).unwrap();
        let raw = decode_min_len(&LayoutTensor::from_array(states.remove(0)).unwrap(), 0);
        assert_eq!(out, raw);
    }

    fn sample_layout() -> Layout {
        Layout::new(vec![
            Component::new(ComponentType::Background, 0.5, 0.5, 1.0, 1.0, [0.95; 3]),
            Component::new(ComponentType::Text, 0.5, 0.1, 0.8, 0.06, [0.1, 0.2, 0.3]),
            Component::new(ComponentType::Button, 0.5, 0.9, 0.8, 0.07, [0.2, 0.4, 0.9]),
        ])
    }

    #[test]
    fn refine_keeps_pinned_components() {
        let s = sched();
        let p = zero_predictor();
        let original = sample_layout();
        let out = refine(&original, &[0, 2], &SamplerConfig::new(9), 20, &p, &s).unwrap();
        assert!(out.len() >= original.len());
        assert_eq!(out.components[0], original.components[0]);
        assert_eq!(out.components[2], original.components[2]);
        let all = refine(&original, &[0, 1, 2], &SamplerConfig::new(9), 40, &p, &s).unwrap();
        assert_eq!(all.components[..3], original.components[..]);
    }

    #[test]
    fn refine_validates_inputs() {
        let s = sched();
        let p = zero_predictor();
        let original = sample_layout();
        assert!(matches!(
            refine(&original, &[3], &SamplerConfig::new(1), 10, &p, &s),
            Err(Error::ComponentIndex { index: 3, len: 3 })
        ));
        assert!(refine(&original, &[0], &SamplerConfig::new(1), 0, &p, &s).is_err());
        assert!(refine(&original, &[0], &SamplerConfig::new(1), 41, &p, &s).is_err());
    }

    #[test]
    fn refine_batch_matches_single_calls() {
        let s = sched();
        let p = zero_predictor();
        let reqs: Vec<RefineRequest> = [(5usize, 7u64), (20, 8), (5, 9)]
            .iter()
            .map(|&(t, seed)| RefineRequest {
                original: sample_layout(),
                pinned: vec![1],
                t_start: t,
                sampler: SamplerConfig::new(seed),
            })
            .collect();
        let batch = refine_batch(&reqs, &p, &s).unwrap();
        for (r, b) in reqs.iter().zip(&batch) {
            let single = refine(&r.original, &r.pinned, &r.sampler, r.t_start, &p, &s).unwrap();
            assert_eq!(&single, b);
        }
    }
}
