use std::fmt::Write as _;
use std::time::Instant;

use log::info;
use rand::RngExt;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::fd::layout_fd;
use super::image::{psnr, ssim};
use crate::dataio::{Corpus, CorpusItem};
use crate::denoiser::DenoiserParams;
use crate::diffusion::{refine_batch, sample_batch, DiffusionSchedule, RefineRequest, SamplerConfig};
use crate::error::{Error, Result};
use crate::layout::{Component, ComponentType, Layout};
use crate::raster::rasterize;
use crate::rng;
use crate::rules::{alignment_contributions, alignment_score, ruled_indices, spacing_violations, RuleConfig};

/// Produces one layout per validation item. `seeds[i]` belongs to `items[i]`.
pub trait Generator {
    /// Stable description hashed into the report.
    fn describe(&self) -> serde_json::Value;
    fn generate(&self, items: &[&CorpusItem], seeds: &[u64]) -> Result<Vec<Layout>>;
}

/// Scripted stand-in for a designer's feedback: pin the best-aligned quarter and regenerate the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackConfig {
    pub enabled: bool,
    pub pin_fraction: f64,
    /// Re-noising depth as a fraction of `T`.
    pub t_start_fraction: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            pin_fraction: 0.25,
            t_start_fraction: 0.5,
        }
    }
}

/// Indices of the `ceil(fraction·n)` visible non-background components with the most
/// matched alignment relations (ties to the lower index).
pub fn feedback_pins(layout: &Layout, fraction: f64, rules: &RuleConfig) -> Vec<usize> {
    let ruled = ruled_indices(layout);
    if ruled.is_empty() {
        return Vec::new();
    }
    let k = ((fraction * ruled.len() as f64).ceil() as usize).clamp(1, ruled.len());
    let contrib = alignment_contributions(layout, rules);
    let mut order = ruled;
    order.sort_by(|&a, &b| contrib[b].cmp(&contrib[a]).then(a.cmp(&b)));
    let mut pins = order[..k].to_vec();
    pins.sort_unstable();
    pins
}

/// Trained denoiser with the sampling options of one evaluation variant.
pub struct DiffusionGenerator<'a> {
    pub params: &'a DenoiserParams,
    pub sched: &'a DiffusionSchedule,
    pub use_condition: bool,
    pub projection_every: usize,
    pub rules: RuleConfig,
    pub feedback: FeedbackConfig,
}

const GENERATION_CHUNK: usize = 128;

impl Generator for DiffusionGenerator<'_> {
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "diffusion",
            "weights_sha256": hex::encode(Sha256::digest(self.params.to_bytes())),
            "timesteps": self.sched.timesteps(),
            "use_condition": self.use_condition,
            "projection_every": self.projection_every,
            "rules": self.rules,
            "feedback": self.feedback,
        })
    }

    fn generate(&self, items: &[&CorpusItem], seeds: &[u64]) -> Result<Vec<Layout>> {
        let mut out = Vec::with_capacity(items.len());
        for (chunk, chunk_seeds) in items.chunks(GENERATION_CHUNK).zip(seeds.chunks(GENERATION_CHUNK)) {
            let cfgs: Vec<SamplerConfig> = chunk
                .iter()
                .zip(chunk_seeds)
                .map(|(item, &seed)| {
                    let mut cfg = SamplerConfig::new(seed).with_projection_every(self.projection_every);
                    cfg.rules = self.rules;
                    if self.use_condition {
                        cfg.condition = Some(item.condition.clone());
                    }
                    cfg
                })
                .collect();
            let mut layouts = sample_batch(&cfgs, self.params, self.sched)?;
            if self.feedback.enabled {
                let t_start = ((self.feedback.t_start_fraction * self.sched.timesteps() as f64)
                    .round() as usize)
                    .clamp(1, self.sched.timesteps());
                let mut requests = Vec::new();
                let mut targets = Vec::new();
                for (i, (layout, cfg)) in layouts.iter().zip(&cfgs).enumerate() {
                    let pinned = feedback_pins(layout, self.feedback.pin_fraction, &self.rules);
                    if pinned.is_empty() {
                        continue;
                    }
                    let mut sampler = cfg.clone();
                    sampler.seed = rng::derive_seed(cfg.seed, 1);
                    requests.push(RefineRequest {
                        original: layout.clone(),
                        pinned,
                        t_start,
                        sampler,
                    });
                    targets.push(i);
                }
                for (i, refined) in targets.into_iter().zip(refine_batch(&requests, self.params, self.sched)?) {
                    layouts[i] = refined;
                }
            }
            out.extend(layouts);
        }
        Ok(out)
    }
}

/// Returns the ground-truth layouts; the oracle upper bound.
pub struct IdentityGenerator;

impl Generator for IdentityGenerator {
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "identity" })
    }

    fn generate(&self, items: &[&CorpusItem], _seeds: &[u64]) -> Result<Vec<Layout>> {
        Ok(items.iter().map(|i| i.layout.clone()).collect())
    }
}

/// Uniformly random boxes; a floor for every metric.
pub struct RandomGenerator;

impl Generator for RandomGenerator {
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "random" })
    }

    fn generate(&self, items: &[&CorpusItem], seeds: &[u64]) -> Result<Vec<Layout>> {
        Ok(seeds[..items.len()]
            .iter()
            .map(|&seed| {
                let mut r = rng::seeded(seed, rng::streams::BASELINE);
                let n = r.random_range(2..=8usize);
                let comps = (0..n)
                    .map(|_| {
                        let t = ComponentType::ALL[r.random_range(0..ComponentType::ALL.len())];
                        let w = r.random_range(0.05..0.9);
                        let h = r.random_range(0.03..0.4);
                        let cx = r.random_range(w / 2.0..=1.0 - w / 2.0);
                        let cy = r.random_range(h / 2.0..=1.0 - h / 2.0);
                        let color = [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()];
                        Component::new(t, cx, cy, w, h, color)
                    })
                    .collect();
                Layout::new(comps)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub seed: u64,
    /// Evaluate at most this many validation items (all when `None`).
    pub max_items: Option<usize>,
    pub rules: RuleConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_items: None,
            rules: RuleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRow {
    pub index: usize,
    pub tag: Option<String>,
    pub seed: u64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub alignment: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub samples: usize,
    pub psnr_db: MeanStd,
    pub ssim: MeanStd,
    pub layout_fd: f64,
    pub mean_alignment: f64,
    pub total_violations: usize,
    pub mean_violations: f64,
    pub config_hash: String,
    pub items: Vec<ItemRow>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,tag,seed,psnr_db,ssim,alignment,violations\n");
        for r in &self.items {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{}",
                r.index,
                r.tag.as_deref().unwrap_or(""),
                r.seed,
                r.psnr_db,
                r.ssim,
                r.alignment,
                r.violations
            );
        }
        out
    }
}

/// Aligned text table, one row per report.
pub fn format_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.model.chars().count())
        .max()
        .unwrap_or(0)
        .max("Model".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>9}  {:>13}  {:>13}  {:>9}  {:>10}",
        "Model", "layout-FD", "PSNR (dB)", "SSIM", "Alignment", "Violations"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 2 + 9 + 2 + 13 + 2 + 13 + 2 + 9 + 2 + 10));
    for r in reports {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.3}  {:>13}  {:>13}  {:>9.3}  {:>10.3}",
            r.model,
            r.layout_fd,
            format!("{:.2}±{:.2}", r.psnr_db.mean, r.psnr_db.std),
            format!("{:.3}±{:.3}", r.ssim.mean, r.ssim.std),
            r.mean_alignment,
            r.mean_violations
        );
    }
    out
}

/// Generates one sample per validation item (conditioned on the item, seeded per item)
/// and scores it against the item's ground truth.
pub fn evaluate(
    model_name: &str,
    generator: &dyn Generator,
    corpus: &Corpus,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let mut indices = corpus.validation.clone();
    if let Some(max) = cfg.max_items {
        indices.truncate(max);
    }
    if indices.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }
    let items: Vec<&CorpusItem> = indices.iter().map(|&i| &corpus.items[i]).collect();
    let seeds: Vec<u64> = indices.iter().map(|&i| rng::derive_seed(cfg.seed, i as u64)).collect();

    let started = Instant::now();
    let generated = generator.generate(&items, &seeds)?;
    info!(
        "{model_name}: generated {} layouts in {:.2}s",
        generated.len(),
        started.elapsed().as_secs_f64()
    );
    if generated.len() != items.len() {
        return Err(Error::Data(format!(
            "generator returned {} layouts for {} items",
            generated.len(),
            items.len()
        )));
    }

    let mut rows = Vec::with_capacity(items.len());
    for (k, ((item, layout), &seed)) in items.iter().zip(&generated).zip(&seeds).enumerate() {
        let (a, b) = (rasterize(layout), rasterize(&item.layout));
        rows.push(ItemRow {
            index: indices[k],
            tag: item.tag.clone(),
            seed,
            psnr_db: psnr(&a, &b)?,
            ssim: ssim(&a, &b)?,
            alignment: alignment_score(layout, &cfg.rules),
            violations: spacing_violations(layout, &cfg.rules),
        });
    }
    let truth: Vec<Layout> = items.iter().map(|i| i.layout.clone()).collect();
    let layout_fd = layout_fd(&generated, &truth, &cfg.rules)?;

    let psnrs: Vec<f64> = rows.iter().map(|r| r.psnr_db).collect();
    let ssims: Vec<f64> = rows.iter().map(|r| r.ssim).collect();
    let total_violations: usize = rows.iter().map(|r| r.violations).sum();
    let n = rows.len() as f64;
    let descriptor = serde_json::json!({
        "generator": generator.describe(),
        "eval": cfg,
        "corpus": corpus.provenance,
        "validation": indices,
    });
    Ok(EvalReport {
        model: model_name.to_string(),
        samples: rows.len(),
        psnr_db: MeanStd::of(&psnrs),
        ssim: MeanStd::of(&ssims),
        layout_fd,
        mean_alignment: rows.iter().map(|r| r.alignment).sum::<f64>() / n,
        total_violations,
        mean_violations: total_violations as f64 / n,
        config_hash: hex::encode(Sha256::digest(descriptor.to_string().as_bytes())),
        items: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synth_corpus;

    fn corpus() -> Corpus {
        synth_corpus(120, 3).unwrap().split(0.5, 1).unwrap()
    }

    #[test]
    fn identity_is_the_upper_bound() {
        let c = corpus();
        let r = evaluate("identity", &IdentityGenerator, &c, &EvalConfig::default()).unwrap();
        assert_eq!(r.samples, 60);
        assert_eq!(r.psnr_db.mean, 100.0);
        assert_eq!(r.ssim.mean, 1.0);
        assert!(r.layout_fd < 1e-6, "{}", r.layout_fd);
        assert_eq!(r.total_violations, 0);
    }

    #[test]
    fn random_stub_is_far_and_reports_are_deterministic() {
        let c = corpus();
        let cfg = EvalConfig::default();
        let a = evaluate("random", &RandomGenerator, &c, &cfg).unwrap();
        let b = evaluate("random", &RandomGenerator, &c, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.layout_fd > 0.5);
        assert!(a.psnr_db.mean < 100.0);
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
        assert_eq!(a.to_csv().lines().count(), 61);
        let table = format_table(&[a.clone()]);
        assert!(table.lines().nth(2).unwrap().starts_with("random"));
    }

    #[test]
    fn empty_validation_is_an_error() {
        let c = synth_corpus(10, 1).unwrap();
        assert!(evaluate("x", &IdentityGenerator, &c, &EvalConfig::default()).is_err());
    }

    #[test]
    fn pins_prefer_aligned_components() {
        let rules = RuleConfig::default();
        let l = Layout::new(vec![
            Component::new(ComponentType::Background, 0.5, 0.5, 1.0, 1.0, [1.0; 3]),
            Component::from_edges(ComponentType::Text, 0.1, 0.1, 0.5, 0.2, [0.0; 3]),
            Component::from_edges(ComponentType::Text, 0.63, 0.5, 0.77, 0.6, [0.0; 3]),
            Component::from_edges(ComponentType::Text, 0.1, 0.3, 0.5, 0.4, [0.0; 3]),
            Component::from_edges(ComponentType::Text, 0.1, 0.7, 0.3, 0.8, [0.0; 3]),
        ]);
        assert_eq!(feedback_pins(&l, 0.25, &rules), vec![1]);
        assert_eq!(feedback_pins(&l, 0.5, &rules), vec![1, 3]);
        assert!(feedback_pins(&Layout::default(), 0.25, &rules).is_empty());
    }
}
