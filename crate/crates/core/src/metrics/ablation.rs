use log::info;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate, format_table, DiffusionGenerator, EvalConfig, EvalReport, FeedbackConfig};
use crate::dataio::Corpus;
use crate::denoiser::{train, DenoiserParams, TrainConfig};
use crate::diffusion::ScheduleConfig;
use crate::error::{Error, Result};

pub const LABEL_NO_CONDITION: &str = "Without Conditional Inputs";
pub const LABEL_NO_DESIGN_OPT: &str = "Without Design Optimization";
pub const LABEL_NO_FEEDBACK: &str = "Without Feedback Mechanism";
pub const LABEL_FULL: &str = "Full Model (Ours)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub schedule: ScheduleConfig,
    pub train: TrainConfig,
    pub projection_every: usize,
    pub feedback: FeedbackConfig,
    pub eval: EvalConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleConfig::default(),
            train: TrainConfig::default(),
            projection_every: 25,
            feedback: FeedbackConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// One row of the ablation: how its model is trained and sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: &'static str,
    pub train: TrainConfig,
    pub use_condition: bool,
    pub projection_every: usize,
    pub feedback: FeedbackConfig,
}

/// The four variants in table order. Each differs from the full model only in its ablated flags.
pub fn variants(cfg: &AblationConfig) -> [Variant; 4] {
    let full = Variant {
        label: LABEL_FULL,
        train: cfg.train.clone(),
        use_condition: true,
        projection_every: cfg.projection_every,
        feedback: FeedbackConfig {
            enabled: true,
            ..cfg.feedback
        },
    };
    [
        Variant {
            label: LABEL_NO_CONDITION,
            train: TrainConfig {
                condition_dropout_p: 1.0,
                ..cfg.train.clone()
            },
            use_condition: false,
            ..full.clone()
        },
        Variant {
            label: LABEL_NO_DESIGN_OPT,
            train: TrainConfig {
                design_penalty_lambda: 0.0,
                ..cfg.train.clone()
            },
            projection_every: 0,
            ..full.clone()
        },
        Variant {
            label: LABEL_NO_FEEDBACK,
            feedback: FeedbackConfig {
                enabled: false,
                ..full.feedback
            },
            ..full.clone()
        },
        full,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<EvalReport>,
}

impl AblationReport {
    pub fn row(&self, label: &str) -> Option<&EvalReport> {
        self.rows.iter().find(|r| r.model == label)
    }

    pub fn to_table(&self) -> String {
        format_table(&self.rows)
    }
}

/// Per-row count of runs in which the full model's layout-FD was strictly lower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionSummary {
    pub runs: usize,
    pub full_beats_no_condition: usize,
    pub full_beats_no_design_opt: usize,
    pub full_beats_no_feedback: usize,
}

impl DirectionSummary {
    pub fn of(reports: &[AblationReport]) -> Self {
        let wins = |label: &str| {
            reports
                .iter()
                .filter(|r| match (r.row(LABEL_FULL), r.row(label)) {
                    (Some(full), Some(other)) => full.layout_fd < other.layout_fd,
                    _ => false,
                })
                .count()
        };
        Self {
            runs: reports.len(),
            full_beats_no_condition: wins(LABEL_NO_CONDITION),
            full_beats_no_design_opt: wins(LABEL_NO_DESIGN_OPT),
            full_beats_no_feedback: wins(LABEL_NO_FEEDBACK),
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "full < no-condition: {}/{}\nfull < no-design-opt: {}/{}\nfull < no-feedback: {}/{}\n",
            self.full_beats_no_condition,
            self.runs,
            self.full_beats_no_design_opt,
            self.runs,
            self.full_beats_no_feedback,
            self.runs
        )
    }
}

/// Trains each distinct variant configuration once (variants with identical training share
/// weights) and evaluates all four on the corpus's validation split.
pub fn ablation_suite(corpus: &Corpus, cfg: &AblationConfig) -> Result<AblationReport> {
    if corpus.train.is_empty() || corpus.validation.is_empty() {
        return Err(Error::Data("ablation needs a corpus with train and validation splits".into()));
    }
    let sched = cfg.schedule.build()?;
    let data = corpus.examples(&corpus.train)?;
    let mut trained: Vec<(TrainConfig, DenoiserParams)> = Vec::new();
    let mut rows = Vec::with_capacity(4);
    for v in variants(cfg) {
        let params = match trained.iter().find(|(t, _)| *t == v.train) {
            Some((_, p)) => p.clone(),
            None => {
                info!("training `{}`", v.label);
                let out = train(&data, &v.train, &sched, &mut |_, _| {})?;
                trained.push((v.train.clone(), out.params.clone()));
                out.params
            }
        };
        let generator = DiffusionGenerator {
            params: &params,
            sched: &sched,
            use_condition: v.use_condition,
            projection_every: v.projection_every,
            rules: cfg.eval.rules,
            feedback: v.feedback,
        };
        rows.push(evaluate(v.label, &generator, corpus, &cfg.eval)?);
    }
    Ok(AblationReport { rows })
}
