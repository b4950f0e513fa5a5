//! Evaluation: raster PSNR/SSIM, layout-FD over hand-crafted layout features, the
//! per-split evaluation report, and the four-row ablation harness.

mod ablation;
mod eval;
mod fd;
mod image;

pub use ablation::{
    ablation_suite, variants, AblationConfig, AblationReport, DirectionSummary, Variant, LABEL_FULL,
    LABEL_NO_CONDITION, LABEL_NO_DESIGN_OPT, LABEL_NO_FEEDBACK,
};
pub use eval::{
    evaluate, feedback_pins, format_table, DiffusionGenerator, EvalConfig, EvalReport,
    FeedbackConfig, Generator, IdentityGenerator, ItemRow, MeanStd, RandomGenerator,
};
pub use fd::{
    frechet_distance, layout_fd, layout_features, GaussianFit, COVARIANCE_RIDGE, FEATURE_DIM,
    MIN_FD_SET,
};
pub use image::{psnr, ssim, PSNR_CAP_DB, SSIM_C1, SSIM_C2, SSIM_STRIDE, SSIM_WINDOW};
