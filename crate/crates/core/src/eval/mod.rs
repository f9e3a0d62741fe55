//! Evaluation protocols: zero-shot classification under alpha levels, the
//! proposal-ranking pipeline with its preprocessing ensemble, competing
//! region-focus baselines, and metric aggregation.

mod baselines;
mod classify;
mod dataset;
mod metrics;
mod preprocess;
mod rec;

pub use baselines::{
    annulus_contains, compare_baselines, dataset_mean_color, image_level_mask_baseline,
    outcome_metrics, red_circle_baseline, BaselineOptions, BASELINE_ROWS,
};
pub use classify::{
    alpha_level_sweep, classify_embeddings, region_alpha, zero_shot_classify, AlphaLevel,
    ClassPromptSet, DEFAULT_TEMPLATE,
};
pub use dataset::{build_eval_set, EvalRegion, EvalSet};
pub use metrics::{aggregate_metrics, rank_classes, ClassifyOutcome, EvalReport, ReportRow};
pub use preprocess::{
    background_blur, box_to_alpha, crop_square_zero_fill, gaussian_blur, grayscale, PreprocessSpec,
    SIGMA_REFERENCE_WIDTH,
};
pub use rec::{rec_select, rec_select_crop_only, Proposal};
