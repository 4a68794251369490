//! MOSUM detection of breaks in factor loadings.

pub mod detect;
pub mod lrcov;
pub mod pipeline;
pub mod profile;
pub mod threshold;

pub use detect::{detect_changes, ChangePoint, ChangePointReport};
pub use lrcov::{default_hac_bandwidth, hac_long_run_cov, LongRunCov, StandardizationMode};
pub use pipeline::{
    run_pipeline, run_pipeline_with_r, select_factor_count, DetectorConfig, PipelineOutput, RStrategy,
    ResolvedConfig,
};
pub use profile::{mosum_profile, MosumProfile, ThresholdMeta};
pub use threshold::{
    asymptotic_pvalue, default_gamma, omega, scale_a, shift_b, threshold_gumbel, GammaBranch, GammaChoice,
};
