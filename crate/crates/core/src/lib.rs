//! Detection of multiple change points in the loadings of large factor
//! models by moving sums of the estimated factors' second moments.
//!
//! The pipeline is: [`panel`] ingestion, principal-component [`factor`]
//! extraction, the [`mosum`] scan with a HAC-standardized statistic and an
//! extreme-value threshold, and a [`simlab`] harness for Monte Carlo work.

pub mod error;
pub mod factor;
pub mod mosum;
pub mod panel;
pub mod simlab;

pub use error::{Error, Result};
pub use factor::{
    bai_ng_ic, eigenvalue_ratio_count, estimate_factors, spectrum, stable_factor_count, Criterion,
    FactorCountReport, FactorEstimate,
};
pub use mosum::{
    detect_changes, hac_long_run_cov, mosum_profile, run_pipeline, threshold_gumbel, ChangePointReport,
    DetectorConfig, LongRunCov, MosumProfile, StandardizationMode,
};
pub use panel::{load_panel, read_panel, unvech, vech, Layout, Panel, SymHalfVec};
pub use simlab::{evaluate, monte_carlo, simulate, DgpKind, DgpSpec, EvalSummary, SimulatedPanel};
