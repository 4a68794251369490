//! End-to-end detection: factors, long-run covariance, profile, threshold,
//! local maxima.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::detect::{detect_changes, ChangePointReport};
use super::lrcov::{default_hac_bandwidth, hac_long_run_cov, LongRunCov, StandardizationMode};
use super::profile::{mosum_profile, MosumProfile, ThresholdMeta};
use super::threshold::{default_gamma, omega, threshold_gumbel, GammaBranch, GammaChoice};
use crate::error::{Error, Result};
use crate::factor::{
    eigenvalue_ratio_count, estimate_factors, stable_factor_count, FactorCountReport, FactorEstimate,
};
use crate::panel::{half_dim, Panel};

/// How the number of factors is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RStrategy {
    /// Use `DetectorConfig::r`.
    Fixed,
    /// Subsample-stabilized information criteria.
    IcStable,
    /// Largest ratio of successive eigenvalues.
    EigenRatio,
}

impl fmt::Display for RStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RStrategy::Fixed => "fixed",
            RStrategy::IcStable => "ic-stable",
            RStrategy::EigenRatio => "eigen-ratio",
        })
    }
}

impl FromStr for RStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(RStrategy::Fixed),
            "ic-stable" => Ok(RStrategy::IcStable),
            "eigen-ratio" => Ok(RStrategy::EigenRatio),
            other => Err(Error::invalid(format!(
                "unknown r strategy {other:?} (expected fixed, ic-stable or eigen-ratio)"
            ))),
        }
    }
}

/// Tuning of the detector. Every field has a default, so `{}` is a valid
/// JSON configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Defaults to `fixed` when `r` is given and `ic-stable` otherwise.
    pub r_strategy: Option<RStrategy>,
    pub r: Option<usize>,
    /// Upper bound for data-driven `r`; clipped to `min(N, T) - 1`.
    pub r_max: usize,
    /// MOSUM bandwidth; derived from `(T, N, varrho)` when absent.
    pub gamma: Option<usize>,
    pub varrho: f64,
    /// HAC bandwidth; `floor(T^{1/4})` when absent.
    pub m: Option<usize>,
    pub alpha: f64,
    pub eta: f64,
    pub kappa: f64,
    pub mode: StandardizationMode,
    pub stable_grid: Vec<f64>,
    pub stable_reps: usize,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            r_strategy: None,
            r: None,
            r_max: 8,
            gamma: None,
            varrho: 1.1,
            m: None,
            alpha: 0.05,
            eta: 0.6,
            kappa: 0.2,
            mode: StandardizationMode::Diagonal,
            stable_grid: vec![0.6, 0.7, 0.8, 0.9, 1.0],
            stable_reps: 30,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn strategy(&self) -> RStrategy {
        self.r_strategy.unwrap_or(if self.r.is_some() { RStrategy::Fixed } else { RStrategy::IcStable })
    }

    pub fn validate(&self) -> Result<()> {
        match (self.strategy(), self.r) {
            (RStrategy::Fixed, None) => return Err(Error::invalid("r strategy 'fixed' needs r")),
            (RStrategy::Fixed, Some(0)) => return Err(Error::invalid("r must be at least 1")),
            (s @ (RStrategy::IcStable | RStrategy::EigenRatio), Some(_)) => {
                return Err(Error::invalid(format!("r is given but the r strategy is '{s}'")))
            }
            _ => {}
        }
        if self.r_max == 0 {
            return Err(Error::invalid("r_max must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha={} must lie in (0, 1)", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid(format!("eta={} must lie in (0, 1]", self.eta)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa={} must be non-negative", self.kappa)));
        }
        if !(self.varrho >= 0.0 && self.varrho.is_finite()) {
            return Err(Error::invalid(format!("varrho={} must be non-negative", self.varrho)));
        }
        if self.gamma == Some(0) {
            return Err(Error::invalid("gamma must be at least 1"));
        }
        Ok(())
    }
}

/// Tuning values actually used for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub r: usize,
    pub r_strategy: RStrategy,
    pub gamma: usize,
    /// Present when `gamma` was derived rather than supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_branch: Option<GammaBranch>,
    pub m: usize,
    pub alpha: f64,
    pub eta: f64,
    pub kappa: f64,
    pub mode: StandardizationMode,
    pub d: usize,
    pub n: usize,
    pub t: usize,
    /// Asymptotic critical value before inflation.
    pub threshold_base: f64,
    pub omega: f64,
    pub threshold: f64,
    pub seed: u64,
}

/// Every intermediate artifact of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub factors: FactorEstimate,
    pub factor_count: Option<FactorCountReport>,
    pub lrcov: LongRunCov,
    pub gamma_choice: Option<GammaChoice>,
    pub profile: MosumProfile,
    pub report: ChangePointReport,
}

/// Choose `r` according to the configured strategy.
pub fn select_factor_count(panel: &Panel, config: &DetectorConfig) -> Result<(usize, Option<FactorCountReport>)> {
    config.validate()?;
    let cap = panel.n().min(panel.t()).saturating_sub(1);
    let r_max = config.r_max.min(cap);
    match config.strategy() {
        RStrategy::Fixed => Ok((config.r.expect("validated"), None)),
        RStrategy::IcStable => {
            let rep = stable_factor_count(panel, r_max, &config.stable_grid, config.stable_reps, config.seed)?;
            Ok((rep.r_hat, Some(rep)))
        }
        RStrategy::EigenRatio => {
            let rep = eigenvalue_ratio_count(panel, r_max)?;
            Ok((rep.r_hat, Some(rep)))
        }
    }
}

/// Run the detector on a panel.
pub fn run_pipeline(panel: &Panel, config: &DetectorConfig) -> Result<PipelineOutput> {
    let (r, factor_count) = select_factor_count(panel, config)?;
    run_with_r(panel, config, r, factor_count)
}

/// Run the detector with `r` already chosen; `config.r` and the strategy
/// are ignored.
pub fn run_pipeline_with_r(panel: &Panel, config: &DetectorConfig, r: usize) -> Result<PipelineOutput> {
    let mut cfg = config.clone();
    cfg.r = Some(r);
    cfg.r_strategy = Some(RStrategy::Fixed);
    cfg.validate()?;
    run_with_r(panel, &cfg, r, None)
}

fn run_with_r(
    panel: &Panel,
    config: &DetectorConfig,
    r: usize,
    factor_count: Option<FactorCountReport>,
) -> Result<PipelineOutput> {
    let (n, t) = (panel.n(), panel.t());
    let (gamma, gamma_choice) = match config.gamma {
        Some(g) => (g, None),
        None => {
            let c = default_gamma(t, n, config.varrho)?;
            (c.gamma, Some(c))
        }
    };
    if 2 * gamma > t {
        return Err(Error::invalid(format!("bandwidth gamma={gamma} exceeds T/2 (T={t})")));
    }
    let d = half_dim(r);
    // check the threshold domain before the expensive steps
    let base = threshold_gumbel(t, gamma, d, config.alpha)?;
    let om = omega(t, gamma, config.kappa);
    let threshold = base * om;

    let factors = estimate_factors(panel, r)?;
    let m = config.m.unwrap_or_else(|| default_hac_bandwidth(t));
    let lrcov = hac_long_run_cov(&factors.ghat, m, config.mode)?;
    let profile = mosum_profile(&factors.ghat, gamma, &lrcov)?.with_threshold(ThresholdMeta {
        value: threshold,
        base,
        alpha: config.alpha,
        kappa: config.kappa,
        eta: config.eta,
    });

    let mut report = detect_changes(&profile, config.eta, threshold);
    let labels = panel.time_labels();
    for cp in &mut report.estimates {
        cp.label = labels.get(cp.k - 1).cloned();
    }
    report.config = Some(ResolvedConfig {
        r,
        r_strategy: config.strategy(),
        gamma,
        gamma_branch: gamma_choice.map(|c| c.branch),
        m,
        alpha: config.alpha,
        eta: config.eta,
        kappa: config.kappa,
        mode: config.mode,
        d,
        n,
        t,
        threshold_base: base,
        omega: om,
        threshold,
        seed: config.seed,
    });

    Ok(PipelineOutput { factors, factor_count, lrcov, gamma_choice, profile, report })
}
