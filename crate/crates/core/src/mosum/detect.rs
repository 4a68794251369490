//! Local-maximum rule that turns a MOSUM profile into change-point estimates.

use serde::{Deserialize, Serialize};

use super::pipeline::ResolvedConfig;
use super::profile::MosumProfile;
use super::threshold::asymptotic_pvalue;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// Last time point of the pre-change regime (1-based).
    pub k: usize,
    pub stat: f64,
    /// Asymptotic p-value of `stat`; absent when `T/gamma` is too small for
    /// the extreme-value approximation.
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    pub estimates: Vec<ChangePoint>,
    pub count: usize,
    pub threshold: f64,
    pub gamma: usize,
    pub eta: f64,
    /// Half-width `floor(eta * gamma)` of the local-maximum window.
    pub radius: usize,
    pub max_stat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ResolvedConfig>,
}

impl ChangePointReport {
    pub fn locations(&self) -> Vec<usize> {
        self.estimates.iter().map(|c| c.k).collect()
    }
}

/// Report every `k` whose statistic exceeds `threshold` and is maximal
/// within `|j - k| <= floor(eta * gamma)`, the window being clipped to the
/// profile. On a flat plateau only the leftmost point is kept: a candidate
/// must be strictly larger than every earlier point in its window.
pub fn detect_changes(profile: &MosumProfile, eta: f64, threshold: f64) -> ChangePointReport {
    let radius = (eta * profile.gamma as f64).floor() as usize;
    let s = &profile.stats;
    let mut estimates = Vec::new();
    for i in 0..s.len() {
        let v = s[i];
        if !(v > threshold) {
            continue;
        }
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(s.len() - 1);
        let is_peak = s[lo..i].iter().all(|&w| v > w) && s[i + 1..=hi].iter().all(|&w| v >= w);
        if is_peak {
            let k = profile.gamma + i;
            estimates.push(ChangePoint {
                k,
                stat: v,
                p_value: asymptotic_pvalue(v, profile.t, profile.gamma, profile.d).ok(),
                label: None,
            });
        }
    }
    ChangePointReport {
        count: estimates.len(),
        estimates,
        threshold,
        gamma: profile.gamma,
        eta,
        radius,
        max_stat: profile.max_stat(),
        config: None,
    }
}
