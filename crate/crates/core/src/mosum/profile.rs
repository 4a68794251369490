//! Moving-sum scan over `vech(g_t g_t^T)`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lrcov::LongRunCov;
use crate::error::{Error, Result};
use crate::panel::{format_f64, half_dim, vech_outer_into};

/// Threshold and tuning attached to a profile once it has been computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMeta {
    /// Threshold actually applied, `D~(alpha) * omega`.
    pub value: f64,
    /// The asymptotic critical value before inflation.
    pub base: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub eta: f64,
}

/// Standardized MOSUM statistics `T(k)` for `gamma <= k <= T - gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct MosumProfile {
    pub gamma: usize,
    pub t: usize,
    pub r: usize,
    pub d: usize,
    /// `stats[i] = T(gamma + i)`.
    pub stats: Vec<f64>,
    /// Row `i` holds `M(gamma + i)`.
    pub raw: DMatrix<f64>,
    pub threshold: Option<ThresholdMeta>,
}

impl MosumProfile {
    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// Time indices `k` covered by the profile.
    pub fn locations(&self) -> std::ops::RangeInclusive<usize> {
        self.gamma..=self.t - self.gamma
    }

    /// `T(k)`; `None` outside `gamma..=T-gamma`.
    pub fn stat_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.gamma).and_then(|i| self.stats.get(i).copied())
    }

    pub fn max_stat(&self) -> f64 {
        self.stats.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn with_threshold(mut self, meta: ThresholdMeta) -> Self {
        self.threshold = Some(meta);
        self
    }

    /// CSV with columns `k, stat, normalized_stat, threshold`; the
    /// normalized statistic is `stat / threshold`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "stat", "normalized_stat", "threshold"])?;
        let thr = self.threshold.map(|m| m.value);
        for (k, s) in self.locations().zip(&self.stats) {
            let (norm, thr_s) = match thr {
                Some(v) => (format_f64(s / v), format_f64(v)),
                None => (String::new(), String::new()),
            };
            w.write_record([k.to_string(), format_f64(*s), norm, thr_s])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// `vech(g_t g_t^T)` for every row of the `T x r` factor matrix.
pub(crate) fn outer_products(factors: &DMatrix<f64>) -> DMatrix<f64> {
    let (t, r) = factors.shape();
    let d = half_dim(r);
    let mut y = DMatrix::zeros(t, d);
    let mut g = vec![0.0; r];
    let mut buf = vec![0.0; d];
    for s in 0..t {
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = factors[(s, k)];
        }
        vech_outer_into(&g, &mut buf);
        for (k, v) in buf.iter().enumerate() {
            y[(s, k)] = *v;
        }
    }
    y
}

/// MOSUM profile of the `T x r` factor matrix with bandwidth `gamma`.
///
/// `M(k) = (2 gamma)^{-1/2} vech(sum_{t=k+1}^{k+gamma} g_t g_t^T - sum_{t=k-gamma+1}^{k} g_t g_t^T)`
/// with 1-based `t`, and `T(k) = sqrt(M(k)^T V^{-1} M(k))`. The two window
/// sums are updated by one outer product per side per step.
pub fn mosum_profile(factors: &DMatrix<f64>, gamma: usize, lrcov: &LongRunCov) -> Result<MosumProfile> {
    let (t, r) = factors.shape();
    if r == 0 {
        return Err(Error::invalid("factor matrix has no columns"));
    }
    if gamma == 0 || 2 * gamma > t {
        return Err(Error::invalid(format!("bandwidth gamma={gamma} needs 2 <= 2*gamma <= T={t}")));
    }
    let d = half_dim(r);
    if lrcov.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: lrcov.dim() });
    }

    let y = outer_products(factors);
    let mut left = vec![0.0; d];
    let mut right = vec![0.0; d];
    for s in 0..gamma {
        for k in 0..d {
            left[k] += y[(s, k)];
            right[k] += y[(s + gamma, k)];
        }
    }

    let len = t - 2 * gamma + 1;
    let scale = 1.0 / (2.0 * gamma as f64).sqrt();
    let mut stats = Vec::with_capacity(len);
    let mut raw = DMatrix::zeros(len, d);
    let mut m = vec![0.0; d];
    for i in 0..len {
        // k = gamma + i; left covers rows k-gamma..k, right covers k..k+gamma (0-based)
        if i > 0 {
            let k = gamma + i;
            for c in 0..d {
                left[c] += y[(k - 1, c)] - y[(k - 1 - gamma, c)];
                right[c] += y[(k - 1 + gamma, c)] - y[(k - 1, c)];
            }
        }
        for c in 0..d {
            m[c] = (right[c] - left[c]) * scale;
            raw[(i, c)] = m[c];
        }
        stats.push(lrcov.quad_form(&m).max(0.0).sqrt());
    }

    Ok(MosumProfile { gamma, t, r, d, stats, raw, threshold: None })
}
