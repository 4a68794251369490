//! Extreme-value threshold for the maximally selected MOSUM statistic and
//! the default bandwidth rule.
//!
//! Under no change, `a(T/g) * max_k T(k) - b_d(T/g)` is asymptotically
//! Gumbel-type with distribution function `exp(-2 exp(-x))`, where
//! `a(x) = sqrt(2 log x)` and
//! `b_d(x) = 2 log x + d/2 log log x + log(1/2) - log Gamma(d/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn scale_a(x: f64) -> f64 {
    (2.0 * x.ln()).sqrt()
}

pub fn shift_b(x: f64, d: usize) -> f64 {
    let l = x.ln();
    2.0 * l + d as f64 * l.ln() / 2.0 - std::f64::consts::LN_2 - ln_gamma_half(d)
}

/// `log Gamma(d/2)` for a positive integer `d`, from the exact product forms
/// `Gamma(k) = (k-1)!` and `Gamma(k + 1/2) = sqrt(pi) prod_{i<k} (i + 1/2)`.
pub(crate) fn ln_gamma_half(d: usize) -> f64 {
    assert!(d > 0, "Gamma(d/2) needs d > 0");
    let k = d / 2;
    if d % 2 == 0 {
        (1..k).map(|i| (i as f64).ln()).sum()
    } else {
        0.5 * std::f64::consts::PI.ln() + (0..k).map(|i| (i as f64 + 0.5).ln()).sum::<f64>()
    }
}

fn ratio(t: usize, gamma: usize) -> Result<f64> {
    if gamma == 0 {
        return Err(Error::Domain("bandwidth must be positive".into()));
    }
    let x = t as f64 / gamma as f64;
    if !(x > std::f64::consts::E) {
        return Err(Error::Domain(format!(
            "T/gamma = {x:.4} must exceed e; choose a smaller bandwidth"
        )));
    }
    Ok(x)
}

/// Asymptotic level-`alpha` critical value
/// `(b_d(T/g) - log log (1/sqrt(1 - alpha))) / a(T/g)`.
pub fn threshold_gumbel(t: usize, gamma: usize, d: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha={alpha} must lie in (0, 1)")));
    }
    if d == 0 {
        return Err(Error::invalid("dimension d must be positive"));
    }
    let x = ratio(t, gamma)?;
    // log(1/sqrt(1-alpha)) = -log1p(-alpha)/2
    let c = (-0.5 * (-alpha).ln_1p()).ln();
    Ok((shift_b(x, d) - c) / scale_a(x))
}

/// Asymptotic p-value of an observed maximum: `1 - exp(-2 exp(-x))` with
/// `x = a(T/g) * stat - b_d(T/g)`.
pub fn asymptotic_pvalue(max_stat: f64, t: usize, gamma: usize, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("dimension d must be positive"));
    }
    let x = ratio(t, gamma)?;
    let z = scale_a(x) * max_stat - shift_b(x, d);
    Ok((-(-2.0 * (-z).exp()).exp_m1()).clamp(0.0, 1.0))
}

/// Threshold inflation `max(1, log(T/g))^kappa`.
pub fn omega(t: usize, gamma: usize, kappa: f64) -> f64 {
    let l = (t as f64 / gamma as f64).ln();
    l.max(1.0).powf(kappa)
}

/// Which reading of the bandwidth rule produced the returned value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaBranch {
    /// `floor(T^{2 zeta} log^rho T)`.
    Printed,
    /// `floor(T^{zeta} log^rho T)`, capped at `floor(T/2) - 1`.
    Fallback,
}

/// Bandwidth choice with both candidate values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaChoice {
    pub gamma: usize,
    pub branch: GammaBranch,
    pub zeta: f64,
    pub printed: usize,
    pub fallback: usize,
    pub cap: usize,
}

/// Default bandwidth with `zeta = max(2/5, 1 - log N / log T)`.
///
/// The rule `floor(T^{2 zeta} log^rho(T))` exceeds `T/2` at common sample
/// sizes (864 at `T = 400, N = 100`); when it is infeasible the exponent
/// `zeta` is used instead and the result is capped at `floor(T/2) - 1`.
pub fn default_gamma(t: usize, n: usize, varrho: f64) -> Result<GammaChoice> {
    if t < 8 || n < 2 {
        return Err(Error::invalid(format!("default bandwidth needs T >= 8 and N >= 2 (T={t}, N={n})")));
    }
    let (tf, nf) = (t as f64, n as f64);
    let zeta = (0.4f64).max(1.0 - nf.ln() / tf.ln());
    let log_term = tf.ln().powf(varrho);
    let printed = (tf.powf(2.0 * zeta) * log_term).floor() as usize;
    let fallback_raw = (tf.powf(zeta) * log_term).floor() as usize;
    let cap = t / 2 - 1;
    let fallback = fallback_raw.min(cap).max(1);
    let (gamma, branch) = if printed <= cap && printed >= 1 {
        (printed, GammaBranch::Printed)
    } else {
        (fallback, GammaBranch::Fallback)
    };
    Ok(GammaChoice { gamma, branch, zeta, printed, fallback, cap })
}
