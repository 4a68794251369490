//! Bartlett-kernel HAC estimate of the long-run covariance of `vech(g g^T)`.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{half_dim, vech_outer_into, vech_indices};

/// How the MOSUM vector is standardized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardizationMode {
    /// Full quadratic form with the inverse long-run covariance.
    Full,
    /// Divide each coordinate by its long-run variance only.
    #[default]
    Diagonal,
}

impl std::fmt::Display for StandardizationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StandardizationMode::Full => "full",
            StandardizationMode::Diagonal => "diagonal",
        })
    }
}

impl std::str::FromStr for StandardizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "diagonal" | "diag" => Ok(Self::Diagonal),
            other => Err(Error::invalid(format!("unknown standardization mode {other:?}"))),
        }
    }
}

/// Conditioning limit for the full-mode matrix: smallest eigenvalue over
/// largest must exceed this.
const MIN_RELATIVE_EIGENVALUE: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;

/// Long-run covariance ready for standardizing MOSUM vectors.
#[derive(Debug, Clone)]
pub struct LongRunCov {
    matrix: DMatrix<f64>,
    mode: StandardizationMode,
    bandwidth: usize,
    ridge: f64,
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
}

impl LongRunCov {
    /// Validate a long-run covariance and prepare it for standardization.
    ///
    /// In diagonal mode the off-diagonal entries are discarded. In full mode
    /// the matrix is Cholesky-factorized; if it is numerically singular a
    /// ridge of `1e-10 * trace / d` is added once before giving up.
    pub fn from_matrix(matrix: DMatrix<f64>, mode: StandardizationMode, bandwidth: usize) -> Result<Self> {
        let (d, c) = matrix.shape();
        if d != c || d == 0 {
            return Err(Error::DimensionMismatch { expected: d, actual: c });
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if !(asym <= SYMMETRY_TOL * matrix.amax().max(1.0)) {
            return Err(Error::Asymmetric { max_deviation: asym });
        }
        let mut matrix = (&matrix + matrix.transpose()) * 0.5;
        if let Some(i) = (0..d).find(|&i| !(matrix[(i, i)] > 0.0)) {
            return Err(Error::Standardization(format!(
                "long-run variance of coordinate {i} is {} (must be positive)",
                matrix[(i, i)]
            )));
        }

        match mode {
            StandardizationMode::Diagonal => {
                let diag = matrix.diagonal();
                matrix = DMatrix::from_diagonal(&diag);
                Ok(Self { matrix, mode, bandwidth, ridge: 0.0, chol: None })
            }
            StandardizationMode::Full => {
                if let Some(chol) = well_conditioned_cholesky(&matrix) {
                    return Ok(Self { matrix, mode, bandwidth, ridge: 0.0, chol: Some(chol) });
                }
                let ridge = MIN_RELATIVE_EIGENVALUE * matrix.trace() / d as f64;
                let mut ridged = matrix.clone();
                for i in 0..d {
                    ridged[(i, i)] += ridge;
                }
                match well_conditioned_cholesky(&ridged) {
                    Some(chol) => Ok(Self { matrix, mode, bandwidth, ridge, chol: Some(chol) }),
                    None => Err(Error::Standardization(
                        "long-run covariance is singular even after ridge conditioning; \
                         use diagonal standardization"
                            .into(),
                    )),
                }
            }
        }
    }

    /// The estimated matrix (diagonal mode: its diagonal only). Any ridge is
    /// not included; see [`LongRunCov::ridge`].
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn mode(&self) -> StandardizationMode {
        self.mode
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `v^T V^{-1} v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim());
        match &self.chol {
            None => v
                .iter()
                .enumerate()
                .map(|(i, x)| x * x / self.matrix[(i, i)])
                .sum(),
            Some(chol) => {
                // ||L^{-1} v||^2 by forward substitution
                let l = chol.l_dirty();
                let d = v.len();
                let mut y = vec![0.0; d];
                for i in 0..d {
                    let mut s = v[i];
                    for j in 0..i {
                        s -= l[(i, j)] * y[j];
                    }
                    y[i] = s / l[(i, i)];
                }
                y.iter().map(|x| x * x).sum()
            }
        }
    }
}

fn well_conditioned_cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let ev = m.symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if !(hi > 0.0) || !(lo > MIN_RELATIVE_EIGENVALUE * hi) {
        return None;
    }
    Cholesky::new(m.clone())
}

/// `Z_t = vech(g_t g_t^T - I_r)` for every row of `factors` (`T x r`), as a `T x d` matrix.
pub(crate) fn centered_outer_products(factors: &DMatrix<f64>) -> DMatrix<f64> {
    let (t, r) = factors.shape();
    let d = half_dim(r);
    let diag_pos: Vec<usize> = vech_indices(r)
        .iter()
        .enumerate()
        .filter(|(_, (i, j))| i == j)
        .map(|(k, _)| k)
        .collect();
    let mut z = DMatrix::zeros(t, d);
    let mut g = vec![0.0; r];
    let mut buf = vec![0.0; d];
    for s in 0..t {
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = factors[(s, k)];
        }
        vech_outer_into(&g, &mut buf);
        for &k in &diag_pos {
            buf[k] -= 1.0;
        }
        for (k, v) in buf.iter().enumerate() {
            z[(s, k)] = *v;
        }
    }
    z
}

/// Raw Bartlett estimate `Gamma(0) + sum_{l=1}^{m} (1 - l/(m+1)) (Gamma(l) + Gamma(l)^T)`
/// of the rows of `z` (no mean correction), before any validation.
pub(crate) fn bartlett_sum(z: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let (t, _) = z.shape();
    let tf = t as f64;
    let mut v = z.tr_mul(z) / tf;
    for lag in 1..=m {
        let lead = z.rows(lag, t - lag);
        let lagged = z.rows(0, t - lag);
        let gamma = lead.tr_mul(&lagged) / tf;
        let w = 1.0 - lag as f64 / (m as f64 + 1.0);
        v += (&gamma + gamma.transpose()) * w;
    }
    v
}

/// HAC long-run covariance of `vech(g_t g_t^T - I)` with a Bartlett kernel
/// of bandwidth `m`.
pub fn hac_long_run_cov(
    factors: &DMatrix<f64>,
    m: usize,
    mode: StandardizationMode,
) -> Result<LongRunCov> {
    let t = factors.nrows();
    if factors.ncols() == 0 {
        return Err(Error::invalid("factor matrix has no columns"));
    }
    if t < 2 || m > t - 2 {
        return Err(Error::invalid(format!("HAC bandwidth m={m} must not exceed T-2={}", t.saturating_sub(2))));
    }
    let z = centered_outer_products(factors);
    LongRunCov::from_matrix(bartlett_sum(&z, m), mode, m)
}

/// Default HAC bandwidth `floor(T^{1/4})`.
pub fn default_hac_bandwidth(t: usize) -> usize {
    let mut m = (t as f64).powf(0.25).floor() as usize;
    // guard against powf rounding just below an exact fourth power
    while (m + 1).pow(4) <= t {
        m += 1;
    }
    m
}
