//! Principal-components estimation of the pseudo factors and of their number.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;

/// Estimated pseudo factors and loadings.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorEstimate {
    /// `T x r`; row `t` is the estimated pseudo factor at time `t`,
    /// normalized so that `ghat^T ghat / T = I`.
    pub ghat: DMatrix<f64>,
    /// Leading eigenvalues of `(NT)^{-1} X^T X` (T x T geometry), descending.
    pub phi: Vec<f64>,
    /// `N x r` loadings, `X ghat / T`.
    pub loadings: DMatrix<f64>,
}

impl FactorEstimate {
    pub fn r(&self) -> usize {
        self.ghat.ncols()
    }

    pub fn t(&self) -> usize {
        self.ghat.nrows()
    }
}

/// Extract `r` pseudo factors from the thin SVD `X = U S W^T`:
/// `ghat = sqrt(T) W[:, ..r]` and `phi_k = s_k^2 / (NT)`.
///
/// Each factor column is flipped so that its largest-magnitude entry is
/// positive (first such entry on ties).
pub fn estimate_factors(panel: &Panel, r: usize) -> Result<FactorEstimate> {
    let x = panel.values();
    let (n, t) = x.shape();
    if r == 0 || r > n.min(t) {
        return Err(Error::invalid(format!(
            "factor count r={r} must lie in 1..={}",
            n.min(t)
        )));
    }
    let svd = x.clone().svd(false, true);
    let sv = &svd.singular_values;
    if !(sv[0] > 0.0) {
        return Err(Error::Degenerate("panel is identically zero".into()));
    }
    if sv[r - 1] <= 1e-12 * sv[0] {
        return Err(Error::Degenerate(format!(
            "panel has numerical rank below the requested r={r}"
        )));
    }
    let v_t = svd.v_t.expect("right singular vectors were requested");

    let scale = (t as f64).sqrt();
    let mut ghat = v_t.rows(0, r).transpose() * scale;
    for mut col in ghat.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
    let nt = (n * t) as f64;
    let phi = sv.iter().take(r).map(|s| s * s / nt).collect();
    let loadings = x * &ghat / t as f64;
    Ok(FactorEstimate { ghat, phi, loadings })
}

/// All eigenvalues of `(NT)^{-1} X X^T`, descending. Computed from the
/// smaller of the two Gram matrices; the nonzero spectra coincide.
pub fn spectrum(panel: &Panel) -> Vec<f64> {
    let x = panel.values();
    let (n, t) = x.shape();
    let gram = if n <= t {
        let xt = x.transpose();
        xt.tr_mul(&xt)
    } else {
        x.tr_mul(x)
    };
    let nt = (n * t) as f64;
    let mut ev: Vec<f64> = gram
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.max(0.0) / nt)
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Factor-number selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "IC1")]
    Ic1,
    #[serde(rename = "IC2")]
    Ic2,
    #[serde(rename = "IC3")]
    Ic3,
    #[serde(rename = "ER")]
    EigenRatio,
}

impl Criterion {
    pub const INFORMATION: [Criterion; 3] = [Criterion::Ic1, Criterion::Ic2, Criterion::Ic3];

    /// Bai and Ng (2002) penalty per factor; `None` for the eigenvalue ratio.
    pub fn penalty(self, n: usize, t: usize) -> Option<f64> {
        let (nf, tf) = (n as f64, t as f64);
        let c2 = n.min(t) as f64;
        let scale = (nf + tf) / (nf * tf);
        match self {
            Criterion::Ic1 => Some(scale * (nf * tf / (nf + tf)).ln()),
            Criterion::Ic2 => Some(scale * c2.ln()),
            Criterion::Ic3 => Some(c2.ln() / c2),
            Criterion::EigenRatio => None,
        }
    }
}

/// Outcome of a factor-number estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorCountReport {
    pub r_hat: usize,
    pub r_max: usize,
    pub per_criterion: BTreeMap<Criterion, usize>,
    /// Information criterion values for `r = 0..=r_max` (full sample).
    pub ic_curves: BTreeMap<Criterion, Vec<f64>>,
    /// Leading `r_max + 1` eigenvalues of `(NT)^{-1} X X^T`.
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eigen_ratios: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsampling: Option<SubsampleVotes>,
}

/// Weighted subsample votes behind [`stable_factor_count`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleVotes {
    pub grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// criterion -> (r -> accumulated weight)
    pub votes: BTreeMap<Criterion, BTreeMap<usize, f64>>,
}

fn check_r_max(n: usize, t: usize, r_max: usize) -> Result<()> {
    let cap = n.min(t).saturating_sub(1);
    if r_max == 0 || r_max > cap {
        return Err(Error::invalid(format!(
            "r_max={r_max} must lie in 1..={cap} for an {n}x{t} panel"
        )));
    }
    Ok(())
}

fn median3(mut v: [usize; 3]) -> usize {
    v.sort_unstable();
    v[1]
}

/// Information criteria from a descending spectrum. `V(r)` is the tail sum
/// of eigenvalues, i.e. the mean squared residual after removing `r`
/// principal components.
fn ic_from_spectrum(ev: &[f64], n: usize, t: usize, r_max: usize) -> Result<FactorCountReport> {
    let total: f64 = ev.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("panel is identically zero".into()));
    }
    // residual variances below this are indistinguishable from an exact fit
    let floor = total * 1e-12;
    let mut tail: Vec<f64> = Vec::with_capacity(r_max + 1);
    for r in 0..=r_max {
        tail.push(ev[r..].iter().sum::<f64>().max(floor));
    }

    let mut per_criterion = BTreeMap::new();
    let mut ic_curves = BTreeMap::new();
    for c in Criterion::INFORMATION {
        let p = c.penalty(n, t).expect("information criterion");
        let curve: Vec<f64> = tail
            .iter()
            .enumerate()
            .map(|(r, v)| v.ln() + r as f64 * p)
            .collect();
        let mut best = 1;
        for r in 2..=r_max {
            if curve[r] < curve[best] {
                best = r;
            }
        }
        per_criterion.insert(c, best);
        ic_curves.insert(c, curve);
    }
    let r_hat = median3([
        per_criterion[&Criterion::Ic1],
        per_criterion[&Criterion::Ic2],
        per_criterion[&Criterion::Ic3],
    ]);
    Ok(FactorCountReport {
        r_hat,
        r_max,
        per_criterion,
        ic_curves,
        eigenvalues: ev[..=r_max].to_vec(),
        eigen_ratios: Vec::new(),
        subsampling: None,
    })
}

/// The three Bai–Ng information criteria on the full panel. `r_hat` is the
/// median of the three choices.
pub fn bai_ng_ic(panel: &Panel, r_max: usize) -> Result<FactorCountReport> {
    check_r_max(panel.n(), panel.t(), r_max)?;
    ic_from_spectrum(&spectrum(panel), panel.n(), panel.t(), r_max)
}

/// Subsample-stabilized information criteria.
///
/// For every fraction `k` in `grid` and each replicate, `floor(k N)` series
/// are drawn without replacement together with a contiguous window of
/// `floor(k T)` time points. Each subsample votes for the criterion's argmin
/// with weight `k`; the heaviest `r` wins per criterion (smaller `r` on
/// ties) and `r_hat` is the median over the three criteria.
///
/// Replicate `i` draws from ChaCha stream `i` of `seed`, so the result does
/// not depend on evaluation order.
pub fn stable_factor_count(
    panel: &Panel,
    r_max: usize,
    grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<FactorCountReport> {
    let (n, t) = (panel.n(), panel.t());
    check_r_max(n, t, r_max)?;
    if grid.is_empty() {
        return Err(Error::invalid("subsample grid is empty"));
    }
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    for &k in grid {
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::invalid(format!("subsample fraction {k} outside (0, 1]")));
        }
        let (ns, ts) = ((k * n as f64).floor() as usize, (k * t as f64).floor() as usize);
        if ns < 2 || ts < 4 {
            return Err(Error::invalid(format!(
                "fraction {k} leaves a {ns}x{ts} subsample (need at least 2x4)"
            )));
        }
    }

    let mut full = bai_ng_ic(panel, r_max)?;
    let mut votes: BTreeMap<Criterion, BTreeMap<usize, f64>> = BTreeMap::new();

    for (g, &k) in grid.iter().enumerate() {
        let ns = (k * n as f64).floor() as usize;
        let ts = (k * t as f64).floor() as usize;
        let sub_r_max = r_max.min(ns.min(ts) - 1);
        for rep in 0..reps {
            let choices = if ns == n && ts == t {
                full.per_criterion.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((g * reps + rep) as u64);
                let mut series = rand::seq::index::sample(&mut rng, n, ns).into_vec();
                series.sort_unstable();
                let start = rng.random_range(0..=t - ts);
                let sub = panel.subpanel(&series, start, ts)?;
                ic_from_spectrum(&spectrum(&sub), ns, ts, sub_r_max)?.per_criterion
            };
            for (c, r) in choices {
                *votes.entry(c).or_default().entry(r).or_insert(0.0) += k;
            }
        }
    }

    for c in Criterion::INFORMATION {
        let tally = &votes[&c];
        // BTreeMap iterates r ascending, so strict > keeps the smaller r on ties
        let mut best = (0usize, f64::NEG_INFINITY);
        for (&r, &w) in tally {
            if w > best.1 {
                best = (r, w);
            }
        }
        full.per_criterion.insert(c, best.0);
    }
    full.r_hat = median3([
        full.per_criterion[&Criterion::Ic1],
        full.per_criterion[&Criterion::Ic2],
        full.per_criterion[&Criterion::Ic3],
    ]);
    full.subsampling = Some(SubsampleVotes {
        grid: grid.to_vec(),
        reps,
        seed,
        votes,
    });
    Ok(full)
}

/// Eigenvalue-ratio choice on a descending spectrum: the `k` in
/// `1..=r_max` maximizing `ev[k-1] / ev[k]` (smallest `k` on ties).
///
/// A vanishing `ev[k]` gives an infinite ratio and ends the search at `k`.
/// Returns the chosen `k` and the ratios evaluated.
pub fn eigenvalue_ratio_from_spectrum(ev: &[f64], r_max: usize) -> Result<(usize, Vec<f64>)> {
    if r_max == 0 || r_max + 1 > ev.len() {
        return Err(Error::invalid(format!(
            "r_max={r_max} needs at least r_max+1 eigenvalues, have {}",
            ev.len()
        )));
    }
    if !(ev[0] > 0.0) {
        return Err(Error::Degenerate("leading eigenvalue is zero".into()));
    }
    let zero = ev[0] * 1e-12;
    let mut ratios = Vec::with_capacity(r_max);
    let mut best = (1usize, f64::NEG_INFINITY);
    for k in 1..=r_max {
        if ev[k] <= zero {
            ratios.push(f64::INFINITY);
            return Ok((k, ratios));
        }
        let ratio = ev[k - 1] / ev[k];
        ratios.push(ratio);
        if ratio > best.1 {
            best = (k, ratio);
        }
    }
    Ok((best.0, ratios))
}

pub fn eigenvalue_ratio_count(panel: &Panel, r_max: usize) -> Result<FactorCountReport> {
    check_r_max(panel.n(), panel.t(), r_max)?;
    let ev = spectrum(panel);
    let (r_hat, ratios) = eigenvalue_ratio_from_spectrum(&ev, r_max)?;
    Ok(FactorCountReport {
        r_hat,
        r_max,
        per_criterion: BTreeMap::from([(Criterion::EigenRatio, r_hat)]),
        ic_curves: BTreeMap::new(),
        eigenvalues: ev[..=r_max].to_vec(),
        eigen_ratios: ratios,
        subsampling: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DVector, SymmetricEigen};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, t: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, t, |_, _| StandardNormal.sample(&mut rng))
    }

    fn rank2(n: usize, t: usize, seed: u64) -> Panel {
        let l = gaussian(n, 2, seed);
        let f = gaussian(2, t, seed + 1);
        Panel::from_matrix(l * f).unwrap()
    }

    #[test]
    fn rank_one_recovery() {
        let lambda = DVector::from_column_slice(&[1.0, 1.0]);
        let f = DVector::from_column_slice(&[1.0, -1.0, 1.0, -1.0]);
        let panel = Panel::from_matrix(&lambda * f.transpose()).unwrap();
        let fe = estimate_factors(&panel, 1).unwrap();
        for (g, want) in fe.ghat.iter().zip(f.iter()) {
            assert!((g - want).abs() < 1e-12, "{g} vs {want}");
        }
        // sigma^2 = |lambda|^2 |f|^2 = 8, NT = 8
        assert!((fe.phi[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_and_eigen_oracle() {
        let panel = Panel::from_matrix(gaussian(10, 50, 3)).unwrap();
        let fe = estimate_factors(&panel, 3).unwrap();
        let gram = fe.ghat.tr_mul(&fe.ghat) / 50.0;
        assert!((gram - DMatrix::<f64>::identity(3, 3)).norm() < 1e-8);

        // dense eigendecomposition of the T x T matrix (NT)^{-1} X^T X
        let x = panel.values();
        let big = x.tr_mul(x) / 500.0;
        let eig = SymmetricEigen::new(big.clone());
        let mut oracle: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for k in 0..3 {
            assert!((fe.phi[k] - oracle[k]).abs() <= 1e-8 * oracle[k]);
        }
        assert!(fe.phi.windows(2).all(|w| w[0] > w[1]) && fe.phi[2] > 0.0);

        let resid = &big * &fe.ghat - &fe.ghat * DMatrix::from_diagonal(&DVector::from_vec(fe.phi.clone()));
        assert!(resid.norm() <= 1e-6 * fe.ghat.norm());
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let panel = Panel::from_matrix(gaussian(8, 30, 11)).unwrap();
        let fe = estimate_factors(&panel, 3).unwrap();
        for col in fe.ghat.column_iter() {
            let max = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let first = col.iter().find(|v| v.abs() == max).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn scaling_equivariance() {
        let x = gaussian(12, 40, 5);
        let a = estimate_factors(&Panel::from_matrix(x.clone()).unwrap(), 2).unwrap();
        let b = estimate_factors(&Panel::from_matrix(x * 3.0).unwrap(), 2).unwrap();
        assert!((&a.ghat - &b.ghat).amax() < 1e-10);
        for (pa, pb) in a.phi.iter().zip(&b.phi) {
            assert!((pb - 9.0 * pa).abs() < 1e-10 * pb);
        }
    }

    #[test]
    fn svd_reconstruction() {
        let x = gaussian(15, 35, 8);
        let svd = x.clone().svd(true, true);
        let rec = svd.recompose().unwrap();
        assert!((&x - rec).norm() <= 1e-8 * x.norm());
    }

    #[test]
    fn estimate_factors_errors() {
        let panel = Panel::from_matrix(gaussian(3, 10, 1)).unwrap();
        assert!(matches!(estimate_factors(&panel, 4), Err(Error::InvalidInput(_))));
        assert!(matches!(estimate_factors(&panel, 0), Err(Error::InvalidInput(_))));
        let zero = Panel::from_matrix(DMatrix::zeros(3, 10)).unwrap();
        assert!(matches!(estimate_factors(&zero, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bai_ng_finds_noiseless_rank_two() {
        let panel = rank2(20, 100, 42);
        let rep = bai_ng_ic(&panel, 6).unwrap();
        for c in Criterion::INFORMATION {
            assert_eq!(rep.per_criterion[&c], 2, "{c:?}");
            assert_eq!(rep.ic_curves[&c].len(), 7);
        }
        assert_eq!(rep.r_hat, 2);
        assert_eq!(rep.eigenvalues.len(), 7);
    }

    #[test]
    fn bai_ng_matches_direct_residual_sums() {
        let panel = Panel::from_matrix(gaussian(30, 60, 9)).unwrap();
        let rep = bai_ng_ic(&panel, 6).unwrap();
        let x = panel.values();
        let nt = (30 * 60) as f64;
        let mut direct = vec![x.norm_squared() / nt];
        for r in 1..=6 {
            let fe = estimate_factors(&panel, r).unwrap();
            let resid = x - &fe.loadings * fe.ghat.transpose();
            direct.push(resid.norm_squared() / nt);
        }
        assert!(direct.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        for c in Criterion::INFORMATION {
            let p = c.penalty(30, 60).unwrap();
            let curve: Vec<f64> = direct.iter().enumerate().map(|(r, v)| v.ln() + r as f64 * p).collect();
            for (a, b) in curve.iter().zip(&rep.ic_curves[&c]) {
                assert!((a - b).abs() < 1e-9);
            }
            let argmin = (1..=6).min_by(|&a, &b| curve[a].total_cmp(&curve[b])).unwrap();
            assert_eq!(rep.per_criterion[&c], argmin);
        }
    }

    #[test]
    fn bai_ng_rejects_r_max_at_min_dimension() {
        let panel = Panel::from_matrix(gaussian(5, 20, 2)).unwrap();
        assert!(bai_ng_ic(&panel, 5).is_err());
        assert!(bai_ng_ic(&panel, 4).is_ok());
    }

    #[test]
    fn penalties_match_closed_forms() {
        let (n, t) = (100usize, 400usize);
        let s = 500.0 / 40000.0;
        assert!((Criterion::Ic1.penalty(n, t).unwrap() - s * (40000.0f64 / 500.0).ln()).abs() < 1e-15);
        assert!((Criterion::Ic2.penalty(n, t).unwrap() - s * 100f64.ln()).abs() < 1e-15);
        assert!((Criterion::Ic3.penalty(n, t).unwrap() - 100f64.ln() / 100.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_ratio_examples() {
        assert_eq!(eigenvalue_ratio_from_spectrum(&[10.0, 5.0, 0.1, 0.05], 3).unwrap().0, 2);
        assert_eq!(eigenvalue_ratio_from_spectrum(&[9.0, 3.0, 1.0], 2).unwrap().0, 1);
        let (k, ratios) = eigenvalue_ratio_from_spectrum(&[4.0, 2.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(k, 2);
        assert!(ratios[1].is_infinite());
        assert!(eigenvalue_ratio_from_spectrum(&[1.0, 0.5], 2).is_err());
    }

    #[test]
    fn eigen_ratio_on_rank_two() {
        let rep = eigenvalue_ratio_count(&rank2(20, 60, 4), 5).unwrap();
        assert_eq!(rep.r_hat, 2);
        assert_eq!(rep.per_criterion[&Criterion::EigenRatio], 2);
    }

    #[test]
    fn stable_count_on_rank_two() {
        let rep = stable_factor_count(&rank2(20, 100, 6), 6, &[0.6, 0.8, 1.0], 3, 1).unwrap();
        assert_eq!(rep.r_hat, 2);
        let votes = &rep.subsampling.as_ref().unwrap().votes;
        for c in Criterion::INFORMATION {
            assert_eq!(votes[&c].keys().copied().collect::<Vec<_>>(), vec![2]);
        }
    }

    #[test]
    fn stable_count_full_grid_reduces_to_bai_ng() {
        let panel = Panel::from_matrix(gaussian(25, 80, 13)).unwrap();
        let plain = bai_ng_ic(&panel, 5).unwrap();
        let stable = stable_factor_count(&panel, 5, &[1.0], 1, 99).unwrap();
        assert_eq!(plain.per_criterion, stable.per_criterion);
        assert_eq!(plain.r_hat, stable.r_hat);
        assert_eq!(plain.ic_curves, stable.ic_curves);
    }

    #[test]
    fn stable_count_is_seed_deterministic() {
        let panel = Panel::from_matrix(gaussian(25, 80, 17)).unwrap();
        let a = stable_factor_count(&panel, 5, &[0.6, 0.9], 4, 7).unwrap();
        let b = stable_factor_count(&panel, 5, &[0.6, 0.9], 4, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stable_count_validates_grid() {
        let panel = Panel::from_matrix(gaussian(10, 20, 1)).unwrap();
        assert!(stable_factor_count(&panel, 3, &[0.0], 1, 0).is_err());
        assert!(stable_factor_count(&panel, 3, &[1.5], 1, 0).is_err());
        assert!(stable_factor_count(&panel, 3, &[0.1], 1, 0).is_err());
        assert!(stable_factor_count(&panel, 3, &[0.5], 0, 0).is_err());
    }
}
