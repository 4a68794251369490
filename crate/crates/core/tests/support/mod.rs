//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
/// Works on a plain row-major copy so it shares no code with the library's
/// linear algebra.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Eigenvalues of `(NT)^{-1} X X^T` (N x N geometry) via Jacobi.
pub fn panel_eigenvalues(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, t) = x.shape();
    let gram = DMatrix::from_fn(n, n, |i, j| (0..t).map(|s| x[(i, s)] * x[(j, s)]).sum::<f64>());
    jacobi_eigenvalues(&gram).into_iter().map(|v| v / (n * t) as f64).collect()
}

/// `argmax_k ev[k-1] / ev[k]` over `1..=r_max`, smallest `k` on ties.
pub fn eigen_ratio_argmax(ev: &[f64], r_max: usize) -> usize {
    let mut best = (1, f64::NEG_INFINITY);
    for k in 1..=r_max {
        let ratio = ev[k - 1] / ev[k];
        if ratio > best.1 {
            best = (k, ratio);
        }
    }
    best.0
}

/// MOSUM statistics from scratch: each window sum recomputed for every `k`
/// and the quadratic form evaluated with an explicit inverse.
pub fn brute_force_profile(g: &DMatrix<f64>, gamma: usize, v: &DMatrix<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (t, r) = g.shape();
    let pairs: Vec<(usize, usize)> = (0..r).flat_map(|j| (j..r).map(move |i| (i, j))).collect();
    let vinv = v.clone().try_inverse().expect("invertible");
    let mut raw = Vec::new();
    let mut stats = Vec::new();
    for k in gamma..=(t - gamma) {
        // 1-based t = k+1..k+gamma is 0-based k..k+gamma
        let m: Vec<f64> = pairs
            .iter()
            .map(|&(i, j)| {
                let right: f64 = (k..k + gamma).map(|s| g[(s, i)] * g[(s, j)]).sum();
                let left: f64 = (k - gamma..k).map(|s| g[(s, i)] * g[(s, j)]).sum();
                (right - left) / (2.0 * gamma as f64).sqrt()
            })
            .collect();
        let mv = nalgebra::DVector::from_column_slice(&m);
        stats.push((mv.transpose() * &vinv * &mv)[(0, 0)].max(0.0).sqrt());
        raw.push(m);
    }
    (raw, stats)
}
