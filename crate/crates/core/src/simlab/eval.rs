//! Scoring of estimated change points against the simulation truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dgp::{DgpSpec, SimulatedPanel};
use crate::mosum::{ChangePointReport, StandardizationMode};
use crate::panel::format_f64;

/// Distribution bins for `R_hat - R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bucket {
    #[serde(rename = "<=-2")]
    AtMostMinus2,
    #[serde(rename = "-1")]
    Minus1,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "+1")]
    Plus1,
    #[serde(rename = ">=+2")]
    AtLeastPlus2,
}

impl Bucket {
    pub const ALL: [Bucket; 5] =
        [Bucket::AtMostMinus2, Bucket::Minus1, Bucket::Zero, Bucket::Plus1, Bucket::AtLeastPlus2];

    pub fn of(diff: i64) -> Self {
        match diff {
            i64::MIN..=-2 => Bucket::AtMostMinus2,
            -1 => Bucket::Minus1,
            0 => Bucket::Zero,
            1 => Bucket::Plus1,
            _ => Bucket::AtLeastPlus2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Bucket::AtMostMinus2 => "<=-2",
            Bucket::Minus1 => "-1",
            Bucket::Zero => "0",
            Bucket::Plus1 => "+1",
            Bucket::AtLeastPlus2 => ">=+2",
        }
    }
}

/// Outcome of a single replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    /// Factor count used by the detector.
    pub r: usize,
    pub estimates: Vec<usize>,
    pub truth: Vec<usize>,
    pub diff: i64,
    pub bucket: Bucket,
    /// `hits[j]`: some estimate lies within `log T` of the `j`-th true change.
    pub hits: Vec<bool>,
}

/// Compare the reported locations with the truth. A true change counts as
/// found when some estimate lies within the natural log of `T` of it.
pub fn evaluate(report: &ChangePointReport, truth: &SimulatedPanel) -> ReplicateRecord {
    let est = report.locations();
    let r = report.config.as_ref().map_or(0, |c| c.r);
    score(&est, &truth.true_changepoints, truth.panel.t(), 0, truth.spec.seed, r)
}

pub(crate) fn score(
    estimates: &[usize],
    truth: &[usize],
    t: usize,
    replicate: usize,
    seed: u64,
    r: usize,
) -> ReplicateRecord {
    let radius = (t as f64).ln();
    let hits = truth
        .iter()
        .map(|&k| estimates.iter().any(|&e| (e.abs_diff(k) as f64) <= radius))
        .collect();
    let diff = estimates.len() as i64 - truth.len() as i64;
    ReplicateRecord {
        replicate,
        seed,
        r,
        estimates: estimates.to_vec(),
        truth: truth.to_vec(),
        diff,
        bucket: Bucket::of(diff),
        hits,
    }
}

/// Aggregate over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub spec: DgpSpec,
    pub mode: StandardizationMode,
    pub reps: usize,
    pub seed: u64,
    /// Fractions in [`Bucket::ALL`] order.
    pub histogram: [f64; 5],
    /// Per true change, fraction of replicates that located it.
    pub accuracy: Vec<f64>,
    /// How often each factor count was used.
    pub r_counts: BTreeMap<usize, usize>,
    pub notes: Vec<String>,
    pub records: Vec<ReplicateRecord>,
}

impl EvalSummary {
    pub fn from_records(
        spec: DgpSpec,
        mode: StandardizationMode,
        seed: u64,
        records: Vec<ReplicateRecord>,
    ) -> Self {
        let reps = records.len();
        let mut counts = [0usize; 5];
        let n_true = spec.true_changepoints().len();
        let mut found = vec![0usize; n_true];
        let mut r_counts = BTreeMap::new();
        for rec in &records {
            counts[rec.bucket.index()] += 1;
            for (f, &h) in found.iter_mut().zip(&rec.hits) {
                *f += h as usize;
            }
            *r_counts.entry(rec.r).or_insert(0) += 1;
        }
        let denom = reps.max(1) as f64;
        Self {
            spec,
            mode,
            reps,
            seed,
            histogram: counts.map(|c| c as f64 / denom),
            accuracy: found.iter().map(|&f| f as f64 / denom).collect(),
            r_counts,
            notes: spec.notes(),
            records,
        }
    }

    pub fn bucket(&self, b: Bucket) -> f64 {
        self.histogram[b.index()]
    }

    /// Header for [`EvalSummary::csv_row`] with `n_true` accuracy columns.
    pub fn csv_header(n_true: usize) -> Vec<String> {
        let mut h: Vec<String> = ["model", "T", "N", "rho_f", "rho_e", "mode", "reps"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(Bucket::ALL.iter().map(|b| format!("diff{}", b.label())));
        h.extend((1..=n_true).map(|j| format!("acc_j{j}")));
        h
    }

    /// One table row: design, mode, bucket masses and accuracies.
    pub fn csv_row(&self) -> Vec<String> {
        let mut row = vec![
            self.spec.kind.to_string(),
            self.spec.t.to_string(),
            self.spec.n.to_string(),
            format_f64(self.spec.rho_f),
            format_f64(self.spec.rho_e),
            self.mode.to_string(),
            self.reps.to_string(),
        ];
        row.extend(self.histogram.iter().map(|&v| format_f64(v)));
        row.extend(self.accuracy.iter().map(|&v| format_f64(v)));
        row
    }
}
