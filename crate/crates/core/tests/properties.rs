mod support;

use mosum_core::mosum::{detect_changes, mosum_profile, threshold_gumbel, LongRunCov, MosumProfile, StandardizationMode};
use mosum_core::simlab::{Bucket, EvalSummary, ReplicateRecord};
use mosum_core::{read_panel, unvech, vech, DgpSpec, Layout, Panel};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn symmetric(r: usize, seed: u64) -> DMatrix<f64> {
    let a = support::gaussian(r, r, seed);
    (&a + a.transpose()) * 0.5
}

fn profile_of(stats: Vec<f64>, gamma: usize) -> MosumProfile {
    let t = stats.len() + 2 * gamma - 1;
    MosumProfile { gamma, t, r: 1, d: 1, raw: DMatrix::zeros(stats.len(), 1), stats, threshold: None }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vech_round_trip(r in 1usize..8, seed in any::<u64>()) {
        let s = symmetric(r, seed);
        let v = vech(&s).unwrap();
        prop_assert_eq!(v.entries().len(), r * (r + 1) / 2);
        prop_assert_eq!(unvech(&v), s);
    }

    #[test]
    fn rolling_profile_matches_recomputation(
        t in 20usize..90,
        r in 1usize..4,
        frac in 0.05f64..0.5,
        full in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let gamma = ((t as f64 * frac) as usize).max(1);
        let g = support::gaussian(t, r, seed);
        let d = r * (r + 1) / 2;
        let v = if full {
            let a = support::gaussian(d, d, seed ^ 1);
            DMatrix::identity(d, d) + &a * a.transpose() / d as f64
        } else {
            DMatrix::from_fn(d, d, |i, j| if i == j { 0.5 + i as f64 } else { 0.0 })
        };
        let mode = if full { StandardizationMode::Full } else { StandardizationMode::Diagonal };
        let lr = LongRunCov::from_matrix(v.clone(), mode, 0).unwrap();
        prop_assume!(lr.ridge() == 0.0);
        let prof = mosum_profile(&g, gamma, &lr).unwrap();
        let (raw, stats) = support::brute_force_profile(&g, gamma, &v);
        prop_assert_eq!(prof.len(), t - 2 * gamma + 1);
        for (i, (a, b)) in prof.stats.iter().zip(&stats).enumerate() {
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0), "k={} {} vs {}", gamma + i, a, b);
            for (j, m) in raw[i].iter().enumerate() {
                prop_assert!((prof.raw[(i, j)] - m).abs() <= 1e-9 * m.abs().max(1.0));
            }
        }
    }

    #[test]
    fn detected_points_are_separated_local_maxima(
        stats in prop::collection::vec(0.0f64..5.0, 1..200),
        gamma in 1usize..30,
        eta in 0.1f64..1.0,
        threshold in 0.0f64..4.0,
    ) {
        let prof = profile_of(stats.clone(), gamma);
        let rep = detect_changes(&prof, eta, threshold);
        let radius = (eta * gamma as f64).floor() as usize;
        prop_assert_eq!(rep.radius, radius);
        prop_assert_eq!(rep.count, rep.estimates.len());
        let ks = rep.locations();
        prop_assert!(ks.windows(2).all(|w| w[1] - w[0] > radius));
        for cp in &rep.estimates {
            let i = cp.k - gamma;
            prop_assert_eq!(cp.stat, stats[i]);
            prop_assert!(cp.stat > threshold);
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(stats.len() - 1);
            prop_assert!(stats[lo..=hi].iter().all(|&s| s <= cp.stat));
        }
        // the global maximum above the threshold is always found
        let (imax, &smax) = stats.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
        if smax > threshold {
            prop_assert!(ks.contains(&(gamma + imax)));
        }
    }

    #[test]
    fn threshold_decreases_in_level(
        ratio in 3.0f64..50.0,
        gamma in 10usize..200,
        d in 1usize..30,
        a1 in 0.001f64..0.5,
        a2 in 0.001f64..0.5,
    ) {
        prop_assume!((a1 - a2).abs() > 1e-6);
        let t = (ratio * gamma as f64) as usize;
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let strict = threshold_gumbel(t, gamma, d, lo).unwrap();
        let loose = threshold_gumbel(t, gamma, d, hi).unwrap();
        prop_assert!(strict > loose);
    }

    #[test]
    fn histogram_partitions_replicates(diffs in prop::collection::vec(-4i64..5, 1..60)) {
        let records: Vec<ReplicateRecord> = diffs
            .iter()
            .enumerate()
            .map(|(i, &diff)| ReplicateRecord {
                replicate: i,
                seed: i as u64,
                r: 3,
                estimates: vec![],
                truth: vec![133, 267],
                diff,
                bucket: Bucket::of(diff),
                hits: vec![false, i % 2 == 0],
            })
            .collect();
        let s = EvalSummary::from_records(DgpSpec::m1(0), StandardizationMode::Diagonal, 0, records);
        prop_assert!((s.histogram.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for b in Bucket::ALL {
            let expected = diffs.iter().filter(|&&d| Bucket::of(d) == b).count() as f64 / diffs.len() as f64;
            prop_assert_eq!(s.bucket(b), expected);
        }
        prop_assert!(s.accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn panel_csv_round_trip_is_exact(n in 1usize..6, t in 2usize..20, seed in any::<u64>(), rows in any::<bool>()) {
        let x = support::gaussian(n, t, seed) * 1e3;
        let panel = Panel::from_matrix(x).unwrap();
        let layout = if rows { Layout::SeriesInRows } else { Layout::SeriesInColumns };
        let mut buf = Vec::new();
        panel.write_csv(&mut buf, layout).unwrap();
        let back = read_panel(buf.as_slice(), layout, false).unwrap();
        prop_assert_eq!(back.values(), panel.values());
        prop_assert_eq!(back.series_labels(), panel.series_labels());
        let centred = back.demean();
        for i in 0..n {
            prop_assert!(centred.values().row(i).sum().abs() < 1e-9 * t as f64 * 1e3);
        }
    }
}
