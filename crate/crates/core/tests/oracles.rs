#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeMap;

use common::*;
use emask::apriori::{Apriori, CountingStrategy};
use emask::emask::{combination_counts, reconstructed_support, solve_true_counts, CombinationCounts};
use emask::{build_transition_matrix, distort_database, mine, mine_distorted, DistortionParams, Itemset};

fn as_map(l: &emask::FrequentLattice) -> BTreeMap<Vec<u32>, u64> {
    l.iter().map(|(s, c)| (s.items().to_vec(), *c as u64)).collect()
}

#[test]
fn apriori_matches_exhaustive_enumeration() {
    for seed in 0..40 {
        let db = random_db(seed, 150, 10);
        for sup in [0.05, 0.2, 0.5] {
            let want = brute_force_frequent(&db, sup);
            for strategy in [CountingStrategy::RowScan, CountingStrategy::Columnar] {
                let got = Apriori { strategy, max_level: None }.mine(&db, sup).unwrap();
                assert_eq!(as_map(&got), want, "seed {seed}, sup {sup}, {strategy:?}");
            }
        }
    }
}

#[test]
fn combination_counts_match_row_patterns() {
    for seed in 100..130 {
        let db = random_db(seed, 200, 12);
        let items: Vec<u32> = (0..db.num_items().min(6) as u32).collect();
        let cand = Itemset::new(items.clone()).unwrap();
        let ones = |sub: &[u32]| {
            let cols: Vec<u32> = sub.to_vec();
            Some(pattern_histogram(&db, &cols)[cols.len()])
        };
        let got = combination_counts(&cand, ones, db.dbsize() as u64).unwrap();
        let want: Vec<f64> = pattern_histogram(&db, &items).into_iter().map(|c| c as f64).collect();
        assert_eq!(got.counts, want, "seed {seed}");
    }
}

#[test]
fn transition_matrix_matches_pattern_enumeration() {
    for n in 1..=8 {
        for (p, q) in [(0.5, 0.97), (0.9, 0.9), (0.3, 0.99), (0.0, 1.0), (1.0, 0.2)] {
            let m = build_transition_matrix(n, p, q);
            let want = enumerated_transition(n, p, q);
            for i in 0..=n {
                for j in 0..=n {
                    assert!((m.get(i, j) - want[i][j]).abs() < 1e-12, "n={n} p={p} q={q} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn solve_matches_explicit_inverse() {
    for n in 1..=10 {
        for (p, q) in [(0.5, 0.97), (0.9, 0.9), (0.3, 0.99), (0.8, 0.4)] {
            let m = build_transition_matrix(n, p, q);
            let b: Vec<f64> = (0..=n).map(|k| ((k * 37 + 11) % 97) as f64 * 13.0).collect();
            let got = solve_true_counts(&m, &CombinationCounts::distorted(b.iter().map(|&x| x as u64).collect())).unwrap();
            let dense: Vec<Vec<f64>> = (0..=n).map(|i| (0..=n).map(|j| m.get(i, j)).collect()).collect();
            let want = inverse_solve(&dense, &b);
            let diff: Vec<f64> = got.counts.iter().zip(&want).map(|(a, b)| a - b).collect();
            assert!(max_abs(&diff) <= 1e-9 * max_abs(&want).max(1.0), "n={n} p={p} q={q}");
        }
    }
}

#[test]
fn reconstruction_helper_agrees_with_miner() {
    let db = random_db(7, 200, 8);
    let params = DistortionParams::new(0.8, 0.85, 5).unwrap();
    let dist = distort_database(&db, &params).unwrap();
    let lattice = mine_distorted(&dist, 0.8, 0.85, 0.1).unwrap();
    assert!(!lattice.is_empty());
    for (set, count) in lattice.iter() {
        let s = reconstructed_support(set, &dist, 0.8, 0.85).unwrap();
        assert!((s * db.dbsize() as f64 - count).abs() < 1e-6 * count.abs().max(1.0));
    }
}

#[test]
fn identity_channel_reproduces_exact_mining() {
    for seed in 200..210 {
        let db = random_db(seed, 300, 12);
        let dist = distort_database(&db, &DistortionParams::new(1.0, 1.0, seed).unwrap()).unwrap();
        assert_eq!(dist, db);
        let exact = mine(&db, 0.1).unwrap();
        let rec = mine_distorted(&dist, 1.0, 1.0, 0.1).unwrap();
        assert_eq!(as_map(&exact), as_map(&rec));
        for ((_, a), (_, b)) in exact.iter().zip(rec.iter()) {
            assert_eq!(a, b);
        }
    }
}
