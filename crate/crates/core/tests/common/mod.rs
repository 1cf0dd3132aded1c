//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the library's counting,
//! reconstruction or linear-algebra code.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use emask::TransactionDatabase;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random database with per-row Bernoulli items of varying density.
pub fn random_db(seed: u64, max_rows: usize, max_items: usize) -> TransactionDatabase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = rng.random_range(1..=max_items);
    let rows = rng.random_range(1..=max_rows);
    let density: f64 = rng.random_range(0.05..0.6);
    let data: Vec<Vec<u32>> = (0..rows)
        .map(|_| (0..items as u32).filter(|_| rng.random_bool(density)).collect())
        .collect();
    TransactionDatabase::from_itemsets(items, data).unwrap()
}

pub fn rows_as_sets(db: &TransactionDatabase) -> Vec<Vec<u32>> {
    (0..db.dbsize()).map(|r| db.row_items(r)).collect()
}

/// Every itemset over at most 16 items whose row count reaches the threshold,
/// found by enumerating all item masks.
pub fn brute_force_frequent(db: &TransactionDatabase, sup_min: f64) -> BTreeMap<Vec<u32>, u64> {
    let n = db.num_items();
    assert!(n <= 16);
    let masks: Vec<u32> = rows_as_sets(db)
        .iter()
        .map(|row| row.iter().fold(0u32, |m, &i| m | (1 << i)))
        .collect();
    let need = sup_min * db.dbsize() as f64;
    let mut out = BTreeMap::new();
    for set in 1u32..(1u32 << n) {
        let count = masks.iter().filter(|&&m| m & set == set).count() as u64;
        if count as f64 + 1e-9 >= need {
            out.insert((0..n as u32).filter(|i| set >> i & 1 == 1).collect(), count);
        }
    }
    out
}

/// Rows of `db` with exactly `k` ones among `items`, for k = 0..=|items|.
pub fn pattern_histogram(db: &TransactionDatabase, items: &[u32]) -> Vec<u64> {
    let mut h = vec![0u64; items.len() + 1];
    for row in rows_as_sets(db) {
        h[items.iter().filter(|i| row.contains(i)).count()] += 1;
    }
    h
}

/// Transition probabilities by summing over every concrete source/destination
/// bit pattern: entry `(i, j)` is the chance that a row with `j` true ones ends
/// with `i` distorted ones.
pub fn enumerated_transition(n: usize, p: f64, q: f64) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n + 1]; n + 1];
    for j in 0..=n {
        let src: u32 = (1u32 << j) - 1;
        for dst in 0u32..(1u32 << n) {
            let mut prob = 1.0;
            for b in 0..n {
                let (s, d) = (src >> b & 1, dst >> b & 1);
                prob *= match (s, d) {
                    (1, 1) => p,
                    (1, 0) => 1.0 - p,
                    (0, 0) => q,
                    _ => 1.0 - q,
                };
            }
            m[dst.count_ones() as usize][j] += prob;
        }
    }
    m
}

/// `M^{-1} b` via an explicitly inverted matrix.
pub fn inverse_solve(m: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = m.len();
    let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let inv = mat.try_inverse().expect("invertible");
    (inv * DVector::from_column_slice(b)).iter().copied().collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}
