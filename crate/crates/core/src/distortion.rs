//! Symbol-specific randomized distortion: a 1 survives with probability `p`,
//! a 0 survives with probability `q`, independently per entry.
//!
//! Randomness is counter based. Row `r` reads ChaCha8 stream `r` under a key
//! derived from the seed, and item `i` of that row consumes the `i`-th 32-bit
//! word of the stream. The output is therefore a pure function of
//! `(seed, row, item)` and does not depend on scheduling or thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits;
use crate::corpus::TransactionDatabase;
use crate::error::{Error, Result};

/// Below this distance from 1, `p + q` makes the transition matrix singular.
pub const SINGULARITY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionParams {
    /// Probability that a 1 stays 1.
    pub p: f64,
    /// Probability that a 0 stays 0.
    pub q: f64,
    pub seed: u64,
}

impl DistortionParams {
    pub fn new(p: f64, q: f64, seed: u64) -> Result<Self> {
        let params = Self { p, q, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is not a probability")));
            }
        }
        Ok(())
    }

    /// True when the distorted data still permits support reconstruction.
    pub fn is_reconstructible(&self) -> bool {
        (self.p + self.q - 1.0).abs() >= SINGULARITY_EPS
    }
}

/// Acceptance thresholds on a uniform 32-bit draw.
#[derive(Clone, Copy)]
struct Thresholds {
    keep_one: u64,
    keep_zero: u64,
}

impl Thresholds {
    fn new(params: &DistortionParams) -> Self {
        let scale = (1u64 << 32) as f64;
        Self {
            keep_one: (params.p * scale) as u64,
            keep_zero: (params.q * scale) as u64,
        }
    }
}

fn stream_key(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
    key
}

fn distort_row_into(
    row: &[u64],
    num_items: usize,
    key: &[u8; 32],
    row_index: u64,
    th: Thresholds,
    draws: &mut [u32],
    out: &mut [u64],
) {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(row_index);
    for d in draws.iter_mut() {
        *d = rng.next_u32();
    }
    out.iter_mut().for_each(|w| *w = 0);
    for (item, &u) in draws.iter().enumerate().take(num_items) {
        let keep = if bits::test(row, item) {
            u64::from(u) < th.keep_one
        } else {
            u64::from(u) < th.keep_zero
        };
        if keep == bits::test(row, item) {
            bits::set(out, item);
        }
    }
}

/// Distorts every row of `db`. Rows are processed in parallel.
pub fn distort_database(db: &TransactionDatabase, params: &DistortionParams) -> Result<TransactionDatabase> {
    params.validate()?;
    let key = stream_key(params.seed);
    let th = Thresholds::new(params);
    let wpr = db.words_per_row();
    let n = db.num_items();
    let mut out = vec![0u64; db.raw_words().len()];
    if wpr > 0 {
        out.par_chunks_mut(wpr)
            .zip(db.raw_words().par_chunks(wpr))
            .enumerate()
            .for_each_init(
                || vec![0u32; n],
                |draws, (r, (dst, src))| distort_row_into(src, n, &key, r as u64, th, draws, dst),
            );
    }
    Ok(TransactionDatabase::from_raw(n, out))
}

/// Distorts a single packed row exactly as `distort_database` would distort
/// row `row_index`.
pub fn distort_tuple(
    row: &[u64],
    num_items: usize,
    params: &DistortionParams,
    row_index: u64,
) -> Result<Vec<u64>> {
    params.validate()?;
    let wpr = bits::words_for(num_items);
    if row.len() != wpr || row.last().is_some_and(|&w| w & !bits::tail_mask(num_items) != 0) {
        return Err(Error::DimensionMismatch(format!(
            "row of {} words does not match a schema of {num_items} items",
            row.len()
        )));
    }
    let mut draws = vec![0u32; num_items];
    let mut out = vec![0u64; wpr];
    distort_row_into(
        row,
        num_items,
        &stream_key(params.seed),
        row_index,
        Thresholds::new(params),
        &mut draws,
        &mut out,
    );
    Ok(out)
}

/// Expected distorted length of a row holding `true_ones` of `num_items` items.
pub fn expected_row_length(true_ones: f64, num_items: f64, p: f64, q: f64) -> f64 {
    true_ones * p + (num_items - true_ones) * (1.0 - q)
}
