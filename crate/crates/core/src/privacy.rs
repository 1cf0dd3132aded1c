//! Privacy of the 1s in the original matrix: the closed-form basic privacy
//! and the empirical reinterrogated privacy that accounts for a miner using
//! discovered frequent itemsets to re-query the distorted rows.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::bits;
use crate::corpus::{DatasetStats, TransactionDatabase};
use crate::error::{Error, Result};
use crate::lattice::{FrequentLattice, Itemset};

/// Probability of correctly guessing a true 1 of an item with support `s`
/// from its distorted value.
pub fn reconstruction_prob_item(p: f64, q: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Degenerate(format!("item support {s} must lie in (0, 1]")));
    }
    let pr_one = s * p + (1.0 - s) * (1.0 - q);
    let pr_zero = s * (1.0 - p) + (1.0 - s) * q;
    if pr_one <= 0.0 || pr_zero <= 0.0 {
        return Err(Error::Degenerate(format!(
            "distorted value is deterministic at p={p}, q={q}, s={s}"
        )));
    }
    Ok(p * p * s / pr_one + (1.0 - p) * (1.0 - p) * s / pr_zero)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrivacyMode {
    /// Support-weighted average of per-item reconstruction probabilities.
    Averaged,
    /// Every item is assumed to have the average support.
    #[default]
    Simplified,
}

/// Basic privacy as a percentage, `100 (1 - R1)`.
pub fn basic_privacy(p: f64, q: f64, stats: &DatasetStats, mode: PrivacyMode) -> Result<f64> {
    let r1 = match mode {
        PrivacyMode::Simplified => reconstruction_prob_item(p, q, stats.avg_support)?,
        PrivacyMode::Averaged => {
            let mut num = 0.0;
            let mut den = 0.0;
            for &s in stats.item_supports.iter().filter(|&&s| s > 0.0) {
                num += s * reconstruction_prob_item(p, q, s)?;
                den += s;
            }
            if den == 0.0 {
                return Err(Error::Degenerate("every item has zero support".into()));
            }
            num / den
        }
    };
    Ok(100.0 * (1.0 - r1))
}

/// Per-item basic privacy; `None` for items with zero support.
pub fn per_item_basic_privacy(p: f64, q: f64, stats: &DatasetStats) -> Result<Vec<Option<f64>>> {
    stats
        .item_supports
        .iter()
        .map(|&s| {
            if s > 0.0 {
                reconstruction_prob_item(p, q, s).map(|r| Some(100.0 * (1.0 - r)))
            } else {
                Ok(None)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyPoint {
    pub p: f64,
    pub q: f64,
    /// `None` where the channel is degenerate (e.g. p = 0, q = 1).
    pub bp: Option<f64>,
}

/// Simplified basic privacy over the cartesian product of `ps` and `qs`.
pub fn privacy_grid(ps: &[f64], qs: &[f64], s0: f64) -> Result<Vec<PrivacyPoint>> {
    if let Some(bad) = ps.iter().chain(qs).find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Config(format!("grid value {bad} is not a probability")));
    }
    let mut out = Vec::with_capacity(ps.len() * qs.len());
    for &p in ps {
        for &q in qs {
            let bp = reconstruction_prob_item(p, q, s0).ok().map(|r| 100.0 * (1.0 - r));
            out.push(PrivacyPoint { p, q, bp });
        }
    }
    Ok(out)
}

pub fn write_privacy_grid_csv<W: Write>(grid: &[PrivacyPoint], mut sink: W) -> Result<()> {
    writeln!(sink, "p,q,bp")?;
    for pt in grid {
        match pt.bp {
            Some(bp) => writeln!(sink, "{},{},{:.4}", fmt_prob(pt.p), fmt_prob(pt.q), bp)?,
            None => writeln!(sink, "{},{},", fmt_prob(pt.p), fmt_prob(pt.q))?,
        }
    }
    sink.flush()?;
    Ok(())
}

/// Prints grid coordinates without binary-fraction noise.
pub(crate) fn fmt_prob(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.to_string() }
}

/// Breach percentages keyed by (frequent itemset, member item).
pub type BreachTable = BTreeMap<(Itemset, u32), f64>;

fn check_pair(original: &TransactionDatabase, distorted: &TransactionDatabase) -> Result<()> {
    if original.num_items() != distorted.num_items() || original.dbsize() != distorted.dbsize() {
        return Err(Error::DimensionMismatch(format!(
            "original is {}x{}, distorted is {}x{}",
            original.dbsize(),
            original.num_items(),
            distorted.dbsize(),
            distorted.num_items()
        )));
    }
    Ok(())
}

fn check_lattice(lattice: &FrequentLattice, db: &TransactionDatabase) -> Result<()> {
    if let Some((s, _)) = lattice
        .iter()
        .find(|(s, _)| s.items().last().is_some_and(|&i| i as usize >= db.num_items()))
    {
        return Err(Error::DimensionMismatch(format!("itemset {s:?} exceeds the schema")));
    }
    Ok(())
}

/// Rows whose distorted version contains every item of `set`.
fn rows_containing(set: &Itemset, cols: &[Vec<u64>], words: usize) -> Vec<u64> {
    let mut acc = cols[set.items()[0] as usize].clone();
    for &i in &set.items()[1..] {
        acc.iter_mut().zip(&cols[i as usize]).for_each(|(a, b)| *a &= b);
    }
    debug_assert_eq!(acc.len(), words);
    acc
}

fn and_count(a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| u64::from((x & y).count_ones())).sum()
}

/// For each frequent itemset `f` and item `i` in it: among rows whose
/// distorted version contains `f`, the percentage whose original row has `i`.
/// Pairs where `f` never occurs in the distorted data are omitted.
pub fn breach_table(
    original: &TransactionDatabase,
    distorted: &TransactionDatabase,
    lattice: &FrequentLattice,
) -> Result<BreachTable> {
    check_pair(original, distorted)?;
    check_lattice(lattice, distorted)?;
    let words = bits::words_for(original.dbsize());
    let dcols = distorted.column_bitmaps();
    let ocols = original.column_bitmaps();
    let entries: Vec<Vec<((Itemset, u32), f64)>> = lattice
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(set, _)| {
            let rows = rows_containing(set, &dcols, words);
            let occ = bits::popcount(&rows);
            if occ == 0 {
                return Vec::new();
            }
            set.items()
                .iter()
                .map(|&i| {
                    let hits = and_count(&rows, &ocols[i as usize]);
                    ((set.clone(), i), 100.0 * hits as f64 / occ as f64)
                })
                .collect()
        })
        .collect();
    Ok(entries.into_iter().flatten().collect())
}

/// Average privacy over every 1 in `original` once the miner re-queries the
/// distorted rows with the frequent itemsets in `lattice`.
///
/// A 1 at (row, item) keeps privacy `bp` when the item is in no frequent
/// itemset, when it was flipped to 0, or when no frequent itemset containing
/// it fits inside the distorted row. Otherwise its privacy is
/// `min(bp, 100 - worst breach)` over the frequent itemsets that contain the
/// item and fit inside the distorted row.
pub fn reinterrogated_privacy(
    original: &TransactionDatabase,
    distorted: &TransactionDatabase,
    lattice: &FrequentLattice,
    bp: f64,
) -> Result<f64> {
    check_pair(original, distorted)?;
    check_lattice(lattice, distorted)?;
    let total_ones = original.total_ones();
    if total_ones == 0 {
        return Ok(bp);
    }
    let dbsize = original.dbsize();
    let words = bits::words_for(dbsize);
    let dcols = distorted.column_bitmaps();
    let ocols = original.column_bitmaps();

    let mut by_item: Vec<Vec<&Itemset>> = vec![Vec::new(); original.num_items()];
    for (set, _) in lattice.iter() {
        for &i in set.items() {
            by_item[i as usize].push(set);
        }
    }

    // Per item: ones that keep `bp`, and the summed privacy of capped ones.
    let per_item: Vec<(u64, f64)> = (0..original.num_items())
        .into_par_iter()
        .map_init(
            || vec![f64::NAN; dbsize],
            |worst, i| {
                let ones_i = bits::popcount(&ocols[i]);
                if by_item[i].is_empty() {
                    return (ones_i, 0.0);
                }
                let mut touched: Vec<usize> = Vec::new();
                for set in &by_item[i] {
                    let rows = rows_containing(set, &dcols, words);
                    let occ = bits::popcount(&rows);
                    if occ == 0 {
                        continue;
                    }
                    let hits: Vec<u64> = rows.iter().zip(&ocols[i]).map(|(a, b)| a & b).collect();
                    let breach = 100.0 * bits::popcount(&hits) as f64 / occ as f64;
                    for r in bits::iter_ones(&hits) {
                        if worst[r].is_nan() {
                            touched.push(r);
                            worst[r] = breach;
                        } else if breach > worst[r] {
                            worst[r] = breach;
                        }
                    }
                }
                let mut sum = 0.0;
                for &r in &touched {
                    sum += bp.min(100.0 - worst[r]);
                    worst[r] = f64::NAN;
                }
                (ones_i - touched.len() as u64, sum)
            },
        )
        .collect();
    let kept: u64 = per_item.iter().map(|t| t.0).sum();
    let capped: f64 = per_item.iter().map(|t| t.1).sum();
    let total = total_ones as f64;
    Ok(bp * (kept as f64 / total) + capped / total)
}

/// Basic and reinterrogated privacy of one distortion run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyReport {
    pub bp: f64,
    pub rp: f64,
    pub per_item_bp: Option<Vec<Option<f64>>>,
    pub breach_table: Option<BreachTable>,
}
