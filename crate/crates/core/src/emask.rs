//! Support reconstruction over a distorted database.
//!
//! For an n-itemset, rows are classified by how many of its n columns are 1.
//! Distortion mixes these classes through the transition matrix `M`, so the
//! true class histogram solves `M · c_true = c_distorted`. Only the all-ones
//! count of each candidate is gathered during a pass. The rest of the
//! distorted histogram follows by inclusion-exclusion from the all-ones
//! counts of its subsets, which earlier passes retained.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::apriori::{check_mining_input, count_all_ones_with, generate_candidates, CountingStrategy, PassStats};
use crate::corpus::TransactionDatabase;
use crate::distortion::SINGULARITY_EPS;
use crate::error::{Error, Result};
use crate::lattice::{meets_support, FrequentLattice, Itemset};
use crate::linalg::LuFactors;

/// Largest arity whose subsets we are willing to enumerate.
pub const MAX_ARITY: usize = 30;

/// `(n+1) × (n+1)` matrix whose entry `(i, j)` is the probability that a row
/// with `j` ones on the itemset's columns distorts to a row with `i` ones.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    p: f64,
    q: f64,
    entries: Vec<f64>,
}

fn binomials(n: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0f64]];
    for r in 1..=n {
        let prev = &rows[r - 1];
        let mut row = vec![1.0f64; r + 1];
        for k in 1..r {
            row[k] = prev[k - 1] + prev[k];
        }
        rows.push(row);
    }
    rows
}

impl TransitionMatrix {
    pub fn build(n: usize, p: f64, q: f64) -> Self {
        let c = binomials(n);
        let size = n + 1;
        let mut entries = vec![0.0; size * size];
        for i in 0..=n {
            for j in 0..=n {
                // k of the j true ones survive; i - k of the n - j zeros flip.
                let lo = (i + j).saturating_sub(n);
                let hi = i.min(j);
                let mut m = 0.0;
                for k in lo..=hi {
                    m += c[j][k] * p.powi(k as i32) * (1.0 - p).powi((j - k) as i32)
                        * c[n - j][i - k]
                        * (1.0 - q).powi((i - k) as i32)
                        * q.powi((n - j - (i - k)) as i32);
                }
                entries[i * size + j] = m;
            }
        }
        Self { n, p, q, entries }
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * (self.n + 1) + j]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..=self.n).map(|j| (0..=self.n).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let size = self.n + 1;
        (0..size)
            .map(|i| (0..size).map(|j| self.entries[i * size + j] * x[j]).sum())
            .collect()
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn factor(&self) -> Result<LuFactors> {
        if (self.p + self.q - 1.0).abs() < SINGULARITY_EPS {
            return Err(Error::ReconstructionImpossible { sum: self.p + self.q });
        }
        LuFactors::factor(self.n + 1, &self.entries).map_err(|_| Error::ReconstructionImpossible { sum: self.p + self.q })
    }
}

pub fn build_transition_matrix(n: usize, p: f64, q: f64) -> TransitionMatrix {
    TransitionMatrix::build(n, p, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountSide {
    Distorted,
    Estimated,
}

/// Row histogram by number of ones on an itemset's columns: `counts[k]`
/// rows have exactly `k` ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationCounts {
    pub side: CountSide,
    pub counts: Vec<f64>,
}

impl CombinationCounts {
    pub fn distorted(counts: Vec<u64>) -> Self {
        Self {
            side: CountSide::Distorted,
            counts: counts.into_iter().map(|c| c as f64).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// The all-ones class.
    pub fn all_ones(&self) -> f64 {
        self.counts[self.arity()]
    }
}

/// Derives the distorted class histogram of `candidate` from the all-ones
/// counts of its non-empty subsets (`ones(subset)`), with the empty subset
/// counting every row.
pub fn combination_counts<F>(candidate: &Itemset, ones: F, dbsize: u64) -> Result<CombinationCounts>
where
    F: Fn(&[u32]) -> Option<u64>,
{
    let n = candidate.arity();
    if n > MAX_ARITY {
        return Err(Error::Config(format!("itemsets longer than {MAX_ARITY} are not supported")));
    }
    // by_size[j] = sum of all-ones counts over subsets of size j.
    let mut by_size = vec![0i128; n + 1];
    by_size[0] = i128::from(dbsize);
    let mut buf = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        buf.clear();
        buf.extend(
            candidate
                .items()
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &i)| i),
        );
        let count = ones(&buf).ok_or_else(|| {
            Error::Internal(format!("no retained all-ones count for subset {buf:?} of {candidate:?}"))
        })?;
        by_size[buf.len()] += i128::from(count);
    }
    let c = binomials(n);
    let mut counts = Vec::with_capacity(n + 1);
    for k in 0..=n {
        // Rows with exactly the ones of some k-subset S: sum over supersets T of S
        // of (-1)^{|T|-k} N(T), aggregated over all S of size k.
        let mut v: i128 = 0;
        for (j, &a) in by_size.iter().enumerate().skip(k) {
            let term = c[j][k] as i128 * a;
            if (j - k) % 2 == 0 {
                v += term;
            } else {
                v -= term;
            }
        }
        if v < 0 {
            return Err(Error::Internal(format!(
                "negative combination count {v} for {candidate:?}; subset counts are inconsistent"
            )));
        }
        counts.push(v as u64);
    }
    Ok(CombinationCounts::distorted(counts))
}

/// Solves `M · c_true = c_distorted` by partial-pivot elimination.
pub fn solve_true_counts(m: &TransitionMatrix, distorted: &CombinationCounts) -> Result<CombinationCounts> {
    if distorted.arity() != m.arity() {
        return Err(Error::DimensionMismatch(format!(
            "counts of arity {} against a matrix of arity {}",
            distorted.arity(),
            m.arity()
        )));
    }
    let lu = m.factor()?;
    Ok(CombinationCounts {
        side: CountSide::Estimated,
        counts: lu.solve(&distorted.counts),
    })
}

/// Reconstructing miner over a distorted database with known `(p, q)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmaskMiner {
    pub strategy: CountingStrategy,
    pub max_level: Option<usize>,
}

impl EmaskMiner {
    pub fn mine(&self, distorted: &TransactionDatabase, p: f64, q: f64, sup_min: f64) -> Result<FrequentLattice> {
        self.mine_traced(distorted, p, q, sup_min).map(|(l, _)| l)
    }

    /// Level-wise mining where each pass counts only the all-ones pattern of
    /// every candidate. Reconstruction happens once per candidate at the end
    /// of the pass. Candidates whose reconstructed support (kept unclamped)
    /// reaches `sup_min` seed the next level and have their distorted
    /// all-ones counts retained for later passes.
    pub fn mine_traced(
        &self,
        distorted: &TransactionDatabase,
        p: f64,
        q: f64,
        sup_min: f64,
    ) -> Result<(FrequentLattice, Vec<PassStats>)> {
        for (name, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is not a probability")));
            }
        }
        if (p + q - 1.0).abs() < SINGULARITY_EPS {
            return Err(Error::ReconstructionImpossible { sum: p + q });
        }
        check_mining_input(distorted, sup_min)?;
        let dbsize = distorted.dbsize();
        let mut lattice = FrequentLattice::new(sup_min, dbsize);
        let mut trace = Vec::new();
        let mut retained: HashMap<Vec<u32>, u64> = HashMap::new();
        let mut candidates: Vec<Itemset> = (0..distorted.num_items() as u32).map(Itemset::singleton).collect();
        let mut level = 1;
        while !candidates.is_empty() && self.max_level.is_none_or(|m| level <= m) {
            if level > MAX_ARITY {
                return Err(Error::Config(format!("itemsets longer than {MAX_ARITY} are not supported")));
            }
            let (counts, stats) = count_all_ones_with(distorted, &candidates, self.strategy)?;
            trace.push(stats);
            let matrix = TransitionMatrix::build(level, p, q);
            let lu = matrix.factor()?;
            let estimates: Vec<f64> = candidates
                .par_iter()
                .zip(&counts)
                .map(|(cand, &own)| {
                    let lookup = |sub: &[u32]| {
                        if sub.len() == level {
                            Some(own)
                        } else {
                            retained.get(sub).copied()
                        }
                    };
                    let cd = combination_counts(cand, lookup, dbsize as u64)?;
                    Ok(lu.solve(&cd.counts)[level])
                })
                .collect::<Result<_>>()?;

            let mut frequent = Vec::new();
            for ((cand, est), own) in candidates.into_iter().zip(estimates).zip(counts) {
                if meets_support(est, sup_min, dbsize) {
                    retained.insert(cand.items().to_vec(), own);
                    frequent.push((cand, est));
                }
            }
            if frequent.is_empty() {
                break;
            }
            let sets: Vec<Itemset> = frequent.iter().map(|(s, _)| s.clone()).collect();
            lattice.push_level(frequent);
            candidates = generate_candidates(&sets)?;
            level += 1;
        }
        Ok((lattice, trace))
    }
}

/// Mines `distorted` with the default counting strategy.
pub fn mine_distorted(distorted: &TransactionDatabase, p: f64, q: f64, sup_min: f64) -> Result<FrequentLattice> {
    EmaskMiner::default().mine(distorted, p, q, sup_min)
}

/// Reconstructed support of a single itemset, counting every subset directly.
pub fn reconstructed_support(candidate: &Itemset, distorted: &TransactionDatabase, p: f64, q: f64) -> Result<f64> {
    if distorted.is_empty() {
        return Err(Error::EmptyInput("cannot reconstruct over an empty database"));
    }
    let n = candidate.arity();
    if n > MAX_ARITY {
        return Err(Error::Config(format!("itemsets longer than {MAX_ARITY} are not supported")));
    }
    let subsets: Vec<Itemset> = (1u32..(1u32 << n))
        .map(|mask| Itemset::from_sorted(candidate.subset_by_mask(mask)))
        .collect();
    let counts = crate::apriori::count_all_ones(distorted, &subsets)?;
    let table: HashMap<Vec<u32>, u64> = subsets
        .into_iter()
        .zip(counts)
        .map(|(s, c)| (s.items().to_vec(), c))
        .collect();
    let dbsize = distorted.dbsize();
    let cd = combination_counts(candidate, |s| table.get(s).copied(), dbsize as u64)?;
    let ct = solve_true_counts(&TransitionMatrix::build(n, p, q), &cd)?;
    Ok(ct.all_ones() / dbsize as f64)
}
