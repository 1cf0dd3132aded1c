//! Exact level-wise frequent itemset mining, plus the candidate generation
//! and all-ones counting pass that the reconstruction miner reuses.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::bits;
use crate::corpus::TransactionDatabase;
use crate::error::{Error, Result};
use crate::lattice::{meets_support, FrequentLattice, Itemset};

/// How a counting pass finds the rows that contain each candidate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CountingStrategy {
    /// Scan rows and walk a prefix tree of candidates with each row's items.
    /// Cost grows with row density, like classic Apriori.
    #[default]
    RowScan,
    /// Transpose to per-item column bitmaps and intersect them word by word.
    Columnar,
}

/// Instrumentation for one counting pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PassStats {
    pub level: usize,
    pub candidates: usize,
    pub rows_scanned: u64,
    /// Number of per-row counter increments performed.
    pub counter_updates: u64,
}

/// Joins `k`-itemsets that share their first `k-1` items and prunes every
/// result with an infrequent `k`-subset. Output is lexicographic.
pub fn generate_candidates(frequent_k: &[Itemset]) -> Result<Vec<Itemset>> {
    let Some(first) = frequent_k.first() else {
        return Ok(Vec::new());
    };
    let k = first.arity();
    if frequent_k.iter().any(|s| s.arity() != k) {
        return Err(Error::Config("candidate generation needs itemsets of equal arity".into()));
    }
    let mut sorted: Vec<&[u32]> = frequent_k.iter().map(Itemset::items).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let known: HashSet<&[u32]> = sorted.iter().copied().collect();

    let mut out = Vec::new();
    let mut sub = Vec::with_capacity(k);
    let mut start = 0;
    while start < sorted.len() {
        let prefix = &sorted[start][..k - 1];
        let mut end = start + 1;
        while end < sorted.len() && &sorted[end][..k - 1] == prefix {
            end += 1;
        }
        for a in start..end {
            for b in a + 1..end {
                let mut cand = sorted[a].to_vec();
                cand.push(sorted[b][k - 1]);
                // The subsets dropping one of the last two items are a and b.
                let pruned = (0..k - 1).any(|skip| {
                    sub.clear();
                    sub.extend(cand.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, &i)| i));
                    !known.contains(sub.as_slice())
                });
                if !pruned {
                    out.push(Itemset::from_sorted(cand));
                }
            }
        }
        start = end;
    }
    Ok(out)
}

/// Counts, for each candidate, the rows containing all of its items.
pub fn count_all_ones(db: &TransactionDatabase, candidates: &[Itemset]) -> Result<Vec<u64>> {
    count_all_ones_with(db, candidates, CountingStrategy::default()).map(|(c, _)| c)
}

/// Like [`count_all_ones`] with an explicit strategy, also returning pass
/// instrumentation. Candidates may be of mixed arity.
pub fn count_all_ones_with(
    db: &TransactionDatabase,
    candidates: &[Itemset],
    strategy: CountingStrategy,
) -> Result<(Vec<u64>, PassStats)> {
    if let Some(bad) = candidates
        .iter()
        .find(|c| c.items().last().is_some_and(|&i| i as usize >= db.num_items()))
    {
        return Err(Error::DimensionMismatch(format!(
            "candidate {bad:?} references an item beyond {} columns",
            db.num_items()
        )));
    }
    let mut counts = vec![0u64; candidates.len()];
    let mut stats = PassStats {
        level: candidates.first().map_or(0, Itemset::arity),
        candidates: candidates.len(),
        ..PassStats::default()
    };
    let max_arity = candidates.iter().map(Itemset::arity).max().unwrap_or(0);
    for k in 1..=max_arity {
        let idx: Vec<usize> = (0..candidates.len()).filter(|&c| candidates[c].arity() == k).collect();
        if idx.is_empty() {
            continue;
        }
        let group: Vec<&Itemset> = idx.iter().map(|&c| &candidates[c]).collect();
        let (group_counts, rows) = match strategy {
            CountingStrategy::RowScan => row_scan(db, &group, k),
            CountingStrategy::Columnar => columnar(db, &group, k),
        };
        for (&c, n) in idx.iter().zip(group_counts) {
            counts[c] = n;
        }
        stats.rows_scanned += rows;
    }
    stats.counter_updates = counts.iter().sum();
    Ok((counts, stats))
}

const NONE: u32 = u32::MAX;
const DENSE_BUDGET: usize = 1 << 24;

/// Prefix tree over sorted, distinct candidates of one arity in CSR form.
/// Depths `0..k` are interior nodes; the children of depth `k-1` nodes are
/// leaves addressed by candidate position.
struct CandidateTrie {
    k: usize,
    num_items: usize,
    first_child: Vec<usize>,
    child_items: Vec<u32>,
    child_ids: Vec<u32>,
    dense: Option<Vec<u32>>,
    active: Vec<u64>,
}

impl CandidateTrie {
    fn build(sorted: &[&[u32]], k: usize, num_items: usize) -> Self {
        let m = sorted.len();
        // group[c] = index of the distinct d-prefix of candidate c, per depth.
        let mut group = vec![0u32; m];
        let mut nodes_at_depth = vec![1usize];
        let mut first_child = vec![0usize];
        let mut child_items = Vec::new();
        let mut child_ids = Vec::new();
        let mut base = 0usize;
        for d in 0..k {
            let level_base = base + nodes_at_depth[d];
            let mut next_group = vec![0u32; m];
            let mut distinct = 0usize;
            let mut counts_per_parent = vec![0usize; nodes_at_depth[d]];
            for c in 0..m {
                let new_prefix = c == 0 || group[c] != group[c - 1] || sorted[c][d] != sorted[c - 1][d];
                if new_prefix {
                    child_items.push(sorted[c][d]);
                    child_ids.push(if d + 1 == k {
                        c as u32
                    } else {
                        (level_base + distinct) as u32
                    });
                    counts_per_parent[group[c] as usize] += 1;
                    distinct += 1;
                }
                next_group[c] = (distinct - 1) as u32;
            }
            for n in counts_per_parent {
                let last = *first_child.last().unwrap();
                first_child.push(last + n);
            }
            base = level_base;
            nodes_at_depth.push(distinct);
            group = next_group;
        }
        let interior: usize = nodes_at_depth[..k].iter().sum();
        debug_assert_eq!(first_child.len(), interior + 1);

        let dense = (interior.saturating_mul(num_items) <= DENSE_BUDGET).then(|| {
            let mut table = vec![NONE; interior * num_items];
            for node in 0..interior {
                for e in first_child[node]..first_child[node + 1] {
                    table[node * num_items + child_items[e] as usize] = child_ids[e];
                }
            }
            table
        });
        let mut active = vec![0u64; bits::words_for(num_items)];
        for c in sorted {
            for &i in *c {
                bits::set(&mut active, i as usize);
            }
        }
        Self {
            k,
            num_items,
            first_child,
            child_items,
            child_ids,
            dense,
            active,
        }
    }

    #[inline]
    fn child(&self, node: u32, item: u32) -> u32 {
        match &self.dense {
            Some(t) => t[node as usize * self.num_items + item as usize],
            None => {
                let lo = self.first_child[node as usize];
                let hi = self.first_child[node as usize + 1];
                match self.child_items[lo..hi].binary_search(&item) {
                    Ok(e) => self.child_ids[lo + e],
                    Err(_) => NONE,
                }
            }
        }
    }

    fn walk(&self, node: u32, depth: usize, row: &[u32], start: usize, counts: &mut [u64]) {
        let remaining = self.k - depth;
        if row.len() < start + remaining {
            return;
        }
        let last = remaining == 1;
        for j in start..=row.len() - remaining {
            let c = self.child(node, row[j]);
            if c == NONE {
                continue;
            }
            if last {
                counts[c as usize] += 1;
            } else {
                self.walk(c, depth + 1, row, j + 1, counts);
            }
        }
    }
}

/// Sorts and deduplicates a group, returning the sorted view and, for each
/// sorted slot, the original positions it feeds.
fn sorted_view<'a>(group: &[&'a Itemset]) -> (Vec<&'a [u32]>, Vec<Vec<usize>>) {
    let mut order: Vec<usize> = (0..group.len()).collect();
    order.sort_by(|&a, &b| group[a].cmp(group[b]));
    let mut sorted: Vec<&[u32]> = Vec::with_capacity(group.len());
    let mut owners: Vec<Vec<usize>> = Vec::with_capacity(group.len());
    for o in order {
        let items = group[o].items();
        if sorted.last() == Some(&items) {
            owners.last_mut().unwrap().push(o);
        } else {
            sorted.push(items);
            owners.push(vec![o]);
        }
    }
    (sorted, owners)
}

fn scatter(owners: &[Vec<usize>], sorted_counts: &[u64], len: usize) -> Vec<u64> {
    let mut out = vec![0u64; len];
    for (slot, os) in owners.iter().enumerate() {
        for &o in os {
            out[o] = sorted_counts[slot];
        }
    }
    out
}

fn row_scan(db: &TransactionDatabase, group: &[&Itemset], k: usize) -> (Vec<u64>, u64) {
    let (sorted, owners) = sorted_view(group);
    let trie = CandidateTrie::build(&sorted, k, db.num_items());
    let m = sorted.len();
    let dbsize = db.dbsize();
    let chunk = (dbsize / (rayon::current_num_threads() * 4)).max(1024);
    let counts = (0..dbsize.div_ceil(chunk))
        .into_par_iter()
        .map(|ci| {
            let mut local = vec![0u64; m];
            let mut items: Vec<u32> = Vec::new();
            let mut masked = vec![0u64; trie.active.len()];
            for r in ci * chunk..((ci + 1) * chunk).min(dbsize) {
                for ((dst, &w), &a) in masked.iter_mut().zip(db.row(r)).zip(&trie.active) {
                    *dst = w & a;
                }
                items.clear();
                items.extend(bits::iter_ones(&masked).map(|i| i as u32));
                trie.walk(0, 0, &items, 0, &mut local);
            }
            local
        })
        .reduce(
            || vec![0u64; m],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    (scatter(&owners, &counts, group.len()), dbsize as u64)
}

fn columnar(db: &TransactionDatabase, group: &[&Itemset], k: usize) -> (Vec<u64>, u64) {
    let (sorted, owners) = sorted_view(group);
    let dbsize = db.dbsize();
    let col_words = bits::words_for(dbsize);
    let mut needed = vec![false; db.num_items()];
    for c in &sorted {
        for &i in *c {
            needed[i as usize] = true;
        }
    }
    let mut slot = vec![NONE; db.num_items()];
    let mut columns: Vec<Vec<u64>> = Vec::new();
    for (i, _) in needed.iter().enumerate().filter(|(_, &n)| n) {
        slot[i] = columns.len() as u32;
        columns.push(vec![0u64; col_words]);
    }
    for (r, row) in db.rows().enumerate() {
        for i in bits::iter_ones(row) {
            let s = slot[i];
            if s != NONE {
                bits::set(&mut columns[s as usize], r);
            }
        }
    }
    let col = |i: u32| columns[slot[i as usize] as usize].as_slice();

    // Candidates sharing a (k-1)-prefix are contiguous; intersect the prefix once.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut s = 0;
    while s < sorted.len() {
        let mut e = s + 1;
        while e < sorted.len() && sorted[e][..k - 1] == sorted[s][..k - 1] {
            e += 1;
        }
        groups.push((s, e));
        s = e;
    }
    let per_group: Vec<Vec<u64>> = groups
        .par_iter()
        .map(|&(s, e)| {
            let prefix = &sorted[s][..k - 1];
            let mut acc = vec![u64::MAX; col_words];
            if let Some(last) = acc.last_mut() {
                *last &= bits::tail_mask(dbsize);
            }
            for &i in prefix {
                acc.iter_mut().zip(col(i)).for_each(|(a, b)| *a &= b);
            }
            sorted[s..e]
                .iter()
                .map(|c| {
                    acc.iter()
                        .zip(col(c[k - 1]))
                        .map(|(a, b)| u64::from((a & b).count_ones()))
                        .sum()
                })
                .collect()
        })
        .collect();
    let counts: Vec<u64> = per_group.into_iter().flatten().collect();
    (scatter(&owners, &counts, group.len()), dbsize as u64)
}

/// Configurable exact miner.
#[derive(Debug, Clone, Copy, Default)]
pub struct Apriori {
    pub strategy: CountingStrategy,
    /// Stop after this many levels (`None` = until no candidates remain).
    pub max_level: Option<usize>,
}

impl Apriori {
    pub fn mine(&self, db: &TransactionDatabase, sup_min: f64) -> Result<FrequentLattice> {
        self.mine_traced(db, sup_min).map(|(l, _)| l)
    }

    pub fn mine_traced(&self, db: &TransactionDatabase, sup_min: f64) -> Result<(FrequentLattice, Vec<PassStats>)> {
        check_mining_input(db, sup_min)?;
        let dbsize = db.dbsize();
        let mut lattice = FrequentLattice::new(sup_min, dbsize);
        let mut trace = Vec::new();
        let mut candidates: Vec<Itemset> = (0..db.num_items() as u32).map(Itemset::singleton).collect();
        let mut level = 1;
        while !candidates.is_empty() && self.max_level.is_none_or(|m| level <= m) {
            let (counts, stats) = count_all_ones_with(db, &candidates, self.strategy)?;
            trace.push(stats);
            let frequent: Vec<(Itemset, f64)> = candidates
                .into_iter()
                .zip(counts)
                .filter(|&(_, n)| meets_support(n as f64, sup_min, dbsize))
                .map(|(s, n)| (s, n as f64))
                .collect();
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

pub(crate) fn check_mining_input(db: &TransactionDatabase, sup_min: f64) -> Result<()> {
    if !(sup_min > 0.0 && sup_min <= 1.0) {
        return Err(Error::Config(format!("sup_min = {sup_min} must lie in (0, 1]")));
    }
    if db.is_empty() {
        return Err(Error::EmptyInput("cannot mine an empty database"));
    }
    Ok(())
}

/// Mines all frequent itemsets of `db` exactly.
pub fn mine(db: &TransactionDatabase, sup_min: f64) -> Result<FrequentLattice> {
    Apriori::default().mine(db, sup_min)
}
