//! Itemsets and the per-level frequent-itemset lattice.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A non-empty, strictly ascending set of item ids.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Itemset(Vec<u32>);

impl Itemset {
    /// Sorts and deduplicates `items`.
    pub fn new(mut items: Vec<u32>) -> Result<Self> {
        items.sort_unstable();
        items.dedup();
        if items.is_empty() {
            return Err(Error::Config("itemset must not be empty".into()));
        }
        Ok(Self(items))
    }

    pub(crate) fn from_sorted(items: Vec<u32>) -> Self {
        debug_assert!(!items.is_empty() && items.windows(2).all(|w| w[0] < w[1]));
        Self(items)
    }

    pub fn singleton(item: u32) -> Self {
        Self(vec![item])
    }

    pub fn items(&self) -> &[u32] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, item: u32) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    pub fn is_subset_of(&self, other: &Itemset) -> bool {
        let mut it = other.0.iter();
        self.0.iter().all(|x| it.by_ref().any(|y| y == x))
    }

    /// The subset selected by the low `arity` bits of `mask`.
    pub(crate) fn subset_by_mask(&self, mask: u32) -> Vec<u32> {
        self.0
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &i)| i)
            .collect()
    }
}

impl fmt::Debug for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

impl From<&[u32]> for Itemset {
    fn from(items: &[u32]) -> Self {
        Self::new(items.to_vec()).expect("non-empty itemset")
    }
}

/// Whether `count` rows out of `dbsize` reach `sup_min` (inclusive).
///
/// A tolerance of a billionth of a row absorbs rounding in `sup_min * dbsize`.
pub fn meets_support(count: f64, sup_min: f64, dbsize: usize) -> bool {
    count + 1e-9 >= sup_min * dbsize as f64
}

/// Frequent itemsets grouped by arity, each with its (exact or
/// reconstructed) support count. Levels are kept in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequentLattice {
    levels: Vec<Vec<(Itemset, f64)>>,
    sup_min: f64,
    dbsize: usize,
}

impl FrequentLattice {
    pub fn new(sup_min: f64, dbsize: usize) -> Self {
        Self {
            levels: Vec::new(),
            sup_min,
            dbsize,
        }
    }

    /// Appends the next level; entries are sorted before storing.
    pub(crate) fn push_level(&mut self, mut entries: Vec<(Itemset, f64)>) {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        debug_assert!(entries.iter().all(|(s, _)| s.arity() == self.levels.len() + 1));
        self.levels.push(entries);
    }

    /// Builds a lattice from arbitrary entries (used by oracles and loaders).
    pub fn from_entries<I: IntoIterator<Item = (Itemset, f64)>>(sup_min: f64, dbsize: usize, entries: I) -> Self {
        let mut levels: Vec<Vec<(Itemset, f64)>> = Vec::new();
        for (set, count) in entries {
            let k = set.arity();
            if levels.len() < k {
                levels.resize_with(k, Vec::new);
            }
            levels[k - 1].push((set, count));
        }
        while levels.last().is_some_and(|l| l.is_empty()) {
            levels.pop();
        }
        for level in &mut levels {
            level.sort_by(|a, b| a.0.cmp(&b.0));
        }
        Self {
            levels,
            sup_min,
            dbsize,
        }
    }

    pub fn sup_min(&self) -> f64 {
        self.sup_min
    }

    pub fn dbsize(&self) -> usize {
        self.dbsize
    }

    /// Highest non-empty arity (0 for an empty lattice).
    pub fn max_level(&self) -> usize {
        self.levels.iter().rposition(|l| !l.is_empty()).map_or(0, |k| k + 1)
    }

    /// Entries of arity `n` (1-based); empty if absent.
    pub fn level(&self, n: usize) -> &[(Itemset, f64)] {
        n.checked_sub(1)
            .and_then(|k| self.levels.get(k))
            .map_or(&[], |l| l.as_slice())
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Itemset, f64)> + '_ {
        self.levels.iter().flatten()
    }

    pub fn count(&self, set: &Itemset) -> Option<f64> {
        let level = self.level(set.arity());
        level
            .binary_search_by(|(s, _)| s.cmp(set))
            .ok()
            .map(|k| level[k].1)
    }

    pub fn contains(&self, set: &Itemset) -> bool {
        self.count(set).is_some()
    }

    pub fn support(&self, set: &Itemset) -> Option<f64> {
        self.count(set).map(|c| c / self.dbsize as f64)
    }

    pub fn to_map(&self) -> HashMap<Itemset, f64> {
        self.iter().cloned().collect()
    }

    /// Checks downward closure and the support threshold.
    pub fn check_invariants(&self) -> Result<()> {
        for (set, count) in self.iter() {
            if !meets_support(*count, self.sup_min, self.dbsize) {
                return Err(Error::Internal(format!("{set:?} is below sup_min")));
            }
            if set.arity() > 1 {
                for skip in 0..set.arity() {
                    let mut sub = set.items().to_vec();
                    sub.remove(skip);
                    if !self.contains(&Itemset::from_sorted(sub)) {
                        return Err(Error::Internal(format!("{set:?} has an infrequent subset")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes `level<TAB>ids<TAB>support` rows. Negative reconstructed
    /// counts are reported as zero support.
    pub fn write_tsv<W: Write>(&self, mut sink: W, header: Option<&str>) -> Result<()> {
        if let Some(h) = header {
            writeln!(sink, "# {h}")?;
        }
        let n = self.dbsize as f64;
        for (set, count) in self.iter() {
            writeln!(sink, "{}\t{}\t{:.8}", set.arity(), set, (count / n).max(0.0))?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Reads the TSV format back; supports are converted to counts with `dbsize`.
    pub fn read_tsv<R: BufRead>(source: R, sup_min: f64, dbsize: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Parse {
                line: idx + 1,
                message: m.to_string(),
            };
            let mut cols = line.split('\t');
            let (Some(level), Some(ids), Some(sup), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
                return Err(bad("expected three tab-separated columns"));
            };
            let level: usize = level.parse().map_err(|_| bad("invalid level"))?;
            let items = ids
                .split(',')
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("invalid item id"))?;
            let set = Itemset::new(items).map_err(|_| bad("empty itemset"))?;
            if set.arity() != level {
                return Err(bad("level does not match itemset length"));
            }
            let sup: f64 = sup.parse().map_err(|_| bad("invalid support"))?;
            entries.push((set, sup * dbsize as f64));
        }
        Ok(Self::from_entries(sup_min, dbsize, entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[u32]) -> Itemset {
        Itemset::from(items)
    }

    #[test]
    fn itemset_normalizes() {
        assert_eq!(Itemset::new(vec![3, 1, 3]).unwrap().items(), &[1, 3]);
        assert!(Itemset::new(vec![]).is_err());
        assert!(set(&[1, 3]).is_subset_of(&set(&[0, 1, 2, 3])));
        assert!(!set(&[1, 4]).is_subset_of(&set(&[0, 1, 2, 3])));
        assert_eq!(set(&[4, 7, 9]).subset_by_mask(0b101), vec![4, 9]);
    }

    #[test]
    fn tsv_round_trip() {
        let lat = FrequentLattice::from_entries(
            0.5,
            4,
            vec![(set(&[0]), 3.0), (set(&[1]), 2.0), (set(&[0, 1]), 2.0)],
        );
        let mut out = Vec::new();
        lat.write_tsv(&mut out, Some("sup_min=0.5")).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "# sup_min=0.5\n1\t0\t0.75000000\n1\t1\t0.50000000\n2\t0,1\t0.50000000\n");
        let back = FrequentLattice::read_tsv(text.as_bytes(), 0.5, 4).unwrap();
        assert_eq!(back, lat);
        assert!(lat.check_invariants().is_ok());
        assert_eq!(lat.max_level(), 2);
    }

    #[test]
    fn invariant_violations_are_reported() {
        let lat = FrequentLattice::from_entries(0.5, 4, vec![(set(&[0]), 3.0), (set(&[0, 1]), 2.0)]);
        assert!(lat.check_invariants().is_err());
        let low = FrequentLattice::from_entries(0.5, 4, vec![(set(&[0]), 1.0)]);
        assert!(low.check_invariants().is_err());
    }

    #[test]
    fn support_threshold_is_inclusive() {
        assert!(meets_support(3.0, 0.6, 5));
        assert!(!meets_support(2.999, 0.6, 5));
    }
}
