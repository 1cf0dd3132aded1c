//! Transaction databases: the packed boolean matrix, its statistics, file
//! formats, and a synthetic basket generator in the style of IBM Quest.

use std::io::{BufRead, Read, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

use crate::bits;
use crate::error::{Error, Result};

/// Magic bytes opening a bit-matrix file.
pub const BITMATRIX_MAGIC: &[u8; 4] = b"EMB1";

/// A boolean customer-by-item matrix. Each row is stored as packed 64-bit
/// words with item 0 in the least significant bit of the first word.
///
/// Immutable once built; rows are appended through the `push_*` builders.
#[derive(Clone, PartialEq, Eq)]
pub struct TransactionDatabase {
    num_items: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for TransactionDatabase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransactionDatabase")
            .field("num_items", &self.num_items)
            .field("dbsize", &self.dbsize())
            .finish()
    }
}

impl TransactionDatabase {
    /// An empty database over `num_items` columns.
    pub fn new(num_items: usize) -> Self {
        Self {
            num_items,
            words_per_row: bits::words_for(num_items),
            words: Vec::new(),
        }
    }

    pub fn with_capacity(num_items: usize, rows: usize) -> Self {
        let words_per_row = bits::words_for(num_items);
        Self {
            num_items,
            words_per_row,
            words: Vec::with_capacity(rows * words_per_row),
        }
    }

    /// Builds a database from item lists; duplicate ids collapse.
    pub fn from_itemsets<I, S>(num_items: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u32]>,
    {
        let mut db = Self::new(num_items);
        for (line, row) in rows.into_iter().enumerate() {
            db.push_items(row.as_ref())
                .map_err(|e| with_line(e, line + 1))?;
        }
        Ok(db)
    }

    /// Appends a row with the given items set.
    pub fn push_items(&mut self, items: &[u32]) -> Result<()> {
        let start = self.words.len();
        self.words.resize(start + self.words_per_row, 0);
        for &item in items {
            if item as usize >= self.num_items {
                self.words.truncate(start);
                return Err(Error::ItemOutOfRange {
                    line: self.dbsize() + 1,
                    item: u64::from(item),
                    num_items: self.num_items,
                });
            }
            bits::set(&mut self.words[start..], item as usize);
        }
        Ok(())
    }

    /// Appends a packed row. Bits beyond `num_items` must be clear.
    pub fn push_words(&mut self, row: &[u64]) -> Result<()> {
        if row.len() != self.words_per_row {
            return Err(Error::DimensionMismatch(format!(
                "row has {} words, expected {}",
                row.len(),
                self.words_per_row
            )));
        }
        if let Some(&last) = row.last() {
            if last & !bits::tail_mask(self.num_items) != 0 {
                return Err(Error::DimensionMismatch(
                    "row has bits set beyond num_items".into(),
                ));
            }
        }
        self.words.extend_from_slice(row);
        Ok(())
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn dbsize(&self) -> usize {
        self.words.len().checked_div(self.words_per_row).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    /// Packed words of row `r`.
    pub fn row(&self, r: usize) -> &[u64] {
        &self.words[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u64]> + '_ {
        self.words.chunks_exact(self.words_per_row.max(1))
    }

    /// Row-major slice of all words, `dbsize * words_per_row` long.
    pub fn raw_words(&self) -> &[u64] {
        &self.words
    }

    pub fn contains(&self, r: usize, item: usize) -> bool {
        bits::test(self.row(r), item)
    }

    /// Items present in row `r`, ascending.
    pub fn row_items(&self, r: usize) -> Vec<u32> {
        bits::iter_ones(self.row(r)).map(|i| i as u32).collect()
    }

    pub fn total_ones(&self) -> u64 {
        bits::popcount(&self.words)
    }

    /// Number of ones in every column.
    pub fn column_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_items];
        for row in self.rows() {
            for i in bits::iter_ones(row) {
                counts[i] += 1;
            }
        }
        counts
    }

    /// Per-item column bitmaps over rows (bit r of column i = row r has item i).
    pub(crate) fn column_bitmaps(&self) -> Vec<Vec<u64>> {
        let words = bits::words_for(self.dbsize());
        let mut cols = vec![vec![0u64; words]; self.num_items];
        for (r, row) in self.rows().enumerate() {
            for i in bits::iter_ones(row) {
                bits::set(&mut cols[i], r);
            }
        }
        cols
    }

    /// Repeats every row `factor` times in place (row r becomes rows
    /// r*factor .. r*factor+factor-1). Used to scale small real datasets.
    pub fn replicate(&self, factor: usize) -> Self {
        let mut words = Vec::with_capacity(self.words.len() * factor);
        for row in self.rows() {
            for _ in 0..factor {
                words.extend_from_slice(row);
            }
        }
        Self {
            num_items: self.num_items,
            words_per_row: self.words_per_row,
            words,
        }
    }

    pub(crate) fn from_raw(num_items: usize, words: Vec<u64>) -> Self {
        let words_per_row = bits::words_for(num_items);
        debug_assert!(words_per_row == 0 || words.len().is_multiple_of(words_per_row));
        Self {
            num_items,
            words_per_row,
            words,
        }
    }
}

fn with_line(err: Error, line: usize) -> Error {
    match err {
        Error::ItemOutOfRange {
            item, num_items, ..
        } => Error::ItemOutOfRange {
            line,
            item,
            num_items,
        },
        other => other,
    }
}

/// Reads whitespace-separated item ids, one transaction per line.
///
/// With `num_items = None` the width is inferred as the largest id + 1.
pub fn load_itemlist<R: BufRead>(source: R, num_items: Option<usize>) -> Result<TransactionDatabase> {
    let mut rows: Vec<Vec<u32>> = Vec::new();
    let mut max_id: Option<u32> = None;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let mut row = Vec::new();
        for tok in line.split_ascii_whitespace() {
            let id: u64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid item id {tok:?}"),
            })?;
            let limit = num_items.map_or(u64::from(u32::MAX), |n| n as u64);
            if id >= limit {
                return Err(Error::ItemOutOfRange {
                    line: lineno,
                    item: id,
                    num_items: num_items.unwrap_or(u32::MAX as usize),
                });
            }
            let id = id as u32;
            max_id = Some(max_id.map_or(id, |m| m.max(id)));
            row.push(id);
        }
        rows.push(row);
    }
    let width = match num_items {
        Some(n) => n,
        None => max_id.map_or(0, |m| m as usize + 1),
    };
    if width == 0 {
        return Err(Error::EmptyInput("item list declares no items"));
    }
    TransactionDatabase::from_itemsets(width, rows)
}

/// Writes one line per row with ascending item ids separated by single spaces.
pub fn save_itemlist<W: Write>(db: &TransactionDatabase, mut sink: W) -> Result<()> {
    let mut line = String::new();
    for row in db.rows() {
        line.clear();
        for (k, item) in bits::iter_ones(row).enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(&item.to_string());
        }
        line.push('\n');
        sink.write_all(line.as_bytes())?;
    }
    sink.flush()?;
    Ok(())
}

/// Writes the binary bit-matrix format: `EMB1`, u32 LE num_items, u64 LE
/// dbsize, then `ceil(num_items / 8)` bytes per row.
pub fn save_bitmatrix<W: Write>(db: &TransactionDatabase, mut sink: W) -> Result<()> {
    let row_bytes = db.num_items().div_ceil(8);
    let num_items = u32::try_from(db.num_items())
        .map_err(|_| Error::Format("num_items does not fit in 32 bits".into()))?;
    sink.write_all(BITMATRIX_MAGIC)?;
    sink.write_all(&num_items.to_le_bytes())?;
    sink.write_all(&(db.dbsize() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(db.words_per_row() * 8);
    for row in db.rows() {
        buf.clear();
        for w in row {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        sink.write_all(&buf[..row_bytes])?;
    }
    sink.flush()?;
    Ok(())
}

pub fn load_bitmatrix<R: Read>(mut source: R) -> Result<TransactionDatabase> {
    let mut header = [0u8; 16];
    read_exact_or_truncated(&mut source, &mut header, "header")?;
    if &header[..4] != BITMATRIX_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &header[..4])));
    }
    let num_items = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let dbsize = u64::from_le_bytes(header[8..16].try_into().unwrap());
    if num_items == 0 {
        return Err(Error::Format("num_items is zero".into()));
    }
    let dbsize = usize::try_from(dbsize).map_err(|_| Error::Format("dbsize too large".into()))?;
    let row_bytes = num_items.div_ceil(8);
    let words_per_row = bits::words_for(num_items);
    let tail = bits::tail_mask(num_items);

    let mut words = Vec::with_capacity(dbsize.saturating_mul(words_per_row).min(1 << 28));
    let mut buf = vec![0u8; row_bytes];
    let mut padded = vec![0u8; words_per_row * 8];
    for r in 0..dbsize {
        read_exact_or_truncated(&mut source, &mut buf, "row payload")?;
        padded[..row_bytes].copy_from_slice(&buf);
        let start = words.len();
        words.extend(
            padded
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap())),
        );
        if words[words.len() - 1] & !tail != 0 {
            return Err(Error::Format(format!("row {r} has padding bits set")));
        }
        debug_assert_eq!(words.len() - start, words_per_row);
    }
    let mut probe = [0u8; 1];
    if source.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after last row".into()));
    }
    Ok(TransactionDatabase::from_raw(num_items, words))
}

fn read_exact_or_truncated<R: Read>(source: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    source.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated {what}"))
        } else {
            Error::Io(e)
        }
    })
}

/// Reads either format, choosing by the leading magic bytes.
pub fn load_auto<R: BufRead>(mut source: R, num_items: Option<usize>) -> Result<TransactionDatabase> {
    let head = source.fill_buf()?;
    if head.starts_with(BITMATRIX_MAGIC) {
        load_bitmatrix(source)
    } else {
        load_itemlist(source, num_items)
    }
}

/// Per-column and aggregate statistics of a database.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub item_supports: Vec<f64>,
    pub avg_support: f64,
    pub avg_row_length: f64,
    pub dbsize: usize,
    pub num_items: usize,
}

impl DatasetStats {
    /// Statistics that carry only the average support, for closed-form
    /// privacy estimates made before any data is seen.
    pub fn uniform(avg_support: f64, num_items: usize, dbsize: usize) -> Self {
        Self {
            item_supports: vec![avg_support; num_items],
            avg_support,
            avg_row_length: avg_support * num_items as f64,
            dbsize,
            num_items,
        }
    }
}

pub fn compute_stats(db: &TransactionDatabase) -> Result<DatasetStats> {
    if db.is_empty() {
        return Err(Error::EmptyInput("database has no rows"));
    }
    let n = db.dbsize() as f64;
    let item_supports: Vec<f64> = db.column_counts().iter().map(|&c| c as f64 / n).collect();
    let total: u64 = db.total_ones();
    let avg_row_length = total as f64 / n;
    Ok(DatasetStats {
        avg_support: avg_row_length / db.num_items() as f64,
        item_supports,
        avg_row_length,
        dbsize: db.dbsize(),
        num_items: db.num_items(),
    })
}

/// Parameters of the synthetic generator, named after the Quest convention
/// (e.g. T10.I4.D100K.N1K).
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    /// D
    pub num_transactions: usize,
    /// T
    pub avg_transaction_length: f64,
    /// I
    pub avg_pattern_length: f64,
    /// N
    pub num_items: usize,
    /// L
    pub num_patterns: usize,
    pub seed: u64,
}

impl GenParams {
    pub fn new(num_transactions: usize, avg_transaction_length: f64, num_items: usize, seed: u64) -> Self {
        Self {
            num_transactions,
            avg_transaction_length,
            avg_pattern_length: 4.0,
            num_items,
            num_patterns: 2000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.avg_transaction_length;
        let i = self.avg_pattern_length;
        if self.num_transactions == 0 || self.num_items == 0 || self.num_patterns == 0 {
            return Err(Error::Config("D, N and L must be positive".into()));
        }
        if !(t.is_finite() && t > 0.0) || !(i.is_finite() && i > 0.0) {
            return Err(Error::Config("T and I must be positive".into()));
        }
        if t > self.num_items as f64 {
            return Err(Error::Config(format!(
                "average transaction length {t} exceeds number of items {}",
                self.num_items
            )));
        }
        if i > t {
            return Err(Error::Config(format!(
                "average pattern length {i} exceeds average transaction length {t}"
            )));
        }
        Ok(())
    }
}

struct Pattern {
    items: Vec<u32>,
    corruption: f64,
}

/// Generates a market-basket database from `L` weighted, partially
/// overlapping patterns. Transaction and pattern lengths are Poisson; each
/// pattern drops items according to its own corruption level before use,
/// and a pattern that overflows the target length is kept half the time.
pub fn generate_synthetic(params: &GenParams) -> Result<TransactionDatabase> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.num_items;
    let cfg = |e: rand_distr::PoissonError| Error::Config(e.to_string());

    let pattern_len = Poisson::new(params.avg_pattern_length).map_err(cfg)?;
    let reuse = Exp::new(2.0).expect("positive rate");
    let weight = Exp::new(1.0).expect("positive rate");
    let corruption = Normal::new(0.5, 0.1).expect("positive sd");

    let mut patterns: Vec<Pattern> = Vec::with_capacity(params.num_patterns);
    let mut cumulative = Vec::with_capacity(params.num_patterns);
    let mut total_weight = 0.0;
    for _ in 0..params.num_patterns {
        let len = (pattern_len.sample(&mut rng) as usize).clamp(1, n);
        let mut items: Vec<u32> = Vec::with_capacity(len);
        if let Some(prev) = patterns.last() {
            let frac: f64 = reuse.sample(&mut rng);
            let take = ((frac.min(1.0) * len as f64).round() as usize).min(prev.items.len());
            for k in index::sample(&mut rng, prev.items.len(), take) {
                items.push(prev.items[k]);
            }
        }
        while items.len() < len {
            let item = rng.random_range(0..n as u32);
            if !items.contains(&item) {
                items.push(item);
            }
        }
        items.sort_unstable();
        total_weight += weight.sample(&mut rng);
        cumulative.push(total_weight);
        let c: f64 = corruption.sample(&mut rng);
        patterns.push(Pattern {
            items,
            corruption: c.clamp(0.0, 1.0),
        });
    }

    let tx_len = Poisson::new(params.avg_transaction_length).map_err(cfg)?;
    let mut db = TransactionDatabase::with_capacity(n, params.num_transactions);
    let mut row_words = vec![0u64; db.words_per_row()];
    let mut picked: Vec<u32> = Vec::new();
    for _ in 0..params.num_transactions {
        row_words.iter_mut().for_each(|w| *w = 0);
        let target = (tx_len.sample(&mut rng) as usize).clamp(1, n);
        let mut len = 0usize;
        let mut attempts = 0usize;
        while len < target && attempts < 16 * target + 16 {
            attempts += 1;
            let u = rng.random::<f64>() * total_weight;
            let k = cumulative.partition_point(|&c| c <= u).min(patterns.len() - 1);
            let pat = &patterns[k];
            picked.clear();
            picked.extend_from_slice(&pat.items);
            while !picked.is_empty() && rng.random::<f64>() < pat.corruption {
                let drop = rng.random_range(0..picked.len());
                picked.swap_remove(drop);
            }
            let fresh = picked
                .iter()
                .filter(|&&i| !bits::test(&row_words, i as usize))
                .count();
            if fresh == 0 {
                continue;
            }
            let overflow = len + fresh > target;
            if overflow && len > 0 && rng.random::<bool>() {
                break;
            }
            for &i in &picked {
                bits::set(&mut row_words, i as usize);
            }
            len += fresh;
            if overflow {
                break;
            }
        }
        db.push_words(&row_words)?;
    }
    Ok(db)
}
