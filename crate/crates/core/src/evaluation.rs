//! Accuracy, privacy and efficiency metrics of a distortion run.
//!
//! Metrics that are undefined for a run (no true frequent itemsets at a level,
//! no itemset found by both miners) are `None` rather than zero.

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use crate::apriori::{Apriori, CountingStrategy};
use crate::corpus::{compute_stats, TransactionDatabase};
use crate::distortion::{distort_database, DistortionParams};
use crate::emask::EmaskMiner;
use crate::error::{Error, Result};
use crate::lattice::{FrequentLattice, Itemset};
use crate::privacy::{basic_privacy, fmt_prob, reinterrogated_privacy, PrivacyMode};

fn support_error_of<'a>(
    actual: &HashMap<&'a Itemset, f64>,
    reconstructed: impl Iterator<Item = (&'a Itemset, f64)>,
) -> Option<f64> {
    let (mut sum, mut common) = (0.0, 0usize);
    for (set, rec) in reconstructed {
        if let Some(&act) = actual.get(set) {
            sum += (rec - act).abs() / act;
            common += 1;
        }
    }
    (common > 0).then(|| 100.0 * sum / common as f64)
}

fn identity_errors_of(actual: &HashMap<&Itemset, f64>, reconstructed: &HashMap<&Itemset, f64>) -> Option<(f64, f64)> {
    if actual.is_empty() {
        return None;
    }
    let extra = reconstructed.keys().filter(|s| !actual.contains_key(*s)).count();
    let missed = actual.keys().filter(|s| !reconstructed.contains_key(*s)).count();
    let f = actual.len() as f64;
    Some((100.0 * extra as f64 / f, 100.0 * missed as f64 / f))
}

fn index<'a>(entries: impl Iterator<Item = &'a (Itemset, f64)>) -> HashMap<&'a Itemset, f64> {
    entries.map(|(s, c)| (s, *c)).collect()
}

/// Mean relative support error (percent) over itemsets found by both miners.
pub fn support_error(actual: &FrequentLattice, reconstructed: &FrequentLattice) -> Option<f64> {
    let act = index(actual.iter());
    support_error_of(&act, reconstructed.iter().map(|(s, c)| (s, *c)))
}

/// False-positive and false-negative rates (percent) relative to `|actual|`.
pub fn identity_errors(actual: &FrequentLattice, reconstructed: &FrequentLattice) -> Option<(f64, f64)> {
    identity_errors_of(&index(actual.iter()), &index(reconstructed.iter()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelMetrics {
    pub level: usize,
    /// Number of truly frequent itemsets of this length.
    pub num_frequent: usize,
    pub sigma_plus: Option<f64>,
    pub sigma_minus: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelBreakdown {
    pub levels: Vec<LevelMetrics>,
    pub var_sigma_plus: Option<f64>,
    pub var_sigma_minus: Option<f64>,
    pub var_rho: Option<f64>,
}

fn population_variance(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Some(v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64)
}

/// Metrics per itemset length, for every length present in either lattice.
/// Variances are taken over the levels with at least one true frequent itemset.
pub fn per_level_breakdown(actual: &FrequentLattice, reconstructed: &FrequentLattice) -> LevelBreakdown {
    let depth = actual.max_level().max(reconstructed.max_level());
    let levels: Vec<LevelMetrics> = (1..=depth)
        .map(|level| {
            let act = index(actual.level(level).iter());
            let rec = index(reconstructed.level(level).iter());
            let ids = identity_errors_of(&act, &rec);
            LevelMetrics {
                level,
                num_frequent: act.len(),
                sigma_plus: ids.map(|t| t.0),
                sigma_minus: ids.map(|t| t.1),
                rho: support_error_of(&act, reconstructed.level(level).iter().map(|(s, c)| (s, *c))),
            }
        })
        .collect();
    let populated = || levels.iter().filter(|l| l.num_frequent > 0);
    LevelBreakdown {
        var_sigma_plus: population_variance(populated().filter_map(|l| l.sigma_plus)),
        var_sigma_minus: population_variance(populated().filter_map(|l| l.sigma_minus)),
        var_rho: population_variance(populated().filter_map(|l| l.rho)),
        levels,
    }
}

/// Ratio of the two running times.
pub fn slowdown(t_emask: f64, t_apriori: f64) -> Result<f64> {
    if !(t_emask > 0.0 && t_apriori > 0.0) || !t_emask.is_finite() || !t_apriori.is_finite() {
        return Err(Error::Timing(format!("timings must be positive, got {t_emask} and {t_apriori}")));
    }
    Ok(t_emask / t_apriori)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub strategy: CountingStrategy,
    /// Each miner is timed this many times; the median is reported.
    pub timing_runs: usize,
    /// Size of the thread pool the timed mining calls run in. `None` uses the
    /// current pool.
    pub timing_threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { strategy: CountingStrategy::default(), timing_runs: 3, timing_threads: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    pub sup_min: f64,
    pub bp: f64,
    pub rp: f64,
    pub delta: f64,
    pub sigma_plus: Option<f64>,
    pub sigma_minus: Option<f64>,
    pub rho: Option<f64>,
    pub num_frequent: usize,
    pub num_reconstructed: usize,
    pub per_level: Vec<LevelMetrics>,
    pub var_sigma_plus: Option<f64>,
    pub var_sigma_minus: Option<f64>,
    pub var_rho: Option<f64>,
    /// Median wall-clock seconds of the exact miner on the original data.
    pub t_apriori: f64,
    /// Median wall-clock seconds of the reconstructing miner on the distorted data.
    pub t_emask: f64,
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or(String::new(), |x| format!("{x:.digits$}"))
}

pub const REPORT_CSV_HEADER: &str = "p,q,bp,rp,delta,sigma_plus,sigma_minus,rho,var_sigma_plus,var_sigma_minus,var_rho";
pub const LEVELS_CSV_HEADER: &str = "level,num_frequent,sigma_plus,sigma_minus,rho";

impl ExperimentReport {
    /// Everything except the timing-derived fields.
    pub fn same_metrics(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self { delta: 0.0, t_apriori: 0.0, t_emask: 0.0, ..r.clone() };
        strip(self) == strip(other)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.4},{:.4},{:.4},{},{},{},{},{},{}",
            fmt_prob(self.p),
            fmt_prob(self.q),
            self.bp,
            self.rp,
            self.delta,
            opt(self.sigma_plus, 4),
            opt(self.sigma_minus, 4),
            opt(self.rho, 4),
            opt(self.var_sigma_plus, 4),
            opt(self.var_sigma_minus, 4),
            opt(self.var_rho, 4),
        )
    }

    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{REPORT_CSV_HEADER}")?;
        writeln!(sink, "{}", self.csv_row())?;
        Ok(())
    }

    pub fn write_levels_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{LEVELS_CSV_HEADER}")?;
        for l in &self.per_level {
            writeln!(
                sink,
                "{},{},{},{},{}",
                l.level,
                l.num_frequent,
                opt(l.sigma_plus, 4),
                opt(l.sigma_minus, 4),
                opt(l.rho, 4)
            )?;
        }
        Ok(())
    }

    /// Flat `key=value` lines; absent metrics have an empty value.
    pub fn write_text<W: Write>(&self, mut sink: W) -> Result<()> {
        let fields: Vec<(&str, String)> = vec![
            ("p", fmt_prob(self.p)),
            ("q", fmt_prob(self.q)),
            ("seed", self.seed.to_string()),
            ("sup_min", self.sup_min.to_string()),
            ("bp", format!("{:.4}", self.bp)),
            ("rp", format!("{:.4}", self.rp)),
            ("delta", format!("{:.4}", self.delta)),
            ("sigma_plus", opt(self.sigma_plus, 4)),
            ("sigma_minus", opt(self.sigma_minus, 4)),
            ("rho", opt(self.rho, 4)),
            ("var_sigma_plus", opt(self.var_sigma_plus, 4)),
            ("var_sigma_minus", opt(self.var_sigma_minus, 4)),
            ("var_rho", opt(self.var_rho, 4)),
            ("num_frequent", self.num_frequent.to_string()),
            ("num_reconstructed", self.num_reconstructed.to_string()),
            ("t_apriori", format!("{:.6}", self.t_apriori)),
            ("t_emask", format!("{:.6}", self.t_emask)),
        ];
        for (k, v) in fields {
            writeln!(sink, "{k}={v}")?;
        }
        Ok(())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn timed<T: Send>(runs: usize, pool: Option<&rayon::ThreadPool>, f: impl Fn() -> Result<T> + Sync) -> Result<(T, f64)> {
    let mut first = None;
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs.max(1) {
        let start = Instant::now();
        let out = match pool {
            Some(pool) => pool.install(&f)?,
            None => f()?,
        };
        times.push(start.elapsed().as_secs_f64());
        first.get_or_insert(out);
    }
    Ok((first.expect("at least one run"), median(times)))
}

pub fn run_experiment(db: &TransactionDatabase, params: &DistortionParams, sup_min: f64) -> Result<ExperimentReport> {
    run_experiment_with(db, params, sup_min, &ExperimentConfig::default())
}

/// Mines `db` exactly, distorts it, mines the distorted copy with
/// reconstruction, and compares the two. Only the mining calls are timed.
pub fn run_experiment_with(
    db: &TransactionDatabase,
    params: &DistortionParams,
    sup_min: f64,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    params.validate()?;
    let pool = config
        .timing_threads
        .map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build())
        .transpose()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;

    let apriori = Apriori { strategy: config.strategy, max_level: None };
    let (actual, t_apriori) = timed(config.timing_runs, pool.as_ref(), || apriori.mine(db, sup_min))?;

    let distorted = distort_database(db, params)?;
    let miner = EmaskMiner { strategy: config.strategy, max_level: None };
    let (reconstructed, t_emask) = timed(config.timing_runs, pool.as_ref(), || {
        miner.mine(&distorted, params.p, params.q, sup_min)
    })?;

    let stats = compute_stats(db)?;
    let bp = basic_privacy(params.p, params.q, &stats, PrivacyMode::Simplified)?;
    let rp = reinterrogated_privacy(db, &distorted, &reconstructed, bp)?;
    let ids = identity_errors(&actual, &reconstructed);
    let breakdown = per_level_breakdown(&actual, &reconstructed);

    Ok(ExperimentReport {
        p: params.p,
        q: params.q,
        seed: params.seed,
        sup_min,
        bp,
        rp,
        delta: slowdown(t_emask, t_apriori)?,
        sigma_plus: ids.map(|t| t.0),
        sigma_minus: ids.map(|t| t.1),
        rho: support_error(&actual, &reconstructed),
        num_frequent: actual.len(),
        num_reconstructed: reconstructed.len(),
        per_level: breakdown.levels,
        var_sigma_plus: breakdown.var_sigma_plus,
        var_sigma_minus: breakdown.var_sigma_minus,
        var_rho: breakdown.var_rho,
        t_apriori,
        t_emask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[u32]) -> Itemset {
        Itemset::new(items.to_vec()).unwrap()
    }

    fn lattice(entries: &[(&[u32], f64)]) -> FrequentLattice {
        FrequentLattice::from_entries(0.01, 1000, entries.iter().map(|(s, c)| (set(s), *c)))
    }

    #[test]
    fn support_error_examples() {
        let a = lattice(&[(&[1], 10.0)]);
        let r = lattice(&[(&[1], 11.0)]);
        assert!((support_error(&a, &r).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(support_error(&a, &a), Some(0.0));
        let a = lattice(&[(&[1], 100.0), (&[2], 100.0)]);
        let r = lattice(&[(&[1], 105.0), (&[2], 85.0)]);
        assert!((support_error(&a, &r).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(support_error(&a, &lattice(&[(&[3], 50.0)])), None);
    }

    #[test]
    fn identity_error_examples() {
        let f = lattice(&[(&[0], 20.0), (&[1], 20.0), (&[0, 1], 10.0)]);
        let r = lattice(&[(&[0], 20.0), (&[1], 20.0), (&[0, 2], 10.0)]);
        let (sp, sm) = identity_errors(&f, &r).unwrap();
        assert!((sp - 100.0 / 3.0).abs() < 1e-9 && (sm - 100.0 / 3.0).abs() < 1e-9);
        assert_eq!(identity_errors(&f, &f), Some((0.0, 0.0)));
        assert_eq!(identity_errors(&f, &FrequentLattice::new(0.01, 1000)), Some((0.0, 100.0)));
        assert_eq!(identity_errors(&FrequentLattice::new(0.01, 1000), &f), None);
    }

    #[test]
    fn breakdown_shape_and_variances() {
        let f = lattice(&[(&[0], 20.0), (&[1], 20.0), (&[0, 1], 10.0)]);
        let b = per_level_breakdown(&f, &f);
        assert_eq!(b.levels.len(), 2);
        assert!(b.levels.iter().all(|l| l.sigma_plus == Some(0.0) && l.rho == Some(0.0)));
        assert_eq!(b.levels.iter().map(|l| l.num_frequent).sum::<usize>(), f.len());
        assert_eq!(b.var_sigma_minus, Some(0.0));

        let r = lattice(&[(&[0], 22.0), (&[1], 20.0)]);
        let b = per_level_breakdown(&f, &r);
        assert_eq!(b.levels[1].sigma_minus, Some(100.0));
        assert_eq!(b.levels[1].rho, None);
        assert_eq!(b.var_sigma_minus, Some(2500.0));
        assert_eq!(b.var_rho, Some(0.0));
    }

    #[test]
    fn slowdown_examples() {
        assert_eq!(slowdown(1.5, 1.5).unwrap(), 1.0);
        assert!((slowdown(2.4, 1.0).unwrap() - 2.4).abs() < 1e-12);
        assert!(slowdown(0.5, 1.0).unwrap() < 1.0);
        assert!(slowdown(0.0, 1.0).is_err() && slowdown(1.0, -1.0).is_err());
    }

    fn small_db() -> TransactionDatabase {
        let rows: Vec<Vec<u32>> = (0..400u32).map(|r| (0..12).filter(|i| (r * 7 + i * 3) % (i + 2) == 0).collect()).collect();
        TransactionDatabase::from_itemsets(12, rows).unwrap()
    }

    #[test]
    fn identity_channel_has_no_error_and_no_privacy() {
        let db = small_db();
        let r = run_experiment(&db, &DistortionParams::new(1.0, 1.0, 3).unwrap(), 0.1).unwrap();
        assert!(r.num_frequent > 0);
        assert_eq!((r.sigma_plus, r.sigma_minus), (Some(0.0), Some(0.0)));
        assert!(r.rho.unwrap() < 1e-9);
        assert!(r.bp.abs() < 1e-9 && r.rp.abs() < 1e-9);
    }

    #[test]
    fn metrics_are_deterministic() {
        let db = small_db();
        let params = DistortionParams::new(0.7, 0.9, 11).unwrap();
        let cfg = ExperimentConfig { timing_runs: 1, ..ExperimentConfig::default() };
        let a = run_experiment_with(&db, &params, 0.1, &cfg).unwrap();
        let b = run_experiment_with(&db, &params, 0.1, &cfg).unwrap();
        assert!(a.same_metrics(&b));
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let c = pool.install(|| run_experiment_with(&db, &params, 0.1, &cfg)).unwrap();
            assert!(a.same_metrics(&c), "{threads} threads");
        }
        assert!(a.rp <= a.bp + 1e-9);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.lines().all(|l| l.split(',').count() == 11));
    }
}
