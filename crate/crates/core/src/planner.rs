//! Choosing `(p, q)` before distortion: predicted reconstruction error of a
//! single column and the shortlist of grid points that meet both a basic
//! privacy floor and an accuracy ceiling.

use std::io::Write;

use crate::corpus::DatasetStats;
use crate::distortion::SINGULARITY_EPS;
use crate::error::{Error, Result};
use crate::privacy::{basic_privacy, fmt_prob, PrivacyMode};

/// Standard deviation of the distorted ones-count of a column with `n` true
/// ones among `dbsize` rows.
pub fn stddev_distorted_ones(n: f64, dbsize: f64, p: f64, q: f64) -> f64 {
    (n * p * (1.0 - p) + (dbsize - n) * (1.0 - q) * q).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorNormalization {
    /// Standard deviation of the reconstructed count divided by the true count.
    Exact,
    /// The closed form usually quoted for table work; it equals the exact
    /// value times `sqrt(n)`.
    #[default]
    Printed,
}

impl std::str::FromStr for ErrorNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "printed" => Ok(Self::Printed),
            other => Err(Error::Config(format!("unknown error normalization {other:?}"))),
        }
    }
}

/// Predicted relative error of a reconstructed singleton with support `s`.
/// Returns `+inf` when `p + q = 1`.
pub fn relative_error_estimate(p: f64, q: f64, s: f64, dbsize: f64, mode: ErrorNormalization) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Config(format!("support {s} must lie in (0, 1]")));
    }
    let gain = p + q - 1.0;
    if gain.abs() < SINGULARITY_EPS {
        return Ok(f64::INFINITY);
    }
    let value = match mode {
        ErrorNormalization::Exact => {
            let n = s * dbsize;
            stddev_distorted_ones(n, dbsize, p, q) / (n * gain)
        }
        ErrorNormalization::Printed => (p * (1.0 - p) + (1.0 / s - 1.0) * (1.0 - q) * q).sqrt() / gain,
    };
    Ok(value.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanThresholds {
    /// Minimum basic privacy, percent.
    pub bp_min: f64,
    /// Reference point whose predicted error sets the accuracy ceiling.
    pub reference: (f64, f64),
    /// Multiplier on the reference error.
    pub error_slack: f64,
    /// Only `q` strictly above this value is considered.
    pub q_min: f64,
    pub p_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub mode: ErrorNormalization,
}

impl Default for PlanThresholds {
    fn default() -> Self {
        Self {
            bp_min: 90.0,
            reference: (0.9, 0.9),
            error_slack: 1.05,
            q_min: 0.95,
            p_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            q_grid: vec![0.96, 0.97, 0.98, 0.99],
            mode: ErrorNormalization::Printed,
        }
    }
}

impl PlanThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.bp_min > 0.0 && self.bp_min <= 100.0) {
            return Err(Error::Config(format!("bp_min = {} must lie in (0, 100]", self.bp_min)));
        }
        if self.error_slack.is_nan() || self.error_slack < 1.0 {
            return Err(Error::Config(format!("error slack {} must be at least 1", self.error_slack)));
        }
        let probs = self
            .p_grid
            .iter()
            .chain(&self.q_grid)
            .chain([&self.q_min, &self.reference.0, &self.reference.1]);
        if let Some(v) = probs.into_iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("grid value {v} is not a probability")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanPoint {
    pub p: f64,
    pub q: f64,
    /// `None` where basic privacy is undefined (degenerate channel).
    pub bp: Option<f64>,
    pub error: f64,
    pub privacy_ok: bool,
    pub accuracy_ok: bool,
    pub q_ok: bool,
}

impl PlanPoint {
    pub fn qualifies(&self) -> bool {
        self.privacy_ok && self.accuracy_ok && self.q_ok
    }
}

/// Evaluates every grid point, ordered by `q` descending then `p` ascending.
pub fn plan_grid(s0: f64, dbsize: f64, th: &PlanThresholds) -> Result<Vec<PlanPoint>> {
    th.validate()?;
    let stats = DatasetStats::uniform(s0, 1, dbsize as usize);
    let ceiling = relative_error_estimate(th.reference.0, th.reference.1, s0, dbsize, th.mode)? * th.error_slack;
    let mut qs = th.q_grid.clone();
    qs.sort_by(|a, b| b.total_cmp(a));
    let mut ps = th.p_grid.clone();
    ps.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(ps.len() * qs.len());
    for &q in &qs {
        for &p in &ps {
            let bp = basic_privacy(p, q, &stats, PrivacyMode::Simplified).ok();
            let error = relative_error_estimate(p, q, s0, dbsize, th.mode)?;
            out.push(PlanPoint {
                p,
                q,
                bp,
                error,
                privacy_ok: bp.is_some_and(|b| b >= th.bp_min),
                accuracy_ok: error <= ceiling,
                q_ok: q > th.q_min,
            });
        }
    }
    Ok(out)
}

/// Grid points that satisfy privacy, accuracy and the `q` floor.
pub fn candidate_grid(s0: f64, dbsize: f64, th: &PlanThresholds) -> Result<Vec<PlanPoint>> {
    Ok(plan_grid(s0, dbsize, th)?.into_iter().filter(PlanPoint::qualifies).collect())
}

/// CSV of the full grid: `p,q,bp,error,priv_ok,acc_ok`.
pub fn plan_report<W: Write>(s0: f64, dbsize: f64, th: &PlanThresholds, mut sink: W) -> Result<Vec<PlanPoint>> {
    let grid = plan_grid(s0, dbsize, th)?;
    writeln!(sink, "p,q,bp,error,priv_ok,acc_ok")?;
    for pt in &grid {
        let bp = pt.bp.map_or(String::new(), |b| format!("{b:.4}"));
        writeln!(
            sink,
            "{},{},{},{:.6},{},{}",
            fmt_prob(pt.p),
            fmt_prob(pt.q),
            bp,
            pt.error,
            u8::from(pt.privacy_ok),
            u8::from(pt.accuracy_ok)
        )?;
    }
    sink.flush()?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(points: &[PlanPoint]) -> Vec<(f64, f64)> {
        points.iter().map(|pt| (pt.p, pt.q)).collect()
    }

    #[test]
    fn stddev_examples() {
        assert_eq!(stddev_distorted_ones(50.0, 100.0, 1.0, 1.0), 0.0);
        assert!((stddev_distorted_ones(1e4, 1e6, 0.9, 0.9) - 300.0).abs() < 1e-9);
        assert_eq!(stddev_distorted_ones(0.0, 100.0, 0.5, 1.0), 0.0);
    }

    #[test]
    fn error_examples() {
        for mode in [ErrorNormalization::Exact, ErrorNormalization::Printed] {
            assert_eq!(relative_error_estimate(1.0, 1.0, 0.01, 1e6, mode).unwrap(), 0.0);
        }
        let printed = ErrorNormalization::Printed;
        assert!((relative_error_estimate(0.9, 0.9, 0.01, 1e6, printed).unwrap() - 3.75).abs() < 1e-12);
        let e = relative_error_estimate(0.6, 0.96, 0.01, 1e6, printed).unwrap();
        assert!((e - 3.59).abs() < 0.005 && e < 3.75);
        assert!(relative_error_estimate(0.4, 0.6, 0.01, 1e6, printed).unwrap().is_infinite());
    }

    #[test]
    fn exact_mode_is_printed_over_root_n() {
        for (p, q, s, d) in [(0.5, 0.97, 0.01, 1e6), (0.3, 0.99, 0.003, 1e5), (0.8, 0.6, 0.2, 5e3)] {
            let exact = relative_error_estimate(p, q, s, d, ErrorNormalization::Exact).unwrap();
            let printed = relative_error_estimate(p, q, s, d, ErrorNormalization::Printed).unwrap();
            assert!((exact - printed / (s * d).sqrt()).abs() <= 1e-12 * printed);
        }
    }

    #[test]
    fn synthetic_shortlist() {
        let th = PlanThresholds::default();
        let got = candidate_grid(0.01, 1e6, &th).unwrap();
        assert_eq!(pairs(&got), vec![(0.3, 0.99), (0.4, 0.98), (0.5, 0.97), (0.6, 0.96)]);
        let strict = PlanThresholds { error_slack: 1.0, ..PlanThresholds::default() };
        assert_eq!(pairs(&candidate_grid(0.01, 1e6, &strict).unwrap()), vec![(0.6, 0.96)]);
        let bp_max = PlanThresholds { bp_min: 100.0, ..PlanThresholds::default() };
        assert!(candidate_grid(0.01, 1e6, &bp_max).unwrap().is_empty());
    }

    #[test]
    fn shortlist_ignores_dbsize_in_printed_mode() {
        let th = PlanThresholds::default();
        let a = pairs(&candidate_grid(0.005, 6e5, &th).unwrap());
        let b = pairs(&candidate_grid(0.005, 1e4, &th).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn report_rows_and_flags() {
        let th = PlanThresholds::default();
        let mut out = Vec::new();
        let grid = plan_report(0.01, 1e6, &th, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 36);
        assert_eq!(grid.len(), th.p_grid.len() * th.q_grid.len());
        let pt = grid.iter().find(|pt| pt.p == 0.7 && pt.q == 0.96).unwrap();
        assert!(!pt.privacy_ok && (pt.bp.unwrap() - 89.4).abs() < 0.05);
        let real = plan_grid(0.005, 6e5, &th).unwrap();
        let pt = real.iter().find(|pt| pt.p == 0.7 && pt.q == 0.96).unwrap();
        assert!(pt.qualifies() && (pt.bp.unwrap() - 94.3).abs() < 0.05);
    }

    #[test]
    fn error_shape_on_grid() {
        for mode in [ErrorNormalization::Exact, ErrorNormalization::Printed] {
            for p in [0.3, 0.5, 0.7, 0.9] {
                let e: Vec<f64> = [0.96, 0.97, 0.98, 0.99]
                    .iter()
                    .map(|&q| relative_error_estimate(p, q, 0.01, 1e6, mode).unwrap())
                    .collect();
                assert!(e.windows(2).all(|w| w[1] < w[0]));
            }
            for q in [0.6, 0.9, 0.97] {
                let ps: Vec<f64> = (1..=200).map(|k| 1.0 - q + k as f64 * q / 200.0).collect();
                let e: Vec<f64> = ps
                    .iter()
                    .map(|&p| relative_error_estimate(p, q, 0.01, 1e6, mode).unwrap())
                    .collect();
                let argmin = (0..e.len()).min_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap();
                assert!(argmin > 0, "q={q}: minimum next to the singular point");
                assert_eq!(e.iter().filter(|&&v| v == e[argmin]).count(), 1);
                assert!(e[..=argmin].windows(2).all(|w| w[1] <= w[0]));
                assert!(e[argmin..].windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }

    #[test]
    fn thresholds_are_validated() {
        let bad = PlanThresholds { error_slack: 0.9, ..PlanThresholds::default() };
        assert!(plan_grid(0.01, 1e6, &bad).is_err());
        let bad = PlanThresholds { bp_min: 0.0, ..PlanThresholds::default() };
        assert!(plan_grid(0.01, 1e6, &bad).is_err());
    }
}
