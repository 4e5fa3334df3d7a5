//! Exact one-sided binomial significance of classification rates.
//!
//! Under the null hypothesis every decision is a fair coin toss, so the
//! number of correctly classified writers is Binomial(n, 1/2). Tail sums are
//! accumulated in log space so probabilities far below 1e-9 keep their
//! precision.

use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::classifier::ClassificationResult;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("k = {k} outside 0..={n}")]
    OutOfRange { n: u64, k: u64 },
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two paired values")]
    TooShort,
    #[error("correlation undefined for a constant sequence")]
    ConstantInput,
}

/// ln(sum(exp(terms))) without overflow.
fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// ln P(X = i) for X ~ Binomial(n, 1/2), i = 0..=n.
fn log_pmf_table(n: u64) -> Vec<f64> {
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut ln_choose = 0.0;
    out.push(-ln2n);
    for i in 1..=n {
        ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        out.push(ln_choose - ln2n);
    }
    out
}

/// Exact upper tail P(X >= k) for X ~ Binomial(n, 1/2).
pub fn binomial_sf(n: u64, k: u64) -> Result<f64, StatsError> {
    if k > n {
        return Err(StatsError::OutOfRange { n, k });
    }
    if k == 0 {
        return Ok(1.0);
    }
    if k == n {
        return Ok(0.5f64.powi(n as i32));
    }
    let table = log_pmf_table(n);
    Ok(log_sum_exp(table[k as usize..].iter().copied()).exp())
}

/// Exact lower tail P(X <= k).
pub fn binomial_cdf(n: u64, k: u64) -> Result<f64, StatsError> {
    if k > n {
        return Err(StatsError::OutOfRange { n, k });
    }
    if k == n {
        return Ok(1.0);
    }
    let table = log_pmf_table(n);
    Ok(log_sum_exp(table[..=k as usize].iter().copied()).exp())
}

/// Normal approximation of P(X >= k) with continuity correction. Only a
/// cross-check; far in the tail it is off by orders of magnitude.
pub fn binomial_sf_normal(n: u64, k: u64) -> f64 {
    let mean = n as f64 / 2.0;
    let sd = (n as f64).sqrt() / 2.0;
    let z = (k as f64 - 0.5 - mean) / sd;
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// Smallest number of successes, and the matching rate, whose tail
/// probability falls below `p_threshold`. `None` when even `k = n` is not
/// significant.
pub fn min_significant_rate(n: u64, p_threshold: f64) -> Option<(u64, f64)> {
    if n == 0 {
        return None;
    }
    let sf = |k: u64| binomial_sf(n, k).expect("k within 0..=n");
    if sf(n) >= p_threshold {
        return None;
    }
    // The tail shrinks as k grows: binary search for the first k below.
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if sf(mid) < p_threshold {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some((lo, lo as f64 / n as f64))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooShort);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Significance of `k` correct decisions out of `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinomialReport {
    pub n: u64,
    pub k: u64,
    pub rate: f64,
    pub p_value: f64,
    /// Confidence level as quoted alongside the threshold (0.99 for 1e-2).
    pub alpha: f64,
    pub threshold: f64,
    pub significant: bool,
    pub r_min: Option<f64>,
}

impl BinomialReport {
    pub fn new(n: u64, k: u64, p_threshold: f64) -> Result<Self, StatsError> {
        let p_value = binomial_sf(n, k)?;
        Ok(Self {
            n,
            k,
            rate: if n == 0 { 0.0 } else { k as f64 / n as f64 },
            p_value,
            alpha: 1.0 - p_threshold,
            threshold: p_threshold,
            significant: p_value < p_threshold,
            r_min: min_significant_rate(n, p_threshold).map(|(_, r)| r),
        })
    }

    /// Report for a (possibly averaged) rate, taking `k = round(rate * n)`.
    pub fn from_rate(n: u64, rate: f64, p_threshold: f64) -> Result<Self, StatsError> {
        let k = (rate * n as f64).round().clamp(0.0, n as f64) as u64;
        Self::new(n, k, p_threshold)
    }

    pub const CSV_HEADER: [&'static str; 7] = ["n", "k", "rate", "p_value", "threshold", "significant", "r_min"];

    pub fn csv_fields(&self) -> [String; 7] {
        [
            self.n.to_string(),
            self.k.to_string(),
            self.rate.to_string(),
            format!("{:e}", self.p_value),
            self.threshold.to_string(),
            self.significant.to_string(),
            self.r_min.map_or(String::new(), |r| r.to_string()),
        ]
    }
}

pub fn write_reports_csv<W: io::Write>(reports: &[BinomialReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BinomialReport::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Counts correct decisions (ties count as wrong) and tests them.
pub fn evaluate_rates(results: &[ClassificationResult], p_threshold: f64) -> BinomialReport {
    let n = results.len() as u64;
    let k = results.iter().filter(|r| r.is_correct()).count() as u64;
    BinomialReport::new(n, k, p_threshold).expect("k never exceeds n")
}
