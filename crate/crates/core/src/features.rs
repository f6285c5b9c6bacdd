//! Per-window feature extraction.
//!
//! Two extractor configurations are supported:
//!
//! * [`FeatureKind::Stats8`] — eight values per channel, in order:
//!   mean, max, min, kurtosis, skewness, sum, Shannon entropy, and the
//!   generalized Hurst exponent at q = 1. With 14 channels this yields a
//!   112-dimensional vector per window.
//! * [`FeatureKind::HurstMultiQ`] — the generalized Hurst exponent H(q)
//!   for q = 1..5 per channel; 70 dimensions at 14 channels.
//!
//! All computations are pure and deterministic: identical input produces
//! bit-identical output.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::MultichannelSignal;

/// Which feature set to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Stats8,
    HurstMultiQ,
}

/// Extraction parameters. See the field defaults on [`FeatureConfig::stats8`]
/// and [`FeatureConfig::hurst_multi_q`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    /// Moment orders for the HurstMultiQ set. Must be non-empty and strictly
    /// increasing.
    pub q_values: Vec<u32>,
    /// Histogram bin count for the entropy estimate (Stats8 only).
    pub entropy_bins: usize,
    /// Smallest lag of the structure-function fit, in samples. Must be ≥ 2.
    pub hurst_tau_min: usize,
    /// Largest lag of the structure-function fit, in samples. The series
    /// passed to [`generalized_hurst`] must be at least 4 × this long.
    pub hurst_tau_max: usize,
    /// Time resolution ν: stride, in samples, at which the series is
    /// observed.
    pub hurst_nu: usize,
}

impl FeatureConfig {
    /// The 8-statistic configuration: 64 entropy bins, lags 2..=19, ν = 1.
    pub fn stats8() -> Self {
        Self {
            kind: FeatureKind::Stats8,
            q_values: vec![1],
            entropy_bins: 64,
            hurst_tau_min: 2,
            hurst_tau_max: 19,
            hurst_nu: 1,
        }
    }

    /// The multi-q Hurst configuration: q = 1..5, lags 2..=19, ν = 1.
    pub fn hurst_multi_q() -> Self {
        Self {
            kind: FeatureKind::HurstMultiQ,
            q_values: vec![1, 2, 3, 4, 5],
            ..Self::stats8()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hurst_tau_min < 2 {
            return Err(Error::InvalidConfig(format!(
                "hurst_tau_min must be >= 2, got {}",
                self.hurst_tau_min
            )));
        }
        if self.hurst_tau_max <= self.hurst_tau_min {
            return Err(Error::InvalidConfig(format!(
                "hurst_tau_max ({}) must exceed hurst_tau_min ({})",
                self.hurst_tau_max, self.hurst_tau_min
            )));
        }
        if self.hurst_nu == 0 {
            return Err(Error::InvalidConfig("hurst_nu must be >= 1".into()));
        }
        if self.entropy_bins < 2 {
            return Err(Error::InvalidConfig(format!(
                "entropy_bins must be >= 2, got {}",
                self.entropy_bins
            )));
        }
        if self.q_values.is_empty() {
            return Err(Error::InvalidConfig("q_values must be non-empty".into()));
        }
        if self.q_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "q_values must be strictly increasing".into(),
            ));
        }
        if self.q_values[0] == 0 {
            return Err(Error::InvalidConfig("q values must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of features emitted per channel: 8 for Stats8, |q_values| for
    /// HurstMultiQ.
    pub fn features_per_channel(&self) -> usize {
        match self.kind {
            FeatureKind::Stats8 => 8,
            FeatureKind::HurstMultiQ => self.q_values.len(),
        }
    }
}

/// Identifies one feature column: which channel, which statistic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub channel: String,
    pub feature: String,
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.channel, self.feature)
    }
}

/// One extracted instance.
///
/// `degenerate` lists indices of values that were forced to 0 because the
/// underlying statistic was undefined on that channel (constant series for
/// skewness/kurtosis, identically-zero series for the Hurst exponent).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Vec<FeatureDescriptor>,
    pub degenerate: Vec<usize>,
}

/// A stack of instances sharing one layout, optionally labeled (0 = idle,
/// 1 = imagined word).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub layout: Vec<FeatureDescriptor>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
}

impl FeatureMatrix {
    /// Serializes to CSV: header cells are `channel:feature` names, plus a
    /// final `label` column when labeled.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = self.layout.iter().map(|d| d.to_string()).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            if let Some(labels) = &self.labels {
                cells.push(labels[i].to_string());
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

pub fn mean(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(series.iter().sum::<f64>() / series.len() as f64)
}

pub fn max(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(series.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

pub fn min(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(series.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn sum(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(series.iter().sum())
}

/// Central moments m2, m3, m4 about the mean, divide-by-n convention.
fn central_moments(series: &[f64]) -> (f64, f64, f64, f64) {
    let n = series.len() as f64;
    let mu = series.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in series {
        let d = x - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (mu, m2 / n, m3 / n, m4 / n)
}

/// Skewness: `E[(X−μ)³] / (E[(X−μ)²])^{3/2}`, population moments.
///
/// Errors with [`Error::DegenerateVariance`] on a constant series.
pub fn skewness(series: &[f64]) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: 3,
        });
    }
    let (_, m2, m3, _) = central_moments(series);
    if m2 <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Kurtosis: `E[(X−μ)⁴] / (E[(X−μ)²])²`, population moments.
///
/// Plain kurtosis, not excess — a large normal sample gives ≈ 3.
pub fn kurtosis(series: &[f64]) -> Result<f64> {
    if series.len() < 4 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: 4,
        });
    }
    let (_, m2, _, m4) = central_moments(series);
    if m2 <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(m4 / (m2 * m2))
}

/// Shannon entropy, in bits, of the amplitude distribution.
///
/// `p(x_i)` is estimated by an equal-width histogram with `bins` bins
/// spanning the series' own `[min, max]`; the result is
/// `−Σ p_i log2(p_i)` over non-empty bins, always within
/// `[0, log2(bins)]`. A constant series puts all mass in one bin and
/// returns 0.
pub fn shannon_entropy(series: &[f64], bins: usize) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    if bins < 2 {
        return Err(Error::InvalidConfig(format!(
            "entropy bins must be >= 2, got {bins}"
        )));
    }
    let lo = min(series)?;
    let hi = max(series)?;
    if lo == hi {
        return Ok(0.0);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in series {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = series.len() as f64;
    let entropy = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    // clamp tiny negative rounding residue from the p = 1 case
    Ok(entropy.max(0.0))
}

fn abs_pow(x: f64, q: u32) -> f64 {
    let a = x.abs();
    let mut acc = 1.0;
    for _ in 0..q {
        acc *= a;
    }
    acc
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return 0.0;
    }
    (n * sxy - sx * sy) / denom
}

/// Generalized Hurst exponent H(q) from the q-th order structure function.
///
/// For each lag τ in `[hurst_tau_min, hurst_tau_max]` the scaling ratio
///
/// ```text
/// K_q(τ) = ⟨|X(t+τ) − X(t)|^q⟩ / ⟨|X(t)|^q⟩
/// ```
///
/// is computed with t stepping through the series at resolution ν. The
/// increment average runs over every t with t+τ in range; the normalizer
/// `⟨|X(t)|^q⟩` runs over the whole observation period (t = 0, ν, 2ν, …),
/// so it is the same constant for every τ and the fitted scaling is
/// carried entirely by the increments. A least-squares line through
/// `log K_q(τ)` vs `log(τ/ν)` has slope q·H(q); the returned value is
/// slope / q.
///
/// Conventions: a series with any zero increment average (e.g. a constant
/// series) returns 0; an identically-zero series has no usable normalizer
/// and errors with [`Error::ZeroNormalizer`].
///
/// H(q) ≈ 0 for white noise, ≈ 0.5 for Brownian paths, → 1 for smooth
/// persistent series; the linear ramp gives exactly 1 at every q.
pub fn generalized_hurst(series: &[f64], q: u32, cfg: &FeatureConfig) -> Result<f64> {
    cfg.validate()?;
    if q < 1 {
        return Err(Error::InvalidConfig("q must be >= 1".into()));
    }
    let min_len = 4 * cfg.hurst_tau_max;
    if series.len() < min_len {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: min_len,
        });
    }
    let nu = cfg.hurst_nu;

    let mut norm = 0.0;
    let mut norm_count = 0usize;
    let mut t = 0;
    while t < series.len() {
        norm += abs_pow(series[t], q);
        norm_count += 1;
        t += nu;
    }
    norm /= norm_count as f64;
    if norm == 0.0 {
        return Err(Error::ZeroNormalizer);
    }

    let n_lags = cfg.hurst_tau_max - cfg.hurst_tau_min + 1;
    let mut xs = Vec::with_capacity(n_lags);
    let mut ys = Vec::with_capacity(n_lags);
    for tau in cfg.hurst_tau_min..=cfg.hurst_tau_max {
        let mut acc = 0.0;
        let mut count = 0usize;
        let mut t = 0;
        while t + tau < series.len() {
            acc += abs_pow(series[t + tau] - series[t], q);
            count += 1;
            t += nu;
        }
        let k = acc / count as f64 / norm;
        if k == 0.0 {
            return Ok(0.0);
        }
        xs.push((tau as f64 / nu as f64).ln());
        ys.push(k.ln());
    }

    Ok(least_squares_slope(&xs, &ys) / q as f64)
}

/// The fixed Stats8 per-channel feature order.
const STATS8_NAMES: [&str; 8] = [
    "mean",
    "max",
    "min",
    "kurtosis",
    "skewness",
    "sum",
    "entropy",
    "hurst_q1",
];

/// Extracts one feature vector from a (CAR-preprocessed) window.
///
/// Channels are visited in file order. Statistics that are undefined on a
/// channel (constant series → skewness/kurtosis, identically-zero series →
/// Hurst) are emitted as 0 and reported through
/// [`FeatureVector::degenerate`] instead of failing the window; a window
/// shorter than the Hurst fit needs propagates [`Error::SeriesTooShort`].
pub fn extract_features(window: &MultichannelSignal, cfg: &FeatureConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    let per_channel = cfg.features_per_channel();
    let capacity = per_channel * window.channels();
    let mut values = Vec::with_capacity(capacity);
    let mut layout = Vec::with_capacity(capacity);
    let mut degenerate = Vec::new();

    let push = |values: &mut Vec<f64>,
                    layout: &mut Vec<FeatureDescriptor>,
                    degenerate: &mut Vec<usize>,
                    channel: &str,
                    feature: String,
                    value: Result<f64>|
     -> Result<()> {
        let v = match value {
            Ok(v) => v,
            Err(Error::DegenerateVariance) | Err(Error::ZeroNormalizer) => {
                degenerate.push(values.len());
                0.0
            }
            Err(e) => return Err(e),
        };
        values.push(v);
        layout.push(FeatureDescriptor {
            channel: channel.to_owned(),
            feature,
        });
        Ok(())
    };

    for (ch, name) in window.channel_names().iter().enumerate() {
        let series = window.channel(ch);
        match cfg.kind {
            FeatureKind::Stats8 => {
                let computed: [Result<f64>; 8] = [
                    mean(series),
                    max(series),
                    min(series),
                    kurtosis(series),
                    skewness(series),
                    sum(series),
                    shannon_entropy(series, cfg.entropy_bins),
                    generalized_hurst(series, 1, cfg),
                ];
                for (feature, value) in STATS8_NAMES.iter().zip(computed) {
                    push(
                        &mut values,
                        &mut layout,
                        &mut degenerate,
                        name,
                        (*feature).to_owned(),
                        value,
                    )?;
                }
            }
            FeatureKind::HurstMultiQ => {
                for &q in &cfg.q_values {
                    push(
                        &mut values,
                        &mut layout,
                        &mut degenerate,
                        name,
                        format!("hurst_q{q}"),
                        generalized_hurst(series, q, cfg),
                    )?;
                }
            }
        }
    }

    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(FeatureVector {
        values,
        layout,
        degenerate,
    })
}
