//! Scoring of predicted onsets against ground truth with a timing error
//! tolerance region (TETR), and the per-subject cross-validation driver.
//!
//! A true onset counts as detected when at least one predicted onset falls
//! inside the tolerance window centered on it. Matching is one-to-one and
//! greedy: true onsets are visited in time order and each takes the nearest
//! still-unused predicted onset inside its window, so a single prediction
//! can never satisfy two overlapping windows.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{build_fold_corpus, make_folds, RecordedSignal, SegmentSpec};
use crate::detector::detect;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::forest::{train, ForestParams};

/// Timing error tolerance region.
///
/// The tolerance window spans `round(tolerance_s × rate)` samples in total;
/// centered (the default), it covers `true_onset ± window/2`, closed on
/// both ends. Non-centered, it covers `[true_onset, true_onset + window]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TetrSpec {
    pub tolerance_s: f64,
    pub centered: bool,
}

impl TetrSpec {
    pub fn new(tolerance_s: f64) -> Self {
        Self {
            tolerance_s,
            centered: true,
        }
    }

    /// Total window width in samples (e.g. 3 s at 128 Hz → 384).
    pub fn window_samples(&self, rate_hz: f64) -> f64 {
        (self.tolerance_s * rate_hz).round()
    }

    fn contains(&self, true_onset: usize, predicted: usize, rate_hz: f64) -> bool {
        let w = self.window_samples(rate_hz);
        let delta = predicted as f64 - true_onset as f64;
        if self.centered {
            delta.abs() <= w / 2.0
        } else {
            (0.0..=w).contains(&delta)
        }
    }
}

/// One matched (true onset, predicted onset) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnsetMatch {
    pub true_index: usize,
    pub predicted_index: usize,
    pub true_onset: usize,
    pub predicted_onset: usize,
}

/// Greedy one-to-one matching of predicted onsets to true onsets.
///
/// Both input lists must be sorted ascending. Each true onset, in time
/// order, claims the nearest unused predicted onset inside its TETR window
/// (ties go to the earlier prediction).
pub fn match_onsets(
    true_onsets: &[usize],
    predicted_onsets: &[usize],
    tetr: &TetrSpec,
    rate_hz: f64,
) -> Vec<OnsetMatch> {
    let mut used = vec![false; predicted_onsets.len()];
    let mut matches = Vec::new();
    for (ti, &t) in true_onsets.iter().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        for (pi, &p) in predicted_onsets.iter().enumerate() {
            if used[pi] || !tetr.contains(t, p, rate_hz) {
                continue;
            }
            let dist = (p as f64 - t as f64).abs();
            if best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, pi));
            }
        }
        if let Some((_, pi)) = best {
            used[pi] = true;
            matches.push(OnsetMatch {
                true_index: ti,
                predicted_index: pi,
                true_onset: t,
                predicted_onset: predicted_onsets[pi],
            });
        }
    }
    matches
}

/// Matched true onsets divided by the total number of true onsets.
pub fn true_positive_rate(matches: &[OnsetMatch], n_true: usize) -> Result<f64> {
    if n_true == 0 {
        return Err(Error::NoTrueOnsets);
    }
    Ok(matches.len() as f64 / n_true as f64)
}

/// Per-TETR outcome within one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TetrResult {
    pub tolerance_s: f64,
    pub matches: usize,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold_id: usize,
    pub test_signal_id: String,
    pub n_true_onsets: usize,
    pub n_predicted: usize,
    pub per_tetr: Vec<TetrResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TetrAverage {
    pub tolerance_s: f64,
    pub tpr: f64,
}

/// Cross-validation outcome for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subject_id: String,
    pub per_fold: Vec<FoldReport>,
    /// Arithmetic mean of per-fold TPRs, one entry per TETR.
    pub averages: Vec<TetrAverage>,
    pub config_fingerprint: String,
}

impl EvalReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Flat, plot-ready CSV: `subject,fold,tetr_s,tpr`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("subject,fold,tetr_s,tpr\n");
        for fold in &self.per_fold {
            for tetr in &fold.per_tetr {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    self.subject_id, fold.fold_id, tetr.tolerance_s, tetr.tpr
                ));
            }
        }
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Stable fingerprint of the knobs a report depends on (feature
/// configuration, forest hyperparameters including the seed): FNV-1a 64
/// over the canonical JSON encoding, hex.
pub fn config_fingerprint(cfg: &FeatureConfig, params: &ForestParams) -> String {
    let blob = serde_json::to_string(&(cfg, params)).expect("config serialization cannot fail");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in blob.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Runs leave-one-signal-out cross-validation over a subject.
///
/// Per fold: build the corpus from the training signals, train a forest,
/// run the detector over the held-out signal, and score its predicted
/// onsets against every TETR. All true onsets of the test signal count in
/// the denominator.
pub fn run_cross_validation(
    subject_id: &str,
    signals: &[RecordedSignal],
    cfg: &FeatureConfig,
    params: &ForestParams,
    seg: &SegmentSpec,
    tetrs: &[TetrSpec],
) -> Result<EvalReport> {
    if signals.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if tetrs.is_empty() {
        return Err(Error::InvalidConfig("at least one TETR required".into()));
    }
    let channels = signals[0].signal.channels();
    if let Some(bad) = signals.iter().find(|r| r.signal.channels() != channels) {
        return Err(Error::DimensionMismatch {
            found: bad.signal.channels(),
            expected: channels,
        });
    }
    let ids: Vec<String> = signals.iter().map(|r| r.id.clone()).collect();
    let plan = make_folds(subject_id, &ids)?;

    let mut per_fold = Vec::with_capacity(plan.folds.len());
    for (fold_id, fold) in plan.folds.iter().enumerate() {
        let in_fold = |e| Error::Fold {
            fold_id,
            signal_id: fold.test_id.clone(),
            source: Box::new(e),
        };

        let train_set: Vec<&RecordedSignal> = signals
            .iter()
            .filter(|r| fold.train_ids.contains(&r.id))
            .collect();
        let test = signals
            .iter()
            .find(|r| r.id == fold.test_id)
            .expect("fold plan covers all ids");

        let corpus = build_fold_corpus(&train_set, cfg, seg).map_err(&in_fold)?;
        let model = train(&corpus.matrix, params).map_err(&in_fold)?;
        let detection = detect(&test.signal, &model, cfg, seg.window_len).map_err(&in_fold)?;

        let true_onsets = test.markers.onsets();
        let predicted = detection.onsets();
        let rate = test.signal.sampling_rate_hz();
        let mut per_tetr = Vec::with_capacity(tetrs.len());
        for tetr in tetrs {
            let matches = match_onsets(&true_onsets, &predicted, tetr, rate);
            let tpr = true_positive_rate(&matches, true_onsets.len()).map_err(&in_fold)?;
            per_tetr.push(TetrResult {
                tolerance_s: tetr.tolerance_s,
                matches: matches.len(),
                tpr,
            });
        }
        per_fold.push(FoldReport {
            fold_id,
            test_signal_id: fold.test_id.clone(),
            n_true_onsets: true_onsets.len(),
            n_predicted: predicted.len(),
            per_tetr,
        });
    }

    let averages = tetrs
        .iter()
        .enumerate()
        .map(|(i, tetr)| TetrAverage {
            tolerance_s: tetr.tolerance_s,
            tpr: per_fold.iter().map(|f| f.per_tetr[i].tpr).sum::<f64>() / per_fold.len() as f64,
        })
        .collect();

    Ok(EvalReport {
        subject_id: subject_id.to_owned(),
        per_fold,
        averages,
        config_fingerprint: config_fingerprint(cfg, params),
    })
}
