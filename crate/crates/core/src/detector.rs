//! Testing-stage pipeline: cut a continuous signal into sequential
//! non-overlapping 1-second windows, classify each, and merge runs of
//! word-classified windows into predicted events.
//!
//! Predicted onsets are always window-aligned: onset = n × window_len for
//! the first window index n of a run.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureConfig};
use crate::forest::ForestModel;
use crate::signal::{apply_car, MultichannelSignal};

/// Per-window classifier outputs, in window order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationVector {
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
    pub window_len: usize,
}

/// One predicted event spanning whole windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedEvent {
    pub onset_sample: usize,
    pub end_sample: usize,
    /// Mean classifier score over the windows of the run.
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub events: Vec<PredictedEvent>,
    pub window_scores: Vec<f64>,
    pub window_len: usize,
}

impl DetectionResult {
    pub fn onsets(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.onset_sample).collect()
    }

    /// CSV with header `onset_sample,end_sample,mean_score`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("onset_sample,end_sample,mean_score\n");
        for ev in &self.events {
            out.push_str(&format!(
                "{},{},{}\n",
                ev.onset_sample, ev.end_sample, ev.mean_score
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Cuts `⌊L / window_len⌋` contiguous windows starting at sample 0; the
/// trailing partial window is dropped.
pub fn window_signal(
    signal: &MultichannelSignal,
    window_len: usize,
) -> Result<Vec<MultichannelSignal>> {
    if window_len == 0 {
        return Err(Error::InvalidConfig("window_len must be >= 1".into()));
    }
    let len = signal.samples_per_channel();
    if len < window_len {
        return Err(Error::SignalTooShort { len, window_len });
    }
    let count = len / window_len;
    Ok((0..count)
        .map(|n| {
            signal
                .window(n * window_len, window_len)
                .expect("window fits by construction")
        })
        .collect())
}

/// CAR-preprocesses, featurizes, and classifies each window in order.
///
/// Stateless across windows: the output equals mapping the per-window
/// pipeline independently.
pub fn classify_windows(
    windows: &[MultichannelSignal],
    model: &ForestModel,
    cfg: &FeatureConfig,
) -> Result<ClassificationVector> {
    let window_len = windows.first().map_or(0, |w| w.samples_per_channel());
    let mut labels = Vec::with_capacity(windows.len());
    let mut scores = Vec::with_capacity(windows.len());
    for window in windows {
        let expected = cfg.features_per_channel() * window.channels();
        if expected != model.feature_layout.len() {
            return Err(Error::DimensionMismatch {
                found: expected,
                expected: model.feature_layout.len(),
            });
        }
        let fv = extract_features(&apply_car(window), cfg)?;
        let (label, score) = model.predict(&fv.values)?;
        labels.push(label);
        scores.push(score);
    }
    Ok(ClassificationVector {
        labels,
        scores,
        window_len,
    })
}

/// Merges maximal runs of 1s into predicted events: onset = first run
/// index × window_len, end = (last run index + 1) × window_len.
pub fn merge_runs(vec: &ClassificationVector) -> DetectionResult {
    let mut events = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &label) in vec.labels.iter().enumerate() {
        match (label, run_start) {
            (1, None) => run_start = Some(i),
            (0, Some(start)) => {
                events.push(make_event(vec, start, i));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(start) = run_start {
        events.push(make_event(vec, start, vec.labels.len()));
    }
    DetectionResult {
        events,
        window_scores: vec.scores.clone(),
        window_len: vec.window_len,
    }
}

fn make_event(vec: &ClassificationVector, start: usize, end: usize) -> PredictedEvent {
    let mean_score = vec.scores[start..end].iter().sum::<f64>() / (end - start) as f64;
    PredictedEvent {
        onset_sample: start * vec.window_len,
        end_sample: end * vec.window_len,
        mean_score,
    }
}

/// The full testing-stage pass over one recorded signal.
pub fn detect(
    signal: &MultichannelSignal,
    model: &ForestModel,
    cfg: &FeatureConfig,
    window_len: usize,
) -> Result<DetectionResult> {
    let windows = window_signal(signal, window_len)?;
    let classified = classify_windows(&windows, model, cfg)?;
    Ok(merge_runs(&classified))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;
    use crate::forest::{train, ForestParams};
    use crate::signal::MultichannelSignal;
    use proptest::prelude::*;

    fn vector(labels: Vec<u8>) -> ClassificationVector {
        let scores = labels.iter().map(|&l| l as f64).collect();
        ClassificationVector {
            labels,
            scores,
            window_len: 128,
        }
    }

    /// Brute-force run finder used as the oracle for merge_runs.
    fn brute_force_runs(labels: &[u8], window_len: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < labels.len() {
            if labels[i] == 1 {
                let start = i;
                while i < labels.len() && labels[i] == 1 {
                    i += 1;
                }
                out.push((start * window_len, i * window_len));
            } else {
                i += 1;
            }
        }
        out
    }

    #[test]
    fn merge_runs_example() {
        let result = merge_runs(&vector(vec![0, 0, 1, 1, 0, 1]));
        let spans: Vec<(usize, usize)> = result
            .events
            .iter()
            .map(|e| (e.onset_sample, e.end_sample))
            .collect();
        assert_eq!(spans, vec![(256, 512), (640, 768)]);
    }

    #[test]
    fn merge_runs_all_zeros_and_all_ones() {
        assert!(merge_runs(&vector(vec![0; 7])).events.is_empty());
        let result = merge_runs(&vector(vec![1; 5]));
        assert_eq!(result.events.len(), 1);
        assert_eq!(result.events[0].onset_sample, 0);
        assert_eq!(result.events[0].end_sample, 640);
    }

    #[test]
    fn merge_runs_exhaustive_length_eight() {
        for bits in 0u16..256 {
            let labels: Vec<u8> = (0..8).map(|b| ((bits >> b) & 1) as u8).collect();
            let got: Vec<(usize, usize)> = merge_runs(&vector(labels.clone()))
                .events
                .iter()
                .map(|e| (e.onset_sample, e.end_sample))
                .collect();
            assert_eq!(got, brute_force_runs(&labels, 128), "labels {labels:?}");
        }
    }

    #[test]
    fn window_signal_counts() {
        let data = vec![vec![0.0; 1000], vec![1.0; 1000]];
        let s = MultichannelSignal::new(vec!["a".into(), "b".into()], 128.0, data).unwrap();
        let windows = window_signal(&s, 128).unwrap();
        assert_eq!(windows.len(), 7); // samples [0, 896) used
        assert!(windows.iter().all(|w| w.samples_per_channel() == 128));

        let short = MultichannelSignal::new(
            vec!["a".into(), "b".into()],
            128.0,
            vec![vec![0.0; 100], vec![0.0; 100]],
        )
        .unwrap();
        assert!(matches!(
            window_signal(&short, 128).unwrap_err(),
            Error::SignalTooShort { len: 100, .. }
        ));

        let exact = MultichannelSignal::new(
            vec!["a".into(), "b".into()],
            128.0,
            vec![vec![0.0; 128], vec![0.0; 128]],
        )
        .unwrap();
        assert_eq!(window_signal(&exact, 128).unwrap().len(), 1);
    }

    fn always_zero_model(d: usize) -> ForestModel {
        let layout = (0..d)
            .map(|i| crate::features::FeatureDescriptor {
                channel: format!("c{i}"),
                feature: "f".into(),
            })
            .collect();
        let matrix = FeatureMatrix {
            layout,
            rows: vec![vec![0.0; d], vec![1.0; d]],
            labels: Some(vec![0, 0]),
        };
        train(&matrix, &ForestParams::default()).unwrap()
    }

    #[test]
    fn classify_windows_with_stub_model() {
        let cfg = crate::features::FeatureConfig::hurst_multi_q();
        let data: Vec<Vec<f64>> = (0..2)
            .map(|ch| {
                (0..896)
                    .map(|t| ((t + ch * 17) as f64 * 0.13).sin())
                    .collect()
            })
            .collect();
        let s = MultichannelSignal::new(vec!["a".into(), "b".into()], 128.0, data).unwrap();
        let windows = window_signal(&s, 128).unwrap();
        let model = always_zero_model(10); // 2 channels × 5 q values
        let cv = classify_windows(&windows, &model, &cfg).unwrap();
        assert_eq!(cv.labels.len(), 7);
        assert!(cv.labels.iter().all(|&l| l == 0));
        assert!(merge_runs(&cv).events.is_empty());
    }

    #[test]
    fn classify_windows_dimension_mismatch() {
        let cfg = crate::features::FeatureConfig::hurst_multi_q();
        let data = vec![vec![0.5; 128], vec![1.0; 128]];
        let s = MultichannelSignal::new(vec!["a".into(), "b".into()], 128.0, data).unwrap();
        let windows = window_signal(&s, 128).unwrap();
        let model = always_zero_model(3);
        assert!(matches!(
            classify_windows(&windows, &model, &cfg).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn detection_csv_format() {
        let result = merge_runs(&vector(vec![0, 1, 1, 0]));
        assert_eq!(
            result.to_csv_string(),
            "onset_sample,end_sample,mean_score\n128,384,1\n"
        );
    }

    proptest! {
        #[test]
        fn merged_events_match_transition_count(labels in proptest::collection::vec(0u8..2, 0..64)) {
            let result = merge_runs(&vector(labels.clone()));
            // number of events = number of 0→1 transitions in [0] + labels
            let mut prev = 0u8;
            let mut transitions = 0usize;
            for &l in &labels {
                if prev == 0 && l == 1 {
                    transitions += 1;
                }
                prev = l;
            }
            prop_assert_eq!(result.events.len(), transitions);
            for ev in &result.events {
                prop_assert_eq!(ev.onset_sample % 128, 0);
                prop_assert!(ev.end_sample >= ev.onset_sample + 128);
            }
            // events ordered and non-overlapping
            for pair in result.events.windows(2) {
                prop_assert!(pair[0].end_sample <= pair[1].onset_sample);
            }
        }
    }
}
