//! Training-corpus construction from marked signals, and leave-one-out
//! fold planning.
//!
//! Each retained marker event contributes four 128-sample windows: two
//! labeled as imagined word (right of the start marker, left of the end
//! marker) and two labeled as idle state (left of the start marker, right
//! of the end marker). The first and last events of each signal are
//! discarded by default, so a signal with 33 events yields 31 × 4 windows,
//! and four training signals yield 496 class-balanced instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureConfig, FeatureMatrix};
use crate::signal::{apply_car, MarkerEvent, MarkerTrack, MultichannelSignal};

/// Segmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentSpec {
    pub window_len: usize,
    /// Drop the first and last event of every signal before segmenting.
    pub discard_first_last: bool,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self {
            window_len: 128,
            discard_first_last: true,
        }
    }
}

impl SegmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::InvalidConfig(format!(
                "window_len must be >= 2, got {}",
                self.window_len
            )));
        }
        Ok(())
    }
}

/// Which of the four per-event windows a segment came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    WordAfterStart,
    WordBeforeEnd,
    IdleBeforeStart,
    IdleAfterEnd,
}

impl Side {
    pub const ALL: [Side; 4] = [
        Side::WordAfterStart,
        Side::WordBeforeEnd,
        Side::IdleBeforeStart,
        Side::IdleAfterEnd,
    ];

    pub fn label(self) -> Label {
        match self {
            Side::WordAfterStart | Side::WordBeforeEnd => Label::ImaginedWord,
            Side::IdleBeforeStart | Side::IdleAfterEnd => Label::IdleState,
        }
    }
}

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    IdleState = 0,
    ImaginedWord = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

/// One raw training window with its provenance.
#[derive(Debug, Clone)]
pub struct TrainingSegment {
    pub window: MultichannelSignal,
    pub label: Label,
    pub event_index: usize,
    pub side: Side,
}

/// An event skipped during lenient extraction because one of its windows
/// fell outside the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkippedEvent {
    pub event_index: usize,
    pub side: Side,
}

/// A named signal/marker pair, the dataset unit for corpus building and
/// cross-validation.
#[derive(Debug, Clone)]
pub struct RecordedSignal {
    pub id: String,
    pub signal: MultichannelSignal,
    pub markers: MarkerTrack,
}

fn window_range(event: &MarkerEvent, side: Side, window_len: usize) -> (i64, i64) {
    let w = window_len as i64;
    let start = event.start_sample as i64;
    let end = event.end_sample as i64;
    match side {
        Side::WordAfterStart => (start, start + w),
        Side::WordBeforeEnd => (end - w, end),
        Side::IdleBeforeStart => (start - w, start),
        Side::IdleAfterEnd => (end, end + w),
    }
}

fn retained_events<'a>(
    markers: &'a MarkerTrack,
    spec: &SegmentSpec,
) -> &'a [MarkerEvent] {
    let events = markers.events();
    if spec.discard_first_last {
        if events.len() <= 2 {
            &[]
        } else {
            &events[1..events.len() - 1]
        }
    } else {
        events
    }
}

fn segment_event(
    signal: &MultichannelSignal,
    event: &MarkerEvent,
    event_index: usize,
    spec: &SegmentSpec,
) -> Result<Vec<TrainingSegment>> {
    let len = signal.samples_per_channel();
    let mut out = Vec::with_capacity(4);
    for side in Side::ALL {
        let (start, end) = window_range(event, side, spec.window_len);
        if start < 0 || end > len as i64 {
            return Err(Error::WindowOutOfBounds {
                event_index,
                side,
                start,
                end,
                signal_length: len,
            });
        }
        let window = signal
            .window(start as usize, spec.window_len)
            .expect("bounds checked above");
        out.push(TrainingSegment {
            window,
            label: side.label(),
            event_index,
            side,
        });
    }
    Ok(out)
}

/// Emits the four labeled windows of every retained event, in event order
/// with sides ordered word-after-start, word-before-end, idle-before-start,
/// idle-after-end.
///
/// Errors with [`Error::WindowOutOfBounds`] if any retained event's window
/// leaves the signal; see [`extract_training_segments_lenient`] for the
/// skip-and-report variant used during corpus building.
pub fn extract_training_segments(
    signal: &MultichannelSignal,
    markers: &MarkerTrack,
    spec: &SegmentSpec,
) -> Result<Vec<TrainingSegment>> {
    spec.validate()?;
    let mut out = Vec::new();
    for (event_index, event) in retained_events(markers, spec).iter().enumerate() {
        out.extend(segment_event(signal, event, event_index, spec)?);
    }
    Ok(out)
}

/// Like [`extract_training_segments`] but skips events whose windows fall
/// out of bounds, reporting them instead of failing.
pub fn extract_training_segments_lenient(
    signal: &MultichannelSignal,
    markers: &MarkerTrack,
    spec: &SegmentSpec,
) -> (Vec<TrainingSegment>, Vec<SkippedEvent>) {
    let mut segments = Vec::new();
    let mut skipped = Vec::new();
    for (event_index, event) in retained_events(markers, spec).iter().enumerate() {
        match segment_event(signal, event, event_index, spec) {
            Ok(mut segs) => segments.append(&mut segs),
            Err(Error::WindowOutOfBounds {
                event_index, side, ..
            }) => skipped.push(SkippedEvent { event_index, side }),
            Err(_) => unreachable!("segment_event only fails with WindowOutOfBounds"),
        }
    }
    (segments, skipped)
}

/// A built training corpus plus everything worth warning about.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub matrix: FeatureMatrix,
    /// `(signal index, skipped event)` pairs for events with out-of-bounds
    /// windows.
    pub skipped: Vec<(usize, SkippedEvent)>,
    /// Events shorter than two windows, whose word windows overlap.
    pub overlapping_word_windows: usize,
}

/// Builds the labeled feature matrix from the training signals: per
/// retained event and side, the window is CAR-preprocessed and run through
/// the configured extractor. Row order is fixed — by signal, then event,
/// then side — regardless of any internal scheduling.
pub fn build_fold_corpus(
    train: &[&RecordedSignal],
    cfg: &FeatureConfig,
    spec: &SegmentSpec,
) -> Result<Corpus> {
    cfg.validate()?;
    spec.validate()?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut layout = None;
    let mut skipped = Vec::new();
    let mut overlapping = 0usize;

    for (signal_index, rec) in train.iter().enumerate() {
        for ev in retained_events(&rec.markers, spec) {
            if ev.end_sample - ev.start_sample < 2 * spec.window_len {
                overlapping += 1;
            }
        }
        let (segments, skips) = extract_training_segments_lenient(&rec.signal, &rec.markers, spec);
        skipped.extend(skips.into_iter().map(|s| (signal_index, s)));
        for segment in segments {
            let preprocessed = apply_car(&segment.window);
            let fv = extract_features(&preprocessed, cfg)?;
            match &layout {
                None => layout = Some(fv.layout),
                Some(expected) => {
                    if fv.layout.len() != expected.len() {
                        return Err(Error::DimensionMismatch {
                            found: fv.layout.len(),
                            expected: expected.len(),
                        });
                    }
                }
            }
            rows.push(fv.values);
            labels.push(segment.label.as_u8());
        }
    }

    let layout = layout.ok_or(Error::EmptyMatrix)?;
    Ok(Corpus {
        matrix: FeatureMatrix {
            layout,
            rows,
            labels: Some(labels),
        },
        skipped,
        overlapping_word_windows: overlapping,
    })
}

/// One leave-one-out fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_ids: Vec<String>,
    pub test_id: String,
}

/// Leave-one-signal-out plan over a subject's signals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub subject_id: String,
    pub folds: Vec<Fold>,
}

/// Builds the leave-one-out plan: fold i tests `ids[i]` and trains on the
/// rest, in the original order.
pub fn make_folds(subject_id: &str, ids: &[String]) -> Result<FoldPlan> {
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            return Err(Error::DuplicateIds(id.clone()));
        }
    }
    let folds = ids
        .iter()
        .enumerate()
        .map(|(i, test)| Fold {
            train_ids: ids
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, id)| id.clone())
                .collect(),
            test_id: test.clone(),
        })
        .collect();
    Ok(FoldPlan {
        subject_id: subject_id.to_owned(),
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_signal(len: usize) -> MultichannelSignal {
        // two channels with distinct, non-degenerate content
        let a: Vec<f64> = (0..len).map(|t| (t as f64 * 0.21).sin()).collect();
        let b: Vec<f64> = (0..len).map(|t| (t as f64 * 0.07).cos() + 0.3).collect();
        MultichannelSignal::new(vec!["A".into(), "B".into()], 128.0, vec![a, b]).unwrap()
    }

    fn markers(events: &[(usize, usize)], len: usize) -> MarkerTrack {
        MarkerTrack::new(
            events
                .iter()
                .map(|&(s, e)| MarkerEvent {
                    start_sample: s,
                    end_sample: e,
                })
                .collect(),
            len,
        )
        .unwrap()
    }

    #[test]
    fn event_window_arithmetic() {
        let spec = SegmentSpec {
            discard_first_last: false,
            ..SegmentSpec::default()
        };
        let signal = flat_signal(1000);
        let track = markers(&[(200, 500)], 1000);
        let segments = extract_training_segments(&signal, &track, &spec).unwrap();
        assert_eq!(segments.len(), 4);
        let ranges: Vec<(Side, Label)> = segments.iter().map(|s| (s.side, s.label)).collect();
        assert_eq!(
            ranges,
            vec![
                (Side::WordAfterStart, Label::ImaginedWord),
                (Side::WordBeforeEnd, Label::ImaginedWord),
                (Side::IdleBeforeStart, Label::IdleState),
                (Side::IdleAfterEnd, Label::IdleState),
            ]
        );
        // word windows [200,328) and [372,500); idle [72,200) and [500,628)
        assert_eq!(segments[0].window.channel(0), &signal.channel(0)[200..328]);
        assert_eq!(segments[1].window.channel(0), &signal.channel(0)[372..500]);
        assert_eq!(segments[2].window.channel(0), &signal.channel(0)[72..200]);
        assert_eq!(segments[3].window.channel(0), &signal.channel(0)[500..628]);
    }

    #[test]
    fn discards_first_and_last_events() {
        let signal = flat_signal(4000);
        let track = markers(&[(200, 500), (800, 1100), (1400, 1700), (2000, 2300)], 4000);
        let segments =
            extract_training_segments(&signal, &track, &SegmentSpec::default()).unwrap();
        // 2 retained events × 4 windows
        assert_eq!(segments.len(), 8);
        let words = segments
            .iter()
            .filter(|s| s.label == Label::ImaginedWord)
            .count();
        assert_eq!(words, 4);
    }

    #[test]
    fn out_of_bounds_idle_window_reported() {
        let spec = SegmentSpec {
            discard_first_last: false,
            ..SegmentSpec::default()
        };
        let signal = flat_signal(1000);
        let track = markers(&[(50, 300)], 1000);
        let err = extract_training_segments(&signal, &track, &spec).unwrap_err();
        assert!(matches!(
            err,
            Error::WindowOutOfBounds {
                event_index: 0,
                side: Side::IdleBeforeStart,
                ..
            }
        ));

        let (segments, skipped) = extract_training_segments_lenient(&signal, &track, &spec);
        assert!(segments.is_empty());
        assert_eq!(
            skipped,
            vec![SkippedEvent {
                event_index: 0,
                side: Side::IdleBeforeStart
            }]
        );
    }

    /// Lays out `n` events with enough idle padding for all four windows.
    fn spaced_markers(n: usize) -> (MultichannelSignal, MarkerTrack) {
        let mut events = Vec::new();
        let mut cursor = 400usize;
        for _ in 0..n {
            events.push((cursor, cursor + 260));
            cursor += 260 + 400;
        }
        let len = cursor + 400;
        (flat_signal(len), markers(&events, len))
    }

    #[test]
    fn corpus_counts_and_balance() {
        // 4 signals × 33 events → 496 instances, 248 per class
        let cfg = FeatureConfig::stats8();
        let spec = SegmentSpec::default();
        let recs: Vec<RecordedSignal> = (0..4)
            .map(|i| {
                let (signal, markers) = spaced_markers(33);
                RecordedSignal {
                    id: format!("s{i}"),
                    signal,
                    markers,
                }
            })
            .collect();
        let refs: Vec<&RecordedSignal> = recs.iter().collect();
        let corpus = build_fold_corpus(&refs, &cfg, &spec).unwrap();
        assert_eq!(corpus.matrix.rows.len(), 496);
        let labels = corpus.matrix.labels.as_ref().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 248);
        assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 248);
        assert_eq!(corpus.matrix.layout.len(), 16); // 8 × 2 channels
        assert!(corpus.skipped.is_empty());
    }

    #[test]
    fn corpus_minimum_counting_rule() {
        // 4 signals × 3 events, first/last discarded → 16 instances, 8 per class
        let cfg = FeatureConfig::stats8();
        let recs: Vec<RecordedSignal> = (0..4)
            .map(|i| {
                let (signal, markers) = spaced_markers(3);
                RecordedSignal {
                    id: format!("s{i}"),
                    signal,
                    markers,
                }
            })
            .collect();
        let refs: Vec<&RecordedSignal> = recs.iter().collect();
        let corpus = build_fold_corpus(&refs, &cfg, &SegmentSpec::default()).unwrap();
        assert_eq!(corpus.matrix.rows.len(), 16);
        let labels = corpus.matrix.labels.as_ref().unwrap();
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 8);
    }

    #[test]
    fn word_and_idle_windows_disjoint_and_placed() {
        let spec = SegmentSpec {
            discard_first_last: false,
            ..SegmentSpec::default()
        };
        let signal = flat_signal(2000);
        let track = markers(&[(400, 700)], 2000);
        let segments = extract_training_segments(&signal, &track, &spec).unwrap();
        for s in &segments {
            let (lo, hi) = window_range(&track.events()[0], s.side, spec.window_len);
            match s.label {
                Label::ImaginedWord => {
                    assert!(lo >= 400 && hi <= 700, "word window inside event");
                }
                Label::IdleState => {
                    assert!(hi <= 400 || lo >= 700, "idle window outside event");
                }
            }
        }
    }

    #[test]
    fn mixed_channel_counts_rejected() {
        let (signal_a, markers_a) = spaced_markers(3);
        let (two_ch, markers_b) = spaced_markers(3);
        let three_ch = MultichannelSignal::new(
            vec!["A".into(), "B".into(), "C".into()],
            128.0,
            vec![
                two_ch.channel(0).to_vec(),
                two_ch.channel(1).to_vec(),
                two_ch.channel(0).to_vec(),
            ],
        )
        .unwrap();
        let recs = vec![
            RecordedSignal {
                id: "a".into(),
                signal: signal_a,
                markers: markers_a,
            },
            RecordedSignal {
                id: "b".into(),
                signal: three_ch,
                markers: markers_b,
            },
        ];
        let refs: Vec<&RecordedSignal> = recs.iter().collect();
        let err = build_fold_corpus(&refs, &FeatureConfig::stats8(), &SegmentSpec::default())
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn fold_plan_leave_one_out() {
        let ids: Vec<String> = ["A", "B", "C", "D", "E"].map(String::from).to_vec();
        let plan = make_folds("subj", &ids).unwrap();
        assert_eq!(plan.folds.len(), 5);
        assert_eq!(plan.folds[0].test_id, "A");
        assert_eq!(plan.folds[0].train_ids, vec!["B", "C", "D", "E"]);
        // each signal tested exactly once, never in its own training set
        for (i, fold) in plan.folds.iter().enumerate() {
            assert_eq!(fold.test_id, ids[i]);
            assert!(!fold.train_ids.contains(&fold.test_id));
            assert_eq!(fold.train_ids.len(), 4);
        }
    }

    #[test]
    fn fold_plan_generalizes_to_three() {
        let ids: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
        let plan = make_folds("s", &ids).unwrap();
        assert_eq!(plan.folds.len(), 3);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let ids: Vec<String> = ["a", "b", "a"].map(String::from).to_vec();
        assert!(matches!(
            make_folds("s", &ids).unwrap_err(),
            Error::DuplicateIds(id) if id == "a"
        ));
    }
}
