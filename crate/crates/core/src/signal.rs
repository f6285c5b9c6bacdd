//! Signal and marker types, their CSV formats, and the common average
//! reference transform.
//!
//! A [`MultichannelSignal`] is a dense channels × samples matrix of `f64`
//! amplitudes with a sampling rate; a [`MarkerTrack`] is an ordered list of
//! `(start_sample, end_sample)` event annotations against such a signal.
//!
//! File formats (UTF-8, LF line endings, `.` decimal separator):
//!
//! ```text
//! signal CSV                          markers CSV
//! # rate=128                          start_sample,end_sample
//! t,C1,C2,C3                          100,356
//! 0,0.25,-1.5,3                       600,840
//! 1,0.5,-1.25,2.75
//! ...
//! ```
//!
//! Amplitudes are written with Rust's shortest round-trip `f64` formatting,
//! so write → read reproduces values exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A sampled continuous multichannel recording.
///
/// Row = channel, column = sample index. Invariants, enforced at
/// construction: at least 2 channels, positive sampling rate, at least one
/// sample, and all channel rows of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal {
    channel_names: Vec<String>,
    sampling_rate_hz: f64,
    data: Vec<Vec<f64>>,
}

impl MultichannelSignal {
    pub fn new(
        channel_names: Vec<String>,
        sampling_rate_hz: f64,
        data: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::TooFewChannels { found: data.len() });
        }
        if channel_names.len() != data.len() {
            return Err(Error::InvalidConfig(format!(
                "{} channel names for {} data rows",
                channel_names.len(),
                data.len()
            )));
        }
        if sampling_rate_hz <= 0.0 || !sampling_rate_hz.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sampling rate must be positive and finite, got {sampling_rate_hz}"
            )));
        }
        let samples = data[0].len();
        if samples == 0 {
            return Err(Error::InvalidConfig("signal has no samples".into()));
        }
        if let Some((i, row)) = data.iter().enumerate().find(|(_, r)| r.len() != samples) {
            return Err(Error::InvalidConfig(format!(
                "channel {i} has {} samples, expected {samples}",
                row.len()
            )));
        }
        Ok(Self {
            channel_names,
            sampling_rate_hz,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.len()
    }

    pub fn samples_per_channel(&self) -> usize {
        self.data[0].len()
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    /// The sample series of one channel.
    pub fn channel(&self, index: usize) -> &[f64] {
        &self.data[index]
    }

    /// Copies out the sample range `[start, start + len)` across all channels.
    ///
    /// Returns `None` when the range does not fit inside the signal.
    pub fn window(&self, start: usize, len: usize) -> Option<MultichannelSignal> {
        let end = start.checked_add(len)?;
        if len == 0 || end > self.samples_per_channel() {
            return None;
        }
        Some(MultichannelSignal {
            channel_names: self.channel_names.clone(),
            sampling_rate_hz: self.sampling_rate_hz,
            data: self.data.iter().map(|row| row[start..end].to_vec()).collect(),
        })
    }
}

/// One annotated event: samples `[start_sample, end_sample)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkerEvent {
    pub start_sample: usize,
    pub end_sample: usize,
}

/// Ordered, non-overlapping event annotations for ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerTrack {
    events: Vec<MarkerEvent>,
    signal_length: usize,
}

impl MarkerTrack {
    /// Validates ordering, bounds, and non-overlap:
    /// `0 <= start < end <= signal_length` per event, and
    /// `event[i].end <= event[i+1].start`.
    pub fn new(events: Vec<MarkerEvent>, signal_length: usize) -> Result<Self> {
        for (i, ev) in events.iter().enumerate() {
            if ev.start_sample >= ev.end_sample {
                return Err(Error::InvalidEvent {
                    index: i,
                    start: ev.start_sample,
                    end: ev.end_sample,
                });
            }
            if ev.end_sample > signal_length {
                return Err(Error::OutOfRangeEvent {
                    index: i,
                    end: ev.end_sample,
                    signal_length,
                });
            }
            if i > 0 && events[i - 1].end_sample > ev.start_sample {
                return Err(Error::OverlappingEvents {
                    index: i,
                    start: ev.start_sample,
                    prev_end: events[i - 1].end_sample,
                });
            }
        }
        Ok(Self {
            events,
            signal_length,
        })
    }

    pub fn events(&self) -> &[MarkerEvent] {
        &self.events
    }

    pub fn signal_length(&self) -> usize {
        self.signal_length
    }

    /// Start samples of all events, in order.
    pub fn onsets(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.start_sample).collect()
    }
}

/// Common average reference: per sample column, subtracts the cross-channel
/// mean from every channel.
///
/// `out[i][t] = in[i][t] − (1/n) Σ_j in[j][t]`. Dimensions are unchanged and
/// every output column sums to zero. Idempotent, and preserves pairwise
/// channel differences.
pub fn apply_car(signal: &MultichannelSignal) -> MultichannelSignal {
    let n = signal.channels() as f64;
    let samples = signal.samples_per_channel();
    let mut data: Vec<Vec<f64>> = signal.data.clone();
    for t in 0..samples {
        let mean = signal.data.iter().map(|row| row[t]).sum::<f64>() / n;
        for row in data.iter_mut() {
            row[t] -= mean;
        }
    }
    MultichannelSignal {
        channel_names: signal.channel_names.clone(),
        sampling_rate_hz: signal.sampling_rate_hz,
        data,
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Reads a signal CSV (see module docs for the format).
pub fn read_signal(path: &Path) -> Result<MultichannelSignal> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();

    let rate_line = lines
        .next()
        .ok_or_else(|| malformed(path, "empty file, expected `# rate=<float>` header"))?;
    let rate: f64 = rate_line
        .strip_prefix("# rate=")
        .ok_or_else(|| malformed(path, "first line must be `# rate=<float>`"))?
        .trim()
        .parse()
        .map_err(|_| malformed(path, format!("unparseable rate in {rate_line:?}")))?;

    let header = lines
        .next()
        .ok_or_else(|| malformed(path, "missing header"))?;
    let mut cols = header.split(',');
    if cols.next() != Some("t") {
        return Err(malformed(path, "header must start with column `t`"));
    }
    let channel_names: Vec<String> = cols.map(str::to_owned).collect();
    if channel_names.len() < 2 {
        return Err(Error::TooFewChannels {
            found: channel_names.len(),
        });
    }

    let mut data: Vec<Vec<f64>> = vec![Vec::new(); channel_names.len()];
    let mut row_index = 0usize;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != channel_names.len() + 1 {
            return Err(malformed(
                path,
                format!(
                    "row {row_index} has {} cells, expected {}",
                    cells.len(),
                    channel_names.len() + 1
                ),
            ));
        }
        let t: usize = cells[0]
            .parse()
            .map_err(|_| malformed(path, format!("row {row_index}: bad sample index {:?}", cells[0])))?;
        if t != row_index {
            return Err(malformed(
                path,
                format!("row {row_index}: sample index {t} out of sequence"),
            ));
        }
        for (ch, cell) in cells[1..].iter().enumerate() {
            let value: f64 = cell
                .parse()
                .map_err(|_| malformed(path, format!("row {row_index}: non-numeric cell {cell:?}")))?;
            if !value.is_finite() {
                return Err(malformed(
                    path,
                    format!("row {row_index}: non-finite value {cell:?}"),
                ));
            }
            data[ch].push(value);
        }
        row_index += 1;
    }
    if row_index == 0 {
        return Err(malformed(path, "no sample rows"));
    }

    MultichannelSignal::new(channel_names, rate, data)
}

/// Writes a signal CSV. Shortest round-trip float formatting, so
/// `read_signal(write_signal(s)) == s` exactly.
pub fn write_signal(signal: &MultichannelSignal, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# rate={}\n", signal.sampling_rate_hz()));
    out.push('t');
    for name in signal.channel_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for t in 0..signal.samples_per_channel() {
        out.push_str(&t.to_string());
        for ch in 0..signal.channels() {
            out.push(',');
            out.push_str(&signal.channel(ch)[t].to_string());
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a markers CSV and validates the events against `signal_length`.
pub fn read_markers(path: &Path, signal_length: usize) -> Result<MarkerTrack> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| malformed(path, "empty file"))?;
    if header != "start_sample,end_sample" {
        return Err(malformed(path, "header must be `start_sample,end_sample`"));
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (start, end) = line
            .split_once(',')
            .ok_or_else(|| malformed(path, format!("row {i}: expected two cells")))?;
        let start: usize = start
            .parse()
            .map_err(|_| malformed(path, format!("row {i}: bad start {start:?}")))?;
        let end: usize = end
            .parse()
            .map_err(|_| malformed(path, format!("row {i}: bad end {end:?}")))?;
        events.push(MarkerEvent {
            start_sample: start,
            end_sample: end,
        });
    }
    MarkerTrack::new(events, signal_length)
}

/// Writes a markers CSV.
pub fn write_markers(track: &MarkerTrack, path: &Path) -> Result<()> {
    let mut out = String::from("start_sample,end_sample\n");
    for ev in track.events() {
        out.push_str(&format!("{},{}\n", ev.start_sample, ev.end_sample));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn signal(data: Vec<Vec<f64>>) -> MultichannelSignal {
        let names = (0..data.len()).map(|i| format!("C{}", i + 1)).collect();
        MultichannelSignal::new(names, 128.0, data).unwrap()
    }

    #[test]
    fn car_identical_channels_become_zero() {
        let s = signal(vec![vec![5.0; 4], vec![5.0; 4], vec![5.0; 4]]);
        let out = apply_car(&s);
        for ch in 0..3 {
            assert!(out.channel(ch).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn car_zero_mean_column_is_fixed_point() {
        let s = signal(vec![vec![1.0], vec![-1.0]]);
        let out = apply_car(&s);
        assert_eq!(out.channel(0), &[1.0]);
        assert_eq!(out.channel(1), &[-1.0]);
    }

    #[test]
    fn car_three_channel_column() {
        let s = signal(vec![vec![1.0], vec![2.0], vec![3.0]]);
        let out = apply_car(&s);
        assert_eq!(out.channel(0), &[-1.0]);
        assert_eq!(out.channel(1), &[0.0]);
        assert_eq!(out.channel(2), &[1.0]);
    }

    #[test]
    fn single_channel_rejected() {
        let err = MultichannelSignal::new(vec!["C1".into()], 128.0, vec![vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::TooFewChannels { found: 1 }));
    }

    #[test]
    fn ragged_data_rejected() {
        let err = MultichannelSignal::new(
            vec!["a".into(), "b".into()],
            128.0,
            vec![vec![1.0, 2.0], vec![1.0]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn read_signal_three_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(
            &path,
            "# rate=128\nt,C1,C2,C3\n0,1,2,3\n1,4,5,6\n2,7,8,9\n3,10,11,12\n",
        )
        .unwrap();
        let s = read_signal(&path).unwrap();
        assert_eq!(s.channels(), 3);
        assert_eq!(s.samples_per_channel(), 4);
        assert_eq!(s.sampling_rate_hz(), 128.0);
        assert_eq!(s.channel_names(), &["C1", "C2", "C3"]);
        assert_eq!(s.channel(1), &[2.0, 5.0, 8.0, 11.0]);
    }

    #[test]
    fn read_signal_ragged_row_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "# rate=128\nt,C1,C2\n0,1,2\n1,4\n").unwrap();
        assert!(matches!(
            read_signal(&path).unwrap_err(),
            Error::MalformedFile { .. }
        ));
    }

    #[test]
    fn read_signal_missing_rate_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "t,C1,C2\n0,1,2\n").unwrap();
        assert!(matches!(
            read_signal(&path).unwrap_err(),
            Error::MalformedFile { .. }
        ));
    }

    #[test]
    fn read_markers_two_events() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "start_sample,end_sample\n100,356\n600,840\n").unwrap();
        let m = read_markers(&path, 1000).unwrap();
        assert_eq!(m.events().len(), 2);
        assert_eq!(m.onsets(), vec![100, 600]);
    }

    #[test]
    fn read_markers_overlap_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "start_sample,end_sample\n100,356\n300,500\n").unwrap();
        assert!(matches!(
            read_markers(&path, 1000).unwrap_err(),
            Error::OverlappingEvents { index: 1, .. }
        ));
    }

    #[test]
    fn read_markers_out_of_range_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "start_sample,end_sample\n100,1200\n").unwrap();
        assert!(matches!(
            read_markers(&path, 1000).unwrap_err(),
            Error::OutOfRangeEvent { index: 0, .. }
        ));
    }

    #[test]
    fn window_bounds() {
        let s = signal(vec![(0..10).map(|v| v as f64).collect(), vec![0.0; 10]]);
        let w = s.window(3, 4).unwrap();
        assert_eq!(w.channel(0), &[3.0, 4.0, 5.0, 6.0]);
        assert!(s.window(7, 4).is_none());
        assert!(s.window(0, 0).is_none());
    }

    prop_compose! {
        fn arb_signal()(channels in 2usize..6, samples in 1usize..40)
            (data in proptest::collection::vec(
                proptest::collection::vec(-1e6f64..1e6, samples), channels),
             rate in 1.0f64..1000.0)
            -> MultichannelSignal
        {
            let names = (0..data.len()).map(|i| format!("ch{i}")).collect();
            MultichannelSignal::new(names, rate, data).unwrap()
        }
    }

    proptest! {
        #[test]
        fn car_columns_sum_to_zero(s in arb_signal()) {
            let out = apply_car(&s);
            let tol = 1e-9 * out.channels() as f64;
            for t in 0..out.samples_per_channel() {
                let col_sum: f64 = (0..out.channels()).map(|ch| out.channel(ch)[t]).sum();
                prop_assert!(col_sum.abs() < tol, "column {} sums to {}", t, col_sum);
            }
        }

        #[test]
        fn car_is_idempotent(s in arb_signal()) {
            // tolerance scales with amplitude: 1e-12 absolute is below f64
            // resolution for 1e6-scale values
            let scale = (0..s.channels())
                .flat_map(|ch| s.channel(ch).iter().map(|v| v.abs()))
                .fold(1.0f64, f64::max);
            let once = apply_car(&s);
            let twice = apply_car(&once);
            for ch in 0..s.channels() {
                for t in 0..s.samples_per_channel() {
                    prop_assert!((once.channel(ch)[t] - twice.channel(ch)[t]).abs() < 1e-12 * scale);
                }
            }
        }

        #[test]
        fn car_preserves_pairwise_differences(s in arb_signal()) {
            let out = apply_car(&s);
            for t in 0..s.samples_per_channel() {
                for i in 0..s.channels() {
                    for j in (i + 1)..s.channels() {
                        let before = s.channel(i)[t] - s.channel(j)[t];
                        let after = out.channel(i)[t] - out.channel(j)[t];
                        prop_assert!((before - after).abs() < 1e-12 * before.abs().max(1.0));
                    }
                }
            }
        }

        #[test]
        fn signal_roundtrip_is_lossless(s in arb_signal()) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("roundtrip.csv");
            write_signal(&s, &path).unwrap();
            let back = read_signal(&path).unwrap();
            prop_assert_eq!(back.channels(), s.channels());
            prop_assert_eq!(back.samples_per_channel(), s.samples_per_channel());
            for ch in 0..s.channels() {
                for t in 0..s.samples_per_channel() {
                    prop_assert!((back.channel(ch)[t] - s.channel(ch)[t]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn markers_roundtrip(starts in proptest::collection::vec(0usize..500, 0..8)) {
            // build strictly increasing non-overlapping events from arbitrary starts
            let mut cursor = 0usize;
            let mut events = Vec::new();
            for gap in starts {
                let start = cursor + gap;
                let end = start + 10;
                events.push(MarkerEvent { start_sample: start, end_sample: end });
                cursor = end;
            }
            let track = MarkerTrack::new(events, cursor + 1000).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            write_markers(&track, &path).unwrap();
            let back = read_markers(&path, track.signal_length()).unwrap();
            prop_assert_eq!(back, track);
        }
    }
}
