//! Synthetic marked signals with controllable statistical signatures.
//!
//! Word segments can be drawn as fractional Brownian motion with a chosen
//! Hurst exponent, idle segments as white noise, so the generated corpus
//! has a planted, tunable separation between the two classes. The fBm
//! generator doubles as an independent oracle for the Hurst estimator in
//! [`crate::features`].
//!
//! Everything is deterministic per seed; the five signals of a subject use
//! derived sub-seeds so any subset is reproducible on its own.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::mix;
use crate::signal::{MarkerEvent, MarkerTrack, MultichannelSignal};

/// Amplitude model for word segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WordModel {
    /// Fractional Brownian motion with Hurst parameter `h` in (0, 1).
    Fbm { h: f64 },
    /// White noise with standard deviation `sigma`.
    HighVarianceNoise { sigma: f64 },
}

/// Amplitude model for idle segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum IdleModel {
    WhiteNoise { sigma: f64 },
}

/// Parameters for one synthetic subject: 5 signals, each alternating idle
/// and word segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub channels: usize,
    pub rate: f64,
    pub n_events: usize,
    /// Word segment length range `(min, max)`, inclusive, in samples.
    pub word_len_samples: (usize, usize),
    /// Idle segment length range `(min, max)`, inclusive, in samples.
    pub idle_len_samples: (usize, usize),
    pub word_model: WordModel,
    pub idle_model: IdleModel,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            channels: 14,
            rate: 128.0,
            n_events: 33,
            word_len_samples: (200, 300),
            idle_len_samples: (300, 600),
            word_model: WordModel::Fbm { h: 0.8 },
            idle_model: IdleModel::WhiteNoise { sigma: 1.0 },
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels < 2 {
            return Err(Error::TooFewChannels {
                found: self.channels,
            });
        }
        if self.rate <= 0.0 || !self.rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "rate must be positive, got {}",
                self.rate
            )));
        }
        if self.n_events == 0 {
            return Err(Error::InvalidConfig("n_events must be >= 1".into()));
        }
        for (name, (lo, hi)) in [
            ("word_len_samples", self.word_len_samples),
            ("idle_len_samples", self.idle_len_samples),
        ] {
            if lo == 0 || hi < lo {
                return Err(Error::InvalidConfig(format!(
                    "{name} range ({lo}, {hi}) must satisfy 0 < min <= max"
                )));
            }
        }
        if let WordModel::Fbm { h } = self.word_model {
            if !(h > 0.0 && h < 1.0) {
                return Err(Error::InvalidHurst(h));
            }
        }
        if self.word_len_samples.0 < 16 {
            return Err(Error::InvalidConfig(
                "word segments must be at least 16 samples".into(),
            ));
        }
        Ok(())
    }
}

/// Standard normal draw via Box–Muller on the given generator.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Fractional Brownian motion path with Hurst parameter `h`.
///
/// Fractional Gaussian noise is synthesized in the frequency domain —
/// Hermitian spectrum with amplitude `f^{(1−2h)/2}` and Gaussian
/// coefficients — inverse-transformed, normalized to unit sample standard
/// deviation, and cumulatively summed. Deterministic per seed.
pub fn generate_fbm(length: usize, h: f64, seed: u64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidHurst(h));
    }
    if length < 16 {
        return Err(Error::SeriesTooShort {
            len: length,
            min: 16,
        });
    }
    let n = length;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum = vec![Complex::new(0.0, 0.0); n];
    let exponent = (1.0 - 2.0 * h) / 2.0;
    for k in 1..=n / 2 {
        let f = k as f64 / n as f64;
        let amp = f.powf(exponent);
        if 2 * k == n {
            spectrum[k] = Complex::new(amp * normal(&mut rng), 0.0);
        } else {
            let g = Complex::new(normal(&mut rng), normal(&mut rng));
            let c = g * (amp * std::f64::consts::FRAC_1_SQRT_2);
            spectrum[k] = c;
            spectrum[n - k] = c.conj();
        }
    }

    FftPlanner::new()
        .plan_fft_inverse(n)
        .process(&mut spectrum);
    let mut fgn: Vec<f64> = spectrum.iter().map(|c| c.re).collect();

    // normalize innovations to unit sample std
    let mu = fgn.iter().sum::<f64>() / n as f64;
    let var = fgn.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if sd > 0.0 {
        for v in fgn.iter_mut() {
            *v /= sd;
        }
    }

    let mut path = Vec::with_capacity(n);
    let mut acc = 0.0;
    for v in fgn {
        acc += v;
        path.push(acc);
    }
    Ok(path)
}

fn segment_len(rng: &mut ChaCha8Rng, range: (usize, usize)) -> usize {
    rng.gen_range(range.0..=range.1)
}

/// Generates one marked signal: idle, word, idle, word, …, idle.
fn generate_signal(spec: &SynthSpec, signal_seed: u64) -> Result<(MultichannelSignal, MarkerTrack)> {
    let mut structure_rng = ChaCha8Rng::seed_from_u64(mix(signal_seed, 0));

    // segment plan shared by all channels
    let mut segments: Vec<(bool, usize)> = Vec::with_capacity(2 * spec.n_events + 1);
    segments.push((false, segment_len(&mut structure_rng, spec.idle_len_samples)));
    for _ in 0..spec.n_events {
        segments.push((true, segment_len(&mut structure_rng, spec.word_len_samples)));
        segments.push((false, segment_len(&mut structure_rng, spec.idle_len_samples)));
    }

    let total: usize = segments.iter().map(|(_, len)| len).sum();
    let mut events = Vec::with_capacity(spec.n_events);
    let mut cursor = 0usize;
    for &(is_word, len) in &segments {
        if is_word {
            events.push(MarkerEvent {
                start_sample: cursor,
                end_sample: cursor + len,
            });
        }
        cursor += len;
    }
    let markers = MarkerTrack::new(events, total)?;

    let mut data = Vec::with_capacity(spec.channels);
    for ch in 0..spec.channels {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(mix(signal_seed, 1 + ch as u64));
        let mut row = Vec::with_capacity(total);
        for (seg_idx, &(is_word, len)) in segments.iter().enumerate() {
            if is_word {
                match spec.word_model {
                    WordModel::Fbm { h } => {
                        let sub_seed = mix(signal_seed, ((1 + ch as u64) << 24) | seg_idx as u64);
                        row.extend(generate_fbm(len, h, sub_seed)?);
                    }
                    WordModel::HighVarianceNoise { sigma } => {
                        row.extend((0..len).map(|_| sigma * normal(&mut noise_rng)));
                    }
                }
            } else {
                let IdleModel::WhiteNoise { sigma } = spec.idle_model;
                row.extend((0..len).map(|_| sigma * normal(&mut noise_rng)));
            }
        }
        data.push(row);
    }

    let names = (0..spec.channels).map(|i| format!("C{}", i + 1)).collect();
    let signal = MultichannelSignal::new(names, spec.rate, data)?;
    Ok((signal, markers))
}

/// Generates the 5 marked signals of one synthetic subject.
pub fn generate_subject(spec: &SynthSpec) -> Result<Vec<(MultichannelSignal, MarkerTrack)>> {
    spec.validate()?;
    (0..5)
        .map(|i| generate_signal(spec, mix(spec.seed, i)))
        .collect()
}
