//! The flat run configuration shared by `train`, `detect`, and `cv`.
//!
//! One JSON file holds the feature extractor settings, the forest
//! hyperparameters, the TETR list, and the seed, so a report's
//! configuration fingerprint pins down every knob a run depends on.
//! Missing fields take the defaults below; unknown fields are rejected.

use std::fs;
use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use onset_core::{FeatureConfig, FeatureKind, ForestParams, SegmentSpec, TetrSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Stats8,
    Hurst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub feature_set: FeatureSet,
    pub q_values: Vec<u32>,
    pub entropy_bins: usize,
    pub hurst_tau_min: usize,
    pub hurst_tau_max: usize,
    pub hurst_nu: usize,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub window_len: usize,
    pub discard_first_last: bool,
    pub tetr_s: Vec<f64>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            feature_set: FeatureSet::Hurst,
            q_values: vec![1, 2, 3, 4, 5],
            entropy_bins: 64,
            hurst_tau_min: 2,
            hurst_tau_max: 19,
            hurst_nu: 1,
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
            bootstrap: true,
            window_len: 128,
            discard_first_last: true,
            tetr_s: vec![3.0, 4.0],
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Reads the config file, or returns defaults when no path is given.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }

    pub fn apply_overrides(
        &mut self,
        feature_set: Option<FeatureSet>,
        seed: Option<u64>,
        tetr: Option<Vec<f64>>,
    ) {
        if let Some(fs) = feature_set {
            self.feature_set = fs;
        }
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(tetr) = tetr {
            self.tetr_s = tetr;
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            kind: match self.feature_set {
                FeatureSet::Stats8 => FeatureKind::Stats8,
                FeatureSet::Hurst => FeatureKind::HurstMultiQ,
            },
            q_values: self.q_values.clone(),
            entropy_bins: self.entropy_bins,
            hurst_tau_min: self.hurst_tau_min,
            hurst_tau_max: self.hurst_tau_max,
            hurst_nu: self.hurst_nu,
        }
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            features_per_split: self.features_per_split,
            bootstrap: self.bootstrap,
            rng_seed: self.seed,
        }
    }

    pub fn segment_spec(&self) -> SegmentSpec {
        SegmentSpec {
            window_len: self.window_len,
            discard_first_last: self.discard_first_last,
        }
    }

    pub fn tetrs(&self) -> Vec<TetrSpec> {
        self.tetr_s.iter().map(|&s| TetrSpec::new(s)).collect()
    }
}
