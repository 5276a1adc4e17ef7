//! Run configuration: one JSON file drives every command.

use std::path::{Path, PathBuf};

use primseq::dataset::synth::SynthSpec;
use primseq::model::{ModelConfig, TrainConfig};
use primseq::pipeline::{BaselineOptions, TrainOptions};
use primseq::preprocess::{ReferencePolicy, WindowSpec, DEFAULT_MIN_OVERLAP_FRAMES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::DATASET_DIR;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset read by every command except `synth`; defaults to the
    /// directory `synth` writes under `out_dir`.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Channel manifest for `synth`; the 77-channel layout when absent.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub synth: SynthSpec,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_folds")]
    pub n_folds: usize,
    #[serde(default = "default_min_overlap")]
    pub min_overlap_frames: usize,
    /// Subjects held out from training and scored by predict/eval.
    #[serde(default = "default_test_subjects")]
    pub test_subjects: usize,
    #[serde(default)]
    pub reference_policy: ReferencePolicy,
    #[serde(default)]
    pub baseline: BaselineOptions,
    /// Drives synthesis, the held-out split, training and the baseline.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_speed")]
    pub stream_speed: f64,
}

fn default_folds() -> usize {
    4
}

fn default_min_overlap() -> usize {
    DEFAULT_MIN_OVERLAP_FRAMES
}

fn default_test_subjects() -> usize {
    2
}

fn default_speed() -> f64 {
    1.0
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            out_dir: PathBuf::from("out"),
            manifest: None,
            synth: SynthSpec::default(),
            window: WindowSpec::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            n_folds: default_folds(),
            min_overlap_frames: default_min_overlap(),
            test_subjects: default_test_subjects(),
            reference_policy: ReferencePolicy::default(),
            baseline: BaselineOptions::default(),
            seed: 0,
            stream_speed: default_speed(),
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub folds: Option<usize>,
    pub speed: Option<f64>,
}

fn config_err(m: impl Into<String>) -> CliError {
    CliError::Config(m.into())
}

impl RunConfig {
    /// Reads `path`, resolves relative paths against its directory and
    /// applies the overrides. Relative `--out` values stay relative to the
    /// working directory.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data_dir = cfg.data_dir.map(|d| base.join(d));
        cfg.out_dir = base.join(&cfg.out_dir);
        cfg.manifest = cfg.manifest.map(|m| base.join(m));
        cfg.apply(overrides);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out_dir = out.clone();
        }
        if let Some(folds) = o.folds {
            self.n_folds = folds;
        }
        if let Some(speed) = o.speed {
            self.stream_speed = speed;
        }
        self.train.seed = self.seed;
        self.baseline.pointwise.seed = self.seed;
    }

    /// Checks values and, unless the command creates the dataset, that the
    /// referenced paths exist.
    pub fn validate(&self, needs_data: bool) -> Result<(), CliError> {
        self.window.geometry().map_err(|e| config_err(e.to_string()))?;
        self.model.validate().map_err(|e| config_err(e.to_string()))?;
        self.train.validate().map_err(|e| config_err(e.to_string()))?;
        self.synth.validate().map_err(|e| config_err(e.to_string()))?;
        if self.n_folds == 0 {
            return Err(config_err("n_folds must be at least 1"));
        }
        if !(self.stream_speed > 0.0) {
            return Err(config_err("stream_speed must be positive"));
        }
        if self.model.max_decode_len < 2 {
            return Err(config_err("max_decode_len must leave room for a token and EOS"));
        }
        if let Some(m) = &self.manifest {
            if !m.is_file() {
                return Err(config_err(format!("manifest {} does not exist", m.display())));
            }
        }
        if needs_data && !self.data_path().is_dir() {
            return Err(config_err(format!("data directory {} does not exist", self.data_path().display())));
        }
        Ok(())
    }

    pub fn train_options(&self, concurrent: bool) -> TrainOptions {
        TrainOptions {
            window: self.window,
            model: self.model.clone(),
            train: self.train.clone(),
            n_folds: self.n_folds,
            min_overlap_frames: self.min_overlap_frames,
            concurrent,
        }
    }

    /// SHA-256 of the canonical JSON form; any field change changes it.
    pub fn data_path(&self) -> PathBuf {
        match &self.data_dir {
            Some(d) => d.clone(),
            None => self.out_dir.join(DATASET_DIR),
        }
    }

    /// Hash of everything that affects results. File locations and the
    /// replay speed are left out, so the same run in two directories (or
    /// streamed at another speed) hashes the same; the manifest contributes
    /// its contents.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.data_dir = None;
        c.out_dir = PathBuf::new();
        c.manifest = None;
        c.stream_speed = 1.0;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&c).expect("config serializes"));
        if let Some(m) = &self.manifest {
            h.update(std::fs::read(m).unwrap_or_default());
        }
        hex::encode(h.finalize())
    }
}
