//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mtss_core::corpus::VocabOptions;
use mtss_core::synth::SynthConfig;
use mtss_core::training::TrainingConfig;

use crate::{io, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub finetune_epochs: usize,
    pub seed: u64,
    pub grad_clip: Option<f64>,
    pub warm_start: bool,
    pub batch_size: usize,
    pub max_response_len: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    /// Input vocabulary frequency cutoff.
    pub min_count: usize,
    /// Output vocabulary size cap.
    pub max_vocab: usize,
    /// Directory written by `prepare`.
    pub data_dir: Option<PathBuf>,
    /// Directory holding the teacher checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainingConfig::default();
        let v = VocabOptions::default();
        RunConfig {
            alpha1: t.alpha1,
            alpha2: t.alpha2,
            lr: t.lr,
            epochs: t.epochs,
            finetune_epochs: t.finetune_epochs,
            seed: t.seed,
            grad_clip: t.grad_clip,
            warm_start: t.warm_start,
            batch_size: t.batch_size,
            max_response_len: t.max_response_len,
            embed_dim: 50,
            hidden: 150,
            min_count: v.min_count,
            max_vocab: v.max_size,
            data_dir: None,
            checkpoint_dir: None,
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML config, or the `config` field of a run manifest when the
    /// file ends in `.json`.
    pub fn read(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "json") {
            let m: crate::manifest::RunManifest = io::read_json(path)?;
            return Ok(m.config);
        }
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        toml::from_str(&text).map_err(|e| {
            let at = e
                .span()
                .map(|s| format!("line {}", text[..s.start].matches('\n').count() + 1))
                .unwrap_or_else(|| "config".into());
            Error::parse(path, at, e.message())
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            lr: self.lr,
            epochs: self.epochs,
            finetune_epochs: self.finetune_epochs,
            seed: self.seed,
            grad_clip: self.grad_clip,
            warm_start: self.warm_start,
            batch_size: self.batch_size,
            max_response_len: self.max_response_len,
        }
    }

    pub fn vocab(&self) -> VocabOptions {
        VocabOptions {
            min_count: self.min_count,
            max_size: self.max_vocab,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.training().validate()?;
        self.synth.validate()?;
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::Usage("embed_dim and hidden must be positive".into()));
        }
        if self.max_vocab < 5 {
            return Err(Error::Usage(
                "max_vocab must leave room for at least one token".into(),
            ));
        }
        Ok(())
    }
}
