//! One manifest per artifact-producing command.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{io, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Command line as given, program name excluded.
    pub args: Vec<String>,
    /// Fully resolved configuration; `--config manifest.json` reruns it.
    pub config: RunConfig,
    pub seed: u64,
    /// Input file -> sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file -> sha256.
    pub outputs: BTreeMap<String, String>,
    pub wall_secs: f64,
    pub version: String,
}

pub struct ManifestBuilder {
    command: String,
    args: Vec<String>,
    config: RunConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, args: &[String], config: &RunConfig) -> Self {
        ManifestBuilder {
            command: command.into(),
            args: args.to_vec(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), io::sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    pub fn outputs(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.outputs.extend(paths);
    }

    /// Hashes the outputs and writes `<out>/manifest.json`.
    pub fn finish(self, out: &Path) -> Result<RunManifest> {
        let mut outputs = BTreeMap::new();
        for p in &self.outputs {
            outputs.insert(p.display().to_string(), io::sha256_file(p)?);
        }
        let m = RunManifest {
            command: self.command,
            args: self.args,
            seed: self.config.seed,
            config: self.config,
            inputs: self.inputs,
            outputs,
            wall_secs: self.start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").into(),
        };
        io::write_json(&out.join(MANIFEST_FILE), &m)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_hashes_inputs_and_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.txt");
        let b = dir.path().join("b.txt");
        std::fs::write(&a, "abc").unwrap();
        std::fs::write(&b, "").unwrap();
        let mut m =
            ManifestBuilder::start("x", &["--seed".into(), "3".into()], &RunConfig::default());
        m.input(&a).unwrap();
        m.output(b.clone());
        let m = m.finish(dir.path()).unwrap();
        assert_eq!(m.inputs[&a.display().to_string()], io::sha256_hex(b"abc"));
        assert_eq!(m.outputs.len(), 1);
        let back: RunManifest = io::read_json(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
        let cfg = RunConfig::read(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }
}
