//! Corpus, vocabulary and checkpoint files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use mtss_core::corpus::Corpus;
use mtss_core::diffnum::decode_checkpoint;
use mtss_core::models::{
    load_student, load_teacher, save_student, save_teacher, CheckpointMeta, ModelKind,
    StudentModel, TeacherModel,
};
use mtss_core::training::Vocabs;

use crate::{Error, Result};

pub const TRAIN_FILE: &str = "train.json";
pub const VALID_FILE: &str = "valid.json";
pub const TEST_FILE: &str = "test.json";
pub const VOCAB_FILE: &str = "vocab.json";
pub const UNIVERSAL_CHECKPOINT: &str = "all.ckpt";

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, format!("line {} column {}", e.line(), e.column()), e))
}

/// Pretty JSON with a trailing newline; parent directories are created.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::io(path))
}

/// Reads and validates a corpus file.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let corpus: Corpus = read_json(path)?;
    corpus
        .validate()
        .map_err(|e| Error::parse(path, "corpus", e))?;
    Ok(corpus)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&read_bytes(path)?))
}

/// A directory written by `prepare`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub train: Corpus,
    pub valid: Corpus,
    pub test: Corpus,
    pub vocabs: Vocabs,
}

impl Prepared {
    pub fn files(dir: &Path) -> [PathBuf; 4] {
        [TRAIN_FILE, VALID_FILE, TEST_FILE, VOCAB_FILE].map(|f| dir.join(f))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let [train, valid, test, vocab] = Self::files(dir);
        Ok(Prepared {
            train: read_corpus(&train)?,
            valid: read_corpus(&valid)?,
            test: read_corpus(&test)?,
            vocabs: read_json(&vocab)?,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let files = Self::files(dir);
        write_json(&files[0], &self.train)?;
        write_json(&files[1], &self.valid)?;
        write_json(&files[2], &self.test)?;
        write_json(&files[3], &self.vocabs)?;
        Ok(files.to_vec())
    }
}

/// Either kind of model, as found in a checkpoint file.
#[derive(Clone, Debug)]
pub enum LoadedModel {
    Teacher(TeacherModel, CheckpointMeta),
    Student(StudentModel, CheckpointMeta),
}

impl LoadedModel {
    pub fn meta(&self) -> &CheckpointMeta {
        match self {
            LoadedModel::Teacher(_, m) | LoadedModel::Student(_, m) => m,
        }
    }
}

/// Loads a checkpoint of either kind; with `schema` set the schema hash
/// has to match.
pub fn load_model(path: &Path, schema: Option<&str>) -> Result<LoadedModel> {
    let bytes = read_bytes(path)?;
    let (_, manifest) =
        decode_checkpoint(&bytes).map_err(|e| Error::parse(path, "checkpoint", e))?;
    if manifest.model_kind == ModelKind::Teacher.as_str() {
        let (m, meta) = load_teacher(&bytes, schema)?;
        Ok(LoadedModel::Teacher(m, meta))
    } else {
        let (m, meta) = load_student(&bytes, schema)?;
        Ok(LoadedModel::Student(m, meta))
    }
}

pub fn write_teacher(path: &Path, model: &TeacherModel, meta: &CheckpointMeta) -> Result<()> {
    write_bytes(path, &save_teacher(model, meta)?)
}

pub fn write_student(path: &Path, model: &StudentModel, meta: &CheckpointMeta) -> Result<()> {
    write_bytes(path, &save_student(model, meta)?)
}

pub fn read_teacher(path: &Path, schema: Option<&str>) -> Result<TeacherModel> {
    Ok(load_teacher(&read_bytes(path)?, schema)?.0)
}

pub fn read_student(path: &Path, schema: Option<&str>) -> Result<(StudentModel, CheckpointMeta)> {
    Ok(load_student(&read_bytes(path)?, schema)?)
}

/// Checkpoint file name of a bucket teacher.
pub fn teacher_file(bucket: &str) -> String {
    format!("{bucket}.ckpt")
}
