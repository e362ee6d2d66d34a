use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, ModelKind, StudentModel, TeacherModel};
use crate::corpus::{DomainSchema, Vocabulary};
use crate::diffnum::{config_hash, decode_checkpoint, encode_checkpoint};

/// Everything besides the weights needed to use a model on a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: ModelConfig,
    pub in_vocab: Vocabulary,
    pub out_vocab: Vocabulary,
    pub schema_hash: String,
    #[serde(default)]
    pub domain: Option<String>,
}

/// Hash identifying a set of domain schemas.
pub fn schema_hash(schemas: &[DomainSchema]) -> String {
    config_hash(&serde_json::to_value(schemas).unwrap_or_default())
}

fn meta_value(meta: &CheckpointMeta) -> Result<serde_json::Value, ModelError> {
    serde_json::to_value(meta).map_err(|e| ModelError::Meta(e.to_string()))
}

pub fn save_teacher(model: &TeacherModel, meta: &CheckpointMeta) -> Result<Vec<u8>, ModelError> {
    let mut meta = meta.clone();
    meta.config = model.config;
    meta.domain = model.domain.clone();
    Ok(encode_checkpoint(
        &model.params,
        ModelKind::Teacher.as_str(),
        meta_value(&meta)?,
    )?)
}

pub fn save_student(model: &StudentModel, meta: &CheckpointMeta) -> Result<Vec<u8>, ModelError> {
    let mut meta = meta.clone();
    meta.config = model.config;
    meta.domain = None;
    Ok(encode_checkpoint(
        &model.params,
        ModelKind::Student.as_str(),
        meta_value(&meta)?,
    )?)
}

fn open(
    bytes: &[u8],
    kind: ModelKind,
    schema: Option<&str>,
) -> Result<(crate::ParamStore, CheckpointMeta), ModelError> {
    let (store, manifest) = decode_checkpoint(bytes)?;
    if manifest.model_kind != kind.as_str() {
        return Err(ModelError::KindMismatch {
            expected: kind.as_str().to_string(),
            found: manifest.model_kind,
        });
    }
    let meta: CheckpointMeta =
        serde_json::from_value(manifest.meta).map_err(|e| ModelError::Meta(e.to_string()))?;
    if let Some(expected) = schema {
        if meta.schema_hash != expected {
            return Err(ModelError::SchemaMismatch {
                expected: expected.to_string(),
                found: meta.schema_hash,
            });
        }
    }
    if meta.in_vocab.len() != meta.config.in_vocab || meta.out_vocab.len() != meta.config.out_vocab
    {
        return Err(ModelError::Meta(
            "vocabulary sizes disagree with the model config".into(),
        ));
    }
    Ok((store, meta))
}

/// Loads a teacher; with `schema` set, also checks the schema hash.
pub fn load_teacher(
    bytes: &[u8],
    schema: Option<&str>,
) -> Result<(TeacherModel, CheckpointMeta), ModelError> {
    let (store, meta) = open(bytes, ModelKind::Teacher, schema)?;
    let model = TeacherModel::from_params(meta.config, store, meta.domain.clone())?;
    Ok((model, meta))
}

pub fn load_student(
    bytes: &[u8],
    schema: Option<&str>,
) -> Result<(StudentModel, CheckpointMeta), ModelError> {
    let (store, meta) = open(bytes, ModelKind::Student, schema)?;
    let model = StudentModel::from_params(meta.config, store)?;
    Ok((model, meta))
}
