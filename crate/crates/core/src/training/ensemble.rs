use alloc::collections::BTreeMap;
use alloc::string::String;

use super::TrainError;
use crate::models::TeacherModel;

/// The universal teacher and one fine-tuned teacher per bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherEnsemble {
    pub universal: TeacherModel,
    pub teachers: BTreeMap<String, TeacherModel>,
}

impl TeacherEnsemble {
    pub fn route(&self, bucket: &str) -> Result<&TeacherModel, TrainError> {
        route_teacher(bucket, self)
    }

    /// Every model, universal first, for shape checks.
    pub fn all(&self) -> impl Iterator<Item = &TeacherModel> {
        core::iter::once(&self.universal).chain(self.teachers.values())
    }
}

/// Teacher for a turn's bucket (see [`crate::corpus::Corpus::bucket_of`]).
pub fn route_teacher<'a>(
    bucket: &str,
    ensemble: &'a TeacherEnsemble,
) -> Result<&'a TeacherModel, TrainError> {
    ensemble
        .teachers
        .get(bucket)
        .ok_or_else(|| TrainError::MissingTeacher(bucket.into()))
}
