//! Self-describing JSON model files.
//!
//! A file carries the schema version, the model kind, the feature names it
//! was trained on, and the fitted preprocessing chain (scaler, optional
//! PCA), so scoring never refits anything.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Label;
use crate::linear_models::LogRegModel;
use crate::neural::{NamedTensor, NeuralModel, NeuralSpec};
use crate::preprocess::{PcaModel, Scaler};
use crate::svm::SvmModel;
use crate::tree_ensembles::{ForestModel, GbdtModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("input is missing feature columns: {}", .0.join(", "))]
    SchemaMismatch(Vec<String>),
    #[error("model evaluation failed: {0}")]
    Predict(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Neural parameters serialized as named nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralRecord {
    pub spec: NeuralSpec,
    pub n_inputs: usize,
    pub tensors: Vec<NamedTensor>,
    pub final_loss: f64,
}

impl From<&NeuralModel> for NeuralRecord {
    fn from(m: &NeuralModel) -> Self {
        NeuralRecord {
            spec: m.spec.clone(),
            n_inputs: m.n_inputs,
            tensors: m.tensors(),
            final_loss: m.final_loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Logreg(LogRegModel),
    Svm(SvmModel),
    Forest(ForestModel),
    Gbdt(GbdtModel),
    Neural(NeuralRecord),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Logreg(_) => "logreg",
            TrainedModel::Svm(_) => "svm",
            TrainedModel::Forest(_) => "forest",
            TrainedModel::Gbdt(_) => "gbdt",
            TrainedModel::Neural(_) => "neural",
        }
    }

    pub fn from_neural(m: &NeuralModel) -> Self {
        TrainedModel::Neural(m.into())
    }

    /// Scores already-preprocessed rows. The probability is `None` for
    /// SVMs, which produce only decision values.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Option<Vec<f64>>, Vec<Label>), ModelIoError> {
        let err = |e: &dyn std::fmt::Display| ModelIoError::Predict(e.to_string());
        match self {
            TrainedModel::Logreg(m) => m.predict(x).map(|(p, l)| (Some(p), l)).map_err(|e| err(&e)),
            TrainedModel::Svm(m) => m.predict(x).map(|(_, l)| (None, l)).map_err(|e| err(&e)),
            TrainedModel::Forest(m) => m.predict(x).map(|(p, l)| (Some(p), l)).map_err(|e| err(&e)),
            TrainedModel::Gbdt(m) => m.predict(x).map(|(p, l)| (Some(p), l)).map_err(|e| err(&e)),
            TrainedModel::Neural(r) => {
                let m = NeuralModel::from_tensors(r.spec.clone(), r.n_inputs, &r.tensors, r.final_loss)
                    .map_err(|e| ModelIoError::CorruptModel(e.to_string()))?;
                m.predict(x).map(|(p, l)| (Some(p), l)).map_err(|e| err(&e))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub scaler: Scaler,
    pub pca: Option<PcaModel>,
}

impl Preprocessing {
    pub fn transform(&self, raw: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelIoError> {
        let bad = |e: crate::preprocess::PreprocessError| ModelIoError::Predict(e.to_string());
        let z = self.scaler.transform(raw).map_err(bad)?;
        match &self.pca {
            Some(p) => p.transform(z.view()).map_err(bad),
            None => Ok(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub preprocessing: Preprocessing,
    #[serde(flatten)]
    pub model: TrainedModel,
    /// Accuracy on the rows the model was trained on, for later checks.
    pub train_accuracy: Option<f64>,
    pub seed: Option<u64>,
}

impl ModelFile {
    pub fn new(feature_names: Vec<String>, preprocessing: Preprocessing, model: TrainedModel) -> Self {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            feature_names,
            preprocessing,
            model,
            train_accuracy: None,
            seed: None,
        }
    }

    /// Raw features in `feature_names` order → probabilities and labels.
    pub fn predict_raw(&self, raw: ArrayView2<'_, f64>) -> Result<(Option<Vec<f64>>, Vec<Label>), ModelIoError> {
        let x = self.preprocessing.transform(raw)?;
        self.model.predict(x.view())
    }

    /// Feature names absent from `header`.
    pub fn missing_columns(&self, header: &[String]) -> Vec<String> {
        self.feature_names.iter().filter(|f| !header.contains(f)).cloned().collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    /// Checks the version before decoding anything else.
    pub fn from_json(text: &str) -> Result<Self, ModelIoError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelIoError::CorruptModel(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| ModelIoError::CorruptModel("missing schema_version".into()))?;
        if version != u64::from(SCHEMA_VERSION) {
            return Err(ModelIoError::SchemaVersionMismatch {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| ModelIoError::CorruptModel(e.to_string()))?;
        if let TrainedModel::Neural(r) = &file.model {
            NeuralModel::from_tensors(r.spec.clone(), r.n_inputs, &r.tensors, r.final_loss)
                .map_err(|e| ModelIoError::CorruptModel(e.to_string()))?;
        }
        Ok(file)
    }
}

pub fn save_model(m: &ModelFile, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    fs::write(path, m.to_json())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile, ModelIoError> {
    ModelFile::from_json(&fs::read_to_string(path)?)
}
