use std::path::Path;

use serde::{Deserialize, Serialize};

use super::QnnModel;
use crate::encode::EncoderConfig;
use crate::error::{Error, Result};
use crate::pqc::PqcTemplate;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateRecord {
    name: String,
    layers: usize,
    gates: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format_version: u32,
    encoder: EncoderConfig,
    template: TemplateRecord,
    theta: Vec<f64>,
    head_weights: Vec<Vec<f64>>,
    head_bias: Vec<f64>,
    seed: u64,
}

impl QnnModel {
    pub fn to_checkpoint_json(&self) -> String {
        let gates = serde_json::from_str(&self.template.to_registry_json()).expect("registry is valid JSON");
        let ck = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            encoder: self.encoder.clone(),
            template: TemplateRecord {
                name: self.template.name().to_string(),
                layers: self.template.layers(),
                gates,
            },
            theta: self.theta.clone(),
            head_weights: self.head_weights.clone(),
            head_bias: self.head_bias.clone(),
            seed: self.seed,
        };
        serde_json::to_string_pretty(&ck).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.format_version
            )));
        }
        let template = PqcTemplate::parse_registry(
            ck.template.name,
            ck.encoder.n_qubits,
            ck.template.layers,
            &ck.template.gates.to_string(),
        )?;
        QnnModel::from_parts(ck.encoder, template, ck.theta, ck.head_weights, ck.head_bias, ck.seed)
    }
}

pub fn save_checkpoint(model: &QnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_checkpoint_json()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<QnnModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    QnnModel::from_checkpoint_json(&text)
}
