//! Versioned JSON documents for trained models. Floats are written in
//! shortest round-trip form, so save → load reproduces every bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::manifold::CholeskyPoint;

use super::mdm::MdmModel;
use super::svm::{PairModel, SvmModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Mdm(MdmModel),
    Svm(SvmModel),
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    dim: usize,
    #[serde(flatten)]
    body: ModelBody,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "lowercase")]
enum ModelBody {
    Mdm {
        centroids: Vec<CentroidDoc>,
    },
    Svm {
        gamma: f64,
        #[serde(rename = "C")]
        c: f64,
        classes: Vec<u32>,
        pairs: Vec<PairDoc>,
    },
}

#[derive(Serialize, Deserialize)]
struct CentroidDoc {
    label: u32,
    entries: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PairDoc {
    positive: u32,
    negative: u32,
    bias: f64,
    coefficients: Vec<f64>,
    support: Vec<Vec<Vec<f64>>>,
}

fn to_rows(p: &CholeskyPoint) -> Vec<Vec<f64>> {
    p.entries().row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<CholeskyPoint> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidConfig(format!(
            "matrix in model document is not {dim}x{dim}"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    CholeskyPoint::new(Matrix::from_row_slice(dim, dim, &flat))
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Mdm(m) => m.dim(),
            Model::Svm(m) => m.dim(),
        }
    }

    pub fn predict(&self, point: &CholeskyPoint) -> Result<u32> {
        match self {
            Model::Mdm(m) => m.predict(point),
            Model::Svm(m) => m.predict(point),
        }
    }

    pub fn to_json(&self) -> String {
        let body = match self {
            Model::Mdm(m) => ModelBody::Mdm {
                centroids: m
                    .centroids()
                    .iter()
                    .map(|(&label, p)| CentroidDoc {
                        label,
                        entries: to_rows(p),
                    })
                    .collect(),
            },
            Model::Svm(m) => ModelBody::Svm {
                gamma: m.gamma(),
                c: m.c(),
                classes: m.classes().to_vec(),
                pairs: m
                    .pairs()
                    .iter()
                    .map(|p| PairDoc {
                        positive: p.positive,
                        negative: p.negative,
                        bias: p.bias,
                        coefficients: p.coefficients.clone(),
                        support: p.support.iter().map(to_rows).collect(),
                    })
                    .collect(),
            },
        };
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            dim: self.dim(),
            body,
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("model document: {e}")))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        let dim = doc.dim;
        match doc.body {
            ModelBody::Mdm { centroids } => {
                let mut map = BTreeMap::new();
                for c in centroids {
                    map.insert(c.label, from_rows(dim, &c.entries)?);
                }
                let model = MdmModel::from_centroids(map)?;
                if model.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: model.dim(),
                    });
                }
                Ok(Model::Mdm(model))
            }
            ModelBody::Svm {
                gamma,
                c,
                classes,
                pairs,
            } => {
                let pairs = pairs
                    .into_iter()
                    .map(|p| {
                        let support = p
                            .support
                            .iter()
                            .map(|rows| from_rows(dim, rows))
                            .collect::<Result<Vec<_>>>()?;
                        PairModel::new(p.positive, p.negative, support, p.coefficients, p.bias)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Svm(SvmModel::from_parts(gamma, c, dim, classes, pairs)?))
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.with_context(path.display().to_string()))
    }
}
