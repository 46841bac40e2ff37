//! Minimum distance to mean.

use std::collections::BTreeMap;

use crate::dataset::LabeledManifoldSet;
use crate::error::{Error, Result};
use crate::manifold::{frechet_mean, geodesic_distance, CholeskyPoint};

#[derive(Clone, Debug, PartialEq)]
pub struct MdmModel {
    centroids: BTreeMap<u32, CholeskyPoint>,
}

impl MdmModel {
    pub fn from_centroids(centroids: BTreeMap<u32, CholeskyPoint>) -> Result<Self> {
        let first = centroids.values().next().ok_or(Error::EmptyInput)?;
        if let Some(p) = centroids.values().find(|p| p.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: p.dim(),
            });
        }
        Ok(Self { centroids })
    }

    /// One Fréchet-mean centroid per label present in `train`.
    pub fn train(train: &LabeledManifoldSet) -> Result<Self> {
        Self::train_for_classes(train, &train.distinct_labels())
    }

    /// Like [`MdmModel::train`], but every class in `classes` must have at
    /// least one training point.
    pub fn train_for_classes(train: &LabeledManifoldSet, classes: &[u32]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut centroids = BTreeMap::new();
        for &label in classes {
            let members = train
                .points()
                .iter()
                .zip(train.labels())
                .filter(|(_, &l)| l == label)
                .map(|(p, _)| p);
            let centroid = match frechet_mean(members) {
                Err(Error::EmptyInput) => return Err(Error::EmptyClass { label }),
                other => other?,
            };
            centroids.insert(label, centroid);
        }
        Self::from_centroids(centroids)
    }

    pub fn dim(&self) -> usize {
        self.centroids.values().next().map_or(0, CholeskyPoint::dim)
    }

    pub fn centroids(&self) -> &BTreeMap<u32, CholeskyPoint> {
        &self.centroids
    }

    /// Nearest centroid; ties go to the smallest gesture id.
    pub fn predict(&self, point: &CholeskyPoint) -> Result<u32> {
        let mut best: Option<(u32, f64)> = None;
        for (&label, centroid) in &self.centroids {
            let d = geodesic_distance(point, centroid)?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((label, d));
            }
        }
        Ok(best.expect("model has at least one centroid").0)
    }

    pub fn predict_all(&self, points: &[CholeskyPoint]) -> Result<Vec<u32>> {
        points.iter().map(|p| self.predict(p)).collect()
    }
}

pub fn mdm_train(train: &LabeledManifoldSet) -> Result<MdmModel> {
    MdmModel::train(train)
}

pub fn mdm_predict(model: &MdmModel, point: &CholeskyPoint) -> Result<u32> {
    model.predict(point)
}
