//! Cross-subject alignment by parallel transport.
//!
//! Every (subject, gesture) group is moved so that its Fréchet mean lands on
//! the reference subject's mean for the same gesture: log-map at the group
//! mean, transport to the reference mean, exp-map back. In the `ψ` embedding
//! this is a pure translation, so within-group distances are preserved.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::classify::eval::hungarian;
use crate::classify::kmedoids::{kmedoids_with_config, KMedoidsConfig};
use crate::dataset::LabeledManifoldSet;
use crate::error::{Error, Result};
use crate::manifold::{
    embed, exp_map, frechet_mean, geodesic_distance, log_map, parallel_transport, CholeskyPoint,
};

/// The trials `𝒢ₛᵍ` of one subject for one gesture.
#[derive(Clone, Debug, PartialEq)]
pub struct GestureGroup {
    pub subject: u32,
    pub gesture: u32,
    points: Vec<CholeskyPoint>,
}

impl GestureGroup {
    pub fn new(subject: u32, gesture: u32, points: Vec<CholeskyPoint>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyInput)?;
        if let Some(p) = points.iter().find(|p| p.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: p.dim(),
            });
        }
        Ok(Self {
            subject,
            gesture,
            points,
        })
    }

    pub fn points(&self) -> &[CholeskyPoint] {
        &self.points
    }

    pub fn mean(&self) -> CholeskyPoint {
        frechet_mean(&self.points).expect("group is nonempty with shared dim")
    }
}

/// Moves `group` onto `reference_mean` (mean → log → transport → exp).
pub fn align_group(group: &GestureGroup, reference_mean: &CholeskyPoint) -> Result<Vec<CholeskyPoint>> {
    let mean = group.mean();
    if mean.dim() != reference_mean.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference_mean.dim(),
            found: mean.dim(),
        });
    }
    group
        .points
        .iter()
        .map(|p| {
            let tangent = log_map(&mean, p)?;
            let moved = parallel_transport(&tangent, &mean, reference_mean)?;
            exp_map(reference_mean, &moved)
        })
        .collect()
}

/// Aligns with the dataset's own labels as the gesture grouping.
pub fn align_dataset(data: &LabeledManifoldSet, reference_subject: u32) -> Result<LabeledManifoldSet> {
    align_dataset_with_groups(data, data.labels(), reference_subject)
}

/// Aligns using `groups` (one gesture id per point) to form the
/// (subject, gesture) groups; the output keeps `data`'s own labels.
/// Points of the reference subject are returned unchanged.
pub fn align_dataset_with_groups(
    data: &LabeledManifoldSet,
    groups: &[u32],
    reference_subject: u32,
) -> Result<LabeledManifoldSet> {
    if groups.len() != data.len() {
        return Err(Error::LengthMismatch {
            left: data.len(),
            right: groups.len(),
        });
    }
    let mut members: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for i in 0..data.len() {
        members.entry((data.subjects()[i], groups[i])).or_default().push(i);
    }
    if !data.subjects().contains(&reference_subject) {
        return Err(Error::MissingReferenceSubject(reference_subject));
    }
    let mut reference_means = BTreeMap::new();
    for (&(subject, gesture), idx) in &members {
        if subject == reference_subject {
            let mean = frechet_mean(idx.iter().map(|&i| &data.points()[i]))?;
            reference_means.insert(gesture, mean);
        }
    }
    let jobs: Vec<(&(u32, u32), &Vec<usize>)> = members
        .iter()
        .filter(|((subject, _), _)| *subject != reference_subject)
        .collect();
    let moved = jobs
        .par_iter()
        .map(|&(&(subject, gesture), idx)| {
            let target = reference_means.get(&gesture).ok_or(Error::MissingReferenceGesture {
                subject: reference_subject,
                gesture,
            })?;
            let group = GestureGroup::new(subject, gesture, idx.iter().map(|&i| data.points()[i].clone()).collect())?;
            Ok((idx, align_group(&group, target)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = data.points().to_vec();
    for (idx, aligned) in moved {
        for (&i, p) in idx.iter().zip(aligned) {
            points[i] = p;
        }
    }
    data.with_points(points)
}

/// Gesture grouping without ground truth for non-reference subjects.
///
/// The reference subject keeps its labels. Every other subject is clustered
/// with k-medoids (k = number of reference gestures, capped by the subject's
/// trial count); clusters are matched one-to-one to reference gestures by
/// optimal assignment on the distance between cluster means and reference
/// gesture means, both taken relative to their subject's overall mean.
pub fn clustered_groups(
    data: &LabeledManifoldSet,
    reference_subject: u32,
    cfg: &KMedoidsConfig,
) -> Result<Vec<u32>> {
    let reference = data.subject_subset(reference_subject);
    if reference.is_empty() {
        return Err(Error::MissingReferenceSubject(reference_subject));
    }
    let ref_gestures = reference.distinct_labels();
    let ref_center = embed(&frechet_mean(reference.points())?);
    let ref_targets: Vec<nalgebra::DMatrix<f64>> = ref_gestures
        .iter()
        .map(|&g| {
            let mean = frechet_mean(
                reference
                    .points()
                    .iter()
                    .zip(reference.labels())
                    .filter(|(_, &l)| l == g)
                    .map(|(p, _)| p),
            )?;
            Ok(embed(&mean).entries() - ref_center.entries())
        })
        .collect::<Result<_>>()?;

    let mut groups = data.labels().to_vec();
    for subject in data.distinct_subjects() {
        if subject == reference_subject {
            continue;
        }
        let idx = data.indices_where(|i| data.subjects()[i] == subject);
        let pts: Vec<CholeskyPoint> = idx.iter().map(|&i| data.points()[i].clone()).collect();
        let k = ref_gestures.len().min(pts.len());
        let clusters = kmedoids_with_config(&pts, &KMedoidsConfig { k, ..*cfg })?;
        let center = embed(&frechet_mean(&pts)?);
        let mut cost = vec![vec![0.0; ref_gestures.len()]; k];
        for (c, row) in cost.iter_mut().enumerate() {
            let members = pts
                .iter()
                .zip(&clusters.assignments)
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| p);
            let rel = embed(&frechet_mean(members)?).entries() - center.entries();
            for (g, target) in ref_targets.iter().enumerate() {
                row[g] = (&rel - target).norm();
            }
        }
        let matching = hungarian(&cost);
        for (pos, &i) in idx.iter().enumerate() {
            groups[i] = ref_gestures[matching[clusters.assignments[pos]]];
        }
    }
    Ok(groups)
}

/// Largest change in any within-group pairwise distance between two point lists.
pub fn max_distance_distortion(before: &[CholeskyPoint], after: &[CholeskyPoint]) -> Result<f64> {
    if before.len() != after.len() {
        return Err(Error::LengthMismatch {
            left: before.len(),
            right: after.len(),
        });
    }
    let mut worst: f64 = 0.0;
    for i in 0..before.len() {
        for j in (i + 1)..before.len() {
            let d0 = geodesic_distance(&before[i], &before[j])?;
            let d1 = geodesic_distance(&after[i], &after[j])?;
            worst = worst.max((d0 - d1).abs());
        }
    }
    Ok(worst)
}
