use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::manifold::CholeskyPoint;
use crate::signal::TrialPoint;

/// Parallel lists of points and their gesture / subject / repetition ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledManifoldSet {
    points: Vec<CholeskyPoint>,
    labels: Vec<u32>,
    subjects: Vec<u32>,
    repetitions: Vec<u32>,
}

impl LabeledManifoldSet {
    pub fn new(
        points: Vec<CholeskyPoint>,
        labels: Vec<u32>,
        subjects: Vec<u32>,
        repetitions: Vec<u32>,
    ) -> Result<Self> {
        for len in [labels.len(), subjects.len(), repetitions.len()] {
            if len != points.len() {
                return Err(Error::LengthMismatch {
                    left: points.len(),
                    right: len,
                });
            }
        }
        if let Some(first) = points.first() {
            if let Some(p) = points.iter().find(|p| p.dim() != first.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: p.dim(),
                });
            }
        }
        Ok(Self {
            points,
            labels,
            subjects,
            repetitions,
        })
    }

    /// Single-subject set with every repetition id set to 0.
    pub fn from_labeled(points: Vec<CholeskyPoint>, labels: Vec<u32>) -> Result<Self> {
        let n = points.len();
        Self::new(points, labels, vec![0; n], vec![0; n])
    }

    pub fn from_trial_points(items: Vec<TrialPoint>) -> Result<Self> {
        let mut set = Self::default();
        for it in items {
            set.push(it.point, it.label, it.subject, it.repetition)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, point: CholeskyPoint, label: u32, subject: u32, repetition: u32) -> Result<()> {
        if let Some(first) = self.points.first() {
            if first.dim() != point.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: point.dim(),
                });
            }
        }
        self.points.push(point);
        self.labels.push(label);
        self.subjects.push(subject);
        self.repetitions.push(repetition);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Matrix dimension `c`, or `None` for an empty set.
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(CholeskyPoint::dim)
    }

    pub fn points(&self) -> &[CholeskyPoint] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn subjects(&self) -> &[u32] {
        &self.subjects
    }

    pub fn repetitions(&self) -> &[u32] {
        &self.repetitions
    }

    pub fn distinct_labels(&self) -> Vec<u32> {
        self.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn distinct_subjects(&self) -> Vec<u32> {
        self.subjects.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            subjects: indices.iter().map(|&i| self.subjects[i]).collect(),
            repetitions: indices.iter().map(|&i| self.repetitions[i]).collect(),
        }
    }

    pub fn indices_where(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(i)).collect()
    }

    pub fn subject_subset(&self, subject: u32) -> Self {
        self.subset(&self.indices_where(|i| self.subjects[i] == subject))
    }

    /// Replaces the points, keeping the metadata.
    pub fn with_points(&self, points: Vec<CholeskyPoint>) -> Result<Self> {
        Self::new(
            points,
            self.labels.clone(),
            self.subjects.clone(),
            self.repetitions.clone(),
        )
    }

    /// Replaces the gesture labels, keeping everything else.
    pub fn with_labels(&self, labels: Vec<u32>) -> Result<Self> {
        Self::new(
            self.points.clone(),
            labels,
            self.subjects.clone(),
            self.repetitions.clone(),
        )
    }
}
