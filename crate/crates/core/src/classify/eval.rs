//! Accuracy, confusion matrices and cluster-to-label matching.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::kmedoids::ClusterResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Sorted union of the ids appearing in either list; indexes `confusion`.
    pub labels: Vec<u32>,
    /// `confusion[i][j]` counts items with truth `labels[i]` predicted as `labels[j]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(predictions: &[u32], truth: &[u32]) -> Result<Evaluation> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let labels: Vec<u32> = predictions
        .iter()
        .chain(truth)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let slot = |l: u32| labels.binary_search(&l).unwrap();
    let mut confusion = vec![vec![0usize; labels.len()]; labels.len()];
    let mut correct = 0usize;
    for (&p, &t) in predictions.iter().zip(truth) {
        confusion[slot(t)][slot(p)] += 1;
        if p == t {
            correct += 1;
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / truth.len() as f64,
        labels,
        confusion,
    })
}

/// Minimum-cost perfect assignment for an `n×m` cost matrix with `n ≤ m`
/// (Hungarian method with row/column potentials). Returns, for each row,
/// its assigned column.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= columns");
    // 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut col_owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if col_owner[j] != 0 {
            assignment[col_owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Cluster × label count table; rows are cluster positions, columns the
/// sorted distinct labels.
pub fn contingency(assignments: &[usize], clusters: usize, labels: &[u32]) -> (Vec<Vec<usize>>, Vec<u32>) {
    let distinct: Vec<u32> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut table = vec![vec![0usize; distinct.len()]; clusters];
    for (&a, l) in assignments.iter().zip(labels) {
        table[a][distinct.binary_search(l).unwrap()] += 1;
    }
    (table, distinct)
}

/// Largest fraction of items explained by a one-to-one matching of a
/// contingency table's rows to its columns.
pub fn matched_fraction(table: &[Vec<usize>]) -> f64 {
    let total: usize = table.iter().flatten().sum();
    if total == 0 {
        return 0.0;
    }
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    let size = rows.max(cols);
    let mut cost = vec![vec![0.0; size]; size];
    for (i, row) in table.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            cost[i][j] = -(count as f64);
        }
    }
    let assignment = hungarian(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < rows && j < cols)
        .map(|(i, &j)| table[i][j])
        .sum();
    matched as f64 / total as f64
}

/// Accuracy of a clustering under the best one-to-one cluster/label matching.
pub fn cluster_accuracy(result: &ClusterResult, labels: &[u32]) -> Result<f64> {
    if result.assignments.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: result.assignments.len(),
            right: labels.len(),
        });
    }
    let (table, _) = contingency(&result.assignments, result.medoid_indices.len(), labels);
    Ok(matched_fraction(&table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(assignments: Vec<usize>, k: usize) -> ClusterResult {
        ClusterResult {
            medoid_indices: (0..k).collect(),
            assignments,
            cost: 0.0,
            cost_history: vec![],
            matched_accuracy: None,
        }
    }

    #[test]
    fn evaluate_examples() {
        let e = evaluate(&[1, 2, 3], &[1, 2, 3]).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert_eq!(e.confusion, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(evaluate(&[1, 1], &[2, 2]).unwrap().accuracy, 0.0);
        let e = evaluate(&[0, 1, 1, 0], &[0, 1, 0, 1]).unwrap();
        assert_eq!(e.accuracy, 0.5);
        assert_eq!(e.confusion, vec![vec![1, 1], vec![1, 1]]);
        assert!(matches!(evaluate(&[1], &[1, 2]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn cluster_accuracy_examples() {
        // permuted cluster ids still count as perfect
        let r = result(vec![1, 1, 0, 0, 2], 3);
        assert_eq!(cluster_accuracy(&r, &[5, 5, 7, 7, 9]).unwrap(), 1.0);
        let r = result(vec![0, 0, 0, 0], 1);
        assert_eq!(cluster_accuracy(&r, &[1, 2, 1, 2]).unwrap(), 0.5);
        // contingency [[5,1],[0,6]]
        let mut a = vec![0; 6];
        a.extend(vec![1; 6]);
        let mut l = vec![0; 5];
        l.push(1);
        l.extend(vec![1; 6]);
        let r = result(a, 2);
        assert!((cluster_accuracy(&r, &l).unwrap() - 11.0 / 12.0).abs() < 1e-15);
        assert!(cluster_accuracy(&r, &[0]).is_err());
    }

    #[test]
    fn hungarian_small() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
        let rect = vec![vec![1.0, 0.0, 5.0]];
        assert_eq!(hungarian(&rect), vec![1]);
    }
}
