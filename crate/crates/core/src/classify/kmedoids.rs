//! k-medoids by PAM (greedy BUILD, then best-improvement SWAP) under the
//! geodesic distance.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::manifold::{distance_matrix, CholeskyPoint};

use super::eval::cluster_accuracy;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    /// Indices into the input of the chosen medoids.
    pub medoid_indices: Vec<usize>,
    /// For every input point, the position in `medoid_indices` of its nearest medoid.
    pub assignments: Vec<usize>,
    /// Sum of distances from every point to its medoid.
    pub cost: f64,
    /// Cost after BUILD and after every accepted swap.
    pub cost_history: Vec<f64>,
    /// Set when ground-truth labels are supplied.
    pub matched_accuracy: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMedoidsConfig {
    pub k: usize,
    /// Extra runs from seeded random initial medoids; the lowest cost wins.
    pub restarts: usize,
    pub seed: u64,
}

impl KMedoidsConfig {
    pub fn new(k: usize) -> Self {
        Self { k, restarts: 0, seed: 42 }
    }
}

fn validate(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    Ok(())
}

/// Nearest medoid position per point (ties: lowest position) and the total cost.
pub fn assign(dist: &Matrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let assignments = (0..dist.nrows())
        .map(|j| {
            let mut best = 0;
            for m in 1..medoids.len() {
                if dist[(j, medoids[m])] < dist[(j, medoids[best])] {
                    best = m;
                }
            }
            cost += dist[(j, medoids[best])];
            best
        })
        .collect();
    (assignments, cost)
}

/// Greedy BUILD: the 1-medoid, then repeatedly the point with the largest
/// cost reduction (ties: lowest index).
pub fn pam_build(dist: &Matrix, k: usize) -> Vec<usize> {
    let n = dist.nrows();
    let mut medoids = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for cand in 0..n {
            if medoids.contains(&cand) {
                continue;
            }
            let score: f64 = if medoids.is_empty() {
                -(0..n).map(|j| dist[(j, cand)]).sum::<f64>()
            } else {
                (0..n).map(|j| (nearest[j] - dist[(j, cand)]).max(0.0)).sum()
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((cand, score));
            }
        }
        let (chosen, _) = best.expect("k <= n");
        medoids.push(chosen);
        for j in 0..n {
            nearest[j] = nearest[j].min(dist[(j, chosen)]);
        }
    }
    medoids
}

/// Best-improvement SWAP until no single swap lowers the cost.
/// Returns the final medoids and the cost after each accepted swap.
pub fn pam_swap(dist: &Matrix, mut medoids: Vec<usize>) -> (Vec<usize>, Vec<f64>) {
    let n = dist.nrows();
    let k = medoids.len();
    let (_, mut cost) = assign(dist, &medoids);
    let mut history = vec![cost];
    if k == n {
        return (medoids, history);
    }
    loop {
        // nearest and second-nearest medoid distances
        let mut near = vec![(0usize, f64::INFINITY); n];
        let mut second = vec![f64::INFINITY; n];
        for j in 0..n {
            for (m, &med) in medoids.iter().enumerate() {
                let d = dist[(j, med)];
                if d < near[j].1 {
                    second[j] = near[j].1;
                    near[j] = (m, d);
                } else if d < second[j] {
                    second[j] = d;
                }
            }
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for m in 0..k {
            for cand in 0..n {
                if medoids.contains(&cand) {
                    continue;
                }
                let mut delta = 0.0;
                for j in 0..n {
                    let dc = dist[(j, cand)];
                    if near[j].0 == m {
                        delta += dc.min(second[j]) - near[j].1;
                    } else if dc < near[j].1 {
                        delta += dc - near[j].1;
                    }
                }
                if best.is_none_or(|(_, _, bd)| delta < bd) {
                    best = Some((m, cand, delta));
                }
            }
        }
        match best {
            Some((m, cand, delta)) if delta < -1e-12 * cost.max(1.0) => {
                medoids[m] = cand;
                cost = assign(dist, &medoids).1;
                history.push(cost);
            }
            _ => break,
        }
    }
    (medoids, history)
}

/// PAM on a precomputed distance matrix.
pub fn kmedoids_from_distances(dist: &Matrix, cfg: &KMedoidsConfig) -> Result<ClusterResult> {
    let n = dist.nrows();
    validate(n, cfg.k)?;
    let run = |init: Vec<usize>| {
        let (medoids, history) = pam_swap(dist, init);
        let (assignments, cost) = assign(dist, &medoids);
        ClusterResult {
            medoid_indices: medoids,
            assignments,
            cost,
            cost_history: history,
            matched_accuracy: None,
        }
    };
    let mut best = run(pam_build(dist, cfg.k));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.restarts {
        let init = sample(&mut rng, n, cfg.k).into_vec();
        let candidate = run(init);
        if candidate.cost < best.cost {
            best = candidate;
        }
    }
    Ok(best)
}

pub fn kmedoids(points: &[CholeskyPoint], k: usize) -> Result<ClusterResult> {
    kmedoids_with_config(points, &KMedoidsConfig::new(k))
}

pub fn kmedoids_with_config(points: &[CholeskyPoint], cfg: &KMedoidsConfig) -> Result<ClusterResult> {
    validate(points.len(), cfg.k)?;
    let dist = distance_matrix(points)?;
    kmedoids_from_distances(&dist, cfg)
}

/// Clusters and scores against `labels` by optimal cluster/label matching.
pub fn kmedoids_labeled(points: &[CholeskyPoint], labels: &[u32], cfg: &KMedoidsConfig) -> Result<ClusterResult> {
    if points.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: points.len(),
            right: labels.len(),
        });
    }
    let mut result = kmedoids_with_config(points, cfg)?;
    result.matched_accuracy = Some(cluster_accuracy(&result, labels)?);
    Ok(result)
}
