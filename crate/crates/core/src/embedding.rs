//! Exact t-SNE on a precomputed distance matrix.
//!
//! Points are processed in a canonical order (sorted by their own distance
//! profile), so the result does not depend on input order: permuting the
//! input permutes the output rows and nothing else. All per-iteration sums run
//! in a fixed order, so the output is bit-identical for a given seed
//! regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Iterations with early exaggeration and low momentum.
pub const EXAGGERATION_ITERATIONS: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const INIT_STD: f64 = 1e-4;
const PERPLEXITY_TOLERANCE: f64 = 1e-5;
const MIN_GAIN: f64 = 0.01;
const FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub early_exaggeration: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 42,
            early_exaggeration: 12.0,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let limit = (n as f64 - 1.0) / 3.0;
        if !(self.perplexity > 0.0 && self.perplexity < limit) {
            return Err(Error::InvalidConfig(format!(
                "perplexity {} must be in (0, {limit:.3}) for {n} points",
                self.perplexity
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.early_exaggeration > 0.0) {
            return Err(Error::InvalidConfig(
                "learning rate and early exaggeration must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Coordinates plus the KL divergence `KL(P‖Q)` after every iteration
/// (against the unexaggerated `P`).
#[derive(Clone, Debug)]
pub struct TsneRun {
    pub coordinates: Matrix,
    pub kl_history: Vec<f64>,
}

pub fn validate_distances(d: &Matrix) -> Result<()> {
    if d.nrows() != d.ncols() {
        return Err(Error::BadDistanceMatrix(format!(
            "not square ({}x{})",
            d.nrows(),
            d.ncols()
        )));
    }
    for i in 0..d.nrows() {
        if d[(i, i)].abs() > 1e-9 {
            return Err(Error::BadDistanceMatrix(format!("nonzero diagonal at {i}")));
        }
        for j in 0..d.ncols() {
            let v = d[(i, j)];
            if !v.is_finite() || v < -1e-9 {
                return Err(Error::BadDistanceMatrix(format!("invalid entry at ({i}, {j})")));
            }
            if (v - d[(j, i)]).abs() > 1e-9 {
                return Err(Error::BadDistanceMatrix(format!("asymmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Permutation `canonical position → input index`.
fn canonical_order(d: &Matrix) -> Vec<usize> {
    let n = d.nrows();
    let profiles: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = d.row(i).iter().copied().collect();
            row.sort_by(f64::total_cmp);
            row
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        profiles[a]
            .iter()
            .zip(&profiles[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Conditional affinities with per-row Gaussian precision found by bisection
/// so that each row's Shannon entropy equals `ln(perplexity)`.
fn conditional_affinities(sq: &Matrix, perplexity: f64) -> Matrix {
    let n = sq.nrows();
    let target = perplexity.ln();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let dmin = others.iter().map(|&j| sq[(i, j)]).fold(f64::INFINITY, f64::min);
            let mut beta = 1.0;
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            let mut p = vec![0.0; n];
            for _ in 0..200 {
                let mut sum = 0.0;
                let mut weighted = 0.0;
                for &j in &others {
                    let shifted = sq[(i, j)] - dmin;
                    let v = (-shifted * beta).exp();
                    p[j] = v;
                    sum += v;
                    weighted += shifted * v;
                }
                let entropy = sum.ln() + beta * weighted / sum;
                let diff = entropy - target;
                for &j in &others {
                    p[j] /= sum;
                }
                if diff.abs() < PERPLEXITY_TOLERANCE {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
            }
            p
        })
        .collect();
    Matrix::from_fn(n, n, |i, j| rows[i][j])
}

fn joint_affinities(d: &Matrix, perplexity: f64) -> Matrix {
    let sq = d.map(|v| v * v);
    let cond = conditional_affinities(&sq, perplexity);
    let mut p = &cond + cond.transpose();
    let total = p.sum();
    p /= total;
    p.apply(|v| *v = v.max(FLOOR));
    for i in 0..p.nrows() {
        p[(i, i)] = 0.0;
    }
    p
}

fn student_kernel(y: &Matrix) -> (Matrix, f64) {
    let n = y.nrows();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            let mut s = 0.0;
            for j in 0..n {
                if i != j {
                    let dx = y[(i, 0)] - y[(j, 0)];
                    let dy = y[(i, 1)] - y[(j, 1)];
                    let v = 1.0 / (1.0 + dx * dx + dy * dy);
                    row[j] = v;
                    s += v;
                }
            }
            (row, s)
        })
        .collect();
    let total: f64 = rows.iter().map(|(_, s)| s).sum();
    (Matrix::from_fn(n, n, |i, j| rows[i].0[j]), total)
}

fn kl_divergence(p: &Matrix, num: &Matrix, total: f64) -> f64 {
    let n = p.nrows();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[(i, j)];
                let q = (num[(i, j)] / total).max(FLOOR);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}

/// Runs t-SNE and also reports the KL objective per iteration.
pub fn tsne_with_trace(distances: &Matrix, cfg: &EmbeddingConfig) -> Result<TsneRun> {
    validate_distances(distances)?;
    let n = distances.nrows();
    cfg.validate(n)?;

    let order = canonical_order(distances);
    let d = Matrix::from_fn(n, n, |a, b| distances[(order[a], order[b])]);
    let p = joint_affinities(&d, cfg.perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let mut y = Matrix::from_fn(n, 2, |_, _| 0.0);
    for i in 0..n {
        for k in 0..2 {
            y[(i, k)] = normal.sample(&mut rng);
        }
    }
    let mut velocity = Matrix::zeros(n, 2);
    let mut gains = Matrix::from_element(n, 2, 1.0);
    let mut kl_history = Vec::with_capacity(cfg.iterations);

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < EXAGGERATION_ITERATIONS { cfg.early_exaggeration } else { 1.0 };
        let momentum = if iter < EXAGGERATION_ITERATIONS { INITIAL_MOMENTUM } else { FINAL_MOMENTUM };
        let (num, total) = student_kernel(&y);
        let grad_rows: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let q = (num[(i, j)] / total).max(FLOOR);
                    let w = (exaggeration * p[(i, j)] - q) * num[(i, j)];
                    g[0] += w * (y[(i, 0)] - y[(j, 0)]);
                    g[1] += w * (y[(i, 1)] - y[(j, 1)]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for i in 0..n {
            for k in 0..2 {
                let g = grad_rows[i][k];
                let same_sign = (g > 0.0) == (velocity[(i, k)] > 0.0);
                let gain = if same_sign { gains[(i, k)] * 0.8 } else { gains[(i, k)] + 0.2 };
                gains[(i, k)] = gain.max(MIN_GAIN);
                velocity[(i, k)] = momentum * velocity[(i, k)] - cfg.learning_rate * gains[(i, k)] * g;
                y[(i, k)] += velocity[(i, k)];
            }
        }
        for k in 0..2 {
            let mean = y.column(k).sum() / n as f64;
            for i in 0..n {
                y[(i, k)] -= mean;
            }
        }
        let (num, total) = student_kernel(&y);
        kl_history.push(kl_divergence(&p, &num, total));
    }

    let mut coordinates = Matrix::zeros(n, 2);
    for (pos, &orig) in order.iter().enumerate() {
        coordinates[(orig, 0)] = y[(pos, 0)];
        coordinates[(orig, 1)] = y[(pos, 1)];
    }
    Ok(TsneRun {
        coordinates,
        kl_history,
    })
}

/// `n×2` t-SNE coordinates for a symmetric, zero-diagonal distance matrix.
pub fn tsne(distances: &Matrix, cfg: &EmbeddingConfig) -> Result<Matrix> {
    Ok(tsne_with_trace(distances, cfg)?.coordinates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_matrices() {
        let cfg = EmbeddingConfig::default();
        let mut d = Matrix::zeros(3, 3);
        d[(0, 1)] = 1.0;
        assert!(matches!(tsne(&d, &cfg), Err(Error::BadDistanceMatrix(_))));
        let mut d = Matrix::zeros(3, 3);
        d[(1, 1)] = 0.1;
        assert!(matches!(tsne(&d, &cfg), Err(Error::BadDistanceMatrix(_))));
        let mut d = Matrix::zeros(2, 2);
        d[(0, 1)] = -1.0;
        d[(1, 0)] = -1.0;
        assert!(matches!(tsne(&d, &cfg), Err(Error::BadDistanceMatrix(_))));
        assert!(matches!(tsne(&Matrix::zeros(2, 3), &cfg), Err(Error::BadDistanceMatrix(_))));
    }

    #[test]
    fn perplexity_bound() {
        let cfg = EmbeddingConfig { perplexity: 3.0, ..Default::default() };
        assert!(cfg.validate(11).is_ok());
        // strict bound: (10 - 1) / 3 == 3 is rejected
        assert!(cfg.validate(10).is_err());
        assert!(cfg.validate(9).is_err());
    }

    #[test]
    fn bisection_hits_perplexity() {
        let n = 12;
        let d = Matrix::from_fn(n, n, |i, j| ((i as f64) - (j as f64)).abs().sqrt());
        let sq = d.map(|v| v * v);
        let p = conditional_affinities(&sq, 3.0);
        for i in 0..n {
            let h: f64 = (0..n).filter(|&j| p[(i, j)] > 0.0).map(|j| -p[(i, j)] * p[(i, j)].ln()).sum();
            assert!((h - 3f64.ln()).abs() < 1e-4, "row {i}: {h}");
        }
    }
}
