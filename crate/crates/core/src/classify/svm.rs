//! Geodesic-kernel SVM: `K(L1, L2) = exp(−γ·d²(L1, L2))`, one-vs-one,
//! each pair solved by SMO on a precomputed Gram matrix.

use rayon::prelude::*;

use crate::dataset::LabeledManifoldSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::manifold::{geodesic_distance, packed_sq_distance, CholeskyPoint};

/// KKT violation tolerance for SMO.
pub const KKT_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// `exp(−γ·d²(L1, L2))`.
pub fn kernel(l1: &CholeskyPoint, l2: &CholeskyPoint, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let d = geodesic_distance(l1, l2)?;
    Ok((-gamma * d * d).exp())
}

fn packed_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * packed_sq_distance(a, b)).exp()
}

/// Kernel Gram matrix; rows assembled in parallel.
pub fn gram_matrix(points: &[CholeskyPoint], gamma: f64) -> Result<Matrix> {
    check_gamma(gamma)?;
    let first = points.first().ok_or(Error::EmptyInput)?;
    if let Some(p) = points.iter().find(|p| p.dim() != first.dim()) {
        return Err(Error::DimensionMismatch {
            expected: first.dim(),
            found: p.dim(),
        });
    }
    let packed: Vec<Vec<f64>> = points.iter().map(CholeskyPoint::packed_embedding).collect();
    Ok(packed_gram(&packed, gamma))
}

fn packed_gram(packed: &[Vec<f64>], gamma: f64) -> Matrix {
    let n = packed.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 } else { packed_kernel(&packed[i], &packed[j], gamma) })
                .collect()
        })
        .collect();
    Matrix::from_fn(n, n, |i, j| rows[i][j])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmParams {
    pub gamma: f64,
    pub c: f64,
    pub tolerance: f64,
    /// Defaults to `max(10⁵, 100·n²)` for a pair with `n` points.
    pub max_iterations: Option<usize>,
}

impl SvmParams {
    pub fn new(gamma: f64, c: f64) -> Self {
        Self {
            gamma,
            c,
            tolerance: KKT_TOLERANCE,
            max_iterations: None,
        }
    }

    fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "C must be positive and finite, got {}",
                self.c
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("SMO tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one binary SMO solve.
#[derive(Clone, Debug)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `Σ αᵢ yᵢ K(xᵢ, ·) + bias`.
    pub bias: f64,
    pub iterations: usize,
    /// Final maximal KKT violation `m(α) − M(α)`.
    pub residual: f64,
    pub converged: bool,
}

/// Soft-margin dual SVM by SMO with second-order working-set selection:
///
/// `min ½ αᵀQα − Σα  s.t.  yᵀα = 0, 0 ≤ α ≤ C`, `Q = (yyᵀ) ∘ K`.
pub fn smo_solve(gram: &Matrix, y: &[f64], c: f64, tolerance: f64, max_iterations: usize) -> SmoSolution {
    let n = y.len();
    debug_assert_eq!(gram.nrows(), n);
    let q = |i: usize, j: usize| y[i] * y[j] * gram[(i, j)];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iterations {
        // i: maximal violating index from I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if in_up && (i_sel.is_none() || -y[t] * grad[t] > gmax) {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let in_low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
                if !in_low {
                    continue;
                }
                let yg = y[t] * grad[t];
                gmax2 = gmax2.max(yg);
                let b = gmax + yg;
                if b > 0.0 {
                    let mut a = gram[(i, i)] + gram[(t, t)] - 2.0 * gram[(i, t)];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        residual = gmax + gmax2;
        if residual < tolerance || i_sel.is_none() || j_sel.is_none() {
            converged = true;
            if !residual.is_finite() {
                residual = 0.0;
            }
            break;
        }
        let (i, j) = (i_sel.unwrap(), j_sel.unwrap());
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] += q(t, i) * dai + q(t, j) * daj;
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free_count += 1;
            free_sum += yg;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };
    SmoSolution {
        alpha,
        bias: -rho,
        iterations,
        residual,
        converged,
    }
}

/// One binary decision function between `positive` (the smaller id) and `negative`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairModel {
    pub positive: u32,
    pub negative: u32,
    pub support: Vec<CholeskyPoint>,
    /// `αᵢ·yᵢ` for each support point.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    support_packed: Vec<Vec<f64>>,
}

impl PairModel {
    pub fn new(positive: u32, negative: u32, support: Vec<CholeskyPoint>, coefficients: Vec<f64>, bias: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "class pair ({positive}, {negative}) has no support points"
            )));
        }
        if support.len() != coefficients.len() {
            return Err(Error::LengthMismatch {
                left: support.len(),
                right: coefficients.len(),
            });
        }
        let support_packed = support.iter().map(CholeskyPoint::packed_embedding).collect();
        Ok(Self {
            positive,
            negative,
            support,
            coefficients,
            bias,
            support_packed,
        })
    }

    fn decision_packed(&self, query: &[f64], gamma: f64) -> f64 {
        let mut f = self.bias;
        for (sv, coef) in self.support_packed.iter().zip(&self.coefficients) {
            f += coef * packed_kernel(sv, query, gamma);
        }
        f
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    gamma: f64,
    c: f64,
    dim: usize,
    classes: Vec<u32>,
    pairs: Vec<PairModel>,
}

impl SvmModel {
    pub fn from_parts(gamma: f64, c: f64, dim: usize, classes: Vec<u32>, pairs: Vec<PairModel>) -> Result<Self> {
        check_gamma(gamma)?;
        if classes.len() < 2 {
            return Err(Error::InvalidConfig("SVM needs at least two classes".into()));
        }
        for pair in &pairs {
            if !classes.contains(&pair.positive) || !classes.contains(&pair.negative) {
                return Err(Error::InvalidConfig(format!(
                    "pair ({}, {}) references an unknown class",
                    pair.positive, pair.negative
                )));
            }
            if let Some(p) = pair.support.iter().find(|p| p.dim() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if pair.coefficients.iter().any(|a| a.abs() > c * (1.0 + 1e-12)) {
                return Err(Error::InvalidConfig("dual coefficient exceeds C".into()));
            }
        }
        Ok(Self {
            gamma,
            c,
            dim,
            classes,
            pairs,
        })
    }

    /// One-vs-one training over every class pair present in `train`.
    pub fn train(train: &LabeledManifoldSet, params: &SvmParams) -> Result<Self> {
        Self::train_for_classes(train, &train.distinct_labels(), params)
    }

    pub fn train_for_classes(train: &LabeledManifoldSet, classes: &[u32], params: &SvmParams) -> Result<Self> {
        params.validate()?;
        let dim = train.dim().ok_or(Error::EmptyInput)?;
        let mut classes = classes.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::InvalidConfig("SVM needs at least two classes".into()));
        }
        let members: Vec<Vec<usize>> = classes
            .iter()
            .map(|&label| train.indices_where(|i| train.labels()[i] == label))
            .collect();
        if let Some(pos) = members.iter().position(Vec::is_empty) {
            return Err(Error::EmptyClass { label: classes[pos] });
        }
        let packed: Vec<Vec<f64>> = train.points().iter().map(CholeskyPoint::packed_embedding).collect();
        let gram = packed_gram(&packed, params.gamma);

        let mut jobs = Vec::new();
        for a in 0..classes.len() {
            for b in (a + 1)..classes.len() {
                jobs.push((a, b));
            }
        }
        let pairs = jobs
            .par_iter()
            .map(|&(a, b)| {
                let idx: Vec<usize> = members[a].iter().chain(&members[b]).copied().collect();
                let y: Vec<f64> = idx
                    .iter()
                    .enumerate()
                    .map(|(k, _)| if k < members[a].len() { 1.0 } else { -1.0 })
                    .collect();
                let sub = Matrix::from_fn(idx.len(), idx.len(), |r, s| gram[(idx[r], idx[s])]);
                let n = idx.len();
                let cap = params.max_iterations.unwrap_or_else(|| 100_000usize.max(100 * n * n));
                let sol = smo_solve(&sub, &y, params.c, params.tolerance, cap);
                if !sol.converged {
                    return Err(Error::NonConvergence {
                        a: classes[a],
                        b: classes[b],
                        residual: sol.residual,
                    });
                }
                let mut support = Vec::new();
                let mut coefficients = Vec::new();
                for (k, &alpha) in sol.alpha.iter().enumerate() {
                    if alpha > 0.0 {
                        support.push(train.points()[idx[k]].clone());
                        coefficients.push(alpha * y[k]);
                    }
                }
                PairModel::new(classes[a], classes[b], support, coefficients, sol.bias)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(params.gamma, params.c, dim, classes, pairs)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn pairs(&self) -> &[PairModel] {
        &self.pairs
    }

    /// Pairwise decision values, in the order of [`SvmModel::pairs`].
    pub fn decision_values(&self, point: &CholeskyPoint) -> Result<Vec<f64>> {
        if point.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: point.dim(),
            });
        }
        let query = point.packed_embedding();
        Ok(self.pairs.iter().map(|p| p.decision_packed(&query, self.gamma)).collect())
    }

    /// One-vs-one majority vote. Ties go to the larger summed |decision| of
    /// the won duels, then to the smallest gesture id.
    pub fn predict(&self, point: &CholeskyPoint) -> Result<u32> {
        let values = self.decision_values(point)?;
        let mut votes = vec![0usize; self.classes.len()];
        let mut strength = vec![0.0f64; self.classes.len()];
        let slot = |label: u32| self.classes.binary_search(&label).expect("known class");
        for (pair, &f) in self.pairs.iter().zip(&values) {
            let winner = if f >= 0.0 { pair.positive } else { pair.negative };
            let k = slot(winner);
            votes[k] += 1;
            strength[k] += f.abs();
        }
        let mut best = 0;
        for k in 1..self.classes.len() {
            if votes[k] > votes[best] || (votes[k] == votes[best] && strength[k] > strength[best]) {
                best = k;
            }
        }
        Ok(self.classes[best])
    }

    pub fn predict_all(&self, points: &[CholeskyPoint]) -> Result<Vec<u32>> {
        points.iter().map(|p| self.predict(p)).collect()
    }
}

pub fn svm_train(train: &LabeledManifoldSet, gamma: f64, c: f64) -> Result<SvmModel> {
    SvmModel::train(train, &SvmParams::new(gamma, c))
}

pub fn svm_predict(model: &SvmModel, point: &CholeskyPoint) -> Result<u32> {
    model.predict(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn diag(a: f64, b: f64) -> CholeskyPoint {
        CholeskyPoint::from_diagonal(&[a, b]).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let l = diag(2.0, 3.0);
        assert_eq!(kernel(&l, &l, 5.0).unwrap(), 1.0);
        // d(I, diag(e, 1)) = 1
        let k = kernel(&CholeskyPoint::identity(2), &diag(E, 1.0), 1.0).unwrap();
        assert!((k - (-1f64).exp()).abs() < 1e-15);
        assert!((k - 0.36788).abs() < 1e-5);
        assert!(kernel(&l, &l, 0.0).is_err());
        assert!(kernel(&l, &CholeskyPoint::identity(3), 1.0).is_err());
    }

    fn separable() -> LabeledManifoldSet {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for k in 0..6 {
            let t = 0.05 * k as f64;
            pts.push(diag((1.0 + t).exp(), 1.0));
            labels.push(0);
            pts.push(diag((-1.0 - t).exp(), 1.0 + t));
            labels.push(1);
        }
        LabeledManifoldSet::from_labeled(pts, labels).unwrap()
    }

    #[test]
    fn separable_training_accuracy() {
        let set = separable();
        let model = svm_train(&set, 1.0, 1.0).unwrap();
        for (p, &l) in set.points().iter().zip(set.labels()) {
            assert_eq!(svm_predict(&model, p).unwrap(), l);
        }
        for pair in model.pairs() {
            assert!(!pair.support.is_empty());
            assert!(pair.coefficients.iter().all(|a| a.abs() <= 1.0));
        }
        // deep inside class 0
        assert_eq!(model.predict(&diag(3f64.exp(), 1.0)).unwrap(), 0);
    }

    #[test]
    fn two_class_prediction_is_decision_sign() {
        let set = separable();
        let model = svm_train(&set, 1.0, 1.0).unwrap();
        for p in set.points() {
            let f = model.decision_values(p).unwrap()[0];
            let expected = if f >= 0.0 { 0 } else { 1 };
            assert_eq!(model.predict(p).unwrap(), expected);
        }
    }

    #[test]
    fn conflicting_duplicate_converges() {
        let p = diag(1.5, 0.7);
        let set = LabeledManifoldSet::from_labeled(
            vec![p.clone(), p.clone(), diag(5.0, 1.0), diag(0.2, 1.0)],
            vec![0, 1, 0, 1],
        )
        .unwrap();
        let model = svm_train(&set, 1.0, 1.0).unwrap();
        let label = model.predict(&p).unwrap();
        assert!(label == 0 || label == 1);
        assert_eq!(model.predict(&p).unwrap(), label);
    }

    #[test]
    fn training_errors() {
        let set = LabeledManifoldSet::from_labeled(vec![diag(1.0, 1.0)], vec![0]).unwrap();
        assert!(svm_train(&set, 1.0, 1.0).is_err());
        let set = separable();
        assert!(matches!(
            SvmModel::train_for_classes(&set, &[0, 1, 9], &SvmParams::new(1.0, 1.0)),
            Err(Error::EmptyClass { label: 9 })
        ));
        assert!(svm_train(&set, -1.0, 1.0).is_err());
        assert!(svm_train(&set, 1.0, 0.0).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let set = separable();
        let params = SvmParams {
            max_iterations: Some(1),
            ..SvmParams::new(1.0, 1.0)
        };
        assert!(matches!(
            SvmModel::train(&set, &params),
            Err(Error::NonConvergence { a: 0, b: 1, .. })
        ));
    }

    #[test]
    fn smo_dual_feasibility() {
        let set = separable();
        let gram = gram_matrix(set.points(), 0.5).unwrap();
        let y: Vec<f64> = set.labels().iter().map(|&l| if l == 0 { 1.0 } else { -1.0 }).collect();
        let sol = smo_solve(&gram, &y, 0.3, 1e-3, 100_000);
        assert!(sol.converged);
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-12);
        assert!(sol.alpha.iter().all(|&a| (0.0..=0.3).contains(&a)));
    }
}
