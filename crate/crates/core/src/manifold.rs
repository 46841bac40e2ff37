//! Closed-form Log-Cholesky geometry on the Cholesky space `ℒc⁺`.
//!
//! SPD matrices `P` are identified with their Cholesky factors `L` (lower
//! triangular, positive diagonal). The metric is flat on the strictly lower
//! part and logarithmic on the diagonal, so distance, Fréchet mean, the
//! exponential/logarithm maps and parallel transport all have closed forms.
//! Matrix exp/log are only ever applied to diagonal matrices and are computed
//! entrywise.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, ensure_square, Matrix};

/// Relative symmetry tolerance accepted by [`SpdMatrix::new`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Hybrid absolute/relative tolerance behind `CholeskyPoint: PartialEq`.
pub const POINT_TOLERANCE: f64 = 1e-12;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidPoint(format!("{what} has non-finite entries")))
    }
}

fn upper_is_zero(m: &Matrix) -> bool {
    (0..m.ncols()).all(|j| (0..j).all(|i| m[(i, j)] == 0.0))
}

/// A symmetric covariance matrix, a candidate point of `𝒮c⁺`.
///
/// Construction checks shape, finiteness and symmetry. Positive-definiteness
/// is checked constructively by [`cholesky`], so positive semi-definite
/// matrices (e.g. rank-deficient sample covariances awaiting shrinkage) are
/// representable.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    entries: Matrix,
}

impl SpdMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        ensure_square(&entries)?;
        if entries.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        ensure_finite(&entries, "SPD matrix")?;
        linalg::ensure_symmetric(&entries, SYMMETRY_TOLERANCE)?;
        Ok(Self { entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: Matrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_inner(self) -> Matrix {
        self.entries
    }
}

/// A point of the Cholesky space: lower triangular with a strictly positive diagonal.
#[derive(Clone, Debug)]
pub struct CholeskyPoint {
    entries: Matrix,
}

impl CholeskyPoint {
    pub fn new(entries: Matrix) -> Result<Self> {
        ensure_square(&entries)?;
        if entries.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        ensure_finite(&entries, "Cholesky point")?;
        if !upper_is_zero(&entries) {
            return Err(Error::InvalidPoint(
                "entries above the diagonal must be zero".into(),
            ));
        }
        if let Some(j) = (0..entries.nrows()).find(|&j| !(entries[(j, j)] > 0.0)) {
            return Err(Error::InvalidPoint(format!(
                "diagonal entry {j} is not positive"
            )));
        }
        Ok(Self { entries })
    }

    pub(crate) fn from_trusted(entries: Matrix) -> Self {
        debug_assert!(Self::new(entries.clone()).is_ok());
        Self { entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: Matrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    /// Builds a point from its lower triangle packed row by row
    /// (`(0,0), (1,0), (1,1), (2,0), …`).
    pub fn from_packed(dim: usize, packed: &[f64]) -> Result<Self> {
        if packed.len() != packed_len(dim) {
            return Err(Error::DimensionMismatch {
                expected: packed_len(dim),
                found: packed.len(),
            });
        }
        let mut m = Matrix::zeros(dim, dim);
        let mut it = packed.iter();
        for i in 0..dim {
            for j in 0..=i {
                m[(i, j)] = *it.next().unwrap();
            }
        }
        Self::new(m)
    }

    pub fn packed(&self) -> Vec<f64> {
        let c = self.dim();
        let mut out = Vec::with_capacity(packed_len(c));
        for i in 0..c {
            for j in 0..=i {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.entries[(j, j)]).collect()
    }

    /// Elementwise agreement within a hybrid absolute/relative tolerance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|(a, b)| close(*a, *b, tol))
    }

    /// `ψ(L)` packed row by row; squared Frobenius differences of these
    /// vectors are squared geodesic distances.
    pub fn packed_embedding(&self) -> Vec<f64> {
        let c = self.dim();
        let mut out = Vec::with_capacity(packed_len(c));
        for i in 0..c {
            for j in 0..i {
                out.push(self.entries[(i, j)]);
            }
            out.push(self.entries[(i, i)].ln());
        }
        out
    }
}

impl PartialEq for CholeskyPoint {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, POINT_TOLERANCE)
    }
}

/// Number of entries in a packed lower triangle.
pub fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// An element of `ℒc` attached to the base point of its tangent space.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    base: CholeskyPoint,
    entries: Matrix,
}

impl TangentVector {
    pub fn new(base: CholeskyPoint, entries: Matrix) -> Result<Self> {
        ensure_square(&entries)?;
        ensure_dim(base.dim(), entries.nrows())?;
        ensure_finite(&entries, "tangent vector")?;
        if !upper_is_zero(&entries) {
            return Err(Error::InvalidPoint(
                "tangent entries above the diagonal must be zero".into(),
            ));
        }
        Ok(Self { base, entries })
    }

    pub fn zero(base: CholeskyPoint) -> Self {
        let c = base.dim();
        Self {
            base,
            entries: Matrix::zeros(c, c),
        }
    }

    pub fn base(&self) -> &CholeskyPoint {
        &self.base
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn scale(&self, t: f64) -> Self {
        Self {
            base: self.base.clone(),
            entries: &self.entries * t,
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.base.approx_eq(&other.base, tol)
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|(a, b)| close(*a, *b, tol))
    }
}

/// `ψ(L) = ⌊L⌋ + log 𝔻(L)`, the isometric image of a point in Frobenius space.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedVector {
    entries: Matrix,
}

impl EmbeddedVector {
    pub fn new(entries: Matrix) -> Result<Self> {
        ensure_square(&entries)?;
        ensure_finite(&entries, "embedded vector")?;
        if !upper_is_zero(&entries) {
            return Err(Error::InvalidPoint(
                "embedded entries above the diagonal must be zero".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Inverse of [`embed`]: `⌊E⌋ + exp 𝔻(E)`.
    pub fn pullback(&self) -> CholeskyPoint {
        let mut m = self.entries.clone();
        for j in 0..m.nrows() {
            m[(j, j)] = m[(j, j)].exp();
        }
        CholeskyPoint::from_trusted(m)
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        ensure_dim(self.dim(), other.dim())?;
        Ok((&self.entries - &other.entries).norm())
    }
}

/// `𝓛(P)`: the unique Cholesky factor with positive diagonal.
pub fn cholesky(p: &SpdMatrix) -> Result<CholeskyPoint> {
    let l = linalg::cholesky_factor(p.entries())?;
    Ok(CholeskyPoint::from_trusted(l))
}

/// `𝒮(L) = L·Lᵀ`.
pub fn reconstruct(l: &CholeskyPoint) -> SpdMatrix {
    let c = l.dim();
    let m = l.entries();
    let mut p = Matrix::zeros(c, c);
    for i in 0..c {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..=j {
                s += m[(i, k)] * m[(j, k)];
            }
            p[(i, j)] = s;
            p[(j, i)] = s;
        }
    }
    SpdMatrix { entries: p }
}

/// Geodesic distance
/// `{‖⌊L⌋−⌊K⌋‖²_F + ‖log 𝔻(L) − log 𝔻(K)‖²_F}^{1/2}`.
pub fn geodesic_distance(l: &CholeskyPoint, k: &CholeskyPoint) -> Result<f64> {
    ensure_dim(l.dim(), k.dim())?;
    let (a, b) = (l.entries(), k.entries());
    let mut sum = 0.0;
    for i in 0..l.dim() {
        for j in 0..i {
            let d = a[(i, j)] - b[(i, j)];
            sum += d * d;
        }
        let d = a[(i, i)].ln() - b[(i, i)].ln();
        sum += d * d;
    }
    Ok(sum.sqrt())
}

/// Squared distance between two packed embeddings; summation order matches
/// [`geodesic_distance`], so `sqrt` of this is bit-identical to it.
pub fn packed_sq_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sum += d * d;
    }
    sum
}

/// `ψ(L) = ⌊L⌋ + log 𝔻(L)`.
pub fn embed(l: &CholeskyPoint) -> EmbeddedVector {
    let mut m = l.entries().clone();
    for j in 0..m.nrows() {
        m[(j, j)] = m[(j, j)].ln();
    }
    EmbeddedVector { entries: m }
}

/// Closed-form Fréchet mean:
/// `(1/n)Σ⌊Lᵢ⌋ + exp((1/n)Σ log 𝔻(Lᵢ))`.
pub fn frechet_mean<'a, I>(points: I) -> Result<CholeskyPoint>
where
    I: IntoIterator<Item = &'a CholeskyPoint>,
{
    let mut iter = points.into_iter();
    let first = iter.next().ok_or(Error::EmptyInput)?;
    let c = first.dim();
    let mut acc = embed(first).entries;
    let mut n = 1usize;
    for p in iter {
        ensure_dim(c, p.dim())?;
        let m = p.entries();
        for i in 0..c {
            for j in 0..i {
                acc[(i, j)] += m[(i, j)];
            }
            acc[(i, i)] += m[(i, i)].ln();
        }
        n += 1;
    }
    acc /= n as f64;
    Ok(EmbeddedVector { entries: acc }.pullback())
}

fn ensure_base(l: &CholeskyPoint, x: &TangentVector) -> Result<()> {
    ensure_dim(l.dim(), x.dim())?;
    if x.base() != l {
        return Err(Error::BaseMismatch);
    }
    Ok(())
}

/// `g̃_L(X, Y) = Σ_{i>j} XᵢⱼYᵢⱼ + Σⱼ XⱼⱼYⱼⱼ Lⱼⱼ⁻²`.
pub fn metric_inner(l: &CholeskyPoint, x: &TangentVector, y: &TangentVector) -> Result<f64> {
    ensure_base(l, x)?;
    ensure_base(l, y)?;
    let (lm, xm, ym) = (l.entries(), x.entries(), y.entries());
    let mut strict = 0.0;
    let mut diag = 0.0;
    for i in 0..l.dim() {
        for j in 0..i {
            strict += xm[(i, j)] * ym[(i, j)];
        }
        let ljj = lm[(i, i)];
        diag += xm[(i, i)] * ym[(i, i)] / (ljj * ljj);
    }
    Ok(strict + diag)
}

/// `(D_L𝒮)(X) = L·Xᵀ + X·Lᵀ`.
pub fn differential_s(l: &CholeskyPoint, x: &TangentVector) -> Result<Matrix> {
    ensure_base(l, x)?;
    let lx = l.entries() * x.entries().transpose();
    let mut out = &lx + lx.transpose();
    // force exact symmetry
    for i in 0..out.nrows() {
        for j in 0..i {
            out[(j, i)] = out[(i, j)];
        }
    }
    Ok(out)
}

/// `(D_L𝒮)⁻¹(W) = L·(L⁻¹ W L⁻ᵀ)½`.
pub fn differential_s_inv(l: &CholeskyPoint, w: &Matrix) -> Result<TangentVector> {
    ensure_square(w)?;
    ensure_dim(l.dim(), w.nrows())?;
    linalg::ensure_symmetric(w, 1e-10)?;
    let lm = l.entries();
    let a = linalg::solve_lower(lm, w);
    let inner = linalg::solve_lower(lm, &a.transpose());
    let product = lm * linalg::half_lower(&inner);
    let entries = linalg::strict_lower(&product) + linalg::diag_part(&product);
    Ok(TangentVector {
        base: l.clone(),
        entries,
    })
}

/// Pulled-back metric on `𝒮c⁺`: `g_P(W, V) = g̃_L((D_L𝒮)⁻¹W, (D_L𝒮)⁻¹V)`, `L = 𝓛(P)`.
pub fn spd_metric(p: &SpdMatrix, w: &Matrix, v: &Matrix) -> Result<f64> {
    let l = cholesky(p)?;
    let x = differential_s_inv(&l, w)?;
    let y = differential_s_inv(&l, v)?;
    metric_inner(&l, &x, &y)
}

/// Logarithm map `Log_L K = ⌊K⌋ − ⌊L⌋ + 𝔻(L)·log(𝔻(L)⁻¹𝔻(K))`.
pub fn log_map(l: &CholeskyPoint, k: &CholeskyPoint) -> Result<TangentVector> {
    ensure_dim(l.dim(), k.dim())?;
    let (lm, km) = (l.entries(), k.entries());
    let c = l.dim();
    let mut out = Matrix::zeros(c, c);
    for i in 0..c {
        for j in 0..i {
            out[(i, j)] = km[(i, j)] - lm[(i, j)];
        }
        out[(i, i)] = lm[(i, i)] * (km[(i, i)] / lm[(i, i)]).ln();
    }
    Ok(TangentVector {
        base: l.clone(),
        entries: out,
    })
}

/// Exponential map `Exp_L X = ⌊L⌋ + ⌊X⌋ + 𝔻(L)·exp(𝔻(X)𝔻(L)⁻¹)`.
pub fn exp_map(l: &CholeskyPoint, x: &TangentVector) -> Result<CholeskyPoint> {
    ensure_base(l, x)?;
    let (lm, xm) = (l.entries(), x.entries());
    let c = l.dim();
    let mut out = Matrix::zeros(c, c);
    for i in 0..c {
        for j in 0..i {
            out[(i, j)] = lm[(i, j)] + xm[(i, j)];
        }
        out[(i, i)] = lm[(i, i)] * (xm[(i, i)] / lm[(i, i)]).exp();
    }
    // exp can overflow or underflow for extreme tangents
    CholeskyPoint::new(out)
}

/// Parallel transport of `X ∈ T_L` to `T_K`: `⌊X⌋ + 𝔻(K)𝔻(L)⁻¹𝔻(X)`.
pub fn parallel_transport(
    x: &TangentVector,
    l: &CholeskyPoint,
    k: &CholeskyPoint,
) -> Result<TangentVector> {
    ensure_base(l, x)?;
    ensure_dim(l.dim(), k.dim())?;
    let (lm, km) = (l.entries(), k.entries());
    let mut out = linalg::strict_lower(x.entries());
    for j in 0..l.dim() {
        out[(j, j)] = km[(j, j)] / lm[(j, j)] * x.entries()[(j, j)];
    }
    Ok(TangentVector {
        base: k.clone(),
        entries: out,
    })
}

/// Pairwise geodesic distances. Rows are computed in parallel; every entry
/// is bit-identical to the corresponding [`geodesic_distance`] call.
pub fn distance_matrix(points: &[CholeskyPoint]) -> Result<Matrix> {
    let first = points.first().ok_or(Error::EmptyInput)?;
    for p in points {
        ensure_dim(first.dim(), p.dim())?;
    }
    let packed: Vec<Vec<f64>> = points.iter().map(CholeskyPoint::packed_embedding).collect();
    Ok(packed_distance_matrix(&packed))
}

pub(crate) fn packed_distance_matrix(packed: &[Vec<f64>]) -> Matrix {
    let n = packed.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        packed_sq_distance(&packed[i], &packed[j]).sqrt()
                    }
                })
                .collect()
        })
        .collect();
    Matrix::from_fn(n, n, |i, j| rows[i][j])
}
