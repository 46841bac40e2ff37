#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spd_emg::{CholeskyPoint, TangentVector};

pub const DIMS: [usize; 5] = [2, 3, 8, 12, 16];

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Strict-lower entries N(0,1), diagonal exp(N(0, 0.5²)).
pub fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> CholeskyPoint {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..i {
            m[(i, j)] = normal(rng);
        }
        m[(i, i)] = (0.5 * normal(rng)).exp();
    }
    CholeskyPoint::new(m).unwrap()
}

/// Wishart-like SPD matrix `AAᵀ/c + I/2`, exactly symmetric.
pub fn random_spd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| normal(rng));
    let p = &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.5;
    (&p + p.transpose()) * 0.5
}

/// Cholesky factor of [`random_spd`]; better conditioned than a raw random triangle.
pub fn random_spd_point(rng: &mut ChaCha8Rng, dim: usize) -> CholeskyPoint {
    spd_emg::cholesky(&spd_emg::SpdMatrix::new(random_spd(rng, dim)).unwrap()).unwrap()
}

pub fn random_lower(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            m[(i, j)] = scale * normal(rng);
        }
    }
    m
}

pub fn random_tangent(rng: &mut ChaCha8Rng, base: &CholeskyPoint, scale: f64) -> TangentVector {
    let m = random_lower(rng, base.dim(), scale);
    TangentVector::new(base.clone(), m).unwrap()
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| normal(rng));
    (&a + a.transpose()) * 0.5
}

/// `|a - b| ≤ tol·max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

pub fn matrices_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| close(*x, *y, tol))
}

/// `ψ(L) = ⌊L⌋ + log 𝔻(L)`, written out independently of the library.
pub fn psi(l: &CholeskyPoint) -> DMatrix<f64> {
    let e = l.entries();
    DMatrix::from_fn(e.nrows(), e.ncols(), |i, j| {
        if i == j {
            e[(i, i)].ln()
        } else if i > j {
            e[(i, j)]
        } else {
            0.0
        }
    })
}

pub fn psi_inverse(x: &DMatrix<f64>) -> CholeskyPoint {
    let m = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        if i == j {
            x[(i, i)].exp()
        } else if i > j {
            x[(i, j)]
        } else {
            0.0
        }
    });
    CholeskyPoint::new(m).unwrap()
}

/// Geodesic distance computed from the two terms of its definition.
pub fn oracle_distance(l: &CholeskyPoint, k: &CholeskyPoint) -> f64 {
    let (a, b) = (l.entries(), k.entries());
    let mut strict = 0.0;
    let mut diag = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            strict += (a[(i, j)] - b[(i, j)]).powi(2);
        }
        diag += (a[(i, i)].ln() - b[(i, i)].ln()).powi(2);
    }
    (strict + diag).sqrt()
}
