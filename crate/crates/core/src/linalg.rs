//! Small dense helpers: the triangular-part operators and a Cholesky factorization.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Smallest jitter factor tried by [`cholesky_with_jitter`].
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter factor tried by [`cholesky_with_jitter`].
pub const JITTER_MAX: f64 = 1e-6;

pub(crate) fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// `⌊M⌋`: keeps the entries strictly below the diagonal.
pub fn strict_lower(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in (j + 1)..m.nrows() {
            out[(i, j)] = m[(i, j)];
        }
    }
    out
}

/// `𝔻(M)`: the diagonal part of `M`.
pub fn diag_part(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows().min(m.ncols()) {
        out[(i, i)] = m[(i, i)];
    }
    out
}

/// `⌊M⌋ + 𝔻(M)/2`.
pub fn half_lower(m: &Matrix) -> Matrix {
    let mut out = strict_lower(m);
    for i in 0..m.nrows().min(m.ncols()) {
        out[(i, i)] = 0.5 * m[(i, i)];
    }
    out
}

/// Largest `|M(i,j) - M(j,i)|`.
pub fn max_asymmetry(m: &Matrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Checks symmetry relative to the largest entry magnitude.
pub(crate) fn ensure_symmetric(m: &Matrix, rel_tol: f64) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asymmetry = max_asymmetry(m);
    if asymmetry > rel_tol * scale || !asymmetry.is_finite() {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Cholesky–Banachiewicz factorization of a symmetric matrix, reading only
/// its lower triangle. Fails on the first non-positive pivot.
pub fn cholesky_factor(p: &Matrix) -> Result<Matrix> {
    let n = ensure_square(p)?;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = p[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return Err(Error::NotPositiveDefinite { pivot: i });
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Factorizes `P`, retrying with `P + ε·trace(P)/c·I` for
/// ε = 1e-10, 1e-9, …, 1e-6 when the plain factorization fails.
///
/// Returns the factor together with the ε actually applied (0 when none).
pub fn cholesky_with_jitter(p: &Matrix) -> Result<(Matrix, f64)> {
    let first_error = match cholesky_factor(p) {
        Ok(l) => return Ok((l, 0.0)),
        Err(e) => e,
    };
    let n = ensure_square(p)?;
    let mean_diag = p.trace() / n as f64;
    if !(mean_diag > 0.0) {
        return Err(first_error);
    }
    let mut eps = JITTER_START;
    while eps <= JITTER_MAX * (1.0 + 1e-9) {
        let mut q = p.clone();
        for i in 0..n {
            q[(i, i)] += eps * mean_diag;
        }
        if let Ok(l) = cholesky_factor(&q) {
            return Ok((l, eps));
        }
        eps *= 10.0;
    }
    Err(first_error)
}

/// Solves `L·X = B` for lower-triangular `L` by forward substitution.
pub(crate) fn solve_lower(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.nrows();
    let mut x = b.clone();
    for col in 0..b.ncols() {
        for i in 0..n {
            let mut sum = x[(i, col)];
            for k in 0..i {
                sum -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = sum / l[(i, i)];
        }
    }
    x
}

/// Frobenius norm of `A - B` relative to `‖B‖_F`.
pub fn relative_frobenius_error(a: &Matrix, b: &Matrix) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    #[test]
    fn strict_lower_examples() {
        assert_eq!(strict_lower(&m2(1.0, 2.0, 3.0, 4.0)), m2(0.0, 0.0, 3.0, 0.0));
        assert_eq!(strict_lower(&Matrix::identity(3, 3)), Matrix::zeros(3, 3));
        assert_eq!(strict_lower(&Matrix::zeros(3, 3)), Matrix::zeros(3, 3));
    }

    #[test]
    fn diag_part_examples() {
        assert_eq!(diag_part(&m2(1.0, 2.0, 3.0, 4.0)), m2(1.0, 0.0, 0.0, 4.0));
        assert_eq!(diag_part(&Matrix::zeros(2, 2)), Matrix::zeros(2, 2));
        assert_eq!(diag_part(&m2(5.0, 0.0, 0.0, 6.0)), m2(5.0, 0.0, 0.0, 6.0));
    }

    #[test]
    fn half_lower_examples() {
        assert_eq!(half_lower(&m2(2.0, 0.0, 4.0, 6.0)), m2(1.0, 0.0, 4.0, 3.0));
        assert_eq!(
            half_lower(&Matrix::identity(3, 3)),
            Matrix::identity(3, 3) * 0.5
        );
        assert_eq!(half_lower(&Matrix::zeros(2, 2)), Matrix::zeros(2, 2));
    }

    #[test]
    fn factor_known_matrix() {
        let l = cholesky_factor(&m2(4.0, 2.0, 2.0, 5.0)).unwrap();
        assert_eq!(l, m2(2.0, 0.0, 1.0, 2.0));
    }

    #[test]
    fn factor_rejects_indefinite() {
        let err = cholesky_factor(&m2(1.0, 2.0, 2.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 1 }));
    }

    #[test]
    fn jitter_repairs_rank_deficient() {
        let p = m2(1.0, -1.0, -1.0, 1.0);
        assert!(cholesky_factor(&p).is_err());
        let (l, eps) = cholesky_with_jitter(&p).unwrap();
        assert!((JITTER_START..=JITTER_MAX).contains(&eps));
        assert!(l[(1, 1)] > 0.0);
    }

    #[test]
    fn jitter_gives_up_on_negative_definite() {
        let p = m2(-1.0, 0.0, 0.0, -1.0);
        assert!(cholesky_with_jitter(&p).is_err());
    }

    #[test]
    fn forward_substitution() {
        let l = m2(2.0, 0.0, 1.0, 2.0);
        let b = m2(4.0, 2.0, 2.0, 5.0);
        let x = solve_lower(&l, &b);
        assert!(relative_frobenius_error(&(&l * &x), &b) < 1e-15);
    }
}
