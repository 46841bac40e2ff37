//! Raw multichannel trials to Cholesky points: z-scoring, sample covariance,
//! optional shrinkage toward a trace-scaled identity, factorization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::manifold::{cholesky, CholeskyPoint, SpdMatrix};

/// One gesture trial: `c` channels by `T` samples plus metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTrial {
    data: Matrix,
    pub label: u32,
    pub subject: u32,
    pub repetition: u32,
}

impl ChannelTrial {
    pub fn new(data: Matrix, label: u32, subject: u32, repetition: u32) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::InvalidTrial("trial has no channels".into()));
        }
        if data.ncols() < 2 {
            return Err(Error::InvalidTrial(format!(
                "trial needs at least 2 samples, got {}",
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::InvalidTrial(format!(
                "non-finite sample at channel {row}, sample {col}"
            )));
        }
        Ok(Self {
            data,
            label,
            subject,
            repetition,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    ZScore,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceConfig {
    pub shrinkage_weight: f64,
    pub normalization: Normalization,
}

impl CovarianceConfig {
    pub fn new(shrinkage_weight: f64, normalization: Normalization) -> Result<Self> {
        if !(0.0..=1.0).contains(&shrinkage_weight) {
            return Err(Error::InvalidConfig(format!(
                "shrinkage weight {shrinkage_weight} outside [0, 1]"
            )));
        }
        Ok(Self {
            shrinkage_weight,
            normalization,
        })
    }

    /// Per-dataset recipes: 1 and 3 are plain z-scored covariances,
    /// 2 (128-channel high-density) adds shrinkage with weight 0.1.
    pub fn preset(dataset: u8) -> Result<Self> {
        match dataset {
            1 | 3 => Self::new(0.0, Normalization::ZScore),
            2 => Self::new(0.1, Normalization::ZScore),
            other => Err(Error::InvalidConfig(format!(
                "unknown dataset preset {other} (expected 1, 2 or 3)"
            ))),
        }
    }
}

/// Z-scores every channel along time (population convention, divisor `T`).
pub fn normalize(trial: &ChannelTrial) -> Result<ChannelTrial> {
    let t = trial.samples() as f64;
    let mut data = trial.data.clone();
    for (channel, mut row) in data.row_iter_mut().enumerate() {
        let mean = row.iter().sum::<f64>() / t;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t;
        let std = var.sqrt();
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(std > 4.0 * f64::EPSILON * scale) {
            return Err(Error::ZeroVarianceChannel { channel });
        }
        for v in row.iter_mut() {
            *v = (*v - mean) / std;
        }
    }
    Ok(ChannelTrial {
        data,
        ..trial.clone()
    })
}

/// `P = (1/T)·X·Xᵀ`.
///
/// A rank-deficient `P` is repaired with the escalating diagonal jitter of
/// [`linalg::cholesky_with_jitter`]; the returned matrix is the jittered one.
pub fn sample_covariance(trial: &ChannelTrial) -> Result<SpdMatrix> {
    let x = &trial.data;
    let c = trial.channels();
    let t = trial.samples() as f64;
    let mut p = Matrix::zeros(c, c);
    for i in 0..c {
        for j in 0..=i {
            let v = x.row(i).dot(&x.row(j)) / t;
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    let (_, eps) = linalg::cholesky_with_jitter(&p)?;
    if eps > 0.0 {
        let bump = eps * p.trace() / c as f64;
        for i in 0..c {
            p[(i, i)] += bump;
        }
    }
    SpdMatrix::new(p)
}

/// `(1−w)·P + (w/c)·trace(P)·I`.
pub fn shrink(p: &SpdMatrix, w: f64) -> Result<SpdMatrix> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidConfig(format!(
            "shrinkage weight {w} outside [0, 1]"
        )));
    }
    if w == 0.0 {
        return Ok(p.clone());
    }
    let c = p.dim();
    let target = w * p.entries().trace() / c as f64;
    let mut out = p.entries() * (1.0 - w);
    for i in 0..c {
        out[(i, i)] += target;
    }
    SpdMatrix::new(out)
}

/// Cholesky point of one trial together with its metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialPoint {
    pub point: CholeskyPoint,
    pub label: u32,
    pub subject: u32,
    pub repetition: u32,
}

/// `normalize → sample_covariance → shrink → cholesky`.
pub fn trial_to_point(trial: &ChannelTrial, cfg: &CovarianceConfig) -> Result<TrialPoint> {
    let normalized = match cfg.normalization {
        Normalization::ZScore => normalize(trial)?,
        Normalization::None => trial.clone(),
    };
    let p = sample_covariance(&normalized)?;
    let p = shrink(&p, cfg.shrinkage_weight)?;
    let point = cholesky(&p)?;
    Ok(TrialPoint {
        point,
        label: trial.label,
        subject: trial.subject,
        repetition: trial.repetition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(rows: &[&[f64]]) -> ChannelTrial {
        let c = rows.len();
        let t = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        ChannelTrial::new(Matrix::from_row_slice(c, t, &flat), 0, 0, 0).unwrap()
    }

    #[test]
    fn trial_validation() {
        assert!(ChannelTrial::new(Matrix::zeros(2, 1), 0, 0, 0).is_err());
        let mut m = Matrix::zeros(2, 3);
        m[(1, 2)] = f64::NAN;
        assert!(ChannelTrial::new(m, 0, 0, 0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let out = normalize(&trial(&[&[1.0, -1.0]])).unwrap();
        assert_eq!(out.data().row(0).iter().copied().collect::<Vec<_>>(), [1.0, -1.0]);
        let out = normalize(&trial(&[&[0.0, 2.0]])).unwrap();
        assert_eq!(out.data().row(0).iter().copied().collect::<Vec<_>>(), [-1.0, 1.0]);
        let err = normalize(&trial(&[&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]])).unwrap_err();
        assert!(matches!(err, Error::ZeroVarianceChannel { channel: 1 }));
    }

    #[test]
    fn rank_one_covariance_gets_jitter() {
        let p = sample_covariance(&trial(&[&[1.0, -1.0], &[-1.0, 1.0]])).unwrap();
        let e = p.entries();
        assert!((e[(0, 1)] + 1.0).abs() < 1e-15);
        assert!(e[(0, 0)] > 1.0 && e[(0, 0)] < 1.0 + 1e-6);
        assert!(cholesky(&p).is_ok());
    }

    #[test]
    fn identical_rows_repaired_by_jitter() {
        let p = sample_covariance(&trial(&[&[1.0, -1.0, 2.0], &[1.0, -1.0, 2.0]])).unwrap();
        assert!(cholesky(&p).is_ok());
    }

    #[test]
    fn shrink_examples() {
        let p = SpdMatrix::new(Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        assert_eq!(shrink(&p, 0.0).unwrap(), p);
        let id = SpdMatrix::identity(3);
        assert_eq!(shrink(&id, 0.37).unwrap().entries(), id.entries());
        let psd = SpdMatrix::from_diagonal(&[2.0, 0.0]).unwrap();
        let out = shrink(&psd, 0.1).unwrap();
        assert!((out.entries()[(0, 0)] - 1.9).abs() < 1e-15);
        assert!((out.entries()[(1, 1)] - 0.1).abs() < 1e-15);
        assert!(cholesky(&out).is_ok());
        assert!(shrink(&p, 1.5).is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(CovarianceConfig::preset(1).unwrap().shrinkage_weight, 0.0);
        assert_eq!(CovarianceConfig::preset(2).unwrap().shrinkage_weight, 0.1);
        assert_eq!(
            CovarianceConfig::preset(3).unwrap().normalization,
            Normalization::ZScore
        );
        assert!(CovarianceConfig::preset(4).is_err());
        assert!(CovarianceConfig::new(-0.1, Normalization::None).is_err());
    }
}
