//! Deterministic synthetic manifold datasets.
//!
//! Class centroids are placed in `ψ`-space (where the metric is flat) on
//! orthogonal axes, so every pair sits exactly `class_separation` apart when
//! the class count fits in the embedding dimension. Each subject translates
//! all centroids by its own random offset of norm `subject_offset`. Trials are
//! exp-mapped tangent perturbations whose metric coordinates are i.i.d.
//! `N(0, dispersion²)`, so a trial's geodesic distance to its centroid is the
//! norm of that noise vector.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledManifoldSet;
use crate::error::{Error, Result};
use crate::format::{save_point_store, Manifest};
use crate::linalg::Matrix;
use crate::manifold::{exp_map, packed_len, CholeskyPoint, EmbeddedVector, TangentVector};
use crate::signal::ChannelTrial;

/// Trials cycle through this many repetition ids (1-based).
pub const SYNTH_REPETITIONS: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dim: usize,
    pub classes: usize,
    pub subjects: usize,
    pub trials_per_class: usize,
    pub class_separation: f64,
    pub dispersion: f64,
    pub subject_offset: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.classes == 0 || self.subjects == 0 || self.trials_per_class == 0 {
            return Err(Error::InvalidConfig("synthetic counts must be at least 1".into()));
        }
        if !(self.class_separation > 0.0) || !(self.dispersion > 0.0) {
            return Err(Error::InvalidConfig(
                "class separation and dispersion must be positive".into(),
            ));
        }
        if !(self.subject_offset >= 0.0) {
            return Err(Error::InvalidConfig("subject offset must be non-negative".into()));
        }
        Ok(())
    }
}

/// Generated set plus the centroid of every (subject, class).
#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub set: LabeledManifoldSet,
    /// `centroids[subject][class]`.
    pub centroids: Vec<Vec<CholeskyPoint>>,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Unit directions, mutually orthogonal while `count ≤ len`.
fn directions(rng: &mut ChaCha8Rng, count: usize, len: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    for k in 0..count {
        let mut v = gaussian_vec(rng, len);
        if k < len {
            for u in &out {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
        }
        out.push(normalized(v));
    }
    out
}

fn unpack_lower(dim: usize, packed: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(dim, dim);
    let mut it = packed.iter();
    for i in 0..dim {
        for j in 0..=i {
            m[(i, j)] = *it.next().unwrap();
        }
    }
    m
}

fn point_from_embedding(dim: usize, packed: &[f64]) -> Result<CholeskyPoint> {
    Ok(EmbeddedVector::new(unpack_lower(dim, packed))?.pullback())
}

pub fn generate_with_centroids(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let c = cfg.dim;
    let len = packed_len(c);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let radius = cfg.class_separation / std::f64::consts::SQRT_2;
    let class_dirs = directions(&mut rng, cfg.classes, len);
    let subject_dirs: Vec<Vec<f64>> = (0..cfg.subjects)
        .map(|_| normalized(gaussian_vec(&mut rng, len)))
        .collect();

    let mut set = LabeledManifoldSet::default();
    let mut centroids = Vec::with_capacity(cfg.subjects);
    for (s, offset_dir) in subject_dirs.iter().enumerate() {
        let mut row = Vec::with_capacity(cfg.classes);
        for (m, class_dir) in class_dirs.iter().enumerate() {
            let packed: Vec<f64> = class_dir
                .iter()
                .zip(offset_dir)
                .map(|(a, b)| radius * a + cfg.subject_offset * b)
                .collect();
            let centroid = point_from_embedding(c, &packed)?;
            for t in 0..cfg.trials_per_class {
                let noise = unpack_lower(c, &gaussian_vec(&mut rng, len)) * cfg.dispersion;
                let mut entries = noise;
                for j in 0..c {
                    entries[(j, j)] *= centroid.entries()[(j, j)];
                }
                let tangent = TangentVector::new(centroid.clone(), entries)?;
                let point = exp_map(&centroid, &tangent)?;
                set.push(point, m as u32, s as u32, (t as u32 % SYNTH_REPETITIONS) + 1)?;
            }
            row.push(centroid);
        }
        centroids.push(row);
    }
    Ok(SynthDataset { set, centroids })
}

pub fn generate(cfg: &SynthConfig) -> Result<LabeledManifoldSet> {
    Ok(generate_with_centroids(cfg)?.set)
}

/// Writes `set` as a point store in `dir` plus `synth_config.json`;
/// returns the manifest path.
pub fn save(cfg: &SynthConfig, set: &LabeledManifoldSet, dir: &Path) -> Result<PathBuf> {
    let mut meta = Manifest::new("synthetic", 0.0);
    meta.gesture_names = (0..cfg.classes).map(|m| format!("gesture-{m}")).collect();
    let manifest = save_point_store(dir, &meta, set)?;
    let cfg_path = dir.join("synth_config.json");
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(&cfg_path, text + "\n").map_err(|e| Error::io(&cfg_path, e))?;
    Ok(manifest)
}

/// Raw trials `X = L·Z` with `Z` standard normal, so each trial's sample
/// covariance tends to `LLᵀ` as `samples` grows.
pub fn synthesize_trials(set: &LabeledManifoldSet, samples: usize, seed: u64) -> Result<Vec<ChannelTrial>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..set.len())
        .map(|i| {
            let l = set.points()[i].entries();
            let z = Matrix::from_fn(l.nrows(), samples, |_, _| rng.sample::<f64, _>(StandardNormal));
            ChannelTrial::new(l * z, set.labels()[i], set.subjects()[i], set.repetitions()[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{geodesic_distance, frechet_mean};

    fn cfg() -> SynthConfig {
        SynthConfig {
            dim: 3,
            classes: 4,
            subjects: 2,
            trials_per_class: 5,
            class_separation: 2.0,
            dispersion: 0.1,
            subject_offset: 0.5,
            seed: 9,
        }
    }

    #[test]
    fn shape_and_metadata() {
        let set = generate(&cfg()).unwrap();
        assert_eq!(set.len(), 2 * 4 * 5);
        assert_eq!(set.distinct_labels(), vec![0, 1, 2, 3]);
        assert_eq!(set.distinct_subjects(), vec![0, 1]);
        assert_eq!(&set.repetitions()[..5], &[1, 2, 3, 4, 5]);
    }

    #[test]
    fn centroids_exactly_separated() {
        let data = generate_with_centroids(&cfg()).unwrap();
        let row = &data.centroids[0];
        for a in 0..row.len() {
            for b in (a + 1)..row.len() {
                let d = geodesic_distance(&row[a], &row[b]).unwrap();
                assert!((d - 2.0).abs() < 1e-12);
            }
        }
        // subject translation preserves the within-subject geometry
        let d = geodesic_distance(&data.centroids[1][0], &data.centroids[1][2]).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_dispersion_collapses_to_centroid() {
        let c = SynthConfig { dispersion: 1e-15, ..cfg() };
        let data = generate_with_centroids(&c).unwrap();
        for i in 0..data.set.len() {
            let s = data.set.subjects()[i] as usize;
            let m = data.set.labels()[i] as usize;
            assert_eq!(data.set.points()[i], data.centroids[s][m]);
        }
    }

    #[test]
    fn single_class_stays_near_centroid() {
        let c = SynthConfig { classes: 1, subjects: 1, trials_per_class: 50, ..cfg() };
        let data = generate_with_centroids(&c).unwrap();
        let centroid = &data.centroids[0][0];
        // six noise coordinates of std 0.1
        for p in data.set.points() {
            assert!(geodesic_distance(p, centroid).unwrap() < 0.1 * 6.0);
        }
        assert!(geodesic_distance(&frechet_mean(data.set.points()).unwrap(), centroid).unwrap() < 0.1);
    }

    #[test]
    fn deterministic() {
        let a = generate(&cfg()).unwrap();
        let b = generate(&cfg()).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            assert!(p.entries().iter().zip(q.entries().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let other = generate(&SynthConfig { seed: 10, ..cfg() }).unwrap();
        assert_ne!(a.points()[0], other.points()[0]);
    }

    #[test]
    fn raw_trials_recover_covariance() {
        use crate::signal::{sample_covariance, trial_to_point, CovarianceConfig, Normalization};
        let c = SynthConfig { classes: 1, subjects: 1, trials_per_class: 2, ..cfg() };
        let set = generate(&c).unwrap();
        let trials = synthesize_trials(&set, 20_000, 3).unwrap();
        assert_eq!(trials.len(), 2);
        assert_eq!(trials[1].samples(), 20_000);
        let raw = CovarianceConfig::new(0.0, Normalization::None).unwrap();
        let p = trial_to_point(&trials[0], &raw).unwrap();
        assert!(geodesic_distance(&p.point, &set.points()[0]).unwrap() < 0.05);
        assert_eq!(sample_covariance(&trials[0]).unwrap().dim(), 3);
    }

    #[test]
    fn rejects_invalid() {
        assert!(generate(&SynthConfig { classes: 0, ..cfg() }).is_err());
        assert!(generate(&SynthConfig { dispersion: 0.0, ..cfg() }).is_err());
        assert!(generate(&SynthConfig { subject_offset: -1.0, ..cfg() }).is_err());
    }
}
