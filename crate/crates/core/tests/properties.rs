//! Randomised invariants. Each case draws a seed (and sizes) from proptest
//! and builds its inputs with a seeded generator.

mod common;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use spd_emg::alignment::{align_dataset, align_group, max_distance_distortion, GestureGroup};
use spd_emg::classify::kmedoids::assign;
use spd_emg::classify::{gram_matrix, kmedoids, MdmModel, Model};
use spd_emg::format::{decode_point, encode_point};
use spd_emg::linalg::relative_frobenius_error;
use spd_emg::signal::{shrink, trial_to_point, ChannelTrial, CovarianceConfig, TrialPoint};
use spd_emg::synth::{generate, SynthConfig};
use spd_emg::{
    cholesky, differential_s, differential_s_inv, distance_matrix, embed, exp_map, frechet_mean, geodesic_distance,
    log_map, metric_inner, parallel_transport, reconstruct, spd_metric, CholeskyPoint, EmbeddedVector,
    LabeledManifoldSet, SpdMatrix,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn labeled_set(r: &mut ChaCha8Rng, dim: usize, classes: u32, per_class: usize) -> LabeledManifoldSet {
    let mut set = LabeledManifoldSet::default();
    for label in 0..classes {
        for _ in 0..per_class {
            set.push(random_point(r, dim), label, 0, 1).unwrap();
        }
    }
    set
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cholesky_reconstruct_roundtrip(seed: u64, dim in 2usize..=16) {
        let mut r = rng(seed);
        let p = random_spd(&mut r, dim);
        let l = cholesky(&SpdMatrix::new(p.clone()).unwrap()).unwrap();
        prop_assert!(relative_frobenius_error(reconstruct(&l).entries(), &p) <= 1e-10);
        prop_assert!(cholesky(&reconstruct(&l)).unwrap().approx_eq(&l, 1e-10));
    }

    #[test]
    fn distance_is_flat_metric(seed: u64, dim in 2usize..=16) {
        let mut r = rng(seed);
        let (l, k, m) = (random_point(&mut r, dim), random_point(&mut r, dim), random_point(&mut r, dim));
        let d = geodesic_distance(&l, &k).unwrap();
        prop_assert!(close(d, embed(&l).distance(&embed(&k)).unwrap(), 1e-12));
        prop_assert!(close(d, oracle_distance(&l, &k), 1e-12));
        prop_assert_eq!(d, geodesic_distance(&k, &l).unwrap());
        prop_assert_eq!(geodesic_distance(&l, &l).unwrap(), 0.0);
        prop_assert!(geodesic_distance(&l, &m).unwrap() <= d + geodesic_distance(&k, &m).unwrap() + 1e-12);
    }

    #[test]
    fn embedding_is_a_bijection(seed: u64, dim in 1usize..=16) {
        let mut r = rng(seed);
        let l = random_point(&mut r, dim);
        let e = embed(&l);
        prop_assert!(e.pullback().approx_eq(&l, 1e-12));
        let v = EmbeddedVector::new(random_lower(&mut r, dim, 1.0)).unwrap();
        prop_assert!(embed(&v.pullback()).entries().iter().zip(v.entries().iter()).all(|(a, b)| close(*a, *b, 1e-12)));
    }

    #[test]
    fn exp_and_log_are_inverse(seed: u64, dim in 2usize..=16) {
        let mut r = rng(seed);
        let (l, k) = (random_point(&mut r, dim), random_point(&mut r, dim));
        prop_assert!(exp_map(&l, &log_map(&l, &k).unwrap()).unwrap().approx_eq(&k, 1e-10));
        let x = random_tangent(&mut r, &l, 0.5);
        prop_assert!(log_map(&l, &exp_map(&l, &x).unwrap()).unwrap().approx_eq(&x, 1e-10));
        // geodesic distance equals the metric norm of the log
        let v = log_map(&l, &k).unwrap();
        let d = geodesic_distance(&l, &k).unwrap();
        prop_assert!(close(metric_inner(&l, &v, &v).unwrap().sqrt(), d, 1e-10));
    }

    #[test]
    fn transport_preserves_inner_products(seed: u64, dim in 2usize..=16) {
        let mut r = rng(seed);
        let (l, k) = (random_point(&mut r, dim), random_point(&mut r, dim));
        let (x, y) = (random_tangent(&mut r, &l, 1.0), random_tangent(&mut r, &l, 1.0));
        let (tx, ty) = (parallel_transport(&x, &l, &k).unwrap(), parallel_transport(&y, &l, &k).unwrap());
        prop_assert!(close(metric_inner(&k, &tx, &ty).unwrap(), metric_inner(&l, &x, &y).unwrap(), 1e-12));
        // transporting back is the identity
        prop_assert!(parallel_transport(&tx, &k, &l).unwrap().approx_eq(&x, 1e-12));
    }

    #[test]
    fn differential_inverse_roundtrip(seed: u64, dim in 2usize..=16) {
        let mut r = rng(seed);
        let l = random_spd_point(&mut r, dim);
        let w = random_symmetric(&mut r, dim);
        let back = differential_s(&l, &differential_s_inv(&l, &w).unwrap()).unwrap();
        prop_assert!(relative_frobenius_error(&back, &w) <= 1e-10);
    }

    #[test]
    fn spd_metric_is_symmetric(seed: u64, dim in 2usize..=8) {
        let mut r = rng(seed);
        let p = SpdMatrix::new(random_spd(&mut r, dim)).unwrap();
        let (w, v) = (random_symmetric(&mut r, dim), random_symmetric(&mut r, dim));
        let a = spd_metric(&p, &w, &v).unwrap();
        let b = spd_metric(&p, &v, &w).unwrap();
        prop_assert!(close(a, b, 1e-10));
        prop_assert!(spd_metric(&p, &w, &w).unwrap() >= 0.0);
    }

    #[test]
    fn frechet_mean_is_order_free(seed: u64, dim in 2usize..=8, n in 1usize..12) {
        let mut r = rng(seed);
        let mut pts: Vec<CholeskyPoint> = (0..n).map(|_| random_point(&mut r, dim)).collect();
        let mean = frechet_mean(&pts).unwrap();
        pts.shuffle(&mut r);
        prop_assert!(frechet_mean(&pts).unwrap().approx_eq(&mean, 1e-12));
    }

    #[test]
    fn mdm_training_is_order_free(seed: u64, dim in 2usize..=6) {
        let mut r = rng(seed);
        let set = labeled_set(&mut r, dim, 3, 4);
        let model = MdmModel::train(&set).unwrap();
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut r);
        let shuffled = MdmModel::train(&set.subset(&order)).unwrap();
        for (a, b) in model.centroids().values().zip(shuffled.centroids().values()) {
            prop_assert!(a.approx_eq(b, 1e-12));
        }
    }

    #[test]
    fn mdm_prediction_is_translation_invariant(seed: u64, dim in 2usize..=6) {
        let mut r = rng(seed);
        let set = labeled_set(&mut r, dim, 4, 3);
        let model = MdmModel::train(&set).unwrap();
        let shift = random_lower(&mut r, dim, 0.5);
        let moved = |p: &CholeskyPoint| EmbeddedVector::new(embed(p).entries() + &shift).unwrap().pullback();
        let translated: BTreeMap<u32, CholeskyPoint> =
            model.centroids().iter().map(|(&label, c)| (label, moved(c))).collect();
        let other = MdmModel::from_centroids(translated).unwrap();
        for _ in 0..10 {
            let q = random_point(&mut r, dim);
            prop_assert_eq!(model.predict(&q).unwrap(), other.predict(&moved(&q)).unwrap());
        }
    }

    #[test]
    fn gram_is_symmetric_psd(seed: u64, dim in 2usize..=8, n in 2usize..20, gamma in 0.01f64..100.0) {
        let mut r = rng(seed);
        let pts: Vec<CholeskyPoint> = (0..n).map(|_| random_point(&mut r, dim)).collect();
        let g = gram_matrix(&pts, gamma).unwrap();
        prop_assert_eq!(&g, &g.transpose());
        prop_assert!((0..n).all(|i| g[(i, i)] == 1.0));
        prop_assert!(SymmetricEigen::new(g).eigenvalues.min() >= -1e-8);
    }

    #[test]
    fn kmedoids_descends_to_a_fixed_point(seed: u64, dim in 2usize..=5, n in 2usize..30, k in 1usize..6) {
        let k = k.min(n);
        let mut r = rng(seed);
        let pts: Vec<CholeskyPoint> = (0..n).map(|_| random_point(&mut r, dim)).collect();
        let result = kmedoids(&pts, k).unwrap();
        prop_assert!(result.cost_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(result.medoid_indices.len(), k);
        let (again, cost) = assign(&distance_matrix(&pts).unwrap(), &result.medoid_indices);
        prop_assert_eq!(again, result.assignments);
        prop_assert!(close(cost, result.cost, 1e-12));
    }

    #[test]
    fn alignment_is_isometric_and_idempotent(seed: u64, dim in 2usize..=5) {
        let mut r = rng(seed);
        let mut set = LabeledManifoldSet::default();
        for subject in 0..3 {
            for label in 0..2 {
                for _ in 0..3 {
                    set.push(random_point(&mut r, dim), label, subject, 1).unwrap();
                }
            }
        }
        let once = align_dataset(&set, 0).unwrap();
        let twice = align_dataset(&once, 0).unwrap();
        for (a, b) in once.points().iter().zip(twice.points()) {
            prop_assert!(a.approx_eq(b, 1e-10));
        }
        let group = GestureGroup::new(1, 0, set.points()[6..9].to_vec()).unwrap();
        let target = random_point(&mut r, dim);
        let moved = align_group(&group, &target).unwrap();
        prop_assert!(max_distance_distortion(group.points(), &moved).unwrap() <= 1e-10);
    }

    #[test]
    fn point_files_roundtrip_bit_exactly(seed: u64, dim in 1usize..=16, label: u32, subject: u32, repetition: u32) {
        let mut r = rng(seed);
        let item = TrialPoint { point: random_point(&mut r, dim), label, subject, repetition };
        let back = decode_point(&encode_point(&item)).unwrap();
        prop_assert_eq!(back.label, label);
        prop_assert_eq!(back.subject, subject);
        prop_assert_eq!(back.repetition, repetition);
        prop_assert!(back.point.entries().iter().zip(item.point.entries().iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn channel_gain_does_not_change_the_point(seed: u64, c in 2usize..=6, gains in prop::collection::vec(0.01f64..100.0, 6)) {
        let mut r = rng(seed);
        let data = DMatrix::from_fn(c, 200, |_, _| normal(&mut r));
        let scaled = DMatrix::from_fn(c, 200, |i, t| data[(i, t)] * gains[i]);
        let cfg = CovarianceConfig::preset(2).unwrap();
        let a = trial_to_point(&ChannelTrial::new(data, 0, 0, 1).unwrap(), &cfg).unwrap();
        let b = trial_to_point(&ChannelTrial::new(scaled, 0, 0, 1).unwrap(), &cfg).unwrap();
        prop_assert!(a.point.approx_eq(&b.point, 1e-10));
    }

    #[test]
    fn zscored_covariance_has_unit_diagonal(seed: u64, c in 2usize..=8) {
        let mut r = rng(seed);
        let data = DMatrix::from_fn(c, 100, |_, _| 3.0 * normal(&mut r) + 1.0);
        let out = trial_to_point(&ChannelTrial::new(data, 0, 0, 1).unwrap(), &CovarianceConfig::preset(1).unwrap()).unwrap();
        let p = reconstruct(&out.point);
        prop_assert!((0..c).all(|i| (p.entries()[(i, i)] - 1.0).abs() <= 1e-10));
    }

    #[test]
    fn shrinkage_preserves_trace(seed: u64, dim in 2usize..=12, w in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let p = SpdMatrix::new(random_spd(&mut r, dim)).unwrap();
        let s = shrink(&p, w).unwrap();
        prop_assert!(close(s.entries().trace(), p.entries().trace(), 1e-14));
        if w > 0.0 {
            prop_assert!(cholesky(&s).is_ok());
        }
    }

    #[test]
    fn synthetic_sets_are_reproducible(seed: u64) {
        let cfg = SynthConfig {
            dim: 3, classes: 3, subjects: 2, trials_per_class: 4,
            class_separation: 1.0, dispersion: 0.2, subject_offset: 0.5, seed,
        };
        let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
        for (p, q) in a.points().iter().zip(b.points()) {
            prop_assert!(p.entries().iter().zip(q.entries().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        prop_assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn saved_models_predict_identically(seed: u64, dim in 2usize..=4) {
        let mut r = rng(seed);
        let set = labeled_set(&mut r, dim, 3, 3);
        let model = Model::Mdm(MdmModel::train(&set).unwrap());
        let back = Model::from_json(&model.to_json()).unwrap();
        prop_assert_eq!(&back, &model);
        for _ in 0..5 {
            let q = random_point(&mut r, dim);
            prop_assert_eq!(back.predict(&q).unwrap(), model.predict(&q).unwrap());
        }
    }
}
