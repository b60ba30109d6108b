use gpts::kernel::{nystrom_feature_map, EigenFunctions, FeatureMap};
use gpts::posterior::{build_posterior, posterior_predict, sample_theta, Dataset, Origin};
use gpts::{Domain, HyperParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn data_on(dom: &Domain, xs: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> Dataset {
    let mut d = Dataset::new(dom.clone());
    for x in xs {
        d.push(x.clone(), f(x), Origin::PosteriorSample).unwrap();
    }
    d
}

/// Ridge solution through the normal equations and an LU solve.
fn ridge_oracle(phi: &DMatrix<f64>, y: &DVector<f64>, sigma: f64) -> DVector<f64> {
    let mut a = phi.transpose() * phi;
    for i in 0..a.nrows() {
        a[(i, i)] += sigma * sigma;
    }
    a.lu().solve(&(phi.transpose() * y)).unwrap()
}

fn eight_feature_state(seed: u64) -> (FeatureMap, Dataset, gpts::posterior::PosteriorState) {
    let dom = Domain::cube(0.0, 4.0, 1).unwrap();
    let hp = HyperParams::isotropic(1.0, 0.8, 1, 0.1).unwrap();
    let anchors: Vec<Vec<f64>> = (0..16).map(|i| vec![4.0 * i as f64 / 15.0]).collect();
    let map = nystrom_feature_map(&anchors, &hp, 8).unwrap();
    assert_eq!(map.len(), 8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..50).map(|_| dom.sample_uniform(&mut rng)).collect();
    let data = data_on(&dom, &xs, |x| (1.7 * x[0]).sin());
    let st = build_posterior(&data, &map, 0.3).unwrap();
    (map, data, st)
}

#[test]
fn fifty_points_match_normal_equations() {
    let (map, data, st) = eight_feature_state(1);
    let phi = map.feature_matrix(&data.points());
    assert!((st.design() - &phi).abs().max() <= 1e-12);
    let y = DVector::from_column_slice(st.responses());
    let oracle = ridge_oracle(&phi, &y, 0.3);
    assert!((st.mean() - &oracle).norm() / oracle.norm() <= 1e-8);
    let resid = st.a_matrix() * st.mean() - phi.transpose() * &y;
    assert!(resid.norm() / st.phi_t_y().norm() <= 1e-8);
}

#[test]
fn draw_moments_match_the_posterior() {
    let (_, _, st) = eight_feature_state(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let m = st.dim();
    let mut sum = DVector::zeros(m);
    let mut outer = DMatrix::zeros(m, m);
    for _ in 0..n {
        let th = sample_theta(&st, &mut rng);
        let c = th - st.mean();
        sum += &c;
        outer += &c * c.transpose();
    }
    let nf = n as f64;
    let mean_c = &sum / nf;
    let cov = (outer - &mean_c * mean_c.transpose() * nf) / (nf - 1.0);
    let target = st.a_inverse() * st.sigma().powi(2);
    for i in 0..m {
        let se = (target[(i, i)] / nf).sqrt();
        assert!(mean_c[i].abs() <= 4.0 * se, "component {i}: {} vs se {se}", mean_c[i]);
    }
    let rel = (&cov - &target).norm() / target.norm();
    assert!(rel <= 0.05, "covariance error {rel}");
}

#[test]
fn noiseless_data_in_the_span_is_interpolated() {
    let dom = Domain::cube(-1.0, 1.0, 1).unwrap();
    let f: EigenFunctions = Arc::new(|x: &[f64], out: &mut [f64]| {
        out[0] = 1.0;
        out[1] = x[0];
        out[2] = x[0] * x[0];
        out[3] = x[0].powi(3);
    });
    let map = FeatureMap::analytic(1, vec![1.0; 4], f).unwrap();
    let theta = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.7]);
    let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![-1.0 + 2.0 * i as f64 / 29.0]).collect();
    let data = data_on(&dom, &xs, |x| map.features(x).dot(&theta));
    let st = build_posterior(&data, &map, 1e-4).unwrap();
    for row in data.rows() {
        let (mean, var) = posterior_predict(&st, &map, &row.x).unwrap();
        assert!((mean - row.y).abs() <= 1e-2, "at {:?}: {mean} vs {}", row.x, row.y);
        assert!(var >= 0.0);
    }
}

#[test]
fn empty_posterior_predicts_prior_variance() {
    let dom = Domain::cube(0.0, 1.0, 1).unwrap();
    let hp = HyperParams::isotropic(1.0, 0.3, 1, 0.1).unwrap();
    let anchors: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
    let map = nystrom_feature_map(&anchors, &hp, 10).unwrap();
    let st = build_posterior(&Dataset::new(dom), &map, 0.7).unwrap();
    for x in [0.0, 0.33, 1.0] {
        let (mean, var) = posterior_predict(&st, &map, &[x]).unwrap();
        assert_eq!(mean, 0.0);
        assert!((var - map.features(&[x]).norm_squared()).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ridge_identity_and_eigen_floor(seed in any::<u64>(), t in 0usize..60, m_star in 1usize..16, sigma in 0.01f64..3.0) {
        let dom = Domain::cube(0.0, 3.0, 1).unwrap();
        let hp = HyperParams::isotropic(1.0, 0.5, 1, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchors: Vec<Vec<f64>> = (0..16).map(|_| dom.sample_uniform(&mut rng)).collect();
        let map = nystrom_feature_map(&anchors, &hp, m_star).unwrap();
        let xs: Vec<Vec<f64>> = (0..t).map(|_| dom.sample_uniform(&mut rng)).collect();
        let noise: Vec<f64> = (0..t).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut data = Dataset::new(dom.clone());
        for (x, e) in xs.iter().zip(&noise) {
            data.push(x.clone(), x[0].cos() + e, Origin::UniformExplore).unwrap();
        }
        let st = build_posterior(&data, &map, sigma).unwrap();
        let lhs = st.a_matrix() * st.mean();
        let denom = st.phi_t_y().norm();
        if denom > 0.0 {
            prop_assert!((lhs - st.phi_t_y()).norm() / denom <= 1e-8);
        } else {
            prop_assert!(st.mean().norm() == 0.0);
        }
        let min = st.a_matrix().symmetric_eigenvalues().min();
        prop_assert!(min >= sigma * sigma * (1.0 - 1e-9));
    }
}
