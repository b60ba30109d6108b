use gpts::bench::{f1_objective, f2_objective, noisy_oracle};
use gpts::engine::{inner_argmax, run, ts_stage, EngineState, OracleError, TsConfig};
use gpts::exec::Parallelism;
use gpts::kernel::nystrom_feature_map;
use gpts::posterior::{posterior_predict, Origin};
use gpts::{Domain, Error, HyperParams};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn cheap(seed: u64) -> TsConfig {
    TsConfig {
        seed,
        anchors: 64,
        candidates: 256,
        fit_points: 60,
        fit_budget_cold: 60,
        fit_budget_warm: 15,
        ..TsConfig::default()
    }
}

#[test]
fn uniform_branch_fraction_matches_xi() {
    let obj = f1_objective().with_noise(0.1).unwrap();
    let cfg = TsConfig { max_stages: 100, stop_window: 1000, xi: 0.1, batch_size: 30, ..cheap(21) };
    let mut oracle = noisy_oracle(&obj, ChaCha8Rng::seed_from_u64(22));
    let out = run(&cfg, &mut oracle, obj.domain()).unwrap();
    assert_eq!(out.trace.stages.len(), 100);
    let origins: Vec<Origin> = out.trace.stages.iter().flat_map(|s| s.origins.iter().copied()).collect();
    assert_eq!(origins.len(), 3000);
    let frac = origins.iter().filter(|o| **o == Origin::UniformExplore).count() as f64 / 3000.0;
    assert!((0.07..=0.13).contains(&frac), "uniform fraction {frac}");
}

#[test]
fn xi_one_only_explores_uniformly() {
    let obj = f1_objective().with_noise(0.1).unwrap();
    let cfg = TsConfig { xi: 1.0, max_stages: 5, batch_size: 10, ..cheap(3) };
    let mut oracle = noisy_oracle(&obj, ChaCha8Rng::seed_from_u64(4));
    let out = run(&cfg, &mut oracle, obj.domain()).unwrap();
    assert!(out.trace.stages.iter().flat_map(|s| &s.origins).all(|o| *o == Origin::UniformExplore));
    assert!(out.trace.stages.iter().all(|s| s.argmax_point.is_none()));
}

#[test]
fn xi_zero_picks_the_argmax_of_the_sampled_function() {
    let obj = f1_objective().with_noise(0.1).unwrap();
    let cfg = TsConfig { xi: 0.0, batch_size: 1, ..cheap(5) };
    let mut oracle = noisy_oracle(&obj, ChaCha8Rng::seed_from_u64(6));
    let mut state = EngineState::new(&cfg, obj.domain()).unwrap();
    state.seed_point(&mut oracle).unwrap();
    for _ in 0..3 {
        let mut probe = state.clone();
        probe.prepare_stage(&cfg).unwrap();
        let seed = probe.slot_seeds(1)[0];
        let p = probe.propose(&cfg, seed).unwrap();
        assert_eq!(p.origin, Origin::PosteriorSample);
        let theta = p.theta.clone().unwrap();
        let direct = probe.search().unwrap().argmax(probe.feature_map().unwrap(), &theta);
        assert_eq!(p.x, direct);

        let rec = ts_stage(&mut state, &cfg, &mut oracle).unwrap();
        assert_eq!(rec.points, vec![p.x.clone()]);
        assert_eq!(rec.argmax_point.as_ref(), Some(&p.x));
    }
}

#[test]
fn predictive_variance_never_grows_between_refits() {
    let obj = f1_objective().with_noise(0.1).unwrap();
    let cfg = TsConfig { refit_every_stage_until: 1, refit_period: 1000, batch_size: 5, ..cheap(7) };
    let mut oracle = noisy_oracle(&obj, ChaCha8Rng::seed_from_u64(8));
    let mut state = EngineState::new(&cfg, obj.domain()).unwrap();
    state.seed_point(&mut oracle).unwrap();
    let probes = [[0.5], [5.0], [9.7]];
    let mut last: Option<Vec<f64>> = None;
    for stage in 1..=20 {
        let rec = ts_stage(&mut state, &cfg, &mut oracle).unwrap();
        assert_eq!(rec.refit, stage == 1);
        let (map, post) = (state.feature_map().unwrap(), state.posterior().unwrap());
        let vars: Vec<f64> = probes.iter().map(|x| posterior_predict(post, map, x).unwrap().1).collect();
        if let Some(prev) = &last {
            for (v, p) in vars.iter().zip(prev) {
                assert!(*v <= p + 1e-9, "stage {stage}: {v} > {p}");
            }
        }
        last = Some(vars);
    }
}

#[test]
fn inner_argmax_beats_dense_random_search() {
    let dom = Domain::cube(0.0, 10.0, 1).unwrap();
    let hp = HyperParams::isotropic(1.0, 0.8, 1, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let anchors: Vec<Vec<f64>> = (0..80).map(|_| dom.sample_uniform(&mut rng)).collect();
    let map = nystrom_feature_map(&anchors, &hp, 256).unwrap();
    for _ in 0..3 {
        let theta = DVector::from_fn(map.len(), |_, _| StandardNormal.sample(&mut rng));
        let x = inner_argmax(&map, &theta, &dom, &mut rng);
        assert!(dom.contains(&x));
        let g = map.features(&x).dot(&theta);
        let best = (0..100_000)
            .map(|_| map.features(&dom.sample_uniform(&mut rng)).dot(&theta))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(g >= best - 1e-6, "{g} < {best}");
    }
}

#[test]
fn inner_argmax_in_two_dimensions() {
    let dom = Domain::new(vec![-1.0, 0.0], vec![2.0, 5.0]).unwrap();
    let hp = HyperParams::new(1.0, vec![0.6, 1.2], 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let anchors: Vec<Vec<f64>> = (0..100).map(|_| dom.sample_uniform(&mut rng)).collect();
    let map = nystrom_feature_map(&anchors, &hp, 256).unwrap();
    let theta = DVector::from_fn(map.len(), |_, _| StandardNormal.sample(&mut rng));
    let x = inner_argmax(&map, &theta, &dom, &mut rng);
    let g = map.features(&x).dot(&theta);
    let best = (0..100_000)
        .map(|_| map.features(&dom.sample_uniform(&mut rng)).dot(&theta))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(g >= best - 1e-6, "{g} < {best}");
}

#[test]
fn runs_are_deterministic_under_any_batch_schedule() {
    let obj = f2_objective().with_noise(0.5).unwrap();
    let base = TsConfig { max_stages: 4, batch_size: 8, ..cheap(13) };
    let mut traces = Vec::new();
    for par in [Parallelism::Sequential, Parallelism::Sequential, Parallelism::Threads(3), Parallelism::Auto] {
        let cfg = TsConfig { parallelism: par, ..base.clone() };
        let mut oracle = noisy_oracle(&obj, ChaCha8Rng::seed_from_u64(14));
        traces.push(run(&cfg, &mut oracle, obj.domain()).unwrap());
    }
    for t in &traces[1..] {
        assert_eq!(t, &traces[0]);
    }
}

#[test]
fn trace_invariants() {
    let obj = f2_objective().with_noise(0.5).unwrap();
    let cfg = TsConfig { max_stages: 6, batch_size: 7, ..cheap(15) };
    let mut oracle = noisy_oracle(&obj, ChaCha8Rng::seed_from_u64(16));
    let out = run(&cfg, &mut oracle, obj.domain()).unwrap();
    for (i, s) in out.trace.stages.iter().enumerate() {
        assert_eq!(s.stage, i + 1);
        assert_eq!(s.points.len(), 7);
        assert_eq!(s.n_obs, 1 + 7 * (i + 1));
        assert!(s.points.iter().all(|x| obj.domain().contains(x)));
        assert!(obj.domain().contains(&s.mode_estimate));
        assert!(s.lambda_min_over_t > 0.0 && s.lambda_min_over_t <= s.lambda_max_over_t);
    }
    assert!(obj.domain().contains(&out.estimate));
}

#[test]
fn single_stage_budget() {
    let obj = f1_objective();
    let cfg = TsConfig { max_stages: 1, ..cheap(17) };
    let mut oracle = noisy_oracle(&obj, ChaCha8Rng::seed_from_u64(18));
    let out = run(&cfg, &mut oracle, obj.domain()).unwrap();
    assert_eq!(out.trace.stages.len(), 1);
    assert!(!out.stopped);
}

#[test]
fn oracle_failures_carry_the_stage() {
    let obj = f1_objective();
    let cfg = TsConfig { max_stages: 5, batch_size: 3, ..cheap(19) };
    let mut calls = 0;
    let mut oracle = |x: &[f64]| -> Result<f64, OracleError> {
        calls += 1;
        if calls > 5 {
            Err(OracleError("sensor offline".into()))
        } else {
            Ok(obj.evaluate(x))
        }
    };
    match run(&cfg, &mut oracle, obj.domain()) {
        Err(Error::Oracle { stage, message }) => {
            assert_eq!(stage, 2);
            assert!(message.contains("sensor offline"));
        }
        other => panic!("expected oracle error, got {other:?}"),
    }
}
