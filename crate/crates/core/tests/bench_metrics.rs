use gpts::bench::metrics::{average_regret, delta_epsilon, error_series, ERROR_FLOOR};
use gpts::bench::{f1_objective, f2_objective, f_beta_objective, noisy_oracle, run_campaign};
use gpts::engine::{run, TsConfig};
use gpts::exec::Parallelism;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cheap() -> TsConfig {
    TsConfig { max_stages: 5, batch_size: 6, anchors: 64, candidates: 256, fit_points: 60, ..TsConfig::default() }
}

#[test]
fn regret_is_nonnegative_and_bounded() {
    for obj in [f1_objective().with_noise(0.5).unwrap(), f2_objective().with_noise(0.5).unwrap()] {
        let mut oracle = noisy_oracle(&obj, ChaCha8Rng::seed_from_u64(1));
        let out = run(&cheap(), &mut oracle, obj.domain()).unwrap();
        let r = average_regret(&out.trace, &obj);
        assert_eq!(r.len(), out.trace.chosen_points().count());
        // lower bound of f over a grid of the box bounds the regret from above
        let d = obj.dim();
        let n: usize = if d == 1 { 2001 } else { 201 };
        let mut min_f = f64::INFINITY;
        for i in 0..n.pow(d as u32) {
            let u: Vec<f64> = (0..d).map(|k| ((i / n.pow(k as u32)) % n) as f64 / (n - 1) as f64).collect();
            min_f = min_f.min(obj.evaluate(&obj.domain().from_unit(&u)));
        }
        let cap = obj.max_value() - min_f;
        assert!(r.iter().all(|v| *v >= 0.0 && *v <= cap + 1e-12), "{} regret out of [0, {cap}]", obj.name());
    }
}

#[test]
fn delta_epsilon_is_positive_for_every_objective() {
    let objs = [f1_objective(), f2_objective(), f_beta_objective(0.25).unwrap(), f_beta_objective(2.0).unwrap()];
    for obj in &objs {
        for eps in [0.05, 0.5, 2.0] {
            let d = delta_epsilon(obj, eps).unwrap();
            assert!(d > 0.0, "{} eps {eps}: {d}", obj.name());
        }
    }
}

#[test]
fn error_series_follows_mode_estimates() {
    let obj = f_beta_objective(1.0).unwrap().with_noise(0.1).unwrap();
    let mut oracle = noisy_oracle(&obj, ChaCha8Rng::seed_from_u64(2));
    let out = run(&cheap(), &mut oracle, obj.domain()).unwrap();
    let e = error_series(&out.trace, &obj).unwrap();
    assert_eq!(e.len(), out.trace.stages.len());
    for (v, s) in e.iter().zip(&out.trace.stages) {
        let rel = (s.mode_estimate[0] - 5.0).abs() / 5.0;
        let expect = if rel == 0.0 { ERROR_FLOOR } else { (2.0 * rel.log10()).max(ERROR_FLOOR) };
        assert!((v - expect).abs() <= 1e-12);
    }
}

#[test]
fn campaign_quartiles_are_ordered() {
    let obj = f1_objective().with_noise(1.0).unwrap();
    let c = run_campaign(&cheap(), &obj, 5, 3, Parallelism::Auto).unwrap();
    assert_eq!(c.replicas.len(), 5);
    assert!(c.quantiles.iter().all(|q| q.q25 <= q.q50 && q.q50 <= q.q75));
    assert_eq!(c.stages_to_threshold.len(), 5);
}
