//! Empirical verifiers behind the `verify` command.
//!
//! Each verifier returns a report with its measured margins and an overall
//! pass flag; printing is left to the caller.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use statrs::distribution::{ChiSquared as ChiSquaredCdf, ContinuousCDF};

use crate::bench::metrics::chi_square_tail_bound;
use crate::bench::objectives::{noisy_oracle, Objective};
use crate::engine::{run, TsConfig};
use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::hyperfit::{log_marginal_likelihood, lml_gradient};
use crate::kernel::{nystrom_feature_map, Domain, HyperParams};
use crate::posterior::{build_posterior, Dataset, Origin, PosteriorState};

/// The `(m, δ)` grid checked by [`verify_chisq`].
pub const CHISQ_GRID_M: [usize; 3] = [1, 5, 20];
pub const CHISQ_GRID_DELTA: [f64; 3] = [0.0, 1.0, 10.0];

/// Lemma-1 style ceiling on `λ_max(A/t)`: `ξλ̂₁ + (1-ξ)ζ² + 1`.
pub fn eigen_upper_bound(xi: f64, top_kernel_eigenvalue: f64, zeta: f64) -> f64 {
    xi * top_kernel_eigenvalue + (1.0 - xi) * zeta * zeta + 1.0
}

/// `exp(-½(δ + m - sqrt(2δm + m²)))`, the tail bound obtained from the
/// Laurent–Massart inequality `P(Z - m ≥ 2sqrt(mx) + 2x) ≤ e^{-x}`.
pub fn laurent_massart_tail_bound(m: usize, delta: f64) -> f64 {
    let m = m as f64;
    (-0.5 * (delta + m - (2.0 * delta * m + m * m).sqrt())).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChisqRow {
    pub m: usize,
    pub delta: f64,
    pub bound: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    /// `(bound - estimate) / std_error`.
    pub margin_se: f64,
    pub laurent_massart: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChisqReport {
    pub draws: usize,
    pub rows: Vec<ChisqRow>,
    pub pass: bool,
}

/// Monte Carlo estimate of `P(Z > m + δ)` against the closed-form bound on
/// the 3×3 grid. Passes iff every margin is at least −3 standard errors.
pub fn verify_chisq(draws: usize, seed: u64) -> Result<ChisqReport> {
    if draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let mut rows = Vec::new();
    for (i, &m) in CHISQ_GRID_M.iter().enumerate() {
        let dist = ChiSquared::new(m as f64).map_err(|e| Error::Numeric(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let zs: Vec<f64> = (0..draws).map(|_| dist.sample(&mut rng)).collect();
        for &delta in &CHISQ_GRID_DELTA {
            let thr = m as f64 + delta;
            let p = zs.iter().filter(|&&z| z > thr).count() as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt().max(1.0 / draws as f64);
            let bound = chi_square_tail_bound(m, delta)?;
            rows.push(ChisqRow {
                m,
                delta,
                bound,
                monte_carlo: p,
                std_error: se,
                margin_se: (bound - p) / se,
                laurent_massart: laurent_massart_tail_bound(m, delta),
            });
        }
    }
    let pass = rows.iter().all(|r| r.margin_se >= -3.0);
    Ok(ChisqReport { draws, rows, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub instances: usize,
    pub max_relative_error: f64,
    pub pass: bool,
}

/// Relative error used by the gradient check; components below `1e-3` in
/// magnitude are compared absolutely against that floor.
pub fn gradient_relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1e-3)
}

/// Random `(data, hyperparameters)` pair with `n ≤ 30` observations.
pub fn random_lml_instance<R: Rng + ?Sized>(rng: &mut R) -> (Dataset, HyperParams) {
    let d = rng.random_range(1..=2usize);
    let n = rng.random_range(2..=30usize);
    let dom = Domain::cube(0.0, 5.0, d).expect("valid box");
    let mut data = Dataset::new(dom.clone());
    for _ in 0..n {
        let x = dom.sample_uniform(rng);
        let y = x.iter().map(|v| (1.3 * v).sin()).sum::<f64>() + 0.2 * (rng.random::<f64>() - 0.5);
        data.push(x, y, Origin::UniformExplore).expect("in domain");
    }
    let log_u = |rng: &mut R, lo: f64, hi: f64| (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp();
    let zeta = log_u(rng, 0.5, 2.0);
    let ells = (0..d).map(|_| log_u(rng, 0.3, 3.0)).collect();
    let sigma = log_u(rng, 0.05, 1.0);
    (data, HyperParams::new(zeta, ells, sigma).expect("positive"))
}

/// Analytic log-marginal-likelihood gradient against central differences
/// (`h = 1e-5`) on random instances.
pub fn verify_gradient(instances: usize, seed: u64) -> Result<GradientReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (data, hp) = random_lml_instance(&mut rng);
        let g = lml_gradient(&data, &hp)?;
        let psi = hp.to_log_params();
        for j in 0..psi.len() {
            let mut up = psi.clone();
            let mut dn = psi.clone();
            up[j] += h;
            dn[j] -= h;
            let fu = log_marginal_likelihood(&data, &HyperParams::from_log_params(&up)?)?;
            let fd = log_marginal_likelihood(&data, &HyperParams::from_log_params(&dn)?)?;
            worst = worst.max(gradient_relative_error(g[j], (fu - fd) / (2.0 * h)));
        }
    }
    Ok(GradientReport { instances, max_relative_error: worst, pass: worst <= 1e-4 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorReport {
    pub instances: usize,
    pub max_mean_relative_error: f64,
    pub draws: usize,
    pub m_t: usize,
    pub ks_statistic: f64,
    pub ks_critical: f64,
    pub covariance_relative_error: f64,
    pub pass: bool,
}

/// Random posterior with `t ≤ 100` observations and `m_t ≤ 32` features.
pub fn random_posterior_instance<R: Rng + ?Sized>(rng: &mut R, t: usize, m_star: usize) -> Result<PosteriorState> {
    let dom = Domain::cube(0.0, 4.0, 1)?;
    let hp = HyperParams::isotropic(1.0 + rng.random::<f64>(), 0.3 + rng.random::<f64>(), 1, 0.1)?;
    let anchors: Vec<Vec<f64>> = (0..32).map(|_| dom.sample_uniform(rng)).collect();
    let map = nystrom_feature_map(&anchors, &hp, m_star)?;
    let mut data = Dataset::new(dom.clone());
    for _ in 0..t {
        let x = dom.sample_uniform(rng);
        let y = (2.0 * x[0]).cos() + 0.1 * (rng.random::<f64>() - 0.5);
        data.push(x, y, Origin::UniformExplore)?;
    }
    build_posterior(&data, &map, 0.05 + rng.random::<f64>())
}

/// Posterior mean against a dense normal-equations solve, then χ² and
/// covariance checks on `draws` posterior samples.
pub fn verify_posterior(draws: usize, seed: u64) -> Result<PosteriorReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = 50;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let t = rng.random_range(1..=100usize);
        let m_star = rng.random_range(1..=32usize);
        let st = random_posterior_instance(&mut rng, t, m_star)?;
        let phi = st.design();
        let y = DVector::from_column_slice(st.responses());
        let mut normal = phi.tr_mul(&phi);
        for i in 0..st.dim() {
            normal[(i, i)] += st.sigma() * st.sigma();
        }
        let rhs = phi.tr_mul(&y);
        let reference = normal.lu().solve(&rhs).ok_or_else(|| Error::Numeric("singular normal equations".into()))?;
        let err = (st.mean() - &reference).norm() / reference.norm().max(f64::MIN_POSITIVE);
        worst = worst.max(err);
    }

    let st = random_posterior_instance(&mut rng, 40, 8)?;
    let m = st.dim();
    let precision: DMatrix<f64> = st.a_matrix() / (st.sigma() * st.sigma());
    let mut d2: Vec<f64> = Vec::with_capacity(draws);
    let mut sum = DVector::zeros(m);
    let mut outer = DMatrix::zeros(m, m);
    for _ in 0..draws {
        let th = st.sample_theta(&mut rng);
        let c = &th - st.mean();
        d2.push(c.dot(&(&precision * &c)));
        sum += &c;
        outer.ger(1.0, &c, &c, 1.0);
    }
    let n = draws as f64;
    let mean_c = &sum / n;
    let emp_cov = (outer - &mean_c * mean_c.transpose() * n) / (n - 1.0);
    let cov = st.a_inverse() * (st.sigma() * st.sigma());
    let cov_err = (&emp_cov - &cov).norm() / cov.norm();
    let ks = ks_statistic_chi2(&mut d2, m)?;
    let ks_crit = 1.628 / n.sqrt();
    Ok(PosteriorReport {
        instances,
        max_mean_relative_error: worst,
        draws,
        m_t: m,
        ks_statistic: ks,
        ks_critical: ks_crit,
        covariance_relative_error: cov_err,
        pass: worst <= 1e-8 && ks <= ks_crit && cov_err <= 0.05,
    })
}

/// One-sample Kolmogorov–Smirnov statistic against `χ²_m`; sorts `sample`.
pub fn ks_statistic_chi2(sample: &mut [f64], m: usize) -> Result<f64> {
    let dist = ChiSquaredCdf::new(m as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    Ok(sample
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let c = dist.cdf(z);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max))
}

/// Observation count from which the eigenvalue floor is checked.
pub const EIGEN_BURN_IN: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenRow {
    pub stage: usize,
    pub n_obs: usize,
    pub lambda_min_over_t: f64,
    pub lambda_max_over_t: f64,
    pub upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenReport {
    pub rows: Vec<EigenRow>,
    /// Minimum of `λ_min(A/t)` over stages with `t ≥ 200`.
    pub min_lambda: f64,
    /// That minimum divided by `λ_min(A/t)` at the first stage with `t ≥ 200`.
    pub floor_ratio: f64,
    pub max_excess: f64,
    pub pass: bool,
}

/// Runs `cfg` on `obj` and checks `λ_min(A/t) > 0` for `t ≥ 200` and
/// `λ_max(A/t) ≤ ξλ̂₁ + (1-ξ)ζ̂² + 1 + 0.1` at every stage.
pub fn verify_eigen(cfg: &TsConfig, obj: &Objective, noise_seed: u64) -> Result<EigenReport> {
    let mut oracle = noisy_oracle(obj, ChaCha8Rng::seed_from_u64(noise_seed));
    let out = run(cfg, &mut oracle, obj.domain())?;
    let rows: Vec<EigenRow> = out
        .trace
        .stages
        .iter()
        .map(|s| EigenRow {
            stage: s.stage,
            n_obs: s.n_obs,
            lambda_min_over_t: s.lambda_min_over_t,
            lambda_max_over_t: s.lambda_max_over_t,
            upper_bound: eigen_upper_bound(cfg.xi, s.top_kernel_eigenvalue, s.hyper.zeta),
        })
        .collect();
    let late: Vec<&EigenRow> = rows.iter().filter(|r| r.n_obs >= EIGEN_BURN_IN).collect();
    let min_lambda = late.iter().map(|r| r.lambda_min_over_t).fold(f64::INFINITY, f64::min);
    let floor_ratio = late.first().map_or(f64::NAN, |r| min_lambda / r.lambda_min_over_t);
    let max_excess = rows
        .iter()
        .map(|r| r.lambda_max_over_t - r.upper_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EigenReport { pass: !late.is_empty() && min_lambda > 0.0 && max_excess <= 0.1, rows, min_lambda, floor_ratio, max_excess })
}
