//! MAP estimation of `(ζ, ℓ₁..ℓ_d, σ)` from the GP log marginal likelihood.
//!
//! All optimisation happens over log-parameters
//! `ψ = (log ζ, log ℓ₁, …, log ℓ_d, log σ)`; the prior is an independent
//! normal on each component of `ψ`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernel::{gram_matrix, HyperParams, DEFAULT_JITTER_REL};
use crate::posterior::Dataset;

/// Stationarity tolerance on the gradient norm.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

/// Default prior standard deviation on every log-hyperparameter.
pub const DEFAULT_PRIOR_SD: f64 = 1.5;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Independent normal priors on the log-hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub log_normal_means: Vec<f64>,
    pub log_normal_sds: Vec<f64>,
}

impl PriorSpec {
    pub fn new(log_normal_means: Vec<f64>, log_normal_sds: Vec<f64>) -> Result<Self> {
        if log_normal_means.len() != log_normal_sds.len() || log_normal_means.len() < 3 {
            return Err(Error::invalid(format!(
                "prior needs matching mean/sd vectors of length d + 2 >= 3, got {} and {}",
                log_normal_means.len(),
                log_normal_sds.len()
            )));
        }
        if log_normal_sds.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("prior standard deviations must be positive"));
        }
        if log_normal_means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("prior means must be finite"));
        }
        Ok(PriorSpec { log_normal_means, log_normal_sds })
    }

    /// Mean 0, sd 1.5 on each of the `d + 2` log-hyperparameters.
    pub fn weakly_informative(dim: usize) -> Self {
        PriorSpec { log_normal_means: vec![0.0; dim + 2], log_normal_sds: vec![DEFAULT_PRIOR_SD; dim + 2] }
    }

    /// Prior centred on `hp` with a common sd.
    pub fn centered_on(hp: &HyperParams, sd: f64) -> Result<Self> {
        let means = hp.to_log_params();
        let n = means.len();
        Self::new(means, vec![sd; n])
    }

    pub fn len(&self) -> usize {
        self.log_normal_means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_normal_means.is_empty()
    }

    pub fn log_density(&self, psi: &[f64]) -> f64 {
        let ln_sqrt_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        psi.iter()
            .zip(self.log_normal_means.iter().zip(&self.log_normal_sds))
            .map(|(p, (m, s))| {
                let z = (p - m) / s;
                -0.5 * z * z - s.ln() - ln_sqrt_2pi
            })
            .sum()
    }

    pub fn log_density_gradient(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter()
            .zip(self.log_normal_means.iter().zip(&self.log_normal_sds))
            .map(|(p, (m, s))| -(p - m) / (s * s))
            .collect()
    }
}

/// Outcome of [`map_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub estimate: HyperParams,
    pub final_objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Factorized {
    chol: Cholesky<f64, Dyn>,
    /// Kernel part of the covariance, without noise or jitter.
    kernel: DMatrix<f64>,
}

fn factorize(points: &[Vec<f64>], hp: &HyperParams) -> Result<Factorized> {
    let kernel = gram_matrix(points, hp, 0.0)?;
    let n = kernel.nrows();
    let noise = hp.noise_sigma * hp.noise_sigma;
    let mut jitter = 0.0;
    for attempt in 0..8 {
        let mut ky = kernel.clone();
        for i in 0..n {
            ky[(i, i)] += noise + jitter;
        }
        if let Some(chol) = Cholesky::new(ky) {
            return Ok(Factorized { chol, kernel });
        }
        jitter = DEFAULT_JITTER_REL * hp.signal_variance() * 10f64.powi(attempt);
    }
    Err(Error::Numeric(format!("Cholesky of K + σ²I failed after jitter escalation (n = {n})")))
}

fn check_data(data: &Dataset, hp: &HyperParams) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("marginal likelihood needs at least one observation"));
    }
    hp.validate()?;
    if hp.dim() != data.domain().dim() {
        return Err(Error::invalid(format!(
            "hyperparameters are {}-d, data is {}-d",
            hp.dim(),
            data.domain().dim()
        )));
    }
    Ok(())
}

fn lml_value(f: &Factorized, y: &DVector<f64>) -> f64 {
    let l = f.chol.l_dirty();
    let log_det: f64 = 2.0 * (0..y.len()).map(|i| l[(i, i)].ln()).sum::<f64>();
    let alpha = f.chol.solve(y);
    -0.5 * log_det - 0.5 * y.dot(&alpha)
}

fn lml_grad(f: &Factorized, y: &DVector<f64>, points: &[Vec<f64>], hp: &HyperParams) -> Vec<f64> {
    let n = y.len();
    let d = hp.dim();
    let alpha = f.chol.solve(y);
    // W = ααᵀ - K_y⁻¹; ∂L/∂ψ = ½ tr(W ∂K_y/∂ψ)
    let mut w = f.chol.inverse();
    w.neg_mut();
    w.ger(1.0, &alpha, &alpha, 1.0);
    let inv_ls2: Vec<f64> = hp.length_scales.iter().map(|l| 1.0 / (l * l)).collect();
    let mut g = vec![0.0; d + 2];
    let mut trace_w = 0.0;
    for a in 0..n {
        trace_w += w[(a, a)];
        g[0] += w[(a, a)] * f.kernel[(a, a)];
        for b in 0..a {
            let wk = 2.0 * w[(a, b)] * f.kernel[(a, b)];
            g[0] += wk;
            for i in 0..d {
                let diff = points[a][i] - points[b][i];
                g[1 + i] += wk * diff * diff * inv_ls2[i];
            }
        }
    }
    // g[0] already equals ½ tr(W·2K); the length-scale sums double-count pairs
    for gi in g.iter_mut().take(d + 1).skip(1) {
        *gi *= 0.5;
    }
    g[d + 1] = hp.noise_sigma * hp.noise_sigma * trace_w;
    g
}

/// `-½ log|K + σ²I| - ½ yᵀ(K + σ²I)⁻¹y`, without the additive constant.
pub fn log_marginal_likelihood(data: &Dataset, hp: &HyperParams) -> Result<f64> {
    check_data(data, hp)?;
    let points = data.points();
    let y = DVector::from_vec(data.responses());
    Ok(lml_value(&factorize(&points, hp)?, &y))
}

/// Gradient of [`log_marginal_likelihood`] with respect to
/// `(log ζ, log ℓ₁, …, log ℓ_d, log σ)`.
pub fn lml_gradient(data: &Dataset, hp: &HyperParams) -> Result<Vec<f64>> {
    check_data(data, hp)?;
    let points = data.points();
    let y = DVector::from_vec(data.responses());
    let f = factorize(&points, hp)?;
    Ok(lml_grad(&f, &y, &points, hp))
}

/// Log marginal likelihood plus log prior, the quantity [`map_estimate`] maximizes.
pub fn log_posterior(data: &Dataset, prior: &PriorSpec, hp: &HyperParams) -> Result<f64> {
    check_prior(prior, hp)?;
    Ok(log_marginal_likelihood(data, hp)? + prior.log_density(&hp.to_log_params()))
}

fn check_prior(prior: &PriorSpec, hp: &HyperParams) -> Result<()> {
    if prior.len() != hp.dim() + 2 {
        return Err(Error::invalid(format!(
            "prior has {} components, hyperparameters need {}",
            prior.len(),
            hp.dim() + 2
        )));
    }
    Ok(())
}

struct Objective<'a> {
    points: Vec<Vec<f64>>,
    y: DVector<f64>,
    prior: &'a PriorSpec,
}

impl Objective<'_> {
    fn value(&self, psi: &[f64]) -> Option<f64> {
        let hp = HyperParams::from_log_params(psi).ok()?;
        let f = factorize(&self.points, &hp).ok()?;
        let v = lml_value(&f, &self.y) + self.prior.log_density(psi);
        v.is_finite().then_some(v)
    }

    fn value_and_grad(&self, psi: &[f64]) -> Option<(f64, Vec<f64>)> {
        let hp = HyperParams::from_log_params(psi).ok()?;
        let f = factorize(&self.points, &hp).ok()?;
        let v = lml_value(&f, &self.y) + self.prior.log_density(psi);
        let mut g = lml_grad(&f, &self.y, &self.points, &hp);
        for (gi, pi) in g.iter_mut().zip(self.prior.log_density_gradient(psi)) {
            *gi += pi;
        }
        (v.is_finite() && g.iter().all(|x| x.is_finite())).then_some((v, g))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gradient ascent with Armijo backtracking on the log posterior.
///
/// Trial step lengths come from the Barzilai–Borwein rule; every accepted
/// step satisfies the sufficient-increase condition, so the objective is
/// non-decreasing along the path. Stops when the gradient norm drops to
/// [`GRADIENT_TOLERANCE`] or after `budget` accepted steps.
pub fn map_estimate(data: &Dataset, prior: &PriorSpec, init: &HyperParams, budget: usize) -> Result<FitReport> {
    check_data(data, init)?;
    check_prior(prior, init)?;
    let obj = Objective { points: data.points(), y: DVector::from_vec(data.responses()), prior };
    let mut psi = init.to_log_params();
    let (mut value, mut grad) = obj
        .value_and_grad(&psi)
        .ok_or_else(|| Error::Numeric("objective is not finite at the initial hyperparameters".into()))?;
    let mut gnorm = norm(&grad);
    let mut step = (0.1 / gnorm.max(1e-12)).min(1.0);
    let mut iterations = 0;
    let mut converged = gnorm <= GRADIENT_TOLERANCE;

    while !converged && iterations < budget {
        let g2 = gnorm * gnorm;
        let mut s = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = psi.iter().zip(&grad).map(|(p, g)| p + s * g).collect();
            if let Some(v) = obj.value(&trial) {
                if v >= value + ARMIJO_C * s * g2 {
                    accepted = Some(trial);
                    break;
                }
            }
            s *= 0.5;
        }
        let Some(next) = accepted else { break };
        let Some((next_value, next_grad)) = obj.value_and_grad(&next) else { break };
        iterations += 1;

        let sk: Vec<f64> = next.iter().zip(&psi).map(|(a, b)| a - b).collect();
        let yk: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = sk.iter().zip(&yk).map(|(a, b)| a * b).sum();
        let ss: f64 = sk.iter().map(|a| a * a).sum();
        // ascent on a locally concave objective has sᵀy < 0
        step = if sy < 0.0 { (ss / -sy).clamp(1e-10, 1e4) } else { (2.0 * s).min(1e4) };

        psi = next;
        value = next_value;
        grad = next_grad;
        gnorm = norm(&grad);
        converged = gnorm <= GRADIENT_TOLERANCE;
    }

    Ok(FitReport {
        estimate: HyperParams::from_log_params(&psi)?,
        final_objective: value,
        gradient_norm: gnorm,
        iterations,
        converged,
    })
}

/// Data-driven starting point: `ζ = sd(y)`, `ℓᵢ = widthᵢ/4`, `σ = 0.1·sd(y)`.
///
/// When the responses have no spread (a single observation, say) the scale
/// falls back to `max(|ȳ|, 1)`.
pub fn cold_start(data: &Dataset) -> HyperParams {
    let y = data.responses();
    let n = y.len().max(1) as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let scale = if sd > 1e-8 { sd } else { mean.abs().max(1.0) };
    let ells = data.domain().widths().iter().map(|w| w / 4.0).collect();
    HyperParams { zeta: scale, length_scales: ells, noise_sigma: 0.1 * scale }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Domain;
    use crate::posterior::Origin;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_point(y: f64) -> Dataset {
        let mut d = Dataset::new(Domain::cube(0.0, 1.0, 1).unwrap());
        d.push(vec![0.5], y, Origin::UniformExplore).unwrap();
        d
    }

    fn random_data(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Dataset {
        let dom = Domain::cube(0.0, 3.0, dim).unwrap();
        let mut d = Dataset::new(dom.clone());
        for _ in 0..n {
            let x = dom.sample_uniform(rng);
            let y = x.iter().map(|v| v.sin()).sum::<f64>() + 0.1 * rng.random::<f64>();
            d.push(x, y, Origin::UniformExplore).unwrap();
        }
        d
    }

    #[test]
    fn scalar_values() {
        let hp = HyperParams::isotropic(1.0, 1.0, 1, 1.0).unwrap();
        let v0 = log_marginal_likelihood(&one_point(0.0), &hp).unwrap();
        assert_relative_eq!(v0, -0.5 * 2f64.ln(), epsilon = 1e-15);
        assert!((v0 + 0.3465736).abs() < 1e-7);
        let v1 = log_marginal_likelihood(&one_point(1.0), &hp).unwrap();
        assert_relative_eq!(v1, -0.5 * 2f64.ln() - 0.25, epsilon = 1e-15);
        assert!((v1 + 0.5965736).abs() < 1e-7);
    }

    #[test]
    fn empty_data_is_rejected() {
        let d = Dataset::new(Domain::cube(0.0, 1.0, 1).unwrap());
        let hp = HyperParams::isotropic(1.0, 1.0, 1, 1.0).unwrap();
        assert!(log_marginal_likelihood(&d, &hp).is_err());
        assert!(lml_gradient(&d, &hp).is_err());
    }

    #[test]
    fn zero_responses_leave_only_log_det_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut d = Dataset::new(Domain::cube(0.0, 3.0, 1).unwrap());
        for _ in 0..8 {
            d.push(vec![rng.random::<f64>() * 3.0], 0.0, Origin::UniformExplore).unwrap();
        }
        let hp = HyperParams::isotropic(1.2, 0.7, 1, 0.3).unwrap();
        let g = lml_gradient(&d, &hp).unwrap();
        // -½ tr(K_y⁻¹ ∂K_y) computed directly
        let pts = d.points();
        let k = gram_matrix(&pts, &hp, 0.0).unwrap();
        let mut ky = k.clone();
        for i in 0..8 {
            ky[(i, i)] += 0.09;
        }
        let inv = ky.try_inverse().unwrap();
        let dz = &k * 2.0;
        let expect_z = -0.5 * (&inv * dz).trace();
        let expect_s = -0.5 * (inv * 0.18).trace();
        assert_relative_eq!(g[0], expect_z, max_relative = 1e-10);
        assert_relative_eq!(g[2], expect_s, max_relative = 1e-10);
    }

    #[test]
    fn gradient_agrees_with_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for dim in 1..=2 {
            let d = random_data(12, dim, &mut rng);
            let hp = HyperParams::new(1.1, vec![0.8; dim], 0.2).unwrap();
            let g = lml_gradient(&d, &hp).unwrap();
            let psi = hp.to_log_params();
            let h = 1e-5;
            for j in 0..psi.len() {
                let mut up = psi.clone();
                let mut dn = psi.clone();
                up[j] += h;
                dn[j] -= h;
                let fu = log_marginal_likelihood(&d, &HyperParams::from_log_params(&up).unwrap()).unwrap();
                let fd = log_marginal_likelihood(&d, &HyperParams::from_log_params(&dn).unwrap()).unwrap();
                let fdv = (fu - fd) / (2.0 * h);
                assert!((g[j] - fdv).abs() <= 1e-4 * fdv.abs().max(1e-3), "dim {dim} j {j}: {} vs {fdv}", g[j]);
            }
        }
    }

    #[test]
    fn sharp_prior_dominates() {
        let hp0 = HyperParams::isotropic(1.5, 0.6, 1, 0.2).unwrap();
        let prior = PriorSpec::centered_on(&hp0, 1e-3).unwrap();
        let rep = map_estimate(&one_point(0.7), &prior, &HyperParams::isotropic(1.0, 1.0, 1, 1.0).unwrap(), 500)
            .unwrap();
        assert!((rep.estimate.zeta / 1.5 - 1.0).abs() < 0.01);
        assert!((rep.estimate.length_scales[0] / 0.6 - 1.0).abs() < 0.01);
        assert!((rep.estimate.noise_sigma / 0.2 - 1.0).abs() < 0.01);
    }

    #[test]
    fn optimizer_is_monotone_and_reaches_stationarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_data(25, 1, &mut rng);
        let prior = PriorSpec::weakly_informative(1);
        let init = cold_start(&d);
        let start = log_posterior(&d, &prior, &init).unwrap();
        let rep = map_estimate(&d, &prior, &init, 2000).unwrap();
        assert!(rep.final_objective >= start);
        assert!(rep.converged, "{rep:?}");
        assert!(rep.gradient_norm <= GRADIENT_TOLERANCE);
        // the analytic gradient (plus prior) vanishes at the returned point
        let mut g = lml_gradient(&d, &rep.estimate).unwrap();
        for (gi, pi) in g.iter_mut().zip(prior.log_density_gradient(&rep.estimate.to_log_params())) {
            *gi += pi;
        }
        assert!(norm(&g) <= GRADIENT_TOLERANCE);
    }

    #[test]
    fn objective_never_decreases_along_budgeted_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_data(20, 2, &mut rng);
        let prior = PriorSpec::weakly_informative(2);
        let init = cold_start(&d);
        let mut last = log_posterior(&d, &prior, &init).unwrap();
        for budget in 1..15 {
            let rep = map_estimate(&d, &prior, &init, budget).unwrap();
            assert!(rep.final_objective >= last - 1e-12);
            last = rep.final_objective;
        }
    }

    #[test]
    fn prior_dimension_mismatch_is_rejected() {
        let d = one_point(1.0);
        let hp = HyperParams::isotropic(1.0, 1.0, 1, 1.0).unwrap();
        let prior = PriorSpec::weakly_informative(2);
        assert!(map_estimate(&d, &prior, &hp, 10).is_err());
        assert!(PriorSpec::new(vec![0.0; 3], vec![1.0; 4]).is_err());
        assert!(PriorSpec::new(vec![0.0; 3], vec![1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn cold_start_handles_constant_responses() {
        let hp = cold_start(&one_point(-3.0));
        assert_eq!(hp.zeta, 3.0);
        assert_relative_eq!(hp.noise_sigma, 0.3, epsilon = 1e-15);
        assert_eq!(hp.length_scales, vec![0.25]);
    }
}
