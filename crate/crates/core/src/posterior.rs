//! Gaussian posterior over feature weights.
//!
//! With `f(x) = φ(x)ᵀθ`, `θ ~ N(0, I)` and Gaussian noise of scale `σ`, the
//! posterior is `N(A⁻¹Φᵀy, σ²A⁻¹)` where `A = ΦᵀΦ + σ²I`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{Domain, FeatureMap};

/// How a point was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    UniformExplore,
    PosteriorSample,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::UniformExplore => "uniform",
            Origin::PosteriorSample => "posterior",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vec<f64>,
    pub y: f64,
    pub origin: Origin,
}

/// Append-only observation history over a fixed domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    domain: Domain,
    rows: Vec<Observation>,
}

impl Dataset {
    pub fn new(domain: Domain) -> Self {
        Dataset { domain, rows: Vec::new() }
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64, origin: Origin) -> Result<()> {
        self.domain.check_point(&x)?;
        if !y.is_finite() {
            return Err(Error::invalid(format!("observation at {x:?} is not finite: {y}")));
        }
        self.rows.push(Observation { x, y, origin });
        Ok(())
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.x.clone()).collect()
    }

    pub fn responses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y).collect()
    }
}

/// Posterior of the feature weights given a dataset and a fixed feature map.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    domain: Domain,
    m: usize,
    /// t×m design, row-major.
    design: Vec<f64>,
    responses: Vec<f64>,
    phi_t_y: DVector<f64>,
    factor: Cholesky<f64, Dyn>,
    mean: DVector<f64>,
    sigma: f64,
}

/// Factorizes `A = ΦᵀΦ + σ²I` for the dataset under `map`.
pub fn build_posterior(data: &Dataset, map: &FeatureMap, sigma: f64) -> Result<PosteriorState> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if map.dim() != data.domain().dim() {
        return Err(Error::invalid(format!(
            "feature map expects {}-d inputs, data is {}-d",
            map.dim(),
            data.domain().dim()
        )));
    }
    let m = map.len();
    let phi = map.feature_matrix(&data.points());
    let y = DVector::from_vec(data.responses());
    let mut a = phi.tr_mul(&phi);
    for i in 0..m {
        a[(i, i)] += sigma * sigma;
    }
    let factor = Cholesky::new(a).ok_or_else(|| {
        Error::Numeric(format!(
            "Cholesky of ΦᵀΦ + σ²I failed (t = {}, m = {m}, σ = {sigma})",
            data.len()
        ))
    })?;
    let phi_t_y = phi.tr_mul(&y);
    let mean = factor.solve(&phi_t_y);
    let mut design = Vec::with_capacity(phi.len());
    for r in 0..phi.nrows() {
        design.extend(phi.row(r).iter());
    }
    Ok(PosteriorState {
        domain: data.domain().clone(),
        m,
        design,
        responses: y.as_slice().to_vec(),
        phi_t_y,
        factor,
        mean,
        sigma,
    })
}

impl PosteriorState {
    /// Appends one observation with features `phi_x` by a rank-one update of
    /// the Cholesky factor.
    pub fn push_observation(&mut self, phi_x: &DVector<f64>, y: f64) -> Result<()> {
        if phi_x.len() != self.m {
            return Err(Error::invalid(format!("feature vector has length {}, expected {}", phi_x.len(), self.m)));
        }
        self.factor.rank_one_update(phi_x, 1.0);
        self.phi_t_y.axpy(y, phi_x, 1.0);
        self.mean = self.factor.solve(&self.phi_t_y);
        self.design.extend(phi_x.iter());
        self.responses.push(y);
        Ok(())
    }

    /// Persistent variant of [`push_observation`](Self::push_observation).
    pub fn with_observation(&self, phi_x: &DVector<f64>, y: f64) -> Result<Self> {
        let mut next = self.clone();
        next.push_observation(phi_x, y)?;
        Ok(next)
    }

    /// Number of features `m_t`.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Number of observations `t`.
    pub fn n_obs(&self) -> usize {
        self.responses.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// `Φ`, one row per observation.
    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_obs(), self.m, &self.design)
    }

    /// Lower Cholesky factor `L` with `A = LLᵀ`.
    pub fn factor_l(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    /// `A = ΦᵀΦ + σ²I`, reassembled from the factor.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        let l = self.factor.l();
        &l * l.transpose()
    }

    pub fn a_inverse(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    /// `Φᵀy`.
    pub fn phi_t_y(&self) -> &DVector<f64> {
        &self.phi_t_y
    }

    /// `(λ_min(A/t), λ_max(A/t))` with `t` the number of observations
    /// (taken as 1 for an empty dataset).
    pub fn scaled_eigen_range(&self) -> (f64, f64) {
        let t = self.n_obs().max(1) as f64;
        let ev = (self.a_matrix() / t).symmetric_eigenvalues();
        (ev.min(), ev.max())
    }

    /// One exact draw `θ ~ N(A⁻¹Φᵀy, σ²A⁻¹)`.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.m, |_, _| StandardNormal.sample(rng));
        // Lᵀw = z gives Cov(w) = A⁻¹
        let w = self
            .factor
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        &self.mean + w * self.sigma
    }
}

/// Free-function form of [`PosteriorState::sample_theta`].
pub fn sample_theta<R: Rng + ?Sized>(state: &PosteriorState, rng: &mut R) -> DVector<f64> {
    state.sample_theta(rng)
}

/// Predictive mean `φ(x)ᵀμ` and variance `σ²φ(x)ᵀA⁻¹φ(x)` of the latent function.
pub fn posterior_predict(state: &PosteriorState, map: &FeatureMap, x: &[f64]) -> Result<(f64, f64)> {
    state.domain.check_point(x)?;
    if map.len() != state.m {
        return Err(Error::invalid(format!("feature map has {} features, posterior has {}", map.len(), state.m)));
    }
    let phi = map.features(x);
    let mean = phi.dot(&state.mean);
    let half = state
        .factor
        .l_dirty()
        .solve_lower_triangular(&phi)
        .expect("Cholesky factor has a positive diagonal");
    let var = (state.sigma * state.sigma * half.norm_squared()).max(0.0);
    Ok((mean, var))
}
