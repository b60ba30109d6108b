//! Synthetic test objectives and their noisy oracles.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::engine::{NoisyOracle, OracleError};
use crate::error::{Error, Result};
use crate::kernel::Domain;

pub type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Deterministic test function with a known maximizer; noise is injected by
/// [`noisy_oracle`].
#[derive(Clone)]
pub struct Objective {
    name: String,
    domain: Domain,
    f: ObjectiveFn,
    true_argmax: Vec<f64>,
    noise_sigma: f64,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("true_argmax", &self.true_argmax)
            .field("noise_sigma", &self.noise_sigma)
            .finish()
    }
}

impl Objective {
    pub fn new(name: impl Into<String>, domain: Domain, f: ObjectiveFn, true_argmax: Vec<f64>) -> Result<Self> {
        if !domain.contains(&true_argmax) {
            return Err(Error::invalid(format!("true argmax {true_argmax:?} lies outside the domain")));
        }
        Ok(Objective { name: name.into(), domain, f, true_argmax, noise_sigma: 0.0 })
    }

    pub fn with_noise(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("noise sigma must be non-negative, got {sigma}")));
        }
        self.noise_sigma = sigma;
        Ok(self)
    }

    /// Same function on a different box; the maximizer must stay inside.
    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.dim() != self.dim() {
            return Err(Error::invalid(format!("domain has dimension {}, objective has {}", domain.dim(), self.dim())));
        }
        if !domain.contains(&self.true_argmax) {
            return Err(Error::invalid(format!("true argmax {:?} lies outside the domain", self.true_argmax)));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn true_argmax(&self) -> &[f64] {
        &self.true_argmax
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn max_value(&self) -> f64 {
        self.evaluate(&self.true_argmax)
    }
}

/// `Σ wₖ exp(-½‖x - μₖ‖²)`.
#[derive(Debug, Clone)]
struct UnitMixture {
    weights: Vec<f64>,
    centers: Vec<Vec<f64>>,
}

impl UnitMixture {
    fn value(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| w * (-0.5 * sq_dist(x, c)).exp())
            .sum()
    }

    /// Newton iterations on the gradient from `start`.
    fn refine_max(&self, start: &[f64]) -> Vec<f64> {
        let d = start.len();
        let mut x = start.to_vec();
        for _ in 0..100 {
            let mut g = nalgebra::DVector::<f64>::zeros(d);
            let mut h = nalgebra::DMatrix::<f64>::zeros(d, d);
            for (w, c) in self.weights.iter().zip(&self.centers) {
                let e = w * (-0.5 * sq_dist(&x, c)).exp();
                for i in 0..d {
                    let di = x[i] - c[i];
                    g[i] -= e * di;
                    for j in 0..d {
                        let dj = x[j] - c[j];
                        h[(i, j)] += e * (di * dj - if i == j { 1.0 } else { 0.0 });
                    }
                }
            }
            let Some(step) = h.lu().solve(&g) else { break };
            for i in 0..d {
                x[i] -= step[i];
            }
            if step.norm() < 1e-10 {
                break;
            }
        }
        x
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Two-bump mixture on `[0, 10]`: local maximum near 2, global near 5.
pub fn f1_objective() -> Objective {
    let s = 1.0 / (2.0 * PI).sqrt();
    let mix = UnitMixture { weights: vec![5.0 * s, 10.0 * s], centers: vec![vec![2.0], vec![5.0]] };
    let argmax = mix.refine_max(&[5.0]);
    let f: ObjectiveFn = Arc::new(move |x: &[f64]| mix.value(x));
    Objective::new("f1", Domain::cube(0.0, 10.0, 1).expect("valid box"), f, argmax).expect("argmax in domain")
}

/// Two-bump mixture on `[0, 10]²` with centers (2,2) and (5,5).
pub fn f2_objective() -> Objective {
    let s = 1.0 / (2.0 * PI);
    let mix = UnitMixture { weights: vec![5.0 * s, 10.0 * s], centers: vec![vec![2.0, 2.0], vec![5.0, 5.0]] };
    let argmax = mix.refine_max(&[5.0, 5.0]);
    let f: ObjectiveFn = Arc::new(move |x: &[f64]| mix.value(x));
    Objective::new("f2", Domain::cube(0.0, 10.0, 2).expect("valid box"), f, argmax).expect("argmax in domain")
}

/// `β·exp(-(x - 5)²/8)` on `[0, 10]`.
pub fn f_beta_objective(beta: f64) -> Result<Objective> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let f: ObjectiveFn = Arc::new(move |x: &[f64]| beta * (-(x[0] - 5.0).powi(2) / 8.0).exp());
    Objective::new("f_beta", Domain::cube(0.0, 10.0, 1)?, f, vec![5.0])
}

/// Objective plus Gaussian noise from an owned generator.
#[derive(Debug, Clone)]
pub struct NoisyObjective {
    objective: Objective,
    rng: ChaCha8Rng,
}

/// Wraps `obj` so each call returns `f(x) + ε`, `ε ~ N(0, σ²)`.
pub fn noisy_oracle(obj: &Objective, rng: ChaCha8Rng) -> NoisyObjective {
    NoisyObjective { objective: obj.clone(), rng }
}

impl NoisyObjective {
    pub fn sample(&mut self, x: &[f64]) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.objective.evaluate(x) + self.objective.noise_sigma * z
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }
}

impl NoisyOracle for NoisyObjective {
    fn observe(&mut self, x: &[f64]) -> std::result::Result<f64, OracleError> {
        let y = self.sample(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(OracleError(format!("non-finite evaluation at {x:?}")))
        }
    }
}
