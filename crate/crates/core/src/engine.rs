//! The epsilon-greedy Thompson sampling loop.
//!
//! Each stage refits the hyperparameters (on a schedule), rebuilds the
//! feature map for the fitted kernel, forms the weight posterior and then
//! chooses `batch_size` points: with probability `1 - ξ` the maximizer of a
//! posterior draw `φ(x)ᵀθ`, otherwise a uniform point of the domain.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::hyperfit::{cold_start, map_estimate, FitReport, PriorSpec};
use crate::kernel::{nystrom_feature_map, Domain, FeatureMap, HyperParams, Surface, DEFAULT_M_STAR};
use crate::posterior::{build_posterior, Dataset, Observation, Origin, PosteriorState};
use crate::qmc;

/// Candidate grid size for the inner maximization.
pub const DEFAULT_CANDIDATES: usize = 2048;
/// Number of grid candidates refined by local ascent.
pub const DEFAULT_LOCAL_STARTS: usize = 8;

const ASCENT_MAX_ITERS: usize = 100;
const ASCENT_MIN_STEP: f64 = 1e-9;
const FD_REL_STEP: f64 = 1e-6;
const SURFACE_POINTS: usize = 201;

/// Engine configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TsConfig {
    /// Probability of a uniform exploration draw.
    pub xi: f64,
    pub batch_size: usize,
    /// Truncation level `m*` of the feature map.
    pub m_star: usize,
    /// Stopping window `W` in stages.
    pub stop_window: usize,
    /// Stopping tolerance `τ`, relative to the domain width.
    pub stop_tolerance: f64,
    pub max_stages: usize,
    pub seed: u64,
    /// Nyström anchor count.
    pub anchors: usize,
    /// At most this many observations enter a hyperparameter fit.
    pub fit_points: usize,
    /// Refit at every stage up to this one...
    pub refit_every_stage_until: usize,
    /// ...and at every multiple of this period afterwards.
    pub refit_period: usize,
    pub fit_budget_cold: usize,
    pub fit_budget_warm: usize,
    pub candidates: usize,
    pub local_starts: usize,
    /// Keep posterior-mean snapshots at refit stages (1-d domains only).
    pub record_surfaces: bool,
    /// Scheduling of the per-stage batch; never changes results.
    pub parallelism: Parallelism,
}

impl Default for TsConfig {
    fn default() -> Self {
        TsConfig {
            xi: 0.1,
            batch_size: 30,
            m_star: DEFAULT_M_STAR,
            stop_window: 10,
            stop_tolerance: 0.01,
            max_stages: 100,
            seed: 0,
            anchors: 256,
            fit_points: 200,
            refit_every_stage_until: 50,
            refit_period: 10,
            fit_budget_cold: 200,
            fit_budget_warm: 40,
            candidates: DEFAULT_CANDIDATES,
            local_starts: DEFAULT_LOCAL_STARTS,
            record_surfaces: false,
            parallelism: Parallelism::Sequential,
        }
    }
}

impl TsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::invalid(format!("{field}: {msg}")));
        if !(0.0..=1.0).contains(&self.xi) {
            return bad("xi", format!("must lie in [0, 1], got {}", self.xi));
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1".into());
        }
        if self.m_star == 0 {
            return bad("m_star", "must be at least 1".into());
        }
        if self.stop_window < 2 {
            return bad("stop_window", format!("must be at least 2, got {}", self.stop_window));
        }
        if !(self.stop_tolerance > 0.0 && self.stop_tolerance.is_finite()) {
            return bad("stop_tolerance", format!("must be positive, got {}", self.stop_tolerance));
        }
        if self.max_stages == 0 {
            return bad("max_stages", "must be at least 1".into());
        }
        if self.anchors == 0 || self.fit_points == 0 || self.candidates == 0 || self.refit_period == 0 {
            return bad("anchors/fit_points/candidates/refit_period", "must be at least 1".into());
        }
        Ok(())
    }

    fn refits_at(&self, stage: usize) -> bool {
        stage <= self.refit_every_stage_until || stage % self.refit_period == 0
    }
}

/// Failure reported by a [`NoisyOracle`].
#[derive(Debug, Clone, Error)]
#[error("{0}")]
pub struct OracleError(pub String);

/// Source of noisy evaluations `y = f(x) + ε`.
pub trait NoisyOracle {
    fn observe(&mut self, x: &[f64]) -> std::result::Result<f64, OracleError>;
}

impl<F> NoisyOracle for F
where
    F: FnMut(&[f64]) -> std::result::Result<f64, OracleError>,
{
    fn observe(&mut self, x: &[f64]) -> std::result::Result<f64, OracleError> {
        self(x)
    }
}

/// Maximizer of sampled functions over a cached quasi-random candidate grid.
///
/// The grid basis values are computed once per feature map, so each
/// maximization costs one matrix-vector product plus local ascent from the
/// best few candidates.
#[derive(Debug, Clone)]
pub struct ArgmaxSearch {
    domain: Domain,
    candidates: Vec<Vec<f64>>,
    grid_basis: nalgebra::DMatrix<f64>,
    local_starts: usize,
    initial_step: f64,
}

impl ArgmaxSearch {
    pub fn new(map: &FeatureMap, domain: &Domain, candidates: Vec<Vec<f64>>, local_starts: usize) -> Self {
        let grid_basis = map.basis_matrix(&candidates);
        let spacing = (candidates.len().max(1) as f64).powf(-1.0 / domain.dim() as f64);
        ArgmaxSearch { domain: domain.clone(), candidates, grid_basis, local_starts, initial_step: spacing }
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    /// Maximizer of `φ(x)ᵀθ` for the map this search was built with.
    pub fn argmax(&self, map: &FeatureMap, theta: &DVector<f64>) -> Vec<f64> {
        self.argmax_surface(&map.surface(theta))
    }

    pub fn argmax_surface(&self, surface: &Surface<'_>) -> Vec<f64> {
        let values = &self.grid_basis * surface.coefficients();
        let mut order: Vec<usize> = (0..values.len()).collect();
        // ties: lowest index first
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let mut best_x = self.candidates[order[0]].clone();
        let mut best_v = values[order[0]];
        let mut scratch = vec![0.0; self.grid_basis.ncols()];
        for &idx in order.iter().take(self.local_starts) {
            let (x, v) = self.local_ascent(surface, &self.candidates[idx], values[idx], &mut scratch);
            if v > best_v {
                best_v = v;
                best_x = x;
            }
        }
        self.domain.clamp(&mut best_x);
        best_x
    }

    /// Projected gradient ascent in unit coordinates with central-difference
    /// gradients and an expanding/halving step.
    fn local_ascent(&self, g: &Surface<'_>, start: &[f64], start_value: f64, scratch: &mut [f64]) -> (Vec<f64>, f64) {
        let d = self.domain.dim();
        let lower = self.domain.lower();
        let widths = self.domain.widths();
        let to_x = |u: &[f64]| -> Vec<f64> { (0..d).map(|i| lower[i] + u[i] * widths[i]).collect() };
        let mut u: Vec<f64> = (0..d).map(|i| ((start[i] - lower[i]) / widths[i]).clamp(0.0, 1.0)).collect();
        let mut value = start_value;
        let mut step = self.initial_step;
        let mut grad = vec![0.0; d];
        let mut probe = vec![0.0; d];
        for _ in 0..ASCENT_MAX_ITERS {
            let x = to_x(&u);
            probe.copy_from_slice(&x);
            for i in 0..d {
                let h = FD_REL_STEP * widths[i];
                probe[i] = x[i] + h;
                let up = g.eval_with(&probe, scratch);
                probe[i] = x[i] - h;
                let dn = g.eval_with(&probe, scratch);
                probe[i] = x[i];
                grad[i] = (up - dn) / (2.0 * h) * widths[i];
                // drop components pushing out of an active bound
                if (u[i] <= 0.0 && grad[i] < 0.0) || (u[i] >= 1.0 && grad[i] > 0.0) {
                    grad[i] = 0.0;
                }
            }
            let gn = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn == 0.0 || !gn.is_finite() {
                break;
            }
            let mut moved = false;
            while step >= ASCENT_MIN_STEP {
                let trial: Vec<f64> = (0..d).map(|i| (u[i] + step * grad[i] / gn).clamp(0.0, 1.0)).collect();
                let tv = g.eval_with(&to_x(&trial), scratch);
                if tv > value {
                    u = trial;
                    value = tv;
                    step = (step * 2.0).min(0.25);
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (to_x(&u), value)
    }
}

/// Maximizer of `φ(x)ᵀθ` over `domain`: best of a 2048-point scrambled
/// Halton grid, refined by local ascent from the top 8 candidates.
pub fn inner_argmax<R: Rng + ?Sized>(map: &FeatureMap, theta: &DVector<f64>, domain: &Domain, rng: &mut R) -> Vec<f64> {
    assert_eq!(theta.len(), map.len(), "theta length must equal m_t");
    let candidates = qmc::scrambled_points(domain, DEFAULT_CANDIDATES, rng);
    ArgmaxSearch::new(map, domain, candidates, DEFAULT_LOCAL_STARTS).argmax(map, theta)
}

/// Posterior-mean curve `(x, φ(x)ᵀμ)` on a uniform grid of a 1-d domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSnapshot {
    pub xs: Vec<f64>,
    pub means: Vec<f64>,
}

/// Everything recorded about one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub points: Vec<Vec<f64>>,
    pub observations: Vec<f64>,
    pub origins: Vec<Origin>,
    /// Whether hyperparameters and feature map were refreshed this stage.
    pub refit: bool,
    pub hyper: HyperParams,
    pub m_t: usize,
    /// First posterior-sampled point of the stage, if any.
    pub argmax_point: Option<Vec<f64>>,
    /// Maximizer of the posterior-mean surface after the stage's observations.
    pub mode_estimate: Vec<f64>,
    pub lambda_min_over_t: f64,
    pub lambda_max_over_t: f64,
    /// Largest empirical kernel eigenvalue of the current feature map.
    pub top_kernel_eigenvalue: f64,
    /// Observations in the dataset after the stage.
    pub n_obs: usize,
    pub surface: Option<SurfaceSnapshot>,
}

/// Full history of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub domain: Domain,
    /// The uniformly drawn starting observation.
    pub seed_observation: Observation,
    pub stages: Vec<StageRecord>,
}

impl RunTrace {
    /// Chosen points of all stages in order, excluding the starting point.
    pub fn chosen_points(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.stages.iter().flat_map(|s| s.points.iter())
    }
}

/// Result of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub trace: RunTrace,
    /// Final estimate of the maximizer.
    pub estimate: Vec<f64>,
    /// True if the stopping rule fired before `max_stages`.
    pub stopped: bool,
}

/// One point choice within a stage.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub x: Vec<f64>,
    pub origin: Origin,
    pub theta: Option<DVector<f64>>,
}

/// Mutable state carried between stages.
#[derive(Debug, Clone)]
pub struct EngineState {
    domain: Domain,
    data: Dataset,
    prior: PriorSpec,
    anchors: Vec<Vec<f64>>,
    hyper: Option<HyperParams>,
    map: Option<Arc<FeatureMap>>,
    search: Option<Arc<ArgmaxSearch>>,
    posterior: Option<PosteriorState>,
    last_fit: Option<FitReport>,
    stage: usize,
    rng: ChaCha8Rng,
}

impl EngineState {
    pub fn new(cfg: &TsConfig, domain: &Domain) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let anchors = qmc::scrambled_points(domain, cfg.anchors, &mut rng);
        Ok(EngineState {
            domain: domain.clone(),
            data: Dataset::new(domain.clone()),
            prior: PriorSpec::weakly_informative(domain.dim()),
            anchors,
            hyper: None,
            map: None,
            search: None,
            posterior: None,
            last_fit: None,
            stage: 0,
            rng,
        })
    }

    /// Replaces the default hyperparameter prior.
    pub fn with_prior(mut self, prior: PriorSpec) -> Result<Self> {
        if prior.len() != self.domain.dim() + 2 {
            return Err(Error::invalid(format!(
                "prior has {} components, domain needs {}",
                prior.len(),
                self.domain.dim() + 2
            )));
        }
        self.prior = prior;
        Ok(self)
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn hyper(&self) -> Option<&HyperParams> {
        self.hyper.as_ref()
    }

    pub fn feature_map(&self) -> Option<&FeatureMap> {
        self.map.as_deref()
    }

    pub fn search(&self) -> Option<&ArgmaxSearch> {
        self.search.as_deref()
    }

    pub fn posterior(&self) -> Option<&PosteriorState> {
        self.posterior.as_ref()
    }

    pub fn last_fit(&self) -> Option<&FitReport> {
        self.last_fit.as_ref()
    }

    /// Draws `x⁰` uniformly and records its observation.
    pub fn seed_point<O: NoisyOracle + ?Sized>(&mut self, oracle: &mut O) -> Result<Observation> {
        let x = self.domain.sample_uniform(&mut self.rng);
        let y = oracle.observe(&x).map_err(|e| Error::Oracle { stage: 0, message: e.0 })?;
        self.data.push(x.clone(), y, Origin::UniformExplore)?;
        Ok(Observation { x, y, origin: Origin::UniformExplore })
    }

    /// Refits and rebuilds map and posterior if the schedule asks for it at
    /// the upcoming stage. Returns whether a refit happened.
    pub fn prepare_stage(&mut self, cfg: &TsConfig) -> Result<bool> {
        if self.data.is_empty() {
            return Err(Error::invalid("engine needs a starting observation before the first stage"));
        }
        let next = self.stage + 1;
        if self.hyper.is_some() && !cfg.refits_at(next) {
            return Ok(false);
        }
        let fit_data = subsample(&self.data, cfg.fit_points);
        let (init, budget) = match &self.hyper {
            Some(hp) => (hp.clone(), cfg.fit_budget_warm),
            None => (cold_start(&fit_data), cfg.fit_budget_cold),
        };
        let report = map_estimate(&fit_data, &self.prior, &init, budget)?;
        let hp = report.estimate.clone();
        let map = nystrom_feature_map(&self.anchors, &hp, cfg.m_star)?;
        let candidates = qmc::scrambled_points(&self.domain, cfg.candidates, &mut self.rng);
        let search = ArgmaxSearch::new(&map, &self.domain, candidates, cfg.local_starts);
        self.posterior = Some(build_posterior(&self.data, &map, hp.noise_sigma)?);
        self.map = Some(Arc::new(map));
        self.search = Some(Arc::new(search));
        self.hyper = Some(hp);
        self.last_fit = Some(report);
        Ok(true)
    }

    /// Seeds for the batch slots of the upcoming stage, drawn from the
    /// engine generator in slot order.
    pub fn slot_seeds(&mut self, n: usize) -> Vec<u64> {
        (0..n).map(|_| self.rng.random()).collect()
    }

    /// Chooses one point from an independent slot generator.
    pub fn propose(&self, cfg: &TsConfig, slot_seed: u64) -> Result<Proposal> {
        let (map, search, post) = match (&self.map, &self.search, &self.posterior) {
            (Some(m), Some(s), Some(p)) => (m, s, p),
            _ => return Err(Error::invalid("propose called before prepare_stage")),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(slot_seed);
        let u: f64 = rng.random();
        if u < cfg.xi {
            let x = self.domain.sample_uniform(&mut rng);
            return Ok(Proposal { x, origin: Origin::UniformExplore, theta: None });
        }
        let theta = post.sample_theta(&mut rng);
        let x = search.argmax(map, &theta);
        Ok(Proposal { x, origin: Origin::PosteriorSample, theta: Some(theta) })
    }

    /// Appends an observation to the dataset and the posterior.
    pub fn observe(&mut self, x: Vec<f64>, y: f64, origin: Origin) -> Result<()> {
        if let (Some(map), Some(post)) = (&self.map, &mut self.posterior) {
            post.push_observation(&map.features(&x), y)?;
        }
        self.data.push(x, y, origin)
    }

    /// Maximizer of the current posterior-mean surface.
    pub fn mode_estimate(&self) -> Option<Vec<f64>> {
        let (map, search, post) = (self.map.as_ref()?, self.search.as_ref()?, self.posterior.as_ref()?);
        Some(search.argmax(map, post.mean()))
    }

    fn surface_snapshot(&self) -> Option<SurfaceSnapshot> {
        if self.domain.dim() != 1 {
            return None;
        }
        let (map, post) = (self.map.as_ref()?, self.posterior.as_ref()?);
        let surf = map.surface(post.mean());
        let (lo, w) = (self.domain.lower()[0], self.domain.width(0));
        let xs: Vec<f64> = (0..SURFACE_POINTS).map(|i| lo + w * i as f64 / (SURFACE_POINTS - 1) as f64).collect();
        let means = xs.iter().map(|&x| surf.eval(&[x])).collect();
        Some(SurfaceSnapshot { xs, means })
    }
}

fn subsample(data: &Dataset, cap: usize) -> Dataset {
    let n = data.len();
    if n <= cap {
        return data.clone();
    }
    let mut out = Dataset::new(data.domain().clone());
    for k in 0..cap {
        // evenly strided, always keeping the newest observation
        let i = ((k + 1) * n) / cap - 1;
        let r = &data.rows()[i];
        out.push(r.x.clone(), r.y, r.origin).expect("row already validated");
    }
    out
}

/// Runs one stage and returns its record.
pub fn ts_stage<O: NoisyOracle + ?Sized>(state: &mut EngineState, cfg: &TsConfig, oracle: &mut O) -> Result<StageRecord> {
    let refit = state.prepare_stage(cfg)?;
    let t = state.stage + 1;
    let seeds = state.slot_seeds(cfg.batch_size);
    let proposals = {
        let st = &*state;
        exec::map_indexed(cfg.batch_size, cfg.parallelism, |i| st.propose(cfg, seeds[i]))
    };
    let mut points = Vec::with_capacity(cfg.batch_size);
    let mut observations = Vec::with_capacity(cfg.batch_size);
    let mut origins = Vec::with_capacity(cfg.batch_size);
    for p in proposals {
        let p = p?;
        let y = oracle.observe(&p.x).map_err(|e| Error::Oracle { stage: t, message: e.0 })?;
        state.observe(p.x.clone(), y, p.origin)?;
        points.push(p.x);
        observations.push(y);
        origins.push(p.origin);
    }
    state.stage = t;

    let post = state.posterior.as_ref().expect("prepared");
    let map = state.map.as_ref().expect("prepared");
    let (lambda_min_over_t, lambda_max_over_t) = post.scaled_eigen_range();
    let argmax_point = points
        .iter()
        .zip(&origins)
        .find(|(_, o)| **o == Origin::PosteriorSample)
        .map(|(x, _)| x.clone());
    Ok(StageRecord {
        stage: t,
        argmax_point,
        mode_estimate: state.mode_estimate().expect("prepared"),
        refit,
        hyper: state.hyper.clone().expect("prepared"),
        m_t: map.len(),
        lambda_min_over_t,
        lambda_max_over_t,
        top_kernel_eigenvalue: map.eigenvalues().first().copied().unwrap_or(f64::NAN),
        n_obs: state.data.len(),
        surface: if cfg.record_surfaces && refit { state.surface_snapshot() } else { None },
        points,
        observations,
        origins,
    })
}

/// True when each of the last `W` stages chose at least one posterior-sampled
/// point and those points have per-axis standard deviation at most
/// `τ·width`.
pub fn should_stop(trace: &RunTrace, cfg: &TsConfig) -> bool {
    let w = cfg.stop_window;
    if trace.stages.len() < w {
        return false;
    }
    let window = &trace.stages[trace.stages.len() - w..];
    let mut sampled: Vec<&Vec<f64>> = Vec::new();
    for s in window {
        let before = sampled.len();
        sampled.extend(
            s.points.iter().zip(&s.origins).filter(|(_, o)| **o == Origin::PosteriorSample).map(|(x, _)| x),
        );
        if sampled.len() == before {
            return false;
        }
    }
    let n = sampled.len() as f64;
    (0..trace.domain.dim()).all(|i| {
        let mean = sampled.iter().map(|x| x[i]).sum::<f64>() / n;
        let var = if sampled.len() > 1 {
            sampled.iter().map(|x| (x[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        var.sqrt() <= cfg.stop_tolerance * trace.domain.width(i)
    })
}

/// Full run: starting point, stages until the stopping rule fires or
/// `max_stages` is reached. The estimate is the posterior-mean maximizer
/// of the final stage.
pub fn run<O: NoisyOracle + ?Sized>(cfg: &TsConfig, oracle: &mut O, domain: &Domain) -> Result<RunOutcome> {
    let mut state = EngineState::new(cfg, domain)?;
    let seed_observation = state.seed_point(oracle)?;
    let mut trace = RunTrace { domain: domain.clone(), seed_observation, stages: Vec::new() };
    let mut stopped = false;
    for _ in 0..cfg.max_stages {
        let rec = ts_stage(&mut state, cfg, oracle)?;
        trace.stages.push(rec);
        if should_stop(&trace, cfg) {
            stopped = true;
            break;
        }
    }
    let estimate = trace.stages.last().expect("max_stages >= 1").mode_estimate.clone();
    Ok(RunOutcome { trace, estimate, stopped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::EigenFunctions;

    fn quadratic_map() -> FeatureMap {
        let f: EigenFunctions = Arc::new(|x: &[f64], out: &mut [f64]| {
            out[0] = x[0];
            out[1] = x[0] * x[0];
        });
        FeatureMap::analytic(1, vec![1.0, 1.0], f).unwrap()
    }

    fn record(stage: usize, xs: &[f64], origin: Origin) -> StageRecord {
        StageRecord {
            stage,
            points: xs.iter().map(|&x| vec![x]).collect(),
            observations: vec![0.0; xs.len()],
            origins: vec![origin; xs.len()],
            refit: false,
            hyper: HyperParams::isotropic(1.0, 1.0, 1, 0.1).unwrap(),
            m_t: 1,
            argmax_point: None,
            mode_estimate: vec![0.0],
            lambda_min_over_t: 0.0,
            lambda_max_over_t: 0.0,
            top_kernel_eigenvalue: 1.0,
            n_obs: 0,
            surface: None,
        }
    }

    fn trace_of(stages: Vec<StageRecord>) -> RunTrace {
        RunTrace {
            domain: Domain::cube(0.0, 10.0, 1).unwrap(),
            seed_observation: Observation { x: vec![1.0], y: 0.0, origin: Origin::UniformExplore },
            stages,
        }
    }

    #[test]
    fn quadratic_argmax() {
        let dom = Domain::cube(0.0, 3.0, 1).unwrap();
        let theta = DVector::from_vec(vec![2.0, -1.0]);
        let x = inner_argmax(&quadratic_map(), &theta, &dom, &mut ChaCha8Rng::seed_from_u64(1));
        assert!((x[0] - 1.0).abs() <= 1e-4, "{x:?}");
    }

    #[test]
    fn boundary_maximum_is_found() {
        let dom = Domain::cube(0.0, 3.0, 1).unwrap();
        let theta = DVector::from_vec(vec![1.0, 0.0]);
        let x = inner_argmax(&quadratic_map(), &theta, &dom, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(x, vec![3.0]);
    }

    #[test]
    fn zero_weights_return_an_in_domain_point() {
        let dom = Domain::cube(-1.0, 2.0, 1).unwrap();
        let theta = DVector::zeros(2);
        let x = inner_argmax(&quadratic_map(), &theta, &dom, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(dom.contains(&x));
    }

    #[test]
    fn stop_rule_examples() {
        let cfg = TsConfig { stop_window: 10, stop_tolerance: 0.01, ..TsConfig::default() };
        let same: Vec<_> = (1..=10).map(|t| record(t, &[4.0, 4.0], Origin::PosteriorSample)).collect();
        assert!(should_stop(&trace_of(same.clone()), &cfg));
        assert!(!should_stop(&trace_of(same[..9].to_vec()), &cfg));

        let alternating: Vec<_> = (1..=10)
            .map(|t| record(t, &[if t % 2 == 0 { 0.0 } else { 10.0 }], Origin::PosteriorSample))
            .collect();
        let loose = TsConfig { stop_tolerance: 0.49, ..cfg.clone() };
        assert!(!should_stop(&trace_of(alternating), &loose));

        let mut with_gap = same;
        with_gap[5] = record(6, &[4.0], Origin::UniformExplore);
        assert!(!should_stop(&trace_of(with_gap), &cfg));
    }

    #[test]
    fn uniform_points_are_ignored_by_the_stop_rule() {
        let cfg = TsConfig::default();
        let stages: Vec<_> = (1..=10)
            .map(|t| {
                let mut r = record(t, &[4.0, 9.0], Origin::PosteriorSample);
                r.origins[1] = Origin::UniformExplore;
                r
            })
            .collect();
        assert!(should_stop(&trace_of(stages), &cfg));
    }

    #[test]
    fn config_validation() {
        assert!(TsConfig::default().validate().is_ok());
        assert!(TsConfig { xi: 1.5, ..TsConfig::default() }.validate().is_err());
        assert!(TsConfig { batch_size: 0, ..TsConfig::default() }.validate().is_err());
        assert!(TsConfig { stop_window: 1, ..TsConfig::default() }.validate().is_err());
        assert!(TsConfig { stop_tolerance: 0.0, ..TsConfig::default() }.validate().is_err());
    }

    #[test]
    fn subsample_keeps_newest_row() {
        let mut d = Dataset::new(Domain::cube(0.0, 1.0, 1).unwrap());
        for i in 0..10 {
            d.push(vec![i as f64 / 10.0], i as f64, Origin::UniformExplore).unwrap();
        }
        let s = subsample(&d, 4);
        assert_eq!(s.responses(), vec![1.0, 4.0, 6.0, 9.0]);
        assert_eq!(subsample(&d, 20).len(), 10);
    }
}
