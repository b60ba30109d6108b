//! Seeded replica campaigns.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::metrics::{
    average_regret, decay_rate_fit, error_series, median_stages, quantile_sorted, stages_to_threshold, DecayFit,
    CONVERGED_ERROR,
};
use crate::bench::objectives::{noisy_oracle, Objective};
use crate::engine::{run, RunOutcome, TsConfig};
use crate::error::Result;
use crate::exec::{derive_seed, map_indexed, Parallelism};

/// Quartiles of the error metric across replicas at one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageQuantiles {
    pub stage: usize,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub replicas: Vec<RunOutcome>,
    /// Per-replica error series (posterior-mean maximizer vs true maximizer).
    pub errors: Vec<Vec<f64>>,
    /// Per-replica average-regret curves, one entry per chosen point.
    pub regret: Vec<Vec<f64>>,
    /// Quartiles per stage; replicas that stopped early carry their last value.
    pub quantiles: Vec<StageQuantiles>,
    /// Line fit of the median error curve; `None` when it is too short.
    pub decay: Option<DecayFit>,
    /// Per-replica stage from which the error stays at or below −2.
    pub stages_to_threshold: Vec<Option<usize>>,
}

impl CampaignResult {
    pub fn median_errors(&self) -> Vec<f64> {
        self.quantiles.iter().map(|q| q.q50).collect()
    }

    /// Median of [`stages_to_threshold`](Self::stages_to_threshold), `+∞` for
    /// runs that never settled below the threshold.
    pub fn median_stages_to_threshold(&self) -> f64 {
        median_stages(&self.stages_to_threshold)
    }
}

/// Seed of replica `index` and of its noise stream.
pub fn replica_seeds(base_seed: u64, index: usize) -> (u64, u64) {
    (derive_seed(base_seed, 2 * index as u64), derive_seed(base_seed, 2 * index as u64 + 1))
}

/// Runs `replicas` independent seeded runs of `cfg` on `obj` and aggregates
/// them. The result depends only on `(cfg, obj, replicas, base_seed)`.
pub fn run_campaign(
    cfg: &TsConfig,
    obj: &Objective,
    replicas: usize,
    base_seed: u64,
    par: Parallelism,
) -> Result<CampaignResult> {
    if replicas == 0 {
        return Err(crate::Error::invalid("a campaign needs at least one replica"));
    }
    cfg.validate()?;
    let outcomes = map_indexed(replicas, par, |r| {
        let (run_seed, noise_seed) = replica_seeds(base_seed, r);
        let rcfg = TsConfig { seed: run_seed, ..cfg.clone() };
        let mut oracle = noisy_oracle(obj, ChaCha8Rng::seed_from_u64(noise_seed));
        run(&rcfg, &mut oracle, obj.domain())
    });
    let replicas: Vec<RunOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    aggregate(replicas, obj)
}

/// Aggregates already computed runs.
pub fn aggregate(replicas: Vec<RunOutcome>, obj: &Objective) -> Result<CampaignResult> {
    let errors: Vec<Vec<f64>> = replicas.iter().map(|r| error_series(&r.trace, obj)).collect::<Result<_>>()?;
    let regret = replicas.iter().map(|r| average_regret(&r.trace, obj)).collect();
    let stages_to_threshold = errors.iter().map(|e| stages_to_threshold(e, CONVERGED_ERROR)).collect();
    let len = errors.iter().map(Vec::len).max().unwrap_or(0);
    let quantiles: Vec<StageQuantiles> = (0..len)
        .map(|i| {
            let mut col: Vec<f64> = errors.iter().map(|e| *e.get(i).or(e.last()).expect("non-empty run")).collect();
            col.sort_by(f64::total_cmp);
            StageQuantiles {
                stage: i + 1,
                q25: quantile_sorted(&col, 0.25),
                q50: quantile_sorted(&col, 0.5),
                q75: quantile_sorted(&col, 0.75),
            }
        })
        .collect();
    let median: Vec<f64> = quantiles.iter().map(|q| q.q50).collect();
    let decay = decay_rate_fit(&median).ok();
    Ok(CampaignResult { replicas, errors, regret, quantiles, decay, stages_to_threshold })
}
