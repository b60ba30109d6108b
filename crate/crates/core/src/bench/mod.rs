//! Benchmark objectives, error metrics, replica campaigns and verifiers.

pub mod campaign;
pub mod metrics;
pub mod objectives;
pub mod verify;

pub use campaign::{run_campaign, CampaignResult, StageQuantiles};
pub use objectives::{f1_objective, f2_objective, f_beta_objective, noisy_oracle, Objective};
