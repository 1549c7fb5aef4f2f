//! Synthetic-economy Monte-Carlo harness: economy generation, behavioral
//! data-generating processes, the full replication pipeline, and
//! counterfactual policy evaluation.

mod behavior;
mod generate;
mod harness;
mod policy;

pub use behavior::{apply_behavior, simulate_tt_cutoffs, BehaviorStats, Dgp, TtCutoffs};
pub use generate::{generate_economy, McConfig, SyntheticEconomy};
pub use harness::{
    method_labels, run_monte_carlo, run_sample, McGibbsSettings, McTables, MethodRow, SampleOutcome,
};
pub use policy::{
    apply_policy, evaluate_counterfactual, CounterfactualReport, Policy, PreferenceSource,
};
