//! Full replication pipeline: generate economies, apply behavior, simulate
//! feasibility, infer relations under every hypothesis, estimate, select,
//! and aggregate across samples.

use rayon::prelude::*;

use super::behavior::{apply_behavior, simulate_tt_cutoffs, BehaviorStats, Dgp, TtCutoffs};
use super::generate::{generate_economy, McConfig, SyntheticEconomy};
use crate::estimate::{gibbs_estimate, GibbsConfig, PosteriorDraws, UtilitySpec};
use crate::infer::{teps_infer, wtt_infer, AttentionParam, RelationSet};
use crate::market::Rol;
use crate::rng::derive_seed;
use crate::select::{select_model, EstimateSummary, MethodLabel, SelectionResult};
use crate::sim::{build_feasible_partition, FeasiblePartition, PartitionMode};
use crate::Result;

/// Gibbs settings for the harness. Chains default to 1: each `(sample,
/// regime, method)` unit is already an independent replication, and the
/// cross-sample spread is the reported uncertainty.
#[derive(Debug, Clone)]
pub struct McGibbsSettings {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
}

impl Default for McGibbsSettings {
    fn default() -> Self {
        McGibbsSettings {
            n_iter: 20_000,
            burn_in: 15_000,
            thin: 1,
            n_chains: 1,
        }
    }
}

/// Everything retained from one `(sample, regime)` pipeline run.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub sample: usize,
    pub dgp: Dgp,
    pub stats: BehaviorStats,
    pub estimates: Vec<EstimateSummary>,
    pub top: EstimateSummary,
    pub selection: SelectionResult,
    /// Retained draws for the WTT estimate (counterfactual input).
    pub wtt_draws: PosteriorDraws,
    /// Retained draws for the selected estimate.
    pub selected_draws: PosteriorDraws,
}

impl SampleOutcome {
    pub fn summary(&self, label: MethodLabel) -> Option<&EstimateSummary> {
        if label == MethodLabel::TepsTop {
            return Some(&self.top);
        }
        self.estimates.iter().find(|e| e.label == label)
    }
}

/// Per-regime, per-method aggregate over samples.
#[derive(Debug, Clone)]
pub struct MethodRow {
    pub dgp: Dgp,
    pub label: MethodLabel,
    /// Cross-sample mean of the posterior-mean estimates.
    pub mean: Vec<f64>,
    /// Cross-sample standard deviation.
    pub sd: Vec<f64>,
    /// Root mean squared error against the true coefficients.
    pub rmse: Vec<f64>,
}

/// Aggregated replication tables plus the per-sample outcomes they came
/// from.
#[derive(Debug, Clone)]
pub struct McTables {
    pub behavior: Vec<(Dgp, BehaviorStats)>,
    pub estimates: Vec<MethodRow>,
    /// Fraction of samples in which each method was selected.
    pub selection: Vec<(Dgp, MethodLabel, f64)>,
    pub outcomes: Vec<SampleOutcome>,
}

/// All method labels estimated by the harness for a given grid.
pub fn method_labels(tau_grid: &[u8]) -> Vec<MethodLabel> {
    let mut labels = vec![MethodLabel::Wtt, MethodLabel::TepsTop];
    labels.extend(tau_grid.iter().map(|&t| MethodLabel::Teps(t)));
    labels
}

fn relations_for(
    label: MethodLabel,
    submitted: &[Rol],
    partitions: &[FeasiblePartition],
    n_programs: usize,
) -> Result<Vec<RelationSet>> {
    match label {
        MethodLabel::Wtt => Ok(submitted
            .iter()
            .map(|rol| wtt_infer(rol, n_programs))
            .collect()),
        MethodLabel::TepsTop | MethodLabel::Teps(_) => {
            let tau = AttentionParam::new(label.tau().expect("teps label"))?;
            submitted
                .par_iter()
                .zip(partitions)
                .map(|(rol, partition)| teps_infer(partition, rol, tau, n_programs))
                .collect()
        }
    }
}

fn utility_spec(syn: &SyntheticEconomy, cfg: &McConfig) -> Result<UtilitySpec> {
    UtilitySpec::new(syn.covariates.clone(), cfg.program_types(), 0, 4)
}

fn dgp_code(dgp: Dgp) -> u64 {
    match dgp {
        Dgp::Tt => 1,
        Dgp::MisIrr => 2,
        Dgp::MisRel => 3,
    }
}

fn label_code(label: MethodLabel) -> u64 {
    match label {
        MethodLabel::Wtt => 1000,
        MethodLabel::TepsTop => 1001,
        MethodLabel::Teps(t) => 1100 + t as u64,
    }
}

/// Runs the complete pipeline for one `(sample, regime)` unit.
pub fn run_sample(
    cfg: &McConfig,
    tt: &TtCutoffs,
    sample: usize,
    dgp: Dgp,
    tau_grid: &[u8],
    gibbs: &McGibbsSettings,
    alpha: f64,
) -> Result<SampleOutcome> {
    let syn = generate_economy(cfg, sample as u64)?;
    let behavior_seed = derive_seed(cfg.seed, &[0xbe4a, sample as u64, dgp_code(dgp)]);
    let (submitted, stats) = apply_behavior(&syn, dgp, tt, behavior_seed)?;
    let partition_seed = derive_seed(cfg.seed, &[0xfea5, sample as u64, dgp_code(dgp)]);
    let partitions = build_feasible_partition(
        &syn.economy,
        &submitted,
        cfg.n_cutoff_draws,
        partition_seed,
        PartitionMode::Joint,
    )?;
    let spec = utility_spec(&syn, cfg)?;
    let n_programs = syn.n_programs();

    let labels = method_labels(tau_grid);
    let runs: Vec<(EstimateSummary, PosteriorDraws)> = labels
        .par_iter()
        .map(|&label| -> Result<(EstimateSummary, PosteriorDraws)> {
            let relations = relations_for(label, &submitted, &partitions, n_programs)?;
            let gibbs_cfg = GibbsConfig {
                n_iter: gibbs.n_iter,
                burn_in: gibbs.burn_in,
                thin: gibbs.thin,
                n_chains: gibbs.n_chains,
                seed: derive_seed(
                    cfg.seed,
                    &[0x91bb, sample as u64, dgp_code(dgp), label_code(label)],
                ),
                ..GibbsConfig::default()
            };
            let draws = gibbs_estimate(&relations, &spec, &gibbs_cfg)?;
            let summary = EstimateSummary::new(label, draws.mean.clone(), draws.cov.clone())?;
            Ok((summary, draws))
        })
        .collect::<Result<_>>()?;

    let top_idx = labels
        .iter()
        .position(|&l| l == MethodLabel::TepsTop)
        .expect("top label always present");
    let top = runs[top_idx].0.clone();
    let estimates: Vec<EstimateSummary> = runs.iter().map(|(s, _)| s.clone()).collect();
    let selection = select_model(&estimates, &top, tau_grid, alpha)?;
    let wtt_idx = labels
        .iter()
        .position(|&l| l == MethodLabel::Wtt)
        .expect("wtt label always present");
    let selected_idx = labels
        .iter()
        .position(|&l| l == selection.chosen)
        .expect("chosen label was estimated");
    Ok(SampleOutcome {
        sample,
        dgp,
        stats,
        estimates,
        top,
        selection,
        wtt_draws: runs[wtt_idx].1.clone(),
        selected_draws: runs[selected_idx].1.clone(),
    })
}

/// Full Monte-Carlo replication across samples and behavior regimes.
pub fn run_monte_carlo(
    cfg: &McConfig,
    dgps: &[Dgp],
    tau_grid: &[u8],
    gibbs: &McGibbsSettings,
    alpha: f64,
) -> Result<McTables> {
    let tt = simulate_tt_cutoffs(cfg)?;
    let units: Vec<(usize, Dgp)> = (0..cfg.n_samples)
        .flat_map(|s| dgps.iter().map(move |&d| (s, d)))
        .collect();
    let outcomes: Vec<SampleOutcome> = units
        .par_iter()
        .map(|&(sample, dgp)| run_sample(cfg, &tt, sample, dgp, tau_grid, gibbs, alpha))
        .collect::<Result<_>>()?;

    let mut behavior = Vec::new();
    let mut estimates = Vec::new();
    let mut selection = Vec::new();
    let n_samples = cfg.n_samples as f64;
    for &dgp in dgps {
        let of_dgp: Vec<&SampleOutcome> = outcomes.iter().filter(|o| o.dgp == dgp).collect();
        let mut stats = BehaviorStats {
            mean_rol_length: 0.0,
            wtt_share: 0.0,
            stable_share: 0.0,
            mistake_share: 0.0,
            fallback_students: 0,
        };
        for o in &of_dgp {
            stats.mean_rol_length += o.stats.mean_rol_length / n_samples;
            stats.wtt_share += o.stats.wtt_share / n_samples;
            stats.stable_share += o.stats.stable_share / n_samples;
            stats.mistake_share += o.stats.mistake_share / n_samples;
            stats.fallback_students += o.stats.fallback_students;
        }
        behavior.push((dgp, stats));

        for &label in &method_labels(tau_grid) {
            let p = cfg.true_beta.len();
            let mut mean = vec![0.0; p];
            let mut sq = vec![0.0; p];
            let mut mse = vec![0.0; p];
            for o in &of_dgp {
                let est = o.summary(label).expect("estimated label");
                for j in 0..p {
                    mean[j] += est.beta[j] / n_samples;
                    sq[j] += est.beta[j] * est.beta[j] / n_samples;
                    let err = est.beta[j] - cfg.true_beta[j];
                    mse[j] += err * err / n_samples;
                }
            }
            let sd = (0..p)
                .map(|j| (sq[j] - mean[j] * mean[j]).max(0.0).sqrt())
                .collect();
            let rmse = mse.iter().map(|m| m.sqrt()).collect();
            estimates.push(MethodRow {
                dgp,
                label,
                mean,
                sd,
                rmse,
            });
        }

        for &label in &method_labels(tau_grid) {
            let count = of_dgp
                .iter()
                .filter(|o| o.selection.chosen == label)
                .count();
            selection.push((dgp, label, count as f64 / n_samples));
        }
    }
    Ok(McTables {
        behavior,
        estimates,
        selection,
        outcomes,
    })
}
