//! Admission-policy transforms and counterfactual evaluation.
//!
//! Counterfactuals follow the convergence result for large markets: under
//! each policy every student is assumed to submit her true ordinal
//! preferences, drawn either from a posterior or fixed, and deferred
//! acceptance is run over fresh lotteries. Reports aggregate assigned-
//! program characteristics by student group.

use rayon::prelude::*;

use crate::error::Error;
use crate::estimate::PosteriorDraws;
use crate::market::{run_da, Rol};
use crate::rng::{Domain, Stream};
use crate::sim::{realize_scores, Economy, LotteryDraw, RuleMode, TieBreak};
use crate::Result;
use rand_distr::{Distribution, StandardNormal};

/// Priority-rule transforms. Each is idempotent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Policy {
    /// Identity.
    None,
    /// Screened and exam-based programs become pure single-group lotteries.
    NoScreening,
    /// Residence-based priorities are zeroed at programs flagged as zoned.
    NoZoning,
    /// Every priority disappears: one lottery, single tie-breaking.
    NoPriorities,
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Policy::None),
            "no-screening" | "no_screening" => Ok(Policy::NoScreening),
            "no-zoning" | "no_zoning" => Ok(Policy::NoZoning),
            "no-priorities" | "no_priorities" => Ok(Policy::NoPriorities),
            other => Err(Error::Invalid(format!("unknown policy {other:?}"))),
        }
    }
}

/// Applies a policy transform, returning the counterfactual economy.
pub fn apply_policy(economy: &Economy, policy: Policy) -> Economy {
    let mut out = economy.clone();
    match policy {
        Policy::None => {}
        Policy::NoScreening => {
            for c in 0..out.n_programs() {
                if matches!(out.rule.modes[c], RuleMode::Deterministic | RuleMode::Exam) {
                    out.rule.modes[c] = RuleMode::LotteryCoarse { n_groups: 1 };
                    for i in 0..out.n_students() {
                        out.set_intrinsic(i, c, 0.0);
                    }
                }
            }
        }
        Policy::NoZoning => {
            for c in 0..out.n_programs() {
                if out.zoned[c] {
                    for i in 0..out.n_students() {
                        out.set_intrinsic(i, c, 0.0);
                    }
                }
            }
        }
        Policy::NoPriorities => {
            for c in 0..out.n_programs() {
                out.rule.modes[c] = RuleMode::LotteryCoarse { n_groups: 1 };
            }
            out.rule.tiebreak = TieBreak::Stb;
            for i in 0..out.n_students() {
                for c in 0..out.n_programs() {
                    out.set_intrinsic(i, c, 0.0);
                }
            }
        }
    }
    out
}

/// Where counterfactual preferences come from.
pub enum PreferenceSource<'a> {
    /// Resample `(beta, sigma^2)` from retained posterior draws and add
    /// fresh model noise; needs the covariates and variance types.
    Posterior {
        draws: &'a PosteriorDraws,
        /// Per student, flat `programs x n_params` covariates.
        covariates: &'a [Vec<f64>],
        /// Variance type per program.
        program_types: &'a [usize],
    },
    /// Fixed flat `students x programs` utilities, identical in every
    /// preference draw.
    Fixed(&'a [f64]),
}

/// Counterfactual outcome summary: assigned-program attribute means by
/// student group, the between-group gap, and its spread across preference
/// draws.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CounterfactualReport {
    pub policy: Policy,
    pub n_groups: usize,
    pub n_attributes: usize,
    /// `attribute x group` mean of the assigned program's attribute.
    pub group_means: Vec<Vec<f64>>,
    /// `group_means[attr][1] - group_means[attr][0]` for two-group reports.
    pub gaps: Vec<f64>,
    /// Standard deviation of each gap across preference draws.
    pub gap_sds: Vec<f64>,
    pub unassigned_share: f64,
}

fn posterior_utilities(
    draws: &PosteriorDraws,
    covariates: &[Vec<f64>],
    program_types: &[usize],
    n_programs: usize,
    rng: &mut Stream,
) -> Vec<f64> {
    // One retained (beta, sigma^2) draw, uniformly across chains.
    let total: usize = draws.beta.iter().map(Vec::len).sum();
    let mut idx = rng.below(total as u64) as usize;
    let mut chain = 0;
    while idx >= draws.beta[chain].len() {
        idx -= draws.beta[chain].len();
        chain += 1;
    }
    let beta = &draws.beta[chain][idx];
    let sigma2 = &draws.sigma2[chain][idx];
    let p = beta.len();
    let k = covariates.len();
    let mut utilities = vec![0.0; k * n_programs];
    for i in 0..k {
        for c in 0..n_programs {
            let x = &covariates[i][c * p..(c + 1) * p];
            let mean: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            let z: f64 = StandardNormal.sample(rng);
            utilities[i * n_programs + c] = mean + z * sigma2[program_types[c]].sqrt();
        }
    }
    utilities
}

fn truthful_rols(utilities: &[f64], k: usize, n_programs: usize) -> Vec<Rol> {
    (0..k)
        .map(|i| {
            let row = &utilities[i * n_programs..(i + 1) * n_programs];
            let mut order: Vec<usize> = (0..n_programs).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            Rol::new(order).expect("permutation")
        })
        .collect()
}

/// Evaluates one policy under one preference source.
///
/// For each of `n_pref_draws` preference draws, truthful lists are submitted
/// to deferred acceptance under the transformed economy for
/// `n_lottery_draws` lotteries; assigned-program attributes are averaged by
/// `groups` (one group index per student).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_counterfactual(
    economy: &Economy,
    source: &PreferenceSource<'_>,
    policy: Policy,
    n_pref_draws: usize,
    n_lottery_draws: usize,
    groups: &[usize],
    seed: u64,
) -> Result<CounterfactualReport> {
    let k = economy.n_students();
    if groups.len() != k {
        return Err(Error::DimensionMismatch {
            what: "group labels",
            expected: k,
            got: groups.len(),
        });
    }
    if n_pref_draws == 0 || n_lottery_draws == 0 {
        return Err(Error::Invalid("draw counts must be positive".into()));
    }
    let transformed = apply_policy(economy, policy);
    let n_programs = transformed.n_programs();
    let n_attributes = transformed
        .programs
        .iter()
        .map(|p| p.attributes.len())
        .min()
        .unwrap_or(0);
    let n_groups = groups.iter().copied().max().map_or(1, |g| g + 1);

    // attribute x group sums per preference draw, plus unassigned count
    struct DrawTotals {
        sums: Vec<f64>,
        assigned: Vec<f64>,
        unassigned: u64,
    }
    let per_draw: Vec<DrawTotals> = (0..n_pref_draws)
        .into_par_iter()
        .map(|r| -> Result<DrawTotals> {
            let mut pref_rng = Stream::new(seed, Domain::Counterfactual, r as u64);
            let utilities = match source {
                PreferenceSource::Posterior {
                    draws,
                    covariates,
                    program_types,
                } => {
                    posterior_utilities(draws, covariates, program_types, n_programs, &mut pref_rng)
                }
                PreferenceSource::Fixed(u) => u.to_vec(),
            };
            let rols = truthful_rols(&utilities, k, n_programs);
            let mut sums = vec![0.0; n_attributes * n_groups];
            let mut assigned_count = vec![0.0; n_groups];
            let mut unassigned = 0u64;
            for l in 0..n_lottery_draws {
                let stream_index = (1u64 << 32) + (r * n_lottery_draws + l) as u64;
                let mut rng = Stream::new(seed, Domain::Counterfactual, stream_index);
                let draw = LotteryDraw::sample(&transformed.rule, k, &mut rng);
                let scores = realize_scores(&transformed, &draw)?;
                let matching = run_da(&rols, &scores, &transformed.programs)?;
                for (i, assignment) in matching.assignment.iter().enumerate() {
                    match assignment {
                        Some(c) => {
                            let g = groups[i];
                            assigned_count[g] += 1.0;
                            for a in 0..n_attributes {
                                sums[a * n_groups + g] += transformed.programs[*c].attributes[a];
                            }
                        }
                        None => unassigned += 1,
                    }
                }
            }
            Ok(DrawTotals {
                sums,
                assigned: assigned_count,
                unassigned,
            })
        })
        .collect::<Result<_>>()?;

    let mut group_means = vec![vec![0.0; n_groups]; n_attributes];
    let mut gaps = vec![0.0; n_attributes];
    let mut gap_sq = vec![0.0; n_attributes];
    let mut unassigned_total = 0u64;
    for totals in &per_draw {
        unassigned_total += totals.unassigned;
        for a in 0..n_attributes {
            let mut means = vec![0.0; n_groups];
            for g in 0..n_groups {
                let denom = totals.assigned[g].max(1.0);
                means[g] = totals.sums[a * n_groups + g] / denom;
                group_means[a][g] += means[g];
            }
            if n_groups >= 2 {
                let gap = means[1] - means[0];
                gaps[a] += gap;
                gap_sq[a] += gap * gap;
            }
        }
    }
    let nd = n_pref_draws as f64;
    for row in &mut group_means {
        for v in row.iter_mut() {
            *v /= nd;
        }
    }
    let mut gap_sds = vec![0.0; n_attributes];
    for a in 0..n_attributes {
        gaps[a] /= nd;
        let var = (gap_sq[a] / nd - gaps[a] * gaps[a]).max(0.0);
        gap_sds[a] = var.sqrt();
    }
    Ok(CounterfactualReport {
        policy,
        n_groups,
        n_attributes,
        group_means,
        gaps,
        gap_sds,
        unassigned_share: unassigned_total as f64 / (nd * n_lottery_draws as f64 * k as f64),
    })
}
