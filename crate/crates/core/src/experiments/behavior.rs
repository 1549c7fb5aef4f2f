//! Behavioral data-generating processes for the Monte-Carlo harness.
//!
//! Truth-tellers submit their full preference order. Under the mistake
//! regimes a fraction of students ("skippers") drop programs based on a
//! cutoff distribution simulated once under all-truthful play:
//!
//! * payoff-irrelevant mistakes drop programs the student is never matched
//!   with across the simulated uncertainty;
//! * payoff-relevant mistakes additionally drop programs whose simulated
//!   admission chance is below 10 percent.
//!
//! Skipped lists keep the true relative order. When the true favorite
//! program is itself never feasible and therefore skipped, it is flipped to
//! the back of the list. A student whose list would come out empty keeps
//! her single highest-assignment-probability program and is flagged.

use rayon::prelude::*;

use super::generate::{generate_economy, McConfig, SyntheticEconomy};
use crate::market::{run_da, Rol};
use crate::rng::{self, Domain, Stream};
use crate::sim::{realize_scores, simulate_cutoff_distribution, LotteryDraw};
use crate::Result;

/// Student behavior regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Dgp {
    /// Everyone truthful.
    Tt,
    /// Skip never-matched programs, flip a skipped favorite to the back.
    MisIrr,
    /// Additionally skip programs with admission probability below 10%.
    MisRel,
}

impl std::fmt::Display for Dgp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dgp::Tt => write!(f, "TT"),
            Dgp::MisIrr => write!(f, "MIS-IRR"),
            Dgp::MisRel => write!(f, "MIS-REL"),
        }
    }
}

/// Probability of being a potential skipper by disadvantaged status.
const SKIP_RATE_DISADVANTAGED: f64 = 0.956;
const SKIP_RATE_OTHER: f64 = 0.701;
/// Payoff-relevant skipping drops programs whose simulated chance of being
/// the student's assignment falls below this threshold.
const RELEVANT_THRESHOLD: f64 = 0.10;

/// Pooled truth-telling cutoff draws shared by every estimation sample.
#[derive(Debug, Clone)]
pub struct TtCutoffs {
    pub rows: Vec<Vec<f64>>,
}

/// Simulates the shared truth-telling cutoff pool from separate economies
/// so that no estimation sample's students drive their own skip decisions.
pub fn simulate_tt_cutoffs(cfg: &McConfig) -> Result<TtCutoffs> {
    const CUTOFF_ECONOMY_BASE: u64 = 1 << 32;
    let mut rows = Vec::with_capacity(cfg.tt_cutoff_samples * cfg.tt_cutoff_draws as usize);
    for e in 0..cfg.tt_cutoff_samples {
        let syn = generate_economy(cfg, CUTOFF_ECONOMY_BASE + e as u64)?;
        let seed = rng::derive_seed(cfg.seed, &[0x7c07, e as u64]);
        rows.extend(simulate_cutoff_distribution(
            &syn.economy,
            &syn.true_rols,
            cfg.tt_cutoff_draws,
            seed,
        )?);
    }
    Ok(TtCutoffs { rows })
}

/// Per-sample behavioral statistics, measured against true preferences.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BehaviorStats {
    pub mean_rol_length: f64,
    /// Share of students whose submitted list satisfies weak truth-telling.
    pub wtt_share: f64,
    /// Share matched with their favorite feasible program at the realized
    /// assignment.
    pub stable_share: f64,
    /// Share not submitting exactly the truthful full list.
    pub mistake_share: f64,
    /// Students rescued by the single-program fallback.
    pub fallback_students: usize,
}

/// Assignment probability of each program for one truthful student, with
/// the single-tie-breaking lottery integrated out analytically against each
/// cutoff row.
///
/// Against a fixed cutoff row, the student needs `lottery >= a_c` to clear
/// program `c` (with `a_c` from her intrinsic group), and she is assigned
/// the first program on her true order that clears. Program at position `j`
/// is therefore assigned exactly for lotteries in
/// `[a_j, min of a over earlier positions)`, a directly computable measure.
fn assignment_probabilities(syn: &SyntheticEconomy, tt: &TtCutoffs, student: usize) -> Vec<f64> {
    let n_programs = syn.n_programs();
    // Lottery threshold for clearing program c at the given cutoff.
    let threshold = |c: usize, cutoff: f64| -> f64 {
        match syn.economy.rule.modes[c] {
            crate::sim::RuleMode::LotteryCoarse { n_groups } => {
                cutoff * n_groups as f64 - syn.economy.intrinsic(student, c)
            }
            crate::sim::RuleMode::Deterministic => {
                if syn.economy.intrinsic(student, c) >= cutoff {
                    0.0
                } else {
                    1.0
                }
            }
            crate::sim::RuleMode::Exam => cutoff,
        }
    };
    let true_order = syn.true_rols[student].as_slice();
    let mut mass = vec![0.0; n_programs];
    for row in &tt.rows {
        let mut prefix_min = 1.0f64;
        for &c in true_order {
            let a = threshold(c, row[c]).max(0.0);
            if a < prefix_min {
                mass[c] += prefix_min - a;
                prefix_min = a;
            }
            if prefix_min == 0.0 {
                break;
            }
        }
    }
    let n = tt.rows.len() as f64;
    for m in &mut mass {
        *m /= n;
    }
    mass
}

fn skipper_rol(
    syn: &SyntheticEconomy,
    dgp: Dgp,
    student: usize,
    assign_prob: &[f64],
    fallback: &mut bool,
) -> Rol {
    let true_order = syn.true_rols[student].as_slice();
    let mut kept: Vec<usize> = true_order
        .iter()
        .copied()
        .filter(|&c| {
            if assign_prob[c] <= 0.0 {
                return false; // never matched across the simulated pool
            }
            if dgp == Dgp::MisRel && assign_prob[c] < RELEVANT_THRESHOLD {
                return false;
            }
            true
        })
        .collect();
    if kept.is_empty() {
        // Never matched anywhere in the simulated pool: submit the single
        // most promising program.
        *fallback = true;
        let best = *true_order
            .iter()
            .max_by(|&&a, &&b| assign_prob[a].total_cmp(&assign_prob[b]))
            .expect("nonempty list");
        return Rol::new(vec![best]).expect("single entry");
    }
    let favorite = true_order[0];
    if assign_prob[favorite] <= 0.0 {
        // Flip: a never-feasible favorite is ranked, but at the very end.
        kept.push(favorite);
    }
    Rol::new(kept).expect("distinct subset of a permutation")
}

fn is_wtt(submitted: &Rol, true_order: &Rol) -> bool {
    let true_rank: Vec<usize> = {
        let mut rank = vec![0; true_order.len()];
        for (pos, &c) in true_order.as_slice().iter().enumerate() {
            rank[c] = pos;
        }
        rank
    };
    let ranks: Vec<usize> = submitted.as_slice().iter().map(|&c| true_rank[c]).collect();
    // (a) listed in true preference order
    if ranks.windows(2).any(|w| w[0] > w[1]) {
        return false;
    }
    // (b) every ranked program preferred to every unranked one: the ranked
    // set must be a top segment of the true order.
    ranks.iter().all(|&r| r < submitted.len())
}

/// Applies a behavior regime to one economy, returning submitted lists and
/// sample statistics. `tt` must come from truth-telling simulations (see
/// [`simulate_tt_cutoffs`]); the behavior itself is deterministic in
/// `(cfg seed inside syn, behavior_seed)`.
pub fn apply_behavior(
    syn: &SyntheticEconomy,
    dgp: Dgp,
    tt: &TtCutoffs,
    behavior_seed: u64,
) -> Result<(Vec<Rol>, BehaviorStats)> {
    let k = syn.n_students();
    let mut fallback_flags = vec![false; k];
    let submitted: Vec<Rol> = match dgp {
        Dgp::Tt => syn.true_rols.clone(),
        Dgp::MisIrr | Dgp::MisRel => {
            let rols: Vec<(Rol, bool)> = (0..k)
                .into_par_iter()
                .map(|i| {
                    let mut rng = Stream::new(behavior_seed, Domain::Behavior, i as u64);
                    let rate = if syn.disadvantaged[i] {
                        SKIP_RATE_DISADVANTAGED
                    } else {
                        SKIP_RATE_OTHER
                    };
                    if rng.uniform() >= rate {
                        return (syn.true_rols[i].clone(), false); // never-skipper
                    }
                    let assign_prob = assignment_probabilities(syn, tt, i);
                    let mut fallback = false;
                    let rol = skipper_rol(syn, dgp, i, &assign_prob, &mut fallback);
                    (rol, fallback)
                })
                .collect();
            rols.into_iter()
                .enumerate()
                .map(|(i, (rol, fb))| {
                    fallback_flags[i] = fb;
                    rol
                })
                .collect()
        }
    };

    // Statistics against true preferences, with stability measured at one
    // realized assignment of the submitted lists.
    let realized_seed = rng::derive_seed(behavior_seed, &[0xda7a]);
    let mut rng = Stream::new(realized_seed, Domain::Behavior, 0);
    let draw = LotteryDraw::sample(&syn.economy.rule, k, &mut rng);
    let scores = realize_scores(&syn.economy, &draw)?;
    let matching = run_da(&submitted, &scores, &syn.economy.programs)?;
    let mut stable = 0usize;
    let mut wtt = 0usize;
    let mut mistakes = 0usize;
    let mut total_len = 0usize;
    for (i, rol) in submitted.iter().enumerate() {
        total_len += rol.len();
        if is_wtt(rol, &syn.true_rols[i]) {
            wtt += 1;
        }
        if rol != &syn.true_rols[i] {
            mistakes += 1;
        }
        // Favorite feasible program under true preferences.
        let favorite_feasible = syn.true_rols[i].as_slice().iter().copied().find(|&c| {
            matching.assignment[i] == Some(c) || scores.get(i, c) >= matching.cutoffs[c]
        });
        if matching.assignment[i] == favorite_feasible {
            stable += 1;
        }
    }
    let kf = k as f64;
    Ok((
        submitted,
        BehaviorStats {
            mean_rol_length: total_len as f64 / kf,
            wtt_share: wtt as f64 / kf,
            stable_share: stable as f64 / kf,
            mistake_share: mistakes as f64 / kf,
            fallback_students: fallback_flags.iter().filter(|&&f| f).count(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> McConfig {
        McConfig {
            n_students: 300,
            n_samples: 1,
            tt_cutoff_samples: 2,
            tt_cutoff_draws: 150,
            n_cutoff_draws: 200,
            seed: 42,
            ..McConfig::default()
        }
    }

    #[test]
    fn truth_telling_stats_are_exact() {
        let cfg = small_cfg();
        let tt = simulate_tt_cutoffs(&cfg).unwrap();
        let syn = generate_economy(&cfg, 0).unwrap();
        let (rols, stats) = apply_behavior(&syn, Dgp::Tt, &tt, 7).unwrap();
        assert_eq!(rols, syn.true_rols);
        assert_eq!(stats.mean_rol_length, 12.0);
        assert_eq!(stats.wtt_share, 1.0);
        assert_eq!(stats.stable_share, 1.0);
        assert_eq!(stats.mistake_share, 0.0);
        assert_eq!(stats.fallback_students, 0);
    }

    #[test]
    fn skippers_shorten_lists_but_keep_true_order() {
        let cfg = small_cfg();
        let tt = simulate_tt_cutoffs(&cfg).unwrap();
        let syn = generate_economy(&cfg, 1).unwrap();
        let (rols, stats) = apply_behavior(&syn, Dgp::MisIrr, &tt, 9).unwrap();
        assert!(stats.mean_rol_length < 12.0);
        assert!(stats.mistake_share > 0.3);
        for (i, rol) in rols.iter().enumerate() {
            let true_rank: Vec<usize> = syn.true_rols[i].as_slice().iter().enumerate().fold(
                vec![0; 12],
                |mut acc, (pos, &c)| {
                    acc[c] = pos;
                    acc
                },
            );
            let body = rol.as_slice();
            // Apart from a possible flipped favorite at the end, the list
            // preserves the true order.
            let core = if body.len() >= 2 && true_rank[*body.last().unwrap()] == 0 {
                &body[..body.len() - 1]
            } else {
                body
            };
            for w in core.windows(2) {
                assert!(true_rank[w[0]] < true_rank[w[1]]);
            }
        }
    }

    #[test]
    fn relevant_mistakes_drop_low_chance_programs_too() {
        let cfg = small_cfg();
        let tt = simulate_tt_cutoffs(&cfg).unwrap();
        let syn = generate_economy(&cfg, 2).unwrap();
        let (irr, s_irr) = apply_behavior(&syn, Dgp::MisIrr, &tt, 5).unwrap();
        let (rel, s_rel) = apply_behavior(&syn, Dgp::MisRel, &tt, 5).unwrap();
        assert!(s_rel.mean_rol_length <= s_irr.mean_rol_length);
        // Same skipper draw: every payoff-relevant list is a sublist of the
        // payoff-irrelevant one (up to the flipped tail entry).
        for (a, b) in rel.iter().zip(&irr) {
            for c in a.as_slice() {
                assert!(b.as_slice().contains(c));
            }
        }
    }

    #[test]
    fn behavior_is_deterministic() {
        let cfg = small_cfg();
        let tt = simulate_tt_cutoffs(&cfg).unwrap();
        let syn = generate_economy(&cfg, 3).unwrap();
        let a = apply_behavior(&syn, Dgp::MisRel, &tt, 11).unwrap();
        let b = apply_behavior(&syn, Dgp::MisRel, &tt, 11).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
