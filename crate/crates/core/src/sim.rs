//! Priority uncertainty: lottery tie-breaking, cutoff distributions, and
//! per-student feasible-set partitions.
//!
//! Draws are addressed by counter-based streams (`rng::Stream`), so the
//! per-draw work is embarrassingly parallel and the output depends only on
//! `(economy, rols, n_draws, seed, mode)`, never on thread count.

use rayon::prelude::*;

use crate::error::Error;
use crate::market::{feasible_mask, run_da, Matching, Program, Rol, ScoreMatrix, MAX_PROGRAMS};
use crate::rng::{Domain, Stream};
use crate::Result;

/// How a program turns intrinsic priorities into ex-post scores.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum RuleMode {
    /// Finitely many intrinsic groups `0..n_groups`, ties broken by lottery:
    /// `s = (group + lottery) / n_groups`.
    LotteryCoarse { n_groups: u32 },
    /// Score known in advance; the intrinsic value is copied through.
    Deterministic,
    /// Latent score realized at assignment time, drawn Uniform[0, 1].
    Exam,
}

/// Single vs multiple tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TieBreak {
    /// One lottery number per student, reused at every lottery program.
    Stb,
    /// Independent lottery number per student-program pair.
    Mtb,
}

/// Priority structure of a whole economy: one mode per program plus the
/// tie-breaking rule shared by all lottery programs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PriorityRule {
    pub modes: Vec<RuleMode>,
    pub tiebreak: TieBreak,
}

impl PriorityRule {
    pub fn uniform_lottery(n_programs: usize, n_groups: u32, tiebreak: TieBreak) -> Self {
        PriorityRule {
            modes: vec![RuleMode::LotteryCoarse { n_groups }; n_programs],
            tiebreak,
        }
    }

    fn has_exam(&self) -> bool {
        self.modes.iter().any(|m| matches!(m, RuleMode::Exam))
    }
}

/// Programs, priority structure, and per-student intrinsic priorities.
///
/// `intrinsic[i][c]` is the priority group for lottery programs (an integer
/// stored as `f64`), the known score for deterministic programs, and unused
/// for exam programs.
#[derive(Debug, Clone, PartialEq)]
pub struct Economy {
    pub programs: Vec<Program>,
    pub rule: PriorityRule,
    /// Programs whose intrinsic priorities encode residence zones; policy
    /// transforms that drop zoning zero these priorities.
    pub zoned: Vec<bool>,
    intrinsic: Vec<f64>,
    n_students: usize,
}

impl Economy {
    pub fn new(
        programs: Vec<Program>,
        rule: PriorityRule,
        intrinsic: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_programs = programs.len();
        if n_programs > MAX_PROGRAMS {
            return Err(Error::TooManyPrograms {
                got: n_programs,
                max: MAX_PROGRAMS,
            });
        }
        if rule.modes.len() != n_programs {
            return Err(Error::DimensionMismatch {
                what: "priority rule modes",
                expected: n_programs,
                got: rule.modes.len(),
            });
        }
        let n_students = intrinsic.len();
        let mut flat = Vec::with_capacity(n_students * n_programs);
        for row in &intrinsic {
            if row.len() != n_programs {
                return Err(Error::DimensionMismatch {
                    what: "intrinsic priority row",
                    expected: n_programs,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let economy = Economy {
            zoned: vec![false; n_programs],
            programs,
            rule,
            intrinsic: flat,
            n_students,
        };
        economy.validate_intrinsic()?;
        Ok(economy)
    }

    fn validate_intrinsic(&self) -> Result<()> {
        for (c, mode) in self.rule.modes.iter().enumerate() {
            if let RuleMode::LotteryCoarse { n_groups } = mode {
                if *n_groups == 0 {
                    return Err(Error::Invalid(format!(
                        "program {c} has zero priority groups"
                    )));
                }
                for i in 0..self.n_students {
                    let t = self.intrinsic(i, c);
                    if t < 0.0 || t >= *n_groups as f64 || t.fract() != 0.0 {
                        return Err(Error::GroupOutOfRange {
                            program: c,
                            group: t as u32,
                            n_groups: *n_groups,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn intrinsic(&self, student: usize, program: usize) -> f64 {
        self.intrinsic[student * self.programs.len() + program]
    }

    pub fn set_intrinsic(&mut self, student: usize, program: usize, value: f64) {
        let c = self.programs.len();
        self.intrinsic[student * c + program] = value;
    }

    pub fn n_students(&self) -> usize {
        self.n_students
    }

    pub fn n_programs(&self) -> usize {
        self.programs.len()
    }

    pub fn intrinsic_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.intrinsic.chunks(self.programs.len())
    }
}

/// One realization of all lottery and exam randomness.
#[derive(Debug, Clone)]
pub struct LotteryDraw {
    pub lottery: LotteryValues,
    /// Flat `students x programs` exam scores, present only when the economy
    /// has exam programs.
    pub exam: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum LotteryValues {
    /// One number per student.
    Stb(Vec<f64>),
    /// Flat `students x programs`.
    Mtb(Vec<f64>),
}

impl LotteryDraw {
    /// Sample every random component the rule needs for one assignment run.
    pub fn sample(rule: &PriorityRule, n_students: usize, rng: &mut Stream) -> Self {
        let n_programs = rule.modes.len();
        let lottery = match rule.tiebreak {
            TieBreak::Stb => LotteryValues::Stb((0..n_students).map(|_| rng.uniform()).collect()),
            TieBreak::Mtb => LotteryValues::Mtb(
                (0..n_students * n_programs)
                    .map(|_| rng.uniform())
                    .collect(),
            ),
        };
        let exam = rule.has_exam().then(|| {
            (0..n_students * n_programs)
                .map(|_| rng.uniform())
                .collect()
        });
        LotteryDraw { lottery, exam }
    }

    #[inline]
    fn lottery_value(&self, student: usize, program: usize, n_programs: usize) -> f64 {
        match &self.lottery {
            LotteryValues::Stb(v) => v[student],
            LotteryValues::Mtb(v) => v[student * n_programs + program],
        }
    }
}

/// Composite ex-post scores for one uncertainty realization.
///
/// Lottery programs score `(group + lottery) / n_groups`, deterministic
/// programs copy the known score, exam programs use the drawn latent score.
pub fn realize_scores(economy: &Economy, draw: &LotteryDraw) -> Result<ScoreMatrix> {
    let n_students = economy.n_students();
    let n_programs = economy.n_programs();
    match &draw.lottery {
        LotteryValues::Stb(v) if v.len() != n_students => {
            return Err(Error::DimensionMismatch {
                what: "stb lottery",
                expected: n_students,
                got: v.len(),
            })
        }
        LotteryValues::Mtb(v) if v.len() != n_students * n_programs => {
            return Err(Error::DimensionMismatch {
                what: "mtb lottery",
                expected: n_students * n_programs,
                got: v.len(),
            })
        }
        _ => {}
    }
    let mut scores = ScoreMatrix::zeros(n_students, n_programs);
    for i in 0..n_students {
        for (c, mode) in economy.rule.modes.iter().enumerate() {
            let s = match mode {
                RuleMode::LotteryCoarse { n_groups } => {
                    let t = economy.intrinsic(i, c);
                    let n = *n_groups as f64;
                    if !(0.0..n).contains(&t) {
                        return Err(Error::GroupOutOfRange {
                            program: c,
                            group: t as u32,
                            n_groups: *n_groups,
                        });
                    }
                    (t + draw.lottery_value(i, c, n_programs)) / n
                }
                RuleMode::Deterministic => economy.intrinsic(i, c),
                RuleMode::Exam => {
                    let exam = draw.exam.as_ref().ok_or(Error::Invalid(
                        "exam program present but draw carries no exam scores".into(),
                    ))?;
                    exam[i * n_programs + c]
                }
            };
            scores.set(i, c, s);
        }
    }
    Ok(scores)
}

fn run_one_draw(
    economy: &Economy,
    rols: &[Rol],
    seed: u64,
    draw_index: u64,
) -> Result<(ScoreMatrix, Matching)> {
    let mut rng = Stream::new(seed, Domain::CutoffSim, draw_index);
    let draw = LotteryDraw::sample(&economy.rule, economy.n_students(), &mut rng);
    let scores = realize_scores(economy, &draw)?;
    let matching = run_da(rols, &scores, &economy.programs)?;
    Ok((scores, matching))
}

/// Per-draw cutoff vectors from `n_draws` independent lottery realizations,
/// each run through deferred acceptance on the submitted lists.
pub fn simulate_cutoff_distribution(
    economy: &Economy,
    rols: &[Rol],
    n_draws: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n_draws == 0 {
        return Err(Error::Invalid("n_draws must be positive".into()));
    }
    (0..n_draws)
        .into_par_iter()
        .map(|d| run_one_draw(economy, rols, seed, d).map(|(_, m)| m.cutoffs))
        .collect()
}

/// One equivalence class of uncertainty realizations: all draws sharing this
/// feasible set.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeasibleClass {
    /// Bitmask over program ids.
    pub feasible: u128,
    /// Top-ranked feasible program on the student's list, `None` when no
    /// feasible program is ranked.
    pub assigned: Option<usize>,
    /// Number of draws that realized this feasible set.
    pub count: u64,
}

/// A student's feasible-set distribution: classes sorted by descending
/// count, ties by ascending bitmask. Counts over all classes sum to
/// `n_draws`, so class probabilities are exact rationals.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeasiblePartition {
    pub classes: Vec<FeasibleClass>,
    pub n_draws: u64,
}

impl FeasiblePartition {
    /// Build from raw `(mask, count)` pairs, deriving assignments from the
    /// student's list and applying the canonical ordering. Duplicate masks
    /// are merged: equal feasible sets are one equivalence class.
    pub fn from_counts(counts: impl IntoIterator<Item = (u128, u64)>, rol: &Rol) -> Self {
        let mut merged: std::collections::HashMap<u128, u64> = std::collections::HashMap::new();
        for (mask, count) in counts {
            *merged.entry(mask).or_insert(0) += count;
        }
        let mut classes: Vec<FeasibleClass> = merged
            .into_iter()
            .filter(|&(_, n)| n > 0)
            .map(|(feasible, count)| FeasibleClass {
                feasible,
                assigned: rol.best_feasible(feasible),
                count,
            })
            .collect();
        classes.sort_by(|a, b| b.count.cmp(&a.count).then(a.feasible.cmp(&b.feasible)));
        let n_draws = classes.iter().map(|c| c.count).sum();
        FeasiblePartition { classes, n_draws }
    }

    /// Build a fixture from exact probabilities with the given denominator;
    /// each `prob * denominator` must be integral.
    pub fn from_probs(
        entries: impl IntoIterator<Item = (u128, f64)>,
        denominator: u64,
        rol: &Rol,
    ) -> Result<Self> {
        let mut counts = Vec::new();
        let mut total = 0u64;
        for (mask, prob) in entries {
            let scaled = prob * denominator as f64;
            if scaled < 0.0 || (scaled - scaled.round()).abs() > 1e-9 {
                return Err(Error::Invalid(format!(
                    "probability {prob} is not a multiple of 1/{denominator}"
                )));
            }
            let count = scaled.round() as u64;
            total += count;
            counts.push((mask, count));
        }
        if total != denominator {
            return Err(Error::Invalid(format!(
                "class probabilities sum to {}/{denominator}, expected 1",
                total
            )));
        }
        Ok(Self::from_counts(counts, rol))
    }

    /// Empirical probability of one class.
    pub fn prob(&self, class: &FeasibleClass) -> f64 {
        class.count as f64 / self.n_draws as f64
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// How cutoffs and the student's own score are paired when deriving
/// feasible sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PartitionMode {
    /// Cutoffs and own score come from the same assignment run. The student
    /// stays in the economy that generates her cutoffs.
    Joint,
    /// Two-stage protocol: the cutoff distribution is simulated first, then
    /// fresh own-score draws are compared against resampled cutoff vectors.
    Independent,
}

/// Feasible-set partitions for every student.
pub fn build_feasible_partition(
    economy: &Economy,
    rols: &[Rol],
    n_draws: u64,
    seed: u64,
    mode: PartitionMode,
) -> Result<Vec<FeasiblePartition>> {
    if n_draws == 0 {
        return Err(Error::Invalid("n_draws must be positive".into()));
    }
    let n_students = economy.n_students();
    if rols.len() != n_students {
        return Err(Error::DimensionMismatch {
            what: "rank-order lists",
            expected: n_students,
            got: rols.len(),
        });
    }
    let masks: Vec<Vec<u128>> = match mode {
        PartitionMode::Joint => (0..n_draws)
            .into_par_iter()
            .map(|d| {
                let (scores, matching) = run_one_draw(economy, rols, seed, d)?;
                Ok((0..n_students)
                    .map(|i| {
                        feasible_mask(scores.row(i), &matching.cutoffs, matching.assignment[i])
                    })
                    .collect())
            })
            .collect::<Result<_>>()?,
        PartitionMode::Independent => {
            let cutoffs = simulate_cutoff_distribution(economy, rols, n_draws, seed)?;
            (0..n_draws)
                .into_par_iter()
                .map(|d| {
                    let mut rng = Stream::new(seed, Domain::OwnScore, d);
                    let draw = LotteryDraw::sample(&economy.rule, n_students, &mut rng);
                    let scores = realize_scores(economy, &draw)?;
                    let row = &cutoffs[rng.below(cutoffs.len() as u64) as usize];
                    Ok((0..n_students)
                        .map(|i| feasible_mask(scores.row(i), row, None))
                        .collect())
                })
                .collect::<Result<_>>()?
        }
    };

    let mut per_student: Vec<std::collections::HashMap<u128, u64>> =
        vec![std::collections::HashMap::new(); n_students];
    for draw_masks in &masks {
        for (i, &mask) in draw_masks.iter().enumerate() {
            *per_student[i].entry(mask).or_insert(0) += 1;
        }
    }
    Ok(per_student
        .into_iter()
        .zip(rols)
        .map(|(counts, rol)| FeasiblePartition::from_counts(counts, rol))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lottery_economy(
        n_students: usize,
        capacities: &[usize],
        n_groups: u32,
        groups: Vec<Vec<f64>>,
    ) -> Economy {
        let programs = capacities
            .iter()
            .enumerate()
            .map(|(id, &cap)| Program::new(id, id, cap))
            .collect();
        let rule = PriorityRule::uniform_lottery(capacities.len(), n_groups, TieBreak::Stb);
        let _ = n_students;
        Economy::new(programs, rule, groups).unwrap()
    }

    #[test]
    fn composite_score_formula() {
        let economy = lottery_economy(1, &[1], 4, vec![vec![3.0]]);
        let draw = LotteryDraw {
            lottery: LotteryValues::Stb(vec![0.5]),
            exam: None,
        };
        let scores = realize_scores(&economy, &draw).unwrap();
        assert_eq!(scores.get(0, 0), 0.875);
    }

    #[test]
    fn floor_of_lowest_group_is_zero() {
        for n_groups in [1u32, 2, 4, 7] {
            let economy = lottery_economy(1, &[1], n_groups, vec![vec![0.0]]);
            let draw = LotteryDraw {
                lottery: LotteryValues::Stb(vec![0.0]),
                exam: None,
            };
            let scores = realize_scores(&economy, &draw).unwrap();
            assert_eq!(scores.get(0, 0), 0.0);
        }
    }

    #[test]
    fn stb_reuses_one_scalar_at_every_program() {
        let economy = lottery_economy(2, &[1, 1, 1], 4, vec![vec![1.0; 3], vec![2.0; 3]]);
        let mut rng = Stream::new(11, Domain::Test, 0);
        let draw = LotteryDraw::sample(&economy.rule, 2, &mut rng);
        let scores = realize_scores(&economy, &draw).unwrap();
        let LotteryValues::Stb(l) = &draw.lottery else {
            panic!("expected stb draw")
        };
        for i in 0..2 {
            for c in 0..3 {
                let expected = (economy.intrinsic(i, c) + l[i]) / 4.0;
                assert_eq!(scores.get(i, c), expected);
            }
        }
    }

    #[test]
    fn group_out_of_range_is_rejected() {
        let programs = vec![Program::new(0, 0, 1)];
        let rule = PriorityRule::uniform_lottery(1, 2, TieBreak::Stb);
        assert!(matches!(
            Economy::new(programs, rule, vec![vec![2.0]]),
            Err(Error::GroupOutOfRange { .. })
        ));
    }

    #[test]
    fn undersubscription_forces_zero_cutoffs() {
        let economy = lottery_economy(1, &[1, 1], 1, vec![vec![0.0, 0.0]]);
        let rols = vec![Rol::new(vec![0, 1]).unwrap()];
        let cutoffs = simulate_cutoff_distribution(&economy, &rols, 50, 3).unwrap();
        assert_eq!(cutoffs.len(), 50);
        for row in cutoffs {
            assert_eq!(row, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn same_seed_any_thread_count_same_output() {
        let groups = (0..40)
            .map(|i| (0..3).map(|c| ((i + c) % 4) as f64).collect())
            .collect();
        let economy = lottery_economy(40, &[5, 10, 20], 4, groups);
        let rols: Vec<Rol> = (0..40)
            .map(|i| match i % 3 {
                0 => Rol::new(vec![0, 1, 2]).unwrap(),
                1 => Rol::new(vec![2, 1]).unwrap(),
                _ => Rol::new(vec![1, 0, 2]).unwrap(),
            })
            .collect();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                (
                    simulate_cutoff_distribution(&economy, &rols, 64, 17).unwrap(),
                    build_feasible_partition(&economy, &rols, 64, 17, PartitionMode::Joint)
                        .unwrap(),
                )
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn single_draw_gives_single_certain_class() {
        let economy = lottery_economy(2, &[1, 1], 4, vec![vec![1.0, 2.0], vec![3.0, 0.0]]);
        let rols = vec![Rol::new(vec![0, 1]).unwrap(), Rol::new(vec![0, 1]).unwrap()];
        let parts = build_feasible_partition(&economy, &rols, 1, 5, PartitionMode::Joint).unwrap();
        for p in parts {
            assert_eq!(p.classes.len(), 1);
            assert_eq!(p.classes[0].count, 1);
            assert_eq!(p.n_draws, 1);
        }
    }

    #[test]
    fn class_probabilities_sum_to_one() {
        for seed in 0..8u64 {
            let groups = (0..20)
                .map(|i| {
                    (0..4)
                        .map(|c| ((seed as usize + i * 2 + c) % 3) as f64)
                        .collect()
                })
                .collect();
            let economy = lottery_economy(20, &[3, 5, 2, 4], 3, groups);
            let rols: Vec<Rol> = (0..20)
                .map(|i| match i % 4 {
                    0 => Rol::new(vec![3, 2, 1, 0]).unwrap(),
                    1 => Rol::new(vec![0, 3]).unwrap(),
                    2 => Rol::empty(),
                    _ => Rol::new(vec![1, 2]).unwrap(),
                })
                .collect();
            for mode in [PartitionMode::Joint, PartitionMode::Independent] {
                let parts = build_feasible_partition(&economy, &rols, 200, seed, mode).unwrap();
                for p in &parts {
                    assert_eq!(p.classes.iter().map(|c| c.count).sum::<u64>(), 200);
                    assert!(p.classes.len() <= 200.min(1 << 4));
                    let total: f64 = p.classes.iter().map(|c| p.prob(c)).sum();
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn assigned_is_rol_maximal_feasible() {
        let groups = (0..12)
            .map(|i| (0..3).map(|c| ((i + 2 * c) % 4) as f64).collect())
            .collect();
        let economy = lottery_economy(12, &[2, 3, 4], 4, groups);
        let rols: Vec<Rol> = (0..12)
            .map(|i| {
                if i % 2 == 0 {
                    Rol::new(vec![2, 0]).unwrap()
                } else {
                    Rol::new(vec![1]).unwrap()
                }
            })
            .collect();
        let parts =
            build_feasible_partition(&economy, &rols, 128, 9, PartitionMode::Joint).unwrap();
        for (p, rol) in parts.iter().zip(&rols) {
            for class in &p.classes {
                assert_eq!(class.assigned, rol.best_feasible(class.feasible));
                if let Some(a) = class.assigned {
                    assert!(class.feasible & (1 << a) != 0);
                }
            }
        }
    }

    #[test]
    fn pure_stb_fixed_cutoffs_give_nested_event_chain() {
        // With a single lottery number against fixed ordered cutoffs, the
        // only possible feasibility events are a chain: nothing, the
        // lowest-cutoff program, the bottom two, all three.
        let cutoffs = [0.7, 0.5, 0.2];
        let mut rng = Stream::new(31, Domain::Test, 0);
        let rol = Rol::new(vec![1, 0, 2]).unwrap();
        let mut counts: std::collections::HashMap<u128, u64> = std::collections::HashMap::new();
        for _ in 0..4000 {
            let lottery = rng.uniform();
            let row = [lottery, lottery, lottery];
            *counts
                .entry(crate::market::feasible_mask(&row, &cutoffs, None))
                .or_insert(0) += 1;
        }
        let partition = FeasiblePartition::from_counts(counts, &rol);
        let expected: Vec<u128> = vec![0b000, 0b100, 0b110, 0b111];
        let mut seen: Vec<u128> = partition.classes.iter().map(|c| c.feasible).collect();
        seen.sort();
        assert_eq!(seen, expected);
        let mut masks: Vec<u128> = partition.classes.iter().map(|c| c.feasible).collect();
        masks.sort_by_key(|m| m.count_ones());
        for pair in masks.windows(2) {
            assert_eq!(pair[0] & pair[1], pair[0], "events must form a chain");
        }
    }

    #[test]
    fn example_partition_probabilities_round_trip() {
        let rol = Rol::new(vec![4, 3, 2, 1]).unwrap();
        let mask = |ids: &[usize]| ids.iter().fold(0u128, |m, &c| m | (1 << c));
        let partition = FeasiblePartition::from_probs(
            [
                (mask(&[4, 3]), 0.4),
                (mask(&[1, 0]), 0.3),
                (mask(&[2, 1, 0]), 0.25),
                (mask(&[4, 1]), 0.05),
            ],
            10_000,
            &rol,
        )
        .unwrap();
        assert_eq!(partition.classes.len(), 4);
        let probs: Vec<f64> = partition
            .classes
            .iter()
            .map(|c| partition.prob(c))
            .collect();
        assert_eq!(probs, vec![0.4, 0.3, 0.25, 0.05]);
        let assigned: Vec<_> = partition.classes.iter().map(|c| c.assigned).collect();
        assert_eq!(assigned, vec![Some(4), Some(1), Some(2), Some(4)]);
    }
}
