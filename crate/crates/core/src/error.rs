//! Crate error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid program id {id} (economy has {n_programs} programs)")]
    InvalidProgramId { id: usize, n_programs: usize },

    #[error("duplicate program id {id} in rank-order list")]
    DuplicateRolEntry { id: usize },

    #[error("economy has {got} programs, at most {max} supported")]
    TooManyPrograms { got: usize, max: usize },

    #[error("priority group {group} out of range for program {program} with {n_groups} groups")]
    GroupOutOfRange {
        program: usize,
        group: u32,
        n_groups: u32,
    },

    #[error("feasible-set partition is empty")]
    EmptyPartition,

    #[error("attention parameter {0} outside [0, 100]")]
    InvalidAttention(f64),

    #[error("assigned program {assigned} of a partition class is not the top ranked feasible program ({expected:?})")]
    InconsistentAssignment {
        assigned: usize,
        expected: Option<usize>,
    },

    #[error("relation set contains a cycle: {}", format_cycle(cycle))]
    CycleDetected { cycle: Vec<usize> },

    #[error("invalid truncation bounds: lower {lower} >= upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },

    #[error("non-finite covariate at student {student}, program {program}")]
    NonFiniteCovariate { student: usize, program: usize },

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("PSRF needs at least 2 chains of equal length >= 2")]
    InsufficientChains,

    #[error("within-chain variance is zero; PSRF undefined")]
    ZeroWithinVariance,

    #[error("negative chi-square argument {0}")]
    NegativeChiSquare(f64),

    #[error(
        "complete separation detected in pairwise rank logit; rerun with the ridge penalty enabled"
    )]
    CompleteSeparation,

    #[error("no ranked pairs supplied to the pairwise rank logit")]
    NoRankedPairs,

    #[error("selection requires an estimate labelled {0}")]
    MissingEstimate(String),

    #[error("{0}")]
    Invalid(String),
}

fn format_cycle(cycle: &[usize]) -> String {
    cycle
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" -> ")
}
