//! Matching-market simulation and robust preference inference.
//!
//! The crate simulates student-proposing deferred acceptance under priority
//! uncertainty (tie-breaking lotteries, unknown exam scores), derives each
//! student's distribution of feasible school sets, and infers preference
//! relations from submitted rank-order lists under two families of
//! hypotheses:
//!
//! * **WTT** (weak truth-telling): ranked schools are in true order and
//!   dominate all unranked schools.
//! * **TEPS** (transitive extension of preferences from stability): in every
//!   sufficiently likely uncertainty realization the assigned school is
//!   preferred to every simultaneously feasible school; relations are closed
//!   under transitivity. The attention parameter `tau` in `[0, 100]` keeps
//!   only the most likely feasible sets up to that cumulative probability.
//!
//! Inferred relations feed a Gibbs sampler for a multinomial-probit random
//! utility model, a sequential Wald ladder selects among the hypotheses, and
//! a Monte-Carlo harness replicates the whole pipeline on synthetic
//! economies, including counterfactual policy evaluation.

pub mod error;
pub mod estimate;
pub mod experiments;
pub mod infer;
pub mod market;
pub mod rng;
pub mod select;
pub mod sim;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
