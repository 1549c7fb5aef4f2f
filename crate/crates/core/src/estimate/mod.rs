//! Random-utility estimation under inferred preference relations: truncated
//! normal sampling, the Gibbs sampler, convergence diagnostics, and the
//! pairwise rank logit for latent priority scores.

mod gibbs;
pub mod normal;
mod psrf;
mod rank_logit;
mod truncnorm;

pub use gibbs::{gibbs_estimate, whitened_gram, GibbsConfig, PosteriorDraws, UtilitySpec};
pub use psrf::psrf;
pub use rank_logit::{fit_priority_logit, RankLogitFit};
pub use truncnorm::draw_truncated_normal;
