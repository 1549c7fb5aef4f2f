//! Pairwise rank logit for latent priority scores.
//!
//! Programs that actively rank applicants reveal pairwise orderings
//! `i > i'`. A linear latent score `v_i = beta' x_i` with logistic noise
//! gives the pairwise log-likelihood
//!
//! ```text
//! l(beta) = sum over pairs log( exp(v_winner) / (exp(v_i) + exp(v_i')) )
//! ```
//!
//! maximized here by Newton steps with backtracking to first-order
//! tolerance 1e-8. Perfectly separable rankings make the likelihood
//! unbounded; that is detected and reported rather than returned as a
//! garbage estimate. The ridge option adds an l2 penalty and restores a
//! finite maximizer.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON_ITER: usize = 200;

/// Fitted pairwise rank logit.
#[derive(Debug, Clone)]
pub struct RankLogitFit {
    pub beta: Vec<f64>,
    /// Fitted latent score `beta' x_i` for every student row supplied.
    pub fitted: Vec<f64>,
    pub log_likelihood: f64,
    /// Large-sample standard errors from the observed information.
    pub std_errors: Vec<f64>,
    pub n_pairs: usize,
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(sigmoid(t)) without overflow.
#[inline]
fn log_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

/// Maximum-likelihood fit from ordered pairs `(winner, loser)` of student
/// indices and per-student covariate rows.
///
/// `ridge` adds penalty `-ridge/2 * |beta|^2`; pass `None` for the plain
/// MLE, which errors with [`Error::CompleteSeparation`] when the rankings
/// are perfectly monotone in some covariate direction.
pub fn fit_priority_logit(
    pairs: &[(usize, usize)],
    covariates: &[Vec<f64>],
    ridge: Option<f64>,
) -> Result<RankLogitFit> {
    if pairs.is_empty() {
        return Err(Error::NoRankedPairs);
    }
    let p = covariates.first().map_or(0, Vec::len);
    for (i, row) in covariates.iter().enumerate() {
        if row.len() != p {
            return Err(Error::DimensionMismatch {
                what: "covariate row",
                expected: p,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCovariate {
                student: i,
                program: 0,
            });
        }
    }
    for &(w, l) in pairs {
        if w >= covariates.len() || l >= covariates.len() {
            return Err(Error::Invalid(format!(
                "pair ({w}, {l}) references a missing student row"
            )));
        }
    }
    let lambda = ridge.unwrap_or(0.0);
    if lambda < 0.0 {
        return Err(Error::InvalidConfig(
            "ridge penalty must be nonnegative".into(),
        ));
    }

    // Pair difference rows d = x_winner - x_loser; l = sum log sigmoid(d'b).
    let diffs: Vec<DVector<f64>> = pairs
        .iter()
        .map(|&(w, l)| {
            DVector::from_iterator(
                p,
                covariates[w].iter().zip(&covariates[l]).map(|(a, b)| a - b),
            )
        })
        .collect();

    let objective = |beta: &DVector<f64>| -> f64 {
        let penalty = 0.5 * lambda * beta.norm_squared();
        diffs.iter().map(|d| log_sigmoid(d.dot(beta))).sum::<f64>() - penalty
    };

    let mut beta = DVector::zeros(p);
    let mut value = objective(&beta);
    for _ in 0..MAX_NEWTON_ITER {
        let mut grad = -&beta * lambda;
        let mut hess = DMatrix::from_diagonal_element(p, p, lambda);
        for d in &diffs {
            let s = sigmoid(d.dot(&beta));
            grad += d * (1.0 - s);
            let w = s * (1.0 - s);
            hess.syger(w, d, d, 1.0); // hess += w * d d'
        }
        if grad.amax() <= GRAD_TOL {
            if lambda == 0.0 && separated(&value, pairs.len(), &beta) {
                return Err(Error::CompleteSeparation);
            }
            return finish(beta, value, hess, covariates, pairs.len());
        }
        let step = match hess.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => {
                if lambda == 0.0 {
                    return Err(Error::CompleteSeparation);
                }
                grad.clone() / (1.0 + grad.norm())
            }
        };
        // Backtracking keeps Newton honest far from the optimum.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = &beta + &step * t;
            let cand_value = objective(&candidate);
            if cand_value > value {
                beta = candidate;
                value = cand_value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No ascent direction improves the objective: numerically at
            // the optimum.
            if lambda == 0.0 && separated(&value, pairs.len(), &beta) {
                return Err(Error::CompleteSeparation);
            }
            let mut hess = DMatrix::from_diagonal_element(p, p, lambda);
            for d in &diffs {
                let s = sigmoid(d.dot(&beta));
                hess.syger(s * (1.0 - s), d, d, 1.0);
            }
            return finish(beta, value, hess, covariates, pairs.len());
        }
        if lambda == 0.0 && separated(&value, pairs.len(), &beta) {
            return Err(Error::CompleteSeparation);
        }
    }
    if lambda == 0.0 {
        // Newton failed to reach first-order tolerance in the iteration
        // budget; with an unbounded likelihood that is separation.
        return Err(Error::CompleteSeparation);
    }
    Err(Error::Invalid(
        "pairwise rank logit did not converge".into(),
    ))
}

/// Unbounded-likelihood heuristics: every pair nearly certain, or the
/// coefficients running away.
fn separated(value: &f64, n_pairs: usize, beta: &DVector<f64>) -> bool {
    value / n_pairs as f64 > -1e-6 || beta.amax() > 1e8
}

fn finish(
    beta: DVector<f64>,
    value: f64,
    hess: DMatrix<f64>,
    covariates: &[Vec<f64>],
    n_pairs: usize,
) -> Result<RankLogitFit> {
    let p = beta.len();
    let std_errors = match hess.cholesky() {
        Some(chol) => {
            let inv = chol.inverse();
            (0..p).map(|j| inv[(j, j)].max(0.0).sqrt()).collect()
        }
        None => vec![f64::NAN; p],
    };
    let fitted = covariates
        .iter()
        .map(|x| x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum())
        .collect();
    Ok(RankLogitFit {
        beta: beta.as_slice().to_vec(),
        fitted,
        log_likelihood: value,
        std_errors,
        n_pairs,
    })
}
