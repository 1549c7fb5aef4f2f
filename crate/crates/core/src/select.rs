//! Sequential Wald testing ladder over the preference-inference hypotheses.
//!
//! The most robust estimate (attention 0, "top") anchors every comparison.
//! The ladder first tests it against WTT; non-rejection selects WTT and
//! stops. Otherwise it walks the attention grid downward and selects the
//! first non-rejected level, falling back to the top estimate when every
//! comparison rejects. Testing in this order preserves the nominal size.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::Error;
use crate::estimate::normal::erfc;
use crate::Result;

/// Identifies which inference hypothesis produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum MethodLabel {
    Wtt,
    /// Attention 0: only the most likely feasible set.
    TepsTop,
    /// Attention level in percent; 100 uses every feasible set.
    Teps(u8),
}

impl std::fmt::Display for MethodLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MethodLabel::Wtt => write!(f, "WTT"),
            MethodLabel::TepsTop => write!(f, "TEPS^top"),
            MethodLabel::Teps(100) => write!(f, "TEPS^all"),
            MethodLabel::Teps(tau) => write!(f, "TEPS^{tau}"),
        }
    }
}

impl MethodLabel {
    /// Attention level in percent behind the label, when any.
    pub fn tau(&self) -> Option<f64> {
        match self {
            MethodLabel::Wtt => None,
            MethodLabel::TepsTop => Some(0.0),
            MethodLabel::Teps(t) => Some(*t as f64),
        }
    }
}

/// Point estimate and covariance produced by one inference hypothesis.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EstimateSummary {
    pub label: MethodLabel,
    pub beta: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl EstimateSummary {
    pub fn new(label: MethodLabel, beta: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let p = beta.len();
        if cov.len() != p || cov.iter().any(|row| row.len() != p) {
            return Err(Error::DimensionMismatch {
                what: "covariance matrix",
                expected: p,
                got: cov.len(),
            });
        }
        for (j, row) in cov.iter().enumerate() {
            for (l, &value) in row.iter().enumerate() {
                if (value - cov[l][j]).abs() > 1e-8 * (1.0 + value.abs()) {
                    return Err(Error::Invalid(format!(
                        "covariance not symmetric at ({j}, {l})"
                    )));
                }
            }
        }
        Ok(EstimateSummary { label, beta, cov })
    }
}

/// Survival function of the chi-square distribution with `df` degrees of
/// freedom, accurate to well below 1e-10 absolute.
///
/// Even `df` uses the closed-form Poisson sum; odd `df` starts from
/// `Q(1/2, y) = erfc(sqrt(y))` and applies the recurrence
/// `Q(a + 1, y) = Q(a, y) + y^a e^{-y} / Gamma(a + 1)`.
pub fn chi_square_sf(x: f64, df: u32) -> Result<f64> {
    if x < 0.0 || !x.is_finite() {
        return Err(Error::NegativeChiSquare(x));
    }
    if df == 0 {
        return Err(Error::InvalidConfig("chi-square needs df >= 1".into()));
    }
    let y = x / 2.0;
    if df.is_multiple_of(2) {
        // Q(k, y) = e^{-y} sum_{j<k} y^j / j!; all terms positive and <= 1.
        let k = df / 2;
        let mut term = (-y).exp();
        let mut sum = term;
        for j in 1..k {
            term *= y / j as f64;
            sum += term;
        }
        Ok(sum.min(1.0))
    } else {
        let mut q = erfc(y.sqrt());
        // term for a = 1/2: y^{1/2} e^{-y} / Gamma(3/2)
        let mut term = 2.0 * (y / std::f64::consts::PI).sqrt() * (-y).exp();
        let mut a = 0.5;
        for _ in 0..(df / 2) {
            q += term;
            a += 1.0;
            term *= y / a;
        }
        Ok(q.min(1.0))
    }
}

/// Wald test outcome.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WaldTest {
    pub stat: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Degrees of freedom handed to the reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfMode {
    /// Rank of the projected covariance difference (default).
    Rank,
    /// The full parameter dimension, regardless of rank.
    Nominal,
}

const EIGEN_CLIP: f64 = 1e-8;

/// Hausman-type Wald statistic `d' M^+ d` with `d` the estimate difference
/// and `M` the covariance difference of the robust and efficient estimates.
///
/// Finite samples can make `M` indefinite, so it is projected onto its
/// positive-semidefinite part: eigenvalues below `1e-8` times the largest
/// are zeroed and the pseudo-inverse is formed from the rest. The statistic
/// is therefore never negative. Degrees of freedom default to the retained
/// rank; `DfMode::Nominal` restores the textbook parameter count.
pub fn wald_statistic_with(
    robust: &EstimateSummary,
    efficient: &EstimateSummary,
    df_mode: DfMode,
) -> Result<WaldTest> {
    let p = robust.beta.len();
    if efficient.beta.len() != p {
        return Err(Error::DimensionMismatch {
            what: "estimate dimension",
            expected: p,
            got: efficient.beta.len(),
        });
    }
    let d = DVector::from_iterator(
        p,
        robust.beta.iter().zip(&efficient.beta).map(|(a, b)| a - b),
    );
    let m = DMatrix::from_fn(p, p, |j, l| {
        let raw_j = robust.cov[j][l] - efficient.cov[j][l];
        let raw_l = robust.cov[l][j] - efficient.cov[l][j];
        0.5 * (raw_j + raw_l) // symmetrize against representation noise
    });
    let eigen = SymmetricEigen::new(m);
    let lambda_max = eigen.eigenvalues.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let threshold = EIGEN_CLIP * lambda_max;
    let mut stat = 0.0;
    let mut rank = 0u32;
    if lambda_max > 0.0 {
        for (idx, &lambda) in eigen.eigenvalues.iter().enumerate() {
            if lambda > threshold {
                let proj = eigen.eigenvectors.column(idx).dot(&d);
                stat += proj * proj / lambda;
                rank += 1;
            }
        }
    }
    let df = match df_mode {
        DfMode::Rank => rank,
        DfMode::Nominal => p as u32,
    };
    let p_value = if df == 0 {
        1.0
    } else {
        chi_square_sf(stat, df)?
    };
    Ok(WaldTest { stat, df, p_value })
}

/// [`wald_statistic_with`] under the default rank degrees of freedom.
pub fn wald_statistic(robust: &EstimateSummary, efficient: &EstimateSummary) -> Result<WaldTest> {
    wald_statistic_with(robust, efficient, DfMode::Rank)
}

/// One rung of the testing ladder.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LadderEntry {
    pub comparison: MethodLabel,
    pub stat: f64,
    pub df: u32,
    pub p_value: f64,
    pub rejected: bool,
}

/// Outcome of the sequential selection procedure.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SelectionResult {
    pub chosen: MethodLabel,
    pub ladder: Vec<LadderEntry>,
    pub alpha: f64,
}

/// Runs the ladder: top vs WTT first, then top vs each attention level in
/// `tau_grid` descending, stopping at the first non-rejection. All labels in
/// the grid plus WTT must be present in `estimates`.
pub fn select_model(
    estimates: &[EstimateSummary],
    top: &EstimateSummary,
    tau_grid: &[u8],
    alpha: f64,
) -> Result<SelectionResult> {
    let find = |label: MethodLabel| -> Result<&EstimateSummary> {
        estimates
            .iter()
            .find(|e| e.label == label)
            .ok_or_else(|| Error::MissingEstimate(label.to_string()))
    };

    let mut ladder = Vec::new();
    let wtt = find(MethodLabel::Wtt)?;
    let test = wald_statistic(top, wtt)?;
    let rejected = test.p_value < alpha;
    ladder.push(LadderEntry {
        comparison: MethodLabel::Wtt,
        stat: test.stat,
        df: test.df,
        p_value: test.p_value,
        rejected,
    });
    if !rejected {
        return Ok(SelectionResult {
            chosen: MethodLabel::Wtt,
            ladder,
            alpha,
        });
    }

    let mut grid: Vec<u8> = tau_grid.to_vec();
    grid.sort_unstable_by(|a, b| b.cmp(a));
    for tau in grid {
        let label = MethodLabel::Teps(tau);
        let candidate = find(label)?;
        let test = wald_statistic(top, candidate)?;
        let rejected = test.p_value < alpha;
        ladder.push(LadderEntry {
            comparison: label,
            stat: test.stat,
            df: test.df,
            p_value: test.p_value,
            rejected,
        });
        if !rejected {
            return Ok(SelectionResult {
                chosen: label,
                ladder,
                alpha,
            });
        }
    }
    Ok(SelectionResult {
        chosen: MethodLabel::TepsTop,
        ladder,
        alpha,
    })
}
