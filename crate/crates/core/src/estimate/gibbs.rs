//! Gibbs sampler for the multinomial-probit random utility model under
//! inferred preference relations.
//!
//! Utilities follow `U_{i,c} = X_{i,c} beta + eps_{i,c}` with
//! `eps ~ N(0, sigma^2_{type(c)})`, one variance per program type and one
//! type's variance normalized to 1. Each student's inferred relation set
//! bounds her latent utilities; the sampler alternates between truncated
//! utility draws, the conjugate normal update for `beta`, and scalar
//! inverse-Wishart (inverse-gamma) updates for the free variances.
//!
//! Chains run in parallel; the utility sweep inside a chain is sequential
//! (the update order is part of the algorithm), with every student drawing
//! from a private counter-based stream so results never depend on
//! scheduling. Program utilities within a student are updated strictly in
//! index order; bounds mix already-updated values from this sweep with the
//! previous sweep's values for programs not yet reached.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use super::truncnorm::draw_truncated_normal;
use crate::error::Error;
use crate::infer::{transitive_closure, RelationSet};
use crate::rng::{Domain, Stream};
use crate::Result;

/// Covariates and variance typing for the random utility model.
#[derive(Debug, Clone)]
pub struct UtilitySpec {
    /// Per student, a flat `n_programs x n_params` row-major matrix.
    covariates: Vec<Vec<f64>>,
    /// Variance type of each program, dense values `0..n_types`.
    program_types: Vec<usize>,
    /// The type whose error variance is pinned to 1.
    normalized_type: usize,
    n_params: usize,
    n_types: usize,
}

impl UtilitySpec {
    pub fn new(
        covariates: Vec<Vec<f64>>,
        program_types: Vec<usize>,
        normalized_type: usize,
        n_params: usize,
    ) -> Result<Self> {
        let n_programs = program_types.len();
        let n_types = program_types.iter().copied().max().map_or(0, |m| m + 1);
        if normalized_type >= n_types {
            return Err(Error::InvalidConfig(format!(
                "normalized type {normalized_type} out of range ({n_types} types)"
            )));
        }
        for (i, row) in covariates.iter().enumerate() {
            if row.len() != n_programs * n_params {
                return Err(Error::DimensionMismatch {
                    what: "covariate row",
                    expected: n_programs * n_params,
                    got: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteCovariate {
                    student: i,
                    program: j / n_params,
                });
            }
        }
        Ok(UtilitySpec {
            covariates,
            program_types,
            normalized_type,
            n_params,
            n_types,
        })
    }

    /// Single variance type for all programs (that type is normalized).
    pub fn homoskedastic(
        covariates: Vec<Vec<f64>>,
        n_programs: usize,
        n_params: usize,
    ) -> Result<Self> {
        Self::new(covariates, vec![0; n_programs], 0, n_params)
    }

    pub fn n_students(&self) -> usize {
        self.covariates.len()
    }

    pub fn n_programs(&self) -> usize {
        self.program_types.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn program_types(&self) -> &[usize] {
        &self.program_types
    }

    #[inline]
    fn x(&self, student: usize, program: usize) -> &[f64] {
        &self.covariates[student][program * self.n_params..(program + 1) * self.n_params]
    }
}

/// Sampler configuration.
#[derive(Debug, Clone)]
pub struct GibbsConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    /// Prior precision `A = prior_precision * I` for `beta ~ N(0, A^{-1})`.
    pub prior_precision: f64,
    /// Optional per-type `(nu, V0)` inverse-variance prior; defaults to
    /// `3 + (#programs of that type)` for both entries.
    pub sigma_prior: Option<Vec<(f64, f64)>>,
    pub seed: u64,
    /// Assert on every retained sweep that utilities respect the relations.
    pub check_relations: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            n_iter: 20_000,
            burn_in: 15_000,
            thin: 1,
            n_chains: 3,
            prior_precision: 0.01,
            sigma_prior: None,
            seed: 0,
            check_relations: false,
        }
    }
}

impl GibbsConfig {
    fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.thin == 0 || self.n_chains == 0 {
            return Err(Error::InvalidConfig(
                "n_iter, thin, and n_chains must be positive".into(),
            ));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "burn_in {} must be below n_iter {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.prior_precision <= 0.0 || self.prior_precision.is_nan() {
            return Err(Error::InvalidConfig(
                "prior precision must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Retained posterior draws plus their pooled summary.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    /// `beta[chain][draw][param]`.
    pub beta: Vec<Vec<Vec<f64>>>,
    /// `sigma2[chain][draw][type]`; the normalized type stays at 1.
    pub sigma2: Vec<Vec<Vec<f64>>>,
    /// Posterior mean of `beta` pooled over chains.
    pub mean: Vec<f64>,
    /// Posterior covariance of `beta` pooled over chains.
    pub cov: Vec<Vec<f64>>,
}

impl PosteriorDraws {
    pub fn n_retained(&self) -> usize {
        self.beta.iter().map(Vec::len).sum()
    }

    /// Per-parameter chains for convergence diagnostics.
    pub fn beta_chains(&self, param: usize) -> Vec<Vec<f64>> {
        self.beta
            .iter()
            .map(|chain| chain.iter().map(|draw| draw[param]).collect())
            .collect()
    }

    /// Pooled draws of one parameter.
    pub fn beta_pooled(&self, param: usize) -> Vec<f64> {
        self.beta
            .iter()
            .flat_map(|chain| chain.iter().map(move |draw| draw[param]))
            .collect()
    }

    #[allow(clippy::needless_range_loop)] // reads cov[j][l] while writing cov[l][j]
    fn summarize(beta: &[Vec<Vec<f64>>], n_params: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n: usize = beta.iter().map(Vec::len).sum();
        let mut mean = vec![0.0; n_params];
        for chain in beta {
            for draw in chain {
                for (m, &v) in mean.iter_mut().zip(draw) {
                    *m += v;
                }
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = vec![vec![0.0; n_params]; n_params];
        for chain in beta {
            for draw in chain {
                for (j, row) in cov.iter_mut().enumerate() {
                    let dj = draw[j] - mean[j];
                    for (l, cell) in row.iter_mut().enumerate().skip(j) {
                        *cell += dj * (draw[l] - mean[l]);
                    }
                }
            }
        }
        let denom = (n.max(2) - 1) as f64;
        for j in 0..n_params {
            for l in j..n_params {
                let value = cov[j][l] / denom;
                cov[j][l] = value;
                cov[l][j] = value;
            }
        }
        (mean, cov)
    }
}

/// Per-student truncation structure derived from her relation set, flat in
/// memory. For each program, two comparator slices: programs inferred worse
/// (lower bounds) and programs inferred preferred (upper bounds). With the
/// utility buffer updated in place, comparators below the current program
/// hold this sweep's draws and those above hold the previous sweep's, which
/// is exactly the bound recipe.
struct BoundLists {
    ids: Vec<u8>,
    /// Per program: `[less_start, less_end (= more_start), more_end]`
    /// offsets into `ids`.
    offsets: Vec<u32>,
    pairs: Vec<(u8, u8)>,
}

impl BoundLists {
    #[inline]
    fn less(&self, c: usize) -> &[u8] {
        &self.ids[self.offsets[2 * c] as usize..self.offsets[2 * c + 1] as usize]
    }

    #[inline]
    fn more(&self, c: usize) -> &[u8] {
        &self.ids[self.offsets[2 * c + 1] as usize..self.offsets[2 * c + 2] as usize]
    }
}

fn build_bounds(relations: &RelationSet, n_programs: usize) -> Result<BoundLists> {
    if relations.n_programs() > n_programs {
        return Err(Error::DimensionMismatch {
            what: "relation set programs",
            expected: n_programs,
            got: relations.n_programs(),
        });
    }
    // Cyclic input would deadlock the truncation bounds into an empty
    // interval; closing the relations also keeps every mid-sweep interval
    // satisfiable. On the support of the joint distribution the implied
    // bounds coincide with the direct ones, so the conditionals are
    // unchanged.
    let closed = transitive_closure(relations)?;
    let pairs: Vec<(u8, u8)> = closed
        .pairs()
        .into_iter()
        .map(|(x, y)| (x as u8, y as u8))
        .collect();
    let mut ids = Vec::with_capacity(2 * pairs.len());
    let mut offsets = Vec::with_capacity(2 * n_programs + 1);
    offsets.push(0);
    for c in 0..n_programs {
        let worse = closed.worse_than(c);
        let mut m = worse;
        while m != 0 {
            ids.push(m.trailing_zeros() as u8);
            m &= m - 1;
        }
        offsets.push(ids.len() as u32);
        for x in 0..n_programs {
            if closed.contains(x, c) {
                ids.push(x as u8);
            }
        }
        offsets.push(ids.len() as u32);
    }
    Ok(BoundLists {
        ids,
        offsets,
        pairs,
    })
}

struct ChainState {
    beta: DVector<f64>,
    sigma2: Vec<f64>,
    utilities: Vec<f64>, // k x C, updated in place
}

/// Draws `sigma^2 ~ IW(nu, v0)` in its scalar reduction `IG(nu/2, v0/2)`.
fn draw_inverse_gamma(nu: f64, v0: f64, rng: &mut Stream) -> f64 {
    let gamma = Gamma::new(nu / 2.0, 1.0).expect("positive shape");
    let g: f64 = gamma.sample(rng);
    (v0 / 2.0) / g
}

/// Gram matrices of the covariates by variance type; the normal-equations
/// matrix of the whitened regression is `sum_t gram[t] / sigma2[t]`.
fn type_grams(spec: &UtilitySpec) -> Vec<DMatrix<f64>> {
    let p = spec.n_params;
    let mut grams = vec![DMatrix::zeros(p, p); spec.n_types];
    for i in 0..spec.n_students() {
        for c in 0..spec.n_programs() {
            let x = spec.x(i, c);
            let g = &mut grams[spec.program_types[c]];
            for (j, &xj) in x.iter().enumerate() {
                for (l, &xl) in x.iter().enumerate().skip(j) {
                    g[(j, l)] += xj * xl;
                }
            }
        }
    }
    for g in &mut grams {
        for j in 0..p {
            for l in 0..j {
                g[(j, l)] = g[(l, j)];
            }
        }
    }
    grams
}

/// Normal-equations matrix `X*' X*` of the whitened stacked regression,
/// exposed so the identity with the per-type Gram accumulation can be
/// checked against explicit row-by-row whitening.
pub fn whitened_gram(spec: &UtilitySpec, sigma2_by_type: &[f64]) -> DMatrix<f64> {
    let grams = type_grams(spec);
    let p = spec.n_params;
    let mut m = DMatrix::zeros(p, p);
    for (t, g) in grams.iter().enumerate() {
        m += g / sigma2_by_type[t];
    }
    m
}

/// Retained (beta, sigma^2) draws of one chain.
type ChainDraws = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn run_chain(
    spec: &UtilitySpec,
    cfg: &GibbsConfig,
    bounds: &[BoundLists],
    grams: &[DMatrix<f64>],
    sigma_prior: &[(f64, f64)],
    xflat: &[f64],
    chain: usize,
) -> Result<ChainDraws> {
    let k = spec.n_students();
    let n_programs = spec.n_programs();
    let p = spec.n_params;
    let n_types = spec.n_types;
    let row_len = n_programs * p;
    let chain_base = (chain as u64) << 32;
    let mut main_rng = Stream::new(cfg.seed, Domain::Gibbs, chain_base);
    // One private stream per student: the sweep stays reproducible however
    // it is scheduled.
    let mut student_rngs: Vec<Stream> = (0..k)
        .map(|i| Stream::new(cfg.seed, Domain::Gibbs, chain_base + 1 + i as u64))
        .collect();

    // Initialization: variances and coefficients from their priors.
    let mut state = ChainState {
        beta: DVector::from_fn(p, |_, _| {
            let z: f64 = StandardNormal.sample(&mut main_rng);
            z / cfg.prior_precision.sqrt()
        }),
        sigma2: (0..n_types)
            .map(|t| {
                if t == spec.normalized_type {
                    1.0
                } else {
                    let (nu, v0) = sigma_prior[t];
                    draw_inverse_gamma(nu, v0, &mut main_rng)
                }
            })
            .collect(),
        utilities: vec![0.0; k * n_programs],
    };

    let sigma_of = |sigma2: &[f64], c: usize| sigma2[spec.program_types[c]];

    // Initial utility sweep: truncations use only comparators already drawn
    // in this first pass (lower-indexed programs).
    {
        let beta = state.beta.clone();
        let sigma2 = state.sigma2.clone();
        for (i, (u_row, rng)) in state
            .utilities
            .chunks_mut(n_programs)
            .zip(student_rngs.iter_mut())
            .enumerate()
        {
            for c in 0..n_programs {
                let mut lower = f64::NEG_INFINITY;
                for &w in bounds[i].less(c) {
                    let w = w as usize;
                    if w < c {
                        lower = lower.max(u_row[w]);
                    }
                }
                let mut upper = f64::INFINITY;
                for &m in bounds[i].more(c) {
                    let m = m as usize;
                    if m < c {
                        upper = upper.min(u_row[m]);
                    }
                }
                let x = &xflat[i * row_len + c * p..i * row_len + (c + 1) * p];
                let mean = dot(x, beta.as_slice());
                u_row[c] = draw_truncated_normal(mean, sigma_of(&sigma2, c), lower, upper, rng)?;
            }
        }
    }

    let retained_cap = (cfg.n_iter - cfg.burn_in).div_ceil(cfg.thin);
    let mut beta_draws = Vec::with_capacity(retained_cap);
    let mut sigma_draws = Vec::with_capacity(retained_cap);

    let count_by_type: Vec<f64> = (0..n_types)
        .map(|t| spec.program_types.iter().filter(|&&pt| pt == t).count() as f64)
        .collect();

    let mut sum_xu = vec![0.0; n_types * p];
    let mut sum_u2 = vec![0.0; n_types];
    for iter in 0..cfg.n_iter {
        // Utility sweep. In-place storage gives exactly the bound recipe:
        // programs below c already hold this sweep's draw, programs above c
        // still hold the previous sweep's.
        let beta_prev = state.beta.clone();
        let sigma_prev = state.sigma2.clone();
        sum_xu.fill(0.0);
        sum_u2.fill(0.0);
        for (i, (u_row, rng)) in state
            .utilities
            .chunks_mut(n_programs)
            .zip(student_rngs.iter_mut())
            .enumerate()
        {
            for c in 0..n_programs {
                let mut lower = f64::NEG_INFINITY;
                for &w in bounds[i].less(c) {
                    lower = lower.max(u_row[w as usize]);
                }
                let mut upper = f64::INFINITY;
                for &m in bounds[i].more(c) {
                    upper = upper.min(u_row[m as usize]);
                }
                let x = &xflat[i * row_len + c * p..i * row_len + (c + 1) * p];
                let mean = dot(x, beta_prev.as_slice());
                let u = draw_truncated_normal(mean, sigma_of(&sigma_prev, c), lower, upper, rng)?;
                u_row[c] = u;
                let t = spec.program_types[c];
                for (j, &xj) in x.iter().enumerate() {
                    sum_xu[t * p + j] += xj * u;
                }
                sum_u2[t] += u * u;
            }
            if cfg.check_relations && iter >= cfg.burn_in {
                for &(x, y) in &bounds[i].pairs {
                    assert!(
                        u_row[x as usize] > u_row[y as usize],
                        "utility order violated for student {i}: ({x}, {y})"
                    );
                }
            }
        }

        // beta | U, sigma: N(V X*'U*, V), V = (X*'X* + A)^{-1}.
        let mut m = DMatrix::from_diagonal_element(p, p, cfg.prior_precision);
        let mut rhs = DVector::zeros(p);
        for t in 0..n_types {
            let inv = 1.0 / state.sigma2[t];
            m += &grams[t] * inv;
            for j in 0..p {
                rhs[j] += sum_xu[t * p + j] * inv;
            }
        }
        let chol = Cholesky::new(m).ok_or_else(|| {
            Error::Invalid("normal-equations matrix is not positive definite".into())
        })?;
        let beta_tilde = chol.solve(&rhs);
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut main_rng));
        // beta = beta_tilde + L^{-T} z has covariance (L L^T)^{-1} = V.
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Invalid("singular Cholesky factor".into()))?;
        state.beta = beta_tilde + noise;

        // sigma^2_t | U, beta for free types, from per-type residual sums
        // S_t = sum U^2 - 2 beta' sum xU + beta' G_t beta.
        for t in 0..n_types {
            if t == spec.normalized_type {
                continue;
            }
            let xu = DVector::from_column_slice(&sum_xu[t * p..(t + 1) * p]);
            let quad = (&grams[t] * &state.beta).dot(&state.beta);
            let s_t = (sum_u2[t] - 2.0 * state.beta.dot(&xu) + quad).max(0.0);
            let (nu, v0) = sigma_prior[t];
            state.sigma2[t] = draw_inverse_gamma(
                nu + spec.n_students() as f64 * count_by_type[t],
                v0 + s_t,
                &mut main_rng,
            );
        }

        if iter >= cfg.burn_in && (iter - cfg.burn_in).is_multiple_of(cfg.thin) {
            beta_draws.push(state.beta.as_slice().to_vec());
            sigma_draws.push(state.sigma2.clone());
        }
    }
    Ok((beta_draws, sigma_draws))
}

#[inline]
fn dot(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Posterior sampling of the utility model under per-student relation sets.
///
/// Students with empty relation sets are retained and contribute prior-only
/// draws. Fixed seed and chain count reproduce bit-identical output.
pub fn gibbs_estimate(
    relations: &[RelationSet],
    spec: &UtilitySpec,
    cfg: &GibbsConfig,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    if relations.len() != spec.n_students() {
        return Err(Error::DimensionMismatch {
            what: "relation sets",
            expected: spec.n_students(),
            got: relations.len(),
        });
    }
    let n_programs = spec.n_programs();
    let bounds: Vec<BoundLists> = relations
        .iter()
        .map(|r| build_bounds(r, n_programs))
        .collect::<Result<_>>()?;
    let grams = type_grams(spec);
    let sigma_prior: Vec<(f64, f64)> = match &cfg.sigma_prior {
        Some(given) => {
            if given.len() != spec.n_types {
                return Err(Error::InvalidConfig(format!(
                    "sigma prior has {} entries for {} types",
                    given.len(),
                    spec.n_types
                )));
            }
            given.clone()
        }
        None => (0..spec.n_types)
            .map(|t| {
                let c_t = spec.program_types.iter().filter(|&&pt| pt == t).count() as f64;
                (3.0 + c_t, 3.0 + c_t)
            })
            .collect(),
    };

    let xflat: Vec<f64> = spec.covariates.iter().flatten().copied().collect();
    let chains: Vec<ChainDraws> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| run_chain(spec, cfg, &bounds, &grams, &sigma_prior, &xflat, chain))
        .collect::<Result<_>>()?;

    let beta: Vec<Vec<Vec<f64>>> = chains.iter().map(|(b, _)| b.clone()).collect();
    let sigma2: Vec<Vec<Vec<f64>>> = chains.into_iter().map(|(_, s)| s).collect();
    let (mean, cov) = PosteriorDraws::summarize(&beta, spec.n_params);
    Ok(PosteriorDraws {
        beta,
        sigma2,
        mean,
        cov,
    })
}
