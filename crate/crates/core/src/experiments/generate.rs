//! Synthetic economies with a known random-utility model.
//!
//! Students live uniformly in the unit disc, programs sit evenly spaced on
//! a circle of radius 1/2, and priorities are coarse four-group lotteries
//! with single tie-breaking. Utility is
//!
//! ```text
//! u_{i,c} = b1 * quality_c + b2 * (D_i x A_c) + b3 * dist_{i,c}
//!         + b4 * Small_c + eps_{i,c}
//! ```
//!
//! with `quality_c = c + 1`, `A_c` set on alternating programs, `Small_c`
//! marking 50-seat programs, and heteroskedastic normal noise (variance 1 on
//! the first half of the programs, 2 on the second half). Disadvantaged
//! status `D_i` is drawn with probability 2/3 inside the lowest priority
//! group of the first program and is 0 elsewhere.

use rand_distr::{Distribution, StandardNormal};

use crate::market::{Program, Rol};
use crate::rng::{Domain, Stream};
use crate::sim::{Economy, PriorityRule, TieBreak};
use crate::Result;

pub const SMALL_CAPACITY: usize = 50;

/// Monte-Carlo configuration. The default replicates the benchmark economy:
/// 1,000 students, 12 programs with 1,010 total seats, coefficients
/// `(0.3, 2, -1, 0)`.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub n_students: usize,
    pub capacities: Vec<usize>,
    pub true_beta: [f64; 4],
    pub n_groups: u32,
    /// Estimation samples per run.
    pub n_samples: usize,
    /// Lottery draws used for feasible-set partitions on submitted lists.
    pub n_cutoff_draws: u64,
    /// Separate truth-telling economies pooled into the shared cutoff
    /// distribution that drives skipping behavior.
    pub tt_cutoff_samples: usize,
    /// Lottery draws per truth-telling cutoff economy.
    pub tt_cutoff_draws: u64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_students: 1000,
            capacities: vec![110, 50, 100, 100, 50, 100, 100, 50, 100, 100, 50, 100],
            true_beta: [0.3, 2.0, -1.0, 0.0],
            n_groups: 4,
            n_samples: 20,
            n_cutoff_draws: 2000,
            tt_cutoff_samples: 4,
            tt_cutoff_draws: 500,
            seed: 0,
        }
    }
}

impl McConfig {
    pub fn n_programs(&self) -> usize {
        self.capacities.len()
    }

    /// Noise variance of program `c`: 1 on the first half, 2 on the rest.
    pub fn noise_variance(&self, program: usize) -> f64 {
        if program < self.n_programs() / 2 {
            1.0
        } else {
            2.0
        }
    }

    /// Variance type per program for estimation; type 0 (the first half) is
    /// the normalized one.
    pub fn program_types(&self) -> Vec<usize> {
        (0..self.n_programs())
            .map(|c| usize::from(c >= self.n_programs() / 2))
            .collect()
    }
}

/// A generated economy together with everything the harness needs: true
/// preferences for behavior simulation and observable covariates for
/// estimation.
#[derive(Debug, Clone)]
pub struct SyntheticEconomy {
    pub economy: Economy,
    pub positions: Vec<(f64, f64)>,
    /// `D_i` per student.
    pub disadvantaged: Vec<bool>,
    /// Flat `students x programs` distances.
    pub distances: Vec<f64>,
    /// Flat `students x programs` true utilities.
    pub true_utilities: Vec<f64>,
    /// Full-length truthful lists.
    pub true_rols: Vec<Rol>,
    /// Per student, flat `programs x 4` covariate rows
    /// `[quality, D x A, distance, small]`.
    pub covariates: Vec<Vec<f64>>,
}

impl SyntheticEconomy {
    pub fn n_students(&self) -> usize {
        self.positions.len()
    }

    pub fn n_programs(&self) -> usize {
        self.economy.n_programs()
    }

    #[inline]
    pub fn distance(&self, student: usize, program: usize) -> f64 {
        self.distances[student * self.n_programs() + program]
    }

    #[inline]
    pub fn true_utility(&self, student: usize, program: usize) -> f64 {
        self.true_utilities[student * self.n_programs() + program]
    }
}

/// Program location on the inner circle.
fn program_position(c: usize, n_programs: usize) -> (f64, f64) {
    let angle = 2.0 * std::f64::consts::PI * c as f64 / n_programs as f64;
    (0.5 * angle.cos(), 0.5 * angle.sin())
}

/// Whether program `c` carries the `A` characteristic (alternating,
/// starting with the first program).
pub fn a_flag(c: usize) -> bool {
    c.is_multiple_of(2)
}

/// Draws one economy. Deterministic in `(cfg.seed, sample_seed)`.
pub fn generate_economy(cfg: &McConfig, sample_seed: u64) -> Result<SyntheticEconomy> {
    let k = cfg.n_students;
    let n_programs = cfg.n_programs();
    let mut rng = Stream::new(cfg.seed, Domain::Generate, sample_seed);

    let positions: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            let r = rng.uniform().sqrt();
            let angle = 2.0 * std::f64::consts::PI * rng.uniform();
            (r * angle.cos(), r * angle.sin())
        })
        .collect();

    let mut intrinsic = vec![vec![0.0; n_programs]; k];
    for row in &mut intrinsic {
        for cell in row.iter_mut() {
            *cell = rng.below(cfg.n_groups as u64) as f64;
        }
    }

    let disadvantaged: Vec<bool> = (0..k)
        .map(|i| intrinsic[i][0] == 0.0 && rng.uniform() < 2.0 / 3.0)
        .collect();

    let program_pos: Vec<(f64, f64)> = (0..n_programs)
        .map(|c| program_position(c, n_programs))
        .collect();
    let mut distances = vec![0.0; k * n_programs];
    for i in 0..k {
        for c in 0..n_programs {
            let dx = positions[i].0 - program_pos[c].0;
            let dy = positions[i].1 - program_pos[c].1;
            distances[i * n_programs + c] = (dx * dx + dy * dy).sqrt();
        }
    }

    let [b1, b2, b3, b4] = cfg.true_beta;
    let mut true_utilities = vec![0.0; k * n_programs];
    let mut covariates = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = Vec::with_capacity(n_programs * 4);
        for c in 0..n_programs {
            let quality = (c + 1) as f64;
            let interact = if disadvantaged[i] && a_flag(c) {
                1.0
            } else {
                0.0
            };
            let dist = distances[i * n_programs + c];
            let small = if cfg.capacities[c] == SMALL_CAPACITY {
                1.0
            } else {
                0.0
            };
            let noise: f64 = StandardNormal.sample(&mut rng);
            let eps = noise * cfg.noise_variance(c).sqrt();
            true_utilities[i * n_programs + c] =
                b1 * quality + b2 * interact + b3 * dist + b4 * small + eps;
            row.extend_from_slice(&[quality, interact, dist, small]);
        }
        covariates.push(row);
    }

    // All programs acceptable: truthful lists rank everything.
    let true_rols: Vec<Rol> = (0..k)
        .map(|i| {
            let mut order: Vec<usize> = (0..n_programs).collect();
            order.sort_by(|&a, &b| {
                true_utilities[i * n_programs + b]
                    .total_cmp(&true_utilities[i * n_programs + a])
                    .then(a.cmp(&b))
            });
            Rol::new(order).expect("permutation has no duplicates")
        })
        .collect();

    let programs: Vec<Program> = cfg
        .capacities
        .iter()
        .enumerate()
        .map(|(id, &capacity)| Program {
            id,
            school_id: id,
            capacity,
            attributes: vec![
                (id + 1) as f64,
                if a_flag(id) { 1.0 } else { 0.0 },
                if capacity == SMALL_CAPACITY { 1.0 } else { 0.0 },
            ],
        })
        .collect();
    let rule = PriorityRule::uniform_lottery(n_programs, cfg.n_groups, TieBreak::Stb);
    let economy = Economy::new(programs, rule, intrinsic)?;

    Ok(SyntheticEconomy {
        economy,
        positions,
        disadvantaged,
        distances,
        true_utilities,
        true_rols,
        covariates,
    })
}
