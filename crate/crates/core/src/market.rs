//! Deterministic student-proposing deferred acceptance over realized scores.
//!
//! All functions here are pure: given the same rank-order lists, scores, and
//! programs they return bit-identical matchings, so they can be called from
//! any number of threads at once.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::Error;
use crate::Result;

/// Maximum number of programs supported by the bitmask representation used
/// downstream for feasible sets.
pub const MAX_PROGRAMS: usize = 128;

/// A school program with seats and observable characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    /// Dense index `0..C-1`.
    pub id: usize,
    /// Grouping index for programs offered by the same school.
    pub school_id: usize,
    /// Number of seats.
    pub capacity: usize,
    /// Real-valued characteristics consumed by utility and policy code.
    pub attributes: Vec<f64>,
}

impl Program {
    pub fn new(id: usize, school_id: usize, capacity: usize) -> Self {
        Program {
            id,
            school_id,
            capacity,
            attributes: Vec::new(),
        }
    }
}

/// Row-major `students x programs` matrix of ex-post scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    data: Vec<f64>,
    n_students: usize,
    n_programs: usize,
}

impl ScoreMatrix {
    pub fn zeros(n_students: usize, n_programs: usize) -> Self {
        ScoreMatrix {
            data: vec![0.0; n_students * n_programs],
            n_students,
            n_programs,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_students = rows.len();
        let n_programs = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_students * n_programs);
        for row in &rows {
            if row.len() != n_programs {
                return Err(Error::DimensionMismatch {
                    what: "score matrix row",
                    expected: n_programs,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(ScoreMatrix {
            data,
            n_students,
            n_programs,
        })
    }

    #[inline]
    pub fn get(&self, student: usize, program: usize) -> f64 {
        self.data[student * self.n_programs + program]
    }

    #[inline]
    pub fn set(&mut self, student: usize, program: usize, value: f64) {
        self.data[student * self.n_programs + program] = value;
    }

    /// Scores of one student across all programs.
    #[inline]
    pub fn row(&self, student: usize) -> &[f64] {
        &self.data[student * self.n_programs..(student + 1) * self.n_programs]
    }

    pub fn n_students(&self) -> usize {
        self.n_students
    }

    pub fn n_programs(&self) -> usize {
        self.n_programs
    }
}

/// A rank-order list: distinct program ids, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Rol(Vec<usize>);

impl Rol {
    /// Validates distinctness; program-id range is checked against an
    /// economy at use time.
    pub fn new(ranked: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(ranked.len());
        for &id in &ranked {
            if !seen.insert(id) {
                return Err(Error::DuplicateRolEntry { id });
            }
        }
        Ok(Rol(ranked))
    }

    pub fn empty() -> Self {
        Rol(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Position of `program` on the list, if ranked.
    pub fn rank_of(&self, program: usize) -> Option<usize> {
        self.0.iter().position(|&c| c == program)
    }

    pub fn contains(&self, program: usize) -> bool {
        self.0.contains(&program)
    }

    /// Highest-ranked program present in the feasible-set bitmask.
    #[inline]
    pub fn best_feasible(&self, feasible: u128) -> Option<usize> {
        self.0.iter().copied().find(|&c| feasible & (1 << c) != 0)
    }
}

impl From<Rol> for Vec<usize> {
    fn from(rol: Rol) -> Self {
        rol.0
    }
}

/// Outcome of a deferred-acceptance run.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Assigned program per student, `None` for unassigned.
    pub assignment: Vec<Option<usize>>,
    /// Per-program cutoff: lowest admitted score when filled, `0.0` when
    /// undersubscribed, `1.0` for zero-capacity programs.
    pub cutoffs: Vec<f64>,
}

/// Admission priority of one applicant at a program: higher score wins,
/// exact score ties go to the lower student index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AdmitKey {
    score: f64,
    student: usize,
}

impl Eq for AdmitKey {}

impl Ord for AdmitKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.student.cmp(&self.student))
    }
}

impl PartialOrd for AdmitKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn validate_inputs(rols: &[Rol], scores: &ScoreMatrix, programs: &[Program]) -> Result<()> {
    let n_programs = programs.len();
    if n_programs > MAX_PROGRAMS {
        return Err(Error::TooManyPrograms {
            got: n_programs,
            max: MAX_PROGRAMS,
        });
    }
    if scores.n_programs() != n_programs {
        return Err(Error::DimensionMismatch {
            what: "score matrix programs",
            expected: n_programs,
            got: scores.n_programs(),
        });
    }
    if scores.n_students() != rols.len() {
        return Err(Error::DimensionMismatch {
            what: "score matrix students",
            expected: rols.len(),
            got: scores.n_students(),
        });
    }
    for (expected, program) in programs.iter().enumerate() {
        if program.id != expected {
            return Err(Error::Invalid(format!(
                "program ids must be dense and sorted; found id {} at position {expected}",
                program.id
            )));
        }
    }
    for rol in rols {
        for &c in rol.as_slice() {
            if c >= n_programs {
                return Err(Error::InvalidProgramId { id: c, n_programs });
            }
        }
    }
    Ok(())
}

/// Student-proposing deferred acceptance.
///
/// Returns the student-optimal stable matching with respect to the submitted
/// lists and realized scores. Exact score ties (degenerate inputs only) are
/// broken in favor of the lower student index.
pub fn run_da(rols: &[Rol], scores: &ScoreMatrix, programs: &[Program]) -> Result<Matching> {
    validate_inputs(rols, scores, programs)?;
    let n_students = rols.len();
    let n_programs = programs.len();

    // Min-heap per program holding current tentative admits; the root is the
    // weakest admit and gets displaced first.
    let mut admits: Vec<BinaryHeap<std::cmp::Reverse<AdmitKey>>> = programs
        .iter()
        .map(|p| BinaryHeap::with_capacity(p.capacity + 1))
        .collect();
    let mut rejected_any = vec![false; n_programs];
    let mut next_rank = vec![0usize; n_students];
    let mut queue: VecDeque<usize> = (0..n_students).collect();

    while let Some(student) = queue.pop_front() {
        let rol = rols[student].as_slice();
        let Some(&program) = rol.get(next_rank[student]) else {
            continue; // exhausted her list; stays unassigned
        };
        next_rank[student] += 1;
        let capacity = programs[program].capacity;
        if capacity == 0 {
            rejected_any[program] = true;
            queue.push_back(student);
            continue;
        }
        let key = AdmitKey {
            score: scores.get(student, program),
            student,
        };
        let heap = &mut admits[program];
        if heap.len() < capacity {
            heap.push(std::cmp::Reverse(key));
        } else {
            rejected_any[program] = true;
            let weakest = heap.peek().expect("non-empty heap").0;
            if key > weakest {
                heap.pop();
                heap.push(std::cmp::Reverse(key));
                queue.push_back(weakest.student);
            } else {
                queue.push_back(student);
            }
        }
    }

    // Lowest market-clearing cutoffs: a program binds only if it turned
    // somebody away; a program that filled exactly without rejections still
    // clears the market at zero.
    let mut assignment = vec![None; n_students];
    let mut cutoffs = vec![0.0f64; n_programs];
    for (program, heap) in admits.iter().enumerate() {
        if programs[program].capacity == 0 {
            cutoffs[program] = 1.0;
            continue;
        }
        if rejected_any[program] {
            cutoffs[program] = heap.peek().expect("rejections imply admits").0.score;
        }
        for &std::cmp::Reverse(key) in heap.iter() {
            assignment[key.student] = Some(program);
        }
    }
    Ok(Matching {
        assignment,
        cutoffs,
    })
}

/// Every pair `(student, program)` where the program is feasible at the
/// matching's cutoffs (score >= cutoff, the own assignment always counted
/// feasible) and the student ranks it above her assignment on `true_rols`.
///
/// Empty output means every student holds her favorite feasible program.
pub fn check_stability(
    matching: &Matching,
    true_rols: &[Rol],
    scores: &ScoreMatrix,
) -> Result<Vec<(usize, usize)>> {
    let n_programs = matching.cutoffs.len();
    if scores.n_programs() != n_programs {
        return Err(Error::DimensionMismatch {
            what: "score matrix programs",
            expected: n_programs,
            got: scores.n_programs(),
        });
    }
    if scores.n_students() != true_rols.len() || matching.assignment.len() != true_rols.len() {
        return Err(Error::DimensionMismatch {
            what: "students",
            expected: true_rols.len(),
            got: scores.n_students(),
        });
    }
    let mut blocking = Vec::new();
    for (student, rol) in true_rols.iter().enumerate() {
        for &program in rol.as_slice() {
            if Some(program) == matching.assignment[student] {
                break; // everything below is dispreferred to the assignment
            }
            if program >= n_programs {
                return Err(Error::InvalidProgramId {
                    id: program,
                    n_programs,
                });
            }
            if scores.get(student, program) >= matching.cutoffs[program] {
                blocking.push((student, program));
            }
        }
    }
    Ok(blocking)
}

/// Feasible-set bitmask for one student at the given cutoffs
/// (score >= cutoff), with the assigned program forced in.
#[inline]
pub fn feasible_mask(row: &[f64], cutoffs: &[f64], assigned: Option<usize>) -> u128 {
    let mut mask = 0u128;
    for (c, (&s, &p)) in row.iter().zip(cutoffs).enumerate() {
        if s >= p {
            mask |= 1 << c;
        }
    }
    if let Some(a) = assigned {
        mask |= 1 << a;
    }
    mask
}
