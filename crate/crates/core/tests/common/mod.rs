//! Shared oracles and generators for the integration suites. Everything in
//! here is deliberately independent of the library's own algorithms: the
//! matching oracle enumerates assignments, the reachability oracle squares
//! boolean matrices.
#![allow(dead_code)] // each test binary uses a different subset

use teps::market::{Matching, Program, Rol, ScoreMatrix};
use teps::rng::{Domain, Stream};

/// All capacity-respecting, individually rational assignments.
fn enumerate_assignments(
    rols: &[Rol],
    programs: &[Program],
    current: &mut Vec<Option<usize>>,
    used: &mut Vec<usize>,
    out: &mut Vec<Vec<Option<usize>>>,
) {
    let i = current.len();
    if i == rols.len() {
        out.push(current.clone());
        return;
    }
    let mut options: Vec<Option<usize>> = vec![None];
    options.extend(rols[i].as_slice().iter().map(|&c| Some(c)));
    for choice in options {
        if let Some(c) = choice {
            if used[c] == programs[c].capacity {
                continue;
            }
            used[c] += 1;
        }
        current.push(choice);
        enumerate_assignments(rols, programs, current, used, out);
        current.pop();
        if let Some(c) = choice {
            used[c] -= 1;
        }
    }
}

/// Whether `assignment` is stable with respect to the submitted lists:
/// no student prefers a program that is undersubscribed or admits someone
/// weaker (lower score, ties to the higher student index).
fn is_stable(
    assignment: &[Option<usize>],
    rols: &[Rol],
    scores: &ScoreMatrix,
    programs: &[Program],
) -> bool {
    let mut admitted: Vec<Vec<usize>> = vec![Vec::new(); programs.len()];
    for (i, a) in assignment.iter().enumerate() {
        if let Some(c) = a {
            admitted[*c].push(i);
        }
    }
    for (i, rol) in rols.iter().enumerate() {
        for &c in rol.as_slice() {
            if assignment[i] == Some(c) {
                break;
            }
            // Student i prefers c to her assignment.
            if admitted[c].len() < programs[c].capacity {
                return false;
            }
            let i_key = (scores.get(i, c), std::cmp::Reverse(i));
            if admitted[c].iter().any(|&j| {
                let j_key = (scores.get(j, c), std::cmp::Reverse(j));
                i_key.0.total_cmp(&j_key.0).then(i_key.1.cmp(&j_key.1))
                    == std::cmp::Ordering::Greater
            }) {
                return false;
            }
        }
    }
    true
}

/// Student-optimal stable matching by exhaustive enumeration: the pointwise
/// maximum of all stable matchings, verified to itself be stable.
pub fn brute_force_student_optimal(
    rols: &[Rol],
    scores: &ScoreMatrix,
    programs: &[Program],
) -> Vec<Option<usize>> {
    let mut all = Vec::new();
    enumerate_assignments(
        rols,
        programs,
        &mut Vec::new(),
        &mut vec![0; programs.len()],
        &mut all,
    );
    let stable: Vec<Vec<Option<usize>>> = all
        .into_iter()
        .filter(|a| is_stable(a, rols, scores, programs))
        .collect();
    assert!(!stable.is_empty(), "a stable matching always exists");
    let rank = |i: usize, a: &Option<usize>| -> usize {
        match a {
            Some(c) => rols[i].rank_of(*c).expect("assigned programs are ranked"),
            None => usize::MAX,
        }
    };
    let best: Vec<Option<usize>> = (0..rols.len())
        .map(|i| {
            stable
                .iter()
                .map(|m| m[i])
                .min_by_key(|a| rank(i, a))
                .expect("nonempty stable set")
        })
        .collect();
    assert!(
        stable.contains(&best),
        "the pointwise-best stable assignment is itself stable (lattice)"
    );
    best
}

/// Checks the cutoff and capacity invariants of a matching after the fact.
pub fn assert_matching_invariants(
    matching: &Matching,
    rols: &[Rol],
    scores: &ScoreMatrix,
    programs: &[Program],
) {
    for (c, program) in programs.iter().enumerate() {
        let admitted: Vec<usize> = matching
            .assignment
            .iter()
            .enumerate()
            .filter_map(|(i, a)| (*a == Some(c)).then_some(i))
            .collect();
        assert!(admitted.len() <= program.capacity);
        if admitted.len() < program.capacity {
            assert_eq!(
                matching.cutoffs[c],
                if program.capacity == 0 { 1.0 } else { 0.0 }
            );
        }
        for &i in &admitted {
            assert!(scores.get(i, c) >= matching.cutoffs[c]);
            assert!(rols[i].contains(c));
        }
    }
}

/// Transitive reachability by repeated boolean matrix multiplication.
pub fn matrix_power_reachability(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut adj = vec![vec![false; n]; n];
    for &(x, y) in edges {
        adj[x][y] = true;
    }
    let mut reach = adj.clone();
    // (A + A^2 + ... + A^n) by n rounds of boolean multiply-accumulate.
    for _ in 0..n {
        let mut next = reach.clone();
        for x in 0..n {
            for z in 0..n {
                if !next[x][z] {
                    next[x][z] = (0..n).any(|y| reach[x][y] && adj[y][z]);
                }
            }
        }
        if next == reach {
            break;
        }
        reach = next;
    }
    let mut pairs = Vec::new();
    for (x, row) in reach.iter().enumerate() {
        for (y, &r) in row.iter().enumerate() {
            if r {
                pairs.push((x, y));
            }
        }
    }
    pairs
}

/// Small random matching instance: up to `max_students` students and
/// `max_programs` unit-capacity programs with random partial lists.
pub fn random_unit_instance(
    seed: u64,
    index: u64,
    max_students: usize,
    max_programs: usize,
) -> (Vec<Rol>, ScoreMatrix, Vec<Program>) {
    let mut rng = Stream::new(seed, Domain::Test, index);
    let n_students = 1 + rng.below(max_students as u64) as usize;
    let n_programs = 1 + rng.below(max_programs as u64) as usize;
    let programs: Vec<Program> = (0..n_programs).map(|id| Program::new(id, id, 1)).collect();
    let rols: Vec<Rol> = (0..n_students)
        .map(|_| {
            let mut order: Vec<usize> = (0..n_programs).collect();
            // Fisher-Yates, then truncate to a random prefix (possibly empty).
            for j in (1..order.len()).rev() {
                let k = rng.below((j + 1) as u64) as usize;
                order.swap(j, k);
            }
            let len = rng.below((n_programs + 1) as u64) as usize;
            order.truncate(len);
            Rol::new(order).expect("permutation prefix")
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n_students)
        .map(|_| (0..n_programs).map(|_| rng.uniform()).collect())
        .collect();
    (
        rols,
        ScoreMatrix::from_rows(rows).expect("rectangular"),
        programs,
    )
}
