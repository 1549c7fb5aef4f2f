//! Preference inference from feasible-set partitions and submitted lists.
//!
//! Two hypotheses are implemented. `wtt_infer` takes a list at face value:
//! ranked programs in listed order, all ranked ahead of all unranked.
//! `teps_infer` only trusts what stability reveals: within every retained
//! uncertainty class the assigned program beats every simultaneously
//! feasible program, and relations compose transitively across classes. The
//! attention parameter selects how much of the uncertainty distribution is
//! retained.

use crate::error::Error;
use crate::market::{Rol, MAX_PROGRAMS};
use crate::sim::FeasiblePartition;
use crate::Result;

/// Attention parameter in `[0, 100]`: cumulative probability (in percent) of
/// feasible-set classes retained for inference. `0` keeps only the most
/// likely class, `100` keeps all of them.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttentionParam(f64);

impl AttentionParam {
    pub const TOP: AttentionParam = AttentionParam(0.0);
    pub const ALL: AttentionParam = AttentionParam(100.0);

    pub fn new(tau: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&tau) {
            return Err(Error::InvalidAttention(tau));
        }
        Ok(AttentionParam(tau))
    }

    pub fn percent(self) -> f64 {
        self.0
    }
}

/// A set of ordered pairs `(x, y)`: program `x` inferred preferred to `y`.
///
/// Stored as one reachability bitmask per program, which keeps membership
/// checks, unions, and transitive closure cheap for up to 128 programs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSet {
    adj: Vec<u128>,
}

impl RelationSet {
    pub fn new(n_programs: usize) -> Self {
        assert!(n_programs <= MAX_PROGRAMS);
        RelationSet {
            adj: vec![0; n_programs],
        }
    }

    pub fn from_pairs(n_programs: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut set = RelationSet::new(n_programs);
        for (x, y) in pairs {
            set.insert(x, y);
        }
        set
    }

    pub fn n_programs(&self) -> usize {
        self.adj.len()
    }

    /// Records `x` preferred to `y`. Reflexive pairs are ignored.
    pub fn insert(&mut self, x: usize, y: usize) {
        if x != y {
            self.adj[x] |= 1 << y;
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.adj[x] & (1 << y) != 0
    }

    /// Programs inferred less preferred than `x`, as a bitmask.
    pub fn worse_than(&self, x: usize) -> u128 {
        self.adj[x]
    }

    pub fn len(&self) -> usize {
        self.adj.iter().map(|m| m.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.iter().all(|&m| m == 0)
    }

    pub fn is_subset(&self, other: &RelationSet) -> bool {
        self.adj.iter().zip(&other.adj).all(|(&a, &b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &RelationSet) {
        for (a, &b) in self.adj.iter_mut().zip(&other.adj) {
            *a |= b;
        }
    }

    /// Pairs in ascending `(x, y)` order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.len());
        for (x, &mask) in self.adj.iter().enumerate() {
            let mut m = mask;
            while m != 0 {
                let y = m.trailing_zeros() as usize;
                out.push((x, y));
                m &= m - 1;
            }
        }
        out
    }

    /// Reachability closure in place; reports the first node found on a
    /// cycle, if any.
    fn close(&mut self) -> std::result::Result<(), usize> {
        let n = self.adj.len();
        for k in 0..n {
            let reach_k = self.adj[k];
            if reach_k == 0 {
                continue;
            }
            let bit_k = 1u128 << k;
            for x in 0..n {
                if self.adj[x] & bit_k != 0 {
                    self.adj[x] |= reach_k;
                }
            }
        }
        for x in 0..n {
            if self.adj[x] & (1 << x) != 0 {
                return Err(x);
            }
        }
        Ok(())
    }

    /// A concrete cycle through `start` over the direct relations, for
    /// error reporting. Only called once a cycle is known to exist.
    fn find_cycle(&self, start: usize) -> Vec<usize> {
        fn dfs(adj: &[u128], start: usize, current: usize, path: &mut Vec<usize>) -> bool {
            let mut m = adj[current];
            while m != 0 {
                let y = m.trailing_zeros() as usize;
                m &= m - 1;
                if y == start {
                    path.push(start);
                    return true;
                }
                if !path.contains(&y) {
                    path.push(y);
                    if dfs(adj, start, y, path) {
                        return true;
                    }
                    path.pop();
                }
            }
            false
        }
        let mut path = vec![start];
        dfs(&self.adj, start, start, &mut path);
        path
    }
}

/// Smallest transitively closed superset of `rels`; equals reachability in
/// the relation digraph. Cyclic input (inconsistent data) is an error naming
/// a violating cycle.
pub fn transitive_closure(rels: &RelationSet) -> Result<RelationSet> {
    let mut closed = rels.clone();
    match closed.close() {
        Ok(()) => Ok(closed),
        Err(node) => Err(Error::CycleDetected {
            cycle: rels.find_cycle(node),
        }),
    }
}

/// Most likely class plus subsequent classes while the cumulative
/// probability stays within `tau` percent. The most likely class is always
/// retained. Comparisons use exact draw counts, so integer `tau` boundaries
/// are never subject to floating-point noise.
pub fn truncate_partition(
    partition: &FeasiblePartition,
    tau: AttentionParam,
) -> Result<FeasiblePartition> {
    if partition.is_empty() {
        return Err(Error::EmptyPartition);
    }
    let n = partition.n_draws;
    let mut kept = Vec::with_capacity(partition.classes.len());
    let mut cumulative: u64 = 0;
    for (idx, class) in partition.classes.iter().enumerate() {
        cumulative += class.count;
        // Keep while cumulative/n <= tau/100, i.e. 100*cumulative <= tau*n.
        let within = (cumulative as f64) * 100.0 <= tau.percent() * (n as f64);
        if idx == 0 || within {
            kept.push(class.clone());
        }
        if !within {
            break;
        }
    }
    Ok(FeasiblePartition {
        classes: kept,
        n_draws: n,
    })
}

/// One group of stability relations: everything revealed worse than one
/// assigned program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationGroup {
    pub assigned: usize,
    /// Pairs `(assigned, b)` for feasible `b != assigned`.
    pub pairs: Vec<(usize, usize)>,
}

/// Stability relations of the retained classes, grouped by assigned program
/// and ordered by the assigned program's rank on the list.
///
/// A class with an unranked-only feasible set (no assignment) contributes
/// nothing. Classes must carry assignments consistent with `rol`.
pub fn stability_relations(classes: &FeasiblePartition, rol: &Rol) -> Result<Vec<RelationGroup>> {
    let mut by_assigned: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    for class in &classes.classes {
        let expected = rol.best_feasible(class.feasible);
        if class.assigned != expected {
            return Err(Error::InconsistentAssignment {
                assigned: class.assigned.unwrap_or(usize::MAX),
                expected,
            });
        }
        let Some(assigned) = class.assigned else {
            continue; // non-assignment class: mass matters for truncation only
        };
        let entry = match by_assigned.iter_mut().find(|(a, _)| *a == assigned) {
            Some((_, pairs)) => pairs,
            None => {
                by_assigned.push((assigned, Vec::new()));
                &mut by_assigned.last_mut().expect("just pushed").1
            }
        };
        let mut others = class.feasible & !(1u128 << assigned);
        while others != 0 {
            let b = others.trailing_zeros() as usize;
            if !entry.contains(&(assigned, b)) {
                entry.push((assigned, b));
            }
            others &= others - 1;
        }
    }
    by_assigned.sort_by_key(|(a, _)| rol.rank_of(*a).expect("assigned program is ranked"));
    Ok(by_assigned
        .into_iter()
        .map(|(assigned, pairs)| RelationGroup { assigned, pairs })
        .collect())
}

/// Direct implementation of the ordered tree-merge extension: starting from
/// the last group, repeatedly unions the next group in and adds `(x, z)`
/// whenever `(x, y)` is in the incoming group and `(y, z)` already present.
///
/// Equivalent to `transitive_closure` over the union of all groups; kept as
/// an independent route for cross-checking.
pub fn transitive_extend_ordered(n_programs: usize, groups: &[RelationGroup]) -> RelationSet {
    let mut accumulated = RelationSet::new(n_programs);
    for group in groups.iter().rev() {
        let mut next = accumulated.clone();
        for &(x, y) in &group.pairs {
            next.insert(x, y);
            let reach = accumulated.worse_than(y);
            next.adj[x] |= reach;
        }
        accumulated = next;
    }
    accumulated
}

/// Full stability-plus-transitivity inference at attention level `tau`.
pub fn teps_infer(
    partition: &FeasiblePartition,
    rol: &Rol,
    tau: AttentionParam,
    n_programs: usize,
) -> Result<RelationSet> {
    let truncated = truncate_partition(partition, tau)?;
    let groups = stability_relations(&truncated, rol)?;
    let mut rels = RelationSet::new(n_programs);
    for group in &groups {
        for &(x, y) in &group.pairs {
            rels.insert(x, y);
        }
    }
    transitive_closure(&rels)
}

/// Weak truth-telling: every ranked pair in listed order, plus every ranked
/// program over every unranked one. Nothing is inferred among unranked
/// programs.
pub fn wtt_infer(rol: &Rol, n_programs: usize) -> RelationSet {
    let mut rels = RelationSet::new(n_programs);
    let ranked = rol.as_slice();
    let mut unranked = (0..n_programs).fold(0u128, |m, c| m | (1 << c));
    for &r in ranked {
        unranked &= !(1u128 << r);
    }
    for (i, &r) in ranked.iter().enumerate() {
        for &r2 in &ranked[i + 1..] {
            rels.insert(r, r2);
        }
        rels.adj[r] |= unranked;
    }
    rels
}

/// Whether `candidate` is consistent with transitively closed `relations`:
/// it must rank every ever-assigned program, and must never place a program
/// above one it is inferred worse than.
pub fn is_consistent_rol(candidate: &Rol, relations: &RelationSet, ever_assigned: u128) -> bool {
    let mut assigned = ever_assigned;
    while assigned != 0 {
        let c = assigned.trailing_zeros() as usize;
        if !candidate.contains(c) {
            return false;
        }
        assigned &= assigned - 1;
    }
    let ranked = candidate.as_slice();
    for (i, &above) in ranked.iter().enumerate() {
        for &below in &ranked[i + 1..] {
            // `above` precedes `below`; it must not be inferred worse.
            if relations.contains(below, above) {
                return false;
            }
        }
    }
    true
}
