//! Critical-agent subgraph extraction.
//!
//! The goal is a subgraph `G^s` with as few retained edges as possible such
//! that at most `phi` agents remain and every member's tolerance
//!
//! ```text
//! W_i(G^s) = sum_{j in G} a_ij |r_i - r_j| - sum_{(i,j) retained} a_ij |r_i - r_j|
//! ```
//!
//! stays at or below `psi`. [`operate`] is the randomized pruning heuristic,
//! [`brute_force`] an exhaustive oracle for small graphs, and [`validate`]
//! the constraint check applied to both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::topology::{Subgraph, Topology};

/// Largest graph the exhaustive oracle accepts.
pub const ORACLE_MAX_AGENTS: usize = 12;

pub const DEFAULT_MAX_OUTER_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationParams {
    /// Capacity: maximum member count.
    pub phi: usize,
    /// Tolerance on each member's lost consensus pressure.
    pub psi: f64,
    pub max_outer_iterations: usize,
    pub rng_seed: u64,
}

impl OperationParams {
    pub fn new(phi: usize, psi: f64, rng_seed: u64) -> Self {
        Self {
            phi,
            psi,
            max_outer_iterations: DEFAULT_MAX_OUTER_ITERATIONS,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi == 0 {
            return Err(Error::param("operation.phi", "must be at least 1"));
        }
        if self.psi.is_nan() || self.psi < 0.0 {
            return Err(Error::param("operation.psi", "must be nonnegative"));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::param("operation.max_outer_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationResult {
    pub found: bool,
    pub subgraph: Option<Subgraph>,
    pub removed_edge_count: usize,
    /// Outer (restart) iterations consumed.
    pub iterations_used: usize,
}

fn removal_weight(full: &Topology, r: &[f64], i: usize, j: usize) -> f64 {
    full.weight(i, j) * (r[i] - r[j]).abs()
}

/// `W_i` of agent `i` (0-based) for the given subgraph.
pub fn tolerance(i: usize, full: &Topology, sub: &Subgraph, r: &[f64]) -> f64 {
    row_tolerance(full, r, i, |j| sub.retains(i, j))
}

fn row_tolerance(full: &Topology, r: &[f64], i: usize, retained: impl Fn(usize) -> bool) -> f64 {
    let mut total = 0.0;
    let mut kept = 0.0;
    for (j, _) in full.row_support(i) {
        let w = removal_weight(full, r, i, j);
        total += w;
        if retained(j) {
            kept += w;
        }
    }
    total - kept
}

/// Randomized pruning with restarts.
///
/// Each attempt starts from the full graph and, while more than `phi`
/// agents remain, picks a member uniformly at random. A member without
/// retained out-edges is dropped (with the edges pointing at it); otherwise
/// its out-edge of smallest signed weight `a_ij |r_i - r_j|` is removed
/// (ties go to the lowest `j`). A change is kept only if every agent whose
/// tolerance it alters still satisfies `W <= psi`; the first rejected change
/// abandons the attempt and a fresh one begins. Dropped members never
/// rejoin within an attempt.
pub fn operate(full: &Topology, r: &[f64], params: &OperationParams) -> Result<OperationResult> {
    params.validate()?;
    if r.len() != full.n() {
        return Err(Error::DimensionMismatch {
            expected: full.n(),
            got: r.len(),
        });
    }
    let mut rng = SplitMix64::new(params.rng_seed);
    let total_edges = full.edges().len();

    for attempt in 1..=params.max_outer_iterations {
        if let Some(sub) = prune_once(full, r, params, &mut rng) {
            debug_assert!(validate(full, &sub, r, params).all_pass());
            return Ok(OperationResult {
                found: true,
                removed_edge_count: total_edges - sub.edge_count(),
                subgraph: Some(sub),
                iterations_used: attempt,
            });
        }
    }
    Ok(OperationResult {
        found: false,
        subgraph: None,
        removed_edge_count: 0,
        iterations_used: params.max_outer_iterations,
    })
}

fn prune_once(full: &Topology, r: &[f64], params: &OperationParams, rng: &mut SplitMix64) -> Option<Subgraph> {
    let mut sub = Subgraph::full(full);
    let mut members = sub.members();
    while members.len() > params.phi {
        let i = members[rng.below(members.len())];

        if !sub.has_out_edges(i) {
            let affected: Vec<usize> = members.iter().copied().filter(|&k| sub.retains(k, i)).collect();
            let mut trial = sub.clone();
            trial.remove_member(i);
            if affected.iter().all(|&k| tolerance(k, full, &trial, r) <= params.psi) {
                sub = trial;
                members.retain(|&m| m != i);
                continue;
            }
            return None;
        }

        let mut cheapest: Option<(usize, f64)> = None;
        for (j, _) in sub.active_neighbors(full, i) {
            let w = removal_weight(full, r, i, j);
            if cheapest.is_none_or(|(_, best)| w < best) {
                cheapest = Some((j, w));
            }
        }
        let (j, _) = cheapest.expect("member has out-edges");
        let mut trial = sub.clone();
        trial.remove_edge(i, j);
        let within = |k: usize| !trial.is_member(k) || tolerance(k, full, &trial, r) <= params.psi;
        if within(i) && within(j) {
            sub = trial;
        } else {
            return None;
        }
    }
    Some(sub)
}

/// Exhaustive minimum-edge subgraph for graphs of at most
/// [`ORACLE_MAX_AGENTS`] agents.
///
/// Every nonempty member set of size `<= phi` is enumerated. Since `W_i`
/// depends only on row `i` of the retained edges, the retained-edge subsets
/// of each member's row are enumerated independently by increasing size
/// and the lexicographically first feasible one of minimum size is kept;
/// their union is the optimal edge set for that member set. Among member
/// sets the winner minimizes `|E^s|`, then maximizes the member count, then
/// takes the lexicographically smallest edge list and member list.
///
/// Returns `Ok(None)` when no member set is feasible.
pub fn brute_force(full: &Topology, r: &[f64], phi: usize, psi: f64) -> Result<Option<Subgraph>> {
    let n = full.n();
    if n > ORACLE_MAX_AGENTS {
        return Err(Error::OracleCapacity {
            n,
            max: ORACLE_MAX_AGENTS,
        });
    }
    if r.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: r.len(),
        });
    }
    OperationParams::new(phi, psi, 0).validate()?;

    type Key = (usize, std::cmp::Reverse<usize>, Vec<(usize, usize)>, Vec<usize>);
    let mut best: Option<Key> = None;

    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size > phi {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let mut edges = Vec::new();
        let mut feasible = true;
        for &i in &members {
            let candidates: Vec<usize> = full
                .row_support(i)
                .map(|(j, _)| j)
                .filter(|&j| mask & (1 << j) != 0)
                .collect();
            match min_row_retention(full, r, i, &candidates, psi) {
                Some(kept) => edges.extend(kept.into_iter().map(|j| (i, j))),
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        let key: Key = (edges.len(), std::cmp::Reverse(size), edges, members);
        if best.as_ref().is_none_or(|b| key < *b) {
            best = Some(key);
        }
    }

    best.map(|(_, _, edges, members)| Subgraph::from_parts(full, &members, &edges))
        .transpose()
}

/// Smallest (then lexicographically first) subset of `candidates` to retain
/// in row `i` so that `W_i <= psi`.
fn min_row_retention(full: &Topology, r: &[f64], i: usize, candidates: &[usize], psi: f64) -> Option<Vec<usize>> {
    let m = candidates.len();
    for k in 0..=m {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let kept: Vec<usize> = combo.iter().map(|&c| candidates[c]).collect();
            if row_tolerance(full, r, i, |j| kept.contains(&j)) <= psi {
                return Some(kept);
            }
            if !next_combination(&mut combo, m) {
                break;
            }
        }
    }
    None
}

/// Advances `combo` (strictly increasing indices below `m`) to the next
/// combination in lexicographic order.
fn next_combination(combo: &mut [usize], m: usize) -> bool {
    let k = combo.len();
    for pos in (0..k).rev() {
        if combo[pos] < m - k + pos {
            combo[pos] += 1;
            for next in pos + 1..k {
                combo[next] = combo[next - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Tolerance of a single member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemberTolerance {
    /// 1-based agent number.
    pub agent: usize,
    pub tolerance: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub members: Vec<MemberTolerance>,
    /// 1-based numbers of members with `W > psi`.
    pub violations: Vec<usize>,
    pub member_count: usize,
    pub capacity: usize,
    pub capacity_ok: bool,
    /// Set when the subgraph itself is malformed.
    pub structure_error: Option<String>,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.violations.is_empty() && self.capacity_ok && self.structure_error.is_none()
    }
}

/// Checks `W_i <= psi` for every member and `|members| <= phi`.
pub fn validate(full: &Topology, sub: &Subgraph, r: &[f64], params: &OperationParams) -> ConstraintReport {
    let members: Vec<MemberTolerance> = sub
        .members()
        .into_iter()
        .map(|i| {
            let w = tolerance(i, full, sub, r);
            MemberTolerance {
                agent: i + 1,
                tolerance: w,
                within: w <= params.psi,
            }
        })
        .collect();
    let violations = members.iter().filter(|m| !m.within).map(|m| m.agent).collect();
    let member_count = members.len();
    ConstraintReport {
        members,
        violations,
        member_count,
        capacity: params.phi,
        capacity_ok: member_count <= params.phi,
        structure_error: sub.check_structure(full).err(),
    }
}

/// 1-based view of a subgraph for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphSummary {
    pub members: Vec<usize>,
    /// `[i, j, a_ij]` with 1-based agents.
    pub edges: Vec<(usize, usize, f64)>,
}

impl SubgraphSummary {
    pub fn new(full: &Topology, sub: &Subgraph) -> Self {
        Self {
            members: sub.members().into_iter().map(|i| i + 1).collect(),
            edges: sub
                .retained_edges()
                .into_iter()
                .map(|(i, j)| (i + 1, j + 1, full.weight(i, j)))
                .collect(),
        }
    }
}
