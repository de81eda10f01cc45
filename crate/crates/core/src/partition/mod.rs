//! Partition-bounded repacking: decide whether the universe can be split
//! into parts of at most `beta` bunches such that each part reconfigures
//! independently.
//!
//! The decision is encoded as a feasibility integer program over a
//! transshipment-style directed graph. Every subconfiguration of at most
//! `beta` bunches becomes a node triple (origin, intermediate, destination);
//! intermediate nodes are connected exactly when one single-item move maps
//! one subconfiguration to the other. Origin demands pick the portions of an
//! assignment consistent with the source, destination demands pick portions
//! consistent with the target, and each unit of flow across the intermediate
//! edges is one reconfiguration step of one part.

mod convert;
mod flow;
mod ilp;

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{are_adjacent, Bunch, Configuration, Instance, ReconfigSequence, Size};
use crate::oracle::neighbors;

pub use convert::{
    conforming_sequence, sequence_from_solution, solution_from_sequence, sort_sequence,
    Assignment, PartitionAssignment, PartitionPart,
};
pub use flow::{
    decompose_flow, flow_sub, flow_sum, flow_value, is_flow, is_subflow, Node, UnitPathFlow,
};
pub use ilp::{check_solution, constraint_rows, solve_ilp, ConstraintRow, IlpModel, IlpSolution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("{what} enumeration exceeded the cap of {limit}")]
    ExplosionGuard { what: &'static str, limit: usize },
    #[error("subconfigurations need at least one bunch")]
    EmptySubConfig,
    #[error("malformed flow: {0}")]
    MalformedFlow(String),
    #[error("sequence is not a conforming reconfiguration sequence: {0}")]
    NotConforming(String),
    #[error("sequence is not in sorted order")]
    NotSorted,
    #[error("subconfiguration does not appear in the model")]
    UnknownSubConfig,
    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),
}

/// Caps on enumeration sizes; exceeding one is a typed refusal, never a
/// wrong answer.
#[derive(Clone, Copy, Debug)]
pub struct ExplosionGuard {
    pub max_bin_types: usize,
    pub max_subs: usize,
    pub max_edges: usize,
}

impl Default for ExplosionGuard {
    fn default() -> Self {
        ExplosionGuard {
            max_bin_types: 50_000,
            max_subs: 200_000,
            max_edges: 5_000_000,
        }
    }
}

/// A non-empty configuration of at most `beta` bunches, used as a portion of
/// an assignment. "Non-empty" means at least one bunch; the bunches
/// themselves may be empty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubConfig {
    config: Configuration,
}

impl SubConfig {
    pub fn new(config: Configuration) -> Result<Self, PartitionError> {
        if config.is_empty() {
            return Err(PartitionError::EmptySubConfig);
        }
        Ok(SubConfig { config })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn bunch_count(&self) -> usize {
        self.config.len()
    }

    pub fn universe(&self) -> Vec<Size> {
        self.config.underlying()
    }
}

/// All bunches over the size alphabet of `universe` with volume at most
/// `kappa`, including the empty bunch, in canonical (descending) order.
/// Multiplicities are not capped by availability; sub-multiset checks happen
/// at the subconfiguration level.
pub fn enum_bin_types(
    universe: &[Size],
    kappa: Size,
    guard: &ExplosionGuard,
) -> Result<Vec<Bunch>, PartitionError> {
    let mut alphabet: Vec<Size> = universe.to_vec();
    alphabet.sort_unstable_by(|a, b| b.cmp(a));
    alphabet.dedup();
    alphabet.retain(|&s| s <= kappa);

    let mut out: Vec<Bunch> = Vec::new();
    let mut current: Vec<Size> = Vec::new();
    fn rec(
        alphabet: &[Size],
        idx: usize,
        room: Size,
        current: &mut Vec<Size>,
        out: &mut Vec<Bunch>,
        cap: usize,
    ) -> Result<(), PartitionError> {
        if idx == alphabet.len() {
            if out.len() == cap {
                return Err(PartitionError::ExplosionGuard {
                    what: "bin type",
                    limit: cap,
                });
            }
            out.push(Bunch::new(current.clone()).expect("alphabet sizes are positive"));
            return Ok(());
        }
        let size = alphabet[idx];
        let max_count = room / size;
        for count in 0..=max_count {
            for _ in 0..count {
                current.push(size);
            }
            rec(alphabet, idx + 1, room - count * size, current, out, cap)?;
            for _ in 0..count {
                current.pop();
            }
        }
        Ok(())
    }
    rec(&alphabet, 0, kappa, &mut current, &mut out, guard.max_bin_types)?;
    out.sort_unstable_by(|a, b| b.cmp(a));
    Ok(out)
}

fn size_counts(items: &[Size]) -> HashMap<Size, u64> {
    let mut counts = HashMap::new();
    for &s in items {
        *counts.entry(s).or_insert(0u64) += 1;
    }
    counts
}

fn fits_availability(bunch: &Bunch, used: &mut HashMap<Size, u64>, avail: &HashMap<Size, u64>) -> bool {
    for &s in bunch.items() {
        let have = avail.get(&s).copied().unwrap_or(0);
        let entry = used.entry(s).or_insert(0);
        if *entry >= have {
            // Roll back what this call already consumed.
            return false;
        }
        *entry += 1;
    }
    true
}

fn release(bunch: &Bunch, used: &mut HashMap<Size, u64>) {
    for &s in bunch.items() {
        *used.get_mut(&s).expect("was consumed") -= 1;
    }
}

/// All non-empty subconfigurations of 1..=beta bin-type bunches whose
/// combined items form a sub-multiset of `universe`, canonical and
/// deduplicated.
pub fn enum_beta_subs(
    universe: &[Size],
    kappa: Size,
    beta: usize,
    guard: &ExplosionGuard,
) -> Result<Vec<SubConfig>, PartitionError> {
    let types = enum_bin_types(universe, kappa, guard)?;
    enum_beta_subs_from(&types, universe, beta, guard)
}

fn enum_beta_subs_from(
    types: &[Bunch],
    universe: &[Size],
    beta: usize,
    guard: &ExplosionGuard,
) -> Result<Vec<SubConfig>, PartitionError> {
    assert!(beta >= 1, "beta must be positive");
    let avail = size_counts(universe);
    let mut used: HashMap<Size, u64> = HashMap::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut out: Vec<SubConfig> = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn rec(
        types: &[Bunch],
        start: usize,
        beta: usize,
        avail: &HashMap<Size, u64>,
        used: &mut HashMap<Size, u64>,
        chosen: &mut Vec<usize>,
        out: &mut Vec<SubConfig>,
        cap: usize,
    ) -> Result<(), PartitionError> {
        if !chosen.is_empty() {
            if out.len() == cap {
                return Err(PartitionError::ExplosionGuard {
                    what: "subconfiguration",
                    limit: cap,
                });
            }
            let config = Configuration::new(chosen.iter().map(|&t| types[t].clone()).collect());
            out.push(SubConfig { config });
        }
        if chosen.len() == beta {
            return Ok(());
        }
        for t in start..types.len() {
            let mut snapshot = used.clone();
            if !fits_availability(&types[t], &mut snapshot, avail) {
                continue;
            }
            *used = snapshot;
            chosen.push(t);
            rec(types, t, beta, avail, used, chosen, out, cap)?;
            chosen.pop();
            release(&types[t], used);
        }
        Ok(())
    }
    rec(
        types,
        0,
        beta,
        &avail,
        &mut used,
        &mut chosen,
        &mut out,
        guard.max_subs,
    )?;
    out.sort_unstable_by(|a, b| b.cmp(a));
    out.dedup();
    Ok(out)
}

/// True iff one single-item move maps subconfiguration `d` to `e` (same
/// bunch count, same underlying items, one legal move apart).
pub fn subconfig_adjacent(d: &SubConfig, e: &SubConfig, kappa: Size) -> bool {
    are_adjacent(d.config(), e.config(), kappa).is_some()
}

/// The transshipment graph: one origin/intermediate/destination node triple
/// per subconfiguration. Edge ids are laid out as `0..n` for origin to
/// intermediate, `n..2n` for intermediate to destination, then one id per
/// directed intermediate edge between adjacent subconfigurations.
#[derive(Clone, Debug)]
pub struct FlowGraph {
    pub subs: Vec<SubConfig>,
    yy_pairs: Vec<(usize, usize)>,
    yy_index: HashMap<(usize, usize), usize>,
    in_yy: Vec<Vec<usize>>,
    out_yy: Vec<Vec<usize>>,
    sub_index: HashMap<SubConfig, usize>,
}

impl FlowGraph {
    pub fn build(
        subs: Vec<SubConfig>,
        kappa: Size,
        guard: &ExplosionGuard,
    ) -> Result<Self, PartitionError> {
        let sub_index: HashMap<SubConfig, usize> = subs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let mut yy_pairs: Vec<(usize, usize)> = Vec::new();
        for (i, sub) in subs.iter().enumerate() {
            for (_, neighbor) in neighbors(sub.config(), kappa) {
                let j = *sub_index
                    .get(&SubConfig { config: neighbor })
                    .expect("a neighbor of a subconfiguration is a subconfiguration");
                debug_assert_ne!(i, j);
                yy_pairs.push((i, j));
                if 2 * subs.len() + yy_pairs.len() > guard.max_edges {
                    return Err(PartitionError::ExplosionGuard {
                        what: "edge",
                        limit: guard.max_edges,
                    });
                }
            }
        }
        yy_pairs.sort_unstable();
        yy_pairs.dedup();
        let n = subs.len();
        let mut yy_index = HashMap::new();
        let mut in_yy = vec![Vec::new(); n];
        let mut out_yy = vec![Vec::new(); n];
        for (k, &(i, j)) in yy_pairs.iter().enumerate() {
            let edge = 2 * n + k;
            yy_index.insert((i, j), edge);
            out_yy[i].push(edge);
            in_yy[j].push(edge);
        }
        Ok(FlowGraph {
            subs,
            yy_pairs,
            yy_index,
            in_yy,
            out_yy,
            sub_index,
        })
    }

    pub fn sub_count(&self) -> usize {
        self.subs.len()
    }

    pub fn edge_count(&self) -> usize {
        2 * self.subs.len() + self.yy_pairs.len()
    }

    pub fn xy_edge(&self, sub: usize) -> usize {
        sub
    }

    pub fn yz_edge(&self, sub: usize) -> usize {
        self.subs.len() + sub
    }

    pub fn yy_edge(&self, from: usize, to: usize) -> Option<usize> {
        self.yy_index.get(&(from, to)).copied()
    }

    pub fn yy_pairs(&self) -> &[(usize, usize)] {
        &self.yy_pairs
    }

    pub fn sub_index_of(&self, sub: &SubConfig) -> Option<usize> {
        self.sub_index.get(sub).copied()
    }

    /// (tail, head) of an edge id.
    pub fn endpoints(&self, edge: usize) -> (Node, Node) {
        let n = self.subs.len();
        if edge < n {
            (Node::Origin(edge), Node::Mid(edge))
        } else if edge < 2 * n {
            (Node::Mid(edge - n), Node::Dest(edge - n))
        } else {
            let (i, j) = self.yy_pairs[edge - 2 * n];
            (Node::Mid(i), Node::Mid(j))
        }
    }

    /// Edge ids entering a node, ascending.
    pub fn in_edges(&self, node: Node) -> Vec<usize> {
        match node {
            Node::Origin(_) => Vec::new(),
            Node::Mid(i) => {
                let mut v = vec![self.xy_edge(i)];
                v.extend(&self.in_yy[i]);
                v
            }
            Node::Dest(i) => vec![self.yz_edge(i)],
        }
    }

    /// Edge ids leaving a node, ascending.
    pub fn out_edges(&self, node: Node) -> Vec<usize> {
        match node {
            Node::Origin(i) => vec![self.xy_edge(i)],
            Node::Mid(i) => {
                let mut v = vec![self.yz_edge(i)];
                v.extend(&self.out_yy[i]);
                v
            }
            Node::Dest(_) => Vec::new(),
        }
    }

    /// Connected components of the intermediate subgraph; adjacency
    /// preserves the underlying items and bunch count, so components refine
    /// those classes.
    pub fn components(&self) -> Vec<usize> {
        let n = self.subs.len();
        let mut comp: Vec<usize> = (0..n).collect();
        fn find(comp: &mut Vec<usize>, x: usize) -> usize {
            if comp[x] != x {
                let root = find(comp, comp[x]);
                comp[x] = root;
            }
            comp[x]
        }
        for &(i, j) in &self.yy_pairs {
            let (a, b) = (find(&mut comp, i), find(&mut comp, j));
            if a != b {
                comp[a.max(b)] = a.min(b);
            }
        }
        (0..n).map(|i| find(&mut comp, i)).collect()
    }
}

/// Build the full model for an instance: bin types, subconfigurations,
/// graph, and the source/target bunch multiplicities the demands must hit.
pub fn build_partition_ilp(
    instance: &Instance,
    beta: usize,
    guard: &ExplosionGuard,
) -> Result<IlpModel, PartitionError> {
    let universe = instance.underlying();
    let bin_types = enum_bin_types(&universe, instance.capacity(), guard)?;
    let subs = enum_beta_subs_from(&bin_types, &universe, beta, guard)?;
    let graph = FlowGraph::build(subs, instance.capacity(), guard)?;
    IlpModel::new(graph, bin_types, instance, beta)
}

/// Decision outcome: yes-instances carry the constructed partition
/// assignment and a verified reconfiguration sequence.
#[derive(Clone, Debug)]
pub enum DecideOutcome {
    Yes {
        assignment: PartitionAssignment,
        sequence: ReconfigSequence,
    },
    No,
}

impl DecideOutcome {
    pub fn is_yes(&self) -> bool {
        matches!(self, DecideOutcome::Yes { .. })
    }
}

/// Decides beta-bounded repacking by solving the feasibility program and, on
/// success, extracting a conforming reconfiguration sequence from the flow.
pub fn beta_repacking_decide(
    instance: &Instance,
    beta: usize,
    guard: &ExplosionGuard,
) -> Result<DecideOutcome, PartitionError> {
    let model = build_partition_ilp(instance, beta, guard)?;
    match solve_ilp(&model) {
        None => Ok(DecideOutcome::No),
        Some(solution) => {
            check_solution(&model, &solution).map_err(PartitionError::InternalInvariantViolation)?;
            let (assignment, sequence) = sequence_from_solution(&model, &solution)?;
            let report = crate::model::verify_sequence(instance, &sequence);
            if !report.is_ok() {
                return Err(PartitionError::InternalInvariantViolation(format!(
                    "extracted sequence failed verification: {report:?}"
                )));
            }
            Ok(DecideOutcome::Yes {
                assignment,
                sequence,
            })
        }
    }
}
