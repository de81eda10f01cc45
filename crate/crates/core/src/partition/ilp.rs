//! The feasibility integer program, its constraint checker, and an exact
//! bounded solver.
//!
//! Variables are one flow value per edge plus one demand per origin and per
//! destination node. Origin demands must tile the source configuration's
//! bunch multiset with subconfigurations, destination demands must tile the
//! target's, and the flow must route every origin portion to a destination
//! portion through the intermediate adjacency edges.
//!
//! The solver enumerates tilings of the source and target bunch multisets by
//! depth-first search with propagation on the remaining bunch counts, then
//! matches the two sides per connected component of the intermediate graph:
//! flow edges are uncapacitated within the model's bound, so supplies can
//! meet demands exactly when every component is balanced. Any solution found
//! is routed explicitly and re-checked against the full constraint system.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::model::{Bunch, Configuration, Instance, Size};

use super::{FlowGraph, PartitionError};

/// The feasibility program over a built graph: bin types, their
/// multiplicities in source and target, and the shared variable bound.
#[derive(Clone, Debug)]
pub struct IlpModel {
    pub graph: FlowGraph,
    pub bin_types: Vec<Bunch>,
    pub source_mult: Vec<u64>,
    pub target_mult: Vec<u64>,
    /// Every variable is bounded by the number of bunches in the source: a
    /// feasible instance always admits a solution whose per-part
    /// reconfigurations are simple shortest paths, one unit each, over at
    /// most that many parts.
    pub var_bound: u64,
    pub kappa: Size,
    pub beta: usize,
    /// Sparse bunch-type multiplicities per subconfiguration.
    sub_type_mult: Vec<Vec<(usize, u64)>>,
}

impl IlpModel {
    pub fn new(
        graph: FlowGraph,
        bin_types: Vec<Bunch>,
        instance: &Instance,
        beta: usize,
    ) -> Result<Self, PartitionError> {
        let type_index: HashMap<&Bunch, usize> =
            bin_types.iter().enumerate().map(|(i, b)| (b, i)).collect();
        let mult_of = |config: &Configuration| -> Result<Vec<u64>, PartitionError> {
            let mut mult = vec![0u64; bin_types.len()];
            for bunch in config.bunches() {
                let &idx = type_index.get(bunch).ok_or_else(|| {
                    PartitionError::InternalInvariantViolation(
                        "configuration bunch missing from bin types".into(),
                    )
                })?;
                mult[idx] += 1;
            }
            Ok(mult)
        };
        let source_mult = mult_of(instance.source())?;
        let target_mult = mult_of(instance.target())?;
        let sub_type_mult = graph
            .subs
            .iter()
            .map(|sub| {
                let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
                for bunch in sub.config().bunches() {
                    let &idx = type_index
                        .get(bunch)
                        .expect("subconfiguration bunches are bin types");
                    *counts.entry(idx).or_insert(0) += 1;
                }
                counts.into_iter().collect()
            })
            .collect();
        Ok(IlpModel {
            graph,
            bin_types,
            source_mult,
            target_mult,
            var_bound: instance.source().len() as u64,
            kappa: instance.capacity(),
            beta,
            sub_type_mult,
        })
    }

    /// Multiplicity of bin type `type_idx` in subconfiguration `sub_idx`.
    pub fn mult_in_sub(&self, type_idx: usize, sub_idx: usize) -> u64 {
        self.sub_type_mult[sub_idx]
            .iter()
            .find(|&&(t, _)| t == type_idx)
            .map_or(0, |&(_, c)| c)
    }

    pub fn sub_types(&self, sub_idx: usize) -> &[(usize, u64)] {
        &self.sub_type_mult[sub_idx]
    }

    pub fn variable_count(&self) -> usize {
        self.graph.edge_count() + 2 * self.graph.sub_count()
    }
}

/// A candidate assignment to all variables: flows per edge, demands per
/// origin node (non-positive) and destination node (non-negative).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IlpSolution {
    pub flow: Vec<u64>,
    pub demand_origin: Vec<i64>,
    pub demand_dest: Vec<i64>,
}

/// One row of the inequality form `A x <= b`; columns are laid out as all
/// edge flows, then origin demands, then destination demands.
#[derive(Clone, Debug)]
pub struct ConstraintRow {
    pub coeffs: Vec<(usize, i64)>,
    pub rhs: i64,
    pub label: &'static str,
}

/// Materializes the inequality rows: every equality family appears as a
/// `<=` and a `>=` copy (the latter negated), followed by the sign rows.
pub fn constraint_rows(model: &IlpModel) -> Vec<ConstraintRow> {
    let graph = &model.graph;
    let n = graph.sub_count();
    let edge_count = graph.edge_count();
    let origin_col = |d: usize| edge_count + d;
    let dest_col = |d: usize| edge_count + n + d;
    let mut rows = Vec::new();

    let mut push_eq = |coeffs: Vec<(usize, i64)>, rhs: i64, label: &'static str, neg: &'static str| {
        rows.push(ConstraintRow {
            coeffs: coeffs.clone(),
            rhs,
            label,
        });
        rows.push(ConstraintRow {
            coeffs: coeffs.into_iter().map(|(c, a)| (c, -a)).collect(),
            rhs: -rhs,
            label: neg,
        });
    };

    for d in 0..n {
        // -f(out(x_D)) - d(x_D) = 0
        push_eq(
            vec![(graph.xy_edge(d), -1), (origin_col(d), -1)],
            0,
            "origin demand",
            "origin demand'",
        );
    }
    for d in 0..n {
        // f(in(y_D)) - f(out(y_D)) = 0
        let mut coeffs: Vec<(usize, i64)> = Vec::new();
        for e in graph.in_edges(super::Node::Mid(d)) {
            coeffs.push((e, 1));
        }
        for e in graph.out_edges(super::Node::Mid(d)) {
            coeffs.push((e, -1));
        }
        push_eq(coeffs, 0, "conservation", "conservation'");
    }
    for d in 0..n {
        // f(in(z_D)) - d(z_D) = 0
        push_eq(
            vec![(graph.yz_edge(d), 1), (dest_col(d), -1)],
            0,
            "destination demand",
            "destination demand'",
        );
    }
    for (t, &mult_s) in model.source_mult.iter().enumerate() {
        // sum_D mult(B,D) d(x_D) = -mult(B,S)
        let coeffs: Vec<(usize, i64)> = (0..n)
            .filter_map(|d| {
                let m = model.mult_in_sub(t, d);
                (m > 0).then_some((origin_col(d), m as i64))
            })
            .collect();
        push_eq(coeffs, -(mult_s as i64), "source cover", "source cover'");
    }
    for (t, &mult_t) in model.target_mult.iter().enumerate() {
        // sum_D mult(B,D) d(z_D) = mult(B,T)
        let coeffs: Vec<(usize, i64)> = (0..n)
            .filter_map(|d| {
                let m = model.mult_in_sub(t, d);
                (m > 0).then_some((dest_col(d), m as i64))
            })
            .collect();
        push_eq(coeffs, mult_t as i64, "target cover", "target cover'");
    }
    for e in 0..edge_count {
        // -f(e) <= 0
        rows.push(ConstraintRow {
            coeffs: vec![(e, -1)],
            rhs: 0,
            label: "flow sign",
        });
    }
    for d in 0..n {
        // d(x_D) <= 0
        rows.push(ConstraintRow {
            coeffs: vec![(origin_col(d), 1)],
            rhs: 0,
            label: "origin sign",
        });
    }
    for d in 0..n {
        // -d(z_D) <= 0
        rows.push(ConstraintRow {
            coeffs: vec![(dest_col(d), -1)],
            rhs: 0,
            label: "destination sign",
        });
    }
    rows
}

/// Checks a candidate solution against every materialized row.
pub fn check_solution(model: &IlpModel, solution: &IlpSolution) -> Result<(), String> {
    let n = model.graph.sub_count();
    let edge_count = model.graph.edge_count();
    if solution.flow.len() != edge_count
        || solution.demand_origin.len() != n
        || solution.demand_dest.len() != n
    {
        return Err("solution dimensions do not match the model".into());
    }
    let value_of = |col: usize| -> i128 {
        if col < edge_count {
            solution.flow[col] as i128
        } else if col < edge_count + n {
            solution.demand_origin[col - edge_count] as i128
        } else {
            solution.demand_dest[col - edge_count - n] as i128
        }
    };
    for (idx, row) in constraint_rows(model).iter().enumerate() {
        let lhs: i128 = row
            .coeffs
            .iter()
            .map(|&(col, a)| a as i128 * value_of(col))
            .sum();
        if lhs > row.rhs as i128 {
            return Err(format!(
                "row {idx} ({label}) violated: {lhs} > {rhs}",
                label = row.label,
                rhs = row.rhs
            ));
        }
    }
    Ok(())
}

/// Enumerates tilings of a bunch multiset (given as per-type counts) by
/// subconfigurations: a depth-first search that always covers the first
/// uncovered bunch type, pruning on remaining counts. Each complete tiling
/// is reduced to its per-component portion totals; for each distinct totals
/// vector one representative tiling (counts per subconfiguration) is kept.
fn tilings_by_component(
    model: &IlpModel,
    mult: &[u64],
    components: &[usize],
) -> BTreeMap<Vec<u64>, HashMap<usize, u64>> {
    let n = model.graph.sub_count();
    // Candidate subconfigurations per pivot type, usable only when each of
    // their bunches remains available.
    let mut by_type: Vec<Vec<usize>> = vec![Vec::new(); model.bin_types.len()];
    for sub in 0..n {
        if model
            .sub_types(sub)
            .iter()
            .all(|&(t, c)| c <= mult[t])
        {
            for &(t, _) in model.sub_types(sub) {
                by_type[t].push(sub);
            }
        }
    }

    let mut out: BTreeMap<Vec<u64>, HashMap<usize, u64>> = BTreeMap::new();
    let mut remaining = mult.to_vec();
    let mut chosen: Vec<usize> = Vec::new();

    #[allow(clippy::too_many_arguments)]
    fn rec(
        model: &IlpModel,
        by_type: &[Vec<usize>],
        components: &[usize],
        remaining: &mut Vec<u64>,
        chosen: &mut Vec<usize>,
        min_sub: usize,
        last_pivot: usize,
        out: &mut BTreeMap<Vec<u64>, HashMap<usize, u64>>,
    ) {
        let Some(pivot) = remaining.iter().position(|&c| c > 0) else {
            let mut counts: HashMap<usize, u64> = HashMap::new();
            for &sub in chosen.iter() {
                *counts.entry(sub).or_insert(0) += 1;
            }
            let mut totals = vec![0u64; components.len()];
            for (&sub, &c) in &counts {
                totals[components[sub]] += c;
            }
            out.entry(totals).or_insert(counts);
            return;
        };
        let floor = if pivot == last_pivot { min_sub } else { 0 };
        for &sub in &by_type[pivot] {
            if sub < floor {
                continue;
            }
            if model
                .sub_types(sub)
                .iter()
                .any(|&(t, c)| c > remaining[t])
            {
                continue;
            }
            for &(t, c) in model.sub_types(sub) {
                remaining[t] -= c;
            }
            chosen.push(sub);
            rec(model, by_type, components, remaining, chosen, sub, pivot, out);
            chosen.pop();
            for &(t, c) in model.sub_types(sub) {
                remaining[t] += c;
            }
        }
    }

    rec(
        model,
        &by_type,
        components,
        &mut remaining,
        &mut chosen,
        0,
        usize::MAX,
        &mut out,
    );
    out
}

/// Shortest path between two intermediate nodes of the same component.
fn mid_path(graph: &FlowGraph, from: usize, to: usize) -> Vec<usize> {
    if from == to {
        return vec![from];
    }
    let mut parent: HashMap<usize, usize> = HashMap::new();
    parent.insert(from, from);
    let mut queue = VecDeque::from([from]);
    while let Some(at) = queue.pop_front() {
        for e in graph.out_edges(super::Node::Mid(at)) {
            let (_, head) = graph.endpoints(e);
            let super::Node::Mid(next) = head else { continue };
            if parent.contains_key(&next) {
                continue;
            }
            parent.insert(next, at);
            if next == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = parent[&cur];
                    path.push(cur);
                }
                path.reverse();
                return path;
            }
            queue.push_back(next);
        }
    }
    unreachable!("endpoints were checked to share a component");
}

/// Exact feasibility: searches for origin and destination tilings whose
/// per-component portion totals agree, then routes one unit of flow per
/// portion. Returns `None` exactly when no feasible assignment exists.
pub fn solve_ilp(model: &IlpModel) -> Option<IlpSolution> {
    let components = model.graph.components();
    let source_tilings = tilings_by_component(model, &model.source_mult, &components);
    if source_tilings.is_empty() {
        return None;
    }
    let target_tilings = tilings_by_component(model, &model.target_mult, &components);
    let (totals, source_counts) = source_tilings
        .iter()
        .find(|(totals, _)| target_tilings.contains_key(*totals))?;
    let target_counts = &target_tilings[totals];

    let n = model.graph.sub_count();
    let mut flow = vec![0u64; model.graph.edge_count()];
    let mut demand_origin = vec![0i64; n];
    let mut demand_dest = vec![0i64; n];
    for (&sub, &c) in source_counts {
        demand_origin[sub] = -(c as i64);
        flow[model.graph.xy_edge(sub)] = c;
    }
    for (&sub, &c) in target_counts {
        demand_dest[sub] = c as i64;
        flow[model.graph.yz_edge(sub)] = c;
    }

    // Route supplies to demands inside each component.
    let mut supplies: Vec<usize> = Vec::new();
    let mut demands: Vec<usize> = Vec::new();
    for sub in 0..n {
        supplies.extend(std::iter::repeat_n(
            sub,
            source_counts.get(&sub).copied().unwrap_or(0) as usize,
        ));
        demands.extend(std::iter::repeat_n(
            sub,
            target_counts.get(&sub).copied().unwrap_or(0) as usize,
        ));
    }
    supplies.sort_unstable_by_key(|&s| (components[s], s));
    demands.sort_unstable_by_key(|&s| (components[s], s));
    debug_assert_eq!(supplies.len(), demands.len());
    for (&s, &d) in supplies.iter().zip(demands.iter()) {
        debug_assert_eq!(components[s], components[d]);
        let path = mid_path(&model.graph, s, d);
        for pair in path.windows(2) {
            let e = model
                .graph
                .yy_edge(pair[0], pair[1])
                .expect("path follows adjacency edges");
            flow[e] += 1;
        }
    }

    let solution = IlpSolution {
        flow,
        demand_origin,
        demand_dest,
    };
    debug_assert_eq!(check_solution(model, &solution), Ok(()));
    Some(solution)
}
