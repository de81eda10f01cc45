//! Conversions between feasible program solutions and conforming
//! reconfiguration sequences, in both directions.


use crate::model::{are_adjacent, Bunch, ReconfigSequence, Size, Workspace};

use super::flow::{decompose_flow, Node};
use super::ilp::{IlpModel, IlpSolution};
use super::{PartitionError, SubConfig};

/// One state of a conforming sequence: the list of portions, aligned with
/// the partition's parts.
pub type Assignment = Vec<SubConfig>;

/// A part of the partition: an item multiset and the number of bunches
/// allocated to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPart {
    pub items: Vec<Size>,
    pub bunches: usize,
}

/// A bounded partition together with the source-consistent portions assigned
/// to its parts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionAssignment {
    pub parts: Vec<PartitionPart>,
    pub portions: Vec<SubConfig>,
}

/// The source assignment induced by the origin demands: one portion copy of
/// each subconfiguration per unit of demand, in subconfiguration order.
fn assignment_from_origin_demands(model: &IlpModel, demands: &[i64]) -> Assignment {
    let mut portions = Vec::new();
    for (sub, &d) in demands.iter().enumerate() {
        for _ in 0..d.unsigned_abs() {
            portions.push(model.graph.subs[sub].clone());
        }
    }
    portions
}

/// Builds the conforming sequence of assignments from a feasible solution:
/// the flow is decomposed into unit path flows, each portion of the source
/// assignment consumes an unused path starting at its origin node, and the
/// path's interior nodes (excluding the first two and the last) rewrite that
/// portion step by step.
pub fn conforming_sequence(
    model: &IlpModel,
    solution: &IlpSolution,
) -> Result<Vec<Assignment>, PartitionError> {
    let paths = decompose_flow(&model.graph, &solution.flow)?;
    // Every decomposed path count must match the demands: |d(x_D)| paths
    // sourced at each origin, |d(z_D)| ending at each destination.
    for sub in 0..model.graph.sub_count() {
        let sourced = paths.iter().filter(|p| p.source_sub() == sub).count() as u64;
        if sourced != solution.demand_origin[sub].unsigned_abs() {
            return Err(PartitionError::InternalInvariantViolation(format!(
                "{sourced} unit paths sourced at subconfiguration {sub}, expected {}",
                solution.demand_origin[sub].unsigned_abs()
            )));
        }
        let sunk = paths.iter().filter(|p| p.sink_sub() == sub).count() as u64;
        if sunk != solution.demand_dest[sub] as u64 {
            return Err(PartitionError::InternalInvariantViolation(format!(
                "{sunk} unit paths end at subconfiguration {sub}, expected {}",
                solution.demand_dest[sub]
            )));
        }
    }

    let source_assignment = assignment_from_origin_demands(model, &solution.demand_origin);
    let mut used = vec![false; paths.len()];
    let mut sequence = vec![source_assignment.clone()];
    let mut current = source_assignment;
    for i in 0..current.len() {
        let sub = model
            .graph
            .sub_index_of(&current[i])
            .ok_or(PartitionError::UnknownSubConfig)?;
        let j = paths
            .iter()
            .enumerate()
            .position(|(k, p)| !used[k] && p.source_sub() == sub)
            .ok_or_else(|| {
                PartitionError::InternalInvariantViolation(
                    "no unused unit path flow matches the portion".into(),
                )
            })?;
        used[j] = true;
        // Path nodes are [origin, mid(start), mid(..), ..., mid(end), dest];
        // the first two describe the portion as it stands and the last adds
        // nothing, so steps come from the remaining interior nodes.
        let nodes = &paths[j].nodes;
        for &node in &nodes[2..nodes.len() - 1] {
            let Node::Mid(next_sub) = node else {
                return Err(PartitionError::InternalInvariantViolation(
                    "interior path nodes must be intermediate nodes".into(),
                ));
            };
            let mut next = current.clone();
            next[i] = model.graph.subs[next_sub].clone();
            sequence.push(next.clone());
            current = next;
        }
    }
    Ok(sequence)
}

/// Index of the unique differing portion between two adjacent assignments.
fn differing_portion(a: &Assignment, b: &Assignment) -> Result<usize, PartitionError> {
    if a.len() != b.len() {
        return Err(PartitionError::NotConforming(
            "assignments have different part counts".into(),
        ));
    }
    let mut indices = (0..a.len()).filter(|&i| a[i] != b[i]);
    let (Some(i), None) = (indices.next(), indices.next()) else {
        return Err(PartitionError::NotConforming(
            "consecutive assignments must differ in exactly one portion".into(),
        ));
    };
    Ok(i)
}

fn validate_conforming(seq: &[Assignment], kappa: Size) -> Result<(), PartitionError> {
    if seq.is_empty() {
        return Err(PartitionError::NotConforming("sequence is empty".into()));
    }
    for window in seq.windows(2) {
        let i = differing_portion(&window[0], &window[1])?;
        if are_adjacent(window[0][i].config(), window[1][i].config(), kappa).is_none() {
            return Err(PartitionError::NotConforming(
                "changed portions are not adjacent".into(),
            ));
        }
    }
    Ok(())
}

/// Stable regrouping of a conforming sequence so that all steps touching
/// portion `i` precede steps touching portion `j` whenever `i < j`. The
/// endpoints are preserved and the result is still conforming.
pub fn sort_sequence(seq: &[Assignment], kappa: Size) -> Result<Vec<Assignment>, PartitionError> {
    validate_conforming(seq, kappa)?;
    let parts = seq[0].len();
    // Per-portion chains of values, in order of appearance.
    let mut chains: Vec<Vec<SubConfig>> = (0..parts).map(|i| vec![seq[0][i].clone()]).collect();
    for window in seq.windows(2) {
        let i = differing_portion(&window[0], &window[1])?;
        chains[i].push(window[1][i].clone());
    }
    let mut out = vec![seq[0].clone()];
    let mut current = seq[0].clone();
    for (i, chain) in chains.iter().enumerate() {
        for value in &chain[1..] {
            current[i] = value.clone();
            out.push(current.clone());
        }
    }
    debug_assert_eq!(out.last(), seq.last());
    Ok(out)
}

fn is_sorted_order(seq: &[Assignment]) -> Result<bool, PartitionError> {
    let mut last_portion = 0usize;
    for window in seq.windows(2) {
        let i = differing_portion(&window[0], &window[1])?;
        if i < last_portion {
            return Ok(false);
        }
        last_portion = i;
    }
    Ok(true)
}

/// Rebuilds a feasible solution from a sorted conforming sequence: demands
/// and the origin/destination edge flows come from portion multiplicities in
/// the first and last assignments, and each step increments the flow on the
/// intermediate edge between its two portion values.
pub fn solution_from_sequence(
    model: &IlpModel,
    seq: &[Assignment],
) -> Result<IlpSolution, PartitionError> {
    validate_conforming(seq, model.kappa)?;
    if !is_sorted_order(seq)? {
        return Err(PartitionError::NotSorted);
    }
    let sub_of = |portion: &SubConfig| -> Result<usize, PartitionError> {
        model
            .graph
            .sub_index_of(portion)
            .ok_or(PartitionError::UnknownSubConfig)
    };
    let n = model.graph.sub_count();
    let mut flow = vec![0u64; model.graph.edge_count()];
    let mut demand_origin = vec![0i64; n];
    let mut demand_dest = vec![0i64; n];
    for portion in &seq[0] {
        let sub = sub_of(portion)?;
        demand_origin[sub] -= 1;
        flow[model.graph.xy_edge(sub)] += 1;
    }
    for portion in seq.last().expect("validated non-empty") {
        let sub = sub_of(portion)?;
        demand_dest[sub] += 1;
        flow[model.graph.yz_edge(sub)] += 1;
    }
    for window in seq.windows(2) {
        let i = differing_portion(&window[0], &window[1])?;
        let from = sub_of(&window[0][i])?;
        let to = sub_of(&window[1][i])?;
        let edge = model
            .graph
            .yy_edge(from, to)
            .ok_or_else(|| PartitionError::NotConforming("step crosses a missing edge".into()))?;
        flow[edge] += 1;
    }
    Ok(IlpSolution {
        flow,
        demand_origin,
        demand_dest,
    })
}

/// Builds the partition, its source assignment, and a flat verified move
/// sequence from a feasible solution. Moves are emitted against the global
/// configuration (the disjoint union of all portions) in canonical indexing.
pub fn sequence_from_solution(
    model: &IlpModel,
    solution: &IlpSolution,
) -> Result<(PartitionAssignment, ReconfigSequence), PartitionError> {
    let assignments = conforming_sequence(model, solution)?;
    let initial = &assignments[0];
    let parts: Vec<PartitionPart> = initial
        .iter()
        .map(|portion| PartitionPart {
            items: portion.universe(),
            bunches: portion.bunch_count(),
        })
        .collect();

    // Stable global slots: portion i owns a contiguous block of bunches.
    let mut offsets = Vec::with_capacity(initial.len());
    let mut slots: Vec<Bunch> = Vec::new();
    for portion in initial {
        offsets.push(slots.len());
        slots.extend(portion.config().bunches().iter().cloned());
    }
    let mut ws = Workspace::from_bunches(slots, model.kappa);

    for window in assignments.windows(2) {
        let i = differing_portion(&window[0], &window[1])?;
        let before = window[0][i].config();
        let after = window[1][i].config();
        let mv = are_adjacent(before, after, model.kappa).ok_or_else(|| {
            PartitionError::InternalInvariantViolation(
                "consecutive portions are not adjacent".into(),
            )
        })?;
        let donor = &before.bunches()[mv.from];
        let recipient = &before.bunches()[mv.to];
        let base = offsets[i];
        let span = base..base + window[0][i].bunch_count();
        let donor_slot = span
            .clone()
            .find(|&s| ws.bunch(s) == donor)
            .expect("portion slots mirror the portion contents");
        let recipient_slot = span
            .clone()
            .find(|&s| s != donor_slot && ws.bunch(s) == recipient)
            .expect("portion slots mirror the portion contents");
        ws.transfer(mv.item, donor_slot, recipient_slot);
    }

    // The final state must be consistent with the final assignment.
    debug_assert_eq!(
        ws.current(),
        crate::model::Configuration::new(
            assignments
                .last()
                .unwrap()
                .iter()
                .flat_map(|p| p.config().bunches().iter().cloned())
                .collect()
        )
    );

    Ok((
        PartitionAssignment {
            parts,
            portions: initial.clone(),
        },
        ws.into_sequence(),
    ))
}
