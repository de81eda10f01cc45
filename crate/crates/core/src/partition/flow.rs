//! Flow algebra on the transshipment graph and the decomposition of an
//! integral flow into unit path flows.

use super::{FlowGraph, PartitionError};

/// A node of the transshipment graph, identified by its subconfiguration
/// index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Origin(usize),
    Mid(usize),
    Dest(usize),
}

/// Value of a flow: total flow leaving the origin nodes.
pub fn flow_value(graph: &FlowGraph, flow: &[u64]) -> u64 {
    (0..graph.sub_count()).map(|i| flow[graph.xy_edge(i)]).sum()
}

/// Conservation holds at every intermediate node.
pub fn is_flow(graph: &FlowGraph, flow: &[u64]) -> bool {
    if flow.len() != graph.edge_count() {
        return false;
    }
    (0..graph.sub_count()).all(|i| {
        let node = Node::Mid(i);
        let inflow: u64 = graph.in_edges(node).iter().map(|&e| flow[e]).sum();
        let outflow: u64 = graph.out_edges(node).iter().map(|&e| flow[e]).sum();
        inflow == outflow
    })
}

/// Edge-wise sum of two flows.
pub fn flow_sum(a: &[u64], b: &[u64]) -> Vec<u64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Edge-wise subtraction; `None` unless `b` is a subflow of `a`.
pub fn flow_sub(a: &[u64], b: &[u64]) -> Option<Vec<u64>> {
    if !is_subflow(b, a) {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

pub fn is_subflow(sub: &[u64], of: &[u64]) -> bool {
    sub.len() == of.len() && sub.iter().zip(of).all(|(x, y)| x <= y)
}

/// An integral flow of value one supported on a single origin-to-destination
/// path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitPathFlow {
    /// `[Origin(s), Mid(s), ..., Mid(t), Dest(t)]`.
    pub nodes: Vec<Node>,
}

impl UnitPathFlow {
    pub fn source_sub(&self) -> usize {
        match self.nodes.first() {
            Some(Node::Origin(i)) => *i,
            _ => unreachable!("unit path flows start at an origin node"),
        }
    }

    pub fn sink_sub(&self) -> usize {
        match self.nodes.last() {
            Some(Node::Dest(i)) => *i,
            _ => unreachable!("unit path flows end at a destination node"),
        }
    }

    pub fn edge_ids(&self, graph: &FlowGraph) -> Vec<usize> {
        self.nodes
            .windows(2)
            .map(|w| match (w[0], w[1]) {
                (Node::Origin(i), Node::Mid(j)) if i == j => graph.xy_edge(i),
                (Node::Mid(i), Node::Dest(j)) if i == j => graph.yz_edge(i),
                (Node::Mid(i), Node::Mid(j)) => graph
                    .yy_edge(i, j)
                    .expect("consecutive path nodes are adjacent"),
                _ => unreachable!("malformed unit path"),
            })
            .collect()
    }

    /// The path as an edge-indexed flow vector.
    pub fn as_flow(&self, graph: &FlowGraph) -> Vec<u64> {
        let mut flow = vec![0u64; graph.edge_count()];
        for e in self.edge_ids(graph) {
            flow[e] += 1;
        }
        flow
    }
}

/// First positive in-edge of a node, by ascending edge id.
fn positive_in_edge(graph: &FlowGraph, remaining: &[u64], node: Node) -> Option<usize> {
    graph.in_edges(node).into_iter().find(|&e| remaining[e] > 0)
}

fn positive_out_edge(graph: &FlowGraph, remaining: &[u64], node: Node) -> Option<usize> {
    graph.out_edges(node).into_iter().find(|&e| remaining[e] > 0)
}

/// Decomposes an integral flow into exactly `|f|` unit path flows, each a
/// subflow of `f` with their sum also a subflow of `f`. The construction
/// peels the minimum edge value along a discovered origin-to-destination
/// path; directed cycles among intermediate nodes are peeled as well but
/// contribute no paths.
pub fn decompose_flow(graph: &FlowGraph, flow: &[u64]) -> Result<Vec<UnitPathFlow>, PartitionError> {
    if flow.len() != graph.edge_count() {
        return Err(PartitionError::MalformedFlow(format!(
            "flow has {} entries but the graph has {} edges",
            flow.len(),
            graph.edge_count()
        )));
    }
    if !is_flow(graph, flow) {
        return Err(PartitionError::MalformedFlow(
            "conservation fails at an intermediate node".into(),
        ));
    }
    let value = flow_value(graph, flow);
    let mut remaining = flow.to_vec();
    let mut units: Vec<UnitPathFlow> = Vec::new();

    'peel: while let Some(seed) = (0..remaining.len()).find(|&e| remaining[e] > 0) {
        // Grow a simple chain around the seed edge; nodes[i] -> nodes[i+1]
        // is edges[i]. Hitting a node already on the chain closes a
        // directed cycle, which is peeled without emitting paths.
        let (tail, head) = graph.endpoints(seed);
        let mut nodes = vec![tail, head];
        let mut edges = vec![seed];
        while let Node::Mid(_) = nodes[0] {
            let e = positive_in_edge(graph, &remaining, nodes[0])
                .expect("conservation guarantees a positive in-edge");
            let (prev, _) = graph.endpoints(e);
            if let Some(pos) = nodes.iter().position(|&n| n == prev) {
                let mut cyc = vec![e];
                cyc.extend_from_slice(&edges[..pos]);
                let delta = cyc.iter().map(|&e| remaining[e]).min().expect("cycle non-empty");
                for &e in &cyc {
                    remaining[e] -= delta;
                }
                continue 'peel;
            }
            nodes.insert(0, prev);
            edges.insert(0, e);
        }
        while let Node::Mid(_) = *nodes.last().expect("non-empty") {
            let e = positive_out_edge(graph, &remaining, *nodes.last().unwrap())
                .expect("conservation guarantees a positive out-edge");
            let (_, next) = graph.endpoints(e);
            if let Some(pos) = nodes.iter().position(|&n| n == next) {
                let mut cyc: Vec<usize> = edges[pos..].to_vec();
                cyc.push(e);
                let delta = cyc.iter().map(|&e| remaining[e]).min().expect("cycle non-empty");
                for &e in &cyc {
                    remaining[e] -= delta;
                }
                continue 'peel;
            }
            nodes.push(next);
            edges.push(e);
        }
        let delta = edges.iter().map(|&e| remaining[e]).min().expect("path non-empty");
        for &e in &edges {
            remaining[e] -= delta;
        }
        let unit = UnitPathFlow { nodes };
        debug_assert_eq!(unit.edge_ids(graph), edges);
        for _ in 0..delta {
            units.push(unit.clone());
        }
    }

    if units.len() as u64 != value {
        return Err(PartitionError::MalformedFlow(format!(
            "decomposed {} unit paths from a flow of value {value}",
            units.len()
        )));
    }
    Ok(units)
}

#[cfg(test)]
mod tests {
    use super::super::{enum_beta_subs, ExplosionGuard, FlowGraph};
    use super::*;

    // Small graph over the universe {1,1} at kappa 2, beta 2: rich enough to
    // contain multi-node adjacency structure.
    fn small_graph() -> FlowGraph {
        let subs = enum_beta_subs(&[1, 1], 2, 2, &ExplosionGuard::default()).unwrap();
        FlowGraph::build(subs, 2, &ExplosionGuard::default()).unwrap()
    }

    #[test]
    fn zero_flow_decomposes_to_nothing() {
        let graph = small_graph();
        let flow = vec![0u64; graph.edge_count()];
        assert_eq!(decompose_flow(&graph, &flow).unwrap(), Vec::new());
    }

    #[test]
    fn trivial_path_with_multiplicity() {
        let graph = small_graph();
        let mut flow = vec![0u64; graph.edge_count()];
        flow[graph.xy_edge(0)] = 3;
        flow[graph.yz_edge(0)] = 3;
        let units = decompose_flow(&graph, &flow).unwrap();
        assert_eq!(units.len(), 3);
        assert!(units.iter().all(|u| u.nodes.len() == 3));
        assert!(units.iter().all(|u| u.source_sub() == 0 && u.sink_sub() == 0));
        let total = units
            .iter()
            .fold(vec![0u64; graph.edge_count()], |acc, u| flow_sum(&acc, &u.as_flow(&graph)));
        assert!(is_subflow(&total, &flow));
    }

    #[test]
    fn cycle_is_peeled_and_contributes_no_paths() {
        let graph = small_graph();
        // Find a 2-cycle between adjacent mids.
        let &(i, j) = graph
            .yy_pairs()
            .iter()
            .find(|&&(a, b)| graph.yy_edge(b, a).is_some() && a < b)
            .expect("adjacency is symmetric");
        let mut flow = vec![0u64; graph.edge_count()];
        flow[graph.yy_edge(i, j).unwrap()] = 2;
        flow[graph.yy_edge(j, i).unwrap()] = 2;
        // Plus one genuine path through i.
        flow[graph.xy_edge(i)] = 1;
        flow[graph.yz_edge(i)] = 1;
        assert!(is_flow(&graph, &flow));
        let units = decompose_flow(&graph, &flow).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].source_sub(), i);
        assert_eq!(units[0].sink_sub(), i);
    }

    #[test]
    fn malformed_flow_rejected() {
        let graph = small_graph();
        let mut flow = vec![0u64; graph.edge_count()];
        flow[graph.xy_edge(0)] = 1;
        // No matching outflow at Mid(0).
        assert!(matches!(
            decompose_flow(&graph, &flow),
            Err(PartitionError::MalformedFlow(_))
        ));
    }

    #[test]
    fn sum_and_subtract_preserve_flows() {
        let graph = small_graph();
        let mut f1 = vec![0u64; graph.edge_count()];
        f1[graph.xy_edge(0)] = 2;
        f1[graph.yz_edge(0)] = 2;
        let mut f2 = vec![0u64; graph.edge_count()];
        f2[graph.xy_edge(1)] = 1;
        f2[graph.yz_edge(1)] = 1;
        let sum = flow_sum(&f1, &f2);
        assert!(is_flow(&graph, &sum));
        assert_eq!(flow_value(&graph, &sum), 3);
        let back = flow_sub(&sum, &f2).unwrap();
        assert_eq!(back, f1);
        assert!(is_flow(&graph, &back));
        assert!(flow_sub(&f2, &f1).is_none());
    }
}
