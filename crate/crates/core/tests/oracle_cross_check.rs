//! Cross-checks of the breadth-first oracle against independent searches:
//! shortestness versus iterative deepening on tiny components, and closure
//! of infeasible verdicts.

use std::collections::HashSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use repack_core::model::{verify_sequence, Configuration, Instance, Size};
use repack_core::oracle::{bfs_reachable, neighbors, BfsResult, SearchBudget};

fn random_config(rng: &mut ChaCha8Rng, n: usize, kappa: Size, palette: &[Size]) -> Configuration {
    let bunches: Vec<Vec<Size>> = (0..n)
        .map(|_| {
            let mut items = Vec::new();
            let mut volume = 0;
            while rng.gen_bool(0.5) {
                let fits: Vec<Size> = palette.iter().copied().filter(|&s| volume + s <= kappa).collect();
                let Some(&item) = fits.choose(rng) else { break };
                items.push(item);
                volume += item;
            }
            items
        })
        .collect();
    Configuration::from_items(bunches).unwrap()
}

/// The full reachable component of a configuration.
fn component(start: &Configuration, kappa: Size) -> Vec<Configuration> {
    let mut seen: HashSet<Configuration> = HashSet::from([start.clone()]);
    let mut stack = vec![start.clone()];
    while let Some(at) = stack.pop() {
        for (_, next) in neighbors(&at, kappa) {
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
    }
    let mut out: Vec<Configuration> = seen.into_iter().collect();
    out.sort();
    out
}

/// Depth-limited search for the target; returns true if reachable within
/// `depth` moves.
fn depth_limited(current: &Configuration, target: &Configuration, kappa: Size, depth: usize) -> bool {
    if current == target {
        return true;
    }
    if depth == 0 {
        return false;
    }
    neighbors(current, kappa)
        .into_iter()
        .any(|(_, next)| depth_limited(&next, target, kappa, depth - 1))
}

fn iterative_deepening_distance(
    source: &Configuration,
    target: &Configuration,
    kappa: Size,
    max_depth: usize,
) -> Option<usize> {
    (0..=max_depth).find(|&d| depth_limited(source, target, kappa, d))
}

#[test]
fn shortestness_matches_iterative_deepening() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0dd_cafe);
    let budget = SearchBudget::default();
    let mut checked = 0;
    while checked < 200 {
        let kappa = rng.gen_range(3..=6);
        let n = rng.gen_range(2..=3);
        let source = random_config(&mut rng, n, kappa, &[1, 2, 3]);
        let comp = component(&source, kappa);
        if comp.len() > 10 {
            continue;
        }
        let target = comp[rng.gen_range(0..comp.len())].clone();
        let inst = Instance::new(kappa, source.clone(), target.clone()).unwrap();
        let BfsResult::Feasible(seq) = bfs_reachable(&inst, &budget) else {
            panic!("target was drawn from the reachable component");
        };
        assert!(verify_sequence(&inst, &seq).is_ok());
        let shortest = iterative_deepening_distance(&source, &target, kappa, comp.len())
            .expect("reachable within the component diameter");
        assert_eq!(seq.len(), shortest, "instance {}", inst.to_json());
        checked += 1;
    }
}

#[test]
fn infeasible_verdicts_are_closed() {
    // The section-2 example at capacity 10 plus random infeasible cases:
    // every neighbor of every component state must lie in the component,
    // and the target must not.
    let budget = SearchBudget::default();
    let golden = Instance::from_raw(
        10,
        vec![vec![1, 1, 2, 6], vec![2, 3, 5]],
        vec![vec![1, 3, 6], vec![1, 2, 2, 5]],
    )
    .unwrap();
    let mut cases = vec![golden];

    let mut rng = ChaCha8Rng::seed_from_u64(0xc105ed);
    while cases.len() < 30 {
        let kappa = rng.gen_range(3..=6);
        let source = random_config(&mut rng, 2, kappa, &[1, 2, 3]);
        let universe = source.underlying();
        if universe.is_empty() {
            continue;
        }
        // Random redistribution of the same universe; keep only infeasible ones.
        let mut items = universe.clone();
        items.shuffle(&mut rng);
        let mut bunches = vec![Vec::new(), Vec::new()];
        for item in items {
            bunches[rng.gen_range(0..2)].push(item);
        }
        let Ok(inst) = Instance::from_raw(kappa, source.to_items(), bunches) else {
            continue;
        };
        if bfs_reachable(&inst, &budget) == BfsResult::Infeasible {
            cases.push(inst);
        }
    }

    for inst in &cases {
        assert_eq!(bfs_reachable(inst, &budget), BfsResult::Infeasible);
        let comp: HashSet<Configuration> =
            component(inst.source(), inst.capacity()).into_iter().collect();
        assert!(!comp.contains(inst.target()));
        for state in &comp {
            for (_, next) in neighbors(state, inst.capacity()) {
                assert!(comp.contains(&next), "component is not closed");
            }
        }
    }
}
