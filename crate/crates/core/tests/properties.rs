//! Property tests for the core invariants and the randomized sweeps the
//! solver modules rely on.

use proptest::prelude::*;

use rand::prelude::*;
use rand::Rng as _;
use rand_chacha::ChaCha8Rng;

use repack_core::model::{
    apply_move, are_adjacent, canonicalize, inverse_move, verify_sequence, Bunch, Configuration,
    Instance, ReconfigSequence, Size,
};
use repack_core::oracle::neighbors;
use repack_core::partition::{build_partition_ilp, is_flow, solve_ilp, ExplosionGuard, Node};
use repack_core::pow2::{form_all_bundles, merge_slack, slack_items};

fn arb_bunch(max_items: usize, max_size: Size) -> impl Strategy<Value = Vec<Size>> {
    prop::collection::vec(1..=max_size, 0..=max_items)
}

fn arb_raw_config() -> impl Strategy<Value = Vec<Vec<Size>>> {
    prop::collection::vec(arb_bunch(4, 6), 1..=5)
}

proptest! {
    #[test]
    fn canonicalize_is_a_congruence(raw in arb_raw_config(), seed in any::<u64>()) {
        let bunches: Vec<Bunch> = raw.iter().cloned().map(|b| Bunch::new(b).unwrap()).collect();
        let canon = canonicalize(bunches.clone());
        // Idempotent.
        prop_assert_eq!(canonicalize(canon.bunches().to_vec()), canon.clone());
        // Invariant under permutations of bunches and of items.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = raw.clone();
        shuffled.shuffle(&mut rng);
        for b in &mut shuffled {
            b.shuffle(&mut rng);
        }
        prop_assert_eq!(Configuration::from_items(shuffled).unwrap(), canon);
    }

    #[test]
    fn moves_preserve_universe_and_invert(raw in arb_raw_config(), pick in any::<u64>()) {
        let config = Configuration::from_items(raw).unwrap();
        let kappa = 12;
        if !config.is_legal(kappa) {
            return Ok(());
        }
        let options = neighbors(&config, kappa);
        if options.is_empty() {
            return Ok(());
        }
        let (mv, next) = &options[(pick as usize) % options.len()];
        prop_assert_eq!(next.underlying(), config.underlying());
        prop_assert_eq!(next.len(), config.len());
        let (after, inv) = inverse_move(&config, *mv, kappa).unwrap();
        prop_assert_eq!(&after, next);
        prop_assert_eq!(apply_move(&after, inv, kappa).unwrap(), config);
    }
}

#[test]
fn random_move_chains_verify_against_their_endpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc4a1);
    for _ in 0..300 {
        let kappa = rng.gen_range(4..=12);
        let n = rng.gen_range(2..=4);
        let bunches: Vec<Vec<Size>> = (0..n)
            .map(|_| {
                let mut items = Vec::new();
                let mut vol = 0;
                while rng.gen_bool(0.6) && vol < kappa {
                    let s = rng.gen_range(1..=(kappa - vol).min(5));
                    items.push(s);
                    vol += s;
                }
                items
            })
            .collect();
        let source = Configuration::from_items(bunches).unwrap();
        let mut current = source.clone();
        let mut moves = Vec::new();
        for _ in 0..rng.gen_range(0..12) {
            let options = neighbors(&current, kappa);
            if options.is_empty() {
                break;
            }
            let (mv, next) = options[rng.gen_range(0..options.len())].clone();
            moves.push(mv);
            current = next;
        }
        let inst = Instance::new(kappa, source, current).unwrap();
        assert!(verify_sequence(&inst, &ReconfigSequence::new(moves)).is_ok());
    }
}

#[test]
fn merge_slack_strictly_shrinks_duplicate_slack() {
    // Randomized sweep: wherever two bunches share a slack item of size 2^q,
    // merging strictly reduces the configuration-wide count of that size.
    let mut rng = ChaCha8Rng::seed_from_u64(0x2a55);
    let kappa: Size = 64;
    let mut merges = 0;
    while merges < 300 {
        let bunches: Vec<Vec<Size>> = (0..rng.gen_range(2..=4))
            .map(|_| {
                let mut items = Vec::new();
                let mut vol = 0;
                while rng.gen_bool(0.7) {
                    let s = 1u64 << rng.gen_range(0..=5);
                    if vol + s > kappa {
                        break;
                    }
                    items.push(s);
                    vol += s;
                }
                items
            })
            .collect();
        let config = Configuration::from_items(bunches).unwrap();
        let count_of = |c: &Configuration, q: u32| -> usize {
            c.bunches()
                .iter()
                .filter(|b| slack_items(b, kappa).unwrap().contains(&(1u64 << q)))
                .count()
        };
        let Some((q, b1, b2)) = (0..6u32).find_map(|q| {
            let holders: Vec<usize> = (0..config.len())
                .filter(|&i| slack_items(&config.bunches()[i], kappa).unwrap().contains(&(1u64 << q)))
                .collect();
            (holders.len() >= 2).then(|| (q, holders[0], holders[1]))
        }) else {
            continue;
        };
        let before = count_of(&config, q);
        let (after, moves) = merge_slack(&config, b1, b2, q, kappa).unwrap();
        assert!(count_of(&after, q) < before, "merge failed to shrink 2^{q} slack");
        // Replay the emitted moves.
        let mut replay = config.clone();
        for mv in moves {
            replay = apply_move(&replay, mv, kappa).unwrap();
        }
        assert_eq!(replay, after);
        merges += 1;
    }
}

#[test]
fn bundle_formation_partitions_all_elements() {
    // Instrumented sweep: the merged bundle list partitions All(B), no
    // bundle exceeds bsum 2^p, and at least two hit it exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0b);
    let kappa: Size = 64;
    let mut runs = 0;
    while runs < 300 {
        let mut items = Vec::new();
        let mut vol = 0;
        while rng.gen_bool(0.75) {
            let s = 1u64 << rng.gen_range(0..=5);
            if vol + s > kappa {
                break;
            }
            items.push(s);
            vol += s;
        }
        let bunch = Bunch::new(items).unwrap();
        let p = rng.gen_range(0..6u32);
        let Ok(bundles) = form_all_bundles(&bunch, p, kappa) else {
            continue;
        };
        let target = 1u64 << p;
        // Merging stops at bsum 2^p; only unmerged singletons may exceed it.
        assert!(bundles
            .iter()
            .all(|b| b.elements.len() == 1 || b.bsum() <= target));
        assert!(bundles.iter().filter(|b| b.bsum() == target).count() >= 2);
        // Elements across bundles reassemble All(B): actual items plus the
        // slack decomposition.
        let mut elements: Vec<(Size, bool)> = bundles
            .iter()
            .flat_map(|b| b.elements.iter().map(|e| (e.size, e.actual)))
            .collect();
        elements.sort_unstable();
        let mut expected: Vec<(Size, bool)> = bunch.items().iter().map(|&s| (s, true)).collect();
        expected.extend(slack_items(&bunch, kappa).unwrap().into_iter().map(|s| (s, false)));
        expected.sort_unstable();
        assert_eq!(elements, expected);
        runs += 1;
    }
}

#[test]
fn solved_flows_balance_origins_and_destinations() {
    // Conservation corollary on solver-produced flows: total flow out of
    // origin nodes equals total flow into destination nodes.
    let mut rng = ChaCha8Rng::seed_from_u64(0xf10e);
    let guard = ExplosionGuard::default();
    let mut solved = 0;
    while solved < 40 {
        let kappa = rng.gen_range(3..=5);
        let n = rng.gen_range(2..=3);
        let bunches: Vec<Vec<Size>> = (0..n)
            .map(|_| {
                let mut items = Vec::new();
                let mut vol = 0;
                while rng.gen_bool(0.5) && vol < kappa {
                    let s = rng.gen_range(1..=(kappa - vol).min(3));
                    items.push(s);
                    vol += s;
                }
                items
            })
            .collect();
        let source = Configuration::from_items(bunches).unwrap();
        let mut target = source.clone();
        for _ in 0..rng.gen_range(0..4) {
            let options = neighbors(&target, kappa);
            if options.is_empty() {
                break;
            }
            target = options[rng.gen_range(0..options.len())].1.clone();
        }
        let inst = Instance::new(kappa, source, target).unwrap();
        let model = build_partition_ilp(&inst, 2, &guard).unwrap();
        let Some(solution) = solve_ilp(&model) else {
            continue;
        };
        assert!(is_flow(&model.graph, &solution.flow));
        let out_origins: u64 = (0..model.graph.sub_count())
            .flat_map(|i| model.graph.out_edges(Node::Origin(i)))
            .map(|e| solution.flow[e])
            .sum();
        let into_dests: u64 = (0..model.graph.sub_count())
            .flat_map(|i| model.graph.in_edges(Node::Dest(i)))
            .map(|e| solution.flow[e])
            .sum();
        assert_eq!(out_origins, into_dests);
        solved += 1;
    }
}

#[test]
fn adjacency_witness_round_trip() {
    // For random adjacent pairs, the witnessing move maps one configuration
    // to the other, and non-adjacent pairs yield no witness.
    let mut rng = ChaCha8Rng::seed_from_u64(0xab1e);
    let mut pairs = 0;
    while pairs < 1_000 {
        let kappa = rng.gen_range(4..=10);
        let bunches: Vec<Vec<Size>> = (0..rng.gen_range(2..=4))
            .map(|_| {
                let mut items = Vec::new();
                let mut vol = 0;
                while rng.gen_bool(0.6) && vol < kappa {
                    let s = rng.gen_range(1..=(kappa - vol).min(4));
                    items.push(s);
                    vol += s;
                }
                items
            })
            .collect();
        let config = Configuration::from_items(bunches).unwrap();
        let options = neighbors(&config, kappa);
        if options.is_empty() {
            continue;
        }
        let (_, next) = options[rng.gen_range(0..options.len())].clone();
        let witness = are_adjacent(&config, &next, kappa).expect("neighbor pairs are adjacent");
        assert_eq!(apply_move(&config, witness, kappa).unwrap(), next);
        pairs += 1;
    }
}
