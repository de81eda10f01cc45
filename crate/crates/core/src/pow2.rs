//! Feasibility characterization and solver for instances where every item
//! size and the capacity are powers of 2.
//!
//! An item size `s` is *settled* in the current configuration if a bijection
//! matches every bunch's multiset of items of size at least `s` with a bunch
//! of the target. The largest unsettled size is the size of the largest item
//! that must be moved; reconfiguration is possible iff the total slack across
//! all bunches is at least that size. The solver settles sizes in
//! non-increasing order; settled items never move again.
//!
//! Slack is tracked as *slack items*, the maximal powers of 2 summing to a
//! bunch's slack. Merging two equal slack items frees larger contiguous
//! space, which is how the solver accumulates room to route an oversized
//! item through a temporary host bunch.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Bunch, Configuration, Instance, Move, ReconfigSequence, Size, Workspace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Pow2Error {
    #[error("instance item sizes and capacity must all be powers of 2")]
    NotPow2Instance,
    #[error("precondition violated: {0}")]
    PreconditionViolated(&'static str),
    #[error("infeasible: total slack {total_slack} is below the largest unsettled size {largest_unsettled}")]
    InfeasibleInstance {
        largest_unsettled: Size,
        total_slack: Size,
    },
}

fn is_pow2(x: Size) -> bool {
    x != 0 && x & (x - 1) == 0
}

pub fn is_pow2_instance(instance: &Instance) -> bool {
    is_pow2(instance.capacity()) && instance.underlying().iter().all(|&x| is_pow2(x))
}

/// Maximal powers of 2 summing to the bunch's slack, in decreasing order:
/// the binary decomposition, so at most one slack item per size.
pub fn slack_items(bunch: &Bunch, kappa: Size) -> Result<Vec<Size>, Pow2Error> {
    if !is_pow2(kappa) {
        return Err(Pow2Error::PreconditionViolated("capacity must be a power of 2"));
    }
    let volume = bunch.volume();
    if volume > kappa {
        return Err(Pow2Error::PreconditionViolated("bunch exceeds capacity"));
    }
    let mut slack = kappa - volume;
    let mut out = Vec::new();
    while slack > 0 {
        let high = Size::MAX >> slack.leading_zeros();
        let item = high ^ (high >> 1);
        out.push(item);
        slack -= item;
    }
    Ok(out)
}

/// One element of `All(B)`: an actual item or a slack item, always a power
/// of 2 in this regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Element {
    pub size: Size,
    pub actual: bool,
}

/// A sub-multiset of a bunch's actual and slack items.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bundle {
    pub elements: Vec<Element>,
}

impl Bundle {
    pub fn bsum(&self) -> Size {
        self.elements.iter().map(|e| e.size).sum()
    }

    pub fn has_actual(&self) -> bool {
        self.elements.iter().any(|e| e.actual)
    }

    /// Actual item sizes in non-increasing order.
    pub fn actual_items(&self) -> Vec<Size> {
        let mut items: Vec<Size> = self
            .elements
            .iter()
            .filter(|e| e.actual)
            .map(|e| e.size)
            .collect();
        items.sort_unstable_by(|a, b| b.cmp(a));
        items
    }
}

/// Actual and slack items of a bunch, sorted by size descending with slack
/// items first within equal sizes. This fixed order makes bundle formation
/// deterministic.
fn all_elements(bunch: &Bunch, kappa: Size) -> Result<Vec<Element>, Pow2Error> {
    let mut out: Vec<Element> = bunch
        .items()
        .iter()
        .map(|&size| Element { size, actual: true })
        .collect();
    out.extend(
        slack_items(bunch, kappa)?
            .into_iter()
            .map(|size| Element { size, actual: false }),
    );
    out.sort_by(|a, b| b.size.cmp(&a.size).then(a.actual.cmp(&b.actual)));
    Ok(out)
}

/// Runs the bundle-merging loop to completion and returns every bundle:
/// starting from singleton bundles over `All(B)`, the two earliest bundles
/// of equal bsum `2^i` are merged (for `i` ascending below `p`) until no
/// such pair remains.
pub fn form_all_bundles(bunch: &Bunch, p: u32, kappa: Size) -> Result<Vec<Bundle>, Pow2Error> {
    if !is_pow2(kappa) || p >= kappa.trailing_zeros() {
        return Err(Pow2Error::PreconditionViolated("p must satisfy 2^p < capacity"));
    }
    let elements = all_elements(bunch, kappa)?;
    let threshold = 1u64 << p;
    if !elements.iter().any(|e| e.size <= threshold) {
        return Err(Pow2Error::PreconditionViolated(
            "bunch has no actual or slack item of size at most 2^p",
        ));
    }
    let mut bundles: Vec<Bundle> = elements
        .into_iter()
        .map(|e| Bundle { elements: vec![e] })
        .collect();
    for i in 0..p {
        let bsum = 1u64 << i;
        loop {
            let mut matching = bundles
                .iter()
                .enumerate()
                .filter(|(_, b)| b.bsum() == bsum)
                .map(|(idx, _)| idx);
            let (Some(first), Some(second)) = (matching.next(), matching.next()) else {
                break;
            };
            let b2 = bundles.remove(second);
            let mut b1 = bundles.remove(first);
            b1.elements.extend(b2.elements);
            bundles.push(b1);
        }
    }
    Ok(bundles)
}

/// Returns the two earliest-created disjoint bundles of bsum exactly `2^p`;
/// at least one of them contains an actual item.
pub fn form_bundles(bunch: &Bunch, p: u32, kappa: Size) -> Result<(Bundle, Bundle), Pow2Error> {
    let all = form_all_bundles(bunch, p, kappa)?;
    let target = 1u64 << p;
    let mut picked = all.into_iter().filter(|b| b.bsum() == target);
    let (Some(first), Some(second)) = (picked.next(), picked.next()) else {
        unreachable!("a power-of-2 capacity always leaves two bundles of bsum 2^p");
    };
    assert!(
        first.has_actual() || second.has_actual(),
        "at least one returned bundle must contain an actual item"
    );
    Ok((first, second))
}

fn slack_has_bit(slack: Size, q: u32) -> bool {
    slack & (1u64 << q) != 0
}

/// Merges the size-`2^q` slack items of two bunches by moving the actual
/// items of one bundle from `b1` to `b2`. Afterwards the total count of
/// size-`2^q` slack items across the configuration has strictly decreased.
/// Indices address the canonical order of `config`; the returned moves
/// replay against it.
pub fn merge_slack(
    config: &Configuration,
    b1: usize,
    b2: usize,
    q: u32,
    kappa: Size,
) -> Result<(Configuration, Vec<Move>), Pow2Error> {
    if b1 == b2 || b1 >= config.len() || b2 >= config.len() {
        return Err(Pow2Error::PreconditionViolated("two distinct bunch indices required"));
    }
    let mut ws = Workspace::new(config, kappa);
    merge_slack_slots(&mut ws, b1, b2, q)?;
    let moves = ws.log().to_vec();
    Ok((ws.current(), moves))
}

fn merge_slack_slots(ws: &mut Workspace, b1: usize, b2: usize, q: u32) -> Result<(), Pow2Error> {
    for slot in [b1, b2] {
        if !slack_has_bit(ws.slack(slot), q) {
            return Err(Pow2Error::PreconditionViolated(
                "both bunches need a slack item of size 2^q",
            ));
        }
    }
    let dup_count_before = count_slack_bit(ws, q);
    let (first, second) = form_bundles(ws.bunch(b1), q, ws.capacity())?;
    let moved = if first.has_actual() { first } else { second };
    for item in moved.actual_items() {
        ws.transfer(item, b1, b2);
    }
    debug_assert!(count_slack_bit(ws, q) < dup_count_before);
    Ok(())
}

fn count_slack_bit(ws: &Workspace, q: u32) -> usize {
    (0..ws.len()).filter(|&s| slack_has_bit(ws.slack(s), q)).count()
}

/// A per-size matching between current and target bunches witnessing that a
/// size is settled; `pairs` are (current index, target index).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SettlingBijection {
    pub pairs: Vec<(usize, usize)>,
}

/// Core of Check-Settled over bunch slices: for each item size `u >= s` in
/// increasing order, unmatched bunches containing an item of size `u` are
/// grouped by their multiset of items of size at least `u`; the groups must
/// pair up exactly between current and target.
fn settled_bijection(s: Size, current: &[Bunch], target: &[Bunch]) -> Option<Vec<(usize, usize)>> {
    let mut sizes: Vec<Size> = current
        .iter()
        .chain(target.iter())
        .flat_map(|b| b.items().iter().copied())
        .filter(|&u| u >= s)
        .collect();
    sizes.sort_unstable();
    sizes.dedup();

    let mut used_current = vec![false; current.len()];
    let mut used_target = vec![false; target.len()];
    let mut pairs = Vec::new();
    for &u in &sizes {
        let mut dom: BTreeMap<&[Size], Vec<usize>> = BTreeMap::new();
        for (i, b) in current.iter().enumerate() {
            if !used_current[i] && b.contains(u) {
                dom.entry(b.at_least(u)).or_default().push(i);
            }
        }
        let mut rng: BTreeMap<&[Size], Vec<usize>> = BTreeMap::new();
        for (j, b) in target.iter().enumerate() {
            if !used_target[j] && b.contains(u) {
                rng.entry(b.at_least(u)).or_default().push(j);
            }
        }
        if dom.len() != rng.len() {
            return None;
        }
        for ((key_d, is), (key_r, js)) in dom.iter().zip(rng.iter()) {
            if key_d != key_r || is.len() != js.len() {
                return None;
            }
            for (&i, &j) in is.iter().zip(js.iter()) {
                used_current[i] = true;
                used_target[j] = true;
                pairs.push((i, j));
            }
        }
    }
    Some(pairs)
}

/// Decides whether item size `s` is settled in `current` with respect to
/// `target`, returning a settling bijection when it is.
pub fn check_settled(
    s: Size,
    current: &Configuration,
    target: &Configuration,
) -> Option<SettlingBijection> {
    settled_bijection(s, current.bunches(), target.bunches())
        .map(|pairs| SettlingBijection { pairs })
}

fn largest_unsettled_slices(current: &[Bunch], target: &[Bunch]) -> Option<Size> {
    let mut sizes: Vec<Size> = current
        .iter()
        .flat_map(|b| b.items().iter().copied())
        .collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.dedup();
    sizes
        .into_iter()
        .find(|&s| settled_bijection(s, current, target).is_none())
}

/// The size of the largest item that must be moved: sizes are scanned in
/// decreasing order and the first unsettled one is returned; `None` means
/// the configurations are equal as multisets.
pub fn largest_unsettled(current: &Configuration, target: &Configuration) -> Option<Size> {
    largest_unsettled_slices(current.bunches(), target.bunches())
}

/// Feasibility verdict: possible iff the total slack across all bunches is
/// at least the largest unsettled size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pow2Feasibility {
    Feasible {
        largest_unsettled: Option<Size>,
        total_slack: Size,
    },
    Infeasible {
        largest_unsettled: Size,
        total_slack: Size,
    },
}

impl Pow2Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Pow2Feasibility::Feasible { .. })
    }
}

pub fn pow2_feasible(instance: &Instance) -> Result<Pow2Feasibility, Pow2Error> {
    if !is_pow2_instance(instance) {
        return Err(Pow2Error::NotPow2Instance);
    }
    let total_slack = instance.source().total_slack(instance.capacity());
    match largest_unsettled(instance.source(), instance.target()) {
        None => Ok(Pow2Feasibility::Feasible {
            largest_unsettled: None,
            total_slack,
        }),
        Some(ell) if total_slack >= ell => Ok(Pow2Feasibility::Feasible {
            largest_unsettled: Some(ell),
            total_slack,
        }),
        Some(ell) => Ok(Pow2Feasibility::Infeasible {
            largest_unsettled: ell,
            total_slack,
        }),
    }
}

/// Slots ordered as their bunches appear in the canonical configuration,
/// ties broken by slot index.
fn canonical_order(ws: &Workspace, slots: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = slots.into_iter().collect();
    v.sort_by(|&a, &b| ws.bunch(b).cmp(ws.bunch(a)).then(a.cmp(&b)));
    v
}

/// Stage-scoped transfer of one item of size `u` from a surplus slot to a
/// deficit slot, compressing slack first when the deficit bunch lacks room.
fn transfer_one(ws: &mut Workspace, u: Size, b_s: usize, b_d: usize) {
    let log_start = ws.log().len();
    let count_before: Vec<usize> = (0..ws.len()).map(|s| ws.bunch(s).count_of(u)).collect();

    if ws.slack(b_d) >= u {
        ws.transfer(u, b_s, b_d);
    } else {
        let x = u.trailing_zeros();
        // Compression: merge any two equal slack items smaller than u.
        while let Some((q, b1, b2)) = find_duplicate_slack(ws, x) {
            merge_slack_slots(ws, b1, b2, q).expect("duplicate slack bits were just found");
        }
        if ws.slack(b_d) >= u {
            ws.transfer(u, b_s, b_d);
        } else {
            assert!(
                ws.bunch(b_d).items().iter().any(|&it| it < u),
                "a deficit bunch without smaller items must already have slack >= u"
            );
            let b_temp = canonical_order(ws, 0..ws.len())
                .into_iter()
                .filter(|&s| ws.slack(s) >= u)
                .min_by_key(|&s| usize::from(s == b_s))
                .expect("compression guarantees a bunch with slack at least u");
            assert_ne!(b_temp, b_d);
            if b_temp != b_s {
                ws.transfer(u, b_s, b_temp);
            }
            let (first, second) =
                form_bundles(ws.bunch(b_d), x - 1, ws.capacity()).expect("deficit bunch has an item below u");
            for bundle in [first, second] {
                for item in bundle.actual_items() {
                    assert!(item < u);
                    ws.transfer(item, b_d, b_s);
                }
            }
            ws.transfer(u, b_temp, b_d);
        }
    }

    // Net effect of one transfer: exactly one item of size u moved from the
    // surplus bunch to the deficit bunch, every other count unchanged, and
    // the final move put an item of size u into the deficit bunch.
    for (slot, &before) in count_before.iter().enumerate() {
        let expected = if slot == b_s {
            before - 1
        } else if slot == b_d {
            before + 1
        } else {
            before
        };
        assert_eq!(ws.bunch(slot).count_of(u), expected, "transfer moved the wrong items");
    }
    // Logged moves: only the extraction from the surplus bunch and the
    // final insertion into the deficit bunch may carry size u; compression
    // and bundle moves are strictly smaller.
    let transfer_log = &ws.log()[log_start..];
    assert!(transfer_log.iter().all(|m| m.item <= u));
    assert!(
        transfer_log.iter().filter(|m| m.item == u).count() <= 2,
        "a transfer moves the stage size at most twice"
    );
}

/// First duplicated slack-item size below `2^x`, with the two lowest bunches
/// (in canonical order) carrying it.
fn find_duplicate_slack(ws: &Workspace, x: u32) -> Option<(u32, usize, usize)> {
    for q in 0..x {
        let holders: Vec<usize> = canonical_order(ws, 0..ws.len())
            .into_iter()
            .filter(|&s| slack_has_bit(ws.slack(s), q))
            .collect();
        if holders.len() >= 2 {
            return Some((q, holders[0], holders[1]));
        }
    }
    None
}

/// Full reconfiguration for feasible powers-of-2 instances: one stage per
/// distinct item size in decreasing order. Each stage maps bunches onto
/// target bunches (extending a settling bijection for the previous size) and
/// then moves items of the stage size from surplus to deficit bunches until
/// the size is settled.
pub fn settle_items(instance: &Instance) -> Result<ReconfigSequence, Pow2Error> {
    match pow2_feasible(instance)? {
        Pow2Feasibility::Infeasible {
            largest_unsettled,
            total_slack,
        } => {
            return Err(Pow2Error::InfeasibleInstance {
                largest_unsettled,
                total_slack,
            })
        }
        Pow2Feasibility::Feasible { .. } => {}
    }

    let target = instance.target();
    let mut ws = Workspace::new(instance.source(), instance.capacity());
    let mut sizes = instance.underlying();
    sizes.dedup();

    for (i, &u_i) in sizes.iter().enumerate() {
        // Mapping step.
        match largest_unsettled_slices(ws.bunches(), target.bunches()) {
            None => continue,
            Some(ell) if ell < u_i => continue,
            Some(ell) => assert_eq!(ell, u_i, "larger sizes must already be settled"),
        }
        let mut phi: Vec<(usize, usize)> = if i == 0 {
            Vec::new()
        } else {
            settled_bijection(sizes[i - 1], ws.bunches(), target.bunches())
                .expect("previous stage size is settled")
        };
        let in_dom: Vec<bool> = {
            let mut v = vec![false; ws.len()];
            phi.iter().for_each(|&(a, _)| v[a] = true);
            v
        };
        let in_rng: Vec<bool> = {
            let mut v = vec![false; target.len()];
            phi.iter().for_each(|&(_, b)| v[b] = true);
            v
        };
        let mut dom_ext: Vec<usize> = (0..ws.len())
            .filter(|&s| !in_dom[s] && ws.bunch(s).max_item() == Some(u_i))
            .collect();
        let mut rng_ext: Vec<usize> = (0..target.len())
            .filter(|&t| !in_rng[t] && target.bunches()[t].max_item() == Some(u_i))
            .collect();
        // Balance the two sides with bunches whose items are all smaller.
        if dom_ext.len() < rng_ext.len() {
            let need = rng_ext.len() - dom_ext.len();
            let extras: Vec<usize> = canonical_order(&ws, 0..ws.len())
                .into_iter()
                .filter(|&s| {
                    !in_dom[s]
                        && !dom_ext.contains(&s)
                        && ws.bunch(s).max_item().is_none_or(|m| m < u_i)
                })
                .take(need)
                .collect();
            assert_eq!(extras.len(), need, "not enough small bunches to balance the mapping");
            dom_ext.extend(extras);
        } else if dom_ext.len() > rng_ext.len() {
            let need = dom_ext.len() - rng_ext.len();
            let mut extras: Vec<usize> = (0..target.len())
                .filter(|&t| {
                    !in_rng[t]
                        && !rng_ext.contains(&t)
                        && target.bunches()[t].max_item().is_none_or(|m| m < u_i)
                })
                .collect();
            extras.sort_by(|&a, &b| {
                target.bunches()[b]
                    .cmp(&target.bunches()[a])
                    .then(a.cmp(&b))
            });
            extras.truncate(need);
            assert_eq!(extras.len(), need, "not enough small target bunches to balance");
            rng_ext.extend(extras);
        }
        dom_ext.sort_by(|&a, &b| ws.bunch(b).cmp(ws.bunch(a)).then(a.cmp(&b)));
        rng_ext.sort_by(|&a, &b| {
            target.bunches()[b]
                .cmp(&target.bunches()[a])
                .then(a.cmp(&b))
        });
        assert_eq!(dom_ext.len(), rng_ext.len());
        phi.extend(dom_ext.into_iter().zip(rng_ext));

        // Action step.
        loop {
            let surplus: Vec<usize> = canonical_order(&ws, phi.iter().map(|&(a, _)| a))
                .into_iter()
                .filter(|&a| {
                    let b = phi.iter().find(|&&(x, _)| x == a).unwrap().1;
                    ws.bunch(a).count_of(u_i) > target.bunches()[b].count_of(u_i)
                })
                .collect();
            if surplus.is_empty() {
                break;
            }
            let deficit: Vec<usize> = canonical_order(&ws, phi.iter().map(|&(a, _)| a))
                .into_iter()
                .filter(|&a| {
                    let b = phi.iter().find(|&&(x, _)| x == a).unwrap().1;
                    ws.bunch(a).count_of(u_i) < target.bunches()[b].count_of(u_i)
                })
                .collect();
            assert!(!deficit.is_empty(), "surplus without deficit is impossible");
            transfer_one(&mut ws, u_i, surplus[0], deficit[0]);
        }
        debug_assert!(
            settled_bijection(u_i, ws.bunches(), target.bunches()).is_some(),
            "stage must settle its size"
        );
    }

    assert_eq!(ws.current(), *target, "all sizes settled means the target is reached");
    Ok(ws.into_sequence())
}
