//! Canonical data model: bunches, configurations, moves, and sequence
//! verification.
//!
//! Bunches and configurations are unlabeled multisets, represented in a
//! canonical sorted order so that multiset equality is plain structural
//! equality. Moves address bunches by position in the canonical order of the
//! configuration they apply to; equal bunches are interchangeable and the
//! lowest index is the canonical witness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Item sizes and capacities are 64-bit non-negative integers.
pub type Size = u64;

/// Errors rejected at instance construction or load time.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("item sizes must be at least 1")]
    ZeroItemSize,
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("arithmetic overflow while summing item sizes")]
    Overflow,
    #[error("bunch volume {volume} exceeds capacity {capacity}")]
    IllegalBunch { volume: Size, capacity: Size },
    #[error("source has {source_bunches} bunches but target has {target_bunches}")]
    BunchCountMismatch {
        source_bunches: usize,
        target_bunches: usize,
    },
    #[error("source and target contain different item multisets")]
    UniverseMismatch,
    #[error("malformed JSON: {0}")]
    Json(String),
}

/// Errors raised when applying a single move.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoveError {
    #[error("bunch index {index} out of range (configuration has {len} bunches)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("donor and recipient bunch must differ")]
    SameBunch,
    #[error("item {item} not present in bunch {index}")]
    ItemNotInBunch { item: Size, index: usize },
    #[error("moving item {item} would raise the recipient volume to {volume} > capacity {capacity}")]
    CapacityExceeded {
        item: Size,
        volume: Size,
        capacity: Size,
    },
}

/// A multiset of positive item sizes, stored in non-increasing order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bunch {
    items: Vec<Size>,
}

impl Bunch {
    /// Builds a bunch from arbitrary item order; rejects zero-size items and
    /// sums that overflow `u64`.
    pub fn new(mut items: Vec<Size>) -> Result<Self, InstanceError> {
        if items.contains(&0) {
            return Err(InstanceError::ZeroItemSize);
        }
        let mut total: Size = 0;
        for &x in &items {
            total = total.checked_add(x).ok_or(InstanceError::Overflow)?;
        }
        items.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Bunch { items })
    }

    pub fn empty() -> Self {
        Bunch { items: Vec::new() }
    }

    pub fn items(&self) -> &[Size] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Sum of all items. Safe to compute unchecked: construction verified it.
    pub fn volume(&self) -> Size {
        self.items.iter().sum()
    }

    pub fn max_item(&self) -> Option<Size> {
        self.items.first().copied()
    }

    pub fn count_of(&self, size: Size) -> usize {
        self.items.iter().filter(|&&x| x == size).count()
    }

    pub fn contains(&self, size: Size) -> bool {
        self.count_of(size) > 0
    }

    /// Multiset of items with size at least `s`. Items are sorted
    /// non-increasingly, so this is a prefix.
    pub fn at_least(&self, s: Size) -> &[Size] {
        let cut = self.items.partition_point(|&x| x >= s);
        &self.items[..cut]
    }

    pub(crate) fn insert(&mut self, size: Size) {
        let pos = self.items.partition_point(|&x| x >= size);
        self.items.insert(pos, size);
    }

    /// Removes one occurrence of `size`; false if absent.
    pub(crate) fn remove(&mut self, size: Size) -> bool {
        match self.items.iter().position(|&x| x == size) {
            Some(pos) => {
                self.items.remove(pos);
                true
            }
            None => false,
        }
    }
}

/// A multiset of bunches in canonical order: sorted non-increasingly by
/// lexicographic comparison of the item lists, so equal bunches are adjacent
/// and empty bunches sort last. Empty bunches are retained; the bunch count
/// is preserved by every reconfiguration operation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    bunches: Vec<Bunch>,
}

impl Configuration {
    pub fn new(mut bunches: Vec<Bunch>) -> Self {
        bunches.sort_unstable_by(|a, b| b.cmp(a));
        Configuration { bunches }
    }

    pub fn from_items(raw: Vec<Vec<Size>>) -> Result<Self, InstanceError> {
        let bunches = raw.into_iter().map(Bunch::new).collect::<Result<_, _>>()?;
        Ok(Self::new(bunches))
    }

    pub fn bunches(&self) -> &[Bunch] {
        &self.bunches
    }

    pub fn len(&self) -> usize {
        self.bunches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bunches.is_empty()
    }

    /// The underlying multiset of items, sorted non-increasingly.
    pub fn underlying(&self) -> Vec<Size> {
        let mut all: Vec<Size> = self
            .bunches
            .iter()
            .flat_map(|b| b.items().iter().copied())
            .collect();
        all.sort_unstable_by(|a, b| b.cmp(a));
        all
    }

    pub fn is_legal(&self, capacity: Size) -> bool {
        self.bunches.iter().all(|b| b.volume() <= capacity)
    }

    /// Total slack over all bunches. Caller guarantees legality.
    pub fn total_slack(&self, capacity: Size) -> Size {
        self.bunches.iter().map(|b| capacity - b.volume()).sum()
    }

    pub fn to_items(&self) -> Vec<Vec<Size>> {
        self.bunches.iter().map(|b| b.items().to_vec()).collect()
    }

    /// Lowest canonical index holding a bunch equal to `bunch`.
    pub fn index_of(&self, bunch: &Bunch) -> Option<usize> {
        // Canonical order is descending, so binary search with reversed ordering.
        let pos = self.bunches.partition_point(|b| b > bunch);
        (pos < self.bunches.len() && self.bunches[pos] == *bunch).then_some(pos)
    }
}

/// A single-item move addressed by canonical positions in the configuration
/// it applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Move {
    pub item: Size,
    pub from: usize,
    pub to: usize,
}

/// An ordered list of moves, replayable against a source configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconfigSequence {
    pub moves: Vec<Move>,
}

impl ReconfigSequence {
    pub fn new(moves: Vec<Move>) -> Self {
        ReconfigSequence { moves }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    capacity: Size,
    source: Vec<Vec<Size>>,
    target: Vec<Vec<Size>>,
}

/// A repacking instance: shared capacity plus source and target
/// configurations over the same item universe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    capacity: Size,
    source: Configuration,
    target: Configuration,
}

impl Instance {
    pub fn new(
        capacity: Size,
        source: Configuration,
        target: Configuration,
    ) -> Result<Self, InstanceError> {
        if capacity == 0 {
            return Err(InstanceError::ZeroCapacity);
        }
        if source.len() != target.len() {
            return Err(InstanceError::BunchCountMismatch {
                source_bunches: source.len(),
                target_bunches: target.len(),
            });
        }
        for cfg in [&source, &target] {
            // Total volume must also fit in u64; per-bunch sums were already
            // checked during Bunch construction.
            let mut total: Size = 0;
            for b in cfg.bunches() {
                total = total
                    .checked_add(b.volume())
                    .ok_or(InstanceError::Overflow)?;
                if b.volume() > capacity {
                    return Err(InstanceError::IllegalBunch {
                        volume: b.volume(),
                        capacity,
                    });
                }
            }
        }
        if source.underlying() != target.underlying() {
            return Err(InstanceError::UniverseMismatch);
        }
        Ok(Instance {
            capacity,
            source,
            target,
        })
    }

    pub fn from_raw(
        capacity: Size,
        source: Vec<Vec<Size>>,
        target: Vec<Vec<Size>>,
    ) -> Result<Self, InstanceError> {
        Self::new(
            capacity,
            Configuration::from_items(source)?,
            Configuration::from_items(target)?,
        )
    }

    pub fn capacity(&self) -> Size {
        self.capacity
    }

    pub fn source(&self) -> &Configuration {
        &self.source
    }

    pub fn target(&self) -> &Configuration {
        &self.target
    }

    /// Underlying item multiset shared by source and target, non-increasing.
    pub fn underlying(&self) -> Vec<Size> {
        self.source.underlying()
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let raw: InstanceJson =
            serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
        Self::from_raw(raw.capacity, raw.source, raw.target)
    }

    pub fn to_json(&self) -> String {
        let raw = InstanceJson {
            capacity: self.capacity,
            source: self.source.to_items(),
            target: self.target.to_items(),
        };
        serde_json::to_string_pretty(&raw).expect("instance serialization cannot fail")
    }
}

/// Sum of all items in a bunch.
pub fn volume(bunch: &Bunch) -> Size {
    bunch.volume()
}

/// `capacity - volume`; errors on an overfull bunch.
pub fn slack(bunch: &Bunch, capacity: Size) -> Result<Size, InstanceError> {
    let v = bunch.volume();
    if v > capacity {
        return Err(InstanceError::IllegalBunch {
            volume: v,
            capacity,
        });
    }
    Ok(capacity - v)
}

/// Canonical form of an arbitrary multiset of bunches. Idempotent;
/// permutations of the input map to the same value.
pub fn canonicalize(bunches: Vec<Bunch>) -> Configuration {
    Configuration::new(bunches)
}

/// Applies a single-item move, returning the canonical result.
pub fn apply_move(
    config: &Configuration,
    mv: Move,
    capacity: Size,
) -> Result<Configuration, MoveError> {
    let len = config.len();
    for index in [mv.from, mv.to] {
        if index >= len {
            return Err(MoveError::IndexOutOfRange { index, len });
        }
    }
    if mv.from == mv.to {
        return Err(MoveError::SameBunch);
    }
    if !config.bunches()[mv.from].contains(mv.item) {
        return Err(MoveError::ItemNotInBunch {
            item: mv.item,
            index: mv.from,
        });
    }
    let new_volume = config.bunches()[mv.to]
        .volume()
        .checked_add(mv.item)
        .ok_or(MoveError::CapacityExceeded {
            item: mv.item,
            volume: Size::MAX,
            capacity,
        })?;
    if new_volume > capacity {
        return Err(MoveError::CapacityExceeded {
            item: mv.item,
            volume: new_volume,
            capacity,
        });
    }
    let mut bunches = config.bunches().to_vec();
    bunches[mv.from].remove(mv.item);
    bunches[mv.to].insert(mv.item);
    Ok(Configuration::new(bunches))
}

/// Multiset difference `a \ b` over bunches; both inputs canonical.
fn bunch_difference(a: &Configuration, b: &Configuration) -> Vec<Bunch> {
    let mut out = Vec::new();
    let (xs, ys) = (a.bunches(), b.bunches());
    let (mut i, mut j) = (0, 0);
    while i < xs.len() {
        if j >= ys.len() {
            out.extend_from_slice(&xs[i..]);
            break;
        }
        if xs[i] == ys[j] {
            i += 1;
            j += 1;
        } else if xs[i] > ys[j] {
            out.push(xs[i].clone());
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Single item present in `larger` but not in `smaller`, when `larger` is
/// `smaller` plus exactly one item.
fn single_item_diff(larger: &Bunch, smaller: &Bunch) -> Option<Size> {
    if larger.len() != smaller.len() + 1 {
        return None;
    }
    let mut extra = None;
    let (xs, ys) = (larger.items(), smaller.items());
    let (mut i, mut j) = (0, 0);
    while i < xs.len() {
        if j < ys.len() && xs[i] == ys[j] {
            i += 1;
            j += 1;
        } else if extra.is_none() {
            extra = Some(xs[i]);
            i += 1;
        } else {
            return None;
        }
    }
    (j == ys.len()).then_some(extra).flatten()
}

/// Picks canonical move indices for a donor/recipient pair of bunch contents;
/// when contents coincide, the two lowest indices are used.
fn witness_indices(config: &Configuration, donor: &Bunch, recipient: &Bunch) -> Option<(usize, usize)> {
    let from = config.index_of(donor)?;
    let mut to = config.index_of(recipient)?;
    if to == from {
        to += 1;
        if to >= config.len() || config.bunches()[to] != *recipient {
            return None;
        }
    }
    Some((from, to))
}

/// Returns a witnessing move iff `c2` can be formed from `c1` by moving a
/// single item. Equal configurations are not adjacent: a step must move an
/// item and change the multiset.
pub fn are_adjacent(c1: &Configuration, c2: &Configuration, capacity: Size) -> Option<Move> {
    if c1.len() != c2.len() {
        return None;
    }
    let old = bunch_difference(c1, c2);
    let new = bunch_difference(c2, c1);
    if old.len() != 2 || new.len() != 2 {
        return None;
    }
    for (d, r) in [(0, 1), (1, 0)] {
        let (donor, recipient) = (&old[d], &old[r]);
        for (da, ra) in [(0, 1), (1, 0)] {
            let (donor_after, recip_after) = (&new[da], &new[ra]);
            let Some(item) = single_item_diff(donor, donor_after) else {
                continue;
            };
            if single_item_diff(recip_after, recipient) != Some(item) {
                continue;
            }
            if recip_after.volume() > capacity {
                continue;
            }
            if let Some((from, to)) = witness_indices(c1, donor, recipient) {
                return Some(Move { item, from, to });
            }
        }
    }
    None
}

/// Outcome of replaying a move sequence against an instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VerifyReport {
    Ok { steps: usize },
    FailIllegal { step: usize, reason: MoveError },
    FailNotAdjacent { step: usize },
    FailTargetMismatch,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, VerifyReport::Ok { .. })
    }
}

/// Replays `seq` from the instance source and reports the first failure:
/// an illegal move, a step that does not change the configuration (equal
/// multisets are not adjacent), or a final configuration differing from the
/// target.
pub fn verify_sequence(instance: &Instance, seq: &ReconfigSequence) -> VerifyReport {
    let mut current = instance.source().clone();
    for (step, &mv) in seq.moves.iter().enumerate() {
        let next = match apply_move(&current, mv, instance.capacity()) {
            Ok(next) => next,
            Err(reason) => return VerifyReport::FailIllegal { step, reason },
        };
        if next == current {
            return VerifyReport::FailNotAdjacent { step };
        }
        current = next;
    }
    if current != *instance.target() {
        return VerifyReport::FailTargetMismatch;
    }
    VerifyReport::Ok {
        steps: seq.moves.len(),
    }
}

/// Mutable list of bunches with stable slot identities, emitting canonical
/// moves as items are transferred. Solvers track bunches by slot while the
/// logged moves reference canonical positions of the evolving configuration.
#[derive(Clone, Debug)]
pub(crate) struct Workspace {
    bunches: Vec<Bunch>,
    capacity: Size,
    log: Vec<Move>,
}

impl Workspace {
    pub(crate) fn new(config: &Configuration, capacity: Size) -> Self {
        Workspace {
            bunches: config.bunches().to_vec(),
            capacity,
            log: Vec::new(),
        }
    }

    pub(crate) fn from_bunches(bunches: Vec<Bunch>, capacity: Size) -> Self {
        Workspace {
            bunches,
            capacity,
            log: Vec::new(),
        }
    }

    pub(crate) fn capacity(&self) -> Size {
        self.capacity
    }

    pub(crate) fn bunch(&self, slot: usize) -> &Bunch {
        &self.bunches[slot]
    }

    pub(crate) fn bunches(&self) -> &[Bunch] {
        &self.bunches
    }

    pub(crate) fn len(&self) -> usize {
        self.bunches.len()
    }

    pub(crate) fn slack(&self, slot: usize) -> Size {
        self.capacity - self.bunches[slot].volume()
    }

    pub(crate) fn current(&self) -> Configuration {
        Configuration::new(self.bunches.clone())
    }

    pub(crate) fn log(&self) -> &[Move] {
        &self.log
    }

    pub(crate) fn into_sequence(self) -> ReconfigSequence {
        ReconfigSequence::new(self.log)
    }

    /// Moves one item between slots and logs the canonical move. A transfer
    /// whose donor minus the item equals the recipient leaves the multiset
    /// unchanged; such slot moves are applied but not logged, since equal
    /// configurations are not adjacent.
    pub(crate) fn transfer(&mut self, item: Size, from_slot: usize, to_slot: usize) {
        assert_ne!(from_slot, to_slot, "transfer requires two distinct slots");
        assert!(
            self.bunches[from_slot].contains(item),
            "transfer of item {item} absent from slot {from_slot}"
        );
        assert!(
            self.bunches[to_slot].volume() + item <= self.capacity,
            "transfer of item {item} overfills slot {to_slot}"
        );
        let mut donor_after = self.bunches[from_slot].clone();
        donor_after.remove(item);
        if donor_after == self.bunches[to_slot] {
            self.bunches[from_slot] = donor_after;
            self.bunches[to_slot].insert(item);
            return;
        }
        let before = self.current();
        let (from, to) = witness_indices(
            &before,
            &self.bunches[from_slot],
            &self.bunches[to_slot],
        )
        .expect("workspace bunches are present in their own canonical form");
        self.log.push(Move { item, from, to });
        self.bunches[from_slot] = donor_after;
        self.bunches[to_slot].insert(item);
        debug_assert_eq!(
            apply_move(&before, *self.log.last().unwrap(), self.capacity).as_ref(),
            Ok(&self.current()),
        );
    }
}

/// Inverse of `mv` applied at `before`: the returned move is addressed in the
/// canonical order of the configuration `mv` produces, and replaying it
/// restores `before`. Canonical indices are position-dependent, so the
/// inverse is recomputed rather than obtained by swapping fields.
pub fn inverse_move(
    before: &Configuration,
    mv: Move,
    capacity: Size,
) -> Result<(Configuration, Move), MoveError> {
    let after = apply_move(before, mv, capacity)?;
    let mut donor_after = before.bunches()[mv.from].clone();
    donor_after.remove(mv.item);
    let mut recip_after = before.bunches()[mv.to].clone();
    recip_after.insert(mv.item);
    let (from, to) = witness_indices(&after, &recip_after, &donor_after)
        .expect("both changed bunches exist in the successor configuration");
    Ok((
        after,
        Move {
            item: mv.item,
            from,
            to,
        },
    ))
}
