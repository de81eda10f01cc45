//! First-fit-decreasing solver for instances whose items are small relative
//! to the capacity.
//!
//! When every item has size at most `kappa / alpha` for an integer `alpha > 1`
//! and the source has enough average slack, both source and target can be
//! reconfigured to the first-fit-decreasing canonical configuration, and
//! hence to each other. The reconfiguration runs in stages: a compression
//! phase packs general bunches into each other until at least one empties,
//! and an FFD-retrieval phase converts empty bunches into FFD bunches and
//! fills them in first-fit-decreasing order. Items placed in FFD bunches
//! never move again.

use thiserror::Error;

use crate::model::{
    inverse_move, Bunch, Configuration, Instance, Move, ReconfigSequence, Size, Workspace,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmallItemsError {
    #[error("preconditions violated: {0:?}")]
    PreconditionViolated(PreconditionCheck),
    #[error("first-fit-decreasing placement needs more than {0} bunches")]
    DoesNotFit(usize),
}

/// Size-bound and average-slack parameters of the small-items regime; the
/// constructor enforces both preconditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SmallItemsParams {
    pub alpha: Size,
    pub kappa: Size,
}

impl SmallItemsParams {
    pub fn for_instance(instance: &Instance, alpha: Size) -> Result<Self, SmallItemsError> {
        match check_preconditions(instance, alpha) {
            PreconditionCheck::Ok => Ok(SmallItemsParams {
                alpha,
                kappa: instance.capacity(),
            }),
            violated => Err(SmallItemsError::PreconditionViolated(violated)),
        }
    }
}

/// Outcome of testing the small-items preconditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreconditionCheck {
    Ok,
    ViolatedSize,
    ViolatedSlack,
}

/// Checks that every item fits in `kappa / alpha` and that the source's
/// average slack is at least `kappa/(alpha+1) + 3*alpha*kappa/((alpha+1)*n)`.
/// The target bound follows because source and target share their universe.
/// Comparisons are exact over integers.
pub fn check_preconditions(instance: &Instance, alpha: Size) -> PreconditionCheck {
    assert!(alpha >= 2, "the small-items regime requires alpha >= 2");
    let kappa = instance.capacity();
    let size_ok = instance
        .underlying()
        .iter()
        .all(|&item| item.checked_mul(alpha).is_some_and(|scaled| scaled <= kappa));
    if !size_ok {
        return PreconditionCheck::ViolatedSize;
    }
    // avg slack >= kappa/(alpha+1) + 3*alpha*kappa/((alpha+1)*n), scaled by
    // (alpha+1)*n on both sides: (alpha+1)*total_slack >= kappa*n + 3*alpha*kappa.
    let n = instance.source().len() as Size;
    let total_slack = instance.source().total_slack(kappa);
    let lhs = (alpha + 1).checked_mul(total_slack);
    let rhs = kappa
        .checked_mul(n)
        .and_then(|x| x.checked_add(3 * alpha * kappa));
    match (lhs, rhs) {
        (Some(l), Some(r)) if l >= r => PreconditionCheck::Ok,
        _ => PreconditionCheck::ViolatedSlack,
    }
}

/// Packs `universe` by first-fit-decreasing into at most `n_bunches` bunches
/// and pads with empty bunches. Items are placed in non-increasing order,
/// each into the first bunch with enough slack.
pub fn build_ffd(
    universe: &[Size],
    kappa: Size,
    n_bunches: usize,
) -> Result<Configuration, SmallItemsError> {
    let mut sorted = universe.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut bins: Vec<Vec<Size>> = Vec::new();
    for &item in &sorted {
        match bins
            .iter_mut()
            .find(|bin| bin.iter().sum::<Size>() + item <= kappa)
        {
            Some(bin) => bin.push(item),
            None => {
                if bins.len() == n_bunches {
                    return Err(SmallItemsError::DoesNotFit(n_bunches));
                }
                bins.push(vec![item]);
            }
        }
    }
    while bins.len() < n_bunches {
        bins.push(Vec::new());
    }
    Ok(Configuration::new(
        bins.into_iter()
            .map(|items| Bunch::new(items).expect("items come from a valid configuration"))
            .collect(),
    ))
}

/// Working state of one reconfiguration run: stable bunch slots partitioned
/// into FFD slots (whose contents never move again) and general slots.
#[derive(Clone, Debug)]
pub struct StageState {
    ws: Workspace,
    /// FFD slots in declaration order; this order is the bin order of the
    /// equivalent global FFD run.
    ffd: Vec<usize>,
    general: Vec<usize>,
}

impl StageState {
    pub fn start(config: &Configuration, kappa: Size) -> Self {
        let ws = Workspace::new(config, kappa);
        let general = (0..ws.len()).collect();
        StageState {
            ws,
            ffd: Vec::new(),
            general,
        }
    }

    pub fn current(&self) -> Configuration {
        self.ws.current()
    }

    pub fn log(&self) -> &[Move] {
        self.ws.log()
    }

    pub fn ffd_slots(&self) -> &[usize] {
        &self.ffd
    }

    pub fn general_slots(&self) -> &[usize] {
        &self.general
    }

    fn kappa(&self) -> Size {
        self.ws.capacity()
    }

    /// General slots ordered by current canonical bunch order (content
    /// descending, slot index as tiebreak).
    fn general_in_canonical_order(&self) -> Vec<usize> {
        let mut order = self.general.clone();
        order.sort_by(|&a, &b| self.ws.bunch(b).cmp(self.ws.bunch(a)).then(a.cmp(&b)));
        order
    }

    fn count_non_empty_high_slack(&self, alpha: Size) -> usize {
        self.general
            .iter()
            .filter(|&&slot| {
                let b = self.ws.bunch(slot);
                // slack > kappa/(alpha+1), exactly: slack*(alpha+1) > kappa
                !b.is_empty() && (self.kappa() - b.volume()) * (alpha + 1) > self.kappa()
            })
            .count()
    }

    fn empty_general_slots(&self) -> Vec<usize> {
        let mut empties: Vec<usize> = self
            .general
            .iter()
            .copied()
            .filter(|&slot| self.ws.bunch(slot).is_empty())
            .collect();
        empties.sort_unstable();
        empties
    }
}

/// Compression phase of one stage: general bunches are processed in current
/// canonical order, items within a bunch in non-increasing size order, and
/// each item moves to the first previously processed bunch with enough slack.
/// Afterwards at most two non-empty general bunches can have slack above
/// `kappa/(alpha+1)`; `alpha` is used only for that assertion.
pub fn compression_phase(mut state: StageState, alpha: Size) -> StageState {
    let order = state.general_in_canonical_order();
    for (pos, &slot) in order.iter().enumerate() {
        let snapshot: Vec<Size> = state.ws.bunch(slot).items().to_vec();
        for item in snapshot {
            let dest = order[..pos]
                .iter()
                .copied()
                .find(|&earlier| state.ws.slack(earlier) >= item);
            if let Some(earlier) = dest {
                state.ws.transfer(item, slot, earlier);
            }
        }
    }
    assert!(
        state.count_non_empty_high_slack(alpha) <= 2,
        "compression left more than two non-empty general bunches with high slack"
    );
    state
}

/// FFD-retrieval phase of one stage: empty general bunches become FFD
/// bunches, then items from general bunches are placed in non-increasing
/// order into the first FFD bunch with room, until none remain or the
/// largest remaining item fits nowhere.
pub fn ffd_retrieval_phase(mut state: StageState) -> StageState {
    let newly_ffd = state.empty_general_slots();
    state.general.retain(|slot| !newly_ffd.contains(slot));
    state.ffd.extend(newly_ffd);

    while let Some((item, donor)) = state
        .general
        .iter()
        .flat_map(|&slot| state.ws.bunch(slot).max_item().map(|item| (item, slot)))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
    {
        let Some(dest) = state
            .ffd
            .iter()
            .copied()
            .find(|&slot| state.ws.slack(slot) >= item)
        else {
            break;
        };
        state.ws.transfer(item, donor, dest);
    }
    state
}

/// Runs stages until every bunch is an FFD bunch. With `assert_empty_bunch`
/// set, every compression phase must leave an empty general bunch, which
/// holds whenever the average-slack precondition does.
fn reconfigure_to_ffd(
    config: &Configuration,
    kappa: Size,
    alpha: Size,
    assert_empty_bunch: bool,
) -> StageState {
    let mut state = StageState::start(config, kappa);
    // Items assigned to an FFD bunch never move again; later stages may
    // still add to an FFD bunch with leftover room, so the frozen record is
    // a sub-multiset of the current contents, refreshed every stage.
    let mut frozen: Vec<(usize, Bunch)> = Vec::new();
    while !state.general.is_empty() {
        let stages_before = state.ffd.len();
        state = compression_phase(state, alpha);
        if assert_empty_bunch {
            assert!(
                !state.empty_general_slots().is_empty(),
                "compression phase ended with no empty general bunch"
            );
        }
        state = ffd_retrieval_phase(state);
        for (slot, contents) in &frozen {
            let current = state.ws.bunch(*slot);
            assert!(
                contents
                    .items()
                    .iter()
                    .all(|&it| current.count_of(it) >= contents.count_of(it)),
                "an item left an FFD bunch after assignment"
            );
        }
        for &slot in &state.ffd[stages_before..] {
            frozen.push((slot, state.ws.bunch(slot).clone()));
        }
        for entry in &mut frozen {
            entry.1 = state.ws.bunch(entry.0).clone();
        }
        assert!(
            state.ffd.len() > stages_before,
            "stage converted no bunch to FFD"
        );
    }
    state
}

/// Reconfigures source and target to the shared FFD configuration and
/// concatenates the source-side sequence with the reversed target-side
/// sequence. Requires `check_preconditions` to pass.
pub fn solve_small_items(
    instance: &Instance,
    alpha: Size,
) -> Result<ReconfigSequence, SmallItemsError> {
    let params = SmallItemsParams::for_instance(instance, alpha)?;
    if instance.source() == instance.target() {
        return Ok(ReconfigSequence::default());
    }
    let kappa = params.kappa;
    let ffd = build_ffd(&instance.underlying(), kappa, instance.source().len())?;

    let forward = reconfigure_to_ffd(instance.source(), kappa, alpha, true);
    assert_eq!(forward.current(), ffd, "source did not reach the FFD configuration");

    let backward = reconfigure_to_ffd(instance.target(), kappa, alpha, true);
    assert_eq!(backward.current(), ffd, "target did not reach the FFD configuration");

    // Invert the target-side moves by replaying them; canonical indices are
    // position-dependent, so each inverse is computed against the
    // configuration it applies to.
    let mut inverses = Vec::with_capacity(backward.log().len());
    let mut replay = instance.target().clone();
    for &mv in backward.log() {
        let (after, inv) = inverse_move(&replay, mv, kappa).expect("logged moves are legal");
        inverses.push(inv);
        replay = after;
    }
    inverses.reverse();

    let mut moves = forward.log().to_vec();
    moves.extend(inverses);
    Ok(ReconfigSequence::new(moves))
}

/// Largest integer `alpha >= 2` with every item at most `kappa / alpha`, if
/// one exists.
pub fn auto_alpha(instance: &Instance) -> Option<Size> {
    let max_item = instance.underlying().first().copied()?;
    let alpha = instance.capacity() / max_item;
    (alpha >= 2).then_some(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::verify_sequence;

    fn instance(kappa: Size, source: &[&[Size]], target: &[&[Size]]) -> Instance {
        Instance::from_raw(
            kappa,
            source.iter().map(|b| b.to_vec()).collect(),
            target.iter().map(|b| b.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn precondition_examples() {
        // kappa=12, alpha=3, four bunches of {4}: avg slack 8 but the bound is
        // 12/4 + 108/16 = 9.75, so the slack requirement fails.
        let four = instance(12, &[&[4], &[4], &[4], &[4]], &[&[4], &[4], &[4], &[4]]);
        assert_eq!(check_preconditions(&four, 3), PreconditionCheck::ViolatedSlack);
        // With six bunches the bound drops to 3 + 108/24 = 7.5 <= 8.
        let six = instance(
            12,
            &[&[4], &[4], &[4], &[4], &[4], &[4]],
            &[&[4], &[4], &[4], &[4], &[4], &[4]],
        );
        assert_eq!(check_preconditions(&six, 3), PreconditionCheck::Ok);

        let oversized = instance(12, &[&[5], &[], &[]], &[&[5], &[], &[]]);
        assert_eq!(check_preconditions(&oversized, 3), PreconditionCheck::ViolatedSize);

        let zero_slack = instance(12, &[&[4, 4, 4], &[4, 4, 4]], &[&[4, 4, 4], &[4, 4, 4]]);
        assert_eq!(check_preconditions(&zero_slack, 3), PreconditionCheck::ViolatedSlack);
    }

    // Independent FFD re-implementation used as the oracle for build_ffd.
    fn ffd_oracle(universe: &[Size], kappa: Size) -> Vec<Vec<Size>> {
        let mut items = universe.to_vec();
        items.sort_unstable_by(|a, b| b.cmp(a));
        let mut bins: Vec<(Size, Vec<Size>)> = Vec::new();
        'outer: for item in items {
            for bin in &mut bins {
                if bin.0 + item <= kappa {
                    bin.0 += item;
                    bin.1.push(item);
                    continue 'outer;
                }
            }
            bins.push((item, vec![item]));
        }
        bins.into_iter().map(|(_, b)| b).collect()
    }

    #[test]
    fn build_ffd_examples() {
        let got = build_ffd(&[6, 5, 3, 2, 1, 1], 9, 2).unwrap();
        assert_eq!(got.to_items(), vec![vec![6, 3], vec![5, 2, 1, 1]]);
        assert_eq!(
            got,
            Configuration::from_items(ffd_oracle(&[6, 5, 3, 2, 1, 1], 9)).unwrap()
        );

        assert_eq!(build_ffd(&[], 9, 3).unwrap().to_items(), vec![Vec::<Size>::new(); 3]);
        assert_eq!(build_ffd(&[4], 9, 1).unwrap().to_items(), vec![vec![4]]);
        assert!(matches!(
            build_ffd(&[5, 5], 9, 1),
            Err(SmallItemsError::DoesNotFit(1))
        ));
    }

    #[test]
    fn compression_moves_second_item_into_first() {
        let state = StageState::start(
            &Configuration::from_items(vec![vec![1], vec![1]]).unwrap(),
            2,
        );
        let state = compression_phase(state, 2);
        assert_eq!(
            state.current(),
            Configuration::from_items(vec![vec![1, 1], vec![]]).unwrap()
        );
    }

    #[test]
    fn compression_no_general_items_no_moves() {
        let state = StageState::start(
            &Configuration::from_items(vec![vec![], vec![]]).unwrap(),
            4,
        );
        let state = compression_phase(state, 2);
        assert!(state.log().is_empty());
    }

    #[test]
    fn retrieval_reclassifies_without_moves_when_nothing_remains() {
        let state = StageState::start(
            &Configuration::from_items(vec![vec![], vec![]]).unwrap(),
            4,
        );
        let before = state.current();
        let state = ffd_retrieval_phase(state);
        assert_eq!(state.current(), before);
        assert_eq!(state.ffd_slots().len(), 2);
        assert!(state.general_slots().is_empty());
    }

    #[test]
    fn solve_identity_on_ffd_instance() {
        // Source and target both already equal the FFD configuration.
        let inst = instance(
            12,
            &[&[4, 4, 4], &[], &[], &[], &[], &[]],
            &[&[4, 4, 4], &[], &[], &[], &[], &[]],
        );
        assert_eq!(check_preconditions(&inst, 3), PreconditionCheck::Ok);
        let seq = solve_small_items(&inst, 3).unwrap();
        assert!(seq.is_empty());
        assert!(verify_sequence(&inst, &seq).is_ok());
    }

    #[test]
    fn solve_small_example() {
        let inst = instance(
            12,
            &[&[4], &[4], &[4], &[4], &[4], &[4]],
            &[&[4, 4], &[4], &[4], &[4], &[4], &[]],
        );
        let seq = solve_small_items(&inst, 3).unwrap();
        assert!(verify_sequence(&inst, &seq).is_ok());
    }

    #[test]
    fn refuses_when_preconditions_fail() {
        let inst = instance(12, &[&[4, 4, 4], &[4, 4, 4]], &[&[4, 4, 4], &[4, 4, 4]]);
        assert!(matches!(
            solve_small_items(&inst, 3),
            Err(SmallItemsError::PreconditionViolated(PreconditionCheck::ViolatedSlack))
        ));
    }

    #[test]
    fn auto_alpha_picks_largest() {
        let inst = instance(12, &[&[4], &[], &[]], &[&[], &[4], &[]]);
        assert_eq!(auto_alpha(&inst), Some(3));
        let too_big = instance(12, &[&[7], &[]], &[&[], &[7]]);
        assert_eq!(auto_alpha(&too_big), None);
    }
}
