//! Instance generators for the bin-packing reductions, plus a constructive
//! witness builder for yes-instances.
//!
//! The chain reduces Bin Packing to Restricted Bin Packing (scale the sizes,
//! pad with unit items, after dispatching the quickly decidable cases) and
//! Restricted Bin Packing to repacking. A reduced repacking instance differs
//! from its target only in two nonmatching bunches that must swap a large
//! item pair, which is possible exactly when the original sizes compress
//! into few enough bunches to free temporary storage.

use thiserror::Error;

use crate::model::{Bunch, Instance, ReconfigSequence, Size, Workspace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HardnessError {
    #[error("restricted bin packing requires alpha >= max size, alpha >= 2, and n >= 2m+2")]
    InvariantViolated,
    #[error("certificate is not a valid partition into at most m parts of sum at most alpha")]
    InvalidCertificate,
    #[error("brute force is limited to {limit} items, got {got}")]
    BudgetExceeded { limit: usize, got: usize },
    #[error("arithmetic overflow while building the reduction")]
    Overflow,
}

/// Bin Packing: can `sizes` be partitioned into at most `m` multisets, each
/// summing to at most `alpha`?
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinPackingInstance {
    pub sizes: Vec<Size>,
    pub m: u64,
    pub alpha: Size,
}

impl BinPackingInstance {
    pub fn new(sizes: Vec<Size>, m: u64, alpha: Size) -> Self {
        assert!(sizes.iter().all(|&z| z >= 1), "sizes are positive integers");
        assert!(m >= 1 && alpha >= 1);
        BinPackingInstance { sizes, m, alpha }
    }

    fn max_size(&self) -> Size {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Bin Packing restricted to `alpha >= max size`, `alpha >= 2`, `n >= 2m+2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictedBpInstance {
    pub sizes: Vec<Size>,
    pub m: u64,
    pub alpha: Size,
}

impl RestrictedBpInstance {
    pub fn new(sizes: Vec<Size>, m: u64, alpha: Size) -> Result<Self, HardnessError> {
        let n = sizes.len() as u64;
        let max = sizes.iter().copied().max().unwrap_or(0);
        if sizes.is_empty()
            || sizes.contains(&0)
            || m == 0
            || alpha < max
            || alpha < 2
            || n < 2 * m + 2
        {
            return Err(HardnessError::InvariantViolated);
        }
        Ok(RestrictedBpInstance { sizes, m, alpha })
    }

    pub fn as_bin_packing(&self) -> BinPackingInstance {
        BinPackingInstance::new(self.sizes.clone(), self.m, self.alpha)
    }
}

/// Fixed restricted instances the quickly decided cases map onto.
pub fn trivial_yes_anchor() -> RestrictedBpInstance {
    RestrictedBpInstance::new(vec![1, 1, 1, 1], 1, 4).expect("anchor satisfies the restrictions")
}

pub fn trivial_no_anchor() -> RestrictedBpInstance {
    RestrictedBpInstance::new(vec![1, 1, 1, 1], 1, 2).expect("anchor satisfies the restrictions")
}

/// Outcome of reducing Bin Packing to Restricted Bin Packing. Trivial
/// verdicts correspond to the fixed yes/no anchor instances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BpReduction {
    Mapped(RestrictedBpInstance),
    TrivialYes,
    TrivialNo,
}

/// Dispatches the quickly decidable cases, then scales the remaining
/// instances by `4m+4`, appends `2m+2` unit items, and sets
/// `alpha'' = (4m+4)*alpha + (2m+2)`.
pub fn reduce_bp_to_rbp(bp: &BinPackingInstance) -> BpReduction {
    let n = bp.sizes.len() as u64;
    let max = bp.max_size();
    if bp.alpha < max {
        return BpReduction::TrivialNo;
    }
    if bp.m >= n {
        return BpReduction::TrivialYes;
    }
    if bp.m == n - 1 {
        let mut sorted = bp.sizes.clone();
        sorted.sort_unstable();
        return if sorted[0] + sorted[1] <= bp.alpha {
            BpReduction::TrivialYes
        } else {
            BpReduction::TrivialNo
        };
    }
    if bp.alpha == 1 {
        // m <= n-2 here, so two items share a part and overflow alpha.
        return BpReduction::TrivialNo;
    }
    let factor = 4 * bp.m + 4;
    let pad = 2 * bp.m + 2;
    let mut sizes: Vec<Size> = bp
        .sizes
        .iter()
        .map(|&z| z.checked_mul(factor).expect("scaled size overflows u64"))
        .collect();
    sizes.extend(std::iter::repeat_n(1, pad as usize));
    let alpha = bp
        .alpha
        .checked_mul(factor)
        .and_then(|x| x.checked_add(pad))
        .expect("scaled bound overflows u64");
    let mapped = RestrictedBpInstance::new(sizes, bp.m, alpha)
        .expect("the construction satisfies all three restrictions");
    BpReduction::Mapped(mapped)
}

/// Builds the repacking instance whose reconfiguration encodes the
/// restricted instance: `kappa = 2(n-m)alpha`, one matching bunch
/// `{z_i, kappa-alpha}` per size, and two nonmatching bunches that must swap
/// an item of size `kappa/2` with one of size `kappa/2 - 1`.
pub fn reduce_rbp_to_repacking(r: &RestrictedBpInstance) -> Result<Instance, HardnessError> {
    let n = r.sizes.len() as u64;
    let spare = n - r.m;
    let kappa = 2u64
        .checked_mul(spare)
        .and_then(|x| x.checked_mul(r.alpha))
        .ok_or(HardnessError::Overflow)?;
    let half = kappa / 2;
    let filler = kappa - r.alpha;

    let mut source: Vec<Vec<Size>> = r.sizes.iter().map(|&z| vec![z, filler]).collect();
    let mut target = source.clone();
    source.push(vec![half, half]);
    let mut alphas = vec![half - 1];
    alphas.extend(std::iter::repeat_n(r.alpha, spare as usize));
    source.push(alphas.clone());

    target.push(vec![half - 1, half]);
    alphas[0] = half;
    target.push(alphas);

    Instance::from_raw(kappa, source, target).map_err(|_| HardnessError::Overflow)
}

fn validate_certificate(
    r: &RestrictedBpInstance,
    cert: &[Vec<usize>],
) -> Result<(), HardnessError> {
    if cert.len() as u64 > r.m {
        return Err(HardnessError::InvalidCertificate);
    }
    let mut seen = vec![false; r.sizes.len()];
    for part in cert {
        let mut sum: Size = 0;
        for &idx in part {
            if idx >= r.sizes.len() || seen[idx] {
                return Err(HardnessError::InvalidCertificate);
            }
            seen[idx] = true;
            sum = sum
                .checked_add(r.sizes[idx])
                .ok_or(HardnessError::InvalidCertificate)?;
        }
        if sum > r.alpha {
            return Err(HardnessError::InvalidCertificate);
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(())
    } else {
        Err(HardnessError::InvalidCertificate)
    }
}

/// Constructive reconfiguration sequence for the reduced instance of a
/// yes-instance, given a certificate partition (parts are lists of size
/// indices, so duplicate sizes stay unambiguous). The sequence compresses
/// the certificate parts into their host bunches, parks the alpha-items into
/// the freed bunches, swaps the two large items, and then reverses the
/// parking and compression.
pub fn witness_sequence(
    r: &RestrictedBpInstance,
    cert: &[Vec<usize>],
) -> Result<ReconfigSequence, HardnessError> {
    validate_certificate(r, cert)?;
    let instance = reduce_rbp_to_repacking(r)?;
    let n = r.sizes.len();
    let spare = n - r.m as usize;
    let kappa = instance.capacity();
    let half = kappa / 2;

    // Stable slots: 0..n matching bunches (slot i holds z_i), n holds the
    // two half items, n+1 holds the small half item and the alpha items.
    let mut slots: Vec<Bunch> = r
        .sizes
        .iter()
        .map(|&z| Bunch::new(vec![z, kappa - r.alpha]).expect("matching bunch"))
        .collect();
    slots.push(Bunch::new(vec![half, half]).expect("nonmatching bunch"));
    let mut alphas = vec![half - 1];
    alphas.extend(std::iter::repeat_n(r.alpha, spare));
    slots.push(Bunch::new(alphas).expect("nonmatching bunch"));
    let mut ws = Workspace::from_bunches(slots, kappa);
    debug_assert_eq!(ws.current(), *instance.source());

    // Compression: move each certificate part into the slot of its smallest
    // index.
    let mut compression: Vec<(Size, usize, usize)> = Vec::new();
    for part in cert {
        if part.is_empty() {
            continue;
        }
        let host = *part.iter().min().expect("non-empty part");
        for &idx in part {
            if idx != host {
                compression.push((r.sizes[idx], idx, host));
            }
        }
    }
    for &(item, from, to) in &compression {
        ws.transfer(item, from, to);
    }

    // Parking: one alpha item into each freed matching bunch.
    let freed: Vec<usize> = (0..n).filter(|slot| ws.bunch(*slot).len() == 1).collect();
    assert!(freed.len() >= spare, "certificate frees at least n-m bunches");
    let mut parking: Vec<(Size, usize, usize)> = Vec::new();
    for &slot in freed.iter().take(spare) {
        parking.push((r.alpha, n + 1, slot));
    }
    for &(item, from, to) in &parking {
        ws.transfer(item, from, to);
    }

    // Swap the two large items between the nonmatching bunches.
    ws.transfer(half, n, n + 1);
    ws.transfer(half - 1, n + 1, n);

    // Reverse the parking, then the compression.
    for &(item, from, to) in parking.iter().rev() {
        ws.transfer(item, to, from);
    }
    for &(item, from, to) in compression.iter().rev() {
        ws.transfer(item, to, from);
    }

    debug_assert_eq!(ws.current(), *instance.target());
    Ok(ws.into_sequence())
}

/// Default item-count guard for the exhaustive search.
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Exhaustive search for a partition of `sizes` into at most `m` parts each
/// summing to at most `alpha`, guarded at [`BRUTE_FORCE_LIMIT`] items.
pub fn bp_brute_force(bp: &BinPackingInstance) -> Result<Option<Vec<Vec<usize>>>, HardnessError> {
    bp_brute_force_bounded(bp, BRUTE_FORCE_LIMIT)
}

/// Exhaustive search with an explicit item-count guard; items are assigned
/// largest-first and only the first empty part may be opened, which prunes
/// permutations of equal parts.
pub fn bp_brute_force_bounded(
    bp: &BinPackingInstance,
    limit: usize,
) -> Result<Option<Vec<Vec<usize>>>, HardnessError> {
    if bp.sizes.len() > limit {
        return Err(HardnessError::BudgetExceeded {
            limit,
            got: bp.sizes.len(),
        });
    }
    let mut order: Vec<usize> = (0..bp.sizes.len()).collect();
    order.sort_by(|&a, &b| bp.sizes[b].cmp(&bp.sizes[a]));
    let parts = bp.m.min(bp.sizes.len() as u64) as usize;
    let mut loads: Vec<Size> = vec![0; parts];
    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); parts];

    fn place(
        depth: usize,
        order: &[usize],
        sizes: &[Size],
        alpha: Size,
        loads: &mut Vec<Size>,
        assignment: &mut Vec<Vec<usize>>,
    ) -> bool {
        let Some(&idx) = order.get(depth) else {
            return true;
        };
        let item = sizes[idx];
        let mut tried_empty = false;
        for part in 0..loads.len() {
            if loads[part] == 0 {
                if tried_empty {
                    break;
                }
                tried_empty = true;
            }
            if loads[part] + item > alpha {
                continue;
            }
            loads[part] += item;
            assignment[part].push(idx);
            if place(depth + 1, order, sizes, alpha, loads, assignment) {
                return true;
            }
            assignment[part].pop();
            loads[part] -= item;
        }
        false
    }

    if place(0, &order, &bp.sizes, bp.alpha, &mut loads, &mut assignment) {
        assignment.retain(|part| !part.is_empty());
        Ok(Some(assignment))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::verify_sequence;

    #[test]
    fn trivial_cases() {
        // m >= n.
        assert_eq!(
            reduce_bp_to_rbp(&BinPackingInstance::new(vec![3], 2, 5)),
            BpReduction::TrivialYes
        );
        // alpha < max size.
        assert_eq!(
            reduce_bp_to_rbp(&BinPackingInstance::new(vec![5], 1, 3)),
            BpReduction::TrivialNo
        );
        // m = n-1: two smallest must share.
        assert_eq!(
            reduce_bp_to_rbp(&BinPackingInstance::new(vec![2, 2, 3], 2, 4)),
            BpReduction::TrivialYes
        );
        assert_eq!(
            reduce_bp_to_rbp(&BinPackingInstance::new(vec![3, 3, 3], 2, 5)),
            BpReduction::TrivialNo
        );
        // alpha = 1 with m <= n-2.
        assert_eq!(
            reduce_bp_to_rbp(&BinPackingInstance::new(vec![1, 1, 1], 1, 1)),
            BpReduction::TrivialNo
        );
    }

    #[test]
    fn mapped_example() {
        let bp = BinPackingInstance::new(vec![2, 2, 2], 1, 2);
        let BpReduction::Mapped(rbp) = reduce_bp_to_rbp(&bp) else {
            panic!("expected a mapped instance");
        };
        // factor 4m+4 = 8, pad 2m+2 = 4 unit items, alpha'' = 16 + 4 = 20.
        assert_eq!(rbp.sizes, vec![16, 16, 16, 1, 1, 1, 1]);
        assert_eq!(rbp.alpha, 20);
        assert_eq!(rbp.m, 1);
    }

    #[test]
    fn anchors_have_expected_verdicts() {
        let yes = trivial_yes_anchor();
        assert!(bp_brute_force(&yes.as_bin_packing()).unwrap().is_some());
        let no = trivial_no_anchor();
        assert!(bp_brute_force(&no.as_bin_packing()).unwrap().is_none());
    }

    #[test]
    fn reduction_structure() {
        let r = RestrictedBpInstance::new(vec![1, 1, 1, 1], 1, 2).unwrap();
        let inst = reduce_rbp_to_repacking(&r).unwrap();
        assert_eq!(inst.capacity(), 12);
        let source = inst.source().to_items();
        assert_eq!(source.len(), 6);
        assert!(source.contains(&vec![10, 1]));
        assert!(source.contains(&vec![6, 6]));
        assert!(source.contains(&vec![5, 2, 2, 2]));
        // The alpha items always sum to kappa/2.
        assert_eq!(3 * 2, inst.capacity() / 2);
    }

    #[test]
    fn witness_for_simple_yes_instance() {
        // alpha = 4 admits the single part {1,1,1,1}.
        let r = RestrictedBpInstance::new(vec![1, 1, 1, 1], 1, 4).unwrap();
        let cert = vec![vec![0, 1, 2, 3]];
        let seq = witness_sequence(&r, &cert).unwrap();
        let inst = reduce_rbp_to_repacking(&r).unwrap();
        assert!(verify_sequence(&inst, &seq).is_ok());
    }

    #[test]
    fn witness_second_half_mirrors_first() {
        // The emitted log is compression, parking, the swap, then the
        // parking and compression undone in reverse. Only one swap move
        // appears: once the large item crosses, the two nonmatching bunches
        // already form the target pair as a multiset, so the counter-move
        // changes nothing and is elided. Item sizes mirror around it.
        let r = RestrictedBpInstance::new(vec![2, 1, 1, 1, 1, 1], 2, 5).unwrap();
        let cert = bp_brute_force(&r.as_bin_packing()).unwrap().expect("yes-instance");
        let seq = witness_sequence(&r, &cert).unwrap();
        let inst = reduce_rbp_to_repacking(&r).unwrap();
        assert!(verify_sequence(&inst, &seq).is_ok());

        let moves = &seq.moves;
        let len = moves.len();
        assert!(len >= 3 && len % 2 == 1);
        assert_eq!(moves[len / 2].item, inst.capacity() / 2);
        for t in 0..len / 2 {
            assert_eq!(
                moves[t].item,
                moves[len - 1 - t].item,
                "move {t} is not mirrored"
            );
        }
    }

    #[test]
    fn invalid_certificates_rejected() {
        let r = RestrictedBpInstance::new(vec![1, 1, 1, 1], 1, 2).unwrap();
        // Two parts exceed m = 1.
        assert!(matches!(
            witness_sequence(&r, &[vec![0, 1], vec![2, 3]]),
            Err(HardnessError::InvalidCertificate)
        ));
        // One part sums to 4 > alpha = 2.
        assert!(matches!(
            witness_sequence(&r, &[vec![0, 1, 2, 3]]),
            Err(HardnessError::InvalidCertificate)
        ));
        // Missing an index.
        assert!(matches!(
            witness_sequence(&r, &[vec![0, 1]]),
            Err(HardnessError::InvalidCertificate)
        ));
    }

    #[test]
    fn brute_force_examples() {
        let cert = bp_brute_force(&BinPackingInstance::new(vec![2, 2, 2], 2, 4))
            .unwrap()
            .expect("feasible");
        assert!(cert.len() <= 2);
        assert!(bp_brute_force(&BinPackingInstance::new(vec![3, 3], 1, 5))
            .unwrap()
            .is_none());
        assert_eq!(
            bp_brute_force(&BinPackingInstance::new(vec![], 2, 4)).unwrap(),
            Some(vec![])
        );
        assert!(matches!(
            bp_brute_force(&BinPackingInstance::new(vec![1; 13], 2, 13)),
            Err(HardnessError::BudgetExceeded { .. })
        ));
    }
}
