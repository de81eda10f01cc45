//! Step-by-step repacking of capacity-bounded multisets of multisets.
//!
//! A *bunch* is a multiset of positive integer item sizes, a *configuration*
//! is a multiset of bunches, and a single reconfiguration step moves one item
//! between two bunches without exceeding the shared capacity. The crate
//! provides the data model and sequence verifier ([`model`]), an exhaustive
//! breadth-first oracle ([`oracle`]), a first-fit-decreasing solver for
//! small-item instances ([`smallitems`]), a full feasibility characterization
//! and solver for powers-of-2 instances ([`pow2`]), a partition-based decider
//! built on a transshipment-style integer program ([`partition`]), and
//! hardness-reduction instance generators ([`hardness`]).

pub mod hardness;
pub mod model;
pub mod oracle;
pub mod partition;
pub mod pow2;
pub mod smallitems;

pub use model::{
    apply_move, are_adjacent, canonicalize, slack, verify_sequence, volume, Bunch, Configuration,
    Instance, InstanceError, Move, MoveError, ReconfigSequence, Size, VerifyReport,
};
