//! Python bindings: the instance type plus the solver and oracle entry
//! points. Move sequences cross the boundary as lists of
//! `(item, from, to)` tuples, matching the canonical-index move encoding of
//! the JSON schema.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use repack_core::hardness::{
    bp_brute_force, reduce_rbp_to_repacking, witness_sequence, RestrictedBpInstance,
};
use repack_core::model::{self, Move, ReconfigSequence};
use repack_core::oracle::{bfs_reachable, BfsResult, SearchBudget};
use repack_core::partition::{beta_repacking_decide, DecideOutcome, ExplosionGuard};
use repack_core::pow2;
use repack_core::smallitems;

type PyMove = (u64, usize, usize);

fn moves_out(seq: &ReconfigSequence) -> Vec<PyMove> {
    seq.moves.iter().map(|m| (m.item, m.from, m.to)).collect()
}

fn moves_in(moves: Vec<PyMove>) -> ReconfigSequence {
    ReconfigSequence::new(
        moves
            .into_iter()
            .map(|(item, from, to)| Move { item, from, to })
            .collect(),
    )
}

fn value_error<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A repacking instance: a shared capacity plus source and target
/// configurations over the same item universe.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Instance {
    inner: model::Instance,
}

#[pymethods]
impl Instance {
    #[new]
    fn new(capacity: u64, source: Vec<Vec<u64>>, target: Vec<Vec<u64>>) -> PyResult<Self> {
        let inner = model::Instance::from_raw(capacity, source, target).map_err(value_error)?;
        Ok(Instance { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = model::Instance::from_json(text).map_err(value_error)?;
        Ok(Instance { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn capacity(&self) -> u64 {
        self.inner.capacity()
    }

    #[getter]
    fn source(&self) -> Vec<Vec<u64>> {
        self.inner.source().to_items()
    }

    #[getter]
    fn target(&self) -> Vec<Vec<u64>> {
        self.inner.target().to_items()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(capacity={}, source={:?}, target={:?})",
            self.inner.capacity(),
            self.inner.source().to_items(),
            self.inner.target().to_items(),
        )
    }
}

/// Replay a move list against the instance; returns {"ok", "detail"}.
#[pyfunction]
fn verify(py: Python<'_>, instance: &Instance, moves: Vec<PyMove>) -> PyResult<Py<PyDict>> {
    let report = model::verify_sequence(&instance.inner, &moves_in(moves));
    let out = PyDict::new(py);
    out.set_item("ok", report.is_ok())?;
    out.set_item("detail", format!("{report:?}"))?;
    Ok(out.into())
}

/// Exhaustive breadth-first search; returns {"verdict", "moves"} where the
/// verdict is "feasible", "infeasible", or "budget-exceeded".
#[pyfunction]
#[pyo3(signature = (instance, max_states = 2_000_000))]
fn brute_force(py: Python<'_>, instance: &Instance, max_states: usize) -> PyResult<Py<PyDict>> {
    let out = PyDict::new(py);
    match bfs_reachable(&instance.inner, &SearchBudget::with_max_states(max_states)) {
        BfsResult::Feasible(seq) => {
            out.set_item("verdict", "feasible")?;
            out.set_item("moves", moves_out(&seq))?;
        }
        BfsResult::Infeasible => {
            out.set_item("verdict", "infeasible")?;
            out.set_item("moves", py.None())?;
        }
        BfsResult::BudgetExceeded => {
            out.set_item("verdict", "budget-exceeded")?;
            out.set_item("moves", py.None())?;
        }
    }
    Ok(out.into())
}

/// First-fit-decreasing solver for small-item instances.
#[pyfunction]
fn solve_small_items(instance: &Instance, alpha: u64) -> PyResult<Vec<PyMove>> {
    if alpha < 2 {
        return Err(PyValueError::new_err("alpha must be at least 2"));
    }
    smallitems::solve_small_items(&instance.inner, alpha)
        .map(|seq| moves_out(&seq))
        .map_err(value_error)
}

/// Reconfiguration for powers-of-2 instances; raises on infeasible input.
#[pyfunction]
fn solve_pow2(instance: &Instance) -> PyResult<Vec<PyMove>> {
    pow2::settle_items(&instance.inner)
        .map(|seq| moves_out(&seq))
        .map_err(value_error)
}

/// Feasibility of a powers-of-2 instance:
/// {"feasible", "largest_unsettled", "total_slack"}.
#[pyfunction]
fn pow2_feasible(py: Python<'_>, instance: &Instance) -> PyResult<Py<PyDict>> {
    let verdict = pow2::pow2_feasible(&instance.inner).map_err(value_error)?;
    let out = PyDict::new(py);
    match verdict {
        pow2::Pow2Feasibility::Feasible {
            largest_unsettled,
            total_slack,
        } => {
            out.set_item("feasible", true)?;
            out.set_item("largest_unsettled", largest_unsettled)?;
            out.set_item("total_slack", total_slack)?;
        }
        pow2::Pow2Feasibility::Infeasible {
            largest_unsettled,
            total_slack,
        } => {
            out.set_item("feasible", false)?;
            out.set_item("largest_unsettled", largest_unsettled)?;
            out.set_item("total_slack", total_slack)?;
        }
    }
    Ok(out.into())
}

/// Partition-bounded decision; returns {"yes", "moves", "parts"} where parts
/// is a list of (items, bunches) pairs on yes.
#[pyfunction]
fn decide_partition(py: Python<'_>, instance: &Instance, beta: usize) -> PyResult<Py<PyDict>> {
    if beta == 0 {
        return Err(PyValueError::new_err("beta must be at least 1"));
    }
    let outcome = beta_repacking_decide(&instance.inner, beta, &ExplosionGuard::default())
        .map_err(value_error)?;
    let out = PyDict::new(py);
    match outcome {
        DecideOutcome::Yes {
            assignment,
            sequence,
        } => {
            out.set_item("yes", true)?;
            out.set_item("moves", moves_out(&sequence))?;
            let parts: Vec<(Vec<u64>, usize)> = assignment
                .parts
                .iter()
                .map(|p| (p.items.clone(), p.bunches))
                .collect();
            out.set_item("parts", parts)?;
        }
        DecideOutcome::No => {
            out.set_item("yes", false)?;
            out.set_item("moves", py.None())?;
            out.set_item("parts", py.None())?;
        }
    }
    Ok(out.into())
}

/// Build the repacking instance encoding a restricted bin packing instance.
#[pyfunction]
fn gen_hard(sizes: Vec<u64>, m: u64, alpha: u64) -> PyResult<Instance> {
    let rbp = RestrictedBpInstance::new(sizes, m, alpha).map_err(value_error)?;
    let inner = reduce_rbp_to_repacking(&rbp).map_err(value_error)?;
    Ok(Instance { inner })
}

/// Witness sequence for a yes restricted bin packing instance, or None.
#[pyfunction]
fn gen_hard_witness(sizes: Vec<u64>, m: u64, alpha: u64) -> PyResult<Option<Vec<PyMove>>> {
    let rbp = RestrictedBpInstance::new(sizes, m, alpha).map_err(value_error)?;
    match bp_brute_force(&rbp.as_bin_packing()).map_err(value_error)? {
        Some(cert) => {
            let seq = witness_sequence(&rbp, &cert).map_err(value_error)?;
            Ok(Some(moves_out(&seq)))
        }
        None => Ok(None),
    }
}

#[pymodule]
fn repack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(solve_small_items, m)?)?;
    m.add_function(wrap_pyfunction!(solve_pow2, m)?)?;
    m.add_function(wrap_pyfunction!(pow2_feasible, m)?)?;
    m.add_function(wrap_pyfunction!(decide_partition, m)?)?;
    m.add_function(wrap_pyfunction!(gen_hard, m)?)?;
    m.add_function(wrap_pyfunction!(gen_hard_witness, m)?)?;
    Ok(())
}
