//! Command-line surface: instance ingestion, solver dispatch, verification,
//! generation, and machine-readable output.
//!
//! Reports are JSON on stdout (`--human` renders them as text instead);
//! diagnostics go to stderr. Exit codes are a stable contract:
//! 0 feasible/verified/yes, 1 infeasible/no/failed verification,
//! 2 parse or I/O error, 3 refused precondition, 4 budget or enumeration
//! guard exceeded.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use repack_core::hardness::{
    bp_brute_force, reduce_rbp_to_repacking, witness_sequence, RestrictedBpInstance,
};
use repack_core::model::{verify_sequence, Instance, ReconfigSequence};
use repack_core::oracle::{bfs_reachable, BfsResult, SearchBudget};
use repack_core::partition::{
    beta_repacking_decide, build_partition_ilp, constraint_rows, DecideOutcome, ExplosionGuard,
    PartitionAssignment, PartitionError,
};
use repack_core::pow2::{is_pow2_instance, pow2_feasible, settle_items, Pow2Feasibility};
use repack_core::smallitems::{
    auto_alpha, check_preconditions, solve_small_items, PreconditionCheck,
};

const EXIT_FEASIBLE: u8 = 0;
const EXIT_INFEASIBLE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_REFUSED: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "repack", about = "Step-by-step repacking of capacity-bounded multisets")]
struct Cli {
    /// Render reports as text instead of JSON.
    #[arg(long, global = true)]
    human: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance with one of the structural solvers.
    Solve(SolveArgs),
    /// Verify a move sequence against an instance.
    Verify(VerifyArgs),
    /// Decide partition-bounded repacking and emit a witness on yes.
    Decide(DecideArgs),
    /// Exhaustive breadth-first search; ground truth for small instances.
    Brute(BruteArgs),
    /// Feasibility check without constructing a sequence.
    Feasible(FeasibleArgs),
    /// Generate a reduction instance from restricted bin packing.
    GenHard(GenHardArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    SmallItems,
    Pow2,
    Auto,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    method: SolveMethod,
    /// Size-bound parameter for the small-items solver.
    #[arg(long)]
    alpha: Option<u64>,
    /// Pick the largest integer alpha with every item at most kappa/alpha.
    #[arg(long)]
    auto_alpha: bool,
    /// Write the verified sequence to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    sequence: PathBuf,
}

#[derive(Args)]
struct DecideArgs {
    instance: PathBuf,
    #[arg(long)]
    beta: usize,
    /// Write the witness sequence to this file on yes.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the witness partition to this file on yes.
    #[arg(long)]
    partition_out: Option<PathBuf>,
    /// Dump the built model (variables, bounds, constraint rows) as JSON.
    #[arg(long)]
    emit_ilp: Option<PathBuf>,
}

#[derive(Args)]
struct BruteArgs {
    instance: PathBuf,
    /// State cap; the REPACK_MAX_STATES environment variable overrides the
    /// default.
    #[arg(long)]
    max_states: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeasibleArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "pow2")]
    method: FeasibleMethod,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeasibleMethod {
    Pow2,
}

#[derive(Args)]
struct GenHardArgs {
    /// Comma-separated item sizes of the restricted bin packing instance.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<u64>,
    #[arg(long)]
    m: u64,
    #[arg(long)]
    alpha: u64,
    /// Also emit a witness sequence when a certificate exists.
    #[arg(long)]
    with_witness: bool,
    /// Write the instance JSON to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the witness sequence to this file instead of stdout.
    #[arg(long)]
    witness_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunReport {
    verdict: &'static str,
    method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    sequence_length: Option<usize>,
    elapsed_ms: u128,
    diagnostics: Vec<String>,
}

impl RunReport {
    fn emit(&self, human: bool) {
        if human {
            println!("verdict:  {}", self.verdict);
            println!("method:   {}", self.method);
            if let Some(len) = self.sequence_length {
                println!("moves:    {len}");
            }
            println!("elapsed:  {} ms", self.elapsed_ms);
            for line in &self.diagnostics {
                println!("note:     {line}");
            }
        } else {
            println!("{}", serde_json::to_string(self).expect("report serializes"));
        }
    }
}

fn read_instance(path: &PathBuf) -> Result<Instance, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Instance::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_sequence(path: &PathBuf) -> Result<ReconfigSequence, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    ReconfigSequence::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn fail(code: u8, message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

/// Verification is forced before any sequence leaves the process.
fn emit_verified_sequence(
    instance: &Instance,
    seq: &ReconfigSequence,
    out: Option<&PathBuf>,
) -> Result<(), String> {
    let report = verify_sequence(instance, seq);
    if !report.is_ok() {
        return Err(format!(
            "internal error: produced sequence failed verification: {report:?}"
        ));
    }
    if let Some(path) = out {
        fs::write(path, seq.to_json()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

fn budget_from_env(max_states: Option<usize>) -> SearchBudget {
    let env_override = std::env::var("REPACK_MAX_STATES")
        .ok()
        .and_then(|v| v.parse().ok());
    match max_states.or(env_override) {
        Some(n) => SearchBudget::with_max_states(n),
        None => SearchBudget::default(),
    }
}

fn cmd_solve(args: &SolveArgs, human: bool) -> ExitCode {
    let started = Instant::now();
    let instance = match read_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    let mut diagnostics = Vec::new();

    let pick_alpha = |diag: &mut Vec<String>| -> Option<u64> {
        if args.auto_alpha {
            let alpha = auto_alpha(&instance);
            if let Some(a) = alpha {
                diag.push(format!("auto-alpha chose {a}"));
            }
            alpha
        } else {
            args.alpha
        }
    };

    enum Attempt {
        Sequence(ReconfigSequence, &'static str),
        Refused(String),
    }

    let attempt = match args.method {
        SolveMethod::Pow2 => match settle_items(&instance) {
            Ok(seq) => Attempt::Sequence(seq, "pow2"),
            Err(repack_core::pow2::Pow2Error::InfeasibleInstance {
                largest_unsettled,
                total_slack,
            }) => {
                let report = RunReport {
                    verdict: "infeasible",
                    method: "pow2".into(),
                    sequence_length: None,
                    elapsed_ms: started.elapsed().as_millis(),
                    diagnostics: vec![format!(
                        "total slack {total_slack} < largest unsettled size {largest_unsettled}"
                    )],
                };
                report.emit(human);
                return ExitCode::from(EXIT_INFEASIBLE);
            }
            Err(e) => Attempt::Refused(e.to_string()),
        },
        SolveMethod::SmallItems => {
            let Some(alpha) = pick_alpha(&mut diagnostics) else {
                return fail(EXIT_REFUSED, "small-items needs --alpha N or --auto-alpha");
            };
            if alpha < 2 {
                return fail(EXIT_REFUSED, "alpha must be at least 2");
            }
            match solve_small_items(&instance, alpha) {
                Ok(seq) => Attempt::Sequence(seq, "small-items"),
                Err(e) => Attempt::Refused(e.to_string()),
            }
        }
        SolveMethod::Auto => {
            if is_pow2_instance(&instance) {
                match settle_items(&instance) {
                    Ok(seq) => Attempt::Sequence(seq, "pow2"),
                    Err(repack_core::pow2::Pow2Error::InfeasibleInstance { .. }) => {
                        let report = RunReport {
                            verdict: "infeasible",
                            method: "pow2".into(),
                            sequence_length: None,
                            elapsed_ms: started.elapsed().as_millis(),
                            diagnostics,
                        };
                        report.emit(human);
                        return ExitCode::from(EXIT_INFEASIBLE);
                    }
                    Err(e) => Attempt::Refused(e.to_string()),
                }
            } else {
                let alpha = pick_alpha(&mut diagnostics).or_else(|| auto_alpha(&instance));
                match alpha {
                    Some(a) if check_preconditions(&instance, a) == PreconditionCheck::Ok => {
                        match solve_small_items(&instance, a) {
                            Ok(seq) => Attempt::Sequence(seq, "small-items"),
                            Err(e) => Attempt::Refused(e.to_string()),
                        }
                    }
                    Some(a) => Attempt::Refused(format!(
                        "small-items preconditions fail for alpha {a}: {:?}; try `repack brute`",
                        check_preconditions(&instance, a)
                    )),
                    None => Attempt::Refused(
                        "no structural solver applies (items too large for any alpha >= 2); try `repack brute`"
                            .into(),
                    ),
                }
            }
        }
    };

    match attempt {
        Attempt::Sequence(seq, method) => {
            if let Err(e) = emit_verified_sequence(&instance, &seq, args.out.as_ref()) {
                return fail(EXIT_PARSE, &e);
            }
            let report = RunReport {
                verdict: "feasible",
                method: method.into(),
                sequence_length: Some(seq.len()),
                elapsed_ms: started.elapsed().as_millis(),
                diagnostics,
            };
            report.emit(human);
            ExitCode::from(EXIT_FEASIBLE)
        }
        Attempt::Refused(reason) => {
            diagnostics.push(reason);
            let report = RunReport {
                verdict: "refused-precondition",
                method: "solve".into(),
                sequence_length: None,
                elapsed_ms: started.elapsed().as_millis(),
                diagnostics,
            };
            report.emit(human);
            ExitCode::from(EXIT_REFUSED)
        }
    }
}

fn cmd_verify(args: &VerifyArgs, human: bool) -> ExitCode {
    let started = Instant::now();
    let instance = match read_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    let seq = match read_sequence(&args.sequence) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    let outcome = verify_sequence(&instance, &seq);
    let ok = outcome.is_ok();
    let report = RunReport {
        verdict: if ok { "feasible" } else { "infeasible" },
        method: "verify".into(),
        sequence_length: Some(seq.len()),
        elapsed_ms: started.elapsed().as_millis(),
        diagnostics: if ok {
            Vec::new()
        } else {
            vec![format!("{outcome:?}")]
        },
    };
    report.emit(human);
    ExitCode::from(if ok { EXIT_FEASIBLE } else { EXIT_INFEASIBLE })
}

#[derive(Serialize)]
struct PartitionJson {
    parts: Vec<PartJson>,
}

#[derive(Serialize)]
struct PartJson {
    items: Vec<u64>,
    bunches: usize,
}

fn partition_json(assignment: &PartitionAssignment) -> String {
    let parts = assignment
        .parts
        .iter()
        .map(|p| PartJson {
            items: p.items.clone(),
            bunches: p.bunches,
        })
        .collect();
    serde_json::to_string_pretty(&PartitionJson { parts }).expect("partition serializes")
}

fn emit_ilp(instance: &Instance, beta: usize, path: &PathBuf) -> Result<(), String> {
    let model = build_partition_ilp(instance, beta, &ExplosionGuard::default())
        .map_err(|e| e.to_string())?;
    #[derive(Serialize)]
    struct RowJson {
        label: &'static str,
        coeffs: Vec<(usize, i64)>,
        rhs: i64,
    }
    #[derive(Serialize)]
    struct BoundsJson {
        flow: (i64, i64),
        origin_demand: (i64, i64),
        destination_demand: (i64, i64),
    }
    #[derive(Serialize)]
    struct ModelJson {
        edges: usize,
        subconfigurations: usize,
        bin_types: usize,
        variables: usize,
        bounds: BoundsJson,
        constraints: Vec<RowJson>,
    }
    let rows = constraint_rows(&model)
        .into_iter()
        .map(|r| RowJson {
            label: r.label,
            coeffs: r.coeffs,
            rhs: r.rhs,
        })
        .collect();
    let bound = model.var_bound as i64;
    let dump = ModelJson {
        edges: model.graph.edge_count(),
        subconfigurations: model.graph.sub_count(),
        bin_types: model.bin_types.len(),
        variables: model.variable_count(),
        bounds: BoundsJson {
            flow: (0, bound),
            origin_demand: (-bound, 0),
            destination_demand: (0, bound),
        },
        constraints: rows,
    };
    fs::write(path, serde_json::to_string_pretty(&dump).expect("model serializes"))
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_decide(args: &DecideArgs, human: bool) -> ExitCode {
    let started = Instant::now();
    let instance = match read_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    if args.beta == 0 {
        return fail(EXIT_PARSE, "--beta must be at least 1");
    }
    if let Some(path) = &args.emit_ilp {
        if let Err(e) = emit_ilp(&instance, args.beta, path) {
            return fail(EXIT_BUDGET, &e);
        }
    }
    match beta_repacking_decide(&instance, args.beta, &ExplosionGuard::default()) {
        Ok(DecideOutcome::Yes {
            assignment,
            sequence,
        }) => {
            if let Err(e) = emit_verified_sequence(&instance, &sequence, args.out.as_ref()) {
                return fail(EXIT_PARSE, &e);
            }
            if let Some(path) = &args.partition_out {
                if let Err(e) = fs::write(path, partition_json(&assignment)) {
                    return fail(EXIT_PARSE, &format!("{}: {e}", path.display()));
                }
            }
            let report = RunReport {
                verdict: "feasible",
                method: format!("decide(beta={})", args.beta),
                sequence_length: Some(sequence.len()),
                elapsed_ms: started.elapsed().as_millis(),
                diagnostics: vec![format!("partition has {} parts", assignment.parts.len())],
            };
            report.emit(human);
            ExitCode::from(EXIT_FEASIBLE)
        }
        Ok(DecideOutcome::No) => {
            let report = RunReport {
                verdict: "infeasible",
                method: format!("decide(beta={})", args.beta),
                sequence_length: None,
                elapsed_ms: started.elapsed().as_millis(),
                diagnostics: Vec::new(),
            };
            report.emit(human);
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(e @ PartitionError::ExplosionGuard { .. }) => fail(EXIT_BUDGET, &e.to_string()),
        Err(e) => fail(EXIT_PARSE, &e.to_string()),
    }
}

fn cmd_brute(args: &BruteArgs, human: bool) -> ExitCode {
    let started = Instant::now();
    let instance = match read_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    let budget = budget_from_env(args.max_states);
    match bfs_reachable(&instance, &budget) {
        BfsResult::Feasible(seq) => {
            if let Err(e) = emit_verified_sequence(&instance, &seq, args.out.as_ref()) {
                return fail(EXIT_PARSE, &e);
            }
            let report = RunReport {
                verdict: "feasible",
                method: "brute".into(),
                sequence_length: Some(seq.len()),
                elapsed_ms: started.elapsed().as_millis(),
                diagnostics: Vec::new(),
            };
            report.emit(human);
            ExitCode::from(EXIT_FEASIBLE)
        }
        BfsResult::Infeasible => {
            let report = RunReport {
                verdict: "infeasible",
                method: "brute".into(),
                sequence_length: None,
                elapsed_ms: started.elapsed().as_millis(),
                diagnostics: Vec::new(),
            };
            report.emit(human);
            ExitCode::from(EXIT_INFEASIBLE)
        }
        BfsResult::BudgetExceeded => {
            let report = RunReport {
                verdict: "unknown-budget",
                method: "brute".into(),
                sequence_length: None,
                elapsed_ms: started.elapsed().as_millis(),
                diagnostics: vec![format!(
                    "state budget {} exhausted before an answer",
                    budget.max_states
                )],
            };
            report.emit(human);
            ExitCode::from(EXIT_BUDGET)
        }
    }
}

fn cmd_feasible(args: &FeasibleArgs, human: bool) -> ExitCode {
    let started = Instant::now();
    let instance = match read_instance(&args.instance) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_PARSE, &e),
    };
    let FeasibleMethod::Pow2 = args.method;
    match pow2_feasible(&instance) {
        Ok(verdict) => {
            let (feasible, ell, slack) = match verdict {
                Pow2Feasibility::Feasible {
                    largest_unsettled,
                    total_slack,
                } => (true, largest_unsettled, total_slack),
                Pow2Feasibility::Infeasible {
                    largest_unsettled,
                    total_slack,
                } => (false, Some(largest_unsettled), total_slack),
            };
            let report = RunReport {
                verdict: if feasible { "feasible" } else { "infeasible" },
                method: "pow2-feasible".into(),
                sequence_length: None,
                elapsed_ms: started.elapsed().as_millis(),
                diagnostics: vec![
                    format!(
                        "largest unsettled size: {}",
                        ell.map_or("none".into(), |v| v.to_string())
                    ),
                    format!("total slack: {slack}"),
                ],
            };
            report.emit(human);
            ExitCode::from(if feasible { EXIT_FEASIBLE } else { EXIT_INFEASIBLE })
        }
        Err(e) => fail(EXIT_REFUSED, &e.to_string()),
    }
}

fn cmd_gen_hard(args: &GenHardArgs, human: bool) -> ExitCode {
    let rbp = match RestrictedBpInstance::new(args.sizes.clone(), args.m, args.alpha) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_PARSE, &e.to_string()),
    };
    let instance = match reduce_rbp_to_repacking(&rbp) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_PARSE, &e.to_string()),
    };
    let instance_json = instance.to_json();
    match &args.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &instance_json) {
                return fail(EXIT_PARSE, &format!("{}: {e}", path.display()));
            }
        }
        None => {
            if human {
                println!("capacity {}", instance.capacity());
                println!("source   {:?}", instance.source().to_items());
                println!("target   {:?}", instance.target().to_items());
            } else {
                println!(
                    "{}",
                    serde_json::to_string(
                        &serde_json::from_str::<serde_json::Value>(&instance_json).unwrap()
                    )
                    .unwrap()
                );
            }
        }
    }
    if !args.with_witness {
        return ExitCode::from(EXIT_FEASIBLE);
    }
    match bp_brute_force(&rbp.as_bin_packing()) {
        Ok(Some(cert)) => {
            let seq = match witness_sequence(&rbp, &cert) {
                Ok(s) => s,
                Err(e) => return fail(EXIT_PARSE, &e.to_string()),
            };
            if let Err(e) = emit_verified_sequence(&instance, &seq, args.witness_out.as_ref()) {
                return fail(EXIT_PARSE, &e);
            }
            if args.witness_out.is_none() {
                if human {
                    println!("witness  {} moves", seq.len());
                } else {
                    println!(
                        "{}",
                        serde_json::to_string(
                            &serde_json::from_str::<serde_json::Value>(&seq.to_json()).unwrap()
                        )
                        .unwrap()
                    );
                }
            }
            ExitCode::from(EXIT_FEASIBLE)
        }
        Ok(None) => {
            eprintln!("no certificate: the restricted instance is a no-instance");
            if !human && args.witness_out.is_none() {
                println!("null");
            }
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(e) => fail(EXIT_BUDGET, &e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve(args) => cmd_solve(args, cli.human),
        Command::Verify(args) => cmd_verify(args, cli.human),
        Command::Decide(args) => cmd_decide(args, cli.human),
        Command::Brute(args) => cmd_brute(args, cli.human),
        Command::Feasible(args) => cmd_feasible(args, cli.human),
        Command::GenHard(args) => cmd_gen_hard(args, cli.human),
    }
}
