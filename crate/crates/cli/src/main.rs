//! Command-line front end for the dual barrier solver: emits instance
//! files, runs audited solves with exact or noisy oracles, replays traces
//! offline, and evaluates subroutine cost reports. All outputs are UTF-8
//! JSON; exit codes identify the terminal status for CI.
//!
//! Exit codes: 0 converged / verified, 1 iteration cap, 2 condition
//! violation or trace inconsistency, 3 numerical failure, 4 start point
//! off the path, 64 malformed input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sdp_core::instance::{
    gen_random_wellcond, initial_eta, load_instance, potential, reference_coupled3,
    reference_diagonal, save_instance, DualState,
};
use sdp_core::ipm::{check_conditions, eta_growth, slack_invariant, IterationRecord};
use sdp_core::linalg::condition_number;
use sdp_core::{
    estimate, solve, Error, ExactOracle, NoiseModel, NoisyOracle, Oracle, SdpInstance,
    SolveResult, SolveStatus, SolverParams,
};

/// Relative tolerance for trace replay comparisons.
const REPLAY_RTOL: f64 = 1e-9;
/// Absolute floor under the replay comparisons.
const REPLAY_ATOL: f64 = 1e-12;

/// Prints to stdout, swallowing broken-pipe errors from downstream tools.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "sdp",
    about = "Dual barrier SDP solver with audited robust Newton steps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file with a strictly feasible start point.
    Generate(GenerateArgs),
    /// Run the barrier method on an instance file.
    Solve(SolveArgs),
    /// Evaluate the subroutine cost report at a point.
    Estimate(EstimateArgs),
    /// Replay a solve trace and re-check every recorded quantity.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CaseKind {
    /// Diagonal reference family, fully isotropic.
    #[value(name = "1")]
    One,
    /// Coupled 3x3 reference with closed-form path.
    #[value(name = "2")]
    Two,
    /// Seeded random instance with controlled conditioning.
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OracleKind {
    Exact,
    Noisy,
}

#[derive(Args)]
struct GenerateArgs {
    /// Instance family to emit.
    #[arg(long, value_enum)]
    case: CaseKind,
    /// Matrix dimension (random case only).
    #[arg(long)]
    n: Option<usize>,
    /// Number of constraints (case 1 and random).
    #[arg(long)]
    m: Option<usize>,
    /// Target start-slack condition number (random case only).
    #[arg(long)]
    kappa: Option<f64>,
    /// Seed (random case only).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination instance file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file with a start point.
    #[arg(long)]
    instance: PathBuf,
    /// Run configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Oracle choice, overriding the config.
    #[arg(long, value_enum)]
    oracle: Option<OracleKind>,
    /// Destination for the result JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Destination for the iteration trace, one JSON object per line.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Noise seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the summary line.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Instance file.
    #[arg(long)]
    instance: PathBuf,
    /// Evaluation point: "init" or "file:STATE.json".
    #[arg(long, default_value = "init")]
    at: String,
    /// Run configuration JSON supplying noise levels and target accuracy.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Destination for the report JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Instance file the trace was produced from.
    #[arg(long)]
    instance: PathBuf,
    /// Trace file to replay.
    #[arg(long)]
    trace: PathBuf,
    /// Run configuration the solve used; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Only report failures.
    #[arg(long)]
    quiet: bool,
}

/// Solver and oracle settings for one run; every field has a default.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    params: SolverParams,
    noise: NoiseModel,
    /// Oracle used when the command line does not choose one.
    oracle: Option<OracleKind>,
}

/// Point payload for `estimate --at file:...`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatePoint {
    y: Vec<f64>,
    eta: f64,
}

struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = std::result::Result<T, Failure>;

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn input_err(e: Error) -> Failure {
    fail(64, e.to_string())
}

fn run_err(e: Error) -> Failure {
    let code = match e {
        Error::InitNotOnPath { .. } => 4,
        Error::Validation { .. } => 64,
        _ => 3,
    };
    fail(code, e.to_string())
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail(64, format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| fail(64, format!("{what} {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T, what: &str) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| fail(64, format!("{what}: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| fail(64, format!("{what} {}: {e}", path.display())))
}

fn load_config(path: &Option<PathBuf>) -> CliResult<RunConfig> {
    let config = match path {
        Some(p) => read_json::<RunConfig>(p, "config")?,
        None => RunConfig::default(),
    };
    config.params.validate().map_err(input_err)?;
    config.noise.validate().map_err(input_err)?;
    Ok(config)
}

fn build_oracle(kind: OracleKind, noise: &NoiseModel) -> CliResult<Box<dyn Oracle>> {
    match kind {
        OracleKind::Exact => Ok(Box::new(ExactOracle::new(noise.c0))),
        OracleKind::Noisy => NoisyOracle::new(noise.clone())
            .map(|o| Box::new(o) as Box<dyn Oracle>)
            .map_err(input_err),
    }
}

fn cmd_generate(args: GenerateArgs) -> CliResult<u8> {
    let reject = |flag: &str| fail(64, format!("--{flag} does not apply to this case"));
    let (inst, y0) = match args.case {
        CaseKind::One => {
            if args.n.is_some() {
                return Err(reject("n"));
            }
            if args.kappa.is_some() {
                return Err(reject("kappa"));
            }
            let m = args.m.unwrap_or(3);
            let (inst, path) = reference_diagonal(m);
            let y0 = path.y_at(initial_eta(inst.n()));
            (inst, y0)
        }
        CaseKind::Two => {
            if args.n.is_some() || args.m.is_some() || args.kappa.is_some() {
                return Err(fail(64, "case 2 takes no dimension or kappa flags"));
            }
            let (inst, path) = reference_coupled3();
            let y0 = path.y_at(initial_eta(inst.n()));
            (inst, y0)
        }
        CaseKind::Random => {
            let n = args
                .n
                .ok_or_else(|| fail(64, "--n is required for the random case"))?;
            let m = args
                .m
                .ok_or_else(|| fail(64, "--m is required for the random case"))?;
            let kappa = args.kappa.unwrap_or(10.0);
            gen_random_wellcond(n, m, kappa, args.seed).map_err(input_err)?
        }
    };
    save_instance(&args.out, &inst, Some(&y0)).map_err(input_err)?;
    say!(
        "wrote instance n={} m={} to {}",
        inst.n(),
        inst.m(),
        args.out.display()
    );
    Ok(0)
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::MaxIters => 1,
        SolveStatus::ConditionViolated => 2,
        SolveStatus::NumericalFailure => 3,
    }
}

fn write_trace(path: &Path, records: &[IterationRecord]) -> CliResult<()> {
    let mut text = String::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| fail(64, format!("trace record: {e}")))?;
        text.push_str(&line);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| fail(64, format!("trace {}: {e}", path.display())))
}

fn cmd_solve(args: SolveArgs) -> CliResult<u8> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.noise.seed = seed;
    }
    let kind = args.oracle.or(config.oracle).unwrap_or(OracleKind::Exact);
    let (inst, y0) = load_instance(&args.instance).map_err(input_err)?;
    let y0 = y0.ok_or_else(|| {
        fail(
            64,
            format!("instance {} has no start point", args.instance.display()),
        )
    })?;
    let mut oracle = build_oracle(kind, &config.noise)?;
    let result: SolveResult =
        solve(&inst, &y0, &config.params, oracle.as_mut()).map_err(run_err)?;
    if let Some(path) = &args.trace {
        write_trace(path, &result.trace)?;
    }
    if let Some(path) = &args.out {
        write_json(path, &result, "result")?;
    }
    if !args.quiet {
        say!(
            "status={:?} iterations={}/{} eta={:.6e} objective={:.6e} gap_bound={:.6e} potential={:.6e}",
            result.status,
            result.iterations,
            result.planned_iterations,
            result.eta_final,
            result.objective,
            result.gap_bound,
            result.potential_final,
        );
        if let Some(reason) = &result.failure {
            say!(
                "failure at iteration {}: {reason}",
                result
                    .failed_iteration
                    .map(|i| i.to_string())
                    .unwrap_or_else(|| "?".into())
            );
        }
    }
    Ok(status_code(result.status))
}

fn cmd_estimate(args: EstimateArgs) -> CliResult<u8> {
    let config = load_config(&args.config)?;
    let (inst, y0) = load_instance(&args.instance).map_err(input_err)?;
    let (y, eta) = if args.at == "init" {
        let y = y0.ok_or_else(|| {
            fail(
                64,
                format!("instance {} has no start point", args.instance.display()),
            )
        })?;
        let eta = initial_eta(inst.n());
        (y, eta)
    } else if let Some(path) = args.at.strip_prefix("file:") {
        let state: StatePoint = read_json(Path::new(path), "state")?;
        (state.y, state.eta)
    } else {
        return Err(fail(
            64,
            format!("--at must be \"init\" or \"file:PATH\", got {:?}", args.at),
        ));
    };
    let report =
        estimate(&inst, &y, eta, &config.noise, config.params.eps).map_err(run_err)?;
    match &args.out {
        Some(path) => write_json(path, &report, "report")?,
        None => {
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| fail(64, format!("report: {e}")))?;
            say!("{text}");
        }
    }
    Ok(0)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REPLAY_RTOL * a.abs().max(b.abs()) + REPLAY_ATOL
}

fn vec_close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y))
}

/// One record's replay outcome: consistency errors are fatal anywhere;
/// an invariant violation is tolerated only as documentation of a final
/// rejected step.
struct ReplayOutcome {
    violation: Option<String>,
}

fn replay_record(
    inst: &SdpInstance,
    params: &SolverParams,
    c0: f64,
    rec: &IterationRecord,
    prev: Option<&IterationRecord>,
) -> std::result::Result<ReplayOutcome, String> {
    if let Some(prev) = prev {
        if rec.index != prev.index + 1 {
            return Err(format!(
                "index {} does not follow {}",
                rec.index, prev.index
            ));
        }
        if !close(rec.eta, prev.eta_new) {
            return Err(format!(
                "eta {:.12e} does not continue previous eta_new {:.12e}",
                rec.eta, prev.eta_new
            ));
        }
        let expected: Vec<f64> = prev
            .y
            .iter()
            .zip(&prev.delta_tilde)
            .map(|(a, b)| a + b)
            .collect();
        if !vec_close(&rec.y, &expected) {
            return Err("y does not continue previous y + delta".into());
        }
    }
    let growth = eta_growth(inst.n(), params.eps_newton);
    if !close(rec.eta_new, rec.eta * growth) {
        return Err(format!(
            "eta_new {:.12e} is not eta times the growth factor {:.12e}",
            rec.eta_new,
            rec.eta * growth
        ));
    }

    let pb = potential(inst, &rec.y, rec.eta).map_err(|e| e.to_string())?;
    if !close(pb, rec.potential_before) {
        return Err(format!(
            "potential_before recomputes to {pb:.12e}, recorded {:.12e}",
            rec.potential_before
        ));
    }

    let h_tilde =
        sdp_core::instance::hessian(inst, &rec.slack_inv_tilde).map_err(|e| e.to_string())?;
    let recomputed = check_conditions(
        inst,
        &rec.y,
        rec.eta_new,
        &rec.slack_inv_tilde,
        &h_tilde,
        &rec.g_tilde,
        &rec.delta_tilde,
        c0,
    )
    .map_err(|e| e.to_string())?;
    if let Some(recorded) = &rec.condition_report {
        let pairs = [
            (
                "slack_inverse_factor",
                &recorded.slack_inverse_factor,
                &recomputed.slack_inverse_factor,
            ),
            (
                "hessian_factor",
                &recorded.hessian_factor,
                &recomputed.hessian_factor,
            ),
            (
                "gradient_error",
                &recorded.gradient_error,
                &recomputed.gradient_error,
            ),
            (
                "direction_error",
                &recorded.direction_error,
                &recomputed.direction_error,
            ),
        ];
        for (name, rec_check, new_check) in pairs {
            if !close(rec_check.measured, new_check.measured)
                || !close(rec_check.bound, new_check.bound)
                || rec_check.pass != new_check.pass
            {
                return Err(format!(
                    "{name} recomputes to {:.12e} (bound {:.12e}, pass {}), recorded {:.12e} (bound {:.12e}, pass {})",
                    new_check.measured,
                    new_check.bound,
                    new_check.pass,
                    rec_check.measured,
                    rec_check.bound,
                    rec_check.pass
                ));
            }
        }
        if recorded.passed != recomputed.passed {
            return Err("condition_report pass flag disagrees with recomputation".into());
        }
    }

    let s_inv = sdp_core::linalg::psd_power(&inst.slack(&rec.y), -1.0)
        .map_err(|e| e.to_string())?;
    let h_exact = sdp_core::instance::hessian(inst, &s_inv).map_err(|e| e.to_string())?;
    let kappa_h = condition_number(&h_exact);
    let kappa_a = condition_number(inst.flat());
    if !close(rec.kappa_h, kappa_h) || !close(rec.kappa_a, kappa_a) {
        return Err(format!(
            "condition numbers recompute to ({kappa_h:.6e}, {kappa_a:.6e}), recorded ({:.6e}, {:.6e})",
            rec.kappa_h, rec.kappa_a
        ));
    }

    let stepped = rec.potential_after.is_some() || rec.slack_invariant_value.is_some();
    let mut violation = None;
    if stepped {
        let y_next: Vec<f64> = rec
            .y
            .iter()
            .zip(&rec.delta_tilde)
            .map(|(a, b)| a + b)
            .collect();
        let next = DualState::new(inst, y_next.clone(), rec.eta_new).map_err(|e| e.to_string())?;
        if !next.strictly_feasible {
            return Err("post-step slack is not strictly positive definite".into());
        }
        let movement =
            slack_invariant(&inst.slack(&rec.y), &next.slack).map_err(|e| e.to_string())?;
        if let Some(recorded) = rec.slack_invariant_value {
            if !close(movement, recorded) {
                return Err(format!(
                    "slack invariant recomputes to {movement:.12e}, recorded {recorded:.12e}"
                ));
            }
        }
        if let Some(recorded) = rec.potential_after {
            let pa = potential(inst, &y_next, rec.eta_new).map_err(|e| e.to_string())?;
            if !close(pa, recorded) {
                return Err(format!(
                    "potential_after recomputes to {pa:.12e}, recorded {recorded:.12e}"
                ));
            }
            if pa > params.eps_newton + sdp_core::ipm::POTENTIAL_TOLERANCE {
                violation = Some(format!("post-step potential {pa:.6e} above budget"));
            }
        }
        let expected_obj = inst.objective(&y_next);
        if !close(rec.objective, expected_obj) {
            return Err(format!(
                "objective recomputes to {expected_obj:.12e}, recorded {:.12e}",
                rec.objective
            ));
        }
        let movement_bound = sdp_core::ipm::SLACK_MOVEMENT_FACTOR * params.eps_newton;
        if movement > movement_bound {
            violation = Some(format!(
                "slack movement {movement:.6e} above bound {movement_bound:.6e}"
            ));
        }
    } else {
        let expected_obj = inst.objective(&rec.y);
        if !close(rec.objective, expected_obj) {
            return Err(format!(
                "objective recomputes to {expected_obj:.12e}, recorded {:.12e}",
                rec.objective
            ));
        }
    }
    if pb > params.eps_newton + sdp_core::ipm::POTENTIAL_TOLERANCE {
        violation = Some(format!("entry potential {pb:.6e} above budget"));
    }
    if !recomputed.passed {
        let name = recomputed.first_failed.clone().unwrap_or_default();
        violation = Some(format!("condition audit fails on {name}"));
    }
    Ok(ReplayOutcome { violation })
}

fn cmd_verify(args: VerifyArgs) -> CliResult<u8> {
    let config = load_config(&args.config)?;
    let (inst, _) = load_instance(&args.instance).map_err(input_err)?;
    let text = fs::read_to_string(&args.trace)
        .map_err(|e| fail(64, format!("trace {}: {e}", args.trace.display())))?;
    let mut records: Vec<IterationRecord> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line)
            .map_err(|e| fail(64, format!("trace line {}: {e}", ln + 1)))?;
        records.push(rec);
    }
    if records.is_empty() {
        say!("verify: 0 records, nothing to check");
        return Ok(0);
    }

    let mut final_note = None;
    for (i, rec) in records.iter().enumerate() {
        let prev = if i > 0 { Some(&records[i - 1]) } else { None };
        match replay_record(&inst, &config.params, config.noise.c0, rec, prev) {
            Err(reason) => {
                say!("verify: record {i} (iteration {}) failed: {reason}", rec.index);
                return Ok(2);
            }
            Ok(outcome) => {
                if let Some(violation) = outcome.violation {
                    if i + 1 != records.len() {
                        say!(
                            "verify: record {i} (iteration {}) failed: {violation} on a non-final record",
                            rec.index
                        );
                        return Ok(2);
                    }
                    final_note = Some(violation);
                }
                if !args.quiet && (i + 1) % 500 == 0 {
                    say!("verify: {} of {} records checked", i + 1, records.len());
                }
            }
        }
    }
    match final_note {
        Some(note) => say!(
            "verify: {} records consistent; final record documents a rejected step ({note})",
            records.len()
        ),
        None => say!("verify: {} records consistent, all checks passed", records.len()),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
