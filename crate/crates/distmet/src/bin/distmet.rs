//! Command-line driver for the distmet workbench.
//!
//! Exit codes: 0 success, 1 runtime error, 2 validation/config error,
//! 3 bound violation detected by `verify`.
//!
//! Every command takes its parameters from flags, optionally seeded from a
//! JSON config file (`--config`); explicit flags override file values.
//! `DISTMET_THREADS` caps the worker count for parallel sweeps.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use distmet::optimizer::{maximize_fw, scaling_study, MeshLayout, DEFAULT_RESTARTS};
use distmet::protocols::{
    classical_baseline, fig2_protocol, twin_fock_protocol, DEFAULT_Q_PROBE,
};
use distmet::qfi::{crb_delta_q, qfi_direct, qfi_from_moments, WeightVector};
use distmet::sweep::{
    fock_campaign, protocol_sweep, route_campaign, rows_to_csv, separable_campaign, violations,
};
use distmet::bounds::{
    fock_delta_q_bound, fock_eigenvalue_bound, fock_trace_bound, separable_bound_constants,
    separable_fw_bound, simplified_delta_q_bound,
};
use distmet::fock::{product_state, MomentSet, SingleModeState};
use distmet::network::{apply_mode_unitary, hoarding_unitary};

const EXIT_RUNTIME: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "distmet", about = "Distributed-metrology workbench for linear optical networks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an estimation protocol end to end
    Protocol {
        #[command(subcommand)]
        which: ProtocolCommand,
    },
    /// QFI matrix and F_w (both routes) for a hoarded twin-Fock instance
    Qfi(QfiArgs),
    /// Closed-form bounds for a described instance
    Bound {
        #[command(subcommand)]
        which: BoundCommand,
    },
    /// Seeded bound-verification campaign; exit 3 on any violation
    Verify(VerifyArgs),
    /// Maximize F_w over a triangular mesh
    Optimize(OptimizeArgs),
    /// Protocol scaling sweep over (d, N)
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum ProtocolCommand {
    /// Twin-Fock hoarding protocol
    TwinFock(TwinFockArgs),
    /// Three-mode single-reference-port circuit
    Fig2(Fig2Args),
    /// Classical per-node baseline
    Classical(ClassicalArgs),
}

#[derive(Args, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct TwinFockArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short = 'd', long)]
    d: Option<usize>,
    #[arg(short = 'N', long = "N", alias = "n-total")]
    n_total: Option<u32>,
    /// Comma-separated weights (default: equal, 1/d each)
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    q_probe: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct Fig2Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short = 'n', long)]
    n: Option<usize>,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    w2: Option<f64>,
    #[arg(long)]
    q_probe: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ClassicalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short = 'n', long)]
    n: Option<u32>,
    #[arg(short = 'd', long)]
    d: Option<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct QfiArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short = 'd', long)]
    d: Option<usize>,
    #[arg(short = 'N', long = "N")]
    n_total: Option<u32>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BoundCommand {
    /// Fock-input bound chain for a photon vector
    Fock(BoundFockArgs),
    /// Separable bound from per-mode Fock occupations
    Separable(BoundSeparableArgs),
}

#[derive(Args, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct BoundFockArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated photon numbers over all 2d modes
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    photons: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct BoundSeparableArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated Fock occupations per mode defining the input moments
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    photons: Option<Vec<u32>>,
    #[arg(short = 'd', long)]
    d: Option<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// fock, separable, or routes
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct OptimizeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// well_distributed or hoarded
    #[arg(long)]
    family: Option<String>,
    #[arg(short = 'd', long)]
    d: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    d_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    n_values: Option<Vec<u32>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// CLI failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: msg.into(),
        }
    }

    fn runtime(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: msg.into(),
        }
    }
}

/// Loads a JSON config file into the args type, then lets the already-parsed
/// flag values override it field by field (the caller merges).
fn load_config<T: DeserializeOwned>(path: &PathBuf) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("invalid config {}: {e}", path.display())))
}

macro_rules! merge {
    ($flags:ident, $file:ident, $($field:ident),+ $(,)?) => {
        $( if $flags.$field.is_none() { $flags.$field = $file.$field; } )+
    };
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialization cannot fail")
}

fn weights_or_equal(weights: Option<Vec<f64>>, d: usize) -> Result<WeightVector, Failure> {
    match weights {
        Some(w) => {
            if w.len() != d {
                return Err(Failure::validation(format!(
                    "expected {d} weights, got {}",
                    w.len()
                )));
            }
            WeightVector::new(w).map_err(|e| Failure::validation(e.to_string()))
        }
        None => WeightVector::new(vec![1.0 / d as f64; d])
            .map_err(|e| Failure::validation(e.to_string())),
    }
}

fn run_twin_fock(mut args: TwinFockArgs) -> Result<(), Failure> {
    if let Some(path) = args.config.clone() {
        let file: TwinFockArgs = load_config(&path)?;
        merge!(args, file, d, n_total, weights, q_probe, out);
    }
    let d = args.d.ok_or_else(|| Failure::validation("--d is required"))?;
    let n_total = args
        .n_total
        .ok_or_else(|| Failure::validation("--N is required"))?;
    if n_total == 0 || n_total % 2 != 0 {
        return Err(Failure::validation("N must be even"));
    }
    let w = weights_or_equal(args.weights, d)?;
    let q = args.q_probe.unwrap_or(DEFAULT_Q_PROBE);
    let result = twin_fock_protocol(d, n_total, &w, None, q)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    emit(args.out.as_ref(), &to_json(&result))
}

fn run_fig2(mut args: Fig2Args) -> Result<(), Failure> {
    if let Some(path) = args.config.clone() {
        let file: Fig2Args = load_config(&path)?;
        merge!(args, file, n, w1, w2, q_probe, out);
    }
    let n = args.n.ok_or_else(|| Failure::validation("--n is required"))?;
    let w1 = args.w1.unwrap_or(0.5);
    let w2 = args.w2.unwrap_or(0.5);
    let q = args.q_probe.unwrap_or(DEFAULT_Q_PROBE);
    let result =
        fig2_protocol(n, w1, w2, q).map_err(|e| Failure::validation(e.to_string()))?;
    emit(args.out.as_ref(), &to_json(&result))
}

fn run_classical(mut args: ClassicalArgs) -> Result<(), Failure> {
    if let Some(path) = args.config.clone() {
        let file: ClassicalArgs = load_config(&path)?;
        merge!(args, file, n, d, weights, out);
    }
    let n = args.n.ok_or_else(|| Failure::validation("--n is required"))?;
    let d = args.d.ok_or_else(|| Failure::validation("--d is required"))?;
    let w = weights_or_equal(args.weights, d)?;
    let delta_q = classical_baseline(n, d, &w).map_err(|e| Failure::validation(e.to_string()))?;
    #[derive(Serialize)]
    struct ClassicalResult {
        delta_q: f64,
        n_per_node: u32,
        d: usize,
        weights: Vec<f64>,
    }
    emit(
        args.out.as_ref(),
        &to_json(&ClassicalResult {
            delta_q,
            n_per_node: n,
            d,
            weights: w.as_slice().to_vec(),
        }),
    )
}

fn run_qfi(mut args: QfiArgs) -> Result<(), Failure> {
    if let Some(path) = args.config.clone() {
        let file: QfiArgs = load_config(&path)?;
        merge!(args, file, d, n_total, weights, out);
    }
    let d = args.d.ok_or_else(|| Failure::validation("--d is required"))?;
    let n_total = args
        .n_total
        .ok_or_else(|| Failure::validation("--N is required"))?;
    if n_total == 0 || n_total % 2 != 0 {
        return Err(Failure::validation("N must be even"));
    }
    let w = weights_or_equal(args.weights, d)?;
    let u = hoarding_unitary(&w).map_err(|e| Failure::runtime(e.to_string()))?;
    let dim = 2 * d;
    let mut factors = vec![SingleModeState::vacuum(); dim];
    factors[0] = SingleModeState::fock((n_total / 2) as usize);
    factors[1] = SingleModeState::fock((n_total / 2) as usize);
    let input = product_state(&factors).map_err(|e| Failure::runtime(e.to_string()))?;
    let psi_u = apply_mode_unitary(&input, &u).map_err(|e| Failure::runtime(e.to_string()))?;
    let phase_modes: Vec<usize> = (0..d).collect();
    let f = qfi_direct(&psi_u, &phase_modes).map_err(|e| Failure::runtime(e.to_string()))?;
    let moments: Vec<MomentSet> = factors.iter().map(|s| s.moments()).collect();
    let fw_moments = qfi_from_moments(&u, &moments, &phase_modes, &w)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let crb = crb_delta_q(&f, &w).map_err(|e| Failure::runtime(e.to_string()))?;
    #[derive(Serialize)]
    struct QfiOutput {
        matrix: distmet::qfi::QfiMatrixSerial,
        fw_direct: f64,
        fw_moments: f64,
        crb_delta_q: f64,
    }
    emit(
        args.out.as_ref(),
        &to_json(&QfiOutput {
            fw_direct: f.quadratic_form(&w),
            matrix: f.to_serial(),
            fw_moments,
            crb_delta_q: crb,
        }),
    )
}

fn run_bound_fock(mut args: BoundFockArgs) -> Result<(), Failure> {
    if let Some(path) = args.config.clone() {
        let file: BoundFockArgs = load_config(&path)?;
        merge!(args, file, photons, weights, out);
    }
    let n = args
        .photons
        .ok_or_else(|| Failure::validation("--photons is required"))?;
    let weights = args
        .weights
        .ok_or_else(|| Failure::validation("--weights is required"))?;
    let w = WeightVector::new(weights).map_err(|e| Failure::validation(e.to_string()))?;
    if n.len() != 2 * w.d() {
        return Err(Failure::validation(format!(
            "expected {} photon entries (2d), got {}",
            2 * w.d(),
            n.len()
        )));
    }
    let u = hoarding_unitary(&w).map_err(|e| Failure::runtime(e.to_string()))?;
    let trace = fock_trace_bound(&u, &w, &n).map_err(|e| Failure::validation(e.to_string()))?;
    let eig = fock_eigenvalue_bound(&n, &w);
    let eq1 = fock_delta_q_bound(&n, &w).map_err(|e| Failure::validation(e.to_string()))?;
    #[derive(Serialize)]
    struct FockBounds {
        trace_bound_hoarding_unitary: f64,
        eig_pairing: f64,
        eig_simple: f64,
        delta_q_floor: f64,
    }
    emit(
        args.out.as_ref(),
        &to_json(&FockBounds {
            trace_bound_hoarding_unitary: trace,
            eig_pairing: eig.pairing,
            eig_simple: eig.simple,
            delta_q_floor: eq1,
        }),
    )
}

fn run_bound_separable(mut args: BoundSeparableArgs) -> Result<(), Failure> {
    if let Some(path) = args.config.clone() {
        let file: BoundSeparableArgs = load_config(&path)?;
        merge!(args, file, photons, d, weights, out);
    }
    let n = args
        .photons
        .ok_or_else(|| Failure::validation("--photons is required"))?;
    let d = args.d.ok_or_else(|| Failure::validation("--d is required"))?;
    let w = weights_or_equal(args.weights, d)?;
    let moments: Vec<MomentSet> = n.iter().map(|&k| MomentSet::fock(k)).collect();
    let constants =
        separable_bound_constants(&moments).map_err(|e| Failure::validation(e.to_string()))?;
    let fw_bound = separable_fw_bound(&constants, d, &w);
    let dq = simplified_delta_q_bound(&moments, d).map_err(|e| Failure::validation(e.to_string()))?;
    #[derive(Serialize)]
    struct SeparableBounds {
        constants: distmet::bounds::BoundConstants,
        fw_bound: f64,
        delta_q_floor: f64,
    }
    emit(
        args.out.as_ref(),
        &to_json(&SeparableBounds {
            constants,
            fw_bound,
            delta_q_floor: dq,
        }),
    )
}

fn run_verify(mut args: VerifyArgs) -> Result<(), Failure> {
    if let Some(path) = args.config.clone() {
        let file: VerifyArgs = load_config(&path)?;
        merge!(args, file, family, instances, seed, out);
    }
    let family = args.family.unwrap_or_else(|| "fock".into());
    let instances = args.instances.unwrap_or(500);
    if instances == 0 {
        return Err(Failure::validation("--instances must be positive"));
    }
    let seed = args.seed.unwrap_or(7);
    let (csv, bad) = match family.as_str() {
        "fock" => {
            let rows = fock_campaign(instances, seed, 4)
                .map_err(|e| Failure::runtime(e.to_string()))?;
            (
                rows_to_csv(&rows).map_err(|e| Failure::runtime(e.to_string()))?,
                violations(&rows),
            )
        }
        "separable" => {
            let rows = separable_campaign(instances, seed, 3)
                .map_err(|e| Failure::runtime(e.to_string()))?;
            (
                rows_to_csv(&rows).map_err(|e| Failure::runtime(e.to_string()))?,
                violations(&rows),
            )
        }
        "routes" => {
            let rows = route_campaign(instances, seed, 3)
                .map_err(|e| Failure::runtime(e.to_string()))?;
            (
                rows_to_csv(&rows).map_err(|e| Failure::runtime(e.to_string()))?,
                violations(&rows),
            )
        }
        other => {
            return Err(Failure::validation(format!(
                "unknown family '{other}' (expected fock, separable, or routes)"
            )))
        }
    };
    emit(args.out.as_ref(), &csv)?;
    eprintln!("{family}: {instances} instances, {bad} violations");
    if bad > 0 {
        return Err(Failure {
            code: EXIT_VIOLATION,
            message: format!("{bad} bound violations detected"),
        });
    }
    Ok(())
}

fn run_optimize(mut args: OptimizeArgs) -> Result<(), Failure> {
    if let Some(path) = args.config.clone() {
        let file: OptimizeArgs = load_config(&path)?;
        merge!(args, file, family, d, budget, restarts, seed, out);
    }
    let family = args.family.unwrap_or_else(|| "hoarded".into());
    let budget = args.budget.unwrap_or(2000);
    let restarts = args.restarts.unwrap_or(DEFAULT_RESTARTS);
    let seed = args.seed.unwrap_or(1);
    if budget == 0 {
        return Err(Failure::validation("--budget must be positive"));
    }
    match family.as_str() {
        "well_distributed" | "hoarded" => {
            let d = args.d.ok_or_else(|| Failure::validation("--d is required"))?;
            let inputs = distmet::optimizer::family_inputs(&family, d);
            let w = weights_or_equal(None, d)?;
            let layout = MeshLayout::triangular(2 * d);
            let report = maximize_fw(&inputs, &w, &layout, budget, restarts, seed)
                .map_err(|e| Failure::runtime(e.to_string()))?;
            emit(args.out.as_ref(), &to_json(&report))
        }
        "scaling" => {
            let d_max = args.d.unwrap_or(3);
            let d_range: Vec<usize> = (1..=d_max).collect();
            let mut rows =
                scaling_study("well_distributed", &d_range, budget, restarts, seed)
                    .map_err(|e| Failure::runtime(e.to_string()))?;
            rows.extend(
                scaling_study("hoarded", &d_range, budget, restarts, seed)
                    .map_err(|e| Failure::runtime(e.to_string()))?,
            );
            let csv = rows_to_csv(&rows).map_err(|e| Failure::runtime(e.to_string()))?;
            emit(args.out.as_ref(), &csv)
        }
        other => Err(Failure::validation(format!(
            "unknown family '{other}' (expected well_distributed, hoarded, or scaling)"
        ))),
    }
}

fn run_sweep(mut args: SweepArgs) -> Result<(), Failure> {
    if let Some(path) = args.config.clone() {
        let file: SweepArgs = load_config(&path)?;
        merge!(args, file, d_values, n_values, out);
    }
    let d_values = args.d_values.unwrap_or_else(|| vec![2, 3]);
    let n_values = args.n_values.unwrap_or_else(|| vec![2, 4, 6]);
    if n_values.iter().any(|n| *n == 0 || n % 2 != 0) {
        return Err(Failure::validation("all N values must be positive and even"));
    }
    let rows = protocol_sweep(&d_values, &n_values)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let csv = rows_to_csv(&rows).map_err(|e| Failure::runtime(e.to_string()))?;
    emit(args.out.as_ref(), &csv)
}

fn configure_threads() {
    if let Ok(val) = std::env::var("DISTMET_THREADS") {
        if let Ok(n) = val.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Protocol { which } => match which {
            ProtocolCommand::TwinFock(args) => run_twin_fock(args),
            ProtocolCommand::Fig2(args) => run_fig2(args),
            ProtocolCommand::Classical(args) => run_classical(args),
        },
        Command::Qfi(args) => run_qfi(args),
        Command::Bound { which } => match which {
            BoundCommand::Fock(args) => run_bound_fock(args),
            BoundCommand::Separable(args) => run_bound_separable(args),
        },
        Command::Verify(args) => run_verify(args),
        Command::Optimize(args) => run_optimize(args),
        Command::Sweep(args) => run_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
