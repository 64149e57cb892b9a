//! `fluxspin` command-line driver: configuration in, tables / structured
//! envelopes / plots out.
//!
//! Exit codes: 0 success, 2 configuration error, 3 partial computation
//! failure (fewer than 95% of points valid), 4 numerical degeneracy.

mod commands;
mod config;
mod plot;

use clap::{Parser, Subcommand};
use commands::CommandOutput;
use config::{RunConfig, SCHEMA_VERSION};
use fluxspin::FluxError;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(
    name = "fluxspin",
    version,
    about = "Spin-1/2 qubit under an N-state fluctuating environment: \
             exact propagation, Monte Carlo cross-checks, and decoherence sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Verb,
    /// Run configuration file (structured text).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override for randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker-pool size (default: machine parallelism). Affects wall time
    /// only, never results.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also emit vector-graphics plots.
    #[arg(long, global = true)]
    plot: bool,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Propagate one fluctuator spec and tabulate the spin trajectory.
    Simulate,
    /// Decoherence rate across the slow/fast fluctuator crossover.
    Crossover,
    /// Ensemble sweep over random excited states (decoherence + shift).
    Fig2,
    /// Compare Monte Carlo trajectory averaging against the exact solution.
    #[command(name = "mc-validate")]
    McValidate,
    /// Find the compensating field and the residual decoherence rate.
    Sweetspot,
}

impl Verb {
    fn name(self) -> &'static str {
        match self {
            Verb::Simulate => "simulate",
            Verb::Crossover => "crossover",
            Verb::Fig2 => "fig2",
            Verb::McValidate => "mc-validate",
            Verb::Sweetspot => "sweetspot",
        }
    }
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure { code: 2, message: message.into() }
    }

    fn partial(message: impl Into<String>) -> Failure {
        Failure { code: 3, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Failure {
        Failure { code: 1, message: message.into() }
    }

    fn from_compute(e: FluxError) -> Failure {
        match e {
            FluxError::NumericalDegeneracy(_) => Failure { code: 4, message: e.to_string() },
            other => Failure { code: 2, message: other.to_string() },
        }
    }
}

const DEFAULT_SEED: u64 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(fail) => {
            eprintln!("error: {}", fail.message);
            ExitCode::from(fail.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::config("--config <file> is required"))?;
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", config_path.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(Failure::config)?;

    // Resolve command-line overrides and defaults into the config so the
    // echoed copy is fully explicit.
    cfg.seed = Some(cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED));
    cfg.workers = Some(match cli.workers.or(cfg.workers) {
        Some(0) => return Err(Failure::config("workers must be >= 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    });
    let out_dir: PathBuf = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    cfg.out_dir = Some(out_dir.display().to_string());
    let want_plot = cli.plot || cfg.plot.unwrap_or(false);
    cfg.plot = Some(want_plot);
    if let Some(fc) = cfg.fig2.as_mut() {
        fc.normalize();
    }
    let seed = cfg.seed.unwrap();
    let workers = cfg.workers.unwrap();

    let started_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let t0 = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::config(format!("cannot build worker pool: {e}")))?;
    let verb = cli.command;
    let output = pool
        .install(|| dispatch(verb, &cfg, seed, want_plot))?
        ;
    let elapsed_ms = t0.elapsed().as_millis() as u64;

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", out_dir.display())))?;
    let base = verb.name();
    let csv_path = out_dir.join(format!("{base}.csv"));
    write_file(&csv_path, output.csv.as_bytes())?;
    let envelope = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "fluxspin", "version": env!("CARGO_PKG_VERSION")},
        "command": base,
        "config": serde_json::to_value(&cfg).expect("config serializable"),
        "wall_clock": {"started_unix_ms": started_unix_ms, "elapsed_ms": elapsed_ms},
        "points_total": output.points_total,
        "points_valid": output.points_valid,
        "payload": output.payload,
    });
    let json_path = out_dir.join(format!("{base}.json"));
    let mut envelope_text =
        serde_json::to_string_pretty(&envelope).expect("envelope serializable");
    envelope_text.push('\n');
    write_file(&json_path, envelope_text.as_bytes())?;
    for (name, content) in &output.plots {
        write_file(&out_dir.join(name), content.as_bytes())?;
    }
    println!(
        "wrote {} and {} ({}/{} points valid)",
        csv_path.display(),
        json_path.display(),
        output.points_valid,
        output.points_total
    );
    if below_validity_floor(output.points_valid, output.points_total) {
        return Err(Failure::partial(format!(
            "only {}/{} points valid",
            output.points_valid, output.points_total
        )));
    }
    Ok(())
}

/// Partial-failure floor: fewer than 95% of the requested points computed.
fn below_validity_floor(valid: usize, total: usize) -> bool {
    (valid as f64) < 0.95 * total as f64
}

fn dispatch(
    verb: Verb,
    cfg: &RunConfig,
    seed: u64,
    want_plot: bool,
) -> Result<CommandOutput, Failure> {
    let missing = |section: &str| {
        Failure::config(format!(
            "config is missing the [{section}] section required by `{}`",
            verb.name()
        ))
    };
    let out = match verb {
        Verb::Simulate => {
            let sc = cfg.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
            commands::cmd_simulate(sc, want_plot)
        }
        Verb::Crossover => {
            let cc = cfg.crossover.as_ref().ok_or_else(|| missing("crossover"))?;
            commands::cmd_crossover(cc, want_plot)
        }
        Verb::Fig2 => {
            let fc = cfg.fig2.as_ref().ok_or_else(|| missing("fig2"))?;
            commands::cmd_fig2(fc, seed, want_plot)
        }
        Verb::McValidate => {
            let mc = cfg.mc_validate.as_ref().ok_or_else(|| missing("mc_validate"))?;
            commands::cmd_mc_validate(mc, seed, want_plot)
        }
        Verb::Sweetspot => {
            let sw = cfg.sweetspot.as_ref().ok_or_else(|| missing("sweetspot"))?;
            commands::cmd_sweetspot(sw)
        }
    };
    out.map_err(Failure::from_compute)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}
