//! Command-line front end: run, validate, or cost out a scenario config.
//!
//! Exit codes: `0` on success, `2` for configuration problems (malformed
//! TOML, failed validation, impossible option combinations), `3` for
//! runtime failures (I/O, numerical breakdown).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bubblechain::compile::{compile_trotter_circuit, qubit_embedding_estimate, CompileOptions};
use bubblechain::config::{CompileConfig, ScenarioConfig};
use bubblechain::evolve::TrotterPlan;
use bubblechain::model::PhysicalSubspace;
use bubblechain::{Error, Result};

#[derive(Parser)]
#[command(
    name = "bubblechain",
    version,
    about = "Flux-string dynamics on a plaquette ladder: qudit simulation and gate compilation"
)]
struct Cli {
    /// Worker threads for parameter sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write its output files.
    Run {
        /// TOML scenario description.
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate {
        /// TOML scenario description.
        config: PathBuf,
    },
    /// Print the native-gate budget of the configured model and duration.
    Gatecount {
        /// TOML scenario description (any scenario; `[compile]` optional).
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Validate { config } => cmd_validate(&config),
        Command::Gatecount { config } => cmd_gatecount(&config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Configuration mistakes exit 2, runtime failures 3.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigError(_)
        | Error::UnsupportedOption(_)
        | Error::Unsupported(_)
        | Error::TooLarge { .. }
        | Error::InvalidBasisState { .. }
        | Error::InvalidState(_)
        | Error::InvalidPlan(_)
        | Error::InvalidArgument(_)
        | Error::MappingUnavailable(_) => 2,
        _ => 3,
    }
}

fn cmd_run(path: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut config = ScenarioConfig::from_path(path)?;
    if let Some(dir) = out {
        config.output.dir = dir;
    }
    let outcome = bubblechain::scenario::run(&config)?;
    println!("{}", outcome.summary);
    for file in &outcome.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<()> {
    let config = ScenarioConfig::from_path(path)?;
    let m = &config.model;
    println!(
        "ok: {} on {} plaquettes ({:?} sector, dimension {}), output prefix '{}'",
        config.scenario.name(),
        m.n_plaquettes,
        m.sector,
        m.register()?.dim(),
        config.prefix(),
    );
    Ok(())
}

fn cmd_gatecount(path: &Path) -> Result<()> {
    let config = ScenarioConfig::from_path(path)?;
    let params = &config.model;
    let cc = config.compile.clone().unwrap_or(CompileConfig {
        t_max: config.evolution.t_max,
        t_step: config.evolution.t_max,
        n_steps: config.evolution.n_steps,
        pair_form: config.evolution.pair_form,
        max_angle: std::f64::consts::FRAC_PI_2,
        respect_physicality: true,
        qubit_estimate: true,
    });
    cc.validate()?;
    let opts = CompileOptions {
        max_angle: cc.max_angle,
        respect_physicality: cc.respect_physicality,
    };
    let phys = if cc.respect_physicality {
        Some(PhysicalSubspace::canonical(params)?)
    } else {
        None
    };
    let plan = TrotterPlan {
        t_total: cc.t_max,
        n_steps: cc.n_steps,
        pair_form: cc.pair_form,
    };
    let seq = compile_trotter_circuit(params, &plan, phys.as_ref(), &opts)?;
    let report = seq.count_report()?;

    println!(
        "circuit for t = {} ({} symmetric steps, {:?} pair form):",
        cc.t_max, cc.n_steps, cc.pair_form
    );
    println!("  local gates          {:>8}", report.local_gates);
    println!(
        "  XX gates / pulses    {:>8} / {}",
        report.xx_gates, report.xx_pulses
    );
    println!(
        "  ZZ gates / pulses    {:>8} / {}",
        report.zz_gates, report.zz_pulses
    );
    println!(
        "  entangling total     {:>8} / {}",
        report.entangling_gates, report.entangling_pulses
    );
    println!("  pulses by term family:");
    for (family, pulses) in &report.pulses_by_family {
        println!("    {family:<20} {pulses:>6}");
    }
    match qubit_embedding_estimate(params, &plan) {
        Ok(est) => {
            println!(
                "binary qubit encoding: {} qubits ({} per site), {} two-qubit gates per step, {} total ({:.1}x the pulse count)",
                est.total_qubits,
                est.qubits_per_site,
                est.per_step,
                est.total,
                est.overhead_vs(report.entangling_pulses),
            );
        }
        Err(Error::Unsupported(_)) => {
            println!("binary qubit encoding: no tabulation for this sector/size");
        }
        Err(other) => return Err(other),
    }
    Ok(())
}
