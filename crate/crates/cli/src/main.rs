use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use herdsim::scenario::{presets, write_outputs, ConfigError, ScenarioConfig, ScenarioError};
use herdsim::sim::Engine;
use herdsim::{sig6, PayoffSpec, SignalStructure};

mod verify;

/// Simulates sequential social learning among communities that value
/// conformity.
#[derive(Debug, Parser)]
#[command(name = "herdsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write curve.csv and meta.txt.
    Run(RunArgs),
    /// Print the built-in presets.
    ListPresets,
    /// Run the brute-force oracle suites against a payoff spec.
    Verify(VerifyArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Run a built-in preset instead of a file.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "herdsim-out")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "replications-override", alias = "replications")]
    replications: Option<u64>,
    #[arg(long = "horizon-override", alias = "horizon")]
    horizon: Option<u32>,
    /// Worker threads; overrides HERDSIM_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Assumptions,
    Unanimity,
    RiskDominance,
    Separation,
    Delegate,
}

#[derive(Debug, clap::Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
    /// Take the payoff and signal from this scenario file instead of the
    /// defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Largest community size for the risk-dominance enumeration.
    #[arg(long, default_value_t = 6)]
    max_q: u32,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, ScenarioError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("HERDSIM_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ScenarioError::Runtime(format!("HERDSIM_THREADS must be a positive integer, got `{v}`"))),
        _ => Ok(None),
    }
}

fn run(args: RunArgs) -> Result<(), ScenarioError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(name)) => ScenarioConfig::preset(name)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    if let Some(s) = args.seed {
        cfg.set_seed(s);
    }
    if let Some(r) = args.replications {
        cfg.set_replications(r);
    }
    if let Some(t) = args.horizon {
        cfg.set_horizon(t);
    }
    let engine = Engine::new(cfg.build()?)?;
    let curve = match threads(args.threads)? {
        Some(n) => engine.estimate_curve_threads(n)?,
        None => engine.estimate_curve(),
    };
    write_outputs(&args.out_dir, &engine, &curve, cfg.preset.as_deref())
        .map_err(|e| ScenarioError::Runtime(format!("{}: {e}", args.out_dir.display())))?;
    let last = curve.terminal();
    let (wrong, _, _) = curve.wrong_herd_frequency();
    println!(
        "t={} reps={} p_correct={} [{}, {}] p_truthtell_given_obs={} herd_frequency={} wrong_herd_frequency={}",
        last.t,
        last.reps,
        sig6(last.p_correct),
        sig6(last.ci_low),
        sig6(last.ci_high),
        sig6(last.p_truthtell_given_obs),
        sig6(last.herd_frequency),
        sig6(wrong)
    );
    println!("wrote {}", args.out_dir.display());
    Ok(())
}

fn verify_inputs(config: Option<&Path>) -> Result<(PayoffSpec, SignalStructure), ScenarioError> {
    match config {
        None => Ok((PayoffSpec::default_coordination(), SignalStructure::linear_symmetric())),
        Some(path) => {
            let spec = ScenarioConfig::load(path)?.build()?;
            Ok((spec.payoff, spec.signal))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::ListPresets => {
            print!("{}", presets::table());
            Ok(())
        }
        Command::Verify(args) => match verify_inputs(args.config.as_deref()) {
            Ok((payoff, signal)) => {
                let failures = verify::run(args.suite, &payoff, &signal, args.max_q);
                return if failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(4) };
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("herdsim: {e}");
            if let ScenarioError::Config(ConfigError::Parse { .. }) = e {
                eprintln!("herdsim: see `herdsim list-presets` for complete examples");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
