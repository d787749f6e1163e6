use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dgb::io::experiment::run_id;
use dgb::io::{parse_config, run, run_sweep, Experiment, RunConfig};
use dgb::Error;

#[derive(Parser)]
#[command(name = "dgb", version, about = "Damped and controlled DGB equation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the damped equation and record energy diagnostics.
    Simulate(RunArgs),
    /// Integrate and fit the exponential decay rate.
    Stabilize(RunArgs),
    /// Minimum-norm linear steering with re-simulation certificate.
    ControlLinear(RunArgs),
    /// Global-gain nonlinear steering.
    ControlNonlinear(RunArgs),
    /// Observability constant and decay-rate bounds.
    Observability(RunArgs),
    /// Eigenvalue, gap, resonance and symbol scans.
    Lemmas(RunArgs),
    /// Run several configurations in parallel, one output directory each.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value`, dotted keys, TOML values.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(path: &Path, seed: Option<u64>, overrides: &[String], experiment: Option<Experiment>) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path)?;
    let mut all = overrides.to_vec();
    if let Some(seed) = seed {
        all.push(format!("seed={seed}"));
    }
    if let Some(e) = experiment {
        all.push(format!("experiment=\"{}\"", e.name()));
    }
    parse_config(&text, &all)
}

fn execute(experiment: Experiment, args: RunArgs) -> Result<(), Error> {
    let config = load(&args.config, args.seed, &args.overrides, Some(experiment))?;
    let out = match args.out.or_else(|| config.output.clone()) {
        Some(dir) => dir,
        None => PathBuf::from("runs").join(run_id(&config)?),
    };
    let manifest = run(&config, &out)?;
    println!("{}", serde_json::to_string_pretty(&manifest.summary)?);
    println!("wrote {}", out.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let mut configs = Vec::new();
    for (i, path) in args.configs.iter().enumerate() {
        let config = load(path, args.seed, &args.overrides, None)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("config{i}"));
        configs.push((format!("{i:03}-{stem}"), config));
    }
    let mut first_error = None;
    for (name, result) in run_sweep(&configs, &args.out) {
        match result {
            Ok(m) => println!("{name}: ok ({})", m.run_id),
            Err(e) => {
                eprintln!("{name}: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => execute(Experiment::Simulate, a),
        Command::Stabilize(a) => execute(Experiment::Stabilize, a),
        Command::ControlLinear(a) => execute(Experiment::ControlLinear, a),
        Command::ControlNonlinear(a) => execute(Experiment::ControlNonlinear, a),
        Command::Observability(a) => execute(Experiment::Observability, a),
        Command::Lemmas(a) => execute(Experiment::Lemmas, a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
