use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use yat_cli::config::{ExperimentConfig, ExperimentKind};
use yat_cli::error::CliError;
use yat_cli::{experiments, record};

/// Kernel experiment harness: each subcommand runs one experiment and
/// writes `record.json` (plus `table.csv` where applicable) under the
/// output directory.
#[derive(Parser)]
#[command(name = "yat-cli", version, about)]
struct Cli {
    /// Base RNG seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config file; default runs/<experiment>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 1 forces fully sequential execution. Results are
    /// bitwise reproducible for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON config file with {experiment, parameters, seed, output_path}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Parameter overrides as key=value (value parsed as JSON).
    #[arg(short = 'P', long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train IMQ expansions against one biased atom and measure far-tail error.
    TailBench(CommonArgs),
    /// Coefficient-of-variation scaling across input dimension.
    CvBench(CommonArgs),
    /// Funk-Hecke spectrum and decay-rate fit on the sphere.
    Spectrum(CommonArgs),
    /// Exact bias finite-difference identity sweep.
    IdentitySuite(CommonArgs),
    /// PSD / Loewner / channel / eigenvalue-domination Gram suite.
    PsdSuite(CommonArgs),
    /// MMD two-sample test calibration with a permutation threshold.
    MmdTest(CommonArgs),
    /// Certified-radius soundness under random perturbations.
    Certify(CommonArgs),
    /// Finite-width tangent-kernel convergence diagnostics.
    NtkConvergence(CommonArgs),
    /// Gram matrix and closed-form norm of a stored expansion.
    GramReport(CommonArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::TailBench(_) => ExperimentKind::TailBench,
            Command::CvBench(_) => ExperimentKind::CvBench,
            Command::Spectrum(_) => ExperimentKind::Spectrum,
            Command::IdentitySuite(_) => ExperimentKind::IdentitySuite,
            Command::PsdSuite(_) => ExperimentKind::PsdSuite,
            Command::MmdTest(_) => ExperimentKind::MmdTest,
            Command::Certify(_) => ExperimentKind::Certify,
            Command::NtkConvergence(_) => ExperimentKind::NtkConvergence,
            Command::GramReport(_) => ExperimentKind::GramReport,
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::TailBench(c)
            | Command::CvBench(c)
            | Command::Spectrum(c)
            | Command::IdentitySuite(c)
            | Command::PsdSuite(c)
            | Command::MmdTest(c)
            | Command::Certify(c)
            | Command::NtkConvergence(c)
            | Command::GramReport(c) => c,
        }
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let kind = cli.command.kind();
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config '{}': {e}", path.display()))
            })?;
            let cfg = ExperimentConfig::from_json(&text)?;
            if cfg.experiment != kind {
                return Err(CliError::Config(format!(
                    "config file is for experiment '{}' but the subcommand selects '{}'",
                    cfg.experiment,
                    kind.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(kind),
    };
    for spec in &cli.command.common().params {
        cfg.set_override(spec)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_path = Some(out.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))?;
    }
    let cfg = build_config(cli)?;
    let (rec, csv) = experiments::run(&cfg)?;
    let out_dir = cfg
        .output_path
        .clone()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.experiment.name()));
    record::write_outputs(&out_dir, &rec, csv.as_deref())?;
    print!("{}", rec.human_table());
    println!("wrote {}", out_dir.join("record.json").display());
    Ok(match rec.pass {
        Some(false) => 1,
        _ => 0,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

// Keep the experiment name parser in sync with the subcommands.
#[allow(dead_code)]
fn _assert_kinds_parse() {
    for kind in ExperimentKind::all() {
        let _ = ExperimentKind::from_str(kind.name());
    }
}
