use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levylab::config::DEFAULTS_HELP;
use levylab::pipeline::{default_stages, parse_stages, run_pipeline, Stage};
use levylab::validate::{validate, ValidateOptions};
use levylab::{CliError, PipelineConfig};

#[derive(Parser)]
#[command(name = "levylab", version, about = "Infinitely divisible ground states: spectra and chi2 diagnostics")]
#[command(after_help = DEFAULTS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a run.json manifest to reproduce.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampler seed (overrides sampler.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated stages: density,potential,spectrum,chi2,sample.
    #[arg(long)]
    stages: Option<String>,
    /// Suppress progress messages.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// All stages; sampling only if enabled in the config.
    Pipeline(RunArgs),
    /// Density, potential and spectrum.
    Spectrum(RunArgs),
    /// Through the chi2 report.
    Chi2(RunArgs),
    /// Density and Monte Carlo sampling.
    Sample(RunArgs),
    /// Reference cross-validation suite.
    Validate {
        /// Skip the Monte Carlo checks.
        #[arg(long)]
        no_sampler: bool,
        /// Inject a same-parity entry into Q (defect-detection test hook).
        #[arg(long)]
        perturb_q: bool,
        #[arg(long, default_value_t = 20_000)]
        mc_paths: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn run(args: RunArgs, default: &[Stage]) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(dir) = args.out {
        cfg.output.dir = dir;
    }
    if let Some(seed) = args.seed {
        cfg.sampler.seed = seed;
    }
    let stages = match &args.stages {
        Some(list) => parse_stages(list)?,
        None if default.is_empty() => default_stages(&cfg),
        None => default.to_vec(),
    };
    let out = run_pipeline(&cfg, &stages, args.quiet)?;
    if !args.quiet {
        if let Some(r) = &out.chi2 {
            println!("chi2_small = {:.17e}", r.chi2_small);
            println!("chi2_large = {:.17e}  (converged: {})", r.chi2_large, r.all_converged());
        }
        println!("artifacts in {}", cfg.output.dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Pipeline(a) => run(a, &[]),
        Command::Spectrum(a) => run(a, &[Stage::Spectrum]),
        Command::Chi2(a) => run(a, &[Stage::Chi2]),
        Command::Sample(a) => run(a, &[Stage::Sample]),
        Command::Validate { no_sampler, perturb_q, mc_paths, seed, json } => {
            let report = validate(&ValidateOptions { perturb_q, sampler: !no_sampler, mc_paths, seed });
            report.print();
            let written = json.map_or(Ok(()), |path| {
                let text = serde_json::to_string_pretty(&report)?;
                std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
            });
            match written {
                Ok(()) if report.passed() => Ok(()),
                Ok(()) => return ExitCode::from(1),
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
