use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tdalign_cli::{
    cmd_ablate, cmd_report, cmd_sweep_diff, cmd_sweep_noise, cmd_synth, cmd_train, cmd_verify_theory, CliError,
    ExperimentConfig, Progress, VerifyConfig,
};

#[derive(Parser)]
#[command(
    name = "tdalign",
    version,
    about = "Train and compare forecasters with temporal-difference alignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Comma-separated seeds overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// No progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration over all seeds.
    Train(Common),
    /// Compare the five loss settings on identical data and seeds.
    Ablate(Common),
    /// Sweep difference order and interval.
    SweepDiff(Common),
    /// Sweep the variance of noise added to the training split.
    SweepNoise(Common),
    /// Check the closed-form identities on random instances.
    VerifyTheory {
        #[arg(long, default_value = "theory")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo trials per instance.
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
        #[arg(long)]
        quiet: bool,
    },
    /// Merge training reports into a tidy CSV.
    Report {
        /// Run directories (a seed directory or a fingerprint directory).
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// Also write one SVG chart per metric.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        quiet: bool,
    },
    /// Write the configured dataset as CSV.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::from_path(&common.config)?;
    if let Some(seeds) = &common.seeds {
        config.seeds = seeds.clone();
        config.validate()?;
    }
    Ok(config)
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn table_path(out: &Path, kind: &str) -> String {
    out.join(format!("{kind}.csv")).display().to_string()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => {
            let config = load(&c)?;
            let s = cmd_train(&config, &c.out, Progress { quiet: c.quiet })?;
            say(
                c.quiet,
                format!(
                    "{}: mse {:.6}±{:.6} mae {:.6}±{:.6} mse_d {:.6} mae_d {:.6} rho {:.6}",
                    s.fingerprint, s.mean.mse, s.std.mse, s.mean.mae, s.std.mae, s.mean.mse_d, s.mean.mae_d, s.mean.rho
                ),
            );
        }
        Command::Ablate(c) => {
            let config = load(&c)?;
            cmd_ablate(&config, &c.out, Progress { quiet: c.quiet })?;
            say(c.quiet, table_path(&c.out, "ablation"));
        }
        Command::SweepDiff(c) => {
            let config = load(&c)?;
            cmd_sweep_diff(&config, &c.out, Progress { quiet: c.quiet })?;
            say(c.quiet, table_path(&c.out, "sweep_diff"));
        }
        Command::SweepNoise(c) => {
            let config = load(&c)?;
            cmd_sweep_noise(&config, &c.out, Progress { quiet: c.quiet })?;
            say(c.quiet, table_path(&c.out, "sweep_noise"));
        }
        Command::VerifyTheory {
            out,
            seed,
            trials,
            quiet,
        } => {
            let config = VerifyConfig {
                seed,
                mc_trials: trials,
                ..Default::default()
            };
            let result = cmd_verify_theory(&config, &out);
            if let Ok(report) = &result {
                for c in &report.checks {
                    say(
                        quiet,
                        format!(
                            "{:<26} max error {:e} (tolerance {:e})",
                            c.name, c.max_error, c.tolerance
                        ),
                    );
                }
            }
            result?;
        }
        Command::Report { runs, out, svg, quiet } => {
            let merged = cmd_report(&runs, &out, svg)?;
            say(
                quiet,
                format!("{} runs -> {}", merged.len(), out.join("report.csv").display()),
            );
        }
        Command::Synth { config, out, quiet } => {
            let config = ExperimentConfig::from_path(&config)?;
            cmd_synth(&config, &out)?;
            say(quiet, out.display().to_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
