use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;
use spatial_ordinal::commands::{self, Overrides};
use spatial_ordinal::io::RunConfig;
use spatial_ordinal::Error;

#[derive(Parser)]
#[command(name = "spord", version, about = "Spatial ordinal small-area estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic survey, population, adjacency and truth.
    Simulate(Common),
    /// Fit the model and write draws, manifest and convergence report.
    Fit(Common),
    /// Area-level category estimates and relevance probabilities.
    Poststratify {
        #[command(flatten)]
        common: Common,
        /// Directory holding the fitted draws (defaults to data.output).
        #[arg(long)]
        draws: Option<PathBuf>,
    },
    /// Posterior predictive check of observed area percentages.
    Ppc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        draws: Option<PathBuf>,
        /// Areas to check; defaults to the four most sampled.
        #[arg(long = "area")]
        areas: Vec<String>,
    },
    /// Recompute the convergence report from draw files.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        draws: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn load(common: &Common) -> Result<(RunConfig, Overrides), Error> {
    let mut config = RunConfig::load(&common.config)?;
    let overrides = Overrides {
        seed: common.seed,
        out: common.out.clone(),
        chains: common.chains,
        iterations: common.iterations,
        burnin: common.burnin,
        thin: common.thin,
        force: common.force,
    };
    overrides.apply(&mut config)?;
    Ok((config, overrides))
}

fn draws_and_out(
    config: &RunConfig,
    o: &Overrides,
    draws: Option<PathBuf>,
) -> Result<(PathBuf, PathBuf), Error> {
    let draws = match draws {
        Some(d) => d,
        None => commands::output_dir(config, None)?,
    };
    let out = o.out.clone().unwrap_or_else(|| draws.clone());
    Ok((draws, out))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(common) => {
            let (config, o) = load(&common)?;
            let files = commands::simulate(&config, o.out.as_deref(), o.force)?;
            println!(
                "wrote {} respondents to {}",
                files.respondents,
                files.survey.display()
            );
            println!(
                "wrote {} population cells to {}",
                files.population_rows,
                files.population.display()
            );
            println!("wrote {}", files.adjacency.display());
            println!("wrote {}", files.truth.display());
        }
        Command::Fit(common) => {
            let (config, o) = load(&common)?;
            // Threshold warnings are logged by the sampler itself.
            let outcome = commands::fit(&config, o.out.as_deref(), o.force)?;
            println!(
                "stored {} draws in {}; max R-hat {}, min ESS {}",
                outcome.stored_draws,
                outcome.dir.display(),
                outcome.report.max_rhat().map_or("NA".into(), |r| format!("{r:.3}")),
                outcome.report.min_ess().map_or("NA".into(), |e| format!("{e:.0}")),
            );
        }
        Command::Poststratify { common, draws } => {
            let (config, o) = load(&common)?;
            let (draws, out) = draws_and_out(&config, &o, draws)?;
            let est = commands::poststratify(&config, &draws, &out)?;
            for r in &est.relevance {
                if r.flag != "-" {
                    println!("{:<10} P(theta<0) = {:.3} ({})", r.area, r.prob, r.flag);
                }
            }
            println!("wrote area estimates and relevance to {}", out.display());
        }
        Command::Ppc {
            common,
            draws,
            areas,
        } => {
            let (config, o) = load(&common)?;
            let (draws, out) = draws_and_out(&config, &o, draws)?;
            let table = commands::ppc(&config, &draws, &out, &areas)?;
            print!("{}", commands::format_ppc_table(&table, config.model.categories));
        }
        Command::Diagnose { common, draws } => {
            let (config, o) = load(&common)?;
            let (draws, out) = draws_and_out(&config, &o, draws)?;
            let (report, warnings) = commands::diagnose(Some(&config), &draws, &out)?;
            for w in &warnings {
                warn!("{w}");
            }
            println!(
                "{} parameters; max R-hat {}, min ESS {}",
                report.rows.len(),
                report.max_rhat().map_or("NA".into(), |r| format!("{r:.3}")),
                report.min_ess().map_or("NA".into(), |e| format!("{e:.0}")),
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
