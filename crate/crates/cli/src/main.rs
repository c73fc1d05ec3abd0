use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use morlot::ObjectiveId;
use morlot_cli::replay::{render, replay_path, write_trace};
use morlot_cli::{build_report, read_results, run_campaign, CampaignConfig, CliError, EXIT_REPRODUCTION};

#[derive(Parser)]
#[command(name = "morlot", version, about = "Many-objective RL test generation campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every approach on every seed of a campaign.
    Run {
        /// JSON campaign file; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Added to every configured seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Write a step trace per MORLOT run.
        #[arg(long)]
        trace: bool,
        /// Output directory, overriding `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute an archive file and check that its violations reproduce.
    Replay {
        /// An `archives/*.json` file written by `run`.
        archive: PathBuf,
        /// Only replay this objective.
        #[arg(long)]
        objective: Option<usize>,
        /// Print the replayed steps as line-delimited JSON instead of text.
        #[arg(long)]
        trace: bool,
    },
    /// Summarize a results.csv into comparison and coverage tables.
    Report {
        /// The results.csv of a campaign.
        results: PathBuf,
        /// Directory for the CSV tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available environments.
    Envs,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config, seed_offset, trace, out } => {
            let mut cfg = match config {
                Some(p) => CampaignConfig::from_file(&p)?,
                None => CampaignConfig::default(),
            };
            cfg.offset_seeds(seed_offset)?;
            cfg.trace |= trace;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let runs = run_campaign(&cfg)?;
            for r in &runs {
                let rate = r.steps_per_second().map_or(String::new(), |v| format!(" {v:.0} steps/s"));
                eprintln!("{:<28} tse={:.4} steps={}{rate}", r.run_id, r.result.tse, r.consumed_steps);
            }
            println!("{} runs written to {}", runs.len(), cfg.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { archive, objective, trace } => {
            let reports = replay_path(&archive, objective.map(ObjectiveId))?;
            let mut stdout = std::io::stdout().lock();
            let mut ok = true;
            for r in &reports {
                if trace {
                    write_trace(r, &mut stdout).map_err(|e| CliError::Io(e.to_string()))?;
                } else {
                    write!(stdout, "{}", render(r)).map_err(|e| CliError::Io(e.to_string()))?;
                }
                ok &= r.reproduced();
            }
            if !ok {
                for r in reports.iter().filter(|r| !r.reproduced()) {
                    let at = r.divergence.as_ref().map_or("no divergence".to_string(), |d| format!("diverged at step {}", d.step()));
                    eprintln!("objective {} did not reproduce ({at})", r.objective);
                }
                return Ok(ExitCode::from(EXIT_REPRODUCTION));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { results, out } => {
            let (rows, complete) = read_results(&results)?;
            let report = build_report(&rows, complete)?;
            print!("{}", report.to_text());
            if let Some(dir) = out {
                report.write_csv(&dir)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Envs => {
            for (id, description) in morlot::env::known_envs() {
                println!("{id:<18} {description}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
