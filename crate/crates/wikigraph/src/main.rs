//! Command-line front end: five subcommands over the library
//! pipeline. All logic lives in the library; this file only maps
//! flags to config overrides and prints results.

use std::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wikigraph::pipeline::{
    cmd_analyze, cmd_build, cmd_metrics, cmd_report, cmd_verify, parse_override, Config,
    PipelineError,
};

#[derive(Parser)]
#[command(
    name = "wikigraph",
    version,
    about = "Builds a relational graph of a wiki from its public dump files,\n\
             computes per-article metrics and summary analyses."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file (TOML).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Override a config key, e.g. --set limits.threads=8. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides output.dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 0 means one per core.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Process memory ceiling in bytes.
    #[arg(long, value_name = "BYTES")]
    memory_ceiling: Option<u64>,
}

impl Common {
    fn load(&self, extra: &[(String, String)]) -> Result<Config, PipelineError> {
        let mut overrides: Vec<(String, String)> = Vec::new();
        for raw in &self.set {
            overrides.push(parse_override(raw)?);
        }
        if let Some(out) = &self.out {
            // Relative config paths anchor at the config file; a flag
            // given on the command line should anchor at the CWD.
            let abs = if out.is_absolute() {
                out.clone()
            } else {
                std::env::current_dir()
                    .map(|d| d.join(out))
                    .unwrap_or_else(|_| out.clone())
            };
            overrides.push(("output.dir".to_string(), abs.display().to_string()));
        }
        if let Some(t) = self.threads {
            overrides.push(("limits.threads".to_string(), t.to_string()));
        }
        if let Some(m) = self.memory_ceiling {
            overrides.push(("limits.memory_ceiling_bytes".to_string(), m.to_string()));
        }
        overrides.extend(extra.iter().cloned());
        let config = Config::load(&self.config, &overrides)?;
        if config.limits.threads > 0 {
            // Fails harmlessly if a global pool already exists.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(config.limits.threads)
                .build_global();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the nine graph tables from the dump files.
    Build {
        #[command(flatten)]
        common: Common,
        /// Rerun every stage even if checkpoints say it is current.
        #[arg(long)]
        force: bool,
        /// Chase links that land on redirects one hop (true/false).
        #[arg(long, value_name = "BOOL")]
        resolve_redirects: Option<bool>,
    },
    /// Compute per-article metrics from a built graph.
    Metrics {
        #[command(flatten)]
        common: Common,
    },
    /// Summarize metrics: class means, distributions, correlations, rankings.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Print the build counters and the analysis report.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Check the integrity invariants of a built graph.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.command {
        Command::Build { common, force, resolve_redirects } => {
            let mut extra = Vec::new();
            if let Some(flag) = resolve_redirects {
                extra.push(("flags.resolve_redirects".to_string(), flag.to_string()));
            }
            let config = common.load(&extra)?;
            let outcome = cmd_build(&config, force)?;
            if outcome.all_current() {
                println!("all stages current; nothing to do");
            } else {
                for s in &outcome.stages {
                    println!("stage {:<10} {}", s.name, if s.ran { "built" } else { "current" });
                }
            }
            println!("run report: {}", config.output.dir.join("run_report.txt").display());
        }
        Command::Metrics { common } => {
            let config = common.load(&[])?;
            let counters = cmd_metrics(&config)?;
            print!("{counters}");
            println!("wrote {}", config.output.dir.join("metrics.tsv").display());
        }
        Command::Analyze { common } => {
            let config = common.load(&[])?;
            let counters = cmd_analyze(&config)?;
            print!("{counters}");
            println!("wrote {}", config.output.dir.join("report.txt").display());
        }
        Command::Report { common } => {
            let config = common.load(&[])?;
            print!("{}", cmd_report(&config)?);
        }
        Command::Verify { common } => {
            let config = common.load(&[])?;
            let report = cmd_verify(&config)?;
            print!("{}", report.render());
            if !report.is_clean() {
                return Err(Box::new(PipelineError::IntegrityViolations(
                    report.total_violations(),
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
