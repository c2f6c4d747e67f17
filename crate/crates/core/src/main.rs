use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use avil::harness::{
    generate, parse_seeds, prepare_data, report, run_experiment, workers_from_env, ExperimentConfig, Method,
    Overrides, Scale,
};
use avil::Result;

/// Multitask training with learned task-interpolation weights on MultiMNIST.
#[derive(Parser)]
#[command(name = "avil", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render MultiMNIST train and test caches from raw MNIST IDX files.
    Generate {
        #[arg(long)]
        mnist_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        pair_seed: u64,
    },
    /// Train every configured seed and write the run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// singletask | multitask | diw | avil
        #[arg(long)]
        method: Option<Method>,
        /// Target task: tl | br
        #[arg(long)]
        target: Option<String>,
        /// Comma-separated seeds, e.g. 0,1,2
        #[arg(long)]
        seeds: Option<String>,
        /// desk | full
        #[arg(long)]
        scale: Option<Scale>,
        /// Suppress per-epoch progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Summarise every run under a directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            mnist_dir,
            out,
            pair_seed,
        } => {
            for p in generate(&mnist_dir, &out, pair_seed)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Train {
            config,
            method,
            target,
            seeds,
            scale,
            quiet,
        } => {
            let overrides = Overrides {
                method,
                target,
                seeds: seeds.as_deref().map(parse_seeds).transpose()?,
                scale,
            };
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let workers = workers_from_env()?;
            let data = prepare_data(&cfg.data)?;
            let rep = run_experiment(&cfg, &data, workers, quiet)?;
            println!("run directory: {}", rep.dir.display());
            for a in &rep.aggregates {
                match a.dev {
                    Some(d) => println!(
                        "{} {}: dev mean {:.2} (min {:.2}, max {:.2}, std {:.2}) over {} seeds",
                        rep.method, a.task, d.mean, d.min, d.max, d.std, d.n
                    ),
                    None => println!("{} {}: no completed seeds", rep.method, a.task),
                }
                if !a.failed.is_empty() {
                    println!("  failed seeds: {:?}", a.failed);
                }
            }
        }
        Command::Report { run_dir } => {
            let out = report(&run_dir)?;
            print!("{}", out.text);
            for p in &out.alpha_files {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
