use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use codestylo::pipeline::{self, RunConfig, Scope};
use codestylo::Error;

#[derive(Parser)]
#[command(name = "codestylo", version, about = "Tell AI-translated code from human-written code")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate the corpus into sub-datasets.
    BuildDataset,
    /// Undersample sub-datasets and draw the multilingual pool.
    Sample,
    /// Train the transformer classifier on one scope.
    Train {
        /// `multilingual`, `<dst>_from_<src>` or `<dst>:<src>`.
        #[arg(long)]
        scope: String,
    },
    /// Run the evaluation grids and write report tables.
    Evaluate,
    /// Label a snippet with a trained model.
    Detect {
        /// Checkpoint directory or saved baseline model file.
        #[arg(long)]
        model: PathBuf,
        /// Source file; standard input when omitted.
        file: Option<PathBuf>,
    },
    /// Snippet length statistics of a dataset.
    Stats {
        /// Dataset file; defaults to the built dataset of the config.
        dataset: Option<PathBuf>,
    },
    /// Re-render tables from stored grid rows.
    Report {
        /// Grid rows file; defaults to the evaluation output of the config.
        grid: Option<PathBuf>,
    },
    /// Write a synthetic desk-scale corpus, ranking and config.
    InitDesk {
        dir: PathBuf,
        #[arg(long, default_value_t = 30)]
        tasks: usize,
        #[arg(long, value_delimiter = ',', default_value = "Python,Go,Rust")]
        languages: Vec<String>,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Validation(e.into()))?,
        None => return Err(Failure::Validation(anyhow::anyhow!("--config is required for this command"))),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w.max(1);
    }
    if let Some(o) = &cli.out {
        cfg.paths.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn read_source(file: Option<&Path>) -> Result<String, Failure> {
    match file {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::Validation(anyhow::anyhow!("reading {}: {e}", p.display()))),
        None => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::Runtime(anyhow::anyhow!("reading standard input: {e}")))?;
            Ok(s)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::BuildDataset => print_json(&pipeline::build_dataset(&load_config(cli)?)?),
        Command::Sample => print_json(&pipeline::sample(&load_config(cli)?)?),
        Command::Train { scope } => {
            let cfg = load_config(cli)?;
            let scope: Scope = scope.parse()?;
            let (dir, ck) = pipeline::train_scope(&cfg, &scope)?;
            println!("{}", dir.display());
            print_json(&ck.history.epochs);
        }
        Command::Evaluate => {
            let ev = pipeline::evaluate(&load_config(cli)?)?;
            print!("{}", pipeline::render_evaluation(&ev));
        }
        Command::Detect { model, file } => {
            let code = read_source(file.as_deref())?;
            print_json(&pipeline::detect(model, &code)?);
        }
        Command::Stats { dataset } => {
            let (path, out) = match dataset {
                Some(p) => (p.clone(), cli.out.clone()),
                None => {
                    let cfg = load_config(cli)?;
                    (cfg.dataset_path(), Some(cfg.reports_dir()))
                }
            };
            let (_, table) = pipeline::stats(&path, out.as_deref())?;
            print!("{table}");
        }
        Command::Report { grid } => {
            let path = match grid {
                Some(p) => p.clone(),
                None => load_config(cli)?.reports_dir().join("grid.jsonl"),
            };
            print!("{}", pipeline::report_from_rows(&path)?);
        }
        Command::InitDesk { dir, tasks, languages } => {
            let langs: Vec<&str> = languages.iter().map(String::as_str).collect();
            if langs.len() < 2 {
                return Err(Failure::Validation(anyhow::anyhow!("need at least two languages")));
            }
            pipeline::write_desk_setup(dir, &langs, *tasks, cli.seed.unwrap_or(0))?;
            println!("{}", dir.join("config.toml").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
