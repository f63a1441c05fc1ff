use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blockpf::harness::{self, ExperimentConfig};
use blockpf::partitioning::{csc, KMeansOptions};
use blockpf::{metrics, Error, Partition, RngStream, SymMatrix};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blockpf", version, about = "Block particle filter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; falls back to BPF_THREADS.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster a similarity matrix (CSV, no header) into K blocks of size at most zeta.
    Partition {
        #[arg(long)]
        similarity: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        zeta: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Adjusted Rand index of two partition files (one block per line).
    Ari { p1: PathBuf, p2: PathBuf },
    /// Run a bundled reproduction recipe.
    Figures {
        #[arg(long, value_parser = harness::RECIPES)]
        table: String,
        #[arg(long)]
        out: PathBuf,
        /// Use the long protocol (more runs) where the bundled one is shortened.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            config,
            seed,
            threads,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            run_and_write(&cfg, harness::resolve_threads(threads), &dir)
        }
        Command::Partition {
            similarity,
            k,
            zeta,
            seed,
        } => {
            let omega = read_matrix(&similarity)?;
            let mut rng = RngStream::new(seed, 0);
            let outcome = csc(&omega, k, zeta, KMeansOptions::default(), &mut rng)?;
            print!("{}", outcome.partition.canonical().to_text());
            Ok(())
        }
        Command::Ari { p1, p2 } => {
            let a = read_partition(&p1)?;
            let b = read_partition(&p2)?;
            println!("{:?}", metrics::ari(&a, &b)?);
            Ok(())
        }
        Command::Figures {
            table,
            out,
            full,
            threads,
        } => {
            let threads = harness::resolve_threads(threads);
            let configs = harness::recipe(&table, full)?;
            let single = configs.len() == 1;
            for cfg in configs {
                let dir = if single {
                    out.clone()
                } else {
                    out.join(cfg.name.clone().unwrap_or_default())
                };
                run_and_write(&cfg, threads, &dir)?;
            }
            Ok(())
        }
    }
}

fn run_and_write(cfg: &ExperimentConfig, threads: Option<usize>, dir: &Path) -> Result<(), Error> {
    let output = harness::run_experiment(cfg, threads)?;
    harness::write_outputs(cfg, &output, dir)?;
    let failed = output.runs.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        log::warn!("{failed} filter runs failed; see runs.csv");
    }
    if output.bias_variance.is_empty() {
        print!("{}", harness::summary_to_csv(&output.summary)?);
    } else {
        print!("{}", harness::bias_variance_to_csv(&output.bias_variance)?);
    }
    Ok(())
}

fn read_partition(path: &Path) -> Result<Partition, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Partition::from_text(&text)
}

fn read_matrix(path: &Path) -> Result<SymMatrix, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| Error::ParseError {
                    line: i + 1,
                    column: j + 1,
                    message: format!("not a number: {field:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::ParseError {
            line: i + 1,
            column: 0,
            message: format!("expected {n} columns, got {}", row.len()),
        });
    }
    SymMatrix::new(blockpf::nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
