use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use steinmetz::data::{self, ChannelSpec};
use steinmetz::harness::{self, Recipe, RunConfig};
use steinmetz::models::load_checkpoint;
use steinmetz::signal;
use steinmetz::tensor::Tensor;
use steinmetz::{Error, Result};

#[derive(Parser)]
#[command(
    name = "steinmetz",
    version,
    about = "Steinmetz and analytic networks for complex-valued data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or transform a CVDS dataset.
    Gen(GenArgs),
    /// Train a network from a JSON run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also write the metrics JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latent diagnostics of a checkpoint on a dataset, as JSON.
    Diag {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Hilbert-transform every real feature row of a CVDS dataset.
    Hilbert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = HilbertMethod::Freq)]
        method: HilbertMethod,
        /// Write the analytic-signal dataset here instead of printing rows.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a reproducible experiment recipe.
    Experiment {
        #[arg(value_parser = parse_recipe)]
        recipe: Recipe,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of seeds per architecture.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// CVDS directory with raw real images (cvmnist500, noise-sweep).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Directory for result.json and table.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenTask {
    Channel,
    Noise,
    DftEncode,
}

#[derive(Clone, Copy, ValueEnum)]
enum HilbertMethod {
    Freq,
    Cotangent,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    task: GenTask,
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    rho: f64,
    #[arg(long = "snr-db", default_value_t = 5.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Source dataset for `noise` and `dft-encode`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_recipe(s: &str) -> std::result::Result<Recipe, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: "stdout".into(),
        source,
    })?;
    println!("{text}");
    Ok(())
}

fn require_input(input: Option<&Path>) -> Result<&Path> {
    input.ok_or_else(|| Error::Validation {
        field: "input".into(),
        reason: "this task needs --input <CVDS dir>".into(),
    })
}

fn gen(args: GenArgs) -> Result<()> {
    let ds = match args.task {
        GenTask::Channel => {
            let spec = ChannelSpec {
                rho: args.rho,
                snr_db: args.snr_db,
                ..ChannelSpec::default()
            };
            data::gen_channel_dataset(&spec, args.m, args.seed)?
        }
        GenTask::Noise => {
            let src = harness::load_dataset(require_input(args.input.as_deref())?)?;
            data::add_complex_noise(&src, args.eta, args.seed)?
        }
        GenTask::DftEncode => {
            let src = data::load_cvds(require_input(args.input.as_deref())?)?;
            data::dft_encode(&src)?
        }
    };
    data::save_cvds(&ds, &args.out)?;
    eprintln!("wrote {} examples to {}", ds.len(), args.out.display());
    Ok(())
}

fn hilbert(input: &Path, method: HilbertMethod, out: Option<&Path>) -> Result<()> {
    let ds = data::load_cvds(input)?;
    let transform = match method {
        HilbertMethod::Freq => signal::hilbert_freq,
        HilbertMethod::Cotangent => signal::dht_cotangent,
    };
    let rows = ds
        .features_re
        .row_iter()
        .take(ds.len())
        .map(transform)
        .collect::<Result<Vec<_>>>()?;
    match out {
        Some(dir) => {
            let mut analytic = ds.clone();
            analytic.features_im = Tensor::from_rows(&rows)?;
            analytic.meta.domain = data::Domain::Complex;
            analytic.meta.provenance = format!("analytic({})", ds.meta.provenance);
            data::save_cvds(&analytic, dir)
        }
        None => print_json(&rows),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Train { config, seed, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.optim.seed = seed;
            }
            let report = harness::run_training(&cfg, &out)?;
            for e in &report.epochs {
                eprintln!(
                    "epoch {:>4}  loss {:.6}  penalty {}  test {}",
                    e.epoch,
                    e.train_loss,
                    e.penalty_value.map_or("-".into(), |p| format!("{p:.6}")),
                    e.test_metric.map_or("-".into(), |t| format!("{t:.4}")),
                );
            }
            eprintln!("report written to {}", out.join("report.json").display());
            Ok(())
        }
        Command::Eval {
            checkpoint,
            data,
            out,
        } => {
            let ck = load_checkpoint(&checkpoint)?;
            let ds = harness::load_dataset(&data)?;
            let report = harness::evaluate(&ck.model, &ds)?;
            if let Some(path) = out {
                harness::write_json(&path, &report)?;
            }
            print_json(&report)
        }
        Command::Diag { checkpoint, data } => {
            let ck = load_checkpoint(&checkpoint)?;
            let ds = harness::load_dataset(&data)?;
            print_json(&harness::evaluate(&ck.model, &ds)?)
        }
        Command::Hilbert { input, method, out } => hilbert(&input, method, out.as_deref()),
        Command::Experiment {
            recipe,
            seed,
            seeds,
            epochs,
            data,
            out,
        } => {
            let mut opts = recipe.defaults();
            if let Some(s) = seed {
                opts.seed = s;
            }
            if let Some(n) = seeds {
                opts.seeds = n;
            }
            if let Some(e) = epochs {
                opts.epochs = e;
            }
            if data.is_some() {
                opts.data = data;
            }
            let table = harness::run_experiment(recipe, &opts)?;
            println!("{}", table.render());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                harness::write_json(&dir.join("result.json"), &table)?;
                std::fs::write(dir.join("table.txt"), table.render()).map_err(|e| Error::Io {
                    path: dir.join("table.txt"),
                    source: e,
                })?;
            }
            Ok(())
        }
    }
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
