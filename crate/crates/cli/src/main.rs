use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use hydroformer::data::DATE_FORMAT;
use hydroformer::metrics::R2Mode;
use hydroformer_cli::commands::{
    cmd_bench, cmd_datagen, cmd_evaluate, cmd_explain, cmd_predict, cmd_train, BenchRequest, ExplainRequest, KSpec,
};
use hydroformer_cli::config::EstimatorKind;
use hydroformer_cli::run::default_checkpoint;
use hydroformer_cli::{CliError, RunConfig};

/// Sparse-attention Transformer forecaster with Shapley attribution.
#[derive(Parser, Debug)]
#[command(name = "hydroformer", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for training, evaluation and SHAP.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, DATE_FORMAT).map_err(|e| format!("`{s}`: {e} (expected {DATE_FORMAT})"))
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic daily table.
    Datagen {
        #[arg(long, default_value_t = 2000)]
        length: usize,
        /// Defaults to `<out>/synth.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train the configured variant.
    Train,
    /// Score a checkpoint on the test split.
    Evaluate {
        /// Defaults to `<out>/model.hyfc`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        leads: Option<Vec<usize>>,
        #[arg(long)]
        r2_mode: Option<R2Mode>,
    },
    /// Forecast the full horizon from one window.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Last observed day of the input window; defaults to the last day of the data.
        #[arg(long, value_parser = parse_date)]
        anchor: Option<NaiveDate>,
    },
    /// Shapley attribution for one window and/or a test-split sample.
    Explain {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Anchor date of the window to explain.
        #[arg(long, value_parser = parse_date)]
        instance: Option<NaiveDate>,
        #[arg(long)]
        global: bool,
        /// Test windows in the global sample.
        #[arg(long)]
        sample: Option<usize>,
        /// Enumerate all coalitions instead of sampling permutations.
        #[arg(long)]
        exact: bool,
        /// Largest feature count exact enumeration accepts.
        #[arg(long)]
        exact_cap: Option<usize>,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        lead: Option<usize>,
    },
    /// Time dense against sparse attention.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [64, 128, 256])]
        lengths: Vec<usize>,
        /// Integers, `L/<d>` or `L`.
        #[arg(long, value_delimiter = ',', default_value = "8,L/4,L")]
        ks: Vec<KSpec>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    match cli.command {
        Command::Datagen { length, output } => {
            let output = output.unwrap_or_else(|| cfg.out.join("synth.csv"));
            let path = cmd_datagen(&cfg, length, &output)?;
            println!("{}", path.display());
        }
        Command::Train => {
            let o = cmd_train(&cfg)?;
            println!("{}  {}", o.digest, o.checkpoint.display());
        }
        Command::Evaluate {
            checkpoint,
            leads,
            r2_mode,
        } => {
            if let Some(leads) = leads {
                cfg.eval.leads = leads;
            }
            if let Some(mode) = r2_mode {
                cfg.eval.r2_mode = mode;
            }
            let ckpt = checkpoint.unwrap_or_else(|| default_checkpoint(&cfg));
            let eval = cmd_evaluate(&cfg, &ckpt)?;
            println!("lead,n,r2,mae,rmse,mbe");
            for m in &eval.report.leads {
                println!("{},{},{:.4},{:.4},{:.4},{:.4}", m.lead, m.n, m.r2, m.mae, m.rmse, m.mbe);
            }
        }
        Command::Predict { checkpoint, anchor } => {
            let ckpt = checkpoint.unwrap_or_else(|| default_checkpoint(&cfg));
            let f = cmd_predict(&cfg, &ckpt, anchor)?;
            for (d, v) in f.dates.iter().zip(&f.values) {
                println!("{},{v}", d.format(DATE_FORMAT));
            }
        }
        Command::Explain {
            checkpoint,
            instance,
            global,
            sample,
            exact,
            exact_cap,
            permutations,
            lead,
        } => {
            if exact {
                cfg.shap.estimator = EstimatorKind::Exact;
            }
            if let Some(c) = exact_cap {
                cfg.shap.exact_cap = c;
            }
            if let Some(m) = permutations {
                cfg.shap.permutations = m;
            }
            if let Some(n) = sample {
                cfg.shap.sample = n;
            }
            if let Some(l) = lead {
                cfg.shap.lead = l;
            }
            let ckpt = checkpoint.unwrap_or_else(|| default_checkpoint(&cfg));
            let o = cmd_explain(&cfg, &ckpt, &ExplainRequest { instance, global })?;
            if let Some(ie) = &o.instance {
                print!("{}", ie.force.to_csv());
            }
            if let Some(g) = &o.global {
                print!("{}", g.to_csv());
            }
        }
        Command::Bench {
            lengths,
            ks,
            repeats,
            warmup,
            width,
        } => {
            let rows = cmd_bench(
                &cfg,
                &BenchRequest {
                    lengths,
                    ks,
                    repeats,
                    warmup,
                    width,
                },
            )?;
            print!("{}", hydroformer_cli::commands::bench_csv(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
