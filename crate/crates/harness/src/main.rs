use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use vlpl_core::synthdata::{BinKind, DEFAULT_MAX_DOCS};
use vlpl_harness::run::{parse_methods, write_outputs, ExposureKind, RunConfig};
use vlpl_harness::verify::{cmd_verify, Fault, Scope, Sizes};
use vlpl_harness::{data, profile, table1, HarnessError, Result};

#[derive(Parser)]
#[command(name = "vlpl", version, about = "Variable-length ranking layouts: verification, data generation and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recompute the three-document example and its optima.
    Table1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suites and report measured statistics.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        scope: Scope,
        /// Gradient samples per estimate for the gradient and reduction suites.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scale every gradient estimate by this factor (suite sensitivity check).
        #[arg(long, hide = true)]
        inject_fault: Option<f64>,
    },
    /// Generate attractiveness labels for a LETOR corpus.
    GenData {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_len: usize,
        #[arg(long, default_value = "equal")]
        scheme: BinKind,
        #[arg(long, default_value_t = DEFAULT_MAX_DOCS)]
        max_docs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the label file and manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize and evaluate layouts for every query of a labeled corpus.
    Run {
        /// Manifest written by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated: vlpl{1,2}-{post,in}, sort-<l>, greedy, slot-avg, plr3-<l>.
        #[arg(long, default_value = "vlpl2-post")]
        method: String,
        #[arg(long, default_value = "dcg")]
        exposure: String,
        #[arg(long, default_value_t = 30)]
        slots: usize,
        #[arg(long, default_value_t = 3)]
        max_len: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 1e-3)]
        scorer_lr: f64,
        #[arg(long, value_delimiter = ',', default_value = "32")]
        hidden: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        head_epochs: usize,
        /// Give the policies the true attractiveness instead of predictions.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-slot length distribution of a run's decoded rankings.
    LengthProfile {
        /// Result CSV written by run.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Table1 { out } => {
            let report = table1::cmd_table1()?;
            emit(&report, out.as_deref())?;
            if !report.passed {
                return Err(HarnessError::Verification("table values differ from the printed ones".into()));
            }
        }
        Command::Verify {
            scope,
            samples,
            out,
            inject_fault,
        } => {
            let mut sizes = Sizes::default();
            if let Some(n) = samples {
                sizes.gradient_samples = n;
                sizes.reduction_samples = n;
            }
            let fault = inject_fault.map_or(Fault::None, Fault::ScaleGradient);
            let report = cmd_verify(scope, &sizes, fault)?;
            emit(&report, out.as_deref())?;
            if !report.passed {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(HarnessError::Verification(failed.join(", ")));
            }
        }
        Command::GenData {
            input,
            max_len,
            scheme,
            max_docs,
            seed,
            out,
        } => {
            let report = data::cmd_gen_data(&input, max_len, scheme, max_docs, seed, &out)?;
            emit(&report, None)?;
        }
        Command::Run {
            data,
            method,
            exposure,
            slots,
            max_len,
            samples,
            steps,
            epochs,
            lr,
            scorer_lr,
            hidden,
            head_epochs,
            oracle,
            seed,
            out,
        } => {
            let methods = parse_methods(&method)?;
            let exposure: ExposureKind = exposure.parse()?;
            let mut cfg = RunConfig::new(data, &methods, &exposure, slots, max_len);
            cfg.samples = samples;
            cfg.steps = steps;
            cfg.epochs = epochs;
            cfg.post_lr = lr;
            cfg.scorer_lr = scorer_lr;
            cfg.hidden = hidden;
            cfg.head_epochs = head_epochs;
            cfg.oracle = oracle;
            cfg.seed = seed;
            let output = vlpl_harness::run::run(&cfg)?;
            write_outputs(&out, &output)?;
            emit(&output.summary.methods, None)?;
        }
        Command::LengthProfile { input, out } => {
            profile::cmd_length_profile(&input, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
