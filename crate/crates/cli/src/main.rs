use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use csdim::agreement::AlphaLevel;
use csdim::corpus::{Dimension, SplitSpec};
use csdim::eval::Averaging;
use csdim::stats::TTestVariant;
use csdim::synth::{SyntheticKind, SyntheticSpec};
use csdim::Result;
use csdim_cli::commands::{self, Emit};

#[derive(Parser)]
#[command(name = "csdim", version, about = "Counter-speech quality dimensions: train, evaluate, analyze")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmitArg {
    Text,
    Jsonl,
}

impl From<EmitArg> for Emit {
    fn from(e: EmitArg) -> Self {
        match e {
            EmitArg::Text => Emit::Text,
            EmitArg::Jsonl => Emit::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Nominal,
    Ordinal,
}

#[derive(Clone, Copy, ValueEnum)]
enum AveragingArg {
    Weighted,
    Macro,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Planted,
    Separable,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every variant in an experiment config.
    Run {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        emit: EmitArg,
    },
    /// Generate a synthetic labeled corpus.
    Synth {
        /// TOML generator spec; flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Inter-annotator agreement for annotation files.
    Iaa {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Restrict to these dimensions (repeatable).
        #[arg(long = "dim")]
        dims: Vec<Dimension>,
        #[arg(long, value_enum, default_value = "nominal")]
        alpha_level: LevelArg,
        #[arg(long, value_enum, default_value = "text")]
        emit: EmitArg,
    },
    /// ANOVA and pairwise t-tests over run reports.
    Stats {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Variant id to compare against; defaults to the best mean.
        #[arg(long)]
        baseline: Option<String>,
        /// student, welch or paired.
        #[arg(long, default_value = "student")]
        test: TTestVariant,
        #[arg(long, value_enum, default_value = "weighted")]
        averaging: AveragingArg,
        #[arg(long, value_enum, default_value = "text")]
        emit: EmitArg,
    },
    /// Split a corpus into train/val/test files.
    Split {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.7)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        val: f64,
        #[arg(long, default_value_t = 0.2)]
        test: f64,
    },
    /// Summarize a corpus, checkpoint or run-report file.
    Inspect { path: PathBuf },
}

fn execute(command: Command) -> Result<String> {
    match command {
        Command::Run { config, emit } => Ok(commands::cmd_run(&config)?.emit(emit.into()).to_string()),
        Command::Synth {
            spec,
            out,
            kind,
            n,
            seed,
        } => {
            let mut s = match spec {
                Some(p) => commands::load_synth_spec(&p)?,
                None if matches!(kind, Some(KindArg::Separable)) => SyntheticSpec::separable(200, 42),
                None => SyntheticSpec::default(),
            };
            if let Some(k) = kind {
                s.kind = match k {
                    KindArg::Planted => SyntheticKind::Planted,
                    KindArg::Separable => SyntheticKind::Separable,
                };
            }
            if let Some(n) = n {
                s.n_items = n;
            }
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let g = commands::cmd_synth(&s, &out)?;
            let copied = g.copied.iter().filter(|&&c| c).count();
            Ok(format!(
                "wrote {} pairs to {} ({copied} with copied {})\n",
                g.corpus.len(),
                out.display(),
                s.influenced
            ))
        }
        Command::Iaa {
            files,
            dims,
            alpha_level,
            emit,
        } => {
            let level = match alpha_level {
                LevelArg::Nominal => AlphaLevel::Nominal,
                LevelArg::Ordinal => AlphaLevel::Ordinal,
            };
            let results = commands::cmd_iaa(&files, &dims, level)?;
            Ok(commands::render_iaa(&results, emit.into()))
        }
        Command::Stats {
            reports,
            baseline,
            test,
            averaging,
            emit,
        } => {
            let averaging = match averaging {
                AveragingArg::Weighted => Averaging::Weighted,
                AveragingArg::Macro => Averaging::Macro,
            };
            let summary = commands::cmd_stats(&reports, baseline.as_deref(), test, averaging)?;
            Ok(commands::render_stats(&summary, emit.into()))
        }
        Command::Split {
            corpus,
            out,
            seed,
            train,
            val,
            test,
        } => {
            let (a, b, c) = commands::cmd_split(&corpus, &SplitSpec::new(train, val, test, seed), &out)?;
            Ok(format!("train {a}, val {b}, test {c} -> {}\n", out.display()))
        }
        Command::Inspect { path } => commands::cmd_inspect(&path),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
