use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use multibind::aggregation::{IntersectionPolicy, Weighting};
use multibind::diagnostics::LogBase;
use multibind::ingest::ThresholdSource;
use multibind::matching::MatchConfig;
use multibind::model::Dimension;
use multibind::pipeline::{cmd_auc, cmd_calibrate, cmd_eval, cmd_match, cmd_synth, ModelSource, RunConfig};
use multibind::report::summary_text;
use multibind::synth::{SynthConfig, SynthMode};

/// Cross-subject binding diagnostics for multi-subject image generation.
#[derive(Parser)]
#[command(name = "multibind", version)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match generated detections to ground-truth slots.
    Match(Common),
    /// Run the full evaluation and write a report.
    Eval(EvalArgs),
    /// Re-derive thresholds from human labels.
    Calibrate(LabelArgs),
    /// ROC-AUC of delta scores against human labels.
    Auc(LabelArgs),
    /// Write a synthetic dataset with planted failure modes.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// Dataset root with one directory per instance.
    #[arg(long)]
    dataset: PathBuf,
    /// Model output root as <id>=<path>; repeatable.
    #[arg(long = "model", value_name = "ID=PATH")]
    models: Vec<ModelSource>,
    /// Threshold file; builtin thresholds when omitted.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "MULTIBIND_OUT", default_value = "multibind_out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Abort on the first unreadable input instead of skipping it.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value_t = MatchConfig::default().det_conf)]
    det_conf: f64,
    /// Minimum detection box area as a fraction of the smallest ground-truth box area.
    #[arg(long, default_value_t = MatchConfig::default().area_factor)]
    alpha: f64,
    #[arg(long, default_value_t = MatchConfig::default().dup_threshold)]
    dup_thresh: f64,
    /// Logarithm base of the JS shift: `e` or `2`.
    #[arg(long, default_value = "e")]
    js_log_base: LogBase,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// `pooled` or `instance-weighted`.
    #[arg(long, default_value = "pooled")]
    weighting: Weighting,
    /// `all-models`, or `per-pair` to add pairwise reports.
    #[arg(long, default_value = "all-models")]
    intersection: IntersectionPolicy,
    /// Skip the per-instance matrix dumps.
    #[arg(long)]
    no_matrices: bool,
}

#[derive(Args)]
struct LabelArgs {
    #[command(flatten)]
    common: Common,
    /// Human label file.
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, env = "MULTIBIND_OUT", default_value = "multibind_synth")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    instances: usize,
    /// Model ids, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "model_a")]
    models: Vec<String>,
    /// perfect, drift, swap, dominance, blending or mixed.
    #[arg(long, default_value = "perfect")]
    mode: SynthMode,
    /// Subjects per instance (2-4); random when omitted.
    #[arg(long)]
    subjects: Option<usize>,
    /// Dimensions the mode applies to, comma separated; all when omitted.
    #[arg(long, value_delimiter = ',')]
    dimensions: Vec<Dimension>,
    #[arg(long, default_value_t = 32)]
    embed_dim: usize,
}

impl Common {
    fn config(&self) -> RunConfig {
        let mut cfg = RunConfig::new(&self.dataset, &self.out);
        cfg.models = self.models.clone();
        cfg.thresholds = match &self.thresholds {
            Some(p) => ThresholdSource::File(p.clone()),
            None => ThresholdSource::Builtin,
        };
        cfg.match_config = MatchConfig {
            det_conf: self.det_conf,
            area_factor: self.alpha,
            dup_threshold: self.dup_thresh,
        };
        cfg.jobs = self.jobs.into();
        cfg.strict = self.strict;
        cfg.js_log_base = self.js_log_base;
        cfg
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Match(c) => {
            let out = cmd_match(&c.config())?;
            println!(
                "{} assignment record(s), {} skipped; written to {}",
                out.records.len(),
                out.skipped.len(),
                c.out.join("match").display()
            );
        }
        Command::Eval(a) => {
            let mut cfg = a.common.config();
            cfg.weighting = a.weighting;
            cfg.intersection = a.intersection;
            cfg.dump_matrices = !a.no_matrices;
            let report = cmd_eval(&cfg)?;
            print!("{}", summary_text(&report.metadata, &report.summaries));
        }
        Command::Calibrate(a) => {
            let out = cmd_calibrate(&a.common.config(), &a.labels)?;
            for r in &out.results {
                println!(
                    "{:<15}{:<13} threshold {:>9}  F1 {:.4}  (pos {}, neg {})",
                    r.dimension.as_str(),
                    format!("{:?}", r.kind).to_lowercase(),
                    format!("{:.4}", r.fit.threshold),
                    r.fit.f1,
                    r.fit.support.pos,
                    r.fit.support.neg
                );
            }
            report_unresolved(out.unresolved.len());
        }
        Command::Auc(a) => {
            let out = cmd_auc(&a.common.config(), &a.labels)?;
            for r in &out.results {
                println!(
                    "{:<15}{:<13} AUC {:.4}  (pos {}, neg {})",
                    r.dimension.as_str(),
                    format!("{:?}", r.kind).to_lowercase(),
                    r.auc,
                    r.support.pos,
                    r.support.neg
                );
            }
            report_unresolved(out.unresolved.len());
        }
        Command::Synth(a) => {
            let cfg = SynthConfig {
                seed: a.seed,
                instances: a.instances,
                models: a.models,
                mode: a.mode,
                subjects: a.subjects,
                dimensions: if a.dimensions.is_empty() {
                    Dimension::ALL.to_vec()
                } else {
                    a.dimensions
                },
                embed_dim: a.embed_dim,
                ..SynthConfig::default()
            };
            cmd_synth(&cfg, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
            println!("synthetic dataset written to {}", a.out.display());
        }
    }
    Ok(())
}

fn report_unresolved(n: usize) {
    if n > 0 {
        eprintln!("warning: {n} label(s) did not resolve to a computed delta cell");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Command::Calibrate(a) | Command::Auc(a) = &cli.command {
        if !a.labels.is_file() {
            eprintln!("error: labels file {} not found", a.labels.display());
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
