use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use murr_core::corpus::{generate_synthetic_corpus, load_corpus_dir, save_corpus_dir, SyntheticSpec};
use murr_core::orchestrator::{
    reformat_report, run_experiment, sweep, ExperimentConfig, ReportFormat, SweepAxis,
};
use murr_core::stream_sim::{build_stream, Scenario, Stream};
use murr_core::trainer::Strategy;

#[derive(Parser)]
#[command(name = "murr", about = "Streaming dense retrieval with regularized-replay model updating")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-domain corpus.
    GenCorpus {
        /// Synthetic corpus spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (collection.tsv, queries.tsv, qrels.txt).
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign a corpus's test queries and documents to sessions.
    GenStream {
        /// Corpus directory produced by gen-corpus (or LoTTe-style files).
        #[arg(long)]
        corpus: PathBuf,
        /// Scenario file (JSON): schedules and emerging-domain order.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (stream.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full multi-session experiment and write reports.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        /// Directory containing stream.json from gen-stream.
        #[arg(long)]
        stream: PathBuf,
        /// Comma-separated strategy override
        /// (same_model,lm_no_replay,cf_no_replay,murr_lm,murr_cf).
        #[arg(long)]
        strategies: Option<String>,
        /// Experiment config (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ablation sweep over replay size or regularization strength (MURR-CF).
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        /// Sweep axis: replay | alpha.
        #[arg(long)]
        axis: SweepAxisArg,
        /// Comma-separated axis values, e.g. 0,8,32,128 or 0,1e-4,1e-2.
        #[arg(long)]
        values: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-emit a run's report.json in the requested format on stdout.
    Report {
        /// Directory containing report.json.
        #[arg(long = "in")]
        in_dir: PathBuf,
        /// Output format: json | csv | markdown.
        #[arg(long)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SweepAxisArg {
    Replay,
    Alpha,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Markdown,
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_json_file(p)
            .with_context(|| format!("loading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    match cli.command {
        Command::GenCorpus { spec, seed, out } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let spec: SyntheticSpec = serde_json::from_str(&text)?;
            let corpus = generate_synthetic_corpus(&spec, seed)?;
            save_corpus_dir(&corpus, &out)?;
            log::info!(
                "wrote {} docs, {} queries to {}",
                corpus.documents.len(),
                corpus.queries.len(),
                out.display()
            );
        }
        Command::GenStream { corpus, scenario, seed, out } => {
            let corpus = load_corpus_dir(&corpus)?;
            let scenario = Scenario::from_json_file(&scenario)?;
            let stream = build_stream(&corpus, &scenario, seed)?;
            std::fs::create_dir_all(&out)?;
            stream.save_json(&out.join("stream.json"))?;
            log::info!(
                "wrote {}-session stream for scenario {} to {}",
                stream.n_sessions,
                stream.scenario,
                out.display()
            );
        }
        Command::Run { corpus, stream, strategies, config, out } => {
            let corpus = load_corpus_dir(&corpus)?;
            let stream = Stream::load_json(&stream.join("stream.json"))?;
            let mut cfg = load_config(config.as_ref())?;
            if let Some(csv) = strategies {
                cfg.strategies = csv
                    .split(',')
                    .map(|s| s.trim().parse::<Strategy>())
                    .collect::<Result<_, _>>()?;
            }
            let report = run_experiment(&corpus, &stream, &cfg, Some(&out))?;
            for sr in &report.strategies {
                log::info!(
                    "{}: median macro Success@5 {:.3}",
                    sr.strategy.ident(),
                    sr.median_macro
                );
            }
            log::info!("reports written to {}", out.display());
        }
        Command::Sweep { corpus, stream, axis, values, config, out } => {
            let corpus = load_corpus_dir(&corpus)?;
            let stream = Stream::load_json(&stream.join("stream.json"))?;
            let cfg = load_config(config.as_ref())?;
            let axis = match axis {
                SweepAxisArg::Replay => SweepAxis::Replay,
                SweepAxisArg::Alpha => SweepAxis::Alpha,
            };
            let values: Vec<f64> = values
                .split(',')
                .map(|v| v.trim().parse::<f64>().context("parsing sweep value"))
                .collect::<anyhow::Result<_>>()?;
            let entries = sweep(&corpus, &stream, &cfg, axis, &values, Some(&out))?;
            for e in &entries {
                let best = &e.report.strategies[0];
                log::info!("value {}: median macro Success@5 {:.3}", e.value, best.median_macro);
            }
        }
        Command::Report { in_dir, format } => {
            let format = match format {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Markdown => ReportFormat::Markdown,
            };
            reformat_report(&in_dir, format, &mut std::io::stdout().lock())?;
        }
    }
    Ok(())
}
