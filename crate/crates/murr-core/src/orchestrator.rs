//! End-to-end experiment driver: per (strategy, seed) run the session loop
//! (train, sample replay, build shard, evaluate over all shards), then
//! aggregate macro averages, relative gains and cross-strategy significance
//! into a report.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{make_training_triples, Corpus, Document};
use crate::encoder::EncoderDims;
use crate::evalkit::{
    paired_t_test, relative_gain, EvalCell, GainResult, SignificanceMatrix, SuccessGrid,
};
use crate::stream_sim::Stream;
use crate::trainer::{
    pretrain_base, resolve_triples, sample_replay, train_session, ReplaySet, Strategy, TrainConfig,
    TrainingTriple,
};
use crate::vindex::{build_shard, save_shard, search_all, IndexMode, IndexShard};
use crate::{derive_seed, EncoderModel, Error, Real, Result};

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_k() -> usize {
    100
}

fn default_pretrain_steps() -> usize {
    1000
}

fn default_index_mode() -> IndexMode {
    IndexMode::Flat
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Steps for the shared base checkpoint trained on mixed-domain triples.
    #[serde(default = "default_pretrain_steps")]
    pub pretrain_steps: usize,
    #[serde(default = "default_index_mode")]
    pub index_mode: IndexMode,
    /// Retrieval depth per shard before merging.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub encoder: EncoderDims,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            strategies: default_strategies(),
            train: TrainConfig::default(),
            pretrain_steps: default_pretrain_steps(),
            index_mode: default_index_mode(),
            k: default_k(),
            seeds: default_seeds(),
            encoder: EncoderDims::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("strategies: must name at least one".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: must name at least one".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: Strategy,
    pub seed: u64,
    pub grid: SuccessGrid,
    pub macro_average: f64,
    pub gain: Option<GainResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub runs: Vec<RunResult>,
    pub median_macro: f64,
    pub median_gain_mean: Option<f64>,
    pub median_gain_std: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub n_sessions: usize,
    pub strategies: Vec<StrategyReport>,
    /// Paired t-tests on per-query Success@5 values, pooled across seeds.
    pub significance: SignificanceMatrix,
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One (strategy, seed) run over the whole stream. Writes per-session
/// checkpoints, shards and the replay buffer when `out_dir` is given.
/// Pretrain the base checkpoint shared by every strategy for a given seed:
/// mixed-domain triples, fixed derived seeds.
pub fn build_base(corpus: &Corpus, config: &ExperimentConfig, seed: u64) -> Result<EncoderModel> {
    let mut base_triples = Vec::new();
    for dom in &corpus.domains {
        let ids = make_training_triples(corpus, dom, derive_seed(seed, 0xbadc))?;
        base_triples.extend(resolve_triples(corpus, &ids)?);
    }
    let pretrain_cfg = TrainConfig {
        steps: config.pretrain_steps,
        seed: derive_seed(seed, 0xb0),
        ..config.train.clone()
    };
    pretrain_base(config.encoder, &base_triples, &pretrain_cfg)
}

pub fn run_single(
    corpus: &Corpus,
    stream: &Stream,
    strategy: Strategy,
    seed: u64,
    config: &ExperimentConfig,
    base_override: Option<&EncoderModel>,
    out_dir: Option<&Path>,
) -> Result<RunResult> {
    config.validate()?;
    let n_sessions = stream.n_sessions;
    let doc_by_id: BTreeMap<&str, &Document> =
        corpus.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let query_text: BTreeMap<&str, &str> =
        corpus.queries.iter().map(|q| (q.query_id.as_str(), q.text.as_str())).collect();

    let session_triples: Vec<Vec<TrainingTriple>> = stream
        .sessions
        .iter()
        .map(|s| resolve_triples(corpus, &s.triples))
        .collect::<Result<_>>()?;

    let base: EncoderModel = match base_override {
        Some(b) => b.clone(),
        None => build_base(corpus, config, seed)?,
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        base.save(&dir.join("base.bin"))?;
    }

    let mut prev = base.clone();
    let mut replay: ReplaySet<Real> = ReplaySet::new();
    let mut shards: Vec<IndexShard<Real>> = Vec::new();
    let mut cells: Vec<EvalCell> = Vec::new();
    let mut indexed: HashSet<String> = HashSet::new();

    for s in 0..n_sessions {
        let train_cfg = TrainConfig { seed: derive_seed(seed, 0x100 + s as u64), ..config.train.clone() };
        let model = train_session(
            strategy,
            s,
            &prev,
            &base,
            &session_triples[s],
            &replay,
            &train_cfg,
        )?;

        replay.extend(sample_replay(
            &session_triples[s],
            &model,
            s as u32,
            config.train.replay_k,
            derive_seed(seed, 0x200 + s as u64),
        ));

        let docs: Vec<&Document> = stream.sessions[s]
            .documents
            .iter()
            .map(|id| {
                doc_by_id
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("stream references unknown doc {id}")))
            })
            .collect::<Result<_>>()?;
        for d in &docs {
            if !indexed.insert(d.doc_id.clone()) {
                return Err(Error::Validation(format!(
                    "document {} would be encoded into a second shard",
                    d.doc_id
                )));
            }
        }
        let shard = build_shard(
            &model,
            &docs,
            config.index_mode,
            s as u32,
            derive_seed(seed, 0x300 + s as u64),
        )?;

        if let Some(dir) = out_dir {
            model.save(&dir.join(format!("model_s{s}.bin")))?;
            save_shard(&shard, &dir.join(format!("shard_s{s}.idx")))?;
            replay.save(&dir.join("replay.bin"))?;
        }
        shards.push(shard);

        // evaluate every query set introduced so far with the current model
        for i in 0..=s {
            let mut per_query = Vec::with_capacity(stream.sessions[i].queries.len());
            for qid in &stream.sessions[i].queries {
                let text = query_text
                    .get(qid.as_str())
                    .ok_or_else(|| Error::Validation(format!("stream references unknown query {qid}")))?;
                let qvec = model.encode(text);
                let ranked = search_all(&shards, &qvec, config.k);
                let empty = BTreeSet::new();
                let rels = corpus.qrels.get(qid).unwrap_or(&empty);
                per_query.push(crate::evalkit::success_at_5(&ranked, rels));
            }
            cells.push(EvalCell::new(i, s, per_query));
        }

        prev = model;
    }

    let grid = SuccessGrid::new(n_sessions, cells)?;
    let macro_average = grid.macro_average();
    let gain = match relative_gain(&grid) {
        Ok(g) => Some(g),
        Err(e) => {
            log::warn!("{strategy} seed {seed}: relative gain undefined: {e}");
            None
        }
    };
    Ok(RunResult { strategy, seed, grid, macro_average, gain })
}

/// Worker-thread cap: `MURR_THREADS` if set, else available parallelism.
pub fn worker_threads(jobs: usize) -> usize {
    let cap = std::env::var("MURR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    cap.min(jobs).max(1)
}

/// Run every (strategy, seed) pair, in parallel up to the worker cap, and
/// aggregate. A failed run is logged and dropped; the report covers the
/// runs that completed.
pub fn run_experiment(
    corpus: &Corpus,
    stream: &Stream,
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    config.validate()?;
    let jobs: Vec<(Strategy, u64)> = config
        .strategies
        .iter()
        .flat_map(|&st| config.seeds.iter().map(move |&sd| (st, sd)))
        .collect();

    // The base checkpoint depends only on the seed, so pretrain it once per
    // seed and share it across strategies.
    let bases: Mutex<BTreeMap<u64, std::sync::Arc<EncoderModel>>> = Mutex::new(BTreeMap::new());
    let base_for = |seed: u64| -> Result<std::sync::Arc<EncoderModel>> {
        if let Some(b) = bases.lock().unwrap().get(&seed) {
            return Ok(b.clone());
        }
        let b = std::sync::Arc::new(build_base(corpus, config, seed)?);
        Ok(bases.lock().unwrap().entry(seed).or_insert(b).clone())
    };

    let results: Vec<Option<RunResult>> = {
        let slots: Mutex<Vec<Option<RunResult>>> = Mutex::new(vec![None; jobs.len()]);
        let next = AtomicUsize::new(0);
        let n_workers = worker_threads(jobs.len());
        std::thread::scope(|scope| {
            for _ in 0..n_workers {
                scope.spawn(|| loop {
                    let j = next.fetch_add(1, Ordering::SeqCst);
                    if j >= jobs.len() {
                        break;
                    }
                    let (strategy, seed) = jobs[j];
                    let run_dir: Option<PathBuf> =
                        out_dir.map(|d| d.join(format!("{}-seed{seed}", strategy.ident())));
                    let outcome = base_for(seed).and_then(|base| {
                        run_single(corpus, stream, strategy, seed, config, Some(&base), run_dir.as_deref())
                    });
                    match outcome {
                        Ok(r) => slots.lock().unwrap()[j] = Some(r),
                        Err(e) => log::error!("run {strategy} seed {seed} failed: {e}"),
                    }
                });
            }
        });
        slots.into_inner().unwrap()
    };

    let mut strategy_reports = Vec::new();
    for &strategy in &config.strategies {
        let runs: Vec<RunResult> = results
            .iter()
            .flatten()
            .filter(|r| r.strategy == strategy)
            .cloned()
            .collect();
        if runs.is_empty() {
            return Err(Error::Training(format!("all runs failed for strategy {strategy}")));
        }
        let macros: Vec<f64> = runs.iter().map(|r| r.macro_average).collect();
        let gain_means: Vec<f64> = runs.iter().filter_map(|r| r.gain.as_ref().map(|g| g.mean)).collect();
        let gain_stds: Vec<f64> = runs.iter().filter_map(|r| r.gain.as_ref().map(|g| g.std)).collect();
        strategy_reports.push(StrategyReport {
            strategy,
            median_macro: median(&macros),
            median_gain_mean: (!gain_means.is_empty()).then(|| median(&gain_means)),
            median_gain_std: (!gain_stds.is_empty()).then(|| median(&gain_stds)),
            runs,
        });
    }

    // pairwise significance on per-query values pooled across shared seeds
    let mut significance = SignificanceMatrix::default();
    for (ai, a) in strategy_reports.iter().enumerate() {
        for b in strategy_reports.iter().skip(ai + 1) {
            let mut va = Vec::new();
            let mut vb = Vec::new();
            for ra in &a.runs {
                if let Some(rb) = b.runs.iter().find(|r| r.seed == ra.seed) {
                    va.extend(ra.grid.flattened_per_query());
                    vb.extend(rb.grid.flattened_per_query());
                }
            }
            if va.len() >= 2 && va.len() == vb.len() {
                significance.insert(
                    a.strategy.ident(),
                    b.strategy.ident(),
                    paired_t_test(&va, &vb)?,
                );
            }
        }
    }

    let report = ExperimentReport {
        scenario: stream.scenario.clone(),
        n_sessions: stream.n_sessions,
        strategies: strategy_reports,
        significance,
    };
    if let Some(dir) = out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Ablation sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Replay,
    Alpha,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replay" => Ok(SweepAxis::Replay),
            "alpha" => Ok(SweepAxis::Alpha),
            other => Err(Error::Config(format!("unknown sweep axis {other:?} (replay|alpha)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub report: ExperimentReport,
}

/// One full MURR-CF experiment per axis value, shared seeds.
pub fn sweep(
    corpus: &Corpus,
    stream: &Stream,
    config: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    out_dir: Option<&Path>,
) -> Result<Vec<SweepEntry>> {
    if values.is_empty() {
        return Err(Error::Config("sweep: values must be non-empty".into()));
    }
    let mut entries = Vec::new();
    for &value in values {
        let mut cfg = config.clone();
        cfg.strategies = vec![Strategy::MurrCf];
        match axis {
            SweepAxis::Replay => cfg.train.replay_k = value as usize,
            SweepAxis::Alpha => cfg.train.alpha = value,
        }
        let sub_dir: Option<PathBuf> = out_dir.map(|d| {
            d.join(match axis {
                SweepAxis::Replay => format!("replay-{}", value as usize),
                SweepAxis::Alpha => format!("alpha-{value}"),
            })
        });
        let report = run_experiment(corpus, stream, &cfg, sub_dir.as_deref())?;
        entries.push(SweepEntry { value, report });
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let file = std::io::BufWriter::new(std::fs::File::create(dir.join("sweep.json"))?);
        serde_json::to_writer_pretty(file, &entries)?;
    }
    Ok(entries)
}

// ---------------------------------------------------------------------------
// Report rendering

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown format {other:?} (json|csv|markdown)"))),
        }
    }
}

/// Write report.json, report.csv and report.md into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), render_report(report, ReportFormat::Json)?)?;
    std::fs::write(dir.join("report.csv"), render_report(report, ReportFormat::Csv)?)?;
    std::fs::write(dir.join("report.md"), render_report(report, ReportFormat::Markdown)?)?;
    Ok(())
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)?),
        ReportFormat::Csv => {
            let mut out = String::from("strategy,scenario,seed,query_set,session,success_at_5\n");
            for sr in &report.strategies {
                for run in &sr.runs {
                    let mut cells: Vec<_> = run.grid.cells.iter().collect();
                    cells.sort_by_key(|c| (c.query_set, c.session));
                    for c in cells {
                        out.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            sr.strategy.ident(),
                            report.scenario,
                            run.seed,
                            c.query_set,
                            c.session,
                            c.mean
                        ));
                    }
                }
            }
            Ok(out)
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let mut w = |s: String| out.push_str(&s);
            w(format!("# Scenario {}\n\n", report.scenario));
            w("## Macro-average Success@5 (median over seeds)\n\n".into());
            w("| strategy | macro Success@5 |\n|---|---|\n".into());
            for sr in &report.strategies {
                w(format!("| {} | {:.3} |\n", sr.strategy.ident(), sr.median_macro));
            }
            w("\n## Relative Success@5 gain, mean (std), median over seeds\n\n".into());
            w("| strategy | gain |\n|---|---|\n".into());
            for sr in &report.strategies {
                match (sr.median_gain_mean, sr.median_gain_std) {
                    (Some(m), Some(s)) => w(format!(
                        "| {} | {} |\n",
                        sr.strategy.ident(),
                        format_gain_cell(m, s)
                    )),
                    _ => w(format!("| {} | undefined |\n", sr.strategy.ident())),
                }
            }
            w("\n## Pairwise paired t-tests (two-sided p)\n\n".into());
            w("| pair | t | p |\n|---|---|---|\n".into());
            for (pair, r) in &report.significance.pairs {
                w(format!("| {pair} | {:.3} | {:.4} |\n", r.t, r.p));
            }
            Ok(out)
        }
    }
}

/// Gain-table cell: mean to three decimals, std in parentheses to two.
pub fn format_gain_cell(mean: f64, std: f64) -> String {
    format!("{mean:.3} ({std:.2})")
}

/// Re-emit a previously written report.json in the requested format.
pub fn reformat_report(in_dir: &Path, format: ReportFormat, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(in_dir.join("report.json"))?;
    let report: ExperimentReport = serde_json::from_str(&text)?;
    out.write_all(render_report(&report, format)?.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn gain_cell_formatting() {
        assert_eq!(format_gain_cell(-0.013, 0.07), "-0.013 (0.07)");
        assert_eq!(format_gain_cell(0.007, 0.10), "0.007 (0.10)");
    }

    #[test]
    fn config_defaults_parse_from_empty_object() {
        let cfg: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.k, 100);
        assert_eq!(cfg.train.alpha, 0.01);
        assert_eq!(cfg.train.replay_k, 32);
        assert_eq!(cfg.strategies.len(), 5);
        assert_eq!(cfg.seeds.len(), 5);
        assert!(matches!(cfg.index_mode, IndexMode::Flat));
    }

    #[test]
    fn empty_strategy_list_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.strategies.clear();
        assert!(cfg.validate().is_err());
    }
}
