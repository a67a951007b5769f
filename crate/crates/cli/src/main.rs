use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ecgsleep_core::assoc::CohortTable;
use ecgsleep_core::eval::{split_recordings, SplitManifest, SplitRatios};
use ecgsleep_core::model::{build_windows, ingest_probabilities, ContextWindow, ProbabilityMatrix};
use ecgsleep_core::pipeline::{
    associate, cmd_ingest, default_schemes, discover_recordings, evaluate_predictions, load_cached, render_html,
    run_batch, train_from_cache, validate, write_atomic, LoadedModel, ModelKind, OvernightReport, PipelineConfig,
    PipelineError, PsqiRecord, RunContext, REPORT_SCHEMA,
};
use ecgsleep_core::synth::{synth_recording, SynthConfig};
use ecgsleep_core::{Stage, EPOCH_SECONDS};

/// Overnight sleep staging and Holter analysis from single-lead ECG.
#[derive(Parser, Debug)]
#[command(name = "ecgsleep", version)]
struct Cli {
    /// Configuration file (TOML). ECGSLEEP__SECTION__KEY variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// ECG channel label or alias.
    #[arg(long, global = true)]
    channel: Option<String>,
    /// Seed for training and bootstrap resampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decode, label, QC and featurise recordings into a cache.
    Ingest {
        /// EDF files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Cache directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce overnight reports.
    Run {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Report directory (default: report.output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train the staging (and optionally events) network on cached recordings.
    Train {
        #[arg(long)]
        cache: PathBuf,
        /// Training ids, one per line (a split list).
        #[arg(long)]
        train: PathBuf,
        /// Validation ids for early stopping.
        #[arg(long)]
        val: Option<PathBuf>,
        /// Also train the arousal/respiratory network.
        #[arg(long)]
        events: bool,
        /// Output directory for checkpoints.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score stage predictions against cached reference labels.
    Evaluate {
        #[arg(long)]
        cache: PathBuf,
        /// Ids to score, one per line.
        #[arg(long)]
        ids: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare sleep metrics across arrhythmia strata of a cohort table.
    Associate {
        /// Cohort CSV as written by `run`.
        #[arg(long)]
        cohort: PathBuf,
        /// CSV with an id column and PSQI scores.
        #[arg(long)]
        psqi: Option<PathBuf>,
        #[arg(long, default_value = "psqi")]
        psqi_column: String,
        /// Output JSON file; a text rendering goes to stdout.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render HTML from report JSON files.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Output directory (default: next to each JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split recordings into train/val/test lists.
    Split {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Preset name: standard (70/15/15) or wide (60/20/20).
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic night (EDF, annotations, beat labels).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "synthetic")]
        id: String,
        #[arg(long, default_value_t = 8.0)]
        hours: f64,
        /// Leave out the SpO2 channel.
        #[arg(long)]
        no_spo2: bool,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Native checkpoint to stage with.
    #[arg(long, conflicts_with = "probabilities")]
    checkpoint: Option<PathBuf>,
    /// Events checkpoint (arousal and respiratory heads).
    #[arg(long, requires = "checkpoint")]
    events_checkpoint: Option<PathBuf>,
    /// External probability file, or a directory of <id>.csv / <id>.prob.
    #[arg(long)]
    probabilities: Option<PathBuf>,
}

impl ModelArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(p) = &self.checkpoint {
            cfg.model.source = ModelKind::Native;
            cfg.model.checkpoint = Some(p.clone());
            cfg.model.events_checkpoint = self.events_checkpoint.clone();
        } else if let Some(p) = &self.probabilities {
            cfg.model.source = ModelKind::External;
            cfg.model.probabilities = Some(p.clone());
        }
    }
}

/// Exit 2 for configuration errors, 1 for everything else.
fn exit_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<PipelineError>() {
        Some(PipelineError::Config(_)) => 2,
        _ => 1,
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
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(c) = &cli.channel {
        cfg.input.channel = c.clone();
    }
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
        cfg.eval.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn context(cfg: PipelineConfig) -> Result<RunContext> {
    cfg.validate()?;
    Ok(RunContext::new(cfg)?)
}

fn expand(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        out.extend(discover_recordings(p).with_context(|| format!("{}", p.display()))?);
    }
    Ok(out)
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let lines = SplitManifest::read_list(path).with_context(|| format!("{}", path.display()))?;
    // Lists may hold paths; the cache is keyed by file stem.
    Ok(lines
        .iter()
        .map(|l| Path::new(l).file_stem().and_then(|s| s.to_str()).unwrap_or(l).to_string())
        .collect())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).with_context(|| format!("{}", path.display()))
}

fn dispatch(cli: Cli) -> Result<u8> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Ingest { inputs, out } => {
            let paths = expand(&inputs)?;
            let ctx = context(cfg)?;
            let s = cmd_ingest(&paths, &ctx, &out)?;
            println!(
                "{} recordings: {} cached, {} unchanged, {} excluded, {} failed",
                s.total,
                s.cached.len(),
                s.cache_hits.len(),
                s.excluded.values().map(Vec::len).sum::<usize>(),
                s.failures.len()
            );
            for (reason, n) in s.exclusion_counts() {
                println!("  excluded ({reason}): {n}");
            }
            for f in &s.failures {
                eprintln!("  failed {}: {}", f.path, f.reason);
            }
            Ok(if s.failures.is_empty() { 0 } else { 1 })
        }
        Command::Run { inputs, out, model } => {
            model.apply(&mut cfg);
            let out = out.unwrap_or_else(|| cfg.report.output_dir.clone());
            let paths = expand(&inputs)?;
            let ctx = context(cfg)?;
            let summary = run_batch(&paths, &ctx, &out);
            std::fs::create_dir_all(&out)?;
            write_atomic(&out.join("cohort.csv"), summary.cohort.to_csv().as_bytes())?;
            println!("{} reports written to {}", paths.len() - summary.failures.len(), out.display());
            for (id, msg) in &summary.failures {
                eprintln!("  {id}: {msg}");
            }
            Ok(summary.exit_code().code() as u8)
        }
        Command::Train { cache, train, val, events, out } => {
            let train_ids = read_ids(&train)?;
            let val_ids = match &val {
                Some(p) => read_ids(p)?,
                None => Vec::new(),
            };
            cfg.validate()?;
            let models = train_from_cache(&cache, &train_ids, &val_ids, &cfg, events)?;
            std::fs::create_dir_all(&out)?;
            write_json(&out.join("staging.ckpt.json"), &models.staging.to_checkpoint())?;
            write_json(&out.join("staging.train.json"), &models.staging_report)?;
            if let Some((clf, report)) = &models.events {
                write_json(&out.join("events.ckpt.json"), &clf.to_checkpoint())?;
                write_json(&out.join("events.train.json"), report)?;
            }
            let r = &models.staging_report;
            println!(
                "staging: {} passes, best pass {} (selection loss {:?}); checkpoints in {}",
                r.passes_run,
                r.best_pass,
                r.best_val_loss,
                out.display()
            );
            Ok(0)
        }
        Command::Evaluate { cache, ids, model, out } => {
            model.apply(&mut cfg);
            if cfg.model.source == ModelKind::Reference {
                return Err(PipelineError::Config("evaluate needs --checkpoint or --probabilities".into()).into());
            }
            let ids = read_ids(&ids)?;
            let ctx = context(cfg)?;
            let (truth, probs) = pooled_predictions(&cache, &ids, &ctx)?;
            let report = evaluate_predictions(&truth, &probs, ctx.config.eval.bootstrap_b, ctx.config.eval.seed)?;
            write_json(&out, &report)?;
            for g in &report.results {
                println!(
                    "{:?}: accuracy {:.3} kappa {} weighted F1 {:.3}",
                    g.granularity,
                    g.metrics.accuracy,
                    g.metrics.kappa.map_or("n/a".into(), |k| format!("{k:.3}")),
                    g.metrics.weighted_f1
                );
            }
            Ok(0)
        }
        Command::Associate { cohort, psqi, psqi_column, out } => {
            let read = |p: &Path| -> Result<CohortTable> {
                let f = std::fs::File::open(p).with_context(|| format!("{}", p.display()))?;
                Ok(CohortTable::read_csv(f, b',').with_context(|| format!("{}", p.display()))?)
            };
            let table = read(&cohort)?;
            let records = match &psqi {
                Some(p) => PsqiRecord::join(&table, &read(p)?, &psqi_column)?,
                None => Vec::new(),
            };
            let report = associate(&table, &default_schemes(&cfg.assoc), &cfg.assoc, &records)?;
            write_json(&out, &report)?;
            print!("{}", report.render_text());
            Ok(0)
        }
        Command::Report { reports, out } => {
            let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA)?;
            for path in &reports {
                let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
                let value: serde_json::Value = serde_json::from_str(&text)?;
                validate(&schema, &value).map_err(|e| anyhow!("{}: {e}", path.display()))?;
                let report = OvernightReport::from_json(&text)?;
                let dir = out.clone().unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
                std::fs::create_dir_all(&dir)?;
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
                write_atomic(&dir.join(format!("{stem}.html")), render_html(&report).as_bytes())?;
            }
            println!("{} pages rendered", reports.len());
            Ok(0)
        }
        Command::Split { inputs, preset, out } => {
            let name = preset.unwrap_or_else(|| cfg.eval.split.clone());
            let ratios = SplitRatios::preset(&name)
                .ok_or_else(|| PipelineError::Config(format!("unknown split preset '{name}'")))?;
            let paths: Vec<String> = expand(&inputs)?.iter().map(|p| p.display().to_string()).collect();
            let manifest = split_recordings(&paths, &ratios, cfg.eval.seed)?;
            manifest.write_dir(&out)?;
            let [a, b, c] = manifest.lists().map(Vec::len);
            println!("train {a}, val {b}, test {c} in {}", out.display());
            Ok(0)
        }
        Command::Synth { out, id, hours, no_spo2 } => {
            if !(hours > 2.0) {
                bail!("--hours must exceed 2 (one hour is trimmed at each end)");
            }
            let seed = cli.seed.unwrap_or(1);
            let rec = synth_recording(&SynthConfig { hours, seed, spo2: !no_spo2, ..SynthConfig::default() });
            std::fs::create_dir_all(&out)?;
            write_atomic(&out.join(format!("{id}.edf")), &rec.edf.to_bytes())?;
            write_atomic(&out.join(format!("{id}.xml")), rec.annotations_xml.as_bytes())?;
            write_atomic(&out.join(format!("{id}.beats")), rec.beats_text().as_bytes())?;
            println!("wrote {id}.edf, {id}.xml and {id}.beats to {}", out.display());
            Ok(0)
        }
    }
}

/// Reference stages and five-class probabilities for every cached id,
/// stacked in id order.
fn pooled_predictions(cache: &Path, ids: &[String], ctx: &RunContext) -> Result<(Vec<Stage>, ProbabilityMatrix)> {
    let mut truth = Vec::new();
    let mut data = Vec::new();
    for id in ids {
        let (entry, feats) = load_cached(cache, id)?;
        let n = entry.labels.n_epochs;
        let p = match &ctx.model {
            LoadedModel::Native { staging, .. } => {
                let w = ContextWindow::new(ctx.config.model.window)?;
                staging.predict(&build_windows(&feats, w)?)?.remove(0)
            }
            LoadedModel::External(dir) => {
                let file = [dir.join(format!("{id}.csv")), dir.join(format!("{id}.prob"))]
                    .into_iter()
                    .find(|p| p.is_file())
                    .ok_or_else(|| anyhow!("no probability file for '{id}' in {}", dir.display()))?;
                let p = ingest_probabilities(&std::fs::read(&file)?, None)?;
                let n_full = (entry.duration_s / EPOCH_SECONDS).floor() as usize;
                let trim = ctx.config.input.trim_epochs;
                if p.n_rows() == n {
                    p
                } else if p.n_rows() == n_full && n_full == n + 2 * trim {
                    ProbabilityMatrix::new(5, p.as_slice()[trim * 5..(trim + n) * 5].to_vec())?
                } else {
                    bail!("{id}: {} probability rows for {n} labelled epochs", p.n_rows());
                }
            }
            LoadedModel::Reference => unreachable!("rejected above"),
        };
        if p.n_classes() != 5 {
            bail!("{id}: expected 5 classes, got {}", p.n_classes());
        }
        truth.extend_from_slice(&entry.labels.stage);
        data.extend_from_slice(p.as_slice());
    }
    Ok((truth, ProbabilityMatrix::new(5, data)?))
}
