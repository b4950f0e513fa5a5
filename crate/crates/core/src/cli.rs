//! Command-line front end. [`run`] parses arguments, dispatches and maps failures to
//! exit codes: 0 success, 1 usage or configuration error, 2 data or runtime error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::condition::Condition;
use crate::config::AppConfig;
use crate::dataio::{ingest_dir, synth_corpus, Corpus, LabelMap};
use crate::denoiser::{save_weights, train, LoadedModel, WeightsSidecar};
use crate::diffusion::{sample, SamplerConfig};
use crate::error::{Error, Result};
use crate::metrics::{
    ablation_suite, evaluate, format_table, AblationConfig, AblationReport, DiffusionGenerator,
    DirectionSummary, EvalConfig, IdentityGenerator, RandomGenerator,
};
use crate::raster::rasterize;
use crate::rules::RuleReport;
use crate::server::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "layoutforge", version, about = "Conditional diffusion for mobile UI layouts")]
struct Cli {
    /// JSON config file; falls back to $LAYOUTFORGE_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Corpus file (JSON lines).
    #[arg(long, conflicts_with = "synth_n")]
    corpus: Option<PathBuf>,
    /// Generate a synthetic corpus of this size instead of reading one.
    #[arg(long)]
    synth_n: Option<usize>,
    #[arg(long)]
    synth_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Diffusion,
    Identity,
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the denoiser and write weights plus a JSON sidecar.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate one layout.
    Sample {
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value = "")]
        prompt: String,
        /// 64 comma-separated cells in [0, 1], row-major.
        #[arg(long)]
        sketch: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_projection: bool,
        /// Layout JSON destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long)]
        ppm: Option<PathBuf>,
    },
    /// Score a model on the validation split.
    Eval {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum, default_value = "diffusion")]
        model: ModelKind,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_items: Option<usize>,
        #[arg(long)]
        no_feedback: bool,
        #[arg(long)]
        no_projection: bool,
        /// Report JSON destination.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train and evaluate the four ablation variants, once per run.
    Ablate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        max_items: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Write a synthetic corpus.
    Synth {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a directory of RICO view hierarchies into a corpus.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        label_map: Option<PathBuf>,
        /// Screen size in pixels, e.g. 1440x2560.
        #[arg(long)]
        screen: Option<String>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

/// Entry point shared by the binary and tests.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let cfg = match AppConfig::resolve(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    match dispatch(cli.command, &cfg, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pretty(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

/// Corpus from flags, else the configured file, else a synthetic one; split per config.
fn load_corpus(args: &CorpusArgs, cfg: &AppConfig, offset: u64) -> Result<Corpus> {
    let corpus = if let Some(path) = &args.corpus {
        Corpus::load(path)?
    } else if let Some(n) = args.synth_n {
        synth_corpus(n, args.synth_seed.unwrap_or(cfg.seeds.synth) + offset)?
    } else if let Some(path) = &cfg.paths.corpus {
        Corpus::load(path)?
    } else {
        synth_corpus(cfg.data.synth_n, args.synth_seed.unwrap_or(cfg.seeds.synth) + offset)?
    };
    corpus.split(cfg.data.split_ratio, cfg.seeds.split + offset)
}

fn weights_path(flag: Option<PathBuf>, cfg: &AppConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.paths.weights.clone()).ok_or_else(|| {
        Error::InvalidArgument("no weights given: pass --weights or set paths.weights".into())
    })
}

fn parse_sketch(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|cell| {
            cell.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad sketch cell `{}`", cell.trim())))
        })
        .collect()
}

fn parse_screen(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidArgument(format!("screen must look like 1440x2560, got `{text}`"));
    let (w, h) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: f64 = w.trim().parse().map_err(|_| bad())?;
    let h: f64 = h.trim().parse().map_err(|_| bad())?;
    if !(w > 0.0 && h > 0.0) {
        return Err(bad());
    }
    Ok((w, h))
}

fn dispatch(command: Command, cfg: &AppConfig, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train {
            corpus,
            epochs,
            seed,
            out: dest,
        } => {
            let corpus = load_corpus(&corpus, cfg, 0)?;
            let mut tc = cfg.train.clone();
            if let Some(e) = epochs {
                tc.epochs = e;
            }
            if let Some(s) = seed {
                tc.seed = s;
            }
            let sched = cfg.schedule.build()?;
            let data = corpus.examples(&corpus.train)?;
            let mut log_err = None;
            let outcome = train(&data, &tc, &sched, &mut |epoch, loss| {
                if let Err(e) = writeln!(out, "epoch {epoch} loss {loss:.6}") {
                    log_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = log_err {
                return Err(Error::io("<stdout>", e));
            }
            save_weights(&dest, &outcome.params)?;
            WeightsSidecar::new(
                outcome.params.architecture(),
                cfg.schedule,
                tc,
                outcome.epoch_losses,
            )
            .save(WeightsSidecar::path_for(&dest))
        }
        Command::Sample {
            weights,
            prompt,
            sketch,
            seed,
            no_projection,
            out: dest,
            png,
            ppm,
        } => {
            let sketch = sketch.as_deref().map(parse_sketch).transpose()?;
            let condition = Condition::encode(&prompt, sketch.as_deref())?;
            let model = LoadedModel::load(weights_path(weights, cfg)?, &cfg.schedule)?;
            let sched = model.schedule.build()?;
            let mut sc = SamplerConfig::new(seed.unwrap_or(cfg.seeds.sample))
                .with_condition(condition)
                .with_projection_every(if no_projection { 0 } else { cfg.sampling.projection_every });
            sc.rules = cfg.rules;
            let layout = sample(&sc, &model.params, &sched)?;
            let text = layout.to_json_pretty() + "\n";
            match &dest {
                Some(path) => write_file(path, &text)?,
                None => emit(out, &text)?,
            }
            if png.is_some() || ppm.is_some() {
                let image = rasterize(&layout);
                if let Some(path) = &png {
                    image.save_png(path)?;
                }
                if let Some(path) = &ppm {
                    image.save_ppm(path)?;
                }
            }
            if dest.is_some() {
                let report = RuleReport::of(&layout, &cfg.rules);
                emit(out, &serde_json::to_string(&report)?)?;
                emit(out, "\n")?;
            }
            Ok(())
        }
        Command::Eval {
            corpus,
            model,
            weights,
            seed,
            max_items,
            no_feedback,
            no_projection,
            out: dest,
            table,
            csv,
        } => {
            let corpus = load_corpus(&corpus, cfg, 0)?;
            let ec = EvalConfig {
                seed: seed.unwrap_or(cfg.seeds.eval),
                max_items,
                rules: cfg.rules,
            };
            let report = match model {
                ModelKind::Identity => evaluate("identity", &IdentityGenerator, &corpus, &ec)?,
                ModelKind::Random => evaluate("random", &RandomGenerator, &corpus, &ec)?,
                ModelKind::Diffusion => {
                    let model = LoadedModel::load(weights_path(weights, cfg)?, &cfg.schedule)?;
                    let sched = model.schedule.build()?;
                    let mut feedback = cfg.feedback;
                    feedback.enabled &= !no_feedback;
                    let generator = DiffusionGenerator {
                        params: &model.params,
                        sched: &sched,
                        use_condition: true,
                        projection_every: if no_projection { 0 } else { cfg.sampling.projection_every },
                        rules: cfg.rules,
                        feedback,
                    };
                    evaluate("diffusion", &generator, &corpus, &ec)?
                }
            };
            let text = format_table(std::slice::from_ref(&report));
            emit(out, &text)?;
            if let Some(path) = &dest {
                write_file(path, &pretty(&report)?)?;
            }
            if let Some(path) = &table {
                write_file(path, &text)?;
            }
            if let Some(path) = &csv {
                write_file(path, &report.to_csv())?;
            }
            Ok(())
        }
        Command::Ablate {
            corpus,
            epochs,
            runs,
            max_items,
            out: dest,
            table,
        } => {
            if runs == 0 {
                return Err(Error::InvalidArgument("--runs must be at least 1".into()));
            }
            let mut reports: Vec<AblationReport> = Vec::with_capacity(runs);
            let mut text = String::new();
            for r in 0..runs as u64 {
                let data = load_corpus(&corpus, cfg, r)?;
                let mut tc = cfg.train.clone();
                if let Some(e) = epochs {
                    tc.epochs = e;
                }
                tc.seed += r;
                let ac = AblationConfig {
                    schedule: cfg.schedule,
                    train: tc,
                    projection_every: cfg.sampling.projection_every,
                    feedback: cfg.feedback,
                    eval: EvalConfig {
                        seed: cfg.seeds.eval + r,
                        max_items,
                        rules: cfg.rules,
                    },
                };
                let report = ablation_suite(&data, &ac)?;
                if runs > 1 {
                    text.push_str(&format!("run {r}\n"));
                }
                text.push_str(&report.to_table());
                reports.push(report);
            }
            let summary = DirectionSummary::of(&reports);
            if runs > 1 {
                text.push_str(&summary.to_text());
            }
            emit(out, &text)?;
            if let Some(path) = &dest {
                write_file(path, &pretty(&json!({ "runs": reports, "summary": summary }))?)?;
            }
            if let Some(path) = &table {
                write_file(path, &text)?;
            }
            Ok(())
        }
        Command::Synth { n, seed, out: dest } => {
            let corpus = synth_corpus(n.unwrap_or(cfg.data.synth_n), seed.unwrap_or(cfg.seeds.synth))?;
            corpus.save(&dest)?;
            emit(out, &format!("wrote {} layouts to {}\n", corpus.len(), dest.display()))
        }
        Command::Ingest {
            dir,
            out: dest,
            label_map,
            screen,
        } => {
            let map = match label_map.or_else(|| cfg.paths.label_map.clone()) {
                Some(path) => LabelMap::load(path)?,
                None => LabelMap::builtin(),
            };
            let screen = screen.as_deref().map(parse_screen).transpose()?.unwrap_or(cfg.data.screen_px);
            let corpus = ingest_dir(&dir, screen, &map)?;
            corpus.save(&dest)?;
            emit(out, &format!("wrote {} layouts to {}\n", corpus.len(), dest.display()))
        }
        Command::Serve {
            weights,
            host,
            port,
            static_dir,
        } => {
            let model = LoadedModel::load(weights_path(weights, cfg)?, &cfg.schedule)?;
            let state = Arc::new(AppState::new(model, cfg)?);
            let host = host.unwrap_or_else(|| cfg.server.host.clone());
            let ip: IpAddr = host
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad host `{host}`")))?;
            let addr = SocketAddr::new(ip, port.unwrap_or(cfg.server.port));
            let static_dir = static_dir.or_else(|| cfg.paths.static_dir.clone());
            let runtime = tokio::runtime::Runtime::new()
                .map_err(|e| Error::InvalidArgument(format!("cannot start runtime: {e}")))?;
            runtime.block_on(server::serve(addr, state, static_dir.as_deref()))
        }
    }
}
