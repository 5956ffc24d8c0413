use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alert_core::alert::{run_stream_with, AlertConfig, AlertEngine, Snapshot};
use alert_core::archive::WeightArchive;
use alert_core::events::{
    generate_synthetic, read_stream, write_stream, CcimSampler, CtimSampler, Event, SampleMode, StreamFormat,
    SyntheticSource,
};
use alert_core::grid::{filter_active, partition_sample};
use alert_core::harness::{
    bench, count_flops, evaluate, synthetic_eval, verify_decay, verify_strict, Config, SampleStats, TaggedPrediction,
};
use alert_core::head::Prediction;
use alert_core::model::Model;
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alert", version, about = "Event-camera token engine with on-demand transformer readout")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Preset name (default, lmm, rm) or path to a key=value config file.
    #[arg(long, global = true, default_value = "default")]
    config: String,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic event stream.
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Also write the configured model's weights here.
        #[arg(long)]
        save_weights: Option<PathBuf>,
    },
    /// Batch-embed every sample window of a stream into a token dump.
    Embed {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_samples: Option<usize>,
    },
    /// Replay a stream incrementally and classify every scheduled readout.
    Stream {
        /// Event file; a synthetic stream from the config when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Dump every snapshot to this archive.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Classify snapshots from a dump written by `stream` or `embed`.
    Classify {
        #[arg(long)]
        snapshots: PathBuf,
    },
    /// Check batch/incremental equivalence and lazy/eager decay.
    Verify {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1000)]
        decay_steps: usize,
    },
    /// Print analytic FLOP counts.
    Flops {
        #[arg(long, default_value_t = 0)]
        events: u64,
        #[arg(long)]
        active_events: Option<u64>,
        #[arg(long, default_value_t = 0)]
        active_patches: u64,
        /// Measure sample statistics from the first window of this stream.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Time per-event updates and readouts.
    Bench {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        warmup: usize,
    },
    /// Score readout predictions: sample, file-vote and sliding-vote accuracy.
    Eval {
        /// Labelled event file as PATH=CLASS; repeatable. Synthetic files when omitted.
        #[arg(long = "file", value_name = "PATH=CLASS")]
        files: Vec<String>,
        #[arg(long, default_value_t = 2)]
        files_per_class: usize,
    },
}

/// `println!` that reports a closed stdout instead of panicking.
macro_rules! emit {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        writeln!(std::io::stdout(), $($arg)*).map_err(|e| alert_core::Error::io("<stdout>", e))
    }};
}

fn load_config(g: &Global) -> anyhow::Result<Config> {
    let mut cfg = Config::load(&g.config)?;
    for kv in &g.overrides {
        cfg.apply_override(kv)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_events(cfg: &Config, input: Option<&Path>) -> anyhow::Result<Vec<Event>> {
    Ok(match input {
        Some(p) => read_stream(p, StreamFormat::from_path(p))?.1,
        None => generate_synthetic(&cfg.gen, cfg.seed)?.into_events(),
    })
}

fn print_prediction(i: usize, p: &Prediction, time_us: Option<u64>, tokens: usize) -> alert_core::Result<()> {
    let probs: Vec<String> = p.probs.iter().map(|x| format!("{x:.6}")).collect();
    let time = time_us.map_or("-".to_string(), |t| t.to_string());
    emit!(
        "prediction index={i} step={} time_us={time} tokens={tokens} class={} degenerate={} probs={}",
        p.step,
        p.class,
        p.degenerate,
        probs.join(",")
    )
}

fn samples(mode: SampleMode, events: &[Event]) -> anyhow::Result<Vec<&[Event]>> {
    Ok(match mode {
        SampleMode::Ccim { ne } => CcimSampler::new(events, ne)?.map(|s| s.events).collect(),
        SampleMode::Ctim { delta_t } => {
            let start = events.first().map_or(0, |e| e.t);
            CtimSampler::new(events, delta_t, start)?.map(|s| s.events).collect()
        }
    })
}

fn snapshot_prefixes(a: &WeightArchive) -> Vec<String> {
    let mut p: Vec<String> = a.names().filter_map(|n| n.strip_suffix(".step")).map(str::to_string).collect();
    p.sort_by_key(|s| s.rsplit('.').next().and_then(|i| i.parse::<usize>().ok()));
    p
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Gen { out, save_weights } => {
            let stream = generate_synthetic(&cfg.gen, cfg.seed)?;
            let header = *stream.header();
            write_stream(stream.events(), &header, &out, StreamFormat::from_path(&out))?;
            emit!(
                "gen out={} events={} duration_us={} sensor={}x{} class={}",
                out.display(),
                header.event_count,
                header.duration,
                header.sensor_width,
                header.sensor_height,
                cfg.gen.class_id
            )?;
            if let Some(path) = save_weights {
                Model::from_config(&cfg)?.save(&path)?;
                emit!("weights out={}", path.display())?;
            }
        }
        Command::Embed { input, out, max_samples } => {
            let model = Model::from_config(&cfg)?;
            let events = load_events(&cfg, Some(&input))?;
            let mut archive = WeightArchive::new();
            let windows = samples(cfg.sample, &events)?;
            let n = max_samples.unwrap_or(usize::MAX).min(windows.len());
            let mut end = 0u64;
            for (i, w) in windows.iter().take(n).enumerate() {
                end += w.len() as u64;
                let snap = Snapshot {
                    step: end,
                    time_us: w.last().map(|e| e.t),
                    tokens: model.embedder.embed_sample(w)?,
                };
                snap.write_to(&mut archive, &format!("sample.{i}"), cfg.grid.grid_w(), model.embedder.channels())?;
                emit!("sample index={i} events={} tokens={}", w.len(), snap.tokens.len())?;
            }
            archive.save(&out)?;
            emit!("embed out={} samples={n} encoding={}", out.display(), model.embedder.input.name())?;
        }
        Command::Stream { input, snapshots } => {
            let model = Model::from_config(&cfg)?;
            let mut engine = AlertEngine::new(&model.embedder, cfg.alert.clone())?;
            let mut archive = WeightArchive::new();
            let mut count = 0usize;
            let grid_w = cfg.grid.grid_w();
            let c = model.embedder.channels();
            let mut sink = |_: &AlertEngine<'_>, snap: Snapshot| {
                let p = model.head.classify(&snap)?;
                print_prediction(count, &p, snap.time_us, snap.tokens.len())?;
                if snapshots.is_some() {
                    snap.write_to(&mut archive, &format!("snapshot.{count}"), grid_w, c)?;
                }
                count += 1;
                Ok(())
            };
            match &input {
                Some(p) => run_stream_with(&mut engine, read_stream(p, StreamFormat::from_path(p))?.1, cfg.readout, &mut sink)?,
                None => run_stream_with(&mut engine, SyntheticSource::new(cfg.gen.clone(), cfg.seed)?, cfg.readout, &mut sink)?,
            }
            if let Some(path) = &snapshots {
                archive.save(path)?;
            }
            emit!("stream readouts={count} events={}", engine.state().global_step())?;
        }
        Command::Classify { snapshots } => {
            let model = Model::from_config(&cfg)?;
            let archive = WeightArchive::load(&snapshots)?;
            let prefixes = snapshot_prefixes(&archive);
            if prefixes.is_empty() {
                bail!(alert_core::Error::Config(format!("{} holds no snapshots", snapshots.display())));
            }
            for (i, prefix) in prefixes.iter().enumerate() {
                let snap = Snapshot::read_from(&archive, prefix, cfg.grid.grid_w())?;
                let p = model.head.classify(&snap)?;
                print_prediction(i, &p, None, snap.tokens.len())?;
            }
        }
        Command::Verify {
            input,
            trials,
            decay_steps,
        } => {
            let model = Model::from_config(&cfg)?;
            let events = load_events(&cfg, input.as_deref())?;
            let ne = match cfg.sample {
                SampleMode::Ccim { ne } => ne,
                SampleMode::Ctim { .. } => bail!(alert_core::Error::Config("verify needs a CCIM sample.ne".into())),
            };
            let strict = verify_strict(&model.embedder, &cfg.alert, &events, ne, trials, &[1, 8, 64], cfg.seed)?;
            // keep the staleness threshold well inside the run so decay actually fires
            let decay_cfg = AlertConfig {
                lambda: if cfg.alert.lambda > 0.0 { cfg.alert.lambda } else { 0.05 },
                n_threshold: cfg.alert.n_threshold.min(decay_steps as u64 / 10),
                ..cfg.alert.clone()
            };
            let decay = verify_decay(&model.embedder, &decay_cfg, &events, decay_steps.min(events.len()), 1e-6)?;
            for r in [&strict, &decay] {
                let status = if r.ok() { "PASS" } else { "FAIL" };
                emit!(
                    "verify mode={} trials={} passed={} max_abs_diff={:e} status={status}",
                    r.mode, r.trials, r.passed, r.max_abs_diff
                )?;
                if r.mode == "decay" {
                    emit!("verify mode=decay lambda={} n_threshold={}", decay_cfg.lambda, decay_cfg.n_threshold)?;
                }
                if let Some(d) = &r.first_divergence {
                    emit!("divergence mode={} {d}", r.mode)?;
                }
            }
            let ok = strict.ok() && decay.ok();
            emit!("{}", if ok { "PASS" } else { "FAIL" })?;
            return Ok(ok);
        }
        Command::Flops {
            events,
            active_events,
            active_patches,
            input,
        } => {
            let stats = match input {
                Some(p) => {
                    let all = load_events(&cfg, Some(&p))?;
                    let window = samples(cfg.sample, &all)?
                        .into_iter()
                        .next()
                        .context("stream too short for one sample window")?;
                    let active = filter_active(&cfg.grid, partition_sample(&cfg.grid, window)?);
                    SampleStats {
                        events: window.len() as u64,
                        active_events: active.total_events() as u64,
                        active_patches: active.patches.len() as u64,
                    }
                }
                None => SampleStats {
                    events,
                    active_events: active_events.unwrap_or(events),
                    active_patches,
                },
            };
            let te = alert_core::embedder::input_registry()
                .create(alert_core::embedder::encoding_name(&cfg.te), &cfg.te)?
                .flops_per_event();
            let r = count_flops(&cfg.mlp, te, &cfg.head, stats);
            let widths: Vec<String> = cfg.mlp.widths().iter().map(usize::to_string).collect();
            emit!("flops widths={}", widths.join(","))?;
            for (name, f) in &r.breakdown {
                emit!("flops part={name} flops={f}")?;
            }
            emit!(
                "flops flops_per_event={} macs_per_event={} embedder_per_sample={} head_per_sample={} flops_per_sample={}",
                r.flops_per_event, r.macs_per_event, r.embedder_flops_per_sample, r.head_flops_per_sample, r.flops_per_sample
            )?;
        }
        Command::Bench { input, warmup } => {
            let model = Model::from_config(&cfg)?;
            let events = load_events(&cfg, input.as_deref())?;
            let r = bench(&model, &cfg.alert, &events, cfg.readout, warmup)?;
            emit!(
                "bench events={} readouts={} update_p50_ns={} update_p99_ns={} update_mean_ns={:.1} tp_p50_us={:.1} tp_mean_us={:.1} t_in_mean_us={:.1}",
                r.events, r.readouts, r.update_p50_ns, r.update_p99_ns, r.update_mean_ns, r.tp_p50_us, r.tp_mean_us, r.t_in_mean_us
            )?;
        }
        Command::Eval { files, files_per_class } => {
            let model = Model::from_config(&cfg)?;
            let report = if files.is_empty() {
                synthetic_eval(&cfg, &model, files_per_class, cfg.seed)?.0
            } else {
                let mut tagged = Vec::new();
                for (id, arg) in files.iter().enumerate() {
                    let (path, label) = arg
                        .rsplit_once('=')
                        .with_context(|| format!("--file expects PATH=CLASS, got {arg:?}"))?;
                    let truth: usize = label.parse().with_context(|| format!("bad class in {arg:?}"))?;
                    let events = load_events(&cfg, Some(Path::new(path)))?;
                    for p in alert_core::harness::stream_predictions(&model, &cfg.alert, events, cfg.readout)? {
                        tagged.push(TaggedPrediction {
                            file: id,
                            truth,
                            predicted: p.class,
                            degenerate: p.degenerate,
                        });
                    }
                }
                evaluate(&tagged, cfg.nva_window)?
            };
            emit!(
                "eval samples={} files={} degenerate={} sa={:.6} fva={:.6} nva={:.6} nva_window={}",
                report.samples, report.files, report.degenerate, report.sa, report.fva, report.nva, report.nva_window
            )?;
        }
    }
    Ok(true)
}

fn error_line(kind: &str, msg: &str) {
    eprintln!("error kind={kind} msg={msg:?}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            error_line("usage", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => match e.downcast_ref::<alert_core::Error>() {
            Some(alert_core::Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => {
                ExitCode::SUCCESS
            }
            Some(core) => {
                error_line(core.kind(), &core.to_string());
                ExitCode::FAILURE
            }
            None => {
                error_line("runtime", &format!("{e:#}"));
                ExitCode::FAILURE
            }
        },
    }
}
