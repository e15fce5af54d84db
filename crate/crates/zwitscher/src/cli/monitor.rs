use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;
use zwitscher_core::engine::stubs::ConstantBackend;
use zwitscher_core::engine::{
    run_image_pipeline, AudioPipeline, Clock, DetectionSink, DutyCycleStats, ModelBackend, PipelineConfig, SampleSource, Segmenter,
    SliceSource,
};
use zwitscher_core::AudioClip;

use super::{beside, require_dir, require_file, write_summary, Outcome, PipelineFlags};
use crate::backends::{AudioBackends, Backends, ImageBackends};
use crate::config::FileConfig;
use crate::media::{self, PcmSource};
use crate::server::{self, DEFAULT_LISTEN};
use crate::store::{SharedStore, StoreSink};
use crate::{wav, SystemClock};

pub const DEFAULT_CAPACITY: usize = zwitscher_core::detection::DEFAULT_CAPACITY;

/// Service settings shared by `run` and `serve`.
#[derive(Debug, Clone, Default, Args)]
pub struct ServiceFlags {
    /// Flat key/value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// HTTP listen address [default: 0.0.0.0:8080].
    #[arg(long)]
    pub listen: Option<String>,
    /// Detection buffer capacity [default: 1000].
    #[arg(long)]
    pub capacity: Option<usize>,
    /// Append-only detection log (history is restored from it).
    #[arg(long)]
    pub log_path: Option<PathBuf>,
    /// Directory with the dashboard's static files.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Skip the fsync after each logged detection.
    #[arg(long)]
    pub no_fsync: bool,
}

impl ServiceFlags {
    fn file_config(&self, pipeline: &PipelineFlags, backends: Option<PathBuf>) -> anyhow::Result<FileConfig> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let flags = FileConfig {
            listen: self.listen.clone(),
            capacity: self.capacity,
            log_path: self.log_path.clone(),
            static_dir: self.static_dir.clone(),
            fsync: self.no_fsync.then_some(false),
            backends,
            gate_threshold: pipeline.gate_threshold,
            species_report_threshold: pipeline.species_report_threshold,
            image_report_threshold: pipeline.image_report_threshold,
            segment_seconds: pipeline.segment_seconds,
            segment_hop_seconds: pipeline.segment_hop_seconds,
        };
        Ok(file.overlay(flags))
    }
}

/// Validated service settings.
struct Service {
    listen: SocketAddr,
    capacity: usize,
    log_path: Option<PathBuf>,
    static_dir: Option<PathBuf>,
    fsync: bool,
}

impl Service {
    fn from_config(c: &FileConfig) -> anyhow::Result<Self> {
        let listen = c.listen.as_deref().unwrap_or(DEFAULT_LISTEN);
        let listen: SocketAddr = listen.parse().with_context(|| format!("listen address {listen:?}"))?;
        let capacity = c.capacity.unwrap_or(DEFAULT_CAPACITY);
        if capacity == 0 {
            bail!("capacity must be positive");
        }
        if let Some(d) = &c.static_dir {
            require_dir(d, "static directory")?;
        }
        Ok(Self { listen, capacity, log_path: c.log_path.clone(), static_dir: c.static_dir.clone(), fsync: c.fsync.unwrap_or(true) })
    }

    fn open_store(&self) -> anyhow::Result<Arc<SharedStore>> {
        let store = match &self.log_path {
            Some(p) => {
                let (store, history) = SharedStore::open(self.capacity, p, self.fsync)?;
                log::info!("restored {} detections from {}", history.records.len(), p.display());
                store
            }
            None => {
                log::warn!("no log path configured; detections are kept in memory only");
                SharedStore::in_memory(self.capacity)
            }
        };
        Ok(Arc::new(store))
    }
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        if let Err(e) = tokio::signal::ctrl_c().await {
            log::error!("cannot listen for ctrl-c: {e}");
            std::future::pending::<()>().await;
        }
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub service: ServiceFlags,
}

pub fn serve(args: &ServeArgs) -> anyhow::Result<Outcome> {
    let cfg = args.service.file_config(&PipelineFlags::default(), None)?;
    let svc = Service::from_config(&cfg)?;
    let store = svc.open_store()?;
    let rt = runtime()?;
    rt.block_on(async {
        let listener = server::bind(svc.listen).await.with_context(|| format!("binding {}", svc.listen))?;
        server::serve(listener, store.clone(), svc.static_dir.clone(), shutdown_signal()).await?;
        anyhow::Ok(())
    })?;
    store.flush()?;
    Ok(Outcome::default())
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("models").required(true).args(["backends", "stub_backends"])))]
#[command(group(clap::ArgGroup::new("sources").required(true).multiple(true).args(["replay", "stdin_pcm", "images"])))]
pub struct RunArgs {
    #[command(flatten)]
    pub service: ServiceFlags,
    #[command(flatten)]
    pub pipeline: PipelineFlags,
    /// Backend manifest (TOML).
    #[arg(long)]
    pub backends: Option<PathBuf>,
    /// Use the built-in stub backends and demo catalog.
    #[arg(long)]
    pub stub_backends: bool,
    /// Process a recording as if it were live, then stop.
    #[arg(long, conflicts_with = "stdin_pcm")]
    pub replay: Option<PathBuf>,
    /// Read mono s16le PCM from stdin until it closes.
    #[arg(long)]
    pub stdin_pcm: bool,
    /// Sample rate of the stdin stream.
    #[arg(long, default_value_t = 48_000)]
    pub pcm_rate: u32,
    /// Directory of camera captures (PNG/JPEG) to classify.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Do not start the HTTP server.
    #[arg(long)]
    pub no_server: bool,
    /// Keep serving after the inputs end, until interrupted.
    #[arg(long)]
    pub linger: bool,
    /// Run summary path [default: <log_path>.summary.json, none without a log].
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Default)]
struct ImageCounters {
    processed: AtomicU64,
    reported: AtomicU64,
    failed: AtomicU64,
}

#[derive(Debug, Serialize)]
struct ImageSummary {
    processed: u64,
    reported: u64,
    failed: u64,
}

#[derive(Debug, Serialize)]
struct RunSummary {
    interrupted: bool,
    records: u64,
    latest_seq: u64,
    audio: Option<DutyCycleStats>,
    images: ImageSummary,
    persistence_failures: u64,
    rejected_sightings: u64,
}

enum AudioInput {
    Replay(AudioClip),
    Stdin(u32),
}

pub fn run(args: &RunArgs) -> anyhow::Result<Outcome> {
    // Everything is validated before any pipeline or listener starts.
    let backends_path = args.backends.clone();
    let cfg = args.service.file_config(&args.pipeline, backends_path)?;
    let svc = Service::from_config(&cfg)?;
    let pipeline_cfg = cfg.pipeline();
    pipeline_cfg.validate()?;
    let backends = if args.stub_backends {
        Backends::stubs()
    } else {
        let path = cfg.backends.as_ref().context("no backend manifest")?;
        Backends::load(path).with_context(|| format!("loading backends from {}", path.display()))?
    };
    let audio_input = match (&args.replay, args.stdin_pcm) {
        (Some(p), _) => {
            require_file(p, "replay file")?;
            Some(AudioInput::Replay(wav::read_audio(p).with_context(|| format!("decoding {}", p.display()))?))
        }
        (None, true) => Some(AudioInput::Stdin(args.pcm_rate)),
        (None, false) => None,
    };
    let images = match &args.images {
        Some(d) => {
            require_dir(d, "image directory")?;
            let mut files: Vec<PathBuf> =
                std::fs::read_dir(d)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| media::is_image(p)).collect();
            files.sort();
            Some(files)
        }
        None => None,
    };
    let Backends { audio, image, info } = backends;
    let audio_job = match (audio_input, audio) {
        (Some(input), Some(AudioBackends { gate, classifier, catalog })) => {
            Some((input, AudioPipeline::new(gate, classifier, catalog, pipeline_cfg)?))
        }
        (Some(_), None) => bail!("audio input given but the manifest declares no audio backends"),
        (None, _) => None,
    };
    let image_job = match (images, image) {
        (Some(files), Some(b)) => Some((files, b)),
        (Some(_), None) => bail!("image input given but the manifest declares no image backends"),
        (None, _) => None,
    };
    if let Some(rate) = match &audio_job {
        Some((AudioInput::Stdin(r), _)) => Some(*r),
        _ => None,
    } {
        if rate == 0 {
            bail!("--pcm-rate must be positive");
        }
    }

    let store = svc.open_store()?;
    store.set_backends(info);
    let summary_path = args.summary.clone().or_else(|| svc.log_path.as_ref().map(|p| beside(p, ".summary.json")));
    let counters = Arc::new(ImageCounters::default());
    let rejected = Arc::new(AtomicU64::new(0));
    let rt = runtime()?;
    let listener =
        if args.no_server { None } else { Some(rt.block_on(server::bind(svc.listen)).with_context(|| format!("binding {}", svc.listen))?) };

    let (stop_tx, stop_rx) = tokio::sync::watch::channel(false);
    let server_task = listener.map(|l| {
        let store = store.clone();
        let static_dir = svc.static_dir.clone();
        let mut rx = stop_rx.clone();
        rt.spawn(async move {
            let stop = async move {
                let _ = rx.wait_for(|v| *v).await;
            };
            if let Err(e) = server::serve(l, store, static_dir, stop).await {
                log::error!("server stopped: {e}");
            }
        })
    });
    {
        // On a signal: finish the in-flight append, sync, summarize, exit.
        let store = store.clone();
        let counters = counters.clone();
        let rejected = rejected.clone();
        let summary_path = summary_path.clone();
        rt.spawn(async move {
            shutdown_signal().await;
            log::info!("signal received, flushing detection log");
            store.with_appends_paused(|| {
                let s = summarize(&store, &counters, &rejected, true);
                if let Some(p) = &summary_path {
                    if let Err(e) = write_summary(p, &s) {
                        log::error!("{e:#}");
                    }
                }
                std::process::exit(0);
            });
        });
    }

    std::thread::scope(|scope| {
        if let Some((input, mut pipeline)) = audio_job {
            let store = &store;
            let rejected = &rejected;
            scope.spawn(move || {
                let clock = SystemClock;
                let result = match input {
                    AudioInput::Replay(clip) => {
                        run_audio(&mut pipeline, SliceSource::new(clip.samples(), clip.sample_rate()), store, &clock)
                    }
                    AudioInput::Stdin(rate) => run_audio(&mut pipeline, PcmSource::new(std::io::stdin(), rate), store, &clock),
                };
                match result {
                    Ok(r) => {
                        rejected.fetch_add(r, Ordering::Relaxed);
                    }
                    Err(e) => log::error!("audio pipeline stopped: {e}"),
                }
            });
        }
        if let Some((files, mut b)) = image_job {
            let store = &store;
            let counters = &counters;
            let rejected = &rejected;
            scope.spawn(move || {
                let r = run_images(&files, &mut b, &pipeline_cfg, store, counters);
                rejected.fetch_add(r, Ordering::Relaxed);
            });
        }
    });

    if args.linger && server_task.is_some() {
        rt.block_on(shutdown_signal());
    }
    let _ = stop_tx.send(true);
    if let Some(t) = server_task {
        let _ = rt.block_on(t);
    }
    store.flush()?;
    let s = summarize(&store, &counters, &rejected, false);
    if let Some(p) = &summary_path {
        write_summary(p, &s)?;
    }
    println!("records {} latest_seq {}", s.records, s.latest_seq);
    if let Some(a) = &s.audio {
        println!("segments {} gated_in {} duty_cycle {:.4}", a.segments_total, a.segments_gated_in, a.duty_cycle());
    }
    let audio_failures = s.audio.map_or(0, |a| a.gate_errors + a.classifier_errors);
    let failures = audio_failures + s.images.failed + s.persistence_failures + s.rejected_sightings;
    Ok(Outcome { failures: failures as usize })
}

fn summarize(store: &SharedStore, counters: &ImageCounters, rejected: &AtomicU64, interrupted: bool) -> RunSummary {
    let st = store.status();
    RunSummary {
        interrupted,
        records: st.counts.audio + st.counts.image,
        latest_seq: st.latest_seq,
        audio: st.duty_cycle.map(|d| d.stats),
        images: ImageSummary {
            processed: counters.processed.load(Ordering::Relaxed),
            reported: counters.reported.load(Ordering::Relaxed),
            failed: counters.failed.load(Ordering::Relaxed),
        },
        persistence_failures: st.persistence.failures,
        rejected_sightings: rejected.load(Ordering::Relaxed),
    }
}

/// Segments `source` through the pipeline, publishing stats after every
/// segment. Returns the number of sightings the store refused.
fn run_audio<G: ModelBackend, C: ModelBackend>(
    pipeline: &mut AudioPipeline<G, C>,
    source: impl SampleSource,
    store: &SharedStore,
    clock: &dyn Clock,
) -> anyhow::Result<u64> {
    let cfg = *pipeline.config();
    let mut sink = StoreSink::new(store);
    store.set_duty_cycle(pipeline.stats());
    for segment in Segmenter::new(source, cfg.segment_seconds, cfg.segment_hop_seconds) {
        let outcome = pipeline.process(&segment?, clock);
        if let Some(e) = &outcome.decision.error {
            log::warn!("segment {}: gate error: {e}", outcome.decision.segment_index);
        }
        if let Some(e) = &outcome.classifier_error {
            log::warn!("segment {}: classifier error: {e}", outcome.decision.segment_index);
        }
        if let Some(s) = outcome.sighting {
            sink.deliver(s);
        }
        store.set_duty_cycle(pipeline.stats());
    }
    Ok(sink.rejected)
}

fn run_images(files: &[PathBuf], b: &mut ImageBackends, cfg: &PipelineConfig, store: &SharedStore, counters: &ImageCounters) -> u64 {
    let clock = SystemClock;
    let mut sink = StoreSink::new(store);
    for path in files {
        let result = media::read_image(path).map_err(anyhow::Error::from).and_then(|img| {
            let media_ref = Some(path.display().to_string());
            Ok(run_image_pipeline(&img, &mut b.detector, &mut b.classifier, &b.catalog, cfg, &clock, media_ref)?)
        });
        counters.processed.fetch_add(1, Ordering::Relaxed);
        match result {
            Ok(Some(s)) => {
                counters.reported.fetch_add(1, Ordering::Relaxed);
                sink.deliver(s);
            }
            Ok(None) => {}
            Err(e) => {
                counters.failed.fetch_add(1, Ordering::Relaxed);
                log::error!("{}: {e:#}", path.display());
            }
        }
    }
    sink.rejected
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("models").required(true).args(["backends", "stub_backends"])))]
pub struct BenchArgs {
    /// Recording to replay.
    #[arg(long)]
    pub replay: PathBuf,
    /// Backend manifest (TOML); only the gate is used.
    #[arg(long)]
    pub backends: Option<PathBuf>,
    /// Use the built-in stub gate.
    #[arg(long)]
    pub stub_backends: bool,
    /// Thresholds to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1.0")]
    pub thresholds: Vec<f64>,
    /// Segment length in seconds.
    #[arg(long, default_value_t = 3.0)]
    pub segment_seconds: f64,
    /// Segment advance in seconds.
    #[arg(long, default_value_t = 3.0)]
    pub segment_hop_seconds: f64,
    /// Summary path [default: <replay>.bench-gate.json].
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub segments_total: u64,
    pub segments_gated_in: u64,
    pub duty_cycle: f64,
}

#[derive(Debug, Serialize)]
struct BenchSummary {
    replay: String,
    gate: String,
    gate_errors: u64,
    rows: Vec<SweepRow>,
}

/// Gate probability of every segment (`None` where the gate failed).
pub fn gate_probabilities<G: ModelBackend>(
    gate: G,
    clip: &AudioClip,
    segment_seconds: f64,
    hop_seconds: f64,
) -> anyhow::Result<Vec<Option<f64>>> {
    // Threshold 0 sends every segment through; a one-class constant model
    // keeps the classifier side trivial.
    let cfg = PipelineConfig { gate_threshold: 0.0, segment_seconds, segment_hop_seconds: hop_seconds, ..PipelineConfig::default() };
    let mut p = AudioPipeline::new(gate, ConstantBackend::one_hot(0, 1), vec!["-".to_string()], cfg)?;
    let clock = zwitscher_core::engine::FixedClock(0);
    let mut out = Vec::new();
    for seg in Segmenter::new(SliceSource::new(clip.samples(), clip.sample_rate()), segment_seconds, hop_seconds) {
        let d = p.process(&seg?, &clock).decision;
        out.push(if d.error.is_some() { None } else { Some(d.p_bird) });
    }
    Ok(out)
}

/// Duty cycle at each threshold, using the gate's `p >= threshold` rule.
pub fn sweep(probabilities: &[Option<f64>], thresholds: &[f64]) -> Vec<SweepRow> {
    let total = probabilities.len() as u64;
    thresholds
        .iter()
        .map(|&t| {
            let gated = probabilities.iter().filter(|p| p.is_some_and(|p| p >= t)).count() as u64;
            let stats = DutyCycleStats { segments_total: total, segments_gated_in: gated, ..DutyCycleStats::default() };
            SweepRow { threshold: t, segments_total: total, segments_gated_in: gated, duty_cycle: stats.duty_cycle() }
        })
        .collect()
}

pub fn bench_gate(args: &BenchArgs) -> anyhow::Result<Outcome> {
    require_file(&args.replay, "replay file")?;
    if let Some(t) = args.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        bail!("threshold {t} outside [0, 1]");
    }
    let gate = if args.stub_backends {
        Backends::stubs().audio.expect("stubs include audio").gate
    } else {
        let path = args.backends.as_ref().expect("clap enforces a backend source");
        Backends::load(path)?.audio.context("manifest declares no audio gate")?.gate
    };
    let clip = wav::read_audio(&args.replay).with_context(|| format!("decoding {}", args.replay.display()))?;
    let gate_name = gate.identity().name;
    let probabilities = gate_probabilities(gate, &clip, args.segment_seconds, args.segment_hop_seconds)?;
    let rows = sweep(&probabilities, &args.thresholds);
    println!("{:>9} {:>8} {:>9} {:>10}", "threshold", "segments", "gated_in", "duty_cycle");
    for r in &rows {
        println!("{:>9.2} {:>8} {:>9} {:>10.4}", r.threshold, r.segments_total, r.segments_gated_in, r.duty_cycle);
    }
    let gate_errors = probabilities.iter().filter(|p| p.is_none()).count() as u64;
    let summary = BenchSummary { replay: display_name(&args.replay), gate: gate_name, gate_errors, rows };
    write_summary(&args.summary.clone().unwrap_or_else(|| beside(&args.replay, ".bench-gate.json")), &summary)?;
    Ok(Outcome { failures: gate_errors as usize })
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}
