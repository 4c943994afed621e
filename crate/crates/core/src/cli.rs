//! The `lowrate-mot` command line: track, synth, eval, subsample, config.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::association::{AssociationConfig, SpatialGate};
use crate::bbd::BbdParams;
use crate::error::{Error, Result};
use crate::io::{load_detections, read_mot, write_results, SequenceDir, SequenceMeta};
use crate::metrics::{evaluate, MetricGroup, DEFAULT_IOU_THRESHOLD};
use crate::run::{plan, run_sequence, FrameSource, Rate, StageTimings};
use crate::synth::{generate, preset, ScenarioSpec, PRESETS};
use crate::tracker::{KalmanNoise, Mode, PipelineConfig};
use crate::visual::VtParams;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

/// Environment variable holding the log level.
pub const LOG_ENV: &str = "LOWRATE_MOT_LOG";

/// Written next to a synthetic sequence so later runs can report its seed.
pub const SCENARIO_FILE: &str = "scenario.json";

#[derive(Debug, Parser)]
#[command(name = "lowrate-mot", version, about = "Multi-object tracking under low-frequency detections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track a sequence and write MOT results plus a JSON run manifest.
    Track(TrackArgs),
    /// Generate a synthetic benchmark sequence.
    Synth(SynthArgs),
    /// Score tracking results against ground truth.
    Eval(EvalArgs),
    /// Print the detection and intermediate frames for a rate.
    Subsample(SubsampleArgs),
    /// Print the default configuration file.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Sequence directory holding seqinfo.ini and img1/.
    #[arg(long)]
    pub seq: PathBuf,
    /// Detections in MOT format [default: <seq>/det/det.txt].
    #[arg(long)]
    pub det: Option<PathBuf>,
    /// Embedding sidecar matching the detection lines [default: <seq>/det/det.emb].
    #[arg(long)]
    pub emb: Option<PathBuf>,
    /// Detection rate in Hz, or `full` for every frame.
    #[arg(long, default_value = "1")]
    pub hz: Rate,
    /// Configuration file; see `lowrate-mot config`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Results file in MOT format.
    #[arg(long)]
    pub out: PathBuf,
    /// Run manifest [default: results path with `.manifest.json` appended].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Track without images; both visual tracking passes fall back to motion.
    #[arg(long)]
    pub no_images: bool,
    /// Worker threads for visual tracking [default: all cores].
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario file, JSON or TOML by extension.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    pub preset: Option<String>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output sequence directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Render only the frames a run at this rate reads.
    #[arg(long, conflicts_with = "no_images")]
    pub hz: Option<Rate>,
    /// Skip image rendering.
    #[arg(long)]
    pub no_images: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground truth in MOT format.
    #[arg(long)]
    pub gt: PathBuf,
    /// Tracking results in MOT format.
    #[arg(long)]
    pub res: PathBuf,
    /// Comma-separated subset of mota, idf1, hota.
    #[arg(long, value_delimiter = ',', default_value = "hota,mota,idf1")]
    pub metrics: Vec<MetricGroup>,
    /// Sequence whose schedule at `--hz` restricts the scored frames.
    #[arg(long, requires = "hz")]
    pub seq: Option<PathBuf>,
    /// Score only detection frames at this rate.
    #[arg(long, requires = "seq")]
    pub hz: Option<Rate>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    /// Source frame rate.
    #[arg(long)]
    pub fps: f64,
    /// Number of source frames.
    #[arg(long)]
    pub frames: u32,
    /// Detection rate in Hz, or `full`.
    #[arg(long)]
    pub hz: Rate,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Bbd,
    Mahalanobis,
    None,
}

/// Flat configuration file. Missing keys take their defaults; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub t_live: f64,
    pub ema_lambda: f64,
    pub init_confidence: f64,
    pub emit_coasted: bool,
    pub bbd_alpha: f64,
    pub bbd_beta: f64,
    pub bbd_c: f64,
    pub theta_bbd: f64,
    pub theta_iou: f64,
    pub theta_reid_high: f64,
    pub theta_reid_low: f64,
    pub first_stage_gate: GateKind,
    pub mahalanobis_threshold: f64,
    pub second_stage: bool,
    pub vt_bins: usize,
    pub vt_max_iterations: usize,
    pub vt_convergence_px: f64,
    pub vt_scales: Vec<f64>,
    pub vt_scale_smoothing: f64,
    pub vt_failure_threshold: f64,
    pub vt_search_factors: Vec<f64>,
    pub kf_process_position: f64,
    pub kf_process_velocity: f64,
    pub kf_observed_position: f64,
    pub kf_observed_velocity: f64,
}

impl Default for FileConfig {
    fn default() -> Self {
        let p = PipelineConfig::new(1.0, Mode::LowFrequency);
        FileConfig {
            t_live: p.t_live,
            ema_lambda: p.ema_lambda,
            init_confidence: p.init_confidence,
            emit_coasted: p.emit_coasted,
            bbd_alpha: p.bbd.alpha,
            bbd_beta: p.bbd.beta,
            bbd_c: p.bbd.c,
            theta_bbd: p.association.theta_bbd,
            theta_iou: p.association.theta_iou,
            theta_reid_high: p.association.theta_reid_high,
            theta_reid_low: p.association.theta_reid_low,
            first_stage_gate: GateKind::Bbd,
            mahalanobis_threshold: crate::association::CHI2_95_2DOF,
            second_stage: p.association.second_stage,
            vt_bins: p.vt.bins,
            vt_max_iterations: p.vt.max_iterations,
            vt_convergence_px: p.vt.convergence_px,
            vt_scales: p.vt.scales,
            vt_scale_smoothing: p.vt.scale_smoothing,
            vt_failure_threshold: p.vt.failure_threshold,
            vt_search_factors: p.vt.search_factors,
            kf_process_position: p.kalman.process_position,
            kf_process_velocity: p.kalman.process_velocity,
            kf_observed_position: p.kalman.observed_position,
            kf_observed_velocity: p.kalman.observed_velocity,
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Pipeline settings; interval and mode are placeholders that the run
    /// replaces from the detection rate.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let first_stage_gate = match self.first_stage_gate {
            GateKind::Bbd => SpatialGate::Bbd,
            GateKind::Mahalanobis => SpatialGate::Mahalanobis { threshold_sq: self.mahalanobis_threshold },
            GateKind::None => SpatialGate::None,
        };
        let config = PipelineConfig {
            t_live: self.t_live,
            ema_lambda: self.ema_lambda,
            init_confidence: self.init_confidence,
            emit_coasted: self.emit_coasted,
            association: AssociationConfig {
                theta_bbd: self.theta_bbd,
                theta_iou: self.theta_iou,
                theta_reid_high: self.theta_reid_high,
                theta_reid_low: self.theta_reid_low,
                first_stage_gate,
                second_stage: self.second_stage,
            },
            bbd: BbdParams { alpha: self.bbd_alpha, beta: self.bbd_beta, c: self.bbd_c },
            vt: VtParams {
                bins: self.vt_bins,
                max_iterations: self.vt_max_iterations,
                convergence_px: self.vt_convergence_px,
                scales: self.vt_scales.clone(),
                scale_smoothing: self.vt_scale_smoothing,
                failure_threshold: self.vt_failure_threshold,
                search_factors: self.vt_search_factors.clone(),
            },
            kalman: KalmanNoise {
                process_position: self.kf_process_position,
                process_velocity: self.kf_process_velocity,
                observed_position: self.kf_observed_position,
                observed_velocity: self.kf_observed_velocity,
            },
            ..PipelineConfig::new(1.0, Mode::LowFrequency)
        };
        config.validate()?;
        Ok(config)
    }
}

/// The configuration file `lowrate-mot config` prints. Parses to
/// `FileConfig::default()`.
pub const DEFAULT_CONFIG: &str = r#"# lowrate-mot configuration. Every key is optional.

# Tracklet lifetime without a matched detection, seconds.
t_live = 2.0
# Weight of the running appearance embedding in the moving average.
ema_lambda = 0.9
# Minimum detection confidence for starting a tracklet.
init_confidence = 0.6
# Report unmatched live tracklets at their predicted boxes (confidence 0).
emit_coasted = true

# Box-scaled distance: staleness is clipped to [bbd_alpha, bbd_beta] seconds
# and box width/height are multiplied by bbd_c.
bbd_alpha = 0.025
bbd_beta = 0.25
bbd_c = 1.0

# Stage 1 keeps pairs with distance below theta_bbd and cosine similarity
# above theta_reid_high. Stage 2 keeps pairs with IoU above theta_iou and
# similarity above theta_reid_low.
theta_bbd = 16.0
theta_iou = 0.4
theta_reid_high = 0.65
theta_reid_low = 0.3

# Stage 1 spatial gate: "bbd", "mahalanobis" or "none".
first_stage_gate = "bbd"
# Squared distance bound for the mahalanobis gate (chi-square, 2 dof, 95%).
mahalanobis_threshold = 5.9915
second_stage = true

# Mean-shift visual tracking.
vt_bins = 16
vt_max_iterations = 15
vt_convergence_px = 0.5
vt_scales = [0.95, 1.0, 1.05]
vt_scale_smoothing = 0.7
vt_failure_threshold = 0.4
vt_search_factors = [2.0, 1.0]

# Kalman noise, standard deviations per unit box height.
kf_process_position = 0.05
kf_process_velocity = 0.00625
kf_observed_position = 0.05
kf_observed_velocity = 0.1
"#;

#[derive(Debug, Clone, Serialize)]
pub struct ManifestInputs {
    pub seq: PathBuf,
    pub det: PathBuf,
    pub emb: PathBuf,
    pub config: Option<PathBuf>,
    pub images: bool,
}

/// Audit record written for every `track` run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub inputs: ManifestInputs,
    pub output: PathBuf,
    /// Seed of the generating scenario, when the sequence is synthetic.
    pub seed: Option<u64>,
    pub rate: String,
    pub mode: Mode,
    pub delta_t: f64,
    pub threads: usize,
    pub config: FileConfig,
    pub detection_frames: usize,
    pub frames_read: u64,
    pub result_records: usize,
    pub tracklets_created: u64,
    pub forward_vt_calls: u64,
    pub backward_vt_calls: u64,
    pub timings_ms: StageTimings,
}

/// Runs one parsed command, writing user-facing output to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<()> {
    match cli.command {
        Command::Track(args) => {
            let manifest = cmd_track(&args)?;
            log::info!(
                "{} records, {:.1} ms total, {:.2} ms mean step",
                manifest.result_records,
                manifest.timings_ms.total_ms,
                manifest.timings_ms.mean_step_ms
            );
            Ok(())
        }
        Command::Synth(args) => {
            let dir = cmd_synth(&args)?;
            log::info!("wrote {}", dir.display());
            Ok(())
        }
        Command::Eval(args) => {
            let report = cmd_eval(&args)?;
            match &args.out {
                Some(path) => write_file(path, report.as_bytes()),
                None => write_out(stdout, &report),
            }
        }
        Command::Subsample(args) => write_out(stdout, &cmd_subsample(&args)?),
        Command::Config(args) => match &args.out {
            Some(path) => write_file(path, DEFAULT_CONFIG.as_bytes()),
            None => write_out(stdout, DEFAULT_CONFIG),
        },
    }
}

fn write_out(stdout: &mut dyn std::io::Write, text: &str) -> Result<()> {
    stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(parent) => fs::create_dir_all(parent).map_err(|e| Error::io(parent, e)),
        None => Ok(()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn rate_label(rate: Rate) -> String {
    match rate {
        Rate::Full => "full".to_string(),
        Rate::Hz(hz) => format!("{hz}"),
    }
}

fn scenario_seed(seq: &Path) -> Option<u64> {
    let text = fs::read_to_string(seq.join(SCENARIO_FILE)).ok()?;
    serde_json::from_str::<ScenarioSpec>(&text).ok().map(|s| s.seed)
}

pub fn cmd_track(args: &TrackArgs) -> Result<RunManifest> {
    let started = Instant::now();
    let file_config = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let config = file_config.pipeline()?;
    let dir = SequenceDir::open(&args.seq)?;
    let det = args.det.clone().unwrap_or_else(|| dir.detections_path());
    let emb = args.emb.clone().unwrap_or_else(|| dir.embeddings_path());
    let detections = load_detections(&det, &emb, dir.meta().source_fps)?;
    let load_ms = started.elapsed().as_secs_f64() * 1e3;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    let frames: Option<&dyn FrameSource> = if args.no_images { None } else { Some(&dir) };
    let out = pool.install(|| run_sequence(dir.meta(), &detections, frames, args.hz, &config))?;

    let clock = Instant::now();
    create_parent(&args.out)?;
    write_results(&args.out, &out.records)?;
    let write_ms = clock.elapsed().as_secs_f64() * 1e3;

    let mut timings = out.timings;
    timings.io_ms += load_ms + write_ms;
    timings.total_ms = started.elapsed().as_secs_f64() * 1e3;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        inputs: ManifestInputs { seq: args.seq.clone(), det, emb, config: args.config.clone(), images: !args.no_images },
        output: args.out.clone(),
        seed: scenario_seed(&args.seq),
        rate: rate_label(args.hz),
        mode: out.mode,
        delta_t: out.delta_t,
        threads: pool.current_num_threads(),
        config: file_config,
        detection_frames: out.schedule.detection_frames.len(),
        frames_read: dir.frames_read(),
        result_records: out.records.len(),
        tracklets_created: out.stats.tracklets_created,
        forward_vt_calls: out.stats.forward_vt_calls,
        backward_vt_calls: out.stats.backward_vt_calls,
        timings_ms: timings,
    };
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut name = args.out.clone().into_os_string();
        name.push(".manifest.json");
        PathBuf::from(name)
    });
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    write_file(&manifest_path, format!("{json}\n").as_bytes())?;
    Ok(manifest)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<PathBuf> {
    let mut spec = match (&args.scenario, &args.preset) {
        (Some(path), _) => load_scenario(path)?,
        (None, Some(name)) => preset(name, args.seed.unwrap_or(0))?,
        (None, None) => return Err(Error::Config("either --scenario or --preset is required".into())),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let sequence = generate(&spec)?;
    let frames: Option<Vec<u32>> = if args.no_images {
        Some(Vec::new())
    } else if let Some(rate) = args.hz {
        let (schedule, mode, _) = plan(&sequence.meta(), rate)?;
        let mut f = schedule.detection_frames;
        if mode == Mode::LowFrequency {
            f.extend(schedule.intermediate_frames);
            f.sort_unstable();
        }
        Some(f)
    } else {
        None
    };
    let dir = sequence.write(&args.out, frames.as_deref())?;
    let json = serde_json::to_string_pretty(&sequence.spec).expect("scenario serialises");
    write_file(&dir.root().join(SCENARIO_FILE), format!("{json}\n").as_bytes())?;
    Ok(args.out.clone())
}

fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let spec: ScenarioSpec = if is_toml {
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
    };
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<String> {
    let gt = read_mot(&args.gt)?;
    let res = read_mot(&args.res)?;
    let only: Option<BTreeSet<u32>> = match (&args.seq, args.hz) {
        (Some(seq), Some(rate)) => {
            let dir = SequenceDir::open(seq)?;
            let (schedule, _, _) = plan(dir.meta(), rate)?;
            Some(schedule.detection_frames.into_iter().collect())
        }
        _ => None,
    };
    let report = evaluate(&gt, &res, only.as_ref(), DEFAULT_IOU_THRESHOLD)?;
    let mut groups = args.metrics.clone();
    groups.sort_unstable();
    groups.dedup();
    Ok(match args.format {
        ReportFormat::Text => report.to_text(&groups),
        ReportFormat::Csv => report.to_csv(&groups),
    })
}

pub fn cmd_subsample(args: &SubsampleArgs) -> Result<String> {
    let meta = SequenceMeta {
        name: "schedule".into(),
        source_fps: args.fps,
        width: 1,
        height: 1,
        frame_count: args.frames,
        image_ext: ".ppm".into(),
    };
    let (schedule, mode, delta_t) = plan(&meta, args.hz)?;
    let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
    let mode = match mode {
        Mode::LowFrequency => "low_frequency",
        Mode::FullFrequency => "full_frequency",
    };
    Ok(format!(
        "stride {}\nmode {mode}\ndelta_t {delta_t}\ndetection {}\nintermediate {}\n",
        schedule.stride,
        join(&schedule.detection_frames),
        join(&schedule.intermediate_frames)
    ))
}

/// Exit status for a failed command.
pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::InvalidRate(_) => EXIT_USAGE,
        Error::SingularInnovation
        | Error::InvalidCost { .. }
        | Error::OracleLimit { .. }
        | Error::Shape(_)
        | Error::TimestampOrder { .. } => EXIT_INTERNAL,
        _ => EXIT_INPUT,
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn std::io::Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli, stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    main_with_args(std::env::args_os(), &mut std::io::stdout().lock())
}
