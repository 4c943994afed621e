//! Drives a tracker over a whole sequence at a chosen detection rate.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{subsample, MotRecord, SequenceDir, SequenceMeta, SubsampleSchedule};
use crate::model::Detection;
use crate::synth::SyntheticSequence;
use crate::tracker::{Mode, PipelineConfig, StepFrames, Tracker, TrackerStats};
use crate::visual::ImageFrame;

/// Anything that can produce the image at a 1-based frame index.
pub trait FrameSource: Sync {
    fn frame(&self, index: u32) -> Result<ImageFrame>;
}

impl FrameSource for SequenceDir {
    fn frame(&self, index: u32) -> Result<ImageFrame> {
        self.read_frame(index)
    }
}

impl FrameSource for SyntheticSequence {
    fn frame(&self, index: u32) -> Result<ImageFrame> {
        Ok(self.render(index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    /// Every source frame is a detection frame.
    Full,
    Hz(f64),
}

impl std::str::FromStr for Rate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(Rate::Full);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0 && v.is_finite())
            .map(Rate::Hz)
            .ok_or_else(|| Error::InvalidRate(format!("expected `full` or a positive rate in Hz, got `{s}`")))
    }
}

/// Detection schedule and tracker mode implied by `rate`.
pub fn plan(meta: &SequenceMeta, rate: Rate) -> Result<(SubsampleSchedule, Mode, f64)> {
    let schedule = match rate {
        Rate::Full => subsample(meta, meta.source_fps)?,
        Rate::Hz(hz) => subsample(meta, hz)?,
    };
    let mode = if schedule.stride == 1 { Mode::FullFrequency } else { Mode::LowFrequency };
    let delta_t = schedule.delta_t(meta.source_fps);
    Ok((schedule, mode, delta_t))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub visual_tracking_ms: f64,
    pub association_ms: f64,
    pub kalman_ms: f64,
    pub io_ms: f64,
    pub total_ms: f64,
    /// Slowest single tracker step, excluding frame loading.
    pub max_step_ms: f64,
    pub mean_step_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<MotRecord>,
    pub schedule: SubsampleSchedule,
    pub mode: Mode,
    pub delta_t: f64,
    /// Frame indices loaded, in load order.
    pub frames_loaded: Vec<u32>,
    pub stats: TrackerStats,
    pub timings: StageTimings,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs the tracker over the detection frames of `meta` at `rate`.
///
/// `config` supplies everything but the interval and mode, which follow from
/// the rate. Images are loaded only for detection and intermediate frames,
/// and only in low-frequency mode.
pub fn run_sequence(
    meta: &SequenceMeta,
    detections: &BTreeMap<u32, Vec<Detection>>,
    frames: Option<&dyn FrameSource>,
    rate: Rate,
    config: &PipelineConfig,
) -> Result<RunOutput> {
    let (schedule, mode, delta_t) = plan(meta, rate)?;
    let mut config = config.clone();
    config.delta_t = delta_t;
    config.mode = mode;
    let mut tracker = Tracker::new(config)?;

    let started = Instant::now();
    let mut io = Duration::ZERO;
    let mut max_step = Duration::ZERO;
    let mut step_total = Duration::ZERO;
    let mut frames_loaded = Vec::new();
    let mut records = Vec::new();
    let no_detections = Vec::new();

    for (k, &frame) in schedule.detection_frames.iter().enumerate() {
        let dets = detections.get(&frame).unwrap_or(&no_detections);
        let time = meta.frame_time(frame);

        let clock = Instant::now();
        let images = match (mode, frames) {
            (Mode::LowFrequency, Some(source)) => {
                let current = source.frame(frame)?;
                frames_loaded.push(frame);
                let mid = match schedule.intermediate_before(k) {
                    Some(m) => {
                        frames_loaded.push(m);
                        Some(source.frame(m)?)
                    }
                    None => None,
                };
                Some((current, mid))
            }
            _ => None,
        };
        io += clock.elapsed();

        let clock = Instant::now();
        let step_frames = images.as_ref().map(|(c, m)| StepFrames { current: c, mid: m.as_ref() });
        let output = tracker.step(time, dets, step_frames)?;
        let elapsed = clock.elapsed();
        step_total += elapsed;
        max_step = max_step.max(elapsed);

        records.extend(output.tracks.iter().map(|t| MotRecord { frame, id: t.id as i64, bbox: t.bbox, confidence: t.confidence }));
    }

    let stats = *tracker.stats();
    let steps = schedule.detection_frames.len().max(1) as f64;
    let timings = StageTimings {
        visual_tracking_ms: ms(stats.timings.visual_tracking),
        association_ms: ms(stats.timings.association),
        kalman_ms: ms(stats.timings.kalman),
        io_ms: ms(io),
        total_ms: ms(started.elapsed()),
        max_step_ms: ms(max_step),
        mean_step_ms: ms(step_total) / steps,
    };
    Ok(RunOutput { records, schedule, mode, delta_t, frames_loaded, stats, timings })
}

/// Convenience wrapper for generated sequences.
pub fn run_synthetic(sequence: &SyntheticSequence, rate: Rate, config: &PipelineConfig) -> Result<RunOutput> {
    let detections: BTreeMap<u32, Vec<Detection>> =
        sequence.detections.keys().map(|&f| (f, sequence.detections_at(f))).collect();
    run_sequence(&sequence.meta(), &detections, Some(sequence), rate, config)
}
