//! Per-sequence tracking loop and tracklet lifecycle.
//!
//! In low-frequency mode every step spans one detection interval `Δt` and
//! meets the tracklets halfway: detections are tracked backward from the
//! current frame into the intermediate frame, tracklets are tracked forward
//! into it, and association happens there. Matched tracklets are then updated
//! at the intermediate instant, predicted across the second half-interval and
//! updated again with the raw detections. Full-frequency mode is the plain
//! predict/associate/update loop without visual tracking.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{associate, AssociationConfig, SimilarityMatrix, TrackletGeometry};
use crate::bbd::BbdParams;
use crate::error::{Error, Result};
use crate::kalman::{observation4, observation6, KalmanModel, KalmanState, NoiseModel};
use crate::model::{BBox, Detection, Embedding};
use crate::visual::{
    backward_vt, forward_vt, init_model_quantized, BackwardVt, DisplacementObservation, DisplacementSource,
    ImageFrame, MeanShiftModel, QuantizedFrame, VtParams,
};

/// Tolerance when comparing detection timestamps with the step time.
const TIME_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    LowFrequency,
    FullFrequency,
}

/// Height-scaled Kalman noise, as standard deviations per unit box height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanNoise {
    pub process_position: f64,
    pub process_velocity: f64,
    pub observed_position: f64,
    pub observed_velocity: f64,
}

impl Default for KalmanNoise {
    fn default() -> Self {
        KalmanNoise {
            process_position: 1.0 / 20.0,
            process_velocity: 1.0 / 160.0,
            observed_position: 1.0 / 20.0,
            observed_velocity: 1.0 / 10.0,
        }
    }
}

impl KalmanNoise {
    pub fn model(&self) -> KalmanModel {
        KalmanModel::new(NoiseModel::HeightScaled {
            position: self.process_position,
            velocity: self.process_velocity,
            observed_position: self.observed_position,
            observed_velocity: self.observed_velocity,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Seconds between consecutive detection frames.
    pub delta_t: f64,
    pub mode: Mode,
    /// Tracklets not updated for longer than this many seconds are dropped.
    pub t_live: f64,
    /// Weight of the running embedding in the moving average.
    pub ema_lambda: f64,
    /// Minimum detection confidence for starting a tracklet.
    pub init_confidence: f64,
    /// Report unmatched live tracklets at their predicted position.
    pub emit_coasted: bool,
    pub association: AssociationConfig,
    pub bbd: BbdParams,
    pub vt: VtParams,
    pub kalman: KalmanNoise,
}

impl PipelineConfig {
    pub fn new(delta_t: f64, mode: Mode) -> Self {
        PipelineConfig {
            delta_t,
            mode,
            t_live: 2.0,
            ema_lambda: 0.9,
            init_confidence: 0.6,
            emit_coasted: true,
            association: AssociationConfig::default(),
            bbd: BbdParams::default(),
            vt: VtParams::default(),
            kalman: KalmanNoise::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(Error::Config(format!("delta_t must be positive, got {}", self.delta_t)));
        }
        if !(self.ema_lambda > 0.0 && self.ema_lambda < 1.0) {
            return Err(Error::Config(format!("ema_lambda must lie in (0, 1), got {}", self.ema_lambda)));
        }
        if !(self.t_live > 0.0) {
            return Err(Error::Config(format!("t_live must be positive, got {}", self.t_live)));
        }
        if !(0.0..=1.0).contains(&self.init_confidence) {
            return Err(Error::Config(format!("init_confidence must lie in [0, 1], got {}", self.init_confidence)));
        }
        let k = &self.kalman;
        if [k.process_position, k.process_velocity, k.observed_position, k.observed_velocity]
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::Config("kalman noise terms must be positive".into()));
        }
        self.association.validate()?;
        self.bbd.validate()?;
        self.vt.validate()
    }
}

/// Filter operations applied to one tracklet during the current step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounters {
    pub predicts: u32,
    pub updates: u32,
}

#[derive(Debug, Clone)]
pub struct Tracklet {
    pub id: u64,
    pub state: KalmanState,
    pub ema_embedding: Embedding,
    pub last_update_time: f64,
    /// Box of the latest matched detection.
    pub origin_bbox: BBox,
    pub created_time: f64,
    /// Appearance model from the latest matched detection crop.
    pub vt_model: Option<MeanShiftModel>,
    /// Confidence of the latest matched detection.
    pub confidence: f64,
    pub counters: StepCounters,
}

impl Tracklet {
    fn updated_at(&self, time: f64) -> bool {
        (self.last_update_time - time).abs() <= TIME_EPSILON
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Matched,
    New,
    Coasted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputTrack {
    pub id: u64,
    pub bbox: BBox,
    /// Detection confidence; zero for coasted tracks.
    pub confidence: f64,
    pub kind: OutputKind,
}

/// Tracks reported for one detection frame, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub time: f64,
    pub tracks: Vec<OutputTrack>,
}

/// Frames a low-frequency step works on.
#[derive(Debug, Clone, Copy)]
pub struct StepFrames<'a> {
    /// Frame at the step time.
    pub current: &'a ImageFrame,
    /// Frame half an interval earlier; absent at the first detection frame.
    pub mid: Option<&'a ImageFrame>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepTimings {
    pub visual_tracking: Duration,
    pub association: Duration,
    pub kalman: Duration,
}

impl StepTimings {
    fn add(&mut self, other: &StepTimings) {
        self.visual_tracking += other.visual_tracking;
        self.association += other.association;
        self.kalman += other.kalman;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrackerStats {
    pub steps: u64,
    pub forward_vt_calls: u64,
    pub backward_vt_calls: u64,
    pub tracklets_created: u64,
    pub tracklets_removed: u64,
    pub timings: StepTimings,
    pub last_step: StepTimings,
}

/// Forward half-step prediction of one tracklet.
#[derive(Debug, Clone)]
pub struct MidPrediction {
    pub state: KalmanState,
    pub displacement: DisplacementObservation,
}

pub struct Tracker {
    config: PipelineConfig,
    kalman: KalmanModel,
    tracklets: Vec<Tracklet>,
    next_id: u64,
    last_time: Option<f64>,
    stats: TrackerStats,
}

impl Tracker {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let kalman = config.kalman.model();
        Ok(Tracker { config, kalman, tracklets: Vec::new(), next_id: 1, last_time: None, stats: TrackerStats::default() })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn kalman(&self) -> &KalmanModel {
        &self.kalman
    }

    pub fn tracklets(&self) -> &[Tracklet] {
        &self.tracklets
    }

    pub fn stats(&self) -> &TrackerStats {
        &self.stats
    }

    /// Processes the detections of the frame at `time`.
    ///
    /// `frames` drives visual tracking in low-frequency mode; without them
    /// both directions fall back to the raw detection and the filter motion.
    pub fn step(&mut self, time: f64, detections: &[Detection], frames: Option<StepFrames<'_>>) -> Result<TrackOutput> {
        if !time.is_finite() {
            return Err(Error::InvalidDetection(format!("step time {time} is not finite")));
        }
        if let Some(previous) = self.last_time {
            if time <= previous {
                return Err(Error::TimestampOrder { previous, now: time });
            }
        }
        for d in detections {
            if (d.frame_time - time).abs() > TIME_EPSILON {
                return Err(Error::InvalidDetection(format!(
                    "detection stamped {} passed to the step at {time}",
                    d.frame_time
                )));
            }
        }
        if let (Some(first), Some(t)) = (detections.first(), self.tracklets.first()) {
            if first.embedding.dim() != t.ema_embedding.dim() {
                return Err(Error::EmbeddingDimension { expected: t.ema_embedding.dim(), actual: first.embedding.dim() });
            }
        }
        for t in &mut self.tracklets {
            t.counters = StepCounters::default();
        }

        let output = match self.config.mode {
            Mode::LowFrequency => self.step_low_frequency(time, detections, frames)?,
            Mode::FullFrequency => self.step_full_frequency(time, detections)?,
        };
        self.last_time = Some(time);
        self.stats.steps += 1;
        Ok(output)
    }

    fn step_low_frequency(
        &mut self,
        time: f64,
        detections: &[Detection],
        frames: Option<StepFrames<'_>>,
    ) -> Result<TrackOutput> {
        let mut timings = StepTimings::default();
        let params = &self.config.vt;

        let clock = Instant::now();
        let (current, mid) = match frames {
            Some(f) => {
                let (c, m) = rayon::join(|| f.current.quantize(params.bins), || f.mid.map(|m| m.quantize(params.bins)));
                (Some(c), m)
            }
            None => (None, None),
        };
        let backward: Vec<BackwardVt> = match (&current, &mid) {
            (Some(cur), Some(mid)) => {
                self.stats.backward_vt_calls += detections.len() as u64;
                detections.par_iter().map(|d| backward_vt(&d.bbox, cur, mid, params)).collect()
            }
            _ => detections.iter().map(|d| BackwardVt { bbox: d.bbox, tracked: false, model: None }).collect(),
        };
        let previous = self.last_time;
        let displacements: Vec<DisplacementObservation> = match &mid {
            Some(mid) => {
                let calls = self.tracklets.iter().filter(|t| t.vt_model.is_some()).count();
                self.stats.forward_vt_calls += calls as u64;
                self.tracklets.par_iter().map(|t| forward_displacement(t, previous, mid, params)).collect()
            }
            None => self.tracklets.iter().map(fallback_displacement).collect(),
        };
        timings.visual_tracking = clock.elapsed();

        let clock = Instant::now();
        let mids: Vec<MidPrediction> = self
            .tracklets
            .iter_mut()
            .zip(&displacements)
            .map(|(t, &displacement)| {
                t.counters.predicts += 1;
                MidPrediction { state: self.kalman.predict_with_velocity(&t.state, displacement.v), displacement }
            })
            .collect();
        timings.kalman = clock.elapsed();

        let clock = Instant::now();
        let geometry = self.geometry(&mids.iter().map(|m| &m.state).collect::<Vec<_>>(), time)?;
        let boxes: Vec<BBox> = backward.iter().map(|b| b.bbox).collect();
        let outcome = self.associate(&geometry, &boxes, detections)?;
        timings.association = clock.elapsed();

        let clock = Instant::now();
        let mut outputs = Vec::with_capacity(self.tracklets.len() + detections.len());
        let mut matched = vec![false; self.tracklets.len()];
        for m in &outcome.matches {
            let det = &detections[m.detection];
            update_matched(
                &self.kalman,
                &mut self.tracklets[m.tracklet],
                &mids[m.tracklet],
                det,
                &backward[m.detection],
                self.config.ema_lambda,
            )?;
            matched[m.tracklet] = true;
            outputs.push(OutputTrack {
                id: self.tracklets[m.tracklet].id,
                bbox: det.bbox,
                confidence: det.confidence,
                kind: OutputKind::Matched,
            });
        }
        for (i, t) in self.tracklets.iter_mut().enumerate() {
            if !matched[i] {
                t.state = self.kalman.predict(&mids[i].state);
                t.counters.predicts += 1;
            }
        }
        timings.kalman += clock.elapsed();

        let created = self.create_new_tracklets(&outcome.unmatched_detections, detections, time, |j| {
            backward[j].model.clone().or_else(|| current.as_ref().and_then(|q| init_model_quantized(q, &detections[j].bbox).ok()))
        });
        self.finish(time, outputs, created, &matched, timings)
    }

    fn step_full_frequency(&mut self, time: f64, detections: &[Detection]) -> Result<TrackOutput> {
        let mut timings = StepTimings::default();

        let clock = Instant::now();
        for t in &mut self.tracklets {
            t.state = self.kalman.predict(&t.state);
            t.counters.predicts += 1;
        }
        timings.kalman = clock.elapsed();

        let clock = Instant::now();
        let geometry = self.geometry(&self.tracklets.iter().map(|t| &t.state).collect::<Vec<_>>(), time)?;
        let boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
        let outcome = self.associate(&geometry, &boxes, detections)?;
        timings.association = clock.elapsed();

        let clock = Instant::now();
        let mut outputs = Vec::new();
        let mut matched = vec![false; self.tracklets.len()];
        for m in &outcome.matches {
            let det = &detections[m.detection];
            let t = &mut self.tracklets[m.tracklet];
            t.state = self.kalman.update4(&t.state, &observation4(&det.bbox))?;
            t.counters.updates += 1;
            t.ema_embedding = t.ema_embedding.blend(&det.embedding, self.config.ema_lambda)?;
            t.last_update_time = time;
            t.origin_bbox = det.bbox;
            t.confidence = det.confidence;
            matched[m.tracklet] = true;
            outputs.push(OutputTrack { id: t.id, bbox: det.bbox, confidence: det.confidence, kind: OutputKind::Matched });
        }
        timings.kalman += clock.elapsed();

        let created = self.create_new_tracklets(&outcome.unmatched_detections, detections, time, |_| None);
        self.finish(time, outputs, created, &matched, timings)
    }

    fn geometry(&self, states: &[&KalmanState], time: f64) -> Result<Vec<TrackletGeometry>> {
        states
            .iter()
            .zip(&self.tracklets)
            .map(|(state, t)| {
                let r = self.kalman.observation_noise4(state.size().1);
                let p = &state.covariance;
                Ok(TrackletGeometry {
                    bbox: state.bbox(),
                    size: state.size(),
                    staleness: time - t.last_update_time,
                    innovation_cov: [[p[(0, 0)] + r[(0, 0)], p[(0, 1)]], [p[(1, 0)], p[(1, 1)] + r[(1, 1)]]],
                })
            })
            .collect()
    }

    fn associate(
        &self,
        geometry: &[TrackletGeometry],
        boxes: &[BBox],
        detections: &[Detection],
    ) -> Result<crate::association::AssociationOutcome> {
        let track_emb: Vec<&Embedding> = self.tracklets.iter().map(|t| &t.ema_embedding).collect();
        let det_emb: Vec<&Embedding> = detections.iter().map(|d| &d.embedding).collect();
        let sim = SimilarityMatrix::from_embeddings(&track_emb, &det_emb)?;
        associate(geometry, boxes, &sim, &self.config.association, &self.config.bbd)
    }

    /// Starts tracklets for unmatched detections confident enough; returns
    /// their indices in `self.tracklets`.
    fn create_new_tracklets(
        &mut self,
        unmatched: &[usize],
        detections: &[Detection],
        time: f64,
        mut model_for: impl FnMut(usize) -> Option<MeanShiftModel>,
    ) -> Vec<usize> {
        let mut created = Vec::new();
        for &j in unmatched {
            let det = &detections[j];
            if det.confidence < self.config.init_confidence {
                continue;
            }
            created.push(self.tracklets.len());
            self.tracklets.push(Tracklet {
                id: self.next_id,
                state: self.kalman.initiate(&det.bbox),
                ema_embedding: det.embedding.clone(),
                last_update_time: time,
                origin_bbox: det.bbox,
                created_time: time,
                vt_model: model_for(j),
                confidence: det.confidence,
                counters: StepCounters::default(),
            });
            self.next_id += 1;
            self.stats.tracklets_created += 1;
        }
        created
    }

    fn finish(
        &mut self,
        time: f64,
        mut outputs: Vec<OutputTrack>,
        created: Vec<usize>,
        matched: &[bool],
        timings: StepTimings,
    ) -> Result<TrackOutput> {
        for &i in &created {
            let t = &self.tracklets[i];
            outputs.push(OutputTrack { id: t.id, bbox: t.origin_bbox, confidence: t.confidence, kind: OutputKind::New });
        }
        let before = self.tracklets.len();
        let t_live = self.config.t_live;
        let kept: Vec<bool> = self.tracklets.iter().map(|t| !is_expired(t, time, t_live)).collect();
        if self.config.emit_coasted {
            for (i, t) in self.tracklets.iter().enumerate().take(matched.len()) {
                if !matched[i] && kept[i] {
                    outputs.push(OutputTrack { id: t.id, bbox: t.state.bbox(), confidence: 0.0, kind: OutputKind::Coasted });
                }
            }
        }
        let mut keep = kept.into_iter();
        self.tracklets.retain(|_| keep.next().unwrap_or(true));
        self.stats.tracklets_removed += (before - self.tracklets.len()) as u64;

        outputs.sort_by_key(|o| o.id);
        self.stats.timings.add(&timings);
        self.stats.last_step = timings;
        Ok(TrackOutput { time, tracks: outputs })
    }
}

fn fallback_displacement(t: &Tracklet) -> DisplacementObservation {
    DisplacementObservation { v: t.state.velocity(), source: DisplacementSource::KalmanFallback }
}

fn forward_displacement(
    t: &Tracklet,
    previous: Option<f64>,
    mid: &QuantizedFrame,
    params: &VtParams,
) -> DisplacementObservation {
    let Some(model) = &t.vt_model else {
        return fallback_displacement(t);
    };
    // A tracklet matched at the previous step starts from its detection box;
    // one that has been coasting starts from where the filter put it.
    let fresh = previous.is_some_and(|p| t.updated_at(p));
    let reference = if fresh { t.origin_bbox } else { t.state.bbox() };
    forward_vt(model, &reference, t.state.velocity(), mid, params).displacement
}

pub fn is_expired(t: &Tracklet, now: f64, t_live: f64) -> bool {
    now - t.last_update_time > t_live
}

/// Drops tracklets not updated for more than `t_live` seconds.
pub fn remove_old_tracklets(tracklets: &mut Vec<Tracklet>, now: f64, t_live: f64) {
    tracklets.retain(|t| !is_expired(t, now, t_live));
}

/// Applies a match: update at the intermediate instant, predict across the
/// second half-interval, update with the detection, refresh appearance.
pub fn update_matched(
    kalman: &KalmanModel,
    tracklet: &mut Tracklet,
    mid: &MidPrediction,
    detection: &Detection,
    backward: &BackwardVt,
    ema_lambda: f64,
) -> Result<()> {
    let v = mid.displacement.v;
    // Without a backward track the detection is moved back by the tracklet's
    // own half-step motion.
    let mid_box = if backward.tracked { backward.bbox } else { detection.bbox.translated(-v.0, -v.1) };
    let mut state = match mid.displacement.source {
        DisplacementSource::Visual => kalman.update6(&mid.state, &observation6(&mid_box, v))?,
        DisplacementSource::KalmanFallback => kalman.update4(&mid.state, &observation4(&mid_box))?,
    };
    state = match backward.inverse_velocity(&detection.bbox) {
        Some(u) => kalman.predict_with_velocity(&state, u),
        None => kalman.predict(&state),
    };
    state = kalman.update4(&state, &observation4(&detection.bbox))?;

    tracklet.state = state;
    tracklet.counters.predicts += 1;
    tracklet.counters.updates += 2;
    tracklet.ema_embedding = tracklet.ema_embedding.blend(&detection.embedding, ema_lambda)?;
    tracklet.last_update_time = detection.frame_time;
    tracklet.origin_bbox = detection.bbox;
    tracklet.confidence = detection.confidence;
    if let Some(model) = &backward.model {
        tracklet.vt_model = Some(model.clone());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAY: [u8; 3] = [120, 120, 120];

    fn emb(axis: usize) -> Embedding {
        let mut v = vec![0.0f32; 8];
        v[axis] = 1.0;
        Embedding::new(v).unwrap()
    }

    fn det(time: f64, bbox: BBox, confidence: f64, axis: usize) -> Detection {
        Detection::new(time, bbox, confidence, emb(axis)).unwrap()
    }

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    fn render(boxes: &[(BBox, [u8; 3])]) -> ImageFrame {
        let mut f = ImageFrame::filled(320, 240, GRAY).unwrap();
        for (b, c) in boxes {
            f.fill_box(b, *c);
        }
        f
    }

    fn tracklet(last_update_time: f64) -> Tracklet {
        let kalman = KalmanModel::default();
        let bbox = bb(10.0, 10.0, 20.0, 40.0);
        Tracklet {
            id: 1,
            state: kalman.initiate(&bbox),
            ema_embedding: emb(0),
            last_update_time,
            origin_bbox: bbox,
            created_time: 0.0,
            vt_model: None,
            confidence: 0.9,
            counters: StepCounters::default(),
        }
    }

    #[test]
    fn empty_step_is_empty() {
        let mut tracker = Tracker::new(PipelineConfig::new(1.0, Mode::LowFrequency)).unwrap();
        let out = tracker.step(0.0, &[], None).unwrap();
        assert!(out.tracks.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::new(0.0, Mode::LowFrequency).validate().is_err());
        let mut c = PipelineConfig::new(1.0, Mode::LowFrequency);
        c.ema_lambda = 1.0;
        assert!(c.validate().is_err());
        c.ema_lambda = 0.9;
        c.t_live = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_out_of_order_time() {
        let mut tracker = Tracker::new(PipelineConfig::new(1.0, Mode::LowFrequency)).unwrap();
        tracker.step(1.0, &[], None).unwrap();
        assert!(matches!(tracker.step(1.0, &[], None), Err(Error::TimestampOrder { .. })));
        assert!(matches!(tracker.step(0.5, &[], None), Err(Error::TimestampOrder { .. })));
    }

    #[test]
    fn rejects_mislabelled_detection() {
        let mut tracker = Tracker::new(PipelineConfig::new(1.0, Mode::LowFrequency)).unwrap();
        let d = det(2.0, bb(0.0, 0.0, 10.0, 10.0), 0.9, 0);
        assert!(tracker.step(1.0, &[d], None).is_err());
    }

    #[test]
    fn creation_respects_confidence() {
        let mut tracker = Tracker::new(PipelineConfig::new(1.0, Mode::LowFrequency)).unwrap();
        let dets = [
            det(0.0, bb(0.0, 0.0, 10.0, 20.0), 0.9, 0),
            det(0.0, bb(100.0, 0.0, 10.0, 20.0), 0.3, 1),
            det(0.0, bb(200.0, 0.0, 10.0, 20.0), 0.7, 2),
        ];
        let out = tracker.step(0.0, &dets, None).unwrap();
        let ids: Vec<u64> = out.tracks.iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![1, 2]);
        assert_eq!(out.tracks[0].bbox, dets[0].bbox);
        assert_eq!(out.tracks[1].bbox, dets[2].bbox);
        assert!(out.tracks.iter().all(|t| t.kind == OutputKind::New));
    }

    #[test]
    fn removal_boundary() {
        let mut ts = vec![tracklet(9.5), tracklet(7.5), tracklet(8.0)];
        remove_old_tracklets(&mut ts, 10.0, 2.0);
        let kept: Vec<f64> = ts.iter().map(|t| t.last_update_time).collect();
        assert_eq!(kept, vec![9.5, 8.0]);
    }

    #[test]
    fn stationary_match_lands_on_detection() {
        let kalman = KalmanModel::default();
        let mut t = tracklet(0.0);
        let bbox = t.origin_bbox;
        let mid = MidPrediction {
            state: kalman.predict_with_velocity(&t.state, (0.0, 0.0)),
            displacement: DisplacementObservation { v: (0.0, 0.0), source: DisplacementSource::Visual },
        };
        let d = det(1.0, bbox, 0.8, 0);
        let back = BackwardVt { bbox, tracked: true, model: None };
        update_matched(&kalman, &mut t, &mid, &d, &back, 0.9).unwrap();
        let (cx, cy) = t.state.center();
        let (ex, ey) = bbox.center();
        assert!((cx - ex).abs() < 1e-3 && (cy - ey).abs() < 1e-3);
        assert_eq!(t.counters, StepCounters { predicts: 1, updates: 2 });
        assert_eq!(t.last_update_time, 1.0);
        assert_eq!(t.confidence, 0.8);
    }

    #[test]
    fn ema_extremes() {
        let kalman = KalmanModel::default();
        let bbox = bb(10.0, 10.0, 20.0, 40.0);
        let mid = |t: &Tracklet| MidPrediction {
            state: kalman.predict(&t.state),
            displacement: DisplacementObservation { v: (0.0, 0.0), source: DisplacementSource::KalmanFallback },
        };
        let back = BackwardVt { bbox, tracked: false, model: None };
        let d = det(1.0, bbox, 0.8, 3);

        let mut keep = tracklet(0.0);
        let m = mid(&keep);
        update_matched(&kalman, &mut keep, &m, &d, &back, 1.0).unwrap();
        assert_eq!(keep.ema_embedding, emb(0));

        let mut replace = tracklet(0.0);
        let m = mid(&replace);
        update_matched(&kalman, &mut replace, &m, &d, &back, 0.0).unwrap();
        assert_eq!(replace.ema_embedding, emb(3));
    }

    /// Two targets, one moving right and one moving down, rendered at step
    /// and intermediate times.
    fn two_target_run(mode: Mode, steps: usize) -> (Tracker, Vec<TrackOutput>) {
        let a = |t: f64| bb(40.0 + 30.0 * t, 60.0, 24.0, 48.0);
        let b = |t: f64| bb(200.0, 20.0 + 20.0 * t, 30.0, 40.0);
        let colors = [[200, 40, 40], [40, 60, 210]];
        let frame = |t: f64| render(&[(a(t), colors[0]), (b(t), colors[1])]);
        let mut tracker = Tracker::new(PipelineConfig::new(1.0, mode)).unwrap();
        let mut outputs = Vec::new();
        for k in 0..steps {
            let t = k as f64;
            let dets = [det(t, a(t), 0.9, 0), det(t, b(t), 0.9, 1)];
            let (cur, mid) = (frame(t), frame(t - 0.5));
            let frames = (mode == Mode::LowFrequency).then_some(StepFrames { current: &cur, mid: (k > 0).then_some(&mid) });
            outputs.push(tracker.step(t, &dets, frames).unwrap());
        }
        (tracker, outputs)
    }

    #[test]
    fn ids_persist_and_outputs_are_detection_boxes() {
        let (tracker, outputs) = two_target_run(Mode::LowFrequency, 6);
        for out in &outputs {
            let ids: Vec<u64> = out.tracks.iter().map(|t| t.id).collect();
            assert_eq!(ids, vec![1, 2]);
        }
        for (k, out) in outputs.iter().enumerate().skip(1) {
            let t = k as f64;
            assert!(out.tracks.iter().all(|o| o.kind == OutputKind::Matched));
            assert_eq!(out.tracks[0].bbox, bb(40.0 + 30.0 * t, 60.0, 24.0, 48.0));
        }
        assert_eq!(tracker.stats().forward_vt_calls, 10);
        assert_eq!(tracker.stats().backward_vt_calls, 10);
    }

    #[test]
    fn low_frequency_counts_two_predicts() {
        let (tracker, _) = two_target_run(Mode::LowFrequency, 3);
        for t in tracker.tracklets() {
            assert_eq!(t.counters, StepCounters { predicts: 2, updates: 2 });
        }
    }

    #[test]
    fn full_frequency_counts_one_of_each() {
        let (tracker, outputs) = two_target_run(Mode::FullFrequency, 4);
        assert_eq!(tracker.stats().forward_vt_calls + tracker.stats().backward_vt_calls, 0);
        for t in tracker.tracklets() {
            assert_eq!(t.counters, StepCounters { predicts: 1, updates: 1 });
        }
        assert!(outputs.iter().all(|o| o.tracks.iter().map(|t| t.id).collect::<Vec<_>>() == vec![1, 2]));
    }

    #[test]
    fn unmatched_tracklets_coast_then_expire_without_id_reuse() {
        let mut tracker = Tracker::new(PipelineConfig::new(1.0, Mode::LowFrequency)).unwrap();
        let first = det(0.0, bb(10.0, 10.0, 20.0, 40.0), 0.9, 0);
        tracker.step(0.0, &[first], None).unwrap();

        let coasted = tracker.step(1.0, &[], None).unwrap();
        assert_eq!(coasted.tracks.len(), 1);
        assert_eq!(coasted.tracks[0].kind, OutputKind::Coasted);
        assert_eq!(tracker.tracklets()[0].counters.predicts, 2);

        tracker.step(2.0, &[], None).unwrap();
        assert_eq!(tracker.tracklets().len(), 1);
        tracker.step(3.0, &[], None).unwrap();
        assert!(tracker.tracklets().is_empty());

        let again = det(4.0, bb(10.0, 10.0, 20.0, 40.0), 0.9, 0);
        let out = tracker.step(4.0, &[again], None).unwrap();
        assert_eq!(out.tracks[0].id, 2);
    }

    #[test]
    fn coasted_output_can_be_disabled() {
        let mut config = PipelineConfig::new(1.0, Mode::LowFrequency);
        config.emit_coasted = false;
        let mut tracker = Tracker::new(config).unwrap();
        tracker.step(0.0, &[det(0.0, bb(10.0, 10.0, 20.0, 40.0), 0.9, 0)], None).unwrap();
        assert!(tracker.step(1.0, &[], None).unwrap().tracks.is_empty());
    }
}
