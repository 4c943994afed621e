//! Synthetic tracking sequences with exact ground truth.
//!
//! Targets are solid rectangles moving along closed-form trajectories over a
//! uniform background. Detections are ground-truth boxes with jitter, misses
//! and false positives; every detection remembers which target produced it.
//! Appearance embeddings are drawn around a per-target mean direction.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_embeddings, write_ppm, write_results, MotRecord, SequenceDir, SequenceMeta};
use crate::model::{BBox, Detection, Embedding};
use crate::tracker::{OutputKind, OutputTrack, TrackOutput};
use crate::visual::ImageFrame;

/// Centre motion in world pixels; times in seconds from the sequence start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Linear { start: (f64, f64), velocity: (f64, f64) },
    Sinusoidal { start: (f64, f64), velocity: (f64, f64), amplitude: (f64, f64), period: f64, phase: f64 },
    /// Straight line from `from` to `to` over the whole sequence.
    Crossing { from: (f64, f64), to: (f64, f64) },
    /// Moves for `go` seconds, rests for `stop` seconds, repeatedly.
    StopAndGo { start: (f64, f64), velocity: (f64, f64), go: f64, stop: f64 },
    Accelerating { start: (f64, f64), velocity: (f64, f64), acceleration: (f64, f64) },
}

impl Trajectory {
    pub fn center(&self, t: f64, duration: f64) -> (f64, f64) {
        match *self {
            Trajectory::Linear { start, velocity } => (start.0 + velocity.0 * t, start.1 + velocity.1 * t),
            Trajectory::Sinusoidal { start, velocity, amplitude, period, phase } => {
                let s = (TAU * t / period + phase).sin();
                (start.0 + velocity.0 * t + amplitude.0 * s, start.1 + velocity.1 * t + amplitude.1 * s)
            }
            Trajectory::Crossing { from, to } => {
                let f = if duration > 0.0 { (t / duration).clamp(0.0, 1.0) } else { 0.0 };
                (from.0 + (to.0 - from.0) * f, from.1 + (to.1 - from.1) * f)
            }
            Trajectory::StopAndGo { start, velocity, go, stop } => {
                let cycle = go + stop;
                let moving = (t / cycle).floor() * go + (t % cycle).min(go);
                (start.0 + velocity.0 * moving, start.1 + velocity.1 * moving)
            }
            Trajectory::Accelerating { start, velocity, acceleration } => (
                start.0 + velocity.0 * t + 0.5 * acceleration.0 * t * t,
                start.1 + velocity.1 * t + 0.5 * acceleration.1 * t * t,
            ),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Trajectory::Sinusoidal { period, .. } => period > 0.0,
            Trajectory::StopAndGo { go, stop, .. } => go > 0.0 && stop >= 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario(format!("degenerate trajectory {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub trajectory: Trajectory,
    pub size: (f64, f64),
    pub color: [u8; 3],
    pub embedding_seed: u64,
    /// Seconds during which the target exists; the whole sequence if absent.
    #[serde(default)]
    pub span: Option<(f64, f64)>,
}

/// A static rectangle drawn over targets while active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccluderSpec {
    pub rect: (f64, f64, f64, f64),
    pub color: [u8; 3],
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of box jitter, pixels.
    pub bbox_jitter: f64,
    /// Per-component standard deviation added to the mean embedding.
    pub embedding_noise: f64,
    pub miss_rate: f64,
    /// Chance per visible target and frame of an extra spurious detection.
    pub false_positive_rate: f64,
    /// Targets less visible than this are never detected.
    pub min_visibility: f64,
    /// Norm of the per-target offset from a shared appearance direction;
    /// zero gives independent directions per target.
    #[serde(default)]
    pub appearance_spread: f64,
    /// Standard deviation of random mixing toward every target's appearance
    /// offset; makes look-alike targets hard to rank by appearance.
    #[serde(default)]
    pub confusion_noise: f64,
    /// Extra per-component embedding noise at zero visibility, scaled
    /// linearly by the hidden fraction of the box.
    #[serde(default)]
    pub occlusion_noise: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            bbox_jitter: 0.0,
            embedding_noise: 0.03,
            miss_rate: 0.0,
            false_positive_rate: 0.0,
            min_visibility: 0.3,
            appearance_spread: 0.0,
            confusion_noise: 0.0,
            occlusion_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub duration: f64,
    pub fps: f64,
    pub background: [u8; 3],
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub occluders: Vec<OccluderSpec>,
    /// Camera velocity in pixels per second; the scene drifts the other way.
    #[serde(default)]
    pub camera_pan: Option<(f64, f64)>,
    pub noise: NoiseSpec,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Scenario(m));
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return fail(format!("fps must be positive, got {}", self.fps));
        }
        if !(self.duration > 0.0) || self.width == 0 || self.height == 0 {
            return fail("duration and arena size must be positive".into());
        }
        if self.embedding_dim < 2 {
            return fail("embeddings need at least two dimensions".into());
        }
        let n = &self.noise;
        for (name, rate) in [("miss_rate", n.miss_rate), ("false_positive_rate", n.false_positive_rate)] {
            if !(0.0..1.0).contains(&rate) {
                return fail(format!("{name} must lie in [0, 1), got {rate}"));
            }
        }
        if !(n.bbox_jitter >= 0.0 && n.embedding_noise >= 0.0 && n.appearance_spread >= 0.0 && n.confusion_noise >= 0.0) {
            return fail("noise levels must be non-negative".into());
        }
        for (k, t) in self.targets.iter().enumerate() {
            let (w, h) = t.size;
            if !(w >= 1.0 && h >= 1.0) || w > self.width as f64 || h > self.height as f64 {
                return fail(format!("target {k} of size {w}x{h} does not fit the {}x{} arena", self.width, self.height));
            }
            t.trajectory.validate()?;
        }
        Ok(())
    }

    pub fn frame_count(&self) -> u32 {
        ((self.duration * self.fps).round() as u32).max(1)
    }

    pub fn frame_time(&self, frame: u32) -> f64 {
        f64::from(frame - 1) / self.fps
    }

    pub fn meta(&self) -> SequenceMeta {
        SequenceMeta {
            name: self.name.clone(),
            source_fps: self.fps,
            width: self.width,
            height: self.height,
            frame_count: self.frame_count(),
            image_ext: ".ppm".into(),
        }
    }

    fn camera_offset(&self, t: f64) -> (f64, f64) {
        self.camera_pan.map_or((0.0, 0.0), |(vx, vy)| (-vx * t, -vy * t))
    }

    fn target_box(&self, k: usize, t: f64) -> Option<BBox> {
        let target = &self.targets[k];
        if let Some((a, b)) = target.span {
            if t < a || t > b {
                return None;
            }
        }
        let (cx, cy) = target.trajectory.center(t, self.duration);
        let (ox, oy) = self.camera_offset(t);
        BBox::from_center(cx + ox, cy + oy, target.size.0, target.size.1).ok()
    }

    fn occluder_boxes(&self, t: f64) -> Vec<(BBox, [u8; 3])> {
        let (ox, oy) = self.camera_offset(t);
        self.occluders
            .iter()
            .filter(|o| o.window.0 <= t && t <= o.window.1)
            .filter_map(|o| BBox::new(o.rect.0 + ox, o.rect.1 + oy, o.rect.2, o.rect.3).ok().map(|b| (b, o.color)))
            .collect()
    }

    fn arena(&self) -> BBox {
        BBox { x: 0.0, y: 0.0, w: self.width as f64, h: self.height as f64 }
    }

    /// Renders the scene at a 1-based frame index.
    pub fn render(&self, frame: u32) -> ImageFrame {
        let t = self.frame_time(frame);
        // Validated dimensions make this infallible.
        let mut image = ImageFrame::filled(self.width, self.height, self.background).expect("validated arena size");
        for k in 0..self.targets.len() {
            if let Some(b) = self.target_box(k, t) {
                image.fill_box(&b, self.targets[k].color);
            }
        }
        for (b, color) in self.occluder_boxes(t) {
            image.fill_box(&b, color);
        }
        image
    }
}

/// One ground-truth box; `visibility` is the unoccluded fraction inside the arena.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtBox {
    pub frame: u32,
    pub id: u64,
    pub bbox: BBox,
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDetection {
    pub detection: Detection,
    /// Generating target id; `None` for false positives.
    pub gt_id: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub spec: ScenarioSpec,
    pub ground_truth: Vec<GtBox>,
    pub detections: BTreeMap<u32, Vec<SynthDetection>>,
}

impl SyntheticSequence {
    pub fn meta(&self) -> SequenceMeta {
        self.spec.meta()
    }

    pub fn render(&self, frame: u32) -> ImageFrame {
        self.spec.render(frame)
    }

    pub fn detections_at(&self, frame: u32) -> Vec<Detection> {
        self.detections.get(&frame).map_or_else(Vec::new, |d| d.iter().map(|s| s.detection.clone()).collect())
    }

    pub fn ground_truth_records(&self) -> Vec<MotRecord> {
        self.ground_truth
            .iter()
            .map(|g| MotRecord { frame: g.frame, id: g.id as i64, bbox: g.bbox, confidence: 1.0 })
            .collect()
    }

    /// Writes the sequence directory. `frames` limits which images are
    /// rendered; all frames when `None`.
    pub fn write(&self, root: &Path, frames: Option<&[u32]>) -> Result<SequenceDir> {
        let dir = SequenceDir::create(root, self.meta())?;
        let all: Vec<u32> = (1..=self.spec.frame_count()).collect();
        for &f in frames.unwrap_or(&all) {
            write_ppm(&dir.image_path(f), &self.render(f))?;
        }
        let mut records = Vec::new();
        let mut embeddings = Vec::new();
        for (&frame, dets) in &self.detections {
            for d in dets {
                records.push(MotRecord { frame, id: -1, bbox: d.detection.bbox, confidence: d.detection.confidence });
                embeddings.push(d.detection.embedding.clone());
            }
        }
        write_det_lines(&dir.detections_path(), &records)?;
        write_embeddings(&dir.embeddings_path(), self.spec.embedding_dim, &embeddings)?;
        write_results(&dir.ground_truth_path(), &self.ground_truth_records())?;
        Ok(dir)
    }
}

/// Detection lines in the given order, which the embedding sidecar mirrors.
fn write_det_lines(path: &Path, records: &[MotRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        let b = &r.bbox;
        text.push_str(&format!("{},-1,{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1\n", r.frame, b.x, b.y, b.w, b.h, r.confidence));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Box of `b` inside `area`, if any.
fn clip(b: &BBox, area: &BBox) -> Option<BBox> {
    let x0 = b.x.max(area.x);
    let y0 = b.y.max(area.y);
    let x1 = b.right().min(area.right());
    let y1 = b.bottom().min(area.bottom());
    (x1 > x0 && y1 > y0).then_some(BBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 })
}

/// Fraction of `b` that is inside the arena and not covered by the largest
/// single occluding box.
fn visibility(b: &BBox, arena: &BBox, covers: &[BBox]) -> f64 {
    let Some(inside) = clip(b, arena) else { return 0.0 };
    let covered = covers.iter().map(|c| inside.intersection_area(c)).fold(0.0, f64::max);
    ((inside.area() - covered) / b.area()).clamp(0.0, 1.0)
}

/// Appearance model: a shared direction plus one offset per target. Target
/// `k` looks like `normalize(shared + offsets[k])`.
struct Appearance {
    shared: Vec<f64>,
    offsets: Vec<Vec<f64>>,
}

impl Appearance {
    fn new(spec: &ScenarioSpec) -> Self {
        let dim = spec.embedding_dim;
        let unit_gaussian = |seed: u64| -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        };
        let spread = spec.noise.appearance_spread;
        let (shared, scale) = if spread == 0.0 { (vec![0.0; dim], 1.0) } else { (unit_gaussian(spec.seed ^ 0x5eed_0fa1), spread) };
        let offsets = spec
            .targets
            .iter()
            .map(|t| unit_gaussian(t.embedding_seed).into_iter().map(|x| x * scale).collect())
            .collect();
        Appearance { shared, offsets }
    }

    #[cfg(test)]
    fn mean(&self, k: usize) -> Vec<f64> {
        let v: Vec<f64> = self.shared.iter().zip(&self.offsets[k]).map(|(s, o)| s + o).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn sample(&self, k: usize, visibility: f64, noise: &NoiseSpec, rng: &mut ChaCha8Rng) -> Result<Embedding> {
        let mut v: Vec<f64> = self.shared.iter().zip(&self.offsets[k]).map(|(s, o)| s + o).collect();
        if noise.confusion_noise > 0.0 {
            let mix = Normal::new(0.0, noise.confusion_noise).map_err(|e| Error::Scenario(e.to_string()))?;
            for offset in &self.offsets {
                let z = mix.sample(rng);
                v.iter_mut().zip(offset).for_each(|(x, o)| *x += z * o);
            }
        }
        let sigma = noise.embedding_noise + noise.occlusion_noise * (1.0 - visibility).clamp(0.0, 1.0);
        if sigma > 0.0 {
            let jitter = Normal::new(0.0, sigma).map_err(|e| Error::Scenario(e.to_string()))?;
            v.iter_mut().for_each(|x| *x += jitter.sample(rng));
        }
        Embedding::normalized_f64(&v)
    }
}

/// Generates ground truth and detections. Frames are rendered on demand.
pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let appearance = Appearance::new(spec);
    let jitter = Normal::new(0.0, spec.noise.bbox_jitter.max(0.0)).map_err(|e| Error::Scenario(e.to_string()))?;
    let arena = spec.arena();
    let mut ground_truth = Vec::new();
    let mut detections = BTreeMap::new();

    for frame in 1..=spec.frame_count() {
        let t = spec.frame_time(frame);
        let boxes: Vec<Option<BBox>> = (0..spec.targets.len()).map(|k| spec.target_box(k, t)).collect();
        let occluders: Vec<BBox> = spec.occluder_boxes(t).into_iter().map(|(b, _)| b).collect();
        let mut frame_dets = Vec::new();
        for (k, b) in boxes.iter().enumerate() {
            let Some(b) = b else { continue };
            // Later targets and occluders are drawn on top.
            let covers: Vec<BBox> = boxes[k + 1..].iter().flatten().copied().chain(occluders.iter().copied()).collect();
            let vis = visibility(b, &arena, &covers);
            if vis <= 0.0 {
                continue;
            }
            let id = k as u64 + 1;
            ground_truth.push(GtBox { frame, id, bbox: *b, visibility: vis });

            // Draw every random number regardless of the outcome so that a
            // change in one rate does not reshuffle the rest of the sequence.
            let missed = rng.random::<f64>() < spec.noise.miss_rate;
            let d: [f64; 4] = std::array::from_fn(|_| jitter.sample(&mut rng));
            let confidence = rng.random_range(0.7..1.0);
            let embedding = appearance.sample(k, vis, &spec.noise, &mut rng)?;
            let spurious = rng.random::<f64>() < spec.noise.false_positive_rate;
            let fp_box = (
                rng.random_range(0.0..arena.w),
                rng.random_range(0.0..arena.h),
                rng.random_range(0.5..1.5),
                rng.random_range(0.3..0.6),
            );
            let fp_embedding: Vec<f64> = (0..spec.embedding_dim).map(|_| rng.sample(StandardNormal)).collect();

            if vis >= spec.noise.min_visibility && !missed {
                let bbox = BBox::new(b.x + d[0], b.y + d[1], (b.w + d[2]).max(1.0), (b.h + d[3]).max(1.0))?;
                let detection = Detection::new(t, bbox, confidence, embedding)?;
                frame_dets.push(SynthDetection { detection, gt_id: Some(id) });
            }
            if spurious {
                let (w, h) = (b.w * fp_box.2, b.h * fp_box.2);
                let bbox = BBox::from_center(fp_box.0, fp_box.1, w, h)?;
                let detection = Detection::new(t, bbox, fp_box.3 + 0.3, Embedding::normalized_f64(&fp_embedding)?)?;
                frame_dets.push(SynthDetection { detection, gt_id: None });
            }
        }
        if !frame_dets.is_empty() {
            detections.insert(frame, frame_dets);
        }
    }
    Ok(SyntheticSequence { spec: spec.clone(), ground_truth, detections })
}

/// Tracks that label every detection with its generating target: the
/// identity-perfect result on this data. False positives get fresh ids above
/// all target ids, one per detection.
pub fn oracle_tracks(sequence: &SyntheticSequence, frames: Option<&[u32]>) -> Result<Vec<(u32, TrackOutput)>> {
    let mut next_fp = sequence.spec.targets.len() as u64 + 1;
    let mut out = Vec::new();
    for (&frame, dets) in &sequence.detections {
        if frames.is_some_and(|f| !f.contains(&frame)) {
            continue;
        }
        let mut tracks = Vec::new();
        for d in dets {
            let id = match d.gt_id {
                Some(id) => id,
                None => {
                    next_fp += 1;
                    next_fp - 1
                }
            };
            tracks.push(OutputTrack { id, bbox: d.detection.bbox, confidence: d.detection.confidence, kind: OutputKind::Matched });
        }
        tracks.sort_by_key(|t| t.id);
        out.push((frame, TrackOutput { time: sequence.spec.frame_time(frame), tracks }));
    }
    Ok(out)
}

/// Generating target ids; fails on any detection without one.
pub fn provenance_ids(dets: &[SynthDetection]) -> Result<Vec<u64>> {
    dets.iter().map(|d| d.gt_id.ok_or(Error::MissingProvenance)).collect()
}

fn hue_color(k: usize, n: usize) -> [u8; 3] {
    let h = (k as f64 + 0.5) / n.max(1) as f64 * 6.0;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    let (r, g, b) = match h as usize {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let scale = |c: f64| (30.0 + 200.0 * c).round() as u8;
    [scale(r), scale(g), scale(b)]
}

pub const PRESETS: [&str; 5] = ["single", "crossing", "clones", "accelerating", "crowd"];

/// Named scenarios. All use a 640×480 arena at 30 FPS.
pub fn preset(name: &str, seed: u64) -> Result<ScenarioSpec> {
    let base = |name: &str, duration: f64, targets: Vec<TargetSpec>, noise: NoiseSpec| ScenarioSpec {
        name: name.to_string(),
        width: 640,
        height: 480,
        duration,
        fps: 30.0,
        background: [110, 110, 110],
        targets,
        occluders: Vec::new(),
        camera_pan: None,
        noise,
        embedding_dim: 128,
        seed,
    };
    let target = |trajectory: Trajectory, size: (f64, f64), color: [u8; 3], k: u64| TargetSpec {
        trajectory,
        size,
        color,
        embedding_seed: seed.wrapping_mul(1000).wrapping_add(k),
        span: None,
    };
    let spec = match name {
        "single" => base(
            "single",
            10.0,
            vec![target(Trajectory::Linear { start: (100.0, 240.0), velocity: (40.0, 5.0) }, (40.0, 80.0), [200, 40, 40], 0)],
            NoiseSpec::default(),
        ),
        // Two targets pass each other with partial overlap; no noise.
        "crossing" => base(
            "crossing",
            10.0,
            vec![
                target(Trajectory::Crossing { from: (80.0, 215.0), to: (560.0, 215.0) }, (40.0, 80.0), [210, 40, 40], 0),
                target(Trajectory::Crossing { from: (560.0, 265.0), to: (80.0, 265.0) }, (40.0, 80.0), [40, 70, 210], 1),
            ],
            NoiseSpec { embedding_noise: 0.0, ..NoiseSpec::default() },
        ),
        // Identical-looking targets weaving around each other. Appearance
        // alone cannot tell them apart reliably and degrades under occlusion.
        "clones" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc10e);
            let targets = (0..6)
                .map(|k| {
                    let row = 90.0 + 60.0 * k as f64;
                    let dir = if k % 2 == 0 { 1.0 } else { -1.0 };
                    let start_x = if dir > 0.0 { rng.random_range(60.0..200.0) } else { rng.random_range(440.0..580.0) };
                    target(
                        Trajectory::Sinusoidal {
                            start: (start_x, row),
                            velocity: (dir * rng.random_range(25.0..45.0), 0.0),
                            amplitude: (rng.random_range(15.0..45.0), rng.random_range(37.5..67.5)),
                            period: rng.random_range(3.0..6.0),
                            phase: rng.random_range(0.0..TAU),
                        },
                        (36.0, 72.0),
                        [190, 190, 60],
                        k,
                    )
                })
                .collect();
            base(
                "clones",
                12.0,
                targets,
                NoiseSpec {
                    bbox_jitter: 1.0,
                    embedding_noise: 0.01,
                    appearance_spread: 0.333,
                    confusion_noise: 0.35,
                    occlusion_noise: 1.0,
                    ..NoiseSpec::default()
                },
            )
        }
        "accelerating" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xacce1);
            let ax = rng.random_range(30.0..60.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            let ay = rng.random_range(-20.0..20.0);
            let start = (320.0 - ax * 2.0, 240.0 - ay * 2.0);
            base(
                "accelerating",
                4.0,
                vec![target(
                    Trajectory::Accelerating { start, velocity: (0.0, 0.0), acceleration: (ax, ay) },
                    (40.0, 80.0),
                    [200, 50, 50],
                    0,
                )],
                NoiseSpec { embedding_noise: 0.0, ..NoiseSpec::default() },
            )
        }
        "crowd" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc20d);
            let n = 50;
            let targets = (0..n)
                .map(|k| {
                    let (col, row) = (k % 10, k / 10);
                    let start = (40.0 + 62.0 * col as f64, 50.0 + 95.0 * row as f64);
                    let velocity = (rng.random_range(-6.0..6.0), rng.random_range(-4.0..4.0));
                    target(Trajectory::Linear { start, velocity }, (28.0, 56.0), hue_color(k, n), k as u64)
                })
                .collect();
            base("crowd", 4.0, targets, NoiseSpec::default())
        }
        other => {
            return Err(Error::Scenario(format!("unknown preset `{other}`; expected one of {}", PRESETS.join(", "))))
        }
    };
    Ok(spec)
}
