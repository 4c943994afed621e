//! Scale-adaptive mean-shift tracking on quantized RGB histograms, and the
//! forward/backward propagation helpers built on top of it.
//!
//! Forward propagation moves a tracklet from its last matched box into the
//! intermediate frame and turns the result into a displacement observation for
//! the Kalman filter. Backward propagation moves a fresh detection from the
//! current frame back into the intermediate frame so that both sides of the
//! association are compared at the same instant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BBox;

/// Row-major RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero-sized image {width}x{height}")));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::InvalidImage(format!(
                "{} bytes for a {width}x{height} RGB image (expected {})",
                pixels.len(),
                width * height * 3
            )));
        }
        Ok(ImageFrame { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        ImageFrame::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Paints every pixel whose centre lies inside `bbox`.
    pub fn fill_box(&mut self, bbox: &BBox, rgb: [u8; 3]) {
        let Some((x0, x1, y0, y1)) = pixel_span(bbox, self.width, self.height) else {
            return;
        };
        for y in y0..y1 {
            for x in x0..x1 {
                self.set_pixel(x, y, rgb);
            }
        }
    }

    pub fn quantize(&self, bins: usize) -> QuantizedFrame {
        let bins = bins.clamp(2, 256);
        let index = self
            .pixels
            .chunks_exact(3)
            .map(|p| {
                let q = |c: u8| c as usize * bins / 256;
                ((q(p[0]) * bins + q(p[1])) * bins + q(p[2])) as u32
            })
            .collect();
        QuantizedFrame { width: self.width, height: self.height, bins, index }
    }
}

/// Half-open pixel ranges whose centres fall inside `bbox`, clipped to the frame.
fn pixel_span(bbox: &BBox, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
    let lo = |v: f64, max: usize| ((v - 0.5).ceil().max(0.0) as usize).min(max);
    let x0 = lo(bbox.x, width);
    let x1 = lo(bbox.right(), width);
    let y0 = lo(bbox.y, height);
    let y1 = lo(bbox.bottom(), height);
    (x0 < x1 && y0 < y1).then_some((x0, x1, y0, y1))
}

/// Per-pixel colour bin indices of an [`ImageFrame`].
#[derive(Debug, Clone)]
pub struct QuantizedFrame {
    width: usize,
    height: usize,
    bins: usize,
    index: Vec<u32>,
}

impl QuantizedFrame {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    fn histogram_len(&self) -> usize {
        self.bins * self.bins * self.bins
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VtParams {
    /// Bins per colour channel.
    pub bins: usize,
    pub max_iterations: usize,
    /// Mean-shift stops once the centre moves less than this, pixels.
    pub convergence_px: f64,
    /// Relative scales tried at every refinement iteration.
    pub scales: Vec<f64>,
    /// Weight of the previous size when adopting a new scale.
    pub scale_smoothing: f64,
    /// Bhattacharyya coefficient below which tracking is reported as failed.
    pub failure_threshold: f64,
    /// Kernel enlargement factors, coarse to fine; the last stage adapts scale.
    pub search_factors: Vec<f64>,
}

impl Default for VtParams {
    fn default() -> Self {
        VtParams {
            bins: 16,
            max_iterations: 15,
            convergence_px: 0.5,
            scales: vec![0.95, 1.0, 1.05],
            scale_smoothing: 0.7,
            failure_threshold: 0.4,
            search_factors: vec![2.0, 1.0],
        }
    }
}

impl VtParams {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 || self.bins > 256 {
            return Err(Error::Config(format!("histogram bins must be in 2..=256, got {}", self.bins)));
        }
        if self.max_iterations == 0 || self.scales.is_empty() || self.search_factors.is_empty() {
            return Err(Error::Config("visual tracker needs iterations, scales and search factors".into()));
        }
        if self.scales.iter().chain(&self.search_factors).any(|s| !(*s > 0.0)) {
            return Err(Error::Config("scales and search factors must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.scale_smoothing) || !(0.0..=1.0).contains(&self.failure_threshold) {
            return Err(Error::Config("scale smoothing and failure threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Kernel-weighted colour model of a target.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanShiftModel {
    histogram: Vec<f64>,
    bins: usize,
    reference_size: (f64, f64),
}

impl MeanShiftModel {
    pub fn histogram(&self) -> &[f64] {
        &self.histogram
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn reference_size(&self) -> (f64, f64) {
        self.reference_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VtResult {
    pub bbox: BBox,
    /// Bhattacharyya coefficient between the model and the final candidate.
    pub similarity: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementSource {
    Visual,
    KalmanFallback,
}

/// Centre displacement over one half-interval, pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementObservation {
    pub v: (f64, f64),
    pub source: DisplacementSource,
}

/// Sparse histogram accumulator, reset by clearing only touched bins.
struct Accumulator {
    values: Vec<f64>,
    touched: Vec<u32>,
    total: f64,
}

impl Accumulator {
    fn new(len: usize) -> Self {
        Accumulator { values: vec![0.0; len], touched: Vec::new(), total: 0.0 }
    }

    fn clear(&mut self) {
        for &b in &self.touched {
            self.values[b as usize] = 0.0;
        }
        self.touched.clear();
        self.total = 0.0;
    }

    #[inline]
    fn add(&mut self, bin: u32, weight: f64) {
        let slot = &mut self.values[bin as usize];
        if *slot == 0.0 {
            self.touched.push(bin);
        }
        *slot += weight;
        self.total += weight;
    }
}

/// Elliptical Epanechnikov window centred at `(cx, cy)` with half-axes `(hw, hh)`.
#[derive(Debug, Clone, Copy)]
struct Window {
    cx: f64,
    cy: f64,
    hw: f64,
    hh: f64,
}

impl Window {
    fn from_box(b: &BBox, factor: f64) -> Self {
        let (cx, cy) = b.center();
        Window { cx, cy, hw: b.w * factor / 2.0, hh: b.h * factor / 2.0 }
    }

    /// Visits in-frame pixels inside the ellipse with their kernel weight.
    #[inline]
    fn for_each(&self, frame: &QuantizedFrame, mut f: impl FnMut(usize, usize, u32, f64)) {
        let x0 = ((self.cx - self.hw - 0.5).ceil().max(0.0)) as usize;
        let y0 = ((self.cy - self.hh - 0.5).ceil().max(0.0)) as usize;
        let x1 = ((self.cx + self.hw - 0.5).floor() + 1.0).clamp(0.0, frame.width as f64) as usize;
        let y1 = ((self.cy + self.hh - 0.5).floor() + 1.0).clamp(0.0, frame.height as f64) as usize;
        let (inv_w, inv_h) = (1.0 / self.hw, 1.0 / self.hh);
        for y in y0..y1 {
            let dy = (y as f64 + 0.5 - self.cy) * inv_h;
            let dy2 = dy * dy;
            if dy2 >= 1.0 {
                continue;
            }
            let row = y * frame.width;
            for x in x0..x1 {
                let dx = (x as f64 + 0.5 - self.cx) * inv_w;
                let r2 = dx * dx + dy2;
                if r2 < 1.0 {
                    f(x, y, frame.index[row + x], 1.0 - r2);
                }
            }
        }
    }

    fn histogram(&self, frame: &QuantizedFrame, acc: &mut Accumulator) {
        acc.clear();
        self.for_each(frame, |_, _, bin, k| acc.add(bin, k));
    }
}

fn bhattacharyya(model: &[f64], acc: &Accumulator) -> f64 {
    if acc.total <= 0.0 {
        return 0.0;
    }
    let inv = 1.0 / acc.total;
    let rho: f64 = acc
        .touched
        .iter()
        .map(|&b| (model[b as usize] * acc.values[b as usize] * inv).sqrt())
        .sum();
    rho.clamp(0.0, 1.0)
}

/// Normalized kernel-weighted histogram of the box interior.
pub fn init_model(frame: &ImageFrame, bbox: &BBox, bins: usize) -> Result<MeanShiftModel> {
    init_model_quantized(&frame.quantize(bins), bbox)
}

pub fn init_model_quantized(frame: &QuantizedFrame, bbox: &BBox) -> Result<MeanShiftModel> {
    let unusable = || Error::UnusableDetection { width: frame.width, height: frame.height };
    if bbox.right() <= 0.0 || bbox.bottom() <= 0.0 || bbox.x >= frame.width as f64 || bbox.y >= frame.height as f64 {
        return Err(unusable());
    }
    let mut acc = Accumulator::new(frame.histogram_len());
    Window::from_box(bbox, 1.0).histogram(frame, &mut acc);
    if acc.total <= 0.0 {
        return Err(unusable());
    }
    let mut histogram = acc.values;
    for v in &mut histogram {
        *v /= acc.total;
    }
    Ok(MeanShiftModel { histogram, bins: frame.bins, reference_size: (bbox.w, bbox.h) })
}

/// Bhattacharyya coefficient between the model and the window at `bbox`.
pub fn similarity_at(model: &MeanShiftModel, frame: &QuantizedFrame, bbox: &BBox) -> f64 {
    let mut acc = Accumulator::new(frame.histogram_len());
    Window::from_box(bbox, 1.0).histogram(frame, &mut acc);
    bhattacharyya(&model.histogram, &acc)
}

pub fn track(model: &MeanShiftModel, frame: &ImageFrame, start: &BBox, params: &VtParams) -> VtResult {
    track_quantized(model, &frame.quantize(model.bins), start, params)
}

pub fn track_quantized(model: &MeanShiftModel, frame: &QuantizedFrame, start: &BBox, params: &VtParams) -> VtResult {
    debug_assert_eq!(model.bins, frame.bins, "model and frame quantization differ");
    let mut acc = Accumulator::new(frame.histogram_len());
    let (mut cx, mut cy) = start.center();
    let (mut w, mut h) = (start.w, start.h);
    let (ref_w, ref_h) = model.reference_size;
    let stages = params.search_factors.len();
    let mut converged = false;

    for (stage, &factor) in params.search_factors.iter().enumerate() {
        let last = stage + 1 == stages;
        converged = false;
        for _ in 0..params.max_iterations {
            let window = Window { cx, cy, hw: w * factor / 2.0, hh: h * factor / 2.0 };
            window.histogram(frame, &mut acc);
            if acc.total <= 0.0 {
                break;
            }
            let inv_total = 1.0 / acc.total;
            let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
            window.for_each(frame, |x, y, bin, _| {
                let q = acc.values[bin as usize] * inv_total;
                let p = model.histogram[bin as usize];
                if p > 0.0 && q > 0.0 {
                    let weight = (p / q).sqrt();
                    sx += weight * (x as f64 + 0.5);
                    sy += weight * (y as f64 + 0.5);
                    sw += weight;
                }
            });
            if sw <= 0.0 {
                break;
            }
            let (nx, ny) = (sx / sw, sy / sw);
            let shift = ((nx - cx).powi(2) + (ny - cy).powi(2)).sqrt();
            cx = nx;
            cy = ny;

            if last && params.scales.len() > 1 {
                // Ties keep the current size.
                let mut best = (1.0, f64::NEG_INFINITY);
                for &s in params.scales.iter().filter(|&&s| s == 1.0).chain(params.scales.iter().filter(|&&s| s != 1.0)) {
                    Window { cx, cy, hw: w * s / 2.0, hh: h * s / 2.0 }.histogram(frame, &mut acc);
                    let rho = bhattacharyya(&model.histogram, &acc);
                    if rho > best.1 {
                        best = (s, rho);
                    }
                }
                let blend = params.scale_smoothing + (1.0 - params.scale_smoothing) * best.0;
                w = (w * blend).clamp(ref_w * 0.5, ref_w * 2.0).max(1.0);
                h = (h * blend).clamp(ref_h * 0.5, ref_h * 2.0).max(1.0);
            }

            if shift < params.convergence_px {
                converged = true;
                break;
            }
        }
    }

    let bbox = BBox::from_center(cx, cy, w, h).unwrap_or(*start);
    let similarity = similarity_at(model, frame, &bbox);
    VtResult { bbox, similarity, converged: converged && similarity >= params.failure_threshold }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardVt {
    pub displacement: DisplacementObservation,
    pub result: VtResult,
}

/// Tracks `model` from `reference` into the intermediate frame.
///
/// On success the observation is the centre displacement from `reference`;
/// otherwise it is `fallback_velocity` (the filter's own half-step velocity).
pub fn forward_vt(
    model: &MeanShiftModel,
    reference: &BBox,
    fallback_velocity: (f64, f64),
    frame_mid: &QuantizedFrame,
    params: &VtParams,
) -> ForwardVt {
    let result = track_quantized(model, frame_mid, reference, params);
    let displacement = if result.converged {
        let (ax, ay) = reference.center();
        let (bx, by) = result.bbox.center();
        DisplacementObservation { v: (bx - ax, by - ay), source: DisplacementSource::Visual }
    } else {
        DisplacementObservation { v: fallback_velocity, source: DisplacementSource::KalmanFallback }
    };
    ForwardVt { displacement, result }
}

#[derive(Debug, Clone)]
pub struct BackwardVt {
    /// Detection box in the intermediate frame, or the raw box on failure.
    pub bbox: BBox,
    pub tracked: bool,
    /// Model built from the detection in the current frame, when usable.
    pub model: Option<MeanShiftModel>,
}

impl BackwardVt {
    /// Centre velocity from the intermediate frame to the current one.
    pub fn inverse_velocity(&self, detection: &BBox) -> Option<(f64, f64)> {
        self.tracked.then(|| {
            let (ax, ay) = self.bbox.center();
            let (bx, by) = detection.center();
            (bx - ax, by - ay)
        })
    }
}

pub fn backward_vt(
    detection: &BBox,
    frame_cur: &QuantizedFrame,
    frame_mid: &QuantizedFrame,
    params: &VtParams,
) -> BackwardVt {
    let Ok(model) = init_model_quantized(frame_cur, detection) else {
        return BackwardVt { bbox: *detection, tracked: false, model: None };
    };
    let result = track_quantized(&model, frame_mid, detection, params);
    if result.converged {
        BackwardVt { bbox: result.bbox, tracked: true, model: Some(model) }
    } else {
        BackwardVt { bbox: *detection, tracked: false, model: Some(model) }
    }
}
