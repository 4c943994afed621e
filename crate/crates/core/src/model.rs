//! Geometric and appearance primitives shared by the rest of the crate.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Axis-aligned box in pixels, stored as (left, top, width, height).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let finite = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite();
        if !finite || w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox { x, y, w, h });
        }
        Ok(BBox { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        BBox::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox { x: self.x + dx, y: self.y + dy, ..*self }
    }

    /// Same center, sides multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> BBox {
        let (cx, cy) = self.center();
        let (w, h) = (self.w * factor, self.h * factor);
        BBox { x: cx - w / 2.0, y: cy - h / 2.0, w, h }
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub fn center(b: &BBox) -> (f64, f64) {
    b.center()
}

/// Unit-norm appearance feature. Cloning is cheap; the values are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Arc<[f32]>,
}

/// Accepted deviation of an embedding's L2 norm from one.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

impl Embedding {
    /// Wraps values that are already unit length.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        let norm = l2_norm(&values);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::MalformedEmbedding(format!("norm {norm} is not 1")));
        }
        Ok(Embedding { values: values.into() })
    }

    /// Scales `values` to unit length.
    pub fn normalized(values: Vec<f32>) -> Result<Self> {
        Self::normalized_f64(&values.iter().map(|&v| v as f64).collect::<Vec<_>>())
    }

    pub fn normalized_f64(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::MalformedEmbedding("empty vector".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::MalformedEmbedding(format!("cannot normalize vector with norm {norm}")));
        }
        let values: Vec<f32> = values.iter().map(|v| (v / norm) as f32).collect();
        Ok(Embedding { values: values.into() })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    /// Exponential moving average `lambda * self + (1 - lambda) * other`, renormalized.
    ///
    /// Falls back to `other` if the blend cancels out exactly.
    pub fn blend(&self, other: &Embedding, lambda: f64) -> Result<Embedding> {
        check_dims(self, other)?;
        if lambda >= 1.0 {
            return Ok(self.clone());
        }
        if lambda <= 0.0 {
            return Ok(other.clone());
        }
        let mixed: Vec<f64> = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| lambda * a as f64 + (1.0 - lambda) * b as f64)
            .collect();
        Embedding::normalized_f64(&mixed).or_else(|_| Ok(other.clone()))
    }
}

fn l2_norm(values: &[f32]) -> f64 {
    values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
}

fn check_dims(a: &Embedding, b: &Embedding) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::EmbeddingDimension { expected: a.dim(), actual: b.dim() });
    }
    Ok(())
}

/// Cosine similarity of two unit embeddings, clamped to [-1, 1].
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a, b)?;
    let dot: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(&x, &y)| x as f64 * y as f64)
        .sum();
    Ok(dot.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Seconds of video time.
    pub frame_time: f64,
    pub bbox: BBox,
    pub confidence: f64,
    pub embedding: Embedding,
}

impl Detection {
    pub fn new(frame_time: f64, bbox: BBox, confidence: f64, embedding: Embedding) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidDetection(format!("confidence {confidence} outside [0, 1]")));
        }
        if !(frame_time >= 0.0) || !frame_time.is_finite() {
            return Err(Error::InvalidDetection(format!("frame time {frame_time} is negative")));
        }
        Ok(Detection { frame_time, bbox, confidence, embedding })
    }
}
