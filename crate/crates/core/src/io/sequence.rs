use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::embeddings::read_embeddings;
use super::image::read_image;
use super::mot::read_mot;
use crate::error::{Error, Result};
use crate::model::Detection;
use crate::visual::ImageFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub name: String,
    pub source_fps: f64,
    pub width: usize,
    pub height: usize,
    pub frame_count: u32,
    /// Image file extension including the dot, e.g. `.ppm`.
    pub image_ext: String,
}

impl SequenceMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.source_fps > 0.0 && self.source_fps.is_finite()) {
            return Err(Error::Config(format!("frame rate must be positive, got {}", self.source_fps)));
        }
        if self.frame_count == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::Config("sequence needs at least one frame of non-zero size".into()));
        }
        Ok(())
    }

    /// Video time of a 1-based frame index, in seconds.
    pub fn frame_time(&self, frame: u32) -> f64 {
        f64::from(frame - 1) / self.source_fps
    }

    pub fn to_ini(&self) -> String {
        let mut s = String::from("[Sequence]\n");
        let _ = writeln!(s, "name={}", self.name);
        let _ = writeln!(s, "imDir=img1");
        let _ = writeln!(s, "frameRate={}", self.source_fps);
        let _ = writeln!(s, "seqLength={}", self.frame_count);
        let _ = writeln!(s, "imWidth={}", self.width);
        let _ = writeln!(s, "imHeight={}", self.height);
        let _ = writeln!(s, "imExt={}", self.image_ext);
        s
    }

    pub fn from_ini(path: &Path, text: &str) -> Result<Self> {
        let mut values: BTreeMap<&str, &str> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('[') || line.starts_with(';') || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("expected key=value, found `{line}`"),
            })?;
            values.insert(k.trim(), v.trim());
        }
        let get = |k: &str| values.get(k).copied().ok_or_else(|| Error::format(path, format!("missing `{k}`")));
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse::<f64>().map_err(|_| Error::format(path, format!("`{k}` is not a number")))
        };
        let count = |k: &str| -> Result<usize> {
            get(k)?.parse::<usize>().map_err(|_| Error::format(path, format!("`{k}` is not a whole number")))
        };
        let meta = SequenceMeta {
            name: get("name")?.to_string(),
            source_fps: num("frameRate")?,
            width: count("imWidth")?,
            height: count("imHeight")?,
            frame_count: count("seqLength")? as u32,
            image_ext: values.get("imExt").copied().unwrap_or(".ppm").to_string(),
        };
        meta.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(meta)
    }
}

/// A MOT-style sequence directory:
/// `seqinfo.ini`, `img1/000001.ppm`, `det/det.txt`, `det/det.emb`, `gt/gt.txt`.
#[derive(Debug)]
pub struct SequenceDir {
    root: PathBuf,
    meta: SequenceMeta,
    frames_read: AtomicU64,
}

impl SequenceDir {
    pub fn open(root: &Path) -> Result<Self> {
        let ini = root.join("seqinfo.ini");
        let text = fs::read_to_string(&ini).map_err(|e| Error::io(&ini, e))?;
        let meta = SequenceMeta::from_ini(&ini, &text)?;
        Ok(SequenceDir { root: root.to_path_buf(), meta, frames_read: AtomicU64::new(0) })
    }

    /// Creates the directory layout and writes `seqinfo.ini`.
    pub fn create(root: &Path, meta: SequenceMeta) -> Result<Self> {
        meta.validate()?;
        for sub in ["img1", "det", "gt"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let ini = root.join("seqinfo.ini");
        fs::write(&ini, meta.to_ini()).map_err(|e| Error::io(&ini, e))?;
        Ok(SequenceDir { root: root.to_path_buf(), meta, frames_read: AtomicU64::new(0) })
    }

    pub fn meta(&self) -> &SequenceMeta {
        &self.meta
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn image_path(&self, frame: u32) -> PathBuf {
        self.root.join("img1").join(format!("{frame:06}{}", self.meta.image_ext))
    }

    pub fn detections_path(&self) -> PathBuf {
        self.root.join("det").join("det.txt")
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.root.join("det").join("det.emb")
    }

    pub fn ground_truth_path(&self) -> PathBuf {
        self.root.join("gt").join("gt.txt")
    }

    pub fn read_frame(&self, frame: u32) -> Result<ImageFrame> {
        if frame == 0 || frame > self.meta.frame_count {
            return Err(Error::format(
                &self.root,
                format!("frame {frame} outside 1..={}", self.meta.frame_count),
            ));
        }
        let path = self.image_path(frame);
        let image = read_image(&path)?;
        if (image.width(), image.height()) != (self.meta.width, self.meta.height) {
            return Err(Error::format(
                &path,
                format!(
                    "image is {}x{}, sequence declares {}x{}",
                    image.width(),
                    image.height(),
                    self.meta.width,
                    self.meta.height
                ),
            ));
        }
        self.frames_read.fetch_add(1, Ordering::Relaxed);
        Ok(image)
    }

    /// Number of images decoded so far.
    pub fn frames_read(&self) -> u64 {
        self.frames_read.load(Ordering::Relaxed)
    }
}

/// Reads detections and their embeddings, stamping each with its frame time.
pub fn load_detections(det_path: &Path, emb_path: &Path, source_fps: f64) -> Result<BTreeMap<u32, Vec<Detection>>> {
    let records = read_mot(det_path)?;
    let embeddings = read_embeddings(emb_path, Some(records.len()))?;
    let mut frames: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for (n, (r, e)) in records.into_iter().zip(embeddings).enumerate() {
        let time = f64::from(r.frame - 1) / source_fps;
        let confidence = r.confidence.clamp(0.0, 1.0);
        let det = Detection::new(time, r.bbox, confidence, e).map_err(|e| Error::Parse {
            path: det_path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        frames.entry(r.frame).or_default().push(det);
    }
    Ok(frames)
}

/// Frames processed when detections arrive at a reduced rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleSchedule {
    pub stride: u32,
    pub detection_frames: Vec<u32>,
    /// `intermediate_frames[k]` lies between detection frames `k` and `k + 1`.
    pub intermediate_frames: Vec<u32>,
}

impl SubsampleSchedule {
    /// Detection interval in seconds.
    pub fn delta_t(&self, source_fps: f64) -> f64 {
        f64::from(self.stride) / source_fps
    }

    /// Intermediate frame preceding the `k`-th detection frame.
    pub fn intermediate_before(&self, k: usize) -> Option<u32> {
        k.checked_sub(1).and_then(|i| self.intermediate_frames.get(i).copied())
    }
}

/// Detection frames every `round(fps / hz)` frames from frame 1, with the
/// floor midpoint of each consecutive pair as its intermediate frame.
pub fn subsample(meta: &SequenceMeta, target_hz: f64) -> Result<SubsampleSchedule> {
    meta.validate()?;
    if !(target_hz > 0.0 && target_hz.is_finite()) {
        return Err(Error::InvalidRate(format!("target rate must be positive, got {target_hz}")));
    }
    if target_hz > meta.source_fps {
        return Err(Error::InvalidRate(format!(
            "target rate {target_hz} Hz exceeds the source rate {} Hz",
            meta.source_fps
        )));
    }
    let stride = (meta.source_fps / target_hz + 0.5).floor().max(1.0) as u32;
    let detection_frames: Vec<u32> = (1..=meta.frame_count).step_by(stride as usize).collect();
    let intermediate_frames = if stride == 1 {
        Vec::new()
    } else {
        detection_frames.windows(2).map(|w| (w[0] + w[1]) / 2).collect()
    };
    Ok(SubsampleSchedule { stride, detection_frames, intermediate_frames })
}
