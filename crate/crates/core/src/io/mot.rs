use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::BBox;

/// One line of a MOT-style CSV: `frame,id,x,y,w,h,conf,...`.
///
/// Detections use `id = -1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    /// 1-based frame index.
    pub frame: u32,
    pub id: i64,
    pub bbox: BBox,
    pub confidence: f64,
}

pub fn read_mot(path: &Path) -> Result<Vec<MotRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mot(path, &text)
}

fn parse_mot(path: &Path, text: &str) -> Result<Vec<MotRecord>> {
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fail = |message: String| Error::Parse { path: path.to_path_buf(), line: n + 1, message };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 7 {
            return Err(fail(format!("expected at least 7 fields, found {}", fields.len())));
        }
        let number = |k: usize, name: &str| -> Result<f64> {
            let v: f64 = fields[k].parse().map_err(|_| fail(format!("{name} `{}` is not a number", fields[k])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(fail(format!("{name} is not finite")))
            }
        };
        let frame: u32 = fields[0].parse().map_err(|_| fail(format!("frame `{}` is not a positive integer", fields[0])))?;
        if frame == 0 {
            return Err(fail("frames are 1-based".into()));
        }
        let id = number(1, "id")?;
        if id.fract() != 0.0 {
            return Err(fail(format!("id `{}` is not an integer", fields[1])));
        }
        let (x, y, w, h) = (number(2, "x")?, number(3, "y")?, number(4, "width")?, number(5, "height")?);
        if w <= 0.0 || h <= 0.0 {
            return Err(fail(format!("box size {w}x{h} is not positive")));
        }
        let bbox = BBox::new(x, y, w, h).map_err(|e| fail(e.to_string()))?;
        let confidence = number(6, "confidence")?;
        records.push(MotRecord { frame, id: id as i64, bbox, confidence });
    }
    Ok(records)
}

/// Groups records by frame, keeping file order within each frame.
pub fn group_by_frame(records: &[MotRecord]) -> BTreeMap<u32, Vec<MotRecord>> {
    let mut frames: BTreeMap<u32, Vec<MotRecord>> = BTreeMap::new();
    for r in records {
        frames.entry(r.frame).or_default().push(*r);
    }
    frames
}

pub fn read_detections(path: &Path) -> Result<BTreeMap<u32, Vec<MotRecord>>> {
    Ok(group_by_frame(&read_mot(path)?))
}

pub(crate) fn format_records(records: &[MotRecord]) -> String {
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|r| (r.frame, r.id));
    let mut out = String::new();
    for r in &sorted {
        let b = &r.bbox;
        // Writing to a String cannot fail.
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1",
            r.frame, r.id, b.x, b.y, b.w, b.h, r.confidence
        );
    }
    out
}

/// Writes records sorted by frame, then id, with two decimals.
pub fn write_results(path: &Path, records: &[MotRecord]) -> Result<()> {
    fs::write(path, format_records(records)).map_err(|e| Error::io(path, e))
}
