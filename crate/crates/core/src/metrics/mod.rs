//! Tracking accuracy: CLEAR MOT (MOTA, ID switches), IDF1 and HOTA.
//!
//! All metrics take ground-truth and result records in MOT form; only the
//! frame, id and box of each record matter.

mod clear;
mod hota;
mod identity;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::MotRecord;
use crate::model::BBox;

pub use clear::{clear_metrics, ClearMetrics};
pub use hota::{hota, HotaMetrics, HOTA_ALPHAS};
pub use identity::{idf1, IdentityMetrics};

/// Report sections that can be requested individually.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricGroup {
    /// MOTA with its FP, FN and ID switch counts.
    Mota,
    /// IDF1 with its identity counts.
    Idf1,
    /// HOTA with DetA and AssA.
    Hota,
}

impl MetricGroup {
    pub const ALL: [MetricGroup; 3] = [MetricGroup::Hota, MetricGroup::Mota, MetricGroup::Idf1];
}

impl std::str::FromStr for MetricGroup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mota" => Ok(MetricGroup::Mota),
            "idf1" => Ok(MetricGroup::Idf1),
            "hota" => Ok(MetricGroup::Hota),
            other => Err(format!("unknown metric `{other}`; expected mota, idf1 or hota")),
        }
    }
}

/// IoU at or above which a result box may explain a ground-truth box.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Boxes of one frame, keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameBoxes {
    pub ids: Vec<i64>,
    pub boxes: Vec<BBox>,
}

/// Ground truth and results aligned frame by frame over the evaluated frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub frames: Vec<u32>,
    pub gt: Vec<FrameBoxes>,
    pub pred: Vec<FrameBoxes>,
}

impl Aligned {
    pub fn gt_count(&self) -> usize {
        self.gt.iter().map(|f| f.ids.len()).sum()
    }

    pub fn pred_count(&self) -> usize {
        self.pred.iter().map(|f| f.ids.len()).sum()
    }

    /// IoU matrix of frame `k`, ground truth by rows.
    pub fn iou(&self, k: usize) -> Vec<Vec<f64>> {
        let (g, p) = (&self.gt[k], &self.pred[k]);
        g.boxes.iter().map(|a| p.boxes.iter().map(|b| a.iou(b)).collect()).collect()
    }
}

fn group(records: &[MotRecord], frames: &BTreeSet<u32>) -> Result<BTreeMap<u32, FrameBoxes>> {
    let mut out: BTreeMap<u32, FrameBoxes> = BTreeMap::new();
    let mut sorted: Vec<&MotRecord> = records.iter().filter(|r| frames.contains(&r.frame)).collect();
    sorted.sort_by_key(|r| (r.frame, r.id));
    for r in sorted {
        let entry = out.entry(r.frame).or_default();
        if entry.ids.last() == Some(&r.id) {
            return Err(Error::DuplicateId { frame: r.frame, id: r.id });
        }
        entry.ids.push(r.id);
        entry.boxes.push(r.bbox);
    }
    Ok(out)
}

/// Aligns records over the ground-truth frame range, or over `only` when
/// given. Result frames outside the ground-truth range are an error.
pub fn align(gt: &[MotRecord], results: &[MotRecord], only: Option<&BTreeSet<u32>>) -> Result<Aligned> {
    let gt_first = gt.iter().map(|r| r.frame).min().ok_or(Error::EmptyGroundTruth)?;
    let gt_last = gt.iter().map(|r| r.frame).max().ok_or(Error::EmptyGroundTruth)?;
    if let (Some(first), Some(last)) = (results.iter().map(|r| r.frame).min(), results.iter().map(|r| r.frame).max()) {
        if first < gt_first || last > gt_last {
            return Err(Error::FrameRange { first, last, gt_first, gt_last });
        }
    }
    let frames: BTreeSet<u32> = match only {
        Some(set) => set.iter().copied().filter(|f| (gt_first..=gt_last).contains(f)).collect(),
        None => (gt_first..=gt_last).collect(),
    };
    let mut g = group(gt, &frames)?;
    let mut p = group(results, &frames)?;
    let aligned = Aligned {
        frames: frames.iter().copied().collect(),
        gt: frames.iter().map(|f| g.remove(f).unwrap_or_default()).collect(),
        pred: frames.iter().map(|f| p.remove(f).unwrap_or_default()).collect(),
    };
    if aligned.gt_count() == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(aligned)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub gt_boxes: usize,
    pub result_boxes: usize,
    pub clear: ClearMetrics,
    pub identity: IdentityMetrics,
    pub hota: HotaMetrics,
}

pub fn evaluate(
    gt: &[MotRecord],
    results: &[MotRecord],
    only: Option<&BTreeSet<u32>>,
    iou_threshold: f64,
) -> Result<MetricsReport> {
    let aligned = align(gt, results, only)?;
    Ok(MetricsReport {
        frames: aligned.frames.len(),
        gt_boxes: aligned.gt_count(),
        result_boxes: aligned.pred_count(),
        clear: clear_metrics(&aligned, iou_threshold),
        identity: idf1(&aligned, iou_threshold),
        hota: hota(&aligned),
    })
}

impl MetricsReport {
    fn rows(&self, groups: &[MetricGroup]) -> Vec<(&'static str, String)> {
        let c = &self.clear;
        let i = &self.identity;
        let h = &self.hota;
        let want = |g| groups.contains(&g);
        let mut rows = Vec::new();
        if want(MetricGroup::Hota) {
            rows.push(("HOTA", format!("{:.4}", h.hota)));
            rows.push(("DetA", format!("{:.4}", h.det_a)));
            rows.push(("AssA", format!("{:.4}", h.ass_a)));
        }
        if want(MetricGroup::Mota) {
            rows.push(("MOTA", format!("{:.4}", c.mota)));
        }
        if want(MetricGroup::Idf1) {
            rows.push(("IDF1", format!("{:.4}", i.idf1)));
        }
        if want(MetricGroup::Mota) {
            rows.push(("IDSW", c.id_switches.to_string()));
            rows.push(("FP", c.false_positives.to_string()));
            rows.push(("FN", c.false_negatives.to_string()));
        }
        if want(MetricGroup::Idf1) {
            rows.push(("IDTP", i.idtp.to_string()));
            rows.push(("IDFP", i.idfp.to_string()));
            rows.push(("IDFN", i.idfn.to_string()));
        }
        rows.push(("GT", self.gt_boxes.to_string()));
        rows.push(("Results", self.result_boxes.to_string()));
        rows.push(("Frames", self.frames.to_string()));
        rows
    }

    /// Aligned `name value` lines for the requested groups.
    pub fn to_text(&self, groups: &[MetricGroup]) -> String {
        let mut s = String::new();
        for (k, v) in self.rows(groups) {
            let _ = writeln!(s, "{k:<8}{v:>10}");
        }
        s
    }

    /// A header line and a value line for the requested groups.
    pub fn to_csv(&self, groups: &[MetricGroup]) -> String {
        let rows = self.rows(groups);
        let header: Vec<&str> = rows.iter().map(|(k, _)| *k).collect();
        let values: Vec<&str> = rows.iter().map(|(_, v)| v.as_str()).collect();
        format!("{}\n{}\n", header.join(","), values.join(","))
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    pub fn rec(frame: u32, id: i64, x: f64, y: f64) -> MotRecord {
        MotRecord { frame, id, bbox: BBox::new(x, y, 10.0, 10.0).unwrap(), confidence: 1.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::rec;
    use super::*;

    #[test]
    fn alignment_checks() {
        assert!(matches!(align(&[], &[], None), Err(Error::EmptyGroundTruth)));
        let gt = [rec(2, 1, 0.0, 0.0), rec(4, 1, 0.0, 0.0)];
        assert!(matches!(align(&gt, &[rec(5, 1, 0.0, 0.0)], None), Err(Error::FrameRange { .. })));
        assert!(matches!(align(&gt, &[rec(2, 3, 0.0, 0.0), rec(2, 3, 5.0, 0.0)], None), Err(Error::DuplicateId { .. })));
        let a = align(&gt, &[rec(3, 7, 0.0, 0.0)], None).unwrap();
        assert_eq!(a.frames, vec![2, 3, 4]);
        assert_eq!((a.gt_count(), a.pred_count()), (2, 1));
        let only: BTreeSet<u32> = [2, 4, 9].into();
        let a = align(&gt, &[rec(3, 7, 0.0, 0.0)], Some(&only)).unwrap();
        assert_eq!(a.frames, vec![2, 4]);
        assert_eq!(a.pred_count(), 0);
    }

    #[test]
    fn perfect_report() {
        let gt: Vec<MotRecord> = (1..=4).flat_map(|f| [rec(f, 1, f as f64, 0.0), rec(f, 2, 50.0, f as f64)]).collect();
        let r = evaluate(&gt, &gt, None, DEFAULT_IOU_THRESHOLD).unwrap();
        assert_eq!((r.clear.mota, r.identity.idf1, r.hota.hota), (1.0, 1.0, 1.0));
        let text = r.to_text(&MetricGroup::ALL);
        assert!(text.contains("HOTA        1.0000"), "{text}");
        let csv = r.to_csv(&MetricGroup::ALL);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("HOTA,DetA,AssA,MOTA,IDF1"));
        let only = r.to_csv(&[MetricGroup::Idf1]);
        assert!(only.starts_with("IDF1,IDTP,IDFP,IDFN,GT"), "{only}");
        assert!("HOTA".parse::<MetricGroup>().is_ok() && "mt".parse::<MetricGroup>().is_err());
    }
}
