use std::collections::BTreeMap;

use serde::Serialize;

use super::{Aligned, FrameBoxes};
use crate::assignment::{solve, CostMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityMetrics {
    pub idf1: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// Sorted distinct ground-truth and result ids.
pub(crate) fn id_lists(data: &Aligned) -> (Vec<i64>, Vec<i64>) {
    let collect = |sets: &[FrameBoxes]| {
        let mut ids: Vec<i64> = sets.iter().flat_map(|f| f.ids.iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    (collect(&data.gt), collect(&data.pred))
}

/// Frames in which each (ground-truth id, result id) pair overlaps at or
/// above the threshold, indexed like [`id_lists`].
fn overlap_counts(data: &Aligned, iou_threshold: f64) -> (Vec<i64>, Vec<i64>, Vec<Vec<usize>>) {
    let (gt_ids, pred_ids) = id_lists(data);
    let gi: BTreeMap<i64, usize> = gt_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let pi: BTreeMap<i64, usize> = pred_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut counts = vec![vec![0usize; pred_ids.len()]; gt_ids.len()];
    for k in 0..data.frames.len() {
        let iou = data.iou(k);
        for (a, gid) in data.gt[k].ids.iter().enumerate() {
            for (b, pid) in data.pred[k].ids.iter().enumerate() {
                if iou[a][b] >= iou_threshold {
                    counts[gi[gid]][pi[pid]] += 1;
                }
            }
        }
    }
    (gt_ids, pred_ids, counts)
}

/// Identity precision/recall via the one-to-one id mapping that maximises
/// the number of correctly identified boxes over the whole sequence.
pub fn idf1(data: &Aligned, iou_threshold: f64) -> IdentityMetrics {
    let (gt_ids, pred_ids, counts) = overlap_counts(data, iou_threshold);
    let top = counts.iter().flatten().copied().max().unwrap_or(0) as f64;
    // Every pair is allowed, so the solver returns a full matching and
    // minimising `top - count` maximises the total count.
    let costs = CostMatrix::from_fn(gt_ids.len(), pred_ids.len(), |i, j| top - counts[i][j] as f64)
        .expect("costs are non-negative");
    let idtp: usize = solve(&costs).pairs().iter().map(|&(i, j)| counts[i][j]).sum();
    let (n_gt, n_pred) = (data.gt_count(), data.pred_count());
    IdentityMetrics {
        idf1: 2.0 * idtp as f64 / (n_gt + n_pred).max(1) as f64,
        idtp,
        idfp: n_pred - idtp,
        idfn: n_gt - idtp,
    }
}
