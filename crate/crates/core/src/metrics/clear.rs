use std::collections::HashMap;

use serde::Serialize;

use super::Aligned;
use crate::assignment::{solve, CostMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearMetrics {
    pub mota: f64,
    /// Mean IoU of matched pairs.
    pub motp: f64,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub matches: usize,
}

/// CLEAR MOT over aligned frames.
///
/// Each frame first keeps the pairs of the previous frame whose IoU still
/// passes the threshold, then matches the rest by maximum count and, among
/// those, maximum total IoU. A match switches identity when the ground-truth
/// object was last matched, in any earlier frame, to another id.
pub fn clear_metrics(data: &Aligned, iou_threshold: f64) -> ClearMetrics {
    let mut last_match: HashMap<i64, i64> = HashMap::new();
    let mut previous: HashMap<i64, i64> = HashMap::new();
    let (mut fp, mut fn_, mut idsw, mut matches) = (0, 0, 0, 0);
    let mut iou_sum = 0.0;

    for k in 0..data.frames.len() {
        let (g, p) = (&data.gt[k], &data.pred[k]);
        let iou = data.iou(k);
        let mut gt_used = vec![false; g.ids.len()];
        let mut pred_used = vec![false; p.ids.len()];
        let mut pairs = Vec::new();

        for (i, gid) in g.ids.iter().enumerate() {
            if let Some(pid) = previous.get(gid) {
                if let Some(j) = p.ids.iter().position(|x| x == pid) {
                    if !pred_used[j] && iou[i][j] >= iou_threshold {
                        gt_used[i] = true;
                        pred_used[j] = true;
                        pairs.push((i, j));
                    }
                }
            }
        }

        let rest_g: Vec<usize> = (0..g.ids.len()).filter(|&i| !gt_used[i]).collect();
        let rest_p: Vec<usize> = (0..p.ids.len()).filter(|&j| !pred_used[j]).collect();
        let costs = CostMatrix::from_fn(rest_g.len(), rest_p.len(), |a, b| {
            let v = iou[rest_g[a]][rest_p[b]];
            if v >= iou_threshold {
                1.0 - v
            } else {
                f64::INFINITY
            }
        })
        .expect("IoU costs lie in [0, 1] or are infinite");
        for &(a, b) in solve(&costs).pairs() {
            pairs.push((rest_g[a], rest_p[b]));
        }

        previous.clear();
        for &(i, j) in &pairs {
            let (gid, pid) = (g.ids[i], p.ids[j]);
            previous.insert(gid, pid);
            if last_match.get(&gid).is_some_and(|&prev| prev != pid) {
                idsw += 1;
            }
            last_match.insert(gid, pid);
            iou_sum += iou[i][j];
        }
        matches += pairs.len();
        fn_ += g.ids.len() - pairs.len();
        fp += p.ids.len() - pairs.len();
    }

    let gt = data.gt_count().max(1) as f64;
    ClearMetrics {
        mota: 1.0 - (fn_ + fp + idsw) as f64 / gt,
        motp: if matches > 0 { iou_sum / matches as f64 } else { 0.0 },
        false_positives: fp,
        false_negatives: fn_,
        id_switches: idsw,
        matches,
    }
}
