use serde::Serialize;

use super::identity::id_lists;
use super::Aligned;
use crate::assignment::{solve, CostMatrix};

/// Localisation thresholds 0.05, 0.10, ..., 0.95.
pub const HOTA_ALPHAS: [f64; 19] = {
    let mut a = [0.0; 19];
    let mut k = 0;
    while k < 19 {
        a[k] = 0.05 * (k + 1) as f64;
        k += 1;
    }
    a
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HotaMetrics {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    /// HOTA at each entry of [`HOTA_ALPHAS`].
    pub per_alpha: Vec<f64>,
}

/// Slack used when comparing similarities with a threshold.
const EPS: f64 = f64::EPSILON;

/// Higher-order tracking accuracy.
///
/// Per frame, boxes are matched to maximise IoU weighted by how well the two
/// ids align over the whole sequence; the matching is shared by all
/// thresholds and each threshold keeps the pairs whose IoU reaches it.
pub fn hota(data: &Aligned) -> HotaMetrics {
    let (gt_ids, pred_ids) = id_lists(data);
    let gt_index = |id: i64| gt_ids.binary_search(&id).expect("id collected from the same data");
    let pred_index = |id: i64| pred_ids.binary_search(&id).expect("id collected from the same data");
    let (ng, np) = (gt_ids.len(), pred_ids.len());

    // Soft co-occurrence of ids, normalised per frame like a Jaccard index.
    let mut potential = vec![vec![0.0f64; np]; ng];
    let mut gt_id_count = vec![0.0f64; ng];
    let mut pred_id_count = vec![0.0f64; np];
    let sims: Vec<Vec<Vec<f64>>> = (0..data.frames.len()).map(|k| data.iou(k)).collect();
    for (k, sim) in sims.iter().enumerate() {
        let (g, p) = (&data.gt[k], &data.pred[k]);
        let row_sum: Vec<f64> = sim.iter().map(|r| r.iter().sum()).collect();
        let col_sum: Vec<f64> = (0..p.ids.len()).map(|j| sim.iter().map(|r| r[j]).sum()).collect();
        for (i, gid) in g.ids.iter().enumerate() {
            for (j, pid) in p.ids.iter().enumerate() {
                let denom = row_sum[i] + col_sum[j] - sim[i][j];
                if denom > EPS {
                    potential[gt_index(*gid)][pred_index(*pid)] += sim[i][j] / denom;
                }
            }
        }
        for gid in &g.ids {
            gt_id_count[gt_index(*gid)] += 1.0;
        }
        for pid in &p.ids {
            pred_id_count[pred_index(*pid)] += 1.0;
        }
    }
    let alignment: Vec<Vec<f64>> = (0..ng)
        .map(|i| (0..np).map(|j| potential[i][j] / (gt_id_count[i] + pred_id_count[j] - potential[i][j])).collect())
        .collect();

    let n_alpha = HOTA_ALPHAS.len();
    let mut tp = vec![0usize; n_alpha];
    let mut fn_ = vec![0usize; n_alpha];
    let mut fp = vec![0usize; n_alpha];
    let mut matches = vec![vec![vec![0.0f64; np]; ng]; n_alpha];

    for (k, sim) in sims.iter().enumerate() {
        let (g, p) = (&data.gt[k], &data.pred[k]);
        if g.ids.is_empty() || p.ids.is_empty() {
            for a in 0..n_alpha {
                fn_[a] += g.ids.len();
                fp[a] += p.ids.len();
            }
            continue;
        }
        let score: Vec<Vec<f64>> = g
            .ids
            .iter()
            .enumerate()
            .map(|(i, gid)| p.ids.iter().enumerate().map(|(j, pid)| alignment[gt_index(*gid)][pred_index(*pid)] * sim[i][j]).collect())
            .collect();
        let top = score.iter().flatten().copied().fold(0.0, f64::max);
        let costs = CostMatrix::from_fn(g.ids.len(), p.ids.len(), |i, j| top - score[i][j])
            .expect("scores are finite and bounded by their maximum");
        let pairs = solve(&costs);
        for (a, &alpha) in HOTA_ALPHAS.iter().enumerate() {
            let kept: Vec<(usize, usize)> =
                pairs.pairs().iter().copied().filter(|&(i, j)| sim[i][j] >= alpha - EPS).collect();
            tp[a] += kept.len();
            fn_[a] += g.ids.len() - kept.len();
            fp[a] += p.ids.len() - kept.len();
            for (i, j) in kept {
                matches[a][gt_index(g.ids[i])][pred_index(p.ids[j])] += 1.0;
            }
        }
    }

    let mut det = vec![0.0; n_alpha];
    let mut ass = vec![0.0; n_alpha];
    let mut per_alpha = vec![0.0; n_alpha];
    for a in 0..n_alpha {
        let m = &matches[a];
        let mut total = 0.0;
        for i in 0..ng {
            for j in 0..np {
                if m[i][j] > 0.0 {
                    let union = (gt_id_count[i] + pred_id_count[j] - m[i][j]).max(1.0);
                    total += m[i][j] * m[i][j] / union;
                }
            }
        }
        ass[a] = total / (tp[a].max(1) as f64);
        det[a] = tp[a] as f64 / ((tp[a] + fn_[a] + fp[a]).max(1) as f64);
        per_alpha[a] = (det[a] * ass[a]).sqrt();
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    HotaMetrics { hota: mean(&per_alpha), det_a: mean(&det), ass_a: mean(&ass), per_alpha }
}
