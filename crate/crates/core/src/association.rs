//! Two-stage appearance matching.
//!
//! Stage one admits pairs that are close under the box-scaled distance and
//! have high appearance similarity. Stage two revisits what is left, requiring
//! a solid box overlap but accepting weaker appearance evidence. Each stage
//! minimises `1 - similarity` with the assignment solver.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::bbd::{bbd, gating_covariance, BbdParams};
use crate::error::{Error, Result};
use crate::model::{cosine_similarity, iou, BBox, Embedding};

/// Spatial gate applied in the first stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialGate {
    /// Box-scaled distance below `theta_bbd`.
    Bbd,
    /// Squared Mahalanobis distance under the Kalman innovation covariance
    /// below `threshold_sq`. Kept for ablation comparisons.
    Mahalanobis { threshold_sq: f64 },
    /// No spatial gate: appearance only. Kept for ablation comparisons.
    None,
}

/// 95% quantile of the chi-square distribution with two degrees of freedom.
pub const CHI2_95_2DOF: f64 = 5.9915;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    pub theta_bbd: f64,
    pub theta_iou: f64,
    pub theta_reid_high: f64,
    pub theta_reid_low: f64,
    pub first_stage_gate: SpatialGate,
    pub second_stage: bool,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            theta_bbd: 16.0,
            theta_iou: 0.4,
            theta_reid_high: 0.65,
            theta_reid_low: 0.3,
            first_stage_gate: SpatialGate::Bbd,
            second_stage: true,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_bbd > 0.0) {
            return Err(Error::Config(format!("theta_bbd must be positive, got {}", self.theta_bbd)));
        }
        if !(self.theta_iou > 0.0 && self.theta_iou < 1.0) {
            return Err(Error::Config(format!("theta_iou must lie in (0, 1), got {}", self.theta_iou)));
        }
        if !(self.theta_reid_low < self.theta_reid_high) {
            return Err(Error::Config(format!(
                "theta_reid_low ({}) must be below theta_reid_high ({})",
                self.theta_reid_low, self.theta_reid_high
            )));
        }
        if let SpatialGate::Mahalanobis { threshold_sq } = self.first_stage_gate {
            if !(threshold_sq > 0.0) {
                return Err(Error::Config("mahalanobis gate threshold must be positive".into()));
            }
        }
        Ok(())
    }
}

/// What the association needs to know about one tracklet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackletGeometry {
    /// Predicted box at the association instant.
    pub bbox: BBox,
    /// Width and height from the Kalman state.
    pub size: (f64, f64),
    /// Seconds since the last successful update.
    pub staleness: f64,
    /// Position block of the Kalman innovation covariance.
    pub innovation_cov: [[f64; 2]; 2],
}

impl TrackletGeometry {
    fn bbd_to(&self, detection: &BBox, params: &BbdParams) -> f64 {
        let cov = gating_covariance(self.size.0, self.size.1, self.staleness, params);
        bbd(self.bbox.center(), detection.center(), &cov)
    }

    fn mahalanobis_sq_to(&self, detection: &BBox) -> f64 {
        let [[a, b], [c, d]] = self.innovation_cov;
        let det = a * d - b * c;
        if !(det > 0.0) {
            return f64::INFINITY;
        }
        let (px, py) = self.bbox.center();
        let (qx, qy) = detection.center();
        let (dx, dy) = (qx - px, qy - py);
        (d * dx * dx - (b + c) * dx * dy + a * dy * dy) / det
    }
}

/// Tracklet × detection cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!("{} similarities for {rows}x{cols}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= 1.0 + 1e-9)) {
            return Err(Error::Shape(format!("similarity {v} outside [-1, 1]")));
        }
        Ok(SimilarityMatrix { rows, cols, values })
    }

    pub fn from_embeddings(tracklets: &[&Embedding], detections: &[&Embedding]) -> Result<Self> {
        let mut values = Vec::with_capacity(tracklets.len() * detections.len());
        for t in tracklets {
            for d in detections {
                values.push(cosine_similarity(t, d)?);
            }
        }
        SimilarityMatrix::new(tracklets.len(), detections.len(), values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    fn select(&self, rows: &[usize], cols: &[usize]) -> SimilarityMatrix {
        let values = rows.iter().flat_map(|&r| cols.iter().map(move |&c| self.get(r, c))).collect();
        SimilarityMatrix { rows: rows.len(), cols: cols.len(), values }
    }
}

fn check_shapes(tracklets: usize, detections: usize, sim: &SimilarityMatrix) -> Result<()> {
    if sim.rows != tracklets || sim.cols != detections {
        return Err(Error::Shape(format!(
            "similarity matrix is {}x{} but there are {tracklets} tracklets and {detections} detections",
            sim.rows, sim.cols
        )));
    }
    Ok(())
}

/// Stage-one costs: `1 - s` where the spatial gate passes and `s > theta_reid_high`.
pub fn stage1_costs(
    tracklets: &[TrackletGeometry],
    detections: &[BBox],
    sim: &SimilarityMatrix,
    config: &AssociationConfig,
    bbd_params: &BbdParams,
) -> Result<CostMatrix> {
    check_shapes(tracklets.len(), detections.len(), sim)?;
    CostMatrix::from_fn(tracklets.len(), detections.len(), |i, j| {
        let s = sim.get(i, j);
        let spatial = match config.first_stage_gate {
            SpatialGate::Bbd => tracklets[i].bbd_to(&detections[j], bbd_params) < config.theta_bbd,
            SpatialGate::Mahalanobis { threshold_sq } => tracklets[i].mahalanobis_sq_to(&detections[j]) < threshold_sq,
            SpatialGate::None => true,
        };
        if spatial && s > config.theta_reid_high {
            (1.0 - s).max(0.0)
        } else {
            f64::INFINITY
        }
    })
}

/// Stage-two costs: `1 - s` where `iou > theta_iou` and `s > theta_reid_low`.
pub fn stage2_costs(
    tracklets: &[TrackletGeometry],
    detections: &[BBox],
    sim: &SimilarityMatrix,
    config: &AssociationConfig,
) -> Result<CostMatrix> {
    check_shapes(tracklets.len(), detections.len(), sim)?;
    CostMatrix::from_fn(tracklets.len(), detections.len(), |i, j| {
        let s = sim.get(i, j);
        if iou(&tracklets[i].bbox, &detections[j]) > config.theta_iou && s > config.theta_reid_low {
            (1.0 - s).max(0.0)
        } else {
            f64::INFINITY
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    First = 1,
    Second = 2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub tracklet: usize,
    pub detection: usize,
    pub stage: Stage,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssociationOutcome {
    /// Sorted by tracklet index.
    pub matches: Vec<Match>,
    pub unmatched_tracklets: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl AssociationOutcome {
    pub fn stage_matches(&self, stage: Stage) -> impl Iterator<Item = &Match> {
        self.matches.iter().filter(move |m| m.stage == stage)
    }
}

pub fn associate(
    tracklets: &[TrackletGeometry],
    detections: &[BBox],
    sim: &SimilarityMatrix,
    config: &AssociationConfig,
    bbd_params: &BbdParams,
) -> Result<AssociationOutcome> {
    check_shapes(tracklets.len(), detections.len(), sim)?;
    let mut matches = Vec::new();
    let mut track_used = vec![false; tracklets.len()];
    let mut det_used = vec![false; detections.len()];

    let c1 = stage1_costs(tracklets, detections, sim, config, bbd_params)?;
    for &(i, j) in solve(&c1).pairs() {
        let s = sim.get(i, j);
        if s > config.theta_reid_high {
            track_used[i] = true;
            det_used[j] = true;
            matches.push(Match { tracklet: i, detection: j, stage: Stage::First, similarity: s });
        }
    }

    if config.second_stage {
        let rest_t: Vec<usize> = (0..tracklets.len()).filter(|&i| !track_used[i]).collect();
        let rest_d: Vec<usize> = (0..detections.len()).filter(|&j| !det_used[j]).collect();
        if !rest_t.is_empty() && !rest_d.is_empty() {
            let sub_t: Vec<TrackletGeometry> = rest_t.iter().map(|&i| tracklets[i]).collect();
            let sub_d: Vec<BBox> = rest_d.iter().map(|&j| detections[j]).collect();
            let sub_sim = sim.select(&rest_t, &rest_d);
            let c2 = stage2_costs(&sub_t, &sub_d, &sub_sim, config)?;
            for &(a, b) in solve(&c2).pairs() {
                let (i, j) = (rest_t[a], rest_d[b]);
                let s = sim.get(i, j);
                if s > config.theta_reid_low {
                    track_used[i] = true;
                    det_used[j] = true;
                    matches.push(Match { tracklet: i, detection: j, stage: Stage::Second, similarity: s });
                }
            }
        }
    }

    matches.sort_by_key(|m| m.tracklet);
    Ok(AssociationOutcome {
        matches,
        unmatched_tracklets: (0..tracklets.len()).filter(|&i| !track_used[i]).collect(),
        unmatched_detections: (0..detections.len()).filter(|&j| !det_used[j]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(bbox: BBox) -> TrackletGeometry {
        TrackletGeometry { bbox, size: (bbox.w, bbox.h), staleness: 1.0, innovation_cov: [[4.0, 0.0], [0.0, 4.0]] }
    }

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    fn sim(rows: usize, cols: usize, v: &[f64]) -> SimilarityMatrix {
        SimilarityMatrix::new(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn stage1_examples() {
        let cfg = AssociationConfig::default();
        let p = BbdParams::default();
        // w = h = 10 at beta: sigma = 5 px per axis, so BBD = |dx| / 5.
        let t = geom(bb(0.0, 0.0, 10.0, 10.0));
        let c = stage1_costs(&[t], &[t.bbox], &sim(1, 1, &[0.9]), &cfg, &p).unwrap();
        assert!((c.get(0, 0) - 0.1).abs() < 1e-12);

        let far = t.bbox.translated(100.0, 0.0); // BBD = 20
        let c = stage1_costs(&[t], &[far], &sim(1, 1, &[0.99]), &cfg, &p).unwrap();
        assert!(c.get(0, 0).is_infinite());

        let near = t.bbox.translated(5.0, 0.0); // BBD = 1
        let c = stage1_costs(&[t], &[near], &sim(1, 1, &[0.65]), &cfg, &p).unwrap();
        assert!(c.get(0, 0).is_infinite());
    }

    #[test]
    fn stage1_threshold_is_strict() {
        let cfg = AssociationConfig::default();
        let t = geom(bb(0.0, 0.0, 10.0, 10.0));
        let at_gate = t.bbox.translated(80.0, 0.0); // BBD exactly 16
        let c = stage1_costs(&[t], &[at_gate], &sim(1, 1, &[0.99]), &cfg, &BbdParams::default()).unwrap();
        assert!(c.get(0, 0).is_infinite());
    }

    #[test]
    fn stage2_examples() {
        let cfg = AssociationConfig::default();
        let t = geom(bb(0.0, 0.0, 10.0, 10.0));
        // IoU 0.8 needs intersection 80 / union 100: shift by 10/9.
        let d = bb(0.0, 0.0, 10.0, 10.0).translated(10.0 / 9.0, 0.0);
        assert!((iou(&t.bbox, &d) - 0.8).abs() < 1e-9);
        let c = stage2_costs(&[t], &[d], &sim(1, 1, &[0.5]), &cfg).unwrap();
        assert!((c.get(0, 0) - 0.5).abs() < 1e-12);

        let low_overlap = t.bbox.translated(8.0, 0.0);
        assert!(iou(&t.bbox, &low_overlap) < 0.4);
        assert!(stage2_costs(&[t], &[low_overlap], &sim(1, 1, &[0.9]), &cfg).unwrap().get(0, 0).is_infinite());

        let tight = t.bbox.translated(0.5, 0.0);
        assert!(stage2_costs(&[t], &[tight], &sim(1, 1, &[0.2]), &cfg).unwrap().get(0, 0).is_infinite());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let t = geom(bb(0.0, 0.0, 10.0, 10.0));
        let cfg = AssociationConfig::default();
        assert!(stage1_costs(&[t], &[t.bbox, t.bbox], &sim(1, 1, &[0.9]), &cfg, &BbdParams::default()).is_err());
        assert!(associate(&[t, t], &[t.bbox], &sim(1, 1, &[0.9]), &cfg, &BbdParams::default()).is_err());
    }

    #[test]
    fn empty_detections() {
        let t = geom(bb(0.0, 0.0, 10.0, 10.0));
        let out = associate(&[t, t], &[], &sim(2, 0, &[]), &AssociationConfig::default(), &BbdParams::default()).unwrap();
        assert!(out.matches.is_empty());
        assert_eq!(out.unmatched_tracklets, vec![0, 1]);
    }

    #[test]
    fn coincident_pair_matches_in_stage_one() {
        let t = geom(bb(5.0, 5.0, 10.0, 20.0));
        let out = associate(&[t], &[t.bbox], &sim(1, 1, &[0.9]), &AssociationConfig::default(), &BbdParams::default()).unwrap();
        assert_eq!(out.matches.len(), 1);
        assert_eq!(out.matches[0].stage, Stage::First);
    }

    #[test]
    fn second_stage_picks_up_weak_appearance() {
        let a = geom(bb(0.0, 0.0, 10.0, 10.0));
        let b = geom(bb(200.0, 0.0, 10.0, 10.0));
        let dets = [a.bbox.translated(1.0, 0.0), b.bbox.translated(0.5, 0.0)];
        // A-1 passes stage one; B-2 only has s = 0.5 but overlaps well.
        let s = sim(2, 2, &[0.9, 0.1, 0.1, 0.5]);
        let out = associate(&[a, b], &dets, &s, &AssociationConfig::default(), &BbdParams::default()).unwrap();
        assert_eq!(out.matches.len(), 2);
        assert_eq!((out.matches[0].tracklet, out.matches[0].detection, out.matches[0].stage), (0, 0, Stage::First));
        assert_eq!((out.matches[1].tracklet, out.matches[1].detection, out.matches[1].stage), (1, 1, Stage::Second));
    }

    #[test]
    fn second_stage_can_be_disabled() {
        let b = geom(bb(0.0, 0.0, 10.0, 10.0));
        let cfg = AssociationConfig { second_stage: false, ..Default::default() };
        let out = associate(&[b], &[b.bbox], &sim(1, 1, &[0.5]), &cfg, &BbdParams::default()).unwrap();
        assert!(out.matches.is_empty());
    }

    #[test]
    fn mahalanobis_gate_uses_innovation_covariance() {
        let t = geom(bb(0.0, 0.0, 10.0, 10.0)); // variance 4 per axis
        let cfg = AssociationConfig { first_stage_gate: SpatialGate::Mahalanobis { threshold_sq: CHI2_95_2DOF }, ..Default::default() };
        let p = BbdParams::default();
        let near = t.bbox.translated(4.0, 0.0); // d² = 4
        let far = t.bbox.translated(6.0, 0.0); // d² = 9
        assert!(stage1_costs(&[t], &[near], &sim(1, 1, &[0.9]), &cfg, &p).unwrap().get(0, 0).is_finite());
        assert!(stage1_costs(&[t], &[far], &sim(1, 1, &[0.9]), &cfg, &p).unwrap().get(0, 0).is_infinite());
    }

    #[test]
    fn config_validation() {
        assert!(AssociationConfig::default().validate().is_ok());
        assert!(AssociationConfig { theta_reid_low: 0.7, ..Default::default() }.validate().is_err());
        assert!(AssociationConfig { theta_iou: 1.0, ..Default::default() }.validate().is_err());
        assert!(AssociationConfig { theta_bbd: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn raising_high_threshold_shrinks_stage_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = BbdParams::default();
        for _ in 0..500 {
            let n = rng.random_range(1..5);
            let m = rng.random_range(1..5);
            let ts: Vec<TrackletGeometry> = (0..n).map(|_| geom(bb(rng.random_range(0.0..60.0), rng.random_range(0.0..60.0), 10.0, 20.0))).collect();
            let ds: Vec<BBox> = (0..m).map(|_| bb(rng.random_range(0.0..60.0), rng.random_range(0.0..60.0), 10.0, 20.0)).collect();
            let s = SimilarityMatrix::new(n, m, (0..n * m).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
            let low = AssociationConfig::default();
            let high = AssociationConfig { theta_reid_high: 0.8, ..low };
            let a = associate(&ts, &ds, &s, &low, &p).unwrap();
            let b = associate(&ts, &ds, &s, &high, &p).unwrap();
            // Stage-one feasible sets are nested; the solver's optimum under the
            // stricter gate can only use pairs admitted by the looser one.
            for m in b.stage_matches(Stage::First) {
                assert!(s.get(m.tracklet, m.detection) > 0.8);
            }
            assert!(b.stage_matches(Stage::First).count() <= a.stage_matches(Stage::First).count());
        }
    }
}
