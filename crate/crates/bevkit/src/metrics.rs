//! Detection and topology metrics: Frechet/Chamfer centerline mAP, box-IoU
//! traffic-element mAP, vertex-centric topology scores, and the combined OLS.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bezier::Centerline;
use crate::error::{Error, Result};
use crate::geom::{chamfer, discrete_frechet};
use crate::scene::SceneAnnotation;

/// Frechet true-positive thresholds for DET_l, meters.
pub const DET_L_THRESHOLDS: [f64; 3] = [1.0, 2.0, 3.0];
/// Chamfer true-positive thresholds for DET_l_ch, meters.
pub const DET_L_CH_THRESHOLDS: [f64; 3] = [0.5, 1.0, 1.5];
/// IoU threshold for traffic-element matching.
pub const DET_T_IOU: f64 = 0.75;
/// Frechet threshold used when matching centerlines for topology scoring:
/// the middle DET_l threshold.
pub const TOP_MATCH_FRECHET: f64 = 2.0;
/// Number of traffic-element attribute classes.
pub const N_ATTRIBUTE_CLASSES: u32 = 13;

/// An image-space traffic element: axis-aligned box plus attribute class.
/// Ground-truth elements default to confidence 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficElement {
    /// (x1, y1, x2, y2) pixels, x2 > x1 and y2 > y1.
    pub bbox: [f64; 4],
    /// Class id in [0, 13).
    pub attribute: u32,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_confidence() -> f64 {
    1.0
}

impl TrafficElement {
    pub fn validate(&self) -> Result<()> {
        let [x1, y1, x2, y2] = self.bbox;
        if !self.bbox.iter().all(|v| v.is_finite()) || x2 <= x1 || y2 <= y1 {
            return Err(Error::contract(format!(
                "bbox must satisfy x2 > x1 and y2 > y1, got {:?}",
                self.bbox
            )));
        }
        if self.attribute >= N_ATTRIBUTE_CLASSES {
            return Err(Error::contract(format!(
                "attribute {} outside [0, {N_ATTRIBUTE_CLASSES})",
                self.attribute
            )));
        }
        if !self.confidence.is_finite() || !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::contract(format!(
                "confidence must lie in [0, 1], got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// Intersection over union of two axis-aligned boxes.
pub fn box_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// One directed topology edge with a confidence score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyEdge {
    pub source: String,
    pub target: String,
    pub score: f64,
}

/// A set of directed edges. Scene validation enforces scores in [0, 1] and
/// no duplicate (source, target) pairs; score manipulation may push working
/// copies above 1 during evaluation, which is intentional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopologyEdges(pub Vec<TopologyEdge>);

impl TopologyEdges {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TopologyEdge> {
        self.0.iter()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.0 {
            if !e.score.is_finite() || !(0.0..=1.0).contains(&e.score) {
                return Err(Error::contract(format!(
                    "edge ({} -> {}) score must lie in [0, 1], got {}",
                    e.source, e.target, e.score
                )));
            }
            if !seen.insert((e.source.as_str(), e.target.as_str())) {
                return Err(Error::contract(format!(
                    "duplicate edge ({} -> {})",
                    e.source, e.target
                )));
            }
        }
        Ok(())
    }
}

/// The score remapping: add 1 to every score strictly above 0.05. Scores
/// never shrink and ranking order is preserved; results may exceed 1.
pub fn manipulate_scores(edges: &TopologyEdges) -> TopologyEdges {
    TopologyEdges(
        edges
            .iter()
            .map(|e| TopologyEdge {
                source: e.source.clone(),
                target: e.target.clone(),
                score: if e.score > 0.05 {
                    e.score + 1.0
                } else {
                    e.score
                },
            })
            .collect(),
    )
}

/// Which polyline distance a matching run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKernel {
    Frechet,
    Chamfer,
}

impl DistanceKernel {
    fn measure(&self, a: &Centerline, b: &Centerline) -> f64 {
        match self {
            DistanceKernel::Frechet => discrete_frechet(a.polyline.points(), b.polyline.points()),
            DistanceKernel::Chamfer => chamfer(a.polyline.points(), b.polyline.points()),
        }
    }
}

/// A matched (prediction, ground truth) pair and the distance between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub pred: String,
    pub gt: String,
    pub distance: f64,
}

/// Outcome of greedy one-to-one matching.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchPair>,
    pub unmatched_preds: Vec<String>,
    pub unmatched_gts: Vec<String>,
}

impl MatchResult {
    /// Prediction id -> matched ground-truth id.
    pub fn pred_to_gt(&self) -> BTreeMap<&str, &str> {
        self.pairs
            .iter()
            .map(|p| (p.pred.as_str(), p.gt.as_str()))
            .collect()
    }

    /// Ground-truth id -> matched prediction id.
    pub fn gt_to_pred(&self) -> BTreeMap<&str, &str> {
        self.pairs
            .iter()
            .map(|p| (p.gt.as_str(), p.pred.as_str()))
            .collect()
    }
}

/// Predictions in descending-confidence order, ties broken by ascending id.
fn confidence_order<T>(items: &BTreeMap<String, T>, conf: impl Fn(&T) -> f64) -> Vec<&str> {
    let mut ids: Vec<(&str, f64)> = items.iter().map(|(k, v)| (k.as_str(), conf(v))).collect();
    ids.sort_by(|a, b| b.1.total_cmp(&a.1));
    ids.into_iter().map(|(k, _)| k).collect()
}

/// Greedy one-to-one matching: predictions in confidence order each take the
/// nearest still-unmatched ground truth with distance strictly below the
/// threshold. Distance ties go to the smallest ground-truth id.
pub fn match_instances(
    preds: &BTreeMap<String, Centerline>,
    gts: &BTreeMap<String, Centerline>,
    kernel: DistanceKernel,
    threshold: f64,
) -> MatchResult {
    let order = confidence_order(preds, |c| c.confidence);
    let gt_ids: Vec<&str> = gts.keys().map(String::as_str).collect();
    let mut gt_taken = vec![false; gt_ids.len()];
    let mut result = MatchResult::default();
    for pred_id in order {
        let pred = &preds[pred_id];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt_id) in gt_ids.iter().enumerate() {
            if gt_taken[gi] {
                continue;
            }
            let d = kernel.measure(pred, &gts[*gt_id]);
            if d < threshold && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((gi, d));
            }
        }
        match best {
            Some((gi, d)) => {
                gt_taken[gi] = true;
                result.pairs.push(MatchPair {
                    pred: pred_id.to_string(),
                    gt: gt_ids[gi].to_string(),
                    distance: d,
                });
            }
            None => result.unmatched_preds.push(pred_id.to_string()),
        }
    }
    for (gi, gt_id) in gt_ids.iter().enumerate() {
        if !gt_taken[gi] {
            result.unmatched_gts.push(gt_id.to_string());
        }
    }
    result
}

/// Class-aware greedy IoU matching for traffic elements: within each
/// attribute class, predictions in confidence order take the unmatched
/// ground truth with the highest IoU at or above the threshold.
pub fn match_traffic_elements(
    preds: &BTreeMap<String, TrafficElement>,
    gts: &BTreeMap<String, TrafficElement>,
    iou_threshold: f64,
) -> MatchResult {
    let order = confidence_order(preds, |t| t.confidence);
    let gt_ids: Vec<&str> = gts.keys().map(String::as_str).collect();
    let mut gt_taken = vec![false; gt_ids.len()];
    let mut result = MatchResult::default();
    for pred_id in order {
        let pred = &preds[pred_id];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt_id) in gt_ids.iter().enumerate() {
            if gt_taken[gi] || gts[*gt_id].attribute != pred.attribute {
                continue;
            }
            let iou = box_iou(&pred.bbox, &gts[*gt_id].bbox);
            if iou >= iou_threshold && best.is_none_or(|(_, bi)| iou > bi) {
                best = Some((gi, iou));
            }
        }
        match best {
            Some((gi, iou)) => {
                gt_taken[gi] = true;
                result.pairs.push(MatchPair {
                    pred: pred_id.to_string(),
                    gt: gt_ids[gi].to_string(),
                    // Stored as a distance-like quantity: 1 - IoU.
                    distance: 1.0 - iou,
                });
            }
            None => result.unmatched_preds.push(pred_id.to_string()),
        }
    }
    for (gi, gt_id) in gt_ids.iter().enumerate() {
        if !gt_taken[gi] {
            result.unmatched_gts.push(gt_id.to_string());
        }
    }
    result
}

/// All-point interpolated average precision.
///
/// The list is (confidence, is_true_positive) per prediction; it is re-sorted
/// by descending confidence (stable) before scoring. With no ground truth the
/// result is vacuously 1 for an empty list and 0 otherwise.
pub fn average_precision(ranked: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if ranked.is_empty() { 1.0 } else { 0.0 };
    }
    let mut sorted = ranked.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut precisions = Vec::with_capacity(sorted.len());
    let mut tp = 0usize;
    for (k, &(_, is_tp)) in sorted.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        precisions.push(tp as f64 / (k + 1) as f64);
    }
    // Monotone envelope from the right, summed at true-positive ranks.
    let mut running_max = 0.0f64;
    let mut sum = 0.0f64;
    for (k, &(_, is_tp)) in sorted.iter().enumerate().rev() {
        running_max = running_max.max(precisions[k]);
        if is_tp {
            sum += running_max;
        }
    }
    sum / n_gt as f64
}

type CenterlineScene<'a> = (
    &'a BTreeMap<String, Centerline>,
    &'a BTreeMap<String, Centerline>,
);

/// Dataset-level detection score: per threshold, matches are pooled across
/// scenes into one ranked list before AP; the mean over thresholds is
/// returned.
fn pooled_det(scenes: &[CenterlineScene<'_>], kernel: DistanceKernel, thresholds: &[f64]) -> f64 {
    let mut total = 0.0;
    for &thr in thresholds {
        let mut ranked = Vec::new();
        let mut n_gt = 0usize;
        for (preds, gts) in scenes {
            let m = match_instances(preds, gts, kernel, thr);
            let matched: BTreeSet<&str> = m.pairs.iter().map(|p| p.pred.as_str()).collect();
            for (id, cl) in preds.iter() {
                ranked.push((cl.confidence, matched.contains(id.as_str())));
            }
            n_gt += gts.len();
        }
        total += average_precision(&ranked, n_gt);
    }
    total / thresholds.len() as f64
}

/// Centerline detection score over Frechet thresholds {1, 2, 3} m.
pub fn det_l(preds: &BTreeMap<String, Centerline>, gts: &BTreeMap<String, Centerline>) -> f64 {
    pooled_det(&[(preds, gts)], DistanceKernel::Frechet, &DET_L_THRESHOLDS)
}

/// Centerline detection score over Chamfer thresholds {0.5, 1, 1.5} m.
pub fn det_l_ch(preds: &BTreeMap<String, Centerline>, gts: &BTreeMap<String, Centerline>) -> f64 {
    pooled_det(
        &[(preds, gts)],
        DistanceKernel::Chamfer,
        &DET_L_CH_THRESHOLDS,
    )
}

type TrafficScene<'a> = (
    &'a BTreeMap<String, TrafficElement>,
    &'a BTreeMap<String, TrafficElement>,
);

/// Per-class AP at IoU >= 0.75, averaged over the attribute classes present
/// in the ground truth; vacuously 1 when no scene has any ground truth.
fn pooled_det_t(scenes: &[TrafficScene<'_>]) -> f64 {
    let classes: BTreeSet<u32> = scenes
        .iter()
        .flat_map(|(_, gts)| gts.values().map(|t| t.attribute))
        .collect();
    if classes.is_empty() {
        return 1.0;
    }
    let mut total = 0.0;
    for &class in &classes {
        let mut ranked = Vec::new();
        let mut n_gt = 0usize;
        for (preds, gts) in scenes {
            let cp: BTreeMap<String, TrafficElement> = preds
                .iter()
                .filter(|(_, t)| t.attribute == class)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let cg: BTreeMap<String, TrafficElement> = gts
                .iter()
                .filter(|(_, t)| t.attribute == class)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let m = match_traffic_elements(&cp, &cg, DET_T_IOU);
            let matched: BTreeSet<&str> = m.pairs.iter().map(|p| p.pred.as_str()).collect();
            for (id, te) in cp.iter() {
                ranked.push((te.confidence, matched.contains(id.as_str())));
            }
            n_gt += cg.len();
        }
        total += average_precision(&ranked, n_gt);
    }
    total / classes.len() as f64
}

/// Traffic-element detection score.
pub fn det_t(
    preds: &BTreeMap<String, TrafficElement>,
    gts: &BTreeMap<String, TrafficElement>,
) -> f64 {
    pooled_det_t(&[(preds, gts)])
}

/// Per-vertex topology APs for one scene.
///
/// Qualifying vertices are ground-truth sources with at least one outgoing
/// ground-truth edge. A vertex whose ground truth has no matched prediction
/// scores 0. Otherwise the matched prediction's outgoing edges are ranked by
/// score (ties by target id); an edge is a true positive when its target's
/// matched ground truth is a ground-truth neighbor of the vertex.
pub fn top_vertex_aps(
    pred_edges: &TopologyEdges,
    gt_edges: &TopologyEdges,
    source_match: &MatchResult,
    target_match: &MatchResult,
) -> Vec<f64> {
    let mut gt_adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in gt_edges.iter() {
        gt_adj
            .entry(e.source.as_str())
            .or_default()
            .insert(e.target.as_str());
    }
    let mut pred_adj: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for e in pred_edges.iter() {
        pred_adj
            .entry(e.source.as_str())
            .or_default()
            .push((e.target.as_str(), e.score));
    }
    let gt_to_pred = source_match.gt_to_pred();
    let target_pred_to_gt = target_match.pred_to_gt();

    let mut aps = Vec::with_capacity(gt_adj.len());
    for (vertex, neighbors) in &gt_adj {
        let Some(&pred_vertex) = gt_to_pred.get(vertex) else {
            aps.push(0.0);
            continue;
        };
        let mut ranked: Vec<(f64, bool)> = Vec::new();
        if let Some(out_edges) = pred_adj.get(pred_vertex) {
            let mut edges = out_edges.clone();
            edges.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
            for (target, score) in edges {
                let is_tp = target_pred_to_gt
                    .get(target)
                    .is_some_and(|gt_target| neighbors.contains(gt_target));
                ranked.push((score, is_tp));
            }
        }
        aps.push(average_precision(&ranked, neighbors.len()));
    }
    aps
}

/// Mean of [`top_vertex_aps`]; vacuously 1 when no vertex qualifies.
pub fn top_score(
    pred_edges: &TopologyEdges,
    gt_edges: &TopologyEdges,
    source_match: &MatchResult,
    target_match: &MatchResult,
) -> f64 {
    let aps = top_vertex_aps(pred_edges, gt_edges, source_match, target_match);
    if aps.is_empty() {
        1.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

/// Combined score: the mean of DET_l, DET_t, sqrt(TOP_ll) and sqrt(TOP_lt).
pub fn ols(det_l: f64, det_t: f64, top_ll: f64, top_lt: f64) -> Result<f64> {
    for (name, v) in [
        ("det_l", det_l),
        ("det_t", det_t),
        ("top_ll", top_ll),
        ("top_lt", top_lt),
    ] {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::contract(format!(
                "{name} must lie in [0, 1], got {v}"
            )));
        }
    }
    Ok((det_l + det_t + top_ll.sqrt() + top_lt.sqrt()) / 4.0)
}

/// Evaluation switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Topology edges with score <= this are discarded before scoring.
    pub score_threshold: Option<f64>,
    /// Apply [`manipulate_scores`] before the threshold filter.
    pub manipulate: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            score_threshold: Some(0.5),
            manipulate: false,
        }
    }
}

/// All six scores, each in [0, 1]. Rendered values are x100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub det_l: f64,
    pub det_l_ch: f64,
    pub det_t: f64,
    pub top_ll: f64,
    pub top_lt: f64,
    pub ols: f64,
}

impl EvalReport {
    /// Human-readable table, scores x100 with one decimal.
    pub fn rendered(&self) -> String {
        let mut s = String::from("metric    score\n");
        for (name, v) in [
            ("DET_l   ", self.det_l),
            ("DET_l_ch", self.det_l_ch),
            ("DET_t   ", self.det_t),
            ("TOP_ll  ", self.top_ll),
            ("TOP_lt  ", self.top_lt),
            ("OLS     ", self.ols),
        ] {
            s.push_str(&format!("{name}  {:>5.1}\n", v * 100.0));
        }
        s
    }
}

fn prepared_edges(edges: &TopologyEdges, options: &EvalOptions) -> TopologyEdges {
    let mut work = if options.manipulate {
        manipulate_scores(edges)
    } else {
        edges.clone()
    };
    if let Some(thr) = options.score_threshold {
        work.0.retain(|e| e.score > thr);
    }
    work
}

/// Full dataset evaluation. True positives are pooled across scenes before
/// each AP computation; topology vertices are pooled across scenes before
/// the mean.
pub fn evaluate(scenes: &[SceneAnnotation], options: &EvalOptions) -> Result<EvalReport> {
    if scenes.is_empty() {
        return Err(Error::InvalidConfig("empty scene set".into()));
    }
    for scene in scenes {
        scene.validate_with_prefix(&format!("/{}", scene.frame_id))?;
    }

    let cl_pairs: Vec<CenterlineScene<'_>> = scenes
        .iter()
        .map(|s| (&s.pred_centerlines, &s.gt_centerlines))
        .collect();
    let det_l_score = pooled_det(&cl_pairs, DistanceKernel::Frechet, &DET_L_THRESHOLDS);
    let det_l_ch_score = pooled_det(&cl_pairs, DistanceKernel::Chamfer, &DET_L_CH_THRESHOLDS);

    let te_pairs: Vec<TrafficScene<'_>> = scenes
        .iter()
        .map(|s| (&s.pred_traffic_elements, &s.gt_traffic_elements))
        .collect();
    let det_t_score = pooled_det_t(&te_pairs);

    let mut ll_aps = Vec::new();
    let mut lt_aps = Vec::new();
    for scene in scenes {
        let lane_match = match_instances(
            &scene.pred_centerlines,
            &scene.gt_centerlines,
            DistanceKernel::Frechet,
            TOP_MATCH_FRECHET,
        );
        let te_match = match_traffic_elements(
            &scene.pred_traffic_elements,
            &scene.gt_traffic_elements,
            DET_T_IOU,
        );
        let pred_ll = prepared_edges(&scene.pred_topology_ll, options);
        let pred_lt = prepared_edges(&scene.pred_topology_lt, options);
        ll_aps.extend(top_vertex_aps(
            &pred_ll,
            &scene.gt_topology_ll,
            &lane_match,
            &lane_match,
        ));
        lt_aps.extend(top_vertex_aps(
            &pred_lt,
            &scene.gt_topology_lt,
            &lane_match,
            &te_match,
        ));
    }
    let mean_or_vacuous = |aps: &[f64]| {
        if aps.is_empty() {
            1.0
        } else {
            aps.iter().sum::<f64>() / aps.len() as f64
        }
    };
    let top_ll_score = mean_or_vacuous(&ll_aps);
    let top_lt_score = mean_or_vacuous(&lt_aps);

    Ok(EvalReport {
        det_l: det_l_score,
        det_l_ch: det_l_ch_score,
        det_t: det_t_score,
        top_ll: top_ll_score,
        top_lt: top_lt_score,
        ols: ols(det_l_score, det_t_score, top_ll_score, top_lt_score)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::CenterlineSource;
    use crate::geom::{Point3, Polyline3};

    fn cl(points: &[[f64; 3]], confidence: f64) -> Centerline {
        Centerline::new(
            Polyline3::new(
                points
                    .iter()
                    .map(|p| Point3::new(p[0], p[1], p[2]))
                    .collect(),
            )
            .unwrap(),
            confidence,
            CenterlineSource::GroundTruth,
        )
        .unwrap()
    }

    fn straight(offset: f64, confidence: f64) -> Centerline {
        cl(&[[0.0, offset, 0.0], [10.0, offset, 0.0]], confidence)
    }

    fn map<T>(items: Vec<(&str, T)>) -> BTreeMap<String, T> {
        items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn identical_instance_matches_at_distance_zero() {
        let gts = map(vec![("a", straight(0.0, 1.0))]);
        let preds = map(vec![("p", straight(0.0, 0.9))]);
        let m = match_instances(&preds, &gts, DistanceKernel::Frechet, 1.0);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].distance, 0.0);
        assert!(m.unmatched_preds.is_empty() && m.unmatched_gts.is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        let gts = map(vec![("a", straight(0.0, 1.0))]);
        let preds = map(vec![("p", straight(2.5, 0.9))]);
        let m = match_instances(&preds, &gts, DistanceKernel::Frechet, 2.0);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_preds, vec!["p"]);
        assert_eq!(m.unmatched_gts, vec!["a"]);
        // Exactly at the threshold is still excluded.
        let m = match_instances(&preds, &gts, DistanceKernel::Frechet, 2.5);
        assert!(m.pairs.is_empty());
        let m = match_instances(&preds, &gts, DistanceKernel::Frechet, 2.51);
        assert_eq!(m.pairs.len(), 1);
    }

    #[test]
    fn greedy_matching_follows_confidence_order() {
        // Both predictions are nearest to GT "a"; the higher-confidence one
        // takes it, the other falls back to "b".
        let gts = map(vec![("a", straight(0.0, 1.0)), ("b", straight(3.0, 1.0))]);
        let preds = map(vec![
            ("p_low", straight(0.4, 0.5)),
            ("p_high", straight(0.8, 0.9)),
        ]);
        let m = match_instances(&preds, &gts, DistanceKernel::Frechet, 3.0);
        let assign = m.pred_to_gt();
        assert_eq!(assign["p_high"], "a");
        assert_eq!(assign["p_low"], "b");
    }

    #[test]
    fn ap_matches_hand_cases() {
        assert_eq!(average_precision(&[(0.9, true)], 1), 1.0);
        assert_eq!(average_precision(&[(0.9, false), (0.8, true)], 1), 0.5);
        assert_eq!(average_precision(&[], 3), 0.0);
        assert_eq!(average_precision(&[], 0), 1.0);
        assert_eq!(average_precision(&[(0.9, false)], 0), 0.0);
        // Later high-precision TP lifts the envelope at an earlier FP rank.
        let ap = average_precision(&[(0.9, true), (0.8, false), (0.7, true)], 2);
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ap_never_decreases_under_suffix_extension() {
        let base = vec![(0.9, true), (0.8, false), (0.7, true)];
        let base_ap = average_precision(&base, 4);
        for suffix in [(0.1, false), (0.1, true)] {
            let mut ext = base.clone();
            ext.push(suffix);
            assert!(average_precision(&ext, 4) >= base_ap);
        }
    }

    #[test]
    fn det_l_perfect_and_offset_cases() {
        let gts = map(vec![("a", straight(0.0, 1.0)), ("b", straight(5.0, 1.0))]);
        assert_eq!(det_l(&gts, &gts), 1.0);
        assert_eq!(det_l(&BTreeMap::new(), &gts), 0.0);
        // 2.5 m offset: only the 3 m threshold matches.
        let preds = map(vec![("p", straight(2.5, 0.9))]);
        let gt1 = map(vec![("a", straight(0.0, 1.0))]);
        let s = det_l(&preds, &gt1);
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn det_l_ch_uses_chamfer_thresholds() {
        let gt1 = map(vec![("a", straight(0.0, 1.0))]);
        // 0.7 m lateral offset: Chamfer = 0.7, passes 1.0 and 1.5 but not 0.5.
        let preds = map(vec![("p", straight(0.7, 0.9))]);
        let s = det_l_ch(&preds, &gt1);
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
    }

    fn te(bbox: [f64; 4], attribute: u32, confidence: f64) -> TrafficElement {
        TrafficElement {
            bbox,
            attribute,
            confidence,
        }
    }

    #[test]
    fn det_t_perfect_wrong_class_and_low_iou() {
        let gts = map(vec![
            ("g0", te([0.0, 0.0, 10.0, 10.0], 1, 1.0)),
            ("g1", te([20.0, 0.0, 30.0, 10.0], 2, 1.0)),
        ]);
        assert_eq!(det_t(&gts, &gts), 1.0);

        // Correct box, wrong attribute: zero for the GT class.
        let wrong = map(vec![("p", te([0.0, 0.0, 10.0, 10.0], 3, 0.9))]);
        let gt1 = map(vec![("g", te([0.0, 0.0, 10.0, 10.0], 1, 1.0))]);
        assert_eq!(det_t(&wrong, &gt1), 0.0);

        // IoU 0.5 at threshold 0.75 fails: boxes [0,10] vs [0,5] wide.
        let half = map(vec![("p", te([0.0, 0.0, 5.0, 10.0], 1, 0.9))]);
        assert!((box_iou(&half["p"].bbox, &gt1["g"].bbox) - 0.5).abs() < 1e-12);
        assert_eq!(det_t(&half, &gt1), 0.0);
    }

    fn edges(list: &[(&str, &str, f64)]) -> TopologyEdges {
        TopologyEdges(
            list.iter()
                .map(|(s, t, sc)| TopologyEdge {
                    source: s.to_string(),
                    target: t.to_string(),
                    score: *sc,
                })
                .collect(),
        )
    }

    fn identity_match(ids: &[&str]) -> MatchResult {
        MatchResult {
            pairs: ids
                .iter()
                .map(|i| MatchPair {
                    pred: i.to_string(),
                    gt: i.to_string(),
                    distance: 0.0,
                })
                .collect(),
            unmatched_preds: vec![],
            unmatched_gts: vec![],
        }
    }

    #[test]
    fn top_perfect_graph_scores_one() {
        let gt = edges(&[("a", "b", 1.0), ("b", "c", 1.0)]);
        let pred = edges(&[("a", "b", 1.0), ("b", "c", 1.0)]);
        let m = identity_match(&["a", "b", "c"]);
        assert_eq!(top_score(&pred, &gt, &m, &m), 1.0);
    }

    #[test]
    fn top_ranks_true_edge_first() {
        let gt = edges(&[("a", "b", 1.0)]);
        let pred = edges(&[("a", "b", 0.9), ("a", "c", 0.1)]);
        let m = identity_match(&["a", "b", "c"]);
        assert_eq!(top_score(&pred, &gt, &m, &m), 1.0);
    }

    #[test]
    fn unmatched_vertex_contributes_zero() {
        let gt = edges(&[("a", "b", 1.0), ("c", "b", 1.0)]);
        let pred = edges(&[("a", "b", 0.9)]);
        // "c" has no matched prediction.
        let m = identity_match(&["a", "b"]);
        let aps = top_vertex_aps(&pred, &gt, &m, &m);
        assert_eq!(aps, vec![1.0, 0.0]);
        assert_eq!(top_score(&pred, &gt, &m, &m), 0.5);
    }

    #[test]
    fn top_is_vacuously_one_without_gt_edges() {
        let gt = edges(&[]);
        let pred = edges(&[("a", "b", 0.9)]);
        let m = identity_match(&["a", "b"]);
        assert_eq!(top_score(&pred, &gt, &m, &m), 1.0);
    }

    #[test]
    fn manipulation_follows_the_formula() {
        let e = edges(&[("a", "b", 0.3), ("a", "c", 0.04), ("b", "c", 0.05)]);
        let out = manipulate_scores(&e);
        let scores: Vec<f64> = out.iter().map(|e| e.score).collect();
        assert_eq!(scores, vec![1.3, 0.04, 0.05]);
    }

    #[test]
    fn ols_reproduces_published_rows() {
        // Subset-A comparative table, V1.1 columns.
        let rows = [
            (0.286, 0.486, 0.109, 0.239, 39.8), // TopoNet
            (0.285, 0.495, 0.217, 0.269, 44.1), // TopoMLP
            (0.345, 0.538, 0.245, 0.356, 49.4), // TopoMask
            // Subset-B comparative table, V1.1 columns.
            (0.252, 0.631, 0.207, 0.203, 44.7), // TopoMLP
            (0.416, 0.611, 0.287, 0.261, 51.8), // TopoMask
        ];
        for (dl, dt, tll, tlt, printed) in rows {
            let got = ols(dl, dt, tll, tlt).unwrap() * 100.0;
            assert!(
                (got - printed).abs() <= 0.05,
                "({dl},{dt},{tll},{tlt}) -> {got}, printed {printed}"
            );
        }
        assert_eq!(ols(0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(ols(1.2, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ols_is_monotone_in_each_argument() {
        let base = ols(0.4, 0.5, 0.3, 0.2).unwrap();
        assert!(ols(0.5, 0.5, 0.3, 0.2).unwrap() >= base);
        assert!(ols(0.4, 0.6, 0.3, 0.2).unwrap() >= base);
        assert!(ols(0.4, 0.5, 0.4, 0.2).unwrap() >= base);
        assert!(ols(0.4, 0.5, 0.3, 0.3).unwrap() >= base);
    }

    #[test]
    fn report_renders_scaled_scores() {
        let r = EvalReport {
            det_l: 1.0,
            det_l_ch: 0.5,
            det_t: 0.345,
            top_ll: 0.0,
            top_lt: 1.0,
            ols: 0.494,
        };
        let text = r.rendered();
        assert!(text.contains("100.0"));
        assert!(text.contains("34.5"), "{text}");
        assert!(text.contains("49.4"));
    }
}
