//! Synthetic scenes: seeded lane/topology generation and prediction
//! perturbation. Everything here is deterministic per seed.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::bezier::{bezier_sample, BezierCurve, Centerline, CenterlineSource};
use crate::direction::QuadDirection;
use crate::error::{Error, Result};
use crate::geom::{arc_length_resample, Axis, Point3, Polyline3};
use crate::metrics::{TopologyEdge, TopologyEdges, TrafficElement, N_ATTRIBUTE_CLASSES};
use crate::scene::SceneAnnotation;

/// Half-extent of the generated region of interest along x, meters.
pub const ROI_X: f64 = 50.0;
/// Half-extent of the generated region of interest along y, meters.
pub const ROI_Y: f64 = 25.0;
/// Successor starts within this distance of a predecessor end become
/// topology-edge candidates, meters.
pub const CHAIN_RADIUS: f64 = 2.0;

/// Lane extent along its dominant axis, meters.
const SPAN_RANGE: (f64, f64) = (15.0, 30.0);
/// Probability that a new lane continues an existing chain.
const CHAIN_PROBABILITY: f64 = 0.6;
/// Points sampled per generated lane.
const LANE_POINTS: usize = 11;
/// Dense parameter samples taken before arc-length resampling.
const LANE_DENSE_SAMPLES: usize = 101;
/// Trafic-light canvas, pixels.
const IMAGE_W: f64 = 1920.0;
const IMAGE_H: f64 = 1080.0;

const DIRECTIONS: [QuadDirection; 4] = [
    QuadDirection::Up,
    QuadDirection::Down,
    QuadDirection::Left,
    QuadDirection::Right,
];

fn direction_sign(d: QuadDirection) -> f64 {
    match d {
        QuadDirection::Up | QuadDirection::Left => 1.0,
        QuadDirection::Down | QuadDirection::Right => -1.0,
    }
}

fn other_axis(a: Axis) -> Axis {
    match a {
        Axis::X => Axis::Y,
        Axis::Y => Axis::X,
    }
}

/// Usable half-extent per axis: one meter inside the ROI so raster tubes
/// stay on the grid.
fn half_extent(a: Axis) -> f64 {
    match a {
        Axis::X => ROI_X - 1.0,
        Axis::Y => ROI_Y - 1.0,
    }
}

struct LaneSeed {
    start: Point3,
    direction: QuadDirection,
}

/// A start position with room for at least a minimum-span lane.
fn fresh_seed(rng: &mut ChaCha8Rng) -> LaneSeed {
    let direction = DIRECTIONS[rng.gen_range(0..4)];
    let axis = direction.sort_axis();
    let sgn = direction_sign(direction);
    let dom_bound = half_extent(axis);
    let lat_bound = half_extent(other_axis(axis));
    // Coordinate measured along the travel sign, leaving minimum room.
    let along = rng.gen_range(-dom_bound..=dom_bound - SPAN_RANGE.0);
    let dom0 = sgn * along;
    let lat0 = rng.gen_range(-lat_bound..=lat_bound);
    LaneSeed {
        start: axis.join(dom0, lat0),
        direction,
    }
}

/// Builds a strictly monotone cubic Bezier lane from `seed`, or `None` when
/// the remaining room along the travel direction is below the minimum span.
///
/// Control points are strictly increasing along the dominant axis, which
/// keeps the sampled polyline strictly monotone; lateral drift and wiggle
/// are small fractions of the span, bounding curvature.
fn lane_from_seed(rng: &mut ChaCha8Rng, seed: &LaneSeed) -> Option<Polyline3> {
    let axis = seed.direction.sort_axis();
    let sgn = direction_sign(seed.direction);
    let dom_bound = half_extent(axis);
    let lat_bound = half_extent(other_axis(axis));
    let (dom0, lat0) = axis.split(&seed.start);
    let room = if sgn > 0.0 {
        dom_bound - dom0
    } else {
        dom0 + dom_bound
    };
    if room < SPAN_RANGE.0 {
        return None;
    }
    let span = rng.gen_range(SPAN_RANGE.0..=SPAN_RANGE.1.min(room));
    let lat3 = (lat0 + rng.gen_range(-0.25..=0.25) * span).clamp(-lat_bound, lat_bound);
    let drift = lat3 - lat0;
    let u1 = rng.gen_range(0.25..=0.42);
    let u2 = rng.gen_range(0.58..=0.75);
    let w1 = rng.gen_range(-0.06..=0.06) * span;
    let w2 = rng.gen_range(-0.06..=0.06) * span;
    let dom = [
        dom0,
        dom0 + sgn * span * u1,
        dom0 + sgn * span * u2,
        dom0 + sgn * span,
    ];
    let lat = [
        lat0,
        (lat0 + drift * u1 + w1).clamp(-lat_bound, lat_bound),
        (lat0 + drift * u2 + w2).clamp(-lat_bound, lat_bound),
        lat3,
    ];
    let control_points = std::array::from_fn(|k| axis.join(dom[k], lat[k]));
    let curve = BezierCurve {
        control_points,
        confidence: 1.0,
    };
    // Vertices are spaced uniformly in arc length, not in curve parameter:
    // skewed parameter speeds would shift uniform-t vertices by up to
    // ~0.06 span along the lane, dominating any vertex-matched comparison.
    let dense = bezier_sample(&curve, LANE_DENSE_SAMPLES).expect("LANE_DENSE_SAMPLES >= 2");
    let lane = arc_length_resample(&dense.polyline, LANE_POINTS)
        .expect("dense monotone lanes resample cleanly");
    Some(lane)
}

fn fresh_lane(rng: &mut ChaCha8Rng) -> Polyline3 {
    let seed = fresh_seed(rng);
    lane_from_seed(rng, &seed).expect("fresh seeds leave minimum-span room")
}

fn disk_jitter(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = radius * rng.gen::<f64>().sqrt();
    (r * theta.cos(), r * theta.sin())
}

fn lane_id(i: usize) -> String {
    format!("lane_{i:04}")
}

fn random_traffic_element(rng: &mut ChaCha8Rng) -> TrafficElement {
    let w = rng.gen_range(30.0..=150.0);
    let h = rng.gen_range(30.0..=100.0);
    let x1 = rng.gen_range(0.0..=IMAGE_W - w);
    let y1 = rng.gen_range(0.0..=IMAGE_H - h);
    TrafficElement {
        bbox: [x1, y1, x1 + w, y1 + h],
        attribute: rng.gen_range(0..N_ATTRIBUTE_CLASSES),
        confidence: 1.0,
    }
}

/// Generates one frame: monotone Bezier ground-truth lanes inside the ROI,
/// a DAG of lane topology over near-coincident endpoints thinned by
/// `topology_density`, random traffic elements with lane links, and
/// predictions initialized as exact copies of the ground truth.
pub fn generate_synthetic_scene(
    seed: u64,
    n_lanes: usize,
    topology_density: f64,
) -> SceneAnnotation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = if topology_density.is_finite() {
        topology_density.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut scene = SceneAnnotation::empty(format!("scene_{seed:08x}"));

    // Lanes chain forward: a successor starts within jitter of an existing
    // end and keeps its direction, so endpoint proximity creates DAG edge
    // candidates (always lower index -> higher index).
    let mut open_ends: Vec<(Point3, QuadDirection)> = Vec::new();
    let mut endpoints: Vec<(Point3, Point3)> = Vec::with_capacity(n_lanes);
    for i in 0..n_lanes {
        let chain = !open_ends.is_empty() && rng.gen_bool(CHAIN_PROBABILITY);
        let (polyline, direction) = if chain {
            let (end, direction) = open_ends[rng.gen_range(0..open_ends.len())];
            let (jx, jy) = disk_jitter(&mut rng, 0.8);
            let start = Point3::new(
                (end.x + jx).clamp(-half_extent(Axis::X), half_extent(Axis::X)),
                (end.y + jy).clamp(-half_extent(Axis::Y), half_extent(Axis::Y)),
                0.0,
            );
            let seed = LaneSeed { start, direction };
            match lane_from_seed(&mut rng, &seed) {
                Some(pl) => (pl, direction),
                None => {
                    let seed = fresh_seed(&mut rng);
                    let direction = seed.direction;
                    (
                        lane_from_seed(&mut rng, &seed).expect("fresh room"),
                        direction,
                    )
                }
            }
        } else {
            let seed = fresh_seed(&mut rng);
            let direction = seed.direction;
            (
                lane_from_seed(&mut rng, &seed).expect("fresh room"),
                direction,
            )
        };
        endpoints.push((polyline.first(), polyline.last()));
        open_ends.push((polyline.last(), direction));
        let lane = Centerline::new(polyline, 1.0, CenterlineSource::GroundTruth)
            .expect("generated lanes are valid");
        scene.gt_centerlines.insert(lane_id(i), lane);
    }

    // Forward index order keeps the edge set acyclic.
    let mut ll = Vec::new();
    for i in 0..n_lanes {
        for j in (i + 1)..n_lanes {
            if endpoints[i].1.dist(&endpoints[j].0) < CHAIN_RADIUS && rng.gen::<f64>() < density {
                ll.push(TopologyEdge {
                    source: lane_id(i),
                    target: lane_id(j),
                    score: 1.0,
                });
            }
        }
    }
    scene.gt_topology_ll = TopologyEdges(ll);

    let n_te = rng.gen_range(1..=3usize);
    for k in 0..n_te {
        scene
            .gt_traffic_elements
            .insert(format!("te_{k:02}"), random_traffic_element(&mut rng));
    }
    if n_lanes > 0 {
        let mut lt = Vec::new();
        let mut seen = BTreeSet::new();
        for k in 0..n_te {
            let links = rng.gen_range(1..=2usize);
            for _ in 0..links {
                let lane = rng.gen_range(0..n_lanes);
                if rng.gen::<f64>() < density && seen.insert((lane, k)) {
                    lt.push(TopologyEdge {
                        source: lane_id(lane),
                        target: format!("te_{k:02}"),
                        score: 1.0,
                    });
                }
            }
        }
        scene.gt_topology_lt = TopologyEdges(lt);
    }

    scene.pred_centerlines = scene.gt_centerlines.clone();
    scene.pred_topology_ll = scene.gt_topology_ll.clone();
    scene.pred_traffic_elements = scene.gt_traffic_elements.clone();
    scene.pred_topology_lt = scene.gt_topology_lt.clone();
    debug_assert!(scene.validate().is_ok());
    scene
}

/// Prediction corruption knobs. All-zero means identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    /// Per-point Gaussian noise on x and y, meters.
    pub xy_noise_sigma: f64,
    /// Per-point Gaussian noise on z, meters.
    pub z_noise_sigma: f64,
    /// Probability of removing each predicted lane.
    pub drop_rate: f64,
    /// Expected number of injected false-positive lanes per scene.
    pub false_positive_rate: f64,
    /// Standard deviation of the jitter added to predicted edge scores.
    pub edge_score_noise: f64,
    pub seed: u64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            xy_noise_sigma: 0.0,
            z_noise_sigma: 0.0,
            drop_rate: 0.0,
            false_positive_rate: 0.0,
            edge_score_noise: 0.0,
            seed: 0,
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("xy_noise_sigma", self.xy_noise_sigma),
            ("z_noise_sigma", self.z_noise_sigma),
            ("false_positive_rate", self.false_positive_rate),
            ("edge_score_noise", self.edge_score_noise),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !self.drop_rate.is_finite() || !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(Error::InvalidConfig(format!(
                "drop_rate must lie in [0, 1], got {}",
                self.drop_rate
            )));
        }
        Ok(())
    }
}

/// Corrupts the predictions of `scene` per `cfg`, leaving ground truth
/// untouched. Stages run in a fixed order (drop, point noise, false
/// positives, edge-score jitter) off one seeded stream, so results are
/// deterministic; edges referencing dropped lanes are removed to keep the
/// scene valid, and jittered scores are clamped to [0, 1].
pub fn perturb_predictions(
    scene: &SceneAnnotation,
    cfg: &PerturbConfig,
) -> Result<SceneAnnotation> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = scene.clone();

    if cfg.drop_rate > 0.0 {
        let ids: Vec<String> = out.pred_centerlines.keys().cloned().collect();
        for id in &ids {
            if rng.gen::<f64>() < cfg.drop_rate {
                out.pred_centerlines.remove(id);
            }
        }
        out.pred_topology_ll.0.retain(|e| {
            out.pred_centerlines.contains_key(&e.source)
                && out.pred_centerlines.contains_key(&e.target)
        });
        out.pred_topology_lt
            .0
            .retain(|e| out.pred_centerlines.contains_key(&e.source));
    }

    if cfg.xy_noise_sigma > 0.0 || cfg.z_noise_sigma > 0.0 {
        let nxy = Normal::new(0.0, cfg.xy_noise_sigma).expect("validated sigma");
        let nz = Normal::new(0.0, cfg.z_noise_sigma).expect("validated sigma");
        for lane in out.pred_centerlines.values_mut() {
            let noisy: Vec<Point3> = lane
                .polyline
                .points()
                .iter()
                .map(|p| {
                    Point3::new(
                        p.x + nxy.sample(&mut rng),
                        p.y + nxy.sample(&mut rng),
                        p.z + nz.sample(&mut rng),
                    )
                })
                .collect();
            // Coincident noisy points have probability zero; keep the
            // original lane if they ever occur.
            if let Ok(pl) = Polyline3::new(noisy) {
                lane.polyline = pl;
            }
        }
    }

    if cfg.false_positive_rate > 0.0 {
        let n_fp = Poisson::new(cfg.false_positive_rate)
            .expect("validated rate")
            .sample(&mut rng) as usize;
        for k in 0..n_fp {
            let polyline = fresh_lane(&mut rng);
            let confidence = rng.gen_range(0.3..=0.9);
            let lane = Centerline::new(polyline, confidence, CenterlineSource::GroundTruth)
                .expect("confidence in range");
            out.pred_centerlines.insert(format!("fp_{k:02}"), lane);
        }
    }

    if cfg.edge_score_noise > 0.0 {
        let jitter = Normal::new(0.0, cfg.edge_score_noise).expect("validated sigma");
        for e in out
            .pred_topology_ll
            .0
            .iter_mut()
            .chain(out.pred_topology_lt.0.iter_mut())
        {
            e.score = (e.score + jitter.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }

    debug_assert!(out.validate().is_ok());
    Ok(out)
}
