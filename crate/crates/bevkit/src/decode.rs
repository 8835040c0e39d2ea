//! Decoding flow-aware instance masks back into ordered centerlines.
//!
//! Three stages: probability-aware center-point extraction per row or column,
//! polynomial fine-tuning with arc-length sparsification, and label-aware
//! sorting.

use serde::{Deserialize, Serialize};

use crate::bezier::{Centerline, CenterlineSource};
use crate::direction::{sort_points_by_label, QuadDirection};
use crate::error::{Error, Result};
use crate::geom::{arc_length_resample, polyfit, BevGridSpec, Point3, Polyline3};
use crate::raster::FlowAwareMask;

/// A candidate centerline point with the probability it was read off at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint {
    pub position: Point3,
    pub score: f64,
}

/// Knobs for the mask decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Probability threshold `p`: cells above it count as foreground, and an
    /// extracted point survives only if its looked-up score exceeds it.
    pub threshold_p: f64,
    /// Degree of the fine-tuning polynomial fit.
    pub poly_degree: usize,
    /// Number of points in the final, sparsified centerline.
    pub n_out: usize,
    /// Spacing (meters) of the dense fit evaluation before sparsification;
    /// one standard cell width by default.
    pub dense_step: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            threshold_p: 0.95,
            poly_degree: 3,
            n_out: 11,
            dense_step: 0.5,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold_p.is_finite() || !(0.0 < self.threshold_p && self.threshold_p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold_p must lie in (0, 1), got {}",
                self.threshold_p
            )));
        }
        if self.poly_degree == 0 {
            return Err(Error::InvalidConfig("poly_degree must be >= 1".into()));
        }
        if self.n_out < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_out must be >= 2, got {}",
                self.n_out
            )));
        }
        if !self.dense_step.is_finite() || self.dense_step <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "dense_step must be positive, got {}",
                self.dense_step
            )));
        }
        Ok(())
    }
}

/// Stage 1: per-row (labels up/down) or per-column (left/right)
/// probability-weighted centroids over foreground cells.
///
/// Foreground is `P > p`. A scan line with no foreground yields no point.
/// The centroid index is fractional; its score is the probability at the
/// floored index, and the point is kept only when that score exceeds `p`.
/// Returned positions are world-frame cell centers with z = 0.
pub fn extract_center_points(
    m: &FlowAwareMask,
    spec: &BevGridSpec,
    cfg: &DecoderConfig,
) -> Result<Vec<ScoredPoint>> {
    cfg.validate()?;
    if m.prob.rows() != spec.rows || m.prob.cols() != spec.cols {
        return Err(Error::contract(format!(
            "mask is {}x{} but grid is {}x{}",
            m.prob.rows(),
            m.prob.cols(),
            spec.rows,
            spec.cols
        )));
    }
    let p = cfg.threshold_p;
    let mut out = Vec::new();
    match m.direction {
        QuadDirection::Up | QuadDirection::Down => {
            for row in 0..spec.rows {
                let mut num = 0.0f64;
                let mut den = 0.0f64;
                for col in 0..spec.cols {
                    let v = m.prob.at(row, col) as f64;
                    if v > p {
                        num += v * col as f64;
                        den += v;
                    }
                }
                if den == 0.0 {
                    continue;
                }
                let centroid = num / den;
                let score = m.prob.at(row, centroid.floor() as usize) as f64;
                if score > p {
                    out.push(ScoredPoint {
                        position: spec.fractional_to_world(row as f64, centroid),
                        score,
                    });
                }
            }
        }
        QuadDirection::Left | QuadDirection::Right => {
            for col in 0..spec.cols {
                let mut num = 0.0f64;
                let mut den = 0.0f64;
                for row in 0..spec.rows {
                    let v = m.prob.at(row, col) as f64;
                    if v > p {
                        num += v * row as f64;
                        den += v;
                    }
                }
                if den == 0.0 {
                    continue;
                }
                let centroid = num / den;
                let score = m.prob.at(centroid.floor() as usize, col) as f64;
                if score > p {
                    out.push(ScoredPoint {
                        position: spec.fractional_to_world(centroid, col as f64),
                        score,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Stage 2: polynomial fit along the label's dominant axis, dense evaluation
/// across the input span, then arc-length sparsification to `n_out` points.
pub fn refine_points(
    pts: &[ScoredPoint],
    d: QuadDirection,
    cfg: &DecoderConfig,
) -> Result<Polyline3> {
    cfg.validate()?;
    if pts.len() < 2 {
        return Err(Error::contract(format!(
            "refinement needs at least 2 points, got {}",
            pts.len()
        )));
    }
    let axis = d.sort_axis();
    let positions: Vec<Point3> = pts.iter().map(|s| s.position).collect();
    let fit = polyfit(&positions, axis, cfg.poly_degree)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &positions {
        let (u, _) = axis.split(p);
        lo = lo.min(u);
        hi = hi.max(u);
    }
    let steps = ((hi - lo) / cfg.dense_step).floor() as usize;
    let mut dense = Vec::with_capacity(steps + 2);
    for k in 0..=steps {
        dense.push(fit.point_at(lo + k as f64 * cfg.dense_step));
    }
    let covered = lo + steps as f64 * cfg.dense_step;
    if hi - covered > 1e-9 {
        dense.push(fit.point_at(hi));
    }
    arc_length_resample(&Polyline3::new(dense)?, cfg.n_out)
}

/// Full decode: extract, refine, then order the points by the mask's label.
/// The output carries the mask's confidence and `source = mask`.
pub fn decode_mask(
    m: &FlowAwareMask,
    spec: &BevGridSpec,
    cfg: &DecoderConfig,
) -> Result<Centerline> {
    let pts = extract_center_points(m, spec, cfg)?;
    if pts.len() < 2 {
        return Err(Error::DecodeFailure(format!(
            "extraction produced {} point(s), need at least 2",
            pts.len()
        )));
    }
    let refined = match refine_points(&pts, m.direction, cfg) {
        Ok(pl) => pl,
        Err(Error::DegenerateFit) => {
            return Err(Error::DecodeFailure(
                "degenerate fit: extracted points collapse along the dominant axis".into(),
            ))
        }
        Err(e) => return Err(e),
    };
    let ordered = sort_points_by_label(refined.points(), m.direction)?;
    Centerline::new(ordered, m.confidence, CenterlineSource::Mask)
}
