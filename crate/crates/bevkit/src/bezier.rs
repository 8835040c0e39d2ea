//! Cubic Bezier curves, the `Centerline` container, and mask/Bezier fusion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{arc_length_resample, solve_linear, Point3, Polyline3};

/// Default number of points instances are resampled to before fusion.
pub const DEFAULT_N_OUT: usize = 11;

/// Which head a centerline came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterlineSource {
    Mask,
    Bezier,
    Fused,
    GroundTruth,
}

/// An ordered 3D lane centerline with a confidence score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CenterlineRaw")]
pub struct Centerline {
    pub polyline: Polyline3,
    pub confidence: f64,
    pub source: CenterlineSource,
}

#[derive(Deserialize)]
struct CenterlineRaw {
    polyline: Polyline3,
    confidence: f64,
    source: CenterlineSource,
}

impl TryFrom<CenterlineRaw> for Centerline {
    type Error = Error;

    fn try_from(raw: CenterlineRaw) -> Result<Self> {
        Centerline::new(raw.polyline, raw.confidence, raw.source)
    }
}

impl Centerline {
    pub fn new(polyline: Polyline3, confidence: f64, source: CenterlineSource) -> Result<Self> {
        if !confidence.is_finite() || !(0.0..=1.0).contains(&confidence) {
            return Err(Error::contract(format!(
                "confidence must lie in [0, 1], got {confidence}"
            )));
        }
        Ok(Centerline {
            polyline,
            confidence,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.polyline.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same centerline resampled to `n` points equally spaced in arc length.
    pub fn resampled(&self, n: usize) -> Result<Centerline> {
        Ok(Centerline {
            polyline: arc_length_resample(&self.polyline, n)?,
            confidence: self.confidence,
            source: self.source,
        })
    }
}

/// A cubic Bezier curve: exactly four control points plus a confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BezierCurveRaw")]
pub struct BezierCurve {
    pub control_points: [Point3; 4],
    pub confidence: f64,
}

#[derive(Deserialize)]
struct BezierCurveRaw {
    control_points: [Point3; 4],
    confidence: f64,
}

impl TryFrom<BezierCurveRaw> for BezierCurve {
    type Error = Error;

    fn try_from(raw: BezierCurveRaw) -> Result<Self> {
        BezierCurve::new(raw.control_points, raw.confidence)
    }
}

impl BezierCurve {
    pub fn new(control_points: [Point3; 4], confidence: f64) -> Result<Self> {
        if control_points.iter().any(|p| !p.is_finite()) {
            return Err(Error::contract("control points must be finite"));
        }
        if !confidence.is_finite() || !(0.0..=1.0).contains(&confidence) {
            return Err(Error::contract(format!(
                "confidence must lie in [0, 1], got {confidence}"
            )));
        }
        Ok(BezierCurve {
            control_points,
            confidence,
        })
    }
}

/// Evaluates the cubic Bernstein combination at `t`.
pub fn bezier_eval(c: &BezierCurve, t: f64) -> Result<Point3> {
    if !t.is_finite() || !(0.0..=1.0).contains(&t) {
        return Err(Error::contract(format!("t must lie in [0, 1], got {t}")));
    }
    let s = 1.0 - t;
    let w = [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t];
    let mut out = Point3::new(0.0, 0.0, 0.0);
    for (wi, p) in w.iter().zip(&c.control_points) {
        out.x += wi * p.x;
        out.y += wi * p.y;
        out.z += wi * p.z;
    }
    Ok(out)
}

/// Samples `n >= 2` points at uniform parameters t = 0, 1/(n-1), ..., 1.
pub fn bezier_sample(c: &BezierCurve, n: usize) -> Result<Centerline> {
    if n < 2 {
        return Err(Error::contract(format!("need n >= 2 samples, got {n}")));
    }
    let pts: Vec<Point3> = (0..n)
        .map(|i| bezier_eval(c, i as f64 / (n - 1) as f64))
        .collect::<Result<_>>()?;
    Centerline::new(Polyline3::new(pts)?, c.confidence, CenterlineSource::Bezier)
}

pub fn chord_length_params(pts: &[Point3]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(&w[1]));
    }
    let total = *cum.last().unwrap();
    cum.iter().map(|&c| c / total).collect()
}

/// Least-squares cubic fit with chord-length parameterization. Endpoints are
/// pinned to the input endpoints; only the two interior controls are solved.
pub fn bezier_fit(pl: &Polyline3) -> Result<BezierCurve> {
    let pts = pl.points();
    bezier_fit_with_params(pts, &chord_length_params(pts))
}

/// As [`bezier_fit`] but with caller-supplied curve parameters per point.
/// When the parameters equal the generating curve's own, recovery is exact.
pub fn bezier_fit_with_params(pts: &[Point3], params: &[f64]) -> Result<BezierCurve> {
    if pts.len() < 4 {
        return Err(Error::contract(format!(
            "cubic fit needs at least 4 points, got {}",
            pts.len()
        )));
    }
    if params.len() != pts.len() {
        return Err(Error::contract(format!(
            "{} points but {} parameters",
            pts.len(),
            params.len()
        )));
    }
    if params
        .iter()
        .any(|t| !t.is_finite() || !(0.0..=1.0).contains(t))
    {
        return Err(Error::contract("parameters must lie in [0, 1]"));
    }
    let p0 = pts[0];
    let p3 = pts[pts.len() - 1];
    // Residual r_i = p_i - B0(t_i) p0 - B3(t_i) p3 = B1(t_i) P1 + B2(t_i) P2.
    // Normal equations of the n x 2 system, shared across coordinates.
    let mut a11 = 0.0;
    let mut a12 = 0.0;
    let mut a22 = 0.0;
    let mut rhs1 = [0.0f64; 3];
    let mut rhs2 = [0.0f64; 3];
    for (p, &t) in pts.iter().zip(params) {
        let s = 1.0 - t;
        let b0 = s * s * s;
        let b1 = 3.0 * s * s * t;
        let b2 = 3.0 * s * t * t;
        let b3 = t * t * t;
        let r = [
            p.x - b0 * p0.x - b3 * p3.x,
            p.y - b0 * p0.y - b3 * p3.y,
            p.z - b0 * p0.z - b3 * p3.z,
        ];
        a11 += b1 * b1;
        a12 += b1 * b2;
        a22 += b2 * b2;
        for k in 0..3 {
            rhs1[k] += b1 * r[k];
            rhs2[k] += b2 * r[k];
        }
    }
    let mut interior = [[0.0f64; 3]; 2];
    for k in 0..3 {
        let mut a = [vec![a11, a12], vec![a12, a22]];
        let mut sol = [rhs1[k], rhs2[k]];
        solve_linear(&mut a, &mut sol)?;
        interior[0][k] = sol[0];
        interior[1][k] = sol[1];
    }
    BezierCurve::new(
        [
            p0,
            Point3::new(interior[0][0], interior[0][1], interior[0][2]),
            Point3::new(interior[1][0], interior[1][1], interior[1][2]),
            p3,
        ],
        1.0,
    )
}

/// Returns `other` reversed when that brings it into index correspondence
/// with `reference`: reversal happens iff the summed pointwise distance to
/// `reference` is strictly smaller for the reversed order.
pub fn align_orientation(reference: &Centerline, other: &Centerline) -> Result<Centerline> {
    let r = reference.polyline.points();
    let o = other.polyline.points();
    if r.len() != o.len() {
        return Err(Error::contract(format!(
            "orientation alignment needs equal lengths, got {} and {}",
            r.len(),
            o.len()
        )));
    }
    let n = r.len();
    let mut fwd = 0.0;
    let mut rev = 0.0;
    for i in 0..n {
        fwd += r[i].dist(&o[i]);
        rev += r[i].dist(&o[n - 1 - i]);
    }
    if fwd > rev {
        Ok(Centerline {
            polyline: other.polyline.reversed(),
            confidence: other.confidence,
            source: other.source,
        })
    } else {
        Ok(other.clone())
    }
}

/// How the fused confidence is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceRule {
    /// Take the mask head's confidence (the mask query drives both heads).
    #[default]
    Mask,
    Max,
    Mean,
}

/// Pointwise average of the two heads in x and y; z is taken from the Bezier
/// head, which is the only one that predicts height.
pub fn fuse(mask_cl: &Centerline, bez_cl: &Centerline) -> Result<Centerline> {
    fuse_with(mask_cl, bez_cl, ConfidenceRule::Mask)
}

pub fn fuse_with(
    mask_cl: &Centerline,
    bez_cl: &Centerline,
    rule: ConfidenceRule,
) -> Result<Centerline> {
    let m = mask_cl.polyline.points();
    let b = bez_cl.polyline.points();
    if m.len() != b.len() {
        return Err(Error::contract(format!(
            "fusion needs equal lengths, got {} and {}",
            m.len(),
            b.len()
        )));
    }
    let pts: Vec<Point3> = m
        .iter()
        .zip(b)
        .map(|(mi, bi)| Point3::new((mi.x + bi.x) / 2.0, (mi.y + bi.y) / 2.0, bi.z))
        .collect();
    let confidence = match rule {
        ConfidenceRule::Mask => mask_cl.confidence,
        ConfidenceRule::Max => mask_cl.confidence.max(bez_cl.confidence),
        ConfidenceRule::Mean => (mask_cl.confidence + bez_cl.confidence) / 2.0,
    };
    Centerline::new(Polyline3::new(pts)?, confidence, CenterlineSource::Fused)
}

/// Full fusion pipeline: resample both inputs to `n` points, orient the
/// Bezier centerline against the mask one, then average.
pub fn fuse_resampled(
    mask_cl: &Centerline,
    bez_cl: &Centerline,
    n: usize,
    rule: ConfidenceRule,
) -> Result<Centerline> {
    let m = mask_cl.resampled(n)?;
    let b = align_orientation(&m, &bez_cl.resampled(n)?)?;
    fuse_with(&m, &b, rule)
}
