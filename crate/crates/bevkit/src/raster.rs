//! BEV probability maps and centerline rasterization.

use serde::{Deserialize, Serialize};

use crate::direction::{encode_quad_direction, QuadDirection};
use crate::error::{Error, Result};
use crate::geom::{BevGridSpec, Polyline3};
use crate::tensor::Tensor32;

/// Default stroke width for rasterized centerlines, in cell widths.
pub const DEFAULT_MASK_WIDTH_CELLS: f64 = 4.0;

/// A rows x cols grid of per-cell probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMap {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl ProbMap {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ProbMap {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::contract(format!(
                "{rows}x{cols} map needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        let map = ProbMap { rows, cols, data };
        map.validate()?;
        Ok(map)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        debug_assert!(row < self.rows && col < self.cols);
        debug_assert!((0.0..=1.0).contains(&value));
        self.data[row * self.cols + col] = value;
    }

    /// Checks every value is finite and within `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for (i, &v) in self.data.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::contract(format!(
                    "probability out of range at flat index {i}: {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_tensor(&self) -> Tensor32 {
        Tensor32::from_data(vec![self.rows, self.cols], self.data.clone())
            .expect("shape matches by construction")
    }

    pub fn from_tensor(tensor: &Tensor32) -> Result<Self> {
        match tensor.shape() {
            [rows, cols] => ProbMap::from_data(*rows, *cols, tensor.data().to_vec()),
            other => Err(Error::contract(format!(
                "expected a 2-d tensor, got shape {other:?}"
            ))),
        }
    }
}

/// An instance mask annotated with the flow direction of the lane it covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowAwareMask {
    pub prob: ProbMap,
    pub direction: QuadDirection,
    pub confidence: f64,
}

/// Distance from a point to one segment of a lane tube. The projection
/// parameter is clamped only toward interior vertices: free lane ends are
/// not capped, so the tube support ends exactly with the lane and a decoded
/// centerline spans the same extent as its source. Zero-length segments
/// (points that differ in z alone) fall back to point distance.
#[allow(clippy::too_many_arguments)]
fn tube_dist_xy(
    px: f64,
    py: f64,
    ax: f64,
    ay: f64,
    bx: f64,
    by: f64,
    free_start: bool,
    free_end: bool,
) -> f64 {
    let dx = bx - ax;
    let dy = by - ay;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return ((px - ax).powi(2) + (py - ay).powi(2)).sqrt();
    }
    let t = ((px - ax) * dx + (py - ay) * dy) / len2;
    if (t < 0.0 && free_start) || (t > 1.0 && free_end) {
        return f64::INFINITY;
    }
    let t = t.clamp(0.0, 1.0);
    let cx = ax + t * dx;
    let cy = ay + t * dy;
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

fn min_tube_dist_xy(px: f64, py: f64, line: &Polyline3) -> f64 {
    let pts = line.points();
    let last = pts.len() - 2;
    let mut best = f64::INFINITY;
    for (i, seg) in pts.windows(2).enumerate() {
        let d = tube_dist_xy(
            px,
            py,
            seg[0].x,
            seg[0].y,
            seg[1].x,
            seg[1].y,
            i == 0,
            i == last,
        );
        if d < best {
            best = d;
        }
    }
    best
}

/// Rasterizes a centerline into a binary probability map: a cell is set to
/// 1.0 exactly when its center lies within `width_cells / 2` cell widths of
/// the ground-projected polyline, measured within each segment's extent.
/// Interior joints are rounded; the two free lane ends are not capped, so
/// the mask support ends with the lane.
///
/// Cells are visited through per-segment bounding boxes for speed; the
/// distance test itself is exact, so output is independent of segment order
/// and identical to [`rasterize_centerline_exhaustive`].
pub fn rasterize_centerline(
    line: &Polyline3,
    spec: &BevGridSpec,
    width_cells: f64,
) -> Result<ProbMap> {
    if !width_cells.is_finite() || width_cells <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "mask width must be positive and finite, got {width_cells}"
        )));
    }
    let radius = width_cells * spec.cell_size / 2.0;
    let mut map = ProbMap::zeros(spec.rows, spec.cols);
    let pts = line.points();
    let last = pts.len() - 2;
    for (i, seg) in pts.windows(2).enumerate() {
        let (ax, ay) = (seg[0].x, seg[0].y);
        let (bx, by) = (seg[1].x, seg[1].y);
        // Conservative cell range around the segment; exact test below.
        let lo_x = ax.min(bx) - radius;
        let hi_x = ax.max(bx) + radius;
        let lo_y = ay.min(by) - radius;
        let hi_y = ay.max(by) + radius;
        let r_lo = (((lo_x - spec.x_min) / spec.cell_size).floor() as isize - 1).max(0) as usize;
        let r_hi = ((((hi_x - spec.x_min) / spec.cell_size).ceil() as isize + 1).max(0) as usize)
            .min(spec.rows);
        let c_lo = (((lo_y - spec.y_min) / spec.cell_size).floor() as isize - 1).max(0) as usize;
        let c_hi = ((((hi_y - spec.y_min) / spec.cell_size).ceil() as isize + 1).max(0) as usize)
            .min(spec.cols);
        for row in r_lo..r_hi {
            let cx = spec.x_min + (row as f64 + 0.5) * spec.cell_size;
            for col in c_lo..c_hi {
                let cy = spec.y_min + (col as f64 + 0.5) * spec.cell_size;
                if tube_dist_xy(cx, cy, ax, ay, bx, by, i == 0, i == last) <= radius {
                    map.set(row, col, 1.0);
                }
            }
        }
    }
    Ok(map)
}

/// Reference rasterizer that tests every cell against the whole polyline.
/// Kept as the differential-testing oracle for [`rasterize_centerline`].
pub fn rasterize_centerline_exhaustive(
    line: &Polyline3,
    spec: &BevGridSpec,
    width_cells: f64,
) -> Result<ProbMap> {
    if !width_cells.is_finite() || width_cells <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "mask width must be positive and finite, got {width_cells}"
        )));
    }
    let radius = width_cells * spec.cell_size / 2.0;
    let mut map = ProbMap::zeros(spec.rows, spec.cols);
    for row in 0..spec.rows {
        let cx = spec.x_min + (row as f64 + 0.5) * spec.cell_size;
        for col in 0..spec.cols {
            let cy = spec.y_min + (col as f64 + 0.5) * spec.cell_size;
            if min_tube_dist_xy(cx, cy, line) <= radius {
                map.set(row, col, 1.0);
            }
        }
    }
    Ok(map)
}

/// Rasterizes a centerline and tags the mask with its voted flow direction.
pub fn make_flow_aware_mask(
    line: &Polyline3,
    spec: &BevGridSpec,
    width_cells: f64,
    confidence: f64,
) -> Result<FlowAwareMask> {
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::InvalidConfig(format!(
            "confidence must lie in [0, 1], got {confidence}"
        )));
    }
    Ok(FlowAwareMask {
        prob: rasterize_centerline(line, spec, width_cells)?,
        direction: encode_quad_direction(line),
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;

    fn line(points: &[[f64; 3]]) -> Polyline3 {
        Polyline3::new(
            points
                .iter()
                .map(|p| Point3::new(p[0], p[1], p[2]))
                .collect(),
        )
        .unwrap()
    }

    fn grid() -> BevGridSpec {
        BevGridSpec::default()
    }

    #[test]
    fn straight_lane_paints_a_band_of_expected_width() {
        // Lane along +x at y = 0. Cell centers in y: ..., -0.25, 0.25, ...
        // Radius 1.0 m covers centers with |y| <= 1.0: y in {-0.75, -0.25,
        // 0.25, 0.75}, i.e. 4 columns.
        let l = line(&[[-10.0, 0.0, 0.0], [10.0, 0.0, 0.0]]);
        let map = rasterize_centerline(&l, &grid(), DEFAULT_MASK_WIDTH_CELLS).unwrap();
        let mid_row = 100; // x in [0, 0.5)
        let lit: Vec<usize> = (0..map.cols())
            .filter(|&c| map.at(mid_row, c) > 0.0)
            .collect();
        assert_eq!(lit, vec![50, 51, 52, 53]);
    }

    #[test]
    fn matches_exhaustive_reference() {
        let l = line(&[[-20.0, -10.0, 0.0], [0.0, 2.0, 0.5], [15.0, 20.0, 1.0]]);
        let fast = rasterize_centerline(&l, &grid(), DEFAULT_MASK_WIDTH_CELLS).unwrap();
        let slow = rasterize_centerline_exhaustive(&l, &grid(), DEFAULT_MASK_WIDTH_CELLS).unwrap();
        assert_eq!(fast, slow);
    }

    #[test]
    fn lane_outside_grid_paints_nothing() {
        let l = line(&[[200.0, 0.0, 0.0], [220.0, 0.0, 0.0]]);
        let map = rasterize_centerline(&l, &grid(), DEFAULT_MASK_WIDTH_CELLS).unwrap();
        assert!(map.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_segment_collapses_to_point_without_panic() {
        // Differs only in z; ground projection is a point.
        let l = line(&[[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let map = rasterize_centerline(&l, &grid(), DEFAULT_MASK_WIDTH_CELLS).unwrap();
        assert!(map.data().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn flow_aware_mask_carries_direction_and_confidence() {
        let l = line(&[[-5.0, 0.0, 0.0], [5.0, 1.0, 0.0]]);
        let m = make_flow_aware_mask(&l, &grid(), DEFAULT_MASK_WIDTH_CELLS, 0.9).unwrap();
        assert_eq!(m.direction, QuadDirection::Up);
        assert_eq!(m.confidence, 0.9);
        assert_eq!(
            m.prob,
            rasterize_centerline(&l, &grid(), DEFAULT_MASK_WIDTH_CELLS).unwrap()
        );
    }

    #[test]
    fn bad_width_and_confidence_are_rejected() {
        let l = line(&[[-5.0, 0.0, 0.0], [5.0, 0.0, 0.0]]);
        assert!(rasterize_centerline(&l, &grid(), 0.0).is_err());
        assert!(rasterize_centerline(&l, &grid(), f64::NAN).is_err());
        assert!(make_flow_aware_mask(&l, &grid(), 4.0, 1.5).is_err());
    }

    #[test]
    fn prob_map_round_trips_through_tensor() {
        let l = line(&[[-5.0, -3.0, 0.0], [8.0, 4.0, 0.0]]);
        let map = rasterize_centerline(&l, &grid(), DEFAULT_MASK_WIDTH_CELLS).unwrap();
        let back = ProbMap::from_tensor(&map.to_tensor()).unwrap();
        assert_eq!(map, back);
    }

    #[test]
    fn prob_map_rejects_out_of_range_values() {
        assert!(ProbMap::from_data(1, 2, vec![0.5, 1.5]).is_err());
        assert!(ProbMap::from_data(1, 2, vec![0.5, f32::NAN]).is_err());
        assert!(ProbMap::from_data(1, 1, vec![0.5, 0.5]).is_err());
    }
}
