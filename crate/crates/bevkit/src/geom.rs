//! Coordinate conventions, BEV grid mapping, polyline resampling and fitting,
//! and the two polyline distances (discrete Frechet, Chamfer) every other
//! module consumes.
//!
//! Conventions: +x is vehicle forward, +y is vehicle left, +z is up. Grid rows
//! index x, columns index y, and cells are half-open `[min, min + cell_size)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of points each polyline is resampled to before the Chamfer distance.
pub const CHAMFER_RESAMPLE_POINTS: usize = 11;

/// A point in the vehicle frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Euclidean distance in 3D.
    pub fn dist(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Euclidean distance of the x-y projections.
    pub fn dist_xy(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// An ordered 3D point sequence; the point order carries the direction of
/// travel.
///
/// Invariants: at least two points, all coordinates finite, no two
/// consecutive points exactly identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point3>", into = "Vec<Point3>")]
pub struct Polyline3 {
    points: Vec<Point3>,
}

impl Polyline3 {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPolyline(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidPolyline(format!(
                    "non-finite coordinate at index {i}"
                )));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(Error::InvalidPolyline(format!(
                    "consecutive identical points at indices {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(Polyline3 { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> Point3 {
        self.points[0]
    }

    pub fn last(&self) -> Point3 {
        *self.points.last().unwrap()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Polyline3 { points }
    }

    /// Total length of the x-y-z path.
    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(&w[1])).sum()
    }

    /// Copy with every z coordinate set to zero.
    ///
    /// Fails only if flattening collapses consecutive points (points that
    /// differed in z alone).
    pub fn projected_to_ground(&self) -> Result<Self> {
        Polyline3::new(
            self.points
                .iter()
                .map(|p| Point3::new(p.x, p.y, 0.0))
                .collect(),
        )
    }
}

impl TryFrom<Vec<Point3>> for Polyline3 {
    type Error = Error;

    fn try_from(points: Vec<Point3>) -> Result<Self> {
        Polyline3::new(points)
    }
}

impl From<Polyline3> for Vec<Point3> {
    fn from(pl: Polyline3) -> Self {
        pl.points
    }
}

/// One of the two horizontal vehicle-frame axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    /// Splits a point into (dominant-axis coordinate, other coordinate).
    pub fn split(&self, p: &Point3) -> (f64, f64) {
        match self {
            Axis::X => (p.x, p.y),
            Axis::Y => (p.y, p.x),
        }
    }

    /// Inverse of [`Axis::split`], with z = 0.
    pub fn join(&self, dominant: f64, other: f64) -> Point3 {
        match self {
            Axis::X => Point3::new(dominant, other, 0.0),
            Axis::Y => Point3::new(other, dominant, 0.0),
        }
    }
}

/// World-to-grid mapping for the BEV plane.
///
/// Rows follow x, columns follow y. The default covers x in [-50, 50) and
/// y in [-26, 26) at half-meter cells (200 x 104).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BevGridSpec {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub x_min: f64,
    pub y_min: f64,
}

impl Default for BevGridSpec {
    fn default() -> Self {
        BevGridSpec {
            rows: 200,
            cols: 104,
            cell_size: 0.5,
            x_min: -50.0,
            y_min: -26.0,
        }
    }
}

/// A cell address: `row` along x, `col` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
}

impl BevGridSpec {
    pub fn x_max(&self) -> f64 {
        self.x_min + self.rows as f64 * self.cell_size
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.cols as f64 * self.cell_size
    }

    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Maps a world point to the cell containing it, or `None` outside the
    /// grid. Intervals are half-open, so the upper edges are excluded.
    pub fn world_to_grid(&self, p: &Point3) -> Option<GridCell> {
        let row = ((p.x - self.x_min) / self.cell_size).floor();
        let col = ((p.y - self.y_min) / self.cell_size).floor();
        if row < 0.0 || col < 0.0 || row >= self.rows as f64 || col >= self.cols as f64 {
            return None;
        }
        Some(GridCell {
            row: row as usize,
            col: col as usize,
        })
    }

    /// World coordinates of a cell center, z = 0.
    pub fn grid_to_world(&self, c: &GridCell) -> Result<Point3> {
        if c.row >= self.rows || c.col >= self.cols {
            return Err(Error::contract(format!(
                "cell ({}, {}) outside {}x{} grid",
                c.row, c.col, self.rows, self.cols
            )));
        }
        Ok(Point3::new(
            self.x_min + (c.row as f64 + 0.5) * self.cell_size,
            self.y_min + (c.col as f64 + 0.5) * self.cell_size,
            0.0,
        ))
    }

    /// Center coordinates for fractional cell indices. Used by the decoder,
    /// where the column (or row) expectation is sub-cell.
    pub fn fractional_to_world(&self, row: f64, col: f64) -> Point3 {
        Point3::new(
            self.x_min + (row + 0.5) * self.cell_size,
            self.y_min + (col + 0.5) * self.cell_size,
            0.0,
        )
    }
}

/// Resamples a polyline to exactly `n` points, equally spaced in cumulative
/// arc length, interpolating linearly along the input segments. Endpoints are
/// preserved exactly.
pub fn arc_length_resample(pl: &Polyline3, n: usize) -> Result<Polyline3> {
    if n < 2 {
        return Err(Error::contract(format!(
            "resample count must be >= 2, got {n}"
        )));
    }
    let pts = pl.points();
    let mut cum = Vec::with_capacity(pts.len());
    cum.push(0.0);
    for w in pts.windows(2) {
        cum.push(cum.last().unwrap() + w[0].dist(&w[1]));
    }
    let total = *cum.last().unwrap();

    let mut out = Vec::with_capacity(n);
    out.push(pts[0]);
    let mut seg = 0;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cum[seg + 1] - cum[seg];
        let t = if seg_len > 0.0 {
            (target - cum[seg]) / seg_len
        } else {
            0.0
        };
        let a = pts[seg];
        let b = pts[seg + 1];
        out.push(Point3::new(
            a.x + t * (b.x - a.x),
            a.y + t * (b.y - a.y),
            a.z + t * (b.z - a.z),
        ));
    }
    out.push(*pts.last().unwrap());
    Polyline3::new(out)
}

/// Discrete Frechet distance between two point sequences, computed by dynamic
/// programming over the coupling lattice.
pub fn discrete_frechet(a: &[Point3], b: &[Point3]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty point sequence");
    let n = b.len();
    // One DP row at a time: cur[j] = coupling cost up to (i, j).
    let mut prev = vec![0.0f64; n];
    let mut cur = vec![0.0f64; n];
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            let d = pa.dist(pb);
            let reach = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                (_, _) => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
            cur[j] = reach;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n - 1]
}

/// Symmetric Chamfer distance: half the sum of both directed mean
/// nearest-neighbor distances. Inputs with at least two points are first
/// resampled to [`CHAMFER_RESAMPLE_POINTS`] equally spaced points.
pub fn chamfer(a: &[Point3], b: &[Point3]) -> f64 {
    chamfer_with(a, b, CHAMFER_RESAMPLE_POINTS)
}

/// [`chamfer`] with an explicit resampling count.
pub fn chamfer_with(a: &[Point3], b: &[Point3], n: usize) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty point sequence");
    let resample = |pts: &[Point3]| -> Vec<Point3> {
        if pts.len() < 2 {
            return pts.to_vec();
        }
        match Polyline3::new(pts.to_vec()).and_then(|pl| arc_length_resample(&pl, n)) {
            Ok(pl) => pl.points().to_vec(),
            // Degenerate sequences (repeated points) are used as-is.
            Err(_) => pts.to_vec(),
        }
    };
    let ra = resample(a);
    let rb = resample(b);
    let directed = |from: &[Point3], to: &[Point3]| -> f64 {
        from.iter()
            .map(|p| to.iter().map(|q| p.dist(q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / from.len() as f64
    };
    0.5 * (directed(&ra, &rb) + directed(&rb, &ra))
}

/// Least-squares polynomial mapping the dominant-axis coordinate to the
/// other horizontal coordinate.
#[derive(Debug, Clone)]
pub struct PolyFit {
    pub dominant: Axis,
    /// Coefficients in increasing power order: `coeffs[k]` multiplies `u^k`.
    pub coeffs: Vec<f64>,
}

impl PolyFit {
    /// Evaluates the fitted polynomial at dominant-axis coordinate `u`.
    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// Full point on the fitted curve (z = 0).
    pub fn point_at(&self, u: f64) -> Point3 {
        self.dominant.join(u, self.eval(u))
    }
}

/// Fits a polynomial of degree `min(degree, points - 1)` through the x-y
/// projections of `points`, parameterized by the `dominant` axis.
pub fn polyfit(points: &[Point3], dominant: Axis, degree: usize) -> Result<PolyFit> {
    if points.len() < 2 {
        return Err(Error::contract(format!(
            "polyfit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if degree < 1 {
        return Err(Error::contract("polyfit degree must be >= 1".to_string()));
    }
    let samples: Vec<(f64, f64)> = points.iter().map(|p| dominant.split(p)).collect();
    let (u_min, u_max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (u, _)| {
            (lo.min(*u), hi.max(*u))
        });
    if u_max - u_min <= 0.0 {
        return Err(Error::DegenerateFit);
    }
    let deg = degree.min(points.len() - 1);
    let coeffs = lstsq_poly(&samples, deg)?;
    Ok(PolyFit { dominant, coeffs })
}

/// Solves the normal equations of the Vandermonde least-squares system.
fn lstsq_poly(samples: &[(f64, f64)], degree: usize) -> Result<Vec<f64>> {
    let m = degree + 1;
    let mut ata = vec![vec![0.0f64; m]; m];
    let mut atv = vec![0.0f64; m];
    for &(u, v) in samples {
        let mut powers = Vec::with_capacity(m);
        let mut p = 1.0;
        for _ in 0..m {
            powers.push(p);
            p *= u;
        }
        for i in 0..m {
            atv[i] += powers[i] * v;
            for j in 0..m {
                ata[i][j] += powers[i] * powers[j];
            }
        }
    }
    solve_linear(&mut ata, &mut atv)?;
    Ok(atv)
}

/// In-place Gaussian elimination with partial pivoting; solution lands in `b`.
pub(crate) fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::DegenerateFit);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let (upper, lower) = a.split_at_mut(row);
            let (src, dst) = (&upper[col], &mut lower[0]);
            let f = dst[col] / src[col];
            for (d, s) in dst[col..n].iter_mut().zip(&src[col..n]) {
                *d -= f * s;
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * b[k];
        }
        b[col] = s / a[col][col];
    }
    Ok(())
}
