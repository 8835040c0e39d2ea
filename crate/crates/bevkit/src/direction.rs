//! Quad-direction labels: a coarse flow encoding for centerline instances.
//!
//! A label is assigned by majority voting over consecutive point
//! displacements, and is later used to re-order decoded point sets. The
//! vehicle-frame mapping is fixed: +x maps to `Up`, +y maps to `Left`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Axis, Point3, Polyline3};

/// Coarse flow direction of a centerline instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadDirection {
    Up,
    Down,
    Left,
    Right,
}

impl QuadDirection {
    /// Label obtained by traversing the same geometry backwards.
    pub fn opposite(&self) -> QuadDirection {
        match self {
            QuadDirection::Up => QuadDirection::Down,
            QuadDirection::Down => QuadDirection::Up,
            QuadDirection::Left => QuadDirection::Right,
            QuadDirection::Right => QuadDirection::Left,
        }
    }

    /// Axis along which points are ordered for this label.
    pub fn sort_axis(&self) -> Axis {
        match self {
            QuadDirection::Up | QuadDirection::Down => Axis::X,
            QuadDirection::Left | QuadDirection::Right => Axis::Y,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            QuadDirection::Up => "up",
            QuadDirection::Down => "down",
            QuadDirection::Left => "left",
            QuadDirection::Right => "right",
        }
    }
}

impl std::str::FromStr for QuadDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "up" => Ok(QuadDirection::Up),
            "down" => Ok(QuadDirection::Down),
            "left" => Ok(QuadDirection::Left),
            "right" => Ok(QuadDirection::Right),
            other => Err(Error::contract(format!(
                "unknown direction label {other:?} (expected up|down|left|right)"
            ))),
        }
    }
}

impl std::fmt::Display for QuadDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Assigns a quad-direction label by majority voting over consecutive point
/// pairs.
///
/// Each pair votes independently per axis: a positive x step votes `Up`, a
/// negative one `Down`; a positive y step votes `Left`, a negative one
/// `Right`. Zero steps cast no vote. If the two axes' top vote counts tie,
/// the total start-to-end displacement decides: `|dx| >= |dy|` picks the
/// vertical pair, otherwise the horizontal one. A vote tie inside the
/// winning axis falls back to the sign of the total displacement on that
/// axis (non-negative picks `Up` / `Left`).
pub fn encode_quad_direction(pl: &Polyline3) -> QuadDirection {
    let pts = pl.points();
    let (mut up, mut down, mut left, mut right) = (0usize, 0usize, 0usize, 0usize);
    for w in pts.windows(2) {
        let dx = w[1].x - w[0].x;
        let dy = w[1].y - w[0].y;
        if dx > 0.0 {
            up += 1;
        } else if dx < 0.0 {
            down += 1;
        }
        if dy > 0.0 {
            left += 1;
        } else if dy < 0.0 {
            right += 1;
        }
    }
    let total_dx = pts[pts.len() - 1].x - pts[0].x;
    let total_dy = pts[pts.len() - 1].y - pts[0].y;

    let vertical_top = up.max(down);
    let horizontal_top = left.max(right);
    let vertical_wins = match vertical_top.cmp(&horizontal_top) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => total_dx.abs() >= total_dy.abs(),
    };
    if vertical_wins {
        match up.cmp(&down) {
            std::cmp::Ordering::Greater => QuadDirection::Up,
            std::cmp::Ordering::Less => QuadDirection::Down,
            std::cmp::Ordering::Equal => {
                if total_dx >= 0.0 {
                    QuadDirection::Up
                } else {
                    QuadDirection::Down
                }
            }
        }
    } else {
        match left.cmp(&right) {
            std::cmp::Ordering::Greater => QuadDirection::Left,
            std::cmp::Ordering::Less => QuadDirection::Right,
            std::cmp::Ordering::Equal => {
                if total_dy >= 0.0 {
                    QuadDirection::Left
                } else {
                    QuadDirection::Right
                }
            }
        }
    }
}

/// Orders an unordered point set according to a quad-direction label.
///
/// `Up` sorts ascending in x, `Down` descending in x, `Left` ascending in y,
/// `Right` descending in y. The sort is stable, so equal keys keep their
/// input order.
pub fn sort_points_by_label(points: &[Point3], d: QuadDirection) -> Result<Polyline3> {
    if points.len() < 2 {
        return Err(Error::contract(format!(
            "sorting needs at least 2 points, got {}",
            points.len()
        )));
    }
    let mut sorted = points.to_vec();
    match d {
        QuadDirection::Up => sorted.sort_by(|a, b| a.x.total_cmp(&b.x)),
        QuadDirection::Down => sorted.sort_by(|a, b| b.x.total_cmp(&a.x)),
        QuadDirection::Left => sorted.sort_by(|a, b| a.y.total_cmp(&b.y)),
        QuadDirection::Right => sorted.sort_by(|a, b| b.y.total_cmp(&a.y)),
    }
    Polyline3::new(sorted)
}
