//! Reference implementations shared by the property and acceptance suites.
//!
//! Each oracle is deliberately brute force and structured differently from
//! the production code it checks, so agreement is evidence rather than
//! repetition.

// Not every test binary exercises every oracle.
#![allow(dead_code)]

use bevkit::Point3;

/// Discrete Frechet distance by explicit enumeration of every monotone
/// coupling. A coupling starts at (0, 0), ends at (n-1, m-1), and each step
/// advances one sequence index, the other, or both. Exponential; keep inputs
/// at six points or fewer.
pub fn frechet_oracle(a: &[Point3], b: &[Point3]) -> f64 {
    fn walk(a: &[Point3], b: &[Point3], i: usize, j: usize) -> f64 {
        let here = a[i].dist(&b[j]);
        if i == a.len() - 1 && j == b.len() - 1 {
            return here;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() {
            best = best.min(walk(a, b, i + 1, j));
        }
        if j + 1 < b.len() {
            best = best.min(walk(a, b, i, j + 1));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(walk(a, b, i + 1, j + 1));
        }
        here.max(best)
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    walk(a, b, 0, 0)
}

/// All-point interpolated average precision by direct precision/recall
/// integration: for every true-positive rank, scan forward for the best
/// precision at equal-or-lower confidence, i.e. the interpolated precision;
/// each such step contributes 1/n_gt of recall.
pub fn ap_oracle(ranked: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if ranked.is_empty() { 1.0 } else { 0.0 };
    }
    let mut sorted = ranked.to_vec();
    sorted.sort_by(|x, y| y.0.total_cmp(&x.0));
    let n = sorted.len();
    let precision_at = |k: usize| {
        let tp = sorted[..=k].iter().filter(|(_, t)| *t).count();
        tp as f64 / (k + 1) as f64
    };
    let mut area = 0.0;
    for (k, &(_, is_tp)) in sorted.iter().enumerate() {
        if !is_tp {
            continue;
        }
        let mut best = 0.0f64;
        for j in k..n {
            best = best.max(precision_at(j));
        }
        area += best / n_gt as f64;
    }
    area
}

/// Chamfer distance by the definition: mean of the two directed mean
/// nearest-neighbor distances.
pub fn chamfer_oracle(a: &[Point3], b: &[Point3]) -> f64 {
    let directed = |from: &[Point3], to: &[Point3]| {
        from.iter()
            .map(|p| to.iter().map(|q| p.dist(q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / from.len() as f64
    };
    0.5 * (directed(a, b) + directed(b, a))
}
