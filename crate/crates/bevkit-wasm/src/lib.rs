//! Browser bindings for three interactive demos: mask round-tripping,
//! mask/Bezier fusion, and the metric stack on perturbed scenes.
//!
//! Every export takes plain numbers and returns a JSON string so the page
//! needs no generated glue types; failures come back as `{"error": "..."}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wasm_bindgen::prelude::wasm_bindgen;

use bevkit::{
    bezier_fit, bezier_sample, decode_mask, discrete_frechet, evaluate, fuse_resampled,
    generate_synthetic_scene, make_flow_aware_mask, perturb_predictions, BevGridSpec, Centerline,
    ConfidenceRule, DecoderConfig, EvalOptions, PerturbConfig, Point3, Polyline3, Result,
    DEFAULT_N_OUT,
};

fn xy(points: &[Point3]) -> Vec<[f64; 2]> {
    points.iter().map(|p| [p.x, p.y]).collect()
}

fn grid_json(g: &BevGridSpec) -> serde_json::Value {
    serde_json::json!({
        "rows": g.rows,
        "cols": g.cols,
        "cell_size": g.cell_size,
        "x_min": g.x_min,
        "y_min": g.y_min,
    })
}

fn pick_lane(seed: u32, lane_index: u32) -> Centerline {
    let scene = generate_synthetic_scene(seed as u64, 6, 0.5);
    let lanes: Vec<Centerline> = scene.gt_centerlines.into_values().collect();
    lanes[lane_index as usize % lanes.len()].clone()
}

fn jitter(pl: &Polyline3, sigma: f64, rng: &mut ChaCha8Rng) -> Result<Polyline3> {
    if sigma == 0.0 {
        return Ok(pl.clone());
    }
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    Polyline3::new(
        pl.points()
            .iter()
            .map(|p| Point3::new(p.x + noise.sample(rng), p.y + noise.sample(rng), p.z))
            .collect(),
    )
}

fn render(result: Result<serde_json::Value>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

fn decode_demo_inner(seed: u32, lane_index: u32, width_cells: f64) -> Result<serde_json::Value> {
    let g = BevGridSpec::default();
    let lane = pick_lane(seed, lane_index);
    let mask = make_flow_aware_mask(&lane.polyline, &g, width_cells, 1.0)?;
    let decoded = decode_mask(&mask, &g, &DecoderConfig::default())?;
    let mut cells = Vec::new();
    for row in 0..g.rows {
        for col in 0..g.cols {
            if mask.prob.at(row, col) > 0.0 {
                cells.push([row, col]);
            }
        }
    }
    Ok(serde_json::json!({
        "grid": grid_json(&g),
        "direction": mask.direction,
        "cells": cells,
        "gt": xy(lane.polyline.points()),
        "decoded": xy(decoded.polyline.points()),
        "frechet": discrete_frechet(decoded.polyline.points(), lane.polyline.points()),
    }))
}

/// Rasterize one synthetic lane and decode it back; returns the mask cells
/// plus both polylines and their discrete Frechet distance.
#[wasm_bindgen]
pub fn decode_demo(seed: u32, lane_index: u32, width_cells: f64) -> String {
    render(decode_demo_inner(seed, lane_index, width_cells))
}

fn fuse_demo_inner(seed: u32, mask_sigma: f64, bezier_sigma: f64) -> Result<serde_json::Value> {
    let g = BevGridSpec::default();
    let lane = pick_lane(seed, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64 ^ 0x00f1_00f2);

    let mask_src = jitter(&lane.polyline, mask_sigma, &mut rng)?;
    let mask = make_flow_aware_mask(&mask_src, &g, 4.0, 0.9)?;
    let mask_pred = decode_mask(&mask, &g, &DecoderConfig::default())?;

    let bez_src = jitter(&lane.polyline, bezier_sigma, &mut rng)?;
    let bez_pred = bezier_sample(&bezier_fit(&bez_src)?, DEFAULT_N_OUT)?;

    let fused = fuse_resampled(&mask_pred, &bez_pred, DEFAULT_N_OUT, ConfidenceRule::Mask)?;
    let against_gt =
        |cl: &Centerline| discrete_frechet(cl.polyline.points(), lane.polyline.points());
    Ok(serde_json::json!({
        "gt": xy(lane.polyline.points()),
        "mask": xy(mask_pred.polyline.points()),
        "bezier": xy(bez_pred.polyline.points()),
        "fused": xy(fused.polyline.points()),
        "frechet": {
            "mask": against_gt(&mask_pred),
            "bezier": against_gt(&bez_pred),
            "fused": against_gt(&fused),
        },
    }))
}

/// Corrupt one lane two independent ways, decode one copy through a mask and
/// fit the other with a Bezier, then fuse; returns all four polylines with
/// per-branch Frechet error against the clean lane.
#[wasm_bindgen]
pub fn fuse_demo(seed: u32, mask_sigma: f64, bezier_sigma: f64) -> String {
    render(fuse_demo_inner(seed, mask_sigma, bezier_sigma))
}

fn metrics_demo_inner(
    seed: u32,
    n_scenes: u32,
    xy_sigma: f64,
    drop_rate: f64,
    edge_noise: f64,
    manipulate: bool,
) -> Result<serde_json::Value> {
    let n = n_scenes.clamp(1, 64);
    let mut scenes = Vec::with_capacity(n as usize);
    for k in 0..n as u64 {
        let scene = generate_synthetic_scene(seed as u64 + k, 6, 0.8);
        let cfg = PerturbConfig {
            xy_noise_sigma: xy_sigma,
            drop_rate,
            edge_score_noise: edge_noise,
            seed: (seed as u64).wrapping_mul(1_000_003).wrapping_add(k),
            ..PerturbConfig::default()
        };
        scenes.push(perturb_predictions(&scene, &cfg)?);
    }
    let options = EvalOptions {
        score_threshold: Some(0.5),
        manipulate,
    };
    let report = evaluate(&scenes, &options)?;
    Ok(serde_json::json!({
        "scenes": n,
        "report": report,
    }))
}

/// Generate scenes, perturb their predictions, and run the full metric
/// stack; returns the six-score report.
#[wasm_bindgen]
pub fn metrics_demo(
    seed: u32,
    n_scenes: u32,
    xy_sigma: f64,
    drop_rate: f64,
    edge_noise: f64,
    manipulate: bool,
) -> String {
    render(metrics_demo_inner(
        seed, n_scenes, xy_sigma, drop_rate, edge_noise, manipulate,
    ))
}
