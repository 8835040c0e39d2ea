//! Flow-aware lane-mask encoding and decoding, Bezier fusion, multi-bin BEV
//! voxel pooling, and the centerline/topology metric stack, exercised on
//! synthetic scenes.
//!
//! The crate is organized around a fixed BEV grid ([`BevGridSpec`], 200 x 104
//! half-meter cells). Lanes are [`Polyline3`] instances carried by
//! [`Centerline`]; their rasterized form is a [`FlowAwareMask`] whose
//! probability map decodes back to a polyline via per-row or per-column
//! weighted centroids ([`decode_mask`]). Parametric lane hypotheses are cubic
//! [`BezierCurve`]s that fuse with mask decodes point by point ([`fuse`]).
//! Camera features lift into the grid through [`lift_points`] and pool into a
//! [`BevTensor`] with either pooling kernel. Scenes ([`SceneAnnotation`])
//! evaluate into an [`EvalReport`] with detection, topology, and combined
//! scores.

pub mod bezier;
pub mod decode;
pub mod direction;
pub mod error;
pub mod geom;
pub mod metrics;
mod par;
pub mod raster;
pub mod scene;
pub mod synth;
pub mod tensor;
pub mod voxel;

pub use bezier::{
    align_orientation, bezier_eval, bezier_fit, bezier_fit_with_params, bezier_sample,
    chord_length_params, fuse, fuse_resampled, fuse_with, BezierCurve, Centerline,
    CenterlineSource, ConfidenceRule, DEFAULT_N_OUT,
};
pub use decode::{decode_mask, extract_center_points, refine_points, DecoderConfig, ScoredPoint};
pub use direction::{encode_quad_direction, sort_points_by_label, QuadDirection};
pub use error::{Error, Result};
pub use geom::{
    arc_length_resample, chamfer, discrete_frechet, polyfit, Axis, BevGridSpec, GridCell, Point3,
    PolyFit, Polyline3, CHAMFER_RESAMPLE_POINTS,
};
pub use metrics::{
    average_precision, box_iou, det_l, det_l_ch, det_t, evaluate, manipulate_scores,
    match_instances, match_traffic_elements, ols, top_score, top_vertex_aps, DistanceKernel,
    EvalOptions, EvalReport, MatchPair, MatchResult, TopologyEdge, TopologyEdges, TrafficElement,
    DET_L_CH_THRESHOLDS, DET_L_THRESHOLDS, DET_T_IOU, N_ATTRIBUTE_CLASSES, TOP_MATCH_FRECHET,
};
pub use par::{effective_threads, THREADS_ENV};
pub use raster::{
    make_flow_aware_mask, rasterize_centerline, FlowAwareMask, ProbMap, DEFAULT_MASK_WIDTH_CELLS,
};
pub use scene::{load_scene, save_scene, scene_from_json, SceneAnnotation};
pub use synth::{generate_synthetic_scene, perturb_predictions, PerturbConfig};
pub use tensor::{load_tensor, save_tensor, Tensor32};
pub use voxel::{
    bench_pool, bench_pool_configs, height_bin_index, lift_points, pool_fast,
    pool_fast_with_threads, pool_naive, synth_lifted_points, BenchRow, BevTensor, CameraRig,
    HeightBinConfig, LiftedPoints, TABLE4_BIN_CONFIGS,
};
