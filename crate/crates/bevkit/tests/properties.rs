//! Randomized invariant checks. Reference behavior comes from the brute
//! force oracles in `common`, never from the code under test.

mod common;

use bevkit::{
    arc_length_resample, average_precision, chamfer, decode_mask, discrete_frechet,
    encode_quad_direction, fuse_with, generate_synthetic_scene, height_bin_index,
    make_flow_aware_mask, pool_fast, pool_naive, scene_from_json, sort_points_by_label,
    synth_lifted_points, BevGridSpec, Centerline, CenterlineSource, ConfidenceRule, DecoderConfig,
    Error, GridCell, HeightBinConfig, Point3, Polyline3, Tensor32,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use common::{ap_oracle, chamfer_oracle, frechet_oracle};

fn pt3(range: f64) -> impl Strategy<Value = Point3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn point_seq(range: f64, max_len: usize) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec(pt3(range), 1..=max_len)
}

/// Polyline strictly monotone in x (after optional sign flip and axis swap,
/// so every quad direction is exercised). Strict monotone steps also
/// guarantee no repeated consecutive points.
fn monotone_polyline() -> impl Strategy<Value = Polyline3> {
    (
        -30.0f64..10.0,
        -15.0f64..15.0,
        prop::collection::vec((0.05f64..3.0, -2.0f64..2.0, -0.2f64..0.2), 2..=11),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(x0, y0, steps, flip, swap)| {
            let mut pts = vec![Point3::new(x0, y0, 0.0)];
            for (dx, dy, dz) in steps {
                let p = pts.last().unwrap();
                pts.push(Point3::new(p.x + dx, p.y + dy, p.z + dz));
            }
            if flip {
                for p in &mut pts {
                    p.x = -p.x;
                }
            }
            if swap {
                for p in &mut pts {
                    std::mem::swap(&mut p.x, &mut p.y);
                }
            }
            Polyline3::new(pts).unwrap()
        })
}

fn small_grid() -> BevGridSpec {
    BevGridSpec {
        rows: 40,
        cols: 28,
        cell_size: 0.5,
        x_min: -10.0,
        y_min: -7.0,
    }
}

proptest! {
    // Geometry ---------------------------------------------------------

    #[test]
    fn grid_round_trip_recovers_every_cell(
        rows in 1usize..40,
        cols in 1usize..40,
        cell_size in 0.1f64..2.0,
        x_min in -50.0f64..50.0,
        y_min in -50.0f64..50.0,
        row_frac in 0.0f64..1.0,
        col_frac in 0.0f64..1.0,
    ) {
        let g = BevGridSpec { rows, cols, cell_size, x_min, y_min };
        let cell = GridCell {
            row: ((rows as f64 * row_frac) as usize).min(rows - 1),
            col: ((cols as f64 * col_frac) as usize).min(cols - 1),
        };
        let center = g.grid_to_world(&cell).unwrap();
        prop_assert_eq!(g.world_to_grid(&center), Some(cell));
    }

    #[test]
    fn grid_bounds_are_half_open(
        rows in 1usize..40,
        cols in 1usize..40,
        cell_pow in 0u32..4,
        xi in -60i32..60,
        yi in -60i32..60,
    ) {
        // Power-of-two cells on aligned origins keep the arithmetic exact,
        // so the edge cases test the contract rather than rounding.
        let cell_size = 0.25 * f64::from(1u32 << cell_pow);
        let g = BevGridSpec {
            rows,
            cols,
            cell_size,
            x_min: f64::from(xi) * cell_size,
            y_min: f64::from(yi) * cell_size,
        };
        let origin = Point3::new(g.x_min, g.y_min, 0.0);
        prop_assert_eq!(g.world_to_grid(&origin), Some(GridCell { row: 0, col: 0 }));
        // The upper edges are excluded; just inside them is the last cell.
        let outside = Point3::new(g.x_max(), g.y_max(), 0.0);
        prop_assert_eq!(g.world_to_grid(&outside), None);
        let inside = Point3::new(
            g.x_max() - 1e-9 * cell_size,
            g.y_max() - 1e-9 * cell_size,
            0.0,
        );
        prop_assert_eq!(
            g.world_to_grid(&inside),
            Some(GridCell { row: rows - 1, col: cols - 1 })
        );
    }

    #[test]
    fn frechet_matches_coupling_enumeration(
        a in point_seq(10.0, 6),
        b in point_seq(10.0, 6),
    ) {
        let dp = discrete_frechet(&a, &b);
        let brute = frechet_oracle(&a, &b);
        prop_assert!((dp - brute).abs() <= 1e-12 * brute.max(1.0),
            "dp {dp} vs enumeration {brute}");
    }

    #[test]
    fn frechet_is_symmetric_and_reversal_invariant(
        a in point_seq(10.0, 12),
        b in point_seq(10.0, 12),
    ) {
        let d = discrete_frechet(&a, &b);
        prop_assert_eq!(d, discrete_frechet(&b, &a));
        let ar: Vec<Point3> = a.iter().rev().copied().collect();
        let br: Vec<Point3> = b.iter().rev().copied().collect();
        prop_assert!((d - discrete_frechet(&ar, &br)).abs() <= 1e-12 * d.max(1.0));
        // Endpoint pairs belong to every coupling, so they bound from below.
        let lower = a[0].dist(&b[0]).max(a[a.len() - 1].dist(&b[b.len() - 1]));
        prop_assert!(d >= lower - 1e-12);
        prop_assert_eq!(discrete_frechet(&a, &a), 0.0);
    }

    #[test]
    fn frechet_is_translation_invariant(
        a in point_seq(10.0, 8),
        b in point_seq(10.0, 8),
        t in pt3(50.0),
    ) {
        let shift = |pts: &[Point3]| -> Vec<Point3> {
            pts.iter().map(|p| Point3::new(p.x + t.x, p.y + t.y, p.z + t.z)).collect()
        };
        let d = discrete_frechet(&a, &b);
        let ds = discrete_frechet(&shift(&a), &shift(&b));
        prop_assert!((d - ds).abs() <= 1e-9 * d.max(1.0), "{d} vs {ds}");
    }

    #[test]
    fn chamfer_matches_definition_on_resampled_inputs(
        a in monotone_polyline(),
        b in monotone_polyline(),
        n in 4usize..30,
    ) {
        // Production resamples internally; hand the oracle the same points.
        let ra = arc_length_resample(&a, n).unwrap();
        let rb = arc_length_resample(&b, n).unwrap();
        let got = bevkit::geom::chamfer_with(a.points(), b.points(), n);
        let want = chamfer_oracle(ra.points(), rb.points());
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
        prop_assert!(chamfer(a.points(), a.points()) <= 1e-12);
    }

    #[test]
    fn resample_preserves_endpoints_count_and_support(
        pl in monotone_polyline(),
        n in 2usize..40,
    ) {
        let r = arc_length_resample(&pl, n).unwrap();
        prop_assert_eq!(r.len(), n);
        prop_assert!(r.first().dist(&pl.first()) <= 1e-12);
        prop_assert!(r.last().dist(&pl.last()) <= 1e-12);
        // Every output point lies on the input polyline.
        for p in r.points() {
            let on_segment = pl.points().windows(2).any(|w| {
                let (a, b) = (w[0], w[1]);
                let seg = a.dist(&b);
                (a.dist(p) + p.dist(&b) - seg).abs() <= 1e-9 * seg.max(1.0)
            });
            prop_assert!(on_segment, "resampled point off the source polyline");
        }
        // Equal arc spacing along the source: consecutive chords never exceed
        // the arc quantum.
        let quantum = pl.arc_length() / (n - 1) as f64;
        for w in r.points().windows(2) {
            prop_assert!(w[0].dist(&w[1]) <= quantum + 1e-9);
        }
    }

    // Direction labels --------------------------------------------------

    #[test]
    fn direction_flips_when_the_polyline_reverses(pl in monotone_polyline()) {
        let d = encode_quad_direction(&pl);
        prop_assert_eq!(encode_quad_direction(&pl.reversed()), d.opposite());
    }

    #[test]
    fn direction_label_recovers_point_order(
        pl in monotone_polyline(),
        seed in any::<u64>(),
    ) {
        let d = encode_quad_direction(&pl);
        let mut shuffled = pl.points().to_vec();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let restored = sort_points_by_label(&shuffled, d).unwrap();
        // The winning vote axis is strictly monotone for these inputs, so
        // the label pins down exactly the original traversal.
        prop_assert_eq!(restored.points(), pl.points());
    }

    // Rasterization ------------------------------------------------------

    #[test]
    fn rasterizer_matches_exhaustive_cell_scan(
        pl in monotone_polyline(),
        width in 0.6f64..6.0,
    ) {
        let g = small_grid();
        let fast = bevkit::raster::rasterize_centerline(&pl, &g, width).unwrap();
        let full = bevkit::raster::rasterize_centerline_exhaustive(&pl, &g, width).unwrap();
        prop_assert_eq!(fast.data(), full.data());
    }

    // Pooling -------------------------------------------------------------

    #[test]
    fn pool_fast_matches_naive_bitwise(
        n in 0usize..1500,
        channels in 1usize..6,
        seed in any::<u64>(),
        z_min in -8.0f64..0.0,
        bins in 1usize..6,
        bin_len in 0.5f64..3.0,
    ) {
        let cfg = HeightBinConfig {
            z_min,
            z_max: z_min + bins as f64 * bin_len,
            bin_len,
        };
        let g = BevGridSpec::default();
        let pts = synth_lifted_points(n, channels, seed);
        let naive = pool_naive(&pts, &g, &cfg).unwrap();
        let fast = pool_fast(&pts, &g, &cfg).unwrap();
        prop_assert_eq!(naive.data(), fast.data());

        // Pooling conserves in-range feature mass.
        let mut expected = 0.0f64;
        for i in 0..pts.len() {
            let p = pts.position(i);
            if g.world_to_grid(&p).is_some() && height_bin_index(p.z, &cfg).is_some() {
                expected += pts.feature(i).iter().map(|&f| f as f64).sum::<f64>();
            }
        }
        let got = naive.feature_sum();
        prop_assert!((got - expected).abs() <= 1e-4 * expected.abs().max(1.0),
            "pooled mass {got} vs in-range mass {expected}");
    }

    #[test]
    fn height_bins_partition_the_range(
        z_min in -8.0f64..0.0,
        bins in 1usize..8,
        bin_len in 0.5f64..3.0,
        frac in 0.0f64..1.0,
    ) {
        let cfg = HeightBinConfig {
            z_min,
            z_max: z_min + bins as f64 * bin_len,
            bin_len,
        };
        let z = z_min + frac * (cfg.z_max - z_min);
        if z < cfg.z_max {
            let idx = height_bin_index(z, &cfg).unwrap();
            prop_assert!(idx < bins);
            prop_assert!(z >= z_min + idx as f64 * bin_len);
            prop_assert!(z < z_min + (idx + 1) as f64 * bin_len + 1e-12);
        }
        prop_assert_eq!(height_bin_index(cfg.z_max, &cfg), None);
        prop_assert_eq!(height_bin_index(z_min - 1e-9, &cfg), None);
        prop_assert_eq!(height_bin_index(z_min, &cfg), Some(0));
    }

    // Serialization --------------------------------------------------------

    #[test]
    fn tensor_bytes_round_trip_bit_exact(
        shape in prop::collection::vec(1usize..6, 1..4),
        fill in any::<u32>(),
    ) {
        let n: usize = shape.iter().product();
        // Derive payload bits from the seed; includes denormals and NaNs.
        let data: Vec<f32> = (0..n)
            .map(|i| f32::from_bits(fill.wrapping_mul(i as u32 + 1).rotate_left(i as u32)))
            .collect();
        let t = Tensor32::from_data(shape.clone(), data.clone()).unwrap();
        let back = Tensor32::from_bytes(&t.to_bytes()).unwrap();
        prop_assert_eq!(back.shape(), shape.as_slice());
        let bits: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        let want: Vec<u32> = data.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(bits, want);
        prop_assert_eq!(back.checksum(), t.checksum());
    }

    #[test]
    fn scene_json_round_trip_is_lossless(
        seed in any::<u64>(),
        n_lanes in 1usize..8,
        density in 0.0f64..1.0,
    ) {
        let scene = generate_synthetic_scene(seed, n_lanes, density);
        let json = serde_json::to_string(&scene).unwrap();
        let back = scene_from_json(&json).unwrap();
        prop_assert_eq!(back, scene);
    }

    #[test]
    fn scene_rejects_single_field_corruption(
        seed in any::<u64>(),
        which in 0usize..5,
    ) {
        let scene = generate_synthetic_scene(seed, 4, 0.8);
        let mut v = serde_json::to_value(&scene).unwrap();
        match which {
            0 => { v["frame_id"] = serde_json::json!(""); }
            1 => { v.as_object_mut().unwrap().remove("frame_id"); }
            2 => {
                let (_, te) = v["gt_traffic_elements"].as_object_mut().unwrap()
                    .iter_mut().next().unwrap();
                te["confidence"] = serde_json::json!(2.0);
            }
            3 => {
                // Insert rather than mutate: some seeds carry no lt edges.
                let source = v["gt_centerlines"].as_object().unwrap()
                    .keys().next().unwrap().clone();
                v["gt_topology_lt"].as_array_mut().unwrap().push(serde_json::json!({
                    "source": source, "target": "no_such_te", "score": 1.0,
                }));
            }
            _ => {
                let (_, lane) = v["gt_centerlines"].as_object_mut().unwrap()
                    .iter_mut().next().unwrap();
                lane["polyline"] = serde_json::json!([[0.0, 0.0, 0.0]]);
            }
        }
        // Full load pipeline: parse, then cross-reference validation.
        let err = scene_from_json(&v.to_string())
            .and_then(|s| {
                s.validate()?;
                Ok(s)
            })
            .unwrap_err();
        match which {
            3 => prop_assert!(matches!(err, Error::DanglingId { .. }), "got {err}"),
            _ => prop_assert!(matches!(err, Error::Schema { .. }), "got {err}"),
        }
    }

    // Metrics ---------------------------------------------------------------

    #[test]
    fn average_precision_matches_pr_integration(
        ranked in prop::collection::vec((0.0f64..1.0, any::<bool>()), 0..12),
        n_gt in 0usize..10,
    ) {
        let got = average_precision(&ranked, n_gt);
        let want = ap_oracle(&ranked, n_gt);
        prop_assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }

    #[test]
    fn average_precision_never_decreases_when_a_hit_is_appended(
        ranked in prop::collection::vec((0.0f64..1.0, any::<bool>()), 0..10),
        n_gt in 1usize..10,
    ) {
        // Appending a lowest-confidence true positive adds recall without
        // disturbing earlier precisions.
        let base = average_precision(&ranked, n_gt);
        let mut more = ranked.clone();
        more.push((-1.0, true));
        prop_assert!(average_precision(&more, n_gt) >= base - 1e-12);
    }

    // Fusion ------------------------------------------------------------------

    #[test]
    fn fusion_averages_xy_and_keeps_bezier_height(
        mask_pl in monotone_polyline(),
        bez_shift in pt3(2.0),
        conf_m in 0.0f64..1.0,
        conf_b in 0.0f64..1.0,
    ) {
        let bez_pts: Vec<Point3> = mask_pl.points().iter()
            .map(|p| Point3::new(p.x + bez_shift.x, p.y + bez_shift.y, p.z + bez_shift.z))
            .collect();
        let mask = Centerline::new(mask_pl.clone(), conf_m, CenterlineSource::Mask).unwrap();
        let bez = Centerline::new(
            Polyline3::new(bez_pts.clone()).unwrap(),
            conf_b,
            CenterlineSource::Bezier,
        ).unwrap();

        let fused = fuse_with(&mask, &bez, ConfidenceRule::Mask).unwrap();
        for ((f, m), b) in fused.polyline.points().iter().zip(mask_pl.points()).zip(&bez_pts) {
            prop_assert!((f.x - (m.x + b.x) / 2.0).abs() <= 1e-12);
            prop_assert!((f.y - (m.y + b.y) / 2.0).abs() <= 1e-12);
            prop_assert_eq!(f.z, b.z);
            // The midpoint is never farther from any reference than the
            // worse of the two inputs (in the ground plane).
            let gt = Point3::new(m.x, m.y, 0.0);
            let to = |q: &Point3| ((q.x - gt.x).powi(2) + (q.y - gt.y).powi(2)).sqrt();
            prop_assert!(to(f) <= to(m).max(to(b)) + 1e-12);
        }
        prop_assert_eq!(fused.confidence, conf_m);
        prop_assert_eq!(
            fuse_with(&mask, &bez, ConfidenceRule::Max).unwrap().confidence,
            conf_m.max(conf_b)
        );
        prop_assert!(
            (fuse_with(&mask, &bez, ConfidenceRule::Mean).unwrap().confidence
                - (conf_m + conf_b) / 2.0).abs() <= 1e-12
        );
    }
}

fn dist_to_polyline_xy(p: &Point3, pl: &Polyline3) -> f64 {
    pl.points()
        .windows(2)
        .map(|w| {
            let (ax, ay) = (w[0].x, w[0].y);
            let (bx, by) = (w[1].x, w[1].y);
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((p.x - ax) * dx + (p.y - ay) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            ((p.x - ax - t * dx).powi(2) + (p.y - ay - t * dy).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Monotone lane guaranteed to fit the default grid: span 6..20 m starting
/// in [-20, 0), bounded lateral drift, all four orientations.
fn lane_in_default_grid() -> impl Strategy<Value = Polyline3> {
    (
        -20.0f64..0.0,
        -12.0f64..12.0,
        prop::collection::vec((1.0f64..2.0, -0.7f64..0.7), 6..=10),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(x0, y0, steps, flip, swap)| {
            let mut pts = vec![Point3::new(x0, y0, 0.0)];
            for (dx, dy) in steps {
                let p = pts.last().unwrap();
                pts.push(Point3::new(p.x + dx, (p.y + dy).clamp(-20.0, 20.0), 0.0));
            }
            if flip {
                for p in &mut pts {
                    p.x = -p.x;
                }
            }
            if swap {
                for p in &mut pts {
                    std::mem::swap(&mut p.x, &mut p.y);
                }
            }
            Polyline3::new(pts).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Smaller case count: each case rasterizes and decodes a full mask.
    #[test]
    fn decode_stays_on_the_rasterized_lane(pl in lane_in_default_grid()) {
        let g = BevGridSpec::default();
        let cfg = DecoderConfig::default();
        let mask = make_flow_aware_mask(&pl, &g, 4.0, 1.0).unwrap();
        let decoded = decode_mask(&mask, &g, &cfg).unwrap();
        prop_assert_eq!(decoded.polyline.len(), cfg.n_out);

        // Decoded points stay within the tube: half the mask width, one cell
        // of centroid quantization, and polynomial smoothing slack.
        let tube = 4.0 * g.cell_size / 2.0 + 2.0 * g.cell_size;
        for p in decoded.polyline.points() {
            let d = dist_to_polyline_xy(p, &pl);
            prop_assert!(d <= tube, "decoded point strayed {d:.3} m from the lane");
        }

        // Point order follows the direction label's sort axis.
        let d = mask.direction;
        let key = |p: &Point3| match d.sort_axis() {
            bevkit::Axis::X => p.x,
            bevkit::Axis::Y => p.y,
        };
        let sign = match d {
            bevkit::QuadDirection::Up | bevkit::QuadDirection::Left => 1.0,
            _ => -1.0,
        };
        for w in decoded.polyline.points().windows(2) {
            prop_assert!(sign * (key(&w[1]) - key(&w[0])) >= 0.0);
        }
    }
}
