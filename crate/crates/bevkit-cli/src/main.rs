use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use bevkit::{
    bench_pool_configs, bezier_sample, decode_mask, evaluate, fuse_resampled,
    generate_synthetic_scene, load_scene, load_tensor, make_flow_aware_mask, perturb_predictions,
    save_scene, save_tensor, synth_lifted_points, BevGridSpec, BezierCurve, Centerline,
    ConfidenceRule, DecoderConfig, EvalOptions, FlowAwareMask, HeightBinConfig, PerturbConfig,
    ProbMap, QuadDirection, SceneAnnotation, TABLE4_BIN_CONFIGS,
};

#[derive(Parser)]
#[command(
    name = "bevkit",
    version,
    about = "Lane-mask decoding, fusion, BEV pooling and topology metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a probability-mask tensor into an ordered centerline JSON
    Extract {
        /// Mask tensor file (rows x cols, BEVT format)
        #[arg(long)]
        mask: PathBuf,
        /// Flow label: up, down, left or right
        #[arg(long)]
        direction: QuadDirection,
        /// Foreground probability threshold
        #[arg(long, default_value_t = 0.95)]
        threshold: f64,
        /// Degree of the refinement polynomial
        #[arg(long, default_value_t = 3)]
        degree: usize,
        /// Point count of the decoded centerline
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Confidence attached to the decoded centerline
        #[arg(long, default_value_t = 1.0)]
        confidence: f64,
        /// Write the centerline here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse a mask centerline with a Bezier hypothesis point by point
    Fuse {
        /// Mask-decoded centerline JSON
        #[arg(long = "mask-line")]
        mask_line: PathBuf,
        /// Bezier hypothesis: control-point JSON or a sampled centerline JSON
        #[arg(long)]
        bezier: PathBuf,
        /// Fused confidence rule: mask, max or mean
        #[arg(long, default_value = "mask")]
        confidence_rule: String,
        /// Write the fused centerline here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a prediction directory against a ground-truth directory
    Evaluate {
        /// Directory of scene JSON files providing the ground-truth half
        #[arg(long)]
        gt: PathBuf,
        /// Directory of scene JSON files providing the prediction half
        #[arg(long)]
        pred: PathBuf,
        /// Topology edges scoring at or below this are discarded
        #[arg(long, default_value_t = 0.5)]
        score_threshold: f64,
        /// Remap edge scores (+1 above 0.05) before the threshold filter
        #[arg(long)]
        manipulate: bool,
        /// Write the report JSON here as well as to stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic scene files, optionally perturbing predictions
    Simulate {
        /// Seed of the first scene; later scenes use consecutive seeds
        #[arg(long)]
        seed: u64,
        /// Ground-truth lanes per scene
        #[arg(long)]
        lanes: usize,
        /// Output directory (created if missing)
        #[arg(long)]
        out: PathBuf,
        /// Perturbation config JSON; its seed advances per scene
        #[arg(long)]
        perturb: Option<PathBuf>,
        /// Number of scenes to generate
        #[arg(long, default_value_t = 1)]
        scenes: usize,
        /// Topology edge keep probability in [0, 1]
        #[arg(long, default_value_t = 0.7)]
        density: f64,
    },
    /// Render a centerline JSON into a probability-mask tensor
    Rasterize {
        /// Centerline JSON
        #[arg(long)]
        line: PathBuf,
        /// Output tensor path (BEVT format)
        #[arg(long)]
        out: PathBuf,
        /// Mask width in cells
        #[arg(long, default_value_t = 4.0)]
        width: f64,
    },
    /// Time both pooling kernels and report throughput JSON
    PoolBench {
        /// Height-bin config "(z_min,z_max,bin_len)"; repeatable. All five
        /// published configs when omitted
        #[arg(long)]
        config: Vec<HeightBinConfig>,
        /// Number of synthetic lifted points
        #[arg(long)]
        points: usize,
        /// Feature channels per point
        #[arg(long, default_value_t = 32)]
        channels: usize,
        /// Timed repetitions per kernel; best time wins
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Seed of the synthetic point cloud
        #[arg(long, default_value_t = 17)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract {
            mask,
            direction,
            threshold,
            degree,
            points,
            confidence,
            out,
        } => cmd_extract(
            &mask,
            direction,
            threshold,
            degree,
            points,
            confidence,
            out.as_deref(),
        ),
        Command::Fuse {
            mask_line,
            bezier,
            confidence_rule,
            out,
        } => cmd_fuse(&mask_line, &bezier, &confidence_rule, out.as_deref()),
        Command::Evaluate {
            gt,
            pred,
            score_threshold,
            manipulate,
            out,
        } => cmd_evaluate(&gt, &pred, score_threshold, manipulate, out.as_deref()),
        Command::Simulate {
            seed,
            lanes,
            out,
            perturb,
            scenes,
            density,
        } => cmd_simulate(seed, lanes, &out, perturb.as_deref(), scenes, density),
        Command::Rasterize { line, out, width } => cmd_rasterize(&line, &out, width),
        Command::PoolBench {
            config,
            points,
            channels,
            reps,
            seed,
        } => cmd_pool_bench(&config, points, channels, reps, seed),
    }
}

fn emit_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {} {}", what, path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {} {}", what, path.display()))
}

fn cmd_extract(
    mask: &Path,
    direction: QuadDirection,
    threshold: f64,
    degree: usize,
    points: usize,
    confidence: f64,
    out: Option<&Path>,
) -> Result<()> {
    let tensor =
        load_tensor(mask).with_context(|| format!("reading mask tensor {}", mask.display()))?;
    let prob = ProbMap::from_tensor(&tensor).context("interpreting tensor as a probability map")?;
    let flow = FlowAwareMask {
        prob,
        direction,
        confidence,
    };
    let cfg = DecoderConfig {
        threshold_p: threshold,
        poly_degree: degree,
        n_out: points,
        ..DecoderConfig::default()
    };
    let line = decode_mask(&flow, &BevGridSpec::default(), &cfg).context("decoding mask")?;
    emit_json(&line, out)
}

fn cmd_fuse(mask_line: &Path, bezier: &Path, rule: &str, out: Option<&Path>) -> Result<()> {
    let rule = match rule {
        "mask" => ConfidenceRule::Mask,
        "max" => ConfidenceRule::Max,
        "mean" => ConfidenceRule::Mean,
        other => bail!("unknown confidence rule {other:?} (expected mask, max or mean)"),
    };
    let mask_cl: Centerline = read_json(mask_line, "mask centerline")?;
    let n = mask_cl.polyline.len();
    let text = fs::read_to_string(bezier)
        .with_context(|| format!("reading bezier {}", bezier.display()))?;
    // Either four control points or an already-sampled centerline.
    let bez_cl = match serde_json::from_str::<BezierCurve>(&text) {
        Ok(curve) => bezier_sample(&curve, n).context("sampling bezier curve")?,
        Err(_) => serde_json::from_str::<Centerline>(&text).with_context(|| {
            format!(
                "parsing {} as a bezier curve or centerline",
                bezier.display()
            )
        })?,
    };
    let fused = fuse_resampled(&mask_cl, &bez_cl, n, rule).context("fusing")?;
    emit_json(&fused, out)
}

/// Scene files named alike in the two directories pair up: ground truth
/// comes from the `--gt` file, predictions from the `--pred` file.
fn merged_scenes(gt_dir: &Path, pred_dir: &Path) -> Result<Vec<SceneAnnotation>> {
    let mut names: Vec<String> = Vec::new();
    let entries = fs::read_dir(gt_dir)
        .with_context(|| format!("reading ground-truth directory {}", gt_dir.display()))?;
    for entry in entries {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".json") {
            names.push(name);
        }
    }
    names.sort();
    if names.is_empty() {
        bail!("no scene files (*.json) in {}", gt_dir.display());
    }
    let mut scenes = Vec::with_capacity(names.len());
    for name in &names {
        let gt = load_scene(gt_dir.join(name))
            .with_context(|| format!("loading ground-truth scene {name}"))?;
        let pred = load_scene(pred_dir.join(name))
            .with_context(|| format!("loading prediction scene {name}"))?;
        if gt.frame_id != pred.frame_id {
            bail!(
                "frame mismatch in {name}: ground truth is {:?}, prediction is {:?}",
                gt.frame_id,
                pred.frame_id
            );
        }
        scenes.push(SceneAnnotation {
            frame_id: gt.frame_id,
            gt_centerlines: gt.gt_centerlines,
            gt_topology_ll: gt.gt_topology_ll,
            gt_traffic_elements: gt.gt_traffic_elements,
            gt_topology_lt: gt.gt_topology_lt,
            pred_centerlines: pred.pred_centerlines,
            pred_topology_ll: pred.pred_topology_ll,
            pred_traffic_elements: pred.pred_traffic_elements,
            pred_topology_lt: pred.pred_topology_lt,
        });
    }
    Ok(scenes)
}

fn cmd_evaluate(
    gt: &Path,
    pred: &Path,
    score_threshold: f64,
    manipulate: bool,
    out: Option<&Path>,
) -> Result<()> {
    let scenes = merged_scenes(gt, pred)?;
    let options = EvalOptions {
        score_threshold: Some(score_threshold),
        manipulate,
    };
    let report = evaluate(&scenes, &options).context("evaluating")?;
    eprintln!("{} scene(s)", scenes.len());
    eprint!("{}", report.rendered());
    if out.is_some() {
        emit_json(&report, out)?;
    }
    emit_json(&report, None)
}

fn cmd_simulate(
    seed: u64,
    lanes: usize,
    out: &Path,
    perturb: Option<&Path>,
    scenes: usize,
    density: f64,
) -> Result<()> {
    if scenes == 0 {
        bail!("--scenes must be at least 1");
    }
    let base_cfg: Option<PerturbConfig> = match perturb {
        Some(path) => {
            let cfg: PerturbConfig = read_json(path, "perturbation config")?;
            cfg.validate().context("perturbation config")?;
            Some(cfg)
        }
        None => None,
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for k in 0..scenes {
        let mut scene = generate_synthetic_scene(seed.wrapping_add(k as u64), lanes, density);
        if let Some(cfg) = base_cfg {
            let mut step = cfg;
            step.seed = cfg.seed.wrapping_add(k as u64);
            scene = perturb_predictions(&scene, &step).context("perturbing")?;
        }
        let path = out.join(format!("{}.json", scene.frame_id));
        save_scene(&scene, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!("wrote {scenes} scene(s) to {}", out.display());
    Ok(())
}

fn cmd_rasterize(line: &Path, out: &Path, width: f64) -> Result<()> {
    let cl: Centerline = read_json(line, "centerline")?;
    let flow = make_flow_aware_mask(&cl.polyline, &BevGridSpec::default(), width, cl.confidence)
        .context("rasterizing")?;
    save_tensor(&flow.prob.to_tensor(), out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{}",
        serde_json::json!({
            "direction": flow.direction,
            "confidence": flow.confidence,
            "tensor": out.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_pool_bench(
    configs: &[HeightBinConfig],
    points: usize,
    channels: usize,
    reps: usize,
    seed: u64,
) -> Result<()> {
    let configs: Vec<HeightBinConfig> = if configs.is_empty() {
        TABLE4_BIN_CONFIGS.to_vec()
    } else {
        configs.to_vec()
    };
    let pts = synth_lifted_points(points, channels, seed);
    let rows = bench_pool_configs(&pts, &BevGridSpec::default(), &configs, reps)
        .context("benchmarking")?;
    for row in &rows {
        eprintln!(
            "{:>14} {:>6} {:>12.0} pts/s ({:.4} s)",
            row.config, row.impl_name, row.points_per_sec, row.seconds
        );
    }
    emit_json(&rows, None)
}
