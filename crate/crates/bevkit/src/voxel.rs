//! Multi-height-bin voxel pooling: lift camera features into 3D, splat them
//! onto a BEV grid split into height bins, concatenating bins channel-wise.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{BevGridSpec, Point3};
use crate::par::effective_threads;
use crate::tensor::Tensor32;

/// Height-bin layout: the pooled range `[z_min, z_max)` split into bins of
/// `bin_len` meters. The range must be an integer number of bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightBinConfig {
    pub z_min: f64,
    pub z_max: f64,
    pub bin_len: f64,
}

/// The five published height-bin configurations; the last is the default.
pub const TABLE4_BIN_CONFIGS: [HeightBinConfig; 5] = [
    HeightBinConfig {
        z_min: -5.0,
        z_max: 3.0,
        bin_len: 8.0,
    },
    HeightBinConfig {
        z_min: -5.0,
        z_max: 3.0,
        bin_len: 2.0,
    },
    HeightBinConfig {
        z_min: -5.0,
        z_max: 3.0,
        bin_len: 1.0,
    },
    HeightBinConfig {
        z_min: -5.0,
        z_max: 5.0,
        bin_len: 1.0,
    },
    HeightBinConfig {
        z_min: -10.0,
        z_max: 10.0,
        bin_len: 1.0,
    },
];

impl Default for HeightBinConfig {
    fn default() -> Self {
        TABLE4_BIN_CONFIGS[4]
    }
}

impl HeightBinConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.z_min.is_finite() || !self.z_max.is_finite() || self.z_max <= self.z_min {
            return Err(Error::InvalidConfig(format!(
                "need z_max > z_min, got [{}, {})",
                self.z_min, self.z_max
            )));
        }
        if !self.bin_len.is_finite() || self.bin_len <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bin_len must be positive, got {}",
                self.bin_len
            )));
        }
        let b = (self.z_max - self.z_min) / self.bin_len;
        if (b - b.round()).abs() > 1e-9 || b.round() < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "range {} not an integer multiple of bin_len {}",
                self.z_max - self.z_min,
                self.bin_len
            )));
        }
        Ok(())
    }

    /// Number of bins B. Valid configs only.
    pub fn n_bins(&self) -> usize {
        ((self.z_max - self.z_min) / self.bin_len).round() as usize
    }
}

impl std::fmt::Display for HeightBinConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.z_min, self.z_max, self.bin_len)
    }
}

impl std::str::FromStr for HeightBinConfig {
    type Err = Error;

    /// Parses `"(z_min,z_max,bin_len)"`, parentheses optional.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "expected (z_min,z_max,bin_len), got {s:?}"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad number {p:?} in {s:?}")))
            })
            .collect::<Result<_>>()?;
        let cfg = HeightBinConfig {
            z_min: nums[0],
            z_max: nums[1],
            bin_len: nums[2],
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Bin index of height `z`, or `None` outside `[z_min, z_max)`.
pub fn height_bin_index(z: f64, h: &HeightBinConfig) -> Option<usize> {
    if !(z >= h.z_min && z < h.z_max) {
        return None;
    }
    // z < z_max guarantees the quotient is < B mathematically; the min guards
    // the floating-point edge just below z_max.
    Some((((z - h.z_min) / h.bin_len).floor() as usize).min(h.n_bins() - 1))
}

/// One camera's inputs to lifting: per-pixel features, a depth distribution,
/// and the camera-to-vehicle pose.
#[derive(Debug, Clone)]
pub struct CameraRig {
    /// `[C, H, W]` image feature map.
    pub feature: Tensor32,
    /// `[N_d, H, W]` per-pixel depth distribution, nonnegative, per-pixel sum
    /// at most 1 (+1e-5 slack).
    pub depth_dist: Tensor32,
    /// `N_d` strictly increasing depths, meters.
    pub depth_bin_centers: Vec<f64>,
    pub intrinsics: [[f64; 3]; 3],
    /// Camera-to-vehicle rotation.
    pub rotation: [[f64; 3]; 3],
    /// Camera-to-vehicle translation, meters.
    pub translation: [f64; 3],
}

struct RigDims {
    channels: usize,
    height: usize,
    width: usize,
    n_depth: usize,
}

impl CameraRig {
    fn validated_dims(&self) -> Result<RigDims> {
        let (c, h, w) = match self.feature.shape() {
            [c, h, w] => (*c, *h, *w),
            s => {
                return Err(Error::InvalidConfig(format!(
                    "feature must be [C, H, W], got {s:?}"
                )))
            }
        };
        let (nd, dh, dw) = match self.depth_dist.shape() {
            [n, h2, w2] => (*n, *h2, *w2),
            s => {
                return Err(Error::InvalidConfig(format!(
                    "depth_dist must be [N_d, H, W], got {s:?}"
                )))
            }
        };
        if (dh, dw) != (h, w) {
            return Err(Error::InvalidConfig(format!(
                "depth_dist is {dh}x{dw} but feature is {h}x{w}"
            )));
        }
        if self.depth_bin_centers.len() != nd {
            return Err(Error::InvalidConfig(format!(
                "{} depth bins but {} centers",
                nd,
                self.depth_bin_centers.len()
            )));
        }
        if !self
            .depth_bin_centers
            .windows(2)
            .all(|w| w[0] < w[1] && w[0].is_finite() && w[1].is_finite())
            || self.depth_bin_centers.iter().any(|d| !d.is_finite())
        {
            return Err(Error::InvalidConfig(
                "depth_bin_centers must be finite and strictly increasing".into(),
            ));
        }
        if self
            .depth_dist
            .data()
            .iter()
            .any(|&v| v < 0.0 || !v.is_finite())
        {
            return Err(Error::InvalidConfig(
                "depth_dist must be nonnegative".into(),
            ));
        }
        for v in 0..h {
            for u in 0..w {
                let mut s = 0.0f64;
                for j in 0..nd {
                    s += self.depth_dist.at(&[j, v, u]) as f64;
                }
                if s > 1.0 + 1e-5 {
                    return Err(Error::InvalidConfig(format!(
                        "depth distribution at pixel ({u}, {v}) sums to {s}"
                    )));
                }
            }
        }
        Ok(RigDims {
            channels: c,
            height: h,
            width: w,
            n_depth: nd,
        })
    }
}

/// A sequence of lifted 3D points in structure-of-arrays layout: one
/// C-channel feature row per point, depth weight already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoints {
    channels: usize,
    positions: Vec<Point3>,
    features: Vec<f32>,
}

impl LiftedPoints {
    pub fn new(channels: usize) -> Self {
        LiftedPoints {
            channels,
            positions: Vec::new(),
            features: Vec::new(),
        }
    }

    pub fn from_parts(channels: usize, positions: Vec<Point3>, features: Vec<f32>) -> Result<Self> {
        if positions.len() * channels != features.len() {
            return Err(Error::contract(format!(
                "{} points x {} channels != {} feature values",
                positions.len(),
                channels,
                features.len()
            )));
        }
        if positions.iter().any(|p| !p.is_finite()) || features.iter().any(|f| !f.is_finite()) {
            return Err(Error::contract("lifted points must be finite"));
        }
        Ok(LiftedPoints {
            channels,
            positions,
            features,
        })
    }

    pub fn push(&mut self, position: Point3, feature: &[f32]) {
        debug_assert_eq!(feature.len(), self.channels);
        self.positions.push(position);
        self.features.extend_from_slice(feature);
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn position(&self, i: usize) -> Point3 {
        self.positions[i]
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    /// All feature rows, concatenated in point order.
    pub fn features(&self) -> &[f32] {
        &self.features
    }
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut inv = [[0.0; 3]; 3];
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
    Some(inv)
}

fn mat3_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Lifts every (pixel, depth bin) pair into a vehicle-frame 3D point with a
/// depth-weighted copy of the pixel's feature vector.
///
/// Pixel centers follow the (u + 0.5, v + 0.5) convention. The 3D point is
/// `rotation * (intrinsics^-1 * (u+0.5, v+0.5, 1) * d_j) + translation`.
pub fn lift_points(cam: &CameraRig) -> Result<LiftedPoints> {
    let dims = cam.validated_dims()?;
    let k_inv = invert3(&cam.intrinsics)
        .ok_or_else(|| Error::InvalidConfig("intrinsics matrix is singular".into()))?;
    let mut out = LiftedPoints {
        channels: dims.channels,
        positions: Vec::with_capacity(dims.height * dims.width * dims.n_depth),
        features: Vec::with_capacity(dims.height * dims.width * dims.n_depth * dims.channels),
    };
    let mut pixel_feature = vec![0.0f32; dims.channels];
    for v in 0..dims.height {
        for u in 0..dims.width {
            let ray = mat3_vec(&k_inv, [u as f64 + 0.5, v as f64 + 0.5, 1.0]);
            for (c, slot) in pixel_feature.iter_mut().enumerate() {
                *slot = cam.feature.at(&[c, v, u]);
            }
            for (j, &d) in cam.depth_bin_centers.iter().enumerate() {
                let cam_pt = [ray[0] * d, ray[1] * d, ray[2] * d];
                let r = mat3_vec(&cam.rotation, cam_pt);
                let p = Point3::new(
                    r[0] + cam.translation[0],
                    r[1] + cam.translation[1],
                    r[2] + cam.translation[2],
                );
                let w = cam.depth_dist.at(&[j, v, u]);
                out.positions.push(p);
                out.features.extend(pixel_feature.iter().map(|&f| w * f));
            }
        }
    }
    Ok(out)
}

/// Pooled BEV features: `bins * channels_per_bin` channel planes of
/// `rows x cols`, bin-major (bin `b` owns channels `[b*C, (b+1)*C)`).
#[derive(Debug, Clone, PartialEq)]
pub struct BevTensor {
    bins: usize,
    channels_per_bin: usize,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl BevTensor {
    pub fn zeros(bins: usize, channels_per_bin: usize, rows: usize, cols: usize) -> Self {
        BevTensor {
            bins,
            channels_per_bin,
            rows,
            cols,
            data: vec![0.0; bins * channels_per_bin * rows * cols],
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels_per_bin(&self) -> usize {
        self.channels_per_bin
    }

    pub fn channels(&self) -> usize {
        self.bins * self.channels_per_bin
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

    pub fn at(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.rows + row) * self.cols + col]
    }

    /// The contiguous channel block of one height bin.
    pub fn bin_block(&self, bin: usize) -> &[f32] {
        let plane = self.rows * self.cols;
        let block = self.channels_per_bin * plane;
        &self.data[bin * block..(bin + 1) * block]
    }

    /// Total feature mass, accumulated in f64.
    pub fn feature_sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn to_tensor(&self) -> Tensor32 {
        Tensor32::from_data(
            vec![self.channels(), self.rows, self.cols],
            self.data.clone(),
        )
        .expect("shape matches by construction")
    }
}

fn pool_prepare(pts: &LiftedPoints, h: &HeightBinConfig) -> Result<(usize, usize)> {
    h.validate()?;
    if pts.channels == 0 {
        return Err(Error::contract("lifted points need at least 1 channel"));
    }
    Ok((h.n_bins(), pts.channels))
}

/// Reference pooling kernel: scatter-add each point's feature into its cell
/// and height bin, in input order. Points outside the grid or the height
/// range are dropped. Accumulation is single-precision.
pub fn pool_naive(pts: &LiftedPoints, g: &BevGridSpec, h: &HeightBinConfig) -> Result<BevTensor> {
    let (bins, c) = pool_prepare(pts, h)?;
    let mut out = BevTensor::zeros(bins, c, g.rows, g.cols);
    let plane = g.rows * g.cols;
    for i in 0..pts.len() {
        let p = pts.position(i);
        let Some(cell) = g.world_to_grid(&p) else {
            continue;
        };
        let Some(bin) = height_bin_index(p.z, h) else {
            continue;
        };
        let flat = cell.row * g.cols + cell.col;
        let f = pts.feature(i);
        for (ch, &fv) in f.iter().enumerate() {
            out.data[(bin * c + ch) * plane + flat] += fv;
        }
    }
    Ok(out)
}

/// Optimized pooling kernel: stable counting sort of points by (cell, bin)
/// key, segmented reduction into a bucket-major scratch buffer, then a
/// transpose into the bin-major output layout.
///
/// Within each bucket contributions are summed in input order, exactly like
/// [`pool_naive`], so outputs agree bit for bit. Work splits across
/// [`effective_threads`] contiguous key ranges.
pub fn pool_fast(pts: &LiftedPoints, g: &BevGridSpec, h: &HeightBinConfig) -> Result<BevTensor> {
    pool_fast_with_threads(pts, g, h, effective_threads())
}

/// [`pool_fast`] with an explicit worker count (mainly for tests).
pub fn pool_fast_with_threads(
    pts: &LiftedPoints,
    g: &BevGridSpec,
    h: &HeightBinConfig,
    threads: usize,
) -> Result<BevTensor> {
    let (bins, c) = pool_prepare(pts, h)?;
    let n_cells = g.rows * g.cols;
    let n_keys = n_cells * bins;
    let n = pts.len();
    const SKIP: u32 = u32::MAX;

    // Pass 1: (cell, bin) key per point; SKIP marks dropped points.
    let keys: Vec<u32> = (0..n)
        .map(|i| {
            let p = pts.position(i);
            match (g.world_to_grid(&p), height_bin_index(p.z, h)) {
                (Some(cell), Some(bin)) => (((cell.row * g.cols + cell.col) * bins) + bin) as u32,
                _ => SKIP,
            }
        })
        .collect();

    // Pass 2: stable counting sort. offsets[k] = start of key k's segment.
    let mut offsets = vec![0u32; n_keys + 1];
    for &k in &keys {
        if k != SKIP {
            offsets[k as usize + 1] += 1;
        }
    }
    for i in 1..offsets.len() {
        offsets[i] += offsets[i - 1];
    }
    let n_valid = offsets[n_keys] as usize;
    let mut order = vec![0u32; n_valid];
    {
        let mut cursor = offsets.clone();
        for (i, &k) in keys.iter().enumerate() {
            if k != SKIP {
                order[cursor[k as usize] as usize] = i as u32;
                cursor[k as usize] += 1;
            }
        }
    }

    // Pass 3: segmented reduction into bucket-major scratch, each bucket's
    // C features contiguous. Key ranges are split so every worker owns a
    // disjoint slice of both the order array and the scratch buffer.
    let mut tmp = vec![0.0f32; n_keys * c];
    let reduce = |key_lo: usize, key_hi: usize, tmp_slice: &mut [f32]| {
        let base = key_lo * c;
        let mut s = offsets[key_lo] as usize;
        let end = offsets[key_hi] as usize;
        while s < end {
            let k = keys[order[s] as usize] as usize;
            let e = offsets[k + 1] as usize;
            let acc = &mut tmp_slice[k * c - base..(k + 1) * c - base];
            for &pi in &order[s..e] {
                let f = pts.feature(pi as usize);
                for (a, &x) in acc.iter_mut().zip(f) {
                    *a += x;
                }
            }
            s = e;
        }
    };
    let threads = threads.max(1).min(n_keys);
    if threads <= 1 || n_valid < 4096 {
        reduce(0, n_keys, &mut tmp);
    } else {
        // Split keys so ranges carry roughly equal point counts.
        let mut bounds = Vec::with_capacity(threads + 1);
        bounds.push(0usize);
        for t in 1..threads {
            let target = (n_valid as u64 * t as u64 / threads as u64) as u32;
            let k = offsets.partition_point(|&o| o < target).min(n_keys);
            let k = (*bounds.last().unwrap()).max(k);
            bounds.push(k);
        }
        bounds.push(n_keys);
        let mut jobs = Vec::with_capacity(threads);
        let mut rest: &mut [f32] = &mut tmp;
        let mut consumed = 0usize;
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (mine, tail) = rest.split_at_mut((hi - lo) * c);
            rest = tail;
            consumed += (hi - lo) * c;
            jobs.push((lo, hi, mine));
        }
        debug_assert_eq!(consumed, n_keys * c);
        jobs.into_par_iter()
            .for_each(|(lo, hi, slice)| reduce(lo, hi, slice));
    }

    // Pass 4: transpose occupied buckets into the bin-major output.
    let mut out = BevTensor::zeros(bins, c, g.rows, g.cols);
    for k in 0..n_keys {
        if offsets[k + 1] > offsets[k] {
            let cell = k / bins;
            let bin = k % bins;
            for ch in 0..c {
                out.data[(bin * c + ch) * n_cells + cell] = tmp[k * c + ch];
            }
        }
    }
    Ok(out)
}

/// One benchmark measurement row; serialized as machine-readable JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub config: String,
    #[serde(rename = "impl")]
    pub impl_name: String,
    pub points: usize,
    pub seconds: f64,
    pub points_per_sec: f64,
    /// FNV-1a digest of the output tensor; equal across runs for a fixed seed.
    pub checksum: String,
}

/// Deterministic synthetic point cloud for benchmarks: positions uniform over
/// the grid footprint and a height range spanning every published bin config
/// (plus out-of-range strays), features uniform in [0, 1).
pub fn synth_lifted_points(n: usize, channels: usize, seed: u64) -> LiftedPoints {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = BevGridSpec::default();
    let mut positions = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * channels);
    for _ in 0..n {
        positions.push(Point3::new(
            rng.gen_range(g.x_min - 2.0..g.x_max() + 2.0),
            rng.gen_range(g.y_min - 2.0..g.y_max() + 2.0),
            rng.gen_range(-12.0..12.0),
        ));
        for _ in 0..channels {
            features.push(rng.gen_range(0.0..1.0f32));
        }
    }
    LiftedPoints {
        channels,
        positions,
        features,
    }
}

/// Times both pooling kernels across all published height-bin configs.
/// `reps` timed repetitions per kernel (after one warmup); best time wins.
pub fn bench_pool(pts: &LiftedPoints, g: &BevGridSpec, reps: usize) -> Result<Vec<BenchRow>> {
    bench_pool_configs(pts, g, &TABLE4_BIN_CONFIGS, reps)
}

/// [`bench_pool`] over an explicit config list.
pub fn bench_pool_configs(
    pts: &LiftedPoints,
    g: &BevGridSpec,
    configs: &[HeightBinConfig],
    reps: usize,
) -> Result<Vec<BenchRow>> {
    let reps = reps.max(1);
    let mut rows = Vec::new();
    for cfg in configs {
        for (name, kernel) in [
            (
                "naive",
                pool_naive
                    as fn(&LiftedPoints, &BevGridSpec, &HeightBinConfig) -> Result<BevTensor>,
            ),
            ("fast", pool_fast),
        ] {
            let warm = kernel(pts, g, cfg)?;
            let checksum = format!("{:016x}", warm.to_tensor().checksum());
            let mut best = f64::INFINITY;
            for _ in 0..reps {
                let t0 = Instant::now();
                let out = kernel(pts, g, cfg)?;
                let dt = t0.elapsed().as_secs_f64();
                best = best.min(dt);
                debug_assert_eq!(out.data.len(), warm.data.len());
            }
            rows.push(BenchRow {
                config: cfg.to_string(),
                impl_name: name.to_string(),
                points: pts.len(),
                seconds: best,
                points_per_sec: pts.len() as f64 / best,
                checksum,
            });
        }
    }
    Ok(rows)
}
