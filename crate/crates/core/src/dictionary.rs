//! Synthetic dictionary of (edge map, homography) pairs.
//!
//! Each seed homography projects the image rectangle onto a quad on the
//! pitch. Pan, tilt and zoom are simulated by moving that quad; the
//! homography of every moved quad is re-estimated from the four image
//! corners and the model is rendered through it.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::edgemap::EdgeMap;
use crate::error::{Error, Result};
use crate::features::{hog, HogConfig, HogDescriptor};
use crate::geometry::{estimate_dlt, project_corners, Correspondence, Homography, Point2, Quad};
use crate::pitch_model::{render_camera_view, PitchModel};
use crate::temporal::{quad_to_camera, CameraParams};

/// Entries with fewer set pixels are rejected.
pub const MIN_EDGE_PIXELS: usize = 50;
const PARALLEL_EPS_RAD: f64 = 1e-6;

const MAGIC: &[u8; 4] = b"PTVD";
const VERSION: u32 = 1;

/// Camera-view raster geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
}

impl Default for Raster {
    fn default() -> Self {
        Self {
            width: crate::edgemap::DEFAULT_WIDTH,
            height: crate::edgemap::DEFAULT_HEIGHT,
        }
    }
}

impl Raster {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    /// Image corners `p0..p3`: bottom-left, bottom-right, top-right, top-left.
    pub fn corners(&self) -> [Point2; 4] {
        let (w, h) = (self.width as f64, self.height as f64);
        [
            Point2::new(0.0, h),
            Point2::new(w, h),
            Point2::new(w, 0.0),
            Point2::new(0.0, 0.0),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedAnnotation {
    pub image_id: String,
    /// Image pixel → model meter correspondences.
    pub pairs: [Correspondence; 4],
}

impl SeedAnnotation {
    pub fn homography(&self) -> Result<Homography> {
        estimate_dlt(&self.pairs)
    }

    /// Quad covered by the raster under this seed's homography.
    pub fn quad(&self, raster: Raster) -> Result<Quad> {
        project_corners(&self.homography()?, &raster.corners())
    }
}

/// One line per seed: `image_id u0 v0 x0 y0 ... u3 v3 x3 y3`.
pub fn parse_seeds(text: &str, source: &str) -> Result<Vec<SeedAnnotation>> {
    let mut seeds = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let id = it.next().unwrap_or_default().to_string();
        let nums = it
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
        if nums.len() != 16 {
            return Err(Error::parse(
                source,
                lineno + 1,
                format!("expected 16 numbers after the image id, got {}", nums.len()),
            ));
        }
        let pair = |k: usize| {
            Correspondence::new(
                Point2::new(nums[4 * k], nums[4 * k + 1]),
                Point2::new(nums[4 * k + 2], nums[4 * k + 3]),
            )
        };
        let seed = SeedAnnotation {
            image_id: id,
            pairs: [pair(0), pair(1), pair(2), pair(3)],
        };
        seed.homography()
            .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
        seeds.push(seed);
    }
    Ok(seeds)
}

pub fn load_seeds(path: &Path) -> Result<Vec<SeedAnnotation>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_seeds(&text, &path.display().to_string())
}

pub fn format_seeds(seeds: &[SeedAnnotation]) -> String {
    let mut s = String::new();
    for seed in seeds {
        s += &seed.image_id;
        for c in &seed.pairs {
            s += &format!(" {} {} {} {}", c.src.x, c.src.y, c.dst.x, c.dst.y);
        }
        s.push('\n');
    }
    s
}

/// Zero-roll pinhole camera above the pitch plane (z = 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    /// Camera centre in model meters; z is the height above the pitch.
    pub position: [f64; 3],
    /// Azimuth, radians; 0 looks along +y, positive turns toward +x.
    pub pan: f64,
    /// Depression below the horizon, radians.
    pub tilt: f64,
    pub focal_px: f64,
}

impl PinholeCamera {
    fn axes(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (sp, cp) = self.pan.sin_cos();
        let (st, ct) = self.tilt.sin_cos();
        let fwd = [sp * ct, cp * ct, -st];
        let right = [cp, -sp, 0.0];
        // down = -(right x fwd)
        let up = [
            right[1] * fwd[2] - right[2] * fwd[1],
            right[2] * fwd[0] - right[0] * fwd[2],
            right[0] * fwd[1] - right[1] * fwd[0],
        ];
        (fwd, right, [-up[0], -up[1], -up[2]])
    }

    /// Image (pixel) → ground (meter) homography for a `width x height`
    /// image with the principal point at its centre.
    pub fn image_to_ground(&self, width: usize, height: usize) -> Result<Homography> {
        let (fwd, right, down) = self.axes();
        let (cu, cv) = (width as f64 / 2.0, height as f64 / 2.0);
        let mut a = [[0.0; 3]; 3];
        for r in 0..3 {
            a[r][0] = right[r];
            a[r][1] = down[r];
            a[r][2] = fwd[r] * self.focal_px - right[r] * cu - down[r] * cv;
        }
        let [x0, y0, z0] = self.position;
        let m = [[-z0, 0.0, x0], [0.0, -z0, y0], [0.0, 0.0, 1.0]];
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = (0..3).map(|k| m[i][k] * a[k][j]).sum();
            }
        }
        Homography::new(h)
    }

    /// Depression angle of the ray through the top image row.
    pub fn top_ray_depression(&self, height: usize) -> f64 {
        self.tilt - (height as f64 / 2.0 / self.focal_px).atan()
    }

    /// Seed annotation from the four image corners.
    pub fn seed(&self, image_id: &str, raster: Raster) -> Result<SeedAnnotation> {
        if self.top_ray_depression(raster.height) <= 0.0 {
            return Err(Error::DegenerateConfiguration(
                "image top is above the horizon".into(),
            ));
        }
        let h = self.image_to_ground(raster.width, raster.height)?;
        let corners = raster.corners();
        let mut pairs = [Correspondence::new(Point2::default(), Point2::default()); 4];
        for (p, c) in pairs.iter_mut().zip(corners) {
            *p = Correspondence::new(c, h.apply(c)?);
        }
        Ok(SeedAnnotation {
            image_id: image_id.to_string(),
            pairs,
        })
    }
}

/// Ranges of the main broadcast camera used for synthetic seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastRig {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub height: (f64, f64),
    pub pan: (f64, f64),
    pub horizontal_fov: (f64, f64),
    /// Depression of the top image ray.
    pub top_depression: (f64, f64),
}

impl Default for BroadcastRig {
    fn default() -> Self {
        Self {
            x: (51.25, 53.75),
            y: (-40.5, -37.5),
            height: (17.0, 19.0),
            pan: (-0.35, 0.35),
            horizontal_fov: (0.80, 0.90),
            top_depression: (0.18, 0.22),
        }
    }
}

impl BroadcastRig {
    pub fn sample(&self, rng: &mut impl Rng, raster: Raster) -> PinholeCamera {
        let u = |rng: &mut dyn rand::RngCore, r: (f64, f64)| {
            if r.1 > r.0 {
                rng.gen_range(r.0..r.1)
            } else {
                r.0
            }
        };
        let fov = u(rng, self.horizontal_fov);
        let focal_px = raster.width as f64 / 2.0 / (fov / 2.0).tan();
        let top = u(rng, self.top_depression);
        let tilt = top + (raster.height as f64 / 2.0 / focal_px).atan();
        PinholeCamera {
            position: [u(rng, self.x), u(rng, self.y), u(rng, self.height)],
            pan: u(rng, self.pan),
            tilt,
            focal_px,
        }
    }
}

/// Synthetic seed annotations drawn from `rig`, each with a valid render.
pub fn synthetic_seeds(
    n: usize,
    rng_seed: u64,
    rig: &BroadcastRig,
    model: &PitchModel,
    raster: Raster,
) -> Result<Vec<SeedAnnotation>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seeds = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while seeds.len() < n {
        attempts += 1;
        if attempts > 1000 * (n + 1) {
            return Err(Error::DegenerateConfiguration(
                "could not sample valid seed cameras".into(),
            ));
        }
        let cam = rig.sample(&mut rng, raster);
        let Ok(seed) = cam.seed(&format!("synth_{rng_seed}_{}", seeds.len()), raster) else {
            continue;
        };
        let Ok(q) = seed.quad(raster) else { continue };
        if matches!(entry_from_quad(&q, model, raster, &HogConfig::default()), Ok(Some(_))) {
            seeds.push(seed);
        }
    }
    Ok(seeds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtzGrid {
    pub pan_steps: Vec<f64>,
    pub tilt_steps: Vec<f64>,
    pub zoom_factors: Vec<f64>,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

impl Default for PtzGrid {
    fn default() -> Self {
        Self {
            pan_steps: linspace(-0.35, 0.35, 21),
            tilt_steps: linspace(-12.0, 12.0, 9),
            zoom_factors: vec![0.7, 0.85, 1.0, 1.2, 1.45],
        }
    }
}

impl PtzGrid {
    pub fn identity() -> Self {
        Self {
            pan_steps: vec![0.0],
            tilt_steps: vec![0.0],
            zoom_factors: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let has = |v: &[f64], x: f64| v.iter().any(|s| (s - x).abs() < 1e-12);
        if self.pan_steps.is_empty() || self.tilt_steps.is_empty() || self.zoom_factors.is_empty() {
            return Err(Error::InvalidGrid("every axis needs at least one step".into()));
        }
        if !has(&self.pan_steps, 0.0) || !has(&self.tilt_steps, 0.0) || !has(&self.zoom_factors, 1.0) {
            return Err(Error::InvalidGrid(
                "grid must contain pan 0, tilt 0 and zoom 1".into(),
            ));
        }
        if self.zoom_factors.iter().any(|z| !(*z > 0.0)) {
            return Err(Error::InvalidGrid("zoom factors must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pan_steps.len() * self.tilt_steps.len() * self.zoom_factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pan_range(&self) -> (f64, f64) {
        min_max(&self.pan_steps)
    }

    pub fn tilt_range(&self) -> (f64, f64) {
        min_max(&self.tilt_steps)
    }

    pub fn zoom_range(&self) -> (f64, f64) {
        min_max(&self.zoom_factors)
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Intersection of the side lines `q0q3` and `q1q2`.
pub fn side_convergence(q: &Quad) -> Result<Point2> {
    let c = q.corners();
    let (p, r) = (c[0], c[3].sub(c[0]));
    let (s0, s) = (c[1], c[2].sub(c[1]));
    let denom = r.cross(s);
    let sin = denom / (r.norm() * s.norm());
    if !sin.is_finite() || sin.abs() < PARALLEL_EPS_RAD {
        return Err(Error::ParallelSides);
    }
    let t = s0.sub(p).cross(s) / denom;
    Ok(p.add(r.scale(t)))
}

fn rotate_about(p: Point2, c: Point2, cos: f64, sin: f64) -> Point2 {
    let d = p.sub(c);
    Point2::new(c.x + cos * d.x - sin * d.y, c.y + sin * d.x + cos * d.y)
}

/// Pan: rotate the quad about the side-line convergence point
/// (positive `delta` is counter-clockwise in model coordinates).
pub fn simulate_pan(q: &Quad, delta: f64) -> Result<Quad> {
    if delta == 0.0 {
        return Ok(*q);
    }
    let c = side_convergence(q)?;
    let (sin, cos) = delta.sin_cos();
    let mut out = *q.corners();
    for p in out.iter_mut() {
        *p = rotate_about(*p, c, cos, sin);
    }
    Quad::new(out).map_err(|e| Error::DegenerateQuad(e.to_string()))
}

/// Tilt: slide every corner by `delta_m` along its side line, from the near
/// edge toward the far edge.
pub fn simulate_tilt(q: &Quad, delta_m: f64) -> Result<Quad> {
    if delta_m == 0.0 {
        return Ok(*q);
    }
    let apex = side_convergence(q)?;
    let c = q.corners();
    let left = c[3].sub(c[0]);
    let right = c[2].sub(c[1]);
    let (left, right) = (left.scale(1.0 / left.norm()), right.scale(1.0 / right.norm()));
    for (near, dir) in [(c[0], left), (c[1], right)] {
        let s = near.sub(apex).dot(dir);
        let moved = s + delta_m;
        if moved.signum() != s.signum() || moved.abs() < 1e-9 {
            return Err(Error::DegenerateQuad("near edge crosses the convergence point".into()));
        }
    }
    let out = [
        c[0].add(left.scale(delta_m)),
        c[1].add(right.scale(delta_m)),
        c[2].add(right.scale(delta_m)),
        c[3].add(left.scale(delta_m)),
    ];
    Quad::new(out).map_err(|e| Error::DegenerateQuad(e.to_string()))
}

/// Zoom: scale the corners about their centroid (`factor > 1` zooms out).
pub fn simulate_zoom(q: &Quad, factor: f64) -> Result<Quad> {
    if !(0.2..=5.0).contains(&factor) {
        return Err(Error::DegenerateQuad(format!("zoom factor {factor} outside [0.2, 5]")));
    }
    if factor == 1.0 {
        return Ok(*q);
    }
    let m = q.vertex_centroid();
    let mut out = *q.corners();
    for p in out.iter_mut() {
        *p = m.add(p.sub(m).scale(factor));
    }
    Quad::new(out).map_err(|e| Error::DegenerateQuad(e.to_string()))
}

/// Pan, then tilt, then zoom.
pub fn apply_ptz(q: &Quad, pan: f64, tilt_m: f64, zoom: f64) -> Result<Quad> {
    let q = simulate_pan(q, pan)?;
    let q = simulate_tilt(&q, tilt_m)?;
    simulate_zoom(&q, zoom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryEntry {
    /// Image → model.
    pub h: Homography,
    pub quad: Quad,
    pub cam: CameraParams,
    pub edges: EdgeMap,
    pub hog: HogDescriptor,
}

/// Builds the entry whose camera sees `q`; `None` when the render has too
/// few edge pixels or the camera parameters cannot be extracted.
pub fn entry_from_quad(
    q: &Quad,
    model: &PitchModel,
    raster: Raster,
    hog_cfg: &HogConfig,
) -> Result<Option<DictionaryEntry>> {
    let pairs: Vec<Correspondence> = raster
        .corners()
        .iter()
        .zip(q.corners())
        .map(|(p, q)| Correspondence::new(*p, *q))
        .collect();
    let h = estimate_dlt(&pairs)?;
    let quad = project_corners(&h, &raster.corners())?;
    let view = render_camera_view(model, &h, raster.width, raster.height)?;
    if view.edges.count() < MIN_EDGE_PIXELS {
        return Ok(None);
    }
    let Ok(cam) = quad_to_camera(&quad) else {
        return Ok(None);
    };
    let hog = hog(&view.edges, hog_cfg)?;
    Ok(Some(DictionaryEntry {
        h,
        quad,
        cam,
        edges: view.edges,
        hog,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub raster: Raster,
    pub hog_cfg: HogConfig,
    /// Per-entry standard deviations of the eight free homography entries.
    pub scales: [f64; 8],
    pub entries: Vec<DictionaryEntry>,
}

/// Standard deviation of each free homography entry; degenerate (zero)
/// spreads fall back to 1.
pub fn homography_scales<'a>(hs: impl Iterator<Item = &'a Homography>) -> [f64; 8] {
    let mut sum = [0.0f64; 8];
    let mut sum2 = [0.0f64; 8];
    let mut n = 0usize;
    for h in hs {
        for (k, v) in h.entries8().iter().enumerate() {
            sum[k] += v;
            sum2[k] += v * v;
        }
        n += 1;
    }
    let mut out = [1.0; 8];
    if n < 2 {
        return out;
    }
    for k in 0..8 {
        let mean = sum[k] / n as f64;
        let var = (sum2[k] / n as f64 - mean * mean).max(0.0);
        let sd = var.sqrt();
        if sd > 1e-12 * mean.abs().max(1e-300) && sd > 0.0 {
            out[k] = sd;
        }
    }
    out
}

impl Dictionary {
    pub fn new(raster: Raster, hog_cfg: HogConfig, entries: Vec<DictionaryEntry>) -> Self {
        let scales = homography_scales(entries.iter().map(|e| &e.h));
        Self {
            raster,
            hog_cfg,
            scales,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let u32le = |v: usize| -> Result<[u8; 4]> {
            u32::try_from(v)
                .map(|x| x.to_le_bytes())
                .map_err(|_| Error::Format(format!("{v} does not fit in u32")))
        };
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&u32le(self.raster.width)?)?;
        w.write_all(&u32le(self.raster.height)?)?;
        w.write_all(&u32le(self.entries.len())?)?;
        let c = &self.hog_cfg;
        for v in [c.cell_px, c.block_cells, c.stride_cells, c.bins, c.blur as usize] {
            w.write_all(&u32le(v)?)?;
        }
        for s in self.scales {
            w.write_all(&s.to_le_bytes())?;
        }
        for e in &self.entries {
            for v in e.h.to_array() {
                w.write_all(&v.to_le_bytes())?;
            }
            for v in e.cam.to_array() {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&u32le(e.hog.v.len())?)?;
            for v in &e.hog.v {
                w.write_all(&v.to_le_bytes())?;
            }
            let runs = e.edges.to_runs();
            w.write_all(&u32le(runs.len())?)?;
            for r in runs {
                w.write_all(&r.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Dictionary> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a PTVD dictionary".into()));
        }
        let read_u32 = |r: &mut R| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported dictionary version {version}")));
        }
        let width = read_u32(&mut r)? as usize;
        let height = read_u32(&mut r)? as usize;
        if width == 0 || height == 0 {
            return Err(Error::Format("zero raster dimension".into()));
        }
        let count = read_u32(&mut r)? as usize;
        let mut cfg_vals = [0usize; 5];
        for v in cfg_vals.iter_mut() {
            *v = read_u32(&mut r)? as usize;
        }
        let hog_cfg = HogConfig {
            cell_px: cfg_vals[0],
            block_cells: cfg_vals[1],
            stride_cells: cfg_vals[2],
            bins: cfg_vals[3],
            blur: cfg_vals[4] != 0,
        };
        let expected_hog = hog_cfg.descriptor_len(width, height)?;
        let read_f64 = |r: &mut R| -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let mut scales = [0.0; 8];
        for s in scales.iter_mut() {
            *s = read_f64(&mut r)?;
        }
        let raster = Raster::new(width, height);
        let mut entries = Vec::with_capacity(count.min(1 << 20));
        for idx in 0..count {
            let mut hv = [0.0; 9];
            for v in hv.iter_mut() {
                *v = read_f64(&mut r)?;
            }
            let h = Homography::from_slice(&hv)?;
            let mut cv = [0.0; 6];
            for v in cv.iter_mut() {
                *v = read_f64(&mut r)?;
            }
            let cam = CameraParams::from_array(cv);
            let hog_len = read_u32(&mut r)? as usize;
            if hog_len != expected_hog {
                return Err(Error::Format(format!(
                    "entry {idx}: HOG length {hog_len}, header implies {expected_hog}"
                )));
            }
            let mut buf = vec![0u8; hog_len * 4];
            r.read_exact(&mut buf)?;
            let v = buf
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let nruns = read_u32(&mut r)? as usize;
            if nruns > width * height + 1 {
                return Err(Error::Format(format!("entry {idx}: too many runs")));
            }
            let mut buf = vec![0u8; nruns * 4];
            r.read_exact(&mut buf)?;
            let runs: Vec<u32> = buf
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let edges = EdgeMap::from_runs(width, height, &runs)?;
            let quad = project_corners(&h, &raster.corners())?;
            entries.push(DictionaryEntry {
                h,
                quad,
                cam,
                edges,
                hog: HogDescriptor { v },
            });
        }
        Ok(Dictionary {
            raster,
            hog_cfg,
            scales,
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Dictionary> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let f = std::fs::File::open(path)?;
        Dictionary::read(std::io::BufReader::new(f))
    }
}

/// Expands every seed over the PTZ grid (seed-major, then pan, tilt, zoom),
/// dropping invalid combinations. Entries are synthesized in parallel but
/// kept in grid order.
pub fn build_dictionary(
    seeds: &[SeedAnnotation],
    grid: &PtzGrid,
    model: &PitchModel,
    raster: Raster,
    hog_cfg: &HogConfig,
) -> Result<Dictionary> {
    if seeds.is_empty() {
        return Err(Error::NoValidEntries);
    }
    grid.validate()?;
    let seed_quads = seeds
        .iter()
        .map(|s| s.quad(raster))
        .collect::<Result<Vec<_>>>()?;
    let (np, nt, nz) = (grid.pan_steps.len(), grid.tilt_steps.len(), grid.zoom_factors.len());
    let per_seed = np * nt * nz;
    let total = seeds.len() * per_seed;
    let entries: Vec<Option<DictionaryEntry>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let s = idx / per_seed;
            let rem = idx % per_seed;
            let (pi, ti, zi) = (rem / (nt * nz), (rem / nz) % nt, rem % nz);
            let q = apply_ptz(
                &seed_quads[s],
                grid.pan_steps[pi],
                grid.tilt_steps[ti],
                grid.zoom_factors[zi],
            )
            .ok()?;
            entry_from_quad(&q, model, raster, hog_cfg).ok().flatten()
        })
        .collect();
    let entries: Vec<DictionaryEntry> = entries.into_iter().flatten().collect();
    log::info!(
        "built {} entries from {} seeds x {} grid points ({} rejected)",
        entries.len(),
        seeds.len(),
        per_seed,
        total - entries.len()
    );
    if entries.is_empty() {
        return Err(Error::NoValidEntries);
    }
    Ok(Dictionary::new(raster, *hog_cfg, entries))
}
