//! Broadcast frame to field-line edge map: field-colour masking followed by
//! a per-pixel stroke-width filter.

use std::collections::VecDeque;
use std::path::Path;

use crate::dictionary::Raster;
use crate::edgemap::EdgeMap;
use crate::error::{Error, Result};
use crate::geometry::Homography;
use crate::pitch_model::{render_camera_view, PitchModel};

/// Pixels with lower HSV saturation never count as field colour.
pub const MIN_FIELD_SATURATION: f64 = 0.15;
/// Largest angle between a ray and the reversed gradient at its end.
pub const OPPOSITION_TOLERANCE: f64 = std::f64::consts::PI / 6.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("frame dimensions must be positive".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                got: (pixels.len(), 1),
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    /// Reads any PNG or PPM file.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        Self::new(w as usize, h as usize, pixels)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.pixels.len() * 3);
        for p in &self.pixels {
            buf.extend_from_slice(p);
        }
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer matches dimensions");
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    fn luminance(&self) -> Vec<f64> {
        self.pixels
            .iter()
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    /// Field hue window in degrees.
    pub hue_window: [f64; 2],
    pub min_field_fraction: f64,
    pub max_stroke_px: usize,
    /// Threshold on the Sobel luminance gradient, scaled so a unit step
    /// edge has magnitude 1.
    pub gradient_threshold: f64,
    /// Raster the edge map is pooled down to.
    pub raster: Raster,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            hue_window: [70.0, 170.0],
            min_field_fraction: 0.3,
            max_stroke_px: 10,
            gradient_threshold: 0.15,
            raster: Raster::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.hue_window;
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!("hue window [{lo}, {hi}] is empty")));
        }
        if !(self.min_field_fraction > 0.0 && self.min_field_fraction < 1.0) {
            return Err(Error::InvalidConfig("min_field_fraction must lie in (0, 1)".into()));
        }
        if self.max_stroke_px < 1 {
            return Err(Error::InvalidConfig("max_stroke_px must be at least 1".into()));
        }
        if !(self.gradient_threshold > 0.0) {
            return Err(Error::InvalidConfig("gradient_threshold must be positive".into()));
        }
        if self.raster.width == 0 || self.raster.height == 0 {
            return Err(Error::InvalidConfig("output raster must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMask {
    pub mask: EdgeMap,
    pub fraction: f64,
}

/// HSV hue in degrees and saturation in `[0, 1]`.
fn hue_saturation(p: [u8; 3]) -> (f64, f64) {
    let [r, g, b] = p.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    if max == 0.0 || d == 0.0 {
        return (0.0, 0.0);
    }
    let h = if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    (h, d / max)
}

fn largest_component(m: &EdgeMap) -> Vec<usize> {
    let (w, h) = m.dims();
    let mut seen = vec![false; w * h];
    let mut best: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();
    for start in m.iter_set() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if !seen[j] && m.get_index(j) {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Monotone-chain convex hull, counter-clockwise, collinear points dropped.
fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i64, i64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn fill_hull(hull: &[(i64, i64)], width: usize, height: usize) -> EdgeMap {
    let mut out = EdgeMap::new(width, height);
    if hull.is_empty() {
        return out;
    }
    let ymin = hull.iter().map(|p| p.1).min().unwrap();
    let ymax = hull.iter().map(|p| p.1).max().unwrap();
    for y in ymin..=ymax {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let yf = y as f64;
        for i in 0..hull.len() {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            let (ay, by) = (a.1 as f64, b.1 as f64);
            if (ay - yf) * (by - yf) > 0.0 {
                continue;
            }
            if ay == by {
                lo = lo.min(a.0.min(b.0) as f64);
                hi = hi.max(a.0.max(b.0) as f64);
            } else {
                let x = a.0 as f64 + (yf - ay) / (by - ay) * (b.0 - a.0) as f64;
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if hull.len() < 3 {
            for p in hull {
                if p.1 == y {
                    lo = lo.min(p.0 as f64);
                    hi = hi.max(p.0 as f64);
                }
            }
        }
        let (x0, x1) = ((lo - 1e-9).ceil() as i64, (hi + 1e-9).floor() as i64);
        for x in x0.max(0)..=x1.min(width as i64 - 1) {
            out.set(x as usize, y as usize, true);
        }
    }
    out
}

/// Square dilation with a `(2r + 1)`-pixel window; pixels outside the raster
/// count as unset.
fn box_dilate(m: &EdgeMap, r: usize) -> EdgeMap {
    let (w, h) = m.dims();
    let mut rows = EdgeMap::new(w, h);
    for y in 0..h {
        let mut prefix = vec![0usize; w + 1];
        for x in 0..w {
            prefix[x + 1] = prefix[x] + m.get(x, y) as usize;
        }
        for x in 0..w {
            if prefix[(x + r + 1).min(w)] > prefix[x.saturating_sub(r)] {
                rows.set(x, y, true);
            }
        }
    }
    let mut out = EdgeMap::new(w, h);
    for x in 0..w {
        let mut prefix = vec![0usize; h + 1];
        for y in 0..h {
            prefix[y + 1] = prefix[y] + rows.get(x, y) as usize;
        }
        for y in 0..h {
            if prefix[(y + r + 1).min(h)] > prefix[y.saturating_sub(r)] {
                out.set(x, y, true);
            }
        }
    }
    out
}

fn complement(m: &EdgeMap) -> EdgeMap {
    let (w, h) = m.dims();
    EdgeMap::from_fn(w, h, |x, y| !m.get(x, y))
}

/// Morphological closing; bridges gaps up to `2r` pixels wide.
fn close(m: &EdgeMap, r: usize) -> EdgeMap {
    complement(&box_dilate(&complement(&box_dilate(m, r)), r))
}

/// Field-coloured pixels, with line-sized gaps closed, restricted to the
/// largest 4-connected component and filled to its convex hull.
pub fn field_mask(f: &RgbFrame, cfg: &PreprocessConfig) -> Result<FieldMask> {
    cfg.validate()?;
    let [lo, hi] = cfg.hue_window;
    let raw = EdgeMap::from_fn(f.width, f.height, |x, y| {
        let (h, s) = hue_saturation(f.get(x, y));
        s > MIN_FIELD_SATURATION && h >= lo && h <= hi
    });
    let comp = largest_component(&close(&raw, cfg.max_stroke_px));
    let pts = comp
        .iter()
        .map(|i| ((i % f.width) as i64, (i / f.width) as i64))
        .collect();
    let mask = fill_hull(&convex_hull(pts), f.width, f.height);
    let fraction = mask.count() as f64 / (f.width * f.height) as f64;
    if fraction < cfg.min_field_fraction {
        return Err(Error::FieldNotFound { fraction });
    }
    Ok(FieldMask { mask, fraction })
}

/// Sobel gradient of the luminance divided by 4.
fn gradients(f: &RgbFrame) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (f.width, f.height);
    let lum = f.luminance();
    let at = |x: i64, y: i64| {
        let x = x.clamp(0, w as i64 - 1) as usize;
        let y = y.clamp(0, h as i64 - 1) as usize;
        lum[y * w + x]
    };
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1))
                / 4.0;
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1))
                / 4.0;
        }
    }
    (gx, gy)
}

/// Stroke width per edge pixel at full resolution: the length of the ray
/// cast along the gradient (towards brighter luminance) to the first edge
/// pixel with an opposing gradient, or `None` if the ray leaves the mask or
/// exceeds `limit` pixels.
fn stroke_widths(f: &RgbFrame, mask: &EdgeMap, threshold: f64, limit: usize) -> Vec<(usize, f64)> {
    let (w, h) = (f.width, f.height);
    let (gx, gy) = gradients(f);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let is_edge = |i: usize| mag[i] > threshold && mask.get_index(i);
    let cos_tol = OPPOSITION_TOLERANCE.cos();
    let mut out = Vec::new();
    for i in 0..w * h {
        if !is_edge(i) {
            continue;
        }
        let (dx, dy) = (gx[i] / mag[i], gy[i] / mag[i]);
        let (px, py) = ((i % w) as f64, (i / w) as f64);
        for t in 1..=limit + 1 {
            let qx = (px + t as f64 * dx).round();
            let qy = (py + t as f64 * dy).round();
            if qx < 0.0 || qy < 0.0 || qx >= w as f64 || qy >= h as f64 {
                break;
            }
            let j = qy as usize * w + qx as usize;
            if j == i {
                continue;
            }
            if !mask.get_index(j) {
                break;
            }
            if is_edge(j) {
                let c = -(gx[j] * dx + gy[j] * dy) / mag[j];
                if c >= cos_tol {
                    out.push((i, (qx - px).hypot(qy - py)));
                    break;
                }
            }
        }
    }
    out
}

/// Thin bright strokes inside the field mask, max-pooled to the output
/// raster.
pub fn stroke_filtered_edges(f: &RgbFrame, mask: &EdgeMap, cfg: &PreprocessConfig) -> Result<EdgeMap> {
    cfg.validate()?;
    if mask.dims() != (f.width, f.height) {
        return Err(Error::DimensionMismatch {
            expected: (f.width, f.height),
            got: mask.dims(),
        });
    }
    if mask.is_empty() {
        return Err(Error::EmptyEdgeMap);
    }
    let Raster { width: ow, height: oh } = cfg.raster;
    let mut out = EdgeMap::new(ow, oh);
    for (i, width) in stroke_widths(f, mask, cfg.gradient_threshold, cfg.max_stroke_px) {
        if width <= cfg.max_stroke_px as f64 {
            let (x, y) = (i % f.width, i / f.width);
            out.set(x * ow / f.width, y * oh / f.height, true);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyEdgeMap);
    }
    Ok(out)
}

pub fn preprocess_frame(f: &RgbFrame, cfg: &PreprocessConfig) -> Result<EdgeMap> {
    let m = field_mask(f, cfg)?;
    stroke_filtered_edges(f, &m.mask, cfg)
}

pub const FIELD_GREEN: [u8; 3] = [48, 132, 56];
pub const LINE_WHITE: [u8; 3] = [235, 235, 235];

/// Homography taking `hi`-raster pixels to the `lo` raster's model frame.
fn rescaled(h: &Homography, lo: Raster, hi: (usize, usize)) -> Result<Homography> {
    let sx = lo.width as f64 / hi.0 as f64;
    let sy = lo.height as f64 / hi.1 as f64;
    let s = Homography::new([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])?;
    h.compose(&s)
}

/// Synthetic broadcast frame: the model seen through `h` (a homography of
/// the `raster` image), drawn as white lines of roughly `line_px` pixels on
/// a uniform green field at `scale` times the raster resolution.
pub fn render_synthetic_frame(
    model: &PitchModel,
    h: &Homography,
    raster: Raster,
    scale: usize,
    line_px: usize,
) -> Result<RgbFrame> {
    let (w, hh) = (raster.width * scale, raster.height * scale);
    let view = render_camera_view(model, &rescaled(h, raster, (w, hh))?, w, hh)?;
    let mut lines = view.edges;
    for _ in 0..line_px / 2 {
        lines = lines.dilate();
    }
    let mut frame = RgbFrame::filled(w, hh, FIELD_GREEN)?;
    for (x, y) in lines.iter_set_xy() {
        frame.set(x, y, LINE_WHITE);
    }
    Ok(frame)
}

/// Paints the model lines projected by `h` (a homography of the `raster`
/// image) onto a copy of `f` in red.
pub fn draw_overlay(f: &RgbFrame, model: &PitchModel, h: &Homography, raster: Raster) -> Result<RgbFrame> {
    let view = render_camera_view(model, &rescaled(h, raster, (f.width, f.height))?, f.width, f.height)?;
    let mut out = f.clone();
    for (x, y) in view.edges.dilate().iter_set_xy() {
        out.set(x, y, [255, 0, 0]);
    }
    Ok(out)
}
