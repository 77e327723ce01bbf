//! Edge-map features: exact Euclidean distance transform, chamfer score and
//! HOG descriptors.

use crate::edgemap::EdgeMap;
use crate::error::{Error, Result};

/// Per-pixel Euclidean distance (px) to the nearest set pixel of an edge map.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

const FAR: f64 = 1e20;

/// One-dimensional squared-distance transform of a sampled function
/// (lower envelope of parabolas rooted at each sample).
fn dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = v[k];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= z[k] {
                if k == 0 {
                    // Parabola q dominates everywhere.
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance transform (column pass then row pass on squared
/// distances).
pub fn distance_transform(e: &EdgeMap) -> Result<DistanceField> {
    if e.is_empty() {
        return Err(Error::EmptyEdgeMap);
    }
    let (w, h) = e.dims();
    let mut sq = vec![FAR; w * h];
    for i in e.iter_set() {
        sq[i] = 0.0;
    }
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = sq[y * w + x];
        }
        dt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            sq[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        let row = &mut sq[y * w..(y + 1) * w];
        f[..w].copy_from_slice(row);
        dt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        row.copy_from_slice(&out[..w]);
    }
    let values = sq.into_iter().map(f64::sqrt).collect();
    Ok(DistanceField {
        width: w,
        height: h,
        values,
    })
}

/// Mean of `t` over the set pixels of the template `i`.
pub fn chamfer_score(t: &DistanceField, i: &EdgeMap) -> Result<f64> {
    if t.dims() != i.dims() {
        return Err(Error::DimensionMismatch {
            expected: t.dims(),
            got: i.dims(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for idx in i.iter_set() {
        sum += t.values[idx];
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyTemplate);
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HogConfig {
    pub cell_px: usize,
    pub block_cells: usize,
    pub stride_cells: usize,
    pub bins: usize,
    /// Dilate then 3x3 box-blur the raster before taking gradients.
    pub blur: bool,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self {
            cell_px: 8,
            block_cells: 2,
            stride_cells: 1,
            bins: 9,
            blur: true,
        }
    }
}

/// L2 regularizer used in block normalization.
pub const HOG_EPS: f64 = 1e-3;

impl HogConfig {
    fn validate(&self, width: usize, height: usize) -> Result<(usize, usize, usize, usize)> {
        if self.cell_px == 0 || self.block_cells == 0 || self.stride_cells == 0 || self.bins < 2 {
            return Err(Error::BadGeometry(format!("{self:?}")));
        }
        if width % self.cell_px != 0 || height % self.cell_px != 0 {
            return Err(Error::BadGeometry(format!(
                "{width}x{height} raster not divisible by {}-px cells",
                self.cell_px
            )));
        }
        let (cx, cy) = (width / self.cell_px, height / self.cell_px);
        if cx < self.block_cells || cy < self.block_cells {
            return Err(Error::BadGeometry("raster smaller than one block".into()));
        }
        let bx = (cx - self.block_cells) / self.stride_cells + 1;
        let by = (cy - self.block_cells) / self.stride_cells + 1;
        Ok((cx, cy, bx, by))
    }

    pub fn descriptor_len(&self, width: usize, height: usize) -> Result<usize> {
        let (_, _, bx, by) = self.validate(width, height)?;
        Ok(bx * by * self.block_cells * self.block_cells * self.bins)
    }

    pub fn num_blocks(&self, width: usize, height: usize) -> Result<usize> {
        let (_, _, bx, by) = self.validate(width, height)?;
        Ok(bx * by)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogDescriptor {
    pub v: Vec<f32>,
}

impl HogDescriptor {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn distance(&self, other: &HogDescriptor) -> f64 {
        l2_distance(&self.v, &other.v)
    }
}

/// Euclidean distance with a fixed, lane-wise accumulation order.
pub fn l2_distance(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (xa, xb) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            let d = xa[l] - xb[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..a.len() {
        let d = a[i] - b[i];
        tail += d * d;
    }
    let total: f64 = acc.iter().map(|v| *v as f64).sum::<f64>() + tail as f64;
    total.sqrt()
}

fn intensity(e: &EdgeMap, blur: bool) -> Vec<f64> {
    let (w, h) = e.dims();
    if !blur {
        let mut out = vec![0.0; w * h];
        for i in e.iter_set() {
            out[i] = 1.0;
        }
        return out;
    }
    let d = e.dilate();
    let mut src = vec![0.0; w * h];
    for i in d.iter_set() {
        src[i] = 1.0;
    }
    // 3x3 box filter, zero outside the raster
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    s += src[yy * w + xx];
                }
            }
            out[y * w + x] = s / 9.0;
        }
    }
    out
}

/// Unnormalized orientation histograms, one `bins`-vector per cell,
/// cells row-major.
pub fn cell_histograms(e: &EdgeMap, cfg: &HogConfig) -> Result<Vec<f64>> {
    let (w, h) = e.dims();
    let (cx, cy, _, _) = cfg.validate(w, h)?;
    let img = intensity(e, cfg.blur);
    let bins = cfg.bins;
    let bin_width = std::f64::consts::PI / bins as f64;
    let mut hist = vec![0.0; cx * cy * bins];
    let at = |x: usize, y: usize| img[y * w + x];
    for y in 0..h {
        for x in 0..w {
            // centered differences with replicated borders
            let gx = at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y);
            let gy = at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1));
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let ang = gy.atan2(gx).rem_euclid(std::f64::consts::PI);
            // bilinear vote between the two nearest bin centres
            let pos = ang / bin_width - 0.5;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = (lo as i64).rem_euclid(bins as i64) as usize;
            let b1 = (b0 + 1) % bins;
            let cell = (y / cfg.cell_px) * cx + x / cfg.cell_px;
            hist[cell * bins + b0] += mag * (1.0 - frac);
            hist[cell * bins + b1] += mag * frac;
        }
    }
    Ok(hist)
}

/// HOG descriptor: block-normalized cell histograms, blocks row-major.
pub fn hog(e: &EdgeMap, cfg: &HogConfig) -> Result<HogDescriptor> {
    let (w, h) = e.dims();
    let (cx, _, bx, by) = cfg.validate(w, h)?;
    let hist = cell_histograms(e, cfg)?;
    let bins = cfg.bins;
    let bc = cfg.block_cells;
    let block_len = bc * bc * bins;
    let mut v = Vec::with_capacity(bx * by * block_len);
    let mut block = vec![0.0; block_len];
    for byi in 0..by {
        for bxi in 0..bx {
            let mut k = 0;
            for dy in 0..bc {
                for dx in 0..bc {
                    let cell = (byi * cfg.stride_cells + dy) * cx + bxi * cfg.stride_cells + dx;
                    block[k..k + bins].copy_from_slice(&hist[cell * bins..(cell + 1) * bins]);
                    k += bins;
                }
            }
            let norm = (block.iter().map(|x| x * x).sum::<f64>() + HOG_EPS * HOG_EPS).sqrt();
            v.extend(block.iter().map(|x| (x / norm) as f32));
        }
    }
    Ok(HogDescriptor { v })
}
