//! Packed binary rasters and their PBM serialization.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Default camera-view raster.
pub const DEFAULT_WIDTH: usize = 256;
pub const DEFAULT_HEIGHT: usize = 144;

/// Binary raster stored row-major, one bit per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "edge map dimensions must be positive");
        Self {
            width,
            height,
            words: vec![0; (width * height).div_ceil(64)],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut e = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    e.set(x, y, true);
                }
            }
        }
        e
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        let i = y * self.width + x;
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.set_index(y * self.width + x, on);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, on: bool) {
        let bit = 1u64 << (i & 63);
        if on {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    /// Sets the pixel if `(x, y)` lies inside the raster.
    pub fn set_checked(&mut self, x: i64, y: i64) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.set(x as usize, y as usize, true);
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    /// Linear indices of set pixels in increasing order.
    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    pub fn iter_set_xy(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.iter_set().map(move |i| (i % w, i / w))
    }

    pub fn is_subset_of(&self, other: &EdgeMap) -> bool {
        self.dims() == other.dims()
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &EdgeMap) {
        assert_eq!(self.dims(), other.dims());
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// 3x3 (8-neighbour) binary dilation.
    pub fn dilate(&self) -> EdgeMap {
        let mut out = EdgeMap::new(self.width, self.height);
        for (x, y) in self.iter_set_xy() {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    out.set_checked(x as i64 + dx, y as i64 + dy);
                }
            }
        }
        out
    }

    pub fn flip_horizontal(&self) -> EdgeMap {
        let mut out = EdgeMap::new(self.width, self.height);
        for (x, y) in self.iter_set_xy() {
            out.set(self.width - 1 - x, y, true);
        }
        out
    }

    /// Alternating run lengths over the row-major bitmap, starting with a
    /// (possibly empty) run of zeros.
    pub fn to_runs(&self) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for i in 0..self.width * self.height {
            let b = self.get_index(i);
            if b != current {
                runs.push(len);
                current = b;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        runs
    }

    pub fn from_runs(width: usize, height: usize, runs: &[u32]) -> Result<EdgeMap> {
        let mut e = EdgeMap::new(width, height);
        let total = width * height;
        let mut pos = 0usize;
        let mut on = false;
        for &r in runs {
            let end = pos + r as usize;
            if end > total {
                return Err(Error::Format("run lengths exceed raster size".into()));
            }
            if on {
                for i in pos..end {
                    e.set_index(i, true);
                }
            }
            pos = end;
            on = !on;
        }
        if pos != total {
            return Err(Error::Format(format!(
                "run lengths cover {pos} of {total} pixels"
            )));
        }
        Ok(e)
    }

    /// Binary (P4) PBM; a set pixel is written as 1 (black).
    pub fn write_pbm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P4\n{} {}\n", self.width, self.height)?;
        let row_bytes = self.width.div_ceil(8);
        let mut row = vec![0u8; row_bytes];
        for y in 0..self.height {
            row.iter_mut().for_each(|b| *b = 0);
            for x in 0..self.width {
                if self.get(x, y) {
                    row[x / 8] |= 0x80 >> (x % 8);
                }
            }
            out.write_all(&row)?;
        }
        Ok(())
    }

    pub fn save_pbm(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_pbm(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads plain (P1) or binary (P4) PBM.
    pub fn read_pbm<R: BufRead>(mut input: R) -> Result<EdgeMap> {
        let mut data = Vec::new();
        input.read_to_end(&mut data)?;
        let mut pos = 0usize;
        let mut token = || -> Result<String> {
            loop {
                while pos < data.len() && data[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < data.len() && data[pos] == b'#' {
                    while pos < data.len() && data[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PBM header".into()));
            }
            Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
        };
        let magic = token()?;
        let parse_dim = |t: String| -> Result<usize> {
            t.parse::<usize>()
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| Error::Format(format!("bad PBM dimension {t:?}")))
        };
        let width = parse_dim(token()?)?;
        let height = parse_dim(token()?)?;
        let mut e = EdgeMap::new(width, height);
        match magic.as_str() {
            "P4" => {
                // exactly one whitespace byte separates header and raster
                let start = pos + 1;
                let row_bytes = width.div_ceil(8);
                if data.len() < start + row_bytes * height {
                    return Err(Error::Format("truncated PBM raster".into()));
                }
                for y in 0..height {
                    let row = &data[start + y * row_bytes..start + (y + 1) * row_bytes];
                    for x in 0..width {
                        if row[x / 8] & (0x80 >> (x % 8)) != 0 {
                            e.set(x, y, true);
                        }
                    }
                }
            }
            "P1" => {
                let mut i = 0usize;
                for &b in &data[pos..] {
                    match b {
                        b'0' | b'1' => {
                            if i >= width * height {
                                break;
                            }
                            e.set_index(i, b == b'1');
                            i += 1;
                        }
                        _ => {}
                    }
                }
                if i != width * height {
                    return Err(Error::Format("truncated PBM raster".into()));
                }
            }
            other => return Err(Error::Format(format!("not a PBM file (magic {other:?})"))),
        }
        Ok(e)
    }

    pub fn load_pbm(path: &Path) -> Result<EdgeMap> {
        let f = std::fs::File::open(path)?;
        EdgeMap::read_pbm(std::io::BufReader::new(f))
    }
}

/// Integer-pixel Bresenham line, invoking `plot` for every pixel.
pub fn bresenham(x0: i64, y0: i64, x1: i64, y1: i64, mut plot: impl FnMut(i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    loop {
        plot(x, y);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}
