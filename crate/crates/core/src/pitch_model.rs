//! Top-view pitch model and rasterization of its markings.
//!
//! Model coordinates are meters with the origin at the bottom-left corner of
//! the pitch and +x along the long side. Image coordinates are pixels with the
//! origin at the top-left corner, +v pointing down; pixel `(i, j)` covers
//! `[i, i+1) x [j, j+1)`.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use crate::edgemap::{bresenham, EdgeMap};
use crate::error::{Error, Result};
use crate::geometry::{raw_inverse, Homography, Point2};

pub use crate::edgemap::{DEFAULT_HEIGHT, DEFAULT_WIDTH};

/// Maximum deviation, in image pixels, between a drawn chord and the arc.
const CHORD_TOLERANCE_PX: f64 = 0.5;
const BOUNDS_TOLERANCE_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Segment {
        a: Point2,
        b: Point2,
    },
    /// Counter-clockwise arc from `start_angle` to `end_angle` (radians).
    Arc {
        center: Point2,
        radius_m: f64,
        start_angle: f64,
        end_angle: f64,
    },
}

impl Primitive {
    pub fn segment(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Primitive::Segment {
            a: Point2::new(ax, ay),
            b: Point2::new(bx, by),
        }
    }

    pub fn arc(cx: f64, cy: f64, radius_m: f64, start_angle: f64, end_angle: f64) -> Self {
        Primitive::Arc {
            center: Point2::new(cx, cy),
            radius_m,
            start_angle,
            end_angle,
        }
    }

    pub fn circle(cx: f64, cy: f64, radius_m: f64) -> Self {
        Self::arc(cx, cy, radius_m, 0.0, TAU)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Primitive::Segment { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidModel("non-finite segment".into()));
                }
                if a == b {
                    return Err(Error::InvalidModel("segment endpoints coincide".into()));
                }
            }
            Primitive::Arc {
                center,
                radius_m,
                start_angle,
                end_angle,
            } => {
                let sweep = end_angle - start_angle;
                if !center.is_finite() || !(radius_m > 0.0) || !radius_m.is_finite() {
                    return Err(Error::InvalidModel("bad arc center or radius".into()));
                }
                if !(sweep > 0.0 && sweep <= TAU + 1e-12) {
                    return Err(Error::InvalidModel(format!("arc sweep {sweep} outside (0, 2π]")));
                }
            }
        }
        Ok(())
    }

    /// Axis-aligned bounds `(min, max)`, conservative for arcs.
    fn bounds(&self) -> (Point2, Point2) {
        match *self {
            Primitive::Segment { a, b } => (
                Point2::new(a.x.min(b.x), a.y.min(b.y)),
                Point2::new(a.x.max(b.x), a.y.max(b.y)),
            ),
            Primitive::Arc {
                center,
                radius_m,
                start_angle,
                end_angle,
            } => {
                let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
                let mut include = |ang: f64| {
                    let p = arc_point(center, radius_m, ang);
                    lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
                    hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
                };
                include(start_angle);
                include(end_angle);
                let first_quadrant = (start_angle / (PI / 2.0)).ceil() as i64;
                let mut k = first_quadrant;
                while (k as f64) * PI / 2.0 < end_angle {
                    include(k as f64 * PI / 2.0);
                    k += 1;
                }
                (lo, hi)
            }
        }
    }

    /// Distance from `p` to the primitive, in meters.
    pub fn distance_to(&self, p: Point2) -> f64 {
        match *self {
            Primitive::Segment { a, b } => {
                let ab = b.sub(a);
                let t = (p.sub(a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
                p.distance(a.add(ab.scale(t)))
            }
            Primitive::Arc {
                center,
                radius_m,
                start_angle,
                end_angle,
            } => {
                let d = p.sub(center);
                let ang = d.y.atan2(d.x);
                let mut rel = (ang - start_angle).rem_euclid(TAU);
                if end_angle - start_angle >= TAU - 1e-12 {
                    rel = 0.0;
                }
                if rel <= end_angle - start_angle {
                    (d.norm() - radius_m).abs()
                } else {
                    p.distance(arc_point(center, radius_m, start_angle))
                        .min(p.distance(arc_point(center, radius_m, end_angle)))
                }
            }
        }
    }
}

fn arc_point(center: Point2, r: f64, ang: f64) -> Point2 {
    Point2::new(center.x + r * ang.cos(), center.y + r * ang.sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchModel {
    pub(crate) length_m: f64,
    pub(crate) width_m: f64,
    pub(crate) primitives: Vec<Primitive>,
    pub(crate) px_per_m: f64,
}

impl PitchModel {
    pub fn new(length_m: f64, width_m: f64, primitives: Vec<Primitive>, px_per_m: f64) -> Result<Self> {
        if !(length_m > 0.0 && width_m > 0.0 && length_m.is_finite() && width_m.is_finite()) {
            return Err(Error::InvalidModel("pitch extent must be positive".into()));
        }
        if !(px_per_m > 0.0 && px_per_m.is_finite()) {
            return Err(Error::InvalidModel("px_per_m must be positive".into()));
        }
        if primitives.is_empty() {
            return Err(Error::InvalidModel("no primitives".into()));
        }
        for (i, p) in primitives.iter().enumerate() {
            p.validate()?;
            let (lo, hi) = p.bounds();
            let t = BOUNDS_TOLERANCE_M;
            if lo.x < -t || lo.y < -t || hi.x > length_m + t || hi.y > width_m + t {
                return Err(Error::InvalidModel(format!(
                    "primitive {i} leaves the pitch extent"
                )));
            }
        }
        Ok(Self {
            length_m,
            width_m,
            primitives,
            px_per_m,
        })
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn width_m(&self) -> f64 {
        self.width_m
    }

    pub fn px_per_m(&self) -> f64 {
        self.px_per_m
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    /// Raster extent of the top view.
    pub fn topview_dims(&self) -> (usize, usize) {
        (
            (self.length_m * self.px_per_m).round().max(1.0) as usize,
            (self.width_m * self.px_per_m).round().max(1.0) as usize,
        )
    }

    /// Image→model homography of the top-view raster.
    pub fn topview_homography(&self) -> Homography {
        let s = 1.0 / self.px_per_m;
        Homography::new([[s, 0.0, 0.0], [0.0, -s, self.width_m], [0.0, 0.0, 1.0]])
            .expect("scale homography is invertible")
    }

    pub fn distance_to_nearest(&self, p: Point2) -> f64 {
        self.primitives
            .iter()
            .map(|pr| pr.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Text form: optional `F length width` line, then one primitive per
    /// line, `S x1 y1 x2 y2` or `A cx cy r a0 a1`. `#` starts a comment.
    pub fn parse(text: &str, px_per_m: f64, source: &str) -> Result<PitchModel> {
        let mut extent = None;
        let mut prims = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let kind = it.next().unwrap_or("");
            let nums = it
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
            let want = |n: usize| -> Result<()> {
                if nums.len() == n {
                    Ok(())
                } else {
                    Err(Error::parse(
                        source,
                        lineno + 1,
                        format!("{kind} expects {n} numbers, got {}", nums.len()),
                    ))
                }
            };
            match kind {
                "F" => {
                    want(2)?;
                    extent = Some((nums[0], nums[1]));
                }
                "S" => {
                    want(4)?;
                    prims.push(Primitive::segment(nums[0], nums[1], nums[2], nums[3]));
                }
                "A" => {
                    want(5)?;
                    prims.push(Primitive::arc(nums[0], nums[1], nums[2], nums[3], nums[4]));
                }
                other => {
                    return Err(Error::parse(
                        source,
                        lineno + 1,
                        format!("unknown primitive kind {other:?}"),
                    ))
                }
            }
        }
        let (length, width) = match extent {
            Some(e) => e,
            None => prims.iter().fold((0.0f64, 0.0f64), |(l, w), p| {
                let (_, hi) = p.bounds();
                (l.max(hi.x), w.max(hi.y))
            }),
        };
        PitchModel::new(length, width, prims, px_per_m)
    }

    pub fn load(path: &Path, px_per_m: f64) -> Result<PitchModel> {
        let text = std::fs::read_to_string(path)?;
        PitchModel::parse(&text, px_per_m, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("F {} {}\n", self.length_m, self.width_m);
        for p in &self.primitives {
            match *p {
                Primitive::Segment { a, b } => {
                    s += &format!("S {} {} {} {}\n", a.x, a.y, b.x, b.y);
                }
                Primitive::Arc {
                    center,
                    radius_m,
                    start_angle,
                    end_angle,
                } => {
                    s += &format!(
                        "A {} {} {} {} {}\n",
                        center.x, center.y, radius_m, start_angle, end_angle
                    );
                }
            }
        }
        s
    }
}

/// 105 x 68 m pitch with the standard markings.
pub fn standard_pitch(px_per_m: f64) -> Result<PitchModel> {
    const L: f64 = 105.0;
    const W: f64 = 68.0;
    const CIRCLE_R: f64 = 9.15;
    const PENALTY_DEPTH: f64 = 16.5;
    const PENALTY_WIDTH: f64 = 40.32;
    const GOAL_DEPTH: f64 = 5.5;
    const GOAL_WIDTH: f64 = 18.32;
    const PENALTY_SPOT: f64 = 11.0;
    const SPOT_R: f64 = 0.11;
    let cy = W / 2.0;

    let mut p = vec![
        Primitive::segment(0.0, 0.0, L, 0.0),
        Primitive::segment(L, 0.0, L, W),
        Primitive::segment(L, W, 0.0, W),
        Primitive::segment(0.0, W, 0.0, 0.0),
        Primitive::segment(L / 2.0, 0.0, L / 2.0, W),
        Primitive::circle(L / 2.0, cy, CIRCLE_R),
        Primitive::circle(L / 2.0, cy, SPOT_R),
    ];
    // Boxes are three segments each; the fourth side lies on the goal line.
    for (depth, width) in [(PENALTY_DEPTH, PENALTY_WIDTH), (GOAL_DEPTH, GOAL_WIDTH)] {
        let (y0, y1) = (cy - width / 2.0, cy + width / 2.0);
        for (goal_x, inner_x) in [(0.0, depth), (L, L - depth)] {
            p.push(Primitive::segment(goal_x, y0, inner_x, y0));
            p.push(Primitive::segment(inner_x, y0, inner_x, y1));
            p.push(Primitive::segment(inner_x, y1, goal_x, y1));
        }
    }
    p.push(Primitive::circle(PENALTY_SPOT, cy, SPOT_R));
    p.push(Primitive::circle(L - PENALTY_SPOT, cy, SPOT_R));
    // Penalty arcs: the part of the 9.15 m circle outside the penalty area.
    let half = ((PENALTY_DEPTH - PENALTY_SPOT) / CIRCLE_R).acos();
    p.push(Primitive::arc(PENALTY_SPOT, cy, CIRCLE_R, -half, half));
    p.push(Primitive::arc(L - PENALTY_SPOT, cy, CIRCLE_R, PI - half, PI + half));
    for (x, y, a0) in [
        (0.0, 0.0, 0.0),
        (L, 0.0, PI / 2.0),
        (L, W, PI),
        (0.0, W, 3.0 * PI / 2.0),
    ] {
        p.push(Primitive::arc(x, y, 1.0, a0, a0 + PI / 2.0));
    }
    PitchModel::new(L, W, p, px_per_m)
}

/// Result of projecting the model into a camera raster.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub edges: EdgeMap,
    /// Set when no model point is visible in the raster.
    pub empty_render: bool,
}

/// Visible part of the model plane for a given camera: points in front of
/// the camera whose image lies in `[0, W] x [0, H]`. Each constraint is an
/// affine function of the model point that must be non-negative.
struct Visibility {
    to_image: [[f64; 3]; 3],
    constraints: [[f64; 3]; 5],
}

impl Visibility {
    fn new(h: &Homography, width: usize, height: usize) -> Result<Self> {
        let g = raw_inverse(h.matrix()).ok_or(Error::SingularMatrix)?;
        let (w, hh) = (width as f64, height as f64);
        let row = |r: usize| g[r];
        let lin = |a: [f64; 3], sa: f64, b: [f64; 3], sb: f64| {
            [sa * a[0] + sb * b[0], sa * a[1] + sb * b[1], sa * a[2] + sb * b[2]]
        };
        let g2 = row(2);
        let norm2 = (g2[0] * g2[0] + g2[1] * g2[1]).sqrt().max(g2[2].abs());
        let front = [g2[0], g2[1], g2[2] - 1e-9 * norm2.max(1e-300)];
        Ok(Self {
            to_image: g,
            constraints: [
                front,
                row(0),
                lin(g2, w, row(0), -1.0),
                row(1),
                lin(g2, hh, row(1), -1.0),
            ],
        })
    }

    fn eval(c: &[f64; 3], p: Point2) -> f64 {
        c[0] * p.x + c[1] * p.y + c[2]
    }

    fn contains(&self, p: Point2) -> bool {
        self.constraints.iter().all(|c| Self::eval(c, p) >= 0.0)
    }

    fn project(&self, p: Point2) -> Point2 {
        let g = &self.to_image;
        let w = g[2][0] * p.x + g[2][1] * p.y + g[2][2];
        Point2::new(
            (g[0][0] * p.x + g[0][1] * p.y + g[0][2]) / w,
            (g[1][0] * p.x + g[1][1] * p.y + g[1][2]) / w,
        )
    }

    /// Parameter interval of `a + t (b - a)`, `t ∈ [0, 1]`, inside the region.
    fn clip_segment(&self, a: Point2, b: Point2) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for c in &self.constraints {
            let fa = Self::eval(c, a);
            let fb = Self::eval(c, b);
            if fa < 0.0 && fb < 0.0 {
                return None;
            }
            if fa < 0.0 {
                t0 = t0.max(fa / (fa - fb));
            } else if fb < 0.0 {
                t1 = t1.min(fa / (fa - fb));
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    /// True when the disk certainly lies outside the region.
    fn disk_outside(&self, center: Point2, radius: f64) -> bool {
        self.constraints.iter().any(|c| {
            let n = c[0].hypot(c[1]);
            Self::eval(c, center) + n * radius < 0.0
        })
    }
}

struct Rasterizer<'a> {
    vis: Visibility,
    out: &'a mut EdgeMap,
}

impl Rasterizer<'_> {
    fn pixel(&self, p: Point2) -> (i64, i64) {
        let (w, h) = (self.out.width() as i64, self.out.height() as i64);
        let x = (p.x.floor() as i64).clamp(0, w - 1);
        let y = (p.y.floor() as i64).clamp(0, h - 1);
        (x, y)
    }

    fn draw_model_segment(&mut self, a: Point2, b: Point2) {
        let Some((t0, t1)) = self.vis.clip_segment(a, b) else {
            return;
        };
        let d = b.sub(a);
        let pa = self.vis.project(a.add(d.scale(t0)));
        let pb = self.vis.project(a.add(d.scale(t1)));
        if !pa.is_finite() || !pb.is_finite() {
            return;
        }
        let (x0, y0) = self.pixel(pa);
        let (x1, y1) = self.pixel(pb);
        let out = &mut *self.out;
        bresenham(x0, y0, x1, y1, |x, y| out.set_checked(x, y));
    }

    fn draw_arc(&mut self, center: Point2, r: f64, a0: f64, a1: f64, depth: u32) {
        let p0 = arc_point(center, r, a0);
        let p1 = arc_point(center, r, a1);
        let half = 0.5 * (a1 - a0);
        let chord_mid = p0.add(p1).scale(0.5);
        let sagitta = r * (1.0 - half.cos());
        let bound = 0.5 * p0.distance(p1) + sagitta;
        if self.vis.disk_outside(chord_mid, bound) {
            return;
        }
        let mid = arc_point(center, r, a0 + half);
        let fine_enough = self.vis.contains(p0)
            && self.vis.contains(p1)
            && self.vis.contains(mid)
            && {
                let (i0, i1, im) = (self.vis.project(p0), self.vis.project(p1), self.vis.project(mid));
                point_segment_distance(im, i0, i1) <= CHORD_TOLERANCE_PX
            };
        if fine_enough || depth >= 40 || a1 - a0 < 1e-7 {
            self.draw_model_segment(p0, p1);
        } else {
            self.draw_arc(center, r, a0, a0 + half, depth + 1);
            self.draw_arc(center, r, a0 + half, a1, depth + 1);
        }
    }

    fn draw(&mut self, prim: &Primitive) {
        match *prim {
            Primitive::Segment { a, b } => self.draw_model_segment(a, b),
            Primitive::Arc {
                center,
                radius_m,
                start_angle,
                end_angle,
            } => {
                let sweep = end_angle - start_angle;
                let pieces = (sweep / (PI / 8.0)).ceil().max(1.0) as usize;
                let step = sweep / pieces as f64;
                for i in 0..pieces {
                    let a0 = start_angle + step * i as f64;
                    let a1 = if i + 1 == pieces { end_angle } else { a0 + step };
                    self.draw_arc(center, radius_m, a0, a1, 0);
                }
            }
        }
    }
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a.add(ab.scale(t)))
}

/// Renders the model as seen through `h` (image → model) into a
/// `width x height` raster with 1-px strokes.
pub fn render_camera_view(
    model: &PitchModel,
    h: &Homography,
    width: usize,
    height: usize,
) -> Result<CameraView> {
    let mut edges = EdgeMap::new(width, height);
    let mut r = Rasterizer {
        vis: Visibility::new(h, width, height)?,
        out: &mut edges,
    };
    for prim in &model.primitives {
        r.draw(prim);
    }
    let empty_render = edges.is_empty();
    Ok(CameraView { edges, empty_render })
}

pub fn render_topview(model: &PitchModel) -> EdgeMap {
    let (w, h) = model.topview_dims();
    render_camera_view(model, &model.topview_homography(), w, h)
        .expect("top-view homography is invertible")
        .edges
}
