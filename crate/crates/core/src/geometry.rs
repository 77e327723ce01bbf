//! Projective geometry on the pitch plane.
//!
//! Homographies are kept in a canonical scale (`m[2][2] = 1` when possible)
//! so that entry-wise comparisons between them are meaningful. Quads are
//! convex and counter-clockwise in model coordinates.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Below this magnitude a homogeneous coordinate counts as zero.
pub const HOMOGENEOUS_EPS: f64 = 1e-12;
/// Minimum triangle / polygon area for non-degenerate configurations.
pub const AREA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub src: Point2,
    pub dst: Point2,
}

impl Correspondence {
    pub fn new(src: Point2, dst: Point2) -> Self {
        Self { src, dst }
    }
}

/// A planar projective map, stored row-major in canonical scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

/// Scales `m` so that `m[2][2] = 1`, or to unit Frobenius norm with the first
/// nonzero entry positive when `m[2][2]` vanishes.
pub fn canonicalize(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let frob = m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if m[2][2].abs() > HOMOGENEOUS_EPS * frob.max(1.0) {
        m[2][2]
    } else {
        let first = m
            .iter()
            .flatten()
            .copied()
            .find(|v| *v != 0.0)
            .unwrap_or(1.0);
        frob.max(f64::MIN_POSITIVE) * first.signum()
    };
    let mut out = m;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v /= scale;
        }
    }
    out
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Exact inverse of a raw 3x3 matrix (no rescaling).
pub(crate) fn raw_inverse(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = det3(m);
    if !det.is_finite() || det.abs() <= HOMOGENEOUS_EPS {
        return None;
    }
    let inv_det = 1.0 / det;
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    Some([
        [c(1, 1, 2, 2) * inv_det, -c(0, 1, 2, 2) * inv_det, c(0, 1, 1, 2) * inv_det],
        [-c(1, 0, 2, 2) * inv_det, c(0, 0, 2, 2) * inv_det, -c(0, 0, 1, 2) * inv_det],
        [c(1, 0, 2, 1) * inv_det, -c(0, 0, 2, 1) * inv_det, c(0, 0, 1, 1) * inv_det],
    ])
}

impl Homography {
    /// Builds a canonical homography, rejecting singular or non-finite input.
    pub fn new(m: [[f64; 3]; 3]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("homography entry"));
        }
        let m = canonicalize(m);
        let det = det3(&m);
        if !det.is_finite() || det.abs() <= HOMOGENEOUS_EPS {
            return Err(Error::SingularMatrix);
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::Format(format!(
                "homography needs 9 values, got {}",
                v.len()
            )));
        }
        Self::new([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn to_array(&self) -> [f64; 9] {
        let m = &self.m;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }

    /// The eight free entries (all but `m[2][2]`), row-major.
    pub fn entries8(&self) -> [f64; 8] {
        let a = self.to_array();
        [a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]]
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.m)
    }

    /// Homogeneous image of `(x, y, 1)`.
    pub fn apply_homogeneous(&self, p: Point2) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * p.x + m[0][1] * p.y + m[0][2],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2],
        ]
    }

    pub fn apply(&self, p: Point2) -> Result<Point2> {
        let [x, y, w] = self.apply_homogeneous(p);
        if !w.is_finite() || w.abs() <= HOMOGENEOUS_EPS {
            return Err(Error::PointAtInfinity);
        }
        let out = Point2::new(x / w, y / w);
        if !out.is_finite() {
            return Err(Error::PointAtInfinity);
        }
        Ok(out)
    }

    pub fn invert(&self) -> Result<Homography> {
        let inv = raw_inverse(&self.m).ok_or(Error::SingularMatrix)?;
        Homography::new(inv)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Homography::new(out)
    }

    pub fn max_abs_diff(&self, other: &Homography) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Homography {
    /// Nine whitespace-separated decimals, row-major.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.to_array();
        for (i, v) in a.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v:e}")?;
        }
        Ok(())
    }
}

impl FromStr for Homography {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let vals = s
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad homography value {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Homography::from_slice(&vals)
    }
}

fn triangle_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * b.sub(a).cross(c.sub(a)).abs()
}

fn check_no_collinear(points: &[Point2], what: &str) -> Result<()> {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            for k in (j + 1)..points.len() {
                if triangle_area(points[i], points[j], points[k]) < AREA_EPS {
                    return Err(Error::DegenerateConfiguration(format!(
                        "{what} points {i}, {j}, {k} are collinear or coincident"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn normalizing_transform(points: &[Point2]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| (p.x - cx).hypot(p.y - cy))
        .sum::<f64>()
        / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::DegenerateConfiguration(
            "all points coincide".to_string(),
        ));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn transform_point(t: &Matrix3<f64>, p: Point2) -> Point2 {
    let v = t * Vector3::new(p.x, p.y, 1.0);
    Point2::new(v.x / v.z, v.y / v.z)
}

/// Normalized DLT homography estimate mapping `src` points onto `dst` points.
pub fn estimate_dlt(pairs: &[Correspondence]) -> Result<Homography> {
    if pairs.len() < 4 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 4 correspondences, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|c| !c.src.is_finite() || !c.dst.is_finite()) {
        return Err(Error::NonFinite("correspondence"));
    }
    let src: Vec<Point2> = pairs.iter().map(|c| c.src).collect();
    let dst: Vec<Point2> = pairs.iter().map(|c| c.dst).collect();
    check_no_collinear(&src, "source")?;

    let t_src = normalizing_transform(&src)?;
    let t_dst = normalizing_transform(&dst)?;

    // Pad to at least 9 rows so the SVD yields a full right basis.
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in pairs.iter().enumerate() {
        let s = transform_point(&t_src, c.src);
        let d = transform_point(&t_dst, c.dst);
        let r = 2 * i;
        a[(r, 0)] = -s.x;
        a[(r, 1)] = -s.y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = d.x * s.x;
        a[(r, 7)] = d.x * s.y;
        a[(r, 8)] = d.x;
        a[(r + 1, 3)] = -s.x;
        a[(r + 1, 4)] = -s.y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = d.y * s.x;
        a[(r + 1, 7)] = d.y * s.y;
        a[(r + 1, 8)] = d.y;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::SingularMatrix)?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::SingularMatrix)?;
    let h = v_t.row(min_idx);
    let h_norm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst.try_inverse().ok_or(Error::SingularMatrix)?;
    let full = t_dst_inv * h_norm * t_src;
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = full[(i, j)];
        }
    }
    Homography::new(m)
}

/// Signed shoelace area; positive for counter-clockwise polygons.
pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

fn is_strictly_convex(c: &[Point2; 4]) -> bool {
    let mut sign = 0.0;
    for i in 0..4 {
        let a = c[i];
        let b = c[(i + 1) % 4];
        let d = c[(i + 2) % 4];
        let z = b.sub(a).cross(d.sub(b));
        if z == 0.0 || !z.is_finite() {
            return false;
        }
        if sign == 0.0 {
            sign = z.signum();
        } else if z.signum() != sign {
            return false;
        }
    }
    true
}

/// Convex, counter-clockwise quadrilateral with positive area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    corners: [Point2; 4],
}

impl Quad {
    /// Validates convexity and area. Clockwise input is reordered to
    /// counter-clockwise as `[c0, c3, c2, c1]` so `c0` keeps its index.
    pub fn new(corners: [Point2; 4]) -> Result<Self> {
        if corners.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("quad corner"));
        }
        if !is_strictly_convex(&corners) {
            return Err(Error::NonConvexResult);
        }
        let area = signed_area(&corners);
        if area.abs() <= AREA_EPS {
            return Err(Error::DegeneratePolygon(format!("area {area:e}")));
        }
        let corners = if area > 0.0 {
            corners
        } else {
            [corners[0], corners[3], corners[2], corners[1]]
        };
        Ok(Self { corners })
    }

    pub fn corners(&self) -> &[Point2; 4] {
        &self.corners
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.corners)
    }

    /// Mean of the four corners.
    pub fn vertex_centroid(&self) -> Point2 {
        let s = self
            .corners
            .iter()
            .fold(Point2::default(), |acc, p| acc.add(*p));
        s.scale(0.25)
    }

    pub fn max_corner_distance(&self, other: &Quad) -> f64 {
        self.corners
            .iter()
            .zip(other.corners.iter())
            .map(|(a, b)| a.distance(*b))
            .fold(0.0, f64::max)
    }
}

/// Applies `h` to the four points and validates the result as a [`Quad`].
pub fn project_corners(h: &Homography, corners: &[Point2; 4]) -> Result<Quad> {
    let mut out = [Point2::default(); 4];
    for (o, p) in out.iter_mut().zip(corners.iter()) {
        *o = h.apply(*p)?;
    }
    Quad::new(out)
}

pub fn warp_quad(h: &Homography, q: &Quad) -> Result<Quad> {
    project_corners(h, q.corners())
}

/// Sutherland–Hodgman clip of `subject` against the convex CCW polygon `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let edge = b.sub(a);
        let inside = |p: Point2| edge.cross(p.sub(a)) >= 0.0;
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in {
                if !prev_in {
                    output.push(segment_line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn segment_line_intersection(p: Point2, q: Point2, a: Point2, b: Point2) -> Point2 {
    let edge = b.sub(a);
    let dp = edge.cross(p.sub(a));
    let dq = edge.cross(q.sub(a));
    let t = dp / (dp - dq);
    p.add(q.sub(p).scale(t))
}

/// Intersection-over-union (Jaccard index) of two convex quads.
pub fn polygon_iou(a: &Quad, b: &Quad) -> Result<f64> {
    let area_a = a.area();
    let area_b = b.area();
    if area_a <= AREA_EPS || area_b <= AREA_EPS {
        return Err(Error::DegeneratePolygon("zero-area input".to_string()));
    }
    if a == b {
        return Ok(1.0);
    }
    // Clip the same way round regardless of argument order so the result
    // is exactly symmetric.
    let (s, c) = if order_key(a) <= order_key(b) { (a, b) } else { (b, a) };
    let inter = signed_area(&clip_convex(s.corners(), c.corners()))
        .max(0.0)
        .min(area_a.min(area_b));
    let union = area_a + area_b - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

fn order_key(q: &Quad) -> [u64; 8] {
    let c = q.corners();
    let mut k = [0u64; 8];
    for (i, p) in c.iter().enumerate() {
        k[2 * i] = p.x.to_bits();
        k[2 * i + 1] = p.y.to_bits();
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> [Point2; 4] {
        [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    fn random_h(rng: &mut ChaCha8Rng) -> Homography {
        loop {
            let m = [
                [rng.gen_range(0.5..2.0), rng.gen_range(-0.3..0.3), rng.gen_range(-5.0..5.0)],
                [rng.gen_range(-0.3..0.3), rng.gen_range(0.5..2.0), rng.gen_range(-5.0..5.0)],
                [rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01), 1.0],
            ];
            if let Ok(h) = Homography::new(m) {
                return h;
            }
        }
    }

    #[test]
    fn apply_identity_and_scale() {
        let p = Point2::new(10.0, 20.0);
        assert_eq!(Homography::identity().apply(p).unwrap(), p);
        let s = Homography::new([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(s.apply(Point2::new(3.0, 4.0)).unwrap(), Point2::new(6.0, 8.0));
    }

    #[test]
    fn apply_matches_direct_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_h(&mut rng);
        let m = h.matrix();
        for _ in 0..100 {
            let (x, y) = (rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
            let w = m[2][0] * x + m[2][1] * y + m[2][2];
            let ex = (m[0][0] * x + m[0][1] * y + m[0][2]) / w;
            let ey = (m[1][0] * x + m[1][1] * y + m[1][2]) / w;
            let p = h.apply(Point2::new(x, y)).unwrap();
            assert!((p.x - ex).abs() < 1e-10 && (p.y - ey).abs() < 1e-10);
        }
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(h.apply(Point2::new(-1.0, 3.0)), Err(Error::PointAtInfinity)));
    }

    #[test]
    fn invert_simple_cases() {
        assert_eq!(Homography::identity().invert().unwrap(), Homography::identity());
        let s = Homography::new([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let inv = s.invert().unwrap();
        let expect = Homography::new([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert!(inv.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn singular_rejected() {
        let m = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]];
        assert!(matches!(Homography::new(m), Err(Error::SingularMatrix)));
    }

    #[test]
    fn canonical_fallback_when_m22_zero() {
        let h = Homography::new([[0.0, -2.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert!(h.is_err());
        let h = Homography::new([[0.0, -2.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let a = h.to_array();
        let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((frob - 1.0).abs() < 1e-12);
        assert!(a[1] > 0.0);
        let h2 = Homography::new([[0.0, 2.0, -1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]).unwrap();
        assert_eq!(h2, h);
    }

    #[test]
    fn dlt_identity_and_scale() {
        let sq = unit_square();
        let id: Vec<_> = sq.iter().map(|p| Correspondence::new(*p, *p)).collect();
        assert!(estimate_dlt(&id).unwrap().max_abs_diff(&Homography::identity()) < 1e-12);
        let scaled: Vec<_> = sq.iter().map(|p| Correspondence::new(*p, p.scale(2.0))).collect();
        let h = estimate_dlt(&scaled).unwrap();
        let expect = Homography::new([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert!(h.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn dlt_recovers_known_homography() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let h = random_h(&mut rng);
            let pts: Vec<Point2> = (0..4)
                .map(|_| Point2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)))
                .collect();
            let pairs: Vec<_> = pts.iter().map(|p| Correspondence::new(*p, h.apply(*p).unwrap())).collect();
            match estimate_dlt(&pairs) {
                Ok(est) => assert!(est.max_abs_diff(&h) < 1e-8, "{}", est.max_abs_diff(&h)),
                Err(Error::DegenerateConfiguration(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn dlt_rejects_collinear() {
        let pairs: Vec<_> = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (0.0, 1.0)]
            .iter()
            .map(|&(x, y)| Correspondence::new(Point2::new(x, y), Point2::new(x, y)))
            .collect();
        assert!(matches!(estimate_dlt(&pairs), Err(Error::DegenerateConfiguration(_))));
        let three = &pairs[..3];
        assert!(estimate_dlt(three).is_err());
    }

    #[test]
    fn dlt_similarity_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_h(&mut rng);
        let src = [
            Point2::new(0.0, 0.0),
            Point2::new(256.0, 0.0),
            Point2::new(256.0, 144.0),
            Point2::new(0.0, 144.0),
        ];
        let pairs: Vec<_> = src.iter().map(|p| Correspondence::new(*p, h.apply(*p).unwrap())).collect();
        let base = estimate_dlt(&pairs).unwrap();
        // similarity S on the source side: estimate(S p -> q) = H ∘ S⁻¹
        let (c, s, tx, ty, k) = (0.3f64.cos(), 0.3f64.sin(), 12.0, -4.0, 1.7);
        let sim = Homography::new([[k * c, -k * s, tx], [k * s, k * c, ty], [0.0, 0.0, 1.0]]).unwrap();
        let moved: Vec<_> = pairs
            .iter()
            .map(|c| Correspondence::new(sim.apply(c.src).unwrap(), c.dst))
            .collect();
        let est = estimate_dlt(&moved).unwrap();
        let expect = base.compose(&sim.invert().unwrap()).unwrap();
        assert!(est.max_abs_diff(&expect) < 1e-7);
    }

    #[test]
    fn warp_quad_cases() {
        let q = Quad::new(unit_square()).unwrap();
        assert_eq!(warp_quad(&Homography::identity(), &q).unwrap(), q);
        let t = Homography::new([[1.0, 0.0, 5.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let w = warp_quad(&t, &q).unwrap();
        for (a, b) in w.corners().iter().zip(q.corners()) {
            assert_eq!(a.x, b.x + 5.0);
            assert_eq!(a.y, b.y);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_h(&mut rng);
        let w = warp_quad(&h, &q).unwrap();
        for (a, b) in w.corners().iter().zip(q.corners()) {
            assert!(a.distance(h.apply(*b).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn warp_quad_reflection_restores_ccw() {
        let q = Quad::new(unit_square()).unwrap();
        let flip = Homography::new([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let w = warp_quad(&flip, &q).unwrap();
        assert!(w.area() > 0.0);
        assert_eq!(w.corners()[0], Point2::new(0.0, 0.0));
    }

    #[test]
    fn quad_rejects_nonconvex() {
        let c = [
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(0.0, 2.0),
        ];
        assert!(matches!(Quad::new(c), Err(Error::NonConvexResult)));
    }

    #[test]
    fn iou_known_values() {
        let a = Quad::new(unit_square()).unwrap();
        assert_eq!(polygon_iou(&a, &a).unwrap(), 1.0);
        let shifted = |dx: f64| {
            Quad::new([
                Point2::new(dx, 0.0),
                Point2::new(dx + 1.0, 0.0),
                Point2::new(dx + 1.0, 1.0),
                Point2::new(dx, 1.0),
            ])
            .unwrap()
        };
        assert_eq!(polygon_iou(&a, &shifted(3.0)).unwrap(), 0.0);
        assert!((polygon_iou(&a, &shifted(0.5)).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    fn arb_quad() -> impl Strategy<Value = Quad> {
        (
            -10.0..10.0f64,
            -10.0..10.0f64,
            1.0..8.0f64,
            0.0..std::f64::consts::TAU,
            prop::array::uniform4(0.6..1.0f64),
            prop::array::uniform4(-0.3..0.3f64),
        )
            .prop_map(|(cx, cy, r, rot, rs, jit)| {
                let mut c = [Point2::default(); 4];
                for i in 0..4 {
                    let ang = rot + i as f64 * std::f64::consts::FRAC_PI_2 + jit[i];
                    c[i] = Point2::new(cx + r * rs[i] * ang.cos(), cy + r * rs[i] * ang.sin());
                }
                c
            })
            .prop_filter_map("convex", |c| Quad::new(c).ok())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_quad(), b in arb_quad()) {
            let ab = polygon_iou(&a, &b).unwrap();
            let ba = polygon_iou(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(polygon_iou(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn canonicalize_idempotent(v in prop::array::uniform9(-10.0..10.0f64)) {
            let m = [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]];
            let once = canonicalize(m);
            let twice = canonicalize(once);
            for i in 0..3 { for j in 0..3 {
                prop_assert!((once[i][j] - twice[i][j]).abs() <= 1e-15 * once[i][j].abs().max(1.0));
            }}
        }

        #[test]
        fn apply_invert_roundtrip(seed in 0u64..1000, x in -100.0..100.0f64, y in -100.0..100.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_h(&mut rng);
            let p = Point2::new(x, y);
            if let Ok(q) = h.apply(p) {
                let back = h.invert().unwrap().apply(q).unwrap();
                prop_assert!(back.distance(p) < 1e-9);
            }
        }
    }

    #[test]
    fn homography_text_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_h(&mut rng);
        let parsed: Homography = h.to_string().parse().unwrap();
        assert_eq!(parsed, h);
        assert!("1 2 3".parse::<Homography>().is_err());
    }
}
