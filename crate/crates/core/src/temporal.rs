//! Video-level refinement: candidate selection over frames and camera path
//! stabilization.
//!
//! Per-frame quads are described by six camera parameters: the ground point
//! `(cx, cy)` where the quad's side lines meet, the bisector direction
//! `theta`, the angle `phi` between the side lines, and the distances `r1`,
//! `r2` from `(cx, cy)` to the near and far edges along the bisector.

use crate::dictionary::{side_convergence, Dictionary, Raster};
use crate::error::{Error, Result};
use crate::geometry::{estimate_dlt, Correspondence, Homography, Point2, Quad};
use crate::matcher::CandidateSet;

/// Smallest field angle accepted when rebuilding a quad.
pub const MIN_PHI: f64 = 1e-4;
/// Floor applied to candidate distances before taking the log.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraParams {
    pub cx: f64,
    pub cy: f64,
    pub theta: f64,
    pub phi: f64,
    pub r1: f64,
    pub r2: f64,
}

impl CameraParams {
    pub fn to_array(&self) -> [f64; 6] {
        [self.cx, self.cy, self.theta, self.phi, self.r1, self.r2]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            cx: a[0],
            cy: a[1],
            theta: a[2],
            phi: a[3],
            r1: a[4],
            r2: a[5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if !(self.phi >= MIN_PHI && self.phi < std::f64::consts::PI) {
            return Err(Error::InvalidParams(format!("phi {} outside [{MIN_PHI}, π)", self.phi)));
        }
        if !(self.r1 > 0.0 && self.r1 < self.r2) {
            return Err(Error::InvalidParams(format!(
                "need 0 < r1 < r2, got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        Ok(())
    }
}

fn unit(p: Point2) -> Point2 {
    p.scale(1.0 / p.norm())
}

/// Distance along the ray `origin + t dir` to segment `ab`, if it is hit.
fn ray_segment(origin: Point2, dir: Point2, a: Point2, b: Point2) -> Option<f64> {
    let e = b.sub(a);
    let denom = dir.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let d = a.sub(origin);
    let t = d.cross(e) / denom;
    let s = d.cross(dir) / denom;
    const SLACK: f64 = 1e-9;
    (t > 0.0 && (-SLACK..=1.0 + SLACK).contains(&s)).then_some(t)
}

pub fn quad_to_camera(q: &Quad) -> Result<CameraParams> {
    let apex = side_convergence(q)?;
    let c = q.corners();
    let left = unit(c[3].sub(c[0]));
    let right = unit(c[2].sub(c[1]));
    if c[0].sub(apex).dot(left) <= 0.0 || c[1].sub(apex).dot(right) <= 0.0 {
        return Err(Error::InvalidParams(
            "side lines converge beyond the near edge".into(),
        ));
    }
    let bisector = unit(left.add(right));
    let phi = left.dot(right).clamp(-1.0, 1.0).acos();
    let r1 = ray_segment(apex, bisector, c[0], c[1]).ok_or(Error::BisectorMiss("near"))?;
    let r2 = ray_segment(apex, bisector, c[3], c[2]).ok_or(Error::BisectorMiss("far"))?;
    let params = CameraParams {
        cx: apex.x,
        cy: apex.y,
        theta: bisector.y.atan2(bisector.x),
        phi,
        r1,
        r2,
    };
    params.validate()?;
    Ok(params)
}

/// Isosceles trapezoid whose near and far edges are perpendicular to the
/// bisector at distances `r1` and `r2` from the apex.
pub fn camera_to_quad(c: &CameraParams) -> Result<Quad> {
    c.validate()?;
    let apex = Point2::new(c.cx, c.cy);
    let half = 0.5 * c.phi;
    let k = 1.0 / half.cos();
    let left = Point2::new((c.theta + half).cos(), (c.theta + half).sin());
    let right = Point2::new((c.theta - half).cos(), (c.theta - half).sin());
    Quad::new([
        apex.add(left.scale(c.r1 * k)),
        apex.add(right.scale(c.r1 * k)),
        apex.add(right.scale(c.r2 * k)),
        apex.add(left.scale(c.r2 * k)),
    ])
    .map_err(|e| Error::InvalidParams(e.to_string()))
}

/// Scaled Euclidean distance between the eight free entries of two
/// canonical homographies.
pub fn homography_distance(a: &Homography, b: &Homography, scales: &[f64; 8]) -> Result<f64> {
    if a.matrix()[2][2] != 1.0 || b.matrix()[2][2] != 1.0 {
        return Err(Error::NormalizationImpossible);
    }
    let (ea, eb) = (a.entries8(), b.entries8());
    let mut acc = 0.0;
    for k in 0..8 {
        let d = (ea[k] - eb[k]) / scales[k];
        acc += d * d;
    }
    Ok(acc.sqrt())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePath {
    /// Zero-based candidate index per frame.
    pub states: Vec<usize>,
}

/// Relative gap below which two path energies count as tied; it absorbs
/// the rounding that makes mathematically equal sums differ by an ulp.
pub const TIE_TOL: f64 = 1e-12;

/// Whether `a` and `b` are equal up to [`TIE_TOL`].
pub fn energies_tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Lowest index whose value ties with the minimum.
fn first_minimum(v: &[f64]) -> usize {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    v.iter().position(|x| energies_tied(*x, min)).unwrap_or(0)
}

/// Exact minimizer of `Σ data[t][s_t] + Σ pair(t, s_{t-1}, s_t)` by dynamic
/// programming. Among equal-energy paths the one with the smallest final
/// state wins, then the smallest predecessor at each step going backwards.
pub fn viterbi(data: &[Vec<f64>], mut pair: impl FnMut(usize, usize, usize) -> f64) -> Result<StatePath> {
    if data.is_empty() {
        return Err(Error::EmptyCandidates(0));
    }
    if let Some(t) = data.iter().position(|d| d.is_empty()) {
        return Err(Error::EmptyCandidates(t));
    }
    let mut acc: Vec<f64> = data[0].clone();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(data.len());
    back.push(vec![0; data[0].len()]);
    for t in 1..data.len() {
        let mut next = Vec::with_capacity(data[t].len());
        let mut bp = Vec::with_capacity(data[t].len());
        for (s, d) in data[t].iter().enumerate() {
            let v: Vec<f64> = acc.iter().enumerate().map(|(p, a)| a + pair(t, p, s)).collect();
            let arg = first_minimum(&v);
            next.push(v[arg] + d);
            bp.push(arg);
        }
        acc = next;
        back.push(bp);
    }
    let mut state = first_minimum(&acc);
    let mut states = vec![0; data.len()];
    for t in (0..data.len()).rev() {
        states[t] = state;
        state = back[t][state];
    }
    Ok(StatePath { states })
}

/// Data costs `log(max(distance, floor))` per frame and candidate.
pub fn data_costs(candidates: &[CandidateSet]) -> Vec<Vec<f64>> {
    candidates
        .iter()
        .map(|c| {
            c.candidates
                .iter()
                .map(|cand| cand.distance.max(DISTANCE_FLOOR).ln())
                .collect()
        })
        .collect()
}

/// Selects one candidate per frame, trading the nearest-neighbour distance
/// against the jump between consecutive homographies.
pub fn mrf_smooth(candidates: &[CandidateSet], dict: &Dictionary, w_smooth: f64) -> Result<StatePath> {
    if let Some(t) = candidates.iter().position(|c| c.candidates.is_empty()) {
        return Err(Error::EmptyCandidates(t));
    }
    for c in candidates.iter().flat_map(|c| &c.candidates) {
        if c.entry_index >= dict.len() {
            return Err(Error::Format(format!(
                "candidate entry {} outside dictionary of {}",
                c.entry_index,
                dict.len()
            )));
        }
    }
    let data = data_costs(candidates);
    // pairwise distances are precomputed so errors surface before the DP
    let mut pair_costs: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
    pair_costs.push(Vec::new());
    for t in 1..candidates.len() {
        let prev = &candidates[t - 1].candidates;
        let cur = &candidates[t].candidates;
        let mut m = Vec::with_capacity(prev.len() * cur.len());
        for p in prev {
            for s in cur {
                let d = homography_distance(&dict.entries[p.entry_index].h, &dict.entries[s.entry_index].h, &dict.scales)?;
                m.push(w_smooth * d);
            }
        }
        pair_costs.push(m);
    }
    viterbi(&data, |t, p, s| pair_costs[t][p * candidates[t].candidates.len() + s])
}

/// Energy of a given state path under the same costs as [`mrf_smooth`].
pub fn mrf_energy(candidates: &[CandidateSet], dict: &Dictionary, w_smooth: f64, path: &StatePath) -> Result<f64> {
    let data = data_costs(candidates);
    let mut e = data[0][path.states[0]];
    for t in 1..candidates.len() {
        let a = &dict.entries[candidates[t - 1].candidates[path.states[t - 1]].entry_index].h;
        let b = &dict.entries[candidates[t].candidates[path.states[t]].entry_index].h;
        e = e + w_smooth * homography_distance(a, b, &dict.scales)? + data[t][path.states[t]];
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Unit of each camera parameter `(cx, cy, theta, phi, r1, r2)`.
    pub param_scales: [f64; 6],
}

impl Default for SmoothingWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.1,
            lambda2: 1.0,
            lambda3: 10.0,
            param_scales: [1.0, 1.0, 0.01, 0.01, 1.0, 1.0],
        }
    }
}

impl SmoothingWeights {
    pub fn validate(&self) -> Result<()> {
        let l = [self.lambda1, self.lambda2, self.lambda3];
        if l.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || l.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidParams(format!("bad smoothing weights {l:?}")));
        }
        if self.param_scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParams("parameter scales must be positive".into()));
        }
        Ok(())
    }

    fn lambdas(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }
}

const DIFF_STENCILS: [&[f64]; 3] = [&[-1.0, 1.0], &[1.0, -2.0, 1.0], &[-1.0, 3.0, -3.0, 1.0]];

/// `Σ_t |(D^k x)_t|` for the k-th forward difference.
pub fn difference_l1(x: &[f64], order: usize) -> f64 {
    let st = DIFF_STENCILS[order - 1];
    if x.len() <= order {
        return 0.0;
    }
    (0..x.len() - order)
        .map(|t| st.iter().enumerate().map(|(j, c)| c * x[t + j]).sum::<f64>().abs())
        .sum()
}

/// `‖x − y‖² + Σ_k λ_k ‖D^k x‖₁` for one parameter series.
pub fn trend_objective(y: &[f64], x: &[f64], lambdas: [f64; 3]) -> f64 {
    let fit: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    fit + (1..=3)
        .map(|k| if lambdas[k - 1] > 0.0 { lambdas[k - 1] * difference_l1(x, k) } else { 0.0 })
        .sum::<f64>()
}

/// Symmetric positive-definite banded matrix factorized as `L Lᵀ`.
struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `l[i][d] = L[i][i - d]`
    l: Vec<Vec<f64>>,
}

impl BandedCholesky {
    /// `band[i][d] = A[i][i + d]` for `d ≤ bw`.
    fn factor(band: &[Vec<f64>], bw: usize) -> Result<Self> {
        let n = band.len();
        let mut l = vec![vec![0.0; bw + 1]; n];
        for i in 0..n {
            for d in (0..=bw.min(i)).rev() {
                let j = i - d;
                let mut s = band[j][d];
                for k in 1..=(bw - d).min(j) {
                    // L[i][j-k] * L[j][j-k]
                    s -= l[i][d + k] * l[j][k];
                }
                if d == 0 {
                    if s <= 0.0 {
                        return Err(Error::SolverDiverged("system not positive definite".into()));
                    }
                    l[i][0] = s.sqrt();
                } else {
                    l[i][d] = s / l[j][0];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    fn solve(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let mut s = b[i];
            for d in 1..=self.bw.min(i) {
                s -= self.l[i][d] * b[i - d];
            }
            b[i] = s / self.l[i][0];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for d in 1..=self.bw.min(self.n - 1 - i) {
                s -= self.l[i + d][d] * b[i + d];
            }
            b[i] = s / self.l[i][0];
        }
    }
}

struct DiffOperator {
    n: usize,
    /// (order, weight) of each active difference block.
    blocks: Vec<(usize, f64)>,
}

impl DiffOperator {
    fn rows(&self) -> usize {
        self.blocks.iter().map(|(k, _)| self.n - k).sum()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut r = 0;
        for &(k, _) in &self.blocks {
            let st = DIFF_STENCILS[k - 1];
            for t in 0..self.n - k {
                out[r] = st.iter().enumerate().map(|(j, c)| c * x[t + j]).sum();
                r += 1;
            }
        }
    }

    fn apply_transpose(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut r = 0;
        for &(k, _) in &self.blocks {
            let st = DIFF_STENCILS[k - 1];
            for t in 0..self.n - k {
                for (j, c) in st.iter().enumerate() {
                    out[t + j] += c * z[r];
                }
                r += 1;
            }
        }
    }

    fn weights(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|&(k, w)| std::iter::repeat_n(w, self.n - k))
            .collect()
    }

    /// Band of `2I + ρ DᵀD`.
    fn normal_band(&self, rho: f64) -> Vec<Vec<f64>> {
        let mut band = vec![vec![0.0; 4]; self.n];
        for row in band.iter_mut() {
            row[0] = 2.0;
        }
        for &(k, _) in &self.blocks {
            let st = DIFF_STENCILS[k - 1];
            for t in 0..self.n - k {
                for a in 0..st.len() {
                    for b in a..st.len() {
                        band[t + a][b - a] += rho * st[a] * st[b];
                    }
                }
            }
        }
        band
    }
}

pub const ADMM_TOL: f64 = 1e-6;
pub const ADMM_MAX_ITERS: usize = 10_000;
const STALL_ITERS: usize = 500;

/// Solves `min ‖x − y‖² + Σ_k λ_k ‖D^k x‖₁` (first, second and third
/// differences) with ADMM on the split `z = D x`.
pub fn l1_trend_filter(y: &[f64], lambdas: [f64; 3]) -> Result<Vec<f64>> {
    let n = y.len();
    let blocks: Vec<(usize, f64)> = (1..=3)
        .filter(|k| lambdas[k - 1] > 0.0 && n > *k)
        .map(|k| (k, lambdas[k - 1]))
        .collect();
    if blocks.is_empty() {
        return Ok(y.to_vec());
    }
    let op = DiffOperator { n, blocks };
    let m = op.rows();
    let weights = op.weights();

    let mut rho = 1.0;
    let mut chol = BandedCholesky::factor(&op.normal_band(rho), 3)?;
    let mut x = y.to_vec();
    let mut dx = vec![0.0; m];
    op.apply(&x, &mut dx);
    let mut z = dx.clone();
    let mut u = vec![0.0; m];
    let mut z_old = vec![0.0; m];
    let mut rhs = vec![0.0; n];
    let mut tmp_n = vec![0.0; n];
    let mut tmp_m = vec![0.0; m];
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;

    for iter in 0..ADMM_MAX_ITERS {
        for i in 0..m {
            tmp_m[i] = z[i] - u[i];
        }
        op.apply_transpose(&tmp_m, &mut rhs);
        for i in 0..n {
            rhs[i] = 2.0 * y[i] + rho * rhs[i];
        }
        chol.solve(&mut rhs);
        x.copy_from_slice(&rhs);

        op.apply(&x, &mut dx);
        z_old.copy_from_slice(&z);
        for i in 0..m {
            let v = dx[i] + u[i];
            let thr = weights[i] / rho;
            z[i] = v.signum() * (v.abs() - thr).max(0.0);
        }
        let mut r2 = 0.0;
        for i in 0..m {
            let r = dx[i] - z[i];
            u[i] += r;
            r2 += r * r;
            tmp_m[i] = z[i] - z_old[i];
        }
        op.apply_transpose(&tmp_m, &mut tmp_n);
        let primal = r2.sqrt();
        let dual = rho * tmp_n.iter().map(|v| v * v).sum::<f64>().sqrt();
        if primal < ADMM_TOL && dual < ADMM_TOL {
            log::debug!("trend filter converged after {} iterations", iter + 1);
            return Ok(keep_better(y, x, lambdas));
        }
        let score = primal.max(dual);
        if score < best {
            best = score;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_ITERS {
                return Err(Error::SolverDiverged(format!(
                    "residuals stalled at {best:e} after {iter} iterations"
                )));
            }
        }
        // residual balancing
        if iter % 20 == 19 && iter < 5000 {
            let new_rho = if primal > 10.0 * dual {
                rho * 2.0
            } else if dual > 10.0 * primal {
                rho / 2.0
            } else {
                rho
            };
            if new_rho != rho {
                for v in u.iter_mut() {
                    *v *= rho / new_rho;
                }
                rho = new_rho;
                chol = BandedCholesky::factor(&op.normal_band(rho), 3)?;
                since_best = 0;
                best = f64::INFINITY;
            }
        }
    }
    log::warn!("trend filter hit the iteration cap; residual {best:e}");
    Ok(keep_better(y, x, lambdas))
}

fn keep_better(y: &[f64], x: Vec<f64>, lambdas: [f64; 3]) -> Vec<f64> {
    if trend_objective(y, &x, lambdas) >= trend_objective(y, y, lambdas) {
        y.to_vec()
    } else {
        x
    }
}

/// Unwraps an angle sequence so consecutive samples differ by less than π.
pub fn unwrap_angles(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    let mut offset = 0.0;
    for (i, v) in a.iter().enumerate() {
        if i > 0 {
            let prev = a[i - 1] + offset;
            let mut cur = v + offset;
            while cur - prev > std::f64::consts::PI {
                cur -= std::f64::consts::TAU;
                offset -= std::f64::consts::TAU;
            }
            while cur - prev < -std::f64::consts::PI {
                cur += std::f64::consts::TAU;
                offset += std::f64::consts::TAU;
            }
        }
        out.push(v + offset);
    }
    out
}

fn scaled_series(path: &[CameraParams], w: &SmoothingWeights) -> Vec<Vec<f64>> {
    (0..6)
        .map(|k| {
            let raw: Vec<f64> = path.iter().map(|p| p.to_array()[k]).collect();
            let raw = if k == 2 { unwrap_angles(&raw) } else { raw };
            raw.iter().map(|v| v / w.param_scales[k]).collect()
        })
        .collect()
}

/// Stabilization energy of `candidate` relative to the observed `path`,
/// in scaled units.
pub fn stabilization_objective(path: &[CameraParams], candidate: &[CameraParams], w: &SmoothingWeights) -> f64 {
    let ys = scaled_series(path, w);
    let xs = scaled_series(candidate, w);
    ys.iter()
        .zip(&xs)
        .map(|(y, x)| trend_objective(y, x, w.lambdas()))
        .sum()
}

/// Smooths the camera path parameter-wise; the output never has a higher
/// energy than the input path itself.
pub fn stabilize(path: &[CameraParams], w: &SmoothingWeights) -> Result<Vec<CameraParams>> {
    if path.len() < 4 {
        return Err(Error::TooShort {
            needed: 4,
            got: path.len(),
        });
    }
    w.validate()?;
    for p in path {
        p.validate()?;
    }
    let ys = scaled_series(path, w);
    let mut xs = Vec::with_capacity(6);
    for y in &ys {
        xs.push(l1_trend_filter(y, w.lambdas())?);
    }
    let out: Vec<CameraParams> = (0..path.len())
        .map(|t| {
            let mut a = path[t].to_array();
            for k in 0..6 {
                // untouched series keep their exact input values
                if xs[k] != ys[k] {
                    a[k] = xs[k][t] * w.param_scales[k];
                }
            }
            CameraParams::from_array(a)
        })
        .collect();
    if stabilization_objective(path, &out, w) > stabilization_objective(path, path, w) {
        return Ok(path.to_vec());
    }
    Ok(out)
}

/// Rebuilds per-frame homographies from camera parameters.
pub fn camera_path_to_homographies(params: &[CameraParams], raster: Raster) -> Result<Vec<Homography>> {
    params
        .iter()
        .map(|p| {
            let q = camera_to_quad(p)?;
            let pairs: Vec<Correspondence> = raster
                .corners()
                .iter()
                .zip(q.corners())
                .map(|(a, b)| Correspondence::new(*a, *b))
                .collect();
            estimate_dlt(&pairs)
        })
        .collect()
}

/// Fills missing frames by linear interpolation in parameter space; leading
/// and trailing gaps copy the nearest known frame. Returns `None` when no
/// frame is known.
pub fn fill_gaps(params: &[Option<CameraParams>]) -> Option<Vec<CameraParams>> {
    let known: Vec<usize> = params.iter().enumerate().filter_map(|(i, p)| p.map(|_| i)).collect();
    let first = *known.first()?;
    let last = *known.last()?;
    let mut out = Vec::with_capacity(params.len());
    let mut k = 0;
    for t in 0..params.len() {
        if let Some(p) = params[t] {
            out.push(p);
            continue;
        }
        if t < first {
            out.push(params[first].unwrap());
        } else if t > last {
            out.push(params[last].unwrap());
        } else {
            while known[k + 1] < t {
                k += 1;
            }
            let (a, b) = (known[k], known[k + 1]);
            let f = (t - a) as f64 / (b - a) as f64;
            let (pa, pb) = (params[a].unwrap().to_array(), params[b].unwrap().to_array());
            let mut v = [0.0; 6];
            for i in 0..6 {
                v[i] = pa[i] + f * (pb[i] - pa[i]);
            }
            out.push(CameraParams::from_array(v));
        }
    }
    Some(out)
}
