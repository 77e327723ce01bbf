//! Independent reference implementations used by the integration and
//! acceptance tests.
#![allow(dead_code)]

use pitchreg::dictionary::{
    apply_ptz, build_dictionary, entry_from_quad, linspace, synthetic_seeds, BroadcastRig, Dictionary, PtzGrid,
    Raster, SeedAnnotation,
};
use pitchreg::edgemap::EdgeMap;
use pitchreg::evalharness::{make_synthetic_testset, Query};
use pitchreg::features::HogConfig;
use pitchreg::geometry::{Homography, Point2, Quad};
use pitchreg::pitch_model::{standard_pitch, PitchModel};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus};

pub const DICT_SEED_RNG: u64 = 1001;
pub const TEST_SEED_RNG: u64 = 2002;

/// Dense grid used for the held-out accuracy run.
pub fn accuracy_grid() -> PtzGrid {
    PtzGrid {
        pan_steps: linspace(-0.35, 0.35, 21),
        tilt_steps: linspace(-12.0, 12.0, 13),
        zoom_factors: vec![0.7, 0.77, 0.85, 0.93, 1.0, 1.1, 1.2, 1.32, 1.45],
    }
}

/// Held-out setup: 10 dictionary seeds expanded over the dense grid and
/// `n` continuously sampled queries around 10 other seeds.
pub fn heldout_setup(n: usize) -> (Dictionary, Vec<Query>) {
    let model = model();
    let raster = Raster::default();
    let dict_seeds = seeds(10, DICT_SEED_RNG);
    let test_seeds = seeds(10, TEST_SEED_RNG);
    let grid = accuracy_grid();
    let dict = build_dictionary(&dict_seeds, &grid, &model, raster, &HogConfig::default()).unwrap();
    let queries = make_synthetic_testset(&test_seeds, &dict_seeds, &grid, n, 7, &model, raster).unwrap();
    (dict, queries)
}

pub fn model() -> PitchModel {
    standard_pitch(1.0).unwrap()
}

pub fn seeds(n: usize, rng: u64) -> Vec<SeedAnnotation> {
    synthetic_seeds(n, rng, &BroadcastRig::default(), &model(), Raster::default()).unwrap()
}

pub fn small_grid() -> PtzGrid {
    PtzGrid {
        pan_steps: linspace(-0.3, 0.3, 7),
        tilt_steps: linspace(-8.0, 8.0, 5),
        zoom_factors: vec![0.8, 1.0, 1.25],
    }
}

pub fn small_dictionary(n_seeds: usize) -> Dictionary {
    build_dictionary(
        &seeds(n_seeds, DICT_SEED_RNG),
        &small_grid(),
        &model(),
        Raster::default(),
        &HogConfig::default(),
    )
    .unwrap()
}

/// Edge map and image → model homography of a seed moved by pan/tilt/zoom.
pub fn view(seed: &SeedAnnotation, pan: f64, tilt: f64, zoom: f64) -> Option<(EdgeMap, Homography)> {
    let raster = Raster::default();
    let q = apply_ptz(&seed.quad(raster).ok()?, pan, tilt, zoom).ok()?;
    let e = entry_from_quad(&q, &model(), raster, &HogConfig::default()).ok()??;
    Some((e.edges, e.h))
}

/// Nearest set pixel by exhaustive search.
pub fn brute_force_edt(e: &EdgeMap) -> Vec<f64> {
    let set: Vec<(usize, usize)> = e.iter_set_xy().collect();
    let (w, h) = e.dims();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut best = f64::INFINITY;
            for &(sx, sy) in &set {
                let dx = x as f64 - sx as f64;
                let dy = y as f64 - sy as f64;
                best = best.min(dx * dx + dy * dy);
            }
            out[y * w + x] = best.sqrt();
        }
    }
    out
}

fn inside_convex(q: &[Point2; 4], p: Point2) -> bool {
    let side = |i: usize| {
        let a = q[i];
        let b = q[(i + 1) % 4];
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
    };
    (0..4).all(|i| side(i) >= 0.0) || (0..4).all(|i| side(i) <= 0.0)
}

/// IOU by sampling an `n x n` lattice of cell centres over the joint
/// bounding box.
pub fn raster_iou(a: &Quad, b: &Quad, n: usize) -> f64 {
    let pts: Vec<Point2> = a.corners().iter().chain(b.corners()).copied().collect();
    let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.x), h.max(p.x)));
    let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.y), h.max(p.y)));
    let (mut inter, mut union) = (0u64, 0u64);
    for j in 0..n {
        let y = y0 + (j as f64 + 0.5) * (y1 - y0) / n as f64;
        for i in 0..n {
            let p = Point2::new(x0 + (i as f64 + 0.5) * (x1 - x0) / n as f64, y);
            let (ia, ib) = (inside_convex(a.corners(), p), inside_convex(b.corners(), p));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// All state paths in enumeration order, with the minimum picked under
/// the rule: lower energy, then smaller last state, then smaller earlier
/// states going backwards.
pub fn brute_force_path(sizes: &[usize], energy: impl Fn(&[usize]) -> f64) -> Vec<usize> {
    let n = sizes.len();
    let mut states = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let e = energy(&states);
        let better = match &best {
            None => true,
            Some((be, bs)) => {
                // rounding can split mathematically equal energies by an ulp
                let tied = (e - be).abs() <= 1e-12 * e.abs().max(be.abs()).max(1.0);
                (!tied && e < *be) || (tied && states.iter().rev().lt(bs.iter().rev()))
            }
        };
        if better {
            best = Some((e, states.clone()));
        }
        let mut t = 0;
        loop {
            if t == n {
                return best.unwrap().1;
            }
            states[t] += 1;
            if states[t] < sizes[t] {
                break;
            }
            states[t] = 0;
            t += 1;
        }
    }
}

/// Exact 1-D total-variation denoising,
/// `argmin ½‖x − y‖² + mu Σ|x_{t+1} − x_t|` (taut-string method of Condat).
pub fn tv_denoise_exact(y: &[f64], mu: f64) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    let (mut k, mut k0, mut kminus, mut kplus) = (0usize, 0usize, 0usize, 0usize);
    let mut vmin = y[0] - mu;
    let mut vmax = y[0] + mu;
    let mut umin = mu;
    let mut umax = -mu;
    loop {
        if k == n - 1 {
            if umin < 0.0 {
                x[k0..=kminus].iter_mut().for_each(|v| *v = vmin);
                k = kminus + 1;
                k0 = k;
                kminus = k;
                vmin = y[k];
                umin = mu;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                x[k0..=kplus].iter_mut().for_each(|v| *v = vmax);
                k = kplus + 1;
                k0 = k;
                kplus = k;
                vmax = y[k];
                umax = -mu;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                x[k0..=k].iter_mut().for_each(|v| *v = vmin);
                return x;
            }
            if k == n - 1 {
                x[k] = vmin + umin;
                return x;
            }
            continue;
        }
        umin += y[k + 1] - vmin;
        umax += y[k + 1] - vmax;
        if umin < -mu {
            x[k0..=kminus].iter_mut().for_each(|v| *v = vmin);
            k = kminus + 1;
            k0 = k;
            kminus = k;
            kplus = k;
            vmin = y[k];
            vmax = y[k] + 2.0 * mu;
            umin = mu;
            umax = -mu;
        } else if umax > mu {
            x[k0..=kplus].iter_mut().for_each(|v| *v = vmax);
            k = kplus + 1;
            k0 = k;
            kminus = k;
            kplus = k;
            vmax = y[k];
            vmin = y[k] - 2.0 * mu;
            umin = mu;
            umax = -mu;
        } else {
            k += 1;
            if umin >= mu {
                vmin += (umin - mu) / (k - k0 + 1) as f64;
                umin = mu;
                kminus = k;
            }
            if umax <= -mu {
                vmax += (umax + mu) / (k - k0 + 1) as f64;
                umax = -mu;
                kplus = k;
            }
        }
    }
}

const STENCILS: [&[f64]; 3] = [&[-1.0, 1.0], &[1.0, -2.0, 1.0], &[-1.0, 3.0, -3.0, 1.0]];

/// Dense difference operator rows (order 1, 2, 3 blocks) with weights.
fn difference_rows(n: usize, lambdas: [f64; 3]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut w = Vec::new();
    for k in 1..=3 {
        if lambdas[k - 1] <= 0.0 || n <= k {
            continue;
        }
        for t in 0..n - k {
            let mut r = vec![0.0; n];
            for (j, c) in STENCILS[k - 1].iter().enumerate() {
                r[t + j] = *c;
            }
            rows.push(r);
            w.push(lambdas[k - 1]);
        }
    }
    (rows, w)
}

fn dense_to_csc(rows: &[Vec<f64>], ncols: usize) -> CscMatrix<f64> {
    let mut colptr = vec![0];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for j in 0..ncols {
        for (i, r) in rows.iter().enumerate() {
            if r[j] != 0.0 {
                rowval.push(i);
                nzval.push(r[j]);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows.len(), ncols, colptr, rowval, nzval)
}

/// Reference solution of `min ‖x − y‖² + Σ_k λ_k ‖D^k x‖₁` from a generic
/// interior-point QP solver, on the epigraph form
/// `min ‖x‖² − 2yᵀx + Σ w_i t_i` subject to `−t ≤ D x ≤ t`.
pub fn reference_trend_filter(y: &[f64], lambdas: [f64; 3]) -> Vec<f64> {
    let n = y.len();
    let (d, w) = difference_rows(n, lambdas);
    let m = d.len();
    let nv = n + m;
    let mut p_rows = vec![vec![0.0; nv]; nv];
    for (i, r) in p_rows.iter_mut().enumerate().take(n) {
        r[i] = 2.0;
    }
    let mut q: Vec<f64> = y.iter().map(|v| -2.0 * v).collect();
    q.extend(&w);
    let mut a_rows = Vec::with_capacity(2 * m);
    for sign in [1.0, -1.0] {
        for (i, r) in d.iter().enumerate() {
            let mut row: Vec<f64> = r.iter().map(|v| sign * v).collect();
            row.extend((0..m).map(|j| if j == i { -1.0 } else { 0.0 }));
            a_rows.push(row);
        }
    }
    let b = vec![0.0; 2 * m];
    let cones = [NonnegativeConeT(2 * m)];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-13)
        .tol_gap_rel(1e-13)
        .tol_feas(1e-13)
        .max_iter(500)
        .build()
        .unwrap();
    let mut solver = DefaultSolver::new(
        &dense_to_csc(&p_rows, nv),
        &q,
        &dense_to_csc(&a_rows, nv),
        &b,
        &cones,
        settings,
    )
    .unwrap();
    solver.solve();
    assert!(
        matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "reference solver status {:?}",
        solver.solution.status
    );
    solver.solution.x[..n].to_vec()
}
