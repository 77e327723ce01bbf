mod common;

use std::sync::OnceLock;

use pitchreg::dictionary::{simulate_pan, simulate_tilt, simulate_zoom, Dictionary};
use pitchreg::edgemap::EdgeMap;
use pitchreg::features::{chamfer_score, distance_transform};
use pitchreg::geometry::Quad;
use pitchreg::matcher::{Candidate, CandidateSet, Metric};
use pitchreg::temporal::{
    camera_to_quad, difference_l1, l1_trend_filter, mrf_energy, mrf_smooth, quad_to_camera, stabilization_objective,
    stabilize, CameraParams, SmoothingWeights, StatePath,
};
use proptest::prelude::*;

fn dict() -> &'static Dictionary {
    static D: OnceLock<Dictionary> = OnceLock::new();
    D.get_or_init(|| common::small_dictionary(2))
}

fn arb_camera() -> impl Strategy<Value = CameraParams> {
    (
        -20.0..120.0f64,
        -60.0..-10.0f64,
        1.2..1.9f64,
        0.15..0.9f64,
        10.0..40.0f64,
        20.0..90.0f64,
    )
        .prop_map(|(cx, cy, theta, phi, r1, extra)| CameraParams {
            cx,
            cy,
            theta,
            phi,
            r1,
            r2: r1 + extra,
        })
}

fn arb_trapezoid() -> impl Strategy<Value = Quad> {
    arb_camera().prop_map(|c| camera_to_quad(&c).unwrap())
}

fn arb_edges(w: usize, h: usize) -> impl Strategy<Value = EdgeMap> {
    prop::collection::vec(prop::bool::weighted(0.04), w * h).prop_map(move |bits| {
        let mut e = EdgeMap::from_fn(w, h, |x, y| bits[y * w + x]);
        if e.is_empty() {
            e.set(w / 2, h / 2, true);
        }
        e
    })
}

/// Candidate lists over the shared dictionary; distances drawn from a
/// coarse set so ties happen.
fn arb_candidates() -> impl Strategy<Value = Vec<CandidateSet>> {
    let n = dict().len();
    prop::collection::vec(
        prop::collection::vec((0..n, 1..6u32), 1..=4).prop_map(|c| {
            let mut c: Vec<Candidate> = c
                .into_iter()
                .map(|(entry_index, d)| Candidate {
                    entry_index,
                    distance: d as f64 * 0.2,
                    metric: Metric::Chamfer,
                })
                .collect();
            c.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.entry_index.cmp(&b.entry_index)));
            CandidateSet {
                candidates: c,
                query_id: String::new(),
            }
        }),
        1..12,
    )
}

fn energy(sets: &[CandidateSet], w: f64, states: Vec<usize>) -> f64 {
    mrf_energy(sets, dict(), w, &StatePath { states }).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pan_tilt_zoom_undo(q in arb_trapezoid(), a in -0.4..0.4f64, d in -8.0..8.0f64, z in 0.6..1.6f64) {
        let back = simulate_pan(&simulate_pan(&q, a).unwrap(), -a).unwrap();
        prop_assert!(back.max_corner_distance(&q) < 1e-9);
        if let Ok(t) = simulate_tilt(&q, d) {
            prop_assert!(simulate_tilt(&t, -d).unwrap().max_corner_distance(&q) < 1e-9);
        }
        let zoomed = simulate_zoom(&simulate_zoom(&q, z).unwrap(), 1.0 / z).unwrap();
        prop_assert!(zoomed.max_corner_distance(&q) < 1e-9);
    }

    #[test]
    fn quad_camera_roundtrip(c in arb_camera()) {
        let q = camera_to_quad(&c).unwrap();
        let back = quad_to_camera(&q).unwrap();
        let q2 = camera_to_quad(&back).unwrap();
        prop_assert!(q2.max_corner_distance(&q) < 1e-6);
        for (a, b) in back.to_array().iter().zip(c.to_array()) {
            prop_assert!((a - b).abs() < 1e-6, "{back:?} vs {c:?}");
        }
    }

    #[test]
    fn distance_transform_is_exact(e in arb_edges(24, 16)) {
        let dt = distance_transform(&e).unwrap();
        prop_assert_eq!(dt.values(), &common::brute_force_edt(&e)[..]);
    }

    #[test]
    fn chamfer_zero_iff_subset(e in arb_edges(16, 16), i in arb_edges(16, 16), merge in any::<bool>()) {
        let mut e = e;
        if merge {
            e.union_with(&i);
        }
        let s = chamfer_score(&distance_transform(&e).unwrap(), &i).unwrap();
        prop_assert_eq!(s == 0.0, i.is_subset_of(&e));
    }

    #[test]
    fn mrf_without_smoothing_is_per_frame_argmin(sets in arb_candidates()) {
        let path = mrf_smooth(&sets, dict(), 0.0).unwrap();
        for (c, s) in sets.iter().zip(&path.states) {
            let best = c.candidates.iter().map(|x| x.distance).fold(f64::INFINITY, f64::min);
            let first = c.candidates.iter().position(|x| x.distance == best).unwrap();
            prop_assert_eq!(*s, first);
        }
    }

    #[test]
    fn mrf_never_worse_than_rank_one(sets in arb_candidates(), w in 0.0..5.0f64) {
        let path = mrf_smooth(&sets, dict(), w).unwrap();
        let chosen = energy(&sets, w, path.states);
        let rank1 = energy(&sets, w, vec![0; sets.len()]);
        prop_assert!(chosen <= rank1 + 1e-12 * rank1.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stabilize_never_increases_objective(
        start in arb_camera(),
        steps in prop::collection::vec(prop::array::uniform6(-1.0..1.0f64), 4..40),
    ) {
        let mut path = vec![start];
        for s in &steps[1..] {
            let p = path.last().unwrap().to_array();
            let step = [0.5 * s[0], 0.5 * s[1], 0.01 * s[2], 0.005 * s[3], 0.3 * s[4], 0.3 * s[5]];
            let mut next = [0.0; 6];
            for k in 0..6 {
                next[k] = p[k] + step[k];
            }
            let c = CameraParams::from_array(next);
            path.push(if c.validate().is_ok() { c } else { *path.last().unwrap() });
        }
        let w = SmoothingWeights::default();
        let out = stabilize(&path, &w).unwrap();
        prop_assert!(stabilization_objective(&path, &out, &w) <= stabilization_objective(&path, &path, &w));
    }

    #[test]
    fn third_differences_shrink_with_lambda(y in prop::collection::vec(-3.0..3.0f64, 12..40)) {
        let tv3: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|l| difference_l1(&l1_trend_filter(&y, [0.0, 0.0, *l]).unwrap(), 3))
            .collect();
        prop_assert!(tv3[1] <= tv3[0] + 1e-5 && tv3[2] <= tv3[1] + 1e-5, "{tv3:?}");
    }
}

#[test]
fn dictionary_quads_reproject_to_the_raster() {
    let d = dict();
    let corners = d.raster.corners();
    for e in &d.entries {
        let inv = e.h.invert().unwrap();
        for (q, c) in e.quad.corners().iter().zip(&corners) {
            assert!(inv.apply(*q).unwrap().distance(*c) < 1e-6);
        }
    }
}
