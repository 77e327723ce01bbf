//! Held-out evaluation: synthetic test sets, IOU scoring and noise sweeps.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dictionary::{apply_ptz, entry_from_quad, Dictionary, PtzGrid, Raster, SeedAnnotation};
use crate::edgemap::EdgeMap;
use crate::error::{Error, Result};
use crate::features::HogConfig;
use crate::geometry::{estimate_dlt, polygon_iou, project_corners, Correspondence, Homography, Point2};
use crate::matcher::{register_frame, Metric};
use crate::pitch_model::PitchModel;
use crate::temporal::homography_distance;

/// Seeds closer than this (in dictionary-scaled units) count as the same.
pub const SEED_OVERLAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub frame_id: String,
    /// Image → model.
    pub h_gt: Homography,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub edges: EdgeMap,
    pub gt: GroundTruthRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: Metric,
    pub k: usize,
    pub dropout: f64,
    pub salt: f64,
    /// `(frame_id, iou)` in query order.
    pub ious: Vec<(String, f64)>,
    pub mean: f64,
    pub median: f64,
    /// Queries that could not be registered, with the reason.
    pub failures: Vec<(String, String)>,
    pub fingerprint: String,
}

/// Hex SHA-256 over `key=value` lines.
pub fn config_fingerprint(fields: &[(&str, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in fields {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// IOU of the image rectangle projected by the estimate and the ground
/// truth.
pub fn registration_iou(h_est: &Homography, h_gt: &Homography, raster: Raster) -> Result<f64> {
    let corners = raster.corners();
    polygon_iou(&project_corners(h_est, &corners)?, &project_corners(h_gt, &corners)?)
}

/// Held-out queries drawn from continuous pan/tilt/zoom within the grid's
/// ranges around `seeds`, which must differ from every `dict_seeds` entry.
#[allow(clippy::too_many_arguments)]
pub fn make_synthetic_testset(
    seeds: &[SeedAnnotation],
    dict_seeds: &[SeedAnnotation],
    grid: &PtzGrid,
    n: usize,
    rng_seed: u64,
    model: &PitchModel,
    raster: Raster,
) -> Result<Vec<Query>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if seeds.is_empty() {
        return Err(Error::InvalidParams("no test seeds".into()));
    }
    grid.validate()?;
    let test_h = seeds.iter().map(|s| s.homography()).collect::<Result<Vec<_>>>()?;
    let dict_h = dict_seeds.iter().map(|s| s.homography()).collect::<Result<Vec<_>>>()?;
    let scales = crate::dictionary::homography_scales(test_h.iter().chain(&dict_h));
    for (s, a) in seeds.iter().zip(&test_h) {
        for b in &dict_h {
            if homography_distance(a, b, &scales)? <= SEED_OVERLAP_TOL {
                return Err(Error::SeedOverlap(s.image_id.clone()));
            }
        }
    }
    let quads = seeds.iter().map(|s| s.quad(raster)).collect::<Result<Vec<_>>>()?;
    let (pan, tilt, zoom) = (grid.pan_range(), grid.tilt_range(), grid.zoom_range());
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let hog_cfg = HogConfig::default();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 100 * n + 1000 {
            return Err(Error::DegenerateConfiguration(
                "test-set sampling keeps producing invalid views".into(),
            ));
        }
        let s = rng.gen_range(0..quads.len());
        let (p, t, z) = (uniform(&mut rng, pan), uniform(&mut rng, tilt), uniform(&mut rng, zoom));
        let Ok(q) = apply_ptz(&quads[s], p, t, z) else { continue };
        let Ok(Some(e)) = entry_from_quad(&q, model, raster, &hog_cfg) else {
            continue;
        };
        out.push(Query {
            edges: e.edges,
            gt: GroundTruthRecord {
                frame_id: format!("q{:06}", out.len()),
                h_gt: e.h,
            },
        });
    }
    Ok(out)
}

fn report(
    metric: Metric,
    k: usize,
    noise: (f64, f64),
    results: Vec<(String, Result<f64>)>,
    dict: &Dictionary,
) -> EvalReport {
    let mut ious = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(v) => ious.push((id, v)),
            Err(e) => failures.push((id, e.to_string())),
        }
    }
    let vals: Vec<f64> = ious.iter().map(|(_, v)| *v).collect();
    let fingerprint = config_fingerprint(&[
        ("metric", metric.to_string()),
        ("k", k.to_string()),
        ("dropout", noise.0.to_string()),
        ("salt", noise.1.to_string()),
        ("dictionary_entries", dict.len().to_string()),
        ("dictionary_scales", format!("{:?}", dict.scales)),
        ("queries", (ious.len() + failures.len()).to_string()),
    ]);
    EvalReport {
        metric,
        k,
        dropout: noise.0,
        salt: noise.1,
        mean: mean(&vals),
        median: median(&vals),
        ious,
        failures,
        fingerprint,
    }
}

fn score_one(q: &EdgeMap, gt: &GroundTruthRecord, dict: &Dictionary, metric: Metric, k: usize) -> Result<f64> {
    let c = register_frame(&gt.frame_id, q, dict, metric, k, 0.0)?;
    let best = c.best().ok_or(Error::EmptyDictionary)?;
    registration_iou(&dict.entries[best.entry_index].h, &gt.h_gt, dict.raster)
}

/// Registers every query and scores the rank-1 homography by IOU.
pub fn evaluate(queries: &[Query], dict: &Dictionary, metric: Metric, k: usize) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::EmptyQueries);
    }
    let results = queries
        .par_iter()
        .map(|q| (q.gt.frame_id.clone(), score_one(&q.edges, &q.gt, dict, metric, k)))
        .collect();
    Ok(report(metric, k, (0.0, 0.0), results, dict))
}

/// Removes each set pixel with probability `dropout`, then sets each pixel
/// with probability `salt`.
pub fn add_noise(e: &EdgeMap, dropout: f64, salt: f64, rng: &mut impl Rng) -> EdgeMap {
    let mut out = e.clone();
    if dropout > 0.0 {
        for i in e.iter_set() {
            if rng.gen::<f64>() < dropout {
                out.set_index(i, false);
            }
        }
    }
    if salt > 0.0 {
        for i in 0..e.width() * e.height() {
            if rng.gen::<f64>() < salt {
                out.set_index(i, true);
            }
        }
    }
    out
}

/// Re-evaluates the queries under every `(dropout, salt)` combination.
/// Noise for query `i` comes from stream `i` of the seeded generator, so a
/// level's corruption does not depend on the other queries.
pub fn noise_sweep(
    queries: &[Query],
    dict: &Dictionary,
    metric: Metric,
    k: usize,
    dropout_fracs: &[f64],
    salt_fracs: &[f64],
    rng_seed: u64,
) -> Result<Vec<EvalReport>> {
    if queries.is_empty() {
        return Err(Error::EmptyQueries);
    }
    for f in dropout_fracs.iter().chain(salt_fracs) {
        if !(0.0..=1.0).contains(f) {
            return Err(Error::InvalidParams(format!("noise fraction {f} outside [0, 1]")));
        }
    }
    let mut out = Vec::new();
    for &d in dropout_fracs {
        for &s in salt_fracs {
            let results = queries
                .par_iter()
                .enumerate()
                .map(|(i, q)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
                    rng.set_stream(i as u64);
                    let noisy = add_noise(&q.edges, d, s, &mut rng);
                    (q.gt.frame_id.clone(), score_one(&noisy, &q.gt, dict, metric, k))
                })
                .collect();
            out.push(report(metric, k, (d, s), results, dict));
        }
    }
    Ok(out)
}

/// Layout of a results table: one row per report with mean and median IOU
/// in percent.
pub fn format_table(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {:>8} {:>8} {:>8} {:>8} {:>7}", "Method", "dropout", "salt", "Mean", "Median", "failed");
    for r in reports {
        let name = match r.metric {
            Metric::Chamfer => "NN-Chamfer",
            Metric::Hog => "NN-HOG",
        };
        let _ = writeln!(
            s,
            "{:<14} {:>8.3} {:>8.3} {:>8.1} {:>8.1} {:>7}",
            name,
            r.dropout,
            r.salt,
            100.0 * r.mean,
            100.0 * r.median,
            r.failures.len()
        );
    }
    s
}

/// Per-frame CSV with the fingerprint on a leading comment line.
pub fn report_csv(r: &EvalReport) -> String {
    let mut s = format!("# fingerprint {}\nframe_id,metric,dropout,salt,iou,error\n", r.fingerprint);
    for (id, v) in &r.ious {
        let _ = writeln!(s, "{id},{},{},{},{v},", r.metric, r.dropout, r.salt);
    }
    for (id, e) in &r.failures {
        let _ = writeln!(s, "{id},{},{},{},,{}", r.metric, r.dropout, r.salt, e.replace(',', ";"));
    }
    s
}

/// One record per line: `frame_id` followed by either the nine homography
/// entries or four `u v x y` correspondences.
pub fn parse_ground_truth(text: &str, source: &str) -> Result<Vec<GroundTruthRecord>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let frame_id = it.next().unwrap_or_default().to_string();
        let nums = it
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
        let h = match nums.len() {
            9 => Homography::from_slice(&nums),
            16 => {
                let pairs: Vec<Correspondence> = nums
                    .chunks(4)
                    .map(|c| Correspondence::new(Point2::new(c[0], c[1]), Point2::new(c[2], c[3])))
                    .collect();
                estimate_dlt(&pairs)
            }
            n => {
                return Err(Error::parse(
                    source,
                    lineno + 1,
                    format!("expected 9 or 16 numbers, got {n}"),
                ))
            }
        }
        .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
        out.push(GroundTruthRecord { frame_id, h_gt: h });
    }
    Ok(out)
}

pub fn format_ground_truth(records: &[GroundTruthRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{} {}", r.frame_id, r.h_gt);
    }
    s
}

pub const GROUND_TRUTH_FILE: &str = "ground_truth.txt";

/// Writes `<frame_id>.pbm` per query plus the ground-truth list.
pub fn save_testset(dir: &Path, queries: &[Query]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let gt: Vec<GroundTruthRecord> = queries.iter().map(|q| q.gt.clone()).collect();
    std::fs::write(dir.join(GROUND_TRUTH_FILE), format_ground_truth(&gt))?;
    for q in queries {
        q.edges.save_pbm(&dir.join(format!("{}.pbm", q.gt.frame_id)))?;
    }
    Ok(())
}

pub fn load_testset(dir: &Path) -> Result<Vec<Query>> {
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    if !gt_path.exists() {
        return Err(Error::MissingFile(gt_path));
    }
    let text = std::fs::read_to_string(&gt_path)?;
    parse_ground_truth(&text, &gt_path.display().to_string())?
        .into_iter()
        .map(|gt| {
            let p = dir.join(format!("{}.pbm", gt.frame_id));
            if !p.exists() {
                return Err(Error::MissingFile(p));
            }
            Ok(Query {
                edges: EdgeMap::load_pbm(&p)?,
                gt,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_dictionary, synthetic_seeds, BroadcastRig};
    use crate::pitch_model::standard_pitch;

    fn setup() -> (PitchModel, Vec<SeedAnnotation>, Vec<SeedAnnotation>, Dictionary) {
        let model = standard_pitch(1.0).unwrap();
        let raster = Raster::default();
        let rig = BroadcastRig::default();
        let dseeds = synthetic_seeds(2, 1, &rig, &model, raster).unwrap();
        let tseeds = synthetic_seeds(2, 2, &rig, &model, raster).unwrap();
        let grid = PtzGrid {
            pan_steps: vec![-0.1, 0.0, 0.1],
            tilt_steps: vec![-4.0, 0.0, 4.0],
            zoom_factors: vec![0.9, 1.0, 1.1],
        };
        let d = build_dictionary(&dseeds, &grid, &model, raster, &HogConfig::default()).unwrap();
        (model, dseeds, tseeds, d)
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0]), 1.5);
        assert_eq!(mean(&[]), 0.0);
    }

    #[test]
    fn self_queries_score_one() {
        let (_, _, _, d) = setup();
        let queries: Vec<Query> = d
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| Query {
                edges: e.edges.clone(),
                gt: GroundTruthRecord {
                    frame_id: format!("e{i}"),
                    h_gt: e.h,
                },
            })
            .collect();
        for m in [Metric::Chamfer, Metric::Hog] {
            let r = evaluate(&queries, &d, m, 1).unwrap();
            assert_eq!(r.mean, 1.0);
            assert_eq!(r.median, 1.0);
            assert!(r.failures.is_empty());
        }
        assert!(matches!(evaluate(&[], &d, Metric::Hog, 1), Err(Error::EmptyQueries)));
    }

    #[test]
    fn testset_is_deterministic_and_nonempty() {
        let (model, dseeds, tseeds, _) = setup();
        let grid = PtzGrid::default();
        let raster = Raster::default();
        let a = make_synthetic_testset(&tseeds, &dseeds, &grid, 12, 5, &model, raster).unwrap();
        let b = make_synthetic_testset(&tseeds, &dseeds, &grid, 12, 5, &model, raster).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|q| q.edges.count() >= crate::dictionary::MIN_EDGE_PIXELS));
        assert!(make_synthetic_testset(&tseeds, &dseeds, &grid, 0, 5, &model, raster).unwrap().is_empty());
        assert!(matches!(
            make_synthetic_testset(&dseeds, &dseeds, &grid, 3, 5, &model, raster),
            Err(Error::SeedOverlap(_))
        ));
    }

    #[test]
    fn noise_sweep_edges() {
        let (model, dseeds, tseeds, d) = setup();
        let q = make_synthetic_testset(&tseeds, &dseeds, &PtzGrid::default(), 6, 9, &model, d.raster).unwrap();
        let clean = evaluate(&q, &d, Metric::Hog, 1).unwrap();
        let sweep = noise_sweep(&q, &d, Metric::Hog, 1, &[0.0, 1.0], &[0.0], 3).unwrap();
        assert_eq!(sweep[0].ious, clean.ious);
        assert_eq!(sweep[1].failures.len(), q.len());
        assert!(sweep[1].failures.iter().all(|(_, e)| e.contains("no set pixels")));
        let csv = report_csv(&sweep[1]);
        assert!(csv.starts_with("# fingerprint "));
        assert!(format_table(&sweep).contains("NN-HOG"));
    }

    #[test]
    fn add_noise_rates() {
        let e = EdgeMap::from_fn(200, 100, |x, _| x % 4 == 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dropped = add_noise(&e, 0.3, 0.0, &mut rng);
        assert!(dropped.is_subset_of(&e));
        let frac = dropped.count() as f64 / e.count() as f64;
        assert!((frac - 0.7).abs() < 0.03, "{frac}");
        let salted = add_noise(&EdgeMap::new(200, 100), 0.0, 0.05, &mut rng);
        let frac = salted.count() as f64 / 20000.0;
        assert!((frac - 0.05).abs() < 0.01, "{frac}");
    }

    #[test]
    fn ground_truth_formats() {
        let h = Homography::new([[0.5, 0.1, 3.0], [0.0, -0.4, 70.0], [0.0, 0.002, 1.0]]).unwrap();
        let recs = vec![GroundTruthRecord { frame_id: "f1".into(), h_gt: h }];
        let back = parse_ground_truth(&format_ground_truth(&recs), "t").unwrap();
        assert_eq!(back, recs);
        let corners = Raster::default().corners();
        let mut line = String::from("f2");
        for c in corners {
            let m = h.apply(c).unwrap();
            line += &format!(" {} {} {} {}", c.x, c.y, m.x, m.y);
        }
        let recs = parse_ground_truth(&line, "t").unwrap();
        assert!(recs[0].h_gt.max_abs_diff(&h) < 1e-9);
        assert!(matches!(parse_ground_truth("f 1 2 3", "t"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn testset_roundtrip_on_disk() {
        let (model, dseeds, tseeds, _) = setup();
        let q = make_synthetic_testset(&tseeds, &dseeds, &PtzGrid::default(), 3, 1, &model, Raster::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_testset(dir.path(), &q).unwrap();
        let back = load_testset(dir.path()).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in q.iter().zip(&back) {
            assert_eq!(a.edges, b.edges);
            assert!(a.gt.h_gt.max_abs_diff(&b.gt.h_gt) < 1e-12 * a.gt.h_gt.to_array().iter().fold(1.0f64, |m, v| m.max(v.abs())));
        }
    }
}
