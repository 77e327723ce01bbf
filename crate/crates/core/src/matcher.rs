//! Nearest-neighbour search of a query edge map over the dictionary.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::edgemap::EdgeMap;
use crate::error::{Error, Result};
use crate::features::{chamfer_score, distance_transform, hog};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Chamfer,
    Hog,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Chamfer => "chamfer",
            Metric::Hog => "hog",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chamfer" => Ok(Metric::Chamfer),
            "hog" => Ok(Metric::Hog),
            other => Err(Error::InvalidParams(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub entry_index: usize,
    pub distance: f64,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// Ascending by distance, then by entry index.
    pub candidates: Vec<Candidate>,
    pub query_id: String,
}

impl CandidateSet {
    pub fn best(&self) -> Option<&Candidate> {
        self.candidates.first()
    }
}

fn rank(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

/// Keeps the `k` best scores, or, when `eps > 0`, every score within the
/// `(1 + eps)` band of the best one, truncated to `k`.
pub fn select_top(scores: &[f64], k: usize, eps: f64, metric: Metric) -> Result<Vec<Candidate>> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParams(format!("eps must be non-negative, got {eps}")));
    }
    let mut idx: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    if idx.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let k = k.min(idx.len());
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, rank);
        idx.truncate(k);
    }
    idx.sort_by(rank);
    if eps > 0.0 {
        let bound = (1.0 + eps) * idx[0].1;
        idx.retain(|c| c.1 <= bound);
    }
    Ok(idx
        .into_iter()
        .map(|(entry_index, distance)| Candidate {
            entry_index,
            distance,
            metric,
        })
        .collect())
}

/// Chamfer score `T(query) · I_j / |I_j|` for every entry, in entry order.
pub fn chamfer_scores(query: &EdgeMap, dict: &Dictionary) -> Result<Vec<f64>> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let t = distance_transform(query)?;
    dict.entries
        .par_iter()
        .map(|e| chamfer_score(&t, &e.edges))
        .collect()
}

pub fn hog_scores(query: &EdgeMap, dict: &Dictionary) -> Result<Vec<f64>> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    if query.is_empty() {
        return Err(Error::EmptyEdgeMap);
    }
    let (w, h) = query.dims();
    if (w, h) != (dict.raster.width, dict.raster.height) {
        return Err(Error::DimensionMismatch {
            expected: (dict.raster.width, dict.raster.height),
            got: (w, h),
        });
    }
    let q = hog(query, &dict.hog_cfg)?;
    Ok(dict.entries.par_iter().map(|e| q.distance(&e.hog)).collect())
}

pub fn knn_chamfer(query: &EdgeMap, dict: &Dictionary, k: usize, eps: f64) -> Result<CandidateSet> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let scores = chamfer_scores(query, dict)?;
    Ok(CandidateSet {
        candidates: select_top(&scores, k, eps, Metric::Chamfer)?,
        query_id: String::new(),
    })
}

pub fn knn_hog(query: &EdgeMap, dict: &Dictionary, k: usize, eps: f64) -> Result<CandidateSet> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let scores = hog_scores(query, dict)?;
    Ok(CandidateSet {
        candidates: select_top(&scores, k, eps, Metric::Hog)?,
        query_id: String::new(),
    })
}

pub fn register_frame(
    query_id: &str,
    query: &EdgeMap,
    dict: &Dictionary,
    metric: Metric,
    k: usize,
    eps: f64,
) -> Result<CandidateSet> {
    let mut set = match metric {
        Metric::Chamfer => knn_chamfer(query, dict, k, eps)?,
        Metric::Hog => knn_hog(query, dict, k, eps)?,
    };
    set.query_id = query_id.to_string();
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_dictionary, synthetic_seeds, BroadcastRig, PtzGrid, Raster};
    use crate::features::HogConfig;
    use crate::pitch_model::standard_pitch;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn small_dict() -> &'static Dictionary {
        static D: OnceLock<Dictionary> = OnceLock::new();
        D.get_or_init(|| {
            let model = standard_pitch(1.0).unwrap();
            let raster = Raster::default();
            let seeds = synthetic_seeds(2, 3, &BroadcastRig::default(), &model, raster).unwrap();
            let grid = PtzGrid {
                pan_steps: vec![-0.2, 0.0, 0.2],
                tilt_steps: vec![-6.0, 0.0, 6.0, 10.0],
                zoom_factors: vec![0.8, 1.0, 1.25, 1.5],
            };
            let d = build_dictionary(&seeds, &grid, &model, raster, &HogConfig::default()).unwrap();
            assert!(d.len() >= 50, "only {} entries", d.len());
            d
        })
    }

    fn noisy(e: &EdgeMap, rng: &mut ChaCha8Rng) -> EdgeMap {
        let mut out = e.clone();
        for i in e.iter_set() {
            if rng.gen_bool(0.3) {
                out.set_index(i, false);
            }
        }
        for _ in 0..200 {
            let (x, y) = (rng.gen_range(0..e.width()), rng.gen_range(0..e.height()));
            out.set(x, y, true);
        }
        out
    }

    fn oracle_ranking(scores: &[f64], k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        // stable sort keeps lower indices first among equal scores
        idx.sort_by(|a, b| scores[*a].partial_cmp(&scores[*b]).unwrap());
        idx.truncate(k);
        idx
    }

    #[test]
    fn self_retrieval_both_metrics() {
        let d = small_dict();
        for j in [0, d.len() / 2, d.len() - 1] {
            for m in [Metric::Chamfer, Metric::Hog] {
                let c = register_frame("q", &d.entries[j].edges, d, m, 5, 0.0).unwrap();
                assert_eq!(c.query_id, "q");
                let best = c.best().unwrap();
                assert_eq!(best.distance, 0.0);
                // identical renders elsewhere in the dictionary would tie at
                // zero; the lowest index wins
                assert!(best.entry_index <= j);
                assert_eq!(d.entries[best.entry_index].edges, d.entries[j].edges);
            }
        }
    }

    #[test]
    fn ranking_matches_exhaustive_oracle() {
        let d = small_dict();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let j = rng.gen_range(0..d.len());
            let q = noisy(&d.entries[j].edges, &mut rng);
            let t = distance_transform(&q).unwrap();
            let direct: Vec<f64> = d
                .entries
                .iter()
                .map(|e| {
                    let n = e.edges.count() as f64;
                    e.edges.iter_set_xy().map(|(x, y)| t.get(x, y)).sum::<f64>() / n
                })
                .collect();
            let got = knn_chamfer(&q, d, 7, 0.0).unwrap();
            let ids: Vec<usize> = got.candidates.iter().map(|c| c.entry_index).collect();
            assert_eq!(ids, oracle_ranking(&direct, 7));

            let qh = hog(&q, &d.hog_cfg).unwrap();
            let naive: Vec<f64> = d
                .entries
                .iter()
                .map(|e| {
                    let s: f64 = qh.v.iter().zip(&e.hog.v).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
                    s.sqrt()
                })
                .collect();
            let got = knn_hog(&q, d, 7, 0.0).unwrap();
            let ids: Vec<usize> = got.candidates.iter().map(|c| c.entry_index).collect();
            let oracle = oracle_ranking(&naive, 7);
            // the scan accumulates in f32; only exact near-ties may swap
            for (a, b) in ids.iter().zip(&oracle) {
                if a != b {
                    assert!((naive[*a] - naive[*b]).abs() < 1e-5);
                }
            }
            assert_eq!(ids[0], oracle[0]);
        }
    }

    #[test]
    fn stored_and_recomputed_descriptors_agree() {
        let d = small_dict();
        for e in d.entries.iter().take(10) {
            assert_eq!(hog(&e.edges, &d.hog_cfg).unwrap(), e.hog);
        }
    }

    #[test]
    fn k_larger_than_dictionary() {
        let d = small_dict();
        let c = knn_chamfer(&d.entries[3].edges, d, d.len() + 10, 0.0).unwrap();
        assert_eq!(c.candidates.len(), d.len());
        assert!(c.candidates.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn eps_band_and_errors() {
        let scores = [3.0, 1.0, 1.05, 2.0, 1.0];
        let c = select_top(&scores, 5, 0.1, Metric::Chamfer).unwrap();
        let ids: Vec<usize> = c.iter().map(|c| c.entry_index).collect();
        assert_eq!(ids, vec![1, 4, 2]);
        let c = select_top(&scores, 2, 0.1, Metric::Chamfer).unwrap();
        assert_eq!(c.len(), 2);
        assert!(matches!(select_top(&scores, 0, 0.0, Metric::Hog), Err(Error::InvalidK)));
        assert!(matches!(select_top(&[], 1, 0.0, Metric::Hog), Err(Error::EmptyDictionary)));
        let d = small_dict();
        let empty = EdgeMap::new(256, 144);
        assert!(matches!(register_frame("e", &empty, d, Metric::Chamfer, 5, 0.0), Err(Error::EmptyEdgeMap)));
        assert!(matches!(register_frame("e", &empty, d, Metric::Hog, 5, 0.0), Err(Error::EmptyEdgeMap)));
    }

    #[test]
    fn independent_of_thread_count() {
        let d = small_dict();
        let q = noisy(&d.entries[5].edges, &mut ChaCha8Rng::seed_from_u64(2));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        for m in [Metric::Chamfer, Metric::Hog] {
            let a = pool.install(|| register_frame("q", &q, d, m, 5, 0.0)).unwrap();
            let b = register_frame("q", &q, d, m, 5, 0.0).unwrap();
            assert_eq!(a, b);
        }
    }
}
