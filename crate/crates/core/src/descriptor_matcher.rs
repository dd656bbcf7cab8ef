//! Online matching of part-based descriptors.
//!
//! Two maps are compared only through the descriptor boxes of their parts,
//! which all live in the frame of the shared dictionary map.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::cpd::{discover_parts_in, CpdConfig, Dictionary};
use crate::descriptor::{context_for, MapDescriptor};
use crate::direct_matcher::{match_target, DmmConfig, DmmTarget};
use crate::error::{Error, Result};
use crate::geometry::{BBox, PointSetMap};
use crate::ranking::{rank_order, MatchStrategy, RankEntry, RankResult};
use crate::scalar::Real;

/// Pool size used for the query side of hybrid matching.
pub const HMM_POOL_SIZE: usize = 100;

/// Overlap area over the geometric mean of the two areas.
pub fn region_similarity<T: Real>(a: &BBox<T>, b: &BBox<T>) -> Result<T> {
    let (aa, ab) = (a.area(), b.area());
    if !(aa > T::zero()) || !(ab > T::zero()) {
        return Err(Error::invalid(
            "region similarity needs boxes of positive area",
        ));
    }
    Ok(region_similarity_unchecked(a, b, aa, ab))
}

#[inline]
fn region_similarity_unchecked<T: Real>(a: &BBox<T>, b: &BBox<T>, aa: T, ab: T) -> T {
    (a.overlap_area(b) / (aa * ab).sqrt()).min(T::one())
}

/// Aggregate score plus the number of box pairs evaluated.
pub fn aggregate_score_counted<T: Real>(
    query: &MapDescriptor<T>,
    db_entry: &MapDescriptor<T>,
    strategy: MatchStrategy,
) -> Result<(T, u64)> {
    if query.dictionary_id != db_entry.dictionary_id {
        return Err(Error::IncompatibleDescriptor {
            expected: query.dictionary_id.clone(),
            found: db_entry.dictionary_id.clone(),
        });
    }
    if strategy == MatchStrategy::SumMaxWeighted && !query.has_scores() {
        return Err(Error::MissingScores);
    }
    // Zero-area boxes (empty records) never match anything.
    let db_boxes: Vec<(BBox<T>, T)> = db_entry
        .parts
        .iter()
        .map(|p| (p.descriptor_bb, p.descriptor_bb.area()))
        .filter(|(_, a)| *a > T::zero())
        .collect();
    let mut evaluations = 0u64;
    let mut total = T::zero();
    for part in &query.parts {
        let qa = part.descriptor_bb.area();
        let mut best = T::zero();
        if qa > T::zero() {
            for (b, ba) in &db_boxes {
                best = best.max(region_similarity_unchecked(&part.descriptor_bb, b, qa, *ba));
            }
            evaluations += db_boxes.len() as u64;
        }
        total = match strategy {
            MatchStrategy::MaxMax => total.max(best),
            MatchStrategy::SumMax => total + best,
            MatchStrategy::SumMaxWeighted => total + best * part.as_score.unwrap_or(T::zero()),
        };
    }
    Ok((total, evaluations))
}

/// Max-max, sum-max or sum-max-weighted similarity of two descriptors.
pub fn aggregate_score<T: Real>(
    query: &MapDescriptor<T>,
    db_entry: &MapDescriptor<T>,
    strategy: MatchStrategy,
) -> Result<T> {
    aggregate_score_counted(query, db_entry, strategy).map(|(s, _)| s)
}

/// Ranks descriptors against a query descriptor.
pub fn rank_descriptors<T: Real>(
    query: &MapDescriptor<T>,
    db: &[&MapDescriptor<T>],
    strategy: MatchStrategy,
) -> Result<RankResult> {
    if db.is_empty() {
        return Err(Error::invalid("database is empty"));
    }
    let start = Instant::now();
    let scored = db
        .par_iter()
        .map(|d| {
            aggregate_score_counted(query, d, strategy).map(|(s, n)| {
                (
                    RankEntry {
                        map_id: d.map_id.clone(),
                        score: s.as_f64(),
                    },
                    n,
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let evaluations = scored.iter().map(|(_, n)| n).sum();
    let mut result = RankResult::new(
        query.map_id.clone(),
        scored.into_iter().map(|(e, _)| e).collect(),
        Some(strategy),
    );
    result.elapsed = start.elapsed().as_secs_f64();
    result.evaluations = evaluations;
    Ok(result)
}

/// Indirect matching: both sides are compact descriptors.
pub fn rank_imm<T: Real>(
    query: &MapDescriptor<T>,
    db: &[MapDescriptor<T>],
    strategy: MatchStrategy,
) -> Result<RankResult> {
    let refs: Vec<_> = db.iter().collect();
    rank_descriptors(query, &refs, strategy)
}

/// The query side of hybrid matching: the whole discovered pool of the
/// original query map, unquantized.
pub fn hmm_query_descriptor<T: Real>(
    query_map: &PointSetMap<T>,
    dict: &Dictionary<T>,
    cpd_cfg: &CpdConfig,
) -> Result<MapDescriptor<T>> {
    let pool = discover_parts_in(query_map, dict, cpd_cfg)?;
    MapDescriptor::from_parts(
        query_map.id(),
        dict.id(),
        pool,
        context_for(query_map, dict.extent()),
    )
}

/// Hybrid matching: discovers up to [`HMM_POOL_SIZE`] parts on the original
/// query map and ranks the compact database descriptors against all of them.
pub fn rank_hmm<T: Real>(
    query_map: &PointSetMap<T>,
    dictionary: &PointSetMap<T>,
    db: &[MapDescriptor<T>],
    k_db: usize,
    cpd_cfg: &CpdConfig,
    strategy: MatchStrategy,
) -> Result<RankResult> {
    if let Some(d) = db.iter().find(|d| d.k() > k_db) {
        return Err(Error::invalid(format!(
            "descriptor `{}` has {} parts, more than k_db = {k_db}",
            d.map_id,
            d.k()
        )));
    }
    let cfg = CpdConfig {
        pool_size: HMM_POOL_SIZE,
        candidate_samples: cpd_cfg.candidate_samples.max(HMM_POOL_SIZE),
        ..cpd_cfg.clone()
    };
    let dict = Dictionary::new(dictionary, &cfg)?;
    let query = hmm_query_descriptor(query_map, &dict, &cfg)?;
    rank_imm(&query, db, strategy)
}

/// Re-scores the top `r` entries with direct matching against the original
/// maps; entries below `r` keep their order and scores.
pub fn rerank_cascade<T: Real>(
    hmm_result: &RankResult,
    query_map: &PointSetMap<T>,
    original_db: &HashMap<String, PointSetMap<T>>,
    r: usize,
    dmm_cfg: &DmmConfig,
) -> Result<RankResult> {
    let targets = hmm_result
        .entries
        .iter()
        .take(r)
        .map(|e| {
            original_db
                .get(&e.map_id)
                .ok_or_else(|| Error::MissingMap(e.map_id.clone()))
                .and_then(|m| DmmTarget::new(m, dmm_cfg.grid_resolution))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = targets.iter().collect();
    rerank_with_targets(hmm_result, query_map, &refs, dmm_cfg)
}

/// Cascade over prepared targets; `targets` must be the top entries of
/// `hmm_result` in rank order.
pub fn rerank_with_targets<T: Real>(
    hmm_result: &RankResult,
    query_map: &PointSetMap<T>,
    targets: &[&DmmTarget<T>],
    dmm_cfg: &DmmConfig,
) -> Result<RankResult> {
    let r = targets.len().min(hmm_result.len());
    let start = Instant::now();
    let mut top = targets[..r]
        .par_iter()
        .zip(&hmm_result.entries[..r])
        .map(|(t, e)| {
            if t.id() != e.map_id {
                return Err(Error::invalid(format!(
                    "target `{}` does not match ranked entry `{}`",
                    t.id(),
                    e.map_id
                )));
            }
            match_target(query_map, t, dmm_cfg).map(|m| RankEntry {
                map_id: e.map_id.clone(),
                score: m.score as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    top.sort_by(rank_order);
    top.extend(hmm_result.entries[r..].iter().cloned());
    Ok(RankResult {
        query_id: hmm_result.query_id.clone(),
        entries: top,
        strategy: hmm_result.strategy,
        elapsed: hmm_result.elapsed + start.elapsed().as_secs_f64(),
        evaluations: hmm_result.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::Part;
    use crate::descriptor::DecodeContext;
    use crate::geometry::Point2;

    fn bb(xb: f64, xe: f64, yb: f64, ye: f64) -> BBox<f64> {
        BBox::new(xb, xe, yb, ye).unwrap()
    }

    fn desc(id: &str, boxes: &[BBox<f64>], scores: Option<&[f64]>) -> MapDescriptor<f64> {
        let parts = boxes
            .iter()
            .enumerate()
            .map(|(i, b)| Part {
                keypoint_bb: *b,
                descriptor_bb: *b,
                as_score: scores.map(|s| s[i]),
            })
            .collect();
        let ctx = DecodeContext {
            local_origin: Point2::new(0.0, 0.0),
            local_resolution: 0.1,
            dict_extent: bb(0.0, 100.0, 0.0, 100.0),
        };
        MapDescriptor::from_parts(id, "dict", parts, ctx).unwrap()
    }

    #[test]
    fn region_similarity_cases() {
        let a = bb(0.0, 2.0, 0.0, 1.0);
        assert_eq!(region_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(region_similarity(&a, &bb(5.0, 6.0, 0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(region_similarity(&a, &bb(1.0, 3.0, 0.0, 1.0)).unwrap(), 0.5);
        assert!(region_similarity(&a, &bb(1.0, 1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn identical_descriptors_max_max_is_one() {
        let d = desc("a", &[bb(0.0, 2.0, 0.0, 2.0), bb(5.0, 6.0, 5.0, 9.0)], None);
        assert_eq!(aggregate_score(&d, &d, MatchStrategy::MaxMax).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_parts_score_zero() {
        let q = desc("q", &[bb(0.0, 1.0, 0.0, 1.0); 3], Some(&[1.0, 1.0, 1.0]));
        let g = desc("g", &[bb(50.0, 51.0, 50.0, 51.0)], None);
        for s in MatchStrategy::ALL {
            assert_eq!(aggregate_score(&q, &g, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn weighted_needs_scores_and_dictionaries_must_agree() {
        let q = desc("q", &[bb(0.0, 1.0, 0.0, 1.0)], None);
        assert!(matches!(
            aggregate_score(&q, &q, MatchStrategy::SumMaxWeighted),
            Err(Error::MissingScores)
        ));
        let mut other = q.clone();
        other.dictionary_id = "elsewhere".into();
        assert!(matches!(
            aggregate_score(&q, &other, MatchStrategy::SumMax),
            Err(Error::IncompatibleDescriptor { .. })
        ));
    }

    #[test]
    fn empty_parts_are_skipped() {
        let mut q = desc("q", &[bb(0.0, 1.0, 0.0, 1.0)], None);
        q.parts.push(Part {
            keypoint_bb: bb(0.0, 0.0, 0.0, 0.0),
            descriptor_bb: bb(0.0, 0.0, 0.0, 0.0),
            as_score: None,
        });
        let (s, n) = aggregate_score_counted(&q, &q, MatchStrategy::SumMax).unwrap();
        assert_eq!((s, n), (1.0, 1));
    }

    #[test]
    fn own_descriptor_ranks_first() {
        let q = desc(
            "q",
            &[bb(0.0, 4.0, 0.0, 4.0), bb(10.0, 12.0, 0.0, 2.0)],
            None,
        );
        let db = vec![
            desc("a", &[bb(3.0, 7.0, 3.0, 7.0)], None),
            q.clone(),
            desc("b", &[bb(60.0, 61.0, 0.0, 1.0)], None),
        ];
        let r = rank_imm(&q, &db, MatchStrategy::SumMax).unwrap();
        assert_eq!(r.ids(), ["q", "a", "b"]);
        assert_eq!(r.evaluations, 2 * (1 + 2 + 1));
    }

    #[test]
    fn cascade_with_single_entry_keeps_order() {
        let hmm = RankResult::new(
            "q",
            vec![
                RankEntry {
                    map_id: "a".into(),
                    score: 3.0,
                },
                RankEntry {
                    map_id: "b".into(),
                    score: 2.0,
                },
            ],
            Some(MatchStrategy::SumMaxWeighted),
        );
        let m = PointSetMap::new("q", vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)]).unwrap();
        let db: HashMap<_, _> = [("a".to_string(), m.clone().with_id("a"))].into();
        let out = rerank_cascade(&hmm, &m, &db, 1, &DmmConfig::default()).unwrap();
        assert_eq!(out.ids(), hmm.ids());
        assert!(matches!(
            rerank_cascade(&hmm, &m, &db, 2, &DmmConfig::default()),
            Err(Error::MissingMap(id)) if id == "b"
        ));
    }
}
