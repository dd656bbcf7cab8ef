//! Retrieval experiments: relevant-pair tasks, averaged normalized rank,
//! cumulative rank histograms, and timing and space tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::descriptor::{MapDescriptor, PART_BITS};
use crate::error::{Error, Result};
use crate::geometry::PointSetMap;
use crate::ingest::MapAnnotation;
use crate::ranking::{RankEntry, RankResult};
use crate::scalar::Real;

/// Raw storage cost per map point, in bits.
pub const RAW_BITS_PER_POINT: usize = 14;

/// Histogram bin width in percent of N.
pub const HISTOGRAM_STEP: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceConfig {
    pub pose_radius: f64,
    pub min_travel_gap: f64,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        Self {
            pose_radius: 5.0,
            min_travel_gap: 30.0,
        }
    }
}

/// Pairs `(query, global)` whose annotated poses lie within `pose_radius` and
/// whose travel distances differ by at least `min_travel_gap`.
pub fn find_relevant_pairs(
    queries: &[&str],
    globals: &[&str],
    annotations: &BTreeMap<String, MapAnnotation>,
    cfg: &RelevanceConfig,
) -> Result<Vec<(String, String)>> {
    let get = |id: &str| {
        annotations
            .get(id)
            .ok_or_else(|| Error::invalid(format!("map `{id}` has no annotation")))
    };
    let globals = globals
        .iter()
        .map(|g| get(g).map(|a| (*g, a)))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for q in queries {
        let qa = get(q)?;
        for (g, ga) in &globals {
            if qa.pose.distance(&ga.pose) <= cfg.pose_radius
                && (qa.travel - ga.travel).abs() >= cfg.min_travel_gap
            {
                pairs.push((q.to_string(), g.to_string()));
            }
        }
    }
    Ok(pairs)
}

/// One retrieval problem: rank `database` for `query`; `ground_truth` is the
/// only relevant entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchTask {
    pub query: String,
    pub database: Vec<String>,
    pub ground_truth: String,
}

/// Builds one task per relevant pair: the relevant global plus `n - 1`
/// globals drawn without replacement from those not paired with the query in
/// either `pairs` or `exclude`. At most `max_tasks` pairs are used, picked
/// evenly over the (sorted) pair list.
pub fn build_tasks(
    pairs: &[(String, String)],
    exclude: &[(String, String)],
    globals: &[&str],
    n: usize,
    max_tasks: Option<usize>,
    seed: u64,
) -> Result<Vec<MatchTask>> {
    if n == 0 {
        return Err(Error::invalid("database size must be positive"));
    }
    let mut relevant: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (q, g) in pairs.iter().chain(exclude) {
        relevant.entry(q).or_default().insert(g);
    }
    let mut sorted: Vec<&(String, String)> = pairs.iter().collect();
    sorted.sort();
    sorted.dedup();
    if let Some(m) = max_tasks.filter(|&m| m < sorted.len()) {
        let total = sorted.len();
        sorted = (0..m).map(|i| sorted[i * total / m]).collect();
    }
    let mut all: Vec<&str> = globals.to_vec();
    all.sort_unstable();
    all.dedup();

    sorted
        .iter()
        .enumerate()
        .map(|(i, (q, g))| {
            let rel = &relevant[q.as_str()];
            let pool: Vec<&str> = all.iter().copied().filter(|id| !rel.contains(id)).collect();
            if pool.len() < n - 1 {
                return Err(Error::invalid(format!(
                    "query `{q}` has only {} irrelevant globals, {} needed",
                    pool.len(),
                    n - 1
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut database: Vec<String> = pool
                .choose_multiple(&mut rng, n - 1)
                .map(|s| s.to_string())
                .collect();
            database.push(g.clone());
            database.sort();
            Ok(MatchTask {
                query: q.clone(),
                database,
                ground_truth: g.clone(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnrReport {
    pub label: String,
    pub normalized_ranks: Vec<f64>,
    pub anr: f64,
    /// `(fraction, cumulative share of tasks)` at 5% steps, from 0.05 to 1.0.
    pub histogram: Vec<(f64, f64)>,
}

/// Normalized ranks `100·rank/N`, their mean, and the cumulative histogram.
pub fn compute_anr(label: &str, results: &[(RankResult, String)]) -> Result<AnrReport> {
    if results.is_empty() {
        return Err(Error::invalid("no results to evaluate"));
    }
    let normalized_ranks = results
        .iter()
        .map(|(r, gt)| {
            r.rank_of(gt)
                .map(|rank| 100.0 * rank as f64 / r.len() as f64)
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "ground truth `{gt}` missing from ranking of `{}`",
                        r.query_id
                    ))
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let anr = normalized_ranks.iter().sum::<f64>() / normalized_ranks.len() as f64;
    let bins = (100.0 / HISTOGRAM_STEP) as usize;
    let total = normalized_ranks.len() as f64;
    let histogram = (1..=bins)
        .map(|b| {
            let edge = b as f64 * HISTOGRAM_STEP;
            let hits = normalized_ranks
                .iter()
                .filter(|&&r| r <= edge + 1e-9)
                .count();
            (edge / 100.0, hits as f64 / total)
        })
        .collect();
    Ok(AnrReport {
        label: label.to_owned(),
        normalized_ranks,
        anr,
        histogram,
    })
}

/// Scores every database entry with a uniform random number; the reference
/// point for ANR (expected value about 50).
pub fn random_ranking(task: &MatchTask, seed: u64, stream: u64) -> RankResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let entries = task
        .database
        .iter()
        .map(|id| RankEntry {
            map_id: id.clone(),
            score: rng.random(),
        })
        .collect();
    RankResult::new(task.query.clone(), entries, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` when fewer than two distinct x values make the fit degenerate.
    pub r_squared: Option<f64>,
}

impl LinearFit {
    pub fn degenerate(&self) -> bool {
        self.r_squared.is_none()
    }
}

/// Least-squares line through `(x, y)`.
pub fn linear_fit(samples: &[(f64, f64)]) -> LinearFit {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let syy: f64 = samples.iter().map(|s| (s.1 - my).powi(2)).sum();
    if samples.len() < 2 || sxx <= 0.0 {
        return LinearFit {
            slope: 0.0,
            intercept: if n > 0.0 { my } else { 0.0 },
            r_squared: None,
        };
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: Some(r_squared),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub label: String,
    /// `(k, mean seconds per query-database pair)`.
    pub rows: Vec<(usize, f64)>,
    pub fit: LinearFit,
}

/// Mean per-pair time for each `k`. `measure(k)` returns total seconds and
/// the number of pairs matched in that time.
pub fn timing_report(
    label: &str,
    k_values: &[usize],
    mut measure: impl FnMut(usize) -> Result<(f64, usize)>,
) -> Result<TimingReport> {
    let rows = k_values
        .iter()
        .map(|&k| {
            let (secs, pairs) = measure(k)?;
            Ok((k, secs / pairs.max(1) as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let xy: Vec<(f64, f64)> = rows.iter().map(|&(k, t)| (k as f64, t)).collect();
    Ok(TimingReport {
        label: label.to_owned(),
        fit: linear_fit(&xy),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceRow {
    pub map_id: String,
    pub descriptor_bits: usize,
    pub raw_bits: usize,
    pub ratio: f64,
}

/// Descriptor versus raw storage for every descriptor whose map is given.
pub fn space_report<T: Real>(
    descriptors: &[MapDescriptor<T>],
    original_maps: &[PointSetMap<T>],
) -> Vec<SpaceRow> {
    descriptors
        .iter()
        .filter_map(|d| {
            let m = original_maps.iter().find(|m| m.id() == d.map_id)?;
            let descriptor_bits = PART_BITS * d.k();
            let raw_bits = RAW_BITS_PER_POINT * m.len();
            Some(SpaceRow {
                map_id: d.map_id.clone(),
                descriptor_bits,
                raw_bits,
                ratio: raw_bits as f64 / descriptor_bits as f64,
            })
        })
        .collect()
}

/// Everything `eval` writes, serialized with stable key order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub anr: Vec<AnrRow>,
    pub histogram: BTreeMap<String, Vec<(f64, f64)>>,
    pub timing: Option<Vec<TimingReport>>,
    pub space: Vec<SpaceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnrRow {
    pub method: String,
    pub tasks: usize,
    pub anr: f64,
}

impl EvalSummary {
    pub fn push(&mut self, report: &AnrReport) {
        self.anr.push(AnrRow {
            method: report.label.clone(),
            tasks: report.normalized_ranks.len(),
            anr: report.anr,
        });
        self.histogram
            .insert(report.label.clone(), report.histogram.clone());
    }

    pub fn anr_csv(&self) -> String {
        let mut s = String::from("method,tasks,anr\n");
        for r in &self.anr {
            let _ = writeln!(s, "{},{},{:.4}", r.method, r.tasks, r.anr);
        }
        s
    }

    /// One row per histogram bin, one column per method.
    pub fn histogram_csv(&self) -> String {
        let methods: Vec<&String> = self.anr.iter().map(|r| &r.method).collect();
        let mut s = String::from("fraction");
        for m in &methods {
            let _ = write!(s, ",{m}");
        }
        s.push('\n');
        let bins = self.histogram.values().next().map_or(0, Vec::len);
        for b in 0..bins {
            let _ = write!(s, "{:.2}", (b + 1) as f64 * HISTOGRAM_STEP / 100.0);
            for m in &methods {
                let _ = write!(s, ",{:.4}", self.histogram[*m][b].1);
            }
            s.push('\n');
        }
        s
    }

    pub fn space_csv(&self) -> String {
        let mut s = String::from("map_id,descriptor_bits,raw_bits,ratio\n");
        for r in &self.space {
            let _ = writeln!(
                s,
                "{},{},{},{:.4}",
                r.map_id, r.descriptor_bits, r.raw_bits, r.ratio
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn ann(x: f64, y: f64, travel: f64) -> MapAnnotation {
        MapAnnotation {
            pose: Point2::new(x, y),
            travel,
        }
    }

    fn ranking(gt_rank: usize, n: usize) -> (RankResult, String) {
        let entries = (0..n)
            .map(|i| RankEntry {
                map_id: format!("m{i:03}"),
                score: (n - i) as f64,
            })
            .collect();
        (
            RankResult::new("q", entries, None),
            format!("m{:03}", gt_rank - 1),
        )
    }

    #[test]
    fn relevance_needs_proximity_and_a_travel_gap() {
        let a: BTreeMap<_, _> = [
            ("q".to_string(), ann(0.0, 0.0, 100.0)),
            ("same".to_string(), ann(0.0, 0.0, 10.0)),
            ("adjacent".to_string(), ann(1.0, 0.0, 95.0)),
            ("far".to_string(), ann(50.0, 0.0, 10.0)),
        ]
        .into();
        let pairs = find_relevant_pairs(
            &["q"],
            &["same", "adjacent", "far"],
            &a,
            &RelevanceConfig::default(),
        )
        .unwrap();
        assert_eq!(pairs, [("q".to_string(), "same".to_string())]);
        assert!(find_relevant_pairs(&["q"], &["nope"], &a, &RelevanceConfig::default()).is_err());
    }

    #[test]
    fn single_task_anr() {
        let r = compute_anr("x", &[ranking(5, 100)]).unwrap();
        assert_eq!(r.normalized_ranks, [5.0]);
        assert_eq!(r.anr, 5.0);
        assert_eq!(r.histogram[0], (0.05, 1.0));
    }

    #[test]
    fn perfect_scorer_is_one() {
        let results: Vec<_> = (0..100).map(|_| ranking(1, 100)).collect();
        assert_eq!(compute_anr("p", &results).unwrap().anr, 1.0);
    }

    #[test]
    fn histogram_is_cumulative() {
        let results: Vec<_> = (1..=100).step_by(7).map(|k| ranking(k, 100)).collect();
        let h = compute_anr("h", &results).unwrap().histogram;
        assert_eq!(h.len(), 20);
        assert!(h.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(h.last().unwrap(), &(1.0, 1.0));
    }

    #[test]
    fn missing_ground_truth_is_an_error() {
        let (r, _) = ranking(1, 10);
        assert!(compute_anr("x", &[(r, "absent".into())]).is_err());
    }

    #[test]
    fn tasks_hold_one_relevant_and_n_minus_one_irrelevant() {
        let globals: Vec<String> = (0..300).map(|i| format!("g{i:03}")).collect();
        let gref: Vec<&str> = globals.iter().map(String::as_str).collect();
        let pairs = vec![
            ("q1".to_string(), "g010".to_string()),
            ("q1".to_string(), "g011".to_string()),
            ("q2".to_string(), "g200".to_string()),
        ];
        let tasks = build_tasks(&pairs, &[], &gref, 100, None, 7).unwrap();
        assert_eq!(tasks.len(), 3);
        for t in &tasks {
            assert_eq!(t.database.len(), 100);
            assert_eq!(
                t.database.iter().filter(|d| **d == t.ground_truth).count(),
                1
            );
        }
        assert!(!tasks[0].database.contains(&"g011".to_string()));
        assert_eq!(
            tasks,
            build_tasks(&pairs, &[], &gref, 100, None, 7).unwrap()
        );
        assert!(build_tasks(&pairs, &[], &gref[..50], 100, None, 7).is_err());
        assert_eq!(
            build_tasks(&pairs, &[], &gref, 100, Some(2), 7)
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn random_scorer_is_near_fifty() {
        let globals: Vec<String> = (0..400).map(|i| format!("g{i:03}")).collect();
        let gref: Vec<&str> = globals.iter().map(String::as_str).collect();
        let pairs: Vec<_> = (0..2000)
            .map(|i| (format!("q{i:04}"), format!("g{:03}", i % 400)))
            .collect();
        let tasks = build_tasks(&pairs, &[], &gref, 100, None, 1).unwrap();
        let results: Vec<_> = tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (random_ranking(t, 99, i as u64), t.ground_truth.clone()))
            .collect();
        let anr = compute_anr("random", &results).unwrap().anr;
        assert!((anr - 50.5).abs() <= 3.0, "{anr}");
    }

    #[test]
    fn space_arithmetic() {
        use crate::cpd::Part;
        use crate::descriptor::DecodeContext;
        use crate::geometry::BBox;
        let pts: Vec<_> = (0..500)
            .map(|i| Point2::new(i as f64 * 0.01, 0.0))
            .collect();
        let m = PointSetMap::new("m", pts).unwrap();
        let b = BBox::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let part = Part {
            keypoint_bb: b,
            descriptor_bb: b,
            as_score: None,
        };
        let ctx = DecodeContext {
            local_origin: Point2::new(0.0, 0.0),
            local_resolution: 0.1,
            dict_extent: BBox::new(0.0, 10.0, 0.0, 10.0).unwrap(),
        };
        let d = MapDescriptor::from_parts("m", "d", vec![part; 3], ctx).unwrap();
        let rows = space_report(&[d], &[m]);
        assert_eq!((rows[0].raw_bits, rows[0].descriptor_bits), (7000, 126));
        assert!((rows[0].ratio - 55.555).abs() < 0.01);
    }

    #[test]
    fn fit_is_exact_on_a_line_and_flags_one_point() {
        let f = linear_fit(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]);
        assert!((f.slope - 2.0).abs() < 1e-12 && f.r_squared == Some(1.0));
        assert!(linear_fit(&[(1.0, 2.0)]).degenerate());
    }
}
