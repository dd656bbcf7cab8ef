//! The retrieval battery: prepares part pools and tasks for a map collection
//! once, then ranks every task with each matching scheme.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpd::{discover_parts_in, CpdConfig, Dictionary, GcMode, Part};
use crate::descriptor::{context_for, descriptor_from_pool, MapDescriptor};
use crate::descriptor_matcher::{
    aggregate_score, rank_descriptors, rerank_with_targets, HMM_POOL_SIZE,
};
use crate::direct_matcher::{match_target, rank_targets, DmmConfig, DmmTarget};
use crate::error::{Error, Result};
use crate::evaluation::{
    build_tasks, compute_anr, find_relevant_pairs, random_ranking, AnrReport, MatchTask,
    RelevanceConfig,
};
use crate::geometry::{BBox, PointSetMap};
use crate::ingest::MapCollection;
use crate::ranking::{MatchStrategy, RankResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub cpd: CpdConfig,
    pub dmm: DmmConfig,
    /// Database size N of every task.
    pub db_size: usize,
    pub max_tasks: Option<usize>,
    /// Globals this close to a query are never drawn as irrelevant entries.
    pub exclusion: RelevanceConfig,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            cpd: CpdConfig {
                gc: GcMode::Off,
                ..CpdConfig::default()
            },
            dmm: DmmConfig::default(),
            db_size: 100,
            max_tasks: None,
            exclusion: RelevanceConfig::default(),
            seed: 0,
        }
    }
}

impl BenchConfig {
    /// Defaults with one seed driving discovery, direct matching and task sampling.
    pub fn seeded(seed: u64) -> Self {
        let mut c = Self::default();
        c.cpd.seed = seed;
        c.dmm.seed = seed;
        c.seed = seed;
        c
    }
}

pub type TaskResults = Vec<(RankResult, String)>;

/// Part pools of every map plus the task list.
pub struct Prepared<'a> {
    pub collection: &'a MapCollection,
    pub config: BenchConfig,
    pub dictionary: Dictionary<f64>,
    pub pools: BTreeMap<String, Vec<Part<f64>>>,
    pub tasks: Vec<MatchTask>,
    /// Maps whose discovery came back empty.
    pub failures: Vec<String>,
    maps: BTreeMap<String, &'a PointSetMap<f64>>,
}

impl<'a> Prepared<'a> {
    pub fn new(
        collection: &'a MapCollection,
        relevant_pairs: &[(String, String)],
        config: BenchConfig,
    ) -> Result<Self> {
        let dictionary = Dictionary::new(&collection.dictionary, &config.cpd)?;
        let maps: BTreeMap<String, &PointSetMap<f64>> = collection
            .locals
            .iter()
            .chain(&collection.globals)
            .map(|m| (m.id().to_owned(), m))
            .collect();

        let local_ids: Vec<&str> = collection.locals.iter().map(|m| m.id()).collect();
        let global_ids: Vec<&str> = collection.globals.iter().map(|m| m.id()).collect();
        let exclude = find_relevant_pairs(
            &local_ids,
            &global_ids,
            &collection.annotations,
            &config.exclusion,
        )?;
        let tasks = build_tasks(
            relevant_pairs,
            &exclude,
            &global_ids,
            config.db_size,
            config.max_tasks,
            config.seed,
        )?;
        info!("{} tasks over {} globals", tasks.len(), global_ids.len());

        let start = Instant::now();
        let list: Vec<(&String, &&PointSetMap<f64>)> = maps.iter().collect();
        let found: Vec<(String, Result<Vec<Part<f64>>>)> = list
            .par_iter()
            .map(|(id, m)| {
                (
                    (*id).clone(),
                    discover_parts_in(m, &dictionary, &config.cpd),
                )
            })
            .collect();
        let mut pools = BTreeMap::new();
        let mut failures = Vec::new();
        for (id, r) in found {
            match r {
                Ok(p) => {
                    debug!("{id}: pool {} top {:?}", p.len(), p[0].as_score);
                    pools.insert(id, p);
                }
                Err(Error::EmptyPool) => {
                    warn!("{id}: no part passed discovery");
                    failures.push(id);
                }
                Err(e) => return Err(e),
            }
        }
        info!(
            "discovered parts for {} maps in {:.1}s",
            maps.len(),
            start.elapsed().as_secs_f64()
        );
        Ok(Self {
            collection,
            config,
            dictionary,
            pools,
            tasks,
            failures,
            maps,
        })
    }

    pub fn map(&self, id: &str) -> Result<&PointSetMap<f64>> {
        self.maps
            .get(id)
            .copied()
            .ok_or_else(|| Error::MissingMap(id.to_owned()))
    }

    /// A stand-in for maps without parts: one empty part, which scores zero.
    fn empty_descriptor(&self, id: &str) -> Result<MapDescriptor<f64>> {
        let m = self.map(id)?;
        let zero = BBox::from_corner(0.0, 0.0, 0.0, 0.0)?;
        let part = Part {
            keypoint_bb: zero,
            descriptor_bb: zero,
            as_score: Some(0.0),
        };
        MapDescriptor::from_parts(
            id,
            self.dictionary.id(),
            vec![part],
            context_for(m, self.dictionary.extent()),
        )
    }

    /// Stored (quantized) top-`k` descriptor of a map.
    pub fn descriptor(&self, id: &str, k: usize) -> Result<MapDescriptor<f64>> {
        match self.pools.get(id) {
            Some(pool) => descriptor_from_pool(self.map(id)?, &self.dictionary, pool, k),
            None => self.empty_descriptor(id),
        }
    }

    /// Hybrid query side: the full pool (up to 100 parts), unquantized.
    pub fn query_pool(&self, id: &str) -> Result<MapDescriptor<f64>> {
        match self.pools.get(id) {
            Some(pool) => {
                let parts = pool[..pool.len().min(HMM_POOL_SIZE)].to_vec();
                MapDescriptor::from_parts(
                    id,
                    self.dictionary.id(),
                    parts,
                    context_for(self.map(id)?, self.dictionary.extent()),
                )
            }
            None => self.empty_descriptor(id),
        }
    }

    fn global_descriptors(&self, k: usize) -> Result<BTreeMap<String, MapDescriptor<f64>>> {
        self.collection
            .globals
            .iter()
            .map(|g| Ok((g.id().to_owned(), self.descriptor(g.id(), k)?)))
            .collect()
    }

    fn rank_with(
        &self,
        query: impl Fn(&MatchTask) -> Result<MapDescriptor<f64>>,
        k: usize,
        strategy: MatchStrategy,
    ) -> Result<TaskResults> {
        let db = self.global_descriptors(k)?;
        self.tasks
            .iter()
            .map(|t| {
                let q = query(t)?;
                let entries: Vec<&MapDescriptor<f64>> =
                    t.database.iter().map(|id| &db[id]).collect();
                Ok((
                    rank_descriptors(&q, &entries, strategy)?,
                    t.ground_truth.clone(),
                ))
            })
            .collect()
    }

    /// Indirect matching: top-`k` descriptors on both sides.
    pub fn run_imm(&self, k: usize, strategy: MatchStrategy) -> Result<TaskResults> {
        self.rank_with(|t| self.descriptor(&t.query, k), k, strategy)
    }

    /// Hybrid matching: full query pool against top-`k` database descriptors.
    pub fn run_hmm(&self, k: usize, strategy: MatchStrategy) -> Result<TaskResults> {
        self.rank_with(|t| self.query_pool(&t.query), k, strategy)
    }

    fn targets(&self, ids: &[String]) -> Result<Vec<DmmTarget<f64>>> {
        ids.iter()
            .map(|id| DmmTarget::new(self.map(id)?, self.config.dmm.grid_resolution))
            .collect()
    }

    pub fn run_dmm(&self) -> Result<TaskResults> {
        self.tasks
            .iter()
            .map(|t| {
                let targets = self.targets(&t.database)?;
                let refs: Vec<&DmmTarget<f64>> = targets.iter().collect();
                Ok((
                    rank_targets(self.map(&t.query)?, &refs, &self.config.dmm)?,
                    t.ground_truth.clone(),
                ))
            })
            .collect()
    }

    /// Re-scores the top `r` of each first-stage ranking with direct matching.
    pub fn run_rerank(&self, first: &TaskResults, r: usize) -> Result<TaskResults> {
        first
            .iter()
            .map(|(res, gt)| {
                let ids: Vec<String> = res
                    .entries
                    .iter()
                    .take(r)
                    .map(|e| e.map_id.clone())
                    .collect();
                let targets = self.targets(&ids)?;
                let refs: Vec<&DmmTarget<f64>> = targets.iter().collect();
                Ok((
                    rerank_with_targets(res, self.map(&res.query_id)?, &refs, &self.config.dmm)?,
                    gt.clone(),
                ))
            })
            .collect()
    }

    /// Seconds spent scoring every (query pool, database descriptor) pair of
    /// every task at database size `k`, on the calling thread, and the pair
    /// count. `repeats` passes are timed together.
    pub fn time_hmm_pairs(
        &self,
        k: usize,
        strategy: MatchStrategy,
        repeats: usize,
    ) -> Result<(f64, usize)> {
        let db = self.global_descriptors(k)?;
        let queries = self
            .tasks
            .iter()
            .map(|t| self.query_pool(&t.query))
            .collect::<Result<Vec<_>>>()?;
        let mut sink = 0.0;
        let mut pairs = 0;
        let start = Instant::now();
        for _ in 0..repeats.max(1) {
            for (t, q) in self.tasks.iter().zip(&queries) {
                for id in &t.database {
                    sink += aggregate_score(q, &db[id], strategy)?;
                    pairs += 1;
                }
            }
        }
        let secs = start.elapsed().as_secs_f64();
        std::hint::black_box(sink);
        Ok((secs, pairs))
    }

    /// Seconds spent direct-matching the queries of the first `tasks` tasks
    /// against their databases on the calling thread, and the pair count.
    /// Target grids are prepared outside the timed section.
    pub fn time_dmm_pairs(&self, tasks: usize) -> Result<(f64, usize)> {
        let mut secs = 0.0;
        let mut pairs = 0;
        for t in self.tasks.iter().take(tasks) {
            let targets = self.targets(&t.database)?;
            let q = self.map(&t.query)?;
            let start = Instant::now();
            for target in &targets {
                std::hint::black_box(match_target(q, target, &self.config.dmm)?);
                pairs += 1;
            }
            secs += start.elapsed().as_secs_f64();
        }
        Ok((secs, pairs))
    }

    pub fn run_random(&self) -> TaskResults {
        self.tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (
                    random_ranking(t, self.config.seed, i as u64),
                    t.ground_truth.clone(),
                )
            })
            .collect()
    }
}

/// Which rows of the ANR table to produce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodSet {
    pub dmm: bool,
    pub imm_k: Vec<usize>,
    pub hmm_k: Vec<usize>,
    /// Cascade depths applied on top of hybrid matching with `rerank_k` parts.
    pub rerank: Vec<usize>,
    pub rerank_k: usize,
    pub imm_strategy: MatchStrategy,
    pub hmm_strategy: MatchStrategy,
    pub random: bool,
}

impl Default for MethodSet {
    fn default() -> Self {
        Self {
            dmm: true,
            imm_k: (1..=5).collect(),
            hmm_k: (1..=5).collect(),
            rerank: vec![10, 20],
            rerank_k: 3,
            imm_strategy: MatchStrategy::SumMax,
            hmm_strategy: MatchStrategy::SumMaxWeighted,
            random: false,
        }
    }
}

/// Runs every requested method. Failing cells are logged and skipped; their
/// labels come back in the second vector.
pub fn run_methods(p: &Prepared, methods: &MethodSet) -> (Vec<AnrReport>, Vec<String>) {
    let mut reports = Vec::new();
    let mut missing = Vec::new();
    let mut record =
        |label: String, r: Result<TaskResults>| match r.and_then(|res| compute_anr(&label, &res)) {
            Ok(rep) => {
                info!("{label}: ANR {:.2}", rep.anr);
                reports.push(rep);
            }
            Err(e) => {
                warn!("{label}: {e}");
                missing.push(label);
            }
        };
    if methods.dmm {
        record("dMM".into(), p.run_dmm());
    }
    for &k in &methods.imm_k {
        record(format!("iMM cpd:{k}"), p.run_imm(k, methods.imm_strategy));
    }
    let mut hmm_cache: BTreeMap<usize, TaskResults> = BTreeMap::new();
    for &k in &methods.hmm_k {
        let r = p.run_hmm(k, methods.hmm_strategy);
        if let Ok(res) = &r {
            hmm_cache.insert(k, res.clone());
        }
        record(format!("hMM cpd:{k}"), r);
    }
    for &r in &methods.rerank {
        let k = methods.rerank_k;
        let first = match hmm_cache.get(&k) {
            Some(res) => Ok(res.clone()),
            None => p.run_hmm(k, methods.hmm_strategy),
        };
        record(
            format!("rerank:{r} hMM cpd:{k}"),
            first.and_then(|f| p.run_rerank(&f, r)),
        );
    }
    if methods.random {
        record("random".into(), Ok(p.run_random()));
    }
    (reports, missing)
}
