//! Direct map matching: hypothesize-and-test RANSAC over rigid transforms,
//! scored by the number of query points landing in occupied target cells.
//!
//! Hypothesis 0 is always the identity. Every further hypothesis pairs one
//! random query point with one random target point, draws a rotation, and sets
//! the translation so the two points coincide. Hypotheses come from a single
//! seeded stream, so a larger `hypothesis_count` only appends hypotheses and the
//! best score can never drop.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    rasterize, OccupancyGrid, Point2, PointSetMap, RigidTransform2, RotationMode,
};
use crate::ranking::{RankEntry, RankResult};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmmConfig {
    pub hypothesis_count: usize,
    pub rotation_mode: RotationMode,
    pub seed: u64,
    pub grid_resolution: f64,
}

impl Default for DmmConfig {
    fn default() -> Self {
        Self {
            hypothesis_count: 500,
            rotation_mode: RotationMode::Manhattan4,
            seed: 0,
            grid_resolution: 0.1,
        }
    }
}

impl DmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hypothesis_count == 0 {
            return Err(Error::invalid("hypothesis_count must be at least 1"));
        }
        if !(self.grid_resolution > 0.0) || !self.grid_resolution.is_finite() {
            return Err(Error::invalid("grid_resolution must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DmmResult<T> {
    pub score: usize,
    pub best_transform: RigidTransform2<T>,
    pub normalized_score: f64,
}

/// A database map prepared for repeated matching: its points plus the
/// occupancy grid used as the inlier oracle.
#[derive(Clone, Debug)]
pub struct DmmTarget<T> {
    id: String,
    points: Vec<Point2<T>>,
    grid: OccupancyGrid<T>,
}

impl<T: Real> DmmTarget<T> {
    pub fn new(map: &PointSetMap<T>, grid_resolution: f64) -> Result<Self> {
        Ok(Self {
            id: map.id().to_owned(),
            points: map.points().to_vec(),
            grid: rasterize(map, T::lit(grid_resolution))?,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn grid(&self) -> &OccupancyGrid<T> {
        &self.grid
    }
}

/// Counts inliers but gives up as soon as `beat` can no longer be exceeded.
#[inline]
fn count_above<T: Real>(
    points: &[Point2<T>],
    t: &RigidTransform2<T>,
    grid: &OccupancyGrid<T>,
    beat: usize,
) -> Option<usize> {
    let mut count = 0;
    let mut remaining = points.len();
    for p in points {
        if count + remaining <= beat {
            return None;
        }
        remaining -= 1;
        if grid.is_occupied(t.apply(*p)) {
            count += 1;
        }
    }
    (count > beat).then_some(count)
}

fn draw_rotation<T: Real>(rng: &mut ChaCha8Rng, mode: RotationMode) -> RigidTransform2<T> {
    match mode {
        RotationMode::Manhattan4 => {
            RigidTransform2::quarter_turns(rng.random_range(0..4), Point2::origin())
        }
        RotationMode::Free => {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            RigidTransform2::new(T::lit(theta), Point2::origin())
        }
    }
}

pub fn match_target<T: Real>(
    query: &PointSetMap<T>,
    target: &DmmTarget<T>,
    cfg: &DmmConfig,
) -> Result<DmmResult<T>> {
    cfg.validate()?;
    let xs = query.points();
    let ys = &target.points;
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::invalid("direct matching needs nonempty maps"));
    }
    let mut best_transform = RigidTransform2::identity();
    let mut best = count_above(xs, &best_transform, &target.grid, 0).unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 1..cfg.hypothesis_count {
        if best == xs.len() {
            break;
        }
        let x = xs[rng.random_range(0..xs.len())];
        let y = ys[rng.random_range(0..ys.len())];
        let rot = draw_rotation::<T>(&mut rng, cfg.rotation_mode);
        let rx = rot.rotate(x);
        let t = rot.with_translation(Point2::new(y.x - rx.x, y.y - rx.y));
        if let Some(count) = count_above(xs, &t, &target.grid, best) {
            best = count;
            best_transform = t;
        }
    }
    Ok(DmmResult {
        score: best,
        best_transform,
        normalized_score: best as f64 / xs.len() as f64,
    })
}

pub fn ransac_match<T: Real>(
    query: &PointSetMap<T>,
    target: &PointSetMap<T>,
    cfg: &DmmConfig,
) -> Result<DmmResult<T>> {
    cfg.validate()?;
    match_target(query, &DmmTarget::new(target, cfg.grid_resolution)?, cfg)
}

/// Ranks prepared targets by inlier count; ties go to the smaller map id.
pub fn rank_targets<T: Real>(
    query: &PointSetMap<T>,
    targets: &[&DmmTarget<T>],
    cfg: &DmmConfig,
) -> Result<RankResult> {
    if targets.is_empty() {
        return Err(Error::invalid("database is empty"));
    }
    let start = Instant::now();
    let entries = targets
        .par_iter()
        .map(|t| {
            match_target(query, t, cfg).map(|r| RankEntry {
                map_id: t.id.clone(),
                score: r.score as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut result = RankResult::new(query.id(), entries, None);
    result.elapsed = start.elapsed().as_secs_f64();
    Ok(result)
}

pub fn rank_database<T: Real>(
    query: &PointSetMap<T>,
    db: &[PointSetMap<T>],
    cfg: &DmmConfig,
) -> Result<RankResult> {
    if db.is_empty() {
        return Err(Error::invalid("database is empty"));
    }
    cfg.validate()?;
    let targets = db
        .iter()
        .map(|m| DmmTarget::new(m, cfg.grid_resolution))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&DmmTarget<T>> = targets.iter().collect();
    rank_targets(query, &refs, cfg)
}
