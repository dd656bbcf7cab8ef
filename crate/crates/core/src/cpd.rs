//! Common pattern discovery: mines parts of an input map that are well
//! explained by regions of a dictionary map.
//!
//! Candidate keypoint boxes are drawn at random over the input map and kept
//! when they hold at least `t_size` of its points (maximality). Each survivor
//! is placed on the dictionary in two passes: a coarse scan over the whole
//! dictionary with a subsample of the cropped points against a dilated grid,
//! then an exact lattice search over translations around the best coarse hits
//! (appearance similarity). The best placement becomes the part's descriptor
//! box. Parts are then admitted greedily in score order, each one required to
//! overlap every descriptor box admitted before it (geometric consistency).
//!
//! Candidate `i` is drawn from its own stream of the seed, so it covers the
//! same relative box on every input map processed with the same configuration.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    rasterize, BBox, OccupancyGrid, Point2, PointSetMap, RigidTransform2, RotationMode,
};
use crate::scalar::Real;

/// Smallest sampled box side as a fraction of the map's longer extent side.
pub const MIN_SIDE_FRACTION: f64 = 0.3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GcMode {
    #[default]
    Strict,
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpdConfig {
    pub candidate_samples: usize,
    pub pool_size: usize,
    pub t_size: f64,
    pub grid_resolution: f64,
    pub rotation_mode: RotationMode,
    pub translation_step: f64,
    pub seed: u64,
    pub gc: GcMode,
    /// Translation step of the coarse placement scan (meters).
    pub coarse_step: f64,
    /// Dilation radius of the dictionary grid used by the coarse scan (meters).
    pub coarse_dilation: f64,
    /// Cropped points scored per coarse placement.
    pub coarse_points: usize,
    /// Coarse hits refined with the exact lattice search.
    pub refine_top: usize,
    /// Angular step of the rotation set in free mode.
    pub free_rotation_step: f64,
}

impl Default for CpdConfig {
    fn default() -> Self {
        Self {
            candidate_samples: 2000,
            pool_size: 100,
            t_size: 0.9,
            grid_resolution: 0.1,
            rotation_mode: RotationMode::Manhattan4,
            translation_step: 0.1,
            seed: 0,
            gc: GcMode::Strict,
            coarse_step: 0.5,
            coarse_dilation: 0.3,
            coarse_points: 64,
            refine_top: 3,
            free_rotation_step: std::f64::consts::PI / 18.0,
        }
    }
}

impl CpdConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.candidate_samples == 0 || self.pool_size == 0 {
            return Err(Error::invalid(
                "candidate_samples and pool_size must be positive",
            ));
        }
        if self.pool_size > self.candidate_samples {
            return Err(Error::invalid("pool_size may not exceed candidate_samples"));
        }
        if !(self.t_size > 0.0 && self.t_size <= 1.0) {
            return Err(Error::invalid("t_size must lie in (0, 1]"));
        }
        if !positive(self.grid_resolution) || !positive(self.translation_step) {
            return Err(Error::invalid(
                "grid_resolution and translation_step must be positive",
            ));
        }
        if !positive(self.coarse_step)
            || !(self.coarse_dilation >= 0.0)
            || !self.coarse_dilation.is_finite()
        {
            return Err(Error::invalid(
                "coarse_step must be positive and coarse_dilation non-negative",
            ));
        }
        if self.coarse_points == 0 || self.refine_top == 0 {
            return Err(Error::invalid(
                "coarse_points and refine_top must be positive",
            ));
        }
        if self.rotation_mode == RotationMode::Free && !positive(self.free_rotation_step) {
            return Err(Error::invalid("free_rotation_step must be positive"));
        }
        Ok(())
    }

    fn rotations<T: Real>(&self) -> Vec<RigidTransform2<T>> {
        match self.rotation_mode {
            RotationMode::Manhattan4 => (0..4)
                .map(|k| RigidTransform2::quarter_turns(k, Point2::origin()))
                .collect(),
            RotationMode::Free => {
                let n = (std::f64::consts::TAU / self.free_rotation_step).ceil() as usize;
                (0..n)
                    .map(|k| {
                        RigidTransform2::new(
                            T::lit(k as f64 * self.free_rotation_step),
                            Point2::origin(),
                        )
                    })
                    .collect()
            }
        }
    }
}

/// A keypoint box on the input map paired with a same-shaped descriptor box
/// on the dictionary map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Part<T> {
    pub keypoint_bb: BBox<T>,
    pub descriptor_bb: BBox<T>,
    /// Appearance similarity in `[0, 1]`; `None` when decoded without scores.
    pub as_score: Option<T>,
}

impl<T: Real> Part<T> {
    /// True for parts decoded from an all-zero record.
    pub fn is_empty(&self) -> bool {
        self.keypoint_bb.area() == T::zero()
    }
}

fn box_key<T: Real>(b: &BBox<T>) -> [T; 4] {
    [b.x_begin(), b.x_end(), b.y_begin(), b.y_end()]
}

fn cmp_keys<T: Real>(a: &[T], b: &[T]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Ranking order of parts: score descending, then larger descriptor box,
/// then lexicographic descriptor and keypoint coordinates.
pub fn part_order<T: Real>(a: &Part<T>, b: &Part<T>) -> Ordering {
    let score = |p: &Part<T>| p.as_score.unwrap_or(T::neg_infinity());
    score(b)
        .partial_cmp(&score(a))
        .unwrap_or(Ordering::Equal)
        .then_with(|| {
            b.descriptor_bb
                .area()
                .partial_cmp(&a.descriptor_bb.area())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| cmp_keys(&box_key(&a.descriptor_bb), &box_key(&b.descriptor_bb)))
        .then_with(|| cmp_keys(&box_key(&a.keypoint_bb), &box_key(&b.keypoint_bb)))
}

/// A dictionary map rasterized once for repeated discovery runs.
#[derive(Clone, Debug)]
pub struct Dictionary<T> {
    id: String,
    extent: BBox<T>,
    grid: OccupancyGrid<T>,
    coarse: OccupancyGrid<T>,
}

impl<T: Real> Dictionary<T> {
    pub fn new(map: &PointSetMap<T>, cfg: &CpdConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = rasterize(map, T::lit(cfg.grid_resolution))?;
        let radius = (cfg.coarse_dilation / cfg.grid_resolution).round() as usize;
        Ok(Self {
            id: map.id().to_owned(),
            extent: *map.extent(),
            coarse: grid.dilated(radius),
            grid,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn extent(&self) -> &BBox<T> {
        &self.extent
    }

    pub fn grid(&self) -> &OccupancyGrid<T> {
        &self.grid
    }
}

fn candidate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` square candidate boxes: center uniform over the map extent, side
/// log-uniform in `[0.3, 1.0]` times the longer extent side. Boxes are not
/// clipped, so they lie within the extent padded by half the longer side.
pub fn sample_candidate_bbs<T: Real>(map: &PointSetMap<T>, n: usize, seed: u64) -> Vec<BBox<T>> {
    let ext = map.extent();
    let longer = ext.longer_side().as_f64();
    (0..n)
        .map(|i| {
            let mut rng = candidate_rng(seed, i as u64);
            let (u, v, w): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            let cx = ext.x_begin() + T::lit(u) * ext.width();
            let cy = ext.y_begin() + T::lit(v) * ext.height();
            let half = T::lit(longer * MIN_SIDE_FRACTION.powf(1.0 - w) / 2.0);
            BBox::new(cx - half, cx + half, cy - half, cy + half).expect("finite square")
        })
        .collect()
}

/// Maximality criterion: the box holds at least `t_size` of the map's points.
pub fn check_mc<T: Real>(map: &PointSetMap<T>, bb: &BBox<T>, t_size: f64) -> bool {
    map.count_inside(bb) as f64 >= t_size * map.len() as f64
}

/// Outcome of the appearance-similarity transform search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsMatch<T> {
    /// Inliers divided by the cropped point count.
    pub score: T,
    pub inliers: usize,
    pub crop_len: usize,
    /// Best transform, `None` when no lattice translation fits the window.
    pub transform: Option<RigidTransform2<T>>,
}

struct RotatedCrop<T> {
    rotation: RigidTransform2<T>,
    points: Vec<Point2<T>>,
    keypoint_bb: BBox<T>,
}

/// Cropped points prepared for searching many descriptor windows.
struct CropSearch<T> {
    crop_len: usize,
    rotations: Vec<RotatedCrop<T>>,
}

/// Integers `i` with `lo_edge + i·step ≥ lo - slack` and `hi_edge + i·step ≤ hi + slack`.
fn lattice_range<T: Real>(lo_edge: T, hi_edge: T, lo: T, hi: T, step: T) -> Vec<i64> {
    let slack = T::lattice_slack() * step;
    let (Some(first), Some(last)) = (
        ((lo - lo_edge) / step).floor().to_i64(),
        ((hi - hi_edge) / step).ceil().to_i64(),
    ) else {
        return Vec::new();
    };
    (first - 1..=last + 1)
        .filter(|&i| {
            let shift = T::lit(i as f64) * step;
            lo_edge + shift >= lo - slack && hi_edge + shift <= hi + slack
        })
        .collect()
}

/// A coarse placement: rotation index and lattice translation.
#[derive(Clone, Copy)]
struct CoarseHit<T> {
    hits: usize,
    rotation: usize,
    tx: T,
    ty: T,
}

impl<T: Real> CropSearch<T> {
    fn new(map: &PointSetMap<T>, keypoint_bb: &BBox<T>, cfg: &CpdConfig) -> Result<Self> {
        let crop: Vec<Point2<T>> = map
            .points()
            .iter()
            .copied()
            .filter(|p| keypoint_bb.contains(*p))
            .collect();
        if crop.is_empty() {
            return Err(Error::invalid("keypoint box contains no map points"));
        }
        let rotations = cfg
            .rotations::<T>()
            .into_iter()
            .map(|rotation| RotatedCrop {
                points: crop.iter().map(|p| rotation.rotate(*p)).collect(),
                keypoint_bb: keypoint_bb.transformed(&rotation),
                rotation,
            })
            .collect();
        Ok(Self {
            crop_len: crop.len(),
            rotations,
        })
    }

    fn best_in(&self, window: &BBox<T>, grid: &OccupancyGrid<T>, cfg: &CpdConfig) -> AsMatch<T> {
        self.best_in_rotations(window, grid, cfg, 0..self.rotations.len())
    }

    fn best_in_rotations(
        &self,
        window: &BBox<T>,
        grid: &OccupancyGrid<T>,
        cfg: &CpdConfig,
        rotations: impl Iterator<Item = usize>,
    ) -> AsMatch<T> {
        let step = T::lit(cfg.translation_step);
        let allowed = window.dilate(grid.resolution());
        let mut best: Option<(usize, RigidTransform2<T>)> = None;
        for rc in rotations.map(|r| &self.rotations[r]) {
            let kb = &rc.keypoint_bb;
            let is = lattice_range(
                kb.x_begin(),
                kb.x_end(),
                allowed.x_begin(),
                allowed.x_end(),
                step,
            );
            let js = lattice_range(
                kb.y_begin(),
                kb.y_end(),
                allowed.y_begin(),
                allowed.y_end(),
                step,
            );
            for &i in &is {
                let tx = T::lit(i as f64) * step;
                for &j in &js {
                    let ty = T::lit(j as f64) * step;
                    let beat = best.map_or(0, |(c, _)| c);
                    if let Some(c) = count_shifted(&rc.points, tx, ty, grid, beat) {
                        best = Some((c, rc.rotation.with_translation(Point2::new(tx, ty))));
                    } else if best.is_none() {
                        best = Some((0, rc.rotation.with_translation(Point2::new(tx, ty))));
                    }
                }
            }
        }
        let inliers = best.map_or(0, |(c, _)| c);
        AsMatch {
            score: T::lit(inliers as f64 / self.crop_len as f64),
            inliers,
            crop_len: self.crop_len,
            transform: best.map(|(_, t)| t),
        }
    }

    /// The `cfg.refine_top` best placements of a point subsample over the
    /// whole dictionary, scored against the dilated grid.
    fn coarse_scan(&self, dict: &Dictionary<T>, cfg: &CpdConfig) -> Vec<CoarseHit<T>> {
        let step = T::lit(cfg.coarse_step);
        let stride = self.crop_len.div_ceil(cfg.coarse_points).max(1);
        let ext = &dict.extent;
        let mut top: Vec<CoarseHit<T>> = Vec::with_capacity(cfg.refine_top + 1);
        for (r, rc) in self.rotations.iter().enumerate() {
            let sample: Vec<Point2<T>> = rc.points.iter().step_by(stride).copied().collect();
            let kb = &rc.keypoint_bb;
            let is = lattice_range(kb.x_begin(), kb.x_end(), ext.x_begin(), ext.x_end(), step);
            let js = lattice_range(kb.y_begin(), kb.y_end(), ext.y_begin(), ext.y_end(), step);
            for &i in &is {
                let tx = T::lit(i as f64) * step;
                for &j in &js {
                    let ty = T::lit(j as f64) * step;
                    let beat = if top.len() == cfg.refine_top {
                        top.last().map_or(0, |h| h.hits)
                    } else {
                        0
                    };
                    let Some(hits) = count_shifted(&sample, tx, ty, &dict.coarse, beat) else {
                        continue;
                    };
                    let at = top.partition_point(|h| h.hits >= hits);
                    top.insert(
                        at,
                        CoarseHit {
                            hits,
                            rotation: r,
                            tx,
                            ty,
                        },
                    );
                    top.truncate(cfg.refine_top);
                }
            }
        }
        top
    }
}

/// Inlier count of pre-rotated points shifted by `(tx, ty)`, or `None` if it
/// cannot exceed `beat`.
#[inline]
fn count_shifted<T: Real>(
    points: &[Point2<T>],
    tx: T,
    ty: T,
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
        if grid.is_occupied(Point2::new(p.x + tx, p.y + ty)) {
            count += 1;
        }
    }
    (count > beat).then_some(count)
}

/// Appearance similarity of the points cropped by `keypoint_bb` against the
/// dictionary grid.
///
/// Searches every rotation of the configured set and every translation
/// `(i·step, j·step)` that keeps the rotated keypoint box inside
/// `descriptor_bb` dilated by one grid cell, and returns the best inlier count
/// divided by the crop size. Ties keep the first transform in (rotation, i, j)
/// order.
pub fn appearance_similarity<T: Real>(
    map: &PointSetMap<T>,
    keypoint_bb: &BBox<T>,
    dict_grid: &OccupancyGrid<T>,
    descriptor_bb: &BBox<T>,
    cfg: &CpdConfig,
) -> Result<AsMatch<T>> {
    cfg.validate()?;
    Ok(CropSearch::new(map, keypoint_bb, cfg)?.best_in(descriptor_bb, dict_grid, cfg))
}

fn discover_candidate<T: Real>(
    map: &PointSetMap<T>,
    keypoint_bb: &BBox<T>,
    dict: &Dictionary<T>,
    cfg: &CpdConfig,
) -> Option<Part<T>> {
    if !check_mc(map, keypoint_bb, cfg.t_size) {
        return None;
    }
    let search = CropSearch::new(map, keypoint_bb, cfg).ok()?;
    let margin = T::lit(cfg.coarse_step);
    let mut best: Option<AsMatch<T>> = None;
    for hit in search.coarse_scan(dict, cfg) {
        let placed = search.rotations[hit.rotation]
            .keypoint_bb
            .translate(hit.tx, hit.ty)
            .dilate(margin);
        let m = search.best_in_rotations(&placed, &dict.grid, cfg, std::iter::once(hit.rotation));
        if m.transform.is_some() && best.is_none_or(|b| m.inliers > b.inliers) {
            best = Some(m);
        }
    }
    let best = best?;
    let (w, h) = (keypoint_bb.width(), keypoint_bb.height());
    let placed = keypoint_bb.transformed(&best.transform?);
    // The lattice slack can push the corner a hair outside the dictionary;
    // the codec needs it inside.
    let ext = dict.extent();
    let x = placed.x_begin().max(ext.x_begin()).min(ext.x_end());
    let y = placed.y_begin().max(ext.y_begin()).min(ext.y_end());
    Some(Part {
        keypoint_bb: *keypoint_bb,
        descriptor_bb: BBox::from_corner(x, y, w, h).ok()?,
        as_score: Some(best.score),
    })
}

/// Runs discovery against a prepared dictionary.
pub fn discover_parts_in<T: Real>(
    map: &PointSetMap<T>,
    dict: &Dictionary<T>,
    cfg: &CpdConfig,
) -> Result<Vec<Part<T>>> {
    cfg.validate()?;
    let extent = *map.extent();
    let candidates = sample_candidate_bbs(map, cfg.candidate_samples, cfg.seed);
    let mut parts: Vec<Part<T>> = candidates
        .par_iter()
        .filter_map(|square| {
            let kb = square.overlap(&extent)?;
            discover_candidate(map, &kb, dict, cfg)
        })
        .collect();
    if parts.is_empty() {
        return Err(Error::EmptyPool);
    }
    parts.sort_by(part_order);

    let mut pool: Vec<Part<T>> = Vec::with_capacity(cfg.pool_size.min(parts.len()));
    for part in parts {
        if pool.len() == cfg.pool_size {
            break;
        }
        let consistent = match cfg.gc {
            GcMode::Off => true,
            GcMode::Strict => pool
                .iter()
                .all(|q| q.descriptor_bb.intersects(&part.descriptor_bb)),
        };
        if consistent {
            pool.push(part);
        }
    }
    Ok(pool)
}

pub fn discover_parts<T: Real>(
    map: &PointSetMap<T>,
    dictionary: &PointSetMap<T>,
    cfg: &CpdConfig,
) -> Result<Vec<Part<T>>> {
    cfg.validate()?;
    discover_parts_in(map, &Dictionary::new(dictionary, cfg)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rasterize;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn grid_map(id: &str, nx: usize, ny: usize, pitch: f64) -> PointSetMap<f64> {
        let pts = (0..nx)
            .flat_map(|i| (0..ny).map(move |j| p(i as f64 * pitch, j as f64 * pitch)))
            .collect();
        PointSetMap::new(id, pts).unwrap()
    }

    #[test]
    fn one_candidate_lies_within_padded_extent() {
        let m = grid_map("m", 10, 10, 1.0);
        let bbs = sample_candidate_bbs(&m, 1, 42);
        assert_eq!(bbs.len(), 1);
        let padded = m.extent().dilate(m.extent().longer_side() / 2.0);
        assert!(padded.contains_box(&bbs[0]));
        assert!(bbs[0].intersects(m.extent()));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = grid_map("m", 5, 8, 0.5);
        assert_eq!(
            sample_candidate_bbs(&m, 50, 9),
            sample_candidate_bbs(&m, 50, 9)
        );
        assert_ne!(
            sample_candidate_bbs(&m, 50, 9),
            sample_candidate_bbs(&m, 50, 10)
        );
    }

    #[test]
    fn mc_boundary_is_inclusive() {
        let m = grid_map("m", 10, 1, 1.0);
        assert!(check_mc(&m, m.extent(), 1.0));
        let nine = BBox::new(0.0, 8.0, 0.0, 0.0).unwrap();
        assert!(check_mc(&m, &nine, 0.9));
        let empty = BBox::new(20.0, 30.0, 20.0, 30.0).unwrap();
        assert!(!check_mc(&m, &empty, 0.9));
    }

    #[test]
    fn self_similarity_is_one() {
        let m = grid_map("m", 6, 4, 0.5);
        let grid = rasterize(&m, 0.1).unwrap();
        let r = appearance_similarity(&m, m.extent(), &grid, m.extent(), &CpdConfig::default())
            .unwrap();
        assert_eq!(r.score, 1.0);
        assert_eq!(r.inliers, m.len());
        assert_eq!(r.transform, Some(RigidTransform2::identity()));
    }

    #[test]
    fn empty_dictionary_window_scores_zero() {
        let m = grid_map("m", 4, 4, 0.5);
        let dict = PointSetMap::new("d", vec![p(50.0, 50.0)]).unwrap();
        let grid = rasterize(&dict, 0.1).unwrap();
        let window = BBox::new(0.0, 3.0, 0.0, 3.0).unwrap();
        let r =
            appearance_similarity(&m, m.extent(), &grid, &window, &CpdConfig::default()).unwrap();
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn empty_crop_is_an_error() {
        let m = grid_map("m", 4, 4, 0.5);
        let grid = rasterize(&m, 0.1).unwrap();
        let far = BBox::new(10.0, 11.0, 10.0, 11.0).unwrap();
        assert!(matches!(
            appearance_similarity(&m, &far, &grid, m.extent(), &CpdConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn translation_search_finds_shifted_square() {
        let corners = vec![p(0.05, 0.05), p(1.05, 0.05), p(0.05, 1.05), p(1.05, 1.05)];
        let m = PointSetMap::new("q", corners.clone()).unwrap();
        let dict_pts: Vec<_> = corners.iter().map(|c| p(c.x + 0.5, c.y + 0.5)).collect();
        let grid = rasterize(&PointSetMap::new("d", dict_pts).unwrap(), 0.1).unwrap();
        let window = BBox::new(0.0, 3.0, 0.0, 3.0).unwrap();
        let r =
            appearance_similarity(&m, m.extent(), &grid, &window, &CpdConfig::default()).unwrap();
        assert_eq!(r.score, 1.0);
    }

    #[test]
    fn self_dictionary_puts_a_perfect_part_on_top() {
        let m = grid_map("m", 12, 6, 0.4);
        let cfg = CpdConfig {
            candidate_samples: 200,
            pool_size: 20,
            ..CpdConfig::default()
        };
        let parts = discover_parts(&m, &m, &cfg).unwrap();
        assert!(!parts.is_empty() && parts.len() <= 20);
        assert_eq!(parts[0].as_score, Some(1.0));
        assert!(parts.windows(2).all(|w| w[0].as_score >= w[1].as_score));
        for part in &parts {
            assert!(check_mc(&m, &part.keypoint_bb, cfg.t_size));
            assert_eq!(part.keypoint_bb.width(), part.descriptor_bb.width());
        }
    }

    #[test]
    fn strict_gc_keeps_descriptor_boxes_mutually_overlapping() {
        let m = grid_map("m", 16, 4, 0.3);
        let dict = grid_map("d", 60, 60, 0.3);
        let cfg = CpdConfig {
            candidate_samples: 300,
            pool_size: 50,
            ..CpdConfig::default()
        };
        let parts = discover_parts(&m, &dict, &cfg).unwrap();
        assert!(
            parts.len() >= 2,
            "pool of {} says nothing about GC",
            parts.len()
        );
        for (i, a) in parts.iter().enumerate() {
            for b in &parts[i + 1..] {
                assert!(a.descriptor_bb.intersects(&b.descriptor_bb));
            }
        }
    }

    #[test]
    fn no_mc_survivor_is_empty_pool() {
        // Holding all three points needs the full extent, which a sampled
        // square only reaches with probability zero.
        let m = PointSetMap::new("m", vec![p(0.0, 0.0), p(10.0, 0.0), p(5.0, 10.0)]).unwrap();
        let cfg = CpdConfig {
            candidate_samples: 5,
            pool_size: 5,
            t_size: 1.0,
            ..CpdConfig::default()
        };
        let kb = sample_candidate_bbs(&m, 5, cfg.seed);
        assert!(kb
            .iter()
            .all(|b| !check_mc(&m, &b.overlap(m.extent()).unwrap(), 1.0)));
        assert!(matches!(
            discover_parts(&m, &m, &cfg),
            Err(Error::EmptyPool)
        ));
    }

    #[test]
    fn config_validation() {
        let bad = CpdConfig {
            pool_size: 10,
            candidate_samples: 5,
            ..CpdConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = CpdConfig {
            t_size: 0.0,
            ..CpdConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(CpdConfig::default().validate().is_ok());
    }

    #[test]
    fn part_order_breaks_ties_by_descriptor_area() {
        let small = Part {
            keypoint_bb: BBox::new(0.0, 1.0, 0.0, 1.0).unwrap(),
            descriptor_bb: BBox::new(0.0, 1.0, 0.0, 1.0).unwrap(),
            as_score: Some(0.5),
        };
        let large = Part {
            descriptor_bb: BBox::new(0.0, 2.0, 0.0, 2.0).unwrap(),
            ..small
        };
        assert_eq!(part_order(&large, &small), Ordering::Less);
    }
}
