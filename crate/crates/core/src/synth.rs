//! Synthetic loop-closure benchmark.
//!
//! A world is a rectangular loop corridor built from axis-aligned walls on a
//! 0.1 m lattice, with side rooms, alcoves and clutter boxes. A robot drives
//! the loop twice along the corridor center line. Each wall point is stamped
//! with the travel distance of the nearest pose that sees it (range limited,
//! walls occlude), then observed once per lap with dropout and Gaussian noise.
//! Global maps are travel windows of lap 1, local (query) maps windows of
//! lap 2. Every map is moved into its own frame; annotations keep the world
//! centroid and travel.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point2, PointSetMap};
use crate::ingest::{segment_windows, AnnotatedMap, MapCollection, TrajectoryPoint};

/// World lattice pitch: all wall endpoints and wall points are decimeters.
const DM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    /// Loop side lengths along x and y (meters, center line).
    pub leg_x: f64,
    pub leg_y: f64,
    pub corridor_width: f64,
    /// Probability that a feature slot along a corridor wall is a room.
    pub room_rate: f64,
    /// Probability that a feature slot is an alcove.
    pub alcove_rate: f64,
    /// Probability that a room holds a clutter box.
    pub clutter_rate: f64,
    /// Scatter short stubs along bare walls.
    pub wall_stubs: bool,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            leg_x: 60.0,
            leg_y: 45.0,
            corridor_width: 2.4,
            room_rate: 0.5,
            alcove_rate: 0.2,
            clutter_rate: 0.6,
            wall_stubs: true,
        }
    }
}

impl WorldParams {
    pub fn dictionary() -> Self {
        Self {
            leg_x: 24.0,
            leg_y: 16.0,
            wall_stubs: false,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub world: WorldParams,
    pub dictionary_world: WorldParams,
    /// Standard deviation of per-axis point noise (meters).
    pub noise_sigma: f64,
    /// Probability that a visible point is observed in a given lap.
    pub keep_prob: f64,
    pub sensor_range: f64,
    pub pose_spacing: f64,
    pub local_window: f64,
    pub global_window: f64,
    pub local_stride: f64,
    pub global_stride: f64,
    /// Travel offset of the first local window relative to the lap start.
    pub local_offset: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            world: WorldParams::default(),
            dictionary_world: WorldParams::dictionary(),
            noise_sigma: 0.02,
            keep_prob: 0.85,
            sensor_range: 3.5,
            pose_spacing: 0.25,
            local_window: 7.0,
            global_window: 7.0,
            local_stride: 2.0,
            global_stride: 1.0,
            local_offset: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.sensor_range,
            self.pose_spacing,
            self.local_window,
            self.global_window,
            self.local_stride,
            self.global_stride,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(
                "ranges, spacings, windows and strides must be positive",
            ));
        }
        if !(self.noise_sigma >= 0.0) || !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::invalid(
                "noise_sigma must be >= 0 and keep_prob in (0, 1]",
            ));
        }
        for w in [&self.world, &self.dictionary_world] {
            if w.leg_x < 20.0 || w.leg_y < 15.0 || !(w.corridor_width >= 1.0) {
                return Err(Error::invalid(
                    "worlds need legs of at least 20 x 15 m and a 1 m corridor",
                ));
            }
        }
        Ok(())
    }
}

/// Axis-aligned wall segment in decimeters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Seg {
    a: (i64, i64),
    b: (i64, i64),
}

impl Seg {
    fn new(a: (i64, i64), b: (i64, i64)) -> Self {
        Self {
            a: (a.0.min(b.0), a.1.min(b.1)),
            b: (a.0.max(b.0), a.1.max(b.1)),
        }
    }

    fn lattice_points(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let n = (self.b.0 - self.a.0).max(self.b.1 - self.a.1);
        let (dx, dy) = (
            (self.b.0 - self.a.0).signum(),
            (self.b.1 - self.a.1).signum(),
        );
        (0..=n).map(move |k| (self.a.0 + k * dx, self.a.1 + k * dy))
    }

    /// Squared distance (meters²) from `p` to the segment.
    fn dist2(&self, p: Point2<f64>) -> f64 {
        let cx = p.x.clamp(self.a.0 as f64 * DM, self.b.0 as f64 * DM);
        let cy = p.y.clamp(self.a.1 as f64 * DM, self.b.1 as f64 * DM);
        (p.x - cx).powi(2) + (p.y - cy).powi(2)
    }

    /// True if the open sight line from `p` to `q` crosses this wall.
    fn blocks(&self, p: Point2<f64>, q: Point2<f64>) -> bool {
        const EDGE: f64 = 0.01;
        let (ax, ay, bx, by) = (
            self.a.0 as f64 * DM,
            self.a.1 as f64 * DM,
            self.b.0 as f64 * DM,
            self.b.1 as f64 * DM,
        );
        let crosses = |p0: f64, q0: f64, c: f64, p1: f64, q1: f64, lo: f64, hi: f64| {
            let (dp, dq) = (p0 - c, q0 - c);
            if dp.abs() < 1e-9 || dq.abs() < 1e-9 || (dp > 0.0) == (dq > 0.0) {
                return false;
            }
            let at = p1 + (q1 - p1) * dp / (dp - dq);
            at >= lo - EDGE && at <= hi + EDGE
        };
        if ay == by {
            crosses(p.y, q.y, ay, p.x, q.x, ax, bx)
        } else {
            crosses(p.x, q.x, ax, p.y, q.y, ay, by)
        }
    }
}

struct World {
    segs: Vec<Seg>,
    /// Loop corners, counterclockwise, decimeters.
    corners: [(i64, i64); 4],
}

impl World {
    fn perimeter_dm(&self) -> i64 {
        (0..4)
            .map(|k| {
                let (a, b) = (self.corners[k], self.corners[(k + 1) % 4]);
                (b.0 - a.0).abs() + (b.1 - a.1).abs()
            })
            .sum()
    }

    /// Every wall lattice point, sorted and deduplicated.
    fn points(&self) -> Vec<(i64, i64)> {
        let set: BTreeSet<(i64, i64)> = self
            .segs
            .iter()
            .flat_map(|s| s.lattice_points().collect::<Vec<_>>())
            .collect();
        set.into_iter().collect()
    }

    /// Center-line poses every `spacing` meters of one lap, with their travel.
    fn poses(&self, spacing: f64) -> Vec<(Point2<f64>, f64)> {
        let perimeter = self.perimeter_dm() as f64 * DM;
        let n = (perimeter / spacing).round() as usize;
        (0..n)
            .map(|i| {
                let travel = i as f64 * spacing;
                let mut left = travel / DM;
                for k in 0..4 {
                    let (a, b) = (self.corners[k], self.corners[(k + 1) % 4]);
                    let len = ((b.0 - a.0).abs() + (b.1 - a.1).abs()) as f64;
                    if left <= len || k == 3 {
                        let f = (left / len).min(1.0);
                        let x = a.0 as f64 + f * (b.0 - a.0) as f64;
                        let y = a.1 as f64 + f * (b.1 - a.1) as f64;
                        return (Point2::new(x * DM, y * DM), travel);
                    }
                    left -= len;
                }
                unreachable!()
            })
            .collect()
    }
}

fn dm(v: f64) -> i64 {
    (v / DM).round() as i64
}

type DmSeg = ((i64, i64), (i64, i64));

/// Walls of one corridor side of one leg, in leg coordinates `(s, t)`:
/// `s` along the leg, `t` toward `side` (±1) from the center line. Also
/// returns the bare wall runs as `(s_begin, s_end)`.
fn corridor_side(
    rng: &mut ChaCha8Rng,
    p: &WorldParams,
    leg_len: i64,
    side: i64,
    wall: (i64, i64),
) -> (Vec<DmSeg>, Vec<(i64, i64)>) {
    let h = dm(p.corridor_width / 2.0);
    let mut out = Vec::new();
    let mut openings: Vec<(i64, i64)> = Vec::new();
    let zone = (h + 45, leg_len - h - 45);
    let mut cursor = zone.0 + rng.random_range(0..=20);
    while cursor < zone.1 {
        let roll: f64 = rng.random();
        let (s0, width) = (
            cursor,
            if roll < p.room_rate {
                rng.random_range(20..=50)
            } else {
                rng.random_range(10..=30)
            },
        );
        let s1 = s0 + width;
        if s1 > zone.1 {
            break;
        }
        if roll < p.room_rate {
            let depth = rng.random_range(20..=40);
            let door = rng.random_range(8..=10);
            let door_at = rng.random_range(s0 + 2..=s1 - 2 - door);
            openings.push((door_at, door_at + door));
            let back = side * (h + depth);
            out.push(((s0, back), (s1, back)));
            out.push(((s0, side * h), (s0, back)));
            out.push(((s1, side * h), (s1, back)));
            if rng.random::<f64>() < p.clutter_rate {
                let size = rng.random_range(3..=8);
                let bs = rng.random_range(s0 + 3..=s1 - 3 - size);
                let bt = side * rng.random_range(h + 3..=h + depth - 3 - size);
                let bt2 = bt + side * size;
                out.push(((bs, bt), (bs + size, bt)));
                out.push(((bs, bt2), (bs + size, bt2)));
                out.push(((bs, bt), (bs, bt2)));
                out.push(((bs + size, bt), (bs + size, bt2)));
            }
        } else if roll < p.room_rate + p.alcove_rate {
            let depth = rng.random_range(3..=8);
            openings.push((s0, s1));
            let back = side * (h + depth);
            out.push(((s0, back), (s1, back)));
            out.push(((s0, side * h), (s0, back)));
            out.push(((s1, side * h), (s1, back)));
        }
        cursor = s1 + rng.random_range(5..=20);
    }
    let mut runs = Vec::new();
    let mut from = wall.0;
    for (a, b) in openings {
        if a > from {
            runs.push((from, a));
        }
        from = b;
    }
    if wall.1 > from {
        runs.push((from, wall.1));
    }
    out.extend(runs.iter().map(|&(a, b)| ((a, side * h), (b, side * h))));
    (out, runs)
}

fn build_world(p: &WorldParams, rng: &mut ChaCha8Rng) -> World {
    let (x, y) = (dm(p.leg_x), dm(p.leg_y));
    let corners = [(0, 0), (x, 0), (x, y), (0, y)];
    let h = dm(p.corridor_width / 2.0);
    let mut segs = Vec::new();
    let mut stubs = Vec::new();
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let u = ((b.0 - a.0).signum(), (b.1 - a.1).signum());
        let n = (-u.1, u.0);
        let len = (b.0 - a.0).abs() + (b.1 - a.1).abs();
        let to_world = |(s, t): (i64, i64)| (a.0 + s * u.0 + t * n.0, a.1 + s * u.1 + t * n.1);
        // Left of a counterclockwise loop is the inside.
        for (side, wall) in [(1, (h, len - h)), (-1, (-h, len + h))] {
            let (feature_segs, runs) = corridor_side(rng, p, len, side, wall);
            for (s, t) in feature_segs {
                segs.push(Seg::new(to_world(s), to_world(t)));
            }
            for (a, b) in runs {
                stubs.push((
                    to_world((a, side * h)),
                    to_world((b, side * h)),
                    (-side * n.0, -side * n.1),
                ));
            }
        }
    }
    // Short stubs on the bare walls, drawn last so the layout above does not
    // depend on them. Without them two bare stretches can be identical.
    for (from, to, inward) in stubs.into_iter().filter(|_| p.wall_stubs) {
        let len = (to.0 - from.0).abs() + (to.1 - from.1).abs();
        let dir = ((to.0 - from.0).signum(), (to.1 - from.1).signum());
        let mut at = rng.random_range(3..=60);
        while at < len - 2 {
            let depth = rng.random_range(1..=2);
            let foot = (from.0 + at * dir.0, from.1 + at * dir.1);
            segs.push(Seg::new(
                foot,
                (foot.0 + depth * inward.0, foot.1 + depth * inward.1),
            ));
            at += rng.random_range(20..=80);
        }
    }
    World { segs, corners }
}

/// Travel stamp of each world point: the nearest pose within `range` with a
/// clear line of sight, `None` if no pose sees it.
fn stamp_points(
    world: &World,
    points: &[(i64, i64)],
    poses: &[(Point2<f64>, f64)],
    range: f64,
) -> Vec<Option<f64>> {
    let r2 = range * range;
    points
        .iter()
        .map(|&(ix, iy)| {
            let w = Point2::new(ix as f64 * DM, iy as f64 * DM);
            let walls: Vec<&Seg> = world.segs.iter().filter(|s| s.dist2(w) <= r2).collect();
            let mut near: Vec<(f64, usize)> = poses
                .iter()
                .enumerate()
                .filter_map(|(i, (p, _))| {
                    let d2 = (p.x - w.x).powi(2) + (p.y - w.y).powi(2);
                    (d2 <= r2).then_some((d2, i))
                })
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            near.into_iter()
                .find(|&(_, i)| !walls.iter().any(|s| s.blocks(poses[i].0, w)))
                .map(|(_, i)| poses[i].1)
        })
        .collect()
}

/// One lap's observations: kept points with noise, stamped with `travel + lap_offset`.
fn observe(
    points: &[(i64, i64)],
    stamps: &[Option<f64>],
    lap_offset: f64,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<TrajectoryPoint> {
    let noise = Normal::new(0.0, cfg.noise_sigma.max(0.0)).expect("finite sigma");
    let mut out = Vec::new();
    for (&(ix, iy), stamp) in points.iter().zip(stamps) {
        let keep = rng.random::<f64>() < cfg.keep_prob;
        let (nx, ny) = (noise.sample(rng), noise.sample(rng));
        if let (true, Some(t)) = (keep, stamp) {
            out.push((
                Point2::new(ix as f64 * DM + nx, iy as f64 * DM + ny),
                t + lap_offset,
            ));
        }
    }
    out
}

/// Moves a submap so its extent starts half a cell from the origin.
fn reframe(map: &PointSetMap<f64>) -> Result<PointSetMap<f64>> {
    let o = map.extent().min_corner();
    let shift = Point2::new(o.x - DM / 2.0, o.y - DM / 2.0);
    let pts = map
        .points()
        .iter()
        .map(|p| Point2::new(p.x - shift.x, p.y - shift.y))
        .collect();
    PointSetMap::new(map.id(), pts)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub collection: MapCollection,
    /// `(local, global)` pairs whose global travel window contains the local one.
    pub relevant_pairs: Vec<(String, String)>,
    /// Both laps of observations, in travel order.
    pub stream: Vec<TrajectoryPoint>,
    pub lap_length: f64,
}

fn windows(from: f64, to: f64, window: f64, stride: f64) -> Vec<f64> {
    let mut starts = Vec::new();
    let mut k = 0;
    loop {
        let s = from + k as f64 * stride;
        if s + window > to + 1e-9 {
            break;
        }
        starts.push(s);
        k += 1;
    }
    starts
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let world = build_world(&cfg.world, &mut stream_rng(cfg.seed, 0));
    let points = world.points();
    let poses = world.poses(cfg.pose_spacing);
    let stamps = stamp_points(&world, &points, &poses, cfg.sensor_range);
    let lap = world.perimeter_dm() as f64 * DM;

    let lap1 = observe(&points, &stamps, 0.0, cfg, &mut stream_rng(cfg.seed, 1));
    let lap2 = observe(&points, &stamps, lap, cfg, &mut stream_rng(cfg.seed, 2));

    let g_starts = windows(0.0, lap, cfg.global_window, cfg.global_stride);
    let l_starts = windows(
        lap + cfg.local_offset,
        2.0 * lap,
        cfg.local_window,
        cfg.local_stride,
    );
    if g_starts.is_empty() || l_starts.is_empty() {
        return Err(Error::invalid("windows longer than a lap"));
    }
    let globals = segment_windows(&lap1, &g_starts, cfg.global_window, false, "g")?;
    let locals = segment_windows(&lap2, &l_starts, cfg.local_window, false, "l")?;

    let mut relevant_pairs = Vec::new();
    for (l, ls) in locals.iter().zip(&l_starts) {
        let (a, b) = (ls - lap, ls - lap + cfg.local_window);
        for (g, gs) in globals.iter().zip(&g_starts) {
            if *gs <= a + 1e-9 && gs + cfg.global_window >= b - 1e-9 {
                relevant_pairs.push((l.map.id().to_owned(), g.map.id().to_owned()));
            }
        }
    }

    let mut annotations = BTreeMap::new();
    let mut finish = |v: Vec<AnnotatedMap>| -> Result<Vec<PointSetMap<f64>>> {
        v.into_iter()
            .map(|a| {
                annotations.insert(a.map.id().to_owned(), a.annotation);
                reframe(&a.map)
            })
            .collect()
    };
    let globals = finish(globals)?;
    let locals = finish(locals)?;

    let collection = MapCollection {
        dictionary: dictionary_map(cfg)?,
        locals,
        globals,
        annotations,
    };
    collection.validate()?;
    let mut stream = lap1;
    stream.extend(lap2);
    stream.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(SynthDataset {
        collection,
        relevant_pairs,
        stream,
        lap_length: lap,
    })
}

/// One observed lap of a separate world, in its own frame.
pub fn dictionary_map(cfg: &SynthConfig) -> Result<PointSetMap<f64>> {
    let world = build_world(&cfg.dictionary_world, &mut stream_rng(cfg.seed, 10));
    let points = world.points();
    let poses = world.poses(cfg.pose_spacing);
    let stamps = stamp_points(&world, &points, &poses, cfg.sensor_range);
    let obs = observe(&points, &stamps, 0.0, cfg, &mut stream_rng(cfg.seed, 11));
    let map = PointSetMap::new("dictionary", obs.into_iter().map(|(p, _)| p).collect())?;
    reframe(&map)
}

/// A map made of two rooms whose left room also appears, unchanged, in the
/// dictionary among unrelated wall fragments.
#[derive(Clone, Debug)]
pub struct PlantedScenario {
    pub map: PointSetMap<f64>,
    pub dictionary: PointSetMap<f64>,
    /// Extent of the planted room in dictionary coordinates.
    pub planted: BBox<f64>,
}

pub fn two_room_scenario(seed: u64) -> Result<PlantedScenario> {
    let mut rng = stream_rng(seed, 20);
    let mut noise_rng = stream_rng(seed, 21);
    let noise = Normal::new(0.0, 0.01).expect("finite sigma");
    // Left room 4 x 3 m with a clutter box and a wall stub, right room 3.5 x 3 m.
    // Both end walls have wide doorways: a square no longer than the map has
    // to cut into one end, and heavy end walls would fail the coverage test.
    let left = [
        Seg::new((0, 0), (40, 0)),
        Seg::new((0, 30), (40, 30)),
        Seg::new((0, 0), (0, 6)),
        Seg::new((0, 24), (0, 30)),
        Seg::new((40, 0), (40, 10)),
        Seg::new((40, 20), (40, 30)),
        Seg::new((8, 8), (14, 8)),
        Seg::new((8, 12), (14, 12)),
        Seg::new((8, 8), (8, 12)),
        Seg::new((14, 8), (14, 12)),
        Seg::new((25, 30), (25, 18)),
    ];
    let right = [
        Seg::new((40, 0), (75, 0)),
        Seg::new((40, 30), (75, 30)),
        Seg::new((75, 0), (75, 6)),
        Seg::new((75, 24), (75, 30)),
        Seg::new((58, 0), (58, 9)),
    ];
    let mut sample = |segs: &[Seg], offset: (i64, i64)| -> Vec<Point2<f64>> {
        let set: BTreeSet<(i64, i64)> = segs
            .iter()
            .flat_map(|s| s.lattice_points().collect::<Vec<_>>())
            .collect();
        set.into_iter()
            .map(|(x, y)| {
                Point2::new(
                    (x + offset.0) as f64 * DM + noise.sample(&mut noise_rng),
                    (y + offset.1) as f64 * DM + noise.sample(&mut noise_rng),
                )
            })
            .collect()
    };
    let mut map_pts = sample(&left, (0, 0));
    map_pts.extend(sample(&right, (0, 0)));
    map_pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    map_pts.dedup_by(|a, b| a.distance(b) < 1e-3);

    let off = (rng.random_range(20..=100), rng.random_range(20..=150));
    let mut dict_pts = sample(&left, off);
    let planted = BBox::new(
        off.0 as f64 * DM,
        (off.0 + 40) as f64 * DM,
        off.1 as f64 * DM,
        (off.1 + 30) as f64 * DM,
    )?;
    let keep_out = planted.dilate(1.0);
    let mut fragments = 0;
    while fragments < 14 {
        let len = rng.random_range(10..=30);
        let (x, y) = (
            rng.random_range(0..=200 - len),
            rng.random_range(0..=200 - len),
        );
        let seg = if rng.random::<bool>() {
            Seg::new((x, y), (x + len, y))
        } else {
            Seg::new((x, y), (x, y + len))
        };
        let bb = BBox::new(
            seg.a.0 as f64 * DM,
            seg.b.0 as f64 * DM,
            seg.a.1 as f64 * DM,
            seg.b.1 as f64 * DM,
        )?;
        if bb.intersects(&keep_out) {
            continue;
        }
        dict_pts.extend(sample(&[seg], (0, 0)));
        fragments += 1;
    }
    // Corner markers pin the dictionary extent to the 20 x 20 m field.
    dict_pts.push(Point2::new(0.0, 0.0));
    dict_pts.push(Point2::new(20.0, 20.0));
    Ok(PlantedScenario {
        map: PointSetMap::new("two_rooms", map_pts)?,
        dictionary: PointSetMap::new("planted_dictionary", dict_pts)?,
        planted,
    })
}
