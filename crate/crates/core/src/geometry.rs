//! Points, rigid transforms, axis-aligned boxes and binary occupancy grids.
//!
//! Everything here is immutable once built. The inlier test used by both the
//! direct matcher and common pattern discovery lives here as [`inlier_count`]:
//! a transformed point counts when the grid cell containing it is occupied.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rotation hypotheses considered by the matchers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationMode {
    /// Quarter turns only; maps are assumed axis-aligned.
    #[default]
    Manhattan4,
    Free,
}

impl std::str::FromStr for RotationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manhattan-4" | "manhattan4" => Ok(Self::Manhattan4),
            "free" => Ok(Self::Free),
            other => Err(Error::invalid(format!("unknown rotation mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn cast<U: Real>(&self) -> Point2<U> {
        Point2::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

/// Rotation about the origin followed by a translation.
///
/// The sine and cosine are stored so quarter turns stay exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform2<T> {
    rotation: T,
    cos: T,
    sin: T,
    translation: Point2<T>,
}

impl<T: Real> RigidTransform2<T> {
    pub fn new(rotation: T, translation: Point2<T>) -> Self {
        let (sin, cos) = rotation.sin_cos();
        Self {
            rotation,
            cos,
            sin,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::quarter_turns(0, Point2::origin())
    }

    pub fn translation_only(dx: T, dy: T) -> Self {
        Self::quarter_turns(0, Point2::new(dx, dy))
    }

    /// Rotation by `k · π/2` with exact unit sine/cosine.
    pub fn quarter_turns(k: i32, translation: Point2<T>) -> Self {
        let (one, zero) = (T::one(), T::zero());
        let (cos, sin) = match k.rem_euclid(4) {
            0 => (one, zero),
            1 => (zero, one),
            2 => (-one, zero),
            _ => (zero, -one),
        };
        Self {
            rotation: T::FRAC_PI_2() * T::lit(f64::from(k.rem_euclid(4))),
            cos,
            sin,
            translation,
        }
    }

    pub fn rotation(&self) -> T {
        self.rotation
    }

    pub fn translation(&self) -> Point2<T> {
        self.translation
    }

    /// Applies only the rotation part.
    #[inline]
    pub fn rotate(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(
            self.cos * p.x - self.sin * p.y,
            self.sin * p.x + self.cos * p.y,
        )
    }

    #[inline]
    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        let r = self.rotate(p);
        Point2::new(r.x + self.translation.x, r.y + self.translation.y)
    }

    /// Same rotation, different translation.
    pub fn with_translation(&self, translation: Point2<T>) -> Self {
        Self {
            translation,
            ..*self
        }
    }

    pub fn inverse(&self) -> Self {
        let t = self.translation;
        Self {
            rotation: -self.rotation,
            cos: self.cos,
            sin: -self.sin,
            translation: Point2::new(
                -(self.cos * t.x + self.sin * t.y),
                -(-self.sin * t.x + self.cos * t.y),
            ),
        }
    }
}

pub fn apply_transform<T: Real>(t: &RigidTransform2<T>, p: Point2<T>) -> Point2<T> {
    t.apply(p)
}

/// Closed axis-aligned rectangle `[x_begin, x_end] × [y_begin, y_end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox<T> {
    x_begin: T,
    x_end: T,
    y_begin: T,
    y_end: T,
}

impl<T: Real> BBox<T> {
    pub fn new(x_begin: T, x_end: T, y_begin: T, y_end: T) -> Result<Self> {
        let finite = [x_begin, x_end, y_begin, y_end]
            .iter()
            .all(|v| v.is_finite());
        if !finite || x_begin > x_end || y_begin > y_end {
            return Err(Error::invalid(format!(
                "invalid box [{x_begin}, {x_end}] x [{y_begin}, {y_end}]"
            )));
        }
        Ok(Self {
            x_begin,
            x_end,
            y_begin,
            y_end,
        })
    }

    pub fn from_corner(x: T, y: T, width: T, height: T) -> Result<Self> {
        Self::new(x, x + width, y, y + height)
    }

    /// Smallest box enclosing every point, `None` for an empty slice.
    pub fn enclosing(points: &[Point2<T>]) -> Option<Self> {
        let first = points.first()?;
        let mut b = Self {
            x_begin: first.x,
            x_end: first.x,
            y_begin: first.y,
            y_end: first.y,
        };
        for p in &points[1..] {
            b.x_begin = b.x_begin.min(p.x);
            b.x_end = b.x_end.max(p.x);
            b.y_begin = b.y_begin.min(p.y);
            b.y_end = b.y_end.max(p.y);
        }
        Some(b)
    }

    pub fn x_begin(&self) -> T {
        self.x_begin
    }
    pub fn x_end(&self) -> T {
        self.x_end
    }
    pub fn y_begin(&self) -> T {
        self.y_begin
    }
    pub fn y_end(&self) -> T {
        self.y_end
    }

    pub fn width(&self) -> T {
        self.x_end - self.x_begin
    }

    pub fn height(&self) -> T {
        self.y_end - self.y_begin
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn min_corner(&self) -> Point2<T> {
        Point2::new(self.x_begin, self.y_begin)
    }

    pub fn center(&self) -> Point2<T> {
        let two = T::lit(2.0);
        Point2::new(
            (self.x_begin + self.x_end) / two,
            (self.y_begin + self.y_end) / two,
        )
    }

    pub fn longer_side(&self) -> T {
        self.width().max(self.height())
    }

    #[inline]
    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x >= self.x_begin && p.x <= self.x_end && p.y >= self.y_begin && p.y <= self.y_end
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        other.x_begin >= self.x_begin
            && other.x_end <= self.x_end
            && other.y_begin >= self.y_begin
            && other.y_end <= self.y_end
    }

    /// Intersection rectangle; `None` when the boxes are disjoint.
    pub fn overlap(&self, other: &Self) -> Option<Self> {
        let x_begin = self.x_begin.max(other.x_begin);
        let x_end = self.x_end.min(other.x_end);
        let y_begin = self.y_begin.max(other.y_begin);
        let y_end = self.y_end.min(other.y_end);
        (x_begin <= x_end && y_begin <= y_end).then_some(Self {
            x_begin,
            x_end,
            y_begin,
            y_end,
        })
    }

    pub fn overlap_area(&self, other: &Self) -> T {
        let w = self.x_end.min(other.x_end) - self.x_begin.max(other.x_begin);
        let h = self.y_end.min(other.y_end) - self.y_begin.max(other.y_begin);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.overlap(other).is_some()
    }

    pub fn dilate(&self, margin: T) -> Self {
        Self {
            x_begin: self.x_begin - margin,
            x_end: self.x_end + margin,
            y_begin: self.y_begin - margin,
            y_end: self.y_end + margin,
        }
    }

    pub fn translate(&self, dx: T, dy: T) -> Self {
        Self {
            x_begin: self.x_begin + dx,
            x_end: self.x_end + dx,
            y_begin: self.y_begin + dy,
            y_end: self.y_end + dy,
        }
    }

    /// Bounding box of the four transformed corners.
    pub fn transformed(&self, t: &RigidTransform2<T>) -> Self {
        let corners = [
            Point2::new(self.x_begin, self.y_begin),
            Point2::new(self.x_end, self.y_begin),
            Point2::new(self.x_begin, self.y_end),
            Point2::new(self.x_end, self.y_end),
        ]
        .map(|c| t.apply(c));
        Self::enclosing(&corners).expect("four corners")
    }

    pub fn cast<U: Real>(&self) -> BBox<U> {
        BBox {
            x_begin: U::lit(self.x_begin.as_f64()),
            x_end: U::lit(self.x_end.as_f64()),
            y_begin: U::lit(self.y_begin.as_f64()),
            y_end: U::lit(self.y_end.as_f64()),
        }
    }
}

pub fn bbox_overlap<T: Real>(a: &BBox<T>, b: &BBox<T>) -> Option<BBox<T>> {
    a.overlap(b)
}

/// A 2D point cloud with an identifier. Coordinates are meters.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSetMap<T> {
    id: String,
    points: Vec<Point2<T>>,
    extent: BBox<T>,
}

impl<T: Real> PointSetMap<T> {
    pub fn new(id: impl Into<String>, points: Vec<Point2<T>>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::invalid("map id must be nonempty"));
        }
        if let Some(bad) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!(
                "map `{id}`: point {bad} is not finite"
            )));
        }
        let extent = BBox::enclosing(&points)
            .ok_or_else(|| Error::invalid(format!("map `{id}` has no points")))?;
        Ok(Self { id, points, extent })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    pub fn extent(&self) -> &BBox<T> {
        &self.extent
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point2<T> {
        let n = T::lit(self.points.len() as f64);
        let (sx, sy) = self
            .points
            .iter()
            .fold((T::zero(), T::zero()), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point2::new(sx / n, sy / n)
    }

    pub fn count_inside(&self, bb: &BBox<T>) -> usize {
        self.points.iter().filter(|p| bb.contains(**p)).count()
    }

    pub fn transformed(&self, t: &RigidTransform2<T>) -> Self {
        let points: Vec<_> = self.points.iter().map(|p| t.apply(*p)).collect();
        let extent = BBox::enclosing(&points).expect("nonempty");
        Self {
            id: self.id.clone(),
            points,
            extent,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// Binary occupancy grid over an absolute lattice of square cells.
///
/// Cell `(i, j)` of the lattice covers `[i·r, (i+1)·r) × [j·r, (j+1)·r)`; the
/// grid stores a `width × height` window of it starting at `origin_cell`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid<T> {
    origin_cell: (i64, i64),
    resolution: T,
    width: usize,
    height: usize,
    bits: Vec<u64>,
}

impl<T: Real> OccupancyGrid<T> {
    /// Grid with the given cells (relative to `origin_cell`) marked occupied.
    /// Cells outside `width × height` are ignored.
    pub fn from_cells(
        origin_cell: (i64, i64),
        resolution: T,
        width: usize,
        height: usize,
        cells: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if !(resolution > T::zero()) || !resolution.is_finite() {
            return Err(Error::invalid(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        let mut grid = Self {
            origin_cell,
            resolution,
            width,
            height,
            bits: vec![0; (width * height).div_ceil(64)],
        };
        for (ix, iy) in cells {
            if ix < width && iy < height {
                let k = iy * width + ix;
                grid.bits[k / 64] |= 1 << (k % 64);
            }
        }
        Ok(grid)
    }

    pub fn resolution(&self) -> T {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin_cell(&self) -> (i64, i64) {
        self.origin_cell
    }

    /// World coordinates of the grid's lower-left corner.
    pub fn origin(&self) -> Point2<T> {
        Point2::new(
            T::lit(self.origin_cell.0 as f64) * self.resolution,
            T::lit(self.origin_cell.1 as f64) * self.resolution,
        )
    }

    /// Absolute lattice cell containing `p`.
    #[inline]
    pub fn lattice_cell(&self, p: Point2<T>) -> Option<(i64, i64)> {
        let cx = (p.x / self.resolution).floor().to_i64()?;
        let cy = (p.y / self.resolution).floor().to_i64()?;
        Some((cx, cy))
    }

    /// Grid-relative cell containing `p`, `None` outside the grid.
    #[inline]
    pub fn cell_of(&self, p: Point2<T>) -> Option<(usize, usize)> {
        let (cx, cy) = self.lattice_cell(p)?;
        let ix = cx.checked_sub(self.origin_cell.0)?;
        let iy = cy.checked_sub(self.origin_cell.1)?;
        if ix < 0 || iy < 0 || ix as usize >= self.width || iy as usize >= self.height {
            return None;
        }
        Some((ix as usize, iy as usize))
    }

    #[inline]
    pub fn is_cell_occupied(&self, ix: usize, iy: usize) -> bool {
        let k = iy * self.width + ix;
        self.bits[k / 64] & (1 << (k % 64)) != 0
    }

    /// The inlier oracle: true iff `p` lies in an occupied cell of this grid.
    #[inline]
    pub fn is_occupied(&self, p: Point2<T>) -> bool {
        match self.cell_of(p) {
            Some((ix, iy)) => self.is_cell_occupied(ix, iy),
            None => false,
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Grid where a cell is occupied iff some occupied cell lies within
    /// `radius` cells of it (Chebyshev distance). The window grows by `radius`
    /// on every side.
    pub fn dilated(&self, radius: usize) -> Self {
        let (w, h) = (self.width + 2 * radius, self.height + 2 * radius);
        if self.height == 0 || self.width == 0 {
            return Self::from_cells(self.origin_cell, self.resolution, 0, 0, [])
                .expect("resolution already validated");
        }
        // Separable max filter: rows first, then columns.
        let mut rows = vec![false; w * self.height];
        for iy in 0..self.height {
            for ix in 0..self.width {
                if self.is_cell_occupied(ix, iy) {
                    for dx in 0..=2 * radius {
                        rows[iy * w + ix + dx] = true;
                    }
                }
            }
        }
        let mut cells = Vec::new();
        for iy in 0..h {
            let lo = iy.saturating_sub(2 * radius);
            let hi = iy.min(self.height - 1);
            for ix in 0..w {
                if lo <= hi && (lo..=hi).any(|sy| rows[sy * w + ix]) {
                    cells.push((ix, iy));
                }
            }
        }
        let r = radius as i64;
        Self::from_cells(
            (self.origin_cell.0 - r, self.origin_cell.1 - r),
            self.resolution,
            w,
            h,
            cells,
        )
        .expect("resolution already validated")
    }

    /// Occupied cells as absolute lattice coordinates, row-major.
    pub fn occupied_cells(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::with_capacity(self.occupied_count());
        for iy in 0..self.height {
            for ix in 0..self.width {
                if self.is_cell_occupied(ix, iy) {
                    out.push((
                        self.origin_cell.0 + ix as i64,
                        self.origin_cell.1 + iy as i64,
                    ));
                }
            }
        }
        out
    }
}

/// Rasterizes a point set. The grid covers the lattice cells spanned by the
/// points plus one padding cell on every side.
pub fn rasterize_points<T: Real>(points: &[Point2<T>], resolution: T) -> Result<OccupancyGrid<T>> {
    if !(resolution > T::zero()) || !resolution.is_finite() {
        return Err(Error::invalid(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    let cells: Vec<(i64, i64)> = points
        .iter()
        .map(|p| {
            let cx = (p.x / resolution).floor().to_i64();
            let cy = (p.y / resolution).floor().to_i64();
            cx.zip(cy)
                .ok_or_else(|| Error::invalid("point cannot be quantized at this resolution"))
        })
        .collect::<Result<_>>()?;
    let Some(&first) = cells.first() else {
        return Err(Error::invalid("cannot rasterize an empty point set"));
    };
    let (mut min, mut max) = (first, first);
    for &(cx, cy) in &cells {
        min = (min.0.min(cx), min.1.min(cy));
        max = (max.0.max(cx), max.1.max(cy));
    }
    let origin_cell = (min.0 - 1, min.1 - 1);
    let width = (max.0 - min.0 + 3) as usize;
    let height = (max.1 - min.1 + 3) as usize;
    OccupancyGrid::from_cells(
        origin_cell,
        resolution,
        width,
        height,
        cells
            .into_iter()
            .map(|(cx, cy)| ((cx - origin_cell.0) as usize, (cy - origin_cell.1) as usize)),
    )
}

pub fn rasterize<T: Real>(map: &PointSetMap<T>, resolution: T) -> Result<OccupancyGrid<T>> {
    rasterize_points(map.points(), resolution)
}

/// Number of points whose image under `t` lands in an occupied cell.
pub fn inlier_count<T: Real>(
    points: &[Point2<T>],
    t: &RigidTransform2<T>,
    grid: &OccupancyGrid<T>,
) -> usize {
    points
        .iter()
        .filter(|p| grid.is_occupied(t.apply(**p)))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    fn bb(xb: f64, xe: f64, yb: f64, ye: f64) -> BBox<f64> {
        BBox::new(xb, xe, yb, ye).unwrap()
    }

    #[test]
    fn identity_leaves_point_alone() {
        let q = apply_transform(&RigidTransform2::identity(), p(3.0, -2.0));
        assert_eq!(q, p(3.0, -2.0));
    }

    #[test]
    fn quarter_turn_maps_x_axis_to_y_axis() {
        let t = RigidTransform2::new(std::f64::consts::FRAC_PI_2, Point2::origin());
        let q = t.apply(p(1.0, 0.0));
        assert!((q.x - 0.0).abs() < 1e-12 && (q.y - 1.0).abs() < 1e-12);
        let exact = RigidTransform2::quarter_turns(1, Point2::origin()).apply(p(1.0, 0.0));
        assert_eq!(exact, p(0.0, 1.0));
    }

    #[test]
    fn half_turn_with_translation_matches_complex_product() {
        let t = RigidTransform2::new(std::f64::consts::PI, p(1.0, 1.0));
        let q = t.apply(p(2.0, 0.0));
        // (2 + 0i) · e^{iπ} + (1 + i)
        let (re, im) = {
            let (s, c) = std::f64::consts::PI.sin_cos();
            (2.0 * c - 0.0 * s + 1.0, 2.0 * s + 0.0 * c + 1.0)
        };
        assert!((q.x - re).abs() < 1e-12 && (q.y - im).abs() < 1e-12);
        assert!((q.x + 1.0).abs() < 1e-12 && (q.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_occupies_one_cell() {
        let map = PointSetMap::new("m", vec![p(0.05, 0.05)]).unwrap();
        let grid = rasterize(&map, 0.1).unwrap();
        assert_eq!(grid.occupied_count(), 1);
        assert_eq!((grid.width(), grid.height()), (3, 3));
    }

    #[test]
    fn points_sharing_a_cell_occupy_it_once() {
        let map = PointSetMap::new("m", vec![p(0.01, 0.02), p(0.09, 0.03)]).unwrap();
        assert_eq!(rasterize(&map, 0.1).unwrap().occupied_count(), 1);
    }

    #[test]
    fn occupied_cells_match_distinct_quantized_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<_> = (0..100)
            .map(|_| p(rng.random_range(-3.0..3.0), rng.random_range(-1.0..2.0)))
            .collect();
        let distinct: HashSet<(i64, i64)> = pts
            .iter()
            .map(|q| ((q.x / 0.1).floor() as i64, (q.y / 0.1).floor() as i64))
            .collect();
        let map = PointSetMap::new("m", pts).unwrap();
        let grid = rasterize(&map, 0.1).unwrap();
        assert_eq!(grid.occupied_count(), distinct.len());
        let cells: HashSet<_> = grid.occupied_cells().into_iter().collect();
        assert_eq!(cells, distinct);
    }

    #[test]
    fn dilation_matches_chebyshev_neighbourhood() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (0..25)
            .map(|_| p(rng.random_range(0.0..1.5), rng.random_range(0.0..0.8)))
            .collect();
        let grid = rasterize(&PointSetMap::new("m", pts).unwrap(), 0.1).unwrap();
        let src: Vec<(i64, i64)> = grid.occupied_cells();
        for r in 0..3 {
            let d = grid.dilated(r);
            let got: HashSet<_> = d.occupied_cells().into_iter().collect();
            let mut want = HashSet::new();
            for &(cx, cy) in &src {
                for dx in -(r as i64)..=r as i64 {
                    for dy in -(r as i64)..=r as i64 {
                        want.insert((cx + dx, cy + dy));
                    }
                }
            }
            assert_eq!(got, want, "radius {r}");
            assert_eq!(
                (d.width(), d.height()),
                (grid.width() + 2 * r, grid.height() + 2 * r)
            );
        }
    }

    #[test]
    fn nonpositive_resolution_is_rejected() {
        let map = PointSetMap::new("m", vec![p(0.0, 0.0)]).unwrap();
        assert!(matches!(
            rasterize(&map, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            rasterize(&map, -0.1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn cell_boundaries_are_half_open() {
        let map = PointSetMap::new("m", vec![p(0.0, 0.0)]).unwrap();
        let grid = rasterize(&map, 0.5).unwrap();
        assert!(grid.is_occupied(p(0.0, 0.0)));
        assert!(grid.is_occupied(p(0.49, 0.49)));
        assert!(!grid.is_occupied(p(0.5, 0.0)));
        assert!(!grid.is_occupied(p(-0.01, 0.0)));
    }

    #[test]
    fn self_match_counts_every_point() {
        let pts = vec![p(0.0, 0.0), p(1.0, 0.3), p(2.5, 2.5), p(2.5, 2.51)];
        let map = PointSetMap::new("m", pts.clone()).unwrap();
        let grid = rasterize(&map, 0.1).unwrap();
        assert_eq!(inlier_count(&pts, &RigidTransform2::identity(), &grid), 4);
    }

    #[test]
    fn points_outside_grid_are_not_inliers() {
        let pts = vec![p(0.0, 0.0), p(1.0, 1.0)];
        let map = PointSetMap::new("m", pts.clone()).unwrap();
        let grid = rasterize(&map, 0.1).unwrap();
        let far = RigidTransform2::translation_only(100.0, -50.0);
        assert_eq!(inlier_count(&pts, &far, &grid), 0);
    }

    #[test]
    fn hand_enumerated_four_by_four_grid() {
        // Cells (0,0) and (2,1) occupied on a 4×4 grid of 1 m cells.
        let grid = OccupancyGrid::from_cells((0, 0), 1.0, 4, 4, [(0, 0), (2, 1)]).unwrap();
        let xs = [p(0.5, 0.5), p(2.2, 1.9), p(3.5, 3.5)];
        assert_eq!(inlier_count(&xs, &RigidTransform2::identity(), &grid), 2);
    }

    #[test]
    fn overlap_cases() {
        let a = bb(0.0, 2.0, 0.0, 1.0);
        assert_eq!(bbox_overlap(&a, &a), Some(a));
        assert_eq!(bbox_overlap(&a, &bb(5.0, 6.0, 5.0, 6.0)), None);
        assert_eq!(a.overlap_area(&bb(5.0, 6.0, 5.0, 6.0)), 0.0);
        let o = bbox_overlap(&a, &bb(1.0, 3.0, 0.0, 1.0)).unwrap();
        assert_eq!(o, bb(1.0, 2.0, 0.0, 1.0));
        assert_eq!(o.area(), 1.0);
    }

    #[test]
    fn invalid_boxes_rejected() {
        assert!(BBox::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn map_requires_points_and_id() {
        assert!(PointSetMap::<f64>::new("m", vec![]).is_err());
        assert!(PointSetMap::new("", vec![p(0.0, 0.0)]).is_err());
        assert!(PointSetMap::new("m", vec![p(f64::INFINITY, 0.0)]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let map =
            PointSetMap::new("m", vec![Point2::new(0.05f32, 0.05), Point2::new(1.0, 1.0)]).unwrap();
        let grid = rasterize(&map, 0.1f32).unwrap();
        assert_eq!(
            inlier_count(map.points(), &RigidTransform2::identity(), &grid),
            2
        );
    }
}
