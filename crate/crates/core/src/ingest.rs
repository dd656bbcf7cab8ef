//! Dataset preparation: map and trajectory text files, submap extraction by
//! travel distance, and Manhattan alignment.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, PointSetMap, RigidTransform2};
use crate::scalar::Real;

/// Bin width of the projection histograms used for Manhattan alignment.
pub const ALIGN_BIN: f64 = 0.1;

fn parse_header(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.trim_start_matches('#').split_once(':')?;
    Some((k.trim(), v.trim()))
}

fn parse_fields(line: &str, lineno: usize, expected: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != expected {
        return Err(Error::Parse {
            line: lineno,
            message: format!("expected {expected} numbers, found {} fields", fields.len()),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: format!("`{f}` is not a finite number"),
                })
        })
        .collect()
}

/// Parses the map text format. `fallback_id` is used when no `# id:` header is present.
pub fn parse_map<T: Real>(text: &str, fallback_id: &str) -> Result<PointSetMap<T>> {
    let mut id = None;
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(("id", v)) = parse_header(line) {
                id = Some(v.to_owned());
            }
            continue;
        }
        let f = parse_fields(line, i + 1, 2)?;
        points.push(Point2::new(T::lit(f[0]), T::lit(f[1])));
    }
    if points.is_empty() {
        return Err(Error::invalid("map file contains no points"));
    }
    PointSetMap::new(id.unwrap_or_else(|| fallback_id.to_owned()), points)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_map<T: Real>(path: impl AsRef<Path>) -> Result<PointSetMap<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_map(&text, &file_stem(path))
}

/// Renders a map with 17 significant digits per coordinate.
pub fn format_map<T: Real>(map: &PointSetMap<T>, source: Option<&str>) -> String {
    let mut s = format!("# id: {}\n", map.id());
    if let Some(src) = source {
        let _ = writeln!(s, "# source: {src}");
    }
    for p in map.points() {
        let _ = writeln!(s, "{:.16e} {:.16e}", p.x.as_f64(), p.y.as_f64());
    }
    s
}

pub fn save_map<T: Real>(map: &PointSetMap<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_map(map, None)).map_err(|e| Error::io(path, e))
}

/// A point stamped with the cumulative distance travelled when it was observed.
pub type TrajectoryPoint = (Point2<f64>, f64);

pub fn parse_trajectory(text: &str, fallback_id: &str) -> Result<(String, Vec<TrajectoryPoint>)> {
    let mut id = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(("id", v)) = parse_header(line) {
                id = Some(v.to_owned());
            }
            continue;
        }
        let f = parse_fields(line, i + 1, 3)?;
        out.push((Point2::new(f[0], f[1]), f[2]));
    }
    Ok((id.unwrap_or_else(|| fallback_id.to_owned()), out))
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<(String, Vec<TrajectoryPoint>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(&text, &file_stem(path))
}

pub fn format_trajectory(id: &str, points: &[TrajectoryPoint]) -> String {
    let mut s = format!("# id: {id}\n");
    for (p, t) in points {
        let _ = writeln!(s, "{:.3} {:.3} {:.3}", p.x, p.y, t);
    }
    s
}

/// Where a map was built: centroid of its points and travel distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapAnnotation {
    pub pose: Point2<f64>,
    pub travel: f64,
}

#[derive(Clone, Debug)]
pub struct AnnotatedMap {
    pub map: PointSetMap<f64>,
    pub annotation: MapAnnotation,
}

/// Cuts a travel-stamped point stream into overlapping windows.
///
/// Window `k` starts at `t0 + k·stride` and covers `[start, start + window)`;
/// the last window also includes its end. Enough windows are emitted to reach
/// the final travel value. Each submap is annotated with its centroid and the
/// travel at the window center.
pub fn segment_submaps(
    stream: &[TrajectoryPoint],
    window: f64,
    stride: f64,
    id_prefix: &str,
) -> Result<Vec<AnnotatedMap>> {
    if !(window > 0.0) || !(stride > 0.0) {
        return Err(Error::invalid("window and stride must be positive"));
    }
    let Some(t0) = stream.iter().map(|(_, t)| *t).reduce(f64::min) else {
        return Err(Error::invalid("trajectory is empty"));
    };
    let t1 = stream.iter().map(|(_, t)| *t).fold(t0, f64::max);
    let span = t1 - t0;
    let count = if span <= window {
        1
    } else {
        ((span - window) / stride - 1e-9).ceil() as usize + 1
    };
    let starts: Vec<f64> = (0..count).map(|k| t0 + k as f64 * stride).collect();
    segment_windows(stream, &starts, window, true, id_prefix)
}

/// Cuts windows `[start, start + window)` at explicit start travels. With
/// `close_last` the final window also includes its end. Submap `k` is named
/// `{id_prefix}{k:04}`.
pub fn segment_windows(
    stream: &[TrajectoryPoint],
    starts: &[f64],
    window: f64,
    close_last: bool,
    id_prefix: &str,
) -> Result<Vec<AnnotatedMap>> {
    let mut sorted: Vec<&TrajectoryPoint> = stream.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let count = starts.len();
    starts
        .iter()
        .enumerate()
        .map(|(k, &start)| {
            let end = start + window;
            let last = close_last && k + 1 == count;
            let lo = sorted.partition_point(|(_, t)| *t < start);
            let hi = if last {
                sorted.partition_point(|(_, t)| *t <= end)
            } else {
                sorted.partition_point(|(_, t)| *t < end)
            };
            let points: Vec<Point2<f64>> = sorted[lo..hi].iter().map(|(p, _)| *p).collect();
            if points.is_empty() {
                return Err(Error::invalid(format!(
                    "submap {k} over travel [{start:.3}, {end:.3}) has no points"
                )));
            }
            let map = PointSetMap::new(format!("{id_prefix}{k:04}"), points)?;
            let annotation = MapAnnotation {
                pose: map.centroid(),
                travel: start + window / 2.0,
            };
            Ok(AnnotatedMap { map, annotation })
        })
        .collect()
}

/// Sum of the Shannon entropies (nats) of the x and y projection histograms.
pub fn projection_entropy<T: Real>(points: &[Point2<T>], bin: f64) -> f64 {
    let axis = |vals: &mut dyn Iterator<Item = f64>| {
        let mut counts: HashMap<i64, usize> = HashMap::new();
        let mut n = 0usize;
        for v in vals {
            *counts.entry((v / bin).floor() as i64).or_default() += 1;
            n += 1;
        }
        let n = n as f64;
        counts
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum::<f64>()
    };
    axis(&mut points.iter().map(|p| p.x.as_f64())) + axis(&mut points.iter().map(|p| p.y.as_f64()))
}

/// Rotates `map` so its walls line up with the axes.
///
/// Tries every `θ = k·angle_step` in `[0, π/2)`, rotates the points by `θ`
/// and keeps the angle with the lowest [`projection_entropy`] (first one on
/// ties). Returns the rotated map and `θ`.
pub fn align_manhattan<T: Real>(
    map: &PointSetMap<T>,
    angle_step: f64,
) -> Result<(PointSetMap<T>, T)> {
    if !(angle_step > 0.0) || angle_step > std::f64::consts::PI / 180.0 + 1e-15 {
        return Err(Error::invalid("angle_step must lie in (0, π/180]"));
    }
    let steps = (std::f64::consts::FRAC_PI_2 / angle_step - 1e-9).ceil() as usize;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..steps {
        let theta = k as f64 * angle_step;
        let rot = RigidTransform2::new(T::lit(theta), Point2::origin());
        let rotated: Vec<Point2<T>> = map.points().iter().map(|p| rot.apply(*p)).collect();
        let h = projection_entropy(&rotated, ALIGN_BIN);
        if best.is_none_or(|(bh, _)| h < bh) {
            best = Some((h, theta));
        }
    }
    let (_, theta) = best.expect("at least one angle");
    let theta = T::lit(theta);
    Ok((
        map.transformed(&RigidTransform2::new(theta, Point2::origin())),
        theta,
    ))
}

/// Dictionary, query (local) and database (global) maps with annotations.
#[derive(Clone, Debug)]
pub struct MapCollection {
    pub dictionary: PointSetMap<f64>,
    pub locals: Vec<PointSetMap<f64>>,
    pub globals: Vec<PointSetMap<f64>>,
    pub annotations: BTreeMap<String, MapAnnotation>,
}

impl MapCollection {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for id in std::iter::once(&self.dictionary)
            .chain(&self.locals)
            .chain(&self.globals)
            .map(|m| m.id())
        {
            if !seen.insert(id) {
                return Err(Error::invalid(format!("duplicate map id `{id}`")));
            }
        }
        if let Some(id) = self
            .annotations
            .keys()
            .find(|id| !seen.contains(id.as_str()))
        {
            return Err(Error::invalid(format!("annotation for unknown map `{id}`")));
        }
        Ok(())
    }

    pub fn global(&self, id: &str) -> Option<&PointSetMap<f64>> {
        self.globals.iter().find(|m| m.id() == id)
    }

    pub fn local(&self, id: &str) -> Option<&PointSetMap<f64>> {
        self.locals.iter().find(|m| m.id() == id)
    }

    /// Layout: `dictionary.map`, `locals/<id>.map`, `globals/<id>.map`,
    /// `annotations.csv` (`id,pose_x,pose_y,travel`).
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for sub in ["locals", "globals"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        save_map(&self.dictionary, dir.join("dictionary.map"))?;
        for (sub, maps) in [("locals", &self.locals), ("globals", &self.globals)] {
            for m in maps {
                save_map(m, dir.join(sub).join(format!("{}.map", m.id())))?;
            }
        }
        let mut csv = String::from("id,pose_x,pose_y,travel\n");
        for (id, a) in &self.annotations {
            let _ = writeln!(csv, "{id},{},{},{}", a.pose.x, a.pose.y, a.travel);
        }
        let p = dir.join("annotations.csv");
        std::fs::write(&p, csv).map_err(|e| Error::io(&p, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let dictionary = load_map(dir.join("dictionary.map"))?;
        let locals = load_map_dir(dir.join("locals"))?;
        let globals = load_map_dir(dir.join("globals"))?;
        let p = dir.join("annotations.csv");
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let annotations = parse_annotations(&text)?;
        let c = Self {
            dictionary,
            locals,
            globals,
            annotations,
        };
        c.validate()?;
        Ok(c)
    }
}

pub fn parse_annotations(text: &str) -> Result<BTreeMap<String, MapAnnotation>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse {
            line: i + 1,
            message: "expected `id,pose_x,pose_y,travel`".into(),
        };
        if cols.len() != 4 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        out.insert(
            cols[0].to_owned(),
            MapAnnotation {
                pose: Point2::new(num(cols[1])?, num(cols[2])?),
                travel: num(cols[3])?,
            },
        );
    }
    Ok(out)
}

/// Every `*.map` file in `dir`, sorted by file name.
pub fn load_map_dir<T: Real>(dir: impl AsRef<Path>) -> Result<Vec<PointSetMap<T>>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "map"))
        .collect();
    paths.sort();
    paths.iter().map(load_map).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_id_and_points() {
        let m: PointSetMap<f64> =
            parse_map("# id: fr079_a\n# source: x\n0 0\n1.5 2\n-3 4e-1\n", "f").unwrap();
        assert_eq!(m.id(), "fr079_a");
        assert_eq!(m.len(), 3);
        assert_eq!(m.points()[2], Point2::new(-3.0, 0.4));
    }

    #[test]
    fn id_falls_back_to_stem() {
        let m: PointSetMap<f64> = parse_map("1 2\n", "stem").unwrap();
        assert_eq!(m.id(), "stem");
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let err = parse_map::<f64>("# id: a\n0 0\n1.0 2.0 3.0\n", "f").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_map::<f64>("0 zero\n", "f").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_file_is_invalid() {
        assert!(matches!(
            parse_map::<f64>("# id: a\n", "f"),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn save_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![
            Point2::new(0.1 + 0.2, -1.0 / 3.0),
            Point2::new(1e-300, 12345.678901234567),
        ];
        let m = PointSetMap::new("exact", pts).unwrap();
        let path = dir.path().join("m.map");
        save_map(&m, &path).unwrap();
        let back: PointSetMap<f64> = load_map(&path).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.points().iter().zip(m.points()) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
    }

    fn line_stream(length: f64, step: f64) -> Vec<TrajectoryPoint> {
        let n = (length / step).round() as usize;
        (0..=n)
            .map(|i| {
                let t = i as f64 * step;
                (Point2::new(t, 0.0), t)
            })
            .collect()
    }

    #[test]
    fn window_arithmetic() {
        let s = line_stream(100.0, 0.5);
        assert_eq!(segment_submaps(&s, 10.0, 5.0, "g").unwrap().len(), 19);
        let part = segment_submaps(&s, 10.0, 10.0, "g").unwrap();
        assert_eq!(part.len(), 10);
        let total: usize = part.iter().map(|a| a.map.len()).sum();
        assert_eq!(total, s.len());
    }

    #[test]
    fn every_point_is_covered() {
        let s = line_stream(57.3, 0.1);
        let subs = segment_submaps(&s, 6.0, 4.5, "g").unwrap();
        for (p, _) in &s {
            assert!(subs.iter().any(|a| a.map.points().contains(p)));
        }
    }

    #[test]
    fn window_narrower_than_spacing_fails() {
        let s = line_stream(10.0, 2.0);
        assert!(segment_submaps(&s, 0.5, 0.5, "g").is_err());
    }

    fn rectangle(w: f64, h: f64, pitch: f64) -> Vec<Point2<f64>> {
        let mut pts = Vec::new();
        let (nx, ny) = ((w / pitch) as usize, (h / pitch) as usize);
        for i in 0..nx {
            let x = i as f64 * pitch;
            pts.push(Point2::new(x + 0.013, 0.013));
            pts.push(Point2::new(x + 0.013, h + 0.013));
        }
        for j in 0..ny {
            let y = j as f64 * pitch;
            pts.push(Point2::new(0.013, y + 0.013));
            pts.push(Point2::new(w + 0.013, y + 0.013));
        }
        pts
    }

    fn quarter_distance(a: f64, b: f64) -> f64 {
        let q = std::f64::consts::FRAC_PI_2;
        let d = (a - b).rem_euclid(q);
        d.min(q - d)
    }

    #[test]
    fn aligned_rectangle_stays_put() {
        let m = PointSetMap::new("r", rectangle(6.0, 4.0, 0.05)).unwrap();
        let step = std::f64::consts::PI / 180.0;
        let (_, theta) = align_manhattan(&m, step).unwrap();
        assert!(quarter_distance(theta, 0.0) <= step);
    }

    #[test]
    fn rotated_rectangle_is_recovered() {
        let m = PointSetMap::new("r", rectangle(6.0, 4.0, 0.05)).unwrap();
        let applied = 30f64.to_radians();
        let tilted = m.transformed(&RigidTransform2::new(applied, Point2::origin()));
        let step = std::f64::consts::PI / 360.0;
        let (aligned, theta) = align_manhattan(&tilted, step).unwrap();
        assert!(quarter_distance(theta, -applied) <= step + 1e-12);
        let (_, again) = align_manhattan(&aligned, step).unwrap();
        assert!(quarter_distance(again, 0.0) <= step + 1e-12);
    }

    #[test]
    fn bad_angle_step_rejected() {
        let m = PointSetMap::new("r", rectangle(2.0, 2.0, 0.1)).unwrap();
        assert!(align_manhattan(&m, 0.0).is_err());
        assert!(align_manhattan(&m, 0.1).is_err());
    }

    #[test]
    fn collection_rejects_duplicates() {
        let m = PointSetMap::new("a", vec![Point2::new(0.0, 0.0)]).unwrap();
        let c = MapCollection {
            dictionary: m.clone().with_id("d"),
            locals: vec![m.clone()],
            globals: vec![m.clone()],
            annotations: BTreeMap::new(),
        };
        assert!(c.validate().is_err());
    }
}
