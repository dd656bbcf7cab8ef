//! Brute-force oracles shared by integration tests.
#![allow(dead_code)]

use std::collections::HashSet;

use partmatch::{BBox, Point2, PointSetMap};

/// Cells hit by a point set, by plain floor division.
pub fn cell_set(points: &[Point2<f64>], res: f64) -> HashSet<(i64, i64)> {
    points
        .iter()
        .map(|p| ((p.x / res).floor() as i64, (p.y / res).floor() as i64))
        .collect()
}

fn quarter(k: usize, p: Point2<f64>) -> Point2<f64> {
    match k {
        0 => p,
        1 => Point2::new(-p.y, p.x),
        2 => Point2::new(-p.x, -p.y),
        _ => Point2::new(p.y, -p.x),
    }
}

fn rotated_box(k: usize, b: &BBox<f64>) -> (f64, f64, f64, f64) {
    let corners = [
        quarter(k, Point2::new(b.x_begin(), b.y_begin())),
        quarter(k, Point2::new(b.x_end(), b.y_end())),
    ];
    (
        corners[0].x.min(corners[1].x),
        corners[0].x.max(corners[1].x),
        corners[0].y.min(corners[1].y),
        corners[0].y.max(corners[1].y),
    )
}

/// Best inlier count of the points inside `keypoint_bb` over every quarter
/// turn and every translation `(i·step, j·step)` that keeps the turned box
/// inside `descriptor_bb` grown by one cell. Enumerates a generous index
/// range and filters, so it does not share the library's range arithmetic.
pub fn appearance_oracle(
    map: &PointSetMap<f64>,
    keypoint_bb: &BBox<f64>,
    dictionary: &[Point2<f64>],
    descriptor_bb: &BBox<f64>,
    step: f64,
    res: f64,
) -> (usize, usize) {
    let crop: Vec<Point2<f64>> = map
        .points()
        .iter()
        .copied()
        .filter(|p| keypoint_bb.contains(*p))
        .collect();
    let occupied = cell_set(dictionary, res);
    let slack = f64::EPSILON.sqrt() * step;
    let (ax0, ax1, ay0, ay1) = (
        descriptor_bb.x_begin() - res,
        descriptor_bb.x_end() + res,
        descriptor_bb.y_begin() - res,
        descriptor_bb.y_end() + res,
    );
    let mut best = 0;
    for k in 0..4 {
        let pts: Vec<Point2<f64>> = crop.iter().map(|p| quarter(k, *p)).collect();
        let (x0, x1, y0, y1) = rotated_box(k, keypoint_bb);
        let span = |lo: f64, hi: f64| {
            (
                (lo / step).floor() as i64 - 3,
                (hi / step).ceil() as i64 + 3,
            )
        };
        let (ilo, ihi) = span(ax0 - x1, ax1 - x0);
        let (jlo, jhi) = span(ay0 - y1, ay1 - y0);
        for i in ilo..=ihi {
            let tx = i as f64 * step;
            if !(x0 + tx >= ax0 - slack && x1 + tx <= ax1 + slack) {
                continue;
            }
            for j in jlo..=jhi {
                let ty = j as f64 * step;
                if !(y0 + ty >= ay0 - slack && y1 + ty <= ay1 + slack) {
                    continue;
                }
                let n = pts
                    .iter()
                    .filter(|p| {
                        let c = (
                            ((p.x + tx) / res).floor() as i64,
                            ((p.y + ty) / res).floor() as i64,
                        );
                        occupied.contains(&c)
                    })
                    .count();
                best = best.max(n);
            }
        }
    }
    (best, crop.len())
}
