mod common;

use common::appearance_oracle;
use partmatch::cpd::appearance_similarity;
use partmatch::geometry::rasterize;
use partmatch::{BBox, CpdConfig, Point2, PointSetMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(x: f64, y: f64) -> Point2<f64> {
    Point2::new(x, y)
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, w: f64, h: f64) -> Vec<Point2<f64>> {
    (0..n)
        .map(|_| p(rng.random_range(0.0..w), rng.random_range(0.0..h)))
        .collect()
}

#[test]
fn matches_exhaustive_enumeration_on_small_crops() {
    let cfg = CpdConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..60 {
        let n = rng.random_range(5..=50);
        let map = PointSetMap::new("m", random_points(&mut rng, n, 3.0, 2.0)).unwrap();
        // A dictionary that contains a turned and shifted copy of the map plus clutter.
        let k = rng.random_range(0..4);
        let (sx, sy) = (rng.random_range(2.0..4.0), rng.random_range(2.0..4.0));
        let mut dict: Vec<Point2<f64>> = map
            .points()
            .iter()
            .map(|q| {
                let r = match k {
                    0 => *q,
                    1 => p(-q.y, q.x),
                    2 => p(-q.x, -q.y),
                    _ => p(q.y, -q.x),
                };
                p(r.x + sx + 3.0, r.y + sy + 3.0)
            })
            .collect();
        dict.extend(random_points(&mut rng, 80, 10.0, 10.0));
        let dict_map = PointSetMap::new("d", dict.clone()).unwrap();
        let grid = rasterize(&dict_map, cfg.grid_resolution).unwrap();

        let ext = *map.extent();
        let kb = BBox::from_corner(
            ext.x_begin() + rng.random_range(0.0..0.5),
            ext.y_begin() + rng.random_range(0.0..0.5),
            rng.random_range(1.0..3.0),
            rng.random_range(1.0..2.0),
        )
        .unwrap();
        if map.count_inside(&kb) == 0 {
            continue;
        }
        let side = kb.width().max(kb.height());
        let db = BBox::from_corner(
            rng.random_range(0.0..6.0),
            rng.random_range(0.0..6.0),
            side + 1.0,
            side + 1.0,
        )
        .unwrap();

        let got = appearance_similarity(&map, &kb, &grid, &db, &cfg).unwrap();
        let (want, n) = appearance_oracle(
            &map,
            &kb,
            &dict,
            &db,
            cfg.translation_step,
            cfg.grid_resolution,
        );
        assert_eq!(got.crop_len, n, "case {case}");
        assert!(n <= 50);
        assert_eq!(got.inliers, want, "case {case}");
        assert_eq!(got.score, want as f64 / n as f64);
    }
}

#[test]
fn self_dictionary_scores_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let map = PointSetMap::new("m", random_points(&mut rng, 40, 4.0, 3.0)).unwrap();
    let cfg = CpdConfig::default();
    let grid = rasterize(&map, cfg.grid_resolution).unwrap();
    let e = *map.extent();
    let m = appearance_similarity(&map, &e, &grid, &e, &cfg).unwrap();
    assert_eq!(m.score, 1.0);
}

#[test]
fn empty_window_scores_zero() {
    let map = PointSetMap::new("m", vec![p(0.0, 0.0), p(1.0, 1.0)]).unwrap();
    let dict = PointSetMap::new("d", vec![p(50.0, 50.0)]).unwrap();
    let cfg = CpdConfig::default();
    let grid = rasterize(&dict, cfg.grid_resolution).unwrap();
    let db = BBox::new(0.0, 3.0, 0.0, 3.0).unwrap();
    let m = appearance_similarity(&map, map.extent(), &grid, &db, &cfg).unwrap();
    assert_eq!(m.score, 0.0);
}

#[test]
fn shifted_square_is_found() {
    let corners = vec![p(0.05, 0.05), p(1.05, 0.05), p(0.05, 1.05), p(1.05, 1.05)];
    let map = PointSetMap::new("m", corners.clone()).unwrap();
    let dict = PointSetMap::new(
        "d",
        corners.iter().map(|q| p(q.x + 0.5, q.y + 0.5)).collect(),
    )
    .unwrap();
    let cfg = CpdConfig::default();
    let grid = rasterize(&dict, cfg.grid_resolution).unwrap();
    let db = BBox::new(0.0, 3.0, 0.0, 3.0).unwrap();
    let m = appearance_similarity(&map, map.extent(), &grid, &db, &cfg).unwrap();
    assert_eq!(m.score, 1.0);
    let (want, _) = appearance_oracle(&map, map.extent(), dict.points(), &db, 0.1, 0.1);
    assert_eq!(want, 4);
}

#[test]
fn empty_crop_is_invalid() {
    let map = PointSetMap::new("m", vec![p(0.0, 0.0)]).unwrap();
    let cfg = CpdConfig::default();
    let grid = rasterize(&map, 0.1).unwrap();
    let kb = BBox::new(5.0, 6.0, 5.0, 6.0).unwrap();
    assert!(appearance_similarity(&map, &kb, &grid, &kb, &cfg).is_err());
}

#[test]
fn adding_dictionary_cells_never_lowers_the_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cfg = CpdConfig::default();
    for _ in 0..20 {
        let map = PointSetMap::new("m", random_points(&mut rng, 30, 2.0, 2.0)).unwrap();
        let mut dict = random_points(&mut rng, 60, 5.0, 5.0);
        let db = BBox::new(0.0, 5.0, 0.0, 5.0).unwrap();
        let before = {
            let grid = rasterize(&PointSetMap::new("d", dict.clone()).unwrap(), 0.1).unwrap();
            appearance_similarity(&map, map.extent(), &grid, &db, &cfg)
                .unwrap()
                .score
        };
        dict.extend(random_points(&mut rng, 40, 5.0, 5.0));
        let grid = rasterize(&PointSetMap::new("d", dict).unwrap(), 0.1).unwrap();
        let after = appearance_similarity(&map, map.extent(), &grid, &db, &cfg)
            .unwrap()
            .score;
        assert!(after >= before);
    }
}
