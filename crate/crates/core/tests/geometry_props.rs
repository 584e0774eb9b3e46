use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};
use sqpack::geometry::{
    canonical_angle, overlap_depth, polygon_area, squares_overlap, GridBlock, GridMotion,
};
use sqpack::{PlacedSquare, Point, Region};

fn square() -> impl Strategy<Value = PlacedSquare> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.2..3.2f64)
        .prop_map(|(x, y, a)| PlacedSquare::new(Point::new(x, y), a))
}

proptest! {
    #[test]
    fn overlap_is_symmetric(a in square(), b in square(), shrink in 0.0..0.01f64) {
        prop_assert_eq!(squares_overlap(&a, &b, shrink), squares_overlap(&b, &a, shrink));
        let (d1, d2) = (overlap_depth(&a, &b, shrink), overlap_depth(&b, &a, shrink));
        prop_assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn overlap_ignores_common_translation(a in square(), b in square(), dx in -1e3..1e3f64, dy in -1e3..1e3f64) {
        let t = Point::new(dx, dy);
        let (ta, tb) = (PlacedSquare::new(a.center + t, a.angle()), PlacedSquare::new(b.center + t, b.angle()));
        let d = overlap_depth(&a, &b, 0.0);
        let dt = overlap_depth(&ta, &tb, 0.0);
        prop_assert!((d - dt).abs() < 1e-9);
        if d.abs() > 1e-9 {
            prop_assert_eq!(squares_overlap(&a, &b, 0.0), squares_overlap(&ta, &tb, 0.0));
        }
    }

    #[test]
    fn block_rectangle_area_is_exact(x in -1e4..1e4f64, y in -1e4..1e4f64, cols in 1u64..5000, rows in 1u64..5000) {
        let b = GridBlock::new(Point::new(x.round(), y.round()), cols, rows).unwrap();
        prop_assert_eq!(polygon_area(b.rect().vertices()).unwrap(), (cols * rows) as f64);
        prop_assert_eq!(b.count(), cols * rows);
    }

    #[test]
    fn canonical_angle_is_a_quarter_turn_away(a in -20.0..20.0f64) {
        let c = canonical_angle(a);
        prop_assert!((-std::f64::consts::FRAC_PI_4..std::f64::consts::FRAC_PI_4).contains(&c));
        let turns = (a - c) / std::f64::consts::FRAC_PI_2;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
        prop_assert_eq!(canonical_angle(c), c);
    }

    #[test]
    fn motions_preserve_area(turns in 0u8..4, mirror: bool, dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
        let r = Region::new(vec![Point::new(0.0, 0.0), Point::new(7.0, 0.0), Point::new(5.5, 3.0), Point::new(0.0, 4.0)]).unwrap();
        let moved = GridMotion::new(mirror, turns, Point::new(dx, dy)).apply_region(&r);
        prop_assert!((moved.area() - r.area()).abs() < 1e-9);
    }
}

fn inside(s: &PlacedSquare, p: Point) -> bool {
    let (u, v) = s.axes();
    let d = p - s.center;
    d.dot(u).abs() < 0.5 && d.dot(v).abs() < 0.5
}

/// Scans the intersection of the two bounding boxes on a fine lattice.
fn raster_overlap(a: &PlacedSquare, b: &PlacedSquare, step: f64) -> bool {
    let x0 = (a.center.x - 0.75).max(b.center.x - 0.75);
    let x1 = (a.center.x + 0.75).min(b.center.x + 0.75);
    let y0 = (a.center.y - 0.75).max(b.center.y - 0.75);
    let y1 = (a.center.y + 0.75).min(b.center.y + 0.75);
    let mut y = y0;
    while y <= y1 {
        let mut x = x0;
        while x <= x1 {
            let p = Point::new(x, y);
            if inside(a, p) && inside(b, p) {
                return true;
            }
            x += step;
        }
        y += step;
    }
    false
}

#[test]
fn separating_axes_agree_with_raster() {
    let mut rng = seeded_rng();
    let mut compared = 0;
    for _ in 0..1000 {
        let a = PlacedSquare::new(Point::new(0.0, 0.0), rng.gen_range(-0.8..0.8));
        let gap = rng.gen_range(0.8..1.6);
        let dir = rng.gen_range(0.0..std::f64::consts::TAU);
        let b = PlacedSquare::new(Point::polar(dir) * gap, rng.gen_range(-0.8..0.8));
        let depth = overlap_depth(&a, &b, 0.0);
        if depth.abs() < 2e-3 {
            continue;
        }
        compared += 1;
        assert_eq!(
            squares_overlap(&a, &b, 0.0),
            raster_overlap(&a, &b, 1e-3),
            "{a:?} {b:?} depth {depth}"
        );
    }
    assert!(compared > 900);
}

fn seeded_rng() -> StdRng {
    StdRng::seed_from_u64(0x5eed)
}
