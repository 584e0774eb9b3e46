#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sqpack::geometry::GridBlock;
use sqpack::quad_primitive::{build_quad_packing, derive_params};
use sqpack::square::pack_square;
use sqpack::strip::{
    pack_naive_region, pack_parallel_strip, solve_tilt, stack_parallelogram, StripSpec,
};
use sqpack::trapezoid::{pack_right_trapezoid, TrapezoidSpec};
use sqpack::{Layout, PlacedSquare, Point, Region};

/// Scattered squares and blocks, dense enough to produce overlaps and
/// containment failures.
pub fn random_layout(seed: u64, squares: usize, blocks: usize) -> Layout {
    let mut rng = StdRng::seed_from_u64(seed);
    let side = (squares as f64).sqrt() * 1.3 + 4.0;
    let region = Region::new(vec![
        Point::new(0.0, 0.0),
        Point::new(side, 0.0),
        Point::new(side * 1.1, side),
        Point::new(-0.1 * side, side * 0.9),
    ])
    .unwrap();
    let mut layout = Layout::new(region);
    for _ in 0..squares {
        let c = Point::new(
            rng.gen_range(-0.5..side + 0.5),
            rng.gen_range(-0.5..side + 0.5),
        );
        let angle = if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(-0.8..0.8)
        };
        layout.push_square(PlacedSquare::new(c, angle), "random");
    }
    for _ in 0..blocks {
        let o = Point::new(
            rng.gen_range(0.0..side).floor(),
            rng.gen_range(0.0..side).floor(),
        );
        let b = GridBlock::new(o, rng.gen_range(1..6), rng.gen_range(1..4)).unwrap();
        layout.push_block(b, "random");
    }
    layout.add_tag_area("random", layout.region().area());
    layout
}

/// Valid layouts from each construction, each with at most 5000 placed
/// squares, plus random ones.
pub fn corpus() -> Vec<(String, Layout)> {
    let mut out = Vec::new();
    for m in [10u64, 30, 60] {
        let p = build_quad_packing(&derive_params(m, 0.2, 0.03).unwrap()).unwrap();
        out.push((format!("quad m={m}"), p.layout));
    }
    for span in [10.5f64, 42.25] {
        let stack = span.floor() as u64 + 1;
        let alpha = solve_tilt(stack, span).unwrap().alpha;
        let region = stack_parallelogram(Point::default(), span, alpha, 20).unwrap();
        let spec = StripSpec::new(span, 20.0 / alpha.cos(), stack).unwrap();
        out.push((
            format!("strip span={span}"),
            pack_parallel_strip(&spec, &region).unwrap(),
        ));
    }
    let quad = Region::new(vec![
        Point::new(0.0, 0.0),
        Point::new(31.3, 2.0),
        Point::new(28.0, 22.7),
        Point::new(3.1, 18.0),
    ])
    .unwrap();
    out.push(("naive quadrilateral".into(), pack_naive_region(&quad)));
    let spec = TrapezoidSpec::new(60.0, 12.0, 0.12, None, None).unwrap();
    out.push((
        "trapezoid h=60".into(),
        pack_right_trapezoid(&spec).unwrap().layout,
    ));
    for x in [40.5, 70.5] {
        out.push((
            format!("square x={x}"),
            pack_square(x, 0.75, 1.0, 0.75).unwrap().layout,
        ));
    }
    for (seed, n, b) in [(1u64, 200usize, 5usize), (2, 1500, 20), (3, 5000, 40)] {
        out.push((format!("random seed={seed}"), random_layout(seed, n, b)));
    }
    for (name, l) in &out {
        assert!(
            l.squares().len() <= 5000,
            "{name} has {} squares",
            l.squares().len()
        );
    }
    out
}
