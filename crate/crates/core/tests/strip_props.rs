use proptest::prelude::*;
use sqpack::strip::{pack_naive_region, pack_parallel_strip, solve_tilt, StripSpec};
use sqpack::verifier::{DEFAULT_SHRINK, DEFAULT_SLACK};
use sqpack::{measure_waste, Point, Region};

proptest! {
    #[test]
    fn tilt_residual_vanishes(stack in 2u64..100_000, frac in 0.0..1.999f64) {
        let span = stack as f64 - frac;
        prop_assume!(span >= 2.0);
        let t = solve_tilt(stack, span).unwrap();
        let residual = stack as f64 * t.alpha.cos() + t.alpha.sin() - span;
        prop_assert!(residual.abs() <= 1e-12 * span.max(1.0), "residual {residual}");
        prop_assert!((t.stack_footprint_width - 1.0 / t.alpha.cos()).abs() < 1e-15);
    }

    #[test]
    fn naive_waste_is_bounded_by_perimeter(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 4),
        diameter in 5.0..200.0f64,
    ) {
        // A convex quadrilateral with one vertex in each quadrant of a disk.
        let verts: Vec<Point> = pts
            .iter()
            .enumerate()
            .map(|(k, &(r, a))| {
                let angle = (k as f64 + 0.1 + 0.8 * a) * std::f64::consts::FRAC_PI_2;
                Point::polar(angle) * (diameter / 2.0 * (0.6 + 0.4 * r))
            })
            .collect();
        let Ok(region) = Region::from_loose(verts) else { return Ok(()) };
        let mut layout = pack_naive_region(&region);
        prop_assert!(layout.verify(DEFAULT_SHRINK, DEFAULT_SLACK).unwrap().is_empty());
        let stats = measure_waste(&layout).unwrap();
        prop_assert!(stats.waste <= 4.0 * (region.perimeter() + 1.0), "{} vs {}", stats.waste, region.perimeter());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn strips_verify(span in 2.0..300.0f64, extra in 0.0..1.0f64, length in 5.0..120.0f64) {
        let stack = (span + extra).ceil().max(span.floor() + 1.0) as u64;
        prop_assume!(stack as f64 - span <= 2.0);
        let spec = StripSpec::new(span, length, stack).unwrap();
        let rect = spec.rectangle().unwrap();
        let mut layout = pack_parallel_strip(&spec, &rect).unwrap();
        prop_assert!(layout.verify(DEFAULT_SHRINK, DEFAULT_SLACK).unwrap().is_empty());
        prop_assert_eq!(layout.square_count() % stack, 0);
    }
}
