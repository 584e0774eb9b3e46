use proptest::prelude::*;
use sqpack::square::{
    pack_square, plan_decomposition, PieceKind, DEFAULT_BETA, DEFAULT_EPSILON, DEFAULT_NU,
};
use sqpack::trapezoid::{pack_right_trapezoid, TrapezoidSpec};
use sqpack::Region;

fn shared_area(a: &Region, b: &Region) -> f64 {
    let mut clipped = Some(a.clone());
    for h in b.half_planes() {
        clipped = clipped.and_then(|r| r.clip(&h));
    }
    clipped.map_or(0.0, |r| r.area())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trapezoids_verify_and_account(height in 32.0..400.0f64, base in 2.0..60.0f64, slope in 0.01..0.3f64) {
        let spec = TrapezoidSpec::new(height, base, slope, None, None).unwrap();
        let p = pack_right_trapezoid(&spec).unwrap();
        prop_assert!(p.stats.verified);
        let sum: f64 = p.stats.per_tag_waste.values().sum();
        prop_assert!((sum - p.stats.waste).abs() <= 1e-6 * p.stats.waste.max(1.0));
        prop_assert!(p.stats.waste >= 0.0 && p.stats.waste < p.stats.region_area);
    }
}

#[test]
fn decomposition_tiles_the_square() {
    for x in [64.5, 300.25, 1024.5, 5000.75] {
        let m = sqpack::square::choose_m(x, DEFAULT_BETA, DEFAULT_EPSILON);
        let plan = plan_decomposition(x, m, DEFAULT_NU).unwrap();
        assert!((plan.total_area() - x * x).abs() <= 1e-6 * x * x, "x = {x}");
        let pieces = &plan.decomposition;
        for (i, a) in pieces.iter().enumerate() {
            for b in &pieces[i + 1..] {
                let shared = shared_area(&a.region, &b.region);
                assert!(
                    shared < 1e-6,
                    "{} and {} share {shared} at x = {x}",
                    a.name,
                    b.name
                );
            }
        }
        for piece in pieces {
            if let PieceKind::Trapezoid {
                height,
                small_base,
                slope,
                ..
            } = piece.kind
            {
                let large_base = 2.0 * piece.region.area() / height - small_base;
                let sqrt_m = (m as f64).sqrt();
                let lean = large_base - small_base;
                assert!((lean - height * slope.tan()).abs() < 1e-9);
                assert!(
                    lean > 0.5 * sqrt_m && lean < 2.0 * sqrt_m,
                    "lean {lean}, m {m}"
                );
            }
        }
    }
}

#[test]
fn square_waste_is_the_sum_over_pieces() {
    let p = pack_square(700.5, DEFAULT_BETA, DEFAULT_EPSILON, DEFAULT_NU).unwrap();
    assert!(p.stats.verified);
    let sum: f64 = p.stats.per_tag_waste.values().sum();
    assert!((sum - p.stats.waste).abs() <= 1e-9 * p.stats.waste);
    for piece in &p.plan.decomposition {
        assert!(
            p.stats.per_tag_waste.contains_key(&piece.name)
                || p.stats.per_tag_waste.contains_key("fallback")
        );
    }
}

#[test]
fn square_examples() {
    let small = pack_square(20.5, 0.75, 0.0, 0.75).unwrap();
    assert!(small.stats.waste <= 20.25 + 1e-12);
    assert_eq!(
        pack_square(100.0, 0.75, 0.0, 0.75).unwrap().stats.waste,
        0.0
    );
    let x = 2048.5;
    let big = pack_square(x, DEFAULT_BETA, DEFAULT_EPSILON, DEFAULT_NU).unwrap();
    assert!(big.stats.verified);
    assert!(big.stats.waste < 0.5 * x, "waste {}", big.stats.waste);
}

#[test]
fn square_rejects_bad_exponents() {
    assert!(pack_square(300.5, 1.2, 0.0, 0.75).is_err());
    assert!(pack_square(300.5, 0.75, 0.0, 0.0).is_err());
    assert!(pack_square(-3.0, 0.75, 0.0, 0.75).is_err());
}
