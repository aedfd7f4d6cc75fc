mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tractvar_core::kinematics::{compute_frame, tongue_body_tvs, tongue_tip_tvs};

const TOL: f64 = 1e-3;

#[test]
fn constriction_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..200 {
        let pts = random_trace(&mut rng);
        let trace = to_trace(&pts);
        let frame = random_frame(&mut rng, &pts);
        let (tbcd, tbcl) = tongue_body_tvs(&frame, &trace).unwrap();
        let (ttcd, ttcl) = tongue_tip_tvs(&frame, &trace).unwrap();
        let (od, ol) = oracle_tongue_body(&frame, &pts);
        let (otd, otl) = oracle_tongue_tip(&frame, &pts);
        worst = (
            worst.0.max((tbcd - od).abs()),
            worst.1.max((tbcl - ol).abs()),
            worst.2.max((ttcd - otd).abs()),
        );
        assert!((tbcd - od).abs() <= TOL, "case {case}: TBCD {tbcd} vs {od}");
        assert!((tbcl - ol).abs() <= TOL, "case {case}: TBCL {tbcl} vs {ol}");
        assert!(
            (ttcd - otd).abs() <= TOL,
            "case {case}: TTCD {ttcd} vs {otd}"
        );
        assert_eq!(ttcl, otl);
    }
    eprintln!(
        "worst |dTBCD| {:.2e}  |dTBCL| {:.2e}  |dTTCD| {:.2e}",
        worst.0, worst.1, worst.2
    );
}

#[test]
fn translation_shifts_locations_and_keeps_degrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let pts = random_trace(&mut rng);
        let trace = to_trace(&pts);
        let frame = random_frame(&mut rng, &pts);
        let (dx, dy) = (3.25, -1.5);
        let a = compute_frame(&frame, &trace).unwrap();
        let b = compute_frame(&frame.translate(dx, dy), &trace.translate(dx, dy)).unwrap();
        for (x, y) in [(a.la, b.la), (a.ttcd, b.ttcd), (a.tbcd, b.tbcd)] {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        assert!((a.lp + dx - b.lp).abs() < 1e-9);
        assert!((a.ttcl + dx - b.ttcl).abs() < 1e-9);
        assert!(
            (a.tbcl + dx - b.tbcl).abs() < 1e-6,
            "{} vs {}",
            a.tbcl + dx,
            b.tbcl
        );
    }
}

#[test]
fn tangent_arc_has_zero_degree() {
    // Circle of radius 20 centred 20 mm below a flat trace touches it at x=-30.
    let pts = vec![(0.0, 10.0), (-80.0, 10.0)];
    let trace = to_trace(&pts);
    let on = |deg: f64| {
        let a = deg.to_radians();
        tractvar_core::kinematics::Point::new(-30.0 + 20.0 * a.cos(), -10.0 + 20.0 * a.sin())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut frame = random_frame(&mut rng, &pts);
    frame.t2 = on(40.0);
    frame.t3 = on(95.0);
    frame.t4 = on(150.0);
    let (d, x) = tongue_body_tvs(&frame, &trace).unwrap();
    assert!(d.abs() < 1e-9, "{d}");
    assert!((x + 30.0).abs() < 1e-4, "{x}");
}
