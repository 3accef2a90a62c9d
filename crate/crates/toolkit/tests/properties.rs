//! Property-based invariants for measures, potentials, and the radial solver.

use proptest::prelude::*;

use wolff_toolkit::measure::{Measure, RadialMeasure, Tail};
use wolff_toolkit::potentials::{log_mesh, wolff_at_radius};
use wolff_toolkit::radial::solve_entire_radial;
use wolff_toolkit::verify::weak_lorentz_norm_weighted;

/// Random compactly supported radial measure in n = 3.
fn compact_measure() -> impl Strategy<Value = RadialMeasure> {
    (
        proptest::collection::vec((0.05f64..1.0, 0.0f64..2.0), 1..4),
        0.01f64..0.5,
    )
        .prop_map(|(incr, r0)| {
            let mut r = r0;
            let mut m = 0.0;
            let mut knots = Vec::new();
            for (dr, dm) in incr {
                r += dr;
                m += dm;
                knots.push((r, m));
            }
            let a = knots.last().unwrap().1;
            RadialMeasure::new(knots, Tail { a, b: 0.0, c: 0.0 }, 3).unwrap()
        })
}

proptest! {
    #[test]
    fn ball_mass_is_monotone_and_bounded(m in compact_measure(), radii in proptest::collection::vec(1e-3f64..10.0, 2..20)) {
        let mut radii = radii;
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev = 0.0;
        for r in radii {
            let mass = m.mass(r);
            prop_assert!(mass >= prev);
            prop_assert!(mass <= m.mass(1e12) + 1e-12);
            prev = mass;
        }
    }

    #[test]
    fn scaling_is_exact(m in compact_measure(), lam in 1e-3f64..1e3, r in 1e-3f64..5.0) {
        let ml = m.scaled(lam).unwrap();
        let (a, b) = (ml.mass(r), lam * m.mass(r));
        prop_assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn restriction_is_idempotent_and_dominated(m in compact_measure(), radius in 0.2f64..3.0, r in 1e-3f64..5.0) {
        let once = m.restrict_to_ball(radius).unwrap();
        let twice = once.restrict_to_ball(radius).unwrap();
        prop_assert!((once.mass(r) - twice.mass(r)).abs() <= 1e-15 * once.mass(r).max(1e-300));
        prop_assert!(once.mass(r) <= m.mass(r) + 1e-15 * m.mass(r));
        // Restriction caps the total mass at the ball mass.
        prop_assert!((once.mass(1e9) - m.mass(radius)).abs() <= 1e-12 * m.mass(radius).max(1e-300));
    }

    #[test]
    fn wolff_homogeneity(m in compact_measure(), lam in 0.05f64..20.0, p in 1.5f64..2.5, r in 0.0f64..2.0) {
        let w = wolff_at_radius(&m, p, 3, r).unwrap();
        let wl = wolff_at_radius(&m.scaled(lam).unwrap(), p, 3, r).unwrap();
        let factor = lam.powf(1.0 / (p - 1.0));
        prop_assert!((wl - factor * w).abs() <= 1e-12 * (factor * w).max(1e-300));
    }

    #[test]
    fn measure_enum_matches_radial(m in compact_measure(), r in 1e-3f64..5.0) {
        let e = Measure::Radial(m.clone());
        prop_assert_eq!(e.ball_mass(r).unwrap(), m.mass(r));
    }

    #[test]
    fn weak_norm_is_monotone(samples in proptest::collection::vec((0.0f64..10.0, 1e-6f64..1.0), 1..30), c in 1.0f64..5.0, gamma in 1.1f64..4.0) {
        let scaled: Vec<(f64, f64)> = samples.iter().map(|(g, v)| (c * g, *v)).collect();
        let base = weak_lorentz_norm_weighted(&samples, gamma).unwrap();
        let up = weak_lorentz_norm_weighted(&scaled, gamma).unwrap();
        // Positive homogeneity, hence monotonicity under pointwise domination.
        prop_assert!((up - c * base).abs() <= 1e-12 * (c * base).max(1e-300));
    }
}

proptest! {
    // Solver-backed properties are costlier; fewer cases.
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparison_principle_radial(sigma in compact_measure(), extra in compact_measure(), p in 1.5f64..2.5) {
        let bigger = sigma.add(&extra).unwrap();
        let mesh = log_mesh(1e-2, 1e2, 31);
        let u = solve_entire_radial(&sigma, p, 3, &mesh).unwrap();
        let v = solve_entire_radial(&bigger, p, 3, &mesh).unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            prop_assert!(a <= b, "comparison violated: {a} > {b}");
        }
    }

    #[test]
    fn solver_homogeneity(sigma in compact_measure(), lam in 0.1f64..10.0, p in 1.5f64..2.5) {
        let mesh = log_mesh(1e-2, 1e2, 31);
        let u = solve_entire_radial(&sigma, p, 3, &mesh).unwrap();
        let ul = solve_entire_radial(&sigma.scaled(lam).unwrap(), p, 3, &mesh).unwrap();
        let factor = lam.powf(1.0 / (p - 1.0));
        for (a, b) in ul.values().iter().zip(u.values()) {
            prop_assert!((a - factor * b).abs() <= 1e-12 * (factor * b).max(1e-300));
        }
    }
}
