use proptest::prelude::*;

use pucci_core::analysis::{
    alpha_admissible, barrier_w, contact_mask_brute_force, modulus_omega, upper_contact_set, BarrierW,
};
use pucci_core::degeneracy::{check_a2, DegeneracyLaw};
use pucci_core::geometry::{build_grid, Domain, GridFunction};
use pucci_core::operators::{pucci_minus, pucci_plus, EllipticityPair, SymMatrix};
use pucci_core::scheme::{monotonicity_check, SchemeParams};
use pucci_core::{operators::OperatorSpec, Field, Point};

fn sym(a: f64, b: f64, c: f64) -> SymMatrix {
    SymMatrix::from_rows(2, &[a, b, b, c]).unwrap()
}

fn pair() -> impl Strategy<Value = EllipticityPair> {
    (0.1f64..2.0, 1.0f64..4.0).prop_map(|(l, k)| EllipticityPair::new(l, l * k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pucci_extremes_mirror_and_bracket(
        a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, e in pair()
    ) {
        let m = sym(a, b, c);
        let plus = pucci_plus(&m, e).unwrap();
        let minus = pucci_minus(&m, e).unwrap();
        prop_assert!((pucci_plus(&m.scale(-1.0), e).unwrap() + minus).abs() < 1e-10);
        prop_assert!(minus <= plus + 1e-12);
        // Every admissible linear operator lies between them.
        let tr = m.trace();
        prop_assert!(e.lambda() * tr <= plus + 1e-10 || tr < 0.0);
        prop_assert!(minus - 1e-10 <= e.big_lambda() * tr || tr < 0.0);
    }

    #[test]
    fn pucci_plus_is_subadditive(
        a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0,
        d in -3.0f64..3.0, f in -3.0f64..3.0, g in -3.0f64..3.0, e in pair()
    ) {
        let (m, n) = (sym(a, b, c), sym(d, f, g));
        let lhs = pucci_plus(&m.add(&n), e).unwrap();
        prop_assert!(lhs <= pucci_plus(&m, e).unwrap() + pucci_plus(&n, e).unwrap() + 1e-10);
    }

    #[test]
    fn power_and_double_phase_laws_satisfy_a2(p in -0.9f64..3.0, dq in 0.0f64..2.0, a in 0.0f64..3.0) {
        let xs: Vec<Point> = vec![[0.0, 0.0], [0.3, -0.2]];
        let power = DegeneracyLaw::power(p).unwrap();
        prop_assert!(check_a2(&power, &xs, 200, 1).unwrap().passed());
        if p >= 0.0 {
            let dp = DegeneracyLaw::double_phase(p, p + dq, Field::constant(a), &xs).unwrap();
            prop_assert!(check_a2(&dp, &xs, 200, 2).unwrap().passed());
        }
    }

    #[test]
    fn admissible_exponent_monotone_in_s_and_i(i in -0.9f64..0.0, s1 in 0.0f64..2.0, ds in 0.0f64..2.0, di in 0.0f64..0.5) {
        let law = |i: f64, s: f64| {
            DegeneracyLaw::declared(pucci_core::degeneracy::LawKind::Power { p: i }, i, s.max(i), 1.0, 1.0, 1.0).unwrap()
        };
        let lo = alpha_admissible(&law(i, s1), 0.9, Some(0.9)).unwrap().alpha_max;
        let hi_s = alpha_admissible(&law(i, s1 + ds), 0.9, Some(0.9)).unwrap().alpha_max;
        prop_assert!(hi_s <= lo + 1e-15);
        let i2 = (i + di).min(-1e-9);
        let hi_i = alpha_admissible(&law(i2, s1), 0.9, Some(0.9)).unwrap().alpha_max;
        prop_assert!(hi_i >= lo - 1e-15);
        prop_assert!(lo > 0.0 && lo < 1.0);
    }

    #[test]
    fn barrier_gradient_matches_finite_differences(
        rho in 0.6f64..0.995, th in -0.5f64..0.5, gamma in 0.1f64..0.9, delta in 0.01f64..0.3
    ) {
        let dom = Domain::ball([0.0, 0.0], 1.0).unwrap();
        let e = EllipticityPair::new(1.0, 2.0).unwrap();
        let w = BarrierW::new(&dom, e, delta, gamma, 0.3, [1.0, 0.0]).unwrap();
        let y = [rho * th.cos(), rho * th.sin()];
        let b = w.at(y).unwrap();
        let s = 1e-7;
        for k in 0..2 {
            let (mut yp, mut ym) = (y, y);
            yp[k] += s;
            ym[k] -= s;
            let fd = (w.at(yp).unwrap().value - w.at(ym).unwrap().value) / (2.0 * s);
            prop_assert!((fd - b.gradient[k]).abs() <= 1e-6 * (1.0 + b.gradient[k].abs()));
        }
        let once = barrier_w(&dom, e, delta, gamma, 0.3, [1.0, 0.0], y).unwrap();
        prop_assert_eq!(once, b);
    }

    #[test]
    fn modulus_is_concave_increasing_and_capped(omega0 in 0.1f64..5.0, t in 0.0f64..1.0, u in 0.0f64..1.0) {
        let s0 = (2.0 / (3.0 * omega0)).powi(2);
        let (a, b) = (t * 1.5 * s0, u * 1.5 * s0);
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(modulus_omega(lo, omega0) <= modulus_omega(hi, omega0) + 1e-15);
        let mid = 0.5 * (lo + hi);
        prop_assert!(modulus_omega(mid, omega0) + 1e-12 >= 0.5 * (modulus_omega(lo, omega0) + modulus_omega(hi, omega0)));
        prop_assert!(modulus_omega(hi, omega0) <= modulus_omega(s0, omega0) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn contact_set_equals_brute_force(coef in prop::collection::vec(-1.0f64..1.0, 6), noise in 0.0f64..0.05, seed in 0u64..1000) {
        let dom = Domain::ellipse([0.1, 0.0], 1.0, 0.7).unwrap();
        let grid = build_grid(&dom, 1.0 / 12.0, 1).unwrap();
        let hash = |x: Point| {
            let v = ((x[0] * 7919.0 + x[1] * 104729.0 + seed as f64).sin() * 43758.5453).fract();
            noise * v
        };
        let u = GridFunction::from_fn(&grid, |x| {
            coef[0] * (2.0 * x[0]).sin() + coef[1] * x[1] * x[1] + coef[2] * x[0] * x[1]
                + coef[3] * (x[0] - x[1]).abs() + coef[4] * x[0].powi(3) + coef[5] + hash(x)
        });
        let set = upper_contact_set(&u, &grid, None);
        let pts: Vec<Point> = grid.points().collect();
        let brute = contact_mask_brute_force(&pts, &u.values, set.tolerance);
        for (k, &a) in set.nodes.iter().enumerate() {
            prop_assert_eq!(set.mask[k], brute[a]);
        }
        // Every flagged slope supports u at all nodes.
        for (a, p) in set.members() {
            let x = grid.point(a);
            for b in 0..grid.len() {
                let y = grid.point(b);
                let plane = u.values[a] + p[0] * (y[0] - x[0]) + p[1] * (y[1] - x[1]);
                prop_assert!(u.values[b] <= plane + 2.0 * set.tolerance);
            }
        }
    }
}

#[test]
fn scheme_is_monotone_for_representative_laws() {
    let e = EllipticityPair::new(0.5, 2.0).unwrap();
    let ops = [OperatorSpec::laplacian(2), OperatorSpec::pucci_plus(e), OperatorSpec::pucci_minus(e)];
    let laws = [
        DegeneracyLaw::power(-0.5).unwrap(),
        DegeneracyLaw::power(0.0).unwrap(),
        DegeneracyLaw::power(2.0).unwrap(),
    ];
    let params = SchemeParams::new(1e-6, 1e-3).unwrap();
    for op in &ops {
        for law in &laws {
            let r = monotonicity_check(law, op, &params, 300, 11).unwrap();
            assert_eq!(r.violations, 0, "{op:?} {law:?}: {r:?}");
        }
    }
}
