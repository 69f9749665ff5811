use proptest::prelude::*;

use pucci_core::analysis::{comparison_verify, ComparisonMode};
use pucci_core::degeneracy::DegeneracyLaw;
use pucci_core::geometry::{BoundaryData, Domain};
use pucci_core::operators::{EllipticityPair, OperatorSpec};
use pucci_core::scheme::{Discretization, Problem, SchemeParams, Stencil};
use pucci_core::solver::{
    build_subsolution, build_supersolution, solve_dirichlet, Relaxation, Relaxer, SolveConfig, Start,
};
use pucci_core::Field;

fn pucci_problem(law: DegeneracyLaw, f: Field, g: Field) -> Problem {
    let e = EllipticityPair::new(0.5, 1.5).unwrap();
    Problem {
        domain: Domain::ball([0.0, 0.0], 1.0).unwrap(),
        operator: OperatorSpec::pucci_plus(e),
        law,
        f,
        boundary: BoundaryData::new(g, 0.5).unwrap(),
    }
}

fn quick() -> SolveConfig {
    SolveConfig {
        epsilons: vec![1e-1, 1e-2, 1e-3],
        ..SolveConfig::default()
    }
}

fn solve(p: Problem, h: f64) -> pucci_core::solver::Solution {
    let disc = Discretization::new(p, h, Stencil::lattice(2).unwrap()).unwrap();
    solve_dirichlet(disc, &quick()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Larger forcing and smaller boundary data give a smaller solution.
    #[test]
    fn solutions_are_ordered_by_the_data(
        f0 in -2.0f64..2.0, df in 0.0f64..2.0, a in -1.0f64..1.0, dg in 0.0f64..0.5, p in 0.0f64..1.5
    ) {
        let law = DegeneracyLaw::power(p).unwrap();
        let big_f = solve(
            pucci_problem(law.clone(), Field::constant(f0 + df), Field::from_fn(move |x| a * x[0])),
            0.125,
        );
        let small_f = solve(
            pucci_problem(law, Field::constant(f0), Field::from_fn(move |x| a * x[0] + dg)),
            0.125,
        );
        let tol = 1e-5;
        for &n in big_f.disc.grid.interior() {
            prop_assert!(big_f.u.values[n] <= small_f.u.values[n] + tol);
        }
    }
}

#[test]
fn solution_lies_between_the_barriers() {
    let sol = solve(
        pucci_problem(
            DegeneracyLaw::power(1.0).unwrap(),
            Field::from_fn(|x| 1.0 + x[0]),
            Field::from_fn(|x| x[0] * x[1]),
        ),
        1.0 / 16.0,
    );
    let (lo, hi) = (sol.lower.as_ref().unwrap(), sol.upper.as_ref().unwrap());
    for &n in sol.disc.grid.interior() {
        assert!(lo.values.values[n] <= sol.u.values[n] + 1e-12);
        assert!(sol.u.values[n] <= hi.values.values[n] + 1e-12);
    }
}

#[test]
fn negated_problem_gives_negated_solution() {
    let p = pucci_problem(
        DegeneracyLaw::power(0.5).unwrap(),
        Field::from_fn(|x| 2.0 - x[1]),
        Field::from_fn(|x| x[0] * x[0] - 0.3 * x[1]),
    );
    let u = solve(p.clone(), 1.0 / 16.0);
    let v = solve(p.negated(), 1.0 / 16.0);
    for &n in u.disc.grid.interior() {
        assert!((u.u.values[n] + v.u.values[n]).abs() < 1e-5, "{} vs {}", u.u.values[n], v.u.values[n]);
    }
}

#[test]
fn explicit_iteration_descends_from_the_supersolution() {
    let p = pucci_problem(DegeneracyLaw::power(1.0).unwrap(), Field::constant(1.0), Field::constant(0.0));
    let disc = Discretization::new(p, 0.125, Stencil::lattice(1).unwrap()).unwrap();
    let cfg = SolveConfig {
        relaxation: Relaxation::Jacobi,
        ..SolveConfig::default()
    };
    let etas = [1e-6 * disc.h()];
    let upper = build_supersolution(&disc, None, &etas).unwrap();
    let params = SchemeParams::new(etas[0], 0.1).unwrap();
    let mut rx = Relaxer::new(&disc, params, &upper.values, None, &cfg);
    let mut prev = rx.values().to_vec();
    for _ in 0..300 {
        rx.sweep();
        for &n in disc.grid.interior() {
            assert!(rx.values()[n] <= prev[n] + 1e-13);
        }
        prev.copy_from_slice(rx.values());
    }
}

#[test]
fn stage_differences_shrink_with_epsilon() {
    let sol = solve(
        pucci_problem(DegeneracyLaw::power(0.0).unwrap(), Field::constant(1.0), Field::constant(0.5)),
        1.0 / 16.0,
    );
    let deltas: Vec<f64> = sol.report.stages.iter().filter_map(|s| s.delta).collect();
    assert_eq!(deltas.len(), 2);
    // u_ε − u_0 = O(ε): consecutive differences fall roughly tenfold.
    assert!(deltas[1] < 0.3 * deltas[0], "{deltas:?}");
    assert!(sol.report.stages.iter().all(|s| s.residual <= sol.report.tolerance));
}

#[test]
fn solution_is_compared_below_its_supersolution() {
    let sol = solve(
        pucci_problem(DegeneracyLaw::power(1.0).unwrap(), Field::constant(-1.0), Field::constant(0.0)),
        0.125,
    );
    let etas = [1e-6 * sol.disc.h()];
    let w = build_supersolution(&sol.disc, None, &etas).unwrap();
    let v = build_subsolution(&sol.disc, None, &etas).unwrap();
    let params = SchemeParams::new(etas[0], 1e-3).unwrap();
    let slack = 1e-8 * 2.0;
    let upper = comparison_verify(&sol.u, &w.values, &sol.disc, &params, ComparisonMode::EpsilonProper { slack });
    assert!(upper.passed, "{upper:?}");
    let lower = comparison_verify(&v.values, &sol.u, &sol.disc, &params, ComparisonMode::EpsilonProper { slack });
    assert!(lower.passed, "{lower:?}");
    let swapped = comparison_verify(&w.values, &v.values, &sol.disc, &params, ComparisonMode::EpsilonProper { slack });
    assert!(!swapped.passed);
}

#[test]
fn starting_side_does_not_change_the_answer() {
    let p = pucci_problem(DegeneracyLaw::power(1.0).unwrap(), Field::constant(1.0), Field::from_fn(|x| x[0]));
    let disc = Discretization::new(p, 0.125, Stencil::lattice(1).unwrap()).unwrap();
    let below = solve_dirichlet(disc.clone(), &quick()).unwrap();
    let above = solve_dirichlet(disc, &SolveConfig { start: Start::Above, ..quick() }).unwrap();
    let diff = below.u.max_diff_on(&above.u, below.disc.grid.interior());
    assert!(diff < 1e-5, "{diff}");
}
