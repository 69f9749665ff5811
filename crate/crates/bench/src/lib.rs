//! Shared fixtures for the benchmarks.

use pucci_core::degeneracy::DegeneracyLaw;
use pucci_core::geometry::{BoundaryData, Domain};
use pucci_core::operators::{EllipticityPair, OperatorSpec};
use pucci_core::scheme::{Discretization, Problem, Stencil};
use pucci_core::Field;

/// `Φ = |Du|^p`, `P⁺` with `(λ, Λ) = (1/2, 2)` on the unit disc.
pub fn pucci_disc(p: f64, h: f64, width: usize) -> Discretization {
    let problem = Problem {
        domain: Domain::ball([0.0, 0.0], 1.0).unwrap(),
        operator: OperatorSpec::pucci_plus(EllipticityPair::new(0.5, 2.0).unwrap()),
        law: DegeneracyLaw::power(p).unwrap(),
        f: Field::constant(1.0),
        boundary: BoundaryData::new(Field::from_fn(|x| x[0] * x[1]), 0.5).unwrap(),
    };
    Discretization::new(problem, h, Stencil::lattice(width).unwrap()).unwrap()
}
