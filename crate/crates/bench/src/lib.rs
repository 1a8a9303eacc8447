//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use mfeit_core::forward::{coordinate_currents, DomainOperators, ForwardSolver};
use mfeit_core::pipeline::{benchmark_target, TargetKind};
use mfeit_core::shape::{CauchyData, CauchyPair};
use mfeit_core::{EllipseDomain, Point2, StarShape};

/// Default body with the ellipse benchmark target, `n` nodes on each curve.
pub fn ellipse_solver(n: usize) -> ForwardSolver {
    let omega = EllipseDomain::new(4.0, 3.0).curve(n, 0.0).unwrap();
    let d = benchmark_target(TargetKind::Ellipse).unwrap().curve(n).unwrap();
    ForwardSolver::from_curves(&omega, &d).unwrap()
}

/// Exact Cauchy data of the ellipse target and the default initial disk.
pub fn shape_problem(n: usize, order: usize) -> (CauchyData, StarShape) {
    let solver = ellipse_solver(n);
    let omega = solver.domain().clone();
    let pairs = coordinate_currents(&omega)
        .into_iter()
        .map(|f| CauchyPair { u_meas: solver.solve_perfect_conductor(&f).unwrap().trace, f })
        .collect();
    let cauchy = CauchyData::new(Arc::new(DomainOperators::new(omega).unwrap()), pairs).unwrap();
    (cauchy, StarShape::disk(Point2::zeros(), 0.5, order))
}
