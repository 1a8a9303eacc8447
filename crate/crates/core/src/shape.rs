//! Recovery of the anomaly shape from perfect-conductor Cauchy data by
//! gradient descent on the star-shape parameters `(X₀, c₋N..c_N)`.
//!
//! The misfit is `J = ½ Σ_i ∫_{∂Ω} |u₀[D](f_i) − u_meas⁽ⁱ⁾|² ds`. Its derivative
//! along a normal boundary perturbation `h` is `Σ_i ∫_{∂Ω} (u − u_meas) u_h ds`
//! with `u_h` the linearized field, so one factorization per iterate serves
//! every current and all `2N+3` parameter directions.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{check_flux, DomainOperators, ForwardSolver};
use crate::geometry::{is_inside, shape_symmetric_difference, Curve, Point2, StarShape};

/// Neumann data and measured trace of one current on the `∂Ω` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyPair {
    pub f: Vec<f64>,
    pub u_meas: Vec<f64>,
}

/// Cauchy data `(f_i, u_meas⁽ⁱ⁾)` on a fixed discretization of `∂Ω`.
#[derive(Debug, Clone)]
pub struct CauchyData {
    domain: Arc<DomainOperators>,
    pairs: Vec<CauchyPair>,
}

impl CauchyData {
    /// Validates the fluxes and re-centers the measured traces.
    pub fn new(domain: Arc<DomainOperators>, pairs: Vec<CauchyPair>) -> Result<Self> {
        let curve = domain.curve();
        if pairs.is_empty() {
            return Err(Error::InvalidConfig("no Cauchy data".into()));
        }
        let pairs = pairs
            .into_iter()
            .map(|p| {
                check_flux(curve, &p.f)?;
                if p.u_meas.len() != curve.len() {
                    return Err(Error::DimensionMismatch {
                        expected: curve.len(),
                        got: p.u_meas.len(),
                    });
                }
                Ok(CauchyPair {
                    u_meas: curve.center_values(&p.u_meas),
                    f: p.f,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { domain, pairs })
    }

    pub fn domain(&self) -> &Curve {
        self.domain.curve()
    }

    pub fn domain_operators(&self) -> &Arc<DomainOperators> {
        &self.domain
    }

    pub fn pairs(&self) -> &[CauchyPair] {
        &self.pairs
    }

    /// Same data restricted to the given currents.
    pub fn select(&self, currents: &[usize]) -> Self {
        Self {
            domain: Arc::clone(&self.domain),
            pairs: currents.iter().map(|&i| self.pairs[i].clone()).collect(),
        }
    }
}

/// Shape parameters flattened as `[x₀, y₀, c₋N, …, c_N]`.
pub fn shape_params(shape: &StarShape) -> Vec<f64> {
    let mut p = vec![shape.center.x, shape.center.y];
    p.extend_from_slice(shape.coeffs());
    p
}

/// Inverse of [`shape_params`].
pub fn shape_from_params(params: &[f64]) -> Result<StarShape> {
    if params.len() < 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: params.len() });
    }
    StarShape::new(Point2::new(params[0], params[1]), params[2..].to_vec())
}

/// Normal velocities `h` on the anomaly nodes for each parameter of
/// [`shape_params`]: `⟨e_i, ν⟩` for the center and `f_n(θ)⟨(cos θ, sin θ), ν⟩`
/// for the coefficients.
pub fn perturbation_basis(shape: &StarShape, curve: &Curve) -> Vec<Vec<f64>> {
    let n = shape.order() as isize;
    let normals = curve.normals();
    let mut basis = vec![
        normals.iter().map(|v| v.x).collect(),
        normals.iter().map(|v| v.y).collect(),
    ];
    for k in -n..=n {
        basis.push(
            curve
                .params()
                .iter()
                .zip(normals)
                .map(|(&t, v)| StarShape::basis(k, t) * (t.cos() * v.x + t.sin() * v.y))
                .collect(),
        );
    }
    basis
}

/// Positive radius and distance at least `margin` from `∂Ω` at every node.
pub fn admissible(shape: &StarShape, domain: &Curve, margin: f64, n_nodes: usize) -> bool {
    // also between the nodes, at least as finely as the shape metrics sample
    if shape.min_radius((4 * n_nodes).max(4096)).0 <= 0.0 {
        return false;
    }
    match shape.curve(n_nodes) {
        Ok(curve) => is_inside(domain, &curve, margin),
        Err(_) => false,
    }
}

/// Forward solutions of every current on one candidate shape.
struct Evaluation {
    solver: ForwardSolver,
    j: f64,
    residuals: Vec<Vec<f64>>,
    fluxes: Vec<Vec<f64>>,
}

fn evaluate(shape: &StarShape, cauchy: &CauchyData, n_nodes: usize) -> Result<Evaluation> {
    let curve = shape.curve(n_nodes)?;
    let solver = ForwardSolver::new(Arc::clone(&cauchy.domain), curve)?;
    let fs: Vec<&[f64]> = cauchy.pairs.iter().map(|p| p.f.as_slice()).collect();
    let sols = solver.solve_perfect_conductor_many(&fs)?;
    let omega = cauchy.domain();
    let mut j = 0.0;
    let mut residuals = Vec::with_capacity(sols.len());
    let mut fluxes = Vec::with_capacity(sols.len());
    for (sol, pair) in sols.into_iter().zip(&cauchy.pairs) {
        let r: Vec<f64> = sol.trace.iter().zip(&pair.u_meas).map(|(a, b)| a - b).collect();
        j += 0.5 * omega.integrate(&r.iter().map(|v| v * v).collect::<Vec<_>>());
        residuals.push(r);
        fluxes.push(sol.phi);
    }
    Ok(Evaluation {
        solver,
        j,
        residuals,
        fluxes,
    })
}

fn gradient_of(eval: &Evaluation, shape: &StarShape, cauchy: &CauchyData) -> Result<Vec<f64>> {
    let basis = perturbation_basis(shape, eval.solver.anomaly());
    let hs: Vec<&[f64]> = basis.iter().map(|h| h.as_slice()).collect();
    let omega = cauchy.domain();
    let parts: Vec<Vec<f64>> = eval
        .residuals
        .par_iter()
        .zip(&eval.fluxes)
        .map(|(r, flux)| {
            let lin = eval.solver.solve_linearized_many(&hs, flux)?;
            Ok(lin
                .iter()
                .map(|l| omega.integrate(&r.iter().zip(&l.trace).map(|(a, b)| a * b).collect::<Vec<_>>()))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; basis.len()];
    for part in parts {
        grad.iter_mut().zip(part).for_each(|(g, p)| *g += p);
    }
    Ok(grad)
}

/// `J = ½ Σ_i ∫_{∂Ω} |u₀ − u_meas⁽ⁱ⁾|² ds` for the candidate shape sampled
/// at `n_nodes` nodes.
pub fn objective_j(shape: &StarShape, cauchy: &CauchyData, n_nodes: usize) -> Result<f64> {
    Ok(evaluate(shape, cauchy, n_nodes)?.j)
}

/// `J` and its gradient with respect to [`shape_params`].
pub fn shape_gradient(shape: &StarShape, cauchy: &CauchyData, n_nodes: usize) -> Result<(f64, Vec<f64>)> {
    let eval = evaluate(shape, cauchy, n_nodes)?;
    let grad = gradient_of(&eval, shape, cauchy)?;
    Ok((eval.j, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSettings {
    /// Harmonic cutoff `N` of the reconstruction.
    pub order: usize,
    /// Largest step length; halved after a rejected trial, doubled (up to this
    /// value) after an accepted one.
    pub alpha: f64,
    /// Minimal distance `δ₀` between the anomaly and `∂Ω`.
    pub delta0: f64,
    pub max_iter: usize,
    pub j_threshold: f64,
    /// Halvings allowed within one iteration.
    pub max_halvings: usize,
    /// Nodes on the candidate anomaly.
    pub anomaly_nodes: usize,
    /// Known target, only used to record the symmetric difference.
    pub target: Option<StarShape>,
    /// Move the expansion center to the area centroid after accepted steps.
    pub recenter: bool,
    /// Exponent `s` of the `(1 + n²)^(−s)` weights applied to the
    /// coefficient gradient; 0 keeps the plain gradient.
    pub smoothing: f64,
}

impl Default for ShapeSettings {
    fn default() -> Self {
        Self {
            order: 15,
            alpha: 0.5,
            delta0: 0.25,
            max_iter: 500,
            j_threshold: 1e-5,
            max_halvings: 30,
            anomaly_nodes: 128,
            target: None,
            recenter: true,
            smoothing: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeIterate {
    pub iter: usize,
    pub j: f64,
    pub symdiff: Option<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `J` fell below the threshold.
    Converged,
    MaxIterations,
    /// No step length within the halving budget decreased `J`.
    Stalled,
}

impl StopReason {
    pub fn label(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max_iterations",
            StopReason::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShapeDescentState {
    pub shape: StarShape,
    pub alpha: f64,
    /// One record per accepted iterate, starting with the initial shape.
    pub history: Vec<ShapeIterate>,
    pub stop: StopReason,
}

/// Re-expresses an accepted iterate about its area centroid when the two
/// points have drifted apart, provided the refitted shape is admissible and
/// still no worse than `j_prev`.
fn recenter(shape: &StarShape, cauchy: &CauchyData, settings: &ShapeSettings, j_prev: f64) -> Result<Option<(StarShape, Evaluation)>> {
    let centroid = shape.curve(settings.anomaly_nodes)?.centroid();
    if (centroid - shape.center).norm() < RECENTER_TOLERANCE * shape.coeff(0) {
        return Ok(None);
    }
    let Some(moved) = shape.recentered(centroid) else {
        return Ok(None);
    };
    if !admissible(&moved, cauchy.domain(), settings.delta0, settings.anomaly_nodes) {
        return Ok(None);
    }
    let e = evaluate(&moved, cauchy, settings.anomaly_nodes)?;
    Ok((e.j <= j_prev).then_some((moved, e)))
}

/// Relative center drift that triggers [`recenter`].
const RECENTER_TOLERANCE: f64 = 0.02;

/// Gradient descent on the shape parameters. Trials leaving the admissible
/// set or increasing `J` are retried with half the step.
pub fn run_shape_descent(initial: &StarShape, cauchy: &CauchyData, settings: &ShapeSettings) -> Result<ShapeDescentState> {
    if !(settings.alpha > 0.0) || !(settings.delta0 >= 0.0) {
        return Err(Error::InvalidConfig("shape step must be positive and δ₀ non-negative".into()));
    }
    let domain = cauchy.domain();
    let mut shape = initial.with_order(settings.order);
    if !admissible(&shape, domain, settings.delta0, settings.anomaly_nodes) {
        return Err(Error::InvalidConfig("initial shape is not admissible".into()));
    }
    let symdiff = |s: &StarShape| -> Result<Option<f64>> {
        settings
            .target
            .as_ref()
            .map(|t| shape_symmetric_difference(s, t))
            .transpose()
    };
    let mut eval = evaluate(&shape, cauchy, settings.anomaly_nodes)?;
    let mut alpha = settings.alpha;
    let mut history = Vec::new();
    let mut stop = StopReason::MaxIterations;
    for iter in 0..=settings.max_iter {
        history.push(ShapeIterate {
            iter,
            j: eval.j,
            symdiff: symdiff(&shape)?,
            alpha,
        });
        if !eval.j.is_finite() {
            return Err(Error::Diverged(format!("non-finite J at iteration {iter}")));
        }
        if eval.j < settings.j_threshold {
            stop = StopReason::Converged;
            break;
        }
        if iter == settings.max_iter {
            break;
        }
        let mut grad = gradient_of(&eval, &shape, cauchy)?;
        if settings.smoothing > 0.0 {
            let order = shape.order() as isize;
            for (k, g) in (-order..=order).zip(&mut grad[2..]) {
                *g *= (1.0 + (k * k) as f64).powf(-settings.smoothing);
            }
        }
        let params = shape_params(&shape);
        let mut accepted = None;
        let mut saw_admissible = false;
        for _ in 0..=settings.max_halvings {
            let trial_params: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - alpha * g).collect();
            let trial = shape_from_params(&trial_params)?;
            if admissible(&trial, domain, settings.delta0, settings.anomaly_nodes) {
                saw_admissible = true;
                let trial_eval = evaluate(&trial, cauchy, settings.anomaly_nodes)?;
                if trial_eval.j <= eval.j {
                    accepted = Some((trial, trial_eval));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((s, e)) => {
                alpha = (2.0 * alpha).min(settings.alpha);
                let recentered = if settings.recenter {
                    recenter(&s, cauchy, settings, eval.j)?
                } else {
                    None
                };
                (shape, eval) = recentered.unwrap_or((s, e));
            }
            None if saw_admissible => {
                stop = StopReason::Stalled;
                break;
            }
            None => return Err(Error::StepCollapse(alpha)),
        }
    }
    Ok(ShapeDescentState {
        shape,
        alpha,
        history,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::coordinate_currents;
    use crate::geometry::EllipseDomain;
    use crate::layer_potentials::LayerField;
    use crate::volume::StratifiedSampler;

    fn cauchy_for(omega: Curve, target: &StarShape, n: usize) -> CauchyData {
        let ops = Arc::new(DomainOperators::new(omega).unwrap());
        let solver = ForwardSolver::new(Arc::clone(&ops), target.curve(n).unwrap()).unwrap();
        let pairs = coordinate_currents(ops.curve())
            .into_iter()
            .map(|f| CauchyPair {
                u_meas: solver.solve_perfect_conductor(&f).unwrap().trace,
                f,
            })
            .collect();
        CauchyData::new(ops, pairs).unwrap()
    }

    fn ellipse_case() -> (CauchyData, StarShape) {
        let target = StarShape::new(Point2::new(0.4, -0.3), vec![0.1, -0.15, 1.0, 0.2, 0.05]).unwrap();
        (cauchy_for(EllipseDomain::new(4.0, 3.0).curve(96, 0.0).unwrap(), &target, 96), target)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (cauchy, _) = ellipse_case();
        let shape = StarShape::new(Point2::new(0.1, 0.2), vec![0.05, 0.1, 0.8, -0.1, 0.05]).unwrap();
        let (_, grad) = shape_gradient(&shape, &cauchy, 96).unwrap();
        let params = shape_params(&shape);
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for i in 0..params.len() {
            let eps = 1e-4;
            let (mut p, mut m) = (params.clone(), params.clone());
            p[i] += eps;
            m[i] -= eps;
            let jp = objective_j(&shape_from_params(&p).unwrap(), &cauchy, 96).unwrap();
            let jm = objective_j(&shape_from_params(&m).unwrap(), &cauchy, 96).unwrap();
            let fd = (jp - jm) / (2.0 * eps);
            let err = (fd - grad[i]).abs() / grad[i].abs().max(1e-2 * scale);
            assert!(err < 1e-3, "component {i}: fd {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn radius_gradient_points_toward_target() {
        let omega = StarShape::disk(Point2::zeros(), 2.5, 0).curve(64).unwrap();
        let cauchy = cauchy_for(omega, &StarShape::disk(Point2::zeros(), 1.0, 0), 64);
        for (radius, sign) in [(0.6, -1.0), (1.4, 1.0)] {
            let shape = StarShape::disk(Point2::zeros(), radius, 2);
            let (_, g) = shape_gradient(&shape, &cauchy, 64).unwrap();
            // c₀ sits after the center and the N = 2 sine coefficients
            assert!(g[4] * sign > 0.0, "radius {radius}: {g:?}");
            let scale = g[4].abs();
            assert!(g[0].abs() < 1e-8 * scale && g[1].abs() < 1e-8 * scale, "center {:?}", &g[..2]);
        }
        let j = |r: f64| objective_j(&StarShape::disk(Point2::zeros(), r, 0), &cauchy, 64).unwrap();
        assert!(j(0.6) > j(0.8) && j(0.8) > j(1.0) && j(1.2) > j(1.0) && j(1.4) > j(1.2));
    }

    #[test]
    fn exact_initial_guess_stops_immediately() {
        let (cauchy, target) = ellipse_case();
        let settings = ShapeSettings { order: 2, anomaly_nodes: 96, ..Default::default() };
        let out = run_shape_descent(&target, &cauchy, &settings).unwrap();
        assert_eq!(out.stop, StopReason::Converged);
        assert_eq!(out.history.len(), 1);
        assert!(out.history[0].j < 1e-12);
    }

    #[test]
    fn descent_is_monotone_and_admissible() {
        let (cauchy, target) = ellipse_case();
        let settings = ShapeSettings {
            order: 2,
            anomaly_nodes: 96,
            max_iter: 25,
            target: Some(target),
            ..Default::default()
        };
        let out = run_shape_descent(&StarShape::disk(Point2::zeros(), 0.5, 2), &cauchy, &settings).unwrap();
        assert!(out.history.windows(2).all(|w| w[1].j <= w[0].j));
        let first = out.history[0].symdiff.unwrap();
        assert!(out.history.last().unwrap().symdiff.unwrap() < first);
        assert!(admissible(&out.shape, cauchy.domain(), 0.25, 96));
    }

    #[test]
    fn boundary_form_matches_volume_form() {
        // ∫_{∂Ω} (u − u_meas) u_h ds = ∫_{Ω∖D} ∇w·∇u_h dx, w the adjoint field
        let omega = EllipseDomain::new(2.5, 2.0).curve(96, 0.0).unwrap();
        let target = StarShape::new(Point2::new(0.2, 0.1), vec![0.1, 1.0, 0.15]).unwrap();
        let cauchy = cauchy_for(omega.clone(), &target, 96);
        let shape = StarShape::new(Point2::new(0.0, 0.0), vec![0.0, 0.8, 0.0]).unwrap();
        let eval = evaluate(&shape, &cauchy, 96).unwrap();
        let d = eval.solver.anomaly().clone();
        let h = perturbation_basis(&shape, &d).swap_remove(3);
        let uh = eval.solver.solve_linearized(&h, &eval.fluxes[0]).unwrap();
        let g = &eval.residuals[0];
        let boundary = omega.integrate(&g.iter().zip(&uh.trace).map(|(a, b)| a * b).collect::<Vec<_>>());
        let w = eval.solver.solve_adjoint(g).unwrap();
        let field_uh = LayerField::new()
            .with_double(&d, &uh.mu)
            .unwrap()
            .with_single(&d, &uh.phi)
            .unwrap()
            .with_single(&omega, &uh.psi)
            .unwrap();
        let field_w = LayerField::new()
            .with_single(&d, &w.phi)
            .unwrap()
            .with_single(&omega, &w.psi)
            .unwrap();
        let (lo, hi) = omega.bounding_box();
        let sampler = StratifiedSampler::new(lo, hi, 40_000, 11);
        let vals: Vec<f64> = sampler
            .points()
            .iter()
            .map(|p| {
                if omega.contains(p) && !d.contains(p) {
                    field_w.gradient(p).dot(&field_uh.gradient(p))
                } else {
                    0.0
                }
            })
            .collect();
        let est = sampler.estimate(&vals);
        assert!(
            (est.value - boundary).abs() < 3.0 * est.std_error + 1e-3 * boundary.abs(),
            "volume {est:?}, boundary {boundary}"
        );
    }
}
