//! Eigenpairs of the variational Poincaré operator on `Ω` with inclusion `D`.
//!
//! An eigenfunction is `w = S_D φ + S_Ω ψ` with `∂_ν w = 0` on `∂Ω`, which fixes
//! `ψ` in terms of `φ`. With `V φ = w|_{∂D}` and the interior flux
//! `∂_ν w|⁻ = (−½ + K) φ`, the energy forms are
//!
//! * `a(φ, χ) = ∫_Ω ∇w_φ·∇w_χ = −χᵀ W V φ`
//! * `b(φ, χ) = ∫_D ∇w_φ·∇w_χ = (Vχ)ᵀ W (−½ + K) φ`
//!
//! and `λ = b/a` on mean-zero densities. The symmetric-definite pencil is
//! reduced by a Cholesky factor of `a`, so eigenvectors come out with unit
//! energy.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{ConductivityProfile, ForwardSolver};
use crate::layer_potentials::LayerField;
use crate::volume::{StratifiedSampler, VolumeEstimate};

/// Modes closer than this to `1/2` are flagged as unresolved.
pub const UNRESOLVED_GAP: f64 = 1e-3;

/// Default sample count for Monte Carlo energy integrals.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `λ > 1/2`
    Plus,
    /// `λ < 1/2`
    Minus,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Plus => "plus",
            Family::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoincareEigenpair {
    pub lambda: f64,
    pub family: Family,
    /// `|λ − 1/2|` is below [`UNRESOLVED_GAP`].
    pub unresolved: bool,
    /// Density on `∂D`.
    pub phi: Vec<f64>,
    /// Density on `∂Ω`.
    pub psi: Vec<f64>,
    /// Zero-mean trace of `w` on `∂Ω`.
    pub trace: Vec<f64>,
}

impl PoincareEigenpair {
    /// `⟨f, w⟩ = ∫_{∂Ω} f w ds`.
    pub fn coefficient(&self, solver: &ForwardSolver, f: &[f64]) -> f64 {
        let prod: Vec<f64> = f.iter().zip(&self.trace).map(|(a, b)| a * b).collect();
        solver.domain().integrate(&prod)
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// The `n_modes` eigenpairs farthest from `1/2`, ordered by decreasing
/// `|λ − 1/2|`.
pub fn estimate_spectrum(solver: &ForwardSolver, n_modes: usize) -> Result<Vec<PoincareEigenpair>> {
    let d = solver.anomaly();
    let nd = d.len();
    if nd < 64 || solver.domain().len() < 64 {
        return Err(Error::TooFewNodes {
            got: nd.min(solver.domain().len()),
            min: 64,
        });
    }
    // ψ = −N⁻¹ ∂_{ν_Ω} S_D φ
    let psi_map = -solver.neumann_solve(solver.normal_domain_from_anomaly())?;
    let eye = DMatrix::<f64>::identity(nd, nd);
    let v = solver.anomaly_values(&eye, &psi_map);
    let k = solver.kstar_anomaly() + solver.normal_anomaly_from_domain() * &psi_map;
    let wd = DMatrix::from_diagonal(&DVector::from_column_slice(d.weights()));
    let a = symmetrize(&(-(&wd * &v)));
    let b = symmetrize(&(v.transpose() * &wd * (k - &eye * 0.5)));

    // orthonormal basis of densities with ∫ φ ds = 0
    let mut stacked = DMatrix::zeros(nd, nd + 1);
    stacked.set_column(0, &DVector::from_column_slice(d.weights()));
    stacked.view_mut((0, 1), (nd, nd)).copy_from(&eye);
    let q_full = stacked.qr().q();
    let q = q_full.columns(1, nd - 1).into_owned();

    let a_r = symmetrize(&(q.transpose() * &a * &q));
    let b_r = symmetrize(&(q.transpose() * &b * &q));
    let chol = a_r
        .cholesky()
        .ok_or_else(|| Error::EigSolveFailure("energy form is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::EigSolveFailure("singular energy factor".into()))?;
    let c = symmetrize(&(&l_inv * &b_r * l_inv.transpose()));
    let eig = c.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigSolveFailure("non-finite eigenvalue".into()));
    }

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        let (x, y) = (eig.eigenvalues[i], eig.eigenvalues[j]);
        (y - 0.5).abs().total_cmp(&(x - 0.5).abs()).then(y.total_cmp(&x))
    });
    let back = q * l_inv.transpose();
    let omega = solver.domain();
    let pairs = order
        .into_iter()
        .take(n_modes)
        .map(|i| {
            let lambda = eig.eigenvalues[i];
            let mut phi = &back * eig.eigenvectors.column(i);
            let pivot = phi.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            if pivot < 0.0 {
                phi.neg_mut();
            }
            let psi = &psi_map * &phi;
            let phi = phi.as_slice().to_vec();
            let psi = psi.as_slice().to_vec();
            let trace = omega.center_values(&solver.domain_trace_of(&phi, &psi));
            PoincareEigenpair {
                lambda,
                family: if lambda > 0.5 { Family::Plus } else { Family::Minus },
                unresolved: (lambda - 0.5).abs() < UNRESOLVED_GAP,
                phi,
                psi,
                trace,
            }
        })
        .collect();
    Ok(pairs)
}

/// Monte Carlo estimate of `∫_D |∇w|² / ∫_Ω |∇w|²` for an eigenfunction.
pub fn rayleigh_quotient(
    solver: &ForwardSolver,
    pair: &PoincareEigenpair,
    samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    let (omega, d) = (solver.domain(), solver.anomaly());
    let field = LayerField::new()
        .with_single(d, &pair.phi)?
        .with_single(omega, &pair.psi)?;
    let (lo, hi) = omega.bounding_box();
    let sampler = StratifiedSampler::new(lo, hi, samples, seed);
    let (inner, total): (Vec<f64>, Vec<f64>) = sampler
        .points()
        .par_iter()
        .map(|p| {
            if !omega.contains(p) {
                return (0.0, 0.0);
            }
            let g = field.gradient(p).norm_squared();
            (if d.contains(p) { g } else { 0.0 }, g)
        })
        .unzip();
    Ok(sampler.ratio(&inner, &total))
}

fn l2_complex(solver: &ForwardSolver, v: &[Complex64]) -> f64 {
    v.iter()
        .zip(solver.domain().weights())
        .map(|(z, w)| z.norm_sqr() * w)
        .sum::<f64>()
        .sqrt()
}

/// `max_ω ‖u(ω) − u₀/k₀ − Σ_{n ≤ n_trunc} ⟨f, w_n⟩ w_n / (k₀ + λ_n (k(ω) − k₀))‖`.
pub fn decomposition_residual(
    solver: &ForwardSolver,
    profile: &ConductivityProfile,
    f: &[f64],
    frequencies: &[f64],
    pairs: &[PoincareEigenpair],
    n_trunc: usize,
) -> Result<f64> {
    let k0 = profile.k0;
    let u0 = solver.solve_perfect_conductor(f)?.trace;
    let coeffs: Vec<f64> = pairs.iter().map(|p| p.coefficient(solver, f)).collect();
    let mut worst = 0.0f64;
    for &omega in frequencies {
        let k = profile.k_of_omega(omega);
        let u = solver.solve_transmission(k, k0, f)?.trace;
        let mut r: Vec<Complex64> = u.iter().zip(&u0).map(|(a, b)| a - b / k0).collect();
        for (pair, c) in pairs.iter().zip(&coeffs).take(n_trunc) {
            let scale = c / (k0 + pair.lambda * (k - k0));
            r.iter_mut().zip(&pair.trace).for_each(|(ri, w)| *ri -= scale * w);
        }
        worst = worst.max(l2_complex(solver, &r));
    }
    Ok(worst)
}

/// `‖(𝔣 − u₀) − Σ_{n ≤ n_trunc} ⟨f, w_n⟩ w_n‖_{L²(∂Ω)}`.
pub fn projection_identity_check(
    solver: &ForwardSolver,
    f: &[f64],
    pairs: &[PoincareEigenpair],
    n_trunc: usize,
) -> Result<f64> {
    let lift = solver.harmonic_lift(f)?;
    let u0 = solver.solve_perfect_conductor(f)?.trace;
    let mut r: Vec<f64> = lift.iter().zip(&u0).map(|(a, b)| a - b).collect();
    for pair in pairs.iter().take(n_trunc) {
        let c = pair.coefficient(solver, f);
        r.iter_mut().zip(&pair.trace).for_each(|(ri, w)| *ri -= c * w);
    }
    Ok(solver.domain().l2_norm(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::coordinate_currents;
    use crate::geometry::{EllipseDomain, Point2, StarShape};

    fn disks(n: usize) -> ForwardSolver {
        let omega = StarShape::disk(Point2::zeros(), 2.0, 0).curve(n).unwrap();
        let d = StarShape::disk(Point2::zeros(), 1.0, 0).curve(n).unwrap();
        ForwardSolver::from_curves(&omega, &d).unwrap()
    }

    fn ellipses(n: usize) -> ForwardSolver {
        let omega = EllipseDomain::new(4.0, 3.0).curve(n, 0.0).unwrap();
        let d = EllipseDomain::new(1.6, 1.0).curve(n, 0.0).unwrap();
        ForwardSolver::from_curves(&omega, &d).unwrap()
    }

    #[test]
    fn concentric_disk_eigenvalues() {
        let solver = disks(128);
        let pairs = estimate_spectrum(&solver, 6).unwrap();
        let expected = [0.625, 0.625, 0.53125, 0.53125, 0.5078125, 0.5078125];
        for (p, e) in pairs.iter().zip(expected) {
            assert!((p.lambda - e).abs() < 1e-10, "{} vs {e}", p.lambda);
            assert_eq!(p.family, Family::Plus);
        }
        let all = estimate_spectrum(&solver, 127).unwrap();
        assert!(all.iter().all(|p| p.lambda > 0.0 && p.lambda < 1.0));
        assert!(all.iter().all(|p| p.lambda > 0.5 - 1e-9));
        assert!(all.last().unwrap().unresolved);
    }

    #[test]
    fn eigenvalues_stable_under_refinement() {
        let (a, b) = (estimate_spectrum(&ellipses(64), 8).unwrap(), estimate_spectrum(&ellipses(128), 8).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x.lambda - y.lambda).abs() < 1e-6);
        }
    }

    #[test]
    fn ellipse_spectrum_decays_geometrically() {
        let pairs = estimate_spectrum(&ellipses(128), 12).unwrap();
        let gaps: Vec<f64> = pairs.iter().map(|p| (p.lambda - 0.5).abs().ln()).collect();
        assert!(pairs.iter().any(|p| p.family == Family::Minus));
        // least-squares slope of log-gap against mode index over the first 8 modes
        let n = 8.0;
        let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / n, gaps[..8].iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&gaps).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope < -0.1, "slope {slope}");
    }

    #[test]
    fn rayleigh_quotient_matches_eigenvalue() {
        let solver = disks(96);
        let pairs = estimate_spectrum(&solver, 4).unwrap();
        for (i, pair) in pairs.iter().enumerate() {
            let q = rayleigh_quotient(&solver, pair, 20_000, i as u64).unwrap();
            assert!(q.value < 1.0);
            assert!((q.value - pair.lambda).abs() < 3.0 * q.std_error + 1e-4, "{q:?} vs {}", pair.lambda);
        }
    }

    #[test]
    fn disk_decomposition_with_one_mode_pair() {
        let solver = disks(128);
        let pairs = estimate_spectrum(&solver, 8).unwrap();
        let f: Vec<f64> = solver.domain().params().iter().map(|t| t.cos()).collect();
        let profile = ConductivityProfile::new([3.0, 2.0, 1.0], 1.0).unwrap();
        let freqs = [1.0, 2.0, 5.0];
        let res: Vec<f64> = (0..=4)
            .map(|n| decomposition_residual(&solver, &profile, &f, &freqs, &pairs, n).unwrap())
            .collect();
        assert!(res[2] < 1e-6, "{res:?}");
        assert!(res[0] > res[2]);
        assert!(res.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn ellipse_decomposition_converges() {
        let solver = ellipses(128);
        let pairs = estimate_spectrum(&solver, 12).unwrap();
        let [f1, _] = coordinate_currents(solver.domain());
        let profile = ConductivityProfile::new([3.0, 2.0, 1.0], 1.0).unwrap();
        let freqs = [1.0, 4.0, 8.0];
        let norm = solver
            .solve_transmission(profile.k_of_omega(1.0), 1.0, &f1)
            .unwrap()
            .trace
            .iter()
            .zip(solver.domain().weights())
            .map(|(z, w)| z.norm_sqr() * w)
            .sum::<f64>()
            .sqrt();
        let res: Vec<f64> = (0..=12)
            .map(|n| decomposition_residual(&solver, &profile, &f1, &freqs, &pairs, n).unwrap())
            .collect();
        assert!(res.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{res:?}");
        assert!(res[12] < 1e-3 * norm, "{res:?}");
    }

    #[test]
    fn projection_identity() {
        let solver = disks(128);
        let pairs = estimate_spectrum(&solver, 6).unwrap();
        let f: Vec<f64> = solver.domain().params().iter().map(|t| t.cos() + 0.5 * (2.0 * t).sin()).collect();
        let res: Vec<f64> = (0..=6).map(|n| projection_identity_check(&solver, &f, &pairs, n).unwrap()).collect();
        let lift = solver.harmonic_lift(&f).unwrap();
        let u0 = solver.solve_perfect_conductor(&f).unwrap().trace;
        let diff: Vec<f64> = lift.iter().zip(&u0).map(|(a, b)| a - b).collect();
        assert!((res[0] - solver.domain().l2_norm(&diff)).abs() < 1e-14);
        assert!(res.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(res[4] < 1e-8, "{res:?}");
    }
}
