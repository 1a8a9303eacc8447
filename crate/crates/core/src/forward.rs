//! Boundary-value solves on the two-curve geometry `D ⊂ Ω`.
//!
//! Every field is represented as `S_D φ + S_Ω ψ` (plus `D_D μ` for the
//! linearized field) and the densities come from a dense Nyström block
//! system. Constants in the Neumann null space are removed with rank-one
//! terms `1 wᵀ`, and returned `∂Ω` traces always have zero weighted mean.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Curve;
use crate::layer_potentials::{
    cross_normal_derivative, double_layer_cross, double_layer_normal_cross, hypersingular_self,
    kstar_self, single_layer_cross, single_layer_self,
};

/// Pivot ratio below which a factorization is reported as singular.
const PIVOT_RATIO_FLOOR: f64 = 1e-13;

/// `|∫ f ds| ≤ FLUX_TOLERANCE · (1 + ∫|f| ds)` is accepted as compatible.
pub const FLUX_TOLERANCE: f64 = 1e-10;

/// Frequency-dependent anomaly conductivity `k(ω) = κ₁ − κ₂/(ω² + iωκ₃)` in a
/// background of conductivity `k₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConductivityProfile {
    pub kappa: [f64; 3],
    pub k0: f64,
}

impl ConductivityProfile {
    /// `κ₁, κ₃, k₀` must be positive; `κ₂ = 0` (no dispersion) is allowed.
    pub fn new(kappa: [f64; 3], k0: f64) -> Result<Self> {
        let ok = kappa[0] > 0.0 && kappa[1] >= 0.0 && kappa[2] > 0.0 && k0 > 0.0;
        if !ok || kappa.iter().chain([&k0]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "conductivity profile needs κ₁, κ₃, k₀ > 0 and κ₂ ≥ 0, got κ = {kappa:?}, k₀ = {k0}"
            )));
        }
        Ok(Self { kappa, k0 })
    }

    pub fn k_of_omega(&self, omega: f64) -> Complex64 {
        k_of_omega(self, omega)
    }

    /// `(∂k/∂κ₁, ∂k/∂κ₂, ∂k/∂κ₃)` at `ω`.
    pub fn dk_dkappa(&self, omega: f64) -> [Complex64; 3] {
        let den = Complex64::new(omega * omega, omega * self.kappa[2]);
        [
            Complex64::new(1.0, 0.0),
            -den.inv(),
            Complex64::new(0.0, omega * self.kappa[1]) / (den * den),
        ]
    }
}

pub fn k_of_omega(profile: &ConductivityProfile, omega: f64) -> Complex64 {
    let [k1, k2, k3] = profile.kappa;
    k1 - k2 / Complex64::new(omega * omega, omega * k3)
}

/// Densities and traces of a solved field.
#[derive(Debug, Clone)]
pub struct BoundarySolution<T> {
    /// Trace on `∂Ω`, zero weighted mean.
    pub trace: Vec<T>,
    /// Trace on `∂D` (outer side), shifted by the same constant as `trace`.
    pub anomaly_trace: Vec<T>,
    /// `∂_ν u|⁺` on `∂D`.
    pub d_flux: Vec<T>,
    /// Single-layer density on `∂D`.
    pub phi: Vec<T>,
    /// Single-layer density on `∂Ω`.
    pub psi: Vec<T>,
}

/// Linearized field `u_h = D_D μ + S_D φ + S_Ω ψ` with `μ = h ∂_ν u₀|⁺`.
#[derive(Debug, Clone)]
pub struct LinearizedSolution {
    pub trace: Vec<f64>,
    /// Constant added to the representation to make `trace` mean-zero.
    pub offset: f64,
    pub mu: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

fn factor_real(m: DMatrix<f64>, what: &str) -> Result<LU<f64, Dyn, Dyn>> {
    let lu = m.lu();
    let diag = lu.u().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
    if !(lo > PIVOT_RATIO_FLOOR * hi) {
        return Err(Error::SingularSystem(format!("{what}: pivot ratio {:.2e}", lo / hi)));
    }
    Ok(lu)
}

fn factor_complex(m: DMatrix<Complex64>, what: &str) -> Result<LU<Complex64, Dyn, Dyn>> {
    let lu = m.lu();
    let diag = lu.u().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d.norm()), hi.max(d.norm())));
    if !(lo > PIVOT_RATIO_FLOOR * hi) {
        return Err(Error::SingularSystem(format!("{what}: pivot ratio {:.2e}", lo / hi)));
    }
    Ok(lu)
}

fn rank_one(curve: &Curve) -> DMatrix<f64> {
    let w = curve.weights();
    DMatrix::from_fn(w.len(), w.len(), |_, j| w[j])
}

/// Fails with `IncompatibleFlux` unless `∫ f ds` vanishes.
pub fn check_flux(curve: &Curve, f: &[f64]) -> Result<()> {
    if f.len() != curve.len() {
        return Err(Error::DimensionMismatch {
            expected: curve.len(),
            got: f.len(),
        });
    }
    let integral = curve.integrate(f);
    let scale: f64 = curve.weights().iter().zip(f).map(|(w, v)| w * v.abs()).sum();
    if integral.abs() > FLUX_TOLERANCE * (1.0 + scale) {
        return Err(Error::IncompatibleFlux { integral });
    }
    Ok(())
}

fn center_complex(curve: &Curve, values: &mut [Complex64]) -> Complex64 {
    let mean = values
        .iter()
        .zip(curve.weights())
        .map(|(v, w)| v * *w)
        .sum::<Complex64>()
        / curve.perimeter();
    values.iter_mut().for_each(|v| *v -= mean);
    mean
}

fn center_real(curve: &Curve, values: &mut [f64]) -> f64 {
    let mean = curve.mean(values);
    values.iter_mut().for_each(|v| *v -= mean);
    mean
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Operators that depend on `Ω` alone, shared by every anomaly candidate.
#[derive(Debug)]
pub struct DomainOperators {
    curve: Curve,
    single: DMatrix<f64>,
    /// `−½ + K*_Ω + 1 wᵀ`.
    neumann: DMatrix<f64>,
    neumann_lu: LU<f64, Dyn, Dyn>,
}

impl DomainOperators {
    pub fn new(curve: Curve) -> Result<Self> {
        let single = single_layer_self(&curve)?.matrix;
        let n = curve.len();
        let neumann = kstar_self(&curve)?.matrix - DMatrix::identity(n, n) * 0.5 + rank_one(&curve);
        let neumann_lu = factor_real(neumann.clone(), "interior Neumann block")?;
        Ok(Self {
            curve,
            single,
            neumann,
            neumann_lu,
        })
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    /// Zero-mean trace of the harmonic function in `Ω` with flux `f`.
    pub fn harmonic_lift(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_flux(&self.curve, f)?;
        let psi = self
            .neumann_lu
            .solve(&DVector::from_column_slice(f))
            .ok_or_else(|| Error::SingularSystem("interior Neumann block".into()))?;
        let mut trace = (&self.single * psi).as_slice().to_vec();
        center_real(&self.curve, &mut trace);
        Ok(trace)
    }
}

/// Trace of the zero-mean harmonic function in the domain with Neumann data `f`.
pub fn harmonic_lift(domain: &Curve, f: &[f64]) -> Result<Vec<f64>> {
    DomainOperators::new(domain.clone())?.harmonic_lift(f)
}

type TransmissionLu = Arc<LU<Complex64, Dyn, Dyn>>;

/// Cached blocks and factorizations for one `(Ω, D)` pair.
///
/// Perfect-conductor and adjoint factorizations are built on first use;
/// transmission factorizations are cached per `k`. All caches are safe to
/// share across threads.
#[derive(Debug)]
pub struct ForwardSolver {
    domain: Arc<DomainOperators>,
    anomaly: Curve,
    /// `S_D` on `∂D`.
    s_dd: DMatrix<f64>,
    /// `K*_D`.
    k_dd: DMatrix<f64>,
    /// `S_D` at `∂Ω` nodes.
    s_od: DMatrix<f64>,
    /// `S_Ω` at `∂D` nodes.
    s_do: DMatrix<f64>,
    /// `∂_{ν_Ω} S_D`.
    n_od: DMatrix<f64>,
    /// `∂_{ν_D} S_Ω`.
    n_do: DMatrix<f64>,
    double: OnceLock<DoubleLayerBlocks>,
    conductor: OnceLock<LU<f64, Dyn, Dyn>>,
    adjoint: OnceLock<LU<f64, Dyn, Dyn>>,
    transmission: RwLock<HashMap<(u64, u64, u64), TransmissionLu>>,
}

#[derive(Debug)]
struct DoubleLayerBlocks {
    /// `∂_ν D_D` on `∂D`.
    hyper: DMatrix<f64>,
    /// `D_D` at `∂Ω` nodes.
    d_od: DMatrix<f64>,
    /// `∂_{ν_Ω} D_D`.
    nd_od: DMatrix<f64>,
}

impl ForwardSolver {
    pub fn new(domain: Arc<DomainOperators>, anomaly: Curve) -> Result<Self> {
        let omega = domain.curve();
        let s_dd = single_layer_self(&anomaly)?.matrix;
        let k_dd = kstar_self(&anomaly)?.matrix;
        let s_od = single_layer_cross(&anomaly, omega.nodes())?.matrix;
        let s_do = single_layer_cross(omega, anomaly.nodes())?.matrix;
        let n_od = cross_normal_derivative(&anomaly, omega)?.matrix;
        let n_do = cross_normal_derivative(omega, &anomaly)?.matrix;
        Ok(Self {
            domain,
            anomaly,
            s_dd,
            k_dd,
            s_od,
            s_do,
            n_od,
            n_do,
            double: OnceLock::new(),
            conductor: OnceLock::new(),
            adjoint: OnceLock::new(),
            transmission: RwLock::new(HashMap::new()),
        })
    }

    /// Convenience constructor that assembles the `Ω` operators as well.
    pub fn from_curves(domain: &Curve, anomaly: &Curve) -> Result<Self> {
        Self::new(Arc::new(DomainOperators::new(domain.clone())?), anomaly.clone())
    }

    pub fn domain(&self) -> &Curve {
        self.domain.curve()
    }

    pub fn domain_operators(&self) -> &Arc<DomainOperators> {
        &self.domain
    }

    pub fn anomaly(&self) -> &Curve {
        &self.anomaly
    }

    fn n_d(&self) -> usize {
        self.anomaly.len()
    }

    fn n_o(&self) -> usize {
        self.domain.curve().len()
    }

    /// `K*_D` block (used by the spectral module).
    pub(crate) fn kstar_anomaly(&self) -> &DMatrix<f64> {
        &self.k_dd
    }

    pub(crate) fn normal_anomaly_from_domain(&self) -> &DMatrix<f64> {
        &self.n_do
    }

    pub(crate) fn normal_domain_from_anomaly(&self) -> &DMatrix<f64> {
        &self.n_od
    }

    /// Solves `(−½ + K*_Ω + 1wᵀ) ψ = rhs` for several columns.
    pub(crate) fn neumann_solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.domain
            .neumann_lu
            .solve(rhs)
            .ok_or_else(|| Error::SingularSystem("interior Neumann block".into()))
    }

    /// `S_D φ + S_Ω ψ` on `∂D`.
    pub(crate) fn anomaly_values(&self, phi: &DMatrix<f64>, psi: &DMatrix<f64>) -> DMatrix<f64> {
        &self.s_dd * phi + &self.s_do * psi
    }

    /// `S_D φ + S_Ω ψ` on `∂Ω` (no centering).
    pub(crate) fn domain_values(&self, phi: &DMatrix<f64>, psi: &DMatrix<f64>) -> DMatrix<f64> {
        &self.s_od * phi + &self.domain.single * psi
    }

    pub fn harmonic_lift(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.domain.harmonic_lift(f)
    }

    fn double_blocks(&self) -> Result<&DoubleLayerBlocks> {
        if let Some(b) = self.double.get() {
            return Ok(b);
        }
        let omega = self.domain.curve();
        let blocks = DoubleLayerBlocks {
            hyper: hypersingular_self(&self.anomaly)?.matrix,
            d_od: double_layer_cross(&self.anomaly, omega.nodes())?.matrix,
            nd_od: double_layer_normal_cross(&self.anomaly, omega)?.matrix,
        };
        let _ = self.double.set(blocks);
        Ok(self.double.get().expect("initialized above"))
    }

    /// Block matrix with `diag_d` in the `∂D` diagonal block and the
    /// regularized interior Neumann operator in the `∂Ω` block.
    fn assemble_real(&self, diag_d: DMatrix<f64>) -> DMatrix<f64> {
        let (nd, no) = (self.n_d(), self.n_o());
        let mut m = DMatrix::zeros(nd + no, nd + no);
        m.view_mut((0, 0), (nd, nd)).copy_from(&diag_d);
        m.view_mut((0, nd), (nd, no)).copy_from(&self.n_do);
        m.view_mut((nd, 0), (no, nd)).copy_from(&self.n_od);
        m.view_mut((nd, nd), (no, no)).copy_from(&self.domain.neumann);
        m
    }

    fn conductor_lu(&self) -> Result<&LU<f64, Dyn, Dyn>> {
        if let Some(lu) = self.conductor.get() {
            return Ok(lu);
        }
        let nd = self.n_d();
        let diag = &self.k_dd - DMatrix::identity(nd, nd) * 0.5 + rank_one(&self.anomaly);
        let lu = factor_real(self.assemble_real(diag), "perfect-conductor system")?;
        let _ = self.conductor.set(lu);
        Ok(self.conductor.get().expect("initialized above"))
    }

    fn adjoint_lu(&self) -> Result<&LU<f64, Dyn, Dyn>> {
        if let Some(lu) = self.adjoint.get() {
            return Ok(lu);
        }
        let nd = self.n_d();
        let diag = &self.k_dd + DMatrix::identity(nd, nd) * 0.5;
        let lu = factor_real(self.assemble_real(diag), "adjoint system")?;
        let _ = self.adjoint.set(lu);
        Ok(self.adjoint.get().expect("initialized above"))
    }

    fn transmission_lu(&self, k: Complex64, k0: f64) -> Result<Arc<LU<Complex64, Dyn, Dyn>>> {
        let key = (k.re.to_bits(), k.im.to_bits(), k0.to_bits());
        if let Some(lu) = self.transmission.read().expect("cache lock").get(&key) {
            return Ok(lu.clone());
        }
        let (nd, no) = (self.n_d(), self.n_o());
        let half_sum = (k + k0) * 0.5;
        let contrast = k - k0;
        let mut m = to_complex(&self.assemble_real(DMatrix::zeros(nd, nd)));
        for i in 0..nd {
            for j in 0..nd {
                let id = if i == j { half_sum } else { Complex64::new(0.0, 0.0) };
                m[(i, j)] = id - contrast * self.k_dd[(i, j)];
            }
            for j in 0..no {
                m[(i, nd + j)] = -contrast * self.n_do[(i, j)];
            }
        }
        let lu = Arc::new(factor_complex(m, "transmission system")?);
        self.transmission
            .write()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| lu.clone());
        Ok(lu)
    }

    /// Transmission problem with anomaly conductivity `k` in background `k₀`
    /// and current `f` (`k₀ ∂_ν u = f` on `∂Ω`).
    pub fn solve_transmission(&self, k: Complex64, k0: f64, f: &[f64]) -> Result<BoundarySolution<Complex64>> {
        let omega = self.domain.curve();
        check_flux(omega, f)?;
        if !(k0 > 0.0) || !k.re.is_finite() || !k.im.is_finite() {
            return Err(Error::InvalidConfig(format!("bad conductivities k = {k}, k₀ = {k0}")));
        }
        let (nd, no) = (self.n_d(), self.n_o());
        let lu = self.transmission_lu(k, k0)?;
        let mut rhs = DVector::zeros(nd + no);
        for (i, v) in f.iter().enumerate() {
            rhs[nd + i] = Complex64::new(v / k0, 0.0);
        }
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("transmission system".into()))?;
        let phi: Vec<Complex64> = sol.rows(0, nd).iter().copied().collect();
        let psi: Vec<Complex64> = sol.rows(nd, no).iter().copied().collect();
        let apply = |m: &DMatrix<f64>, v: &[Complex64]| -> Vec<Complex64> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().zip(v).map(|(a, b)| b * *a).sum())
                .collect()
        };
        let add = |a: Vec<Complex64>, b: Vec<Complex64>| -> Vec<Complex64> {
            a.into_iter().zip(b).map(|(x, y)| x + y).collect()
        };
        let mut trace = add(apply(&self.s_od, &phi), apply(&self.domain.single, &psi));
        let mean = center_complex(omega, &mut trace);
        let anomaly_trace = add(apply(&self.s_dd, &phi), apply(&self.s_do, &psi))
            .into_iter()
            .map(|v| v - mean)
            .collect();
        let d_flux = add(apply(&self.k_dd, &phi), apply(&self.n_do, &psi))
            .into_iter()
            .zip(&phi)
            .map(|(v, p)| v + p * 0.5)
            .collect();
        Ok(BoundarySolution {
            trace,
            anomaly_trace,
            d_flux,
            phi,
            psi,
        })
    }

    fn real_solution(&self, sol: &DMatrix<f64>, flux_shift: f64) -> Vec<BoundarySolution<f64>> {
        let (nd, no) = (self.n_d(), self.n_o());
        let omega = self.domain.curve();
        let phi_all = sol.rows(0, nd).into_owned();
        let psi_all = sol.rows(nd, no).into_owned();
        let traces = self.domain_values(&phi_all, &psi_all);
        let inner = self.anomaly_values(&phi_all, &psi_all);
        let flux = &self.k_dd * &phi_all + &self.n_do * &psi_all + &phi_all * flux_shift;
        (0..sol.ncols())
            .map(|c| {
                let mut trace = traces.column(c).as_slice().to_vec();
                let mean = center_real(omega, &mut trace);
                BoundarySolution {
                    trace,
                    anomaly_trace: inner.column(c).iter().map(|v| v - mean).collect(),
                    d_flux: flux.column(c).as_slice().to_vec(),
                    phi: phi_all.column(c).as_slice().to_vec(),
                    psi: psi_all.column(c).as_slice().to_vec(),
                }
            })
            .collect()
    }

    fn stacked_rhs(&self, fluxes: &[&[f64]]) -> Result<DMatrix<f64>> {
        let omega = self.domain.curve();
        let nd = self.n_d();
        let mut rhs = DMatrix::zeros(nd + self.n_o(), fluxes.len());
        for (c, f) in fluxes.iter().enumerate() {
            check_flux(omega, f)?;
            rhs.view_mut((nd, c), (f.len(), 1)).copy_from_slice(f);
        }
        Ok(rhs)
    }

    /// Perfect-conductor field `u₀` for each current. `phi` equals the
    /// outer flux `∂_ν u₀|⁺` on `∂D`.
    pub fn solve_perfect_conductor_many(&self, fluxes: &[&[f64]]) -> Result<Vec<BoundarySolution<f64>>> {
        let rhs = self.stacked_rhs(fluxes)?;
        let sol = self
            .conductor_lu()?
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("perfect-conductor system".into()))?;
        Ok(self.real_solution(&sol, 0.5))
    }

    pub fn solve_perfect_conductor(&self, f: &[f64]) -> Result<BoundarySolution<f64>> {
        Ok(self.solve_perfect_conductor_many(&[f])?.remove(0))
    }

    /// Adjoint field: harmonic in `Ω∖D̄`, `∂_ν w = 0` on `∂D`, `∂_ν w = g` on `∂Ω`.
    pub fn solve_adjoint(&self, g: &[f64]) -> Result<BoundarySolution<f64>> {
        let rhs = self.stacked_rhs(&[g])?;
        let sol = self
            .adjoint_lu()?
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("adjoint system".into()))?;
        Ok(self.real_solution(&sol, 0.5).remove(0))
    }

    /// Linearized fields for several boundary perturbations `h` sharing the
    /// same perfect-conductor flux.
    pub fn solve_linearized_many(&self, hs: &[&[f64]], flux: &[f64]) -> Result<Vec<LinearizedSolution>> {
        let (nd, no) = (self.n_d(), self.n_o());
        if flux.len() != nd {
            return Err(Error::DimensionMismatch { expected: nd, got: flux.len() });
        }
        let blocks = self.double_blocks()?;
        let mut mu = DMatrix::zeros(nd, hs.len());
        for (c, h) in hs.iter().enumerate() {
            if h.len() != nd {
                return Err(Error::DimensionMismatch { expected: nd, got: h.len() });
            }
            for i in 0..nd {
                mu[(i, c)] = h[i] * flux[i];
            }
        }
        let mut rhs = DMatrix::zeros(nd + no, hs.len());
        rhs.view_mut((0, 0), (nd, hs.len())).copy_from(&(-&blocks.hyper * &mu));
        rhs.view_mut((nd, 0), (no, hs.len())).copy_from(&(-&blocks.nd_od * &mu));
        let sol = self
            .conductor_lu()?
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("perfect-conductor system".into()))?;
        let phi = sol.rows(0, nd).into_owned();
        let psi = sol.rows(nd, no).into_owned();
        let traces = self.domain_values(&phi, &psi) + &blocks.d_od * &mu;
        let omega = self.domain.curve();
        Ok((0..hs.len())
            .map(|c| {
                let mut trace = traces.column(c).as_slice().to_vec();
                let offset = -center_real(omega, &mut trace);
                LinearizedSolution {
                    trace,
                    offset,
                    mu: mu.column(c).as_slice().to_vec(),
                    phi: phi.column(c).as_slice().to_vec(),
                    psi: psi.column(c).as_slice().to_vec(),
                }
            })
            .collect())
    }

    /// Linearized field for the perturbation `h` of `∂D` along its normal.
    pub fn solve_linearized(&self, h: &[f64], flux: &[f64]) -> Result<LinearizedSolution> {
        Ok(self.solve_linearized_many(&[h], flux)?.remove(0))
    }

    /// Plain matrix-vector product used by callers holding raw densities.
    pub(crate) fn domain_trace_of(&self, phi: &[f64], psi: &[f64]) -> Vec<f64> {
        let mut v = mat_vec(&self.s_od, phi);
        v.iter_mut()
            .zip(mat_vec(&self.domain.single, psi))
            .for_each(|(a, b)| *a += b);
        v
    }
}

pub fn solve_transmission(
    domain: &Curve,
    anomaly: &Curve,
    k: Complex64,
    k0: f64,
    f: &[f64],
) -> Result<BoundarySolution<Complex64>> {
    ForwardSolver::from_curves(domain, anomaly)?.solve_transmission(k, k0, f)
}

pub fn solve_perfect_conductor(domain: &Curve, anomaly: &Curve, f: &[f64]) -> Result<BoundarySolution<f64>> {
    ForwardSolver::from_curves(domain, anomaly)?.solve_perfect_conductor(f)
}

pub fn solve_linearized(domain: &Curve, anomaly: &Curve, h: &[f64], flux: &[f64]) -> Result<Vec<f64>> {
    Ok(ForwardSolver::from_curves(domain, anomaly)?
        .solve_linearized(h, flux)?
        .trace)
}

pub fn solve_adjoint(domain: &Curve, anomaly: &Curve, g: &[f64]) -> Result<BoundarySolution<f64>> {
    ForwardSolver::from_curves(domain, anomaly)?.solve_adjoint(g)
}

/// Normal-flux currents `⟨e₁, ν⟩` and `⟨e₂, ν⟩` on a curve.
pub fn coordinate_currents(curve: &Curve) -> [Vec<f64>; 2] {
    [
        curve.normals().iter().map(|n| n.x).collect(),
        curve.normals().iter().map(|n| n.y).collect(),
    ]
}
