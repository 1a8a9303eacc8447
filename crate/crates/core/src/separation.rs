//! Separation of the perfect-conductor trace `u₀` and the conductivity profile
//! from multifrequency boundary data.
//!
//! The data are fitted with the truncated spectral model
//!
//! `F = q₀(ω) U₀ + 2/(k+k₀) 𝔣 + Σ_n (1/(k₀ + λ̃_n (k−k₀)) − 2/(k+k₀)) V_n`,
//!
//! `q₀ = (k−k₀)/(k₀(k+k₀))`, by gradient descent on `κ` and the nodal vectors
//! `U₀`, `V_n` of every current; `u₀` is then refined per node by a small
//! complex least-squares fit with `κ` frozen.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::ConductivityProfile;
use crate::geometry::Point2;

/// Condition-number ceiling for the normal equations of the `u₀` fit.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative `κ`-sensitivity below which the profile is reported as not
/// identifiable from the data.
const IDENTIFIABILITY_FLOOR: f64 = 1e-8;

/// Data of one injected current.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentData {
    /// Neumann data at the measurement nodes.
    pub f: Vec<f64>,
    /// Harmonic lift `𝔣` at the measurement nodes.
    pub frak_f: Vec<f64>,
    /// `values[p][j] = u(x_j, ω_p)`.
    pub values: Vec<Vec<Complex64>>,
}

/// Complex boundary voltages at `N_d` nodes, `M` frequencies and `P` currents.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiFreqDataset {
    pub nodes: Vec<Point2>,
    /// Quadrature weights of the measurement nodes (for means and norms).
    pub weights: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub k0: f64,
    pub currents: Vec<CurrentData>,
}

impl MultiFreqDataset {
    pub fn new(
        nodes: Vec<Point2>,
        weights: Vec<f64>,
        frequencies: Vec<f64>,
        k0: f64,
        currents: Vec<CurrentData>,
    ) -> Result<Self> {
        let nd = nodes.len();
        let mismatch = |got: usize| Error::DimensionMismatch { expected: nd, got };
        if weights.len() != nd {
            return Err(mismatch(weights.len()));
        }
        if frequencies.is_empty() || frequencies.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidConfig("frequencies must be positive and non-empty".into()));
        }
        let mut sorted = frequencies.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("frequencies must be distinct".into()));
        }
        if !(k0 > 0.0) {
            return Err(Error::InvalidConfig(format!("k₀ must be positive, got {k0}")));
        }
        if currents.is_empty() {
            return Err(Error::InvalidConfig("dataset has no currents".into()));
        }
        for c in &currents {
            if c.f.len() != nd {
                return Err(mismatch(c.f.len()));
            }
            if c.frak_f.len() != nd {
                return Err(mismatch(c.frak_f.len()));
            }
            if c.values.len() != frequencies.len() {
                return Err(Error::DimensionMismatch {
                    expected: frequencies.len(),
                    got: c.values.len(),
                });
            }
            if let Some(row) = c.values.iter().find(|r| r.len() != nd) {
                return Err(mismatch(row.len()));
            }
        }
        Ok(Self {
            nodes,
            weights,
            frequencies,
            k0,
            currents,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_frequencies(&self) -> usize {
        self.frequencies.len()
    }

    pub fn n_currents(&self) -> usize {
        self.currents.len()
    }

    /// Weighted mean removed.
    pub fn center(&self, values: &[f64]) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        let mean = self.weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total;
        values.iter().map(|v| v - mean).collect()
    }

    /// Weighted `L²` norm over the measurement nodes.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Descent variables: `κ` plus `U₀` and one `V` per apriori eigenvalue for
/// every current.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationState {
    pub kappa: [f64; 3],
    /// `λ̃` values, ordered `λ̃₁⁺, λ̃₁⁻, λ̃₂⁺, …`.
    pub lambdas: Vec<f64>,
    /// `u0[i][j]`
    pub u0: Vec<Vec<f64>>,
    /// `v[i][n][j]`
    pub v: Vec<Vec<Vec<f64>>>,
}

impl SeparationState {
    /// `U₀ = 𝔣`, `V = 0`.
    pub fn initial(dataset: &MultiFreqDataset, kappa: [f64; 3], lambdas: &[f64]) -> Result<Self> {
        if let Some(l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidConfig(format!("apriori eigenvalue {l} outside [0, 1]")));
        }
        let nd = dataset.n_nodes();
        Ok(Self {
            kappa,
            lambdas: lambdas.to_vec(),
            u0: dataset.currents.iter().map(|c| c.frak_f.clone()).collect(),
            v: dataset
                .currents
                .iter()
                .map(|_| vec![vec![0.0; nd]; lambdas.len()])
                .collect(),
        })
    }

    /// `3 + P·N_d·(1 + number of λ̃)`.
    pub fn dimension(&self) -> usize {
        3 + self.u0.iter().map(|u| u.len()).sum::<usize>()
            + self.v.iter().flatten().map(|v| v.len()).sum::<usize>()
    }

    /// Flattened `(κ, U₀, V)` in a fixed order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.kappa.to_vec();
        for (u, vs) in self.u0.iter().zip(&self.v) {
            out.extend(u);
            vs.iter().for_each(|v| out.extend(v));
        }
        out
    }

    /// Inverse of [`Self::to_vec`] on a state of the same shape.
    pub fn set_from_slice(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dimension(), "state vector length");
        self.kappa.copy_from_slice(&x[..3]);
        let mut at = 3;
        for (u, vs) in self.u0.iter_mut().zip(self.v.iter_mut()) {
            let n = u.len();
            u.copy_from_slice(&x[at..at + n]);
            at += n;
            for v in vs.iter_mut() {
                let n = v.len();
                v.copy_from_slice(&x[at..at + n]);
                at += n;
            }
        }
    }

    fn check(&self, dataset: &MultiFreqDataset) -> Result<()> {
        let nd = dataset.n_nodes();
        if self.u0.len() != dataset.n_currents() {
            return Err(Error::DimensionMismatch {
                expected: dataset.n_currents(),
                got: self.u0.len(),
            });
        }
        for (u, vs) in self.u0.iter().zip(&self.v) {
            if u.len() != nd {
                return Err(Error::DimensionMismatch { expected: nd, got: u.len() });
            }
            if vs.len() != self.lambdas.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.lambdas.len(),
                    got: vs.len(),
                });
            }
            if let Some(v) = vs.iter().find(|v| v.len() != nd) {
                return Err(Error::DimensionMismatch { expected: nd, got: v.len() });
            }
        }
        Ok(())
    }
}

/// Frequency-dependent model coefficients and their `k`-derivatives.
#[derive(Debug, Clone)]
struct Coefficients {
    q0: Complex64,
    lift: Complex64,
    q: Vec<Complex64>,
    dq0: Complex64,
    dlift: Complex64,
    dq: Vec<Complex64>,
    dk: [Complex64; 3],
}

fn coefficients(kappa: [f64; 3], k0: f64, lambdas: &[f64], omega: f64) -> Coefficients {
    let profile = ConductivityProfile { kappa, k0 };
    let k = profile.k_of_omega(omega);
    let sum = k + k0;
    let lift = 2.0 / sum;
    let dlift = -2.0 / (sum * sum);
    let (q, dq) = lambdas
        .iter()
        .map(|&l| {
            let den = k0 + l * (k - k0);
            (1.0 / den - lift, -l / (den * den) - dlift)
        })
        .unzip();
    Coefficients {
        q0: (k - k0) / (k0 * sum),
        lift,
        q,
        dq0: 2.0 / (sum * sum),
        dlift,
        dq,
        dk: profile.dk_dkappa(omega),
    }
}

/// `q₀(ω)` and `q(λ̃, ω)` for each `λ̃`, the columns of the least-squares
/// matrix.
pub fn model_coefficients(kappa: [f64; 3], k0: f64, lambdas: &[f64], omega: f64) -> (Complex64, Vec<Complex64>) {
    let c = coefficients(kappa, k0, lambdas, omega);
    (c.q0, c.q)
}

fn eval_model(c: &Coefficients, state: &SeparationState, frak: &[f64], i: usize, j: usize) -> Complex64 {
    let mut f = c.q0 * state.u0[i][j] + c.lift * frak[j];
    for (q, v) in c.q.iter().zip(&state.v[i]) {
        f += q * v[j];
    }
    f
}

fn eval_dfdk(c: &Coefficients, state: &SeparationState, frak: &[f64], i: usize, j: usize) -> Complex64 {
    let mut d = c.dq0 * state.u0[i][j] + c.dlift * frak[j];
    for (dq, v) in c.dq.iter().zip(&state.v[i]) {
        d += dq * v[j];
    }
    d
}

/// `F_j` for current `current` at node `j` and frequency index `p`.
pub fn model_f(state: &SeparationState, dataset: &MultiFreqDataset, current: usize, j: usize, p: usize) -> Complex64 {
    let c = coefficients(state.kappa, dataset.k0, &state.lambdas, dataset.frequencies[p]);
    eval_model(&c, state, &dataset.currents[current].frak_f, current, j)
}

fn blocks(dataset: &MultiFreqDataset) -> Vec<(usize, usize)> {
    (0..dataset.n_currents())
        .flat_map(|i| (0..dataset.n_frequencies()).map(move |p| (i, p)))
        .collect()
}

/// `J_m = ½ Σ_i Σ_p Σ_j |u − F|²`.
pub fn objective_jm(state: &SeparationState, dataset: &MultiFreqDataset) -> Result<f64> {
    state.check(dataset)?;
    let parts: Vec<f64> = blocks(dataset)
        .par_iter()
        .map(|&(i, p)| {
            let c = coefficients(state.kappa, dataset.k0, &state.lambdas, dataset.frequencies[p]);
            let cur = &dataset.currents[i];
            (0..dataset.n_nodes())
                .map(|j| (cur.values[p][j] - eval_model(&c, state, &cur.frak_f, i, j)).norm_sqr())
                .sum()
        })
        .collect();
    Ok(0.5 * parts.iter().sum::<f64>())
}

/// Gradient of `J_m` in the layout of [`SeparationState`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationGradient {
    pub kappa: [f64; 3],
    pub u0: Vec<Vec<f64>>,
    pub v: Vec<Vec<Vec<f64>>>,
}

impl SeparationGradient {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.kappa.to_vec();
        for (u, vs) in self.u0.iter().zip(&self.v) {
            out.extend(u);
            vs.iter().for_each(|v| out.extend(v));
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.to_vec().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// `∂J_m/∂θ = −Σ Re(conj(u − F) ∂F/∂θ)` for every real descent variable.
pub fn grad_jm(state: &SeparationState, dataset: &MultiFreqDataset) -> Result<SeparationGradient> {
    state.check(dataset)?;
    let nd = dataset.n_nodes();
    let nl = state.lambdas.len();
    // per (current, frequency): κ part, U₀ part, V parts
    #[allow(clippy::type_complexity)]
    let parts: Vec<([f64; 3], Vec<f64>, Vec<Vec<f64>>)> = blocks(dataset)
        .par_iter()
        .map(|&(i, p)| {
            let c = coefficients(state.kappa, dataset.k0, &state.lambdas, dataset.frequencies[p]);
            let cur = &dataset.currents[i];
            let mut gk = [0.0; 3];
            let mut gu = vec![0.0; nd];
            let mut gv = vec![vec![0.0; nd]; nl];
            for j in 0..nd {
                let r = cur.values[p][j] - eval_model(&c, state, &cur.frak_f, i, j);
                let rc = r.conj();
                let dfdk = eval_dfdk(&c, state, &cur.frak_f, i, j);
                for (g, dk) in gk.iter_mut().zip(&c.dk) {
                    *g -= (rc * dfdk * dk).re;
                }
                gu[j] = -(rc * c.q0).re;
                for (n, q) in c.q.iter().enumerate() {
                    gv[n][j] = -(rc * q).re;
                }
            }
            (gk, gu, gv)
        })
        .collect();
    let mut grad = SeparationGradient {
        kappa: [0.0; 3],
        u0: vec![vec![0.0; nd]; dataset.n_currents()],
        v: vec![vec![vec![0.0; nd]; nl]; dataset.n_currents()],
    };
    for (&(i, _), (gk, gu, gv)) in blocks(dataset).iter().zip(parts) {
        for (a, b) in grad.kappa.iter_mut().zip(gk) {
            *a += b;
        }
        grad.u0[i].iter_mut().zip(gu).for_each(|(a, b)| *a += b);
        for (acc, part) in grad.v[i].iter_mut().zip(gv) {
            acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
    }
    Ok(grad)
}

/// Largest relative sensitivity `‖∂F/∂κ_i‖ / ‖F‖` of the model.
pub fn kappa_sensitivity(state: &SeparationState, dataset: &MultiFreqDataset) -> f64 {
    let (mut sens, mut norm) = ([0.0f64; 3], 0.0f64);
    for (i, p) in blocks(dataset) {
        let c = coefficients(state.kappa, dataset.k0, &state.lambdas, dataset.frequencies[p]);
        let frak = &dataset.currents[i].frak_f;
        for j in 0..dataset.n_nodes() {
            let dfdk = eval_dfdk(&c, state, frak, i, j);
            for (s, dk) in sens.iter_mut().zip(&c.dk) {
                *s += (dfdk * dk).norm_sqr();
            }
            norm += eval_model(&c, state, frak, i, j).norm_sqr();
        }
    }
    sens.iter().fold(0.0f64, |m, s| m.max(*s)).sqrt() / norm.sqrt().max(f64::MIN_POSITIVE)
}

/// Descent direction used by [`run_separation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMethod {
    /// Steepest descent with step `α_m`, halved whenever `J_m` would increase.
    Gradient,
    /// Levenberg-Marquardt: the Gauss-Newton direction with diagonal damping
    /// `μ`, raised whenever `J_m` would increase.
    GaussNewton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationSettings {
    /// Apriori eigenvalues, ordered `λ̃₁⁺, λ̃₁⁻, …`.
    pub lambdas: Vec<f64>,
    pub kappa_init: [f64; 3],
    pub method: SeparationMethod,
    /// Largest step length of the gradient method. The step halves after a
    /// rejected trial and doubles (up to this value) after an accepted one.
    pub alpha: f64,
    /// Initial damping of the Gauss-Newton method, relative to the diagonal.
    pub damping: f64,
    /// Stop when `|∇J_m| < threshold · (1 + J_m)`.
    pub threshold: f64,
    pub max_iter: usize,
    /// Consecutive rejected trials tolerated before giving up.
    pub max_rejections: usize,
}

impl Default for SeparationSettings {
    fn default() -> Self {
        Self {
            lambdas: vec![0.75, 0.25],
            kappa_init: [2.0, 1.0, 2.0],
            method: SeparationMethod::GaussNewton,
            alpha: 1e-2,
            damping: 1.0,
            threshold: 1e-6,
            max_iter: 5000,
            max_rejections: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationIterate {
    pub iter: usize,
    pub jm: f64,
    pub kappa: [f64; 3],
    pub grad_norm: f64,
    /// Step length (gradient method) or damping (Gauss-Newton) in effect.
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct SeparationOutcome {
    pub state: SeparationState,
    /// One record per accepted iterate, starting with the initial state.
    pub history: Vec<SeparationIterate>,
    /// The gradient threshold was reached.
    pub converged: bool,
    /// The data constrain `κ` (false for zero contrast).
    pub identifiable: bool,
}

/// Cholesky factor of `H + εI` (`ε` relative to the mean diagonal), or
/// `None` when `H` vanishes.
fn factor_block(h: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = h.nrows();
    let ridge = 1e-12 * h.trace() / n as f64;
    if !(ridge > 0.0) {
        return None;
    }
    (h + DMatrix::identity(n, n) * ridge).cholesky()
}

/// Marquardt scaling `H + μ diag(H)`.
fn damp(h: &mut DMatrix<f64>, mu: f64) {
    for a in 0..h.nrows() {
        h[(a, a)] *= 1.0 + mu;
    }
}

/// Damped Gauss-Newton direction `H⁻¹∇J_m`. The nodal unknowns `(U₀, V)` of every
/// node share one small diagonal block, so they are eliminated exactly and
/// only a 3×3 Schur complement in `κ` is solved. Without `κ`-sensitivity the
/// `κ` part of the gradient is left unscaled.
fn gauss_newton(
    state: &SeparationState,
    dataset: &MultiFreqDataset,
    grad: &SeparationGradient,
    damping: f64,
) -> SeparationGradient {
    let nl = state.lambdas.len();
    let nb = nl + 1;
    let coeffs: Vec<Coefficients> = dataset
        .frequencies
        .iter()
        .map(|&w| coefficients(state.kappa, dataset.k0, &state.lambdas, w))
        .collect();
    let mut hn = DMatrix::<f64>::zeros(nb, nb);
    for c in &coeffs {
        let cols: Vec<Complex64> = std::iter::once(c.q0).chain(c.q.iter().copied()).collect();
        for a in 0..nb {
            for b in 0..nb {
                hn[(a, b)] += (cols[a].conj() * cols[b]).re;
            }
        }
    }
    damp(&mut hn, damping);
    let node = factor_block(hn);
    // per node: coupling block H_{κ,b} (3 × nb)
    let mut hkk = DMatrix::<f64>::zeros(3, 3);
    let mut schur = DMatrix::<f64>::zeros(3, 3);
    let mut rhs = DVector::from_column_slice(&grad.kappa);
    let mut couplings = Vec::with_capacity(dataset.n_currents() * dataset.n_nodes());
    for (i, cur) in dataset.currents.iter().enumerate() {
        for j in 0..dataset.n_nodes() {
            let mut hkb = DMatrix::<f64>::zeros(3, nb);
            for c in &coeffs {
                let d = eval_dfdk(c, state, &cur.frak_f, i, j);
                let dk = c.dk.map(|k| d * k);
                let cols = std::iter::once(c.q0).chain(c.q.iter().copied());
                for (b, col) in cols.enumerate() {
                    for a in 0..3 {
                        hkb[(a, b)] += (dk[a].conj() * col).re;
                    }
                }
                for a in 0..3 {
                    for b in 0..3 {
                        hkk[(a, b)] += (dk[a].conj() * dk[b]).re;
                    }
                }
            }
            if let Some(chol) = &node {
                let gb = DVector::from_iterator(
                    nb,
                    std::iter::once(grad.u0[i][j]).chain((0..nl).map(|n| grad.v[i][n][j])),
                );
                schur -= &hkb * chol.solve(&hkb.transpose());
                rhs -= &hkb * chol.solve(&gb);
            }
            couplings.push(hkb);
        }
    }
    damp(&mut hkk, damping);
    schur += hkk;
    let mut out = grad.clone();
    // the Schur complement can be tiny but slightly indefinite from rounding
    let schur = 0.5 * (&schur + schur.transpose());
    let dk = match factor_block(schur) {
        Some(chol) => chol.solve(&rhs),
        None => DVector::from_column_slice(&grad.kappa),
    };
    out.kappa.copy_from_slice(dk.as_slice());
    let mut at = 0;
    for (i, (u, vs)) in out.u0.iter_mut().zip(out.v.iter_mut()).enumerate() {
        for j in 0..u.len() {
            let hkb = &couplings[at];
            at += 1;
            let Some(chol) = &node else { continue };
            let gb = DVector::from_iterator(
                nb,
                std::iter::once(grad.u0[i][j]).chain((0..nl).map(|n| grad.v[i][n][j])),
            );
            let x = chol.solve(&(gb - hkb.transpose() * &dk));
            u[j] = x[0];
            for n in 0..nl {
                vs[n][j] = x[n + 1];
            }
        }
    }
    out
}

fn project_kappa(kappa: &mut [f64; 3]) {
    kappa[0] = kappa[0].max(1e-6);
    kappa[1] = kappa[1].max(0.0);
    kappa[2] = kappa[2].max(1e-6);
}

/// Descent on `J_m` from `U₀ = 𝔣`, `V = 0`; a trial that would increase `J_m`
/// is rejected and retried with a shorter step (or stronger damping).
pub fn run_separation(dataset: &MultiFreqDataset, settings: &SeparationSettings) -> Result<SeparationOutcome> {
    if dataset.n_frequencies() < 2 {
        return Err(Error::InvalidConfig("profile separation needs at least two frequencies".into()));
    }
    if !(settings.alpha > 0.0) || !(settings.damping > 0.0) || !(settings.threshold > 0.0) {
        return Err(Error::InvalidConfig(
            "separation step, damping and threshold must be positive".into(),
        ));
    }
    let gauss_newton_mode = settings.method == SeparationMethod::GaussNewton;
    let mut state = SeparationState::initial(dataset, settings.kappa_init, &settings.lambdas)?;
    project_kappa(&mut state.kappa);
    let mut jm = objective_jm(&state, dataset)?;
    let mut step = if gauss_newton_mode { settings.damping } else { settings.alpha };
    let mut history = Vec::new();
    let mut converged = false;
    for iter in 0..=settings.max_iter {
        let grad = grad_jm(&state, dataset)?;
        let gnorm = grad.norm();
        history.push(SeparationIterate {
            iter,
            jm,
            kappa: state.kappa,
            grad_norm: gnorm,
            step,
        });
        if !jm.is_finite() || !gnorm.is_finite() {
            return Err(Error::Diverged(format!("non-finite J_m at iteration {iter}")));
        }
        if gnorm < settings.threshold * (1.0 + jm) {
            converged = true;
            break;
        }
        if iter == settings.max_iter {
            break;
        }
        let x = state.to_vec();
        let mut rejections = 0;
        loop {
            let (dir, scale) = if gauss_newton_mode {
                (gauss_newton(&state, dataset, &grad, step).to_vec(), 1.0)
            } else {
                (grad.to_vec(), step)
            };
            let trial_x: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a - scale * b).collect();
            let mut trial = state.clone();
            trial.set_from_slice(&trial_x);
            project_kappa(&mut trial.kappa);
            let trial_j = objective_jm(&trial, dataset)?;
            if trial_j <= jm {
                state = trial;
                jm = trial_j;
                step = if gauss_newton_mode {
                    (step / 3.0).max(1e-12)
                } else {
                    (2.0 * step).min(settings.alpha)
                };
                break;
            }
            rejections += 1;
            step = if gauss_newton_mode { step * 4.0 } else { step * 0.5 };
            if rejections >= settings.max_rejections {
                return Err(Error::Diverged(format!(
                    "J_m increased for {rejections} consecutive trials at iteration {iter}"
                )));
            }
        }
    }
    let identifiable = kappa_sensitivity(&state, dataset) > IDENTIFIABILITY_FLOOR;
    Ok(SeparationOutcome {
        state,
        history,
        converged,
        identifiable,
    })
}

#[derive(Debug, Clone)]
pub struct U0Recovery {
    /// Real part of the first component, re-centered.
    pub u0: Vec<f64>,
    /// Real parts of the mode components `v_n`.
    pub modes: Vec<Vec<f64>>,
    /// `‖Im u₀‖ / ‖Re u₀‖` before re-centering.
    pub imag_ratio: f64,
    /// Condition number of `LᴴL`.
    pub condition: f64,
}

/// Per-node least-squares fit `V(x) = (LᴴL)⁺ Lᴴ ũ(x)` with `κ` frozen.
pub fn lsq_recover_u0(
    dataset: &MultiFreqDataset,
    current: usize,
    kappa: [f64; 3],
    lambdas: &[f64],
) -> Result<U0Recovery> {
    let cur = dataset
        .currents
        .get(current)
        .ok_or_else(|| Error::InvalidConfig(format!("no current with index {current}")))?;
    let (m, cols) = (dataset.n_frequencies(), 1 + lambdas.len());
    if m < cols {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let mut l = DMatrix::<Complex64>::zeros(m, cols);
    let mut lift = Vec::with_capacity(m);
    for (p, &omega) in dataset.frequencies.iter().enumerate() {
        let c = coefficients(kappa, dataset.k0, lambdas, omega);
        l[(p, 0)] = c.q0;
        for (n, q) in c.q.iter().enumerate() {
            l[(p, n + 1)] = *q;
        }
        lift.push(c.lift);
    }
    let lh = l.adjoint();
    let normal = &lh * &l;
    let svd = normal.clone().svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), s| (hi.max(*s), lo.min(*s)));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let pinv = svd
        .pseudo_inverse(smax * f64::EPSILON)
        .map_err(|e| Error::IllConditioned(if e.is_empty() { condition } else { f64::INFINITY }))?;
    let solve = pinv * lh;
    let nd = dataset.n_nodes();
    let mut re = vec![vec![0.0; nd]; cols];
    let mut im0 = vec![0.0; nd];
    for j in 0..nd {
        let rhs = DVector::from_iterator(m, (0..m).map(|p| cur.values[p][j] - lift[p] * cur.frak_f[j]));
        let x = &solve * rhs;
        for c in 0..cols {
            re[c][j] = x[c].re;
        }
        im0[j] = x[0].im;
    }
    let imag_ratio = dataset.l2_norm(&dataset.center(&im0)) / dataset.l2_norm(&re[0]).max(f64::MIN_POSITIVE);
    let u0 = dataset.center(&re[0]);
    let modes = re.into_iter().skip(1).map(|v| dataset.center(&v)).collect();
    Ok(U0Recovery {
        u0,
        modes,
        imag_ratio,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ForwardSolver;
    use crate::geometry::StarShape;

    struct Disk {
        data: MultiFreqDataset,
        u0: Vec<f64>,
    }

    // Concentric disks of radii 2 and 1 with f = cos θ: a single mode, λ = 5/8.
    fn disk_data(kappa: [f64; 3], freqs: &[f64], contrast: bool) -> Disk {
        let omega = StarShape::disk(Point2::zeros(), 2.0, 0).curve(64).unwrap();
        let d = StarShape::disk(Point2::zeros(), 1.0, 0).curve(64).unwrap();
        let solver = ForwardSolver::from_curves(&omega, &d).unwrap();
        let f: Vec<f64> = omega.params().iter().map(|t| t.cos()).collect();
        let frak = solver.harmonic_lift(&f).unwrap();
        let profile = ConductivityProfile::new(kappa, 1.0).unwrap();
        let values = freqs
            .iter()
            .map(|&w| {
                if contrast {
                    solver.solve_transmission(profile.k_of_omega(w), 1.0, &f).unwrap().trace
                } else {
                    frak.iter().map(|v| Complex64::from(*v)).collect()
                }
            })
            .collect();
        let u0 = solver.solve_perfect_conductor(&f).unwrap().trace;
        let current = CurrentData { f, frak_f: frak, values };
        let data = MultiFreqDataset::new(
            omega.nodes().to_vec(),
            omega.weights().to_vec(),
            freqs.to_vec(),
            1.0,
            vec![current],
        )
        .unwrap();
        Disk { data, u0 }
    }

    const KAPPA: [f64; 3] = [3.0, 2.0, 1.0];
    const FREQS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

    fn exact_state(disk: &Disk) -> SeparationState {
        let mut s = SeparationState::initial(&disk.data, KAPPA, &[0.625]).unwrap();
        s.u0[0] = disk.u0.clone();
        s.v[0][0] = disk.data.currents[0].frak_f.iter().zip(&disk.u0).map(|(a, b)| a - b).collect();
        s
    }

    #[test]
    fn exact_model_has_zero_residual_and_gradient() {
        let disk = disk_data(KAPPA, &FREQS, true);
        let s = exact_state(&disk);
        assert!(objective_jm(&s, &disk.data).unwrap() < 1e-20);
        assert!(grad_jm(&s, &disk.data).unwrap().norm() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let disk = disk_data(KAPPA, &FREQS, true);
        let mut s = exact_state(&disk);
        s.kappa = [2.2, 1.3, 1.7];
        s.lambdas = vec![0.7, 0.3];
        s.v[0].push(disk.u0.iter().map(|v| 0.3 * v).collect());
        s.u0[0].iter_mut().enumerate().for_each(|(j, v)| *v += 0.1 * (j as f64).sin());
        let g = grad_jm(&s, &disk.data).unwrap().to_vec();
        let x = s.to_vec();
        let nd = disk.data.n_nodes();
        for idx in [0, 1, 2, 3, 3 + nd / 3, 3 + nd + 5, 3 + 2 * nd + 17] {
            let h = 1e-6 * (1.0 + x[idx].abs());
            let mut plus = s.clone();
            let mut minus = s.clone();
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[idx] += h;
            xm[idx] -= h;
            plus.set_from_slice(&xp);
            minus.set_from_slice(&xm);
            let fd = (objective_jm(&plus, &disk.data).unwrap() - objective_jm(&minus, &disk.data).unwrap()) / (2.0 * h);
            assert!((fd - g[idx]).abs() < 1e-6 * (1.0 + g[idx].abs()), "index {idx}: {fd} vs {}", g[idx]);
        }
    }

    #[test]
    fn descent_decreases_objective() {
        let disk = disk_data(KAPPA, &FREQS, true);
        for method in [SeparationMethod::Gradient, SeparationMethod::GaussNewton] {
            let settings = SeparationSettings { max_iter: 300, method, ..Default::default() };
            let out = run_separation(&disk.data, &settings).unwrap();
            assert!(out.history.windows(2).all(|w| w[1].jm <= w[0].jm));
            assert!(out.history.last().unwrap().jm < 0.5 * out.history[0].jm);
            assert!(out.identifiable);
            assert!(out.state.kappa.iter().all(|k| *k >= 0.0));
        }
    }

    #[test]
    fn gauss_newton_recovers_disk_profile() {
        // with the exact eigenvalue the model is exact, so κ is recovered
        let disk = disk_data(KAPPA, &FREQS, true);
        let settings = SeparationSettings { lambdas: vec![0.625], ..Default::default() };
        let out = run_separation(&disk.data, &settings).unwrap();
        assert!(out.converged);
        for (k, t) in out.state.kappa.iter().zip(KAPPA) {
            assert!((k - t).abs() < 1e-4, "{:?}", out.state.kappa);
        }
    }

    #[test]
    fn zero_contrast_stops_immediately() {
        let disk = disk_data([1.0, 0.0, 1.0], &FREQS, false);
        let out = run_separation(&disk.data, &SeparationSettings::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.history.len(), 1);
        assert!(!out.identifiable);
    }

    #[test]
    fn least_squares_recovers_disk_trace() {
        let disk = disk_data(KAPPA, &FREQS, true);
        let rec = lsq_recover_u0(&disk.data, 0, KAPPA, &[0.625]).unwrap();
        let err: Vec<f64> = rec.u0.iter().zip(&disk.u0).map(|(a, b)| a - b).collect();
        let rel = disk.data.l2_norm(&err) / disk.data.l2_norm(&disk.u0);
        assert!(rel < 1e-6, "relative error {rel}");
        assert!(rec.imag_ratio < 1e-6);
        assert!(rec.condition < MAX_CONDITION);
    }

    #[test]
    fn single_frequency_is_ill_conditioned() {
        let disk = disk_data(KAPPA, &[1.0], true);
        assert!(matches!(
            lsq_recover_u0(&disk.data, 0, KAPPA, &[0.625]),
            Err(Error::IllConditioned(_))
        ));
        assert!(run_separation(&disk.data, &SeparationSettings::default()).is_err());
    }

    #[test]
    fn scaling_the_current_scales_the_fit() {
        let disk = disk_data(KAPPA, &FREQS, true);
        let mut scaled = disk.data.clone();
        let c = 3.5;
        for cur in &mut scaled.currents {
            cur.f.iter_mut().for_each(|v| *v *= c);
            cur.frak_f.iter_mut().for_each(|v| *v *= c);
            cur.values.iter_mut().flatten().for_each(|v| *v *= c);
        }
        let a = lsq_recover_u0(&disk.data, 0, KAPPA, &[0.625]).unwrap();
        let b = lsq_recover_u0(&scaled, 0, KAPPA, &[0.625]).unwrap();
        for (x, y) in a.u0.iter().zip(&b.u0) {
            assert!((c * x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
        let s = SeparationState::initial(&disk.data, [2.0, 1.0, 2.0], &[0.75, 0.25]).unwrap();
        let t = SeparationState::initial(&scaled, [2.0, 1.0, 2.0], &[0.75, 0.25]).unwrap();
        let (ja, jb) = (objective_jm(&s, &disk.data).unwrap(), objective_jm(&t, &scaled).unwrap());
        assert!((c * c * ja - jb).abs() < 1e-12 * jb);
    }
}
