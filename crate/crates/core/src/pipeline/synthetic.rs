//! Synthetic multifrequency data.
//!
//! Data are computed on a finer boundary discretization than the inversion
//! uses (`nodes.data` nodes on both curves, grids offset by half a step) and
//! brought to the measurement nodes by trigonometric interpolation, so the
//! inversion never sees its own discretization.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{DomainOperators, ForwardSolver};
use crate::geometry::{is_inside, Curve, CurveSource, StarShape};
use crate::periodic::{trig_interpolate, trig_interpolate_real};
use crate::separation::{CurrentData, MultiFreqDataset};

use super::config::{CurrentKind, ExperimentConfig};
use super::targets::{domain_curve, target_shape};

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: MultiFreqDataset,
    /// Perfect-conductor traces per current at the measurement nodes.
    pub u0_true: Vec<Vec<f64>>,
    pub target: StarShape,
}

/// Neumann data of a configured current on a curve.
pub fn current_values(kind: CurrentKind, curve: &Curve) -> Vec<f64> {
    curve
        .normals()
        .iter()
        .map(|n| match kind {
            CurrentKind::E1 => n.x,
            CurrentKind::E2 => n.y,
        })
        .collect()
}

fn center_complex(curve: &Curve, values: &mut [Complex64]) {
    let total: f64 = curve.weights().iter().sum();
    let mean = curve
        .weights()
        .iter()
        .zip(values.iter())
        .map(|(w, v)| v * *w)
        .sum::<Complex64>()
        / total;
    values.iter_mut().for_each(|v| *v -= mean);
}

/// Adds complex Gaussian noise of relative level `level` (with respect to the
/// RMS of each trace) in a fixed order, then re-centers.
pub fn add_noise(dataset: &mut MultiFreqDataset, curve: &Curve, level: f64, seed: u64) {
    if level == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for cur in &mut dataset.currents {
        for trace in &mut cur.values {
            let rms = (trace.iter().map(|v| v.norm_sqr()).sum::<f64>() / trace.len() as f64).sqrt();
            for v in trace.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *v += Complex64::new(re, im) * (level * rms * scale);
            }
            center_complex(curve, trace);
        }
    }
}

/// Forward-simulated dataset for the configured experiment.
pub fn generate_synthetic(cfg: &ExperimentConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let target = target_shape(cfg)?;
    let nd = cfg.nodes.data;
    let shift = PI / nd as f64;
    let omega_data = domain_curve(cfg, nd, shift)?;
    let anomaly = Curve::sample(CurveSource::Star(target.clone()), nd, shift)?;
    if !is_inside(&omega_data, &anomaly, cfg.shape.delta0) {
        return Err(Error::InvalidConfig(format!(
            "target is not inside the body with margin {}",
            cfg.shape.delta0
        )));
    }
    let solver = ForwardSolver::from_curves(&omega_data, &anomaly)?;
    let omega = domain_curve(cfg, cfg.nodes.inversion, 0.0)?;
    let ops = DomainOperators::new(omega.clone())?;
    let profile = cfg.profile()?;
    let k0 = cfg.profile.k0;

    let mut currents = Vec::with_capacity(cfg.currents.len());
    let mut u0_true = Vec::with_capacity(cfg.currents.len());
    for &kind in &cfg.currents {
        let f_data = current_values(kind, &omega_data);
        let f = current_values(kind, &omega);
        let u0 = solver.solve_perfect_conductor(&f_data)?.trace;
        u0_true.push(omega.center_values(&trig_interpolate_real(&u0, shift, omega.params())));
        let values = cfg
            .frequencies
            .par_iter()
            .map(|&w| {
                let trace = solver.solve_transmission(profile.k_of_omega(w), k0, &f_data)?.trace;
                let mut v = trig_interpolate(&trace, shift, omega.params());
                center_complex(&omega, &mut v);
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        currents.push(CurrentData {
            frak_f: ops.harmonic_lift(&f)?,
            f,
            values,
        });
    }
    let mut dataset = MultiFreqDataset::new(
        omega.nodes().to_vec(),
        omega.weights().to_vec(),
        cfg.frequencies.clone(),
        k0,
        currents,
    )?;
    add_noise(&mut dataset, &omega, cfg.noise.level, cfg.seed);
    Ok(SyntheticData {
        dataset,
        u0_true,
        target,
    })
}
