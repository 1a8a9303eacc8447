//! Stage drivers and the run report.
//!
//! Every stage reads its inputs from and writes its outputs to one run
//! directory, so stages can be run separately from the command line and a
//! failed run keeps whatever was produced before the failure.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::forward::{DomainOperators, ForwardSolver};
use crate::geometry::{shape_symmetric_difference, Curve, CurveSource, Point2, StarShape};
use crate::separation::{lsq_recover_u0, run_separation, SeparationOutcome, U0Recovery};
use crate::shape::{run_shape_descent, CauchyData, CauchyPair, ShapeDescentState, StopReason};
use crate::spectrum::{decomposition_residual, estimate_spectrum};

use super::config::ExperimentConfig;
use super::io::{self, num};
use super::plot::emit_plots;
use super::synthetic::{current_values, generate_synthetic, SyntheticData};
use super::targets::{domain_curve, target_shape};

/// The measurement curve of the configured body.
pub fn measurement_curve(cfg: &ExperimentConfig) -> Result<Curve> {
    domain_curve(cfg, cfg.nodes.inversion, 0.0)
}

/// Generates the dataset and its ground-truth sidecars.
pub fn run_generate(cfg: &ExperimentConfig, dir: &Path) -> Result<SyntheticData> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(io::CONFIG), cfg.to_toml_string())?;
    let data = generate_synthetic(cfg)?;
    let curve = measurement_curve(cfg)?;
    io::write_dataset(dir, &data.dataset)?;
    io::write_traces(&dir.join(io::TRUTH_U0), &curve, &data.u0_true)?;
    io::write_shape(&dir.join(io::TARGET_SHAPE), &data.target)?;
    Ok(data)
}

#[derive(Debug, Clone)]
pub struct StageAResult {
    pub outcome: SeparationOutcome,
    pub recoveries: Vec<U0Recovery>,
}

/// Profile separation followed by the least-squares `u₀` recovery per current.
pub fn run_stage_a(cfg: &ExperimentConfig, dir: &Path) -> Result<StageAResult> {
    cfg.validate()?;
    let curve = measurement_curve(cfg)?;
    let dataset = io::read_dataset(dir, &curve, cfg.profile.k0)?;
    let settings = cfg.separation.settings();
    let outcome = run_separation(&dataset, &settings)?;
    io::write_kappa_history(&dir.join(io::KAPPA_ITERATES), &outcome.history)?;
    let recoveries = (0..dataset.n_currents())
        .map(|i| lsq_recover_u0(&dataset, i, outcome.state.kappa, &settings.lambdas))
        .collect::<Result<Vec<_>>>()?;
    let traces: Vec<Vec<f64>> = recoveries.iter().map(|r| r.u0.clone()).collect();
    io::write_traces(&dir.join(io::U0_RECOVERED), &curve, &traces)?;
    io::write_csv(
        &dir.join(io::U0_DIAGNOSTICS),
        &["current", "imag_ratio", "condition"],
        recoveries
            .iter()
            .enumerate()
            .map(|(i, r)| vec![i.to_string(), num(r.imag_ratio), num(r.condition)]),
    )?;
    Ok(StageAResult { outcome, recoveries })
}

/// Shape descent from the configured initial disk, driven by the recovered
/// traces or, with `bypass`, by the true ones.
pub fn run_stage_b(cfg: &ExperimentConfig, dir: &Path, bypass: bool) -> Result<ShapeDescentState> {
    cfg.validate()?;
    let curve = measurement_curve(cfg)?;
    let source = if bypass { io::TRUTH_U0 } else { io::U0_RECOVERED };
    let traces = io::read_traces(&dir.join(source), &curve)?;
    let dataset = io::read_dataset(dir, &curve, cfg.profile.k0)?;
    if traces.len() != dataset.n_currents() {
        return Err(Error::DimensionMismatch { expected: dataset.n_currents(), got: traces.len() });
    }
    let pairs = dataset
        .currents
        .iter()
        .zip(traces)
        .map(|(c, u)| CauchyPair { f: c.f.clone(), u_meas: u })
        .collect();
    let cauchy = CauchyData::new(Arc::new(DomainOperators::new(curve)?), pairs)?;
    let mut settings = cfg.shape_settings();
    let target_path = dir.join(io::TARGET_SHAPE);
    settings.target = if target_path.exists() { Some(io::read_shape(&target_path)?) } else { None };
    let [cx, cy] = cfg.shape.initial_center;
    let initial = StarShape::disk(Point2::new(cx, cy), cfg.shape.initial_radius, cfg.shape.order);
    let state = run_shape_descent(&initial, &cauchy, &settings)?;
    io::write_shape_history(&dir.join(io::SHAPE_HISTORY), &state.history)?;
    io::write_shape(&dir.join(io::SHAPE_FINAL), &state.shape)?;
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub generate: f64,
    pub stage_a: f64,
    pub stage_b: f64,
    pub plots: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub kappa_true: [f64; 3],
    /// `None` when Stage A was bypassed.
    pub kappa: Option<[f64; 3]>,
    pub stage_a_iterations: Option<usize>,
    /// `‖u₀ − u₀_true‖_{L²(∂Ω)}` per current.
    pub u0_errors: Vec<f64>,
    pub u0_relative_errors: Vec<f64>,
    pub imag_ratios: Vec<f64>,
    pub stage_b_iterations: usize,
    pub final_j: f64,
    pub symdiff: f64,
    pub stop: StopReason,
    pub bypass: bool,
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn kappa_errors(&self) -> Option<[f64; 3]> {
        self.kappa.map(|k| [0, 1, 2].map(|i| (k[i] - self.kappa_true[i]).abs()))
    }

    /// Rows of `report.csv`. Timings are kept out so reports are reproducible.
    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![("bypass".to_string(), self.bypass.to_string())];
        for (i, v) in self.kappa_true.iter().enumerate() {
            rows.push((format!("kappa{}_true", i + 1), num(*v)));
        }
        if let (Some(k), Some(e)) = (self.kappa, self.kappa_errors()) {
            for i in 0..3 {
                rows.push((format!("kappa{}", i + 1), num(k[i])));
                rows.push((format!("kappa{}_error", i + 1), num(e[i])));
            }
        }
        if let Some(n) = self.stage_a_iterations {
            rows.push(("stage_a_iterations".into(), n.to_string()));
        }
        for (i, ((e, r), q)) in self.u0_errors.iter().zip(&self.u0_relative_errors).zip(&self.imag_ratios).enumerate() {
            rows.push((format!("u0_error_{i}"), num(*e)));
            rows.push((format!("u0_relative_error_{i}"), num(*r)));
            rows.push((format!("u0_imag_ratio_{i}"), num(*q)));
        }
        rows.push(("stage_b_iterations".into(), self.stage_b_iterations.to_string()));
        rows.push(("final_J".into(), num(self.final_j)));
        rows.push(("symdiff".into(), num(self.symdiff)));
        rows.push(("stop".into(), self.stop.label().to_string()));
        rows
    }
}

/// Rebuilds the report from the artifacts in `dir`.
pub fn compute_report(cfg: &ExperimentConfig, dir: &Path, bypass: bool) -> Result<RunReport> {
    let curve = measurement_curve(cfg)?;
    let (mut kappa, mut stage_a_iterations) = (None, None);
    let (mut u0_errors, mut u0_relative_errors, mut imag_ratios) = (Vec::new(), Vec::new(), Vec::new());
    if !bypass {
        let history = io::read_kappa_history(&dir.join(io::KAPPA_ITERATES))?;
        let last = history
            .last()
            .ok_or_else(|| Error::Parse(format!("{} has no rows", io::KAPPA_ITERATES)))?;
        kappa = Some(last.kappa);
        stage_a_iterations = Some(last.iter);
        let truth = io::read_traces(&dir.join(io::TRUTH_U0), &curve)?;
        let recovered = io::read_traces(&dir.join(io::U0_RECOVERED), &curve)?;
        for (t, r) in truth.iter().zip(&recovered) {
            let diff: Vec<f64> = t.iter().zip(r).map(|(a, b)| a - b).collect();
            let e = curve.l2_norm(&diff);
            u0_errors.push(e);
            u0_relative_errors.push(e / curve.l2_norm(t));
        }
        imag_ratios = io::read_csv(&dir.join(io::U0_DIAGNOSTICS), &["current", "imag_ratio", "condition"])?
            .into_iter()
            .map(|r| r[1])
            .collect();
    }
    let history = io::read_shape_history(&dir.join(io::SHAPE_HISTORY))?;
    let last = history
        .last()
        .ok_or_else(|| Error::Parse(format!("{} has no rows", io::SHAPE_HISTORY)))?;
    let target = io::read_shape(&dir.join(io::TARGET_SHAPE))?;
    let recon = io::read_shape(&dir.join(io::SHAPE_FINAL))?;
    let stop = if last.j < cfg.shape.j_threshold {
        StopReason::Converged
    } else if last.iter >= cfg.shape.max_iter {
        StopReason::MaxIterations
    } else {
        StopReason::Stalled
    };
    Ok(RunReport {
        kappa_true: cfg.profile.kappa,
        kappa,
        stage_a_iterations,
        u0_errors,
        u0_relative_errors,
        imag_ratios,
        stage_b_iterations: last.iter,
        final_j: last.j,
        symdiff: shape_symmetric_difference(&target, &recon)?,
        stop,
        bypass,
        timings: None,
    })
}

fn write_timings(dir: &Path, t: &Timings) -> Result<()> {
    io::write_key_values(
        &dir.join(io::TIMING),
        &[
            ("generate_s".into(), format!("{:.3}", t.generate)),
            ("stage_a_s".into(), format!("{:.3}", t.stage_a)),
            ("stage_b_s".into(), format!("{:.3}", t.stage_b)),
            ("plots_s".into(), format!("{:.3}", t.plots)),
        ],
    )
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// Generation, Stage A (unless bypassed), Stage B, report and figures.
/// On failure the artifacts written so far stay in `dir` next to `error.txt`.
pub fn run_full_pipeline(cfg: &ExperimentConfig, dir: &Path, bypass: bool) -> Result<RunReport> {
    let mut t = Timings::default();
    let result = (|| {
        timed(&mut t.generate, || run_generate(cfg, dir))?;
        if !bypass {
            timed(&mut t.stage_a, || run_stage_a(cfg, dir))?;
        }
        timed(&mut t.stage_b, || run_stage_b(cfg, dir, bypass))?;
        let mut report = compute_report(cfg, dir, bypass)?;
        io::write_key_values(&dir.join(io::REPORT), &report.rows())?;
        timed(&mut t.plots, || emit_plots(dir))?;
        write_timings(dir, &t)?;
        report.timings = Some(t);
        Ok(report)
    })();
    if let Err(e) = &result {
        if dir.is_dir() {
            let _ = std::fs::write(dir.join("error.txt"), format!("{e}\n"));
        }
    }
    result
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub mode: usize,
    pub lambda: f64,
    pub family: &'static str,
    /// Worst-case decomposition residual over the configured frequencies for
    /// the first current, truncated after this mode, relative to `‖u‖`.
    pub residual: f64,
}

/// Neumann-Poincaré eigenvalues of the configured target in the body, with
/// the decomposition residual after each mode; writes `spectrum.csv`.
pub fn run_spectrum(cfg: &ExperimentConfig, dir: &Path, n_modes: usize) -> Result<Vec<SpectrumRow>> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let curve = measurement_curve(cfg)?;
    let anomaly = Curve::sample(CurveSource::Star(target_shape(cfg)?), cfg.nodes.anomaly, 0.0)?;
    let solver = ForwardSolver::from_curves(&curve, &anomaly)?;
    let profile = cfg.profile()?;
    let pairs = estimate_spectrum(&solver, n_modes)?;
    let f = current_values(cfg.currents[0], &curve);
    let scale = cfg
        .frequencies
        .iter()
        .map(|&w| {
            let u = solver.solve_transmission(profile.k_of_omega(w), cfg.profile.k0, &f)?.trace;
            Ok(u.iter().map(|v| v.norm_sqr()).zip(curve.weights()).map(|(a, b)| a * b).sum::<f64>().sqrt())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::MIN_POSITIVE, f64::max);
    let rows = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Ok(SpectrumRow {
                mode: i + 1,
                lambda: p.lambda,
                family: p.family.label(),
                residual: decomposition_residual(&solver, &profile, &f, &cfg.frequencies, &pairs, i + 1)? / scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    io::write_csv(
        &dir.join(io::SPECTRUM),
        &["mode", "lambda", "family", "residual"],
        rows.iter()
            .map(|r| vec![r.mode.to_string(), num(r.lambda), r.family.to_string(), num(r.residual)]),
    )?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.nodes.data = 128;
        cfg.nodes.inversion = 64;
        cfg.nodes.anomaly = 64;
        cfg.shape.max_iter = 3;
        cfg.separation.max_iter = 20;
        cfg
    }

    #[test]
    fn stages_need_their_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_config();
        assert!(matches!(run_stage_a(&cfg, dir.path()), Err(Error::MissingArtifact(_))));
        assert!(matches!(run_stage_b(&cfg, dir.path(), true), Err(Error::MissingArtifact(_))));
        assert!(matches!(compute_report(&cfg, dir.path(), true), Err(Error::MissingArtifact(_))));
    }

    #[test]
    fn short_pipeline_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_config();
        let report = run_full_pipeline(&cfg, dir.path(), false).unwrap();
        for name in [
            io::CONFIG,
            io::DATASET,
            io::LIFT,
            io::TRUTH_U0,
            io::TARGET_SHAPE,
            io::KAPPA_ITERATES,
            io::U0_RECOVERED,
            io::U0_DIAGNOSTICS,
            io::SHAPE_HISTORY,
            io::SHAPE_FINAL,
            io::REPORT,
            io::TIMING,
            super::super::plot::OVERLAY,
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        assert_eq!(report.stage_b_iterations, 3);
        assert_eq!(report.stop, StopReason::MaxIterations);
        assert_eq!(report.u0_errors.len(), 2);
        let again = compute_report(&cfg, dir.path(), false).unwrap();
        assert_eq!(again, RunReport { timings: None, ..report });
    }

    #[test]
    fn failure_keeps_partial_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_config();
        // initial disk crossing the body boundary
        cfg.shape.initial_radius = 3.5;
        assert!(run_full_pipeline(&cfg, dir.path(), true).is_err());
        assert!(dir.path().join(io::DATASET).exists());
        assert!(dir.path().join("error.txt").exists());
    }
}
