//! Benchmark anomalies and body shapes.
//!
//! Targets are Fourier fits (order [`TARGET_ORDER`]) of simple analytic
//! polar radius functions; the fitted star shape is what the data are
//! generated from and what reconstructions are scored against.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Curve, CurveSource, EllipseDomain, Point2, StarShape};

use super::config::{DomainKind, ExperimentConfig};

/// Harmonic order of the target fits.
pub const TARGET_ORDER: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Rotated ellipse, semi-axes 1.4 and 0.8, off center.
    Ellipse,
    /// Rotated square of half-side 0.9.
    Square,
    /// Concave peanut close to the upper right part of the body.
    NearBoundary,
    /// Small three-lobed inclusion near the center.
    SmallCentral,
    /// Read from `target.path`.
    File,
}

impl TargetKind {
    pub const BENCHMARKS: [TargetKind; 4] = [
        TargetKind::Ellipse,
        TargetKind::Square,
        TargetKind::NearBoundary,
        TargetKind::SmallCentral,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TargetKind::Ellipse => "ellipse",
            TargetKind::Square => "square",
            TargetKind::NearBoundary => "near_boundary",
            TargetKind::SmallCentral => "small_central",
            TargetKind::File => "file",
        }
    }
}

fn ellipse_radius(a: f64, b: f64, tilt: f64) -> impl Fn(f64) -> f64 {
    move |t| {
        let s = t - tilt;
        1.0 / ((s.cos() / a).powi(2) + (s.sin() / b).powi(2)).sqrt()
    }
}

/// Built-in target shape; `File` targets are loaded by [`target_shape`].
pub fn benchmark_target(kind: TargetKind) -> Option<StarShape> {
    let shape = match kind {
        TargetKind::Ellipse => StarShape::fit(Point2::new(0.6, 0.4), TARGET_ORDER, ellipse_radius(1.4, 0.8, PI / 6.0)),
        TargetKind::Square => StarShape::fit(Point2::new(-0.4, 0.3), TARGET_ORDER, |t| {
            let s = t - PI / 9.0;
            0.9 / s.cos().abs().max(s.sin().abs())
        }),
        TargetKind::NearBoundary => StarShape::fit(Point2::new(1.84, 1.77), TARGET_ORDER, |t| {
            0.6 * (1.0 + 0.3 * (2.0 * (t + 0.46)).cos())
        }),
        TargetKind::SmallCentral => {
            StarShape::fit(Point2::new(0.15, -0.1), TARGET_ORDER, |t| 0.35 * (1.0 + 0.15 * (3.0 * t).cos()))
        }
        TargetKind::File => return None,
    };
    Some(shape)
}

/// The configured target.
pub fn target_shape(cfg: &ExperimentConfig) -> Result<StarShape> {
    match benchmark_target(cfg.target.kind) {
        Some(shape) => Ok(shape),
        None => {
            let path = Path::new(&cfg.target.path);
            if !path.exists() {
                return Err(Error::MissingArtifact(path.to_path_buf()));
            }
            StarShape::from_text(&std::fs::read_to_string(path)?)
        }
    }
}

/// The configured body boundary sampled at `n_nodes` with grid offset `shift`.
pub fn domain_curve(cfg: &ExperimentConfig, n_nodes: usize, shift: f64) -> Result<Curve> {
    match cfg.domain.kind {
        DomainKind::Ellipse => EllipseDomain::new(cfg.domain.a1, cfg.domain.a2).curve(n_nodes, shift),
        DomainKind::Star => {
            let body = StarShape::new(Point2::zeros(), cfg.domain.coeffs.clone())?;
            Curve::sample(CurveSource::Star(body), n_nodes, shift)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::is_inside;

    #[test]
    fn benchmark_targets_are_admissible() {
        let mut cfg = ExperimentConfig::default();
        for kind in [DomainKind::Ellipse, DomainKind::Star] {
            cfg.domain.kind = kind;
            let omega = domain_curve(&cfg, 256, 0.0).unwrap();
            for t in TargetKind::BENCHMARKS {
                // the near-boundary target is placed against the ellipse body
                if kind == DomainKind::Star && t == TargetKind::NearBoundary {
                    continue;
                }
                let curve = benchmark_target(t).unwrap().curve(256).unwrap();
                assert!(is_inside(&omega, &curve, 0.3), "{} in {kind:?}", t.label());
            }
        }
    }

    #[test]
    fn near_boundary_target_is_near_the_boundary_and_concave() {
        let cfg = ExperimentConfig::default();
        let omega = domain_curve(&cfg, 512, 0.0).unwrap();
        let curve = benchmark_target(TargetKind::NearBoundary).unwrap().curve(256).unwrap();
        let gap = curve.nodes().iter().map(|p| omega.distance_to(p)).fold(f64::INFINITY, f64::min);
        assert!(gap < 0.5, "gap {gap}");
        assert!(curve.curvature().iter().any(|k| *k < 0.0));
    }

    #[test]
    fn file_target_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shape.txt");
        let shape = StarShape::disk(Point2::new(0.5, 0.0), 0.7, 2);
        std::fs::write(&path, shape.to_text()).unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.target.kind = TargetKind::File;
        cfg.target.path = path.display().to_string();
        assert_eq!(target_shape(&cfg).unwrap(), shape);
        cfg.target.path = dir.path().join("absent.txt").display().to_string();
        assert!(matches!(target_shape(&cfg), Err(Error::MissingArtifact(_))));
    }
}
