//! Experiment configuration.
//!
//! The file format is TOML restricted to `key = value` lines; sections are
//! written with dotted keys (`shape.alpha = 0.5`) or `[shape]` headers.
//! Unknown keys are rejected. Every field has a default, and the defaults
//! describe the reference benchmark (ellipse body with semi-axes 4 and 3,
//! κ = (3, 2, 1), frequencies 1..8, currents `⟨e₁,ν⟩`, `⟨e₂,ν⟩`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ConductivityProfile;
use crate::separation::{SeparationMethod, SeparationSettings};
use crate::shape::ShapeSettings;

use super::targets::TargetKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// Centered ellipse with semi-axes `a1`, `a2`.
    Ellipse,
    /// Star-shaped body with Fourier coefficients `coeffs` about the origin.
    Star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub a1: f64,
    pub a2: f64,
    /// `c₋N..c_N` of the star body (ignored for ellipses).
    pub coeffs: Vec<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            kind: DomainKind::Ellipse,
            a1: 4.0,
            a2: 3.0,
            coeffs: default_star_body(),
        }
    }
}

/// A three-lobed body of mean radius 3.5.
pub fn default_star_body() -> Vec<f64> {
    vec![0.0, 0.0, 0.0, 3.5, 0.0, 0.0, 0.35]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub kind: TargetKind,
    /// Shape file in the text format of [`crate::StarShape::to_text`]; only
    /// read when `kind = "file"`.
    pub path: String,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            kind: TargetKind::Ellipse,
            path: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub kappa: [f64; 3],
    pub k0: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            kappa: [3.0, 2.0, 1.0],
            k0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentKind {
    /// `⟨e₁, ν⟩`
    E1,
    /// `⟨e₂, ν⟩`
    E2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeConfig {
    /// Nodes on `∂Ω` and `∂D` for data generation.
    pub data: usize,
    /// Measurement nodes on `∂Ω` used by both inversion stages.
    pub inversion: usize,
    /// Nodes on candidate anomalies during shape descent.
    pub anomaly: usize,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            data: 256,
            inversion: 128,
            anomaly: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Relative level of the additive complex Gaussian noise.
    pub level: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { level: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationConfig {
    pub lambdas: Vec<f64>,
    pub kappa_init: [f64; 3],
    pub method: SeparationMethod,
    pub alpha: f64,
    pub damping: f64,
    pub threshold: f64,
    pub max_iter: usize,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        let s = SeparationSettings::default();
        Self {
            lambdas: s.lambdas,
            kappa_init: s.kappa_init,
            method: s.method,
            alpha: s.alpha,
            damping: s.damping,
            threshold: s.threshold,
            max_iter: s.max_iter,
        }
    }
}

impl SeparationConfig {
    pub fn settings(&self) -> SeparationSettings {
        SeparationSettings {
            lambdas: self.lambdas.clone(),
            kappa_init: self.kappa_init,
            method: self.method,
            alpha: self.alpha,
            damping: self.damping,
            threshold: self.threshold,
            max_iter: self.max_iter,
            ..SeparationSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeConfig {
    pub order: usize,
    pub alpha: f64,
    pub delta0: f64,
    pub max_iter: usize,
    pub j_threshold: f64,
    pub max_halvings: usize,
    /// Re-expand about the area centroid when the center lags behind.
    pub recenter: bool,
    /// Exponent of the `(1 + n²)^(−s)` coefficient-gradient weights.
    pub smoothing: f64,
    /// Initial disk.
    pub initial_center: [f64; 2],
    pub initial_radius: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        let s = ShapeSettings::default();
        Self {
            order: s.order,
            alpha: s.alpha,
            delta0: s.delta0,
            max_iter: s.max_iter,
            j_threshold: s.j_threshold,
            max_halvings: s.max_halvings,
            recenter: s.recenter,
            smoothing: s.smoothing,
            initial_center: [0.0, 0.0],
            initial_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub frequencies: Vec<f64>,
    pub currents: Vec<CurrentKind>,
    pub domain: DomainConfig,
    pub target: TargetConfig,
    pub profile: ProfileConfig,
    pub nodes: NodeConfig,
    pub noise: NoiseConfig,
    pub separation: SeparationConfig,
    pub shape: ShapeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            frequencies: (1..=8).map(f64::from).collect(),
            currents: vec![CurrentKind::E1, CurrentKind::E2],
            domain: DomainConfig::default(),
            target: TargetConfig::default(),
            profile: ProfileConfig::default(),
            nodes: NodeConfig::default(),
            noise: NoiseConfig::default(),
            separation: SeparationConfig::default(),
            shape: ShapeConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl ExperimentConfig {
    /// Parses and validates a configuration text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn profile(&self) -> Result<ConductivityProfile> {
        ConductivityProfile::new(self.profile.kappa, self.profile.k0)
    }

    pub fn shape_settings(&self) -> ShapeSettings {
        ShapeSettings {
            order: self.shape.order,
            alpha: self.shape.alpha,
            delta0: self.shape.delta0,
            max_iter: self.shape.max_iter,
            j_threshold: self.shape.j_threshold,
            max_halvings: self.shape.max_halvings,
            anomaly_nodes: self.nodes.anomaly,
            target: None,
            recenter: self.shape.recenter,
            smoothing: self.shape.smoothing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile()?;
        if self.frequencies.len() < 2 {
            return Err(invalid("at least two frequencies are required"));
        }
        if self.frequencies.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("frequencies must be positive"));
        }
        let mut sorted = self.frequencies.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("frequencies must be distinct"));
        }
        if self.currents.is_empty() {
            return Err(invalid("at least one current is required"));
        }
        let n = &self.nodes;
        for (name, v) in [("nodes.data", n.data), ("nodes.inversion", n.inversion), ("nodes.anomaly", n.anomaly)] {
            if v < 64 || v % 2 != 0 {
                return Err(invalid(format!("{name} must be even and at least 64, got {v}")));
            }
        }
        if n.data < 2 * n.inversion {
            return Err(invalid("nodes.data must be at least twice nodes.inversion"));
        }
        match self.domain.kind {
            DomainKind::Ellipse if !(self.domain.a1 > 0.0 && self.domain.a2 > 0.0) => {
                return Err(invalid("ellipse semi-axes must be positive"));
            }
            DomainKind::Star if self.domain.coeffs.len().is_multiple_of(2) => {
                return Err(invalid("domain.coeffs needs 2N+1 entries"));
            }
            _ => {}
        }
        if !(self.noise.level >= 0.0) {
            return Err(invalid("noise.level must be non-negative"));
        }
        let s = &self.separation;
        if s.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(invalid("separation.lambdas must lie in [0, 1]"));
        }
        if !(s.alpha > 0.0 && s.damping > 0.0 && s.threshold > 0.0) {
            return Err(invalid("separation.alpha, damping and threshold must be positive"));
        }
        let b = &self.shape;
        if !(b.alpha > 0.0 && b.delta0 >= 0.0 && b.initial_radius > 0.0 && b.j_threshold >= 0.0 && b.smoothing >= 0.0) {
            return Err(invalid("shape.alpha and shape.initial_radius must be positive, delta0 non-negative"));
        }
        if self.target.kind == TargetKind::File && self.target.path.is_empty() {
            return Err(invalid("target.path is required when target.kind = \"file\""));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.frequencies, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(cfg.separation.lambdas, vec![0.75, 0.25]);
        assert_eq!(cfg.shape.order, 15);
    }

    #[test]
    fn dotted_keys_override_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "seed = 7\nshape.alpha = 0.25\ntarget.kind = \"square\"\nprofile.kappa = [2.0, 1.0, 0.5]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.shape.alpha, 0.25);
        assert_eq!(cfg.target.kind, TargetKind::Square);
        assert_eq!(cfg.profile.kappa, [2.0, 1.0, 0.5]);
        assert_eq!(cfg.nodes.inversion, 128);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml_str("shape.alpah = 1.0"), Err(Error::Parse(_))));
        assert!(matches!(ExperimentConfig::from_toml_str("colour = 1"), Err(Error::Parse(_))));
        assert!(matches!(
            ExperimentConfig::from_toml_str("frequencies = [1.0]"),
            Err(Error::InvalidConfig(_))
        ));
        assert!(ExperimentConfig::from_toml_str("nodes.data = 128").is_err());
        assert!(ExperimentConfig::from_toml_str("profile.kappa = [3.0, 2.0, -1.0]").is_err());
    }
}
