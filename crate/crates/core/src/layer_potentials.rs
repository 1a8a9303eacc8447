//! Nyström discretizations of the 2D Laplace layer potentials with kernel
//! `G(x, y) = (1/2π) log|x − y|`.
//!
//! Self-interaction blocks use the periodic logarithmic product rule (single
//! layer) or the smooth diagonal limit (`K*`). Cross blocks use the trapezoid
//! rule on an oversampled copy of the source curve whenever the target lies
//! within a few node spacings, so near-boundary anomalies stay resolved.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Curve, Point2};
use crate::periodic;

/// Targets closer than this many local node spacings to a source node are
/// rejected by the smooth cross rule.
pub const SEPARATION_GUARD: f64 = 5.0;

/// Largest oversampling factor tried for cross blocks.
pub const MAX_OVERSAMPLING: usize = 16;

const MIN_SELF_NODES: usize = 16;
const INV_2PI: f64 = 0.5 / PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `S φ` on the source curve itself.
    SingleLayer,
    /// `K* φ` on the source curve itself.
    NeumannPoincare,
    /// `∂_ν D φ` on the source curve itself (Maue identity).
    Hypersingular,
    /// `S_src φ` evaluated at target points.
    SingleLayerCross,
    /// `∂_{ν_tgt} S_src φ`.
    SingleLayerNormalCross,
    /// `D_src φ` evaluated at target points.
    DoubleLayerCross,
    /// `∂_{ν_tgt} D_src φ`.
    DoubleLayerNormalCross,
}

/// Dense matrix mapping a density on a source curve to values (or normal
/// derivatives) at target nodes.
#[derive(Debug, Clone)]
pub struct OperatorBlock {
    pub kind: KernelKind,
    pub matrix: DMatrix<f64>,
}

impl OperatorBlock {
    fn new(kind: KernelKind, matrix: DMatrix<f64>) -> Self {
        Self { kind, matrix }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, density: &[f64]) -> Vec<f64> {
        assert_eq!(density.len(), self.cols(), "density length mismatch");
        (&self.matrix * DVector::from_column_slice(density))
            .iter()
            .copied()
            .collect()
    }

    pub fn apply_complex(&self, density: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(density.len(), self.cols(), "density length mismatch");
        (0..self.rows())
            .map(|i| {
                self.matrix
                    .row(i)
                    .iter()
                    .zip(density)
                    .map(|(a, d)| d * *a)
                    .sum()
            })
            .collect()
    }
}

/// Complex density on the nodes of a curve.
#[derive(Debug, Clone)]
pub struct BoundaryDensity<'a> {
    pub curve: &'a Curve,
    pub values: Vec<Complex64>,
}

impl<'a> BoundaryDensity<'a> {
    pub fn new(curve: &'a Curve, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != curve.len() {
            return Err(Error::DimensionMismatch {
                expected: curve.len(),
                got: values.len(),
            });
        }
        Ok(Self { curve, values })
    }

    pub fn from_real(curve: &'a Curve, values: &[f64]) -> Result<Self> {
        Self::new(curve, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// `∫ φ ds`.
    pub fn total(&self) -> Complex64 {
        self.curve
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| v * *w)
            .sum()
    }

    /// True when `|∫ φ ds| ≤ 1e−10 ‖φ‖_{L²}`.
    pub fn is_mean_zero(&self) -> bool {
        let norm = self
            .curve
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt();
        self.total().norm() <= 1e-10 * norm.max(f64::MIN_POSITIVE)
    }
}

fn check_self(curve: &Curve) -> Result<()> {
    if curve.len() < MIN_SELF_NODES {
        return Err(Error::TooFewNodes {
            got: curve.len(),
            min: MIN_SELF_NODES,
        });
    }
    Ok(())
}

/// Single layer `S` on the curve, with the logarithmic singularity integrated
/// by the periodic product rule.
pub fn single_layer_self(curve: &Curve) -> Result<OperatorBlock> {
    check_self(curve)?;
    let n = curve.len();
    let r = periodic::log_weights(n);
    let h = 2.0 * PI / n as f64;
    let (x, t, sp) = (curve.nodes(), curve.params(), curve.speed());
    let m = DMatrix::from_fn(n, n, |i, j| {
        let smooth = if i == j {
            sp[i].ln()
        } else {
            let s = (0.5 * (t[i] - t[j])).sin();
            (x[i] - x[j]).norm().ln() - 0.5 * (4.0 * s * s).ln()
        };
        INV_2PI * (0.5 * r[(i + n - j) % n] + h * smooth) * sp[j]
    });
    Ok(OperatorBlock::new(KernelKind::SingleLayer, m))
}

/// Neumann–Poincaré operator `K*` on the curve; diagonal uses the limit
/// `γ(x)/(4π)` of the smooth kernel.
pub fn kstar_self(curve: &Curve) -> Result<OperatorBlock> {
    check_self(curve)?;
    let n = curve.len();
    let (x, nu, w, g) = (curve.nodes(), curve.normals(), curve.weights(), curve.curvature());
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.5 * INV_2PI * g[i] * w[i]
        } else {
            let d = x[i] - x[j];
            INV_2PI * d.dot(&nu[i]) / d.norm_squared() * w[j]
        }
    });
    Ok(OperatorBlock::new(KernelKind::NeumannPoincare, m))
}

/// Hypersingular operator `∂_ν D` on the curve via Maue's identity
/// `∂_ν D μ = d/ds S (dμ/ds)` with Fourier differentiation.
pub fn hypersingular_self(curve: &Curve) -> Result<OperatorBlock> {
    let s = single_layer_self(curve)?;
    let dt = periodic::derivative_matrix(curve.len());
    let inv_speed = DMatrix::from_diagonal(&DVector::from_iterator(
        curve.len(),
        curve.speed().iter().map(|v| 1.0 / v),
    ));
    let ds = &inv_speed * &dt;
    let m = &ds * &s.matrix * &ds;
    Ok(OperatorBlock::new(KernelKind::Hypersingular, m))
}

/// Source curve used for a smooth cross rule: the original curve, or an
/// oversampled copy together with the interpolation matrix that lifts a
/// density from the original nodes.
struct CrossSource {
    curve: Curve,
    lift: Option<DMatrix<f64>>,
}

impl CrossSource {
    fn finish(&self, fine: DMatrix<f64>) -> DMatrix<f64> {
        match &self.lift {
            Some(p) => fine * p,
            None => fine,
        }
    }
}

/// Smallest ratio `distance / local spacing` over the targets, where the local
/// spacing is the quadrature weight of the nearest source node.
fn separation_ratio(src: &Curve, targets: &[Point2]) -> (f64, f64, f64) {
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    for p in targets {
        let (j, d) = src
            .nodes()
            .iter()
            .enumerate()
            .map(|(j, y)| (j, (p - y).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let spacing = src.weights()[j];
        let ratio = d / spacing;
        if ratio < worst.0 {
            worst = (ratio, d, spacing);
        }
    }
    worst
}

fn cross_source(src: &Curve, targets: &[Point2]) -> Result<CrossSource> {
    let mut factor = 1;
    loop {
        let curve = if factor == 1 {
            src.clone()
        } else {
            src.resample(src.len() * factor)?
        };
        let (ratio, distance, spacing) = separation_ratio(&curve, targets);
        if ratio >= SEPARATION_GUARD {
            let lift = (factor > 1)
                .then(|| periodic::interpolation_matrix(src.len(), src.shift(), curve.params()));
            return Ok(CrossSource { curve, lift });
        }
        if factor >= MAX_OVERSAMPLING {
            return Err(Error::CurvesTouch {
                distance,
                guard: SEPARATION_GUARD * spacing,
            });
        }
        factor *= 2;
    }
}

/// `x ↦ ∫_src ∂_{ν(x)} G(x, z) φ(z) ds(z)` for `x` on the target nodes.
pub fn cross_normal_derivative(src: &Curve, tgt: &Curve) -> Result<OperatorBlock> {
    let source = cross_source(src, tgt.nodes())?;
    let (y, w) = (source.curve.nodes(), source.curve.weights());
    let (x, nu) = (tgt.nodes(), tgt.normals());
    let fine = DMatrix::from_fn(x.len(), y.len(), |i, j| {
        let d = x[i] - y[j];
        INV_2PI * d.dot(&nu[i]) / d.norm_squared() * w[j]
    });
    Ok(OperatorBlock::new(
        KernelKind::SingleLayerNormalCross,
        source.finish(fine),
    ))
}

/// `S_src φ` evaluated at arbitrary points off the source curve.
pub fn single_layer_cross(src: &Curve, points: &[Point2]) -> Result<OperatorBlock> {
    let source = cross_source(src, points)?;
    let (y, w) = (source.curve.nodes(), source.curve.weights());
    let fine = DMatrix::from_fn(points.len(), y.len(), |i, j| {
        INV_2PI * (points[i] - y[j]).norm().ln() * w[j]
    });
    Ok(OperatorBlock::new(KernelKind::SingleLayerCross, source.finish(fine)))
}

/// `D_src φ = ∫ ∂_{ν(z)} G(x, z) φ(z) ds(z)` at arbitrary points off the source
/// curve.
pub fn double_layer_cross(src: &Curve, points: &[Point2]) -> Result<OperatorBlock> {
    let source = cross_source(src, points)?;
    let (y, nu, w) = (
        source.curve.nodes(),
        source.curve.normals(),
        source.curve.weights(),
    );
    let fine = DMatrix::from_fn(points.len(), y.len(), |i, j| {
        let r = y[j] - points[i];
        INV_2PI * r.dot(&nu[j]) / r.norm_squared() * w[j]
    });
    Ok(OperatorBlock::new(KernelKind::DoubleLayerCross, source.finish(fine)))
}

/// `∂_{ν_tgt} D_src φ` at the target nodes.
pub fn double_layer_normal_cross(src: &Curve, tgt: &Curve) -> Result<OperatorBlock> {
    let source = cross_source(src, tgt.nodes())?;
    let (y, nuy, w) = (
        source.curve.nodes(),
        source.curve.normals(),
        source.curve.weights(),
    );
    let (x, nux) = (tgt.nodes(), tgt.normals());
    let fine = DMatrix::from_fn(x.len(), y.len(), |i, j| {
        let r = y[j] - x[i];
        let r2 = r.norm_squared();
        INV_2PI * (-nux[i].dot(&nuy[j]) / r2 + 2.0 * r.dot(&nuy[j]) * r.dot(&nux[i]) / (r2 * r2))
            * w[j]
    });
    Ok(OperatorBlock::new(
        KernelKind::DoubleLayerNormalCross,
        source.finish(fine),
    ))
}

/// Evaluates `S φ` at points away from the density's curve.
pub fn evaluate_single_layer(density: &BoundaryDensity, points: &[Point2]) -> Result<Vec<Complex64>> {
    Ok(single_layer_cross(density.curve, points)?.apply_complex(&density.values))
}

/// Evaluates `D φ` at points away from the density's curve.
pub fn evaluate_double_layer(density: &BoundaryDensity, points: &[Point2]) -> Result<Vec<Complex64>> {
    Ok(double_layer_cross(density.curve, points)?.apply_complex(&density.values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LayerKind {
    Single,
    Double,
}

/// Oversampling factors kept by [`LayerField`].
const FIELD_LEVELS: [usize; 5] = [1, 4, 16, 64, 256];

/// Distance, in local node spacings, beyond which the trapezoid rule is
/// trusted for near-boundary evaluation.
const FIELD_GUARD: f64 = 3.0;

#[derive(Debug, Clone)]
struct FieldPart {
    kind: LayerKind,
    /// `(curve, weighted density, max spacing)` per oversampling level.
    levels: Vec<(Curve, Vec<f64>, f64)>,
}

impl FieldPart {
    fn nearest(&self, p: &Point2) -> (f64, Point2) {
        self.levels[0].0.closest_point(p)
    }

    fn level_for(&self, distance: f64) -> &(Curve, Vec<f64>, f64) {
        self.levels
            .iter()
            .find(|(_, _, h)| distance >= FIELD_GUARD * h)
            .unwrap_or_else(|| self.levels.last().expect("at least one level"))
    }
}

/// Real single- and double-layer densities on a set of curves for pointwise
/// evaluation of the summed potential and its gradient anywhere in the plane
/// (used by volume Monte Carlo estimates).
///
/// Each density is kept on several oversampled grids and every evaluation
/// uses the coarsest grid that resolves the distance to that curve. Points
/// closer than the finest resolvable distance are pushed out to it.
#[derive(Debug, Clone, Default)]
pub struct LayerField {
    parts: Vec<FieldPart>,
}

impl LayerField {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `S φ` on `curve`.
    pub fn with_single(self, curve: &Curve, density: &[f64]) -> Result<Self> {
        self.push(LayerKind::Single, curve, density)
    }

    /// Adds `D μ` on `curve`.
    pub fn with_double(self, curve: &Curve, density: &[f64]) -> Result<Self> {
        self.push(LayerKind::Double, curve, density)
    }

    fn push(mut self, kind: LayerKind, curve: &Curve, density: &[f64]) -> Result<Self> {
        if density.len() != curve.len() {
            return Err(Error::DimensionMismatch {
                expected: curve.len(),
                got: density.len(),
            });
        }
        let mut levels = Vec::with_capacity(FIELD_LEVELS.len());
        for factor in FIELD_LEVELS {
            let fine = curve.resample(curve.len() * factor)?;
            let lifted = periodic::trig_interpolate_real(density, curve.shift(), fine.params());
            let weighted = lifted.iter().zip(fine.weights()).map(|(d, w)| d * w).collect();
            let h = fine.weights().iter().fold(0.0f64, |a, &b| a.max(b));
            levels.push((fine, weighted, h));
        }
        self.parts.push(FieldPart { kind, levels });
        Ok(self)
    }

    /// Moves `p` away from any curve it is too close to for the finest grid.
    fn adjust(&self, p: &Point2) -> Point2 {
        let mut q = *p;
        for part in &self.parts {
            let (d, y) = part.nearest(&q);
            let floor = FIELD_GUARD * part.levels.last().expect("levels").2;
            if d < floor && d > 0.0 {
                q = y + (q - y) * (floor / d);
            }
        }
        q
    }

    pub fn value(&self, p: &Point2) -> f64 {
        let p = self.adjust(p);
        let mut acc = 0.0;
        for part in &self.parts {
            let (c, wd, _) = part.level_for(part.nearest(&p).0);
            for ((y, nu), d) in c.nodes().iter().zip(c.normals()).zip(wd) {
                let r = y - p;
                acc += match part.kind {
                    LayerKind::Single => r.norm().ln() * d,
                    LayerKind::Double => r.dot(nu) / r.norm_squared() * d,
                };
            }
        }
        INV_2PI * acc
    }

    pub fn gradient(&self, p: &Point2) -> Point2 {
        let p = self.adjust(p);
        let mut acc = Point2::zeros();
        for part in &self.parts {
            let (c, wd, _) = part.level_for(part.nearest(&p).0);
            for ((y, nu), d) in c.nodes().iter().zip(c.normals()).zip(wd) {
                let r = y - p;
                let r2 = r.norm_squared();
                acc += match part.kind {
                    LayerKind::Single => -r * (d / r2),
                    LayerKind::Double => (-nu / r2 + r * (2.0 * r.dot(nu) / (r2 * r2))) * *d,
                };
            }
        }
        acc * INV_2PI
    }
}
