//! Closed-curve representations of the body `Ω` and the anomaly `D`.
//!
//! Curves are always stored counterclockwise with the outward normal
//! `ν = R_{−π/2} T`. Curvature is signed so that a convex curve has `γ > 0`
//! (the unit circle has `γ ≡ 1`).

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::periodic;

pub type Point2 = Vector2<f64>;

/// Number of raster rows/columns used by [`symmetric_difference_ratio`].
pub const RASTER_RESOLUTION: usize = 1024;

/// Node count used when a star shape is turned into a polygon for area metrics.
pub const METRIC_NODES: usize = 1024;

/// Star-shaped anomaly `X₀ + r(θ)(cos θ, sin θ)` with
/// `r = Σ_{n=−N}^{N} c_n f_n`, `f_n = cos(nθ)` for `n ≥ 0` and
/// `f_n = sin(|n|θ)` for `n < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarShape {
    pub center: Point2,
    /// `c_{−N}, …, c_N`.
    coeffs: Vec<f64>,
}

impl StarShape {
    pub fn new(center: Point2, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::Parse(format!(
                "star shape needs 2N+1 coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self { center, coeffs })
    }

    /// Disk of radius `radius` described with `order` harmonics (all zero but `c₀`).
    pub fn disk(center: Point2, radius: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; 2 * order + 1];
        coeffs[order] = radius;
        Self { center, coeffs }
    }

    /// Least-squares Fourier fit of a polar radius function about `center`.
    pub fn fit(center: Point2, order: usize, radius: impl Fn(f64) -> f64) -> Self {
        let samples = (8 * order).max(512);
        let thetas = periodic::grid(samples, 0.0);
        let rs: Vec<f64> = thetas.iter().map(|&t| radius(t)).collect();
        let m = samples as f64;
        let mut coeffs = vec![0.0; 2 * order + 1];
        for n in 0..=order {
            let (mut a, mut b) = (0.0, 0.0);
            for (t, r) in thetas.iter().zip(&rs) {
                a += r * (n as f64 * t).cos();
                b += r * (n as f64 * t).sin();
            }
            if n == 0 {
                coeffs[order] = a / m;
            } else {
                coeffs[order + n] = 2.0 * a / m;
                coeffs[order - n] = 2.0 * b / m;
            }
        }
        Self { center, coeffs }
    }

    /// The same curve described about `center`, refitted at the current
    /// order. `None` unless the curve is star-shaped about `center`.
    pub fn recentered(&self, center: Point2) -> Option<Self> {
        let m = (16 * self.order()).max(1024);
        let mut phis = Vec::with_capacity(m);
        let mut rhos = Vec::with_capacity(m);
        for t in periodic::grid(m, 0.0) {
            let r = self.radius(t);
            let d = self.center + Point2::new(t.cos(), t.sin()) * r - center;
            phis.push(d.y.atan2(d.x));
            rhos.push(d.norm());
        }
        // unwrap and require strictly increasing polar angle over one turn
        for i in 1..m {
            let mut step = phis[i] - phis[i - 1];
            while step <= -PI {
                step += 2.0 * PI;
            }
            while step > PI {
                step -= 2.0 * PI;
            }
            if step <= 0.0 || rhos[i] <= 0.0 {
                return None;
            }
            phis[i] = phis[i - 1] + step;
        }
        let closing = phis[0] + 2.0 * PI - phis[m - 1];
        if !(closing > 0.0 && closing < PI) {
            return None;
        }
        let start = phis[0];
        let radius = |phi: f64| {
            let x = (phi - start).rem_euclid(2.0 * PI);
            let k = phis.partition_point(|p| p - start <= x);
            let (p0, r0, p1, r1) = if k == m {
                (phis[m - 1] - start, rhos[m - 1], 2.0 * PI, rhos[0])
            } else {
                (phis[k - 1] - start, rhos[k - 1], phis[k] - start, rhos[k])
            };
            r0 + (r1 - r0) * (x - p0) / (p1 - p0)
        };
        Some(Self::fit(center, self.order(), radius))
    }

    /// Harmonic cutoff `N`.
    pub fn order(&self) -> usize {
        self.coeffs.len() / 2
    }

    /// Coefficients `c_{−N}, …, c_N`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Coefficient `c_n`, zero outside `−N..=N`.
    pub fn coeff(&self, n: isize) -> f64 {
        let idx = n + self.order() as isize;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            0.0
        } else {
            self.coeffs[idx as usize]
        }
    }

    /// Same shape expressed with a different harmonic cutoff (truncating or
    /// zero-padding).
    pub fn with_order(&self, order: usize) -> Self {
        let coeffs = (-(order as isize)..=order as isize)
            .map(|n| self.coeff(n))
            .collect();
        Self { center: self.center, coeffs }
    }

    /// Basis function `f_n(θ)`.
    pub fn basis(n: isize, theta: f64) -> f64 {
        if n >= 0 {
            (n as f64 * theta).cos()
        } else {
            ((-n) as f64 * theta).sin()
        }
    }

    /// `(r, r′, r″)` at `θ`.
    pub fn radius_derivatives(&self, theta: f64) -> (f64, f64, f64) {
        let nmax = self.order() as isize;
        let (mut r, mut dr, mut ddr) = (0.0, 0.0, 0.0);
        for n in -nmax..=nmax {
            let c = self.coeff(n);
            if c == 0.0 {
                continue;
            }
            let k = n.unsigned_abs() as f64;
            let (s, co) = (k * theta).sin_cos();
            if n >= 0 {
                r += c * co;
                dr -= c * k * s;
                ddr -= c * k * k * co;
            } else {
                r += c * s;
                dr += c * k * co;
                ddr -= c * k * k * s;
            }
        }
        (r, dr, ddr)
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.radius_derivatives(theta).0
    }

    /// Minimum of `r` over a uniform grid of `n` angles, with the angle.
    pub fn min_radius(&self, n: usize) -> (f64, f64) {
        periodic::grid(n, 0.0)
            .into_iter()
            .map(|t| (self.radius(t), t))
            .fold((f64::INFINITY, 0.0), |acc, v| if v.0 < acc.0 { v } else { acc })
    }

    pub fn curve(&self, n_nodes: usize) -> Result<Curve> {
        Curve::sample(CurveSource::Star(self.clone()), n_nodes, 0.0)
    }

    /// Serializes to the three-line text record
    /// `center x y` / `N` / `c_{−N} … c_N`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "center {} {}", self.center.x, self.center.y);
        let _ = writeln!(s, "{}", self.order());
        let cs: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "{}", cs.join(" "));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let bad = |msg: &str| Error::Parse(format!("shape record: {msg}"));
        let center_line = lines.next().ok_or_else(|| bad("missing center line"))?;
        let mut parts = center_line.split_whitespace();
        if parts.next() != Some("center") {
            return Err(bad("first line must start with `center`"));
        }
        let mut num = |what: &str| -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| bad(what))?
                .parse::<f64>()
                .map_err(|e| bad(&format!("{what}: {e}")))
        };
        let cx = num("center x")?;
        let cy = num("center y")?;
        let order: usize = lines
            .next()
            .ok_or_else(|| bad("missing N"))?
            .parse()
            .map_err(|e| bad(&format!("N: {e}")))?;
        let coeffs: Vec<f64> = lines
            .next()
            .ok_or_else(|| bad("missing coefficients"))?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| bad(&format!("coefficient: {e}"))))
            .collect::<Result<_>>()?;
        if coeffs.len() != 2 * order + 1 {
            return Err(bad(&format!(
                "expected {} coefficients, found {}",
                2 * order + 1,
                coeffs.len()
            )));
        }
        Self::new(Point2::new(cx, cy), coeffs)
    }
}

/// Centered ellipse `x₁²/a₁² + x₂²/a₂² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseDomain {
    pub a1: f64,
    pub a2: f64,
}

impl EllipseDomain {
    pub fn new(a1: f64, a2: f64) -> Self {
        Self { a1, a2 }
    }

    pub fn curve(&self, n_nodes: usize, shift: f64) -> Result<Curve> {
        Curve::sample(CurveSource::Ellipse(*self), n_nodes, shift)
    }
}

/// Analytic description a [`Curve`] was sampled from; kept so that curves can
/// be re-sampled at other resolutions.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveSource {
    Star(StarShape),
    Ellipse(EllipseDomain),
}

impl CurveSource {
    /// `(X, X′, X″)` at parameter `t`.
    pub fn eval(&self, t: f64) -> (Point2, Point2, Point2) {
        match self {
            CurveSource::Star(shape) => {
                let (r, dr, ddr) = shape.radius_derivatives(t);
                let (s, c) = t.sin_cos();
                let e = Point2::new(c, s);
                let ep = Point2::new(-s, c);
                (
                    shape.center + r * e,
                    dr * e + r * ep,
                    (ddr - r) * e + 2.0 * dr * ep,
                )
            }
            CurveSource::Ellipse(el) => {
                let (s, c) = t.sin_cos();
                (
                    Point2::new(el.a1 * c, el.a2 * s),
                    Point2::new(-el.a1 * s, el.a2 * c),
                    Point2::new(-el.a1 * c, -el.a2 * s),
                )
            }
        }
    }
}

/// A closed curve sampled on a uniform parameter grid.
#[derive(Debug, Clone)]
pub struct Curve {
    source: CurveSource,
    shift: f64,
    params: Vec<f64>,
    nodes: Vec<Point2>,
    tangents: Vec<Point2>,
    normals: Vec<Point2>,
    curvature: Vec<f64>,
    speed: Vec<f64>,
    weights: Vec<f64>,
}

impl Curve {
    pub fn sample(source: CurveSource, n_nodes: usize, shift: f64) -> Result<Self> {
        if n_nodes < 8 || !n_nodes.is_multiple_of(2) {
            return Err(Error::BadNodeCount(n_nodes));
        }
        if let CurveSource::Star(shape) = &source {
            let (rmin, theta) = shape.min_radius(n_nodes.max(256));
            if rmin <= 0.0 {
                return Err(Error::NonPositiveRadius { theta, radius: rmin });
            }
        }
        let params = periodic::grid(n_nodes, shift);
        let h = 2.0 * PI / n_nodes as f64;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut tangents = Vec::with_capacity(n_nodes);
        let mut normals = Vec::with_capacity(n_nodes);
        let mut curvature = Vec::with_capacity(n_nodes);
        let mut speed = Vec::with_capacity(n_nodes);
        for &t in &params {
            let (x, dx, ddx) = source.eval(t);
            let sp = dx.norm();
            let tan = dx / sp;
            nodes.push(x);
            tangents.push(tan);
            normals.push(Point2::new(tan.y, -tan.x));
            curvature.push((dx.x * ddx.y - dx.y * ddx.x) / (sp * sp * sp));
            speed.push(sp);
        }
        let weights = speed.iter().map(|s| s * h).collect();
        Ok(Self {
            source,
            shift,
            params,
            nodes,
            tangents,
            normals,
            curvature,
            speed,
            weights,
        })
    }

    /// Same analytic curve at a different resolution (same grid shift).
    pub fn resample(&self, n_nodes: usize) -> Result<Self> {
        Self::sample(self.source.clone(), n_nodes, self.shift)
    }

    pub fn source(&self) -> &CurveSource {
        &self.source
    }
    pub fn shift(&self) -> f64 {
        self.shift
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }
    pub fn tangents(&self) -> &[Point2] {
        &self.tangents
    }
    pub fn normals(&self) -> &[Point2] {
        &self.normals
    }
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }
    /// `|X′(t_i)|`.
    pub fn speed(&self) -> &[f64] {
        &self.speed
    }
    /// Trapezoid weights for arclength integrals.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Enclosed area `½∮(x dy − y dx)`, spectrally accurate.
    pub fn area(&self) -> f64 {
        0.5 * self
            .nodes
            .iter()
            .zip(&self.tangents)
            .zip(&self.weights)
            .map(|((x, t), w)| (x.x * t.y - x.y * t.x) * w)
            .sum::<f64>()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let (mut mx, mut my) = (0.0, 0.0);
        for ((x, t), w) in self.nodes.iter().zip(&self.tangents).zip(&self.weights) {
            mx += x.x * x.x * t.y * w;
            my -= x.y * x.y * t.x * w;
        }
        Point2::new(mx, my) / (2.0 * self.area())
    }

    /// Boundary integral `∫ g ds`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Weighted mean `∫ g ds / |∂|`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        self.integrate(values) / self.perimeter()
    }

    /// Copy of `values` with the weighted mean removed.
    pub fn center_values(&self, values: &[f64]) -> Vec<f64> {
        let m = self.mean(values);
        values.iter().map(|v| v - m).collect()
    }

    /// `L²(∂)` norm via the trapezoid rule.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest distance between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        let n = self.nodes.len();
        (0..n)
            .map(|i| (self.nodes[(i + 1) % n] - self.nodes[i]).norm())
            .fold(0.0, f64::max)
    }

    /// Crossing-number point-in-polygon test against the node polygon.
    pub fn contains(&self, p: &Point2) -> bool {
        polygon_contains(&self.nodes, p)
    }

    /// Distance from `p` to the node polygon.
    pub fn distance_to(&self, p: &Point2) -> f64 {
        let n = self.nodes.len();
        (0..n)
            .map(|i| segment_distance(p, &self.nodes[i], &self.nodes[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the analytic curve and the closest curve point,
    /// refined by Newton's method from the nearest node.
    pub fn closest_point(&self, p: &Point2) -> (f64, Point2) {
        let (i, _) = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, y)| (i, (p - y).norm_squared()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let h = 2.0 * PI / self.nodes.len() as f64;
        let mut t = self.params[i];
        for _ in 0..20 {
            // minimize |X(t) − p|²
            let (x, dx, ddx) = self.source.eval(t);
            let r = x - p;
            let g = r.dot(&dx);
            let hess = dx.norm_squared() + r.dot(&ddx);
            if hess <= 0.0 {
                break;
            }
            let step = (g / hess).clamp(-h, h);
            t -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        let (x, _, _) = self.source.eval(t);
        let best = if (x - p).norm() <= (self.nodes[i] - p).norm() {
            x
        } else {
            self.nodes[i]
        };
        ((best - p).norm(), best)
    }

    /// Axis-aligned bounding box `(min, max)` of the nodes.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        bounding_box(&self.nodes)
    }
}

/// Samples a star shape on a uniform θ-grid with analytic tangents, normals
/// and curvature.
pub fn make_star_curve(shape: &StarShape, n_nodes: usize) -> Result<Curve> {
    shape.curve(n_nodes)
}

fn bounding_box(points: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

fn polygon_contains(poly: &[Point2], p: &Point2) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    };
    (p - (a + s * ab)).norm()
}

/// Sorted x-coordinates where the horizontal line `y` crosses the polygon.
fn row_crossings(poly: &[Point2], y: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[j]);
        if (a.y > y) != (b.y > y) {
            out.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        j = i;
    }
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
}

/// Marks pixel columns whose centers fall inside the crossing intervals.
fn fill_row(crossings: &[f64], x0: f64, dx: f64, row: &mut [bool]) {
    row.iter_mut().for_each(|c| *c = false);
    let ncols = row.len();
    for pair in crossings.chunks_exact(2) {
        // column c is inside when pair[0] <= x0 + (c + 0.5) dx < pair[1]
        let start = ((pair[0] - x0) / dx - 0.5).ceil().max(0.0) as usize;
        let end = ((pair[1] - x0) / dx - 0.5).ceil().clamp(0.0, ncols as f64) as usize;
        for cell in row.iter_mut().take(end).skip(start) {
            *cell = true;
        }
    }
}

/// Relative symmetric difference `|A △ B| / |B|` of the regions bounded by two
/// curves, by pixel-center rasterization on a
/// [`RASTER_RESOLUTION`]² grid over the joint bounding box.
pub fn symmetric_difference_ratio(a: &Curve, b: &Curve) -> Result<f64> {
    polygon_symmetric_difference(a.nodes(), b.nodes())
}

/// [`symmetric_difference_ratio`] for two star shapes sampled at
/// [`METRIC_NODES`] nodes.
pub fn shape_symmetric_difference(a: &StarShape, b: &StarShape) -> Result<f64> {
    symmetric_difference_ratio(&a.curve(METRIC_NODES)?, &b.curve(METRIC_NODES)?)
}

fn polygon_symmetric_difference(a: &[Point2], b: &[Point2]) -> Result<f64> {
    let res = RASTER_RESOLUTION;
    let (lo_a, hi_a) = bounding_box(a);
    let (lo_b, hi_b) = bounding_box(b);
    let lo = Point2::new(lo_a.x.min(lo_b.x), lo_a.y.min(lo_b.y));
    let hi = Point2::new(hi_a.x.max(hi_b.x), hi_a.y.max(hi_b.y));
    let dx = (hi.x - lo.x) / res as f64;
    let dy = (hi.y - lo.y) / res as f64;
    let cell = dx * dy;
    let (mut count_a, mut count_b, mut count_xor) = (0usize, 0usize, 0usize);
    let mut row_a = vec![false; res];
    let mut row_b = vec![false; res];
    let mut cross = Vec::new();
    for r in 0..res {
        let y = lo.y + (r as f64 + 0.5) * dy;
        row_crossings(a, y, &mut cross);
        fill_row(&cross, lo.x, dx, &mut row_a);
        row_crossings(b, y, &mut cross);
        fill_row(&cross, lo.x, dx, &mut row_b);
        for (pa, pb) in row_a.iter().zip(&row_b) {
            count_a += *pa as usize;
            count_b += *pb as usize;
            count_xor += (*pa != *pb) as usize;
        }
    }
    let min_area = 10.0 * cell;
    for count in [count_a, count_b] {
        let area = count as f64 * cell;
        if area < min_area {
            return Err(Error::DegenerateShape { area, min_area });
        }
    }
    Ok(count_xor as f64 / count_b as f64)
}

/// True iff every node of `shape` lies inside `domain` at distance at least
/// `margin` from its boundary.
pub fn is_inside(domain: &Curve, shape: &Curve, margin: f64) -> bool {
    shape
        .nodes()
        .iter()
        .all(|p| domain.contains(p) && domain.distance_to(p) >= margin)
}

/// Smallest node-to-polygon distance between two curves.
pub fn curve_distance(a: &Curve, b: &Curve) -> f64 {
    a.nodes()
        .iter()
        .map(|p| b.distance_to(p))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn origin() -> Point2 {
        Point2::new(0.0, 0.0)
    }

    #[test]
    fn centroid_of_shifted_ellipse() {
        let shape = StarShape::fit(Point2::new(0.3, -0.2), 16, |t| {
            1.0 / ((t.cos() / 1.5).powi(2) + (t.sin() / 0.7).powi(2)).sqrt()
        });
        let c = shape.curve(256).unwrap().centroid();
        assert_relative_eq!(c.x, 0.3, epsilon = 1e-10);
        assert_relative_eq!(c.y, -0.2, epsilon = 1e-10);
    }

    #[test]
    fn recentering_keeps_the_curve() {
        let disk = StarShape::disk(Point2::new(1.0, 0.5), 0.8, 8);
        // an off-center disk seen from a new center
        let moved = disk.recentered(Point2::new(1.3, 0.4)).unwrap();
        assert_eq!(moved.center, Point2::new(1.3, 0.4));
        let back = moved.recentered(disk.center).unwrap();
        assert_relative_eq!(back.coeff(0), 0.8, epsilon = 1e-4);
        for n in 1..=8 {
            assert!(back.coeff(n).abs() < 1e-4 && back.coeff(-n).abs() < 1e-4);
        }
        assert!(shape_symmetric_difference(&disk, &moved).unwrap() < 1e-3);
        // the disk is not star-shaped about a point outside it
        assert!(disk.recentered(Point2::new(3.0, 0.0)).is_none());
    }

    #[test]
    fn unit_circle_geometry() {
        let c = make_star_curve(&StarShape::disk(origin(), 1.0, 0), 64).unwrap();
        assert_relative_eq!(c.perimeter(), 2.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(c.area(), PI, epsilon = 1e-12);
        for ((g, nu), x) in c.curvature().iter().zip(c.normals()).zip(c.nodes()) {
            assert_relative_eq!(*g, 1.0, epsilon = 1e-12);
            assert_relative_eq!(nu.dot(x), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn initial_guess_disk() {
        let shape = StarShape::disk(Point2::new(1.0, 0.0), 0.5, 15);
        let c = shape.curve(64).unwrap();
        for p in c.nodes() {
            assert_relative_eq!((p - Point2::new(1.0, 0.0)).norm(), 0.5, epsilon = 1e-14);
        }
        assert_relative_eq!(c.perimeter(), PI, epsilon = 1e-12);
    }

    #[test]
    fn curvature_matches_polar_formula() {
        let mut coeffs = vec![0.0; 3];
        coeffs[1] = 1.0;
        coeffs[2] = 0.3;
        let shape = StarShape::new(origin(), coeffs).unwrap();
        let c = shape.curve(128).unwrap();
        // r = 1 + 0.3 cos θ: at θ=0, r=1.3, r'=0, r''=-0.3
        let (r, dr, ddr) = (1.3_f64, 0.0_f64, -0.3_f64);
        let expected = (r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr).powf(1.5);
        assert_relative_eq!(c.curvature()[0], expected, epsilon = 1e-13);
        assert_relative_eq!(c.nodes()[0].x, 1.3, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_positive_radius() {
        let shape = StarShape::new(origin(), vec![0.0, 0.2, 0.5]).unwrap();
        match shape.curve(64) {
            Err(Error::NonPositiveRadius { theta, radius }) => {
                assert!(radius <= 0.0);
                assert!((theta - PI).abs() < 0.05);
            }
            other => panic!("expected NonPositiveRadius, got {other:?}"),
        }
        assert!(matches!(
            StarShape::disk(origin(), 1.0, 1).curve(7),
            Err(Error::BadNodeCount(7))
        ));
    }

    #[test]
    fn ellipse_perimeter_and_normals() {
        let c = EllipseDomain::new(4.0, 3.0).curve(128, 0.1).unwrap();
        // Ramanujan's second approximation is accurate to ~1e-9 for this ratio
        let (a, b) = (4.0_f64, 3.0_f64);
        let hq = ((a - b) / (a + b)).powi(2);
        let ram = PI * (a + b) * (1.0 + 3.0 * hq / (10.0 + (4.0 - 3.0 * hq).sqrt()));
        assert!((c.perimeter() - ram).abs() < 1e-6);
        assert_relative_eq!(c.area(), PI * 12.0, epsilon = 1e-11);
        for (x, nu) in c.nodes().iter().zip(c.normals()) {
            assert!(x.dot(nu) > 0.0);
        }
    }

    #[test]
    fn symmetric_difference_identity_and_circles() {
        let a = StarShape::disk(origin(), 1.0, 0);
        assert_eq!(shape_symmetric_difference(&a, &a).unwrap(), 0.0);

        let b = StarShape::disk(Point2::new(0.5, 0.0), 1.0, 0);
        let d: f64 = 0.5;
        let lens = 2.0 * (d / 2.0).acos() - 0.5 * d * (4.0 - d * d).sqrt();
        let expected = 2.0 * (PI - lens) / PI;
        let got = shape_symmetric_difference(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-3, "{got} vs {expected}");
    }

    #[test]
    fn symmetric_difference_rejects_degenerate() {
        let a = StarShape::disk(origin(), 1.0, 0);
        let tiny = StarShape::disk(origin(), 1e-4, 0);
        assert!(matches!(
            shape_symmetric_difference(&tiny, &a),
            Err(Error::DegenerateShape { .. })
        ));
    }

    #[test]
    fn inside_checks() {
        let dom = EllipseDomain::new(4.0, 3.0).curve(256, 0.0).unwrap();
        let unit = StarShape::disk(origin(), 1.0, 0).curve(64).unwrap();
        assert!(is_inside(&dom, &unit, 0.5));
        let big = StarShape::disk(origin(), 3.6, 0).curve(64).unwrap();
        assert!(!is_inside(&dom, &big, 0.5));
    }

    #[test]
    fn text_record_round_trip() {
        let shape = StarShape::new(Point2::new(0.25, -1.5), vec![0.1, 1.0, -0.05]).unwrap();
        let back = StarShape::from_text(&shape.to_text()).unwrap();
        assert_eq!(shape, back);
        assert!(StarShape::from_text("center 0 0\n2\n1 2 3").is_err());
        assert!(StarShape::from_text("middle 0 0\n0\n1").is_err());
    }

    #[test]
    fn perimeter_converges_spectrally() {
        let shape = StarShape::new(origin(), vec![0.0, 0.1, 1.0, 0.2, 0.0]).unwrap();
        let reference = shape.curve(1024).unwrap().perimeter();
        let err = |n| (shape.curve(n).unwrap().perimeter() - reference).abs();
        let (e16, e32) = (err(16), err(32));
        assert!(e32 * 10.0 <= e16 || e32 < 1e-13, "{e16} {e32}");
    }

    proptest! {
        #[test]
        fn normals_point_outward(c1 in -0.3f64..0.3, s2 in -0.2f64..0.2, cx in -1.0f64..1.0) {
            let shape = StarShape::new(Point2::new(cx, 0.5), vec![s2, 0.0, 1.0, c1, 0.0]).unwrap();
            let c = shape.curve(64).unwrap();
            for ((x, nu), t) in c.nodes().iter().zip(c.normals()).zip(c.tangents()) {
                prop_assert!((x - shape.center).dot(nu) > 0.0);
                prop_assert!((t.norm() - 1.0).abs() < 1e-12);
            }
            let w: f64 = c.weights().iter().sum();
            prop_assert!((w - c.perimeter()).abs() < 1e-12);
        }
    }
}
