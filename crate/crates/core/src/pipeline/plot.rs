//! SVG figures of a finished run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::Point2;

use super::io::{self, SHAPE_FINAL, SHAPE_HISTORY, TARGET_SHAPE};

pub const OVERLAY: &str = "overlay.svg";
pub const LOG_J: &str = "log_j.svg";
pub const SYMDIFF: &str = "symdiff.svg";
pub const SYMDIFF_VS_LOG_J: &str = "symdiff_vs_log_j.svg";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const OUTLINE_NODES: usize = 256;

/// Closed range covering all values, widened when degenerate.
pub fn data_range(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    Some((lo - pad, hi + pad))
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        let sx = (p.0 - self.x.0) / (self.x.1 - self.x.0);
        let sy = (p.1 - self.y.0) / (self.y.1 - self.y.0);
        (MARGIN + sx * (WIDTH - 2.0 * MARGIN), HEIGHT - MARGIN - sy * (HEIGHT - 2.0 * MARGIN))
    }

    fn points(&self, data: &[(f64, f64)]) -> String {
        let mut s = String::new();
        for &p in data {
            let (u, v) = self.map(p);
            let _ = write!(s, "{u:.2},{v:.2} ");
        }
        s.trim_end().to_string()
    }
}

fn open(title: &str, xlabel: &str, ylabel: &str, frame: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<g class="axes" data-x-range="{} {}" data-y-range="{} {}" stroke="black" fill="none">"#,
        frame.x.0, frame.x.1, frame.y.0, frame.y.1
    );
    let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}"/>"#);
    let _ = writeln!(s, "</g>");
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, t: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="12">{t}</text>"#
        );
    };
    text(&mut s, WIDTH / 2.0, MARGIN / 2.0, "middle", title);
    text(&mut s, WIDTH / 2.0, HEIGHT - 15.0, "middle", xlabel);
    text(&mut s, 15.0, HEIGHT / 2.0, "start", ylabel);
    let bottom = HEIGHT - MARGIN + 15.0;
    text(&mut s, MARGIN, bottom, "start", &format!("{:.3}", frame.x.0));
    text(&mut s, WIDTH - MARGIN, bottom, "end", &format!("{:.3}", frame.x.1));
    text(&mut s, MARGIN - 5.0, HEIGHT - MARGIN, "end", &format!("{:.3}", frame.y.0));
    text(&mut s, MARGIN - 5.0, MARGIN + 10.0, "end", &format!("{:.3}", frame.y.1));
    s
}

fn line_chart(path: &Path, title: &str, xlabel: &str, ylabel: &str, data: &[(f64, f64)]) -> Result<()> {
    let data: Vec<(f64, f64)> = data.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let x = data_range(data.iter().map(|p| p.0)).unwrap_or((0.0, 1.0));
    let y = data_range(data.iter().map(|p| p.1)).unwrap_or((0.0, 1.0));
    let frame = Frame { x, y };
    let mut s = open(title, xlabel, ylabel, &frame);
    let _ = writeln!(
        s,
        r#"<polyline class="data" fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        frame.points(&data)
    );
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

fn outline(path: &Path) -> Result<Vec<Point2>> {
    let shape = io::read_shape(path)?;
    Ok(shape.curve(OUTLINE_NODES)?.nodes().to_vec())
}

fn overlay(path: &Path, target: &[Point2], recon: &[Point2]) -> Result<()> {
    let xs = target.iter().chain(recon).map(|p| p.x);
    let ys = target.iter().chain(recon).map(|p| p.y);
    let (x, y) = (data_range(xs).unwrap_or((0.0, 1.0)), data_range(ys).unwrap_or((0.0, 1.0)));
    // equal aspect
    let half = 0.5 * (x.1 - x.0).max((y.1 - y.0) * (WIDTH - 2.0 * MARGIN) / (HEIGHT - 2.0 * MARGIN));
    let half_y = half * (HEIGHT - 2.0 * MARGIN) / (WIDTH - 2.0 * MARGIN);
    let (cx, cy) = (0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1));
    let frame = Frame { x: (cx - half, cx + half), y: (cy - half_y, cy + half_y) };
    let mut s = open("target and reconstruction", "x1", "x2", &frame);
    let pts = |c: &[Point2]| frame.points(&c.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>());
    let _ = writeln!(
        s,
        r#"<polygon class="target" fill="none" stroke="black" stroke-width="2" points="{}"/>"#,
        pts(target)
    );
    let _ = writeln!(
        s,
        r#"<polygon class="reconstruction" fill="none" stroke="crimson" stroke-width="2" stroke-dasharray="6 3" points="{}"/>"#,
        pts(recon)
    );
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

/// Writes the four figures from `shape_history.csv`, `shape_final.txt` and
/// `target_shape.txt` in `dir`.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let history = io::read_shape_history(&dir.join(SHAPE_HISTORY))?;
    let target = outline(&dir.join(TARGET_SHAPE))?;
    let recon = outline(&dir.join(SHAPE_FINAL))?;
    if history.is_empty() {
        return Err(Error::Parse(format!("{SHAPE_HISTORY} has no rows")));
    }
    let log_j: Vec<(f64, f64)> = history.iter().map(|h| (h.iter as f64, h.j.log10())).collect();
    let sym: Vec<(f64, f64)> = history
        .iter()
        .filter_map(|h| h.symdiff.map(|d| (h.iter as f64, d)))
        .collect();
    let sym_j: Vec<(f64, f64)> = history
        .iter()
        .filter_map(|h| h.symdiff.map(|d| (h.j.log10(), d)))
        .collect();

    let paths: Vec<PathBuf> = [OVERLAY, LOG_J, SYMDIFF, SYMDIFF_VS_LOG_J].iter().map(|n| dir.join(n)).collect();
    overlay(&paths[0], &target, &recon)?;
    line_chart(&paths[1], "log10 J", "iteration", "log10 J", &log_j)?;
    line_chart(&paths[2], "symmetric difference", "iteration", "symdiff", &sym)?;
    line_chart(&paths[3], "symmetric difference against log10 J", "log10 J", "symdiff", &sym_j)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StarShape;
    use crate::shape::ShapeIterate;

    fn run_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let history: Vec<ShapeIterate> = (0..5)
            .map(|i| ShapeIterate {
                iter: i,
                j: 10f64.powi(-(i as i32)),
                symdiff: Some(0.5 / (i + 1) as f64),
                alpha: 0.5,
            })
            .collect();
        io::write_shape_history(&dir.path().join(SHAPE_HISTORY), &history).unwrap();
        io::write_shape(&dir.path().join(TARGET_SHAPE), &StarShape::disk(Point2::new(0.5, 0.0), 1.0, 3)).unwrap();
        io::write_shape(&dir.path().join(SHAPE_FINAL), &StarShape::disk(Point2::zeros(), 0.8, 3)).unwrap();
        dir
    }

    fn attr<'a>(svg: &'a str, tag: &str, name: &str) -> Vec<&'a str> {
        svg.match_indices(&format!("<{tag} "))
            .filter_map(|(i, _)| {
                let rest = &svg[i..];
                let key = format!("{name}=\"");
                let start = rest.find(&key)? + key.len();
                Some(&rest[start..start + rest[start..].find('"')?])
            })
            .collect()
    }

    #[test]
    fn figures_have_the_expected_content() {
        let dir = run_dir();
        let paths = emit_plots(dir.path()).unwrap();
        assert_eq!(paths.len(), 4);

        let svg = std::fs::read_to_string(dir.path().join(OVERLAY)).unwrap();
        assert_eq!(svg.matches("<polygon ").count(), 2);
        assert_eq!(svg.matches("<polyline ").count(), 0);

        let svg = std::fs::read_to_string(dir.path().join(LOG_J)).unwrap();
        let pts = attr(&svg, "polyline", "points");
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].split(' ').count(), 5);
        let y: Vec<f64> = attr(&svg, "g", "data-y-range")[0]
            .split(' ')
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(y[0] <= -4.0 && y[1] >= 0.0);
        let x: Vec<f64> = attr(&svg, "g", "data-x-range")[0]
            .split(' ')
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(x[0] <= 0.0 && x[1] >= 4.0);
        for p in pts[0].split(' ') {
            let (u, v) = p.split_once(',').unwrap();
            let (u, v): (f64, f64) = (u.parse().unwrap(), v.parse().unwrap());
            assert!((MARGIN..=WIDTH - MARGIN).contains(&u) && (MARGIN..=HEIGHT - MARGIN).contains(&v));
        }
    }

    #[test]
    fn missing_history_is_reported() {
        let dir = run_dir();
        std::fs::remove_file(dir.path().join(SHAPE_HISTORY)).unwrap();
        assert!(matches!(emit_plots(dir.path()), Err(Error::MissingArtifact(_))));
    }
}
