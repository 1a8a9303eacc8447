//! CSV and text artifacts of a run directory.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{Curve, StarShape};
use crate::separation::{CurrentData, MultiFreqDataset, SeparationIterate};
use crate::shape::ShapeIterate;

pub const DATASET: &str = "dataset.csv";
pub const LIFT: &str = "lift.csv";
pub const TRUTH_U0: &str = "truth_u0.csv";
pub const TARGET_SHAPE: &str = "target_shape.txt";
pub const KAPPA_ITERATES: &str = "kappa_iterates.csv";
pub const U0_RECOVERED: &str = "u0_recovered.csv";
pub const U0_DIAGNOSTICS: &str = "u0_diagnostics.csv";
pub const SHAPE_HISTORY: &str = "shape_history.csv";
pub const SHAPE_FINAL: &str = "shape_final.txt";
pub const REPORT: &str = "report.csv";
pub const TIMING: &str = "timing.csv";
pub const SPECTRUM: &str = "spectrum.csv";
pub const CONFIG: &str = "config.toml";

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

/// Writes a header and rows of preformatted fields.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads all rows, checking the header; fields are parsed as `f64`.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(existing(path)?).map_err(csv_err)?;
    let found = r.headers().map_err(csv_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse(format!(
            "{}: expected header {}, found {}",
            path.display(),
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("{}: row {}: bad number {s:?}", path.display(), line + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn index(x: f64, what: &str) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(Error::Parse(format!("bad {what} index {x}")))
    }
}

/// Checks that `(x1, x2)` of a row is node `j` of the measurement curve.
fn check_node(curve: &Curve, j: usize, x1: f64, x2: f64) -> Result<()> {
    let p = curve
        .nodes()
        .get(j)
        .ok_or(Error::DimensionMismatch { expected: curve.len(), got: j + 1 })?;
    let tol = 1e-9 * (1.0 + p.norm());
    if (p.x - x1).abs() > tol || (p.y - x2).abs() > tol {
        return Err(Error::InvalidConfig(format!(
            "node {j} at ({x1}, {x2}) does not match the configured body ({}, {})",
            p.x, p.y
        )));
    }
    Ok(())
}

const DATASET_HEADER: [&str; 7] = ["current", "node", "x1", "x2", "omega", "re_u", "im_u"];
const LIFT_HEADER: [&str; 6] = ["current", "node", "x1", "x2", "f", "frak_f"];
const TRACE_HEADER: [&str; 5] = ["current", "node", "x1", "x2", "u0"];

pub fn write_dataset(dir: &Path, ds: &MultiFreqDataset) -> Result<()> {
    let mut rows = Vec::new();
    for (i, cur) in ds.currents.iter().enumerate() {
        for (p, w) in ds.frequencies.iter().enumerate() {
            for (j, (x, u)) in ds.nodes.iter().zip(&cur.values[p]).enumerate() {
                rows.push(vec![
                    i.to_string(),
                    j.to_string(),
                    num(x.x),
                    num(x.y),
                    num(*w),
                    num(u.re),
                    num(u.im),
                ]);
            }
        }
    }
    write_csv(&dir.join(DATASET), &DATASET_HEADER, rows)?;
    let mut rows = Vec::new();
    for (i, cur) in ds.currents.iter().enumerate() {
        for (j, x) in ds.nodes.iter().enumerate() {
            rows.push(vec![
                i.to_string(),
                j.to_string(),
                num(x.x),
                num(x.y),
                num(cur.f[j]),
                num(cur.frak_f[j]),
            ]);
        }
    }
    write_csv(&dir.join(LIFT), &LIFT_HEADER, rows)
}

/// Reads `dataset.csv` and `lift.csv` against the measurement curve.
pub fn read_dataset(dir: &Path, curve: &Curve, k0: f64) -> Result<MultiFreqDataset> {
    let n = curve.len();
    let lift = read_csv(&dir.join(LIFT), &LIFT_HEADER)?;
    if lift.is_empty() || lift.len() % n != 0 {
        return Err(Error::DimensionMismatch { expected: n, got: lift.len() });
    }
    let n_cur = lift.len() / n;
    let mut currents: Vec<CurrentData> = (0..n_cur)
        .map(|_| CurrentData {
            f: vec![0.0; n],
            frak_f: vec![0.0; n],
            values: Vec::new(),
        })
        .collect();
    for (r, row) in lift.iter().enumerate() {
        let (i, j) = (index(row[0], "current")?, index(row[1], "node")?);
        if i != r / n || j != r % n {
            return Err(Error::Parse(format!("{LIFT}: row {} out of order", r + 2)));
        }
        check_node(curve, j, row[2], row[3])?;
        currents[i].f[j] = row[4];
        currents[i].frak_f[j] = row[5];
    }

    let data = read_csv(&dir.join(DATASET), &DATASET_HEADER)?;
    let per_current = n_cur * n;
    if data.is_empty() || data.len() % per_current != 0 {
        return Err(Error::DimensionMismatch { expected: per_current, got: data.len() });
    }
    let n_freq = data.len() / per_current;
    let mut frequencies = vec![0.0; n_freq];
    for cur in &mut currents {
        cur.values = vec![vec![Complex64::new(0.0, 0.0); n]; n_freq];
    }
    for (r, row) in data.iter().enumerate() {
        let (i, j) = (index(row[0], "current")?, index(row[1], "node")?);
        let p = (r / n) % n_freq;
        if i != r / (n * n_freq) || j != r % n {
            return Err(Error::Parse(format!("{DATASET}: row {} out of order", r + 2)));
        }
        check_node(curve, j, row[2], row[3])?;
        if i == 0 && j == 0 {
            frequencies[p] = row[4];
        } else if row[4] != frequencies[p] {
            return Err(Error::Parse(format!("{DATASET}: row {} has inconsistent frequency", r + 2)));
        }
        currents[i].values[p][j] = Complex64::new(row[5], row[6]);
    }
    MultiFreqDataset::new(curve.nodes().to_vec(), curve.weights().to_vec(), frequencies, k0, currents)
}

/// Real traces per current, `current,node,x1,x2,u0`.
pub fn write_traces(path: &Path, curve: &Curve, traces: &[Vec<f64>]) -> Result<()> {
    let rows = traces.iter().enumerate().flat_map(|(i, t)| {
        t.iter().zip(curve.nodes()).enumerate().map(move |(j, (u, x))| {
            vec![i.to_string(), j.to_string(), num(x.x), num(x.y), num(*u)]
        })
    });
    write_csv(path, &TRACE_HEADER, rows)
}

pub fn read_traces(path: &Path, curve: &Curve) -> Result<Vec<Vec<f64>>> {
    let n = curve.len();
    let rows = read_csv(path, &TRACE_HEADER)?;
    if rows.is_empty() || rows.len() % n != 0 {
        return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
    }
    let mut traces = vec![vec![0.0; n]; rows.len() / n];
    for (r, row) in rows.iter().enumerate() {
        let (i, j) = (index(row[0], "current")?, index(row[1], "node")?);
        if i != r / n || j != r % n {
            return Err(Error::Parse(format!("{}: row {} out of order", path.display(), r + 2)));
        }
        check_node(curve, j, row[2], row[3])?;
        traces[i][j] = row[4];
    }
    Ok(traces)
}

const KAPPA_HEADER: [&str; 7] = ["iter", "Jm", "kappa1", "kappa2", "kappa3", "grad_norm", "step"];

pub fn write_kappa_history(path: &Path, history: &[SeparationIterate]) -> Result<()> {
    let rows = history.iter().map(|h| {
        vec![
            h.iter.to_string(),
            num(h.jm),
            num(h.kappa[0]),
            num(h.kappa[1]),
            num(h.kappa[2]),
            num(h.grad_norm),
            num(h.step),
        ]
    });
    write_csv(path, &KAPPA_HEADER, rows)
}

pub fn read_kappa_history(path: &Path) -> Result<Vec<SeparationIterate>> {
    read_csv(path, &KAPPA_HEADER)?
        .into_iter()
        .map(|r| {
            Ok(SeparationIterate {
                iter: index(r[0], "iteration")?,
                jm: r[1],
                kappa: [r[2], r[3], r[4]],
                grad_norm: r[5],
                step: r[6],
            })
        })
        .collect()
}

const SHAPE_HEADER: [&str; 4] = ["iter", "J", "symdiff", "alpha"];

pub fn write_shape_history(path: &Path, history: &[ShapeIterate]) -> Result<()> {
    let rows = history.iter().map(|h| {
        vec![
            h.iter.to_string(),
            num(h.j),
            h.symdiff.map(num).unwrap_or_default(),
            num(h.alpha),
        ]
    });
    write_csv(path, &SHAPE_HEADER, rows)
}

pub fn read_shape_history(path: &Path) -> Result<Vec<ShapeIterate>> {
    let mut r = csv::Reader::from_path(existing(path)?).map_err(csv_err)?;
    let found = r.headers().map_err(csv_err)?.clone();
    if found.iter().ne(SHAPE_HEADER) {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Parse(format!("{}: bad number {s:?}", path.display())))
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        out.push(ShapeIterate {
            iter: index(parse(&rec[0])?, "iteration")?,
            j: parse(&rec[1])?,
            symdiff: if rec[2].is_empty() { None } else { Some(parse(&rec[2])?) },
            alpha: parse(&rec[3])?,
        });
    }
    Ok(out)
}

pub fn write_shape(path: &Path, shape: &StarShape) -> Result<()> {
    std::fs::write(path, shape.to_text())?;
    Ok(())
}

pub fn read_shape(path: &Path) -> Result<StarShape> {
    StarShape::from_text(&std::fs::read_to_string(existing(path)?)?)
}

/// `key,value` rows.
pub fn write_key_values(path: &Path, rows: &[(String, String)]) -> Result<()> {
    write_csv(path, &["key", "value"], rows.iter().map(|(k, v)| vec![k.clone(), v.clone()]))
}

pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    let mut r = csv::Reader::from_path(existing(path)?).map_err(csv_err)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok((rec[0].to_string(), rec[1].to_string()))
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EllipseDomain;

    fn dataset(curve: &Curve) -> MultiFreqDataset {
        let n = curve.len();
        let currents = (0..2)
            .map(|i| CurrentData {
                f: curve.normals().iter().map(|v| if i == 0 { v.x } else { v.y }).collect(),
                frak_f: (0..n).map(|j| (j as f64 * 0.3 + i as f64).sin()).collect(),
                values: (1..4)
                    .map(|p| {
                        (0..n)
                            .map(|j| Complex64::new((j * p) as f64 / 7.0, 1.0 / (j + p) as f64))
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        MultiFreqDataset::new(
            curve.nodes().to_vec(),
            curve.weights().to_vec(),
            vec![1.0, 2.5, 1.0 / 3.0],
            1.0,
            currents,
        )
        .unwrap()
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let curve = EllipseDomain::new(4.0, 3.0).curve(16, 0.0).unwrap();
        let ds = dataset(&curve);
        write_dataset(dir.path(), &ds).unwrap();
        assert_eq!(read_dataset(dir.path(), &curve, 1.0).unwrap(), ds);
    }

    #[test]
    fn dataset_on_another_body_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let curve = EllipseDomain::new(4.0, 3.0).curve(16, 0.0).unwrap();
        write_dataset(dir.path(), &dataset(&curve)).unwrap();
        let other = EllipseDomain::new(4.0, 2.0).curve(16, 0.0).unwrap();
        assert!(matches!(read_dataset(dir.path(), &other, 1.0), Err(Error::InvalidConfig(_))));
        let finer = EllipseDomain::new(4.0, 3.0).curve(32, 0.0).unwrap();
        assert!(read_dataset(dir.path(), &finer, 1.0).is_err());
    }

    #[test]
    fn missing_and_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(SHAPE_HISTORY);
        assert!(matches!(read_shape_history(&path), Err(Error::MissingArtifact(_))));
        std::fs::write(&path, "iter,J\n0,1\n").unwrap();
        assert!(matches!(read_shape_history(&path), Err(Error::Parse(_))));
        std::fs::write(&path, "iter,J,symdiff,alpha\n0,abc,,0.5\n").unwrap();
        assert!(matches!(read_shape_history(&path), Err(Error::Parse(_))));
    }

    #[test]
    fn histories_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let shape = vec![
            ShapeIterate { iter: 0, j: 0.1, symdiff: Some(0.5), alpha: 0.5 },
            ShapeIterate { iter: 1, j: 1e-7 / 3.0, symdiff: None, alpha: 0.25 },
        ];
        let path = dir.path().join(SHAPE_HISTORY);
        write_shape_history(&path, &shape).unwrap();
        assert_eq!(read_shape_history(&path).unwrap(), shape);
        let kappa = vec![SeparationIterate { iter: 3, jm: 2.0 / 3.0, kappa: [2.0, 1.0, 0.1], grad_norm: 1e-300, step: 1.0 }];
        let path = dir.path().join(KAPPA_ITERATES);
        write_kappa_history(&path, &kappa).unwrap();
        assert_eq!(read_kappa_history(&path).unwrap(), kappa);
    }
}
