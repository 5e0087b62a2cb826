//! Plain-text artifacts.
//!
//! A matrix file starts with `# rows cols` followed by one comma-separated
//! row per line, every entry with 17 significant digits. A model bundle is a
//! directory holding `A.csv`, `G.csv`, `C.csv`, `H.csv` and a `meta` file of
//! `key=value` lines with at least `h=<period>`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::experiments::{RunArtifacts, SweepArtifacts};
use crate::complexity::BoundaryPoint;
use crate::error::{Error, Result};
use crate::model::{ContinuousModel, DiscreteModel};

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{s:?} is not a number: {e}")))
}

pub fn matrix_to_string(m: &DMatrix<f64>) -> String {
    let mut out = format!("# {} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<&str> = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse(format!("expected '# rows cols', got {header:?}")))?
        .split_whitespace()
        .collect();
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("expected '# rows cols', got {header:?}")));
    };
    let parse_dim =
        |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("bad dimension {s:?}: {e}")));
    let (rows, cols) = (parse_dim(rows)?, parse_dim(cols)?);
    let mut m = DMatrix::zeros(rows, cols);
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        if i >= rows {
            return Err(Error::Parse(format!("more than {rows} rows")));
        }
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != cols {
            return Err(Error::Parse(format!("row {i} has {} entries, expected {cols}", vals.len())));
        }
        for (j, v) in vals.into_iter().enumerate() {
            m[(i, j)] = parse_f64(v)?;
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse(format!("found {seen} rows, expected {rows}")));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_text(path, &matrix_to_string(m))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_meta(dir: &Path) -> Result<Vec<(String, String)>> {
    let path = dir.join("meta");
    let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("meta line {l:?} is not key=value")))
        })
        .collect()
}

fn meta_period(dir: &Path) -> Result<f64> {
    let meta = read_meta(dir)?;
    let h = meta
        .iter()
        .find(|(k, _)| k == "h")
        .ok_or_else(|| Error::Parse(format!("{}/meta has no h=", dir.display())))?;
    parse_f64(&h.1)
}

pub fn read_model(dir: &Path) -> Result<ContinuousModel<f64>> {
    let m = |name: &str| read_matrix(&dir.join(name));
    ContinuousModel::new(m("A.csv")?, m("G.csv")?, m("C.csv")?, m("H.csv")?, meta_period(dir)?)
}

/// Writes a model bundle; `extra` lines are appended to `meta` verbatim.
pub fn write_model(dir: &Path, model: &ContinuousModel<f64>, extra: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join("A.csv"), model.a())?;
    write_matrix(&dir.join("G.csv"), model.g())?;
    write_matrix(&dir.join("C.csv"), model.c())?;
    write_matrix(&dir.join("H.csv"), model.h())?;
    let mut meta = format!("h={}\n", fmt_f64(model.period()));
    for (k, v) in extra {
        let _ = writeln!(meta, "{k}={v}");
    }
    write_text(&dir.join("meta"), &meta)
}

/// Lifted bundle: `Ad.csv`, `Gd.csv`, `C.csv`, `M.csv` and `meta`.
pub fn write_discrete(dir: &Path, dm: &DiscreteModel<f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join("Ad.csv"), dm.transition())?;
    write_matrix(&dir.join("Gd.csv"), dm.noise_loading())?;
    write_matrix(&dir.join("C.csv"), dm.output())?;
    write_matrix(&dir.join("M.csv"), dm.obs_cov())?;
    write_text(&dir.join("meta"), &format!("h={}\n", fmt_f64(dm.period())))
}

pub fn read_discrete(dir: &Path) -> Result<DiscreteModel<f64>> {
    let m = |name: &str| read_matrix(&dir.join(name));
    DiscreteModel::new(m("Ad.csv")?, m("Gd.csv")?, m("C.csv")?, m("M.csv")?, meta_period(dir)?)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `k,trace,emp_mse`; `emp_mse` is empty without Monte Carlo.
pub fn trace_csv(run: &RunArtifacts) -> String {
    let mut out = String::from("k,trace,emp_mse\n");
    for r in &run.records {
        let _ = writeln!(out, "{},{},{}", r.k, fmt_f64(r.trace), opt(r.emp_mse));
    }
    out
}

/// `r,trace_ratio,stable`.
pub fn ratio_csv(sweep: &SweepArtifacts) -> String {
    let mut out = String::from("r,trace_ratio,stable\n");
    for r in &sweep.records {
        let _ = writeln!(out, "{},{},{}", r.r, fmt_f64(r.trace_ratio), r.stable);
    }
    out
}

/// `p,n,r_star,flops_kf,flops_lkf_at_rstar`, one block per `p`.
pub fn boundary_csv(curves: &[(u64, Vec<BoundaryPoint>)]) -> String {
    let mut out = String::from("p,n,r_star,flops_kf,flops_lkf_at_rstar\n");
    for (p, pts) in curves {
        for b in pts {
            let _ = writeln!(out, "{p},{},{},{},{}", b.n, b.r_star, fmt_f64(b.flops_kf), opt(b.flops_lkf_at_rstar));
        }
    }
    out
}

/// Rows `k,x_0,...` of a sequence of vectors.
pub fn vectors_csv(header: &str, rows: &[nalgebra::DVector<f64>]) -> String {
    let mut out = String::new();
    let n = rows.first().map_or(0, |v| v.len());
    let cols: Vec<String> = (0..n).map(|i| format!("{header}{i}")).collect();
    let _ = writeln!(out, "k,{}", cols.join(","));
    for (k, v) in rows.iter().enumerate() {
        let vals: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
        let _ = writeln!(out, "{k},{}", vals.join(","));
    }
    out
}

/// Observations stored as a matrix file, one row per step.
pub fn read_observations(path: &Path) -> Result<Vec<nalgebra::DVector<f64>>> {
    let m = read_matrix(path)?;
    Ok((0..m.nrows()).map(|i| m.row(i).transpose()).collect())
}
