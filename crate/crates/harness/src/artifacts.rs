//! On-disk formats: trace and mean-curve CSVs and the reference file.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back gives the same bits and re-running a config gives the same bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nashseek_core::RunTrace;

use crate::aggregate::MeanCurve;
use crate::error::{HarnessError, Result};

pub const TRACE_HEADER: [&str; 8] = ["run_id", "seed", "iter", "sq_error", "gamma_n", "ell_n", "h_n", "cum_evals"];
pub const MEAN_HEADER: [&str; 5] = ["iter", "mean_sq_error", "band_lo", "band_hi", "n_seeds"];

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub run_id: String,
    pub seed: u64,
    pub iter: usize,
    pub sq_error: f64,
    pub gamma_n: f64,
    pub ell_n: usize,
    pub h_n: f64,
    pub cum_evals: u64,
}

pub fn trace_rows(run_id: &str, trace: &RunTrace) -> Vec<TraceRow> {
    trace
        .schedule_log
        .iter()
        .enumerate()
        .map(|(k, step)| TraceRow {
            run_id: run_id.to_string(),
            seed: trace.seed,
            iter: k + 1,
            sq_error: trace.sq_error.get(k).copied().unwrap_or(f64::NAN),
            gamma_n: step.gamma,
            ell_n: step.ell,
            h_n: step.h,
            cum_evals: trace.eval_counts[k],
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| HarnessError::csv(path, e);
    w.write_record(TRACE_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.run_id.clone(),
            r.seed.to_string(),
            r.iter.to_string(),
            r.sq_error.to_string(),
            r.gamma_n.to_string(),
            r.ell_n.to_string(),
            r.h_n.to_string(),
            r.cum_evals.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let got = r.headers().map_err(|e| HarnessError::csv(path, e))?;
    if got.iter().ne(header.iter().copied()) {
        return Err(HarnessError::format(
            path,
            format!("header `{}` is not `{}`", got.iter().collect::<Vec<_>>().join(","), header.join(",")),
        ));
    }
    Ok(r)
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, k: usize, name: &str) -> Result<T> {
    rec.get(k)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| HarnessError::format(path, format!("bad `{name}` in row {:?}", rec.position().map(|p| p.line()))))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = reader(path, &TRACE_HEADER)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        rows.push(TraceRow {
            run_id: rec.get(0).unwrap_or_default().to_string(),
            seed: field(path, &rec, 1, "seed")?,
            iter: field(path, &rec, 2, "iter")?,
            sq_error: field(path, &rec, 3, "sq_error")?,
            gamma_n: field(path, &rec, 4, "gamma_n")?,
            ell_n: field(path, &rec, 5, "ell_n")?,
            h_n: field(path, &rec, 6, "h_n")?,
            cum_evals: field(path, &rec, 7, "cum_evals")?,
        });
    }
    Ok(rows)
}

pub fn write_mean_csv(path: &Path, curve: &MeanCurve) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e| HarnessError::csv(path, e);
    w.write_record(MEAN_HEADER).map_err(err)?;
    for k in 0..curve.len() {
        w.write_record([
            curve.iters[k].to_string(),
            curve.mean[k].to_string(),
            curve.band_lo[k].to_string(),
            curve.band_hi[k].to_string(),
            curve.n_seeds.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_mean_csv(path: &Path) -> Result<MeanCurve> {
    let mut r = reader(path, &MEAN_HEADER)?;
    let mut c = MeanCurve {
        iters: Vec::new(),
        mean: Vec::new(),
        band_lo: Vec::new(),
        band_hi: Vec::new(),
        n_seeds: 0,
    };
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        c.iters.push(field(path, &rec, 0, "iter")?);
        c.mean.push(field(path, &rec, 1, "mean_sq_error")?);
        c.band_lo.push(field(path, &rec, 2, "band_lo")?);
        c.band_hi.push(field(path, &rec, 3, "band_hi")?);
        c.n_seeds = field(path, &rec, 4, "n_seeds")?;
    }
    Ok(c)
}

/// `dim=d`, then `d` values one per line, then `vi_residual=r`.
pub fn reference_text(x: &[f64], vi_residual: f64) -> String {
    let mut s = format!("dim={}\n", x.len());
    for v in x {
        s.push_str(&format!("{v}\n"));
    }
    s.push_str(&format!("vi_residual={vi_residual}\n"));
    s
}

pub fn write_reference(path: &Path, x: &[f64], vi_residual: f64) -> Result<()> {
    std::fs::write(path, reference_text(x, vi_residual)).map_err(|e| HarnessError::io(path, e))
}

pub fn parse_reference(path: &Path, text: &str) -> Result<(Vec<f64>, f64)> {
    let bad = |msg: &str| HarnessError::format(path, msg.to_string());
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let dim: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("dim="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("first line must be dim=<d>"))?;
    let mut x = Vec::with_capacity(dim);
    for _ in 0..dim {
        let v = lines
            .next()
            .and_then(|l| l.parse().ok())
            .ok_or_else(|| bad("expected one decimal value per line"))?;
        x.push(v);
    }
    let residual = lines
        .next()
        .and_then(|l| l.strip_prefix("vi_residual="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("last line must be vi_residual=<value>"))?;
    if lines.next().is_some() {
        return Err(bad("trailing content after vi_residual"));
    }
    Ok((x, residual))
}

pub fn read_reference(path: &Path) -> Result<(Vec<f64>, f64)> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_reference(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::aggregate_seeds;

    #[test]
    fn trace_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows: Vec<TraceRow> = (1..=5)
            .map(|n| TraceRow {
                run_id: "sdl-p1-seed3".into(),
                seed: 3,
                iter: n,
                sq_error: 1.0 / 3.0 / n as f64,
                gamma_n: 1.0 / n as f64,
                ell_n: n,
                h_n: 0.1 * (n as f64).powf(-0.5),
                cum_evals: (n * (n + 1)) as u64,
            })
            .collect();
        write_trace_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("run_id,seed,iter,sq_error,gamma_n,ell_n,h_n,cum_evals\n"));
        assert_eq!(read_trace_csv(&path).unwrap(), rows);
    }

    #[test]
    fn mean_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let curve = aggregate_seeds(&[vec![0.5, 0.25, 0.125], vec![0.7, 0.1, 1.0 / 7.0]]).unwrap();
        write_mean_csv(&path, &curve).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("iter,mean_sq_error,band_lo,band_hi,n_seeds\n"));
        assert_eq!(read_mean_csv(&path).unwrap(), curve);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "iter,value\n1,2\n").unwrap();
        assert!(read_mean_csv(&path).is_err());
        assert!(read_trace_csv(&path).is_err());
    }

    #[test]
    fn reference_round_trips() {
        let x = vec![2.0 / 3.0, 0.0, 1e-17, 0.25];
        let text = reference_text(&x, 3.5e-11);
        assert!(text.starts_with("dim=4\n"));
        assert!(text.ends_with("vi_residual=0.000000000035\n"));
        let (back, r) = parse_reference(Path::new("r"), &text).unwrap();
        assert_eq!(back, x);
        assert_eq!(r, 3.5e-11);
        assert!(parse_reference(Path::new("r"), "dim=2\n0.5\nvi_residual=0\n").is_err());
        assert!(parse_reference(Path::new("r"), "0.5\n0.5\n").is_err());
    }
}
