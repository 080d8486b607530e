//! CSV and JSON artifacts.
//!
//! Trace CSV columns:
//!
//! ```text
//! iter,time_s,objective,mask,norm_b0..norm_bJ,eval_s,prob_b0..prob_bJ,forced
//! ```
//!
//! `mask` lists one `0`/`1` per block, block 0 (coarsest) first. The
//! probability columns are empty for deterministic policies and `forced` is
//! empty unless a block was switched on because the random draw selected
//! nothing. Floats are written in shortest round-trip form, so parsing a file
//! and writing it again reproduces it byte for byte.

use std::fs::File;
use std::path::Path;

use bcfb::{ActivationMask, IterationRecord, ProfileCurve};
use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub fn trace_header(num_blocks: usize) -> Vec<String> {
    let mut h: Vec<String> = ["iter", "time_s", "objective", "mask"].iter().map(|s| s.to_string()).collect();
    h.extend((0..num_blocks).map(|b| format!("norm_b{b}")));
    h.push("eval_s".into());
    h.extend((0..num_blocks).map(|b| format!("prob_b{b}")));
    h.push("forced".into());
    h
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| BenchError::user_io(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::Reader::from_path(path).map_err(|e| BenchError::data_io(path, e))
}

fn write_err(path: &Path) -> impl Fn(csv::Error) -> BenchError + '_ {
    move |e| BenchError::user_io(path, e)
}

fn read_err(path: &Path) -> impl Fn(csv::Error) -> BenchError + '_ {
    move |e| BenchError::data_io(path, e)
}

pub fn write_trace_csv(path: &Path, num_blocks: usize, records: &[IterationRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(trace_header(num_blocks)).map_err(write_err(path))?;
    for r in records {
        let mut row = vec![r.iter.to_string(), r.time_s.to_string(), r.objective.to_string(), r.mask.to_bitstring()];
        row.extend(r.norms.iter().map(|n| n.to_string()));
        row.push(r.eval_s.to_string());
        match &r.mask.probabilities {
            Some(p) => row.extend(p.iter().map(|x| x.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), num_blocks)),
        }
        row.push(r.mask.forced.map(|f| f.to_string()).unwrap_or_default());
        w.write_record(&row).map_err(write_err(path))?;
    }
    w.flush().map_err(|e| BenchError::user_io(path, e))
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| BenchError::Data(format!("{}: row {line}: invalid {name} '{raw}'", path.display())))
}

/// Parses a trace file; the number of blocks is taken from the header.
pub fn read_trace_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut rd = reader(path)?;
    let header: Vec<String> = rd.headers().map_err(read_err(path))?.iter().map(str::to_string).collect();
    let nb = header.iter().filter(|h| h.starts_with("norm_b")).count();
    if nb == 0 || header != trace_header(nb) {
        return Err(BenchError::Data(format!("{}: unexpected trace header", path.display())));
    }
    let mut out = Vec::new();
    for (k, row) in rd.records().enumerate() {
        let row = row.map_err(read_err(path))?;
        let line = k + 2;
        let f = |i: usize| row.get(i).unwrap_or("");
        let mut mask = ActivationMask::from_bitstring(f(3))
            .map_err(|e| BenchError::Data(format!("{}: row {line}: {e}", path.display())))?;
        if mask.bits.len() != nb {
            return Err(BenchError::Data(format!("{}: row {line}: mask has wrong length", path.display())));
        }
        let norms = (0..nb).map(|b| field(path, line, "norm", f(4 + b))).collect::<Result<Vec<f64>>>()?;
        let probs_raw: Vec<&str> = (0..nb).map(|b| f(5 + nb + b)).collect();
        if probs_raw.iter().all(|p| !p.is_empty()) {
            mask.probabilities = Some(probs_raw.iter().map(|p| field(path, line, "probability", p)).collect::<Result<_>>()?);
        }
        let forced = f(5 + 2 * nb);
        if !forced.is_empty() {
            mask.forced = Some(field(path, line, "forced block", forced)?);
        }
        out.push(IterationRecord {
            iter: field(path, line, "iter", f(0))?,
            time_s: field(path, line, "time_s", f(1))?,
            objective: field(path, line, "objective", f(2))?,
            mask,
            norms,
            eval_s: field(path, line, "eval_s", f(4 + nb))?,
        });
    }
    Ok(out)
}

/// Rows `block,iter,frequency`, with `iter` 1-based like the trace.
pub fn write_heatmap_csv(path: &Path, frequencies: &Array2<f64>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["block", "iter", "frequency"]).map_err(write_err(path))?;
    for ((b, t), f) in frequencies.indexed_iter() {
        w.write_record([b.to_string(), (t + 1).to_string(), f.to_string()]).map_err(write_err(path))?;
    }
    w.flush().map_err(|e| BenchError::user_io(path, e))
}

pub fn read_heatmap_csv(path: &Path) -> Result<Array2<f64>> {
    let rows: Vec<HeatmapRow> = read_rows(path)?;
    let blocks = rows.iter().map(|r| r.block + 1).max().unwrap_or(0);
    let iters = rows.iter().map(|r| r.iter).max().unwrap_or(0);
    if rows.len() != blocks * iters || rows.iter().any(|r| r.iter == 0) {
        return Err(BenchError::Data(format!("{}: incomplete heatmap", path.display())));
    }
    let mut out = Array2::zeros((blocks, iters));
    for r in rows {
        out[[r.block, r.iter - 1]] = r.frequency;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub block: usize,
    pub iter: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub method: String,
    pub beta: f64,
    pub rho: f64,
}

pub fn profile_rows(curves: &[ProfileCurve]) -> Vec<ProfileRow> {
    curves
        .iter()
        .flat_map(|c| c.points.iter().map(|&(beta, rho)| ProfileRow { method: c.method.clone(), beta, rho }))
        .collect()
}

/// One row per benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub id: usize,
    /// `synthetic:<seed>` or the image file name.
    pub source: String,
    pub sigma_blur: f64,
    pub sigma_noise: f64,
    pub seed: u64,
    pub lambda: f64,
    pub initial_objective: f64,
    pub reference_objective: f64,
}

/// Per-instance, per-method outcome (timings live in the JSON records).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub id: usize,
    pub method: String,
    pub seed: u64,
    pub iterations: usize,
    pub final_objective: f64,
    pub budget_objective: f64,
    pub psnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub id: usize,
    pub lambda: f64,
    pub psnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: usize,
    pub method: String,
    pub objective: f64,
    pub score: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r).map_err(write_err(path))?;
    }
    w.flush().map_err(|e| BenchError::user_io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    reader(path)?.deserialize().collect::<std::result::Result<_, _>>().map_err(read_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| BenchError::user_io(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| BenchError::user_io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::data_io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::data_io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records() -> Vec<IterationRecord> {
        vec![
            IterationRecord {
                iter: 1,
                time_s: 1.5e-3,
                eval_s: 2e-5,
                objective: 12.345678901234567,
                mask: ActivationMask { bits: vec![true, false, true], probabilities: Some(vec![0.6, 0.0, 0.8]), forced: None },
                norms: vec![3.0, 0.0, 4.0],
            },
            IterationRecord {
                iter: 2,
                time_s: 3e-3,
                eval_s: 4e-5,
                objective: 1.0 / 3.0,
                mask: ActivationMask { bits: vec![true, true, false], probabilities: None, forced: None },
                norms: vec![1e-300, 0.1, 7.0],
            },
            IterationRecord {
                iter: 3,
                time_s: 4e-3,
                eval_s: 5e-5,
                objective: 0.25,
                mask: ActivationMask { bits: vec![false, false, true], probabilities: Some(vec![0.0, 0.1, 0.99]), forced: Some(2) },
                norms: vec![0.0, 0.1, 9.9],
            },
        ]
    }

    #[test]
    fn trace_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_trace_csv(&a, 3, &records()).unwrap();
        let parsed = read_trace_csv(&a).unwrap();
        assert_eq!(parsed, records());
        write_trace_csv(&b, 3, &parsed).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let text = std::fs::read_to_string(&a).unwrap();
        assert!(text.starts_with("iter,time_s,objective,mask,norm_b0,norm_b1,norm_b2,eval_s,"));
        assert!(text.contains(",101,"));
    }

    #[test]
    fn heatmap_and_tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let h = Array2::from_shape_fn((3, 4), |(b, t)| (b * 4 + t) as f64 / 11.0);
        let p = dir.path().join("h.csv");
        write_heatmap_csv(&p, &h).unwrap();
        assert_eq!(read_heatmap_csv(&p).unwrap(), h);
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("block,iter,frequency\n0,1,0\n"));

        let rows = vec![ProfileRow { method: "fb".into(), beta: 1.0, rho: 0.5 }, ProfileRow { method: "gs".into(), beta: 2.0, rho: 1.0 }];
        let q = dir.path().join("p.csv");
        write_rows(&q, &rows).unwrap();
        let back: Vec<ProfileRow> = read_rows(&q).unwrap();
        assert_eq!(back, rows);
        let r = dir.path().join("p2.csv");
        write_rows(&r, &back).unwrap();
        assert_eq!(std::fs::read(&q).unwrap(), std::fs::read(&r).unwrap());
        assert!(std::fs::read_to_string(&q).unwrap().starts_with("method,beta,rho\n"));
    }

    #[test]
    fn malformed_trace_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "iter,time_s\n1,2\n").unwrap();
        assert_eq!(read_trace_csv(&p).unwrap_err().exit_code(), 2);
        assert_eq!(read_trace_csv(&dir.path().join("missing.csv")).unwrap_err().exit_code(), 2);
    }
}
