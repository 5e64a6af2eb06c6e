//! CSV and SVG artifacts of an aggregated experiment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::svg::{line_chart, Band, Series};
use super::{AggregateReport, SweepCell};
use crate::error::{Error, Result};

/// A row of `agre.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreRow {
    pub algorithm: String,
    pub k: usize,
    pub agre: f64,
    pub ci95: f64,
}

/// A row of `curves.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub algorithm: String,
    pub k: usize,
    pub t: u64,
    pub mean_windowed_gre: f64,
    pub ci95: f64,
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Data(format!("{}: {e}", path.display()))
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    if rows.is_empty() {
        w.write_record(header).map_err(csv_err(path))?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(f)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err(path))
}

pub fn read_agre_csv(path: &Path) -> Result<Vec<AgreRow>> {
    read_rows(path)
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<CurveRow>> {
    read_rows(path)
}

fn curve_rows(report: &AggregateReport, every: u64) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for c in &report.curves {
        let horizon = c.mean.len() as u64;
        for t in (1..=horizon).filter(|t| t % every == 0 || *t == horizon) {
            let i = (t - 1) as usize;
            rows.push(CurveRow {
                algorithm: c.algorithm.clone(),
                k: c.k,
                t,
                mean_windowed_gre: c.mean[i],
                ci95: c.ci95[i],
            });
        }
    }
    rows
}

/// One chart per cutoff from curve rows.
fn write_plots(rows: &[CurveRow], dir: &Path, log_log: bool) -> Result<Vec<std::path::PathBuf>> {
    // k -> algorithm (first-seen order) -> points
    let mut by_k: BTreeMap<usize, Vec<(String, Vec<&CurveRow>)>> = BTreeMap::new();
    for r in rows {
        let algs = by_k.entry(r.k).or_default();
        match algs.iter_mut().find(|(a, _)| *a == r.algorithm) {
            Some((_, pts)) => pts.push(r),
            None => algs.push((r.algorithm.clone(), vec![r])),
        }
    }
    let mut written = Vec::new();
    for (k, algs) in by_k {
        let series: Vec<Series> = algs
            .into_iter()
            .map(|(label, pts)| Series {
                label,
                x: pts.iter().map(|p| p.t as f64).collect(),
                y: pts.iter().map(|p| p.mean_windowed_gre).collect(),
                band: Some(Band {
                    lower: pts.iter().map(|p| p.mean_windowed_gre - p.ci95).collect(),
                    upper: pts.iter().map(|p| p.mean_windowed_gre + p.ci95).collect(),
                }),
            })
            .collect();
        let svg = line_chart(&format!("Windowed GRE, k = {k}"), "iteration", "GRE", &series, log_log);
        let path = dir.join(format!("gre_k{k}.svg"));
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `curves.csv`, `agre.csv` and one `gre_k{k}.svg` per cutoff.
pub fn emit_reports(report: &AggregateReport, dir: &Path, curve_every: u64, log_log: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let curves = curve_rows(report, curve_every.max(1));
    write_rows(&dir.join("curves.csv"), &["algorithm", "k", "t", "mean_windowed_gre", "ci95"], &curves)?;
    let agre: Vec<AgreRow> = report
        .agre
        .iter()
        .map(|e| AgreRow {
            algorithm: e.algorithm.clone(),
            k: e.k,
            agre: e.agre,
            ci95: e.ci95,
        })
        .collect();
    write_rows(&dir.join("agre.csv"), &["algorithm", "k", "agre", "ci95"], &agre)?;
    write_plots(&curves, dir, log_log)?;
    Ok(())
}

/// Regenerates the charts of a results directory from its `curves.csv`.
pub fn rebuild_plots(dir: &Path, log_log: bool) -> Result<Vec<std::path::PathBuf>> {
    let rows = read_curves_csv(&dir.join("curves.csv"))?;
    write_plots(&rows, dir, log_log)
}

#[derive(Serialize)]
struct RatingRow<'a> {
    algorithm: &'a str,
    seed: u64,
    agent: usize,
    rating: f64,
}

pub fn write_ratings_csv(report: &AggregateReport, path: &Path) -> Result<()> {
    let rows: Vec<RatingRow> = report
        .ratings
        .iter()
        .flat_map(|(alg, seed, r)| {
            r.iter().enumerate().map(move |(agent, &rating)| RatingRow {
                algorithm: alg,
                seed: *seed,
                agent,
                rating,
            })
        })
        .collect();
    write_rows(path, &["algorithm", "seed", "agent", "rating"], &rows)
}

#[derive(Serialize)]
struct SweepRow<'a> {
    phi: f64,
    algorithm: &'a str,
    k: usize,
    agre: f64,
    ci95: f64,
}

pub(super) fn write_sweep_summary(cells: &[SweepCell], path: &Path) -> Result<()> {
    let rows: Vec<SweepRow> = cells
        .iter()
        .flat_map(|c| {
            c.report.agre.iter().map(move |e| SweepRow {
                phi: c.phi,
                algorithm: &e.algorithm,
                k: e.k,
                agre: e.agre,
                ci95: e.ci95,
            })
        })
        .collect();
    write_rows(path, &["phi", "algorithm", "k", "agre", "ci95"], &rows)
}
