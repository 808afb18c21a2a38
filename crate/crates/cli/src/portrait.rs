//! `bachflow portrait`: fate of every point of an initial-data grid, one CSV row each.

use std::path::Path;

use anyhow::{Context, Result};
use bachflow::analytics::{classify_fate, ClassifyOptions, FateReport, Limit};
use bachflow::integrator::{integrate, IntegratorOptions};
use bachflow::systems::make_system;
use bachflow::{BachError, DiagonalMetric4, ModelGeometry};
use rayon::prelude::*;

use crate::config::{parse_geometry, read_json, GridPoint, SweepConfig, SweepMode};
use crate::failure::{CmdResult, OrConfig};
use crate::run::{fate_report, fmt_f64};
use crate::PortraitArgs;

pub const PORTRAIT_HEADER: [&str; 20] = [
    "index", "g00", "g11", "g22", "g33", "b", "c", "fate", "stratum", "margin", "lim_g00", "lim_g11", "lim_g22",
    "lim_g33", "lim_S", "observed_fate", "stop", "t_final", "det_rel_drift", "error",
];

fn limit(l: Option<Limit>) -> String {
    match l {
        None => String::new(),
        Some(Limit::Value(v)) => fmt_f64(v),
        Some(Limit::Zero) => "0".into(),
        Some(Limit::Infinity) => "inf".into(),
        Some(Limit::Finite) => "finite".into(),
        Some(Limit::Positive) => "positive".into(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Row cells after the inputs, filled from a report.
fn cells(rep: &FateReport) -> Vec<String> {
    let p = &rep.predicted;
    let mut row = vec![
        format!("{:?}", rep.fate),
        rep.stratum.map(|s| format!("{s:?}")).unwrap_or_default(),
        opt(rep.margin),
    ];
    row.extend(p.g.iter().map(|l| limit(*l)));
    row.push(limit(p.scalar));
    match &rep.observed {
        Some(o) => row.extend([
            format!("{:?}", o.fate),
            format!("{:?}", o.stop),
            fmt_f64(o.t),
            opt(rep.residuals.get("det_rel_drift").copied()),
        ]),
        None => row.extend(std::iter::repeat(String::new()).take(4)),
    }
    row
}

fn evaluate(geom: ModelGeometry, h: &DiagonalMetric4, mode: SweepMode, opts: &IntegratorOptions) -> Result<Vec<String>> {
    match mode {
        SweepMode::Classify => match classify_fate(geom, h, &ClassifyOptions::default()) {
            Ok(rep) => Ok(cells(&rep)),
            Err(BachError::Indeterminate { margin, .. }) => {
                let mut row = vec!["Indeterminate".to_string(), String::new(), fmt_f64(margin)];
                row.extend(std::iter::repeat(String::new()).take(9));
                Ok(row)
            }
            Err(e) => Err(e.into()),
        },
        SweepMode::Run => {
            let sys = make_system(geom, h)?;
            let traj = integrate(&sys, h, opts)?;
            Ok(cells(&fate_report(geom, h, &traj, opts.floor_eps)?))
        }
    }
}

/// One row per grid point, in grid order; failures land in the error column.
pub fn portrait_rows(sweep: &SweepConfig, threads: usize) -> Result<Vec<Vec<String>>> {
    let geom = parse_geometry(&sweep.geometry)?;
    let grid = sweep.grid()?;
    let opts = sweep.run.options()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let rows = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, p)| row(i, geom, p, sweep.mode, &opts))
            .collect()
    });
    Ok(rows)
}

fn row(i: usize, geom: ModelGeometry, p: &GridPoint, mode: SweepMode, opts: &IntegratorOptions) -> Vec<String> {
    let mut out = vec![i.to_string()];
    out.extend(p.h.iter().map(|v| fmt_f64(*v)));
    out.push(opt(p.bc.map(|x| x.0)));
    out.push(opt(p.bc.map(|x| x.1)));
    let res = DiagonalMetric4::new(p.h)
        .map_err(anyhow::Error::from)
        .and_then(|h| evaluate(geom, &h, mode, opts));
    match res {
        Ok(cells) => {
            out.extend(cells);
            out.push(String::new());
        }
        Err(e) => {
            out.extend(std::iter::repeat(String::new()).take(PORTRAIT_HEADER.len() - out.len() - 1));
            out.push(format!("{e:#}"));
        }
    }
    out
}

pub fn write_portrait(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(PORTRAIT_HEADER)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_portrait(a: &PortraitArgs) -> CmdResult {
    let sweep: SweepConfig = read_json(&a.config).or_config()?;
    let threads = a.threads.unwrap_or(sweep.threads);
    let rows = portrait_rows(&sweep, threads).or_config()?;
    std::fs::create_dir_all(&a.out).or_config()?;
    write_portrait(&a.out.join("portrait.csv"), &rows).or_config()?;
    let failed = rows.iter().filter(|r| !r.last().map_or(true, |e| e.is_empty())).count();
    eprintln!("{} points, {failed} failed", rows.len());
    Ok(())
}
