//! `bachflow run`: one integration, written as trajectory.csv plus fate.json.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use bachflow::analytics::{
    attach_observation, classify_fate, observe, observed_only_report, user_curvature_trace, ClassifyOptions, FateReport,
};
use bachflow::integrator::{integrate, StopReason, Trajectory};
use bachflow::systems::make_system;
use bachflow::{BachError, DiagonalMetric4, ModelGeometry};

use crate::config::{initial_metric, parse_geometry, read_json, Num, Outputs, RunConfig, Tolerances};
use crate::failure::{CmdResult, Failure, OrConfig, INTEGRATION};
use crate::RunArgs;

pub const CSV_HEADER: [&str; 13] = [
    "t", "g00", "g11", "g22", "g33", "det_rel_drift", "S", "Ric11", "Ric22", "Ric33", "K12", "K13", "K23",
];

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn num(flag: &str, s: &Option<String>) -> Result<Option<Num>> {
    s.as_deref()
        .map(|v| v.trim().parse::<f64>().map(Num).map_err(|_| anyhow!("--{flag}: `{v}` is not a number")))
        .transpose()
}

fn resolve(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<RunConfig>(p)?,
        None => RunConfig {
            geometry: String::new(),
            h: Vec::new(),
            tol: Tolerances::default(),
            outputs: Outputs::default(),
        },
    };
    if let Some(g) = &a.geometry {
        cfg.geometry = g.clone();
    }
    if let Some(h) = &a.h {
        cfg.h = h
            .iter()
            .map(|v| v.trim().parse::<f64>().map(Num).map_err(|_| anyhow!("--h: `{v}` is not a number")))
            .collect::<Result<_>>()?;
    }
    let flags = Tolerances {
        t_end: num("t-end", &a.t_end)?,
        rtol: num("rtol", &a.rtol)?,
        atol: num("atol", &a.atol)?,
        floor_eps: num("floor-eps", &a.floor_eps)?,
        stall_tol: num("stall-tol", &a.stall_tol)?,
        h_max: num("h-max", &a.h_max)?,
        max_steps: a.max_steps,
        projection: a.projection.then_some(true),
    };
    cfg.tol = cfg.tol.overlay(&flags);
    if cfg.geometry.is_empty() || cfg.h.is_empty() {
        return Err(anyhow!("a geometry and initial metric are required (--config or --geometry/--h)"));
    }
    Ok(cfg)
}

pub fn write_trajectory_csv(w: impl Write, traj: &Trajectory, geom: ModelGeometry) -> Result<()> {
    let curv = user_curvature_trace(traj, geom)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for (i, (s, c)) in traj.samples.iter().zip(&curv).enumerate() {
        let g = traj.user_state(i);
        let row = [
            s.t,
            g[0],
            g[1],
            g[2],
            g[3],
            s.det_rel_drift,
            c.scalar,
            c.ric[0],
            c.ric[1],
            c.ric[2],
            c.sectional[0],
            c.sectional[1],
            c.sectional[2],
        ];
        out.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    out.flush()?;
    Ok(())
}

/// Prediction with the run's observation attached; an Indeterminate S³ point
/// falls back to the observed fate and its margin.
pub fn fate_report(geom: ModelGeometry, h: &DiagonalMetric4, traj: &Trajectory, floor_eps: f64) -> Result<FateReport> {
    let sys = make_system(geom, h)?;
    let mut rep = match classify_fate(geom, h, &ClassifyOptions::default()) {
        Ok(r) => r,
        Err(BachError::Indeterminate { margin, .. }) => {
            observed_only_report(&sys, observe(&sys, traj, floor_eps)?.fate, Some(margin))
        }
        Err(e) => return Err(e.into()),
    };
    attach_observation(&mut rep, &sys, traj, floor_eps)?;
    Ok(rep)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
}

pub fn cmd_run(a: &RunArgs) -> CmdResult {
    let cfg = resolve(a).or_config()?;
    let geom = parse_geometry(&cfg.geometry).or_config()?;
    let h: Vec<f64> = cfg.h.iter().map(|n| n.0).collect();
    let h = initial_metric(geom, &h).or_config()?;
    let opts = cfg.tol.options().or_config()?;
    let sys = make_system(geom, &h).or_config()?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display())).or_config()?;

    let traj = integrate(&sys, &h, &opts).map_err(|e| Failure {
        code: INTEGRATION,
        error: Some(e.into()),
    })?;
    let csv_name = cfg.outputs.trajectory.as_deref().unwrap_or("trajectory.csv");
    let fate_name = cfg.outputs.fate.as_deref().unwrap_or("fate.json");
    write_trajectory_csv(create(&a.out, csv_name).or_config()?, &traj, geom).or_config()?;
    let rep = fate_report(geom, &h, &traj, opts.floor_eps).or_config()?;
    let mut f = create(&a.out, fate_name).or_config()?;
    serde_json::to_writer_pretty(&mut f, &rep)
        .map_err(anyhow::Error::from)
        .and_then(|_| Ok(f.flush()?))
        .or_config()?;

    let last = traj.last();
    eprintln!(
        "{geom}: {:?} at t = {} after {} steps, fate {:?}",
        traj.stop, last.t, traj.accepted_steps, rep.fate
    );
    if traj.stop == StopReason::StepFailure {
        return Err(Failure {
            code: INTEGRATION,
            error: Some(anyhow!("step size underflow at t = {}", last.t)),
        });
    }
    Ok(())
}
