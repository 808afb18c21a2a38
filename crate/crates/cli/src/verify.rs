//! `bachflow verify`: polynomial identities and the curvature cross-check as JSON.

use anyhow::anyhow;
use bachflow::lie_geometry::{cross_validate, CrossCheck};
use bachflow::polynomials::{verify_identities_with, IdentityCheck, PolyId, PolyTables};
use serde::Serialize;

use crate::failure::{CmdResult, Failure, OrConfig, VERIFY};
use crate::VerifyArgs;

/// Both curvature routes must agree to this, relative to the rate scale.
pub const CROSS_TOL: f64 = 1e-12;

#[derive(Serialize)]
struct CrossEntry {
    #[serde(flatten)]
    check: CrossCheck,
    passed: bool,
}

#[derive(Serialize)]
struct Report {
    passed: bool,
    failed: Vec<String>,
    identities: Vec<IdentityCheck>,
    cross_validation: Vec<CrossEntry>,
    trace_free_worst: f64,
    off_diagonal_worst: f64,
}

fn parse_fault(s: &str) -> anyhow::Result<(PolyId, i64)> {
    let (id, d) = s.split_once(':').ok_or_else(|| anyhow!("fault must look like ID:delta"))?;
    let id = PolyId::from_tag(id).ok_or_else(|| anyhow!("unknown polynomial `{id}`"))?;
    Ok((id, d.trim().parse()?))
}

pub fn cmd_verify(a: &VerifyArgs) -> CmdResult {
    let mut tables = PolyTables::default();
    if let Some(f) = &a.inject_fault {
        let (id, d) = parse_fault(f).or_config()?;
        tables = tables.with_fault(id, d);
    }
    let identities = verify_identities_with(&tables);
    let cross: Vec<CrossEntry> = cross_validate(a.samples, a.seed)
        .into_iter()
        .map(|c| {
            let passed = [c.bach_rel, c.curvature_rel, c.off_diagonal, c.trace]
                .iter()
                .all(|v| *v <= CROSS_TOL);
            CrossEntry { check: c, passed }
        })
        .collect();
    let mut failed: Vec<String> = identities.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    failed.extend(
        cross
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("cross_validation_{}", c.check.geometry)),
    );
    let worst = |f: fn(&CrossCheck) -> f64| cross.iter().map(|c| f(&c.check)).fold(0.0, f64::max);
    let report = Report {
        passed: failed.is_empty(),
        trace_free_worst: worst(|c| c.trace),
        off_diagonal_worst: worst(|c| c.off_diagonal),
        failed,
        identities,
        cross_validation: cross,
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if report.passed {
        Ok(())
    } else {
        Err(Failure::silent(VERIFY))
    }
}
