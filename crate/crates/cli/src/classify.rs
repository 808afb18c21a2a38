//! `bachflow classify`: the predicted fate as JSON.

use anyhow::anyhow;
use bachflow::analytics::{classify_fate, ClassifyOptions};
use bachflow::BachError;
use serde_json::json;

use crate::config::{initial_metric, parse_geometry};
use crate::failure::{CmdResult, Failure, OrConfig, INDETERMINATE};
use crate::ClassifyArgs;

pub fn cmd_classify(a: &ClassifyArgs) -> CmdResult {
    let geom = parse_geometry(&a.geometry).or_config()?;
    let h: Vec<f64> = a
        .h
        .iter()
        .map(|v| v.trim().parse::<f64>().map_err(|_| anyhow!("`{v}` is not a number")))
        .collect::<anyhow::Result<_>>()
        .or_config()?;
    let h = initial_metric(geom, &h).or_config()?;
    let mut opts = ClassifyOptions::default();
    if let Some(t) = a.margin_tol {
        opts.margin_tol = t;
    }
    match classify_fate(geom, &h, &opts) {
        Ok(rep) => {
            println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
            Ok(())
        }
        Err(BachError::Indeterminate { margin, tol }) => {
            let v = json!({ "geometry": geom, "fate": null, "indeterminate": true, "margin": margin, "margin_tol": tol });
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            Err(Failure::silent(INDETERMINATE))
        }
        Err(e) => Err(Failure::config(e)),
    }
}
