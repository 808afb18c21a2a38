//! JSON configuration for `run` and `portrait`. Every numeric field accepts a JSON
//! number or a decimal string; strings are parsed with correct rounding.

use std::path::Path;

use anyhow::{bail, Context, Result};
use bachflow::integrator::IntegratorOptions;
use bachflow::{DiagonalMetric4, ModelGeometry};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "NumRepr")]
pub struct Num(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum NumRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<NumRepr> for Num {
    type Error = String;

    fn try_from(r: NumRepr) -> std::result::Result<Self, String> {
        match r {
            NumRepr::Number(v) => Ok(Num(v)),
            NumRepr::Text(s) => s
                .trim()
                .parse::<f64>()
                .map(Num)
                .map_err(|_| format!("`{s}` is not a decimal number")),
        }
    }
}

/// Integrator settings shared by `run` and per-point sweep overrides.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub t_end: Option<Num>,
    pub rtol: Option<Num>,
    pub atol: Option<Num>,
    pub floor_eps: Option<Num>,
    pub stall_tol: Option<Num>,
    pub h_max: Option<Num>,
    pub max_steps: Option<usize>,
    pub projection: Option<bool>,
}

pub const DEFAULT_T_END: f64 = 100.0;

impl Tolerances {
    pub fn overlay(&self, top: &Tolerances) -> Tolerances {
        Tolerances {
            t_end: top.t_end.or(self.t_end),
            rtol: top.rtol.or(self.rtol),
            atol: top.atol.or(self.atol),
            floor_eps: top.floor_eps.or(self.floor_eps),
            stall_tol: top.stall_tol.or(self.stall_tol),
            h_max: top.h_max.or(self.h_max),
            max_steps: top.max_steps.or(self.max_steps),
            projection: top.projection.or(self.projection),
        }
    }

    pub fn options(&self) -> Result<IntegratorOptions> {
        let mut o = IntegratorOptions::until(self.t_end.map_or(DEFAULT_T_END, |n| n.0));
        if let Some(v) = self.rtol {
            o.rtol = v.0;
        }
        if let Some(v) = self.atol {
            o.atol = v.0;
        }
        if let Some(v) = self.floor_eps {
            o.floor_eps = v.0;
        }
        if let Some(v) = self.stall_tol {
            o.stall_tol = v.0;
        }
        o.h_max = self.h_max.map(|n| n.0);
        if let Some(v) = self.max_steps {
            o.max_steps = v;
        }
        o.det_projection = self.projection.unwrap_or(false);
        o.validate()?;
        Ok(o)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub trajectory: Option<String>,
    pub fate: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: String,
    pub h: Vec<Num>,
    #[serde(flatten)]
    pub tol: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
}

pub fn parse_geometry(tag: &str) -> Result<ModelGeometry> {
    tag.parse::<ModelGeometry>().map_err(anyhow::Error::from)
}

/// Four components, or two scales (f1, f2) for the pure 2×2 families.
pub fn initial_metric(geom: ModelGeometry, h: &[f64]) -> Result<DiagonalMetric4> {
    let g = match h.len() {
        4 => [h[0], h[1], h[2], h[3]],
        2 if geom.is_pure_2x2() => [h[0], h[0], h[1], h[1]],
        2 => bail!("{geom} needs four metric components"),
        n => bail!("expected 4 metric components (or 2 scales for 2×2 families), got {n}"),
    };
    Ok(DiagonalMetric4::new(g)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// Grid values along one axis: an explicit `values` list, or `min`, `max`, `n`
/// and an optional `spacing`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisValues {
    pub values: Option<Vec<Num>>,
    pub min: Option<Num>,
    pub max: Option<Num>,
    pub n: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

impl AxisValues {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v: Vec<f64> = match (&self.values, self.min, self.max, self.n) {
            (Some(list), None, None, None) => list.iter().map(|n| n.0).collect(),
            (None, Some(Num(a)), Some(Num(b)), Some(n)) => {
                if n == 0 || !(a > 0.0 && b >= a) {
                    bail!("range needs 0 < min ≤ max and n ≥ 1");
                }
                (0..n)
                    .map(|i| {
                        let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                        match self.spacing {
                            Spacing::Log => (a.ln() + f * (b / a).ln()).exp(),
                            Spacing::Linear => a + f * (b - a),
                        }
                    })
                    .collect()
            }
            _ => bail!("an axis needs either `values` or all of `min`, `max`, `n`"),
        };
        if v.is_empty() {
            bail!("grid axis is empty");
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Metric index 0..=3.
    pub component: usize,
    pub values: Option<Vec<Num>>,
    pub min: Option<Num>,
    pub max: Option<Num>,
    pub n: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    pub fn axis_values(&self) -> AxisValues {
        AxisValues {
            values: self.values.clone(),
            min: self.min,
            max: self.max,
            n: self.n,
            spacing: self.spacing,
        }
    }
}

/// S³ slice of the reduced phase space: g00 = 1, h = (1, detH/(bc), b, c).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S3Plane {
    pub det_h: Num,
    pub b: AxisValues,
    pub c: AxisValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    #[default]
    Classify,
    Run,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub geometry: String,
    #[serde(default)]
    pub base: Option<Vec<Num>>,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub s3_plane: Option<S3Plane>,
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default)]
    pub run: Tolerances,
    /// Worker threads; 0 or absent uses rayon's default.
    #[serde(default)]
    pub threads: usize,
}

/// One grid point: the initial metric and the plane coordinates when present.
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub h: [f64; 4],
    pub bc: Option<(f64, f64)>,
}

impl SweepConfig {
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        if let Some(p) = &self.s3_plane {
            if !self.axes.is_empty() {
                bail!("use either `axes` or `s3_plane`, not both");
            }
            let det = p.det_h.0;
            if !(det > 0.0) {
                bail!("det_h must be positive");
            }
            let mut out = Vec::new();
            for c in p.c.values()? {
                for b in p.b.values()? {
                    out.push(GridPoint {
                        h: [1.0, det / (b * c), b, c],
                        bc: Some((b, c)),
                    });
                }
            }
            return Ok(out);
        }
        if self.axes.is_empty() {
            bail!("sweep needs `axes` or `s3_plane`");
        }
        let base: [f64; 4] = match &self.base {
            Some(b) if b.len() == 4 => [b[0].0, b[1].0, b[2].0, b[3].0],
            Some(_) => bail!("`base` needs four components"),
            None => [1.0; 4],
        };
        let mut out = vec![GridPoint { h: base, bc: None }];
        for axis in &self.axes {
            if axis.component > 3 {
                bail!("axis component must be 0..=3");
            }
            let vals = axis.axis_values().values()?;
            out = out
                .iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = *p;
                        q.h[axis.component] = v;
                        q
                    })
                })
                .collect();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_accept_decimal_strings() {
        let c: RunConfig = serde_json::from_str(
            r#"{"geometry": "nil", "h": ["1", 2, "0.1", "3e-2"], "t_end": "12.5", "rtol": 1e-9}"#,
        )
        .unwrap();
        assert_eq!(c.h.iter().map(|n| n.0).collect::<Vec<_>>(), vec![1.0, 2.0, 0.1, 0.03]);
        let o = c.tol.options().unwrap();
        assert_eq!((o.t_end, o.rtol), (12.5, 1e-9));
        assert!(serde_json::from_str::<RunConfig>(r#"{"geometry": "nil", "h": ["one"]}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"geometry": "nil", "h": [1], "rtoll": 1}"#).is_err());
    }

    #[test]
    fn grids() {
        let s: SweepConfig = serde_json::from_str(
            r#"{"geometry": "s3", "s3_plane": {"det_h": "1", "b": {"values": ["1", "2"]},
                "c": {"min": "1", "max": "4", "n": 3}}}"#,
        )
        .unwrap();
        let g = s.grid().unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0].h, [1.0, 1.0, 1.0, 1.0]);
        assert!((g[5].bc.unwrap().1 - 4.0).abs() < 1e-15);
        let s: SweepConfig = serde_json::from_str(
            r#"{"geometry": "e2", "base": [1, 1, 1, 1], "axes": [
                {"component": 1, "values": [1, 2]}, {"component": 2, "min": 1, "max": 2, "n": 2, "spacing": "linear"}]}"#,
        )
        .unwrap();
        let g = s.grid().unwrap();
        assert_eq!(g.iter().map(|p| (p.h[1], p.h[2])).collect::<Vec<_>>(), vec![(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0)]);
    }

    #[test]
    fn two_scale_input() {
        let h = initial_metric(ModelGeometry::S2xh2, &[2.0, 3.0]).unwrap();
        assert_eq!(h.components(), [2.0, 2.0, 3.0, 3.0]);
        assert!(initial_metric(ModelGeometry::Nil, &[2.0, 3.0]).is_err());
    }
}
