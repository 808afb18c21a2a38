//! Fate classification: predicted limits from the decision table and the S³
//! strata, and fates observed from integrated trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::closed_form::{conserved_residual_with_gap, eta, kappa, kappa_limits, ConservedCurveId, KappaForm};
use super::curvature::curvature_at;
use super::s3::{boundary_fate, stable_manifold_point, BoundaryFate, BISECTION_RTOL};
use crate::error::{BachError, Result};
use crate::geometry::{rel_eq, DiagonalMetric4, ModelGeometry, SurfaceKind};
use crate::integrator::{integrate, monitor, IntegratorOptions, StopReason, Trajectory};
use crate::systems::{make_system, s3_equilibrium, FlowSystem, S3Equilibrium, EQUALITY_RTOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fate {
    Static,
    CollapseToSurface,
    CollapseToCurve,
    ConvergeFlat4,
    CollapseTo3Manifold,
    ConvergeCurved4,
}

/// Strata of S³ initial data, slice components sorted ascending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum S3Stratum {
    /// a = b = c.
    L0,
    /// 4a = b = c.
    L1,
    /// a = b < c.
    AEqB,
    /// a < b = c < 4a.
    BEqCInner,
    /// 4a < b = c.
    BEqCOuter,
    DL0,
    DInfinity,
    DS,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    Value(f64),
    Zero,
    Infinity,
    /// Converges to some positive finite value that no formula pins down.
    Finite,
    /// Converges to some positive value.
    Positive,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Predicted {
    pub g: [Option<Limit>; 4],
    pub ric: [Option<Limit>; 3],
    pub scalar: Option<Limit>,
    pub ric11_over_g11: Option<Limit>,
    /// Limits of named component ratios, e.g. "g22/g11".
    pub ratios: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Shrinking,
    Growing,
    Settling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observed {
    pub t: f64,
    pub stop: StopReason,
    pub g: [f64; 4],
    pub ric: [f64; 3],
    pub scalar: f64,
    /// Scalar curvature at the first sample past a tenth of the final time.
    pub scalar_at_tenth: f64,
    pub ric11_over_g11: f64,
    /// d ln g_ii / d ln t at the last sample.
    pub slopes: [f64; 4],
    pub trends: [Trend; 4],
    pub fate: Fate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FateReport {
    pub geometry: ModelGeometry,
    pub fate: Fate,
    pub stratum: Option<S3Stratum>,
    /// Metric and curvature entries are in the caller's component order.
    pub predicted: Predicted,
    pub observed: Option<Observed>,
    pub constants: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    /// Signed relative distance (b − b_S(c))/c of an S³ interior point from M_S.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub bisection_rtol: f64,
    /// |margin| at or below this is Indeterminate.
    pub margin_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            bisection_rtol: BISECTION_RTOL,
            margin_tol: 1e-10,
        }
    }
}

use Limit::{Finite, Infinity, Positive, Value, Zero};

fn v(x: f64) -> Option<Limit> {
    Some(Value(x))
}

fn eq(a: f64, b: f64) -> bool {
    rel_eq(a, b, EQUALITY_RTOL)
}

/// Stratum of an S³ system from its canonical initial metric (interior points
/// are returned as `None`).
fn s3_boundary_stratum(g: &[f64; 4]) -> Option<S3Stratum> {
    let [_, x, y, z] = *g;
    if eq(x, y) && eq(y, z) {
        return Some(S3Stratum::L0);
    }
    if eq(x, y) {
        return Some(S3Stratum::AEqB);
    }
    if eq(y, z) {
        let four = 4.0 * x;
        return Some(if eq(four, y) {
            S3Stratum::L1
        } else if four > y {
            S3Stratum::BEqCInner
        } else {
            S3Stratum::BEqCOuter
        });
    }
    None
}

fn s3_fate(stratum: S3Stratum) -> Fate {
    match stratum {
        S3Stratum::L0 => Fate::Static,
        S3Stratum::AEqB | S3Stratum::BEqCInner | S3Stratum::DL0 => Fate::ConvergeCurved4,
        S3Stratum::L1 | S3Stratum::DS => Fate::CollapseTo3Manifold,
        S3Stratum::BEqCOuter | S3Stratum::DInfinity => Fate::CollapseToSurface,
    }
}

struct Table {
    fate: Fate,
    stratum: Option<S3Stratum>,
    predicted: Predicted,
    constants: BTreeMap<String, f64>,
}

fn static_prediction(sys: &FlowSystem) -> Result<Predicted> {
    let g = sys.h.0;
    let c = curvature_at(sys.geom, &g, None)?;
    Ok(Predicted {
        g: g.map(|x| Some(Value(x))),
        ric: c.ric.0.map(|x| Some(Value(x))),
        scalar: v(c.scalar),
        ric11_over_g11: v(c.ric.0[0] / g[1]),
        ratios: BTreeMap::new(),
    })
}

fn s3_prediction(sys: &FlowSystem, stratum: S3Stratum, constants: &mut BTreeMap<String, f64>) -> Result<Predicted> {
    let mut p = Predicted::default();
    match stratum {
        S3Stratum::L0 => return static_prediction(sys),
        S3Stratum::AEqB | S3Stratum::BEqCInner => {
            let k = kappa(&sys.h);
            let (g0, gs) = kappa_limits(k, sys.det_h, KappaForm::Statement);
            constants.insert("kappa".into(), k);
            p.g = [v(g0), v(gs), v(gs), v(gs)];
            p.ric = [v(0.5); 3];
            p.scalar = v(1.5 / gs);
        }
        S3Stratum::DL0 => {
            p.g = [Some(Finite); 4];
            p.ric = [v(0.5); 3];
            p.scalar = Some(Positive);
        }
        S3Stratum::L1 | S3Stratum::DS => {
            p.g = [Some(Zero), Some(Infinity), Some(Infinity), Some(Infinity)];
            p.ric = [v(1.0 / 32.0), v(7.0 / 8.0), v(7.0 / 8.0)];
            p.scalar = Some(Zero);
            p.ratios.insert("g22/g11".into(), 4.0);
            p.ratios.insert("g22/g33".into(), 1.0);
        }
        S3Stratum::BEqCOuter | S3Stratum::DInfinity => {
            if stratum == S3Stratum::BEqCOuter {
                constants.insert("kappa".into(), -kappa(&sys.h));
            }
            p.g = [Some(Zero), Some(Zero), Some(Infinity), Some(Infinity)];
            p.ric = [None, v(1.0), v(1.0)];
            p.ric11_over_g11 = Some(Zero);
            p.scalar = Some(Zero);
        }
    }
    Ok(p)
}

/// Decision-table prediction in canonical order; S³ interior points need `side`.
fn table(sys: &FlowSystem, side: Option<S3Stratum>) -> Result<Table> {
    let g = sys.h.0;
    let mut constants = BTreeMap::new();
    constants.insert("beta".into(), sys.beta);
    constants.insert("det_h".into(), sys.det_h);
    for (name, val) in [("alpha", sys.alpha), ("gamma", sys.gamma), ("mu", sys.mu)] {
        if let Some(x) = val {
            constants.insert(name.into(), x);
        }
    }
    if sys.is_static() {
        let stratum = (sys.geom == ModelGeometry::S3).then_some(S3Stratum::L0);
        return Ok(Table {
            fate: Fate::Static,
            stratum,
            predicted: static_prediction(sys)?,
            constants,
        });
    }
    let mut p = Predicted::default();
    let fate = match sys.geom {
        ModelGeometry::Nil => {
            p.g = [Some(Zero), Some(Zero), Some(Infinity), Some(Infinity)];
            Fate::CollapseToSurface
        }
        ModelGeometry::Solv => {
            p.g = [Some(Zero), Some(Zero), Some(Zero), Some(Infinity)];
            p.ric = [v(0.0), v(0.0), v(-2.0)];
            p.ratios.insert("g11/g22".into(), 1.0);
            if g[1] != g[2] {
                constants.insert("eta".into(), eta(sys.geom, &sys.h)?);
            }
            Fate::CollapseToCurve
        }
        ModelGeometry::E2 => {
            let e = eta(sys.geom, &sys.h)?;
            constants.insert("eta".into(), e);
            let l = (432.0 * e).powf(1.0 / 40.0);
            let mu = sys.mu.expect("E(2) constants");
            let gamma = sys.gamma.expect("E(2) constants");
            let g0 = mu.sqrt() * l;
            p.g = [v(g0), v(l), v(l), v(gamma / g0.powi(3))];
            p.ric = [v(0.0); 3];
            p.scalar = v(0.0);
            Fate::ConvergeFlat4
        }
        ModelGeometry::Sl2 => {
            p.g = [Some(Zero), Some(Zero), Some(Infinity), Some(Infinity)];
            p.ric = [None, v(-1.0), v(-1.0)];
            p.ric11_over_g11 = Some(Zero);
            p.scalar = Some(Zero);
            Fate::CollapseToSurface
        }
        ModelGeometry::S3 => {
            let stratum = match s3_boundary_stratum(&g).or(side) {
                Some(s) => s,
                None => {
                    return Err(BachError::Unclassified(
                        "S³ interior point: run classify_fate to locate it relative to M_S".into(),
                    ))
                }
            };
            let predicted = s3_prediction(sys, stratum, &mut constants)?;
            return Ok(Table {
                fate: s3_fate(stratum),
                stratum: Some(stratum),
                predicted,
                constants,
            });
        }
        geom => {
            let (k1, k2) = geom
                .product_factors()
                .ok_or(BachError::UnsupportedGeometry(geom.tag(), "fate table"))?;
            let gamma = sys.gamma.expect("product constants");
            if k1 == SurfaceKind::Flat || k2 == SurfaceKind::Flat {
                // The flat factor shrinks, the curved one grows.
                let (a, b) = if k1 == SurfaceKind::Flat { (Zero, Infinity) } else { (Infinity, Zero) };
                p.g = [Some(a), Some(a), Some(b), Some(b)];
                p.scalar = Some(Zero);
                Fate::CollapseToSurface
            } else {
                let f = gamma.sqrt();
                p.g = [v(f); 4];
                let (s1, s2) = (k1.sign(), k2.sign());
                p.ric = [v(s1), v(s2), v(s2)];
                p.scalar = v(2.0 * (s1 + s2) / f);
                Fate::ConvergeCurved4
            }
        }
    };
    Ok(Table {
        fate,
        stratum: None,
        predicted: p,
        constants,
    })
}

fn to_user<T: Clone>(perm: &[usize; 4], canonical: &[T; 4]) -> [T; 4] {
    let mut out = canonical.clone();
    for i in 0..4 {
        out[perm[i]] = canonical[i].clone();
    }
    out
}

fn ric_to_user<T: Clone>(perm: &[usize; 4], canonical: &[T; 3]) -> [T; 3] {
    let mut out = canonical.clone();
    for i in 0..3 {
        out[perm[i + 1] - 1] = canonical[i].clone();
    }
    out
}

fn report(sys: &FlowSystem, t: Table, margin: Option<f64>) -> FateReport {
    let mut predicted = t.predicted;
    predicted.g = to_user(&sys.perm, &predicted.g);
    predicted.ric = ric_to_user(&sys.perm, &predicted.ric);
    FateReport {
        geometry: sys.geom,
        fate: t.fate,
        stratum: t.stratum,
        predicted,
        observed: None,
        constants: t.constants,
        residuals: BTreeMap::new(),
        margin,
    }
}

/// Predictions for every case the decision table or an exact S³ stratum covers.
pub fn predicted_limits(geom: ModelGeometry, h: &DiagonalMetric4) -> Result<FateReport> {
    let sys = make_system(geom, h)?;
    let t = table(&sys, None)?;
    Ok(report(&sys, t, None))
}

/// (b, c) of a canonical-order S³ metric.
pub fn s3_bc(g: &[f64; 4]) -> (f64, f64) {
    let k = g[0].cbrt();
    (k * g[2], k * g[3])
}

/// Side of M_S for an interior S³ point, with its signed margin when M_S crosses
/// the point's c level.
fn s3_interior_side(det_h: f64, b: f64, c: f64, opts: &ClassifyOptions) -> Result<(S3Stratum, Option<f64>)> {
    let (_, c1) = s3_equilibrium(S3Equilibrium::P1, det_h);
    let direct = boundary_fate(det_h, b, c)?;
    let side = |f: BoundaryFate| match f {
        BoundaryFate::ToP0 => S3Stratum::DL0,
        BoundaryFate::ToInfinity => S3Stratum::DInfinity,
    };
    if c <= c1 {
        return Ok((side(direct), None));
    }
    match stable_manifold_point(det_h, c, opts.bisection_rtol) {
        Ok(p) => {
            let margin = (b - p.b) / c;
            if margin.abs() <= opts.margin_tol.max(p.width / c) {
                return Err(BachError::Indeterminate {
                    margin,
                    tol: opts.margin_tol,
                });
            }
            let by_margin = if margin < 0.0 { S3Stratum::DL0 } else { S3Stratum::DInfinity };
            if by_margin != side(direct) {
                return Err(BachError::Indeterminate {
                    margin,
                    tol: opts.margin_tol,
                });
            }
            Ok((by_margin, Some(margin)))
        }
        Err(BachError::BisectionFailure(_)) => Ok((side(direct), None)),
        Err(e) => Err(e),
    }
}

/// Qualitative fate of the flow from h, without integrating the full system.
pub fn classify_fate(geom: ModelGeometry, h: &DiagonalMetric4, opts: &ClassifyOptions) -> Result<FateReport> {
    let sys = make_system(geom, h)?;
    if geom == ModelGeometry::S3 && s3_boundary_stratum(&sys.h.0).is_none() {
        let (b, c) = s3_bc(&sys.h.0);
        let (side, margin) = s3_interior_side(sys.det_h, b, c, opts)?;
        let t = table(&sys, Some(side))?;
        return Ok(report(&sys, t, margin));
    }
    let t = table(&sys, None)?;
    Ok(report(&sys, t, None))
}

/// |d ln g / d ln t| below this at the end of a run counts as settled.
pub const SETTLED_SLOPE: f64 = 1e-3;

fn fate_from_trends(trends: &[Trend; 4], curved: bool, moved: bool) -> Fate {
    if !moved {
        return Fate::Static;
    }
    if trends.iter().all(|t| *t == Trend::Settling) {
        return if curved { Fate::ConvergeCurved4 } else { Fate::ConvergeFlat4 };
    }
    let surviving = trends[1..].iter().filter(|t| **t != Trend::Shrinking).count();
    match surviving {
        1 => Fate::CollapseToCurve,
        2 => Fate::CollapseToSurface,
        _ => Fate::CollapseTo3Manifold,
    }
}

/// Fate and end-of-run values read off an integrated trajectory, in canonical order.
pub fn observe(sys: &FlowSystem, traj: &Trajectory, floor_eps: f64) -> Result<Observed> {
    let last = traj.last();
    let g: [f64; 4] = last.state.as_slice().try_into().map_err(|_| {
        BachError::Domain("observe needs a metric trajectory".into())
    })?;
    let curv = curvature_at(sys.geom, &g, traj.gap_pair.zip(last.gap))?;
    let rates = sys.log_rates(&g);
    let t = last.t.max(1.0);
    let slopes = rates.map(|r| r * t);
    let mut trends = [Trend::Settling; 4];
    for i in 0..4 {
        trends[i] = if g[i] < floor_eps || slopes[i] < -SETTLED_SLOPE {
            Trend::Shrinking
        } else if slopes[i] > SETTLED_SLOPE {
            Trend::Growing
        } else {
            Trend::Settling
        };
    }
    if traj.stop == StopReason::ComponentFloor {
        for i in 0..4 {
            if trends[i] == Trend::Settling {
                trends[i] = if g[i] < 1.0 { Trend::Shrinking } else { Trend::Growing };
            }
        }
    }
    let curved = curv.ric.0.iter().any(|r| r.abs() > 1e-6) || curv.scalar.abs() * g[1] > 1e-6;
    let moved = traj.samples.first().map_or(false, |s| s.rate_norm > 0.0);
    let tenth = traj
        .samples
        .iter()
        .find(|s| s.t >= 0.1 * last.t)
        .unwrap_or(last);
    let g_tenth: [f64; 4] = tenth.state.as_slice().try_into().expect("metric sample");
    let scalar_at_tenth = curvature_at(sys.geom, &g_tenth, traj.gap_pair.zip(tenth.gap))?.scalar;
    Ok(Observed {
        t: last.t,
        stop: traj.stop,
        g,
        ric: curv.ric.0,
        scalar: curv.scalar,
        scalar_at_tenth,
        ric11_over_g11: curv.ric.0[0] / g[1],
        slopes,
        trends,
        fate: fate_from_trends(&trends, curved, moved),
    })
}

/// Disagreements between a prediction and an observation (both canonical order),
/// with value tolerance `tol`.
pub fn compare(fate: Fate, p: &Predicted, o: &Observed, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    if fate != o.fate {
        out.push(format!("fate: predicted {fate:?}, observed {:?}", o.fate));
    }
    for i in 0..4 {
        let ok = match p.g[i] {
            None => true,
            Some(Zero) => o.trends[i] == Trend::Shrinking,
            Some(Infinity) => o.trends[i] == Trend::Growing,
            Some(Finite) | Some(Positive) => o.trends[i] == Trend::Settling,
            Some(Value(x)) => o.trends[i] == Trend::Settling && (o.g[i] / x - 1.0).abs() <= tol,
        };
        if !ok {
            out.push(format!("g{i}{i}: predicted {:?}, observed {} ({:?})", p.g[i], o.g[i], o.trends[i]));
        }
    }
    let value_ok = |l: Option<Limit>, x: f64| match l {
        None | Some(Finite) | Some(Infinity) => true,
        Some(Zero) => x.abs() <= tol,
        Some(Positive) => x > 0.0,
        Some(Value(y)) => (x - y).abs() <= tol * y.abs().max(1.0),
    };
    for i in 0..3 {
        if !value_ok(p.ric[i], o.ric[i]) {
            out.push(format!("Ric{}{}: predicted {:?}, observed {}", i + 1, i + 1, p.ric[i], o.ric[i]));
        }
    }
    // Power-law decay to zero is accepted once |S| has at least halved over the last decade.
    let decaying = o.scalar.abs() <= 0.5 * o.scalar_at_tenth.abs();
    if !(value_ok(p.scalar, o.scalar) || (p.scalar == Some(Zero) && decaying)) {
        out.push(format!("S: predicted {:?}, observed {}", p.scalar, o.scalar));
    }
    if !value_ok(p.ric11_over_g11, o.ric11_over_g11) {
        out.push(format!("Ric11/g11: predicted {:?}, observed {}", p.ric11_over_g11, o.ric11_over_g11));
    }
    for (name, want) in &p.ratios {
        let got = match name.as_str() {
            "g22/g11" => o.g[2] / o.g[1],
            "g22/g33" => o.g[2] / o.g[3],
            "g11/g22" => o.g[1] / o.g[2],
            _ => continue,
        };
        if (got / want - 1.0).abs() > tol {
            out.push(format!("{name}: predicted {want}, observed {got}"));
        }
    }
    out
}

/// Conserved curves that hold along the flow from this system's initial data.
pub fn applicable_curves(sys: &FlowSystem) -> Vec<ConservedCurveId> {
    use ConservedCurveId::*;
    match sys.geom {
        ModelGeometry::Solv if sys.h.0[1] != sys.h.0[2] => vec![SolvCurve, Solv33Power, SolvG00Sq],
        ModelGeometry::Solv => vec![Solv33Power, SolvG00Sq],
        ModelGeometry::E2 if !sys.is_static() => vec![E2Curve, Solv33Power, SolvG00Sq],
        ModelGeometry::S3 => match s3_boundary_stratum(&sys.h.0) {
            Some(S3Stratum::AEqB | S3Stratum::BEqCInner) => vec![S3KappaAB],
            Some(S3Stratum::BEqCOuter) => vec![S3KappaBC],
            _ => vec![],
        },
        _ => vec![],
    }
}

/// Worst residual of each applicable conserved curve over a trajectory.
pub fn curve_residuals(sys: &FlowSystem, traj: &Trajectory) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for id in applicable_curves(sys) {
        let mut worst = 0.0_f64;
        for s in &traj.samples {
            let g = DiagonalMetric4::new(s.state.as_slice().try_into().expect("metric sample"))?;
            let gap = match (id, traj.gap_pair) {
                (ConservedCurveId::SolvCurve, Some((1, 2))) => s.gap,
                _ => None,
            };
            worst = worst.max(conserved_residual_with_gap(id, sys.geom, &g, gap, &sys.h)?);
        }
        out.insert(format!("{id:?}"), worst);
    }
    Ok(out)
}

/// Fills `rep.observed` (caller's component order) and the residuals from an
/// integrated trajectory of `sys`.
pub fn attach_observation(rep: &mut FateReport, sys: &FlowSystem, traj: &Trajectory, floor_eps: f64) -> Result<()> {
    let obs = observe(sys, traj, floor_eps)?;
    rep.residuals = curve_residuals(sys, traj)?;
    rep.residuals.insert("det_rel_drift".into(), traj.max_det_drift());
    rep.residuals.insert("monotonicity_violations".into(), monitor(traj).len() as f64);
    let mut obs_user = obs.clone();
    obs_user.g = to_user(&sys.perm, &obs.g);
    obs_user.slopes = to_user(&sys.perm, &obs.slopes);
    obs_user.trends = to_user(&sys.perm, &obs.trends);
    obs_user.ric = ric_to_user(&sys.perm, &obs.ric);
    obs_user.ric11_over_g11 = obs_user.ric[0] / obs_user.g[1];
    rep.observed = Some(obs_user);
    Ok(())
}

/// Report for a run whose prediction is unavailable (an S³ point within tolerance
/// of M_S), carrying the observed fate and the margin.
pub fn observed_only_report(sys: &FlowSystem, observed_fate: Fate, margin: Option<f64>) -> FateReport {
    FateReport {
        geometry: sys.geom,
        fate: observed_fate,
        stratum: None,
        predicted: Predicted::default(),
        observed: None,
        constants: BTreeMap::new(),
        residuals: BTreeMap::new(),
        margin,
    }
}

/// Classify, integrate from h, and attach the observation and residuals.
pub fn classify_and_observe(
    geom: ModelGeometry,
    h: &DiagonalMetric4,
    copts: &ClassifyOptions,
    iopts: &IntegratorOptions,
) -> Result<(FateReport, Trajectory)> {
    let sys = make_system(geom, h)?;
    let mut rep = classify_fate(geom, h, copts)?;
    let traj = integrate(&sys, h, iopts)?;
    if traj.stop == StopReason::StepFailure {
        return Err(BachError::Integration(format!("step size underflow at t = {}", traj.last().t)));
    }
    attach_observation(&mut rep, &sys, &traj, iopts.floor_eps)?;
    Ok((rep, traj))
}

/// Predicted limits in the system's canonical order, for comparison with [`observe`].
pub fn canonical_prediction(sys: &FlowSystem, side: Option<S3Stratum>) -> Result<(Fate, Predicted)> {
    let t = table(sys, side)?;
    Ok((t.fate, t.predicted))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(g: [f64; 4]) -> DiagonalMetric4 {
        DiagonalMetric4::new(g).unwrap()
    }

    fn value(l: Option<Limit>) -> f64 {
        match l {
            Some(Value(x)) => x,
            other => panic!("expected a value, got {other:?}"),
        }
    }

    #[test]
    fn e2_limits_follow_eta() {
        let h = m([1.0, 1.0, 2.0, 1.0]);
        let r = predicted_limits(ModelGeometry::E2, &h).unwrap();
        assert_eq!(r.fate, Fate::ConvergeFlat4);
        let e = 2f64.powi(25) / (81.0 * 512.0);
        let l = (432.0 * e).powf(0.025);
        assert!((value(r.predicted.g[1]) / l - 1.0).abs() < 1e-14);
        assert!((value(r.predicted.g[2]) / l - 1.0).abs() < 1e-14);
        // μ = γ / det h = 1/2 here.
        assert!((value(r.predicted.g[0]) / (0.5f64.sqrt() * l) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn table_entries() {
        let id = DiagonalMetric4::identity();
        let r = predicted_limits(ModelGeometry::Sl2, &id).unwrap();
        assert_eq!(r.fate, Fate::CollapseToSurface);
        assert_eq!(r.predicted.ric[1], Some(Value(-1.0)));
        assert_eq!(r.predicted.scalar, Some(Zero));
        assert_eq!(predicted_limits(ModelGeometry::S3, &id).unwrap().fate, Fate::Static);
        assert_eq!(predicted_limits(ModelGeometry::H3, &m([1.0, 2.0, 2.0, 2.0])).unwrap().fate, Fate::Static);
        assert_eq!(predicted_limits(ModelGeometry::Solv, &id).unwrap().fate, Fate::CollapseToCurve);
        assert_eq!(predicted_limits(ModelGeometry::E2, &id).unwrap().fate, Fate::Static);
        assert!(matches!(
            predicted_limits(ModelGeometry::S3, &m([1.0, 1.0, 1.2, 1.5])),
            Err(BachError::Unclassified(_))
        ));
        let r = predicted_limits(ModelGeometry::S3, &m([1.0, 1.0, 4.0, 4.0])).unwrap();
        assert_eq!((r.fate, r.stratum), (Fate::CollapseTo3Manifold, Some(S3Stratum::L1)));
        let r = predicted_limits(ModelGeometry::S3, &m([1.0, 1.0, 9.0, 9.0])).unwrap();
        assert_eq!((r.fate, r.stratum), (Fate::CollapseToSurface, Some(S3Stratum::BEqCOuter)));
    }

    #[test]
    fn predictions_are_reported_in_user_order() {
        // Solv sorts (g11, g22); the user gave the larger one first.
        let r = predicted_limits(ModelGeometry::Sl2, &m([1.0, 1.0, 3.0, 2.0])).unwrap();
        assert_eq!(r.predicted.g[2], Some(Infinity));
        let r = predicted_limits(ModelGeometry::Rxs2, &m([2.0, 2.0, 1.0, 1.0])).unwrap();
        assert_eq!(r.predicted.g[0], Some(Zero));
        assert_eq!(r.predicted.g[3], Some(Infinity));
    }

    #[test]
    fn s3_interior_sides() {
        let opts = ClassifyOptions::default();
        let r = classify_fate(ModelGeometry::S3, &m([1.0, 1.0, 1.2, 1.5]), &opts).unwrap();
        assert_eq!((r.fate, r.stratum), (Fate::ConvergeCurved4, Some(S3Stratum::DL0)));
        let r = classify_fate(ModelGeometry::S3, &m([1.0, 0.2, 2.0, 2.5]), &opts).unwrap();
        assert_eq!((r.fate, r.stratum), (Fate::CollapseToSurface, Some(S3Stratum::DInfinity)));
        assert!(r.margin.unwrap() > 0.0);
    }

    #[test]
    fn points_on_the_separatrix_are_indeterminate() {
        let c = 1.2 * 4f64.cbrt();
        let p = stable_manifold_point(1.0, c, 1e-13).unwrap();
        let h = m([1.0, 1.0 / (p.b * c), p.b, c]);
        match classify_fate(ModelGeometry::S3, &h, &ClassifyOptions::default()) {
            Err(BachError::Indeterminate { margin, .. }) => assert!(margin.abs() < 1e-10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn observation_of_a_nil_run() {
        let id = DiagonalMetric4::identity();
        let (rep, _) =
            classify_and_observe(ModelGeometry::Nil, &id, &ClassifyOptions::default(), &IntegratorOptions::until(1e6))
                .unwrap();
        let o = rep.observed.unwrap();
        assert_eq!(o.fate, Fate::CollapseToSurface);
        assert_eq!(o.trends, [Trend::Shrinking, Trend::Shrinking, Trend::Growing, Trend::Growing]);
        // Power laws with exponents (−1, −5, 3, 3)/22.
        for (s, e) in o.slopes.iter().zip([-1.0, -5.0, 3.0, 3.0]) {
            assert!((s - e / 22.0).abs() < 1e-5, "{:?}", o.slopes);
        }
    }

    #[test]
    fn compare_reports_mismatches() {
        let sys = make_system(ModelGeometry::E2, &m([1.0, 1.0, 2.0, 1.0])).unwrap();
        let (fate, p) = canonical_prediction(&sys, None).unwrap();
        let o = Observed {
            t: 1.0,
            stop: StopReason::Stalled,
            g: [1.0; 4],
            ric: [0.0; 3],
            scalar: 0.0,
            scalar_at_tenth: 0.0,
            ric11_over_g11: 0.0,
            slopes: [0.0; 4],
            trends: [Trend::Settling; 4],
            fate: Fate::ConvergeFlat4,
        };
        let out = compare(fate, &p, &o, 1e-2);
        assert!(out.iter().any(|s| s.starts_with("g11")), "{out:?}");
        assert!(!out.iter().any(|s| s.starts_with("fate")));
    }
}
