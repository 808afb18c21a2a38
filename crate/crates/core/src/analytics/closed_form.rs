//! Exact solutions and conserved curves.

use serde::{Deserialize, Serialize};

use crate::error::{BachError, Result};
use crate::geometry::{rel_eq, DiagonalMetric4, ModelGeometry};
use crate::systems::{make_system, FlowSystem, PairMode, EQUALITY_RTOL};

/// Rate in g33(t)² = RATE·t + h33² along 4a = b = c on S³.
pub const L1_RATE: f64 = 1.0 / 16.0;

fn on_l1(g: &[f64; 4]) -> bool {
    rel_eq(g[2], g[3], EQUALITY_RTOL) && rel_eq(4.0 * g[1], g[2], EQUALITY_RTOL)
}

fn product_scales(g: &[f64; 4]) -> (f64, f64) {
    ((g[0] * g[1]).sqrt(), (g[2] * g[3]).sqrt())
}

/// Canonical-order closed form, or None when (geom, h) has no closed form.
fn canonical_closed_form(sys: &FlowSystem, t: f64) -> Option<[f64; 4]> {
    let h = sys.h.0;
    if sys.is_static() {
        return Some(h);
    }
    match sys.geom {
        ModelGeometry::Nil => {
            let s = sys.gamma? * t + h[0].powi(-22);
            let k = h[0].powi(3) * s.powf(3.0 / 22.0);
            Some([
                s.powf(-1.0 / 22.0),
                sys.alpha? * s.powf(-5.0 / 22.0),
                h[2] * k,
                h[3] * k,
            ])
        }
        ModelGeometry::Solv if matches!(sys.pair, PairMode::Tied { .. }) => {
            let mu = sys.mu?;
            let s = 24.0 * mu * sys.beta * t + h[1].powi(-6);
            let g = s.powf(-1.0 / 6.0);
            Some([mu.sqrt() * g, g, g, h[1].powi(3) * h[3] * s.sqrt()])
        }
        ModelGeometry::S3 if on_l1(&h) => {
            let s = L1_RATE * t + h[3] * h[3];
            let g = s.sqrt();
            Some([4.0 * sys.det_h / (s * g), 0.25 * g, g, g])
        }
        geom if geom.product_factors().is_some() => {
            let (k1, k2) = geom.product_factors()?;
            let (f1, f2) = product_scales(&h);
            let gamma = f1 * f2;
            let (n1, n2) = match (k1.sign() == 0.0, k2.sign() == 0.0) {
                (true, false) => {
                    let f = (t / 3.0 + f2 * f2).sqrt();
                    (gamma / f, f)
                }
                (false, true) => {
                    let f = (t / 3.0 + f1 * f1).sqrt();
                    (f, gamma / f)
                }
                (false, false) => {
                    let (small, large) = (f1.min(f2), f1.max(f2));
                    let mu = 0.5 * ((small + large) / (large - small)).ln();
                    let u = t / (3.0 * gamma) + mu;
                    let lo = (gamma * u.tanh()).sqrt();
                    let hi = (gamma / u.tanh()).sqrt();
                    if f1 < f2 {
                        (lo, hi)
                    } else {
                        (hi, lo)
                    }
                }
                (true, true) => (f1, f2),
            };
            let (r1, r2) = (n1 / f1, n2 / f2);
            Some([h[0] * r1, h[1] * r1, h[2] * r2, h[3] * r2])
        }
        _ => None,
    }
}

/// Exact solution at time t, in the caller's component order.
pub fn closed_form_state(geom: ModelGeometry, h: &DiagonalMetric4, t: f64) -> Result<DiagonalMetric4> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(BachError::Domain(format!("t must be finite and nonnegative, got {t}")));
    }
    let sys = make_system(geom, h)?;
    let g = canonical_closed_form(&sys, t)
        .ok_or_else(|| BachError::NotClosedForm(format!("{geom} from {:?}", h.components())))?;
    Ok(DiagonalMetric4(sys.to_user(g)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConservedCurveId {
    /// (g11g22)²⁵ = η(g22 − g11)⁴(2g22² + g11g22 + 2g11²)³ on Solv.
    SolvCurve,
    /// (g11g22)²⁵ = η(g22 + g11)⁴(2g22² − g11g22 + 2g11²)³ on E(2).
    E2Curve,
    /// (4 det h − g00g22³)g00³g22 = κ on the S³ strata that converge.
    S3KappaAB,
    /// (g00g22³ − 4 det h)g00³g22 = κ on the escaping b = c stratum of S³.
    S3KappaBC,
    /// g33 = γ g00⁻³ on Solv and E(2).
    Solv33Power,
    /// g00² = μ g11g22 on Solv and E(2).
    SolvG00Sq,
}

impl ConservedCurveId {
    pub const ALL: [ConservedCurveId; 6] = [
        ConservedCurveId::SolvCurve,
        ConservedCurveId::E2Curve,
        ConservedCurveId::S3KappaAB,
        ConservedCurveId::S3KappaBC,
        ConservedCurveId::Solv33Power,
        ConservedCurveId::SolvG00Sq,
    ];

    pub fn applies_to(self, geom: ModelGeometry) -> bool {
        use ConservedCurveId::*;
        match self {
            SolvCurve => geom == ModelGeometry::Solv,
            E2Curve => geom == ModelGeometry::E2,
            S3KappaAB | S3KappaBC => geom == ModelGeometry::S3,
            Solv33Power | SolvG00Sq => matches!(geom, ModelGeometry::Solv | ModelGeometry::E2),
        }
    }
}

/// Slice components sorted ascending, with the gap of the pair that matters for
/// the curve (g22 − g11) when the caller has it exactly.
fn sorted(g: &[f64; 4]) -> [f64; 4] {
    let mut s = [g[1], g[2], g[3]];
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    [g[0], s[0], s[1], s[2]]
}

/// Log of the curve's left side over its constant-free right side; the curve says
/// this is constant along the flow.
fn curve_log(id: ConservedCurveId, g: &[f64; 4], gap12: Option<f64>, det_h: f64) -> Result<f64> {
    use ConservedCurveId::*;
    let [g0, x, y, z] = *g;
    let v = match id {
        SolvCurve => {
            let (x, y) = (x.min(y), x.max(y));
            let d = gap12.unwrap_or(y - x);
            if !(d > 0.0) {
                return Err(BachError::Domain("the Solv curve needs g11 ≠ g22".into()));
            }
            25.0 * (x.ln() + y.ln()) - 4.0 * d.ln() - 3.0 * (2.0 * y * y + x * y + 2.0 * x * x).ln()
        }
        E2Curve => {
            25.0 * (x.ln() + y.ln()) - 4.0 * (x + y).ln() - 3.0 * (2.0 * y * y - x * y + 2.0 * x * x).ln()
        }
        S3KappaAB | S3KappaBC => {
            let s = sorted(g);
            let (g0, y) = (s[0], s[2]);
            let w = g0 * y.powi(3);
            let k = if id == S3KappaAB { 4.0 * det_h - w } else { w - 4.0 * det_h };
            if !(k > 0.0) {
                return Err(BachError::Domain(format!("{id:?} does not apply: factor is {k}")));
            }
            k.ln() + 3.0 * g0.ln() + y.ln()
        }
        Solv33Power => z.ln() + 3.0 * g0.ln(),
        SolvG00Sq => 2.0 * g0.ln() - x.ln() - y.ln(),
    };
    Ok(v)
}

/// |LHS/RHS − 1| for the curve through h, evaluated at g.
pub fn conserved_residual(
    id: ConservedCurveId,
    geom: ModelGeometry,
    g: &DiagonalMetric4,
    h: &DiagonalMetric4,
) -> Result<f64> {
    conserved_residual_with_gap(id, geom, g, None, h)
}

/// As [`conserved_residual`], taking g22 − g11 (slice components sorted) from
/// `gap12` instead of subtracting the components.
pub fn conserved_residual_with_gap(
    id: ConservedCurveId,
    geom: ModelGeometry,
    g: &DiagonalMetric4,
    gap12: Option<f64>,
    h: &DiagonalMetric4,
) -> Result<f64> {
    if !id.applies_to(geom) {
        return Err(BachError::UnsupportedGeometry(geom.tag(), "conserved curve"));
    }
    let g = DiagonalMetric4::new(g.0)?;
    let h = DiagonalMetric4::new(h.0)?;
    let det_h = h.det();
    let now = curve_log(id, &g.0, gap12, det_h)?;
    let then = curve_log(id, &h.0, None, det_h)?;
    Ok((now - then).exp_m1().abs())
}

/// η of the Solv or E(2) curve.
pub fn eta(geom: ModelGeometry, h: &DiagonalMetric4) -> Result<f64> {
    let id = match geom {
        ModelGeometry::Solv => ConservedCurveId::SolvCurve,
        ModelGeometry::E2 => ConservedCurveId::E2Curve,
        _ => return Err(BachError::UnsupportedGeometry(geom.tag(), "eta")),
    };
    Ok(curve_log(id, &h.0, None, h.det())?.exp())
}

/// κ = (4 det h − h00h22³)h00³h22 with slice components sorted ascending; the
/// escaping b = c stratum uses its negative.
pub fn kappa(h: &DiagonalMetric4) -> f64 {
    let s = sorted(&h.0);
    (4.0 * h.det() - s[0] * s[2].powi(3)) * s[0].powi(3) * s[2]
}

/// Which reading of the convergent-strata limits is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KappaForm {
    /// g00 → (κ/3)^{3/8} det^{−1/2}, slice → (3/κ)^{1/8} det^{1/2}.
    Statement,
    /// g00 → 3^{−3/8} κ det^{−1/2}, slice → 3^{1/8} κ^{−1/3} det^{1/2}.
    Proof,
}

/// (g00 limit, common slice limit) of the S³ strata with two equal slice components.
pub fn kappa_limits(kappa: f64, det_h: f64, form: KappaForm) -> (f64, f64) {
    match form {
        KappaForm::Statement => (
            (kappa / 3.0).powf(3.0 / 8.0) * det_h.powf(-0.5),
            (3.0 / kappa).powf(1.0 / 8.0) * det_h.sqrt(),
        ),
        KappaForm::Proof => (
            3f64.powf(-3.0 / 8.0) * kappa * det_h.powf(-0.5),
            3f64.powf(1.0 / 8.0) * kappa.powf(-1.0 / 3.0) * det_h.sqrt(),
        ),
    }
}
