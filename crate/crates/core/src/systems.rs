//! Bach-flow right-hand sides: full diagonal 4-metrics, the 2×2 scale systems,
//! and the reduced and adjusted (g00, b, c) systems on S³.

use serde::{Deserialize, Serialize};

use crate::error::{BachError, Result};
use crate::geometry::{rel_eq, DiagonalMetric4, ModelGeometry, Sym4};
use crate::lie_geometry::bach_2x2;
use std::sync::OnceLock;

use crate::polynomials::{eval_shifted, p2, p3, q2, r3, s_sl2, shift, u3, Arg, Dense, P3_D, Q3_D, S_SL2_D};

/// Relative tolerance for deciding that two initial components are equal.
pub const EQUALITY_RTOL: f64 = 1e-12;

/// How the integrator represents a pair of slice components that may merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairMode {
    /// Every component evolves in its own log coordinate.
    Plain,
    /// The pair is exactly equal and stays equal.
    Tied { lo: usize, hi: usize },
    /// The pair is tracked through ln(g_lo·g_hi) and ln(g_hi − g_lo).
    Gap { lo: usize, hi: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSystem {
    pub geom: ModelGeometry,
    /// Initial metric in canonical order.
    pub h: DiagonalMetric4,
    /// canonical[i] = user[perm[i]].
    pub perm: [usize; 4],
    pub beta: f64,
    pub det_h: f64,
    /// Nil: h11 / h00⁵.
    pub alpha: Option<f64>,
    /// Nil: 22α⁴β. Solv and E(2): h00³h33. 2×2 products: f1·f2.
    pub gamma: Option<f64>,
    /// Solv and E(2): γ / det h.
    pub mu: Option<f64>,
    pub pair: PairMode,
    /// Decided from equalities among the initial components, never from rate values.
    pub static_flow: bool,
}

fn sort_perm(h: &[f64; 4], idx: &[usize]) -> [usize; 4] {
    let mut perm = [0, 1, 2, 3];
    let mut sel: Vec<usize> = idx.to_vec();
    // Stable, so equal components keep their order and the permutation is the identity.
    sel.sort_by(|&a, &b| h[a].partial_cmp(&h[b]).expect("finite"));
    for (slot, src) in idx.iter().zip(sel) {
        perm[*slot] = src;
    }
    perm
}

fn tie(h: &mut [f64; 4], lo: usize, hi: usize) {
    let m = (h[lo] * h[hi]).sqrt();
    h[lo] = m;
    h[hi] = m;
}

pub fn make_system(geom: ModelGeometry, h: &DiagonalMetric4) -> Result<FlowSystem> {
    let user = DiagonalMetric4::new(h.0)?.0;
    let perm = match geom {
        ModelGeometry::Solv | ModelGeometry::E2 => sort_perm(&user, &[1, 2]),
        ModelGeometry::Sl2 => sort_perm(&user, &[2, 3]),
        ModelGeometry::S3 => sort_perm(&user, &[1, 2, 3]),
        _ => [0, 1, 2, 3],
    };
    let mut g: [f64; 4] = std::array::from_fn(|i| user[perm[i]]);
    let eq = |g: &[f64; 4], i: usize, j: usize| rel_eq(g[i], g[j], EQUALITY_RTOL);

    let pair = match geom {
        ModelGeometry::Solv | ModelGeometry::E2 => {
            if eq(&g, 1, 2) {
                PairMode::Tied { lo: 1, hi: 2 }
            } else {
                PairMode::Gap { lo: 1, hi: 2 }
            }
        }
        ModelGeometry::Sl2 => {
            if eq(&g, 2, 3) {
                PairMode::Tied { lo: 2, hi: 3 }
            } else {
                PairMode::Gap { lo: 2, hi: 3 }
            }
        }
        ModelGeometry::S3 => {
            if eq(&g, 2, 3) {
                PairMode::Tied { lo: 2, hi: 3 }
            } else if eq(&g, 1, 2) {
                PairMode::Tied { lo: 1, hi: 2 }
            } else {
                PairMode::Gap { lo: 2, hi: 3 }
            }
        }
        _ => PairMode::Plain,
    };
    if let PairMode::Tied { lo, hi } = pair {
        tie(&mut g, lo, hi);
    }
    if geom == ModelGeometry::S3 && eq(&g, 1, 2) && eq(&g, 2, 3) {
        let m = (g[1] * g[2] * g[3]).cbrt();
        g[1] = m;
        g[2] = m;
        g[3] = m;
    }
    if geom == ModelGeometry::H3 {
        if !(eq(&g, 1, 2) && eq(&g, 2, 3)) {
            return Err(BachError::Domain(
                "h3 requires h11 = h22 = h33 (constant curvature slice)".into(),
            ));
        }
    }
    if let Some((k1, k2)) = geom.product_factors() {
        use crate::geometry::SurfaceKind::Flat;
        if k1 != Flat && !eq(&g, 0, 1) {
            return Err(BachError::Domain(format!(
                "{geom}: curved first factor requires h00 = h11"
            )));
        }
        if k2 != Flat && !eq(&g, 2, 3) {
            return Err(BachError::Domain(format!(
                "{geom}: curved second factor requires h22 = h33"
            )));
        }
    }

    let static_flow = match geom {
        ModelGeometry::R3 | ModelGeometry::H3 | ModelGeometry::R2xr2 => true,
        ModelGeometry::E2 => matches!(pair, PairMode::Tied { .. }),
        ModelGeometry::S3 => eq(&g, 1, 2) && eq(&g, 2, 3),
        ModelGeometry::S2xs2 | ModelGeometry::S2xh2 | ModelGeometry::H2xh2 => eq(&g, 0, 2),
        _ => false,
    };
    if static_flow && matches!(geom, ModelGeometry::S2xs2 | ModelGeometry::S2xh2 | ModelGeometry::H2xh2) {
        let m = (g[0] * g[2]).sqrt();
        g = [m; 4];
    }

    let h = DiagonalMetric4(g);
    let det_h = h.det();
    let beta = 1.0 / (6.0 * det_h * det_h);
    let (mut alpha, mut gamma, mut mu) = (None, None, None);
    match geom {
        ModelGeometry::Nil => {
            let a = g[1] / g[0].powi(5);
            alpha = Some(a);
            gamma = Some(22.0 * a.powi(4) * beta);
        }
        ModelGeometry::Solv | ModelGeometry::E2 => {
            let gm = g[0].powi(3) * g[3];
            gamma = Some(gm);
            mu = Some(gm / det_h);
        }
        _ if geom.product_factors().is_some() => {
            gamma = Some(((g[0] * g[1]) * (g[2] * g[3])).sqrt());
        }
        _ => {}
    }
    Ok(FlowSystem {
        geom,
        h,
        perm,
        beta,
        det_h,
        alpha,
        gamma,
        mu,
        pair,
        static_flow,
    })
}

impl FlowSystem {
    pub fn canonicalize(&self, user: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| user[self.perm[i]])
    }

    pub fn to_user(&self, canonical: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[self.perm[i]] = canonical[i];
        }
        out
    }

    /// True when the initial metric is a fixed point of the flow.
    pub fn is_static(&self) -> bool {
        self.static_flow
    }

    /// d(ln g_ii)/dt = B_ii / g_ii at a canonical-order metric, with β frozen.
    pub fn log_rates(&self, g: &[f64; 4]) -> [f64; 4] {
        self.log_rates_with_gap(g, None)
    }

    /// As [`FlowSystem::log_rates`], with g33 − g22 supplied separately for ℍ-like
    /// and spherical slices when it is known more accurately than the difference.
    pub fn log_rates_with_gap(&self, g: &[f64; 4], delta: Option<f64>) -> [f64; 4] {
        let [g0, x, y, z] = *g;
        if self.static_flow {
            return [0.0; 4];
        }
        let k = self.beta * g0 * g0;
        let mut r = match self.geom {
            ModelGeometry::R3 | ModelGeometry::H3 => [0.0; 4],
            ModelGeometry::Nil => {
                let n = k * x.powi(4);
                [-n, -5.0 * n, 3.0 * n, 3.0 * n]
            }
            ModelGeometry::Solv => {
                let p = p2(x, y);
                [-k * p, -k * q2(x, y), -k * q2(y, x), 3.0 * k * p]
            }
            ModelGeometry::E2 => {
                let p = p2(-x, y);
                [-k * p, -k * q2(-x, y), -k * q2(y, -x), 3.0 * k * p]
            }
            ModelGeometry::Sl2 | ModelGeometry::S3 => {
                let t = shifted_tables();
                let tabs = if self.geom == ModelGeometry::Sl2 { &t.sl2 } else { &t.s3 };
                let d = delta.unwrap_or(z - y);
                tabs.map(|tab| -k * eval_shifted(&tab, x, y, d))
            }
            _ => {
                let (k1, k2) = self.geom.product_factors().expect("product geometry");
                let f1 = (g0 * x).sqrt();
                let f2 = (y * z).sqrt();
                let (r1, r2) = bach_2x2(2.0 * k1.sign() / f1, 2.0 * k2.sign() / f2, 1.0, 1.0);
                [r1, r1, r2, r2]
            }
        };
        if let PairMode::Tied { lo, hi } = self.pair {
            r[hi] = r[lo];
        }
        r
    }

    /// d(ln Δ)/dt for Δ = g_hi − g_lo of the tracked pair, written without the
    /// cancellation in B_hi/Δ − B_lo/Δ.
    pub fn gap_log_rate(&self, g: &[f64; 4], delta: Option<f64>) -> Option<f64> {
        let [g0, x, y, z] = *g;
        let d = delta.unwrap_or(z - y);
        let k = self.beta * g0 * g0;
        let w = match self.geom {
            ModelGeometry::Solv => {
                let s = x + y;
                s * s * (5.0 * x * x + x * y + 5.0 * y * y)
            }
            ModelGeometry::E2 => s_sl2(0.0, x, y),
            ModelGeometry::Sl2 => eval_shifted(&shifted_tables().sl2_gap, x, y, d),
            ModelGeometry::S3 => eval_shifted(&shifted_tables().s3_gap, x, y, d),
            _ => return None,
        };
        Some(-k * w)
    }
}

/// Rate polynomials of the ℍ-like and spherical slices in (g11, g22, g33 − g22).
struct ShiftedTables {
    sl2: [Dense; 4],
    s3: [Dense; 4],
    sl2_gap: Dense,
    s3_gap: Dense,
}

fn shifted_tables() -> &'static ShiftedTables {
    static TABLES: OnceLock<ShiftedTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        use Arg::*;
        ShiftedTables {
            sl2: [
                shift(&P3_D, [NegX, Y, Z]),
                shift(&Q3_D, [NegX, Y, Z]),
                shift(&Q3_D, [Y, NegX, Z]),
                shift(&Q3_D, [Z, NegX, Y]),
            ],
            s3: [
                shift(&P3_D, [X, Y, Z]),
                shift(&Q3_D, [X, Y, Z]),
                shift(&Q3_D, [Y, Z, X]),
                shift(&Q3_D, [Z, X, Y]),
            ],
            sl2_gap: shift(&S_SL2_D, [X, Y, Z]),
            s3_gap: shift(&S_SL2_D, [NegX, Y, Z]),
        }
    })
}

/// Bach tensor along the flow, with the system's frozen β; `g` in canonical order.
pub fn rhs_full(sys: &FlowSystem, g: &DiagonalMetric4) -> Result<Sym4> {
    let g = DiagonalMetric4::new(g.0)?.0;
    let r = sys.log_rates(&g);
    Ok(Sym4::from_array(std::array::from_fn(|i| r[i] * g[i])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductState {
    pub f1: f64,
    pub f2: f64,
}

/// (df1/dt, df2/dt) for a 2×2 product of surfaces with scales f1, f2.
pub fn rhs_2x2(family: ModelGeometry, s: ProductState) -> Result<(f64, f64)> {
    let (k1, k2) = family
        .product_factors()
        .ok_or(BachError::UnsupportedGeometry(family.tag(), "rhs_2x2"))?;
    if !(s.f1 > 0.0 && s.f2 > 0.0) {
        return Err(BachError::Domain("product scales must be positive".into()));
    }
    Ok(bach_2x2(
        2.0 * k1.sign() / s.f1,
        2.0 * k2.sign() / s.f2,
        s.f1,
        s.f2,
    ))
}

/// S³ state in the variables a = g00^{1/3}g11, b = g00^{1/3}g22, c = g00^{1/3}g33,
/// with a = det h / (bc).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedS3State {
    pub g00: f64,
    pub b: f64,
    pub c: f64,
}

impl ReducedS3State {
    pub fn new(g00: f64, b: f64, c: f64, det_h: f64) -> Result<Self> {
        let st = ReducedS3State { g00, b, c };
        let a = st.a(det_h);
        let tol = 1e-12 * c;
        if !(g00 >= 0.0 && b > 0.0 && c > 0.0 && a <= b + tol && b <= c + tol) {
            return Err(BachError::Domain(format!(
                "reduced state outside D: g00 = {g00}, a = {a}, b = {b}, c = {c}"
            )));
        }
        Ok(st)
    }

    pub fn from_metric(g: &DiagonalMetric4) -> Self {
        let k = g.0[0].cbrt();
        ReducedS3State {
            g00: g.0[0],
            b: k * g.0[2],
            c: k * g.0[3],
        }
    }

    pub fn a(&self, det_h: f64) -> f64 {
        det_h / (self.b * self.c)
    }

    pub fn to_metric(&self, det_h: f64) -> [f64; 4] {
        let k = self.g00.cbrt();
        [self.g00, self.a(det_h) / k, self.b / k, self.c / k]
    }
}

fn require_s3(sys: &FlowSystem, op: &'static str) -> Result<()> {
    if sys.geom != ModelGeometry::S3 {
        return Err(BachError::UnsupportedGeometry(sys.geom.tag(), op));
    }
    Ok(())
}

/// Adjusted-system factors (−p, −⅔r(b,a,c)·b, −⅔r(c,a,b)·c) without the g00 factor.
fn adjusted_core(det_h: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let a = det_h / (b * c);
    (
        -p3(a, b, c),
        -2.0 / 3.0 * r3(b, a, c) * b,
        -2.0 / 3.0 * r3(c, a, b) * c,
    )
}

/// d(g00, b, c)/dt under the physical flow.
pub fn rhs_reduced_s3(sys: &FlowSystem, st: &ReducedS3State) -> Result<[f64; 3]> {
    require_s3(sys, "rhs_reduced_s3")?;
    let st = ReducedS3State::new(st.g00, st.b, st.c, sys.det_h)?;
    let (p, db, dc) = adjusted_core(sys.det_h, st.b, st.c);
    let w = sys.beta * st.g00.powf(2.0 / 3.0);
    Ok([p * st.g00 * w, db * w, dc * w])
}

/// The reduced system divided by β·g00^{2/3}; defined on g00 = 0 as well.
pub fn rhs_adjusted_s3(sys: &FlowSystem, st: &ReducedS3State) -> Result<[f64; 3]> {
    require_s3(sys, "rhs_adjusted_s3")?;
    let st = ReducedS3State::new(st.g00, st.b, st.c, sys.det_h)?;
    let (p, db, dc) = adjusted_core(sys.det_h, st.b, st.c);
    Ok([p * st.g00, db, dc])
}

/// Adjusted system restricted to the invariant boundary g00 = 0.
pub fn rhs_boundary_s3(det_h: f64, b: f64, c: f64) -> [f64; 2] {
    let (_, db, dc) = adjusted_core(det_h, b, c);
    [db, dc]
}

/// d ln(c − b)/dτ on the boundary, free of the b ≈ c cancellation.
pub fn boundary_gap_log_rate(det_h: f64, b: f64, c: f64) -> f64 {
    -2.0 / 3.0 * u3(det_h / (b * c), b, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum S3Equilibrium {
    /// a = b = c.
    P0,
    /// 4a = b = c.
    P1,
}

/// (b, c) of a boundary equilibrium.
pub fn s3_equilibrium(which: S3Equilibrium, det_h: f64) -> (f64, f64) {
    let v = match which {
        S3Equilibrium::P0 => det_h.cbrt(),
        S3Equilibrium::P1 => (4.0 * det_h).cbrt(),
    };
    (v, v)
}

/// Jacobian of the boundary adjusted system in (b, c) at an equilibrium.
pub fn jacobian_s3_at(which: S3Equilibrium, det_h: f64) -> [[f64; 2]; 2] {
    let d43 = det_h.powf(4.0 / 3.0);
    match which {
        S3Equilibrium::P0 => [[-6.0 * d43, 0.0], [0.0, -6.0 * d43]],
        S3Equilibrium::P1 => {
            let k = 3.0 * 2f64.powf(-7.0 / 3.0) * d43;
            [[-106.0 * k, 107.0 * k], [107.0 * k, -106.0 * k]]
        }
    }
}
