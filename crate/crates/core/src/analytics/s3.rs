//! The g00 = 0 boundary of the reduced S³ system: fates of boundary points and
//! the stable manifold of the saddle P1.

use serde::{Deserialize, Serialize};

use crate::error::{BachError, Result};
use crate::integrator::{IntegratorOptions, LogSystem, StepOutcome, Stepper};
use crate::polynomials::{r3, u3};
use crate::systems::{s3_equilibrium, S3Equilibrium};

/// Adjusted boundary flow in (b, c). With b < c the coordinates are
/// (ln bc, ln(c − b)); on b = c they are (ln b, ln c) with equal rates.
pub struct BoundaryFlow {
    pub det_h: f64,
    pub tied: bool,
}

impl BoundaryFlow {
    pub fn encode(&self, b: f64, c: f64) -> Vec<f64> {
        if self.tied {
            vec![b.ln(), b.ln()]
        } else {
            vec![b.ln() + c.ln(), (c - b).ln()]
        }
    }

    pub fn bc(&self, u: &[f64]) -> (f64, f64) {
        if self.tied {
            let b = u[0].exp();
            return (b, b);
        }
        let sp = (0.5 * u[0]).exp();
        let d = u[1].exp();
        let b = sp * (2.0 * sp / (d + d.hypot(2.0 * sp)));
        (b, b + d)
    }

    fn log_rates(&self, b: f64, c: f64) -> (f64, f64) {
        let a = self.det_h / (b * c);
        let rb = -2.0 / 3.0 * r3(b, a, c);
        if self.tied {
            return (rb, rb);
        }
        (rb, -2.0 / 3.0 * r3(c, a, b))
    }
}

impl LogSystem for BoundaryFlow {
    fn dim(&self) -> usize {
        2
    }

    fn rates(&self, u: &[f64], du: &mut [f64]) {
        let (b, c) = self.bc(u);
        let (rb, rc) = self.log_rates(b, c);
        if self.tied {
            du[0] = rb;
            du[1] = rb;
        } else {
            du[0] = rb + rc;
            du[1] = -2.0 / 3.0 * u3(self.det_h / (b * c), b, c);
        }
    }

    fn decode(&self, u: &[f64]) -> Vec<f64> {
        let (b, c) = self.bc(u);
        vec![b, c]
    }

    fn log_det(&self, _u: &[f64]) -> f64 {
        0.0
    }

    fn rescale(&self, _u: &mut [f64], _s: f64) {}

    fn det_degree(&self) -> f64 {
        1.0
    }

    fn rate_norm(&self, u: &[f64], _du: &[f64]) -> f64 {
        let (b, c) = self.bc(u);
        let (rb, rc) = self.log_rates(b, c);
        rb.abs().max(rc.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryFate {
    /// Converges to a = b = c.
    ToP0,
    /// b, c → ∞ and a → 0.
    ToInfinity,
}

/// Relative spread below which a boundary trajectory counts as having reached P0.
pub const P0_SPREAD: f64 = 1e-6;
/// b above (1 + ESCAPE_MARGIN)·b(P1) counts as escape: db > 0 on that region
/// and it holds no equilibrium.
pub const ESCAPE_MARGIN: f64 = 1e-9;

/// Fate of the boundary trajectory through (b, c), with √(det/c) ≤ b ≤ c.
pub fn boundary_fate(det_h: f64, b: f64, c: f64) -> Result<BoundaryFate> {
    if !(det_h > 0.0 && b > 0.0 && c >= b) {
        return Err(BachError::Domain(format!("boundary point outside D: b = {b}, c = {c}")));
    }
    let flow = BoundaryFlow { det_h, tied: b == c };
    let scale = det_h.cbrt();
    let (b_p1, _) = s3_equilibrium(S3Equilibrium::P1, det_h);
    let opts = IntegratorOptions {
        rtol: 1e-12,
        atol: 1e-14,
        max_steps: 2_000_000,
        ..IntegratorOptions::until(1e30 / scale.powi(4))
    };
    let mut st = Stepper::new(&flow, flow.encode(b, c), opts)?;
    loop {
        let (b, c) = flow.bc(st.u());
        let a = det_h / (b * c);
        if b > (1.0 + ESCAPE_MARGIN) * b_p1 {
            return Ok(BoundaryFate::ToInfinity);
        }
        if (b - a).abs().max(c - b) / c < P0_SPREAD {
            return Ok(BoundaryFate::ToP0);
        }
        match st.step() {
            StepOutcome::Accepted => {}
            StepOutcome::Finished => {
                return Err(BachError::Integration("boundary trajectory did not settle".into()))
            }
            StepOutcome::Failed(r) => {
                return Err(BachError::Integration(format!("boundary integration stopped: {r:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub c: f64,
    pub b: f64,
    /// Final bracket width.
    pub width: f64,
}

/// Default relative bracket width for stable-manifold bisection.
pub const BISECTION_RTOL: f64 = 1e-12;

/// b_S(c): the point of M_S at height c, by bisection between the a = b edge
/// (which flows to P0) and the b = c edge (which escapes).
pub fn stable_manifold_point(det_h: f64, c: f64, rtol: f64) -> Result<ManifoldPoint> {
    let (_, c1) = s3_equilibrium(S3Equilibrium::P1, det_h);
    if !(c > c1) {
        return Err(BachError::Domain(format!("c = {c} must exceed the P1 value {c1}")));
    }
    let mut lo = (det_h / c).sqrt();
    let mut hi = c;
    let f_lo = boundary_fate(det_h, lo, c)?;
    let f_hi = boundary_fate(det_h, hi, c)?;
    if f_lo == f_hi {
        return Err(BachError::BisectionFailure(format!(
            "both ends of the segment at c = {c} give {f_lo:?}"
        )));
    }
    while hi - lo > rtol * c {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if boundary_fate(det_h, mid, c)? == f_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ManifoldPoint {
        c,
        b: 0.5 * (lo + hi),
        width: hi - lo,
    })
}

/// Sampled stable manifold of P1 on the g00 = 0 boundary.
pub fn stable_manifold_s3(det_h: f64, c_grid: &[f64]) -> Result<Vec<ManifoldPoint>> {
    c_grid
        .iter()
        .map(|&c| stable_manifold_point(det_h, c, BISECTION_RTOL))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fates_of_simple_points() {
        assert_eq!(boundary_fate(1.0, 1.0, 1.0).unwrap(), BoundaryFate::ToP0);
        assert_eq!(boundary_fate(1.0, 0.95, 1.1).unwrap(), BoundaryFate::ToP0);
        assert_eq!(boundary_fate(1.0, 2.0, 2.0).unwrap(), BoundaryFate::ToInfinity);
        let c = 2.0;
        assert_eq!(boundary_fate(1.0, (1.0 / c as f64).sqrt(), c).unwrap(), BoundaryFate::ToP0);
        assert!(boundary_fate(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn manifold_points_lie_between_the_edges() {
        let c1 = 4f64.cbrt();
        let p = stable_manifold_point(1.0, c1 * 1.05, 1e-10).unwrap();
        assert!(p.b > (1.0 / p.c).sqrt() && p.b < p.c);
        assert!(p.width <= 1e-10 * p.c);
        // Near P1 the curve leaves along (1, −1).
        assert!((p.b + p.c - 2.0 * c1).abs() < 0.02 * c1, "{p:?}");
        assert!(stable_manifold_point(1.0, 1.0, 1e-10).is_err());
    }
}
