//! Curvature along a trajectory.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{DiagonalMetric3, ModelGeometry};
use crate::integrator::{Sample, Trajectory};
use crate::lie_geometry::{closed_form_curvature_with_gaps, CurvatureReport, Gaps};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePoint {
    pub t: f64,
    pub ric: [f64; 3],
    pub scalar: f64,
    /// K12, K13, K23.
    pub sectional: [f64; 3],
    pub ric11_over_g11: f64,
}

/// Curvature of one canonical-order metric sample. `gap` is the exact difference
/// of metric components (lo, hi), when the integrator tracked one.
pub fn curvature_at(
    geom: ModelGeometry,
    g: &[f64],
    gap: Option<((usize, usize), f64)>,
) -> Result<CurvatureReport> {
    let slice = [g[1], g[2], g[3]];
    let mut gaps = Gaps::of(&slice);
    match gap {
        Some(((1, 2), d)) => gaps.d12 = d,
        Some(((2, 3), d)) => gaps.d23 = d,
        _ => {}
    }
    closed_form_curvature_with_gaps(geom, &DiagonalMetric3::new(slice)?, gaps)
}

fn point(geom: ModelGeometry, pair: Option<(usize, usize)>, s: &Sample) -> Result<CurvaturePoint> {
    let c = curvature_at(geom, &s.state, pair.zip(s.gap))?;
    Ok(CurvaturePoint {
        t: s.t,
        ric: c.ric.0,
        scalar: c.scalar,
        sectional: c.sectional,
        ric11_over_g11: c.ric.0[0] / s.state[1],
    })
}

/// Per-sample curvature in the trajectory's canonical frame.
pub fn curvature_trace(traj: &Trajectory, geom: ModelGeometry) -> Result<Vec<CurvaturePoint>> {
    traj.samples.iter().map(|s| point(geom, traj.gap_pair, s)).collect()
}

const PAIRS: [(usize, usize); 3] = [(1, 2), (1, 3), (2, 3)];

impl CurvaturePoint {
    /// Re-indexes a canonical-frame point by `perm` (canonical[i] = user[perm[i]]);
    /// `user_g11` is the caller's g11 at the same sample.
    pub fn to_user(&self, perm: &[usize; 4], user_g11: f64) -> CurvaturePoint {
        let mut ric = [0.0; 3];
        let mut sectional = [0.0; 3];
        for i in 0..3 {
            ric[perm[i + 1] - 1] = self.ric[i];
        }
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            let (ua, ub) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
            let idx = PAIRS.iter().position(|&p| p == (ua, ub)).expect("slice pair");
            sectional[idx] = self.sectional[k];
        }
        CurvaturePoint {
            t: self.t,
            ric,
            scalar: self.scalar,
            sectional,
            ric11_over_g11: ric[0] / user_g11,
        }
    }
}

/// Per-sample curvature in the caller's component order.
pub fn user_curvature_trace(traj: &Trajectory, geom: ModelGeometry) -> Result<Vec<CurvaturePoint>> {
    let trace = curvature_trace(traj, geom)?;
    Ok(trace
        .iter()
        .enumerate()
        .map(|(i, p)| p.to_user(&traj.perm, traj.user_state(i)[1]))
        .collect())
}
