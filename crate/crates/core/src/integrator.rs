//! Adaptive Dormand–Prince 5(4) integration in logarithmic coordinates.
//!
//! A merging pair of slice components is carried as ln(g_lo·g_hi) and
//! ln(g_hi − g_lo); every other component as ln g_ii. ln det stays a linear
//! function of the coordinates in both cases.

use serde::{Deserialize, Serialize};

use crate::error::{BachError, Result};
use crate::geometry::{rel_eq, DiagonalMetric4, ModelGeometry};
use crate::systems::{FlowSystem, PairMode, EQUALITY_RTOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// None picks a starting step from the initial rates.
    pub h_init: Option<f64>,
    /// None means t_end / 10.
    pub h_max: Option<f64>,
    pub t_end: f64,
    pub det_projection: bool,
    pub floor_eps: f64,
    pub stall_tol: f64,
    pub stall_steps: usize,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_max: None,
            t_end: 1.0,
            det_projection: false,
            floor_eps: 1e-8,
            stall_tol: 1e-14,
            stall_steps: 100,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn until(t_end: f64) -> Self {
        IntegratorOptions {
            t_end,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.rtol) && pos(self.atol) && pos(self.floor_eps) && pos(self.t_end)) {
            return Err(BachError::Domain(
                "rtol, atol, floor_eps and t_end must be positive".into(),
            ));
        }
        if self.stall_tol < 0.0 || self.max_steps == 0 {
            return Err(BachError::Domain("stall_tol ≥ 0 and max_steps ≥ 1 required".into()));
        }
        for h in [self.h_init, self.h_max].into_iter().flatten() {
            if !pos(h) {
                return Err(BachError::Domain("step sizes must be positive".into()));
            }
        }
        Ok(())
    }

    fn h_max(&self) -> f64 {
        self.h_max.unwrap_or(self.t_end / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    ReachedTEnd,
    ComponentFloor,
    Stalled,
    StepFailure,
    MaxSteps,
}

/// An autonomous system in internal log coordinates.
pub trait LogSystem {
    fn dim(&self) -> usize;
    fn rates(&self, u: &[f64], du: &mut [f64]);
    /// Positive state components represented by `u`.
    fn decode(&self, u: &[f64]) -> Vec<f64>;
    fn log_det(&self, u: &[f64]) -> f64;
    /// Scale every state component by e^s.
    fn rescale(&self, u: &mut [f64], s: f64);
    /// Number of state factors in the determinant, so that rescale(s) moves log_det by degree·s.
    fn det_degree(&self) -> f64;
    /// Size of the state's own log-rates, compared against the stall tolerance.
    fn rate_norm(&self, u: &[f64], du: &[f64]) -> f64;
    /// Difference of the tracked pair, if any.
    fn gap(&self, _u: &[f64]) -> Option<f64> {
        None
    }
}

/// The full diagonal flow of a [`FlowSystem`] in canonical order.
pub struct MetricFlow<'a> {
    pub sys: &'a FlowSystem,
}

impl<'a> MetricFlow<'a> {
    pub fn new(sys: &'a FlowSystem) -> Self {
        MetricFlow { sys }
    }

    /// Internal coordinates of a canonical-order metric.
    pub fn encode(&self, g: &[f64; 4]) -> Result<Vec<f64>> {
        let mut g = *g;
        match self.sys.pair {
            PairMode::Plain => {}
            PairMode::Tied { lo, hi } => {
                if !rel_eq(g[lo], g[hi], EQUALITY_RTOL) {
                    return Err(BachError::Domain(format!(
                        "components {lo} and {hi} must stay equal for this system"
                    )));
                }
                g[hi] = g[lo];
            }
            PairMode::Gap { lo, hi } => {
                if !(g[hi] > g[lo]) {
                    return Err(BachError::Domain(format!(
                        "component {hi} must exceed component {lo} for this system"
                    )));
                }
            }
        }
        let mut u: Vec<f64> = g.iter().map(|v| v.ln()).collect();
        if let PairMode::Gap { lo, hi } = self.sys.pair {
            u[lo] = g[lo].ln() + g[hi].ln();
            u[hi] = (g[hi] - g[lo]).ln();
        }
        Ok(u)
    }

    pub fn metric(&self, u: &[f64]) -> [f64; 4] {
        let mut g: [f64; 4] = std::array::from_fn(|i| u[i].exp());
        if let PairMode::Gap { lo, hi } = self.sys.pair {
            let sp = (0.5 * u[lo]).exp();
            let d = u[hi].exp();
            let glo = sp * (2.0 * sp / (d + d.hypot(2.0 * sp)));
            g[lo] = glo;
            g[hi] = glo + d;
        }
        g
    }
}

impl LogSystem for MetricFlow<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn rates(&self, u: &[f64], du: &mut [f64]) {
        let g = self.metric(u);
        let delta = match self.sys.pair {
            PairMode::Gap { lo: 2, hi: 3 } => Some(u[3].exp()),
            PairMode::Tied { lo: 2, hi: 3 } => Some(0.0),
            _ => None,
        };
        let r = self.sys.log_rates_with_gap(&g, delta);
        du.copy_from_slice(&r);
        if let PairMode::Gap { lo, hi } = self.sys.pair {
            du[lo] = r[lo] + r[hi];
            du[hi] = self.sys.gap_log_rate(&g, delta).expect("gap system");
        }
    }

    fn decode(&self, u: &[f64]) -> Vec<f64> {
        self.metric(u).to_vec()
    }

    fn log_det(&self, u: &[f64]) -> f64 {
        match self.sys.pair {
            PairMode::Gap { hi, .. } => u.iter().enumerate().filter(|(i, _)| *i != hi).map(|(_, v)| v).sum(),
            _ => u.iter().sum(),
        }
    }

    fn rescale(&self, u: &mut [f64], s: f64) {
        for v in u.iter_mut() {
            *v += s;
        }
        if let PairMode::Gap { lo, .. } = self.sys.pair {
            u[lo] += s;
        }
    }

    fn det_degree(&self) -> f64 {
        4.0
    }

    fn rate_norm(&self, u: &[f64], _du: &[f64]) -> f64 {
        let r = self.sys.log_rates(&self.metric(u));
        r.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn gap(&self, u: &[f64]) -> Option<f64> {
        match self.sys.pair {
            PairMode::Gap { hi, .. } => Some(u[hi].exp()),
            PairMode::Tied { .. } => Some(0.0),
            PairMode::Plain => None,
        }
    }
}

/// Uniform rescaling of a positive state so that its determinant equals `det_h`.
pub fn project_determinant(state: &DiagonalMetric4, det_h: f64) -> Result<DiagonalMetric4> {
    let g = DiagonalMetric4::new(state.0)?.0;
    if !(det_h.is_finite() && det_h > 0.0) {
        return Err(BachError::Domain("target determinant must be positive".into()));
    }
    let log_det: f64 = g.iter().map(|v| v.ln()).sum();
    let s = (det_h.ln() - log_det) / 4.0;
    if s == 0.0 {
        return Ok(DiagonalMetric4(g));
    }
    let k = s.exp();
    Ok(DiagonalMetric4(g.map(|v| v * k)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: Vec<f64>,
    /// Exact difference of the tracked pair, when the system tracks one.
    pub gap: Option<f64>,
    /// det / det(initial) − 1.
    pub det_rel_drift: f64,
    pub rate_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub stop: StopReason,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rtol: f64,
    pub geom: Option<ModelGeometry>,
    /// canonical[i] = user[perm[i]] for metric trajectories.
    pub perm: [usize; 4],
    /// Metric indices (lo, hi) whose difference `Sample::gap` reports.
    pub gap_pair: Option<(usize, usize)>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories hold the initial sample")
    }

    /// State of sample `i` in the caller's component order.
    pub fn user_state(&self, i: usize) -> Vec<f64> {
        let s = &self.samples[i].state;
        if s.len() != 4 {
            return s.clone();
        }
        let mut out = vec![0.0; 4];
        for k in 0..4 {
            out[self.perm[k]] = s[k];
        }
        out
    }

    pub fn max_det_drift(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.det_rel_drift.abs()))
    }
}

// Dormand–Prince 5(4) tableau; the systems are autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const PI_ALPHA: f64 = 0.17;
const PI_BETA: f64 = 0.04;
const SAFETY: f64 = 0.9;
/// Steps are capped at h·ρ ≤ STIFF_CAP, with ρ the local Lipschitz estimate from the
/// last two stages, so that modes near an attracting equilibrium keep decaying
/// instead of sitting on the edge of the stability region.
const STIFF_CAP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    /// t_end was reached by the previous step.
    Finished,
    Failed(StopReason),
}

/// Step-by-step driver; [`integrate_system`] wraps it with the standard stop events.
pub struct Stepper<'s, S: LogSystem + ?Sized> {
    sys: &'s S,
    opts: IntegratorOptions,
    t: f64,
    u: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    err_prev: f64,
    log_det0: f64,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
    y6: Vec<f64>,
    rho: f64,
    pub accepted: usize,
    pub rejected: usize,
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl<'s, S: LogSystem + ?Sized> Stepper<'s, S> {
    pub fn new(sys: &'s S, u0: Vec<f64>, opts: IntegratorOptions) -> Result<Self> {
        opts.validate()?;
        let n = sys.dim();
        if u0.len() != n || !all_finite(&u0) {
            return Err(BachError::Domain("initial state has wrong size or is not finite".into()));
        }
        let mut f = vec![0.0; n];
        sys.rates(&u0, &mut f);
        if !all_finite(&f) {
            return Err(BachError::Integration("non-finite rates at the initial state".into()));
        }
        let log_det0 = sys.log_det(&u0);
        let mut st = Stepper {
            sys,
            opts,
            t: 0.0,
            u: u0,
            f,
            h: 0.0,
            err_prev: 1e-4,
            log_det0,
            k: vec![vec![0.0; n]; 7],
            tmp: vec![0.0; n],
            y6: vec![0.0; n],
            rho: 0.0,
            accepted: 0,
            rejected: 0,
        };
        st.h = match opts.h_init {
            Some(h) => h.min(opts.h_max()),
            None => st.initial_step(),
        };
        Ok(st)
    }

    fn scale(&self, u: f64) -> f64 {
        self.opts.atol + self.opts.rtol * u.abs()
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.u.len() as f64;
        let norm = |v: &[f64], u: &[f64], me: &Self| {
            (v.iter().zip(u).map(|(x, y)| (x / me.scale(*y)).powi(2)).sum::<f64>() / n).sqrt()
        };
        let d0 = norm(&self.u, &self.u, self);
        let d1 = norm(&self.f, &self.u, self);
        let h_max = self.opts.h_max().min(self.opts.t_end);
        if d1 <= 1e-300 {
            return h_max;
        }
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 }.min(h_max);
        for i in 0..self.u.len() {
            self.tmp[i] = self.u[i] + h0 * self.f[i];
        }
        let mut f1 = vec![0.0; self.u.len()];
        self.sys.rates(&self.tmp, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(&self.f).map(|(a, b)| a - b).collect();
        let d2 = norm(&diff, &self.u, self) / h0;
        let h1 = if !d2.is_finite() {
            h0 * 1e-3
        } else if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(h_max)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn rates(&self) -> &[f64] {
        &self.f
    }

    pub fn det_rel_drift(&self) -> f64 {
        (self.sys.log_det(&self.u) - self.log_det0).exp_m1()
    }

    /// Refreshes ρ = |k7 − k6| / |y7 − y6| when the stage points are far enough apart
    /// for the quotient to rise above rounding; otherwise the previous value stands.
    fn update_stiffness(&mut self) {
        let (mut num, mut den, mut mag) = (0.0_f64, 0.0_f64, 0.0_f64);
        for i in 0..self.tmp.len() {
            let dk = self.k[6][i] - self.k[5][i];
            let dy = self.tmp[i] - self.y6[i];
            num += dk * dk;
            den += dy * dy;
            mag = mag.max(self.tmp[i].abs());
        }
        if den.sqrt() > 1e-11 * mag.max(1.0) && num.is_finite() {
            self.rho = num.sqrt() / den.sqrt();
        }
    }

    /// Attempt steps until one is accepted or the controller gives up.
    pub fn step(&mut self) -> StepOutcome {
        let t_end = self.opts.t_end;
        if self.t >= t_end {
            return StepOutcome::Finished;
        }
        let n = self.u.len();
        let h_max = self.opts.h_max();
        loop {
            if self.accepted + self.rejected >= self.opts.max_steps {
                return StepOutcome::Failed(StopReason::MaxSteps);
            }
            let mut h = self.h.min(h_max);
            let last = self.t + h >= t_end * (1.0 - 1e-15);
            if last {
                h = t_end - self.t;
            }
            if h < 1e-14 * self.t.max(1.0) && !last {
                return StepOutcome::Failed(StopReason::StepFailure);
            }

            self.k[0].copy_from_slice(&self.f);
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += A[s][j] * self.k[j][i];
                    }
                    self.tmp[i] = self.u[i] + h * acc;
                }
                if s == 5 {
                    self.y6.copy_from_slice(&self.tmp);
                }
                self.sys.rates(&self.tmp, &mut self.k[s]);
            }
            // tmp now holds the fifth-order solution (stage 7 is evaluated there).
            let mut err = 0.0_f64;
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += E[s] * self.k[s][i];
                }
                let sc = self.opts.atol + self.opts.rtol * self.u[i].abs().max(self.tmp[i].abs());
                err = err.max((h * e).abs() / sc);
            }
            if !err.is_finite() || !all_finite(&self.tmp) || !all_finite(&self.k[6]) {
                err = f64::INFINITY;
            }

            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.update_stiffness();
                std::mem::swap(&mut self.u, &mut self.tmp);
                if self.opts.det_projection {
                    let s = (self.log_det0 - self.sys.log_det(&self.u)) / self.sys.det_degree();
                    self.sys.rescale(&mut self.u, s);
                    self.sys.rates(&self.u, &mut self.f);
                } else {
                    self.f.copy_from_slice(&self.k[6]);
                }
                let fac = SAFETY * err.max(1e-10).powf(-PI_ALPHA) * self.err_prev.powf(PI_BETA);
                self.h = h * fac.clamp(0.2, 10.0);
                if self.rho > 0.0 {
                    self.h = self.h.min(STIFF_CAP / self.rho);
                }
                self.err_prev = err.max(1e-4);
                self.accepted += 1;
                return StepOutcome::Accepted;
            }
            self.rejected += 1;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).max(0.2)
            } else {
                0.1
            };
            self.h = h * fac;
            if self.h < 1e-14 * self.t.max(1.0) {
                return StepOutcome::Failed(StopReason::StepFailure);
            }
        }
    }
}

fn sample<S: LogSystem + ?Sized>(sys: &S, st: &Stepper<S>, exact0: Option<(&[f64], &[f64])>) -> Sample {
    let state = match exact0 {
        Some((u0, g0)) if st.u() == u0 => g0.to_vec(),
        _ => sys.decode(st.u()),
    };
    Sample {
        t: st.t(),
        state,
        gap: sys.gap(st.u()),
        det_rel_drift: st.det_rel_drift(),
        rate_norm: sys.rate_norm(st.u(), st.rates()),
    }
}

/// Integrate from internal coordinates `u0`, recording every accepted step.
pub fn integrate_system<S: LogSystem + ?Sized>(
    sys: &S,
    u0: Vec<f64>,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    integrate_inner(sys, u0, opts, None)
}

/// `state0`, when given, is reported verbatim for samples whose coordinates
/// still equal the initial ones, so static runs reproduce their input exactly.
fn integrate_inner<S: LogSystem + ?Sized>(
    sys: &S,
    u0: Vec<f64>,
    opts: &IntegratorOptions,
    state0: Option<Vec<f64>>,
) -> Result<Trajectory> {
    let init = u0.clone();
    let exact0 = state0.as_deref().map(|g| (init.as_slice(), g));
    let mut st = Stepper::new(sys, u0, *opts)?;
    let mut samples = vec![sample(sys, &st, exact0)];
    let mut quiet = 0usize;
    let stop = loop {
        match st.step() {
            StepOutcome::Finished => break StopReason::ReachedTEnd,
            StepOutcome::Failed(r) => break r,
            StepOutcome::Accepted => {}
        }
        let s = sample(sys, &st, exact0);
        let floor = s.state.iter().any(|v| *v < opts.floor_eps);
        quiet = if s.rate_norm < opts.stall_tol { quiet + 1 } else { 0 };
        samples.push(s);
        if floor {
            break StopReason::ComponentFloor;
        }
        if st.t() >= opts.t_end {
            break StopReason::ReachedTEnd;
        }
        if opts.stall_steps > 0 && quiet >= opts.stall_steps {
            break StopReason::Stalled;
        }
    };
    Ok(Trajectory {
        samples,
        stop,
        accepted_steps: st.accepted,
        rejected_steps: st.rejected,
        rtol: opts.rtol,
        geom: None,
        perm: [0, 1, 2, 3],
        gap_pair: None,
    })
}

/// Integrate the flow of `sys` from `g0`, given in the caller's component order.
/// Samples are stored in the system's canonical order; see [`Trajectory::user_state`].
pub fn integrate(sys: &FlowSystem, g0: &DiagonalMetric4, opts: &IntegratorOptions) -> Result<Trajectory> {
    let g0 = DiagonalMetric4::new(g0.0)?;
    let flow = MetricFlow::new(sys);
    let gc = sys.canonicalize(g0.0);
    let u0 = flow.encode(&gc)?;
    let mut traj = integrate_inner(&flow, u0, opts, Some(gc.to_vec()))?;
    traj.geom = Some(sys.geom);
    traj.perm = sys.perm;
    traj.gap_pair = match sys.pair {
        PairMode::Gap { lo, hi } | PairMode::Tied { lo, hi } => Some((lo, hi)),
        PairMode::Plain => None,
    };
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub quantity: &'static str,
    /// Index of the later sample of the offending pair.
    pub index: usize,
    pub before: f64,
    pub after: f64,
}

type Quantity = (&'static str, fn(&[f64]) -> f64, bool);

fn registered(geom: ModelGeometry) -> Vec<Quantity> {
    // (name, value, nondecreasing)
    let mut q: Vec<Quantity> = Vec::new();
    if geom.is_lie_group() {
        q.push(("g00", |g| g[0], false));
    }
    match geom {
        ModelGeometry::Nil => {
            q.push(("g11", |g| g[1], false));
            q.push(("g22", |g| g[2], true));
        }
        ModelGeometry::Solv => q.push(("g11/g22", |g| g[1] / g[2], true)),
        ModelGeometry::E2 => {
            q.push(("g11", |g| g[1], true));
            q.push(("g22", |g| g[2], false));
        }
        ModelGeometry::Sl2 => {
            q.push(("g00*g22", |g| g[0] * g[2], true));
            q.push(("g11^(3/5)*g22", |g| g[1].powf(0.6) * g[2], true));
        }
        _ => {}
    }
    q
}

/// Sample pairs that break a registered monotone quantity by more than 10·rtol.
pub fn monitor(traj: &Trajectory) -> Vec<Violation> {
    let Some(geom) = traj.geom else {
        return Vec::new();
    };
    if traj.samples.first().map_or(true, |s| s.rate_norm == 0.0) {
        return Vec::new();
    }
    let slack = 10.0 * traj.rtol;
    let mut out = Vec::new();
    for (name, f, up) in registered(geom) {
        for (i, w) in traj.samples.windows(2).enumerate() {
            let (a, b) = (f(&w[0].state), f(&w[1].state));
            let bad = if up {
                b < a - slack * a.abs()
            } else {
                b > a + slack * a.abs()
            };
            if bad {
                out.push(Violation {
                    quantity: name,
                    index: i + 1,
                    before: a,
                    after: b,
                });
            }
        }
    }
    out
}
