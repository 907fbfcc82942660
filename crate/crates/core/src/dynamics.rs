//! Trajectories of `q'' = -grad V` and the numerical certificates built on them:
//! drift of a first integral, Poisson brackets, involution and functional independence.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::Potential;
use crate::expr::{Expr, ExprError, Point, Var};

/// Phase-space state with unit mass, so momenta are velocities.
pub type State = Point;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("step size collapsed near t = {t}")]
    SingularApproach { t: f64 },
    #[error("trajectory left the domain of the potential near t = {t}: {msg}")]
    DomainExit { t: f64, msg: String },
    #[error("tolerance {0} outside [1e-14, 1e-6]")]
    BadTolerance(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejections: usize,
    pub tol: f64,
}

/// Dense-output coefficients of one accepted step.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    r: [[f64; 4]; 5],
}

impl Segment {
    fn at(&self, t: f64) -> [f64; 4] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut y = [0.0; 4];
        for i in 0..4 {
            let r = |k: usize| self.r[k][i];
            y[i] = r(0) + th * (r(1) + th1 * (r(2) + th * (r(3) + th1 * r(4))));
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub stats: IntegratorStats,
    /// `|H(t) - H(0)|` at every accepted step.
    pub energy_drift: Vec<f64>,
    segments: Vec<Segment>,
}

impl Trajectory {
    /// Dense-output state at time `t` within the integrated span.
    pub fn interpolate(&self, t: f64) -> Option<State> {
        let first = self.states.first()?;
        if t == first.t {
            return Some(*first);
        }
        let k = self.segments.partition_point(|s| s.t0 + s.h < t);
        let seg = self.segments.get(k)?;
        if t < seg.t0 {
            return None;
        }
        let [x, y, vx, vy] = seg.at(t);
        Some(Point::new(t, x, y, vx, vy))
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds its initial state")
    }
}

// The system is autonomous, so the stage times are not needed.
const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
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
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

struct Rhs<'a> {
    pot: &'a Potential,
}

impl Rhs<'_> {
    fn eval(&self, y: &[f64; 4]) -> Result<[f64; 4], String> {
        let g = self.pot.gradient(y[0], y[1]).map_err(|e| e.to_string())?;
        if !(g[0].is_finite() && g[1].is_finite()) {
            return Err("non-finite force".into());
        }
        Ok([y[2], y[3], -g[0], -g[1]])
    }
}

fn axpy(y: &[f64; 4], h: f64, ks: &[[f64; 4]], coef: &[f64]) -> [f64; 4] {
    let mut out = *y;
    for (k, c) in ks.iter().zip(coef) {
        if *c != 0.0 {
            for i in 0..4 {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

/// Dormand–Prince 5(4) with step control on the mixed absolute/relative scale
/// `tol * (1 + max(|y_i|, |y_new_i|))`.
pub fn integrate(pot: &Potential, s0: &State, t_end: f64, tol: f64) -> Result<Trajectory, DynamicsError> {
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(DynamicsError::BadTolerance(tol));
    }
    let rhs = Rhs { pot };
    let energy = |y: &[f64; 4]| -> Result<f64, ExprError> {
        Ok(0.5 * (y[2] * y[2] + y[3] * y[3]) + pot.value(y[0], y[1])?)
    };
    let mut t = s0.t;
    let span = t_end - t;
    let mut y = [s0.x, s0.y, s0.vx, s0.vy];
    let h0 = energy(&y)?;
    let mut k1 = rhs.eval(&y).map_err(|msg| DynamicsError::DomainExit { t, msg })?;
    let mut traj = Trajectory {
        states: vec![*s0],
        stats: IntegratorStats { tol, ..Default::default() },
        energy_drift: vec![0.0],
        segments: Vec::new(),
    };
    if span <= 0.0 {
        return Ok(traj);
    }
    let h_min = 1e-12 * span.abs().max(1.0);
    let mut h = (span * 1e-3).min(0.01);
    let mut last_fail: Option<String> = None;

    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        if h < h_min && t_end - t > h_min {
            return Err(match last_fail {
                Some(msg) => DynamicsError::DomainExit { t, msg },
                None => DynamicsError::SingularApproach { t },
            });
        }
        let mut ks: Vec<[f64; 4]> = vec![k1];
        let mut failed = None;
        for s in 0..6 {
            let ys = axpy(&y, h, &ks, A[s]);
            match rhs.eval(&ys) {
                Ok(k) => ks.push(k),
                Err(msg) => {
                    failed = Some(msg);
                    break;
                }
            }
        }
        if let Some(msg) = failed {
            last_fail = Some(msg);
            traj.stats.rejections += 1;
            h *= 0.25;
            continue;
        }
        let y_new = axpy(&y, h, &ks[..6], A[5]);
        let mut err2 = 0.0;
        for i in 0..4 {
            let e: f64 = h * (0..7).map(|j| E[j] * ks[j][i]).sum::<f64>();
            let sc = tol + tol * y[i].abs().max(y_new[i].abs());
            err2 += (e / sc).powi(2);
        }
        let err = (err2 / 4.0).sqrt();
        if !err.is_finite() {
            traj.stats.rejections += 1;
            h *= 0.2;
            continue;
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        if err <= 1.0 {
            last_fail = None;
            let k7 = ks[6];
            let mut r = [[0.0; 4]; 5];
            for i in 0..4 {
                let ydiff = y_new[i] - y[i];
                let bspl = h * ks[0][i] - ydiff;
                r[0][i] = y[i];
                r[1][i] = ydiff;
                r[2][i] = bspl;
                r[3][i] = ydiff - h * k7[i] - bspl;
                r[4][i] = h * (0..7).map(|j| D[j] * ks[j][i]).sum::<f64>();
            }
            traj.segments.push(Segment { t0: t, h, r });
            t = if t_end - (t + h) < 1e-14 * span { t_end } else { t + h };
            y = y_new;
            k1 = k7;
            traj.stats.steps += 1;
            traj.states.push(Point::new(t, y[0], y[1], y[2], y[3]));
            let e = energy(&y).map_err(|e| DynamicsError::DomainExit { t, msg: e.to_string() })?;
            traj.energy_drift.push((e - h0).abs());
            h *= fac;
        } else {
            traj.stats.rejections += 1;
            h *= fac.min(1.0);
        }
    }
    Ok(traj)
}

/// Integrate several initial conditions in parallel; results keep input order.
pub fn integrate_many(
    pot: &Potential,
    ics: &[State],
    t_end: f64,
    tol: f64,
) -> Vec<Result<Trajectory, DynamicsError>> {
    ics.par_iter().map(|s| integrate(pot, s, t_end, tol)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub name: String,
    pub j0: f64,
    pub max_abs_drift: f64,
    pub relative_drift: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Drift of a phase-space expression `J(t, x, y, vx, vy)` along accepted states.
pub fn drift(name: &str, fi: &Expr, traj: &Trajectory, tolerance: f64) -> Result<DriftReport, ExprError> {
    let params = Default::default();
    let j0 = fi.eval(&traj.states[0], &params)?;
    let mut max = 0.0f64;
    for s in &traj.states[1..] {
        max = max.max((fi.eval(s, &params)? - j0).abs());
    }
    let rel = max / j0.abs().max(1.0);
    Ok(DriftReport {
        name: name.to_string(),
        j0,
        max_abs_drift: max,
        relative_drift: rel,
        tolerance,
        pass: rel <= tolerance,
    })
}

/// `{F, G} = F_x G_vx + F_y G_vy - F_vx G_x - F_vy G_y`.
pub fn poisson_bracket(f: &Expr, g: &Expr) -> Expr {
    f.diff(Var::X) * g.diff(Var::Vx) + f.diff(Var::Y) * g.diff(Var::Vy)
        - f.diff(Var::Vx) * g.diff(Var::X)
        - f.diff(Var::Vy) * g.diff(Var::Y)
}

pub fn pb_eval(f: &Expr, g: &Expr, s: &State) -> Result<f64, ExprError> {
    poisson_bracket(f, g).eval(s, &Default::default())
}

/// `dJ/dt = J_t + {J, H}`, the total time derivative along the flow.
pub fn convective_derivative(j: &Expr, h: &Expr) -> Expr {
    j.diff(Var::T) + poisson_bracket(j, h)
}

/// Largest pairwise `|{F_i, F_j}|` over the sample states.
pub fn involution_check(fis: &[Expr], states: &[State]) -> Result<f64, ExprError> {
    let mut worst = 0.0f64;
    for i in 0..fis.len() {
        for j in i + 1..fis.len() {
            let pb = poisson_bracket(&fis[i], &fis[j]);
            for s in states {
                worst = worst.max(pb.eval(s, &Default::default())?.abs());
            }
        }
    }
    Ok(worst)
}

/// Default relative singular-value cutoff for functional independence.
pub const RANK_THRESHOLD: f64 = 1e-8;

/// Maximum over states of the numerical rank of `d(F_1..F_k)/d(x, y, vx, vy)`.
pub fn independence_rank(fis: &[Expr], states: &[State], threshold: f64) -> Result<usize, ExprError> {
    let vars = [Var::X, Var::Y, Var::Vx, Var::Vy];
    let jac: Vec<Vec<Expr>> = fis.iter().map(|f| vars.iter().map(|&v| f.diff(v)).collect()).collect();
    let mut best = 0;
    for s in states {
        let mut m = DMatrix::zeros(fis.len(), 4);
        for (i, row) in jac.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                m[(i, k)] = e.eval(s, &Default::default())?;
            }
        }
        best = best.max(crate::linalg::numeric_rank(&m, threshold));
    }
    Ok(best)
}
