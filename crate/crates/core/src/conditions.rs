//! The three cubic first integral families and the PDE systems their pieces obey.
//!
//! A candidate is decomposed into terms `phi(t) * P(q, v)` where `P` is a cubic,
//! quadratic, linear or scalar piece. Values, total derivatives and phase-space
//! expressions are all assembled from that decomposition.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError, Point, Var};
use crate::geometry::{
    generated_kt3, kt2, kt3, sym_derivative, sym_generator, KT2Params, KT3Params, SymGenParams,
    SymTensorField2, SymTensorField3,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error("potential depends on t")]
    TimeDependentPotential,
    #[error("no admissible point found in the domain")]
    EmptyDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Rect { x: (f64, f64), y: (f64, f64) },
    /// Polar box: radius range and angle range (radians, measured from +x).
    Sector { r: (f64, f64), theta: (f64, f64) },
}

impl Domain {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Domain::Rect { x: (x0, x1), y: (y0, y1) } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
            Domain::Sector { r: (r0, r1), theta: (t0, t1) } => {
                let r = x.hypot(y);
                let mut th = y.atan2(x);
                if th < t0 {
                    th += std::f64::consts::TAU;
                }
                r >= r0 && r <= r1 && th >= t0 && th <= t1
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        match *self {
            Domain::Rect { x: (x0, x1), y: (y0, y1) } => (rng.gen_range(x0..=x1), rng.gen_range(y0..=y1)),
            Domain::Sector { r: (r0, r1), theta: (t0, t1) } => {
                // Uniform in area.
                let u: f64 = rng.gen_range(0.0..=1.0);
                let r = (r0 * r0 + u * (r1 * r1 - r0 * r0)).sqrt();
                let th = rng.gen_range(t0..=t1);
                (r * th.cos(), r * th.sin())
            }
        }
    }
}

/// A time-independent potential with its sampling domain and excluded singular sets.
#[derive(Debug, Clone)]
pub struct Potential {
    pub v: Expr,
    pub domain: Domain,
    pub singular: Vec<Expr>,
    pub grad: [Expr; 2],
    /// `(V_xx, V_xy, V_yy)`.
    pub hess: [Expr; 3],
    sing_grad: Vec<[Expr; 2]>,
}

/// Minimum estimated distance to a singular set for sampled points.
pub const SINGULAR_MARGIN: f64 = 0.1;

impl Potential {
    pub fn new(v: Expr, domain: Domain, singular: Vec<Expr>) -> Result<Self, ConditionError> {
        if v.depends_on(Var::T) || v.depends_on(Var::Vx) || v.depends_on(Var::Vy) {
            return Err(ConditionError::TimeDependentPotential);
        }
        let grad = [v.diff(Var::X), v.diff(Var::Y)];
        let hess = [grad[0].diff(Var::X), grad[0].diff(Var::Y), grad[1].diff(Var::Y)];
        let sing_grad = singular.iter().map(|s| [s.diff(Var::X), s.diff(Var::Y)]).collect();
        Ok(Potential { v, domain, singular, grad, hess, sing_grad })
    }

    /// A potential sampled on `[-1, 1]^2` with no singular set.
    pub fn plane(v: Expr) -> Result<Self, ConditionError> {
        Potential::new(v, Domain::Rect { x: (-1.0, 1.0), y: (-1.0, 1.0) }, vec![])
    }

    pub fn with_domain(mut self, d: Domain) -> Self {
        self.domain = d;
        self
    }

    pub fn value(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        self.v.eval_xy(x, y)
    }

    pub fn gradient(&self, x: f64, y: f64) -> Result<[f64; 2], ExprError> {
        Ok([self.grad[0].eval_xy(x, y)?, self.grad[1].eval_xy(x, y)?])
    }

    /// Inside the domain and at estimated distance `|s|/|grad s| >= 0.1` from every singular set.
    pub fn admissible(&self, x: f64, y: f64) -> bool {
        if !self.domain.contains(x, y) {
            return false;
        }
        for (s, g) in self.singular.iter().zip(&self.sing_grad) {
            let (Ok(sv), Ok(gx), Ok(gy)) = (s.eval_xy(x, y), g[0].eval_xy(x, y), g[1].eval_xy(x, y)) else {
                return false;
            };
            let n = gx.hypot(gy);
            if n > 0.0 && sv.abs() / n < SINGULAR_MARGIN {
                return false;
            }
            if n == 0.0 && sv == 0.0 {
                return false;
            }
        }
        self.value(x, y).is_ok() && self.gradient(x, y).is_ok()
    }

    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Result<(f64, f64), ConditionError> {
        for _ in 0..100_000 {
            let (x, y) = self.domain.sample(rng);
            if self.admissible(x, y) {
                return Ok((x, y));
            }
        }
        Err(ConditionError::EmptyDomain)
    }

    /// A random phase-space state: admissible position, velocities in [-1, 1], t in [0, 1].
    pub fn sample_state<R: Rng>(&self, rng: &mut R) -> Result<Point, ConditionError> {
        let (x, y) = self.sample_point(rng)?;
        Ok(Point::new(rng.gen_range(0.0..1.0), x, y, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    /// `H = (vx^2 + vy^2)/2 + V`.
    pub fn hamiltonian(&self) -> Expr {
        Expr::frac(1, 2) * (Expr::vx().powi(2) + Expr::vy().powi(2)) + self.v.clone()
    }

    /// `B . grad V` as an expression.
    pub fn dot_grad(&self, b: &[Expr; 2]) -> Expr {
        &b[0] * &self.grad[0] + &b[1] * &self.grad[1]
    }

    /// `T_ab V^b` for a = 1, 2.
    pub fn contract2(&self, t: &SymTensorField2) -> [Expr; 2] {
        [
            &t.t11 * &self.grad[0] + &t.t12 * &self.grad[1],
            &t.t12 * &self.grad[0] + &t.t22 * &self.grad[1],
        ]
    }

    /// `T_abc V^c` for (ab) = 11, 12, 22.
    pub fn contract3(&self, t: &SymTensorField3) -> [Expr; 3] {
        [
            &t.t111 * &self.grad[0] + &t.t112 * &self.grad[1],
            &t.t112 * &self.grad[0] + &t.t122 * &self.grad[1],
            &t.t122 * &self.grad[0] + &t.t222 * &self.grad[1],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Aut,
    LinT,
    Exp,
}

/// A cubic first integral in one of the three families.
///
/// `b` is the vector part (B_a for AUT and EXP, L_a for LIN_T). For AUT, `kt2` is
/// the optional C_ab; for LIN_T it is D_ab and `gen` generates C_ab.
#[derive(Debug, Clone)]
pub struct CandidateCFI {
    pub family: Family,
    pub kt3: KT3Params,
    pub gen: Option<SymGenParams>,
    pub kt2: Option<KT2Params>,
    pub b: [Expr; 2],
    pub g: Option<Expr>,
    pub s: Option<f64>,
    pub lambda: Option<f64>,
}

impl CandidateCFI {
    pub fn aut(kt3: KT3Params, b: [Expr; 2], s: f64) -> Self {
        CandidateCFI { family: Family::Aut, kt3, gen: None, kt2: None, b, g: None, s: Some(s), lambda: None }
    }

    pub fn aut_with_c(kt3: KT3Params, c: KT2Params, b: [Expr; 2]) -> Self {
        CandidateCFI { family: Family::Aut, kt3, gen: None, kt2: Some(c), b, g: None, s: None, lambda: None }
    }

    pub fn lin_t(gen: SymGenParams, d: KT2Params, l: [Expr; 2], g: Expr) -> Self {
        CandidateCFI {
            family: Family::LinT,
            kt3: generated_kt3(&gen),
            gen: Some(gen),
            kt2: Some(d),
            b: l,
            g: Some(g),
            s: None,
            lambda: None,
        }
    }

    pub fn exp(gen: SymGenParams, lambda: f64, b: [Expr; 2]) -> Self {
        CandidateCFI {
            family: Family::Exp,
            kt3: generated_kt3(&gen),
            gen: Some(gen),
            kt2: None,
            b,
            g: None,
            s: None,
            lambda: Some(lambda),
        }
    }

    pub fn validate(&self) -> Result<(), ConditionError> {
        let bad = |m: &str| Err(ConditionError::InvalidCandidate(m.to_string()));
        match self.family {
            Family::Aut => {
                if self.g.is_some() {
                    return bad("AUT candidates carry no G");
                }
                if self.kt2.is_none() && self.s.is_none() {
                    return bad("AUT without C_ab needs s");
                }
                if self.lambda.is_some() {
                    return bad("AUT candidates carry no lambda");
                }
            }
            Family::LinT => {
                if self.gen.is_none() || self.kt2.is_none() || self.g.is_none() {
                    return bad("LIN_T needs gen, D_ab and G");
                }
            }
            Family::Exp => {
                match self.lambda {
                    Some(l) if l != 0.0 && l.is_finite() => {}
                    _ => return bad("EXP needs a finite nonzero lambda"),
                }
                if self.gen.is_none() {
                    return bad("EXP needs gen");
                }
                if self.s.is_some() || self.g.is_some() {
                    return bad("EXP candidates carry no s or G");
                }
            }
        }
        Ok(())
    }

    /// Multiply every component by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut c = self.clone();
        c.kt3.a.iter_mut().for_each(|v| *v *= k);
        if let Some(g) = c.gen.as_mut() {
            g.b.iter_mut().for_each(|v| *v *= k);
        }
        c.kt2 = c.kt2.map(|t| t.scaled(k));
        c.b = [c.b[0].scale(k), c.b[1].scale(k)];
        c.g = c.g.map(|g| g.scale(k));
        c.s = c.s.map(|s| s * k);
        c
    }
}

/// Velocity-polynomial piece of a first integral.
#[derive(Debug, Clone)]
pub enum Piece {
    Cubic(SymTensorField3),
    Quad(SymTensorField2),
    Lin([Expr; 2]),
    Scalar(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFactor {
    /// `c0 + c1 t + c2 t^2`
    Poly([f64; 3]),
    /// `k e^{lambda t}`
    Exp { k: f64, lambda: f64 },
}

impl TimeFactor {
    const ONE: TimeFactor = TimeFactor::Poly([1.0, 0.0, 0.0]);

    fn value(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Poly([a, b, c]) => a + t * (b + t * c),
            TimeFactor::Exp { k, lambda } => k * (lambda * t).exp(),
        }
    }

    fn rate(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Poly([_, b, c]) => b + 2.0 * c * t,
            TimeFactor::Exp { k, lambda } => k * lambda * (lambda * t).exp(),
        }
    }

    fn expr(&self) -> Expr {
        match *self {
            TimeFactor::Poly([a, b, c]) => {
                Expr::float(a) + Expr::float(b) * Expr::t() + Expr::float(c) * Expr::t().powi(2)
            }
            TimeFactor::Exp { k, lambda } => Expr::float(k) * (Expr::float(lambda) * Expr::t()).exp(),
        }
    }
}

fn v2(p: &Point) -> [f64; 2] {
    [p.vx, p.vy]
}

fn cubic_form(t: [f64; 4], v: [f64; 2]) -> f64 {
    let [a, b, c, d] = t;
    let [u, w] = v;
    a * u * u * u + 3.0 * b * u * u * w + 3.0 * c * u * w * w + d * w * w * w
}

fn quad_form(t: [f64; 3], v: [f64; 2]) -> f64 {
    t[0] * v[0] * v[0] + 2.0 * t[1] * v[0] * v[1] + t[2] * v[1] * v[1]
}

impl Piece {
    fn eval_at(e: &Expr, p: &Point) -> Result<f64, ExprError> {
        e.eval(&Point::xy(p.x, p.y), &Default::default())
    }

    fn comps(&self) -> Vec<&Expr> {
        match self {
            Piece::Cubic(t) => t.components().to_vec(),
            Piece::Quad(t) => t.components().to_vec(),
            Piece::Lin(b) => b.iter().collect(),
            Piece::Scalar(s) => vec![s],
        }
    }

    fn form(&self, vals: &[f64], v: [f64; 2]) -> f64 {
        match self {
            Piece::Cubic(_) => cubic_form([vals[0], vals[1], vals[2], vals[3]], v),
            Piece::Quad(_) => quad_form([vals[0], vals[1], vals[2]], v),
            Piece::Lin(_) => vals[0] * v[0] + vals[1] * v[1],
            Piece::Scalar(_) => vals[0],
        }
    }

    pub fn value(&self, p: &Point) -> Result<f64, ExprError> {
        let vals = self.comps().iter().map(|e| Piece::eval_at(e, p)).collect::<Result<Vec<_>, _>>()?;
        Ok(self.form(&vals, v2(p)))
    }

    /// Time derivative along `q'' = -grad V` of the time-independent piece.
    pub fn rate(&self, p: &Point, gv: [f64; 2]) -> Result<f64, ExprError> {
        let v = v2(p);
        let comps = self.comps();
        let mut vals = Vec::with_capacity(comps.len());
        let mut along = Vec::with_capacity(comps.len());
        for e in &comps {
            vals.push(Piece::eval_at(e, p)?);
            let dx = Piece::eval_at(&e.diff(Var::X), p)?;
            let dy = Piece::eval_at(&e.diff(Var::Y), p)?;
            along.push(dx * v[0] + dy * v[1]);
        }
        // Transport of the coefficients plus the force acting on the velocity slots.
        let transport = self.form(&along, v);
        let force = match self {
            Piece::Cubic(_) => {
                let [a, b, c, d] = [vals[0], vals[1], vals[2], vals[3]];
                // d/dt (T_abc v^a v^b v^c) force part: 3 T_abc v^a v^b (-V^c)
                let t_vv_x = a * v[0] * v[0] + 2.0 * b * v[0] * v[1] + c * v[1] * v[1];
                let t_vv_y = b * v[0] * v[0] + 2.0 * c * v[0] * v[1] + d * v[1] * v[1];
                -3.0 * (t_vv_x * gv[0] + t_vv_y * gv[1])
            }
            Piece::Quad(_) => {
                let tv_x = vals[0] * v[0] + vals[1] * v[1];
                let tv_y = vals[1] * v[0] + vals[2] * v[1];
                -2.0 * (tv_x * gv[0] + tv_y * gv[1])
            }
            Piece::Lin(_) => -(vals[0] * gv[0] + vals[1] * gv[1]),
            Piece::Scalar(_) => 0.0,
        };
        Ok(transport + force)
    }

    pub fn expr(&self) -> Expr {
        let (u, w) = (Expr::vx(), Expr::vy());
        match self {
            Piece::Cubic(t) => Expr::sum(vec![
                &t.t111 * u.powi(3),
                Expr::int(3) * &t.t112 * u.powi(2) * &w,
                Expr::int(3) * &t.t122 * &u * w.powi(2),
                &t.t222 * w.powi(3),
            ]),
            Piece::Quad(t) => Expr::sum(vec![
                &t.t11 * u.powi(2),
                Expr::int(2) * &t.t12 * &u * &w,
                &t.t22 * w.powi(2),
            ]),
            Piece::Lin(b) => &b[0] * &u + &b[1] * &w,
            Piece::Scalar(s) => s.clone(),
        }
    }
}

/// The `phi(t) * P` decomposition of a candidate.
pub fn fi_terms(c: &CandidateCFI, pot: &Potential) -> Result<Vec<(TimeFactor, Piece)>, ConditionError> {
    c.validate()?;
    let one = TimeFactor::ONE;
    let t1 = TimeFactor::Poly([0.0, 1.0, 0.0]);
    Ok(match c.family {
        Family::Aut => {
            let mut terms = vec![(one, Piece::Cubic(kt3(&c.kt3))), (one, Piece::Lin(c.b.clone()))];
            match c.kt2 {
                Some(cc) => {
                    terms.push((t1, Piece::Quad(kt2(&cc))));
                    terms.push((t1, Piece::Scalar(pot.dot_grad(&c.b))));
                }
                None => terms.push((TimeFactor::Poly([0.0, c.s.unwrap_or(0.0), 0.0]), Piece::Scalar(Expr::one()))),
            }
            terms
        }
        Family::LinT => {
            let gen = c.gen.as_ref().unwrap();
            let cab = sym_generator(gen);
            vec![
                (TimeFactor::Poly([0.0, -1.0, 0.0]), Piece::Cubic(sym_derivative(&cab))),
                (TimeFactor::Poly([0.0, 0.0, 1.0]), Piece::Quad(kt2(c.kt2.as_ref().unwrap()))),
                (one, Piece::Quad(cab)),
                (t1, Piece::Lin(c.b.clone())),
                (TimeFactor::Poly([0.0, 0.0, 0.5]), Piece::Scalar(pot.dot_grad(&c.b))),
                (one, Piece::Scalar(c.g.clone().unwrap())),
            ]
        }
        Family::Exp => {
            let lambda = c.lambda.unwrap();
            let lab = sym_generator(c.gen.as_ref().unwrap());
            let e = |k| TimeFactor::Exp { k, lambda };
            vec![
                (e(-1.0), Piece::Cubic(sym_derivative(&lab))),
                (e(lambda), Piece::Quad(lab)),
                (e(lambda), Piece::Lin(c.b.clone())),
                (e(1.0), Piece::Scalar(pot.dot_grad(&c.b))),
            ]
        }
    })
}

pub fn fi_value(c: &CandidateCFI, pot: &Potential, state: &Point) -> Result<f64, ConditionError> {
    let mut acc = 0.0;
    for (phi, piece) in fi_terms(c, pot)? {
        let f = phi.value(state.t);
        if f != 0.0 {
            acc += f * piece.value(state)?;
        }
    }
    Ok(acc)
}

/// `dJ/dt` along the flow, from the piecewise chain rule with `q'' = -grad V`.
pub fn fi_total_derivative(c: &CandidateCFI, pot: &Potential, state: &Point) -> Result<f64, ConditionError> {
    let gv = pot.gradient(state.x, state.y)?;
    let mut acc = 0.0;
    for (phi, piece) in fi_terms(c, pot)? {
        let (f, df) = (phi.value(state.t), phi.rate(state.t));
        if df != 0.0 {
            acc += df * piece.value(state)?;
        }
        if f != 0.0 {
            acc += f * piece.rate(state, gv)?;
        }
    }
    Ok(acc)
}

/// The candidate as an explicit phase-space expression in `(t, x, y, vx, vy)`.
pub fn fi_expr(c: &CandidateCFI, pot: &Potential) -> Result<Expr, ConditionError> {
    let terms = fi_terms(c, pot)?;
    Ok(Expr::sum(terms.iter().map(|(phi, p)| phi.expr() * p.expr()).collect()))
}

fn eval_all<const N: usize>(es: [Expr; N], x: f64, y: f64) -> Result<[f64; N], ExprError> {
    let mut out = [0.0; N];
    for (o, e) in out.iter_mut().zip(es) {
        *o = e.eval_xy(x, y)?;
    }
    Ok(out)
}

fn dx(e: &Expr) -> Expr {
    e.diff(Var::X)
}

fn dy(e: &Expr) -> Expr {
    e.diff(Var::Y)
}

/// Symmetrized gradient `(B1,x ; (B1,y + B2,x)/2 ; B2,y)`.
fn sym_grad(b: &[Expr; 2]) -> [Expr; 3] {
    [dx(&b[0]), Expr::frac(1, 2) * (dy(&b[0]) + dx(&b[1])), dy(&b[1])]
}

/// Residuals of the autonomous system. With C_ab absent the last two slots are
/// `B.grad V - s` and 0; with C_ab present they are the gradient pair.
pub fn residual_aut_exprs(c: &CandidateCFI, pot: &Potential) -> Result<[Expr; 5], ConditionError> {
    if c.family != Family::Aut {
        return Err(ConditionError::InvalidCandidate("residual_aut needs an AUT candidate".into()));
    }
    c.validate()?;
    let l = pot.contract3(&kt3(&c.kt3));
    let sg = sym_grad(&c.b);
    let three = Expr::int(3);
    let bv = pot.dot_grad(&c.b);
    let es = match c.kt2 {
        None => [
            &sg[0] - &three * &l[0],
            &sg[1] - &three * &l[1],
            &sg[2] - &three * &l[2],
            bv - Expr::float(c.s.unwrap_or(0.0)),
            Expr::zero(),
        ],
        Some(cp) => {
            let ct = kt2(&cp);
            let cv = pot.contract2(&ct);
            [
                &sg[0] - &three * &l[0] + &ct.t11,
                &sg[1] - &three * &l[1] + &ct.t12,
                &sg[2] - &three * &l[2] + &ct.t22,
                dx(&bv) - Expr::int(2) * &cv[0],
                dy(&bv) - Expr::int(2) * &cv[1],
            ]
        }
    };
    Ok(es)
}

pub fn residual_aut(c: &CandidateCFI, pot: &Potential, x: f64, y: f64) -> Result<[f64; 5], ConditionError> {
    Ok(eval_all(residual_aut_exprs(c, pot)?, x, y)?)
}

/// Residuals of the exponential-family system.
pub fn residual_exp_exprs(c: &CandidateCFI, pot: &Potential) -> Result<[Expr; 5], ConditionError> {
    if c.family != Family::Exp {
        return Err(ConditionError::InvalidCandidate("residual_exp needs an EXP candidate".into()));
    }
    c.validate()?;
    let lambda = c.lambda.unwrap();
    let lab = sym_generator(c.gen.as_ref().unwrap());
    let s = pot.contract3(&sym_derivative(&lab));
    let lv = pot.contract2(&lab);
    let sg = sym_grad(&c.b);
    let bv = pot.dot_grad(&c.b);
    let k = Expr::float(3.0 / lambda);
    let lam = Expr::float(lambda);
    let es = [
        &sg[0] + &k * &s[0] + &lam * &lab.t11,
        &sg[1] + &k * &s[1] + &lam * &lab.t12,
        &sg[2] + &k * &s[2] + &lam * &lab.t22,
        dx(&bv) - Expr::float(2.0 * lambda) * &lv[0] + Expr::float(lambda * lambda) * &c.b[0],
        dy(&bv) - Expr::float(2.0 * lambda) * &lv[1] + Expr::float(lambda * lambda) * &c.b[1],
    ];
    Ok(es)
}

pub fn residual_exp(c: &CandidateCFI, pot: &Potential, x: f64, y: f64) -> Result<[f64; 5], ConditionError> {
    Ok(eval_all(residual_exp_exprs(c, pot)?, x, y)?)
}

/// `P_y - Q_x` for the vector `(P, Q) = T grad V`.
fn curl_of_contraction(t: &SymTensorField2, pot: &Potential) -> Expr {
    let [p, q] = pot.contract2(t);
    dy(&p) - dx(&q)
}

/// The nine residuals of the linear-in-time system, in the usual order a..i.
pub fn residual_lin_t_exprs(c: &CandidateCFI, pot: &Potential) -> Result<[Expr; 9], ConditionError> {
    if c.family != Family::LinT {
        return Err(ConditionError::InvalidCandidate("residual_lin_t needs a LIN_T candidate".into()));
    }
    c.validate()?;
    let cab = sym_generator(c.gen.as_ref().unwrap());
    let s = pot.contract3(&sym_derivative(&cab));
    let d = kt2(c.kt2.as_ref().unwrap());
    let dv = pot.contract2(&d);
    let cv = pot.contract2(&cab);
    let l = &c.b;
    let g = c.g.as_ref().unwrap();
    let lv = pot.dot_grad(l);
    let n = |k: i64| Expr::int(k);
    let es = [
        dx(&l[0]) + n(3) * &s[0] + n(2) * &d.t11,
        dy(&l[0]) + dx(&l[1]) + n(6) * &s[1] + n(4) * &d.t12,
        dy(&l[1]) + n(3) * &s[2] + n(2) * &d.t22,
        dx(&lv) - n(4) * &dv[0],
        dy(&lv) - n(4) * &dv[1],
        dx(g) + &l[0] - n(2) * &cv[0],
        dy(g) + &l[1] - n(2) * &cv[1],
        curl_of_contraction(&d, pot),
        -curl_of_contraction(&cab, pot) + Expr::frac(1, 2) * (dy(&l[0]) - dx(&l[1])),
    ];
    Ok(es)
}

pub fn residual_lin_t(c: &CandidateCFI, pot: &Potential, x: f64, y: f64) -> Result<[f64; 9], ConditionError> {
    Ok(eval_all(residual_lin_t_exprs(c, pot)?, x, y)?)
}

/// The condition system of the candidate's own family.
pub fn residual_exprs(c: &CandidateCFI, pot: &Potential) -> Result<Vec<Expr>, ConditionError> {
    Ok(match c.family {
        Family::Aut => residual_aut_exprs(c, pot)?.to_vec(),
        Family::LinT => residual_lin_t_exprs(c, pot)?.to_vec(),
        Family::Exp => residual_exp_exprs(c, pot)?.to_vec(),
    })
}

/// The third-order compatibility condition on V for a cubic KT.
pub fn residual_integrability(p: &KT3Params, pot: &Potential, x: f64, y: f64) -> Result<f64, ConditionError> {
    let l = kt3(p);
    let [m11, m12, m22] = pot.contract3(&l);
    let e = dy(&dy(&m11)) + dx(&dx(&m22)) - Expr::int(2) * dx(&dy(&m12));
    Ok(e.eval_xy(x, y)?)
}

/// Holt's polynomial `Y` for the given KT parameters, with its integration constant set to 0.
pub fn holt_y(p: &KT3Params) -> Expr {
    let [a1, a2, a3, _a4, a5, a6, a7, a8, a9, a10] = p.a;
    let a4 = p.a[3];
    let (x, y) = (Expr::x(), Expr::y());
    let r2 = x.powi(2) + y.powi(2);
    let f = Expr::float;
    Expr::sum(vec![
        f(-0.75 * a1) * r2.powi(2),
        f(3.0) * (f(a5) * &x - f(a2) * &y) * &r2,
        f(1.5 * (3.0 * a6 - a3)) * x.powi(2),
        f(-1.5 * (3.0 * a3 - a6)) * y.powi(2),
        f(3.0 * a8) * &x * &y,
        f(3.0 * (a7 + a9)) * &x,
        f(-3.0 * (a4 + a10)) * &y,
    ])
}

/// Residuals of Holt's two PDEs. `f` is the function F(V) written with a parameter
/// named `V`; the integration constant of Y is absorbed into F.
pub fn residual_holt(f: &Expr, p: &KT3Params, pot: &Potential, x: f64, y: f64) -> Result<[f64; 2], ConditionError> {
    let l = kt3(p);
    let yv = holt_y(p);
    let fv = f.subst_param("V", &pot.v);
    let [vx, vy] = &pot.grad;
    let [vxx, vxy, vyy] = &pot.hess;
    let n = |k: i64| Expr::int(k);
    let r1 = &yv * vxy + n(3) * &l.t222 * vy - n(3) * &l.t111 * vx + dx(&(&fv * vy));
    let r2 = &yv * (vyy - vxx)
        - n(3) * (&l.t111 + n(3) * &l.t122) * vy
        - n(3) * (&l.t222 + n(3) * &l.t112) * vx
        - (dx(&(&fv * vx)) - dy(&(&fv * vy)));
    Ok(eval_all([r1, r2], x, y)?)
}

/// Cyclic condition for `V = F1(w1) + F2(w2) + F3(w3)`. Each `F_i` is written in the
/// variable `x`, which stands for its own argument `w_i`.
pub fn residual_cyclic(fs: [&Expr; 3], x: f64, y: f64) -> Result<f64, ConditionError> {
    let s3 = 3f64.sqrt();
    let w = [y + s3 * x, y - s3 * x, -2.0 * y];
    let mut val = [0.0; 3];
    let mut der = [0.0; 3];
    for i in 0..3 {
        val[i] = fs[i].eval_xy(w[i], 0.0)?;
        der[i] = fs[i].diff(Var::X).eval_xy(w[i], 0.0)?;
    }
    Ok(der[0] * (val[1] - val[2]) + der[1] * (val[2] - val[0]) + der[2] * (val[0] - val[1]))
}

/// Value of a derivative of `j` at `t = 0`, `v = 0`, as a function of position.
fn coefficient(j: &Expr, ders: &[Var], k: f64) -> Expr {
    let mut e = j.clone();
    for &v in ders {
        e = e.diff(v);
    }
    e.subst_vars(&[(Var::T, Expr::zero()), (Var::Vx, Expr::zero()), (Var::Vy, Expr::zero())]).scale(k)
}

/// Least-squares fit of a linear tensor family to `target` at `points`.
/// Returns the coefficients and the largest pointwise misfit.
fn fit_tensor2(
    n: usize,
    basis: impl Fn(usize) -> SymTensorField2,
    target: &SymTensorField2,
    points: &[(f64, f64)],
) -> Result<(Vec<f64>, f64), ExprError> {
    use nalgebra::{DMatrix, DVector};
    let rows = 3 * points.len();
    let mut a = DMatrix::zeros(rows, n);
    for k in 0..n {
        let t = basis(k);
        for (i, &(x, y)) in points.iter().enumerate() {
            for (c, e) in t.components().iter().enumerate() {
                a[(3 * i + c, k)] = e.eval_xy(x, y)?;
            }
        }
    }
    let mut b = DVector::zeros(rows);
    for (i, &(x, y)) in points.iter().enumerate() {
        for (c, e) in target.components().iter().enumerate() {
            b[3 * i + c] = e.eval_xy(x, y)?;
        }
    }
    let sol = a.clone().svd(true, true).solve(&b, 1e-12).map_err(|m| ExprError::DomainError(m.to_string()))?;
    let misfit = (&a * &sol - &b).amax();
    Ok((sol.iter().copied().collect(), misfit))
}

fn quad_part(j: &Expr, t_order: usize, k: f64) -> SymTensorField2 {
    let ts = vec![Var::T; t_order];
    let with = |vs: &[Var]| [ts.as_slice(), vs].concat();
    SymTensorField2 {
        t11: coefficient(j, &with(&[Var::Vx, Var::Vx]), 0.5 * k),
        t12: coefficient(j, &with(&[Var::Vx, Var::Vy]), 0.5 * k),
        t22: coefficient(j, &with(&[Var::Vy, Var::Vy]), 0.5 * k),
    }
}

fn fit_generator(c: &SymTensorField2, points: &[(f64, f64)]) -> Result<(SymGenParams, f64), ExprError> {
    let (b, misfit) = fit_tensor2(15, |k| sym_generator(&SymGenParams::unit(k + 1)), c, points)?;
    let mut gen = SymGenParams::default();
    gen.b.copy_from_slice(&b);
    Ok((gen, misfit))
}

/// Read a linear-in-time candidate off an explicit phase-space integral.
///
/// The quadratic part at `t = 0` gives `C_ab`, the `t^2` quadratic part `D_ab`,
/// the `t` linear part `L_a`, and the velocity-free part `G`. The second value
/// is the worst least-squares misfit of the tensor fits at `points`.
pub fn decompose_lin_t(j: &Expr, points: &[(f64, f64)]) -> Result<(CandidateCFI, f64), ConditionError> {
    let (gen, m1) = fit_generator(&quad_part(j, 0, 1.0), points)?;
    let d = quad_part(j, 2, 0.5);
    let unit = |k: usize| {
        let mut v = [0.0; 6];
        v[k] = 1.0;
        kt2(&KT2Params::from_slice(&v))
    };
    let (dv, m2) = fit_tensor2(6, unit, &d, points)?;
    let l = [coefficient(j, &[Var::T, Var::Vx], 1.0), coefficient(j, &[Var::T, Var::Vy], 1.0)];
    let g = coefficient(j, &[], 1.0);
    Ok((CandidateCFI::lin_t(gen, KT2Params::from_slice(&dv), l, g), m1.max(m2)))
}

/// Read an exponential candidate with rate `lambda` off an explicit integral.
pub fn decompose_exp(j: &Expr, lambda: f64, points: &[(f64, f64)]) -> Result<(CandidateCFI, f64), ConditionError> {
    let (gen, misfit) = fit_generator(&quad_part(j, 0, 1.0 / lambda), points)?;
    let b = [coefficient(j, &[Var::Vx], 1.0 / lambda), coefficient(j, &[Var::Vy], 1.0 / lambda)];
    Ok((CandidateCFI::exp(gen, lambda, b), misfit))
}
