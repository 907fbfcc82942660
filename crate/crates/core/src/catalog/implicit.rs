//! One-variable functions defined implicitly: real branches of polynomial
//! equations `P(s, F) = 0` and solutions of constraint ODEs in an angle.
//!
//! Both kinds implement [`Tabulated`] so they can sit inside expressions.
//! Derivatives of every order come from symbolic implicit differentiation of
//! the defining equation, evaluated on the tabulated solution.
//!
//! Expressions here use `x` for the independent variable `s`, and `y`, `vx`,
//! `vy` for `F`, `F'`, `F''`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::expr::{as_polynomial, Expr, ExprError, Point, Tabulated, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImplicitError {
    #[error("branch collides with another root near s = {at}")]
    BranchCollision { at: f64 },
    #[error("no real root near the seed at s = {at}")]
    NoRoot { at: f64 },
    #[error("second constraint fails along the solution: residual {residual:.3e} at s = {at}")]
    InconsistentConstraints { residual: f64, at: f64 },
    #[error("constraint residual {residual:.3e} exceeds tolerance at s = {at}")]
    Residual { residual: f64, at: f64 },
    #[error("bad range or grid: {0}")]
    BadGrid(String),
    #[error("equation is not polynomial in F")]
    NotPolynomial,
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImplicitKind {
    Cubic,
    Quartic,
    Ode,
}

/// Grid residual bound demanded of every tabulation.
pub const GRID_TOL: f64 = 1e-8;

fn at(s: f64, f: &[f64]) -> Point {
    Point::new(0.0, s, f.first().copied().unwrap_or(0.0), f.get(1).copied().unwrap_or(0.0), f.get(2).copied().unwrap_or(0.0))
}

fn out_of_range(name: &str, s: f64, lo: f64, hi: f64) -> ExprError {
    ExprError::DomainError(format!("{name}({s}) outside tabulated range [{lo}, {hi}]"))
}

/// Total `s`-derivative of `e(s, F, F', F'')` given the expression for the next derivative.
fn total_derivative(e: &Expr, order: usize, next: &Expr) -> Expr {
    let vars = [Var::Y, Var::Vx, Var::Vy];
    let mut terms = vec![e.diff(Var::X)];
    for k in 0..order {
        let d = e.diff(vars[k]);
        if d.is_zero() {
            continue;
        }
        let fk1 = if k + 1 < order { Expr::var(vars[k + 1]) } else { next.clone() };
        terms.push(d * fk1);
    }
    Expr::sum(terms)
}

/// A smooth real root branch of a polynomial equation in `F`.
#[derive(Debug)]
pub struct AlgebraicBranch {
    name: String,
    pub kind: ImplicitKind,
    equation: Expr,
    p_f: Expr,
    /// `derivs[k]` is the (k+1)-th derivative as an expression in `(s, F)`.
    derivs: Vec<Expr>,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub max_residual: f64,
}

/// Coefficients of `P` as a polynomial in `F` at fixed `s`, lowest degree first.
fn coefficients_in_f(p: &crate::expr::Poly, s: f64) -> Vec<f64> {
    let deg = p.keys().map(|m| m.j).max().unwrap_or(0) as usize;
    let mut c = vec![0.0; deg + 1];
    for (m, r) in p {
        let v = num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN);
        c[m.j as usize] += v * s.powi(m.i as i32);
    }
    c
}

/// All complex roots of a real polynomial (lowest degree first) as `(re, im)`.
fn roots(c: &[f64]) -> Vec<(f64, f64)> {
    let mut c = c.to_vec();
    while c.len() > 1 && c.last().map_or(false, |v| *v == 0.0) {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = c[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

impl AlgebraicBranch {
    /// Track the root nearest `seed` at the grid node closest to `at`, walking
    /// outwards in both directions.
    pub fn track(
        name: &str,
        kind: ImplicitKind,
        equation: Expr,
        range: (f64, f64),
        nodes: usize,
        at_s: f64,
        seed: f64,
    ) -> Result<Self, ImplicitError> {
        let (lo, hi) = range;
        if !(lo < hi) || nodes < 3 || !(lo..=hi).contains(&at_s) {
            return Err(ImplicitError::BadGrid(format!("[{lo}, {hi}] with {nodes} nodes, seed at {at_s}")));
        }
        let poly = as_polynomial(&equation).map_err(|_| ImplicitError::NotPolynomial)?;
        let p_f = equation.diff(Var::Y);
        let mut derivs = Vec::new();
        let first = -(equation.diff(Var::X)) * p_f.recip();
        derivs.push(first.clone());
        for _ in 1..4 {
            let last: &Expr = derivs.last().unwrap();
            let d = last.diff(Var::X) + last.diff(Var::Y) * &first;
            derivs.push(d);
        }
        let mut b = AlgebraicBranch {
            name: name.to_string(),
            kind,
            equation,
            p_f,
            derivs,
            grid: (0..nodes).map(|k| lo + (hi - lo) * k as f64 / (nodes - 1) as f64).collect(),
            values: vec![0.0; nodes],
            max_residual: 0.0,
        };
        let h = b.grid[1] - b.grid[0];
        let k0 = (((at_s - lo) / h).round() as usize).min(nodes - 1);
        let start = Self::nearest_real_root(&poly, b.grid[k0], seed).ok_or(ImplicitError::NoRoot { at: b.grid[k0] })?;
        let f0 = b.newton(b.grid[k0], start)?;
        b.values[k0] = f0;
        b.check_node(&poly, k0)?;
        let walks: [Box<dyn Iterator<Item = usize>>; 2] = [Box::new(k0 + 1..nodes), Box::new((0..k0).rev())];
        for walk in walks {
            let mut prev = k0;
            for k in walk {
                let s = b.grid[k];
                let slope = b.derivs[0].eval(&at(b.grid[prev], &[b.values[prev]]), &Default::default())?;
                let f = b.newton(s, b.values[prev] + slope * (s - b.grid[prev]))?;
                b.values[k] = f;
                b.check_node(&poly, k)?;
                let new_slope = b.derivs[0].eval(&at(s, &[f]), &Default::default())?;
                let jump = (f - b.values[prev]).abs();
                let bound = 2.0 * h * slope.abs().max(new_slope.abs()) + 1e-9 * (1.0 + f.abs());
                if jump > bound {
                    return Err(ImplicitError::BranchCollision { at: s });
                }
                prev = k;
            }
        }
        if b.max_residual > GRID_TOL {
            return Err(ImplicitError::Residual { residual: b.max_residual, at: lo });
        }
        Ok(b)
    }

    fn check_node(&mut self, poly: &crate::expr::Poly, k: usize) -> Result<(), ImplicitError> {
        let (s, f) = (self.grid[k], self.values[k]);
        self.check_isolated(poly, s, f)?;
        let p = at(s, &[f]);
        let r = self.equation.eval(&p, &Default::default())?;
        let scale = self.p_f.eval(&p, &Default::default())?.abs().max(1.0);
        self.max_residual = self.max_residual.max(r.abs() / scale);
        Ok(())
    }

    fn nearest_real_root(poly: &crate::expr::Poly, s: f64, seed: f64) -> Option<f64> {
        roots(&coefficients_in_f(poly, s))
            .into_iter()
            .filter(|(re, im)| im.abs() <= 1e-7 * (1.0 + re.abs()))
            .map(|(re, _)| re)
            .min_by(|a, b| (a - seed).abs().total_cmp(&(b - seed).abs()))
    }

    /// The tracked root must stay well separated from every other root.
    fn check_isolated(&self, poly: &crate::expr::Poly, s: f64, f: f64) -> Result<(), ImplicitError> {
        let rs = roots(&coefficients_in_f(poly, s));
        let mut dists: Vec<f64> = rs.iter().map(|(re, im)| ((re - f).powi(2) + im * im).sqrt()).collect();
        dists.sort_by(f64::total_cmp);
        // dists[0] is the tracked root itself.
        if dists.len() > 1 && dists[1] < 1e-4 * (1.0 + f.abs()) {
            return Err(ImplicitError::BranchCollision { at: s });
        }
        Ok(())
    }

    fn newton(&self, s: f64, mut f: f64) -> Result<f64, ImplicitError> {
        let params = Default::default();
        for _ in 0..60 {
            let p = self.equation.eval(&at(s, &[f]), &params)?;
            let dp = self.p_f.eval(&at(s, &[f]), &params)?;
            if dp == 0.0 {
                return Err(ImplicitError::BranchCollision { at: s });
            }
            let step = p / dp;
            f -= step;
            if step.abs() <= 4.0 * f64::EPSILON * (1.0 + f.abs()) {
                return Ok(f);
            }
        }
        let p = self.equation.eval(&at(s, &[f]), &params)?;
        if p.abs() <= 1e-10 {
            Ok(f)
        } else {
            Err(ImplicitError::NoRoot { at: s })
        }
    }

    pub fn range(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    /// Residual of the defining equation at `s` on the branch.
    pub fn residual(&self, s: f64) -> Result<f64, ExprError> {
        let f = self.value(0, s)?;
        self.equation.eval(&at(s, &[f]), &Default::default())
    }
}

impl Tabulated for AlgebraicBranch {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, order: usize, s: f64) -> Result<f64, ExprError> {
        let (lo, hi) = self.range();
        if !(s >= lo && s <= hi) {
            return Err(out_of_range(&self.name, s, lo, hi));
        }
        let h = self.grid[1] - self.grid[0];
        let k = (((s - lo) / h) as usize).min(self.grid.len() - 2);
        let w = (s - self.grid[k]) / h;
        let guess = self.values[k] * (1.0 - w) + self.values[k + 1] * w;
        let f = self.newton(s, guess).map_err(|e| ExprError::DomainError(e.to_string()))?;
        match order {
            0 => Ok(f),
            n if n <= self.derivs.len() => self.derivs[n - 1].eval(&at(s, &[f]), &Default::default()),
            n => Err(ExprError::DomainError(format!("{} has no derivative of order {n}", self.name))),
        }
    }
}

/// Solution of `F^(n) = rhs(s, F, .., F^(n-1))` for n = 2 or 3, tabulated on a grid.
#[derive(Debug)]
pub struct OdeSolution {
    name: String,
    order: usize,
    rhs: Expr,
    /// Expressions for derivatives of order `order + 1`, `order + 2`, ...
    higher: Vec<Expr>,
    pub grid: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Largest difference between the tabulation and a half-step recomputation.
    pub grid_error: f64,
}

const SUBSTEPS: usize = 4;

impl OdeSolution {
    /// Integrate from `(s0, init)` both ways to cover `range` with spacing `h`.
    pub fn solve(
        name: &str,
        rhs: Expr,
        order: usize,
        s0: f64,
        init: &[f64],
        range: (f64, f64),
        h: f64,
    ) -> Result<Self, ImplicitError> {
        if !(2..=3).contains(&order) || init.len() != order {
            return Err(ImplicitError::BadGrid(format!("order {order} with {} initial values", init.len())));
        }
        let (lo, hi) = range;
        if !(lo <= s0 && s0 <= hi && lo < hi && h > 0.0) {
            return Err(ImplicitError::BadGrid(format!("start {s0} outside [{lo}, {hi}]")));
        }
        let mut higher = Vec::new();
        let mut last = rhs.clone();
        for _ in 0..3 {
            let d = total_derivative(&last, order, &rhs);
            higher.push(d.clone());
            last = d;
        }
        let mut sol = OdeSolution {
            name: name.to_string(),
            order,
            rhs,
            higher,
            grid: vec![],
            states: vec![],
            grid_error: 0.0,
        };
        let n_down = ((s0 - lo) / h).ceil() as usize;
        let n_up = ((hi - s0) / h).ceil() as usize;
        let mut down = vec![(s0, init.to_vec())];
        let mut up = vec![(s0, init.to_vec())];
        for (dir, n, out) in [(-1.0, n_down, &mut down), (1.0, n_up, &mut up)] {
            for _ in 0..n {
                let (s, y) = out.last().unwrap().clone();
                let coarse = sol.advance(s, &y, dir * h, SUBSTEPS)?;
                let fine = sol.advance(s, &y, dir * h, 2 * SUBSTEPS)?;
                let err = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())).fold(0.0, f64::max);
                sol.grid_error = sol.grid_error.max(err);
                out.push((s + dir * h, fine));
            }
        }
        down.reverse();
        down.pop();
        for (s, y) in down.into_iter().chain(up) {
            sol.grid.push(s);
            sol.states.push(y);
        }
        if sol.grid_error > GRID_TOL {
            return Err(ImplicitError::Residual { residual: sol.grid_error, at: s0 });
        }
        Ok(sol)
    }

    fn deriv(&self, s: f64, y: &[f64]) -> Result<Vec<f64>, ExprError> {
        let top = self.rhs.eval(&at(s, y), &Default::default())?;
        let mut d: Vec<f64> = y[1..].to_vec();
        d.push(top);
        Ok(d)
    }

    /// Classical RK4 over `span` in `n` equal substeps.
    fn advance(&self, s: f64, y: &[f64], span: f64, n: usize) -> Result<Vec<f64>, ExprError> {
        let h = span / n as f64;
        let mut y = y.to_vec();
        let mut s = s;
        let axpy = |a: &[f64], k: &[f64], c: f64| a.iter().zip(k).map(|(a, k)| a + c * k).collect::<Vec<_>>();
        for _ in 0..n {
            let k1 = self.deriv(s, &y)?;
            let k2 = self.deriv(s + h / 2.0, &axpy(&y, &k1, h / 2.0))?;
            let k3 = self.deriv(s + h / 2.0, &axpy(&y, &k2, h / 2.0))?;
            let k4 = self.deriv(s + h, &axpy(&y, &k3, h))?;
            for i in 0..y.len() {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            s += h;
        }
        Ok(y)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    /// State `(F, F', ..)` at `s`, integrated from the nearest node.
    pub fn state(&self, s: f64) -> Result<Vec<f64>, ExprError> {
        let (lo, hi) = self.range();
        if !(s >= lo && s <= hi) {
            return Err(out_of_range(&self.name, s, lo, hi));
        }
        let h = self.grid[1] - self.grid[0];
        let k = (((s - lo) / h).round() as usize).min(self.grid.len() - 1);
        let ds = s - self.grid[k];
        if ds == 0.0 {
            return Ok(self.states[k].clone());
        }
        self.advance(self.grid[k], &self.states[k], ds, 2)
    }

    /// Evaluate an expression in `(s, F, F', F'')` along the solution.
    pub fn eval_along(&self, e: &Expr, s: f64) -> Result<f64, ExprError> {
        let y = self.state(s)?;
        e.eval(&at(s, &y), &Default::default())
    }

    /// Max of `|e|` over the grid nodes.
    pub fn max_on_grid(&self, e: &Expr) -> Result<(f64, f64), ExprError> {
        let mut worst = (0.0, self.grid[0]);
        for (s, y) in self.grid.iter().zip(&self.states) {
            let v = e.eval(&at(*s, y), &Default::default())?.abs();
            if v > worst.0 {
                worst = (v, *s);
            }
        }
        Ok(worst)
    }
}

impl Tabulated for OdeSolution {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, order: usize, s: f64) -> Result<f64, ExprError> {
        let y = self.state(s)?;
        if order < self.order {
            return Ok(y[order]);
        }
        let e = if order == self.order { &self.rhs } else { self.higher.get(order - self.order - 1).ok_or_else(|| ExprError::DomainError(format!("{} has no derivative of order {order}", self.name)))? };
        e.eval(&at(s, &y), &Default::default())
    }
}

/// The cubic of the separable family with a linear term in `y`:
/// `(F + k3/2)(F + (c/k1) s + k2/k1 - k3)^2 = k4`.
pub fn cubic_equation(k: [f64; 4], c: f64) -> Expr {
    let [k1, k2, k3, k4] = k;
    let f = Expr::y();
    let s = Expr::x();
    let a = &f + Expr::float(k3 / 2.0);
    let b = &f + Expr::float(c / k1) * &s + Expr::float(k2 / k1 - k3);
    a * b.powi(2) - Expr::float(k4)
}

/// The quartic of the separable family with `c1 y^2`.
pub fn quartic_equation(c1: f64, k1: f64, k2: f64, k3: f64) -> Expr {
    let f = Expr::y();
    let s2 = Expr::x().powi(2);
    let n = Expr::float;
    let a = &f - n(c1) * &s2;
    Expr::sum(vec![
        n(k2) * &s2,
        n(4.0 * k1 * k1),
        (n(9.0) * &f - n(c1) * &s2) * a.powi(3),
        n(-4.0 * k1) * &a * (n(3.0) * &f + n(c1) * &s2),
        n(4.0 * k3) * (n(3.0) * &f - n(c1) * &s2) * a.powi(2),
        n(4.0 * k3 * k3) * a.powi(2),
        n(-8.0 * k1 * k3 / 3.0) * (n(3.0) * &f - n(c1) * &s2),
    ])
}

pub fn solve_cubic_branch(
    k: [f64; 4],
    c: f64,
    range: (f64, f64),
    seed: f64,
) -> Result<Arc<AlgebraicBranch>, ImplicitError> {
    if k[0] == 0.0 {
        return Err(ImplicitError::BadGrid("k1 must be nonzero".into()));
    }
    AlgebraicBranch::track("F", ImplicitKind::Cubic, cubic_equation(k, c), range, 2001, range.0, seed).map(Arc::new)
}

pub fn solve_quartic_branch(
    c1: f64,
    k1: f64,
    k2: f64,
    k3: f64,
    range: (f64, f64),
    seed: f64,
) -> Result<Arc<AlgebraicBranch>, ImplicitError> {
    AlgebraicBranch::track("F1", ImplicitKind::Quartic, quartic_equation(c1, k1, k2, k3), range, 2001, range.0, seed)
        .map(Arc::new)
}

/// Which angular constraint ODE to solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintOde {
    /// The single condition of the `f'/r^2` family, with constant `c1`.
    Polar { c1: f64 },
    /// Same ODE with the second condition of the `k/r + f'/r^2` family checked along it.
    PolarKepler { c1: f64, c2: f64, k: f64 },
    /// `g'' g''' = 2 g' g'' + 3 g g'`.
    ThirdOrder,
}

/// `f''` solved from the polar-family condition, in `(s, f, f')`.
pub fn polar_rhs(c1: f64) -> Expr {
    let (s, f, fp) = (Expr::x(), Expr::y(), Expr::vx());
    let c1 = Expr::float(c1);
    let (sn, cs) = (s.sin(), s.cos());
    let num = Expr::int(2) * &sn * &f * &fp - &cs * (Expr::int(4) * fp.powi(2) + Expr::int(2) * &c1 * &fp);
    let den = &sn * (Expr::int(3) * &fp + &c1) + &cs * &f;
    num * den.recip()
}

/// The polar-family condition in unsolved form, in `(s, f, f', f'')`.
pub fn polar_condition(c1: f64) -> Expr {
    let (s, f, fp, fpp) = (Expr::x(), Expr::y(), Expr::vx(), Expr::vy());
    let c1 = Expr::float(c1);
    s.sin() * ((Expr::int(3) * &fp + &c1) * &fpp - Expr::int(2) * &f * &fp)
        + s.cos() * (&f * &fpp + Expr::int(4) * fp.powi(2) + Expr::int(2) * &c1 * &fp)
}

/// The second condition of the `k/r + f'/r^2` family.
pub fn kepler_condition(c1: f64, c2: f64, k: f64) -> Expr {
    let (s, f, fp, fpp) = (Expr::x(), Expr::y(), Expr::vx(), Expr::vy());
    let n = Expr::float;
    (n(c2) - &fp) * &fpp + n(k) * (n(c1) + Expr::int(2) * &fp) * s.cos() + n(k) * (&fpp - &f) * s.sin()
}

pub fn third_order_rhs() -> Expr {
    let (g, gp, gpp) = (Expr::y(), Expr::vx(), Expr::vy());
    (Expr::int(2) * &gp * &gpp + Expr::int(3) * &g * &gp) * gpp.recip()
}

/// `g''^2 - 2 g'^2 - 3 g^2`, constant along solutions of the third-order ODE.
pub fn third_order_invariant() -> Expr {
    let (g, gp, gpp) = (Expr::y(), Expr::vx(), Expr::vy());
    gpp.powi(2) - Expr::int(2) * gp.powi(2) - Expr::int(3) * g.powi(2)
}

pub fn solve_constraint_ode(
    kind: ConstraintOde,
    range: (f64, f64),
    s0: f64,
    init: &[f64],
) -> Result<Arc<OdeSolution>, ImplicitError> {
    let h = 2e-3;
    let sol = match kind {
        ConstraintOde::Polar { c1 } => OdeSolution::solve("f", polar_rhs(c1), 2, s0, init, range, h)?,
        ConstraintOde::PolarKepler { c1, c2, k } => {
            let sol = OdeSolution::solve("f", polar_rhs(c1), 2, s0, init, range, h)?;
            // f'' enters the second condition; supply it from the first.
            let cond = kepler_condition(c1, c2, k).subst_var(Var::Vy, &polar_rhs(c1));
            let (residual, at) = sol.max_on_grid(&cond)?;
            if residual > GRID_TOL {
                return Err(ImplicitError::InconsistentConstraints { residual, at });
            }
            sol
        }
        ConstraintOde::ThirdOrder => {
            let sol = OdeSolution::solve("g", third_order_rhs(), 3, s0, init, range, h)?;
            let inv = third_order_invariant();
            let i0 = inv.eval(&at(s0, init), &Default::default())?;
            let drift = inv - Expr::float(i0);
            let (residual, at) = sol.max_on_grid(&drift)?;
            if residual > GRID_TOL * (1.0 + i0.abs()) {
                return Err(ImplicitError::Residual { residual, at });
            }
            sol
        }
    };
    Ok(Arc::new(sol))
}

/// A potential-like function known through its gradient, integrated along the
/// straight segment from a base point with 24-point Gauss-Legendre quadrature.
#[derive(Debug)]
pub struct PathIntegral {
    name: String,
    base: (f64, f64),
    grad: [Expr; 2],
}

impl PathIntegral {
    pub fn new(name: &str, base: (f64, f64), grad: [Expr; 2]) -> Self {
        PathIntegral { name: name.to_string(), base, grad }
    }

    fn line(&self, from: (f64, f64), to: (f64, f64)) -> Result<f64, ExprError> {
        let (dx, dy) = (to.0 - from.0, to.1 - from.1);
        let mut acc = 0.0;
        for (node, w) in gauss_legendre_24() {
            let u = 0.5 * (node + 1.0);
            let (x, y) = (from.0 + u * dx, from.1 + u * dy);
            let gx = self.grad[0].eval_xy(x, y)?;
            let gy = self.grad[1].eval_xy(x, y)?;
            acc += 0.5 * w * (gx * dx + gy * dy);
        }
        Ok(acc)
    }

    /// Difference between the straight path and the two-leg path through `(x, base.y)`.
    pub fn closure(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        let direct = self.line(self.base, (x, y))?;
        let corner = (x, self.base.1);
        let legs = self.line(self.base, corner)? + self.line(corner, (x, y))?;
        Ok(direct - legs)
    }
}

impl crate::expr::ScalarField for PathIntegral {
    fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        self.line(self.base, (x, y))
    }

    fn gradient(&self) -> [Expr; 2] {
        self.grad.clone()
    }
}

fn gauss_legendre_24() -> impl Iterator<Item = (f64, f64)> {
    const X: [f64; 12] = [
        0.0640568928626056260850431,
        0.1911188674736163091586398,
        0.3150426796961633743867933,
        0.4337935076260451384870842,
        0.5454214713888395356583757,
        0.6480936519369755692524958,
        0.7401241915785543642438281,
        0.8200019859739029219539499,
        0.8864155270044010342131543,
        0.9382745520027327585236490,
        0.9747285559713094981983919,
        0.9951872199970213601799974,
    ];
    const W: [f64; 12] = [
        0.1279381953467521569740561,
        0.1258374563468282961213754,
        0.1216704729278033912044632,
        0.1155056680537256013533445,
        0.1074442701159656347825773,
        0.0976186521041138882698807,
        0.0861901615319532759171852,
        0.0733464814110803057340336,
        0.0592985849154367807463678,
        0.0442774388174198061686027,
        0.0285313886289336631813078,
        0.0123412297999871995468057,
    ];
    X.into_iter().zip(W).flat_map(|(x, w)| [(-x, w), (x, w)])
}
