//! Expression trees over `t, x, y, vx, vy` with named parameters.
//!
//! Trees are immutable and cheap to clone (`Arc` nodes). Constructors apply a
//! handful of trivial rewrites only; equality of expressions is checked by
//! evaluation, never by structure.

mod parse;
mod poly;

pub use parse::{parse, parse_with_defs};
pub use poly::{as_polynomial, from_polynomial, monomial, Monomial2, NotPolynomial, Poly};

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedMul, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Parameter bindings.
pub type Params = BTreeMap<String, f64>;

/// Rational exponent of a power node.
pub type Exponent = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    T,
    X,
    Y,
    Vx,
    Vy,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
            Var::Vx => "vx",
            Var::Vy => "vy",
        }
    }
}

/// A phase-space point; configuration-only expressions ignore the velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl Point {
    pub fn xy(x: f64, y: f64) -> Self {
        Point { x, y, ..Default::default() }
    }

    pub fn new(t: f64, x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Point { t, x, y, vx, vy }
    }

    pub fn get(&self, v: Var) -> f64 {
        match v {
            Var::T => self.t,
            Var::X => self.x,
            Var::Y => self.y,
            Var::Vx => self.vx,
            Var::Vy => self.vy,
        }
    }
}

/// A one-variable function known only numerically (implicit roots, ODE solutions).
/// `value(order, s)` returns the `order`-th derivative at `s`.
pub trait Tabulated: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn value(&self, order: usize, s: f64) -> Result<f64, ExprError>;
}

/// A scalar field on the plane known numerically, with a symbolic gradient.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn value(&self, x: f64, y: f64) -> Result<f64, ExprError>;
    fn gradient(&self) -> [Expr; 2];
}

#[derive(Debug)]
pub enum Node {
    Num(BigRational, f64),
    Float(f64),
    Param(Arc<str>),
    Var(Var),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Expr, Exponent),
    Exp(Expr),
    Log(Expr),
    Sin(Expr),
    Cos(Expr),
    Atan2(Expr, Expr),
    Func(Arc<dyn Tabulated>, usize, Expr),
    Field(Arc<dyn ScalarField>),
}

#[derive(Debug, Clone)]
pub struct Expr(Arc<Node>);

fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn domain(msg: impl Into<String>) -> ExprError {
    ExprError::DomainError(msg.into())
}

impl Expr {
    fn wrap(n: Node) -> Self {
        Expr(Arc::new(n))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn rational(r: BigRational) -> Self {
        let f = rat_to_f64(&r);
        Expr::wrap(Node::Num(r, f))
    }

    pub fn int(n: i64) -> Self {
        Expr::rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn frac(p: i64, q: i64) -> Self {
        Expr::rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    /// A float literal. Integral values are stored exactly.
    pub fn float(v: f64) -> Self {
        if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
            return Expr::int(v as i64);
        }
        Expr::wrap(Node::Float(v))
    }

    pub fn param(name: &str) -> Self {
        Expr::wrap(Node::Param(Arc::from(name)))
    }

    pub fn var(v: Var) -> Self {
        Expr::wrap(Node::Var(v))
    }

    pub fn t() -> Self {
        Expr::var(Var::T)
    }
    pub fn x() -> Self {
        Expr::var(Var::X)
    }
    pub fn y() -> Self {
        Expr::var(Var::Y)
    }
    pub fn vx() -> Self {
        Expr::var(Var::Vx)
    }
    pub fn vy() -> Self {
        Expr::var(Var::Vy)
    }

    pub fn func(f: Arc<dyn Tabulated>, order: usize, arg: Expr) -> Self {
        Expr::wrap(Node::Func(f, order, arg))
    }

    pub fn field(f: Arc<dyn ScalarField>) -> Self {
        Expr::wrap(Node::Field(f))
    }

    /// Exact numeric value if this node is a rational constant.
    pub fn as_rational(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Num(r, _) => Some(r),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self.node() {
            Node::Num(_, f) => Some(*f),
            Node::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Num(r, _) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Num(r, _) if r.is_one())
    }

    pub fn sum(terms: Vec<Expr>) -> Self {
        let mut out = Vec::with_capacity(terms.len());
        let mut exact = BigRational::zero();
        let mut float: Option<f64> = None;
        let mut push = |e: Expr, out: &mut Vec<Expr>| match e.node() {
            Node::Num(r, _) => exact += r,
            Node::Float(f) => *float.get_or_insert(0.0) += *f,
            _ => out.push(e),
        };
        for t in terms {
            if let Node::Sum(inner) = t.node() {
                for e in inner {
                    push(e.clone(), &mut out);
                }
            } else {
                push(t, &mut out);
            }
        }
        let constant = match float {
            Some(f) => {
                let v = f + rat_to_f64(&exact);
                (v != 0.0).then(|| Expr::float(v))
            }
            None => (!exact.is_zero()).then(|| Expr::rational(exact)),
        };
        if let Some(c) = constant {
            out.push(c);
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::wrap(Node::Sum(out)),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Self {
        let mut out = Vec::with_capacity(factors.len());
        let mut exact = BigRational::one();
        let mut float: Option<f64> = None;
        let mut flat = Vec::with_capacity(factors.len());
        for f in factors {
            if let Node::Product(inner) = f.node() {
                flat.extend(inner.iter().cloned());
            } else {
                flat.push(f);
            }
        }
        for f in flat {
            match f.node() {
                Node::Num(r, _) => {
                    if r.is_zero() {
                        return Expr::zero();
                    }
                    exact *= r;
                }
                Node::Float(v) => *float.get_or_insert(1.0) *= *v,
                _ => out.push(f),
            }
        }
        let constant = match float {
            Some(f) => {
                let v = f * rat_to_f64(&exact);
                if v == 0.0 {
                    return Expr::zero();
                }
                (v != 1.0).then(|| Expr::float(v))
            }
            None => (!exact.is_one()).then(|| Expr::rational(exact)),
        };
        if let Some(c) = constant {
            out.insert(0, c);
        }
        match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => Expr::wrap(Node::Product(out)),
        }
    }

    pub fn pow(base: Expr, p: Exponent) -> Self {
        if p.is_zero() {
            return Expr::one();
        }
        if p.is_one() {
            return base;
        }
        if p.is_integer() {
            let n = *p.numer();
            if let Node::Num(r, _) = base.node() {
                if r.is_zero() {
                    if n > 0 {
                        return Expr::zero();
                    }
                } else if n.unsigned_abs() <= 64 {
                    let mut acc = BigRational::one();
                    for _ in 0..n.unsigned_abs() {
                        acc *= r;
                    }
                    return Expr::rational(if n < 0 { acc.recip() } else { acc });
                }
            }
            if let Node::Pow(b, q) = base.node() {
                if let Some(pq) = q.checked_mul(&p) {
                    return Expr::pow(b.clone(), pq);
                }
            }
        }
        if base.is_one() {
            return Expr::one();
        }
        Expr::wrap(Node::Pow(base, p))
    }

    pub fn powi(&self, n: i64) -> Self {
        Expr::pow(self.clone(), Exponent::from_integer(n))
    }

    pub fn powr(&self, p: i64, q: i64) -> Self {
        Expr::pow(self.clone(), Exponent::new(p, q))
    }

    pub fn sqrt(&self) -> Self {
        self.powr(1, 2)
    }

    pub fn recip(&self) -> Self {
        self.powi(-1)
    }

    pub fn exp(&self) -> Self {
        if self.is_zero() {
            return Expr::one();
        }
        Expr::wrap(Node::Exp(self.clone()))
    }

    pub fn ln(&self) -> Self {
        if self.is_one() {
            return Expr::zero();
        }
        Expr::wrap(Node::Log(self.clone()))
    }

    pub fn sin(&self) -> Self {
        if self.is_zero() {
            return Expr::zero();
        }
        Expr::wrap(Node::Sin(self.clone()))
    }

    pub fn cos(&self) -> Self {
        if self.is_zero() {
            return Expr::one();
        }
        Expr::wrap(Node::Cos(self.clone()))
    }

    pub fn atan2(num: Expr, den: Expr) -> Self {
        Expr::wrap(Node::Atan2(num, den))
    }

    pub fn scale(&self, k: f64) -> Self {
        Expr::product(vec![Expr::float(k), self.clone()])
    }

    pub fn eval(&self, pt: &Point, params: &Params) -> Result<f64, ExprError> {
        let v = self.eval_raw(pt, params)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain(format!("non-finite value while evaluating {self}")))
        }
    }

    /// Evaluate a parameter-free expression at `(x, y)`.
    pub fn eval_xy(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        self.eval(&Point::xy(x, y), &Params::new())
    }

    fn eval_raw(&self, pt: &Point, params: &Params) -> Result<f64, ExprError> {
        let v = match self.node() {
            Node::Num(_, f) => *f,
            Node::Float(f) => *f,
            Node::Param(name) => *params
                .get(&**name)
                .ok_or_else(|| ExprError::UnboundParameter(name.to_string()))?,
            Node::Var(v) => pt.get(*v),
            Node::Sum(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval_raw(pt, params)?;
                }
                acc
            }
            Node::Product(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= f.eval_raw(pt, params)?;
                }
                acc
            }
            Node::Pow(b, p) => {
                let base = b.eval_raw(pt, params)?;
                eval_pow(base, *p)?
            }
            Node::Exp(a) => a.eval_raw(pt, params)?.exp(),
            Node::Log(a) => {
                let v = a.eval_raw(pt, params)?;
                if v <= 0.0 {
                    return Err(domain(format!("log of nonpositive value {v}")));
                }
                v.ln()
            }
            Node::Sin(a) => a.eval_raw(pt, params)?.sin(),
            Node::Cos(a) => a.eval_raw(pt, params)?.cos(),
            Node::Atan2(n, d) => {
                let (nv, dv) = (n.eval_raw(pt, params)?, d.eval_raw(pt, params)?);
                if nv == 0.0 && dv == 0.0 {
                    return Err(domain("atan2(0, 0)"));
                }
                nv.atan2(dv)
            }
            Node::Func(f, k, a) => f.value(*k, a.eval_raw(pt, params)?)?,
            Node::Field(f) => f.value(pt.x, pt.y)?,
        };
        if v.is_nan() {
            return Err(domain(format!("NaN while evaluating {self}")));
        }
        Ok(v)
    }

    pub fn diff(&self, v: Var) -> Expr {
        match self.node() {
            Node::Num(..) | Node::Float(_) | Node::Param(_) => Expr::zero(),
            Node::Var(w) => {
                if *w == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Sum(terms) => Expr::sum(terms.iter().map(|t| t.diff(v)).collect()),
            Node::Product(fs) => {
                let mut terms = Vec::new();
                for i in 0..fs.len() {
                    let d = fs[i].diff(v);
                    if d.is_zero() {
                        continue;
                    }
                    let mut parts: Vec<Expr> = fs.clone();
                    parts[i] = d;
                    terms.push(Expr::product(parts));
                }
                Expr::sum(terms)
            }
            Node::Pow(b, p) => {
                let db = b.diff(v);
                if db.is_zero() {
                    return Expr::zero();
                }
                let coeff = Expr::frac(*p.numer(), *p.denom());
                Expr::product(vec![coeff, Expr::pow(b.clone(), *p - Exponent::one()), db])
            }
            Node::Exp(a) => Expr::product(vec![self.clone(), a.diff(v)]),
            Node::Log(a) => Expr::product(vec![a.diff(v), a.recip()]),
            Node::Sin(a) => Expr::product(vec![a.cos(), a.diff(v)]),
            Node::Cos(a) => -Expr::product(vec![a.sin(), a.diff(v)]),
            Node::Atan2(n, d) => {
                let num = d.clone() * n.diff(v) - n.clone() * d.diff(v);
                if num.is_zero() {
                    return Expr::zero();
                }
                num * (n.powi(2) + d.powi(2)).recip()
            }
            Node::Func(f, k, a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::zero();
                }
                Expr::func(f.clone(), k + 1, a.clone()) * da
            }
            Node::Field(f) => match v {
                Var::X => f.gradient()[0].clone(),
                Var::Y => f.gradient()[1].clone(),
                _ => Expr::zero(),
            },
        }
    }

    /// Whether `v` occurs anywhere in the tree. Fields count as depending on x and y.
    pub fn depends_on(&self, v: Var) -> bool {
        match self.node() {
            Node::Num(..) | Node::Float(_) | Node::Param(_) => false,
            Node::Var(w) => *w == v,
            Node::Sum(xs) | Node::Product(xs) => xs.iter().any(|e| e.depends_on(v)),
            Node::Pow(b, _) => b.depends_on(v),
            Node::Exp(a) | Node::Log(a) | Node::Sin(a) | Node::Cos(a) | Node::Func(_, _, a) => {
                a.depends_on(v)
            }
            Node::Atan2(n, d) => n.depends_on(v) || d.depends_on(v),
            Node::Field(_) => matches!(v, Var::X | Var::Y),
        }
    }

    /// Names of all parameters referenced.
    pub fn params(&self) -> Vec<String> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_params(&mut out);
        out.into_iter().collect()
    }

    fn collect_params(&self, out: &mut std::collections::BTreeSet<String>) {
        match self.node() {
            Node::Param(p) => {
                out.insert(p.to_string());
            }
            Node::Sum(xs) | Node::Product(xs) => xs.iter().for_each(|e| e.collect_params(out)),
            Node::Pow(b, _) => b.collect_params(out),
            Node::Exp(a) | Node::Log(a) | Node::Sin(a) | Node::Cos(a) | Node::Func(_, _, a) => {
                a.collect_params(out)
            }
            Node::Atan2(n, d) => {
                n.collect_params(out);
                d.collect_params(out);
            }
            _ => {}
        }
    }

    /// Rebuild the tree bottom-up, replacing leaves via `leaf`.
    fn map_leaves(&self, leaf: &dyn Fn(&Node) -> Option<Expr>) -> Expr {
        if let Some(e) = leaf(self.node()) {
            return e;
        }
        match self.node() {
            Node::Sum(xs) => Expr::sum(xs.iter().map(|e| e.map_leaves(leaf)).collect()),
            Node::Product(xs) => Expr::product(xs.iter().map(|e| e.map_leaves(leaf)).collect()),
            Node::Pow(b, p) => Expr::pow(b.map_leaves(leaf), *p),
            Node::Exp(a) => a.map_leaves(leaf).exp(),
            Node::Log(a) => a.map_leaves(leaf).ln(),
            Node::Sin(a) => a.map_leaves(leaf).sin(),
            Node::Cos(a) => a.map_leaves(leaf).cos(),
            Node::Atan2(n, d) => Expr::atan2(n.map_leaves(leaf), d.map_leaves(leaf)),
            Node::Func(f, k, a) => Expr::func(f.clone(), *k, a.map_leaves(leaf)),
            _ => self.clone(),
        }
    }

    /// Replace bound parameters by float constants (exact when integral).
    pub fn bind(&self, params: &Params) -> Expr {
        self.map_leaves(&|n| match n {
            Node::Param(p) => params.get(&**p).map(|v| exact_or_float(*v)),
            _ => None,
        })
    }

    pub fn subst_param(&self, name: &str, with: &Expr) -> Expr {
        self.map_leaves(&|n| match n {
            Node::Param(p) if &**p == name => Some(with.clone()),
            _ => None,
        })
    }

    /// Simultaneous substitution of variables. Numeric fields are left untouched.
    pub fn subst_vars(&self, subs: &[(Var, Expr)]) -> Expr {
        self.map_leaves(&|n| match n {
            Node::Var(v) => subs.iter().find(|(w, _)| w == v).map(|(_, e)| e.clone()),
            _ => None,
        })
    }

    pub fn subst_var(&self, v: Var, with: &Expr) -> Expr {
        self.subst_vars(&[(v, with.clone())])
    }
}

/// Floats that are short decimals (e.g. 0.25, -1.5) become exact rationals.
fn exact_or_float(v: f64) -> Expr {
    for q in [1i64, 2, 3, 4, 5, 6, 8, 9, 10, 12, 16, 100, 1000] {
        let p = v * q as f64;
        if p.fract() == 0.0 && p.abs() < 1e12 && (p / q as f64) == v {
            return Expr::frac(p as i64, q);
        }
    }
    Expr::float(v)
}

fn eval_pow(base: f64, p: Exponent) -> Result<f64, ExprError> {
    if p.is_integer() {
        let n = *p.numer();
        if base == 0.0 && n < 0 {
            return Err(domain("zero raised to a negative power"));
        }
        return Ok(match i32::try_from(n) {
            Ok(n) => base.powi(n),
            Err(_) => base.powf(n as f64),
        });
    }
    if base < 0.0 || (base == 0.0 && p.is_negative()) {
        return Err(domain(format!("({base})^({p}) needs a positive base")));
    }
    if base == 0.0 {
        return Ok(0.0);
    }
    let (n, d) = (*p.numer(), *p.denom());
    Ok(if d == 2 {
        let s = base.sqrt();
        match i32::try_from(n) {
            Ok(n) if n.abs() <= 16 => {
                let whole = base.powi((n - n.signum()) / 2);
                if n > 0 {
                    whole * s
                } else {
                    whole / s
                }
            }
            _ => base.powf(n as f64 / d as f64),
        }
    } else if d == 3 && n.abs() <= 16 {
        let c = base.cbrt();
        c.powi(n as i32)
    } else {
        (p.to_f64().unwrap() * base.ln()).exp()
    })
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::float(v)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs.clone())
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs.clone())
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs)
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, Expr::float(rhs))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(Expr::float(self), rhs)
            }
        }
        impl $tr<&Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(Expr::float(self), rhs.clone())
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum(vec![a, b]));
binop!(Sub, sub, |a, b| Expr::sum(vec![a, -b]));
binop!(Mul, mul, |a, b| Expr::product(vec![a, b]));
binop!(Div, div, |a, b| Expr::product(vec![a, b.recip()]));

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::product(vec![Expr::int(-1), self])
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Num(r, _) => {
                if r.is_integer() && !r.is_negative() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "({r})")
                }
            }
            Node::Float(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Node::Param(p) => write!(f, "{p}"),
            Node::Var(v) => write!(f, "{}", v.name()),
            Node::Sum(xs) => {
                write!(f, "(")?;
                for (i, e) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            Node::Product(xs) => {
                write!(f, "(")?;
                for (i, e) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            Node::Pow(b, p) => {
                if p.is_integer() && !p.is_negative() {
                    write!(f, "{b}^{p}")
                } else {
                    write!(f, "{b}^({p})")
                }
            }
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::Atan2(n, d) => write!(f, "atan2({n}, {d})"),
            Node::Func(g, k, a) => write!(f, "{}{}({a})", g.name(), "'".repeat(*k)),
            Node::Field(g) => write!(f, "{}(x, y)", g.name()),
        }
    }
}
