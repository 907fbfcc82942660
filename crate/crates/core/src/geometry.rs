//! Killing vectors and Killing tensors of the Euclidean plane.
//!
//! Symmetric tensors are stored by independent components with ascending
//! index order: `(T11, T12, T22)` and `(T111, T112, T122, T222)`.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::expr::{as_polynomial, Expr, Monomial2, Var};
use crate::linalg::rank_exact;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KVParams {
    pub b: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KT2Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `a[0]` is a1, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KT3Params {
    pub a: [f64; 10],
}

/// `b[0]` is b1, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymGenParams {
    pub b: [f64; 15],
}

impl KT2Params {
    pub const LEN: usize = 6;

    pub fn to_vec(&self) -> [f64; 6] {
        [self.alpha, self.beta, self.gamma, self.a, self.b, self.c]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        KT2Params { alpha: v[0], beta: v[1], gamma: v[2], a: v[3], b: v[4], c: v[5] }
    }

    pub fn scaled(&self, k: f64) -> Self {
        let v = self.to_vec().map(|x| x * k);
        KT2Params::from_slice(&v)
    }
}

impl KT3Params {
    /// Set a single parameter, 1-based as in the tables.
    pub fn with(mut self, k: usize, v: f64) -> Self {
        self.a[k - 1] = v;
        self
    }

    pub fn unit(k: usize) -> Self {
        KT3Params::default().with(k, 1.0)
    }
}

impl SymGenParams {
    pub fn with(mut self, k: usize, v: f64) -> Self {
        self.b[k - 1] = v;
        self
    }

    pub fn unit(k: usize) -> Self {
        SymGenParams::default().with(k, 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct SymTensorField2 {
    pub t11: Expr,
    pub t12: Expr,
    pub t22: Expr,
}

#[derive(Debug, Clone)]
pub struct SymTensorField3 {
    pub t111: Expr,
    pub t112: Expr,
    pub t122: Expr,
    pub t222: Expr,
}

impl SymTensorField2 {
    pub fn zero() -> Self {
        SymTensorField2 { t11: Expr::zero(), t12: Expr::zero(), t22: Expr::zero() }
    }

    pub fn components(&self) -> [&Expr; 3] {
        [&self.t11, &self.t12, &self.t22]
    }

    /// `T_ab u^a u^b`.
    pub fn quad(&self, u: [f64; 2], at: (f64, f64)) -> Result<f64, crate::expr::ExprError> {
        let (x, y) = at;
        let [a, b, c] = self.components().map(|e| e.eval_xy(x, y));
        Ok(a? * u[0] * u[0] + 2.0 * b? * u[0] * u[1] + c? * u[1] * u[1])
    }

    /// Entry `T_ij` with 0-based indices.
    pub fn get(&self, i: usize, j: usize) -> &Expr {
        match i + j {
            0 => &self.t11,
            1 => &self.t12,
            _ => &self.t22,
        }
    }
}

impl SymTensorField3 {
    pub fn zero() -> Self {
        SymTensorField3 {
            t111: Expr::zero(),
            t112: Expr::zero(),
            t122: Expr::zero(),
            t222: Expr::zero(),
        }
    }

    pub fn components(&self) -> [&Expr; 4] {
        [&self.t111, &self.t112, &self.t122, &self.t222]
    }

    /// Entry `T_ijk` with 0-based indices; only the number of 2s matters.
    pub fn get(&self, i: usize, j: usize, k: usize) -> &Expr {
        match i + j + k {
            0 => &self.t111,
            1 => &self.t112,
            2 => &self.t122,
            _ => &self.t222,
        }
    }
}

fn c(v: f64) -> Expr {
    Expr::float(v)
}

fn lin(terms: Vec<(f64, Expr)>) -> Expr {
    Expr::sum(terms.into_iter().map(|(k, e)| c(k) * e).collect())
}

fn mono(i: i64, j: i64) -> Expr {
    Expr::x().powi(i) * Expr::y().powi(j)
}

pub fn kv_field(p: &KVParams) -> [Expr; 2] {
    let [b1, b2, b3] = p.b;
    [lin(vec![(b1, mono(0, 0)), (b3, mono(0, 1))]), lin(vec![(b2, mono(0, 0)), (-b3, mono(1, 0))])]
}

pub fn kt2(p: &KT2Params) -> SymTensorField2 {
    let KT2Params { alpha, beta, gamma, a, b, c: cc } = *p;
    SymTensorField2 {
        t11: lin(vec![(gamma, mono(0, 2)), (2.0 * alpha, mono(0, 1)), (a, mono(0, 0))]),
        t12: lin(vec![
            (-gamma, mono(1, 1)),
            (-alpha, mono(1, 0)),
            (-beta, mono(0, 1)),
            (cc, mono(0, 0)),
        ]),
        t22: lin(vec![(gamma, mono(2, 0)), (2.0 * beta, mono(1, 0)), (b, mono(0, 0))]),
    }
}

pub fn kt3(p: &KT3Params) -> SymTensorField3 {
    let [a1, a2, a3, a4, a5, a6, a7, a8, a9, a10] = p.a;
    SymTensorField3 {
        t111: lin(vec![(a1, mono(0, 3)), (3.0 * a2, mono(0, 2)), (3.0 * a3, mono(0, 1)), (a4, mono(0, 0))]),
        t112: lin(vec![
            (-a1, mono(1, 2)),
            (-2.0 * a2, mono(1, 1)),
            (a5, mono(0, 2)),
            (-a3, mono(1, 0)),
            (a8, mono(0, 1)),
            (a9, mono(0, 0)),
        ]),
        t122: lin(vec![
            (a1, mono(2, 1)),
            (a2, mono(2, 0)),
            (-2.0 * a5, mono(1, 1)),
            (-a8, mono(1, 0)),
            (-a6, mono(0, 1)),
            (a10, mono(0, 0)),
        ]),
        t222: lin(vec![(-a1, mono(3, 0)), (3.0 * a5, mono(2, 0)), (3.0 * a6, mono(1, 0)), (a7, mono(0, 0))]),
    }
}

pub fn sym_generator(p: &SymGenParams) -> SymTensorField2 {
    let b = |k: usize| p.b[k - 1];
    SymTensorField2 {
        t11: lin(vec![
            (3.0 * b(2), mono(1, 2)),
            (3.0 * b(5), mono(0, 3)),
            (3.0 * b(3), mono(1, 1)),
            (3.0 * (b(10) + b(8)), mono(0, 2)),
            (b(4), mono(1, 0)),
            (3.0 * b(15), mono(0, 1)),
            (b(12), mono(0, 0)),
        ]),
        t12: lin(vec![
            (-3.0 * b(2), mono(2, 1)),
            (-3.0 * b(5), mono(1, 2)),
            (-1.5 * b(3), mono(2, 0)),
            (-1.5 * (2.0 * b(10) + b(8)), mono(1, 1)),
            (-1.5 * b(6), mono(0, 2)),
            (1.5 * (b(9) - b(15)), mono(1, 0)),
            (-1.5 * b(11), mono(0, 1)),
            (b(13), mono(0, 0)),
        ]),
        t22: lin(vec![
            (3.0 * b(2), mono(3, 0)),
            (3.0 * b(5), mono(2, 1)),
            (3.0 * b(10), mono(2, 0)),
            (3.0 * b(6), mono(1, 1)),
            (3.0 * (b(1) + b(11)), mono(1, 0)),
            (b(7), mono(0, 1)),
            (b(14), mono(0, 0)),
        ]),
    }
}

/// Full symmetrization of `d_c T_ab`.
pub fn sym_derivative(t: &SymTensorField2) -> SymTensorField3 {
    let d = |e: &Expr, v| e.diff(v);
    let third = Expr::frac(1, 3);
    SymTensorField3 {
        t111: d(&t.t11, Var::X),
        t112: &third * (Expr::int(2) * d(&t.t12, Var::X) + d(&t.t11, Var::Y)),
        t122: &third * (Expr::int(2) * d(&t.t12, Var::Y) + d(&t.t22, Var::X)),
        t222: d(&t.t22, Var::Y),
    }
}

/// The third-order KT parameters whose `kt3` equals `sym_derivative(sym_generator(p))`.
pub fn generated_kt3(p: &SymGenParams) -> KT3Params {
    let b = &p.b;
    KT3Params { a: [0.0, b[1], b[2], b[3], b[4], b[5], b[6], b[7], b[8], b[0]] }
}

/// The second-order KT produced by the pure KT generators b10..b15.
pub fn generated_kt2(p: &SymGenParams) -> KT2Params {
    let b = |k: usize| p.b[k - 1];
    KT2Params {
        alpha: 1.5 * b(15),
        beta: 1.5 * b(11),
        gamma: 3.0 * b(10),
        a: b(12),
        b: b(14),
        c: b(13),
    }
}

#[derive(Debug, Clone)]
pub enum TensorField {
    Order1([Expr; 2]),
    Order2(SymTensorField2),
    Order3(SymTensorField3),
}

/// Independent components of the full symmetrization of `d_k T_{i1..im}`.
pub fn killing_components(t: &TensorField) -> Vec<Expr> {
    let (dx, dy) = (|e: &Expr| e.diff(Var::X), |e: &Expr| e.diff(Var::Y));
    let q = Expr::frac;
    match t {
        TensorField::Order1([a, b]) => vec![dx(a), q(1, 2) * (dy(a) + dx(b)), dy(b)],
        TensorField::Order2(t) => sym_derivative(t).components().into_iter().cloned().collect(),
        TensorField::Order3(t) => vec![
            dx(&t.t111),
            q(1, 4) * (Expr::int(3) * dx(&t.t112) + dy(&t.t111)),
            q(1, 2) * (dx(&t.t122) + dy(&t.t112)),
            q(1, 4) * (dx(&t.t222) + Expr::int(3) * dy(&t.t122)),
            dy(&t.t222),
        ],
    }
}

/// Max absolute symmetrized derivative over the sample points.
pub fn killing_residual(t: &TensorField, points: &[(f64, f64)]) -> f64 {
    let comps = killing_components(t);
    let mut worst = 0.0f64;
    for &(x, y) in points {
        for c in &comps {
            let v = c.eval_xy(x, y).unwrap_or(f64::INFINITY);
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Stacked exact polynomial coefficients of the given component expressions.
fn coefficient_column(comps: &[Expr], monos: &mut Vec<(usize, Monomial2)>) -> Vec<(usize, BigRational, Monomial2)> {
    let mut out = Vec::new();
    for (k, e) in comps.iter().enumerate() {
        let p = as_polynomial(e).expect("generators are polynomial");
        for (m, c) in p {
            if !monos.contains(&(k, m)) {
                monos.push((k, m));
            }
            out.push((k, c, m));
        }
    }
    out
}

/// Exact rank of a linear map given by its images of the unit parameter vectors.
pub fn exact_rank_of_images(images: &[Vec<Expr>]) -> usize {
    let mut monos = Vec::new();
    let cols: Vec<_> = images.iter().map(|c| coefficient_column(c, &mut monos)).collect();
    let zero = || BigRational::from_integer(0.into());
    let mut rows = vec![vec![zero(); cols.len()]; monos.len()];
    for (j, col) in cols.iter().enumerate() {
        for (k, c, m) in col {
            let i = monos.iter().position(|e| *e == (*k, *m)).unwrap();
            rows[i][j] = c.clone();
        }
    }
    rank_exact(&rows, cols.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("Killing tensor dimension is only tabulated for orders 2 and 3, got {0}")]
pub struct UnsupportedOrder(pub usize);

pub fn kt_space_dimension(order: usize) -> Result<usize, UnsupportedOrder> {
    let images: Vec<Vec<Expr>> = match order {
        2 => (0..KT2Params::LEN)
            .map(|k| {
                let mut v = [0.0; 6];
                v[k] = 1.0;
                kt2(&KT2Params::from_slice(&v)).components().into_iter().cloned().collect()
            })
            .collect(),
        3 => (1..=10)
            .map(|k| kt3(&KT3Params::unit(k)).components().into_iter().cloned().collect())
            .collect(),
        m => return Err(UnsupportedOrder(m)),
    };
    Ok(exact_rank_of_images(&images))
}

/// Rank of SymGenParams -> components of sym_derivative(sym_generator(.)).
pub fn reducible_generator_rank() -> usize {
    let images: Vec<Vec<Expr>> = (1..=15)
        .map(|k| {
            let t = sym_derivative(&sym_generator(&SymGenParams::unit(k)));
            t.components().into_iter().cloned().collect()
        })
        .collect();
    exact_rank_of_images(&images)
}
