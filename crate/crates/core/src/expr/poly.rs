//! Exact polynomial view of expressions in `x, y`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use super::{Expr, Node, Var};

/// Exponents of `x^i y^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial2 {
    pub i: u32,
    pub j: u32,
}

pub type Poly = BTreeMap<Monomial2, BigRational>;

/// Branch signal: the expression is not a polynomial in `x, y` with rational coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("expression is not a polynomial in x, y")]
pub struct NotPolynomial;

fn constant(r: BigRational) -> Poly {
    let mut p = Poly::new();
    if !r.is_zero() {
        p.insert(Monomial2 { i: 0, j: 0 }, r);
    }
    p
}

fn add_into(acc: &mut Poly, other: &Poly) {
    for (m, c) in other {
        let e = acc.entry(*m).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            acc.remove(m);
        }
    }
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m = Monomial2 { i: ma.i + mb.i, j: ma.j + mb.j };
            let e = out.entry(m).or_insert_with(BigRational::zero);
            *e += ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

/// Expand `expr` into an exact coefficient map, or signal that it is not polynomial.
pub fn as_polynomial(expr: &Expr) -> Result<Poly, NotPolynomial> {
    match expr.node() {
        Node::Num(r, _) => Ok(constant(r.clone())),
        Node::Float(f) => BigRational::from_float(*f).map(constant).ok_or(NotPolynomial),
        Node::Var(Var::X) => Ok(Poly::from([(Monomial2 { i: 1, j: 0 }, BigRational::one())])),
        Node::Var(Var::Y) => Ok(Poly::from([(Monomial2 { i: 0, j: 1 }, BigRational::one())])),
        Node::Sum(terms) => {
            let mut acc = Poly::new();
            for t in terms {
                add_into(&mut acc, &as_polynomial(t)?);
            }
            Ok(acc)
        }
        Node::Product(fs) => {
            let mut acc = constant(BigRational::one());
            for f in fs {
                acc = mul(&acc, &as_polynomial(f)?);
            }
            Ok(acc)
        }
        Node::Pow(b, p) if p.is_integer() && *p.numer() >= 0 => {
            let base = as_polynomial(b)?;
            let mut acc = constant(BigRational::one());
            for _ in 0..*p.numer() {
                acc = mul(&acc, &base);
            }
            Ok(acc)
        }
        Node::Pow(b, p) if p.is_integer() => {
            // A negative power of a nonzero constant is still a constant.
            let base = as_polynomial(b)?;
            match base.len() {
                1 if base.contains_key(&Monomial2 { i: 0, j: 0 }) => {
                    let c = &base[&Monomial2 { i: 0, j: 0 }];
                    let mut acc = BigRational::one();
                    for _ in 0..p.numer().unsigned_abs() {
                        acc /= c;
                    }
                    Ok(constant(acc))
                }
                _ => Err(NotPolynomial),
            }
        }
        _ => Err(NotPolynomial),
    }
}

/// Re-synthesize an expression from a coefficient map.
pub fn from_polynomial(p: &Poly) -> Expr {
    let terms = p
        .iter()
        .map(|(m, c)| {
            Expr::product(vec![
                Expr::rational(c.clone()),
                Expr::x().powi(m.i as i64),
                Expr::y().powi(m.j as i64),
            ])
        })
        .collect();
    Expr::sum(terms)
}

/// Convenience for building coefficient maps in tests and oracles.
pub fn monomial(i: u32, j: u32, num: i64, den: i64) -> (Monomial2, BigRational) {
    (Monomial2 { i, j }, BigRational::new(BigInt::from(num), BigInt::from(den)))
}
