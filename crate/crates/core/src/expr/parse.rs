//! Recursive-descent parser for the expression mini-grammar.
//!
//! Beyond the core grammar it accepts unary minus, decimal literals (kept as
//! exact rationals), signed or parenthesized rational exponents, the constant
//! `pi`, `tan`, and caller-supplied macro definitions.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Exponent, Expr, ExprError, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Op(char),
}

fn err(pos: usize, msg: impl Into<String>) -> ExprError {
    ExprError::Parse { pos, msg: msg.into() }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let text = &src[start..i];
            out.push((start, Tok::Num(decimal(text).ok_or_else(|| err(start, "bad number"))?)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(err(i, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

fn decimal(text: &str) -> Option<BigRational> {
    let (int, frac) = match text.split_once('.') {
        Some((a, b)) => (a, b),
        None => (text, ""),
    };
    if frac.contains('.') || (int.is_empty() && frac.is_empty()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let n: BigInt = digits.parse().ok()?;
    let d = BigInt::from(10u32).pow(frac.len() as u32);
    Some(BigRational::new(n, d))
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    i: usize,
    end: usize,
    defs: &'a BTreeMap<String, Expr>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(err(self.pos(), format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(-self.term()?);
            } else {
                return Ok(Expr::sum(terms));
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut factors = vec![self.factor()?];
        loop {
            if self.eat('*') {
                factors.push(self.factor()?);
            } else if self.eat('/') {
                factors.push(self.factor()?.recip());
            } else {
                return Ok(Expr::product(factors));
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            return Ok(-self.factor()?);
        }
        if self.eat('+') {
            return self.factor();
        }
        let base = self.base()?;
        if self.eat('^') {
            let p = self.exponent()?;
            return Ok(Expr::pow(base, p));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Exponent, ExprError> {
        let paren = self.eat('(');
        let neg = if self.eat('-') {
            true
        } else {
            self.eat('+');
            false
        };
        let pos = self.pos();
        let num = match self.peek() {
            Some(Tok::Num(r)) => r.clone(),
            _ => return Err(err(pos, "exponent must be a rational number")),
        };
        self.i += 1;
        let mut r = num;
        // `x^2/3` is a rational exponent per the grammar; `x^2/y` falls back to division.
        if self.peek() == Some(&Tok::Op('/')) {
            if let Some((_, Tok::Num(d))) = self.toks.get(self.i + 1) {
                if num_traits::Zero::is_zero(d) {
                    return Err(err(self.pos(), "zero exponent denominator"));
                }
                r /= d.clone();
                self.i += 2;
            }
        }
        if neg {
            r = -r;
        }
        if paren {
            self.expect(')')?;
        }
        let to_i64 = |b: &BigInt| i64::try_from(b).map_err(|_| err(pos, "exponent too large"));
        Ok(Exponent::new(to_i64(r.numer())?, to_i64(r.denom())?))
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(r)) => {
                self.i += 1;
                Ok(Expr::rational(r))
            }
            Some(Tok::Op('(')) => {
                self.i += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.i += 1;
                if self.peek() == Some(&Tok::Op('(')) && is_func(&name) {
                    self.i += 1;
                    let a = self.expr()?;
                    let b = if self.eat(',') { Some(self.expr()?) } else { None };
                    self.expect(')')?;
                    return apply(&name, a, b).ok_or_else(|| err(pos, format!("bad call to `{name}`")));
                }
                if let Some(e) = self.defs.get(&name) {
                    return Ok(e.clone());
                }
                Ok(match name.as_str() {
                    "x" => Expr::var(Var::X),
                    "y" => Expr::var(Var::Y),
                    "t" => Expr::var(Var::T),
                    "vx" => Expr::var(Var::Vx),
                    "vy" => Expr::var(Var::Vy),
                    "pi" => Expr::float(std::f64::consts::PI),
                    _ => Expr::param(&name),
                })
            }
            _ => Err(err(pos, "expected a number, identifier, or `(`")),
        }
    }
}

fn is_func(name: &str) -> bool {
    matches!(name, "sqrt" | "exp" | "log" | "ln" | "sin" | "cos" | "tan" | "atan2")
}

fn apply(name: &str, a: Expr, b: Option<Expr>) -> Option<Expr> {
    Some(match (name, b) {
        ("sqrt", None) => a.sqrt(),
        ("exp", None) => a.exp(),
        ("log" | "ln", None) => a.ln(),
        ("sin", None) => a.sin(),
        ("cos", None) => a.cos(),
        ("tan", None) => a.sin() * a.cos().recip(),
        ("atan2", Some(b)) => Expr::atan2(a, b),
        _ => return None,
    })
}

pub fn parse(src: &str) -> Result<Expr, ExprError> {
    parse_with_defs(src, &BTreeMap::new())
}

/// Parse with identifier macros: any identifier found in `defs` is replaced by its expression.
pub fn parse_with_defs(src: &str, defs: &BTreeMap<String, Expr>) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(err(0, "empty expression"));
    }
    let mut p = Parser { toks, i: 0, end: src.len(), defs };
    let e = p.expr()?;
    if p.i != p.toks.len() {
        return Err(err(p.pos(), "trailing input"));
    }
    Ok(e)
}
