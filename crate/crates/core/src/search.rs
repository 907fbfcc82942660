//! Nullspace search for cubic first integrals over a finite ansatz.
//!
//! Every unknown (KT parameter, dictionary coefficient of B or G, the scalar s) enters
//! the condition residuals linearly, so column `j` of the system is simply the residual
//! vector of the candidate whose only nonzero unknown is `u_j = 1`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{fi_expr, fi_total_derivative, residual_exprs, CandidateCFI, ConditionError, Family, Potential};
use crate::expr::{as_polynomial, Expr, ExprError, Monomial2};
use crate::geometry::{kt3, KT2Params, KT3Params, SymGenParams};
use crate::linalg::{nullspace_exact, svd_full};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("exact mode needs polynomial potential and dictionary ({0})")]
    NotPolynomial(String),
    #[error("{have} collocation points for {unknowns} unknowns; need at least {need}")]
    InsufficientSamples { have: usize, need: usize, unknowns: usize },
    #[error("no clean singular-value gap: largest zero {zero:e}, smallest nonzero {nonzero:e}")]
    IllConditioned { zero: f64, nonzero: f64 },
    #[error("kernel vector {index} fails the drift oracle: max |dJ/dt| = {drift:e}")]
    VerificationFailed { index: usize, drift: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Collocation,
}

#[derive(Debug, Clone)]
pub struct AnsatzConfig {
    pub family: Family,
    /// Degree cap for the monomials multiplying each dictionary entry.
    pub degree: u32,
    pub dictionary: Vec<Expr>,
    pub samples: usize,
    pub seed: u64,
    pub tau: f64,
    pub mode: Mode,
    /// Fixed exponent for the EXP family.
    pub lambda: Option<f64>,
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        AnsatzConfig {
            family: Family::Aut,
            degree: 4,
            dictionary: vec![Expr::one()],
            samples: 400,
            seed: 0,
            tau: 1e-9,
            mode: Mode::Collocation,
            lambda: None,
        }
    }
}

/// `{1, V, V_x, V_y}` for the given potential.
pub fn potential_dictionary(pot: &Potential) -> Vec<Expr> {
    vec![Expr::one(), pot.v.clone(), pot.grad[0].clone(), pot.grad[1].clone()]
}

/// Pointwise drift bound used to certify kernel vectors.
pub const DRIFT_BOUND: f64 = 1e-8;
/// Number of fresh states for the drift oracle.
pub const DRIFT_STATES: usize = 100;

/// Column layout of the unknown vector.
#[derive(Debug, Clone)]
pub struct Layout {
    pub family: Family,
    pub lambda: Option<f64>,
    /// Linearly independent dictionary-times-monomial functions for B (and G).
    pub basis: Vec<Expr>,
    pub basis_labels: Vec<String>,
}

impl Layout {
    fn n_kt(&self) -> usize {
        if self.family == Family::Aut {
            10
        } else {
            15
        }
    }

    fn n_kt2(&self) -> usize {
        if self.family == Family::LinT {
            6
        } else {
            0
        }
    }

    fn has_g(&self) -> bool {
        self.family == Family::LinT
    }

    fn has_s(&self) -> bool {
        self.family == Family::Aut
    }

    pub fn unknowns(&self) -> usize {
        let m = self.basis.len();
        self.n_kt() + self.n_kt2() + 2 * m + if self.has_g() { m } else { 0 } + usize::from(self.has_s())
    }

    /// Range of the cubic-part parameters within the unknown vector.
    pub fn cubic_range(&self) -> std::ops::Range<usize> {
        0..self.n_kt()
    }

    fn combo(&self, u: &[f64]) -> Expr {
        Expr::sum(
            self.basis
                .iter()
                .zip(u)
                .filter(|(_, c)| **c != 0.0)
                .map(|(b, c)| b.scale(*c))
                .collect(),
        )
    }

    /// The candidate with unknown vector `u`.
    pub fn decode(&self, u: &[f64]) -> CandidateCFI {
        let m = self.basis.len();
        let mut off = 0;
        let mut take = |n: usize| {
            let s = &u[off..off + n];
            off += n;
            s
        };
        let kt = take(self.n_kt()).to_vec();
        let kt2 = take(self.n_kt2()).to_vec();
        let b = [self.combo(take(m)), self.combo(take(m))];
        let g = if self.has_g() { Some(self.combo(take(m))) } else { None };
        let s = if self.has_s() { take(1)[0] } else { 0.0 };
        match self.family {
            Family::Aut => CandidateCFI::aut(KT3Params { a: kt.try_into().unwrap() }, b, s),
            Family::LinT => CandidateCFI::lin_t(
                SymGenParams { b: kt.try_into().unwrap() },
                KT2Params::from_slice(&kt2),
                b,
                g.unwrap(),
            ),
            Family::Exp => CandidateCFI::exp(SymGenParams { b: kt.try_into().unwrap() }, self.lambda.unwrap(), b),
        }
    }

    /// Least-squares coordinates of a reference candidate in this layout, fitted on the
    /// given points. Returns the vector and the relative fit residual of its B/G parts.
    pub fn encode(&self, c: &CandidateCFI, points: &[(f64, f64)]) -> Result<(Vec<f64>, f64), SearchError> {
        let mut u = Vec::with_capacity(self.unknowns());
        match self.family {
            Family::Aut => u.extend(c.kt3.a),
            _ => u.extend(c.gen.as_ref().ok_or_else(|| SearchError::Config("reference lacks gen".into()))?.b),
        }
        if self.n_kt2() > 0 {
            u.extend(c.kt2.map(|k| k.to_vec()).unwrap_or_default());
        }
        let a = DMatrix::from_fn(points.len(), self.basis.len(), |i, k| {
            self.basis[k].eval_xy(points[i].0, points[i].1).unwrap_or(f64::NAN)
        });
        let mut worst = 0.0f64;
        let mut targets = vec![&c.b[0], &c.b[1]];
        if self.has_g() {
            targets.push(c.g.as_ref().ok_or_else(|| SearchError::Config("reference lacks G".into()))?);
        }
        for t in targets {
            let rhs = DVector::from_iterator(points.len(), points.iter().map(|&(x, y)| t.eval_xy(x, y).unwrap_or(f64::NAN)));
            let svd = a.clone().svd(true, true);
            let sol = svd.solve(&rhs, 1e-12).map_err(|e| SearchError::Config(e.to_string()))?;
            let res = (&a * &sol - &rhs).norm() / rhs.norm().max(1.0);
            worst = worst.max(res);
            u.extend(sol.iter());
        }
        if self.has_s() {
            u.push(c.s.unwrap_or(0.0));
        }
        Ok((u, worst))
    }
}

fn monomials(d: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for total in 0..=d {
        for i in (0..=total).rev() {
            out.push((i, total - i));
        }
    }
    out
}

fn mono(i: u32, j: u32) -> Expr {
    Expr::x().powi(i as i64) * Expr::y().powi(j as i64)
}

/// Dictionary times monomials, dropping functions dependent on earlier ones.
fn build_layout(cfg: &AnsatzConfig, pts: &[(f64, f64)]) -> Result<Layout, SearchError> {
    let mut cands = Vec::new();
    for (k, d) in cfg.dictionary.iter().enumerate() {
        for (i, j) in monomials(cfg.degree) {
            let f = if d.is_one() { mono(i, j) } else { d * mono(i, j) };
            cands.push((f, format!("d{k}*x^{i}*y^{j}")));
        }
    }
    let mut basis: Vec<Expr> = Vec::new();
    let mut labels = Vec::new();
    match cfg.mode {
        Mode::Exact => {
            let mut rows: Vec<Vec<BigRational>> = Vec::new();
            let mut index: BTreeMap<Monomial2, usize> = BTreeMap::new();
            let polys = cands
                .iter()
                .map(|(f, _)| as_polynomial(f).map_err(|_| SearchError::NotPolynomial(f.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            for p in &polys {
                for m in p.keys() {
                    let n = index.len();
                    index.entry(*m).or_insert(n);
                }
            }
            let ncols = index.len();
            for ((f, l), p) in cands.into_iter().zip(polys) {
                let mut v = vec![BigRational::zero(); ncols];
                for (m, c) in p {
                    v[index[&m]] = c;
                }
                rows.push(v);
                if crate::linalg::rank_exact(&rows, ncols) == rows.len() {
                    basis.push(f);
                    labels.push(l);
                } else {
                    rows.pop();
                }
            }
        }
        Mode::Collocation => {
            let mut cols: Vec<DVector<f64>> = Vec::new();
            for (f, l) in cands {
                let v = DVector::from_iterator(pts.len(), pts.iter().map(|&(x, y)| f.eval_xy(x, y).unwrap_or(f64::NAN)));
                if !v.iter().all(|e| e.is_finite()) {
                    return Err(SearchError::Config(format!("dictionary function {f} not finite on the domain")));
                }
                let n = v.norm();
                if n == 0.0 {
                    continue;
                }
                let mut w = &v / n;
                // Two passes of Gram-Schmidt against the kept functions.
                for _ in 0..2 {
                    for c in &cols {
                        let p = c.dot(&w);
                        w -= c * p;
                    }
                }
                if w.norm() > 1e-8 {
                    let wn = w.norm();
                    cols.push(w / wn);
                    basis.push(f);
                    labels.push(l);
                }
            }
        }
    }
    Ok(Layout { family: cfg.family, lambda: cfg.lambda, basis, basis_labels: labels })
}

/// The assembled linear system.
#[derive(Debug, Clone)]
pub enum System {
    Exact { rows: Vec<Vec<BigRational>>, ncols: usize },
    Collocation { matrix: DMatrix<f64> },
}

impl System {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            System::Exact { rows, ncols } => (rows.len(), *ncols),
            System::Collocation { matrix } => matrix.shape(),
        }
    }
}

fn validate(cfg: &AnsatzConfig) -> Result<(), SearchError> {
    if cfg.family == Family::Exp && !matches!(cfg.lambda, Some(l) if l != 0.0 && l.is_finite()) {
        return Err(SearchError::Config("EXP search needs a fixed nonzero lambda".into()));
    }
    if cfg.dictionary.is_empty() {
        return Err(SearchError::Config("empty dictionary".into()));
    }
    if !(cfg.tau > 0.0 && cfg.tau < 1.0) {
        return Err(SearchError::Config("tau must lie in (0, 1)".into()));
    }
    Ok(())
}

fn collocation_points(pot: &Potential, n: usize, seed: u64) -> Result<Vec<(f64, f64)>, SearchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| pot.sample_point(&mut rng).map_err(SearchError::from)).collect()
}

/// Build the layout and the linear system whose kernel holds the candidates.
pub fn assemble(pot: &Potential, cfg: &AnsatzConfig) -> Result<(Layout, System), SearchError> {
    validate(cfg)?;
    let pts = match cfg.mode {
        Mode::Collocation => collocation_points(pot, cfg.samples, cfg.seed)?,
        Mode::Exact => Vec::new(),
    };
    let layout = build_layout(cfg, &pts)?;
    let n = layout.unknowns();
    if cfg.mode == Mode::Collocation && cfg.samples < 4 * n {
        return Err(SearchError::InsufficientSamples { have: cfg.samples, need: 4 * n, unknowns: n });
    }
    let columns: Vec<Vec<Expr>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut u = vec![0.0; n];
            u[j] = 1.0;
            residual_exprs(&layout.decode(&u), pot)
        })
        .collect::<Result<_, _>>()?;
    let ncomp = columns[0].len();
    let system = match cfg.mode {
        Mode::Exact => {
            let mut index: BTreeMap<(usize, Monomial2), usize> = BTreeMap::new();
            let mut entries: Vec<Vec<(usize, BigRational)>> = Vec::with_capacity(n);
            for col in &columns {
                let mut e = Vec::new();
                for (comp, r) in col.iter().enumerate() {
                    let p = as_polynomial(r).map_err(|_| SearchError::NotPolynomial(pot.v.to_string()))?;
                    for (m, c) in p {
                        let k = index.len();
                        let row = *index.entry((comp, m)).or_insert(k);
                        e.push((row, c));
                    }
                }
                entries.push(e);
            }
            let mut rows = vec![vec![BigRational::zero(); n]; index.len()];
            for (j, e) in entries.into_iter().enumerate() {
                for (r, c) in e {
                    rows[r][j] += c;
                }
            }
            // Rows are ordered by (component, monomial) for reproducibility.
            let order: Vec<usize> = index.values().copied().collect();
            let rows = order.into_iter().map(|r| rows[r].clone()).collect();
            System::Exact { rows, ncols: n }
        }
        Mode::Collocation => {
            let blocks: Vec<Vec<Vec<f64>>> = pts
                .par_iter()
                .map(|&(x, y)| -> Result<Vec<Vec<f64>>, ExprError> {
                    let mut rows = vec![vec![0.0; n]; ncomp];
                    for (j, col) in columns.iter().enumerate() {
                        for (c, e) in col.iter().enumerate() {
                            rows[c][j] = e.eval_xy(x, y)?;
                        }
                    }
                    Ok(rows)
                })
                .collect::<Result<_, _>>()?;
            let mut flat: Vec<Vec<f64>> = blocks.into_iter().flatten().collect();
            // Row scaling leaves the kernel unchanged and evens out magnitudes.
            flat.retain(|r| r.iter().any(|v| *v != 0.0));
            for r in flat.iter_mut() {
                let m = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                r.iter_mut().for_each(|v| *v /= m);
            }
            let matrix = if flat.is_empty() {
                DMatrix::zeros(1, n)
            } else {
                DMatrix::from_fn(flat.len(), n, |i, j| flat[i][j])
            };
            System::Collocation { matrix }
        }
    };
    Ok((layout, system))
}

/// Kernel basis as orthonormal columns, plus the singular spectrum (collocation only).
pub fn nullspace(system: &System, tau: f64) -> Result<(DMatrix<f64>, Vec<f64>), SearchError> {
    match system {
        System::Exact { rows, ncols } => {
            let ker = nullspace_exact(rows, *ncols);
            let m = DMatrix::from_fn(*ncols, ker.len(), |i, j| ker[j][i].to_f64().unwrap_or(f64::NAN));
            Ok((orthonormalize(&m), Vec::new()))
        }
        System::Collocation { matrix } => {
            let (sigma, vt) = svd_full(matrix);
            let n = matrix.ncols();
            let smax = sigma.first().copied().unwrap_or(0.0);
            let cut = tau * smax;
            let nonzero: Vec<f64> = sigma.iter().copied().filter(|&s| s > cut).collect();
            let zero_max = sigma.iter().copied().filter(|&s| s <= cut).fold(f64::NEG_INFINITY, f64::max);
            if let (Some(&nz), true) = (nonzero.last(), zero_max.is_finite()) {
                if zero_max > tau.sqrt() * nz {
                    return Err(SearchError::IllConditioned { zero: zero_max, nonzero: nz });
                }
            }
            let k = n - nonzero.len();
            let basis = DMatrix::from_fn(n, k, |i, j| vt[(nonzero.len() + j, i)]);
            Ok((basis, sigma))
        }
    }
}

fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let qr = m.clone().qr();
    qr.q().columns(0, m.ncols()).into_owned()
}

/// Reduced echelon form of the rows of `m` (one candidate per row), pivots chosen
/// left to right so that representatives are reproducible.
fn echelon(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut row = 0;
    for col in 0..c {
        if row == r {
            break;
        }
        let scale = m.abs().max().max(1e-300);
        let (p, val) = (row..r).map(|i| (i, m[(i, col)])).fold((row, 0.0f64), |a, b| if b.1.abs() > a.1.abs() { b } else { a });
        if val.abs() <= 1e-8 * scale {
            continue;
        }
        m.swap_rows(row, p);
        let piv = m.row(row) / val;
        m.set_row(row, &piv);
        for i in 0..r {
            if i != row {
                let f = m[(i, col)];
                if f != 0.0 {
                    let sub = m.row(row) * f;
                    let new = m.row(i) - sub;
                    m.set_row(i, &new);
                }
            }
        }
        row += 1;
    }
    m
}

/// Largest-magnitude entry scaled to unit size, sign fixed by the first nonzero entry.
pub fn normalize(u: &mut [f64]) {
    let m = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return;
    }
    let first = u.iter().copied().find(|v| v.abs() > 1e-12 * m).unwrap_or(1.0);
    let s = first.signum() / m;
    for v in u.iter_mut() {
        *v *= s;
        if v.abs() < 1e-14 {
            *v = 0.0;
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportedCandidate {
    pub params: Vec<f64>,
    #[serde(rename = "B_coeffs")]
    pub b_coeffs: [Vec<f64>; 2],
    #[serde(rename = "G_coeffs")]
    pub g_coeffs: Vec<f64>,
    pub s: Option<f64>,
    pub lambda: Option<f64>,
    pub residual_max: f64,
    pub drift_max: f64,
    pub trivial: bool,
    /// The normalized first integral as a phase-space expression.
    pub form: String,
    #[serde(skip)]
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchReport {
    pub family: Family,
    pub mode: Mode,
    pub unknowns: usize,
    pub rows: usize,
    pub basis: Vec<String>,
    pub singular_values: Vec<f64>,
    pub kernel_dim: usize,
    pub candidates: Vec<ReportedCandidate>,
}

/// Split the kernel into trivial (zero cubic part) and nontrivial directions, reduce
/// each to a canonical representative and certify it against fresh drift samples.
pub fn extract(
    basis: &DMatrix<f64>,
    pot: &Potential,
    layout: &Layout,
    seed: u64,
) -> Result<Vec<ReportedCandidate>, SearchError> {
    let k = basis.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let cubic = basis.rows(layout.cubic_range().start, layout.cubic_range().len()).into_owned();
    let (sigma, vt) = svd_full(&cubic);
    // Right singular vectors of the cubic block: small sigma means no cubic content.
    let mut nontrivial = Vec::new();
    let mut trivial = Vec::new();
    for (i, &s) in sigma.iter().enumerate().take(k) {
        let dir = basis * vt.row(i).transpose();
        if s > 1e-8 {
            nontrivial.push(dir);
        } else {
            trivial.push(dir);
        }
    }
    for i in sigma.len().min(k)..k {
        trivial.push(basis * vt.row(i).transpose());
    }
    let mut groups = Vec::new();
    for (set, flag) in [(nontrivial, false), (trivial, true)] {
        if set.is_empty() {
            continue;
        }
        let m = DMatrix::from_fn(set.len(), layout.unknowns(), |i, j| set[i][j]);
        let e = echelon(m);
        for r in e.row_iter() {
            let mut u: Vec<f64> = r.iter().copied().collect();
            if u.iter().all(|v| v.abs() < 1e-12) {
                continue;
            }
            normalize(&mut u);
            groups.push((u, flag));
        }
    }
    // Fresh states: a different stream from the collocation points.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let states = (0..DRIFT_STATES).map(|_| pot.sample_state(&mut rng)).collect::<Result<Vec<_>, _>>()?;
    let m = layout.basis.len();
    let mut out = Vec::new();
    for (index, (u, trivial)) in groups.into_iter().enumerate() {
        let c = layout.decode(&u);
        let res = residual_exprs(&c, pot)?;
        let mut residual_max = 0.0f64;
        let mut drift_max = 0.0f64;
        for s in &states {
            drift_max = drift_max.max(fi_total_derivative(&c, pot, s)?.abs());
            for r in &res {
                residual_max = residual_max.max(r.eval_xy(s.x, s.y)?.abs());
            }
        }
        if drift_max > DRIFT_BOUND {
            return Err(SearchError::VerificationFailed { index, drift: drift_max });
        }
        let nk = layout.n_kt() + layout.n_kt2();
        let b0 = u[nk..nk + m].to_vec();
        let b1 = u[nk + m..nk + 2 * m].to_vec();
        let g = if layout.has_g() { u[nk + 2 * m..nk + 3 * m].to_vec() } else { Vec::new() };
        out.push(ReportedCandidate {
            params: u[..nk].to_vec(),
            b_coeffs: [b0, b1],
            g_coeffs: g,
            s: layout.has_s().then(|| *u.last().unwrap()),
            lambda: layout.lambda,
            residual_max,
            drift_max,
            trivial,
            form: fi_expr(&c, pot)?.to_string(),
            vector: u,
        });
    }
    Ok(out)
}

/// Full pipeline: assemble, kernel, extract.
pub fn search_cfi(pot: &Potential, cfg: &AnsatzConfig) -> Result<(SearchReport, Layout), SearchError> {
    let (layout, system) = assemble(pot, cfg)?;
    let (rows, unknowns) = system.shape();
    let (basis, singular_values) = nullspace(&system, cfg.tau)?;
    let candidates = extract(&basis, pot, &layout, cfg.seed)?;
    let report = SearchReport {
        family: cfg.family,
        mode: cfg.mode,
        unknowns,
        rows,
        basis: layout.basis.iter().map(|b| b.to_string()).collect(),
        singular_values,
        kernel_dim: basis.ncols(),
        candidates,
    };
    Ok((report, layout))
}

/// Relative distance of `v` from the span of the orthonormal columns of `basis`.
pub fn distance_to_span(basis: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = DVector::from_column_slice(v);
    let proj = basis * (basis.transpose() * &v);
    (v.clone() - proj).norm() / v.norm().max(1e-300)
}

/// `1 - |cos|` between two vectors.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - (dot / (na * nb)).abs()
}

/// KT3 parameters whose tensor matches the given cubic part, by least squares.
pub fn fit_kt3(comps: [&Expr; 4], points: &[(f64, f64)]) -> KT3Params {
    let units: Vec<_> = (1..=10).map(|k| kt3(&KT3Params::unit(k))).collect();
    let rows = points.len() * 4;
    let a = DMatrix::from_fn(rows, 10, |i, k| units[k].components()[i % 4].eval_xy(points[i / 4].0, points[i / 4].1).unwrap());
    let b = DVector::from_fn(rows, |i, _| comps[i % 4].eval_xy(points[i / 4].0, points[i / 4].1).unwrap());
    let sol = a.svd(true, true).solve(&b, 1e-12).expect("svd solve");
    KT3Params { a: sol.as_slice().try_into().unwrap() }
}
