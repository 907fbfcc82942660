//! Executable catalog of tabulated potentials with cubic first integrals.
//!
//! Entries live in `catalog.toml`. Every formula is written in the expression
//! grammar and expanded with a fixed set of macros:
//!
//! | macro | meaning |
//! |-------|---------|
//! | `r`, `theta` | polar coordinates |
//! | `L`, `pth` | angular momentum `x vy - y vx` |
//! | `pr` | radial velocity |
//! | `V`, `Vx`, `Vy` | the potential and its gradient |
//! | `H` | the Hamiltonian |
//!
//! followed by the entry's own definitions, its one-variable functions (with
//! `d`/`dd`/`ddd` prefixed derivatives), implicit functions, numeric fields,
//! and finally each first integral by name, so later formulas may reuse
//! earlier ones.

pub mod implicit;

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{ConditionError, Domain, Potential};
use crate::dynamics::{drift, independence_rank, integrate, DriftReport, DynamicsError, State, RANK_THRESHOLD};
use crate::expr::{parse_with_defs, Expr, ExprError, Params, Point, Var};

use implicit::{AlgebraicBranch, ConstraintOde, ImplicitError, ImplicitKind, PathIntegral};

const CATALOG_TOML: &str = include_str!("catalog.toml");

/// Bound on constraint residuals at instantiation.
pub const CONSTRAINT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),
    #[error("entry {id} has no preset `{preset}`")]
    UnknownPreset { id: String, preset: String },
    #[error("missing parameter or function `{0}`")]
    MissingParameter(String),
    #[error("constraint `{constraint}` violated: residual {residual:.3e}")]
    ConstraintViolated { constraint: String, residual: f64 },
    #[error("in `{context}`: {source}")]
    Formula { context: String, source: ExprError },
    #[error(transparent)]
    Implicit(#[from] ImplicitError),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("catalog data: {0}")]
    Data(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub name: String,
    /// Expression the function is composed with.
    pub arg: String,
    /// Body in the variable `w`.
    pub body: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiSpec {
    pub name: String,
    pub expr: String,
    /// Parameter expression that must be positive for this integral to exist.
    #[serde(default)]
    pub requires: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub gx: String,
    pub gy: String,
    pub base: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeKind {
    Polar,
    PolarKepler,
    ThirdOrder,
}

/// An implicitly defined one-variable function.
///
/// Algebraic kinds give `equation` in `s` and `F`; ODE kinds take their
/// constants from the entry parameters (`c1`, `c2`, `k`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImplicitSpec {
    pub kind: ImplicitKind,
    pub name: String,
    pub arg: String,
    #[serde(default)]
    pub equation: Option<String>,
    #[serde(default)]
    pub ode: Option<OdeKind>,
    pub range: (f64, f64),
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    pub at: f64,
    /// Root selector for algebraic kinds.
    #[serde(default)]
    pub seed: f64,
    /// Initial data for ODE kinds.
    #[serde(default)]
    pub init: Vec<f64>,
}

fn default_nodes() -> usize {
    2001
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Preset {
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub defs: Vec<(String, String)>,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    #[serde(default)]
    pub implicit: Option<ImplicitSpec>,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Integrable,
    Superintegrable,
}

impl Classification {
    pub fn rank(self) -> usize {
        match self {
            Classification::Integrable => 2,
            Classification::Superintegrable => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub table: u8,
    /// Table row label and reference column, for provenance.
    pub row: String,
    pub description: String,
    pub potential: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Parameters computed from others, in order.
    #[serde(default)]
    pub derived: Vec<(String, String)>,
    #[serde(default)]
    pub defs: Vec<(String, String)>,
    #[serde(default)]
    pub functions: Vec<FunctionSpec>,
    #[serde(default)]
    pub implicit: Option<ImplicitSpec>,
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
    pub domain: Domain,
    /// Sampling ranges for `vx` and `vy`.
    #[serde(default = "default_velocity")]
    pub velocity: [(f64, f64); 2],
    #[serde(default)]
    pub singular: Vec<String>,
    pub fi: Vec<FiSpec>,
    /// Expressions that must vanish on the domain.
    #[serde(default)]
    pub constraints: Vec<String>,
    /// Pairs `(lhs, rhs)` that must agree pointwise in phase space.
    #[serde(default)]
    pub identities: Vec<(String, String)>,
    /// Names (FIs or `H`) whose independence gives the classification.
    pub rank_set: Vec<String>,
    pub class: Classification,
    /// Whether the entry is fully closed form (no implicit functions, no free functions).
    pub closed_form: bool,
    #[serde(default)]
    pub default_preset: Option<String>,
    #[serde(default)]
    pub presets: BTreeMap<String, Preset>,
    #[serde(default)]
    pub notes: String,
}

fn default_velocity() -> [(f64, f64); 2] {
    [(-1.0, 1.0), (-1.0, 1.0)]
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    version: u32,
    entry: Vec<CatalogEntry>,
}

pub const CATALOG_VERSION: u32 = 1;

fn load() -> Result<Vec<CatalogEntry>, CatalogError> {
    let f: CatalogFile = toml::from_str(CATALOG_TOML).map_err(|e| CatalogError::Data(e.to_string()))?;
    if f.version != CATALOG_VERSION {
        return Err(CatalogError::Data(format!("unsupported catalog version {}", f.version)));
    }
    Ok(f.entry)
}

/// All entries, in table order.
pub fn entries() -> &'static [CatalogEntry] {
    static ENTRIES: OnceLock<Vec<CatalogEntry>> = OnceLock::new();
    ENTRIES.get_or_init(|| load().expect("bundled catalog parses"))
}

pub fn entry(id: &str) -> Result<&'static CatalogEntry, CatalogError> {
    entries().iter().find(|e| e.id == id).ok_or_else(|| CatalogError::UnknownEntry(id.to_string()))
}

/// `(id, description)` for every entry.
pub fn list() -> Vec<(String, String)> {
    entries().iter().map(|e| (e.id.clone(), e.description.clone())).collect()
}

/// User choices for one instantiation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Bindings {
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub preset: Option<String>,
    /// Replacement bodies (in `w`) for named one-variable functions.
    #[serde(default)]
    pub functions: BTreeMap<String, String>,
}

impl Bindings {
    pub fn param(mut self, name: &str, v: f64) -> Self {
        self.params.insert(name.to_string(), v);
        self
    }

    pub fn preset(mut self, name: &str) -> Self {
        self.preset = Some(name.to_string());
        self
    }
}

/// A concrete potential with its first integrals.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub params: Params,
    pub potential: Potential,
    pub fis: Vec<(String, Expr)>,
    /// Integrals whose parameter requirement fails for these bindings.
    pub omitted: Vec<String>,
    pub velocity: [(f64, f64); 2],
    /// Every macro available to the entry's formulas, bound.
    pub macros: BTreeMap<String, Expr>,
    pub constraint_residual: f64,
    /// Grid residual of the implicit function, if any.
    pub grid_residual: Option<f64>,
    pub rank_set: Vec<String>,
    pub class: Classification,
    identities: Vec<(String, String)>,
}

impl Instance {
    pub fn fi(&self, name: &str) -> Option<&Expr> {
        if name == "H" {
            return self.macros.get("H");
        }
        self.fis.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    fn rank_exprs(&self) -> Result<Vec<Expr>, CatalogError> {
        self.rank_set
            .iter()
            .map(|n| self.fi(n).cloned().ok_or_else(|| CatalogError::Data(format!("rank set names unknown `{n}`"))))
            .collect()
    }

    /// Seeded initial states: admissible positions, velocities in the entry box, `t = 0`.
    pub fn initial_states(&self, n: usize, seed: u64) -> Result<Vec<State>, CatalogError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv(&self.id));
        let [(a, b), (c, d)] = self.velocity;
        (0..n)
            .map(|_| {
                let (x, y) = self.potential.sample_point(&mut rng)?;
                Ok(Point::new(0.0, x, y, rng.gen_range(a..=b), rng.gen_range(c..=d)))
            })
            .collect()
    }

    /// Random phase-space states with `t` in [0, 1], for pointwise checks.
    pub fn sample_states(&self, n: usize, seed: u64) -> Result<Vec<State>, CatalogError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv(&self.id) ^ 0x5DEECE66D);
        let [(a, b), (c, d)] = self.velocity;
        (0..n)
            .map(|_| {
                let (x, y) = self.potential.sample_point(&mut rng)?;
                Ok(Point::new(rng.gen_range(0.0..1.0), x, y, rng.gen_range(a..=b), rng.gen_range(c..=d)))
            })
            .collect()
    }

    /// Largest relative mismatch of the declared identities at the given states.
    pub fn identity_residuals(&self, states: &[State]) -> Result<Vec<(String, f64)>, CatalogError> {
        let mut out = Vec::new();
        for (lhs, rhs) in &self.identities {
            let a = self.formula(lhs)?;
            let b = self.formula(rhs)?;
            let mut worst = 0.0f64;
            for s in states {
                let (va, vb) = (a.eval(s, &self.params)?, b.eval(s, &self.params)?);
                worst = worst.max((va - vb).abs() / va.abs().max(1.0));
            }
            out.push((format!("{lhs} = {rhs}"), worst));
        }
        Ok(out)
    }

    /// Parse a formula with every macro of this instance.
    pub fn formula(&self, src: &str) -> Result<Expr, CatalogError> {
        let e = parse_with_defs(src, &self.macros)
            .map_err(|source| CatalogError::Formula { context: src.to_string(), source })?;
        Ok(e.bind(&self.params))
    }

    /// Max of `|dJ/dt|` over the given states, for every FI.
    pub fn derivative_residuals(&self, states: &[State]) -> Result<Vec<(String, f64)>, CatalogError> {
        let h = self.potential.hamiltonian();
        let mut out = Vec::new();
        for (name, j) in &self.fis {
            let d = crate::dynamics::convective_derivative(j, &h);
            let mut worst = 0.0f64;
            for s in states {
                worst = worst.max(d.eval(s, &self.params)?.abs());
            }
            out.push((name.clone(), worst));
        }
        Ok(out)
    }
}

fn fnv(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn parse_in(src: &str, macros: &BTreeMap<String, Expr>, params: &Params) -> Result<Expr, CatalogError> {
    let e = parse_with_defs(src, macros).map_err(|source| CatalogError::Formula { context: src.to_string(), source })?;
    Ok(e.bind(params))
}

/// `r`, `theta`, `L` (= `pth`) and `pr`, available to every formula.
pub fn base_macros() -> BTreeMap<String, Expr> {
    let (x, y, vx, vy) = (Expr::x(), Expr::y(), Expr::vx(), Expr::vy());
    let r = (x.powi(2) + y.powi(2)).sqrt();
    let l = &x * &vy - &y * &vx;
    let pr = (&x * &vx + &y * &vy) * r.recip();
    let mut m = BTreeMap::new();
    m.insert("r".into(), r);
    m.insert("theta".into(), Expr::atan2(y, x));
    m.insert("L".into(), l.clone());
    m.insert("pth".into(), l);
    m.insert("pr".into(), pr);
    m
}

/// Expand a one-variable function and its first three derivatives into macros.
fn add_function(
    f: &FunctionSpec,
    macros: &mut BTreeMap<String, Expr>,
    params: &Params,
) -> Result<(), CatalogError> {
    let mut wdefs = BTreeMap::new();
    wdefs.insert("w".to_string(), Expr::x());
    let body = parse_in(&f.body, &wdefs, params)?;
    let arg = parse_in(&f.arg, macros, params)?;
    let mut d = body;
    for prefix in ["", "d", "dd", "ddd"] {
        macros.insert(format!("{prefix}{}", f.name), d.subst_var(Var::X, &arg));
        d = d.diff(Var::X);
    }
    Ok(())
}

fn add_implicit(
    spec: &ImplicitSpec,
    macros: &mut BTreeMap<String, Expr>,
    params: &Params,
) -> Result<f64, CatalogError> {
    let arg = parse_in(&spec.arg, macros, params)?;
    let p = |name: &str| params.get(name).copied().ok_or_else(|| CatalogError::MissingParameter(name.to_string()));
    let (tab, residual): (Arc<dyn crate::expr::Tabulated>, f64) = match spec.kind {
        ImplicitKind::Cubic | ImplicitKind::Quartic => {
            let src = spec.equation.as_deref().ok_or_else(|| CatalogError::Data(format!("{} needs an equation", spec.name)))?;
            let mut vars = BTreeMap::new();
            vars.insert("s".to_string(), Expr::x());
            vars.insert(spec.name.clone(), Expr::y());
            let eq = parse_in(src, &vars, params)?;
            if let Some(name) = eq.params().into_iter().next() {
                return Err(CatalogError::MissingParameter(name));
            }
            let b = AlgebraicBranch::track(&spec.name, spec.kind, eq, spec.range, spec.nodes, spec.at, spec.seed)?;
            let res = b.max_residual;
            (Arc::new(b), res)
        }
        ImplicitKind::Ode => {
            let kind = match spec.ode {
                Some(OdeKind::Polar) => ConstraintOde::Polar { c1: p("c1")? },
                Some(OdeKind::PolarKepler) => ConstraintOde::PolarKepler { c1: p("c1")?, c2: p("c2")?, k: p("k")? },
                Some(OdeKind::ThirdOrder) => ConstraintOde::ThirdOrder,
                None => return Err(CatalogError::Data(format!("{} needs an ode kind", spec.name))),
            };
            let sol = implicit::solve_constraint_ode(kind, spec.range, spec.at, &spec.init)?;
            let res = sol.grid_error;
            (sol, res)
        }
    };
    for (k, prefix) in ["", "d", "dd", "ddd"].iter().enumerate() {
        macros.insert(format!("{prefix}{}", spec.name), Expr::func(tab.clone(), k, arg.clone()));
    }
    Ok(residual)
}

/// Bind parameters, build functions and check constraints.
pub fn instantiate(id: &str, b: &Bindings) -> Result<Instance, CatalogError> {
    let e = entry(id)?;
    let preset_name = b.preset.clone().or_else(|| e.default_preset.clone());
    let preset = match &preset_name {
        Some(p) => Some(e.presets.get(p).ok_or_else(|| CatalogError::UnknownPreset { id: id.into(), preset: p.clone() })?),
        None => None,
    };

    let mut params: Params = e.params.clone();
    if let Some(p) = preset {
        params.extend(p.params.clone());
    }
    params.extend(b.params.clone());
    let mut macros = base_macros();
    for (name, src) in &e.derived {
        if b.params.contains_key(name) {
            continue;
        }
        // Left unbound when not real; integrals that need it are then omitted.
        if let Ok(v) = parse_in(src, &macros, &params)?.eval(&Point::default(), &params) {
            params.insert(name.clone(), v);
        }
    }

    let mut functions: Vec<FunctionSpec> = e.functions.clone();
    if let Some(p) = preset {
        for f in &p.functions {
            functions.retain(|g| g.name != f.name);
            functions.push(f.clone());
        }
    }
    for f in functions.iter_mut() {
        if let Some(body) = b.functions.get(&f.name) {
            f.body = body.clone();
        }
    }
    for f in &functions {
        add_function(f, &mut macros, &params)?;
    }

    let implicit = preset.and_then(|p| p.implicit.clone()).or_else(|| e.implicit.clone());
    let grid_residual = match &implicit {
        Some(spec) => Some(add_implicit(spec, &mut macros, &params)?),
        None => None,
    };

    let defs = e.defs.iter().chain(preset.map(|p| p.defs.iter()).into_iter().flatten());
    for (name, src) in defs {
        let d = parse_in(src, &macros, &params)?;
        macros.insert(name.clone(), d);
    }

    let v = parse_in(&e.potential, &macros, &params)?;
    if let Some(name) = v.params().into_iter().next() {
        return Err(CatalogError::MissingParameter(name));
    }
    let vx = v.diff(Var::X);
    let vy = v.diff(Var::Y);
    let h = Expr::frac(1, 2) * (Expr::vx().powi(2) + Expr::vy().powi(2)) + v.clone();
    macros.insert("V".into(), v.clone());
    macros.insert("Vx".into(), vx);
    macros.insert("Vy".into(), vy);
    macros.insert("H".into(), h);

    for f in &e.fields {
        let gx = parse_in(&f.gx, &macros, &params)?;
        let gy = parse_in(&f.gy, &macros, &params)?;
        let field = Arc::new(PathIntegral::new(&f.name, f.base, [gx, gy]));
        macros.insert(f.name.clone(), Expr::field(field));
    }

    let singular = e.singular.iter().map(|s| parse_in(s, &macros, &params)).collect::<Result<Vec<_>, _>>()?;
    let potential = Potential::new(v, e.domain, singular)?;

    let mut fis = Vec::new();
    let mut omitted = Vec::new();
    for f in &e.fi {
        if let Some(req) = &f.requires {
            let ok = parse_in(req, &macros, &params)?.eval(&Point::default(), &params).is_ok_and(|v| v > 0.0);
            if !ok {
                omitted.push(f.name.clone());
                continue;
            }
        }
        let j = parse_in(&f.expr, &macros, &params)?;
        if let Some(name) = j.params().into_iter().next() {
            return Err(CatalogError::MissingParameter(name));
        }
        macros.insert(f.name.clone(), j.clone());
        fis.push((f.name.clone(), j));
    }

    let mut inst = Instance {
        id: e.id.clone(),
        params,
        potential,
        fis,
        omitted,
        velocity: e.velocity,
        macros,
        constraint_residual: 0.0,
        grid_residual,
        rank_set: e.rank_set.clone(),
        class: e.class,
        identities: e.identities.clone(),
    };
    inst.constraint_residual = check_constraints(e, &inst)?;
    for f in &e.fields {
        check_closure(&inst, &f.name)?;
    }
    Ok(inst)
}

const CONSTRAINT_POINTS: usize = 50;

fn check_constraints(e: &CatalogEntry, inst: &Instance) -> Result<f64, CatalogError> {
    if e.constraints.is_empty() {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(fnv(&e.id));
    let pts: Vec<(f64, f64)> =
        (0..CONSTRAINT_POINTS).map(|_| inst.potential.sample_point(&mut rng)).collect::<Result<_, _>>()?;
    let mut worst = 0.0f64;
    for c in &e.constraints {
        let expr = inst.formula(c)?;
        let mut r = 0.0f64;
        for &(x, y) in &pts {
            r = r.max(expr.eval(&Point::xy(x, y), &inst.params)?.abs());
        }
        if r > CONSTRAINT_TOL {
            return Err(CatalogError::ConstraintViolated { constraint: c.clone(), residual: r });
        }
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Path independence of a numerically integrated field.
fn check_closure(inst: &Instance, name: &str) -> Result<(), CatalogError> {
    let Some(f) = inst.macros.get(name) else { return Ok(()) };
    let crate::expr::Node::Field(field) = f.node() else { return Ok(()) };
    let grad = field.gradient();
    let mut rng = ChaCha8Rng::seed_from_u64(fnv(name));
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (x, y) = inst.potential.sample_point(&mut rng)?;
        // Curl of the prescribed gradient, by central differences of the exact components.
        let h = 1e-5;
        let c = (grad[0].eval_xy(x, y + h)? - grad[0].eval_xy(x, y - h)? - grad[1].eval_xy(x + h, y)?
            + grad[1].eval_xy(x - h, y)?)
            / (2.0 * h);
        worst = worst.max(c.abs());
    }
    if worst > 1e-6 {
        return Err(CatalogError::ConstraintViolated { constraint: format!("{name} gradient is closed"), residual: worst });
    }
    Ok(())
}

/// The drift protocol applied by [`check_entry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub ics: usize,
    pub t_end: f64,
    pub tol: f64,
    pub bar: f64,
    pub seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol { ics: 5, t_end: 10.0, tol: 1e-12, bar: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryReport {
    pub id: String,
    pub params: Params,
    pub protocol: Protocol,
    /// Worst drift over the initial conditions, per FI.
    pub drifts: Vec<DriftReport>,
    pub fi_names: Vec<String>,
    /// `|{F_i, F_j}|` maximized over the initial states.
    pub involution: Vec<Vec<f64>>,
    pub rank_set: Vec<String>,
    pub rank: usize,
    pub expected_rank: usize,
    pub class: Classification,
    pub constraint_residual: f64,
    pub grid_residual: Option<f64>,
    pub identities: Vec<(String, f64)>,
    pub pass: bool,
}

/// Tolerance for the pointwise identities listed in an entry.
pub const IDENTITY_TOL: f64 = 1e-10;

pub fn check_entry(id: &str, b: &Bindings, protocol: &Protocol) -> Result<EntryReport, CatalogError> {
    let inst = instantiate(id, b)?;
    check_instance(&inst, protocol)
}

pub fn check_instance(inst: &Instance, protocol: &Protocol) -> Result<EntryReport, CatalogError> {
    let ics = inst.initial_states(protocol.ics, protocol.seed)?;
    let trajs: Vec<_> = ics
        .par_iter()
        .map(|s| integrate(&inst.potential, s, protocol.t_end, protocol.tol))
        .collect::<Result<_, _>>()?;

    let mut drifts: Vec<DriftReport> = Vec::new();
    for (name, j) in &inst.fis {
        let mut worst: Option<DriftReport> = None;
        for tr in &trajs {
            let d = drift(name, j, tr, protocol.bar)?;
            if worst.as_ref().map_or(true, |w| d.relative_drift > w.relative_drift) {
                worst = Some(d);
            }
        }
        drifts.extend(worst);
    }

    let names: Vec<String> = inst.fis.iter().map(|(n, _)| n.clone()).collect();
    let n = names.len();
    let mut involution = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in i + 1..n {
            let pb = crate::dynamics::poisson_bracket(&inst.fis[i].1, &inst.fis[k].1);
            let mut worst = 0.0f64;
            for s in &ics {
                worst = worst.max(pb.eval(s, &inst.params)?.abs());
            }
            involution[i][k] = worst;
            involution[k][i] = worst;
        }
    }

    let rank = independence_rank(&inst.rank_exprs()?, &ics, RANK_THRESHOLD)?;
    let expected_rank = inst.class.rank();
    let identities = inst.identity_residuals(&inst.sample_states(100, protocol.seed)?)?;
    let pass = drifts.iter().all(|d| d.pass)
        && rank == expected_rank
        && identities.iter().all(|(_, r)| *r <= IDENTITY_TOL);
    Ok(EntryReport {
        id: inst.id.clone(),
        params: inst.params.clone(),
        protocol: *protocol,
        drifts,
        fi_names: names,
        involution,
        rank_set: inst.rank_set.clone(),
        rank,
        expected_rank,
        class: inst.class,
        constraint_residual: inst.constraint_residual,
        grid_residual: inst.grid_residual,
        identities,
        pass,
    })
}
