//! `cfi-forge`: verify first integrals of 2D potentials, search for cubic ones and
//! run the built-in catalog.
//!
//! Exit codes: 0 pass, 1 verification failed, 2 usage or parse error, 3 runtime
//! domain error.

mod fi_file;
mod plot;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use cfi_core::catalog::{self, Bindings, CatalogError, EntryReport, Protocol};
use cfi_core::conditions::{fi_expr, ConditionError, Domain, Family, Potential};
use cfi_core::dynamics::{self, DriftReport, DynamicsError, State, RANK_THRESHOLD};
use cfi_core::expr::{parse_with_defs, Expr, ExprError, Params, Point};
use cfi_core::geometry::kt_space_dimension;
use cfi_core::search::{self, AnsatzConfig, Mode, SearchError, SearchReport};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cfi-forge", version, about = "Cubic first integrals of two-dimensional potentials")]
struct Cli {
    /// Seed for sampled initial conditions and collocation points.
    #[arg(long, global = true, env = "CFI_FORGE_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Sampling box `x0,x1,y0,y1` for states and collocation points.
    #[arg(long, global = true, allow_hyphen_values = true, default_value = "-1,1,-1,1")]
    domain: String,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate trajectories and check that the given integrals stay constant.
    Verify(VerifyArgs),
    /// Look for cubic first integrals of a potential.
    Search(SearchArgs),
    /// List or check the catalog of known potentials.
    #[command(subcommand)]
    Catalog(CatalogCmd),
    /// Dimension of the Killing tensor space of the given order in the plane.
    Ktdim { order: usize },
}

#[derive(Args)]
struct VerifyArgs {
    /// V(x, y) in the expression grammar.
    #[arg(long)]
    potential: String,
    /// Parameter binding `name=value`.
    #[arg(long = "param", allow_hyphen_values = true)]
    params: Vec<String>,
    /// First integral in (t, x, y, vx, vy); `H`, `L`, `r`, `pr`, `theta` are predefined.
    #[arg(long = "fi", allow_hyphen_values = true)]
    fis: Vec<String>,
    /// JSON file with one or more structured candidates.
    #[arg(long)]
    fi_file: Option<PathBuf>,
    /// Initial condition `x,y,vx,vy`; five seeded ones when absent.
    #[arg(long = "ic", allow_hyphen_values = true)]
    ics: Vec<String>,
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Relative drift allowed before an integral counts as broken.
    #[arg(long, default_value_t = 1e-6)]
    bar: f64,
    /// SVG of |J(t) - J(0)| along the first trajectory.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    potential: String,
    #[arg(long = "param", allow_hyphen_values = true)]
    params: Vec<String>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Aut)]
    family: FamilyArg,
    /// Degree cap of the monomials multiplying each dictionary entry.
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// `;`-separated functions of (x, y). `V`, `Vx`, `Vy` name the potential and its
    /// gradient; the word `potential` expands to `1;V;Vx;Vy`.
    #[arg(long)]
    dictionary: Option<String>,
    /// Rate of the exponential family.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Solve exactly over the rationals (polynomial input only).
    #[arg(long)]
    exact: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Aut,
    LinT,
    Exp,
}

#[derive(Subcommand)]
enum CatalogCmd {
    List,
    Check(CheckArgs),
}

#[derive(Args)]
struct CheckArgs {
    id: String,
    #[arg(long = "param", allow_hyphen_values = true)]
    params: Vec<String>,
    #[arg(long)]
    preset: Option<String>,
    /// Replacement body in `w` for a free function, `F=w^2`.
    #[arg(long = "function")]
    functions: Vec<String>,
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Domain(_) | Failure::Io(_) => 3,
        }
    }
}

impl From<ExprError> for Failure {
    fn from(e: ExprError) -> Self {
        match e {
            ExprError::DomainError(_) => Failure::Domain(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<ConditionError> for Failure {
    fn from(e: ConditionError) -> Self {
        match e {
            ConditionError::Expr(e) => e.into(),
            ConditionError::EmptyDomain => Failure::Domain(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Expr(e) => e.into(),
            DynamicsError::BadTolerance(_) => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Condition(e) => e.into(),
            CatalogError::Dynamics(e) => e.into(),
            CatalogError::Expr(e) => e.into(),
            CatalogError::Formula { source: ExprError::DomainError(_), .. } | CatalogError::Implicit(_) => {
                Failure::Domain(e.to_string())
            }
            CatalogError::Data(_) => Failure::Domain(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Condition(e) => e.into(),
            SearchError::Expr(e) => e.into(),
            SearchError::IllConditioned { .. } => Failure::Domain(e.to_string()),
            SearchError::VerificationFailed { .. } => Failure::Verification(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cfi-forge: {e}");
            ExitCode::from(e.code())
        }
    }
}

/// `Ok(pass)` on a completed run.
fn run(cli: &Cli) -> Result<bool, Failure> {
    match &cli.cmd {
        Command::Verify(a) => verify(cli, a),
        Command::Search(a) => search_cmd(cli, a),
        Command::Catalog(CatalogCmd::List) => list(cli),
        Command::Catalog(CatalogCmd::Check(a)) => check(cli, a),
        Command::Ktdim { order } => {
            let d = kt_space_dimension(*order).map_err(|e| Failure::Usage(e.to_string()))?;
            write_out(cli, format!("{d}\n").into_bytes())?;
            Ok(true)
        }
    }
}

fn split_binding(s: &str) -> Result<(&str, &str), Failure> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Failure::Usage(format!("expected name=value, got `{s}`")))
}

fn parse_params(list: &[String]) -> Result<Params, Failure> {
    let mut out = Params::new();
    for s in list {
        let (k, v) = split_binding(s)?;
        let v: f64 = v.parse().map_err(|_| Failure::Usage(format!("parameter `{k}`: `{v}` is not a number")))?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}

fn fully_bound(e: Expr, src: &str) -> Result<Expr, Failure> {
    match e.params().first() {
        Some(p) => Err(Failure::Usage(format!("unbound parameter `{p}` in `{src}`"))),
        None => Ok(e),
    }
}

fn numbers(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("{what} `{s}` is not a list of numbers")))
}

fn potential(cli: &Cli, src: &str, params: &Params) -> Result<Potential, Failure> {
    let domain = match numbers(&cli.domain, "domain")?[..] {
        [x0, x1, y0, y1] if x0 < x1 && y0 < y1 => Domain::Rect { x: (x0, x1), y: (y0, y1) },
        _ => return Err(Failure::Usage(format!("domain `{}` needs x0,x1,y0,y1 with x0 < x1, y0 < y1", cli.domain))),
    };
    let v = parse_with_defs(src, &catalog::base_macros())?.bind(params);
    Ok(Potential::new(fully_bound(v, src)?, domain, vec![])?)
}

fn parse_ic(s: &str) -> Result<State, Failure> {
    match numbers(s, "initial condition")?[..] {
        [x, y, vx, vy] => Ok(Point::new(0.0, x, y, vx, vy)),
        _ => Err(Failure::Usage(format!("initial condition `{s}` needs x,y,vx,vy"))),
    }
}

fn write_out(cli: &Cli, bytes: Vec<u8>) -> Result<(), Failure> {
    match &cli.out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

/// JSON of `value`, or CSV of `rows`, to the chosen sink.
fn emit<T: Serialize, R: Serialize>(cli: &Cli, value: &T, rows: &[R]) -> Result<(), Failure> {
    let bytes = match cli.format {
        Format::Json => {
            let mut b = serde_json::to_vec_pretty(value).map_err(|e| Failure::Domain(e.to_string()))?;
            b.push(b'\n');
            b
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| Failure::Domain(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Failure::Domain(e.to_string()))?
        }
    };
    write_out(cli, bytes)
}

#[derive(Serialize)]
struct VerifyReport {
    potential: String,
    params: Params,
    seed: u64,
    t_end: f64,
    tol: f64,
    integrals: BTreeMap<String, String>,
    initial_conditions: Vec<[f64; 4]>,
    /// Per initial condition, per integral.
    drifts: Vec<Vec<DriftReport>>,
    /// Worst drift per integral over all initial conditions.
    worst: Vec<DriftReport>,
    /// Largest `|{F_i, F_j}|` among the given integrals.
    involution: f64,
    /// Functional rank of H together with the given integrals.
    rank: usize,
    pass: bool,
}

#[derive(Serialize)]
struct DriftRow<'a> {
    integral: &'a str,
    ic: usize,
    j0: f64,
    max_abs_drift: f64,
    relative_drift: f64,
    pass: bool,
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<bool, Failure> {
    let params = parse_params(&a.params)?;
    let pot = potential(cli, &a.potential, &params)?;
    let mut defs = catalog::base_macros();
    defs.insert("H".into(), pot.hamiltonian());

    let mut fis: Vec<(String, Expr)> = Vec::new();
    for (i, src) in a.fis.iter().enumerate() {
        let e = parse_with_defs(src, &defs)?.bind(&params);
        fis.push((format!("J{}", i + 1), fully_bound(e, src)?));
    }
    if let Some(path) = &a.fi_file {
        for (k, spec) in fi_file::read(path)?.into_iter().enumerate() {
            let name = spec.name.clone().unwrap_or_else(|| format!("F{}", k + 1));
            let c = spec.candidate(&defs, &params)?;
            fis.push((name, fi_expr(&c, &pot)?));
        }
    }
    if fis.is_empty() {
        return Err(Failure::Usage("no first integral given; use --fi or --fi-file".into()));
    }

    let ics: Vec<State> = if a.ics.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
        (0..5)
            .map(|_| pot.sample_state(&mut rng).map(|s| Point { t: 0.0, ..s }))
            .collect::<Result<_, _>>()?
    } else {
        a.ics.iter().map(|s| parse_ic(s)).collect::<Result<_, _>>()?
    };
    for s in &ics {
        if !pot.admissible(s.x, s.y) {
            return Err(Failure::Domain(format!("initial point ({}, {}) is singular for V", s.x, s.y)));
        }
    }

    let mut drifts = Vec::new();
    let mut states = Vec::new();
    let mut first = None;
    for s in &ics {
        let tr = dynamics::integrate(&pot, s, a.tmax, a.tol)?;
        let row = fis.iter().map(|(n, e)| dynamics::drift(n, e, &tr, a.bar)).collect::<Result<Vec<_>, _>>()?;
        drifts.push(row);
        states.push(*s);
        states.push(*tr.last());
        first.get_or_insert(tr);
    }
    let worst: Vec<DriftReport> = (0..fis.len())
        .map(|k| {
            drifts.iter().map(|row| row[k].clone()).fold(drifts[0][k].clone(), |w, d| {
                if d.relative_drift > w.relative_drift {
                    d
                } else {
                    w
                }
            })
        })
        .collect();
    let exprs: Vec<Expr> = fis.iter().map(|(_, e)| e.clone()).collect();
    let involution = dynamics::involution_check(&exprs, &states)?;
    let mut with_h = vec![pot.hamiltonian()];
    with_h.extend(exprs.iter().cloned());
    let rank = dynamics::independence_rank(&with_h, &states, RANK_THRESHOLD)?;
    let pass = worst.iter().all(|d| d.pass);

    if let (Some(path), Some(tr)) = (&a.plot, &first) {
        let mut series = Vec::new();
        for (name, e) in &fis {
            let j0 = e.eval(&tr.states[0], &Params::new())?;
            let pts = tr.states.iter().map(|s| Ok((s.t, (e.eval(s, &Params::new())? - j0).abs())));
            series.push((name.clone(), pts.collect::<Result<Vec<_>, ExprError>>()?));
        }
        std::fs::write(path, plot::drift_svg(&series))?;
    }

    let report = VerifyReport {
        potential: pot.v.to_string(),
        params,
        seed: cli.seed,
        t_end: a.tmax,
        tol: a.tol,
        integrals: fis.iter().map(|(n, e)| (n.clone(), e.to_string())).collect(),
        initial_conditions: ics.iter().map(|s| [s.x, s.y, s.vx, s.vy]).collect(),
        drifts,
        worst,
        involution,
        rank,
        pass,
    };
    let rows: Vec<DriftRow> = report
        .drifts
        .iter()
        .enumerate()
        .flat_map(|(ic, row)| {
            row.iter().map(move |d| DriftRow {
                integral: &d.name,
                ic,
                j0: d.j0,
                max_abs_drift: d.max_abs_drift,
                relative_drift: d.relative_drift,
                pass: d.pass,
            })
        })
        .collect();
    emit(cli, &report, &rows)?;
    Ok(pass)
}

#[derive(Serialize)]
struct CandidateRow<'a> {
    index: usize,
    trivial: bool,
    residual_max: f64,
    drift_max: f64,
    form: &'a str,
}

fn dictionary(src: &str, pot: &Potential, params: &Params) -> Result<Vec<Expr>, Failure> {
    let mut defs = catalog::base_macros();
    defs.insert("V".into(), pot.v.clone());
    defs.insert("Vx".into(), pot.grad[0].clone());
    defs.insert("Vy".into(), pot.grad[1].clone());
    let mut out = Vec::new();
    for item in src.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        if item == "potential" {
            out.extend(search::potential_dictionary(pot));
        } else {
            out.push(fully_bound(parse_with_defs(item, &defs)?.bind(params), item)?);
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("empty dictionary".into()));
    }
    Ok(out)
}

fn search_cmd(cli: &Cli, a: &SearchArgs) -> Result<bool, Failure> {
    let params = parse_params(&a.params)?;
    let pot = potential(cli, &a.potential, &params)?;
    let family = match a.family {
        FamilyArg::Aut => Family::Aut,
        FamilyArg::LinT => Family::LinT,
        FamilyArg::Exp => Family::Exp,
    };
    if family == Family::Exp && a.lambda.is_none() {
        return Err(Failure::Usage("--family exp needs --lambda".into()));
    }
    let cfg = AnsatzConfig {
        family,
        degree: a.degree,
        dictionary: match &a.dictionary {
            Some(s) => dictionary(s, &pot, &params)?,
            None => vec![Expr::one()],
        },
        seed: cli.seed,
        mode: if a.exact { Mode::Exact } else { Mode::Collocation },
        lambda: a.lambda,
        ..Default::default()
    };
    let (report, _): (SearchReport, _) = search::search_cfi(&pot, &cfg)?;
    let rows: Vec<CandidateRow> = report
        .candidates
        .iter()
        .enumerate()
        .map(|(index, c)| CandidateRow {
            index,
            trivial: c.trivial,
            residual_max: c.residual_max,
            drift_max: c.drift_max,
            form: &c.form,
        })
        .collect();
    emit(cli, &report, &rows)?;
    Ok(true)
}

#[derive(Serialize)]
struct ListRow<'a> {
    id: &'a str,
    table: u8,
    description: &'a str,
}

fn list(cli: &Cli) -> Result<bool, Failure> {
    let rows: Vec<ListRow> = catalog::entries()
        .iter()
        .map(|e| ListRow { id: &e.id, table: e.table, description: &e.description })
        .collect();
    emit(cli, &rows, &rows)?;
    Ok(true)
}

#[derive(Serialize)]
struct CheckRow<'a> {
    id: &'a str,
    integral: &'a str,
    j0: f64,
    max_abs_drift: f64,
    relative_drift: f64,
    pass: bool,
    rank: usize,
    expected_rank: usize,
}

fn check(cli: &Cli, a: &CheckArgs) -> Result<bool, Failure> {
    let mut b = Bindings { params: parse_params(&a.params)?, preset: a.preset.clone(), ..Default::default() };
    for f in &a.functions {
        let (k, v) = split_binding(f)?;
        b.functions.insert(k.to_string(), v.to_string());
    }
    let protocol = Protocol { t_end: a.tmax, tol: a.tol, seed: cli.seed, ..Default::default() };
    let report: EntryReport = catalog::check_entry(&a.id, &b, &protocol)?;
    let rows: Vec<CheckRow> = report
        .drifts
        .iter()
        .map(|d| CheckRow {
            id: &report.id,
            integral: &d.name,
            j0: d.j0,
            max_abs_drift: d.max_abs_drift,
            relative_drift: d.relative_drift,
            pass: d.pass,
            rank: report.rank,
            expected_rank: report.expected_rank,
        })
        .collect();
    emit(cli, &report, &rows)?;
    Ok(report.pass)
}
