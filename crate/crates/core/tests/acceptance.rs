//! One line per acceptance criterion, written straight to stdout so it shows up
//! without `--nocapture`. The test fails if any line reads FAIL.

use std::io::Write;
use std::time::Instant;

use cfi_core::catalog::{check_entry, entries, instantiate, Bindings, EntryReport, Protocol};
use cfi_core::conditions::*;
use cfi_core::dynamics::{convective_derivative, independence_rank, RANK_THRESHOLD};
use cfi_core::expr::{parse, Expr, Point, Var};
use cfi_core::geometry::*;
use cfi_core::search::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// The only item allowed to stay red; see the decisions ledger.
const X3Y_RED: &str = "x^3 y with a4 alone: integrability residual is 0 (V_xyy = 0), expected nonzero";

const CLOSED_FORM: [&str; 25] = [
    "V2", "V3", "V4", "V5", "V6", "V7", "Vs1", "Vs3", "Vs4", "Vs5", "Vs6", "Vs7", "Vs8", "Vs9", "Vs10", "Vs12",
    "Vs13", "T.Vs1", "T.Vs3", "T.Vs4", "T.Vs5", "T.Vs7", "T.Vs8", "T.V7", "E.Vs11",
];

const IMPLICIT: [(&str, Option<&str>); 5] =
    [("Vs11", None), ("Vs14", None), ("Vs15", None), ("V8", Some("table4")), ("V8", Some("k0"))];

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn square(n: usize, half: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut r = rng(seed);
    (0..n).map(|_| (r.gen_range(-half..half), r.gen_range(-half..half))).collect()
}

fn box_pot(v: &str, x: (f64, f64), y: (f64, f64)) -> Potential {
    Potential::new(parse(v).unwrap(), Domain::Rect { x, y }, vec![]).unwrap()
}

fn pot_points(p: &Potential, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut r = rng(seed);
    (0..n).map(|_| p.sample_point(&mut r).unwrap()).collect()
}

fn bindings(preset: Option<&str>) -> Bindings {
    let mut b = Bindings::default();
    b.preset = preset.map(str::to_string);
    b
}

fn worst_drift(r: &EntryReport) -> f64 {
    r.drifts.iter().map(|d| d.relative_drift).fold(0.0, f64::max)
}

// 1 ---------------------------------------------------------------------------

fn kt_dimensions() -> Outcome {
    let t = Instant::now();
    let d2 = kt_space_dimension(2).map_err(|e| e.to_string())?;
    let d3 = kt_space_dimension(3).map_err(|e| e.to_string())?;
    let g = reducible_generator_rank();
    let secs = t.elapsed().as_secs_f64();
    ensure(d2 == 6 && d3 == 10 && g == 9, format!("dims {d2}, {d3}, generator rank {g}"))?;
    ensure(secs < 0.1, format!("took {secs:.3}s"))?;
    Ok(format!("N2 = {d2}, N3 = {d3}, generator rank {g}"))
}

// 2 ---------------------------------------------------------------------------

fn killing_identities() -> Outcome {
    let t = Instant::now();
    let pts = square(200, 2.0, 1);
    let mut r = rng(2);
    let mut worst = [0.0f64; 3];
    for _ in 0..50 {
        let mut a = [0.0; 10];
        a.iter_mut().for_each(|v| *v = r.gen_range(-1.0..1.0));
        let c: Vec<f64> = (0..6).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mut g = SymGenParams::default();
        g.b.iter_mut().for_each(|v| *v = r.gen_range(-1.0..1.0));
        let fields = [
            TensorField::Order2(kt2(&KT2Params::from_slice(&c))),
            TensorField::Order3(kt3(&KT3Params { a })),
            TensorField::Order3(sym_derivative(&sym_generator(&g))),
        ];
        for (w, f) in worst.iter_mut().zip(&fields) {
            *w = w.max(killing_residual(f, &pts));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let max = worst.iter().copied().fold(0.0, f64::max);
    ensure(max <= 1e-12, format!("residuals {worst:?}"))?;
    ensure(secs < 1.0, format!("took {secs:.3}s"))?;
    Ok(format!("max residual {max:.2e} (kt2, kt3, generated)"))
}

// 3, 4 ------------------------------------------------------------------------

fn drift_suite(reports: &mut Vec<EntryReport>) -> Outcome {
    let t = Instant::now();
    let mut worst = (0.0, String::new());
    for id in CLOSED_FORM {
        let r = check_entry(id, &Bindings::default(), &Protocol::default()).map_err(|e| format!("{id}: {e}"))?;
        for d in &r.drifts {
            ensure(d.relative_drift <= 1e-6, format!("{id} {}: drift {:.2e}", d.name, d.relative_drift))?;
        }
        if worst_drift(&r) > worst.0 {
            worst = (worst_drift(&r), id.to_string());
        }
        reports.push(r);
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("{} entries, worst drift {:.2e} ({})", CLOSED_FORM.len(), worst.0, worst.1))
}

fn implicit_entries(reports: &mut Vec<EntryReport>) -> Outcome {
    let mut worst = [0.0f64; 3];
    for (id, preset) in IMPLICIT {
        let r = check_entry(id, &bindings(preset), &Protocol::default()).map_err(|e| format!("{id}: {e}"))?;
        let grid = r.grid_residual.unwrap_or(0.0);
        ensure(worst_drift(&r) <= 1e-6, format!("{id}: drift {:.2e}", worst_drift(&r)))?;
        ensure(grid <= 1e-8 && r.constraint_residual <= 1e-8, format!("{id}: grid {grid:.2e}"))?;
        worst = [worst[0].max(worst_drift(&r)), worst[1].max(grid), worst[2].max(r.constraint_residual)];
        reports.push(r);
    }
    Ok(format!("worst drift {:.2e}, grid residual {:.2e}, constraint residual {:.2e}", worst[0], worst[1], worst[2]))
}

// 5 ---------------------------------------------------------------------------

fn classification_ranks() -> Outcome {
    let mut checked = 0;
    for e in entries() {
        // The second condition of Vs16 cannot be met; its first condition alone is used.
        let b = if e.id == "Vs16" { bindings(Some("first_condition")) } else { Bindings::default() };
        let inst = instantiate(&e.id, &b).map_err(|err| format!("{}: {err}", e.id))?;
        let set: Vec<Expr> = inst.rank_set.iter().map(|n| inst.fi(n).unwrap().clone()).collect();
        let states = inst.sample_states(10, 3).map_err(|err| err.to_string())?;
        let rank = independence_rank(&set, &states, RANK_THRESHOLD).map_err(|err| err.to_string())?;
        let want = if e.table == 1 { 2 } else { 3 };
        ensure(set.len() == want && rank == want, format!("{}: rank {rank} of {}", e.id, set.len()))?;
        checked += 1;
    }

    let mut worst = 0.0f64;
    for id in ["Vs2", "E.Vs11"] {
        let inst = instantiate(id, &Bindings::default()).unwrap();
        let states = inst.sample_states(100, 7).unwrap();
        for (name, r) in inst.identity_residuals(&states).map_err(|e| e.to_string())? {
            ensure(r <= 1e-10, format!("{id} {name}: {r:.2e}"))?;
            worst = worst.max(r);
        }
    }
    Ok(format!("{checked} entries at their declared rank, identities {worst:.2e}"))
}

// 6 ---------------------------------------------------------------------------

fn reference(layout: &Layout, c: &CandidateCFI, pts: &[(f64, f64)]) -> Result<Vec<f64>, String> {
    let (mut u, fit) = layout.encode(c, pts).map_err(|e| e.to_string())?;
    ensure(fit < 1e-10, format!("reference not representable: {fit:.2e}"))?;
    normalize(&mut u);
    Ok(u)
}

fn best_match(rep: &SearchReport, u: &[f64]) -> f64 {
    rep.candidates.iter().filter(|c| !c.trivial).map(|c| cosine_distance(&c.vector, u)).fold(f64::INFINITY, f64::min)
}

fn timed_search(pot: &Potential, cfg: &AnsatzConfig) -> Result<(SearchReport, Layout, f64), String> {
    let t = Instant::now();
    let (rep, layout) = search_cfi(pot, cfg).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 5.0, format!("search took {secs:.1}s"))?;
    Ok((rep, layout, secs))
}

fn search_recovery() -> Outcome {
    let kt = |comps: [&str; 4], pts: &[(f64, f64)]| {
        let e: Vec<Expr> = comps.iter().map(|s| parse(s).unwrap()).collect();
        fit_kt3([&e[0], &e[1], &e[2], &e[3]], pts)
    };
    let mut slowest = 0.0f64;

    // (a) separable, harmonic ratio 1:2 plus an inverse square
    let pot = box_pot("x^2 + 4*y^2 + 1/x^2", (0.5, 2.0), (-1.0, 1.0));
    let pts = pot_points(&pot, 150, 99);
    let cfg = AnsatzConfig { degree: 1, dictionary: potential_dictionary(&pot), ..Default::default() };
    let (rep, layout, s) = timed_search(&pot, &cfg)?;
    slowest = slowest.max(s);
    let b = [parse("8*x*y").unwrap(), parse("-2*x^2 + 2/x^2").unwrap()];
    let u = reference(&layout, &CandidateCFI::aut(kt(["0", "1/3", "0", "0"], &pts), b, 0.0), &pts)?;
    let da = best_match(&rep, &u);
    ensure(da <= 1e-8, format!("(a) cosine distance {da:.2e}"))?;

    // (b) isotropic oscillator with two inverse squares
    let pot = box_pot("x^2 + y^2 + 1/x^2 + 1/y^2", (0.5, 2.0), (0.5, 2.0));
    let pts = pot_points(&pot, 150, 99);
    let cfg = AnsatzConfig { degree: 2, dictionary: potential_dictionary(&pot), ..Default::default() };
    let (rep, layout, s) = timed_search(&pot, &cfg)?;
    slowest = slowest.max(s);
    let b = [parse("2*x*y^2 - 2*x/y^2").unwrap(), parse("-2*x^2*y + 2*y/x^2").unwrap()];
    let u = reference(&layout, &CandidateCFI::aut(kt(["0", "y/3", "-x/3", "0"], &pts), b, 0.0), &pts)?;
    let db = best_match(&rep, &u);
    ensure(db <= 1e-8, format!("(b) cosine distance {db:.2e}"))?;

    // (c) free motion: 10 cubic KTs, 3 Killing vectors and the constant, less the
    // 4 conditions tying s and the vector field; counted exactly in search_recovery.rs.
    let pot = Potential::plane(Expr::zero()).unwrap();
    let cfg = AnsatzConfig { degree: 1, dictionary: vec![Expr::one()], ..Default::default() };
    let (rep, _, s) = timed_search(&pot, &cfg)?;
    slowest = slowest.max(s);
    let kc = rep.kernel_dim;
    ensure(kc == 13, format!("(c) kernel dimension {kc}"))?;

    // (d) Toda
    let e = ["exp(y + sqrt(3)*x)", "exp(y - sqrt(3)*x)", "exp(-2*y)"];
    let pot = box_pot(&e.join(" + "), (-1.0, 1.0), (-1.0, 1.0));
    let pts = pot_points(&pot, 150, 99);
    let mut dict = vec![Expr::one()];
    dict.extend(e.iter().map(|s| parse(s).unwrap()));
    let cfg = AnsatzConfig { degree: 0, dictionary: dict, ..Default::default() };
    let (rep, layout, s) = timed_search(&pot, &cfg)?;
    slowest = slowest.max(s);
    let b = [
        parse(&format!("3*({} + {} - 2*{})", e[0], e[1], e[2])).unwrap(),
        parse(&format!("-3*sqrt(3)*({} - {})", e[0], e[1])).unwrap(),
    ];
    let (u, fit) = layout.encode(&CandidateCFI::aut(KT3Params::unit(4).with(10, -1.0), b, 0.0), &pts).unwrap();
    ensure(fit < 1e-10, "(d) reference not representable")?;
    let (basis, _) = nullspace(&assemble(&pot, &cfg).unwrap().1, cfg.tau).unwrap();
    ensure(basis.ncols() == rep.kernel_dim, "(d) kernel mismatch")?;
    let dd = distance_to_span(&basis, &u);
    ensure(dd <= 1e-8, format!("(d) distance to kernel {dd:.2e}"))?;

    Ok(format!(
        "(a) {da:.1e} (b) {db:.1e} (c) dim {kc} (d) {dd:.1e}, slowest search {slowest:.2}s"
    ))
}

// 7 ---------------------------------------------------------------------------

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn holt_case(v: &str, f: &str, p: &KT3Params, z: &str, x: (f64, f64), y: (f64, f64)) -> Result<f64, String> {
    let pot = box_pot(v, x, y);
    let f = parse(f).unwrap();
    let z = parse(z).unwrap();
    let zsum = holt_y(p) + f.subst_param("V", &pot.v);
    let mut worst = 0.0f64;
    for (px, py) in pot_points(&pot, 100, 4) {
        let r = residual_holt(&f, p, &pot, px, py).map_err(|e| e.to_string())?;
        let dz = zsum.eval_xy(px, py).unwrap() - z.eval_xy(px, py).unwrap();
        ensure(dz.abs() <= 1e-10, format!("{v}: Z differs by {dz:.2e}"))?;
        worst = worst.max(max_abs(r));
    }
    Ok(worst)
}

fn condition_residuals() -> Outcome {
    // Holt pairs: F(V) chosen so that Z = F + Y takes the stated form.
    let h4 = holt_case("(x*y)^(-2/3)", "2*V^(-3/2)", &KT3Params::default().with(8, 1.0 / 3.0), "3*x*y", (0.5, 2.0), (0.5, 2.0))?;
    let h5 = holt_case(
        "(x^2 - y^2)^(-2/3)",
        "6*V^(-3/2)",
        &KT3Params::unit(3).with(6, 1.0),
        "9*(x^2 - y^2)",
        (1.5, 2.5),
        (-0.5, 0.5),
    )?;
    ensure(h4 <= 1e-10 && h5 <= 1e-10, format!("Holt residuals {h4:.2e}, {h5:.2e}"))?;

    // Integrability for three-direction potentials with a4 = -a10.
    let toda_kt = KT3Params::unit(4).with(10, -1.0);
    let pot = Potential::plane(parse("2*exp(y/2) + exp((3/10)*(y + sqrt(3)*x)) + 3*exp(sqrt(3)*x - y)").unwrap()).unwrap();
    let pts = square(100, 1.0, 5);
    let mut integ = 0.0f64;
    for &(x, y) in &pts {
        integ = integ.max(residual_integrability(&toda_kt, &pot, x, y).map_err(|e| e.to_string())?.abs());
    }
    ensure(integ <= 1e-10, format!("integrability residual {integ:.2e}"))?;
    let cubic = Potential::plane(parse("x^3*y").unwrap()).unwrap();
    // With a4 alone only L111 survives and the condition collapses to V_xyy, which is
    // identically zero for x^3 y. The residual must track that oracle; the "nonzero"
    // expectation itself cannot be met and is reported below.
    let vxyy = cubic.v.diff(Var::X).diff(Var::Y).diff(Var::Y);
    let mut x3y = 0.0f64;
    for &(x, y) in &pts {
        let r = residual_integrability(&KT3Params::unit(4), &cubic, x, y).map_err(|e| e.to_string())?;
        ensure((r - vxyy.eval_xy(x, y).unwrap()).abs() <= 1e-12, "x^3 y residual differs from V_xyy")?;
        x3y = x3y.max(r.abs());
    }

    // Cyclic condition: Toda triple holds, an unequal triple does not.
    let ex = parse("exp(x)").unwrap();
    let mut cyc = 0.0f64;
    for &(x, y) in &square(100, 0.5, 6) {
        cyc = cyc.max(residual_cyclic([&ex, &ex, &ex], x, y).map_err(|e| e.to_string())?.abs());
    }
    let ex2 = parse("exp(2*x)").unwrap();
    let control = residual_cyclic([&ex, &ex2, &ex], 0.3, 0.2).unwrap().abs();
    ensure(cyc <= 1e-12 && control > 1e-3, format!("cyclic {cyc:.2e}, control {control:.2e}"))?;

    // Exponential family: the table-4 integral built from its parts.
    let inst = instantiate("E.Vs11", &Bindings::default()).unwrap();
    let (lam, k) = (inst.params["lam"], inst.params["k"]);
    let s = parse(&format!("({lam})^2*(x^2 + y^2)/4 + 2*{k}/(x^2 + y^2)")).unwrap().scale(1.0 / lam);
    let gen = SymGenParams::default().with(3, 1.0 / 3.0).with(6, -1.0 / 3.0);
    let cand = CandidateCFI::exp(gen, lam, [Expr::int(-1) * Expr::y() * &s, Expr::x() * &s]);
    let mut exp_res = 0.0f64;
    for (x, y) in pot_points(&inst.potential, 100, 8) {
        exp_res = exp_res.max(max_abs(residual_exp(&cand, &inst.potential, x, y).map_err(|e| e.to_string())?));
    }
    let target = inst.fi("Js11a").unwrap();
    let mut agree = 0.0f64;
    for st in inst.sample_states(100, 9).unwrap() {
        let a = fi_value(&cand, &inst.potential, &st).map_err(|e| e.to_string())?;
        let b = target.eval(&st, &inst.params).unwrap();
        agree = agree.max((a - b).abs() / b.abs().max(1.0));
    }
    ensure(exp_res <= 1e-10 && agree <= 1e-10, format!("exp residual {exp_res:.2e}, mismatch {agree:.2e}"))?;

    // Linear-in-time family: every table-3 time-dependent integral.
    let mut lin = 0.0f64;
    let mut n_lin = 0;
    for e in entries().iter().filter(|e| e.table == 3) {
        let inst = instantiate(&e.id, &Bindings::default()).unwrap();
        let j = inst.fi(&inst.rank_set[2]).unwrap().bind(&inst.params);
        let pts = pot_points(&inst.potential, 60, 10);
        let (cand, misfit) = decompose_lin_t(&j, &pts).map_err(|err| format!("{}: {err}", e.id))?;
        ensure(misfit <= 1e-9, format!("{}: decomposition misfit {misfit:.2e}", e.id))?;
        for &(x, y) in &pts {
            let r = max_abs(residual_lin_t(&cand, &inst.potential, x, y).map_err(|err| err.to_string())?);
            ensure(r <= 1e-9, format!("{}: lin_t residual {r:.2e}", e.id))?;
            lin = lin.max(r);
        }
        n_lin += 1;
    }
    ensure(n_lin == 7, format!("{n_lin} table-3 entries"))?;

    let summary = format!(
        "holt {:.1e}, integrability {integ:.1e}, cyclic {cyc:.1e}, exp {exp_res:.1e}, lin_t {lin:.1e} over {n_lin}",
        h4.max(h5)
    );
    if x3y > 0.0 {
        Ok(format!("{summary}, x^3 y integrability {x3y:.1e}"))
    } else {
        Err(format!("{summary}; {X3Y_RED}"))
    }
}

// 8 ---------------------------------------------------------------------------

fn random_poly(r: &mut ChaCha8Rng) -> Expr {
    let monos = [Expr::one(), Expr::x(), Expr::y(), Expr::x().powi(2), Expr::x() * Expr::y(), Expr::y().powi(2)];
    Expr::sum(monos.iter().map(|m| Expr::float(r.gen_range(-1.0..1.0)) * m).collect())
}

fn random_candidate(r: &mut ChaCha8Rng, i: usize) -> CandidateCFI {
    let mut a = [0.0; 10];
    a.iter_mut().for_each(|v| *v = r.gen_range(-1.0..1.0));
    let mut gen = SymGenParams::default();
    gen.b.iter_mut().for_each(|v| *v = r.gen_range(-1.0..1.0));
    let c: Vec<f64> = (0..6).map(|_| r.gen_range(-1.0..1.0)).collect();
    let b = [random_poly(r), random_poly(r)];
    match i % 4 {
        0 => CandidateCFI::aut(KT3Params { a }, b, r.gen_range(-1.0..1.0)),
        1 => CandidateCFI::aut_with_c(KT3Params { a }, KT2Params::from_slice(&c), b),
        2 => CandidateCFI::lin_t(gen, KT2Params::from_slice(&c), b, random_poly(r)),
        _ => CandidateCFI::exp(gen, r.gen_range(0.2..1.5), b),
    }
}

fn cross_validation() -> Outcome {
    let pot = Potential::plane(parse("x^2 + (1/2)*y^2 + (3/10)*x*y^3 - y").unwrap()).unwrap();
    let h = pot.hamiltonian();
    let mut r = rng(12);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let c = random_candidate(&mut r, i);
        let oracle = convective_derivative(&fi_expr(&c, &pot).map_err(|e| e.to_string())?, &h);
        for _ in 0..100 {
            let mut g = |lo: f64, hi: f64| r.gen_range(lo..hi);
            let st = Point::new(g(0.0, 1.0), g(-1.0, 1.0), g(-1.0, 1.0), g(-1.0, 1.0), g(-1.0, 1.0));
            let a = fi_total_derivative(&c, &pot, &st).map_err(|e| e.to_string())?;
            let b = oracle.eval(&st, &Default::default()).unwrap();
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    ensure(worst <= 1e-9, format!("mismatch {worst:.2e}"))?;
    Ok(format!("20 candidates x 100 states, worst mismatch {worst:.2e}"))
}

// 9 ---------------------------------------------------------------------------

fn reductions() -> Outcome {
    let p = |b: Bindings| b.param("k1", 1.3).param("k2", 0.7).param("k3", 0.4);
    let v7 = instantiate("V7", &p(Bindings::default()).param("a2", 1.0).param("a5", 0.0)).unwrap();
    let s8 = instantiate("Vs8", &p(Bindings::default())).unwrap();
    let s10 = instantiate("Vs10", &Bindings::default().param("c1", 0.0).param("c0", 0.8)).unwrap();
    let s6 = instantiate("Vs6", &Bindings::default().param("c0", 0.8)).unwrap();
    let swapped = s10.potential.v.subst_vars(&[(Var::X, Expr::y()), (Var::Y, Expr::x())]);

    let mut r = rng(2024);
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let (vx, vy) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let s = Point::new(0.0, r.gen_range(-0.5..0.5), r.gen_range(1.0..2.0), vx, vy);
        let ev = |e: &Expr, pr| e.eval(&s, pr).unwrap();
        worst[0] = worst[0].max((ev(&v7.potential.v, &v7.params) - ev(&s8.potential.v, &s8.params)).abs());
        let a = ev(v7.fi("J7").unwrap(), &v7.params);
        let b = ev(s8.fi("Js83").unwrap(), &s8.params);
        worst[1] = worst[1].max((a - b).abs() / a.abs().max(1.0));
        let q = Point::new(0.0, r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), 0.0, 0.0);
        let c = swapped.eval(&q, &s10.params).unwrap() - s6.potential.v.eval(&q, &s6.params).unwrap();
        worst[2] = worst[2].max(c.abs());
    }
    ensure(worst.iter().all(|w| *w <= 1e-12), format!("{worst:?}"))?;
    Ok(format!("V7 vs Vs8 {:.1e}, J7 vs Js83 {:.1e}, Vs10 vs Vs6 {:.1e}", worst[0], worst[1], worst[2]))
}

// 10 --------------------------------------------------------------------------

fn determinism(first: &[EntryReport]) -> Outcome {
    let runs = CLOSED_FORM.iter().map(|id| (*id, None)).chain(IMPLICIT);
    let mut second = Vec::new();
    for (id, preset) in runs {
        second.push(check_entry(id, &bindings(preset), &Protocol::default()).map_err(|e| e.to_string())?);
    }
    let a = serde_json::to_string(first).unwrap();
    let b = serde_json::to_string(&second).unwrap();
    ensure(a == b, "catalog reports differ")?;

    let pot = box_pot("x^2 + 4*y^2 + 1/x^2", (0.5, 2.0), (-1.0, 1.0));
    let cfg = AnsatzConfig { degree: 1, dictionary: potential_dictionary(&pot), seed: 7, ..Default::default() };
    let s1 = serde_json::to_string(&search_cfi(&pot, &cfg).unwrap().0).unwrap();
    let s2 = serde_json::to_string(&search_cfi(&pot, &cfg).unwrap().0).unwrap();
    ensure(s1 == s2, "search reports differ")?;
    Ok(format!("{} bytes of catalog JSON and {} bytes of search JSON identical", a.len(), s1.len()))
}

#[test]
fn acceptance() {
    let mut reports = Vec::new();
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut run = |n: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        results.push((n, out, t.elapsed().as_secs_f64()));
    };
    run(1, &mut kt_dimensions);
    run(2, &mut killing_identities);
    run(3, &mut || drift_suite(&mut reports));
    run(4, &mut || implicit_entries(&mut reports));
    run(5, &mut classification_ranks);
    run(6, &mut search_recovery);
    run(7, &mut condition_residuals);
    run(8, &mut cross_validation);
    run(9, &mut reductions);
    run(10, &mut || determinism(&reports));

    let mut out = std::io::stdout().lock();
    for (n, res, secs) in &results {
        let (tag, msg) = match res {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        writeln!(out, "criterion {n:>2}: {tag}  {msg}  [{secs:.2}s]").unwrap();
    }
    let unexpected: Vec<usize> = results
        .iter()
        .filter(|(n, r, _)| match r {
            Ok(_) => false,
            Err(m) => !(*n == 7 && m.ends_with(X3Y_RED)),
        })
        .map(|r| r.0)
        .collect();
    assert!(unexpected.is_empty(), "failing criteria: {unexpected:?}");
}
