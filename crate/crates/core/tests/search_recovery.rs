use cfi_core::conditions::{CandidateCFI, Domain, Family, Potential};
use cfi_core::expr::{parse, Expr, Point};
use cfi_core::geometry::{kt3, KT3Params};
use cfi_core::search::*;
use num_rational::BigRational;
use num_traits::FromPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn box_pot(v: &str, x: (f64, f64), y: (f64, f64)) -> Potential {
    Potential::new(parse(v).unwrap(), Domain::Rect { x, y }, vec![]).unwrap()
}

fn grid(p: &Potential) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    (0..150).map(|_| p.sample_point(&mut rng).unwrap()).collect()
}

/// Cubic part given as its four components, fitted onto the a1..a10 family.
fn cubic(comps: [&str; 4], p: &Potential) -> KT3Params {
    let e: Vec<Expr> = comps.iter().map(|s| parse(s).unwrap()).collect();
    fit_kt3([&e[0], &e[1], &e[2], &e[3]], &grid(p))
}

fn best_match(rep: &SearchReport, reference: &[f64]) -> f64 {
    rep.candidates
        .iter()
        .filter(|c| !c.trivial)
        .map(|c| cosine_distance(&c.vector, reference))
        .fold(f64::INFINITY, f64::min)
}

fn reference_vector(layout: &Layout, c: &CandidateCFI, p: &Potential) -> Vec<f64> {
    let (mut u, fit) = layout.encode(c, &grid(p)).unwrap();
    assert!(fit < 1e-10, "reference not representable: {fit}");
    normalize(&mut u);
    u
}

#[test]
fn separable_holt_potential_recovers_its_cubic_integral() {
    let pot = box_pot("x^2 + 4*y^2 + 1/x^2", (0.5, 2.0), (-1.0, 1.0));
    let cfg = AnsatzConfig { degree: 1, dictionary: potential_dictionary(&pot), ..Default::default() };
    let t = std::time::Instant::now();
    let (rep, layout) = search_cfi(&pot, &cfg).unwrap();
    assert!(t.elapsed().as_secs_f64() < 5.0);
    // vx^2 vy + 8xy vx - 2(x^2 - 1/x^2) vy
    let l = cubic(["0", "1/3", "0", "0"], &pot);
    let b = [parse("8*x*y").unwrap(), parse("-2*x^2 + 2/x^2").unwrap()];
    let reference = reference_vector(&layout, &CandidateCFI::aut(l, b, 0.0), &pot);
    assert_eq!(rep.candidates.iter().filter(|c| !c.trivial).count(), 1);
    assert!(best_match(&rep, &reference) <= 1e-8);
}

#[test]
fn smorodinsky_type_potential_recovers_its_cubic_integral() {
    let pot = box_pot("x^2 + y^2 + 1/x^2 + 1/y^2", (0.5, 2.0), (0.5, 2.0));
    let cfg = AnsatzConfig { degree: 2, dictionary: potential_dictionary(&pot), ..Default::default() };
    let t = std::time::Instant::now();
    let (rep, layout) = search_cfi(&pot, &cfg).unwrap();
    assert!(t.elapsed().as_secs_f64() < 5.0);
    // (y vx - x vy)(vx vy + 2xy) + 2 y vy / x^2 - 2 x vx / y^2
    let l = cubic(["0", "y/3", "-x/3", "0"], &pot);
    let b = [parse("2*x*y^2 - 2*x/y^2").unwrap(), parse("-2*x^2*y + 2*y/x^2").unwrap()];
    let reference = reference_vector(&layout, &CandidateCFI::aut(l, b, 0.0), &pot);
    assert!(best_match(&rep, &reference) <= 1e-8, "{rep:#?}");
}

/// Independent count for free motion: evaluate dJ/dt = J_t + vx J_x + vy J_y of each of
/// the 17 basis integrals at integer points, where every value is an exact integer,
/// and take the exact rank.
fn free_motion_oracle() -> usize {
    let mut cols: Vec<Expr> = Vec::new();
    let (vx, vy) = (Expr::vx(), Expr::vy());
    for k in 1..=10 {
        let t = kt3(&KT3Params::unit(k));
        cols.push(
            &t.t111 * vx.powi(3)
                + Expr::int(3) * &t.t112 * vx.powi(2) * &vy
                + Expr::int(3) * &t.t122 * &vx * vy.powi(2)
                + &t.t222 * vy.powi(3),
        );
    }
    for v in [&vx, &vy] {
        for m in [Expr::one(), Expr::x(), Expr::y()] {
            cols.push(m * v);
        }
    }
    cols.push(Expr::t());
    let ddt: Vec<Expr> = cols
        .iter()
        .map(|j| j.diff(cfi_core::expr::Var::T) + &vx * j.diff(cfi_core::expr::Var::X) + &vy * j.diff(cfi_core::expr::Var::Y))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<BigRational>> = (0..80)
        .map(|_| {
            let mut g = || rng.gen_range(-4i32..=4) as f64;
            let p = Point::new(g(), g(), g(), g(), g());
            ddt.iter()
                .map(|e| {
                    let v = e.eval(&p, &Default::default()).unwrap();
                    assert_eq!(v.fract(), 0.0);
                    BigRational::from_f64(v).unwrap()
                })
                .collect()
        })
        .collect();
    17 - cfi_core::linalg::rank_exact(&rows, 17)
}

#[test]
fn free_motion_kernel_has_dimension_thirteen() {
    assert_eq!(free_motion_oracle(), 13);
    let pot = Potential::plane(Expr::zero()).unwrap();
    for mode in [Mode::Exact, Mode::Collocation] {
        let cfg = AnsatzConfig { degree: 1, mode, ..Default::default() };
        let (rep, _) = search_cfi(&pot, &cfg).unwrap();
        assert_eq!(rep.unknowns, 17);
        assert_eq!(rep.kernel_dim, 13, "{mode:?}");
        // Three Killing vectors carry no cubic part and are flagged.
        assert_eq!(rep.candidates.iter().filter(|c| c.trivial).count(), 3);
    }
}

#[test]
fn toda_kernel_contains_the_known_integral() {
    let e = ["exp(y + sqrt(3)*x)", "exp(y - sqrt(3)*x)", "exp(-2*y)"];
    let pot = box_pot(&e.join(" + "), (-1.0, 1.0), (-1.0, 1.0));
    let mut dict = vec![Expr::one()];
    dict.extend(e.iter().map(|s| parse(s).unwrap()));
    let cfg = AnsatzConfig { degree: 0, dictionary: dict, ..Default::default() };
    let t = std::time::Instant::now();
    let (rep, layout) = search_cfi(&pot, &cfg).unwrap();
    assert!(t.elapsed().as_secs_f64() < 5.0);
    let b = [
        parse(&format!("3*({} + {} - 2*{})", e[0], e[1], e[2])).unwrap(),
        parse(&format!("-3*sqrt(3)*({} - {})", e[0], e[1])).unwrap(),
    ];
    let c = CandidateCFI::aut(KT3Params::unit(4).with(10, -1.0), b, 0.0);
    let (u, fit) = layout.encode(&c, &grid(&pot)).unwrap();
    assert!(fit < 1e-10);
    let (basis, _) = nullspace(&assemble(&pot, &cfg).unwrap().1, cfg.tau).unwrap();
    assert_eq!(basis.ncols(), rep.kernel_dim);
    assert!(distance_to_span(&basis, &u) <= 1e-8);
}

#[test]
fn exact_mode_anisotropic_oscillator() {
    let pot = Potential::plane(parse("9*x^2 + y^2").unwrap()).unwrap();
    let cfg = AnsatzConfig { degree: 3, mode: Mode::Exact, ..Default::default() };
    let (layout, sys) = assemble(&pot, &cfg).unwrap();
    let (basis, _) = nullspace(&sys, cfg.tau).unwrap();
    // (x vy - y vx) vy^2 + (2/3) y^3 vx - 6 x y^2 vy
    let l = cubic(["0", "0", "-y/3", "x"], &pot);
    let b = [parse("(2/3)*y^3").unwrap(), parse("-6*x*y^2").unwrap()];
    let (u, fit) = layout.encode(&CandidateCFI::aut(l, b, 0.0), &grid(&pot)).unwrap();
    assert!(fit < 1e-10);
    assert!(distance_to_span(&basis, &u) <= 1e-10);

    // Collocation agrees on the kernel.
    let coll = AnsatzConfig { mode: Mode::Collocation, ..cfg.clone() };
    let (_, sys2) = assemble(&pot, &coll).unwrap();
    let (basis2, _) = nullspace(&sys2, coll.tau).unwrap();
    assert_eq!(basis.ncols(), basis2.ncols());
    for j in 0..basis.ncols() {
        let col: Vec<f64> = basis.column(j).iter().copied().collect();
        assert!(distance_to_span(&basis2, &col) <= 1e-6);
    }
}

#[test]
fn larger_dictionary_never_shrinks_the_kernel() {
    let pot = box_pot("x^2 + 4*y^2 + 1/x^2", (0.5, 2.0), (-1.0, 1.0));
    let small = AnsatzConfig { degree: 1, ..Default::default() };
    let big = AnsatzConfig { degree: 1, dictionary: potential_dictionary(&pot), ..Default::default() };
    let (a, _) = search_cfi(&pot, &small).unwrap();
    let (b, _) = search_cfi(&pot, &big).unwrap();
    assert!(b.kernel_dim >= a.kernel_dim);
}

#[test]
fn reports_are_deterministic() {
    let pot = box_pot("x^2 + 4*y^2 + 1/x^2", (0.5, 2.0), (-1.0, 1.0));
    let cfg = AnsatzConfig { degree: 1, dictionary: potential_dictionary(&pot), seed: 7, ..Default::default() };
    let a = serde_json::to_string(&search_cfi(&pot, &cfg).unwrap().0).unwrap();
    let b = serde_json::to_string(&search_cfi(&pot, &cfg).unwrap().0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exp_family_search_on_free_motion() {
    // Whatever the kernel holds must pass the drift oracle.
    let pot = Potential::plane(Expr::zero()).unwrap();
    let cfg = AnsatzConfig { family: Family::Exp, degree: 1, lambda: Some(1.0), ..Default::default() };
    let (rep, _) = search_cfi(&pot, &cfg).unwrap();
    for c in &rep.candidates {
        assert!(c.drift_max <= DRIFT_BOUND);
    }
}
