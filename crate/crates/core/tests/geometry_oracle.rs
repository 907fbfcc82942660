use cfi_core::expr::{as_polynomial, Expr};
use cfi_core::geometry::*;
use cfi_core::linalg::{nullspace_exact, rank_exact};
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Unknowns: coefficient of x^i y^j (i+j <= deg) in each of the m+1 independent
/// components of an order-m symmetric tensor. Returns the Killing equations as rows.
fn killing_system(m: usize, deg: usize) -> (Vec<Vec<BigRational>>, Vec<(usize, usize, usize)>) {
    let mut unknowns = Vec::new();
    for comp in 0..=m {
        for i in 0..=deg {
            for j in 0..=deg - i {
                unknowns.push((comp, i, j));
            }
        }
    }
    let idx = |c: usize, i: usize, j: usize| unknowns.iter().position(|&u| u == (c, i, j));
    let mut rows = Vec::new();
    // Component with n indices equal to 2 of the symmetrized derivative:
    // (m+1-n) T_n,x + n T_{n-1},y  (overall 1/(m+1) dropped).
    for n in 0..=m + 1 {
        for i in 0..deg {
            for j in 0..deg - i {
                let mut row = vec![q(0); unknowns.len()];
                if n <= m {
                    if let Some(k) = idx(n, i + 1, j) {
                        row[k] += q(((m + 1 - n) * (i + 1)) as i64);
                    }
                }
                if n >= 1 {
                    if let Some(k) = idx(n - 1, i, j + 1) {
                        row[k] += q((n * (j + 1)) as i64);
                    }
                }
                if row.iter().any(|v| !v.is_zero()) {
                    rows.push(row);
                }
            }
        }
    }
    (rows, unknowns)
}

fn kernel_dim(m: usize, deg: usize) -> usize {
    let (rows, unknowns) = killing_system(m, deg);
    unknowns.len() - rank_exact(&rows, unknowns.len())
}

#[test]
fn killing_equations_have_six_and_ten_solutions() {
    // Degree caps above the tensor order show no extra polynomial solutions appear.
    assert_eq!(kernel_dim(1, 3), 3);
    assert_eq!(kernel_dim(2, 4), 6);
    assert_eq!(kernel_dim(3, 5), 10);
    assert_eq!(kt_space_dimension(2).unwrap(), kernel_dim(2, 4));
    assert_eq!(kt_space_dimension(3).unwrap(), kernel_dim(3, 5));
}

fn coeff_vector(comps: &[&Expr], unknowns: &[(usize, usize, usize)]) -> Vec<BigRational> {
    let mut v = vec![q(0); unknowns.len()];
    for (c, e) in comps.iter().enumerate() {
        for (mono, coef) in as_polynomial(e).unwrap() {
            let k = unknowns
                .iter()
                .position(|&u| u == (c, mono.i as usize, mono.j as usize))
                .expect("degree within cap");
            v[k] = coef;
        }
    }
    v
}

fn rank_with(rows: &[Vec<BigRational>], ncols: usize) -> usize {
    rank_exact(rows, ncols)
}

#[test]
fn table_families_span_the_killing_kernels() {
    let (rows2, u2) = killing_system(2, 2);
    let ker2 = nullspace_exact(&rows2, u2.len());
    let mut fam2 = Vec::new();
    for k in 0..6 {
        let mut v = [0.0; 6];
        v[k] = 1.0;
        let t = kt2(&KT2Params::from_slice(&v));
        fam2.push(coeff_vector(&t.components(), &u2));
    }
    assert_eq!(rank_with(&fam2, u2.len()), 6);
    let mut joint = ker2.clone();
    joint.extend(fam2);
    assert_eq!(rank_with(&joint, u2.len()), 6);

    let (rows3, u3) = killing_system(3, 3);
    let ker3 = nullspace_exact(&rows3, u3.len());
    let fam3: Vec<_> = (1..=10).map(|k| coeff_vector(&kt3(&KT3Params::unit(k)).components(), &u3)).collect();
    let mut joint = ker3;
    joint.extend(fam3);
    assert_eq!(rank_with(&joint, u3.len()), 10);
}

#[test]
fn killing_vector_products_span_kt2() {
    let (_, u2) = killing_system(2, 2);
    let kvs: Vec<[Expr; 2]> = (0..3)
        .map(|k| {
            let mut b = [0.0; 3];
            b[k] = 1.0;
            kv_field(&KVParams { b })
        })
        .collect();
    let mut prods = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            let (u, v) = (&kvs[i], &kvs[j]);
            let half = Expr::frac(1, 2);
            let t11 = &u[0] * &v[0];
            let t12 = &half * (&u[0] * &v[1] + &u[1] * &v[0]);
            let t22 = &u[1] * &v[1];
            prods.push(coeff_vector(&[&t11, &t12, &t22], &u2));
        }
    }
    assert_eq!(rank_with(&prods, u2.len()), 6);
    let mut joint = prods;
    for k in 0..6 {
        let mut v = [0.0; 6];
        v[k] = 1.0;
        joint.push(coeff_vector(&kt2(&KT2Params::from_slice(&v)).components(), &u2));
    }
    assert_eq!(rank_with(&joint, u2.len()), 6);
}

#[test]
fn reducible_kts_are_the_a1_free_subfamily() {
    let (_, u3) = killing_system(3, 3);
    let gen: Vec<_> = (1..=15)
        .map(|k| coeff_vector(&sym_derivative(&sym_generator(&SymGenParams::unit(k))).components(), &u3))
        .collect();
    let a1_free: Vec<_> = (2..=10).map(|k| coeff_vector(&kt3(&KT3Params::unit(k)).components(), &u3)).collect();
    assert_eq!(rank_with(&gen, u3.len()), 9);
    assert_eq!(rank_with(&a1_free, u3.len()), 9);
    let mut joint = gen;
    joint.extend(a1_free);
    assert_eq!(rank_with(&joint, u3.len()), 9);
}

proptest! {
    #[test]
    fn generated_kt_matches_kt3_reading(b in prop::array::uniform15(-3.0f64..3.0),
                                        pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 50)) {
        let p = SymGenParams { b };
        let d = sym_derivative(&sym_generator(&p));
        let t = kt3(&generated_kt3(&p));
        for (x, y) in pts {
            for (a, c) in d.components().iter().zip(t.components()) {
                let (va, vc) = (a.eval_xy(x, y).unwrap(), c.eval_xy(x, y).unwrap());
                prop_assert!((va - vc).abs() <= 1e-12 * va.abs().max(1.0));
            }
        }
    }
}
