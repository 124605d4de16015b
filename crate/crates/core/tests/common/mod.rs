#![allow(dead_code)]

use waldiv::matrix::ScalarMatrix;
use waldiv::poly::{parse_poly, parse_scalar, MultiPoly, Scalar};
use waldiv::rates::Covariance;
use waldiv::restriction::RestrictionSystem;

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn poly(text: &str, vars: &[&str]) -> MultiPoly {
    parse_poly(text, &names(vars)).unwrap()
}

pub fn system(vars: &[&str], g: &[&str], bar: &[&str]) -> RestrictionSystem {
    let n = names(vars);
    let g = g.iter().map(|t| parse_poly(t, &n).unwrap()).collect();
    let bar = bar.iter().map(|t| parse_scalar(t).unwrap()).collect();
    RestrictionSystem::new(n, g, bar).unwrap()
}

pub const EX1_VARS: [&str; 4] = ["x", "y", "z", "w"];

pub fn example1() -> RestrictionSystem {
    system(&EX1_VARS, &["x*y", "x*w", "y*z"], &["0", "0", "1", "1"])
}

pub fn scalar_matrix(rows: &[&[&str]]) -> ScalarMatrix {
    ScalarMatrix::from_rows(
        rows.iter()
            .map(|r| r.iter().map(|t| parse_scalar(t).unwrap()).collect())
            .collect(),
    )
    .unwrap()
}

/// The covariance with `sqrt(0.98)` entered exactly as `7/10*sqrt(2)`.
/// It is singular: `(7·sqrt(2), −10, 1, 1)` spans its kernel.
pub fn example3_u() -> Covariance {
    Covariance::semidefinite(scalar_matrix(&[
        &["1", "7/10*sqrt(2)", "0", "0"],
        &["7/10*sqrt(2)", "1", "0.1", "0.1"],
        &["0", "0.1", "1", "0"],
        &["0", "0.1", "0", "1"],
    ]))
    .unwrap()
}

/// Exponent vector in `(x, y, z, w)` order paired with the printed decimal coefficient.
pub fn example3_printed_a3() -> Vec<([u32; 4], f64)> {
    vec![
        ([2, 2, 0, 2], 0.01),
        ([3, 2, 0, 1], -0.19799),
        ([2, 3, 0, 1], -0.2),
        ([2, 2, 1, 1], -0.02),
        ([4, 2, 0, 0], 0.98),
        ([3, 3, 0, 0], 1.9799),
        ([3, 2, 1, 0], 0.19799),
        ([2, 4, 0, 0], 1.0),
        ([2, 3, 1, 0], 0.2),
        ([2, 2, 2, 0], 0.01),
    ]
}

pub const EXAMPLE3_A3_IDENTITY: &str = "w^2*x^2*y^2 + 2*w*x^2*y^2 + x^4*y^2 + x^2*y^4 + x^2*y^2*z^2 + 2*x^2*y^2*z + 2*x^2*y^2";

pub fn scalar(text: &str) -> Scalar {
    parse_scalar(text).unwrap()
}

/// Median of chi-square(q) by bisection on the regularized lower incomplete gamma function.
pub fn chi_square_median_oracle(q: usize) -> f64 {
    let k = q as f64 / 2.0;
    let (mut lo, mut hi) = (0.0f64, 10.0 * q as f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if statrs::function::gamma::gamma_lr(k, mid / 2.0) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `q` random restrictions in `p` variables with linear and quadratic terms and no
/// constant, so the null holds at the origin.
pub fn random_degree2_system<R: rand::Rng + ?Sized>(p: usize, q: usize, rng: &mut R) -> RestrictionSystem {
    use waldiv::poly::Monomial;
    let vars: Vec<String> = (0..p).map(|i| format!("t{i}")).collect();
    let mut exps: Vec<Vec<u32>> = Vec::new();
    for i in 0..p {
        let mut e = vec![0; p];
        e[i] = 1;
        exps.push(e);
        for j in i..p {
            let mut e = vec![0; p];
            e[i] += 1;
            e[j] += 1;
            exps.push(e);
        }
    }
    let g = (0..q)
        .map(|_| {
            let mut terms = Vec::new();
            for e in &exps {
                if rng.random_bool(0.5) {
                    terms.push((Monomial::new(e.clone()), Scalar::from_frac(rng.random_range(-5..=5), rng.random_range(1..=4))));
                }
            }
            MultiPoly::from_terms(p, terms)
        })
        .collect();
    RestrictionSystem::new(vars, g, vec![Scalar::zero(); p]).unwrap()
}
