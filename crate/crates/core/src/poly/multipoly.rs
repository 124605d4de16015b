use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::monomial::Monomial;
use super::scalar::{format_rational, join_ext, Scalar};
use super::{Degree, PolyError};

/// Sparse polynomial in `nvars` variables with exact coefficients.
///
/// Terms are kept in graded-lexicographic order and zero coefficients are
/// never stored, so structural equality is polynomial equality and the
/// first term is always of lowest total degree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiPoly {
    nvars: usize,
    terms: BTreeMap<Monomial, Scalar>,
}

/// `original = low + rest`, with `low` homogeneous of degree `low_degree` and
/// every term of `rest` of strictly higher degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomogeneousDecomposition {
    pub low: MultiPoly,
    pub rest: MultiPoly,
    pub low_degree: Degree,
}

impl MultiPoly {
    pub fn zero(nvars: usize) -> Self {
        MultiPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Scalar) -> Self {
        let mut p = MultiPoly::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        MultiPoly::constant(nvars, Scalar::one())
    }

    /// The coordinate polynomial `x_index`.
    pub fn var(nvars: usize, index: usize) -> Self {
        let mut p = MultiPoly::zero(nvars);
        p.add_term(Monomial::var(nvars, index), Scalar::one());
        p
    }

    pub fn from_terms<I>(nvars: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, Scalar)>,
    {
        let mut p = MultiPoly::zero(nvars);
        for (m, c) in terms {
            assert_eq!(m.nvars(), nvars, "monomial length must equal nvars");
            p.add_term(m, c);
        }
        p
    }

    /// Adds `c·m` in place, dropping the term if it cancels.
    pub(crate) fn add_term(&mut self, m: Monomial, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = &*existing + &c;
                if sum.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_else(Scalar::zero)
    }

    /// Constant term.
    pub fn constant_term(&self) -> Scalar {
        self.coeff(&Monomial::one(self.nvars))
    }

    /// Radicand shared by all coefficients (`0` when all are rational).
    pub fn ext(&self) -> u64 {
        self.terms.values().map(Scalar::ext).find(|&d| d != 0).unwrap_or(0)
    }

    pub fn total_degree(&self) -> Degree {
        match self.terms.keys().map(Monomial::degree).max() {
            Some(d) => Degree::Finite(d),
            None => Degree::Infinite,
        }
    }

    pub fn lowest_degree(&self) -> Degree {
        match self.terms.keys().next() {
            Some(m) => Degree::Finite(m.degree()),
            None => Degree::Infinite,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.lowest_degree() == self.total_degree() || self.is_zero()
    }

    fn check_compatible(&self, other: &MultiPoly) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::VarCountMismatch {
                left: self.nvars,
                right: other.nvars,
            });
        }
        join_ext(self.ext(), other.ext()).map(|_| ())
    }

    pub fn try_add(&self, other: &MultiPoly) -> Result<MultiPoly, PolyError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &MultiPoly) -> Result<MultiPoly, PolyError> {
        self.try_add(&-other)
    }

    pub fn try_mul(&self, other: &MultiPoly) -> Result<MultiPoly, PolyError> {
        self.check_compatible(other)?;
        let mut out = MultiPoly::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Scalar) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero(self.nvars);
        }
        let mut out = MultiPoly::zero(self.nvars);
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn pow(&self, n: u32) -> MultiPoly {
        let mut result = MultiPoly::one(self.nvars);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn partial_derivative(&self, var: usize) -> Result<MultiPoly, PolyError> {
        if var >= self.nvars {
            return Err(PolyError::VarIndexOutOfRange {
                index: var,
                nvars: self.nvars,
            });
        }
        let mut out = MultiPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.exponents()[var];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.exponents_mut()[var] = e - 1;
            out.add_term(dm, c * &Scalar::from_int(e as i64));
        }
        Ok(out)
    }

    /// `q(u) = p(θ̄ + u)`, expanded exactly.
    pub fn shift_origin(&self, theta_bar: &[Scalar]) -> Result<MultiPoly, PolyError> {
        if theta_bar.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: theta_bar.len(),
            });
        }
        let shifted_vars: Vec<MultiPoly> = theta_bar
            .iter()
            .enumerate()
            .map(|(k, c)| &MultiPoly::var(self.nvars, k) + &MultiPoly::constant(self.nvars, c.clone()))
            .collect();
        // powers[k][e] = (θ̄_k + u_k)^e, built lazily
        let mut powers: Vec<Vec<MultiPoly>> = vec![vec![MultiPoly::one(self.nvars)]; self.nvars];
        let mut out = MultiPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut term = MultiPoly::constant(self.nvars, c.clone());
            for (k, &e) in m.exponents().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[k].len() <= e as usize {
                    let next = powers[k].last().unwrap() * &shifted_vars[k];
                    powers[k].push(next);
                }
                term = &term * &powers[k][e as usize];
            }
            for (tm, tc) in term.terms {
                out.add_term(tm, tc);
            }
        }
        Ok(out)
    }

    pub fn homogeneous_component(&self, degree: u32) -> MultiPoly {
        MultiPoly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == degree)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn lowest_homogeneous_part(&self) -> HomogeneousDecomposition {
        match self.lowest_degree() {
            Degree::Infinite => HomogeneousDecomposition {
                low: MultiPoly::zero(self.nvars),
                rest: MultiPoly::zero(self.nvars),
                low_degree: Degree::Infinite,
            },
            Degree::Finite(d) => {
                let low = self.homogeneous_component(d);
                let rest = MultiPoly {
                    nvars: self.nvars,
                    terms: self
                        .terms
                        .iter()
                        .filter(|(m, _)| m.degree() != d)
                        .map(|(m, c)| (m.clone(), c.clone()))
                        .collect(),
                };
                HomogeneousDecomposition {
                    low,
                    rest,
                    low_degree: Degree::Finite(d),
                }
            }
        }
    }

    /// Exact value at a point of scalars.
    pub fn evaluate(&self, point: &[Scalar]) -> Result<Scalar, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: point.len(),
            });
        }
        let mut acc = Scalar::zero();
        for (m, c) in &self.terms {
            let mut v = c.clone();
            for (x, &e) in point.iter().zip(m.exponents()) {
                for _ in 0..e {
                    v = v.try_mul(x)?;
                }
            }
            acc = acc.try_add(&v)?;
        }
        Ok(acc)
    }

    /// Floating value, summing terms in ascending graded order.
    pub fn evaluate_f64(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: point.len(),
            });
        }
        Ok(FloatPoly::from_poly(self).eval(point))
    }

    /// Substitutes `x ↦ t·x` with `t` appended as a new last variable.
    pub fn graded_by_new_var(&self) -> MultiPoly {
        let mut out = MultiPoly::zero(self.nvars + 1);
        for (m, c) in &self.terms {
            out.add_term(m.with_trailing(m.degree()), c.clone());
        }
        out
    }

    /// Same polynomial viewed in `nvars` variables, padding with unused ones.
    pub fn extend_vars(&self, nvars: usize) -> MultiPoly {
        assert!(nvars >= self.nvars);
        let mut out = MultiPoly::zero(nvars);
        for (m, c) in &self.terms {
            let mut e = m.exponents().to_vec();
            e.resize(nvars, 0);
            out.add_term(Monomial::new(e), c.clone());
        }
        out
    }

    /// Divides by `var^power`; `None` if some term has a smaller exponent.
    pub(crate) fn divide_by_var_power(&self, var: usize, power: u32) -> Option<MultiPoly> {
        let mut out = MultiPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut m = m.clone();
            let e = m.exponents()[var];
            if e < power {
                return None;
            }
            m.exponents_mut()[var] = e - power;
            out.add_term(m, c.clone());
        }
        Some(out)
    }

    /// Smallest exponent of `var` over all terms.
    pub fn min_var_degree(&self, var: usize) -> Degree {
        match self.terms.keys().map(|m| m.exponents()[var]).min() {
            Some(e) => Degree::Finite(e),
            None => Degree::Infinite,
        }
    }

    /// Text in the input grammar, using `names` for the variables.
    pub fn display_with(&self, names: &[String]) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (m, c) in &self.terms {
            let parts = [
                (c.rational_part().clone(), None),
                (c.surd_part().clone(), Some(c.ext())),
            ];
            for (coef, surd) in parts {
                if coef.is_zero() {
                    continue;
                }
                let negative = coef.is_negative();
                if out.is_empty() {
                    if negative {
                        out.push('-');
                    }
                } else {
                    out.push_str(if negative { " - " } else { " + " });
                }
                out.push_str(&format_term(&coef.abs(), surd, &m.display_with(names)));
            }
        }
        out
    }
}

fn format_term(coef: &BigRational, surd: Option<u64>, mono: &str) -> String {
    let unit = coef == &BigRational::from_integer(1.into());
    let mut pieces: Vec<String> = Vec::new();
    match surd {
        Some(d) => {
            if !unit {
                pieces.push(format_rational(coef));
            }
            pieces.push(format!("sqrt({d})"));
        }
        None => {
            if !unit || mono.is_empty() {
                pieces.push(format_rational(coef));
            }
        }
    }
    if !mono.is_empty() {
        pieces.push(mono.to_string());
    }
    pieces.join("*")
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_with(&[]))
    }
}

/// A polynomial with coefficients rounded to `f64` for repeated numeric evaluation.
#[derive(Clone, Debug)]
pub struct FloatPoly {
    nvars: usize,
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl FloatPoly {
    pub fn from_poly(p: &MultiPoly) -> Self {
        let terms = p
            .terms()
            .map(|(m, c)| {
                let powers = m
                    .exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(k, &e)| (k, e as i32))
                    .collect();
                (c.to_f64(), powers)
            })
            .collect();
        FloatPoly {
            nvars: p.nvars(),
            terms,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        debug_assert_eq!(point.len(), self.nvars);
        self.terms
            .iter()
            .map(|(c, powers)| powers.iter().fold(*c, |acc, &(k, e)| acc * point[k].powi(e)))
            .sum()
    }
}

impl Add<&MultiPoly> for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        self.try_add(rhs).expect("incompatible polynomials")
    }
}

impl Sub<&MultiPoly> for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        self.try_sub(rhs).expect("incompatible polynomials")
    }
}

impl Mul<&MultiPoly> for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        self.try_mul(rhs).expect("incompatible polynomials")
    }
}

impl Add for MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: MultiPoly) -> MultiPoly {
        &self + &rhs
    }
}

impl Sub for MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: MultiPoly) -> MultiPoly {
        &self - &rhs
    }
}

impl Mul for MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: MultiPoly) -> MultiPoly {
        &self * &rhs
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn p(text: &str, vars: &[&str]) -> MultiPoly {
        parse_poly(text, &names(vars)).unwrap()
    }

    const XYZW: [&str; 4] = ["x", "y", "z", "w"];

    #[test]
    fn add_examples() {
        let xy = p("x*y", &["x", "y"]);
        assert!((&xy + &-&xy).is_zero());
        assert_eq!(&p("x^2", &["x", "y"]) + &p("x^2 + y", &["x", "y"]), p("2*x^2 + y", &["x", "y"]));
        let a = p("x + 7/10*sqrt(2)*y", &["x", "y"]);
        let b = p("x - 7/10*sqrt(2)*y", &["x", "y"]);
        assert_eq!(&a + &b, p("2*x", &["x", "y"]));
    }

    #[test]
    fn mul_examples() {
        assert_eq!(&p("x", &["x", "y"]) * &p("y", &["x", "y"]), p("x*y", &["x", "y"]));
        assert_eq!(&p("1 + w", &XYZW) * &p("x", &XYZW), p("x + w*x", &XYZW));
        let s = p("7/10*sqrt(2)", &["x"]);
        assert_eq!(&s * &s, p("0.98", &["x"]));
        assert_eq!(&s * &s, MultiPoly::constant(1, Scalar::from_frac(49, 50)));
    }

    #[test]
    fn mixed_extensions_error() {
        let a = p("sqrt(2)*x", &["x"]);
        let b = p("sqrt(3)*x", &["x"]);
        assert!(matches!(a.try_add(&b), Err(PolyError::ExtensionMismatch { .. })));
        assert!(matches!(
            a.try_mul(&MultiPoly::zero(2)),
            Err(PolyError::VarCountMismatch { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        let vars = ["x", "y", "z", "w"];
        assert_eq!(p("x*y", &vars).partial_derivative(0).unwrap(), p("y", &vars));
        assert!(p("5", &vars).partial_derivative(0).unwrap().is_zero());
        let q = p("x^2*y^3", &["x", "y"]);
        assert_eq!(q.partial_derivative(1).unwrap(), p("3*x^2*y^2", &["x", "y"]));
        assert!(matches!(
            q.partial_derivative(2),
            Err(PolyError::VarIndexOutOfRange { index: 2, nvars: 2 })
        ));
    }

    #[test]
    fn shift_examples() {
        let bar: Vec<Scalar> = [0, 0, 1, 1].iter().map(|&v| Scalar::from_int(v)).collect();
        assert_eq!(p("x*w", &XYZW).shift_origin(&bar).unwrap(), p("x + x*w", &XYZW));
        assert_eq!(p("y*z", &XYZW).shift_origin(&bar).unwrap(), p("y + y*z", &XYZW));
        let x = p("x", &["x"]);
        assert_eq!(x.shift_origin(&[Scalar::zero()]).unwrap(), x);
        assert!(matches!(x.shift_origin(&[]), Err(PolyError::DimensionMismatch { .. })));
    }

    #[test]
    fn lowest_part_examples() {
        let d = p("x + x*w", &XYZW).lowest_homogeneous_part();
        assert_eq!(d.low, p("x", &XYZW));
        assert_eq!(d.rest, p("x*w", &XYZW));
        assert_eq!(d.low_degree, Degree::Finite(1));

        let z = MultiPoly::zero(3).lowest_homogeneous_part();
        assert!(z.low.is_zero());
        assert_eq!(z.low_degree, Degree::Infinite);

        let d = p("2*x^2*y^2 + x^4*y^2 + x^2*y^4", &["x", "y"]).lowest_homogeneous_part();
        assert_eq!(d.low, p("2*x^2*y^2", &["x", "y"]));
        assert_eq!(d.low_degree, Degree::Finite(4));
    }

    #[test]
    fn homogeneous_component_examples() {
        let q = p("x + x*w", &XYZW);
        assert_eq!(q.homogeneous_component(1), p("x", &XYZW));
        assert_eq!(q.homogeneous_component(2), p("x*w", &XYZW));
        assert!(q.homogeneous_component(3).is_zero());
    }

    #[test]
    fn evaluate_examples() {
        let at = |v: &[i64]| v.iter().map(|&x| Scalar::from_int(x)).collect::<Vec<_>>();
        assert_eq!(p("x*y", &["x", "y"]).evaluate(&at(&[2, 3])).unwrap(), Scalar::from_int(6));
        assert_eq!(p("x^2 + y^2", &["x", "y"]).evaluate(&at(&[1, 1])).unwrap(), Scalar::from_int(2));
        // determinant of G G' for the three bilinear restrictions, in deviation coordinates
        let a3 = p(
            "w^2*x^2*y^2 + 2*w*x^2*y^2 + x^4*y^2 + x^2*y^4 + x^2*y^2*z^2 + 2*x^2*y^2*z + 2*x^2*y^2",
            &XYZW,
        );
        assert_eq!(a3.evaluate(&at(&[1, 1, 0, 0])).unwrap(), Scalar::from_int(4));
        assert_eq!(a3.evaluate_f64(&[1.0, 1.0, 0.0, 0.0]).unwrap(), 4.0);
    }

    #[test]
    fn display_round_trips_through_parser() {
        let q = p("-3/4*x^2*y + 7/10*sqrt(2)*x - 1/2 + sqrt(2)", &["x", "y"]);
        let text = q.display_with(&names(&["x", "y"]));
        assert_eq!(p(&text, &["x", "y"]), q);
    }

    #[test]
    fn graded_substitution() {
        let q = p("x + x*y", &["x", "y"]);
        let g = q.graded_by_new_var();
        assert_eq!(g, p("t*x + t^2*x*y", &["x", "y", "t"]));
        assert_eq!(g.divide_by_var_power(2, 1).unwrap(), p("x + t*x*y", &["x", "y", "t"]));
        assert!(g.divide_by_var_power(2, 2).is_none());
    }
}
