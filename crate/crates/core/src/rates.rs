//! Characteristic-polynomial degree invariants of `B(x,U) = G(x)·U·G(x)′`
//! and the eigenvalue rate exponents `γ_k`, `β_l`, `β̄`.

use std::fmt;

use num_rational::Rational64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::matrix::{PolyMatrix, ScalarMatrix};
use crate::poly::{Degree, MultiPoly, PolyError, Scalar};
use crate::restriction::{frald_check, EchelonBlock, EchelonForm, RestrictionError, RestrictionSystem};

/// Principal-minor enumeration is exponential in `q`.
pub const MAX_Q: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatesError {
    #[error("q = {q} exceeds the supported maximum of {MAX_Q} restrictions")]
    QTooLarge { q: usize },
    #[error("covariance matrix is not symmetric")]
    NotSymmetric,
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("covariance matrix is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry ({row}, {col}) of the scaled matrix has a negative power of t")]
    NegativeTDegree { row: usize, col: usize },
    #[error("gamma_{k} = {gamma} but must vanish for k <= r = {rank}")]
    GradingInconsistent { k: usize, gamma: Exponent, rank: usize },
    #[error(transparent)]
    Restriction(#[from] RestrictionError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Rational exponent of `T`; serialized as a `"num/den"` string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponent(pub Rational64);

impl Exponent {
    pub fn zero() -> Self {
        Exponent(Rational64::zero())
    }

    pub fn from_int(n: i64) -> Self {
        Exponent(Rational64::from_integer(n))
    }

    pub fn half(n: i64) -> Self {
        Exponent(Rational64::new(n, 2))
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let s = String::deserialize(d)?;
        let (n, m) = s.split_once('/').unwrap_or((&s, "1"));
        let n: i64 = n.trim().parse().map_err(D::Error::custom)?;
        let m: i64 = m.trim().parse().map_err(D::Error::custom)?;
        if m == 0 {
            return Err(D::Error::custom("zero denominator"));
        }
        Ok(Exponent(Rational64::new(n, m)))
    }
}

/// A symmetric positive-definite matrix with exact entries.
///
/// [`Covariance::semidefinite`] also admits singular positive-semidefinite
/// matrices, which the degree computations handle unchanged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Covariance {
    matrix: ScalarMatrix,
    definite: bool,
}

impl Covariance {
    pub fn new(u: ScalarMatrix) -> Result<Self, RatesError> {
        if !u.is_symmetric() {
            return Err(RatesError::NotSymmetric);
        }
        if !u.is_positive_definite() {
            return Err(RatesError::NotPositiveDefinite);
        }
        Ok(Covariance { matrix: u, definite: true })
    }

    pub fn semidefinite(u: ScalarMatrix) -> Result<Self, RatesError> {
        if !u.is_symmetric() {
            return Err(RatesError::NotSymmetric);
        }
        if !u.is_positive_semidefinite() {
            return Err(RatesError::NotPositiveSemidefinite);
        }
        let definite = u.is_positive_definite();
        Ok(Covariance { matrix: u, definite })
    }

    pub fn identity(p: usize) -> Self {
        Covariance {
            matrix: ScalarMatrix::identity(p),
            definite: true,
        }
    }

    /// `L·D·Lᵀ` with random rational unit-lower-triangular `L` and positive diagonal `D`.
    pub fn random<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Self {
        let mut l = ScalarMatrix::identity(p);
        for i in 0..p {
            for j in 0..i {
                l.set(i, j, Scalar::from_frac(rng.random_range(-10..=10), rng.random_range(1..=10)));
            }
        }
        let mut d = ScalarMatrix::zeros(p, p);
        for i in 0..p {
            d.set(i, i, Scalar::from_frac(rng.random_range(1..=10), rng.random_range(1..=10)));
        }
        let u = l.mul(&d).and_then(|ld| ld.mul(&l.transpose())).expect("square factors");
        Covariance { matrix: u, definite: true }
    }

    pub fn matrix(&self) -> &ScalarMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_definite(&self) -> bool {
        self.definite
    }
}

/// `B(x,U) = G(x)·U·G(x)′`.
pub fn build_b(g: &PolyMatrix, u: &Covariance) -> Result<PolyMatrix, RatesError> {
    if g.cols() != u.dim() {
        return Err(RatesError::DimensionMismatch {
            expected: g.cols(),
            found: u.dim(),
        });
    }
    let gu = g.mul(&PolyMatrix::from_scalars(u.matrix(), g.nvars()))?;
    Ok(gu.mul(&g.transpose())?)
}

/// Coefficients of `det(λI − B) = λ^q + Σ_k a_k λ^{q−k}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharPolyCoeffs {
    /// `a_1 … a_q`.
    pub a: Vec<MultiPoly>,
    /// `E_k`: sums of the `k × k` principal minors, so `a_k = (−1)^k E_k`.
    pub minor_sums: Vec<MultiPoly>,
    /// Lowest total degree `m_k` of each `a_k`.
    pub m: Vec<Degree>,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Sums of principal minors `E_1 … E_q`.
pub fn principal_minor_sums(b: &PolyMatrix) -> Result<Vec<MultiPoly>, RatesError> {
    let q = b.rows();
    if b.cols() != q {
        return Err(RatesError::DimensionMismatch {
            expected: q,
            found: b.cols(),
        });
    }
    if q > MAX_Q {
        return Err(RatesError::QTooLarge { q });
    }
    let mut sums = Vec::with_capacity(q);
    for k in 1..=q {
        let mut acc = MultiPoly::zero(b.nvars());
        for idx in combinations(q, k) {
            acc = acc.try_add(&b.principal_submatrix(&idx).determinant()?)?;
        }
        sums.push(acc);
    }
    Ok(sums)
}

pub fn charpoly_coeffs(b: &PolyMatrix) -> Result<CharPolyCoeffs, RatesError> {
    let minor_sums = principal_minor_sums(b)?;
    let a: Vec<MultiPoly> = minor_sums
        .iter()
        .enumerate()
        .map(|(i, e)| if i % 2 == 0 { -e } else { e.clone() })
        .collect();
    let m = a.iter().map(MultiPoly::lowest_degree).collect();
    Ok(CharPolyCoeffs { a, minor_sums, m })
}

/// Characteristic coefficients of the block-scaled matrix in `(y, t)`, `t = T^{-1/2}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedCoeffs {
    /// `ã_k` as polynomials in the original variables followed by `t`.
    pub coeffs: Vec<MultiPoly>,
    /// Lowest power of `t` in each `ã_k`.
    pub t_degrees: Vec<Degree>,
    /// `γ_k = t_degree / 2`, inherited from `γ_{k−1}` when `ã_k ≡ 0`.
    pub gamma: Vec<Exponent>,
    /// `ã_k ≡ 0`, so `γ_k` is not determined by the symmetric functions.
    pub indeterminate: Vec<bool>,
}

/// Forms `M(t,y) = D(t)·G(t·y)·U·G(t·y)′·D(t)` with `D(t) = diag(t^{−s̄_i})`
/// and reads `γ_k` from the lowest `t`-power of its characteristic coefficients.
pub fn t_graded_coeffs(g: &PolyMatrix, u: &Covariance, row_degrees: &[u32]) -> Result<GradedCoeffs, RatesError> {
    if row_degrees.len() != g.rows() {
        return Err(RatesError::DimensionMismatch {
            expected: g.rows(),
            found: row_degrees.len(),
        });
    }
    let t = g.nvars();
    let graded = g.map(MultiPoly::graded_by_new_var);
    let mut m = build_b(&graded, u)?;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let shift = row_degrees[i] + row_degrees[j];
            let scaled = m
                .get(i, j)
                .divide_by_var_power(t, shift)
                .ok_or(RatesError::NegativeTDegree { row: i + 1, col: j + 1 })?;
            m.set(i, j, scaled);
        }
    }
    let cp = charpoly_coeffs(&m)?;
    let t_degrees: Vec<Degree> = cp.a.iter().map(|a| a.min_var_degree(t)).collect();
    let mut gamma = Vec::with_capacity(t_degrees.len());
    let mut indeterminate = Vec::with_capacity(t_degrees.len());
    let mut prev = Exponent::zero();
    for d in &t_degrees {
        let g = match d {
            Degree::Finite(e) => Exponent::half(*e as i64),
            Degree::Infinite => prev,
        };
        indeterminate.push(d.is_infinite());
        gamma.push(g);
        prev = g;
    }
    Ok(GradedCoeffs {
        coeffs: cp.a,
        t_degrees,
        gamma,
        indeterminate,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateReport {
    pub q: usize,
    pub rank_r: usize,
    pub frald_t_holds: bool,
    /// `m_k(U)` of the untransformed recentered Jacobian.
    pub m: Vec<Degree>,
    pub gamma: Vec<Exponent>,
    pub beta: Vec<Exponent>,
    pub beta_bar: Exponent,
    pub block_degrees: Vec<EchelonBlock>,
    /// Positions `k` whose `ã_k` vanished identically.
    pub indeterminate: Vec<usize>,
    /// Tied consecutive exponents `γ_k = γ_{k−1}` beyond the rank.
    pub ties: Vec<usize>,
}

impl RateReport {
    pub fn divergence_predicted(&self) -> bool {
        self.rank_r < self.q && self.beta_bar > Exponent::zero()
    }

    /// The block degree `s̄` of every row of the echelon form.
    pub fn row_degrees(&self) -> Vec<u32> {
        self.block_degrees
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.degree, b.rows))
            .collect()
    }
}

/// `β_k = γ_k − γ_{k−1}` with `γ_0 = 0`.
pub fn beta_from_gamma(gamma: &[Exponent]) -> Vec<Exponent> {
    let mut prev = Exponent::zero();
    gamma
        .iter()
        .map(|g| {
            let b = Exponent(g.0 - prev.0);
            prev = *g;
            b
        })
        .collect()
}

/// Rates of the eigenvalues of the unscaled `B(T^{−1/2}y, U)`: `(m_l − m_{l−1})/2`, `m_0 = 0`.
pub fn unscaled_exponents(m: &[Degree]) -> Vec<Exponent> {
    let mut prev = 0i64;
    m.iter()
        .map(|d| {
            let cur = d.finite().map_or(prev, i64::from);
            let e = Exponent::half(cur - prev);
            prev = cur;
            e
        })
        .collect()
}

/// Everything [`rate_report`] computes, including the intermediate objects.
#[derive(Clone, Debug)]
pub struct RateAnalysis {
    pub report: RateReport,
    pub echelon: EchelonForm,
    pub charpoly: CharPolyCoeffs,
    pub graded: GradedCoeffs,
}

pub fn rate_analysis<R: Rng + ?Sized>(
    sys: &RestrictionSystem,
    u: &Covariance,
    rank_trials: usize,
    rng: &mut R,
) -> Result<RateAnalysis, RatesError> {
    if sys.q() > MAX_Q {
        return Err(RatesError::QTooLarge { q: sys.q() });
    }
    if u.dim() != sys.p() {
        return Err(RatesError::DimensionMismatch {
            expected: sys.p(),
            found: u.dim(),
        });
    }
    let verdict = frald_check(sys, rank_trials, rng)?;
    let centered = sys.recenter()?;
    let charpoly = charpoly_coeffs(&build_b(&centered.jacobian(), u)?)?;
    let echelon = verdict.echelon;
    let graded = t_graded_coeffs(&echelon.full_matrix, u, &echelon.row_degrees())?;
    let r = verdict.rank_r;
    for (k, g) in graded.gamma.iter().enumerate().take(r) {
        if *g != Exponent::zero() {
            return Err(RatesError::GradingInconsistent {
                k: k + 1,
                gamma: *g,
                rank: r,
            });
        }
    }
    let beta = beta_from_gamma(&graded.gamma);
    let beta_bar = beta[r..].iter().copied().max().unwrap_or(Exponent::zero());
    let ties = (r..sys.q()).filter(|&k| beta[k] == Exponent::zero()).map(|k| k + 1).collect();
    let indeterminate = graded
        .indeterminate
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(k, _)| k + 1)
        .collect();
    let report = RateReport {
        q: sys.q(),
        rank_r: r,
        frald_t_holds: verdict.frald_t_holds,
        m: charpoly.m.clone(),
        gamma: graded.gamma.clone(),
        beta,
        beta_bar,
        block_degrees: echelon.blocks.clone(),
        indeterminate,
        ties,
    };
    Ok(RateAnalysis {
        report,
        echelon,
        charpoly,
        graded,
    })
}

/// FRALD verdict, `γ`, `β` and `β̄` for the system at covariance `U`.
pub fn rate_report<R: Rng + ?Sized>(
    sys: &RestrictionSystem,
    u: &Covariance,
    rank_trials: usize,
    rng: &mut R,
) -> Result<RateReport, RatesError> {
    Ok(rate_analysis(sys, u, rank_trials, rng)?.report)
}

/// `m_k(U)` for every `k` at each of `samples` random rational SPD matrices.
pub fn sampled_min_degrees(sys: &RestrictionSystem, samples: usize, rng_seed: u64) -> Result<Vec<Vec<Degree>>, RatesError> {
    if sys.q() > MAX_Q {
        return Err(RatesError::QTooLarge { q: sys.q() });
    }
    let g = sys.recenter()?.jacobian();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..samples.max(1))
        .map(|_| {
            let u = Covariance::random(sys.p(), &mut rng);
            Ok(charpoly_coeffs(&build_b(&g, &u)?)?.m)
        })
        .collect()
}

/// Estimate of the generic degrees `m_1 … m_q` (minimum over random SPD `U`).
pub fn generic_min_degrees(sys: &RestrictionSystem, samples: usize, rng_seed: u64) -> Result<Vec<Degree>, RatesError> {
    let all = sampled_min_degrees(sys, samples, rng_seed)?;
    Ok((0..sys.q())
        .map(|k| all.iter().map(|m| m[k]).min().unwrap_or(Degree::Infinite))
        .collect())
}

/// Estimate of `m_k` (1-based `k`) as the minimum of `m_k(U)` over random SPD `U`.
pub fn min_degree_generic(sys: &RestrictionSystem, k: usize, samples: usize, rng_seed: u64) -> Result<Degree, RatesError> {
    if k == 0 || k > sys.q() {
        return Err(RatesError::DimensionMismatch {
            expected: sys.q(),
            found: k,
        });
    }
    Ok(generic_min_degrees(sys, samples, rng_seed)?[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn system(vars: &[&str], g: &[&str], bar: &[i64]) -> RestrictionSystem {
        let n = names(vars);
        let g = g.iter().map(|t| parse_poly(t, &n).unwrap()).collect();
        RestrictionSystem::new(n, g, bar.iter().map(|&v| Scalar::from_int(v)).collect()).unwrap()
    }

    fn example1() -> RestrictionSystem {
        system(&["x", "y", "z", "w"], &["x*y", "x*w", "y*z"], &[0, 0, 1, 1])
    }

    #[test]
    fn b_for_single_row() {
        let n = names(&["x", "y", "z", "w"]);
        let row: Vec<MultiPoly> = ["y", "x", "0", "0"].iter().map(|t| parse_poly(t, &n).unwrap()).collect();
        let g = PolyMatrix::from_rows(4, vec![row]).unwrap();
        let b = build_b(&g, &Covariance::identity(4)).unwrap();
        assert_eq!(b.get(0, 0), &parse_poly("x^2 + y^2", &n).unwrap());
    }

    #[test]
    fn b_example1_diagonal() {
        let n = names(&["x", "y", "z", "w"]);
        let g = example1().recenter().unwrap().jacobian();
        let b = build_b(&g, &Covariance::identity(4)).unwrap();
        assert!(b.is_symmetric());
        assert_eq!(b.get(0, 0), &parse_poly("x^2 + y^2", &n).unwrap());
        assert_eq!(b.get(2, 2), &parse_poly("1 + 2*z + z^2 + y^2", &n).unwrap());
        assert!(matches!(
            build_b(&g, &Covariance::identity(3)),
            Err(RatesError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diagonal_charpoly() {
        let b = PolyMatrix::from_scalars(
            &ScalarMatrix::from_rows(vec![
                vec![Scalar::from_int(3), Scalar::zero()],
                vec![Scalar::zero(), Scalar::from_int(5)],
            ])
            .unwrap(),
            1,
        );
        let cp = charpoly_coeffs(&b).unwrap();
        assert_eq!(cp.a[0], MultiPoly::constant(1, Scalar::from_int(-8)));
        assert_eq!(cp.a[1], MultiPoly::constant(1, Scalar::from_int(15)));
        assert_eq!(cp.m, vec![Degree::Finite(0), Degree::Finite(0)]);
    }

    #[test]
    fn too_many_restrictions() {
        let b = PolyMatrix::from_scalars(&ScalarMatrix::identity(9), 1);
        assert!(matches!(charpoly_coeffs(&b), Err(RatesError::QTooLarge { q: 9 })));
    }

    #[test]
    fn covariance_validation() {
        let m = ScalarMatrix::from_rows(vec![
            vec![Scalar::one(), Scalar::from_int(2)],
            vec![Scalar::from_int(2), Scalar::one()],
        ])
        .unwrap();
        assert_eq!(Covariance::new(m), Err(RatesError::NotPositiveDefinite));
        let m = ScalarMatrix::from_rows(vec![vec![Scalar::one(), Scalar::one()], vec![Scalar::zero(), Scalar::one()]]).unwrap();
        assert_eq!(Covariance::new(m), Err(RatesError::NotSymmetric));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = Covariance::random(4, &mut rng);
            assert!(u.matrix().is_positive_definite());
        }
    }

    #[test]
    fn exponent_recursions() {
        let g = [Exponent::zero(), Exponent::zero(), Exponent::from_int(1)];
        assert_eq!(beta_from_gamma(&g), g.to_vec());
        let m = [Degree::Finite(0), Degree::Finite(0), Degree::Finite(4)];
        assert_eq!(
            unscaled_exponents(&m),
            vec![Exponent::zero(), Exponent::zero(), Exponent::from_int(2)]
        );
    }

    #[test]
    fn example1_identity_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let r = rate_report(&example1(), &Covariance::identity(4), 3, &mut rng).unwrap();
        assert_eq!(r.rank_r, 2);
        assert_eq!(r.gamma, vec![Exponent::zero(), Exponent::zero(), Exponent::from_int(1)]);
        assert_eq!(r.beta, vec![Exponent::zero(), Exponent::zero(), Exponent::from_int(1)]);
        assert_eq!(r.beta_bar, Exponent::from_int(1));
        assert_eq!(r.m[2], Degree::Finite(4));
        assert!(r.divergence_predicted());
    }

    #[test]
    fn linear_system_has_no_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = system(&["x", "y"], &["x + y", "x - 2*y"], &[0, 0]);
        let r = rate_report(&s, &Covariance::identity(2), 3, &mut rng).unwrap();
        assert!(r.frald_t_holds);
        assert_eq!(r.gamma, vec![Exponent::zero(); 2]);
        assert_eq!(r.beta_bar, Exponent::zero());
        assert!(!r.divergence_predicted());
    }

    #[test]
    fn negative_t_degree_is_detected() {
        let g = example1().recenter().unwrap().jacobian();
        // claiming degree 1 for a row with constant entries
        let err = t_graded_coeffs(&g, &Covariance::identity(4), &[1, 1, 0]).unwrap_err();
        assert!(matches!(err, RatesError::NegativeTDegree { .. }));
    }

    #[test]
    fn trace_has_constant_term() {
        assert_eq!(min_degree_generic(&example1(), 1, 3, 5).unwrap(), Degree::Finite(0));
        assert!(min_degree_generic(&example1(), 4, 3, 5).is_err());
    }
}
