//! Cross-module invariant checks shared by the `verify` command and the tests.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::ScalarMatrix;
use crate::poly::{parse_poly, MultiPoly, Scalar};
use crate::rates::{build_b, charpoly_coeffs, Covariance, RatesError};
use crate::restriction::RestrictionSystem;
use crate::simulate::{closed_form_example1, symmetric_eigenvalues, wald_statistic, CompiledSystem, EstimatorModel, SimError};

pub const SYMMETRIC_TOL: f64 = 1e-8;
pub const CLOSED_FORM_TOL: f64 = 1e-10;
pub const INVARIANCE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: Status,
    /// Largest relative discrepancy observed.
    pub max_rel_error: Option<f64>,
    pub detail: String,
}

impl CheckOutcome {
    fn measured(name: &str, max: f64, tol: f64, detail: String) -> Self {
        CheckOutcome {
            name: name.into(),
            status: if max <= tol { Status::Pass } else { Status::Fail },
            max_rel_error: Some(max),
            detail,
        }
    }

    fn skipped(name: &str, detail: &str) -> Self {
        CheckOutcome {
            name: name.into(),
            status: Status::Skipped,
            max_rel_error: None,
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        write!(f, "{tag} {}", self.name)?;
        if let Some(e) = self.max_rel_error {
            write!(f, " (max rel error {e:.2e})")?;
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Rates(#[from] RatesError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Restriction(#[from] crate::restriction::RestrictionError),
}

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Elementary symmetric polynomials `P_1 … P_n` of `x`.
pub fn elementary_symmetric(x: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; x.len() + 1];
    e[0] = 1.0;
    for (i, v) in x.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += v * e[k - 1];
        }
    }
    e.split_off(1)
}

/// A rational point with nonzero coordinates, so that it avoids the
/// coordinate hyperplanes on which restrictions typically degenerate.
fn random_point<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<Scalar> {
    (0..p)
        .map(|_| {
            let n = rng.random_range(1..=10) * if rng.random_bool(0.5) { 1 } else { -1 };
            Scalar::from_frac(n, rng.random_range(1..=10))
        })
        .collect()
}

/// `P_k(λ(y,U)) = (−1)^k a_k(y,U)` at `points` random rational `y` and random SPD `U`.
/// `adjust` may rewrite the symbolic coefficients before comparison.
pub fn symmetric_identity_with<F>(sys: &RestrictionSystem, points: usize, seed: u64, adjust: F) -> Result<CheckOutcome, VerifyError>
where
    F: Fn(Vec<MultiPoly>) -> Vec<MultiPoly>,
{
    let g = sys.recenter()?.jacobian();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let u = Covariance::random(sys.p(), &mut rng);
        let b = build_b(&g, &u)?;
        let a = adjust(charpoly_coeffs(&b)?.a);
        let y = random_point(sys.p(), &mut rng);
        let bf = b
            .evaluate(&y)
            .map_err(RatesError::from)?
            .to_f64_rows();
        let p = elementary_symmetric(&symmetric_eigenvalues(&bf)?);
        for (k, ak) in a.iter().enumerate() {
            let sym = ak.evaluate(&y).map_err(RatesError::from)?.to_f64();
            let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
            worst = worst.max(rel(p[k], sign * sym));
        }
    }
    Ok(CheckOutcome::measured(
        "symmetric-polynomial identity",
        worst,
        SYMMETRIC_TOL,
        format!("{points} random points and covariances, q = {}", sys.q()),
    ))
}

pub fn symmetric_identity(sys: &RestrictionSystem, points: usize, seed: u64) -> Result<CheckOutcome, VerifyError> {
    symmetric_identity_with(sys, points, seed, |a| a)
}

/// Whether `sys` is `(xy, xw, yz)` at `θ̄ = (0, 0, 1, 1)` in variables `(x, y, z, w)`.
pub fn is_example1(sys: &RestrictionSystem) -> bool {
    let names: Vec<String> = ["x", "y", "z", "w"].iter().map(|s| s.to_string()).collect();
    let want: Vec<MultiPoly> = ["x*y", "x*w", "y*z"]
        .iter()
        .map(|e| parse_poly(e, &names).expect("valid literal"))
        .collect();
    let bar: Vec<Scalar> = [0, 0, 1, 1].iter().map(|&v| Scalar::from_int(v)).collect();
    sys.p() == 4 && sys.restrictions() == want.as_slice() && sys.theta_bar() == bar.as_slice()
}

/// Agreement of the general Wald path with the closed form on random draws (`V = I`).
pub fn closed_form_agreement(sys: &RestrictionSystem, draws: usize, seed: u64) -> Result<CheckOutcome, VerifyError> {
    const NAME: &str = "closed-form Wald oracle";
    if !is_example1(sys) {
        return Ok(CheckOutcome::skipped(NAME, "only defined for the (xy, xw, yz) system"));
    }
    let compiled = CompiledSystem::new(sys);
    let eye: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let theta: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = 10u64.pow(rng.random_range(0..6));
        let w = wald_statistic(&theta, &eye, &compiled, t)?;
        worst = worst.max(rel(w, closed_form_example1(&theta, t)));
    }
    Ok(CheckOutcome::measured(NAME, worst, CLOSED_FORM_TOL, format!("{draws} random draws")))
}

/// A random rational `q×q` matrix with nonzero determinant.
pub fn random_nondegenerate<R: Rng + ?Sized>(q: usize, rng: &mut R) -> ScalarMatrix {
    loop {
        let s = ScalarMatrix::random_rational(q, q, 10, rng);
        if s.determinant().is_ok_and(|d| !d.is_zero()) {
            return s;
        }
    }
}

/// `W(g) = W(S·g)` pathwise at fixed `(θ̂, V̂)` for random non-degenerate `S`.
pub fn transformation_invariance(
    sys: &RestrictionSystem,
    model: &EstimatorModel,
    transforms: usize,
    draws: usize,
    t: u64,
    seed: u64,
) -> Result<CheckOutcome, VerifyError> {
    let compiled = CompiledSystem::new(sys);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for _ in 0..transforms {
        let s = random_nondegenerate(sys.q(), &mut rng);
        let other = CompiledSystem::new(&sys.transformed(&s)?);
        for _ in 0..draws {
            let (theta, vhat) = model.draw(t, &mut rng)?;
            match (
                wald_statistic(&theta, &vhat, &compiled, t),
                wald_statistic(&theta, &vhat, &other, t),
            ) {
                (Ok(a), Ok(b)) => {
                    worst = worst.max(rel(a, b));
                    compared += 1;
                }
                (Err(SimError::SingularMetric { .. }), _) | (_, Err(SimError::SingularMetric { .. })) => {}
                (Err(e), _) | (_, Err(e)) => return Err(e.into()),
            }
        }
    }
    Ok(CheckOutcome::measured(
        "transformation invariance",
        worst,
        INVARIANCE_TOL,
        format!("{transforms} transforms x {draws} draws at T = {t}, {compared} compared"),
    ))
}
