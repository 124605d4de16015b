//! The Wald statistic `W_T = T·g′(θ̂)[G(θ̂)·V̂·G(θ̂)′]^{-1}g(θ̂)`.

use crate::poly::FloatPoly;
use crate::restriction::RestrictionSystem;

use super::linalg::{congruence, equilibrated_condition, forward_substitute, householder_r, mat_mul, psd_factor, transpose, MAX_CONDITION};
use super::SimError;

/// Restrictions and their exact Jacobian, converted to floats once.
#[derive(Clone, Debug)]
pub struct CompiledSystem {
    g: Vec<FloatPoly>,
    jac: Vec<Vec<FloatPoly>>,
    p: usize,
}

impl CompiledSystem {
    pub fn new(sys: &RestrictionSystem) -> Self {
        let jm = sys.jacobian();
        CompiledSystem {
            g: sys.restrictions().iter().map(FloatPoly::from_poly).collect(),
            jac: (0..jm.rows())
                .map(|i| jm.row(i).iter().map(FloatPoly::from_poly).collect())
                .collect(),
            p: sys.p(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.g.len()
    }

    pub fn restrictions(&self, theta: &[f64]) -> Vec<f64> {
        self.g.iter().map(|g| g.eval(theta)).collect()
    }

    pub fn jacobian(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        self.jac.iter().map(|row| row.iter().map(|d| d.eval(theta)).collect()).collect()
    }

    /// `G(θ)·V̂·G(θ)′`.
    pub fn metric(&self, theta: &[f64], vhat: &[Vec<f64>]) -> Vec<Vec<f64>> {
        congruence(&self.jacobian(theta), vhat)
    }
}

/// Rejects metrics whose equilibrated condition number exceeds [`MAX_CONDITION`].
pub fn check_metric(m: &[Vec<f64>]) -> Result<(), SimError> {
    match equilibrated_condition(m)? {
        Some(c) if c <= MAX_CONDITION => Ok(()),
        c => Err(SimError::SingularMetric { condition: c.unwrap_or(f64::INFINITY) }),
    }
}

/// `T·g′(G·V̂·G′)^{-1}g` without forming the metric: with `V̂ = F·F′` and
/// `(G·F)′ = Q·R`, the statistic is `T·‖R′^{-1}g‖²`, whose rounding error
/// grows with the square root of the metric's condition number.
pub fn wald_statistic(theta_hat: &[f64], vhat: &[Vec<f64>], sys: &CompiledSystem, t: u64) -> Result<f64, SimError> {
    if theta_hat.len() != sys.p() || vhat.len() != sys.p() {
        return Err(SimError::DimensionMismatch {
            expected: sys.p(),
            found: theta_hat.len().min(vhat.len()),
        });
    }
    let jac = sys.jacobian(theta_hat);
    check_metric(&congruence(&jac, vhat))?;
    let f = psd_factor(vhat)?;
    let r = householder_r(&transpose(&mat_mul(&jac, &f)));
    if (0..r.len()).any(|i| r[i][i] == 0.0) {
        return Err(SimError::SingularMetric { condition: f64::INFINITY });
    }
    let y = forward_substitute(&transpose(&r), &sys.restrictions(theta_hat));
    Ok(t as f64 * y.iter().map(|v| v * v).sum::<f64>())
}

/// Closed form for `g = (xy, xw, yz)` with `V̂ = I`, `θ = (x, y, z, w)`:
/// `W = T(w² + y²)(x² + z²)/(w² + x² + y² + z²)`.
pub fn closed_form_example1(theta_hat: &[f64], t: u64) -> f64 {
    let [x, y, z, w] = [theta_hat[0], theta_hat[1], theta_hat[2], theta_hat[3]];
    let den = w * w + x * x + y * y + z * z;
    if den == 0.0 {
        return 0.0;
    }
    t as f64 * (w * w + y * y) * (x * x + z * z) / den
}
