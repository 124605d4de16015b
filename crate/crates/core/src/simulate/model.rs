//! The estimator model: `θ̂_T = θ̄ + T^{-1/2}·L·z` and a consistent `V̂_T`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, psd_factor};
use super::SimError;

/// Attempts at drawing a positive-definite perturbed `V̂_T`.
pub const VHAT_RETRIES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum VhatMode {
    /// `V̂_T = V`.
    Exact,
    /// `V̂_T = V + c·T^{-1/2}·W/‖W‖_F` with `W` a random symmetric Gaussian matrix.
    Perturbed { scale: f64 },
}

impl std::fmt::Display for VhatMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VhatMode::Exact => write!(f, "exact"),
            VhatMode::Perturbed { scale } => write!(f, "perturbed:{scale}"),
        }
    }
}

impl std::str::FromStr for VhatMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "exact" {
            return Ok(VhatMode::Exact);
        }
        if let Some(c) = s.strip_prefix("perturbed:") {
            let scale: f64 = c.parse().map_err(|_| format!("invalid perturbation scale '{c}'"))?;
            if !scale.is_finite() || scale < 0.0 {
                return Err(format!("perturbation scale must be finite and nonnegative, got {c}"));
            }
            return Ok(VhatMode::Perturbed { scale });
        }
        Err(format!("expected 'exact' or 'perturbed:<c>', got '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorModel {
    theta_bar: Vec<f64>,
    v: Vec<Vec<f64>>,
    factor: Vec<Vec<f64>>,
    vhat: VhatMode,
}

impl EstimatorModel {
    /// Requires `V` positive definite.
    pub fn new(theta_bar: Vec<f64>, v: Vec<Vec<f64>>, vhat: VhatMode) -> Result<Self, SimError> {
        Self::check(&theta_bar, &v)?;
        let factor = cholesky(&v)?;
        Ok(EstimatorModel { theta_bar, v, factor, vhat })
    }

    /// Admits a singular positive-semidefinite `V`; draws then stay in its range.
    pub fn semidefinite(theta_bar: Vec<f64>, v: Vec<Vec<f64>>, vhat: VhatMode) -> Result<Self, SimError> {
        Self::check(&theta_bar, &v)?;
        let factor = psd_factor(&v)?;
        Ok(EstimatorModel { theta_bar, v, factor, vhat })
    }

    fn check(theta_bar: &[f64], v: &[Vec<f64>]) -> Result<(), SimError> {
        if v.len() != theta_bar.len() {
            return Err(SimError::DimensionMismatch {
                expected: theta_bar.len(),
                found: v.len(),
            });
        }
        let n = v.len();
        for i in 0..n {
            if v[i].len() != n {
                return Err(SimError::DimensionMismatch {
                    expected: n,
                    found: v[i].len(),
                });
            }
            for j in 0..i {
                if (v[i][j] - v[j][i]).abs() > 1e-12 * (v[i][i].abs() + v[j][j].abs()) {
                    return Err(SimError::NotSymmetric);
                }
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.theta_bar.len()
    }

    pub fn theta_bar(&self) -> &[f64] {
        &self.theta_bar
    }

    pub fn v(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn vhat_mode(&self) -> VhatMode {
        self.vhat
    }

    /// `θ̄ + T^{-1/2}·L·z` for a given standard-normal vector `z`.
    pub fn estimate_from(&self, t: u64, z: &[f64]) -> Vec<f64> {
        let scale = (t as f64).sqrt().recip();
        self.theta_bar
            .iter()
            .zip(&self.factor)
            .map(|(b, row)| b + scale * row.iter().zip(z).map(|(l, z)| l * z).sum::<f64>())
            .collect()
    }

    #[allow(clippy::needless_range_loop)]
    fn vhat<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> Result<Vec<Vec<f64>>, SimError> {
        let VhatMode::Perturbed { scale } = self.vhat else {
            return Ok(self.v.clone());
        };
        let n = self.p();
        for _ in 0..VHAT_RETRIES {
            let mut w = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.sample(StandardNormal);
                    w[i][j] = x;
                    w[j][i] = x;
                }
            }
            let norm = w.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            let f = scale / (t as f64).sqrt() / norm;
            let cand: Vec<Vec<f64>> = self
                .v
                .iter()
                .zip(&w)
                .map(|(vr, wr)| vr.iter().zip(wr).map(|(v, w)| v + f * w).collect())
                .collect();
            if cholesky(&cand).is_ok() {
                return Ok(cand);
            }
        }
        Err(SimError::VhatNotPositiveDefinite { t, attempts: VHAT_RETRIES })
    }

    /// Draws `(θ̂_T, V̂_T)`: first `p` normals for `z`, then the perturbation if any.
    pub fn draw<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> Result<(Vec<f64>, Vec<Vec<f64>>), SimError> {
        if t == 0 {
            return Err(SimError::InvalidGrid("T must be at least 1".into()));
        }
        let z: Vec<f64> = (0..self.p()).map(|_| rng.sample(StandardNormal)).collect();
        let theta = self.estimate_from(t, &z);
        Ok((theta, self.vhat(t, rng)?))
    }
}
