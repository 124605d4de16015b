//! Monte Carlo experiments over a grid of sample sizes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::ScalarMatrix;
use crate::poly::Degree;
use crate::rates::{build_b, charpoly_coeffs, generic_min_degrees, unscaled_exponents, Covariance, Exponent, RateAnalysis};
use crate::restriction::RestrictionSystem;

use super::linalg::symmetric_eigenvalues;
use super::model::{EstimatorModel, VhatMode};
use super::stats::{log_log_slope, median};
use super::stream::substream;
use super::wald::{wald_statistic, CompiledSystem};
use super::SimError;

/// Largest tolerated share of draws with a singular metric.
pub const MAX_SINGULAR_FRACTION: f64 = 0.05;
/// Slack in the pathwise lower bound `W ≥ T^β̄·μ_T`.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub t_grid: Vec<u64>,
    pub reps: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(t_grid: Vec<u64>, reps: usize, seed: u64) -> Self {
        ExperimentConfig {
            t_grid,
            reps,
            seed,
            threads: None,
        }
    }

    fn validate(&self, min_grid: usize, min_reps: usize) -> Result<(), SimError> {
        if self.t_grid.len() < min_grid {
            return Err(SimError::InvalidGrid(format!(
                "need at least {min_grid} grid points, got {}",
                self.t_grid.len()
            )));
        }
        if self.t_grid.first() == Some(&0) || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidGrid("grid must be strictly increasing and start at T >= 1".into()));
        }
        if self.reps < min_reps {
            return Err(SimError::TooFewReps {
                reps: self.reps,
                min: min_reps,
            });
        }
        Ok(())
    }

    fn run<T: Send, F>(&self, f: F) -> Result<Vec<T>, SimError>
    where
        F: Fn(u64, u64) -> T + Sync + Send,
    {
        let body = || -> Vec<T> {
            self.t_grid
                .iter()
                .flat_map(|&t| {
                    (0..self.reps as u64)
                        .into_par_iter()
                        .map(|rep| f(t, rep))
                        .collect::<Vec<_>>()
                })
                .collect()
        };
        match self.threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| SimError::ThreadPool(e.to_string()))?;
                Ok(pool.install(body))
            }
            None => Ok(body()),
        }
    }
}

/// Echelon transformation and rate exponents used to scale a draw.
#[derive(Clone, Debug)]
pub struct ScalingPlan {
    pub transform: ScalarMatrix,
    /// `s̄_i` of each echelon row.
    pub row_degrees: Vec<u32>,
    /// `β_l` by position.
    pub beta: Vec<f64>,
    pub beta_bar: f64,
}

impl ScalingPlan {
    pub fn from_analysis(a: &RateAnalysis) -> Self {
        ScalingPlan {
            transform: a.echelon.transform.clone(),
            row_degrees: a.echelon.row_degrees(),
            beta: a.report.beta.iter().map(|b| b.to_f64()).collect(),
            beta_bar: a.report.beta_bar.to_f64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub t_grid: Vec<u64>,
    pub reps: usize,
    pub seed: u64,
    /// Per `T`, the statistic on every draw with a nonsingular metric.
    pub wald_samples: Vec<Vec<f64>>,
    pub median_wald: Vec<f64>,
    pub median_log_slope: f64,
    pub slope_stderr: f64,
    /// Per `T` and draw, eigenvalues of `Δ_T·S·G·V̂·G′·S′·Δ_T`, descending.
    pub eig_trajectories: Vec<Vec<Vec<f64>>>,
    /// Per `T` and draw, the lower-bound functional `μ_T`.
    pub mu_samples: Vec<Vec<f64>>,
    pub beta_bar: f64,
    /// Draws with `W < T^β̄·μ_T − 1e-9`.
    pub bound_violations: usize,
    pub singular_counts: Vec<usize>,
    pub singular_fraction: f64,
}

struct DrawRecord {
    wald: f64,
    eig: Vec<f64>,
    mu: f64,
    bound_ok: bool,
}

fn scale_rows(m: &mut [Vec<f64>], s: &[f64]) {
    let n = m.len();
    for i in 0..n {
        for j in 0..n {
            m[i][j] *= s[i] * s[j];
        }
    }
}

/// `μ_T = min_i [T^{(s̄_i+1)/2}·g̃_i]² / max_i λ̃_i` where `λ̃` are the eigenvalues of
/// `Δ̃·Δ_T·G̃·V̂·G̃′·Δ_T·Δ̃`, `Δ̃ = diag(T^{β_i/2})` and `g̃ = S·g`.
pub fn mu_t(theta: &[f64], vhat: &[Vec<f64>], t: u64, transformed: &CompiledSystem, plan: &ScalingPlan) -> Result<f64, SimError> {
    Ok(scaled_parts(theta, vhat, t, transformed, plan)?.1)
}

fn scaled_parts(
    theta: &[f64],
    vhat: &[Vec<f64>],
    t: u64,
    transformed: &CompiledSystem,
    plan: &ScalingPlan,
) -> Result<(Vec<f64>, f64), SimError> {
    let tf = t as f64;
    let delta: Vec<f64> = plan.row_degrees.iter().map(|&s| tf.powf(f64::from(s) / 2.0)).collect();
    let mut sigma = transformed.metric(theta, vhat);
    scale_rows(&mut sigma, &delta);
    let eig = symmetric_eigenvalues(&sigma)?;
    let tilde: Vec<f64> = plan.beta.iter().map(|b| tf.powf(b / 2.0)).collect();
    scale_rows(&mut sigma, &tilde);
    let lambda_max = symmetric_eigenvalues(&sigma)?[0];
    let g = transformed.restrictions(theta);
    let min_sq = g
        .iter()
        .zip(&plan.row_degrees)
        .map(|(gi, &s)| (tf.powf((f64::from(s) + 1.0) / 2.0) * gi).powi(2))
        .fold(f64::INFINITY, f64::min);
    Ok((eig, min_sq / lambda_max))
}

/// Medians of `W_T` over replications, their log–log slope, and the pathwise
/// lower-bound diagnostics.
pub fn divergence_experiment(
    sys: &RestrictionSystem,
    plan: &ScalingPlan,
    model: &EstimatorModel,
    cfg: &ExperimentConfig,
) -> Result<SimResult, SimError> {
    cfg.validate(4, 200)?;
    if model.p() != sys.p() {
        return Err(SimError::DimensionMismatch {
            expected: sys.p(),
            found: model.p(),
        });
    }
    let compiled = CompiledSystem::new(sys);
    let transformed = CompiledSystem::new(&sys.transformed(&plan.transform)?);
    let bound_active = plan.beta_bar > 0.0;
    let records = cfg.run(|t, rep| -> Result<Option<DrawRecord>, SimError> {
        let mut rng = substream(cfg.seed, t, rep);
        let (theta, vhat) = model.draw(t, &mut rng)?;
        let wald = match wald_statistic(&theta, &vhat, &compiled, t) {
            Ok(w) => w,
            Err(SimError::SingularMetric { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (eig, mu) = scaled_parts(&theta, &vhat, t, &transformed, plan)?;
        let bound_ok = !bound_active || wald >= (t as f64).powf(plan.beta_bar) * mu - BOUND_SLACK;
        Ok(Some(DrawRecord { wald, eig, mu, bound_ok }))
    })?;

    let mut out = SimResult {
        t_grid: cfg.t_grid.clone(),
        reps: cfg.reps,
        seed: cfg.seed,
        wald_samples: Vec::new(),
        median_wald: Vec::new(),
        median_log_slope: f64::NAN,
        slope_stderr: f64::NAN,
        eig_trajectories: Vec::new(),
        mu_samples: Vec::new(),
        beta_bar: plan.beta_bar,
        bound_violations: 0,
        singular_counts: Vec::new(),
        singular_fraction: 0.0,
    };
    for (i, chunk) in records.chunks(cfg.reps).enumerate() {
        let (mut w, mut eig, mut mu, mut singular) = (Vec::new(), Vec::new(), Vec::new(), 0);
        for r in chunk {
            match r {
                Ok(Some(d)) => {
                    w.push(d.wald);
                    eig.push(d.eig.clone());
                    mu.push(d.mu);
                    out.bound_violations += usize::from(!d.bound_ok);
                }
                Ok(None) => singular += 1,
                Err(e) => return Err(e.clone()),
            }
        }
        let fraction = singular as f64 / cfg.reps as f64;
        if fraction > MAX_SINGULAR_FRACTION {
            return Err(SimError::SingularFraction {
                t: cfg.t_grid[i],
                fraction,
            });
        }
        out.median_wald.push(median(&w));
        out.wald_samples.push(w);
        out.eig_trajectories.push(eig);
        out.mu_samples.push(mu);
        out.singular_counts.push(singular);
    }
    out.singular_fraction = out.singular_counts.iter().sum::<usize>() as f64 / (cfg.reps * cfg.t_grid.len()) as f64;
    let grid: Vec<f64> = cfg.t_grid.iter().map(|&t| t as f64).collect();
    (out.median_log_slope, out.slope_stderr) = log_log_slope(&grid, &out.median_wald);
    Ok(out)
}

/// Per-`T` medians of rescaled eigenvalues `T^{e_l}·λ_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t_grid: Vec<u64>,
    pub exponents: Vec<f64>,
    /// `medians[i][l]` at `T = t_grid[i]`.
    pub medians: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn column(&self, l: usize) -> Vec<f64> {
        self.medians.iter().map(|m| m[l]).collect()
    }

    /// Whether the median of eigenvalue `l` strictly decreases along the grid.
    pub fn strictly_decreasing(&self, l: usize) -> bool {
        self.column(l).windows(2).all(|w| w[1] < w[0])
    }

    /// Ratio of the medians at the last two grid points.
    pub fn last_ratio(&self, l: usize) -> f64 {
        let c = self.column(l);
        c[c.len() - 1] / c[c.len() - 2]
    }
}

fn trajectory<F>(cfg: &ExperimentConfig, model: &EstimatorModel, exponents: Vec<f64>, matrix: F) -> Result<Trajectory, SimError>
where
    F: Fn(&[f64], &[Vec<f64>], u64) -> Vec<Vec<f64>> + Sync + Send,
{
    cfg.validate(2, 1)?;
    let q = exponents.len();
    let eig = cfg.run(|t, rep| -> Result<Vec<f64>, SimError> {
        let mut rng = substream(cfg.seed, t, rep);
        let (theta, vhat) = model.draw(t, &mut rng)?;
        let ev = symmetric_eigenvalues(&matrix(&theta, &vhat, t))?;
        Ok(ev.iter().zip(&exponents).map(|(l, e)| (t as f64).powf(*e) * l).collect())
    })?;
    let mut medians = Vec::with_capacity(cfg.t_grid.len());
    for chunk in eig.chunks(cfg.reps) {
        let rows: Vec<Vec<f64>> = chunk.iter().cloned().collect::<Result<_, _>>()?;
        medians.push((0..q).map(|l| median(&rows.iter().map(|r| r[l]).collect::<Vec<_>>())).collect());
    }
    Ok(Trajectory {
        t_grid: cfg.t_grid.clone(),
        exponents,
        medians,
    })
}

/// Medians of `T^{β_l}·λ̄_l` with `λ̄` the eigenvalues of `Δ_T·S·G(θ̂)·V̂·G(θ̂)′·S′·Δ_T`.
pub fn scaled_eigen_trajectory(
    sys: &RestrictionSystem,
    plan: &ScalingPlan,
    model: &EstimatorModel,
    cfg: &ExperimentConfig,
) -> Result<Trajectory, SimError> {
    let transformed = CompiledSystem::new(&sys.transformed(&plan.transform)?);
    let degrees = plan.row_degrees.clone();
    trajectory(cfg, model, plan.beta.clone(), move |theta, vhat, t| {
        let delta: Vec<f64> = degrees.iter().map(|&s| (t as f64).powf(f64::from(s) / 2.0)).collect();
        let mut m = transformed.metric(theta, vhat);
        scale_rows(&mut m, &delta);
        m
    })
}

/// Medians of `T^{e_l}·λ_l` with `λ` the eigenvalues of the unscaled `G(θ̂)·V̂·G(θ̂)′`.
pub fn unscaled_eigen_trajectory(
    sys: &RestrictionSystem,
    model: &EstimatorModel,
    exponents: &[f64],
    cfg: &ExperimentConfig,
) -> Result<Trajectory, SimError> {
    if exponents.len() != sys.q() {
        return Err(SimError::DimensionMismatch {
            expected: sys.q(),
            found: exponents.len(),
        });
    }
    let compiled = CompiledSystem::new(sys);
    trajectory(cfg, model, exponents.to_vec(), move |theta, vhat, _| compiled.metric(theta, vhat))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishingResult {
    /// First position with `m_k(U) > m_k`.
    pub k: usize,
    pub m_generic: Vec<Degree>,
    pub m_u: Vec<Degree>,
    /// `(m_l − m_{l−1})/2` from the generic degrees.
    pub exponents: Vec<Exponent>,
    pub trajectory: Trajectory,
    /// Per `l ≥ k`, whether the scaled median strictly decreases along the grid.
    pub decreasing: Vec<bool>,
}

/// Rescales the eigenvalues of `B(θ̂ − θ̄, V̂_T)` with `V̂_T → U` by the generic
/// rates; at a `U` whose degrees exceed the generic ones these vanish.
pub fn vanishing_rate_experiment(
    sys: &RestrictionSystem,
    u: &Covariance,
    vhat: VhatMode,
    cfg: &ExperimentConfig,
    generic_samples: usize,
) -> Result<VanishingResult, SimError> {
    let m_generic = generic_min_degrees(sys, generic_samples, cfg.seed)?;
    let m_u = charpoly_coeffs(&build_b(&sys.recenter()?.jacobian(), u)?)?.m;
    let Some(k) = (0..sys.q()).find(|&l| m_u[l] > m_generic[l]) else {
        return Err(SimError::PreconditionUnmet(
            "m_k(U) equals the generic m_k for every k".into(),
        ));
    };
    let exponents = unscaled_exponents(&m_generic);
    let theta_bar: Vec<f64> = sys.theta_bar().iter().map(|s| s.to_f64()).collect();
    let model = EstimatorModel::semidefinite(theta_bar, u.matrix().to_f64_rows(), vhat)?;
    let e: Vec<f64> = exponents.iter().map(|e| e.to_f64()).collect();
    let trajectory = unscaled_eigen_trajectory(sys, &model, &e, cfg)?;
    let decreasing = (k..sys.q()).map(|l| trajectory.strictly_decreasing(l)).collect();
    Ok(VanishingResult {
        k: k + 1,
        m_generic,
        m_u,
        exponents,
        trajectory,
        decreasing,
    })
}
