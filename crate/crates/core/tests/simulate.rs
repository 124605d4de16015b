mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waldiv::rates::{rate_analysis, Covariance};
use waldiv::simulate::linalg::{cholesky, mat_mul, transpose};
use waldiv::simulate::*;
use waldiv::verify;

fn eye(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn ex1_model() -> EstimatorModel {
    EstimatorModel::new(vec![0.0, 0.0, 1.0, 1.0], eye(4), VhatMode::Exact).unwrap()
}

fn plan_for(sys: &waldiv::restriction::RestrictionSystem, u: &Covariance) -> ScalingPlan {
    let a = rate_analysis(sys, u, 3, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    ScalingPlan::from_analysis(&a)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn chi_square_oracle_reference_values() {
    assert!((chi_square_median_oracle(1) - 0.454_936_4).abs() < 1e-6);
    // chi2(2) is exponential with mean 2, median 2 ln 2.
    assert!((chi_square_median_oracle(2) - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn forced_draws() {
    let m = EstimatorModel::new(vec![0.0, 0.0, 1.0, 1.0], eye(4), VhatMode::Exact).unwrap();
    assert_eq!(m.estimate_from(7, &[0.0; 4]), vec![0.0, 0.0, 1.0, 1.0]);
    let th = m.estimate_from(10_000, &[1.0, 1.0, 0.0, 0.0]);
    for (a, b) in th.iter().zip([0.01, 0.01, 1.0, 1.0]) {
        assert!((a - b).abs() < 1e-15);
    }
    let d = EstimatorModel::new(vec![0.0, 0.0], vec![vec![4.0, 0.0], vec![0.0, 1.0]], VhatMode::Exact).unwrap();
    assert_eq!(d.estimate_from(1, &[1.0, 1.0]), vec![2.0, 1.0]);
}

#[test]
fn draws_reject_non_spd_v() {
    let bad = EstimatorModel::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]], VhatMode::Exact);
    assert!(matches!(bad, Err(SimError::Cholesky { .. })));
}

#[test]
fn perturbed_vhat_converges_to_v() {
    let m = EstimatorModel::new(vec![0.0; 3], eye(3), VhatMode::Perturbed { scale: 0.5 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for t in [1u64, 100, 10_000] {
        let (_, vhat) = m.draw(t, &mut rng).unwrap();
        let dev: f64 = vhat.iter().flatten().zip(eye(3).iter().flatten()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dev <= 0.5 / (t as f64).sqrt() + 1e-12, "T = {t}: {dev}");
        assert!(cholesky(&vhat).is_ok());
    }
}

#[test]
fn wald_examples() {
    let c = CompiledSystem::new(&example1());
    let w = wald_statistic(&[1.0; 4], &eye(4), &c, 1).unwrap();
    assert!((w - 1.0).abs() < 1e-14);
    assert_eq!(closed_form_example1(&[1.0; 4], 1), 1.0);
    // W has no limit at theta_bar: the closed form gives T/2 there, and 0 on
    // null points with x = z = 0.
    assert_eq!(closed_form_example1(&[0.0, 0.0, 1.0, 1.0], 12345), 12345.0 / 2.0);
    assert_eq!(closed_form_example1(&[0.0, 1.0, 0.0, 1.0], 12345), 0.0);
    let w = wald_statistic(&[1e-3, 2e-3, 1.0, 1.0], &eye(4), &c, 100).unwrap();
    assert!(close(w, closed_form_example1(&[1e-3, 2e-3, 1.0, 1.0], 100), 1e-10));

    let lin = CompiledSystem::new(&system(&["a", "b"], &["a - 1"], &["1", "0"]));
    assert_eq!(wald_statistic(&[1.0, 0.3], &eye(2), &lin, 50).unwrap(), 0.0);

    let scalar = CompiledSystem::new(&system(&["a"], &["a"], &["0"]));
    for (a, t) in [(0.3, 1u64), (-2.0, 10), (1e-3, 1_000_000)] {
        let w = wald_statistic(&[a], &[vec![1.0]], &scalar, t).unwrap();
        assert!(close(w, t as f64 * a * a, 1e-14), "{w}");
    }
}

#[test]
fn wald_matches_direct_inverse() {
    // 3x3 solve by cofactors as an independent route.
    fn inv3(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let c = |i: usize, j: usize| {
            let r: Vec<usize> = (0..3).filter(|&k| k != i).collect();
            let s: Vec<usize> = (0..3).filter(|&k| k != j).collect();
            m[r[0]][s[0]] * m[r[1]][s[1]] - m[r[0]][s[1]] * m[r[1]][s[0]]
        };
        let det: f64 = (0..3).map(|j| m[0][j] * c(0, j) * if j % 2 == 0 { 1.0 } else { -1.0 }).sum();
        (0..3)
            .map(|i| (0..3).map(|j| c(j, i) * if (i + j) % 2 == 0 { 1.0 } else { -1.0 } / det).collect())
            .collect()
    }
    let c = CompiledSystem::new(&example1());
    let v = vec![
        vec![2.0, 0.3, 0.0, 0.1],
        vec![0.3, 1.0, 0.2, 0.0],
        vec![0.0, 0.2, 1.5, 0.4],
        vec![0.1, 0.0, 0.4, 1.0],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let th: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = c.restrictions(&th);
        let jac = c.jacobian(&th);
        let m = mat_mul(&mat_mul(&jac, &v), &transpose(&jac));
        let mi = inv3(&m);
        let direct: f64 = 100.0 * (0..3).map(|i| (0..3).map(|j| g[i] * mi[i][j] * g[j]).sum::<f64>()).sum::<f64>();
        let w = wald_statistic(&th, &v, &c, 100).unwrap();
        assert!(close(w, direct, 1e-8), "{w} vs {direct}");
    }
}

#[test]
fn singular_metric_is_reported() {
    let c = CompiledSystem::new(&example1());
    // At theta_bar the Jacobian has rank 2.
    let r = wald_statistic(&[0.0, 0.0, 1.0, 1.0], &eye(4), &c, 10);
    assert!(matches!(r, Err(SimError::SingularMetric { .. })));
    let r = wald_statistic(&[0.0; 3], &eye(4), &c, 10);
    assert!(matches!(r, Err(SimError::DimensionMismatch { .. })));
}

#[test]
fn closed_form_agreement_and_invariance() {
    let sys = example1();
    let cf = verify::closed_form_agreement(&sys, 10_000, 7).unwrap();
    assert!(cf.passed() && cf.max_rel_error.unwrap() <= 1e-10, "{cf}");
    let inv = verify::transformation_invariance(&sys, &ex1_model(), 10, 100, 1000, 7).unwrap();
    assert!(inv.passed() && inv.max_rel_error.unwrap() <= 1e-8, "{inv}");
}

#[test]
fn eigenvalue_examples() {
    assert_eq!(symmetric_eigenvalues(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap(), vec![2.0, 1.0]);
    let ev = symmetric_eigenvalues(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] + 1.0).abs() < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let a: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut m = mat_mul(&a, &transpose(&a));
        for (i, row) in m.iter_mut().enumerate() {
            row[i] += 0.1;
        }
        let ev = symmetric_eigenvalues(&m).unwrap();
        assert!(ev.windows(2).all(|w| w[0] >= w[1]));
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let trace = m[0][0] + m[1][1] + m[2][2];
        assert!(close(ev.iter().product(), det, 1e-9));
        assert!(close(ev.iter().sum(), trace, 1e-9));
    }
    assert!(matches!(symmetric_eigenvalues(&[vec![1.0, 2.0], vec![0.0, 1.0]]), Err(SimError::NotSymmetric)));
}

#[test]
fn config_validation() {
    let sys = example1();
    let plan = plan_for(&sys, &Covariance::identity(4));
    let m = ex1_model();
    let few_points = ExperimentConfig::new(vec![10, 100, 1000], 200, 1);
    assert!(matches!(divergence_experiment(&sys, &plan, &m, &few_points), Err(SimError::InvalidGrid(_))));
    let unsorted = ExperimentConfig::new(vec![10, 1000, 100, 10_000], 200, 1);
    assert!(matches!(divergence_experiment(&sys, &plan, &m, &unsorted), Err(SimError::InvalidGrid(_))));
    let few_reps = ExperimentConfig::new(vec![10, 100, 1000, 10_000], 199, 1);
    assert!(matches!(divergence_experiment(&sys, &plan, &m, &few_reps), Err(SimError::TooFewReps { .. })));
}

#[test]
fn example1_divergence() {
    let sys = example1();
    let plan = plan_for(&sys, &Covariance::identity(4));
    let cfg = ExperimentConfig::new(vec![100, 1000, 10_000, 100_000], 2000, 42);
    let r = divergence_experiment(&sys, &plan, &ex1_model(), &cfg).unwrap();
    assert!((r.median_log_slope - 1.0).abs() <= 0.15, "slope {}", r.median_log_slope);
    assert_eq!(r.bound_violations, 0);
    assert_eq!(r.beta_bar, 1.0);
    assert!(r.wald_samples.iter().flatten().all(|w| *w >= 0.0));
    assert!(r.singular_fraction <= 0.05);
    for per_t in &r.eig_trajectories {
        assert!(per_t.iter().all(|ev| ev.windows(2).all(|w| w[0] >= w[1])));
    }
    assert_eq!(r.mu_samples.len(), 4);
}

#[test]
fn bit_identical_across_thread_counts() {
    let sys = example1();
    let plan = plan_for(&sys, &Covariance::identity(4));
    let run = |threads| {
        let cfg = ExperimentConfig {
            threads: Some(threads),
            ..ExperimentConfig::new(vec![10, 100, 1000, 10_000], 300, 17)
        };
        divergence_experiment(&sys, &plan, &ex1_model(), &cfg).unwrap()
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    let bits = |r: &SimResult| r.wald_samples.iter().flatten().map(|w| w.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one), bits(&four));
}

fn linear_check(vars: &[&str], g: &[&str], bar: &[&str], v: Vec<Vec<f64>>, q: usize) {
    let sys = system(vars, g, bar);
    let theta: Vec<f64> = bar.iter().map(|s| s.parse().unwrap()).collect();
    let model = EstimatorModel::new(theta, v.clone(), VhatMode::Exact).unwrap();
    let u = Covariance::new(scalar_matrix(
        &v.iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .iter()
            .map(|r| r.iter().map(String::as_str).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .iter()
            .map(Vec::as_slice)
            .collect::<Vec<_>>(),
    ))
    .unwrap();
    let plan = plan_for(&sys, &u);
    assert_eq!(plan.beta_bar, 0.0);
    let cfg = ExperimentConfig::new(vec![100, 1000, 10_000, 100_000], 2000, 42);
    let r = divergence_experiment(&sys, &plan, &model, &cfg).unwrap();
    assert!(r.median_log_slope.abs() <= 0.1, "slope {}", r.median_log_slope);
    let target = chi_square_median_oracle(q);
    for m in &r.median_wald {
        assert!((m / target - 1.0).abs() <= 0.15, "median {m} vs {target}");
    }
}

#[test]
fn linear_q1_is_chi_square() {
    linear_check(&["a", "b"], &["a - 1"], &["1", "2"], eye(2), 1);
}

#[test]
fn linear_q2_is_chi_square() {
    let v = vec![vec![2.0, 0.0, 0.5], vec![0.0, 1.0, 0.0], vec![0.5, 0.0, 3.0]];
    linear_check(&["a", "b", "c"], &["a + b", "c + 2*a - 2"], &["1", "-1", "0"], v, 2);
}

#[test]
fn scaled_trajectory_stabilizes() {
    let sys = example1();
    let plan = plan_for(&sys, &Covariance::identity(4));
    let cfg = ExperimentConfig::new(vec![1000, 10_000, 100_000], 2000, 42);
    let tr = scaled_eigen_trajectory(&sys, &plan, &ex1_model(), &cfg).unwrap();
    let ratio = tr.column(2)[0] / tr.column(2)[2];
    assert!((0.5..=2.0).contains(&ratio), "{:?}", tr.medians);
    assert!(tr.column(2).iter().all(|v| *v > 0.0));
}

#[test]
fn scaled_trajectory_linear_is_flat() {
    let sys = system(&["a", "b"], &["a - 1", "a + b"], &["1", "-1"]);
    let plan = plan_for(&sys, &Covariance::identity(2));
    let model = EstimatorModel::new(vec![1.0, -1.0], eye(2), VhatMode::Exact).unwrap();
    let cfg = ExperimentConfig::new(vec![100, 10_000, 1_000_000], 300, 42);
    let tr = scaled_eigen_trajectory(&sys, &plan, &model, &cfg).unwrap();
    for l in 0..2 {
        let c = tr.column(l);
        assert!(c.iter().all(|v| close(*v, c[0], 1e-12)), "{c:?}");
    }
}

#[test]
fn scaled_trajectory_at_singular_u_stabilizes() {
    let sys = example1();
    let u = example3_u();
    let plan = plan_for(&sys, &u);
    assert_eq!(plan.beta_bar, 2.0);
    let model = EstimatorModel::semidefinite(vec![0.0, 0.0, 1.0, 1.0], u.matrix().to_f64_rows(), VhatMode::Exact).unwrap();
    let cfg = ExperimentConfig::new(vec![1000, 10_000, 100_000], 2000, 42);
    let tr = scaled_eigen_trajectory(&sys, &plan, &model, &cfg).unwrap();
    assert!((0.5..=2.0).contains(&tr.last_ratio(2)), "{:?}", tr.medians);
}

#[test]
fn vanishing_rate_at_singular_u() {
    let sys = example1();
    let cfg = ExperimentConfig::new(vec![1000, 10_000, 100_000], 2000, 42);
    let v = vanishing_rate_experiment(&sys, &example3_u(), VhatMode::Exact, &cfg, 5).unwrap();
    assert_eq!(v.k, 3);
    assert!(v.trajectory.strictly_decreasing(2), "{:?}", v.trajectory.medians);
    assert_eq!(v.trajectory.exponents, vec![0.0, 0.0, 2.0]);
    // One more power of T compensates the extra vanishing order.
    let model = EstimatorModel::semidefinite(vec![0.0, 0.0, 1.0, 1.0], example3_u().matrix().to_f64_rows(), VhatMode::Exact).unwrap();
    let tr = unscaled_eigen_trajectory(&sys, &model, &[0.0, 0.0, 3.0], &cfg).unwrap();
    assert!((0.5..=2.0).contains(&tr.last_ratio(2)), "{:?}", tr.medians);
}

#[test]
fn generic_u_does_not_vanish() {
    let sys = example1();
    let cfg = ExperimentConfig::new(vec![1000, 10_000, 100_000], 2000, 42);
    let u = Covariance::random(4, &mut ChaCha8Rng::seed_from_u64(3));
    let model = EstimatorModel::new(vec![0.0, 0.0, 1.0, 1.0], u.matrix().to_f64_rows(), VhatMode::Exact).unwrap();
    let tr = unscaled_eigen_trajectory(&sys, &model, &[0.0, 0.0, 2.0], &cfg).unwrap();
    assert!((0.5..=2.0).contains(&tr.last_ratio(2)), "{:?}", tr.medians);
    let pre = vanishing_rate_experiment(&sys, &u, VhatMode::Exact, &cfg, 5);
    assert!(matches!(pre, Err(SimError::PreconditionUnmet(_))));
}
