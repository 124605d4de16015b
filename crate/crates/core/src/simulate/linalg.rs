//! Small dense floating-point routines: Cholesky factorization, triangular
//! solves and cyclic Jacobi eigenvalues for symmetric matrices.

#![allow(clippy::needless_range_loop)]

use super::SimError;

/// Pivots at or below this fraction of the largest diagonal entry are treated as zero.
pub const PIVOT_TOL: f64 = 1e-12;
/// Jacobi stops once the off-diagonal Frobenius norm falls below this multiple of `‖M‖_F`.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Largest accepted condition number of an equilibrated metric matrix.
pub const MAX_CONDITION: f64 = 1e12;

fn dim_check(a: &[Vec<f64>]) -> Result<usize, SimError> {
    let n = a.len();
    if let Some(row) = a.iter().find(|r| r.len() != n) {
        return Err(SimError::DimensionMismatch {
            expected: n,
            found: row.len(),
        });
    }
    Ok(n)
}

fn max_diag(a: &[Vec<f64>]) -> f64 {
    (0..a.len()).map(|i| a[i][i].abs()).fold(0.0, f64::max)
}

/// Lower-triangular `L` with `A = L·Lᵀ`.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SimError> {
    let n = dim_check(a)?;
    let tol = PIVOT_TOL * max_diag(a).max(f64::MIN_POSITIVE);
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d.is_nan() || d <= tol {
            return Err(SimError::Cholesky { pivot: j + 1, value: d });
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..n {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / d;
        }
    }
    Ok(l)
}

/// A square-root factor `F` with `A = F·Fᵀ` for positive semidefinite `A`,
/// by diagonally pivoted Cholesky; columns past the numerical rank are zero.
pub fn psd_factor(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SimError> {
    let n = dim_check(a)?;
    let tol = PIVOT_TOL * max_diag(a).max(f64::MIN_POSITIVE);
    let mut r: Vec<Vec<f64>> = a.to_vec();
    let mut f = vec![vec![0.0; n]; n];
    let mut active: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let Some(pos) = (0..active.len()).max_by(|&x, &y| r[active[x]][active[x]].total_cmp(&r[active[y]][active[y]])) else {
            break;
        };
        let k = active[pos];
        let d = r[k][k];
        if d < -tol {
            return Err(SimError::Cholesky { pivot: k + 1, value: d });
        }
        if d <= tol {
            break;
        }
        active.swap_remove(pos);
        let s = d.sqrt();
        f[k][col] = s;
        for &i in &active {
            f[i][col] = r[i][k] / s;
        }
        for &i in &active {
            for &j in &active {
                r[i][j] -= f[i][col] * f[j][col];
            }
        }
    }
    Ok(f)
}

/// Solves `L·x = b` for lower-triangular `L`.
pub fn forward_substitute(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

/// Upper-triangular `R` (`q×q`) of the Householder QR factorization of an
/// `n×q` matrix with `n ≥ q`, so that `AᵀA = RᵀR`.
pub fn householder_r(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let q = a.first().map_or(0, Vec::len);
    let mut w = a.to_vec();
    for k in 0..q.min(n) {
        let norm = (k..n).map(|i| w[i][k] * w[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if w[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| w[i][k]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..q {
            let dot: f64 = (k..n).map(|i| v[i - k] * w[i][j]).sum();
            let f = 2.0 * dot / vv;
            for i in k..n {
                w[i][j] -= f * v[i - k];
            }
        }
    }
    (0..q).map(|i| (0..q).map(|j| if j >= i && i < n { w[i][j] } else { 0.0 }).collect()).collect()
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..m).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.first().map_or(0, Vec::len);
    (0..m).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// `A·M·Aᵀ` symmetrized to remove rounding asymmetry.
pub fn congruence(a: &[Vec<f64>], m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = mat_mul(&mat_mul(a, m), &transpose(a));
    let n = out.len();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Eigenvalues of a symmetric matrix in descending order, by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Result<Vec<f64>, SimError> {
    let n = dim_check(m)?;
    let norm = frobenius(m);
    for i in 0..n {
        for j in 0..i {
            if (m[i][j] - m[j][i]).abs() > 1e-10 * norm.max(f64::MIN_POSITIVE) {
                return Err(SimError::NotSymmetric);
            }
        }
    }
    let mut a = m.to_vec();
    let target = JACOBI_TOL * norm;
    let off = |a: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(SimError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}

/// Condition number of `D^{-1/2}·M·D^{-1/2}` with `D = diag(M)`, or `None`
/// when the matrix is not numerically positive definite.
pub fn equilibrated_condition(m: &[Vec<f64>]) -> Result<Option<f64>, SimError> {
    let n = dim_check(m)?;
    if (0..n).any(|i| m[i][i].is_nan() || m[i][i] <= 0.0) {
        return Ok(None);
    }
    let d: Vec<f64> = (0..n).map(|i| 1.0 / m[i][i].sqrt()).collect();
    let e: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[i][j] * d[i] * d[j]).collect()).collect();
    let ev = symmetric_eigenvalues(&e)?;
    let (max, min) = (ev[0], ev[n - 1]);
    Ok((min > 0.0).then(|| max / min))
}
