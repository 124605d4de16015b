//! Restriction systems `g(θ) = 0`, their Jacobians, lowest-degree row
//! structure, echelon transformation and the FRALD-T verdict.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{random_rational, PolyMatrix, ScalarMatrix};
use crate::poly::{Degree, Monomial, MultiPoly, PolyError, Scalar};

/// Numerators and denominators of random evaluation points for [`poly_rank`].
pub const RANK_POINT_RANGE: i64 = 1_000_000;
pub const DEFAULT_RANK_TRIALS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RestrictionError {
    #[error("null hypothesis violated: g_{index}(theta_bar) = {value}")]
    NullViolated { index: usize, value: String },
    #[error("row {row} of the Jacobian is identically zero")]
    ZeroRow { row: usize },
    #[error("row {row} of S*G vanished identically; the Jacobian does not have rank q")]
    RankDeficientInput { row: usize },
    #[error("{q} restrictions exceed the parameter dimension {p}")]
    TooManyRestrictions { q: usize, p: usize },
    #[error("system has no restrictions")]
    Empty,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `H₀: g(θ) = 0` at the null point `θ̄`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictionSystem {
    var_names: Vec<String>,
    g: Vec<MultiPoly>,
    theta_bar: Vec<Scalar>,
}

impl RestrictionSystem {
    pub fn new(var_names: Vec<String>, g: Vec<MultiPoly>, theta_bar: Vec<Scalar>) -> Result<Self, RestrictionError> {
        let p = var_names.len();
        if g.is_empty() {
            return Err(RestrictionError::Empty);
        }
        if g.len() > p {
            return Err(RestrictionError::TooManyRestrictions { q: g.len(), p });
        }
        if theta_bar.len() != p {
            return Err(PolyError::DimensionMismatch {
                expected: p,
                found: theta_bar.len(),
            }
            .into());
        }
        if let Some(bad) = g.iter().find(|gl| gl.nvars() != p) {
            return Err(PolyError::VarCountMismatch {
                left: p,
                right: bad.nvars(),
            }
            .into());
        }
        Ok(RestrictionSystem { var_names, g, theta_bar })
    }

    pub fn p(&self) -> usize {
        self.var_names.len()
    }

    pub fn q(&self) -> usize {
        self.g.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn restrictions(&self) -> &[MultiPoly] {
        &self.g
    }

    pub fn theta_bar(&self) -> &[Scalar] {
        &self.theta_bar
    }

    /// Index and value of the first restriction not vanishing at `θ̄`.
    pub fn null_violation(&self) -> Result<Option<(usize, Scalar)>, RestrictionError> {
        for (l, gl) in self.g.iter().enumerate() {
            let v = gl.evaluate(&self.theta_bar)?;
            if !v.is_zero() {
                return Ok(Some((l, v)));
            }
        }
        Ok(None)
    }

    pub fn null_holds(&self) -> Result<bool, RestrictionError> {
        Ok(self.null_violation()?.is_none())
    }

    /// The system in deviation coordinates `u = θ − θ̄` (so `θ̄` becomes 0).
    pub fn recenter(&self) -> Result<RestrictionSystem, RestrictionError> {
        if let Some((index, value)) = self.null_violation()? {
            return Err(RestrictionError::NullViolated {
                index: index + 1,
                value: value.to_string(),
            });
        }
        let g = self
            .g
            .iter()
            .map(|gl| gl.shift_origin(&self.theta_bar))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RestrictionSystem {
            var_names: self.var_names.clone(),
            g,
            theta_bar: vec![Scalar::zero(); self.p()],
        })
    }

    /// `G(θ) = ∂g/∂θ′`, a `q × p` polynomial matrix.
    pub fn jacobian(&self) -> PolyMatrix {
        let p = self.p();
        let rows = self
            .g
            .iter()
            .map(|gl| {
                (0..p)
                    .map(|k| gl.partial_derivative(k).expect("index within nvars"))
                    .collect()
            })
            .collect();
        PolyMatrix::from_rows(p, rows).expect("entries share nvars")
    }

    /// Restrictions `S·g` for a constant `q × q` matrix `S`.
    pub fn transformed(&self, s: &ScalarMatrix) -> Result<RestrictionSystem, RestrictionError> {
        if s.rows() != self.q() || s.cols() != self.q() {
            return Err(PolyError::DimensionMismatch {
                expected: self.q(),
                found: s.cols(),
            }
            .into());
        }
        let p = self.p();
        let mut g = Vec::with_capacity(self.q());
        for i in 0..self.q() {
            let mut acc = MultiPoly::zero(p);
            for (j, gj) in self.g.iter().enumerate() {
                acc = acc.try_add(&gj.scale(s.get(i, j)))?;
            }
            g.push(acc);
        }
        Ok(RestrictionSystem {
            var_names: self.var_names.clone(),
            g,
            theta_bar: self.theta_bar.clone(),
        })
    }

    /// Variable names with a `~` suffix where `θ̄_k ≠ 0`, for deviation coordinates.
    pub fn deviation_names(&self) -> Vec<String> {
        self.var_names
            .iter()
            .zip(&self.theta_bar)
            .map(|(n, t)| if t.is_zero() { n.clone() } else { format!("{n}~") })
            .collect()
    }
}

/// `G = low + rest`, with each row of `low` homogeneous of degree `row_degrees[l]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LowestMatrix {
    pub low: PolyMatrix,
    pub rest: PolyMatrix,
    pub row_degrees: Vec<u32>,
}

/// Row-wise lowest-degree homogeneous part of a (recentered) polynomial matrix.
pub fn lowest_matrix(g: &PolyMatrix) -> Result<LowestMatrix, RestrictionError> {
    let mut low = PolyMatrix::zeros(g.rows(), g.cols(), g.nvars());
    let mut rest = PolyMatrix::zeros(g.rows(), g.cols(), g.nvars());
    let mut row_degrees = Vec::with_capacity(g.rows());
    for i in 0..g.rows() {
        let degree = g
            .row(i)
            .iter()
            .map(MultiPoly::lowest_degree)
            .min()
            .and_then(Degree::finite)
            .ok_or(RestrictionError::ZeroRow { row: i + 1 })?;
        for j in 0..g.cols() {
            let entry = g.get(i, j);
            let part = entry.homogeneous_component(degree);
            rest.set(i, j, entry - &part);
            low.set(i, j, part);
        }
        row_degrees.push(degree);
    }
    Ok(LowestMatrix { low, rest, row_degrees })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchelonBlock {
    /// Number of rows `n_i` in the block.
    pub rows: usize,
    /// Common degree `s̄_i` of the block's lowest-degree parts.
    pub degree: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EchelonForm {
    /// Non-degenerate constant transformation `S`.
    pub transform: ScalarMatrix,
    /// Blocks in strictly increasing degree order.
    pub blocks: Vec<EchelonBlock>,
    /// Lowest-degree matrix of `S·G`, rows linearly independent.
    pub low_matrix: PolyMatrix,
    /// `S·G`.
    pub full_matrix: PolyMatrix,
}

impl EchelonForm {
    /// Degree `s̄` of each row, in row order.
    pub fn row_degrees(&self) -> Vec<u32> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.degree, b.rows))
            .collect()
    }
}

type CoeffVec = BTreeMap<(usize, Monomial), Scalar>;

fn coefficient_vector(row: &[MultiPoly]) -> CoeffVec {
    let mut v = BTreeMap::new();
    for (j, entry) in row.iter().enumerate() {
        for (m, c) in entry.terms() {
            v.insert((j, m.clone()), c.clone());
        }
    }
    v
}

/// `a -= f·b` on sparse vectors.
fn axpy(a: &mut CoeffVec, f: &Scalar, b: &CoeffVec) {
    for (k, bv) in b {
        let delta = f * bv;
        let entry = a.entry(k.clone()).or_insert_with(Scalar::zero);
        *entry = &*entry - &delta;
        if entry.is_zero() {
            a.remove(k);
        }
    }
}

/// Finds a real-linear dependency among the lowest parts of rows of equal
/// degree. Returns the highest-index row of the first dependency found and
/// combination coefficients (with coefficient 1 on that row).
fn find_dependency(lowest: &LowestMatrix) -> Option<(usize, Vec<Scalar>)> {
    let q = lowest.low.rows();
    let mut by_degree: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &d) in lowest.row_degrees.iter().enumerate() {
        by_degree.entry(d).or_default().push(i);
    }
    for rows in by_degree.values() {
        // reduced basis: (pivot key, vector, combination over rows)
        let mut basis: Vec<((usize, Monomial), CoeffVec, Vec<Scalar>)> = Vec::new();
        for &i in rows {
            let mut v = coefficient_vector(lowest.low.row(i));
            let mut combo = vec![Scalar::zero(); q];
            combo[i] = Scalar::one();
            for (pivot, bvec, bcombo) in &basis {
                if let Some(c) = v.get(pivot).cloned() {
                    let f = &c / &bvec[pivot];
                    axpy(&mut v, &f, bvec);
                    for (x, y) in combo.iter_mut().zip(bcombo) {
                        *x = &*x - &(&f * y);
                    }
                }
            }
            if v.is_empty() {
                return Some((i, combo));
            }
            let pivot = v.keys().next().unwrap().clone();
            for (_, bvec, bcombo) in basis.iter_mut() {
                if let Some(c) = bvec.get(&pivot).cloned() {
                    let f = &c / &v[&pivot];
                    axpy(bvec, &f, &v);
                    for (x, y) in bcombo.iter_mut().zip(&combo) {
                        *x = &*x - &(&f * y);
                    }
                }
            }
            basis.push((pivot, v, combo));
        }
    }
    None
}

/// Finds `S` with `det S ≠ 0` such that the lowest-degree rows of `S·G` are
/// linearly independent and sorted by degree.
///
/// Dependent rows are replaced by the combination that cancels their lowest
/// part, which strictly raises that row's degree; rows are finally sorted
/// by degree with the permutation folded into `S`.
pub fn echelonize(g: &PolyMatrix) -> Result<EchelonForm, RestrictionError> {
    let q = g.rows();
    let mut s = ScalarMatrix::identity(q);
    let mut sg = g.clone();
    let lowest = loop {
        let lowest = match lowest_matrix(&sg) {
            Ok(l) => l,
            Err(RestrictionError::ZeroRow { row }) => return Err(RestrictionError::RankDeficientInput { row }),
            Err(e) => return Err(e),
        };
        let Some((target, combo)) = find_dependency(&lowest) else {
            break lowest;
        };
        for j in 0..sg.cols() {
            let mut acc = MultiPoly::zero(sg.nvars());
            for (i, c) in combo.iter().enumerate() {
                if !c.is_zero() {
                    acc = acc.try_add(&sg.get(i, j).scale(c))?;
                }
            }
            sg.set(target, j, acc);
        }
        for j in 0..q {
            let mut acc = Scalar::zero();
            for (i, c) in combo.iter().enumerate() {
                acc = acc + c * s.get(i, j);
            }
            s.set(target, j, acc);
        }
    };

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by_key(|&i| (lowest.row_degrees[i], i));
    let perm = ScalarMatrix::permutation(&order);
    let transform = perm.mul(&s)?;
    let full_matrix = sg.left_mul_scalar(&perm)?;
    let low_matrix = lowest.low.left_mul_scalar(&perm)?;

    let mut blocks: Vec<EchelonBlock> = Vec::new();
    for &i in &order {
        let d = lowest.row_degrees[i];
        match blocks.last_mut() {
            Some(b) if b.degree == d => b.rows += 1,
            _ => blocks.push(EchelonBlock { rows: 1, degree: d }),
        }
    }
    Ok(EchelonForm {
        transform,
        blocks,
        low_matrix,
        full_matrix,
    })
}

/// Rank of a polynomial matrix as the maximum exact rank over `trials`
/// random rational evaluation points.
pub fn poly_rank<R: Rng + ?Sized>(m: &PolyMatrix, trials: usize, rng: &mut R) -> usize {
    let full = m.rows().min(m.cols());
    let mut best = 0;
    for _ in 0..trials.max(1) {
        let point: Vec<Scalar> = (0..m.nvars()).map(|_| random_rational(RANK_POINT_RANGE, rng)).collect();
        let value = m.evaluate(&point).expect("point has nvars entries");
        best = best.max(value.rank());
        if best == full {
            break;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FraldVerdict {
    pub rank_r: usize,
    pub frald_t_holds: bool,
    pub echelon: EchelonForm,
}

/// Recenter, differentiate, echelonize and rank the lowest-degree matrix.
pub fn frald_check<R: Rng + ?Sized>(
    sys: &RestrictionSystem,
    trials: usize,
    rng: &mut R,
) -> Result<FraldVerdict, RestrictionError> {
    let centered = sys.recenter()?;
    let echelon = echelonize(&centered.jacobian())?;
    let rank_r = poly_rank(&echelon.low_matrix, trials, rng);
    Ok(FraldVerdict {
        rank_r,
        frald_t_holds: rank_r == sys.q(),
        echelon,
    })
}
