//! Dense matrices with exact entries: polynomial matrices and scalar matrices.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::poly::{join_ext, MultiPoly, PolyError, Scalar};

/// Row-major matrix of scalars from a common ℚ(√d).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl ScalarMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Scalar>) -> Result<Self, PolyError> {
        if data.len() != rows * cols {
            return Err(PolyError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        data.iter().try_fold(0, |d, s| join_ext(d, s.ext()))?;
        Ok(ScalarMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Result<Self, PolyError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(PolyError::DimensionMismatch {
                expected: c,
                found: bad.len(),
            });
        }
        ScalarMatrix::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ScalarMatrix {
            rows,
            cols,
            data: vec![Scalar::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = ScalarMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn permutation(order: &[usize]) -> Self {
        let n = order.len();
        let mut m = ScalarMatrix::zeros(n, n);
        for (i, &j) in order.iter().enumerate() {
            m.set(i, j, Scalar::one());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn ext(&self) -> u64 {
        self.data.iter().map(Scalar::ext).find(|&d| d != 0).unwrap_or(0)
    }

    pub fn transpose(&self) -> ScalarMatrix {
        let mut t = ScalarMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &ScalarMatrix) -> Result<ScalarMatrix, PolyError> {
        if self.cols != other.rows {
            return Err(PolyError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        join_ext(self.ext(), other.ext())?;
        let mut out = ScalarMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Scalar::zero();
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    if a.is_zero() {
                        continue;
                    }
                    acc = acc + a * other.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Row echelon reduction; returns the reduced matrix and the rank.
    fn eliminate(&self) -> (ScalarMatrix, usize, Scalar) {
        let mut m = self.clone();
        let mut rank = 0;
        let mut det_factor = Scalar::one();
        for col in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let Some(pivot) = (rank..m.rows).find(|&r| !m.get(r, col).is_zero()) else {
                continue;
            };
            if pivot != rank {
                for j in 0..m.cols {
                    m.data.swap(pivot * m.cols + j, rank * m.cols + j);
                }
                det_factor = -det_factor;
            }
            let p = m.get(rank, col).clone();
            det_factor = det_factor * &p;
            let inv = p.inv().expect("pivot is nonzero");
            for r in rank + 1..m.rows {
                let f = m.get(r, col) * &inv;
                if f.is_zero() {
                    continue;
                }
                for j in col..m.cols {
                    let v = m.get(r, j) - &(&f * m.get(rank, j));
                    m.set(r, j, v);
                }
            }
            rank += 1;
        }
        (m, rank, det_factor)
    }

    pub fn rank(&self) -> usize {
        self.eliminate().1
    }

    pub fn determinant(&self) -> Result<Scalar, PolyError> {
        if self.rows != self.cols {
            return Err(PolyError::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let (_, rank, det) = self.eliminate();
        Ok(if rank < self.rows { Scalar::zero() } else { det })
    }

    /// Pivots of the exact LDLᵀ factorization, or `None` if a pivot vanishes.
    pub fn ldl_pivots(&self) -> Option<Vec<Scalar>> {
        if !self.is_symmetric() {
            return None;
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let p = a.get(k, k).clone();
            let inv = p.inv()?;
            for i in k + 1..n {
                let f = a.get(i, k) * &inv;
                if f.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let v = a.get(i, j) - &(&f * a.get(k, j));
                    a.set(i, j, v);
                }
            }
            pivots.push(p);
        }
        Some(pivots)
    }

    /// Exact positive-definiteness: symmetric with all LDLᵀ pivots > 0.
    pub fn is_positive_definite(&self) -> bool {
        self.ldl_pivots()
            .is_some_and(|p| p.iter().all(|v| v.signum() == Ordering::Greater))
    }

    /// Exact positive semidefiniteness by diagonally pivoted elimination: a zero
    /// remaining diagonal must come with a zero row.
    pub fn is_positive_semidefinite(&self) -> bool {
        if !self.is_symmetric() {
            return false;
        }
        let mut a = self.clone();
        let mut active: Vec<usize> = (0..self.rows).collect();
        while !active.is_empty() {
            if active.iter().any(|&i| a.get(i, i).signum() == Ordering::Less) {
                return false;
            }
            let Some(pos) = active.iter().position(|&i| a.get(i, i).signum() == Ordering::Greater) else {
                return active.iter().all(|&i| active.iter().all(|&j| a.get(i, j).is_zero()));
            };
            let k = active.remove(pos);
            let inv = a.get(k, k).inv().expect("positive pivot");
            for &i in &active {
                let f = a.get(i, k) * &inv;
                if f.is_zero() {
                    continue;
                }
                for &j in &active {
                    let v = a.get(i, j) - &(&f * a.get(k, j));
                    a.set(i, j, v);
                }
            }
        }
        true
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(Scalar::to_f64).collect())
            .collect()
    }

    /// Square matrix with entries `num/den`, `num` in `[-range, range]`, `den` in `[1, range]`.
    pub fn random_rational<R: Rng + ?Sized>(rows: usize, cols: usize, range: i64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| random_rational(range, rng)).collect();
        ScalarMatrix { rows, cols, data }
    }
}

pub fn random_rational<R: Rng + ?Sized>(range: i64, rng: &mut R) -> Scalar {
    let num = rng.random_range(-range..=range);
    let den = rng.random_range(1..=range);
    Scalar::from_frac(num, den)
}

impl fmt::Display for ScalarMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(Scalar::to_string).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Row-major matrix of polynomials sharing the same variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    nvars: usize,
    entries: Vec<MultiPoly>,
}

impl PolyMatrix {
    pub fn new(rows: usize, cols: usize, nvars: usize, entries: Vec<MultiPoly>) -> Result<Self, PolyError> {
        if entries.len() != rows * cols {
            return Err(PolyError::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if let Some(bad) = entries.iter().find(|e| e.nvars() != nvars) {
            return Err(PolyError::VarCountMismatch {
                left: nvars,
                right: bad.nvars(),
            });
        }
        entries.iter().try_fold(0, |d, e| join_ext(d, e.ext()))?;
        Ok(PolyMatrix {
            rows,
            cols,
            nvars,
            entries,
        })
    }

    pub fn from_rows(nvars: usize, rows: Vec<Vec<MultiPoly>>) -> Result<Self, PolyError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(PolyError::DimensionMismatch {
                expected: c,
                found: bad.len(),
            });
        }
        PolyMatrix::new(r, c, nvars, rows.into_iter().flatten().collect())
    }

    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            nvars,
            entries: vec![MultiPoly::zero(nvars); rows * cols],
        }
    }

    /// Constant polynomial matrix.
    pub fn from_scalars(m: &ScalarMatrix, nvars: usize) -> Self {
        let entries = (0..m.rows())
            .flat_map(|i| (0..m.cols()).map(move |j| (i, j)))
            .map(|(i, j)| MultiPoly::constant(nvars, m.get(i, j).clone()))
            .collect();
        PolyMatrix {
            rows: m.rows(),
            cols: m.cols(),
            nvars,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn get(&self, i: usize, j: usize) -> &MultiPoly {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: MultiPoly) {
        assert_eq!(v.nvars(), self.nvars);
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[MultiPoly] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[MultiPoly] {
        &self.entries
    }

    pub fn transpose(&self) -> PolyMatrix {
        let mut t = PolyMatrix::zeros(self.cols, self.rows, self.nvars);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if self.cols != other.rows {
            return Err(PolyError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        if self.nvars != other.nvars {
            return Err(PolyError::VarCountMismatch {
                left: self.nvars,
                right: other.nvars,
            });
        }
        let mut out = PolyMatrix::zeros(self.rows, other.cols, self.nvars);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = MultiPoly::zero(self.nvars);
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.try_add(&a.try_mul(b)?)?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// `S · self` for a constant matrix `S`.
    pub fn left_mul_scalar(&self, s: &ScalarMatrix) -> Result<PolyMatrix, PolyError> {
        PolyMatrix::from_scalars(s, self.nvars).mul(self)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn evaluate(&self, point: &[Scalar]) -> Result<ScalarMatrix, PolyError> {
        let data = self
            .entries
            .iter()
            .map(|e| e.evaluate(point))
            .collect::<Result<Vec<_>, _>>()?;
        ScalarMatrix::new(self.rows, self.cols, data)
    }

    pub fn map<F: Fn(&MultiPoly) -> MultiPoly>(&self, f: F) -> PolyMatrix {
        let entries: Vec<MultiPoly> = self.entries.iter().map(f).collect();
        let nvars = entries.first().map_or(self.nvars, MultiPoly::nvars);
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            nvars,
            entries,
        }
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> PolyMatrix {
        let mut entries = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            for &j in idx {
                entries.push(self.get(i, j).clone());
            }
        }
        PolyMatrix {
            rows: idx.len(),
            cols: idx.len(),
            nvars: self.nvars,
            entries,
        }
    }

    /// Exact determinant by Laplace expansion memoised over column subsets.
    pub fn determinant(&self) -> Result<MultiPoly, PolyError> {
        if self.rows != self.cols {
            return Err(PolyError::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        assert!(n < 31, "determinant size limited to 30");
        // dets[mask] = det of rows 0..|mask| against the columns in mask
        let mut dets: Vec<MultiPoly> = vec![MultiPoly::zero(self.nvars); 1 << n];
        dets[0] = MultiPoly::one(self.nvars);
        for mask in 1usize..(1 << n) {
            let row = mask.count_ones() as usize - 1;
            let mut acc = MultiPoly::zero(self.nvars);
            for col in 0..n {
                if mask & (1 << col) == 0 {
                    continue;
                }
                let entry = self.get(row, col);
                let sub = &dets[mask & !(1 << col)];
                if entry.is_zero() || sub.is_zero() {
                    continue;
                }
                let later = (mask >> (col + 1)).count_ones();
                let term = entry.try_mul(sub)?;
                acc = if later % 2 == 0 {
                    acc.try_add(&term)?
                } else {
                    acc.try_sub(&term)?
                };
            }
            dets[mask] = acc;
        }
        Ok(dets.pop().unwrap())
    }

    pub fn display_with(&self, names: &[String]) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|e| e.display_with(names)).collect())
            .collect()
    }
}
