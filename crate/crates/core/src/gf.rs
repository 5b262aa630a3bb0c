//! Prime-field arithmetic and dense linear algebra over F_q.
//!
//! Every scalar in the crate lives in a prime field with modulus below 2^32,
//! so a product of two reduced residues always fits in a `u64` before
//! reduction. Matrices are small and dense; elimination is plain row
//! reduction with exact arithmetic.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The Mersenne prime 2^31 - 1.
pub const DEFAULT_MODULUS: u64 = 2_147_483_647;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("modulus {0} is not prime")]
    NonPrimeModulus(u64),
    #[error("modulus {0} is too large (must be below 2^32)")]
    ModulusTooLarge(u64),
    #[error("right-hand side is outside the column span")]
    NoSolution,
    #[error("columns are linearly dependent (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// A residue in `[0, q)`. Only a [`Field`] creates non-zero values, which
/// keeps every element reduced.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Fe(u64);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Deterministic Miller-Rabin, exact for every `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &BASES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Arithmetic context for the prime field F_q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    q: u64,
}

impl Default for Field {
    fn default() -> Self {
        Field { q: DEFAULT_MODULUS }
    }
}

impl Field {
    pub fn new(q: u64) -> Result<Self, GfError> {
        if q > u32::MAX as u64 {
            return Err(GfError::ModulusTooLarge(q));
        }
        if !is_prime(q) {
            return Err(GfError::NonPrimeModulus(q));
        }
        Ok(Field { q })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn elem(&self, v: u64) -> Fe {
        Fe(v % self.q)
    }

    /// Reduces a signed integer into the field.
    pub fn elem_i64(&self, v: i64) -> Fe {
        Fe(v.rem_euclid(self.q as i64) as u64)
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        let s = a.0 + b.0;
        Fe(if s >= self.q { s - self.q } else { s })
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        Fe(if a.0 >= b.0 {
            a.0 - b.0
        } else {
            self.q - (b.0 - a.0)
        })
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        Fe(if a.0 == 0 { 0 } else { self.q - a.0 })
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        Fe(a.0 * b.0 % self.q)
    }

    pub fn pow(&self, mut base: Fe, mut exp: u64) -> Fe {
        let mut acc = Fe::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat's little theorem, `a^(q-2)`.
    pub fn inv(&self, a: Fe) -> Option<Fe> {
        if a.is_zero() {
            None
        } else {
            Some(self.pow(a, self.q - 2))
        }
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        Fe(rng.gen_range(0..self.q))
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        Fe(rng.gen_range(1..self.q))
    }

    pub fn sum<I: IntoIterator<Item = Fe>>(&self, it: I) -> Fe {
        it.into_iter().fold(Fe::ZERO, |acc, x| self.add(acc, x))
    }

    pub fn product<I: IntoIterator<Item = Fe>>(&self, it: I) -> Fe {
        it.into_iter().fold(Fe::ONE, |acc, x| self.mul(acc, x))
    }

    pub fn dot(&self, a: &[Fe], b: &[Fe]) -> Fe {
        self.sum(a.iter().zip(b).map(|(&x, &y)| self.mul(x, y)))
    }

    pub fn mat_vec(&self, m: &Matrix, x: &[Fe]) -> Result<Vec<Fe>, GfError> {
        if x.len() != m.cols {
            return Err(GfError::Shape(format!(
                "{}x{} matrix times vector of length {}",
                m.rows,
                m.cols,
                x.len()
            )));
        }
        Ok((0..m.rows).map(|r| self.dot(m.row(r), x)).collect())
    }

    pub fn mat_mul(&self, a: &Matrix, b: &Matrix) -> Result<Matrix, GfError> {
        if a.cols != b.rows {
            return Err(GfError::Shape(format!(
                "{}x{} times {}x{}",
                a.rows, a.cols, b.rows, b.cols
            )));
        }
        let mut out = Matrix::zeros(a.rows, b.cols);
        for r in 0..a.rows {
            for k in 0..a.cols {
                let lhs = a[(r, k)];
                if lhs.is_zero() {
                    continue;
                }
                for c in 0..b.cols {
                    out[(r, c)] = self.add(out[(r, c)], self.mul(lhs, b[(k, c)]));
                }
            }
        }
        Ok(out)
    }

    /// Reduces `m` in place to reduced row echelon form and returns the pivot
    /// column of each non-zero row.
    pub fn row_reduce(&self, m: &mut Matrix) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| !m[(r, col)].is_zero()) else {
                continue;
            };
            m.swap_rows(row, p);
            let scale = self.inv(m[(row, col)]).expect("pivot is non-zero");
            for c in col..m.cols {
                m[(row, c)] = self.mul(m[(row, c)], scale);
            }
            for r in 0..m.rows {
                if r == row {
                    continue;
                }
                let factor = m[(r, col)];
                if factor.is_zero() {
                    continue;
                }
                for c in col..m.cols {
                    let delta = self.mul(factor, m[(row, c)]);
                    m[(r, c)] = self.sub(m[(r, c)], delta);
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self, m: &Matrix) -> usize {
        let mut work = m.clone();
        self.row_reduce(&mut work).len()
    }

    /// Solves `a * x = y` for a matrix with full column rank.
    pub fn solve(&self, a: &Matrix, y: &[Fe]) -> Result<Vec<Fe>, GfError> {
        if y.len() != a.rows {
            return Err(GfError::Shape(format!(
                "{} rows but right-hand side of length {}",
                a.rows,
                y.len()
            )));
        }
        let mut aug = Matrix::zeros(a.rows, a.cols + 1);
        for r in 0..a.rows {
            for c in 0..a.cols {
                aug[(r, c)] = a[(r, c)];
            }
            aug[(r, a.cols)] = y[r];
        }
        let pivots = self.row_reduce(&mut aug);
        let rank = pivots.iter().filter(|&&c| c < a.cols).count();
        if rank < a.cols {
            return Err(GfError::RankDeficient { rank, cols: a.cols });
        }
        if pivots.last() == Some(&a.cols) {
            return Err(GfError::NoSolution);
        }
        Ok((0..a.cols).map(|r| aug[(r, a.cols)]).collect())
    }

    pub fn inverse(&self, m: &Matrix) -> Option<Matrix> {
        if m.rows != m.cols {
            return None;
        }
        let n = m.rows;
        let mut aug = Matrix::zeros(n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug[(r, c)] = m[(r, c)];
            }
            aug[(r, n + r)] = Fe::ONE;
        }
        let pivots = self.row_reduce(&mut aug);
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut out = Matrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] = aug[(r, n + c)];
            }
        }
        Some(out)
    }
}

/// Dense row-major matrix over F_q.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Fe>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Fe::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Fe::ONE;
        }
        m
    }

    /// Builds a matrix from integer rows, reducing each entry into `field`.
    pub fn from_rows<R: AsRef<[u64]>>(field: &Field, rows: &[R]) -> Result<Self, GfError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(GfError::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend(r.iter().map(|&v| field.elem(v)));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Stacks column vectors side by side. All columns must share a length;
    /// `rows` fixes the height when there are no columns.
    pub fn from_columns(rows: usize, columns: &[Vec<Fe>]) -> Result<Self, GfError> {
        let mut m = Matrix::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(GfError::Shape(format!(
                    "column {c} has length {}, expected {rows}",
                    col.len()
                )));
            }
            for (r, &v) in col.iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }

    pub fn random<R: Rng + ?Sized>(field: &Field, rows: usize, cols: usize, rng: &mut R) -> Self {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| field.random(rng)).collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Fe] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Fe> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn hstack(&self, other: &Matrix) -> Result<Matrix, GfError> {
        if self.rows != other.rows {
            return Err(GfError::Shape(format!(
                "cannot join {} rows with {} rows",
                self.rows, other.rows
            )));
        }
        let mut cols: Vec<Vec<Fe>> = (0..self.cols).map(|c| self.column(c)).collect();
        cols.extend((0..other.cols).map(|c| other.column(c)));
        Matrix::from_columns(self.rows, &cols)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Fe;

    fn index(&self, (r, c): (usize, usize)) -> &Fe {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Fe {
        &mut self.data[r * self.cols + c]
    }
}
