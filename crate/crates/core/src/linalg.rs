//! Small dense row-major matrices with the handful of factorizations the
//! likelihood and prior code needs.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch { expected: c, got: rows.iter().map(Vec::len).max().unwrap_or(0) });
        }
        Ok(Self { rows: r, cols: c, data: rows.iter().flatten().copied().collect() })
    }

    /// Symmetric matrix from its lower triangle given row by row (row i has i+1 entries).
    pub fn from_lower_triangle(lower: &[Vec<T>]) -> Result<Self> {
        let n = lower.len();
        let mut m = Self::zeros(n, n);
        for (i, row) in lower.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::DimensionMismatch { expected: i + 1, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: T, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| ((i + 1)..self.cols).all(|j| self[(i, j)] == T::zero()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// Product of two square lower-triangular matrices; the result is lower triangular.
    pub fn matmul_lower(&self, other: &Self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for k in 0..=i {
                let a = self.data[i * n + k];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * n..k * n + k + 1];
                let out_row = &mut out.data[i * n..i * n + k + 1];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).fold(T::zero(), |acc, i| acc + self[(i, j)].abs()))
            .fold(T::zero(), T::max)
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }

    /// Lower Cholesky factor, or `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return None;
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(l)
    }

    /// LU decomposition with partial pivoting: returns (packed LU, permutation, sign).
    fn lu(&self) -> Result<(Self, Vec<usize>, T)> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch { expected: self.rows, got: self.cols });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let (p, max) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if max == T::zero() {
                return Err(Error::Format("singular matrix".into()));
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[(k, k)];
            for i in (k + 1)..n {
                let f = a[(i, k)] / pivot;
                a[(i, k)] = f;
                if f == T::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    let v = a[(k, j)];
                    a[(i, j)] = a[(i, j)] - f * v;
                }
            }
        }
        Ok((a, perm, sign))
    }

    /// Solves `self * X = rhs` for square `self`.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        let (lu, perm, _) = self.lu()?;
        let n = self.rows;
        let m = rhs.cols;
        let mut x = Self::zeros(n, m);
        for c in 0..m {
            let mut y: Vec<T> = (0..n).map(|i| rhs[(perm[i], c)]).collect();
            for i in 0..n {
                for k in 0..i {
                    y[i] = y[i] - lu[(i, k)] * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    y[i] = y[i] - lu[(i, k)] * y[k];
                }
                y[i] = y[i] / lu[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        Ok(x)
    }

    /// Forward substitution for lower-triangular `self`.
    pub fn solve_lower(&self, rhs: &Self) -> Self {
        let n = self.rows;
        let m = rhs.cols;
        let mut x = Self::zeros(n, m);
        for c in 0..m {
            for i in 0..n {
                let mut s = rhs[(i, c)];
                for k in 0..i {
                    s = s - self[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self[(i, i)];
            }
        }
        x
    }

    pub fn inverse(&self) -> Result<Self> {
        self.solve(&Self::identity(self.rows))
    }

    pub fn determinant(&self) -> T {
        match self.lu() {
            Ok((lu, _, sign)) => (0..self.rows).fold(sign, |acc, i| acc * lu[(i, i)]),
            Err(_) => T::zero(),
        }
    }

    pub fn symmetrize(&self) -> Self {
        let half = T::from_f64_lossy(0.5);
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[(i, j)] = half * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn solve_and_inverse() {
        let a = m(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 2.0]]);
        let inv = a.inverse().unwrap();
        let id = a.matmul(&inv);
        assert!(id.sub(&Matrix::identity(3)).frobenius() < 1e-12);
        assert!((a.determinant() - 18.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = m(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = a.cholesky().unwrap();
        assert!(l.matmul(&l.transpose()).sub(&a).frobenius() < 1e-12);
        assert!(m(&[&[1.0, 2.0], &[2.0, 1.0]]).cholesky().is_none());
    }

    #[test]
    fn lower_product_matches_dense() {
        let a = m(&[&[1.0, 0.0, 0.0], &[2.0, 3.0, 0.0], &[4.0, 5.0, 6.0]]);
        let b = m(&[&[7.0, 0.0, 0.0], &[8.0, 9.0, 0.0], &[1.0, 2.0, 3.0]]);
        assert_eq!(a.matmul_lower(&b), a.matmul(&b));
        assert!(a.is_lower_triangular());
        assert!(!a.transpose().is_lower_triangular());
    }

    #[test]
    fn symmetric_from_lower() {
        let s = Matrix::from_lower_triangle(&[vec![1.0], vec![0.5, 2.0]]).unwrap();
        assert_eq!(s, m(&[&[1.0, 0.5], &[0.5, 2.0]]));
    }

    #[test]
    fn works_in_f32() {
        let a = Matrix::<f32>::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let x = a.solve(&Matrix::identity(2)).unwrap();
        assert!((x[(1, 0)] + 0.5).abs() < 1e-6);
    }
}
