//! Dense square matrices of small dimension.
//!
//! State dimensions in this crate are tiny (d is single digits), so a plain
//! row-major `Vec` with textbook algorithms is the right tool: no BLAS, no
//! panic-free generics gymnastics, everything observable in a debugger.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMat<T> {
    dim: usize,
    // Row-major, length dim².
    data: Vec<T>,
}

impl<T: Real> SquareMat<T> {
    pub fn from_rows(dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "matrix construction",
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("data", "matrix entries must be finite"));
        }
        Ok(SquareMat { dim, data })
    }

    /// Construct from nested rows; every row must have length `rows.len()`.
    pub fn from_nested(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows", "rows must form a square matrix"));
        }
        Self::from_rows(dim, rows.iter().flatten().copied().collect())
    }

    pub fn zeros(dim: usize) -> Self {
        SquareMat {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = T::one();
        }
        m
    }

    pub fn scaled_identity(dim: usize, c: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j];
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        SquareMat { dim: self.dim, data }
    }

    pub fn scale(&self, c: T) -> Self {
        SquareMat {
            dim: self.dim,
            data: self.data.iter().map(|&a| a * c).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let aik = self.data[i * d + k];
                for j in 0..d {
                    out.data[i * d + j] = out.data[i * d + j] + aik * other.data[k * d + j];
                }
            }
        }
        out
    }

    /// `y = A x`, writing into `out`.
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), d);
        for i in 0..d {
            let mut acc = T::zero();
            for j in 0..d {
                acc = acc + self.data[i * d + j] * x[j];
            }
            out[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn max_abs_entry(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    /// Spectral (operator 2-) norm via power iteration on `AᵀA`.
    ///
    /// Deterministic start vector; converges geometrically for the small
    /// matrices used here.  Relative accuracy is ~1e-13, comfortably inside
    /// the 1e-12 checks performed on declared contraction exponents.
    pub fn operator_norm(&self) -> T {
        let d = self.dim;
        if d == 1 {
            return self.data[0].abs();
        }
        let ata = self.transpose().matmul(self);
        // Start from a fixed dense vector so results are reproducible.
        let mut v: Vec<T> = (0..d)
            .map(|i| T::of(1.0 + (i as f64) * 0.382_748_91))
            .collect();
        let norm = |x: &[T]| x.iter().map(|&a| a * a).sum::<T>().sqrt();
        let n0 = norm(&v);
        v.iter_mut().for_each(|x| *x = *x / n0);
        let mut lambda = T::zero();
        let mut w = vec![T::zero(); d];
        for _ in 0..500 {
            ata.mul_vec_into(&v, &mut w);
            let nw = norm(&w);
            if nw == T::zero() {
                return T::zero();
            }
            let next = nw;
            w.iter_mut().for_each(|x| *x = *x / nw);
            std::mem::swap(&mut v, &mut w);
            if (next - lambda).abs() <= T::of(1e-15) * next.max(T::one()) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda.sqrt()
    }

    /// Lower-triangular Cholesky factor of a symmetric positive
    /// *semi*-definite matrix.  Semi-definiteness is handled by flushing
    /// trace-scale negative round-off on the diagonal to zero; genuinely
    /// indefinite input is an error.
    pub fn cholesky(&self) -> Result<Self> {
        let d = self.dim;
        let tol = T::of(1e-12) * self.max_abs_entry().max(T::one());
        let mut l = Self::zeros(d);
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s = s - l.at(i, k) * l.at(j, k);
                }
                if i == j {
                    if s < -tol {
                        return Err(Error::invalid(
                            "cov",
                            "matrix is not positive semi-definite",
                        ));
                    }
                    l.set(i, i, s.max(T::zero()).sqrt());
                } else {
                    let ljj = l.at(j, j);
                    l.set(i, j, if ljj == T::zero() { T::zero() } else { s / ljj });
                }
            }
        }
        Ok(l)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_wrong_length_and_nan() {
        assert!(SquareMat::<f64>::from_rows(2, vec![1.0; 3]).is_err());
        assert!(SquareMat::<f64>::from_rows(1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn operator_norm_of_diagonal_is_max_abs() {
        let m = SquareMat::from_rows(2, vec![-3.0, 0.0, 0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(m.operator_norm(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn operator_norm_of_rotation_scaled() {
        // 0.8 × (rotation by 30°): operator norm exactly 0.8.
        let c = 0.8 * (30f64).to_radians().cos();
        let s = 0.8 * (30f64).to_radians().sin();
        let m = SquareMat::from_rows(2, vec![c, -s, s, c]).unwrap();
        assert_abs_diff_eq!(m.operator_norm(), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = SquareMat::from_rows(2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let l = m.cholesky().unwrap();
        let back = l.matmul(&l.transpose());
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(back.at(i, j), m.at(i, j), epsilon = 1e-12);
            }
        }
        // Semi-definite (rank one) input is accepted.
        let r1 = SquareMat::from_rows(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(r1.cholesky().is_ok());
        let bad = SquareMat::from_rows(2, vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(bad.cholesky().is_err());
    }

    #[test]
    fn matmul_and_vec() {
        let a = SquareMat::from_rows(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let v = a.mul_vec(&[1.0, 1.0]);
        assert_eq!(v, vec![3.0, 7.0]);
        let sq = a.matmul(&a);
        assert_eq!(sq.rows(), &[7.0, 10.0, 15.0, 22.0]);
    }
}
