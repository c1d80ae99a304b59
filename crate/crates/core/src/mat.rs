//! Dense real square matrices and the bracket/symmetry primitives the flows
//! are built from.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default relative tolerance used by the classification routines.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Dense `n x n` real matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Mat {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Matrix unit `E_ij` (zero-based indices).
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n);
        m[(i, j)] = 1.0;
        m
    }

    /// Builds a matrix from rows, rejecting ragged, empty or non-finite input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidMatrix("matrix has no rows".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n} (matrix must be square)",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(n, data)
    }

    /// Builds a matrix from a row-major buffer of length `n * n`.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        if data.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "buffer of length {} does not hold a {n}x{n} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) is not finite",
                pos / n,
                pos % n
            )));
        }
        Ok(Mat { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn pow(&self, k: u32) -> Mat {
        let mut out = Mat::identity(self.n);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Skew-symmetric part `(A - A^t) / 2`.
    pub fn skew_part(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] - self[(j, i)]))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    fn check_same_dim(&self, other: &Mat) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    pub(crate) fn to_na(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub(crate) fn from_na(m: &nalgebra::DMatrix<f64>) -> Mat {
        Mat::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    pub fn determinant(&self) -> f64 {
        self.to_na().determinant()
    }

    pub fn inverse(&self) -> Option<Mat> {
        self.to_na().try_inverse().map(|m| Mat::from_na(&m))
    }

    /// 2-norm condition number; infinite for singular matrices.
    pub fn condition_number(&self) -> f64 {
        let sv = self.to_na().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{:?}", self.rows())
    }
}

impl<'a> Add<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        Mat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        Mat {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Mul<f64> for &Mat {
    type Output = Mat;
    fn mul(self, c: f64) -> Mat {
        self.scale(c)
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl AddAssign<&Mat> for Mat {
    fn add_assign(&mut self, rhs: &Mat) {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Mat> for Mat {
    fn sub_assign(&mut self, rhs: &Mat) {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Mat::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// `[X, Y] = XY - YX`.
pub fn commutator(x: &Mat, y: &Mat) -> Result<Mat> {
    x.check_same_dim(y)?;
    Ok(bracket(x, y))
}

/// Unchecked commutator for internal use where dimensions agree by construction.
#[inline]
pub(crate) fn bracket(x: &Mat, y: &Mat) -> Mat {
    &(x * y) - &(y * x)
}

/// `[A, A^t]`, the moment-map direction.
pub fn self_commutator(a: &Mat) -> Mat {
    let at = a.transpose();
    bracket(a, &at)
}

/// Symmetric part `S(A) = (A + A^t) / 2`; symmetric bit for bit.
pub fn sym_part(a: &Mat) -> Mat {
    let n = a.dim();
    let mut out = Mat::zeros(n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Frobenius inner product `tr(X Y^t)`.
pub fn frob_inner(x: &Mat, y: &Mat) -> Result<f64> {
    x.check_same_dim(y)?;
    Ok(dot(x, y))
}

#[inline]
pub(crate) fn dot(x: &Mat, y: &Mat) -> f64 {
    x.data.iter().zip(&y.data).map(|(a, b)| a * b).sum()
}

pub fn frob_norm(x: &Mat) -> f64 {
    x.norm()
}

/// `tr(S(A)^2)`.
pub fn tr_sym_sq(a: &Mat) -> f64 {
    sym_part(a).norm_sq()
}

/// `tr(A^2)` without forming the product.
pub fn tr_sq(a: &Mat) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * a[(j, i)];
        }
    }
    s
}

/// Coarse structural label of a matrix; the most specific one is reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixClass {
    Skew,
    Normal,
    Nilpotent,
    Generic,
}

/// `true` when `||A^n|| <= tol * ||A||^n`.
pub fn is_nilpotent(a: &Mat, tol: f64) -> bool {
    let norm = a.norm();
    if norm == 0.0 {
        return true;
    }
    // Work with A/||A|| so the power cannot under- or overflow.
    let b = a.scale(1.0 / norm);
    b.pow(a.dim() as u32).norm() <= tol
}

pub fn classify_matrix(a: &Mat, tol: f64) -> MatrixClass {
    assert!(tol > 0.0, "tolerance must be positive");
    let norm = a.norm();
    if norm == 0.0 {
        return MatrixClass::Skew;
    }
    let b = a.scale(1.0 / norm);
    let sym = (&b + &b.transpose()).norm();
    if sym <= tol {
        MatrixClass::Skew
    } else if self_commutator(&b).norm() <= tol {
        MatrixClass::Normal
    } else if is_nilpotent(&b, tol) {
        MatrixClass::Nilpotent
    } else {
        MatrixClass::Generic
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize, j: usize) -> Mat {
        Mat::unit(n, i, j)
    }

    #[test]
    fn commutator_of_matrix_units() {
        let c = commutator(&e(2, 0, 1), &e(2, 1, 0)).unwrap();
        assert_eq!(c, Mat::diag(&[1.0, -1.0]));
    }

    #[test]
    fn commutator_rejects_mismatch() {
        let err = commutator(&Mat::zeros(2), &Mat::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { left: 2, right: 3 }));
        assert!(frob_inner(&Mat::zeros(2), &Mat::zeros(3)).is_err());
    }

    #[test]
    fn diagonal_matrices_commute() {
        let x = Mat::diag(&[1.0, 2.0, 3.0]);
        let y = Mat::diag(&[-4.0, 0.5, 7.0]);
        assert!(commutator(&x, &y).unwrap().is_zero());
        assert!(commutator(&x, &x).unwrap().is_zero());
    }

    #[test]
    fn symmetric_part_cases() {
        let skew = Mat::from_rows(&[[0.0, 2.0], [-2.0, 0.0]]).unwrap();
        assert!(sym_part(&skew).is_zero());
        let sym = Mat::from_rows(&[[1.0, 2.0], [2.0, 5.0]]).unwrap();
        assert_eq!(sym_part(&sym), sym);
        let s = sym_part(&e(2, 0, 1));
        assert_eq!(s, Mat::from_rows(&[[0.0, 0.5], [0.5, 0.0]]).unwrap());
    }

    #[test]
    fn unit_norm() {
        assert_eq!(frob_norm(&e(3, 0, 1)), 1.0);
    }

    #[test]
    fn classification_examples() {
        let rot = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        assert_eq!(classify_matrix(&rot, DEFAULT_TOL), MatrixClass::Skew);
        assert_eq!(classify_matrix(&e(2, 0, 1), DEFAULT_TOL), MatrixClass::Nilpotent);
        assert_eq!(classify_matrix(&Mat::diag(&[1.0, 2.0]), DEFAULT_TOL), MatrixClass::Normal);
        assert_eq!(classify_matrix(&Mat::zeros(3), DEFAULT_TOL), MatrixClass::Skew);
        let generic = Mat::from_rows(&[[1.0, 2.0], [0.0, 3.0]]).unwrap();
        assert_eq!(classify_matrix(&generic, DEFAULT_TOL), MatrixClass::Generic);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Mat::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(Mat::from_rows::<Vec<f64>>(&[]).is_err());
        assert!(Mat::from_rows(&[[f64::NAN]]).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = Mat::from_rows(&[[0.1, 1.0 / 3.0], [-2.5e-300, 6.02214076e23]]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: Mat = serde_json::from_str(&text).unwrap();
        assert_eq!(m.as_slice(), back.as_slice());
        assert!(serde_json::from_str::<Mat>("[[1.0, 2.0]]").is_err());
    }
}
