//! Eigenvalues of small dense real matrices.
//!
//! General matrices go through balancing, Householder reduction to upper
//! Hessenberg form and the Francis double-shift QR iteration. Symmetric
//! matrices use cyclic Jacobi rotations, which are accurate to a few ulps
//! relative to the largest eigenvalue and are all the definiteness tests need.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Multiset of eigenvalues in canonical (re, im) lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMultiset {
    values: Vec<Complex64>,
}

impl SpectrumMultiset {
    pub fn new(mut values: Vec<Complex64>) -> Self {
        values.sort_by(|a, b| {
            a.re
                .partial_cmp(&b.re)
                .unwrap_or(Ordering::Equal)
                .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
        });
        SpectrumMultiset { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest modulus.
    pub fn radius(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn scaled(&self, c: f64) -> SpectrumMultiset {
        SpectrumMultiset::new(self.values.iter().map(|z| z * c).collect())
    }

    pub fn product(&self) -> Complex64 {
        self.values.iter().fold(Complex64::new(1.0, 0.0), |p, z| p * z)
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    /// Largest distance between matched eigenvalues.
    ///
    /// Matching is greedy nearest-neighbour after canonical ordering, which is
    /// exact for the well-separated spectra we compare and never worse than
    /// the entrywise comparison of the sorted lists.
    pub fn distance(&self, other: &SpectrumMultiset) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        let sorted = self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        let mut used = vec![false; other.len()];
        let mut greedy = 0.0f64;
        for a in &self.values {
            let (best, d) = other
                .values
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, b)| (k, (a - b).norm()))
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(Ordering::Equal))
                .expect("spectra have equal length");
            used[best] = true;
            greedy = greedy.max(d);
        }
        sorted.min(greedy)
    }

    /// Conjugation-closure defect: distance to the conjugate multiset.
    pub fn conjugation_defect(&self) -> f64 {
        let conj = SpectrumMultiset::new(self.values.iter().map(|z| z.conj()).collect());
        self.distance(&conj)
    }

    /// All real parts strictly on one side of zero by more than `thr`.
    pub fn real_parts_sign(&self, thr: f64) -> Option<f64> {
        if self.values.iter().all(|z| z.re > thr) {
            Some(1.0)
        } else if self.values.iter().all(|z| z.re < -thr) {
            Some(-1.0)
        } else {
            None
        }
    }
}

const MAX_ITS_PER_ROOT: usize = 60;

/// Eigenvalues of a general real matrix with algebraic multiplicity.
pub fn eigenvalues(a: &Mat) -> Result<SpectrumMultiset> {
    let n = a.dim();
    let mut h: Vec<Vec<f64>> = a.rows();
    balance(&mut h);
    hessenberg(&mut h);
    let (wr, wi) = hqr(&mut h)?;
    debug_assert_eq!(wr.len(), n);
    Ok(SpectrumMultiset::new(
        wr.into_iter()
            .zip(wi)
            .map(|(re, im)| Complex64::new(re, im))
            .collect(),
    ))
}

/// Parlett-Reinsch balancing by powers of two; similarity preserving and exact.
fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = a.len();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut g = r / RADIX;
            let mut f = 1.0;
            let s = c + r;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[i][j] *= g;
                }
                for row in a.iter_mut() {
                    row[i] *= f;
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form (in place).
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let len = n - k - 1;
        let mut v: Vec<f64> = (0..len).map(|i| a[k + 1 + i][k]).collect();
        let alpha_abs = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if alpha_abs == 0.0 {
            continue;
        }
        let alpha = if v[0] > 0.0 { -alpha_abs } else { alpha_abs };
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // A <- H A
        for j in 0..n {
            let s: f64 = (0..len).map(|i| v[i] * a[k + 1 + i][j]).sum();
            let s = s * beta;
            for i in 0..len {
                a[k + 1 + i][j] -= s * v[i];
            }
        }
        // A <- A H
        for row in a.iter_mut() {
            let s: f64 = (0..len).map(|j| row[k + 1 + j] * v[j]).sum();
            let s = s * beta;
            for j in 0..len {
                row[k + 1 + j] -= s * v[j];
            }
        }
        for i in k + 2..n {
            a[i][k] = 0.0;
        }
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
fn hqr(a: &mut [Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.len();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let mut its = 0usize;
    let mut total = 0usize;
    while nn >= 0 {
        let nu = nn as usize;
        // Find a negligible subdiagonal element.
        let mut l = nu;
        while l >= 1 {
            let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
            if s == 0.0 {
                s = anorm;
            }
            if a[l][l - 1].abs() + s == s {
                a[l][l - 1] = 0.0;
                break;
            }
            l -= 1;
        }
        let mut x = a[nu][nu];
        if l == nu {
            wr[nu] = x + t;
            wi[nu] = 0.0;
            nn -= 1;
            its = 0;
            continue;
        }
        let mut y = a[nu - 1][nu - 1];
        let mut w = a[nu][nu - 1] * a[nu - 1][nu];
        if l == nu - 1 {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let mut z = q.abs().sqrt();
            x += t;
            if q >= 0.0 {
                z = p + sign(z, p);
                wr[nu - 1] = x + z;
                wr[nu] = x + z;
                if z != 0.0 {
                    wr[nu] = x - w / z;
                }
                wi[nu - 1] = 0.0;
                wi[nu] = 0.0;
            } else {
                wr[nu - 1] = x + p;
                wr[nu] = x + p;
                wi[nu - 1] = -z;
                wi[nu] = z;
            }
            nn -= 2;
            its = 0;
            continue;
        }
        if its >= MAX_ITS_PER_ROOT {
            return Err(Error::EigenNoConvergence { iterations: total });
        }
        if its == 10 || its == 20 || its == 40 {
            // Exceptional shift.
            t += x;
            for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                row[i] -= x;
            }
            let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;
        total += 1;
        // Look for two consecutive small subdiagonal elements.
        let mut m = nu - 2;
        let (mut p, mut q, mut r);
        loop {
            let z = a[m][m];
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
            q = a[m + 1][m + 1] - z - rr - ss;
            r = a[m + 2][m + 1];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = a[m][m - 1].abs() * (q.abs() + r.abs());
            let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
            if u + v == v {
                break;
            }
            m -= 1;
        }
        for i in m + 2..=nu {
            a[i][i - 2] = 0.0;
            if i != m + 2 {
                a[i][i - 3] = 0.0;
            }
        }
        // Double QR step on rows l..=nu and columns m..=nu.
        let mut k = m;
        while k < nu {
            if k != m {
                p = a[k][k - 1];
                q = a[k + 1][k - 1];
                r = if k != nu - 1 { a[k + 2][k - 1] } else { 0.0 };
                x = p.abs() + q.abs() + r.abs();
                if x != 0.0 {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = sign((p * p + q * q + r * r).sqrt(), p);
            if s != 0.0 {
                if k == m {
                    if l != m {
                        a[k][k - 1] = -a[k][k - 1];
                    }
                } else {
                    a[k][k - 1] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nu {
                    let mut pp = a[k][j] + q * a[k + 1][j];
                    if k != nu - 1 {
                        pp += r * a[k + 2][j];
                        a[k + 2][j] -= pp * z;
                    }
                    a[k + 1][j] -= pp * y;
                    a[k][j] -= pp * x;
                }
                let mmin = if nu < k + 3 { nu } else { k + 3 };
                for row in a.iter_mut().take(mmin + 1).skip(l) {
                    let mut pp = x * row[k] + y * row[k + 1];
                    if k != nu - 1 {
                        pp += z * row[k + 2];
                        row[k + 2] -= pp * r;
                    }
                    row[k + 1] -= pp * q;
                    row[k] -= pp;
                }
            }
            k += 1;
        }
    }
    Ok((wr, wi))
}

/// Eigenvalues of a symmetric matrix, ascending. Only the symmetric part of
/// the input is used.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    sym_eigen(a).0
}

/// Cyclic Jacobi: ascending eigenvalues of the symmetric part of `a` and an
/// orthogonal matrix whose columns are matching eigenvectors.
pub fn sym_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.dim();
    let mut v = Mat::identity(n);
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (a[(i, j)] + a[(j, i)])).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum();
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = sign(1.0, theta) / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in m.iter_mut() {
                    let (rp, rq) = (row[p], row[q]);
                    row[p] = c * rp - s * rq;
                    row[q] = s * rp + c * rq;
                }
                for k in 0..n {
                    let (vp, vq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[p][k], m[q][k]);
                    m[p][k] = c * pk - s * qk;
                    m[q][k] = s * pk + c * qk;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap_or(Ordering::Equal));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = Mat::from_fn(n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_vectors_diagonalize() {
        let a = Mat::from_rows(&[[2.0, 1.0, 0.5], [1.0, -1.0, 0.25], [0.5, 0.25, 3.0]]).unwrap();
        let (vals, v) = sym_eigen(&a);
        let d = &(&v.transpose() * &a) * &v;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { vals[i] } else { 0.0 };
                assert!((d[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    fn close(z: Complex64, re: f64, im: f64) -> bool {
        (z.re - re).abs() < 1e-12 && (z.im - im).abs() < 1e-12
    }

    #[test]
    fn diagonal_spectrum() {
        let s = eigenvalues(&Mat::diag(&[3.0, 1.0, 2.0])).unwrap();
        let v = s.values();
        assert!(close(v[0], 1.0, 0.0) && close(v[1], 2.0, 0.0) && close(v[2], 3.0, 0.0));
    }

    #[test]
    fn rotation_generator() {
        let s = eigenvalues(&Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap()).unwrap();
        assert!(close(s.values()[0], 0.0, -1.0));
        assert!(close(s.values()[1], 0.0, 1.0));
    }

    #[test]
    fn antidiagonal_positive_entries() {
        let (x, y): (f64, f64) = (2.0, 0.5);
        let s = eigenvalues(&Mat::from_rows(&[[0.0, x], [y, 0.0]]).unwrap()).unwrap();
        let r = (x * y).sqrt();
        assert!(close(s.values()[0], -r, 0.0));
        assert!(close(s.values()[1], r, 0.0));
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let c = Mat::from_rows(&[
            [10.0, -35.0, 50.0, -24.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let s = eigenvalues(&c).unwrap();
        for (z, want) in s.values().iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((z.re - want).abs() < 1e-9 && z.im.abs() < 1e-9, "{z}");
        }
    }

    #[test]
    fn defective_nilpotent_block() {
        let s = eigenvalues(&Mat::unit(3, 0, 2)).unwrap();
        assert!(s.radius() < 1e-12);
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let a = Mat::from_rows(&[[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]]).unwrap();
        let ev = sym_eigenvalues(&a);
        let r2 = 2f64.sqrt();
        for (got, want) in ev.iter().zip([2.0 - r2, 2.0, 2.0 + r2]) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn spectrum_distance_is_order_free() {
        let a = SpectrumMultiset::new(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        let b = SpectrumMultiset::new(vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 1e-9)]);
        assert!(a.distance(&b) <= 1e-9);
        assert!(a.scaled(2.0).distance(&a).is_finite());
    }
}
