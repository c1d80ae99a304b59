//! Curvature of left-invariant metrics on Lie groups given by structure
//! constants on an orthonormal basis, specialised helpers for the
//! codimension-one abelian family `mu_A`, and Heintze's negativity criteria.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::eigen::{eigenvalues, sym_eigen, sym_eigenvalues};
use crate::error::{Error, Result};
use crate::flow::{FlowKind, Trajectory};
use crate::mat::{self_commutator, sym_part, tr_sq, tr_sym_sq, Mat};

/// Relative Jacobi tolerance, scaled by `(max |c|)^2`.
pub const JACOBI_TOL: f64 = 1e-10;
/// Relative threshold for positive definiteness.
pub const PD_TOL: f64 = 1e-10;

/// Structure constants `c[i][j][k] = <mu(e_i, e_j), e_k>` on an orthonormal
/// basis `e_0, ..., e_{m-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstantsFile", into = "ConstantsFile")]
pub struct MetricLieAlgebra {
    dim: usize,
    c: Vec<f64>,
}

/// On-disk form: nonzero constants as `[i, j, k, value]` with `i < j`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsFile {
    pub dim: usize,
    pub constants: Vec<(usize, usize, usize, f64)>,
}

impl TryFrom<ConstantsFile> for MetricLieAlgebra {
    type Error = Error;
    fn try_from(f: ConstantsFile) -> Result<Self> {
        MetricLieAlgebra::from_constants(f.dim, &f.constants)
    }
}

impl From<MetricLieAlgebra> for ConstantsFile {
    fn from(g: MetricLieAlgebra) -> Self {
        ConstantsFile {
            dim: g.dim,
            constants: g.triples(),
        }
    }
}

impl MetricLieAlgebra {
    pub fn abelian(dim: usize) -> Self {
        MetricLieAlgebra {
            dim,
            c: vec![0.0; dim * dim * dim],
        }
    }

    /// Builds from `(i, j, k, value)` entries with `i < j`; the entries for
    /// `(j, i, k)` follow by antisymmetry.
    pub fn from_constants(dim: usize, entries: &[(usize, usize, usize, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidAlgebra("dimension must be at least 1".into()));
        }
        let mut g = MetricLieAlgebra::abelian(dim);
        let mut seen = vec![false; dim * dim * dim];
        for &(i, j, k, v) in entries {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::InvalidAlgebra(format!(
                    "index ({i}, {j}, {k}) out of range for dimension {dim}"
                )));
            }
            if i >= j {
                return Err(Error::InvalidAlgebra(format!(
                    "entry ({i}, {j}, {k}) must have i < j"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidAlgebra(format!("entry ({i}, {j}, {k}) is not finite")));
            }
            let at = g.idx(i, j, k);
            if seen[at] {
                return Err(Error::InvalidAlgebra(format!("entry ({i}, {j}, {k}) given twice")));
            }
            seen[at] = true;
            g.set(i, j, k, v);
        }
        g.check_jacobi()?;
        Ok(g)
    }

    /// Builds from a dense `m^3` array, checking antisymmetry and Jacobi.
    pub fn from_dense(dim: usize, c: Vec<f64>) -> Result<Self> {
        if dim == 0 || c.len() != dim * dim * dim {
            return Err(Error::InvalidAlgebra(format!(
                "expected {} constants, got {}",
                dim * dim * dim,
                c.len()
            )));
        }
        let g = MetricLieAlgebra { dim, c };
        let scale = g.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let v = g.c(i, j, k);
                    if !v.is_finite() || (v + g.c(j, i, k)).abs() > 1e-14 * scale {
                        return Err(Error::InvalidAlgebra(format!(
                            "constants not antisymmetric at ({i}, {j}, {k})"
                        )));
                    }
                }
            }
        }
        g.check_jacobi()?;
        Ok(g)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let a = self.idx(i, j, k);
        let b = self.idx(j, i, k);
        self.c[a] = v;
        self.c[b] = -v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[self.idx(i, j, k)]
    }

    pub fn dense(&self) -> &[f64] {
        &self.c
    }

    /// Nonzero constants with `i < j`, in index order.
    pub fn triples(&self) -> Vec<(usize, usize, usize, f64)> {
        let m = self.dim;
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                for k in 0..m {
                    let v = self.c(i, j, k);
                    if v != 0.0 {
                        out.push((i, j, k, v));
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `||mu||^2 = sum over ordered pairs of ||mu(e_i, e_j)||^2`.
    pub fn norm_sq(&self) -> f64 {
        self.c.iter().map(|v| v * v).sum()
    }

    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let m = self.dim;
        let mut out = vec![0.0; m];
        for i in 0..m {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += w * self.c(i, j, k);
                }
            }
        }
        out
    }

    /// Matrix of `ad(e_i)` in the basis, `ad(e_i)[k][j] = c[i][j][k]`.
    pub fn ad(&self, i: usize) -> Mat {
        Mat::from_fn(self.dim, |k, j| self.c(i, j, k))
    }

    /// Largest Jacobi defect over all index quadruples.
    pub fn jacobi_residual(&self) -> f64 {
        let m = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                for k in j + 1..m {
                    for l in 0..m {
                        let mut s = 0.0;
                        for p in 0..m {
                            s += self.c(i, j, p) * self.c(p, k, l)
                                + self.c(j, k, p) * self.c(p, i, l)
                                + self.c(k, i, p) * self.c(p, j, l);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    fn check_jacobi(&self) -> Result<()> {
        let res = self.jacobi_residual();
        let scale = self.max_abs();
        if res > JACOBI_TOL * scale * scale {
            return Err(Error::InvalidAlgebra(format!(
                "Jacobi identity fails, residual {res:e}"
            )));
        }
        Ok(())
    }

    /// Recovers `A` when the algebra is `mu_A`: `e_1..e_{m-1}` span an
    /// abelian ideal and `e_0` acts on it.
    pub fn as_mu_a(&self) -> Option<Mat> {
        let m = self.dim;
        if m < 2 {
            return None;
        }
        for i in 1..m {
            if self.c(0, i, 0) != 0.0 {
                return None;
            }
            for j in 1..m {
                if (0..m).any(|k| self.c(i, j, k) != 0.0) {
                    return None;
                }
            }
        }
        Some(Mat::from_fn(m - 1, |k, i| self.c(0, i + 1, k + 1)))
    }
}

/// `mu_A(e_0, e_i) = A e_i` on `R e_0 + R^n`.
pub fn mu_of_a(a: &Mat) -> MetricLieAlgebra {
    let n = a.dim();
    let mut g = MetricLieAlgebra::abelian(n + 1);
    for i in 0..n {
        for k in 0..n {
            g.set(0, i + 1, k + 1, a[(k, i)]);
        }
    }
    debug_assert!(g.jacobi_residual() <= JACOBI_TOL * g.max_abs().powi(2));
    g
}

/// Block formula `diag(-tr(S(A)^2), 1/2 [A,A^t] - tr(A) S(A))`.
pub fn ricci_operator_mu_a(a: &Mat) -> Mat {
    let n = a.dim();
    let mut lower = self_commutator(a).scale(0.5);
    lower -= &sym_part(a).scale(a.trace());
    let t = tr_sym_sq(a);
    Mat::from_fn(n + 1, |i, j| match (i, j) {
        (0, 0) => -t,
        (0, _) | (_, 0) => 0.0,
        _ => lower[(i - 1, j - 1)],
    })
}

/// `Ric = M - 1/2 B - S(ad H)` for a left-invariant metric.
pub fn ricci_operator_general(g: &MetricLieAlgebra) -> Mat {
    let m = g.dim;
    let h: Vec<f64> = (0..m).map(|a| (0..m).map(|j| g.c(a, j, j)).sum()).collect();
    let mut ric = Mat::zeros(m);
    for a in 0..m {
        for b in a..m {
            let mut first = 0.0;
            let mut second = 0.0;
            let mut killing = 0.0;
            for i in 0..m {
                for j in 0..m {
                    first += g.c(a, i, j) * g.c(b, i, j);
                    second += g.c(i, j, a) * g.c(i, j, b);
                    killing += g.c(a, i, j) * g.c(b, j, i);
                }
            }
            // (ad H)[b][a] + (ad H)[a][b], halved.
            let mut s_adh = 0.0;
            for (p, hp) in h.iter().enumerate() {
                s_adh += hp * (g.c(p, a, b) + g.c(p, b, a));
            }
            s_adh *= 0.5;
            let v = -0.5 * first + 0.25 * second - 0.5 * killing - s_adh;
            ric[(a, b)] = v;
            ric[(b, a)] = v;
        }
    }
    ric
}

/// Levi-Civita coefficients `N[i][j][k] = <nabla_{e_i} e_j, e_k>`.
#[derive(Clone, Debug)]
pub struct Connection {
    dim: usize,
    n: Vec<f64>,
}

impl Connection {
    pub fn new(g: &MetricLieAlgebra) -> Self {
        let m = g.dim;
        let mut n = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    n[(i * m + j) * m + k] = 0.5 * (g.c(i, j, k) - g.c(i, k, j) - g.c(j, k, i));
                }
            }
        }
        Connection { dim: m, n }
    }

    #[inline]
    pub fn coeff(&self, i: usize, j: usize, k: usize) -> f64 {
        self.n[(i * self.dim + j) * self.dim + k]
    }

    /// `nabla_x y` for left-invariant fields with coordinates `x`, `y`.
    pub fn covariant(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let m = self.dim;
        let mut out = vec![0.0; m];
        for i in 0..m {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += w * self.coeff(i, j, k);
                }
            }
        }
        out
    }
}

/// `R[i][j][k][l] = <R(e_i, e_j) e_k, e_l>` with
/// `R(x,y) = nabla_x nabla_y - nabla_y nabla_x - nabla_[x,y]`.
#[derive(Clone, Debug)]
pub struct Riemann {
    dim: usize,
    r: Vec<f64>,
}

impl Riemann {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let m = self.dim;
        self.r[((i * m + j) * m + k) * m + l]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Frobenius norm over all four indices.
    pub fn norm(&self) -> f64 {
        self.r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Ric[j][k] = sum_i R[i][j][k][i]`.
    pub fn ricci(&self) -> Mat {
        let m = self.dim;
        Mat::from_fn(m, |j, k| (0..m).map(|i| self.get(i, j, k, i)).sum())
    }

    pub fn sectional(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let gram = plane_gram(x, y)?;
        let m = self.dim;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        s += w * y[k] * x[l] * self.get(i, j, k, l);
                    }
                }
            }
        }
        Ok(s / gram)
    }

    /// Largest violation of the pair symmetries and the first Bianchi identity.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let r = self.get(i, j, k, l);
                        worst = worst
                            .max((r + self.get(j, i, k, l)).abs())
                            .max((r + self.get(i, j, l, k)).abs())
                            .max((r - self.get(k, l, i, j)).abs())
                            .max((r + self.get(j, k, i, l) + self.get(k, i, j, l)).abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn riemann_tensor(g: &MetricLieAlgebra) -> Riemann {
    let m = g.dim;
    let conn = Connection::new(g);
    let nn = |i, j, k| conn.coeff(i, j, k);
    let mut r = vec![0.0; m * m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let mut s = 0.0;
                    for p in 0..m {
                        s += nn(j, k, p) * nn(i, p, l) - nn(i, k, p) * nn(j, p, l)
                            - g.c(i, j, p) * nn(p, k, l);
                    }
                    r[((i * m + j) * m + k) * m + l] = s;
                }
            }
        }
    }
    Riemann { dim: m, r }
}

pub fn riem_norm(g: &MetricLieAlgebra) -> f64 {
    riemann_tensor(g).norm()
}

fn plane_gram(x: &[f64], y: &[f64]) -> Result<f64> {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let gram = xx * yy - xy * xy;
    if !(gram > 1e-12 * xx * yy) {
        return Err(Error::DegeneratePlane { gram });
    }
    Ok(gram)
}

/// `K(x, y) = <R(x,y)y, x> / (|x|^2 |y|^2 - <x,y>^2)`, computed from the
/// connection without forming the full tensor.
pub fn sectional_curvature(g: &MetricLieAlgebra, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != g.dim || y.len() != g.dim {
        return Err(Error::DimensionMismatch {
            left: g.dim,
            right: x.len().max(y.len()),
        });
    }
    sectional_with(g, &Connection::new(g), x, y)
}

fn sectional_with(g: &MetricLieAlgebra, conn: &Connection, x: &[f64], y: &[f64]) -> Result<f64> {
    let gram = plane_gram(x, y)?;
    let nyy = conn.covariant(y, y);
    let nxy = conn.covariant(x, y);
    let a = conn.covariant(x, &nyy);
    let b = conn.covariant(y, &nxy);
    let c = conn.covariant(&g.bracket(x, y), y);
    let num: f64 = (0..g.dim).map(|l| (a[l] - b[l] - c[l]) * x[l]).sum();
    Ok(num / gram)
}

/// Haar-uniform random 2-planes: Gaussian pairs, Gram-Schmidt orthonormalised.
pub struct PlaneSampler {
    dim: usize,
    rng: ChaCha8Rng,
}

impl PlaneSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        PlaneSampler {
            dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_plane(&mut self) -> (Vec<f64>, Vec<f64>) {
        loop {
            let mut x: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut self.rng)).collect();
            let mut y: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut self.rng)).collect();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nx < 1e-8 {
                continue;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            let p: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            y.iter_mut().zip(&x).for_each(|(b, a)| *b -= p * a);
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if ny < 1e-8 {
                continue;
            }
            y.iter_mut().for_each(|v| *v /= ny);
            return (x, y);
        }
    }
}

/// Range of sectional curvature over `count` random planes plus the given
/// extra planes.
pub fn sectional_range(
    g: &MetricLieAlgebra,
    count: usize,
    seed: u64,
    extra: &[(Vec<f64>, Vec<f64>)],
) -> (f64, f64) {
    let conn = Connection::new(g);
    let mut sampler = PlaneSampler::new(g.dim, seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut visit = |x: &[f64], y: &[f64]| {
        if let Ok(k) = sectional_with(g, &conn, x, y) {
            lo = lo.min(k);
            hi = hi.max(k);
        }
    };
    for _ in 0..count {
        let (x, y) = sampler.next_plane();
        visit(&x, &y);
    }
    for (x, y) in extra {
        visit(x, y);
    }
    (lo, hi)
}

/// Planes where `mu_A` attains its extreme curvature if anywhere: pairs of
/// eigenvectors of `S(A)` inside the ideal, and `e_0` against eigenvectors
/// of `D0^2 + [D0, S0]`.
pub fn mu_a_probe_planes(a: &Mat) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = a.dim();
    let d0 = sym_part(a);
    let s0 = a.skew_part();
    let embed = |v: &Mat, col: usize| -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        for r in 0..n {
            out[r + 1] = v[(r, col)];
        }
        out
    };
    let (_, vd) = sym_eigen(&d0);
    let (_, vc) = sym_eigen(&heintze_c_matrix(&d0, &s0));
    let mut planes = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            planes.push((embed(&vd, i), embed(&vd, j)));
        }
    }
    let mut e0 = vec![0.0; n + 1];
    e0[0] = 1.0;
    for k in 0..n {
        planes.push((e0.clone(), embed(&vc, k)));
    }
    planes
}

fn heintze_c_matrix(d0: &Mat, s0: &Mat) -> Mat {
    let mut c = d0 * d0;
    c += &(&(d0 * s0) - &(s0 * d0));
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeintzeReport {
    pub cond_a: bool,
    pub cond_b: bool,
    pub cond_c: bool,
    pub negative: bool,
    /// Orientation of `e_0` used for (B) and (C).
    pub sign: f64,
    /// Some tested eigenvalue sits within the definiteness threshold.
    pub marginal: bool,
    pub min_eig_d0: f64,
    pub min_eig_c: f64,
}

struct Definiteness {
    positive: bool,
    marginal: bool,
    min: f64,
}

fn definiteness(m: &Mat) -> Definiteness {
    let ev = sym_eigenvalues(m);
    let scale = ev.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let min = ev.first().copied().unwrap_or(0.0);
    let thr = PD_TOL * scale;
    Definiteness {
        positive: scale > 0.0 && min > thr,
        marginal: min.abs() <= thr,
        min,
    }
}

fn is_invertible(a: &Mat) -> bool {
    let norm = a.norm();
    norm > 0.0 && a.determinant().abs() > 1e-12 * norm.powi(a.dim() as i32)
}

/// Heintze's conditions for `mu_A`: (A) `A` invertible, (B) `D0 = S(sA)`
/// positive definite, (C) `D0^2 + [D0, S0]` positive definite, for the
/// better orientation `s = +-1`.
pub fn heintze_check(a: &Mat) -> HeintzeReport {
    let cond_a = is_invertible(a);
    let evaluate = |s: f64| {
        let sa = a.scale(s);
        let d0 = sym_part(&sa);
        let s0 = sa.skew_part();
        (s, definiteness(&d0), definiteness(&heintze_c_matrix(&d0, &s0)))
    };
    let plus = evaluate(1.0);
    let minus = evaluate(-1.0);
    let (sign, b, c) = if minus.1.min > plus.1.min { minus } else { plus };
    HeintzeReport {
        cond_a,
        cond_b: b.positive,
        cond_c: c.positive,
        negative: cond_a && b.positive && c.positive,
        sign,
        marginal: b.marginal || c.marginal,
        min_eig_d0: b.min,
        min_eig_c: c.min,
    }
}

/// Some inner product on the solvable group of `mu_A` has negative curvature:
/// `A` invertible with all real parts of its spectrum on one side of zero.
pub fn admits_negative_curvature(a: &Mat) -> bool {
    if !is_invertible(a) {
        return false;
    }
    match eigenvalues(a) {
        Ok(spec) => spec.real_parts_sign(1e-10 * a.norm()).is_some(),
        Err(_) => false,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub dim: usize,
    pub ricci_op: Mat,
    pub scalar: f64,
    pub riem_norm: f64,
    pub sectional_min: f64,
    pub sectional_max: f64,
    pub planes_sampled: usize,
    pub seed: u64,
    pub flat: bool,
    pub heintze: Option<HeintzeReport>,
}

pub fn curvature_report(g: &MetricLieAlgebra, planes: usize, seed: u64) -> CurvatureReport {
    let ricci_op = ricci_operator_general(g);
    let riem = riemann_tensor(g);
    let riem_norm = riem.norm();
    let mu_a = g.as_mu_a();
    let extra = mu_a.as_ref().map(mu_a_probe_planes).unwrap_or_default();
    let (lo, hi) = if g.dim >= 2 {
        sectional_range(g, planes, seed, &extra)
    } else {
        (0.0, 0.0)
    };
    let scale = g.norm_sq();
    CurvatureReport {
        dim: g.dim,
        scalar: ricci_op.trace(),
        ricci_op,
        riem_norm,
        sectional_min: lo,
        sectional_max: hi,
        planes_sampled: planes,
        seed,
        flat: riem_norm <= 1e-8 * scale.max(f64::MIN_POSITIVE),
        heintze: mu_a.as_ref().map(heintze_check),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Type3Sample {
    pub t: f64,
    pub riem_norm: f64,
    pub t_riem: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Type3Report {
    pub t1: f64,
    pub sup_t_riem: f64,
    pub argsup: f64,
    pub samples: Vec<Type3Sample>,
    /// Relative spread `(max - min) / max` of `t ||Riem||` over `t >= 0.9 t_last`.
    pub tail_variation: f64,
    /// Same spread over the last logarithmic decade `t >= t_last / 10`.
    pub log_decade_variation: f64,
}

fn relative_spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > 0.0 {
        (hi - lo) / hi
    } else {
        0.0
    }
}

/// `t ||Riem(mu_{A(t)})||` along a bracket trajectory, for `t >= t1`.
pub fn type3_monitor(traj: &Trajectory, t1: f64) -> Result<Type3Report> {
    if traj.spec.kind != FlowKind::Bracket {
        return Err(Error::Precondition("Type-III monitor needs a bracket trajectory".into()));
    }
    let a0 = &traj.spec.a0;
    let t2 = tr_sq(a0);
    if t2 < -1e-12 * a0.norm_sq() {
        return Err(Error::Precondition(format!(
            "the Type-III bound is only established for tr(A0^2) >= 0, got {t2}"
        )));
    }
    let mut samples = Vec::new();
    for s in &traj.samples {
        let Some(t) = s.physical_t else { continue };
        if t < t1 {
            continue;
        }
        let r = riem_norm(&mu_of_a(&s.a));
        samples.push(Type3Sample {
            t,
            riem_norm: r,
            t_riem: t * r,
        });
    }
    let (sup, argsup) = samples
        .iter()
        .fold((0.0, t1), |(m, at), s| if s.t_riem > m { (s.t_riem, s.t) } else { (m, at) });
    let t_last = samples.last().map_or(t1, |s| s.t);
    let tail_variation =
        relative_spread(samples.iter().filter(|s| s.t >= 0.9 * t_last).map(|s| s.t_riem));
    let log_decade_variation =
        relative_spread(samples.iter().filter(|s| s.t >= 0.1 * t_last).map(|s| s.t_riem));
    Ok(Type3Report {
        t1,
        sup_t_riem: sup,
        argsup,
        samples,
        tail_variation,
        log_decade_variation,
    })
}

/// `delta_mu(D) = mu(D., .) + mu(., D.) - D mu(., .)` as a dense constant array.
pub fn delta_mu(g: &MetricLieAlgebra, d: &Mat) -> Vec<f64> {
    let m = g.dim;
    let mut out = vec![0.0; m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let mut s = 0.0;
                for p in 0..m {
                    s += d[(p, i)] * g.c(p, j, k) + d[(p, j)] * g.c(i, p, k) - d[(k, p)] * g.c(i, j, p);
                }
                out[(i * m + j) * m + k] = s;
            }
        }
    }
    out
}

/// Velocity of the bracket flow, `d mu/dt = delta_mu(Ric_mu)`.
pub fn bracket_flow_velocity(g: &MetricLieAlgebra) -> Vec<f64> {
    delta_mu(g, &ricci_operator_general(g))
}

/// Scales every bracket involving `e_axis` by `alpha`; with `e_axis`
/// complementary to an ideal this is again a Lie bracket.
pub fn rescale_direction(g: &MetricLieAlgebra, axis: usize, alpha: f64) -> Result<MetricLieAlgebra> {
    if axis >= g.dim {
        return Err(Error::OutOfRange(format!("axis {axis} outside dimension {}", g.dim)));
    }
    let mut c = g.c.clone();
    let m = g.dim;
    for i in 0..m {
        for j in 0..m {
            if (i == axis) != (j == axis) {
                for k in 0..m {
                    c[(i * m + j) * m + k] *= alpha;
                }
            }
        }
    }
    MetricLieAlgebra::from_dense(m, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(m: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        v
    }

    #[test]
    fn mu_a_basics() {
        let z = mu_of_a(&Mat::zeros(3));
        assert_eq!(z.dim(), 4);
        assert_eq!(z.max_abs(), 0.0);
        let one = mu_of_a(&Mat::identity(1));
        assert_eq!(one.bracket(&e(2, 0), &e(2, 1)), vec![0.0, 1.0]);
        let a = Mat::from_rows(&[[1.0, 2.0], [-0.5, 3.0]]).unwrap();
        let g = mu_of_a(&a);
        assert!((g.norm_sq() - 2.0 * a.norm_sq()).abs() < 1e-12);
        assert_eq!(g.as_mu_a().unwrap(), a);
    }

    #[test]
    fn block_ricci_examples() {
        let skew = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        assert!(ricci_operator_mu_a(&skew).max_abs() < 1e-15);
        let r = ricci_operator_mu_a(&Mat::diag(&[1.0, -1.0]));
        assert!((&r - &Mat::diag(&[-2.0, 0.0, 0.0])).max_abs() < 1e-15);
        let r = ricci_operator_mu_a(&Mat::unit(2, 0, 1));
        assert!((&r - &Mat::diag(&[-0.5, 0.5, -0.5])).max_abs() < 1e-15);
    }

    #[test]
    fn general_ricci_matches_block_and_riemann() {
        let a = Mat::from_rows(&[[0.3, -1.2, 0.4], [2.0, 0.1, -0.7], [0.5, 0.9, -1.1]]).unwrap();
        let g = mu_of_a(&a);
        let general = ricci_operator_general(&g);
        assert!((&general - &ricci_operator_mu_a(&a)).max_abs() < 1e-12);
        let riem = riemann_tensor(&g);
        assert!((&riem.ricci() - &general).max_abs() < 1e-12);
        assert!(riem.symmetry_defect() < 1e-12);
    }

    #[test]
    fn heisenberg_curvature() {
        // Classical values: K(e0,e1) = -3/4, K(e0,e2) = K(e1,e2) = 1/4.
        let g = MetricLieAlgebra::from_constants(3, &[(0, 1, 2, 1.0)]).unwrap();
        let k = |i, j| sectional_curvature(&g, &e(3, i), &e(3, j)).unwrap();
        assert!((k(0, 1) + 0.75).abs() < 1e-15);
        assert!((k(0, 2) - 0.25).abs() < 1e-15);
        assert!((k(1, 2) - 0.25).abs() < 1e-15);
        let ric = ricci_operator_general(&g);
        assert!((&ric - &Mat::diag(&[-0.5, -0.5, 0.5])).max_abs() < 1e-15);
        let riem = riemann_tensor(&g);
        assert!((riem.sectional(&e(3, 0), &e(3, 1)).unwrap() + 0.75).abs() < 1e-15);
    }

    #[test]
    fn hyperbolic_space_is_minus_one() {
        let g = mu_of_a(&Mat::identity(3));
        let mut sampler = PlaneSampler::new(4, 7);
        for _ in 0..50 {
            let (x, y) = sampler.next_plane();
            assert!((sectional_curvature(&g, &x, &y).unwrap() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_planes_and_bad_constants() {
        let g = mu_of_a(&Mat::identity(2));
        let x = e(3, 1);
        assert!(matches!(sectional_curvature(&g, &x, &x), Err(Error::DegeneratePlane { .. })));
        assert!(MetricLieAlgebra::from_constants(3, &[(1, 0, 2, 1.0)]).is_err());
        assert!(MetricLieAlgebra::from_constants(3, &[(0, 1, 5, 1.0)]).is_err());
        // [[e0,e1],e2] + [[e1,e2],e0] + [[e2,e0],e1] = e2.
        assert!(MetricLieAlgebra::from_constants(3, &[(0, 1, 1, 1.0), (1, 2, 2, 1.0)]).is_err());
    }

    #[test]
    fn constants_json_round_trip() {
        let g = MetricLieAlgebra::from_constants(3, &[(0, 1, 2, 1.5)]).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(text, r#"{"dim":3,"constants":[[0,1,2,1.5]]}"#);
        let back: MetricLieAlgebra = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn heintze_examples() {
        let h = heintze_check(&Mat::identity(3));
        assert!(h.cond_a && h.cond_b && h.cond_c && h.negative);
        let skew = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        assert!(!heintze_check(&skew).cond_b);
        let h = heintze_check(&Mat::diag(&[-1.0, -2.0]));
        assert!(h.negative && h.sign == -1.0);
        assert!(admits_negative_curvature(&Mat::identity(2)));
        assert!(!admits_negative_curvature(&Mat::diag(&[1.0, -1.0])));
        assert!(admits_negative_curvature(&Mat::from_rows(&[[1.0, 5.0], [0.0, 1.0]]).unwrap()));
    }

    #[test]
    fn riem_scaling_and_flatness() {
        let a = Mat::from_rows(&[[0.2, 1.0], [-0.3, 0.5]]).unwrap();
        let base = riem_norm(&mu_of_a(&a));
        for c in [0.5, 2.0, 10.0] {
            let scaled = riem_norm(&mu_of_a(&a.scale(c)));
            assert!((scaled - c * c * base).abs() <= 1e-12 * scaled);
        }
        let skew = Mat::from_rows(&[[0.0, 3.0], [-3.0, 0.0]]).unwrap();
        let report = curvature_report(&mu_of_a(&skew), 100, 1);
        assert!(report.flat && report.riem_norm < 1e-12);
    }

    #[test]
    fn velocity_reproduces_matrix_flow() {
        let a = Mat::from_rows(&[[0.3, -1.2], [2.0, 0.1]]).unwrap();
        let v = bracket_flow_velocity(&mu_of_a(&a));
        let rhs = crate::flow::bracket_rhs(&a);
        let m = 3;
        for i in 0..2 {
            for k in 0..2 {
                assert!((v[(i + 1) * m + k + 1] - rhs[(k, i)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rescaling_keeps_jacobi() {
        let g = MetricLieAlgebra::from_constants(
            4,
            &[(0, 1, 1, 0.2), (0, 2, 2, 0.8), (0, 3, 3, 1.0), (1, 2, 3, 1.0)],
        )
        .unwrap();
        let r = rescale_direction(&g, 0, 3.0).unwrap();
        assert!((r.c(0, 3, 3) - 3.0).abs() < 1e-15);
        assert_eq!(r.c(1, 2, 3), 1.0);
    }
}
