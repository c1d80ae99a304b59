//! The three matrix flows, their integration, the soliton closed forms, the
//! pullback co-integration and the bracket/gradient reparameterization bridge.
//!
//! All three right-hand sides are homogeneous cubic polynomials in the matrix
//! entries:
//!
//! * bracket flow `A' = -tr(S(A)^2) A + 1/2 [A,[A,A^t]] - 1/2 tr(A) [A,A^t]`,
//! * normalized flow (on the unit sphere, in rescaled time `s` with
//!   `ds/dt = ||A||^2 / 2`) `B' = [B,[B,B^t]] - tr(B) [B,B^t] + ||[B,B^t]||^2 B`,
//! * negative gradient flow of `F(A) = ||[A,A^t]||^2`, `A' = 4 [A,[A,A^t]]`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::eigen::{eigenvalues, SpectrumMultiset};
use crate::error::{Error, Result};
use crate::mat::{bracket, dot, self_commutator, sym_part, tr_sq, tr_sym_sq, Mat, DEFAULT_TOL};
use crate::ode::{self, OdeSystem, StepControl, Stop};
use crate::soliton::{classify_soliton, SolitonLabel};

/// Default stationarity threshold.
pub const DEFAULT_EPS_FIX: f64 = 1e-10;
/// Largest tolerated norm drift of the normalized flow per accepted step.
pub const NORMALIZED_DRIFT_LIMIT: f64 = 1e-9;

/// Right-hand side of the bracket flow.
pub fn bracket_rhs(a: &Mat) -> Mat {
    let c = self_commutator(a);
    let mut out = a.scale(-tr_sym_sq(a));
    out += &bracket(a, &c).scale(0.5);
    out -= &c.scale(0.5 * a.trace());
    out
}

/// Right-hand side of the normalized flow in rescaled time. `b` must have
/// unit Frobenius norm to within `1e-6`.
pub fn normalized_rhs(b: &Mat) -> Result<Mat> {
    let norm = b.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "normalized flow needs a unit matrix, got norm {norm}"
        )));
    }
    Ok(normalized_rhs_unchecked(b))
}

pub(crate) fn normalized_rhs_unchecked(b: &Mat) -> Mat {
    let c = self_commutator(b);
    let mut out = bracket(b, &c);
    out -= &c.scale(b.trace());
    out += &b.scale(c.norm_sq());
    out
}

/// Negative gradient of `F(A) = ||[A,A^t]||^2`, i.e. `4 [A,[A,A^t]]`.
pub fn gradient_rhs(a: &Mat) -> Mat {
    bracket(a, &self_commutator(a)).scale(4.0)
}

/// `F(A/||A||)`, the scale-invariant moment-map functional; zero for `A = 0`.
pub fn normalized_moment(a: &Mat) -> f64 {
    let n2 = a.norm_sq();
    if n2 == 0.0 {
        0.0
    } else {
        self_commutator(a).norm_sq() / (n2 * n2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Bracket,
    Normalized,
    Gradient,
}

/// Independent variable of an integration.
///
/// `Homogeneous` divides the (cubic) right-hand side by `||A||^2`. Trajectories
/// are unchanged as point sets and the physical time is carried along as an
/// auxiliary variable, but convergence to the limit becomes exponential
/// instead of algebraic, which is what limit detection needs. The normalized
/// flow always runs in its own rescaled time and ignores this setting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    #[default]
    Physical,
    Homogeneous,
}

fn default_rel_tol() -> f64 {
    1e-10
}
fn default_abs_tol() -> f64 {
    1e-13
}
fn default_init_step() -> f64 {
    1e-3
}

/// Everything needed to run one flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub kind: FlowKind,
    pub a0: Mat,
    pub t_end: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    /// Largest step; unbounded when absent.
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default = "default_init_step")]
    pub init_step: f64,
    /// Time between recorded samples; `t_end / 100` when absent.
    #[serde(default)]
    pub sample_stride: Option<f64>,
    /// Stop once `||rhs|| <= eps * max(1, ||A||)`.
    #[serde(default)]
    pub stop_when_stationary: Option<f64>,
    #[serde(default)]
    pub clock: Clock,
}

impl FlowSpec {
    pub fn new(kind: FlowKind, a0: Mat, t_end: f64) -> Self {
        FlowSpec {
            kind,
            a0,
            t_end,
            rel_tol: default_rel_tol(),
            abs_tol: default_abs_tol(),
            max_step: None,
            init_step: default_init_step(),
            sample_stride: None,
            stop_when_stationary: None,
            clock: Clock::Physical,
        }
    }

    pub fn with_stride(mut self, stride: f64) -> Self {
        self.sample_stride = Some(stride);
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_stationary_stop(mut self, eps: f64) -> Self {
        self.stop_when_stationary = Some(eps);
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn stride(&self) -> f64 {
        self.sample_stride.unwrap_or(self.t_end / 100.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return bad(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol < 1.0) {
            return bad(format!("abs_tol must lie in (0, 1), got {}", self.abs_tol));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        let stride = self.stride();
        if !(stride > 0.0 && stride.is_finite()) {
            return bad(format!("sample_stride must be positive, got {stride}"));
        }
        if !(self.init_step > 0.0) {
            return bad(format!("init_step must be positive, got {}", self.init_step));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return bad(format!("max_step must be positive, got {h}"));
            }
        }
        if let Some(eps) = self.stop_when_stationary {
            if !(eps > 0.0) {
                return bad(format!("stationarity threshold must be positive, got {eps}"));
            }
        }
        if self.kind == FlowKind::Normalized && self.a0.norm() == 0.0 {
            return bad("normalized flow needs a nonzero initial matrix".into());
        }
        if !self.a0.is_finite() {
            return bad("initial matrix has non-finite entries".into());
        }
        Ok(())
    }

    fn control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            init_step: self.init_step,
            max_step: self.max_step.unwrap_or(f64::INFINITY),
            ..StepControl::default()
        }
    }

    fn effective_clock(&self) -> Clock {
        match self.kind {
            FlowKind::Normalized => Clock::Physical,
            _ => self.clock,
        }
    }
}

/// Per-sample diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub norm_sq: f64,
    pub tr_a: f64,
    pub tr_a2: f64,
    pub tr_s2: f64,
    /// `||[B,B^t]||^2` for `B = A/||A||`.
    pub f: f64,
    /// Norm of the flow's own right-hand side at this sample.
    pub rhs_norm: f64,
    /// Scale factor of `A(t)` relative to the initial matrix, when recoverable.
    pub a_of_t: Option<f64>,
    pub spectrum: Option<SpectrumMultiset>,
}

impl DiagnosticRow {
    pub fn compute(kind: FlowKind, a: &Mat, reference: Option<(&Mat, &SpectrumMultiset)>) -> Self {
        let rhs = match kind {
            FlowKind::Bracket => bracket_rhs(a),
            FlowKind::Normalized => normalized_rhs_unchecked(a),
            FlowKind::Gradient => gradient_rhs(a),
        };
        let spectrum = eigenvalues(a).ok();
        let a_of_t = match (reference, &spectrum) {
            (Some((a0, spec0)), Some(spec)) => scale_factor(a0, spec0, a, spec),
            _ => None,
        };
        DiagnosticRow {
            norm_sq: a.norm_sq(),
            tr_a: a.trace(),
            tr_a2: tr_sq(a),
            tr_s2: tr_sym_sq(a),
            f: normalized_moment(a),
            rhs_norm: rhs.norm(),
            a_of_t,
            spectrum,
        }
    }
}

/// Scale factor `a` with `Spec(A) = a Spec(A0)`: trace ratio when the trace
/// of `A0` is usable, least-squares spectral ratio otherwise.
pub fn scale_factor(a0: &Mat, spec0: &SpectrumMultiset, a: &Mat, spec: &SpectrumMultiset) -> Option<f64> {
    if a0.trace().abs() > 1e-8 {
        return Some(a.trace() / a0.trace());
    }
    let denom: f64 = spec0.values().iter().map(|z| z.norm_sqr()).sum();
    if denom <= 1e-16 * a0.norm_sq().max(f64::MIN_POSITIVE) {
        return None;
    }
    let num: f64 = spec
        .values()
        .iter()
        .zip(spec0.values())
        .map(|(z, z0)| z.re * z0.re + z.im * z0.im)
        .sum();
    Some(num / denom)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    ReachedTEnd,
    Stationary,
    StepFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Value of the integration variable (physical `t`, homogeneous clock, or
    /// rescaled `s` for the normalized flow).
    pub t: f64,
    /// Physical time when known (not reconstructed for the normalized flow).
    pub physical_t: Option<f64>,
    pub a: Mat,
    pub diag: DiagnosticRow,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: FlowSpec,
    pub samples: Vec<Sample>,
    pub terminal: Terminal,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories always hold the initial sample")
    }

    /// CSV with header `t,a11,...,ann,norm_sq,tr_A,tr_A2,tr_S2,F,rhs_norm`.
    pub fn to_csv(&self) -> String {
        let n = self.spec.a0.dim();
        let mut out = String::from("t");
        for i in 1..=n {
            for j in 1..=n {
                let _ = write!(out, ",a{i}{j}");
            }
        }
        out.push_str(",norm_sq,tr_A,tr_A2,tr_S2,F,rhs_norm\n");
        for s in &self.samples {
            out.push_str(&fmt_f64(s.t));
            for v in s.a.as_slice() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            let d = &s.diag;
            for v in [d.norm_sq, d.tr_a, d.tr_a2, d.tr_s2, d.f, d.rhs_norm] {
                out.push(',');
                out.push_str(&fmt_f64(v));
            }
            out.push('\n');
        }
        out
    }
}

/// Float formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct MatrixFlow {
    kind: FlowKind,
    clock: Clock,
    n: usize,
}

impl MatrixFlow {
    fn mat(&self, y: &[f64]) -> Mat {
        Mat::from_vec(self.n, y[..self.n * self.n].to_vec())
            .unwrap_or_else(|_| Mat::from_fn(self.n, |i, j| y[i * self.n + j]))
    }
}

impl OdeSystem for MatrixFlow {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let a = self.mat(y);
        let f = match self.kind {
            FlowKind::Bracket => bracket_rhs(&a),
            FlowKind::Normalized => normalized_rhs_unchecked(&a),
            FlowKind::Gradient => gradient_rhs(&a),
        };
        let nn = self.n * self.n;
        match self.clock {
            Clock::Physical => dy[..nn].copy_from_slice(f.as_slice()),
            Clock::Homogeneous => {
                let n2 = a.norm_sq();
                let inv = if n2 > 0.0 { 1.0 / n2 } else { 0.0 };
                for (d, v) in dy[..nn].iter_mut().zip(f.as_slice()) {
                    *d = v * inv;
                }
                dy[nn] = inv;
            }
        }
    }

    fn error_len(&self, _y: &[f64]) -> usize {
        self.n * self.n
    }

    fn project(&self, y: &mut [f64]) -> bool {
        if self.kind != FlowKind::Normalized {
            return true;
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORMALIZED_DRIFT_LIMIT {
            return false;
        }
        for v in y.iter_mut() {
            *v /= norm;
        }
        true
    }
}

/// Integrates a flow and records diagnostics at every sample.
pub fn integrate(spec: &FlowSpec) -> Result<Trajectory> {
    spec.validate()?;
    let n = spec.a0.dim();
    let nn = n * n;
    let clock = spec.effective_clock();
    let start = match spec.kind {
        FlowKind::Normalized => spec.a0.scale(1.0 / spec.a0.norm()),
        _ => spec.a0.clone(),
    };
    let mut y0 = start.as_slice().to_vec();
    if clock == Clock::Homogeneous {
        y0.push(0.0);
    }
    let system = MatrixFlow {
        kind: spec.kind,
        clock,
        n,
    };
    let eps = spec.stop_when_stationary;
    let sol = ode::solve(&system, &y0, spec.t_end, spec.stride(), &spec.control(), |_, y, dy| {
        let Some(eps) = eps else { return false };
        let size = y[..nn].iter().map(|v| v * v).sum::<f64>().sqrt();
        let rate = dy[..nn].iter().map(|v| v * v).sum::<f64>().sqrt();
        rate <= eps * size.max(1.0)
    });

    let spec0 = eigenvalues(&start).ok();
    let mut samples = Vec::with_capacity(sol.samples.len());
    for (t, y) in &sol.samples {
        let a = system.mat(y);
        let physical_t = match (spec.kind, clock) {
            (FlowKind::Normalized, _) => None,
            (_, Clock::Physical) => Some(*t),
            (_, Clock::Homogeneous) => Some(y[nn]),
        };
        let reference = spec0.as_ref().map(|s| (&start, s));
        let diag = DiagnosticRow::compute(spec.kind, &a, reference);
        samples.push(Sample {
            t: *t,
            physical_t,
            a,
            diag,
        });
    }
    let terminal = match sol.stop {
        Stop::ReachedEnd => Terminal::ReachedTEnd,
        Stop::Predicate(_) => Terminal::Stationary,
        Stop::StepFailure(_) => Terminal::StepFailure,
    };
    Ok(Trajectory {
        spec: spec.clone(),
        samples,
        terminal,
        accepted_steps: sol.stats.accepted,
        rejected_steps: sol.stats.rejected,
    })
}

/// Exact bracket-flow solution from a soliton matrix.
///
/// Normal `A0`: `(2 tr(S(A0)^2) t + 1)^(-1/2) A0`. Nilpotent `A0` with
/// `[A0,[A0,A0^t]] = c A0`: `((||A0||^2 - c) t + 1)^(-1/2) A0`, the solution
/// of `a' = ((c - ||A0||^2)/2) a^3`, `a(0) = 1`.
pub fn closed_form_soliton(a0: &Mat, t: f64) -> Result<Mat> {
    Ok(a0.scale(soliton_scale(a0, t)?))
}

/// Scalar factor `a(t)` of [`closed_form_soliton`].
pub fn soliton_scale(a0: &Mat, t: f64) -> Result<f64> {
    if a0.is_zero() {
        return Ok(1.0);
    }
    let verdict = classify_soliton(a0, DEFAULT_TOL)?;
    let rate = match verdict.label {
        SolitonLabel::NormalSoliton => 2.0 * tr_sym_sq(a0),
        SolitonLabel::NilpotentSoliton => {
            let c = verdict.c.expect("nilpotent verdicts carry c");
            a0.norm_sq() - c
        }
        _ => {
            return Err(Error::NotSoliton {
                tol: DEFAULT_TOL,
                reason: "matrix is neither normal nor a nilpotent eigen-solution".into(),
            })
        }
    };
    Ok((rate * t + 1.0).powf(-0.5))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PullbackSample {
    pub t: f64,
    pub b: f64,
    pub phi: Mat,
    /// `||A(t) - phi A0 phi^-1 / b|| / ||A(t)||` with `A(t)` from the trajectory.
    pub conjugation_residual: f64,
    pub condition: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PullbackReport {
    pub samples: Vec<PullbackSample>,
    /// Time at which `phi` became numerically singular, if it did.
    pub truncated_at: Option<f64>,
    pub max_conjugation_residual: f64,
}

const PULLBACK_COND_LIMIT: f64 = 1e12;

struct PullbackSystem {
    n: usize,
}

impl OdeSystem for PullbackSystem {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        let nn = n * n;
        let a = Mat::from_fn(n, |i, j| y[i * n + j]);
        let b = y[nn];
        let phi = Mat::from_fn(n, |i, j| y[nn + 1 + i * n + j]);
        dy[..nn].copy_from_slice(bracket_rhs(&a).as_slice());
        dy[nn] = tr_sym_sq(&a) * b;
        let mut ric = self_commutator(&a).scale(0.5);
        ric -= &sym_part(&a).scale(a.trace());
        let dphi = (&ric * &phi).scale(-1.0);
        dy[nn + 1..].copy_from_slice(dphi.as_slice());
    }
}

/// Co-integrates the pullback `h(t) = diag(b, phi)` alongside a bracket flow:
/// `b' = tr(S(A)^2) b`, `phi' = -(1/2 [A,A^t] - tr(A) S(A)) phi`, `b(0) = 1`,
/// `phi(0) = I`, and checks `A(t) = phi A0 phi^-1 / b` at every sample.
pub fn cointegrate_pullback(traj: &Trajectory) -> Result<PullbackReport> {
    let spec = &traj.spec;
    if spec.kind != FlowKind::Bracket || spec.effective_clock() != Clock::Physical {
        return Err(Error::Precondition(
            "pullback co-integration needs a physical-time bracket trajectory".into(),
        ));
    }
    let a0 = &spec.a0;
    let n = a0.dim();
    let nn = n * n;
    let mut y0 = a0.as_slice().to_vec();
    y0.push(1.0);
    y0.extend_from_slice(Mat::identity(n).as_slice());
    let t_last = traj.last().t;
    let sol = ode::solve(
        &PullbackSystem { n },
        &y0,
        t_last.max(f64::MIN_POSITIVE),
        spec.stride(),
        &spec.control(),
        |_, _, _| false,
    );

    let mut samples = Vec::new();
    let mut truncated_at = None;
    let mut max_res: f64 = 0.0;
    let mut traj_iter = traj.samples.iter().peekable();
    for (t, y) in &sol.samples {
        // Pair with the trajectory sample at the same grid time.
        while traj_iter.peek().is_some_and(|s| s.t < *t) {
            traj_iter.next();
        }
        let Some(s) = traj_iter.peek() else { break };
        if s.t != *t {
            continue;
        }
        let b = y[nn];
        let phi = Mat::from_fn(n, |i, j| y[nn + 1 + i * n + j]);
        let condition = phi.condition_number();
        if !(condition <= PULLBACK_COND_LIMIT) {
            truncated_at = Some(*t);
            break;
        }
        let phi_inv = phi.inverse().expect("well-conditioned matrices invert");
        let conj = (&(&phi * a0) * &phi_inv).scale(1.0 / b);
        let scale = s.a.norm().max(f64::MIN_POSITIVE);
        let res = if s.a.is_zero() && conj.is_zero() {
            0.0
        } else {
            (&s.a - &conj).norm() / scale
        };
        max_res = max_res.max(res);
        samples.push(PullbackSample {
            t: *t,
            b,
            phi,
            conjugation_residual: res,
            condition,
        });
    }
    Ok(PullbackReport {
        samples,
        truncated_at,
        max_conjugation_residual: max_res,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BridgeSample {
    pub t: f64,
    pub c: f64,
    pub tau: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BridgeReport {
    pub samples: Vec<BridgeSample>,
    pub max_residual: f64,
}

/// Gradient flow run along the reparameterized clock: state `(Abar, c, tau)`
/// with `tau' = c^2/8`, `c' = -tr(S(Abar)^2) c^3`, `dAbar/dt = tau' * 4[Abar,[Abar,Abar^t]]`.
struct BridgeSystem {
    n: usize,
}

impl OdeSystem for BridgeSystem {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        let nn = n * n;
        let abar = Mat::from_fn(n, |i, j| y[i * n + j]);
        let c = y[nn];
        let dtau = c * c / 8.0;
        let grad = gradient_rhs(&abar);
        for (d, g) in dy[..nn].iter_mut().zip(grad.as_slice()) {
            *d = dtau * g;
        }
        dy[nn] = -tr_sym_sq(&abar) * c * c * c;
        dy[nn + 1] = dtau;
    }

    fn error_len(&self, y: &[f64]) -> usize {
        y.len()
    }
}

/// Checks that the bracket flow is a rescaled, reparameterized gradient flow,
/// `A(t) = c(t) Abar(tau(t))`, for traceless initial data. The two curves are
/// integrated independently.
pub fn reparam_bridge(a0: &Mat, t_end: f64) -> Result<BridgeReport> {
    if a0.trace().abs() > 1e-10 * a0.norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "reparameterization bridge needs tr(A0) = 0, got {}",
            a0.trace()
        )));
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidSpec("t_end must be positive".into()));
    }
    let stride = t_end / 200.0;
    let spec = FlowSpec::new(FlowKind::Bracket, a0.clone(), t_end)
        .with_stride(stride)
        .with_tolerances(1e-11, 1e-14);
    let traj = integrate(&spec)?;

    let n = a0.dim();
    let nn = n * n;
    let mut y0 = a0.as_slice().to_vec();
    y0.extend_from_slice(&[1.0, 0.0]);
    let ctrl = StepControl {
        rel_tol: 1e-11,
        abs_tol: 1e-14,
        ..StepControl::default()
    };
    let sol = ode::solve(&BridgeSystem { n }, &y0, t_end, stride, &ctrl, |_, _, _| false);

    let mut samples = Vec::new();
    let mut max_residual: f64 = 0.0;
    for ((t, y), s) in sol.samples.iter().zip(&traj.samples) {
        debug_assert_eq!(*t, s.t);
        let abar = Mat::from_fn(n, |i, j| y[i * n + j]);
        let c = y[nn];
        let tau = y[nn + 1];
        let scale = s.a.norm();
        let diff = (&s.a - &abar.scale(c)).norm();
        let residual = if scale > 0.0 { diff / scale } else { diff };
        max_residual = max_residual.max(residual);
        samples.push(BridgeSample {
            t: *t,
            c,
            tau,
            residual,
        });
    }
    Ok(BridgeReport {
        samples,
        max_residual,
    })
}

/// Inner products used by the norm and trace evolution identities.
pub fn rhs_identities(a: &Mat) -> (f64, f64) {
    let r = bracket_rhs(a);
    (2.0 * dot(&r, a), 2.0 * dot(&r, &a.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e12() -> Mat {
        Mat::unit(2, 0, 1)
    }

    fn max_diff(a: &Mat, b: &Mat) -> f64 {
        (a - b).max_abs()
    }

    #[test]
    fn trace_square_rate_carries_a_factor_two() {
        // diag(1, 2): tr(S^2) = 5, tr(A^2) = 5, and the flow is A' = -5A,
        // so d/dt tr(A^2) = -50 = -2 tr(S^2) tr(A^2), not -25.
        let a = Mat::diag(&[1.0, 2.0]);
        let (_, rate) = rhs_identities(&a);
        assert!((rate + 50.0).abs() < 1e-12);
        assert!((rate + 25.0).abs() > 1.0);
    }

    #[test]
    fn bracket_rhs_examples() {
        let skew = Mat::from_rows(&[[0.0, 1.5], [-1.5, 0.0]]).unwrap();
        assert!(bracket_rhs(&skew).max_abs() < 1e-15);
        let d = Mat::diag(&[1.0, -1.0]);
        assert!(max_diff(&bracket_rhs(&d), &d.scale(-2.0)) < 1e-15);
        assert!(max_diff(&bracket_rhs(&e12()), &e12().scale(-1.5)) < 1e-15);
    }

    #[test]
    fn normalized_rhs_examples() {
        let d = Mat::diag(&[1.0, -1.0]).scale(0.5f64.sqrt());
        assert!(normalized_rhs(&d).unwrap().max_abs() < 1e-15);
        assert!(normalized_rhs(&e12()).unwrap().max_abs() < 1e-15);
        assert!(normalized_rhs(&Mat::diag(&[2.0, 0.0])).is_err());
    }

    #[test]
    fn gradient_rhs_examples() {
        assert!(gradient_rhs(&Mat::diag(&[3.0, -1.0])).is_zero());
        assert!(max_diff(&gradient_rhs(&e12()), &e12().scale(-8.0)) < 1e-15);
    }

    #[test]
    fn closed_forms() {
        let d = Mat::diag(&[1.0, -1.0]);
        for t in [0.0, 0.5, 3.0] {
            let want = d.scale((4.0 * t + 1.0f64).powf(-0.5));
            assert!(max_diff(&closed_form_soliton(&d, t).unwrap(), &want) < 1e-15);
            let want = e12().scale((3.0 * t + 1.0f64).powf(-0.5));
            assert!(max_diff(&closed_form_soliton(&e12(), t).unwrap(), &want) < 1e-15);
        }
        let not = Mat::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(closed_form_soliton(&not, 1.0), Err(Error::NotSoliton { .. })));
    }

    #[test]
    fn nilpotent_closed_form_matches_scalar_ode() {
        // Oracle: integrate a' = ((c - |A0|^2)/2) a^3 with c = -2, |A0|^2 = 1.
        struct Scalar;
        impl OdeSystem for Scalar {
            fn rhs(&self, y: &[f64], dy: &mut [f64]) {
                dy[0] = -1.5 * y[0].powi(3);
            }
        }
        let ctrl = StepControl {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            ..StepControl::default()
        };
        let sol = ode::solve(&Scalar, &[1.0], 10.0, 0.5, &ctrl, |_, _, _| false);
        for (t, y) in sol.samples {
            let a = soliton_scale(&e12(), t).unwrap();
            assert!((a - y[0]).abs() < 1e-10, "t={t}: {a} vs {}", y[0]);
        }
    }

    #[test]
    fn closed_form_solves_the_flow_by_substitution() {
        // d/dt of the closed form (central difference) equals bracket_rhs.
        let cases = [Mat::diag(&[1.0, -1.0]), e12(), Mat::diag(&[0.3, 1.2, -0.7])];
        for a0 in cases {
            for t in [0.0, 0.7, 4.0] {
                let h = 1e-5;
                let plus = closed_form_soliton(&a0, t + h).unwrap();
                let minus = closed_form_soliton(&a0, (t - h).max(0.0)).unwrap();
                let dt = if t == 0.0 { h } else { 2.0 * h };
                let deriv = (&plus - &minus).scale(1.0 / dt);
                let rhs = bracket_rhs(&closed_form_soliton(&a0, t).unwrap());
                let tol = if t == 0.0 { 1e-4 } else { 1e-8 };
                assert!(max_diff(&deriv, &rhs) < tol * rhs.norm().max(1.0), "t={t}");
            }
        }
    }

    #[test]
    fn skew_start_is_constant() {
        let skew = Mat::from_rows(&[[0.0, 1.0, -2.0], [-1.0, 0.0, 0.5], [2.0, -0.5, 0.0]]).unwrap();
        let traj = integrate(&FlowSpec::new(FlowKind::Bracket, skew.clone(), 5.0)).unwrap();
        assert_eq!(traj.terminal, Terminal::ReachedTEnd);
        for s in &traj.samples {
            assert!(max_diff(&s.a, &skew) < 1e-14);
        }
    }

    #[test]
    fn diagonal_flow_matches_closed_form() {
        let d = Mat::diag(&[1.0, -1.0]);
        let traj = integrate(&FlowSpec::new(FlowKind::Bracket, d.clone(), 10.0)).unwrap();
        for s in &traj.samples {
            let want = closed_form_soliton(&d, s.t).unwrap();
            assert!(max_diff(&s.a, &want) <= 1e-6 * want.max_abs());
        }
    }

    #[test]
    fn stationary_stop_and_invalid_specs() {
        let skew = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let spec = FlowSpec::new(FlowKind::Bracket, skew, 5.0).with_stationary_stop(DEFAULT_EPS_FIX);
        let traj = integrate(&spec).unwrap();
        assert_eq!(traj.terminal, Terminal::Stationary);
        assert_eq!(traj.samples.len(), 1);

        let mut bad = FlowSpec::new(FlowKind::Bracket, e12(), 1.0);
        bad.rel_tol = 1.5;
        assert!(integrate(&bad).is_err());
        let zero = FlowSpec::new(FlowKind::Normalized, Mat::zeros(2), 1.0);
        assert!(integrate(&zero).is_err());
        let neg = FlowSpec::new(FlowKind::Bracket, e12(), -1.0);
        assert!(integrate(&neg).is_err());
    }

    #[test]
    fn homogeneous_clock_tracks_physical_time() {
        // diag(1,-1): ||A||^2 = 2/(4t+1); the auxiliary clock must reproduce t.
        let d = Mat::diag(&[1.0, -1.0]);
        let spec = FlowSpec::new(FlowKind::Bracket, d.clone(), 3.0).with_clock(Clock::Homogeneous);
        let traj = integrate(&spec).unwrap();
        for s in &traj.samples {
            let t = s.physical_t.unwrap();
            let want = closed_form_soliton(&d, t).unwrap();
            assert!(max_diff(&s.a, &want) < 1e-8, "sigma={} t={t}", s.t);
        }
    }

    #[test]
    fn pullback_for_diagonal_start() {
        let d = Mat::diag(&[1.0, -1.0]);
        let traj = integrate(&FlowSpec::new(FlowKind::Bracket, d, 5.0)).unwrap();
        let report = cointegrate_pullback(&traj).unwrap();
        assert!(report.truncated_at.is_none());
        for s in &report.samples {
            assert!((s.b - (4.0 * s.t + 1.0).sqrt()).abs() < 1e-7);
            assert!(s.phi[(0, 1)].abs() < 1e-12 && s.phi[(1, 0)].abs() < 1e-12);
        }
        assert!(report.max_conjugation_residual < 1e-5);
    }

    #[test]
    fn pullback_for_skew_start_is_orthogonal() {
        let skew = Mat::from_rows(&[[0.0, 2.0], [-2.0, 0.0]]).unwrap();
        let traj = integrate(&FlowSpec::new(FlowKind::Bracket, skew, 3.0)).unwrap();
        let report = cointegrate_pullback(&traj).unwrap();
        for s in &report.samples {
            assert!((s.b - 1.0).abs() < 1e-14);
            let gram = &s.phi.transpose() * &s.phi;
            assert!((&gram - &Mat::identity(2)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn bridge_rejects_trace() {
        assert!(reparam_bridge(&Mat::identity(2), 1.0).is_err());
        let normal = Mat::diag(&[1.0, -1.0]);
        assert!(reparam_bridge(&normal, 2.0).unwrap().max_residual < 1e-9);
    }

    #[test]
    fn csv_header_and_rows() {
        let traj = integrate(&FlowSpec::new(FlowKind::Bracket, e12(), 1.0).with_stride(0.5)).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,a11,a12,a21,a22,norm_sq,tr_A,tr_A2,tr_S2,F,rhs_norm"
        );
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.split(',').count() == 11));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn spec_json_schema() {
        let text = r#"{"kind":"bracket","a0":[[0,1],[0,0]],"t_end":2.0,"sample_stride":0.5}"#;
        let spec: FlowSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.kind, FlowKind::Bracket);
        assert_eq!(spec.rel_tol, 1e-10);
        let typo = r#"{"kind":"bracket","a0":[[1]],"t_end":2.0,"rel_tl":0.1}"#;
        let err = serde_json::from_str::<FlowSpec>(typo).unwrap_err().to_string();
        assert!(err.contains("rel_tl"), "{err}");
    }
}
