//! Soliton classification and certification, the monotone quantities along
//! the flows, and omega-limit analysis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::flow::{
    bracket_rhs, integrate, normalized_rhs_unchecked, FlowKind, FlowSpec, Terminal, Trajectory,
    DEFAULT_EPS_FIX,
};
use crate::geometry::{delta_mu, mu_of_a, ricci_operator_general, ricci_operator_mu_a, MetricLieAlgebra};
use crate::mat::{bracket, dot, is_nilpotent, self_commutator, sym_part, tr_sym_sq, Mat};

/// Relative singular-value cutoff for the derivation space.
pub const NULLSPACE_TOL: f64 = 1e-10;
/// Relative slack of the decay bound `tr(S^2) (2t + tr(S0^2)^-1) <= 1`.
pub const DECAY_SLACK: f64 = 1e-6;
/// Consecutive increasing steps before a monotonicity violation counts.
pub const PERSISTENCE: usize = 3;

/// `F(B) = ||[B, B^t]||^2`.
pub fn moment_f(b: &Mat) -> f64 {
    self_commutator(b).norm_sq()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolitonLabel {
    NormalSoliton,
    NilpotentSoliton,
    /// Certified from structure constants without a matrix form.
    AlgebraicSoliton,
    NotSoliton,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `||[A,A^t]|| / ||A||^2`.
    pub normality: f64,
    /// `||[A,[A,A^t]] - cA|| / ||A||^3`.
    pub eigen_relation: f64,
    /// `||Ric - cI - D|| / ||Ric||`.
    pub ric_decomposition: f64,
    /// `||delta_mu(D)|| / (||mu|| ||D||)`.
    pub derivation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonVerdict {
    pub label: SolitonLabel,
    /// Ratio in `[A,[A,A^t]] = cA` for nilpotent solitons; never positive.
    pub c: Option<f64>,
    /// `c` in `Ric = cI + D`.
    pub soliton_constant: Option<f64>,
    pub derivation: Option<Mat>,
    pub residuals: Residuals,
}

impl SolitonVerdict {
    pub fn is_soliton(&self) -> bool {
        self.label != SolitonLabel::NotSoliton
    }
}

/// Normal matrix, nilpotent eigen-solution of `[A,[A,A^t]] = cA`, or neither.
pub fn classify_soliton(a: &Mat, tol: f64) -> Result<SolitonVerdict> {
    let norm_sq = a.norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::Precondition("zero matrix has no soliton class".into()));
    }
    let norm = norm_sq.sqrt();
    let comm = self_commutator(a);
    let normality = comm.norm() / norm_sq;
    let double = bracket(a, &comm);
    let c = dot(&double, a) / norm_sq;
    let eigen_relation = (&double - &a.scale(c)).norm() / (norm_sq * norm);

    let mut residuals = Residuals {
        normality,
        eigen_relation,
        ..Residuals::default()
    };
    let ric = ricci_operator_mu_a(a);
    let n = a.dim();
    let (label, c_nil, constant, lower) = if normality <= tol {
        // Ric = diag(-tr S^2, -tr(A) S(A)), D = Ric + tr(S^2) I.
        let t = tr_sym_sq(a);
        let mut e = Mat::identity(n).scale(t);
        e -= &sym_part(a).scale(a.trace());
        (SolitonLabel::NormalSoliton, None, -t, (0.0, e))
    } else if is_nilpotent(a, tol) && eigen_relation <= tol {
        // D = diag(-c/2, 1/2 [A,A^t] - k I) with k = (c - ||A||^2)/2.
        let k = 0.5 * (c - norm_sq);
        let mut e = comm.scale(0.5);
        e -= &Mat::identity(n).scale(k);
        (SolitonLabel::NilpotentSoliton, Some(c.min(0.0)), k, (-0.5 * c, e))
    } else {
        return Ok(SolitonVerdict {
            label: SolitonLabel::NotSoliton,
            c: None,
            soliton_constant: None,
            derivation: None,
            residuals,
        });
    };
    let (d00, e) = lower;
    let d = Mat::from_fn(n + 1, |i, j| match (i, j) {
        (0, 0) => d00,
        (0, _) | (_, 0) => 0.0,
        _ => e[(i - 1, j - 1)],
    });
    let mut gap = ric.clone();
    gap -= &Mat::identity(n + 1).scale(constant);
    gap -= &d;
    residuals.ric_decomposition = relative(gap.norm(), ric.norm());
    residuals.derivation = derivation_residual(&mu_of_a(a), &d);
    Ok(SolitonVerdict {
        label,
        c: c_nil,
        soliton_constant: Some(constant),
        derivation: Some(d),
        residuals,
    })
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

fn derivation_residual(g: &MetricLieAlgebra, d: &Mat) -> f64 {
    let defect: f64 = delta_mu(g, d).iter().map(|v| v * v).sum::<f64>().sqrt();
    relative(defect, g.norm_sq().sqrt() * d.norm())
}

/// Orthonormal basis of `Der(g)`, the kernel of `D -> delta_mu(D)`.
pub fn derivation_basis(g: &MetricLieAlgebra) -> Vec<Mat> {
    let m = g.dim();
    let cols = m * m;
    let rows = (m * m * m).max(cols);
    let mut lin = DMatrix::<f64>::zeros(rows, cols);
    for p in 0..m {
        for q in 0..m {
            let image = delta_mu(g, &Mat::unit(m, p, q));
            for (r, v) in image.iter().enumerate() {
                lin[(r, p * m + q)] = *v;
            }
        }
    }
    let svd = lin.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |s, v| s.max(*v));
    let cutoff = NULLSPACE_TOL * smax;
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= cutoff)
        .map(|(k, _)| Mat::from_fn(m, |p, q| v_t[(k, p * m + q)]))
        .collect()
}

/// Least-squares fit of `Ric = cI + D` with `D` in the derivation space.
pub fn certify_algebraic_soliton(g: &MetricLieAlgebra, tol: f64) -> SolitonVerdict {
    let m = g.dim();
    let ric = ricci_operator_general(g);
    let basis = derivation_basis(g);
    let unknowns = basis.len() + 1;
    let mut lhs = DMatrix::<f64>::zeros(m * m, unknowns);
    let mut rhs = DVector::<f64>::zeros(m * m);
    for p in 0..m {
        for q in 0..m {
            let r = p * m + q;
            lhs[(r, 0)] = if p == q { 1.0 } else { 0.0 };
            for (k, d) in basis.iter().enumerate() {
                lhs[(r, k + 1)] = d[(p, q)];
            }
            rhs[r] = ric[(p, q)];
        }
    }
    let x = lhs
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .unwrap_or_else(|_| DVector::zeros(unknowns));
    let constant = x[0];
    let mut d = Mat::zeros(m);
    for (k, b) in basis.iter().enumerate() {
        d += &b.scale(x[k + 1]);
    }
    let mut gap = ric.clone();
    gap -= &Mat::identity(m).scale(constant);
    gap -= &d;
    let residuals = Residuals {
        ric_decomposition: relative(gap.norm(), ric.norm()),
        derivation: derivation_residual(g, &d),
        ..Residuals::default()
    };
    // Floor at rounding level so flat algebras (Ric = 0) are accepted.
    let floor = 16.0 * f64::EPSILON * g.norm_sq();
    let accepted = gap.norm() <= (tol * ric.norm()).max(floor);
    SolitonVerdict {
        label: if accepted {
            SolitonLabel::AlgebraicSoliton
        } else {
            SolitonLabel::NotSoliton
        },
        c: None,
        soliton_constant: accepted.then_some(constant),
        derivation: accepted.then_some(d),
        residuals,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorRule {
    NormSqIncreases,
    TrS2Increases,
    FIncreases,
    TraceSignFlips,
    TrA2SignFlips,
    DecayBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub rule: MonitorRule,
    pub magnitude: f64,
}

/// Scans a series for runs of at least [`PERSISTENCE`] increasing steps
/// beyond the slack; reports one violation per run.
fn monotone_violations(ts: &[f64], vs: &[f64], slack: f64, rule: MonitorRule, out: &mut Vec<Violation>) {
    let mut run = 0;
    let mut worst: f64 = 0.0;
    let mut start = 0.0;
    for k in 1..vs.len() {
        let rise = vs[k] - vs[k - 1];
        let allowed = slack * vs[k - 1].abs().max(vs[k].abs());
        if rise > allowed {
            if run == 0 {
                start = ts[k];
                worst = 0.0;
            }
            run += 1;
            worst = worst.max(relative(rise, vs[k - 1].abs()));
            continue;
        }
        if run >= PERSISTENCE {
            out.push(Violation { t: start, rule, magnitude: worst });
        }
        run = 0;
    }
    if run >= PERSISTENCE {
        out.push(Violation { t: start, rule, magnitude: worst });
    }
}

fn sign_violations(ts: &[f64], vs: &[f64], scales: &[f64], thr: f64, rule: MonitorRule, out: &mut Vec<Violation>) {
    let reference = vs
        .iter()
        .zip(scales)
        .find(|(v, s)| v.abs() > thr * **s)
        .map(|(v, _)| v.signum());
    let Some(sign) = reference else { return };
    for k in 0..vs.len() {
        if vs[k].abs() > thr * scales[k] && vs[k].signum() != sign {
            out.push(Violation {
                t: ts[k],
                rule,
                magnitude: relative(vs[k].abs(), scales[k]),
            });
            return;
        }
    }
}

/// Checks the monotone quantities of the trajectory's flow sample to sample.
pub fn monitor_suite(traj: &Trajectory) -> Vec<Violation> {
    let mut out = Vec::new();
    if traj.samples.len() < 2 {
        return out;
    }
    let slack = 10.0 * traj.spec.rel_tol;
    let sign_thr = 10.0 * traj.spec.rel_tol;
    let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let col = |f: &dyn Fn(&crate::flow::DiagnosticRow) -> f64| -> Vec<f64> {
        traj.samples.iter().map(|s| f(&s.diag)).collect()
    };
    let norm_sq = col(&|d| d.norm_sq);
    let norms: Vec<f64> = norm_sq.iter().map(|v| v.sqrt()).collect();
    match traj.spec.kind {
        FlowKind::Bracket => {
            monotone_violations(&ts, &norm_sq, slack, MonitorRule::NormSqIncreases, &mut out);
            monotone_violations(&ts, &col(&|d| d.tr_s2), slack, MonitorRule::TrS2Increases, &mut out);
            monotone_violations(&ts, &col(&|d| d.f), slack, MonitorRule::FIncreases, &mut out);
            sign_violations(&ts, &col(&|d| d.tr_a), &norms, sign_thr, MonitorRule::TraceSignFlips, &mut out);
            sign_violations(&ts, &col(&|d| d.tr_a2), &norm_sq, sign_thr, MonitorRule::TrA2SignFlips, &mut out);
            let s0 = traj.samples[0].diag.tr_s2;
            let skew = s0 <= 1e-12 * traj.samples[0].diag.norm_sq;
            if !skew {
                for s in &traj.samples {
                    let Some(t) = s.physical_t else { continue };
                    let ratio = s.diag.tr_s2 * (2.0 * t + 1.0 / s0);
                    if ratio > 1.0 + DECAY_SLACK {
                        out.push(Violation {
                            t: s.t,
                            rule: MonitorRule::DecayBound,
                            magnitude: ratio - 1.0,
                        });
                        break;
                    }
                }
            }
        }
        FlowKind::Normalized => {
            monotone_violations(&ts, &col(&|d| d.f), slack, MonitorRule::FIncreases, &mut out);
            sign_violations(&ts, &col(&|d| d.tr_a), &norms, sign_thr, MonitorRule::TraceSignFlips, &mut out);
            sign_violations(&ts, &col(&|d| d.tr_a2), &norm_sq, sign_thr, MonitorRule::TrA2SignFlips, &mut out);
        }
        FlowKind::Gradient => {
            monotone_violations(&ts, &norm_sq, slack, MonitorRule::NormSqIncreases, &mut out);
            let f_raw: Vec<f64> = traj.samples.iter().map(|s| s.diag.f * s.diag.norm_sq * s.diag.norm_sq).collect();
            monotone_violations(&ts, &f_raw, slack, MonitorRule::FIncreases, &mut out);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmegaLimitReport {
    pub converged: bool,
    pub terminal: Terminal,
    pub a_inf: Option<Mat>,
    /// `||S(A_inf)|| / max(1, ||A_inf||)`.
    pub skew_residual: f64,
    /// Verdict on `B_inf` for the normalized flow.
    pub verdict: Option<SolitonVerdict>,
    pub late_samples: Vec<Mat>,
    /// Late samples pairwise agree in canonical spectrum.
    pub spectra_agree: bool,
    /// `||[X,X^t]|| / ||X||^2` for each late sample.
    pub normality_residuals: Vec<f64>,
    pub late_f: Vec<f64>,
    /// Largest pairwise distance between late samples.
    pub late_spread: f64,
}

pub const SKEW_LIMIT_TOL: f64 = 1e-5;
pub const LIMIT_CLASSIFY_TOL: f64 = 1e-6;
const SPECTRUM_AGREE_TOL: f64 = 1e-5;
const MIN_WINDOW: usize = 10;

/// Integrates until stationary (or `t_end`) and analyses the trailing
/// `window` fraction of samples.
pub fn omega_limit(spec: &FlowSpec, window: f64) -> Result<OmegaLimitReport> {
    if spec.kind == FlowKind::Gradient {
        return Err(Error::Precondition("omega-limit analysis covers the bracket and normalized flows".into()));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidSpec(format!("window must lie in (0, 1], got {window}")));
    }
    let mut spec = spec.clone();
    let eps = *spec.stop_when_stationary.get_or_insert(DEFAULT_EPS_FIX);
    let traj = integrate(&spec)?;
    Ok(analyse_limit(&traj, window, eps))
}

fn analyse_limit(traj: &Trajectory, window: f64, eps: f64) -> OmegaLimitReport {
    let total = traj.samples.len();
    let take = ((total as f64 * window).ceil() as usize).max(MIN_WINDOW).min(total);
    let late: Vec<&Mat> = traj.samples[total - take..].iter().map(|s| &s.a).collect();
    let last = traj.last().a.clone();
    let size = last.norm();
    let skew_residual = sym_part(&last).norm() / size.max(1.0);

    let spectra: Vec<_> = late.iter().map(|a| eigenvalues(a).ok()).collect();
    let spectra_agree = spectra.iter().all(|s| s.is_some()) && {
        let first = spectra[0].as_ref().expect("checked");
        spectra.iter().flatten().all(|s| {
            let d = s.distance(first);
            d <= SPECTRUM_AGREE_TOL * first.radius().max(s.radius()) || d <= 1e-14
        })
    };
    let normality_residuals = late
        .iter()
        .map(|a| {
            let n2 = a.norm_sq();
            if n2 > 0.0 {
                self_commutator(a).norm() / n2
            } else {
                0.0
            }
        })
        .collect();
    let late_f = late.iter().map(|a| crate::flow::normalized_moment(a)).collect();
    let mut late_spread: f64 = 0.0;
    for i in 0..late.len() {
        for j in i + 1..late.len() {
            late_spread = late_spread.max((late[i] - late[j]).norm());
        }
    }

    let stationary = traj.terminal == Terminal::Stationary;
    let (converged, verdict) = match traj.spec.kind {
        FlowKind::Normalized => {
            let verdict = classify_soliton(&last, LIMIT_CLASSIFY_TOL).ok();
            let fixed = normalized_rhs_unchecked(&last).norm() <= eps.max(1e-8);
            let ok = stationary && fixed && verdict.as_ref().is_some_and(|v| v.is_soliton());
            (ok, verdict)
        }
        _ => {
            let fixed = bracket_rhs(&last).norm() <= eps * size.max(1.0).powi(3);
            (stationary && fixed && skew_residual <= SKEW_LIMIT_TOL, None)
        }
    };
    OmegaLimitReport {
        converged,
        terminal: traj.terminal,
        a_inf: converged.then_some(last),
        skew_residual,
        verdict,
        late_samples: late.into_iter().cloned().collect(),
        spectra_agree,
        normality_residuals,
        late_f,
        late_spread,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{Clock, FlowSpec};

    #[test]
    fn f_examples() {
        assert_eq!(moment_f(&Mat::diag(&[1.0, 2.0])), 0.0);
        let e12 = Mat::unit(2, 0, 1);
        assert!((moment_f(&e12) - 2.0).abs() < 1e-15);
        assert!((moment_f(&e12.scale(3.0)) - 81.0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn classify_examples() {
        let v = classify_soliton(&Mat::diag(&[1.0, 2.0, 3.0]), 1e-8).unwrap();
        assert_eq!(v.label, SolitonLabel::NormalSoliton);
        assert!(v.residuals.derivation < 1e-14 && v.residuals.ric_decomposition < 1e-14);

        let v = classify_soliton(&Mat::unit(2, 0, 1), 1e-8).unwrap();
        assert_eq!(v.label, SolitonLabel::NilpotentSoliton);
        assert_eq!(v.c, Some(-2.0));
        assert_eq!(v.soliton_constant, Some(-1.5));
        assert!(v.residuals.derivation < 1e-14 && v.residuals.ric_decomposition < 1e-14);

        let v = classify_soliton(&Mat::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap(), 1e-8).unwrap();
        assert_eq!(v.label, SolitonLabel::NotSoliton);
        assert!(classify_soliton(&Mat::zeros(2), 1e-8).is_err());
    }

    #[test]
    fn certification_matches_explicit_derivation() {
        let v = certify_algebraic_soliton(&mu_of_a(&Mat::unit(2, 0, 1)), 1e-8);
        assert_eq!(v.label, SolitonLabel::AlgebraicSoliton);
        assert!((v.soliton_constant.unwrap() + 1.5).abs() < 1e-10);
        let explicit = classify_soliton(&Mat::unit(2, 0, 1), 1e-8).unwrap().derivation.unwrap();
        assert!((&v.derivation.unwrap() - &explicit).max_abs() < 1e-10);

        let not = mu_of_a(&Mat::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap());
        assert_eq!(certify_algebraic_soliton(&not, 1e-8).label, SolitonLabel::NotSoliton);
        let flat = mu_of_a(&Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap());
        assert!(certify_algebraic_soliton(&flat, 1e-8).is_soliton());
    }

    #[test]
    fn derivations_of_heisenberg() {
        // Der(h3) has dimension 6.
        let g = MetricLieAlgebra::from_constants(3, &[(0, 1, 2, 1.0)]).unwrap();
        assert_eq!(derivation_basis(&g).len(), 6);
        assert_eq!(derivation_basis(&MetricLieAlgebra::abelian(2)).len(), 4);
    }

    #[test]
    fn monitors_quiet_on_solitons_and_loud_on_corruption() {
        let spec = FlowSpec::new(FlowKind::Bracket, Mat::diag(&[1.0, -1.0]), 20.0);
        let mut traj = integrate(&spec).unwrap();
        assert!(monitor_suite(&traj).is_empty());
        for (k, s) in traj.samples.iter_mut().enumerate().skip(50) {
            s.diag.norm_sq *= 1.05f64.powi((k - 49) as i32);
        }
        let v = monitor_suite(&traj);
        assert!(v.iter().any(|v| v.rule == MonitorRule::NormSqIncreases), "{v:?}");
    }

    #[test]
    fn isolated_glitch_is_tolerated() {
        let spec = FlowSpec::new(FlowKind::Bracket, Mat::unit(2, 0, 1), 5.0);
        let mut traj = integrate(&spec).unwrap();
        traj.samples[40].diag.norm_sq *= 1.001;
        assert!(monitor_suite(&traj).is_empty());
    }

    #[test]
    fn omega_limits() {
        let skew = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let r = omega_limit(&FlowSpec::new(FlowKind::Bracket, skew.clone(), 10.0), 0.2).unwrap();
        assert!(r.converged);
        assert_eq!(r.a_inf.unwrap(), skew);

        let spec = FlowSpec::new(FlowKind::Bracket, Mat::identity(2), 200.0).with_clock(Clock::Homogeneous);
        let r = omega_limit(&spec, 0.2).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(r.a_inf.unwrap().norm() < 1e-8);

        let a0 = Mat::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap();
        let r = omega_limit(&FlowSpec::new(FlowKind::Normalized, a0, 200.0), 0.2).unwrap();
        assert!(r.converged, "{r:?}");
        let b = r.a_inf.unwrap();
        assert!(sym_part(&b).norm() > 0.5);
        assert_eq!(r.verdict.unwrap().label, SolitonLabel::NormalSoliton);
    }
}
