//! Desk-scale invariant suite with a fixed seed. Every check runs on its own
//! RNG stream derived from the seed, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::casebook::{ejsol_exact, ejsol_integrate, phase2d_rhs, EjsolState, Phase2DPoint};
use crate::eigen::eigenvalues;
use crate::flow::{bracket_rhs, gradient_rhs, integrate, normalized_rhs_unchecked, FlowKind, FlowSpec};
use crate::geometry::{
    heintze_check, mu_a_probe_planes, mu_of_a, ricci_operator_general, ricci_operator_mu_a, riem_norm,
    riemann_tensor, sectional_range,
};
use crate::mat::{classify_matrix, commutator, dot, self_commutator, tr_sq, tr_sym_sq, Mat, DEFAULT_TOL};
use crate::soliton::{certify_algebraic_soliton, classify_soliton, monitor_suite};

pub type GradientFn = fn(&Mat) -> Mat;

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Implementation under test for the finite-difference gradient check.
    pub gradient: GradientFn,
}

impl ValidateOptions {
    pub fn new(seed: u64) -> Self {
        ValidateOptions {
            seed,
            gradient: gradient_rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Matrix with independent standard normal entries.
pub fn random_mat(rng: &mut impl Rng, n: usize) -> Mat {
    Mat::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn result(name: &str, trials: usize, worst: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: worst <= tolerance,
        trials,
        worst,
        tolerance,
    }
}

/// Boolean check: `worst` counts failed trials.
fn count_result(name: &str, trials: usize, failures: usize) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: failures == 0,
        trials,
        worst: failures as f64,
        tolerance: 0.0,
    }
}

type Check = fn(&mut ChaCha8Rng, &ValidateOptions) -> CheckResult;

const CHECKS: &[Check] = &[
    check_commutator_trace,
    check_comm_orthogonal,
    check_double_bracket,
    check_eigen_conjugation,
    check_classify_scale,
    check_norm_identity,
    check_trace_square_identity,
    check_gradient_fd,
    check_monotonicity,
    check_spectrum_scaling,
    check_normalized_f,
    check_ricci_cross,
    check_scalar_curvature,
    check_riemann_symmetries,
    check_riem_scaling,
    check_heintze_vs_sampling,
    check_fixed_point_vs_classify,
    check_certify_vs_classify,
    check_flat_iff_skew,
    check_phase_specialization,
    check_ejsol_numeric,
];

pub fn run_validation(opts: &ValidateOptions) -> ValidationReport {
    let checks: Vec<CheckResult> = CHECKS
        .par_iter()
        .enumerate()
        .map(|(k, check)| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64);
            check(&mut rng, opts)
        })
        .collect();
    ValidationReport {
        seed: opts.seed,
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn check_commutator_trace(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let x = random_mat(rng, n);
        let y = random_mat(rng, n);
        let c = commutator(&x, &y).expect("equal dims");
        worst = worst.max(c.trace().abs() / (x.norm() * y.norm()));
    }
    result("commutator_traceless", 500, worst, 1e-12)
}

fn check_comm_orthogonal(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let a = random_mat(rng, n);
        worst = worst.max(dot(&a, &self_commutator(&a)).abs() / a.norm().powi(3));
    }
    result("inner_a_comm_zero", 500, worst, 1e-10)
}

fn check_double_bracket(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(2..=8);
        let a = random_mat(rng, n);
        let c = self_commutator(&a);
        let lhs = dot(&a, &commutator(&a, &c).expect("equal dims"));
        let rhs = -c.norm_sq();
        worst = worst.max((lhs - rhs).abs() / rhs.abs());
    }
    result("inner_a_double_bracket", 500, worst, 1e-8)
}

fn check_eigen_conjugation(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut trials = 0;
    while trials < 100 {
        let n = rng.random_range(1..=6);
        let a = random_mat(rng, n);
        let p = random_mat(rng, n);
        if p.condition_number() > 1e3 {
            continue;
        }
        trials += 1;
        let pinv = p.inverse().expect("well conditioned");
        let b = &(&p * &a) * &pinv;
        let sa = eigenvalues(&a).expect("converges");
        let sb = eigenvalues(&b).expect("converges");
        worst = worst.max(sa.distance(&sb) / sa.radius().max(1.0));
    }
    result("eigenvalues_conjugation_invariant", trials, worst, 1e-7)
}

fn check_classify_scale(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut failures = 0;
    for k in 0..200 {
        let n = rng.random_range(2..=5);
        let a = match k % 4 {
            0 => random_mat(rng, n),
            1 => {
                let m = random_mat(rng, n);
                &m + &m.transpose()
            }
            2 => random_mat(rng, n).skew_part(),
            _ => Mat::from_fn(n, |i, j| if j > i { StandardNormal.sample(rng) } else { 0.0 }),
        };
        let base = classify_matrix(&a, DEFAULT_TOL);
        for c in [1e-6, 0.5, 3.0, 1e6] {
            if classify_matrix(&a.scale(c), DEFAULT_TOL) != base {
                failures += 1;
            }
        }
    }
    count_result("classify_scale_invariant", 200, failures)
}

fn check_norm_identity(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        let a = random_mat(rng, n);
        let lhs = 2.0 * dot(&bracket_rhs(&a), &a);
        let rhs = -2.0 * tr_sym_sq(&a) * a.norm_sq() - self_commutator(&a).norm_sq();
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(a.norm().powi(4)));
    }
    result("norm_evolution_identity", 500, worst, 1e-8)
}

fn check_trace_square_identity(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(1..=6);
        let a = random_mat(rng, n);
        // tr([A, X] A) = 0 for every X, so only the scalar term survives.
        let lhs = 2.0 * dot(&bracket_rhs(&a), &a.transpose());
        let rhs = -2.0 * tr_sym_sq(&a) * tr_sq(&a);
        worst = worst.max((lhs - rhs).abs() / a.norm().powi(4));
    }
    result("trace_square_evolution_identity", 500, worst, 1e-8)
}

fn check_gradient_fd(rng: &mut ChaCha8Rng, opts: &ValidateOptions) -> CheckResult {
    let f = |a: &Mat| self_commutator(a).norm_sq();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=5);
        let a = random_mat(rng, n);
        let h = 1e-5 * a.norm();
        let g = (opts.gradient)(&a);
        let fd = Mat::from_fn(n, |i, j| {
            let mut plus = a.clone();
            let mut minus = a.clone();
            plus[(i, j)] += h;
            minus[(i, j)] -= h;
            -(f(&plus) - f(&minus)) / (2.0 * h)
        });
        worst = worst.max((&g - &fd).norm() / fd.norm().max(f64::MIN_POSITIVE));
    }
    result("gradient_matches_finite_difference", 100, worst, 1e-4)
}

fn check_monotonicity(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut failures = 0;
    for _ in 0..8 {
        let n = rng.random_range(2..=4);
        let a = random_mat(rng, n);
        let traj = integrate(&FlowSpec::new(FlowKind::Bracket, a, 20.0)).expect("valid spec");
        if !monitor_suite(&traj).is_empty() {
            failures += 1;
        }
    }
    count_result("bracket_monitors_quiet", 8, failures)
}

fn check_spectrum_scaling(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..6 {
        let n = rng.random_range(2..=4);
        let a0 = random_mat(rng, n);
        let traj = integrate(&FlowSpec::new(FlowKind::Bracket, a0, 10.0).with_stride(1.0)).expect("valid spec");
        let spec0 = traj.samples[0].diag.spectrum.clone().expect("spectrum");
        for s in &traj.samples {
            let (Some(a), Some(spec)) = (s.diag.a_of_t, &s.diag.spectrum) else {
                worst = f64::INFINITY;
                continue;
            };
            let want = spec0.scaled(a);
            worst = worst.max(spec.distance(&want) / want.radius().max(f64::MIN_POSITIVE));
        }
    }
    result("spectrum_scales", 6, worst, 1e-5)
}

fn check_normalized_f(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut failures = 0;
    for _ in 0..6 {
        let n = rng.random_range(2..=4);
        let a0 = random_mat(rng, n);
        let traj = integrate(&FlowSpec::new(FlowKind::Normalized, a0, 10.0)).expect("valid spec");
        if !monitor_suite(&traj).is_empty() {
            failures += 1;
        }
    }
    count_result("normalized_f_non_increasing", 6, failures)
}

fn check_ricci_cross(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let a = random_mat(rng, n);
        let block = ricci_operator_mu_a(&a);
        let general = ricci_operator_general(&mu_of_a(&a));
        worst = worst.max((&block - &general).norm() / block.norm());
    }
    result("ricci_general_matches_block", 200, worst, 1e-10)
}

fn check_scalar_curvature(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let a = random_mat(rng, n);
        let scalar = ricci_operator_general(&mu_of_a(&a)).trace();
        let want = -tr_sym_sq(&a) - a.trace().powi(2);
        worst = worst.max((scalar - want).abs() / want.abs()).max(scalar.max(0.0));
    }
    result("scalar_curvature_formula", 200, worst, 1e-10)
}

fn check_riemann_symmetries(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let n = rng.random_range(1..=4);
        let a = random_mat(rng, n);
        let r = riemann_tensor(&mu_of_a(&a));
        let scale = r.max_abs().max(f64::MIN_POSITIVE);
        worst = worst.max(r.symmetry_defect() / scale);
        let ric = ricci_operator_general(&mu_of_a(&a));
        worst = worst.max((&r.ricci() - &ric).norm() / ric.norm());
    }
    result("riemann_symmetries_and_trace", 30, worst, 1e-9)
}

fn check_riem_scaling(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let n = rng.random_range(1..=4);
        let a = random_mat(rng, n);
        let base = riem_norm(&mu_of_a(&a));
        for c in [0.5, 2.0, 10.0] {
            let scaled = riem_norm(&mu_of_a(&a.scale(c)));
            worst = worst.max((scaled - c * c * base).abs() / scaled);
        }
    }
    result("riem_norm_scaling", 30, worst, 1e-8)
}

fn check_heintze_vs_sampling(rng: &mut ChaCha8Rng, opts: &ValidateOptions) -> CheckResult {
    let mut failures = 0;
    let mut trials = 0;
    while trials < 40 {
        let n = rng.random_range(1..=4);
        let mut a = random_mat(rng, n);
        // Half the cases shifted towards definite symmetric parts.
        if trials % 2 == 0 {
            a += &Mat::identity(n).scale(2.0);
        }
        let h = heintze_check(&a);
        if !h.cond_a || h.marginal {
            continue;
        }
        trials += 1;
        let g = mu_of_a(&a);
        let (_, k_max) = sectional_range(&g, 1000, opts.seed, &mu_a_probe_planes(&a));
        if h.negative != (k_max < 0.0) {
            failures += 1;
        }
    }
    count_result("heintze_matches_plane_sampling", trials, failures)
}

fn check_fixed_point_vs_classify(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut failures = 0;
    let mut cases = Vec::new();
    for k in 0..120 {
        let n = rng.random_range(2..=4);
        let a = match k % 3 {
            0 => random_mat(rng, n),
            1 => {
                let m = random_mat(rng, n);
                &m + &m.transpose()
            }
            _ => Mat::unit(n, 0, n - 1).scale(rng.random_range(0.5..2.0)),
        };
        cases.push(a);
    }
    for a in &cases {
        let b = a.scale(1.0 / a.norm());
        let fixed = normalized_rhs_unchecked(&b).norm() <= 1e-8;
        let soliton = classify_soliton(&b, DEFAULT_TOL).expect("nonzero").is_soliton();
        if fixed != soliton {
            failures += 1;
        }
    }
    count_result("normalized_fixed_point_iff_soliton", cases.len(), failures)
}

fn check_certify_vs_classify(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut failures = 0;
    for k in 0..60 {
        let n = rng.random_range(2..=4);
        let a = match k % 3 {
            0 => random_mat(rng, n),
            1 => {
                let m = random_mat(rng, n);
                &m + &m.transpose()
            }
            _ => Mat::unit(n, 0, 1),
        };
        let structural = certify_algebraic_soliton(&mu_of_a(&a), 1e-8).is_soliton();
        let matrix = classify_soliton(&a, DEFAULT_TOL).expect("nonzero").is_soliton();
        if structural != matrix {
            failures += 1;
        }
    }
    count_result("certification_iff_matrix_soliton", 60, failures)
}

fn check_flat_iff_skew(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut failures = 0;
    for k in 0..60 {
        let n = rng.random_range(1..=4);
        let m = random_mat(rng, n);
        let a = if k % 2 == 0 { m.skew_part() } else { m };
        let flat = riem_norm(&mu_of_a(&a)) <= 1e-8 * a.norm_sq().max(1.0);
        let skew = classify_matrix(&a, DEFAULT_TOL) == crate::mat::MatrixClass::Skew;
        if flat != skew {
            failures += 1;
        }
    }
    count_result("flat_iff_skew", 60, failures)
}

fn check_phase_specialization(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = Phase2DPoint::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let r = bracket_rhs(&p.to_mat());
        let f = phase2d_rhs(p);
        let (q, off) = Phase2DPoint::from_mat(&r);
        worst = worst.max((q.x - f.x).abs()).max((q.y - f.y).abs()).max(off);
    }
    result("phase_plane_specialization", 100, worst, 1e-12)
}

fn check_ejsol_numeric(rng: &mut ChaCha8Rng, _: &ValidateOptions) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let lambda = rng.random_range(0.05..4.0);
        let alpha0 = rng.random_range(0.1..2.0);
        let start = EjsolState::initial(lambda, alpha0).expect("valid");
        for s in ejsol_integrate(&start, 100.0, 1.0) {
            let e = ejsol_exact(&start, s.t).expect("t >= 0");
            worst = worst.max((s.alpha - e.alpha).abs() / e.alpha).max((s.h - e.h).abs() / e.h);
        }
    }
    result("reduced_family_matches_exact", 5, worst, 1e-8)
}
