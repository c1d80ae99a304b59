//! Embedded Dormand-Prince 5(4) integrator with PI step-size control.
//!
//! The driver lands exactly on the sample grid `k * stride`, which keeps runs
//! bit-reproducible and spares us dense output. Error is measured in the
//! Frobenius norm over the leading `error_len` components, so auxiliary
//! state (for example an accumulated physical time) can ride along without
//! steering the step size.

/// A first-order autonomous system `y' = f(y)`.
pub trait OdeSystem {
    fn rhs(&self, y: &[f64], dy: &mut [f64]);

    /// Number of leading components that enter the error norm.
    fn error_len(&self, y: &[f64]) -> usize {
        y.len()
    }

    /// Called on every candidate step result. Returns `false` to reject the
    /// step (the driver halves `h` and retries); may modify `y` in place.
    fn project(&self, _y: &mut [f64]) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub init_step: f64,
    pub max_step: f64,
    /// Step failure when `h` falls below this fraction of the current time scale.
    pub min_step_rel: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            init_step: 1e-3,
            max_step: f64::INFINITY,
            min_step_rel: 1e-14,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    ReachedEnd,
    /// The stop predicate fired at the given time.
    Predicate(f64),
    StepFailure(f64),
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub samples: Vec<(f64, Vec<f64>)>,
    pub stop: Stop,
    pub stats: Stats,
}

// Dormand-Prince coefficients (autonomous systems only, so no c_i nodes).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller exponents (Hairer & Wanner, dopri5 defaults).
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - BETA * 0.75;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One Dormand-Prince step from `y` with `k[0] = f(y)` already filled.
/// Leaves the 5th-order result in `ws.y_new`, `f(y_new)` in `k[6]`, and the
/// embedded error estimate in `ws.err`.
fn dp_step<S: OdeSystem + ?Sized>(sys: &S, y: &[f64], h: f64, ws: &mut Workspace) {
    let n = y.len();
    let Workspace { k, tmp, y_new, err } = ws;
    macro_rules! stage {
        ($dst:expr, $($coef:expr => $src:expr),+) => {{
            for i in 0..n {
                tmp[i] = y[i] + h * (0.0 $(+ $coef * k[$src][i])+);
            }
            let (_, rest) = k.split_at_mut($dst);
            sys.rhs(tmp, &mut rest[0]);
        }};
    }
    stage!(1, A21 => 0);
    stage!(2, A31 => 0, A32 => 1);
    stage!(3, A41 => 0, A42 => 1, A43 => 2);
    stage!(4, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
    stage!(5, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
    for i in 0..n {
        y_new[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
    }
    let (_, rest) = k.split_at_mut(6);
    sys.rhs(y_new, &mut rest[0]);
    for i in 0..n {
        err[i] = h
            * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                + E7 * k[6][i]);
    }
}

/// Integrates from `t = 0` to `t_end`, recording `y` at every multiple of
/// `stride` and at `t_end`. `stop(t, y, dy)` is consulted after each accepted
/// step; returning `true` records a final sample at `t` and ends the run.
pub fn solve<S, P>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    stride: f64,
    ctrl: &StepControl,
    mut stop: P,
) -> Solution
where
    S: OdeSystem + ?Sized,
    P: FnMut(f64, &[f64], &[f64]) -> bool,
{
    let n = y0.len();
    let mut ws = Workspace::new(n);
    let mut y = y0.to_vec();
    let mut stats = Stats::default();
    let mut samples = vec![(0.0, y.clone())];

    sys.rhs(&y, &mut ws.k[0]);
    stats.rhs_evals += 1;
    if stop(0.0, &y, &ws.k[0]) {
        return Solution {
            samples,
            stop: Stop::Predicate(0.0),
            stats,
        };
    }

    let mut t = 0.0;
    let mut h = ctrl.init_step.min(ctrl.max_step).min(t_end);
    let mut err_prev: f64 = 1e-4;
    let mut next_index: u64 = 1;
    let mut rejected_last = false;

    loop {
        let next_sample = (next_index as f64 * stride).min(t_end);
        let remaining = next_sample - t;
        let landing = h >= remaining * (1.0 - 1e-12);
        let h_try = if landing { remaining } else { h };

        let scale = t.abs().max(1.0);
        if h_try < ctrl.min_step_rel * scale || stats.accepted + stats.rejected >= ctrl.max_steps {
            return Solution {
                samples,
                stop: Stop::StepFailure(t),
                stats,
            };
        }

        dp_step(sys, &y, h_try, &mut ws);
        stats.rhs_evals += 6;

        let m = sys.error_len(&y);
        let size = norm(&y[..m]).max(norm(&ws.y_new[..m]));
        let tol = ctrl.abs_tol.max(ctrl.rel_tol * size);
        let err = norm(&ws.err[..m]) / tol;

        let finite = ws.y_new.iter().all(|v| v.is_finite()) && err.is_finite();
        if !finite || err > 1.0 {
            stats.rejected += 1;
            let fac = if finite {
                (SAFETY * err.powf(-ALPHA)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            h = h_try * if rejected_last { fac.min(0.5) } else { fac };
            rejected_last = true;
            continue;
        }

        let mut candidate = ws.y_new.clone();
        if !sys.project(&mut candidate) {
            stats.rejected += 1;
            h = 0.5 * h_try;
            rejected_last = true;
            continue;
        }

        // Accept.
        stats.accepted += 1;
        t = if landing { next_sample } else { t + h_try };
        let projected = candidate != ws.y_new;
        y = candidate;
        if projected {
            sys.rhs(&y, &mut ws.k[0]);
            stats.rhs_evals += 1;
        } else {
            ws.k.swap(0, 6);
        }

        let fac = if err == 0.0 {
            FAC_MAX
        } else {
            (SAFETY * err.powf(-ALPHA) * err_prev.powf(BETA)).clamp(FAC_MIN, FAC_MAX)
        };
        let fac = if rejected_last { fac.min(1.0) } else { fac };
        err_prev = err.max(1e-4);
        rejected_last = false;
        // A landing step is usually truncated; grow from the controller's
        // proposal for the full step instead of the truncated one.
        let base = if landing { h.max(h_try) } else { h_try };
        h = (base * fac).min(ctrl.max_step);

        if landing {
            samples.push((t, y.clone()));
            next_index += 1;
            if t >= t_end {
                return Solution {
                    samples,
                    stop: Stop::ReachedEnd,
                    stats,
                };
            }
        }
        if stop(t, &y, &ws.k[0]) {
            if !landing {
                samples.push((t, y.clone()));
            }
            return Solution {
                samples,
                stop: Stop::Predicate(t),
                stats,
            };
        }
    }
}
