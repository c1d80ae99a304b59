//! Worked examples: the antidiagonal 2x2 phase plane and the four-dimensional
//! family `mu(e_0, e_i) = alpha diag(lambda, 1 - lambda, 1) e_i`,
//! `mu(e_1, e_2) = h e_3`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{fmt_f64, integrate, Clock, FlowKind, FlowSpec, Terminal, DEFAULT_EPS_FIX};
use crate::geometry::{
    admits_negative_curvature, heintze_check, mu_a_probe_planes, mu_of_a, rescale_direction,
    sectional_range, MetricLieAlgebra,
};
use crate::mat::Mat;
use crate::ode::{self, OdeSystem, StepControl};

/// `A = [[0, x], [y, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase2DPoint {
    pub x: f64,
    pub y: f64,
}

impl Phase2DPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Phase2DPoint { x, y }
    }

    pub fn to_mat(self) -> Mat {
        Mat::from_fn(2, |i, j| match (i, j) {
            (0, 1) => self.x,
            (1, 0) => self.y,
            _ => 0.0,
        })
    }

    /// Antidiagonal entries and the size of everything else.
    pub fn from_mat(a: &Mat) -> (Self, f64) {
        let off = a[(0, 0)].abs().max(a[(1, 1)].abs());
        (Phase2DPoint::new(a[(0, 1)], a[(1, 0)]), off)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// `x' = x(x+y)(-3x/2 + y/2)`, `y' = y(x+y)(-3y/2 + x/2)`.
pub fn phase2d_rhs(p: Phase2DPoint) -> Phase2DPoint {
    let s = p.x + p.y;
    Phase2DPoint {
        x: p.x * s * (-1.5 * p.x + 0.5 * p.y),
        y: p.y * s * (-1.5 * p.y + 0.5 * p.x),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseClass {
    /// Initial point on the fixed line `y = -x`.
    Fixed,
    /// Nonzero limit on `y = -x`: a flat metric.
    Flat,
    /// Limit at the origin, approached along `y = x`.
    OriginDiagonal,
    /// Limit at the origin along `y = 0`.
    OriginXAxis,
    /// Limit at the origin along `x = 0`.
    OriginYAxis,
    /// Limit at the origin from any other direction.
    OriginOther,
    /// No limit reached (step failure or not stationary by the end).
    Unresolved,
}

impl PhaseClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseClass::Fixed => "fixed",
            PhaseClass::Flat => "flat",
            PhaseClass::OriginDiagonal => "origin_diagonal",
            PhaseClass::OriginXAxis => "origin_x_axis",
            PhaseClass::OriginYAxis => "origin_y_axis",
            PhaseClass::OriginOther => "origin_other",
            PhaseClass::Unresolved => "unresolved",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtlasEntry {
    pub index: usize,
    pub start: Phase2DPoint,
    pub class: PhaseClass,
    pub limit: Phase2DPoint,
    /// Physical time at which the run became stationary.
    pub t_stationary: Option<f64>,
    pub terminal: Terminal,
    /// `(t, x, y)` with `t` the physical time.
    pub path: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Atlas {
    pub entries: Vec<AtlasEntry>,
}

/// 41 x 41 points over `[-2, 2]^2`, without the fixed line `y = -x`.
pub fn default_grid() -> Vec<Phase2DPoint> {
    let mut grid = Vec::new();
    for i in 0..=40i32 {
        for j in 0..=40i32 {
            if i + j == 40 {
                continue;
            }
            grid.push(Phase2DPoint::new(f64::from(i - 20) / 10.0, f64::from(j - 20) / 10.0));
        }
    }
    grid
}

const ORIGIN_TOL: f64 = 1e-6;
const DIRECTION_TOL: f64 = 1e-3;

/// Integrates every grid point and classifies its limit. `sigma_end` is the
/// length of the run in the homogeneous clock.
pub fn phase2d_sweep(grid: &[Phase2DPoint], sigma_end: f64) -> Result<Atlas> {
    if grid.is_empty() {
        return Err(Error::InvalidSpec("phase-plane grid is empty".into()));
    }
    let entries = grid
        .par_iter()
        .enumerate()
        .map(|(index, &start)| sweep_point(index, start, sigma_end))
        .collect::<Result<Vec<_>>>()?;
    Ok(Atlas { entries })
}

fn sweep_point(index: usize, start: Phase2DPoint, sigma_end: f64) -> Result<AtlasEntry> {
    if start.x + start.y == 0.0 {
        return Ok(AtlasEntry {
            index,
            start,
            class: PhaseClass::Fixed,
            limit: start,
            t_stationary: Some(0.0),
            terminal: Terminal::Stationary,
            path: vec![(0.0, start.x, start.y)],
        });
    }
    let spec = FlowSpec::new(FlowKind::Bracket, start.to_mat(), sigma_end)
        .with_clock(Clock::Homogeneous)
        .with_stride(sigma_end / 400.0)
        .with_stationary_stop(DEFAULT_EPS_FIX);
    let traj = integrate(&spec)?;
    let path: Vec<_> = traj
        .samples
        .iter()
        .map(|s| (s.physical_t.unwrap_or(s.t), s.a[(0, 1)], s.a[(1, 0)]))
        .collect();
    let last = traj.last();
    let (limit, _) = Phase2DPoint::from_mat(&last.a);
    let stationary = traj.terminal == Terminal::Stationary;
    let class = if !stationary {
        PhaseClass::Unresolved
    } else if limit.norm() <= ORIGIN_TOL * start.norm() {
        let (ux, uy) = (limit.x / limit.norm(), limit.y / limit.norm());
        if (ux - uy).abs() <= DIRECTION_TOL {
            PhaseClass::OriginDiagonal
        } else if uy.abs() <= DIRECTION_TOL {
            PhaseClass::OriginXAxis
        } else if ux.abs() <= DIRECTION_TOL {
            PhaseClass::OriginYAxis
        } else {
            PhaseClass::OriginOther
        }
    } else {
        PhaseClass::Flat
    };
    Ok(AtlasEntry {
        index,
        start,
        class,
        limit,
        t_stationary: if stationary { last.physical_t } else { None },
        terminal: traj.terminal,
        path,
    })
}

impl Atlas {
    /// `x0,y0,class,x_inf,y_inf,t_stationary`.
    pub fn atlas_csv(&self) -> String {
        let mut out = String::from("x0,y0,class,x_inf,y_inf,t_stationary\n");
        for e in &self.entries {
            let t = e.t_stationary.map(fmt_f64).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(e.start.x),
                fmt_f64(e.start.y),
                e.class.as_str(),
                fmt_f64(e.limit.x),
                fmt_f64(e.limit.y),
                t
            );
        }
        out
    }

    pub fn trajectory_csv(&self, index: usize) -> Option<String> {
        let e = self.entries.get(index)?;
        let mut out = String::from("t,x,y\n");
        for (t, x, y) in &e.path {
            let _ = writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(*x), fmt_f64(*y));
        }
        Some(out)
    }

    pub fn trajectory_file_name(index: usize) -> String {
        format!("traj_{index:04}.csv")
    }

    /// Gnuplot script drawing every trajectory and the three soliton lines
    /// plus the fixed line on `[-2, 2]^2`.
    pub fn gnuplot_script(&self) -> String {
        let mut out = String::new();
        out.push_str("set datafile separator ','\n");
        out.push_str("set size square\nset xrange [-2:2]\nset yrange [-2:2]\n");
        out.push_str("set xlabel 'x'\nset ylabel 'y'\nunset key\n");
        out.push_str("set arrow from -2,2 to 2,-2 nohead lw 2 lc rgb 'black'\n");
        out.push_str("set arrow from -2,-2 to 2,2 nohead dt 2 lc rgb 'red'\n");
        out.push_str("set arrow from -2,0 to 2,0 nohead dt 2 lc rgb 'red'\n");
        out.push_str("set arrow from 0,-2 to 0,2 nohead dt 2 lc rgb 'red'\n");
        out.push_str("plot \\\n");
        let files: Vec<String> = self
            .entries
            .iter()
            .filter(|e| e.class != PhaseClass::Fixed)
            .map(|e| {
                format!(
                    "  '{}' using 2:3 every ::1 with lines lc rgb 'blue'",
                    Atlas::trajectory_file_name(e.index)
                )
            })
            .collect();
        if files.is_empty() {
            out.push_str("  1/0\n");
        } else {
            out.push_str(&files.join(", \\\n"));
            out.push('\n');
        }
        out
    }

    /// Writes `atlas.csv`, `phase.gp` and one CSV per trajectory.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("atlas.csv"), self.atlas_csv())?;
        fs::write(dir.join("phase.gp"), self.gnuplot_script())?;
        for e in &self.entries {
            if let Some(csv) = self.trajectory_csv(e.index) {
                fs::write(dir.join(Atlas::trajectory_file_name(e.index)), csv)?;
            }
        }
        Ok(())
    }

    /// File names written by [`Atlas::write_to`].
    pub fn file_names(&self) -> Vec<String> {
        let mut names = vec!["atlas.csv".to_string(), "phase.gp".to_string()];
        names.extend(self.entries.iter().map(|e| Atlas::trajectory_file_name(e.index)));
        names
    }
}

/// Limit of the normalized flow from an antidiagonal start.
pub fn phase2d_normalized_limit(start: Phase2DPoint, s_end: f64) -> Result<(Phase2DPoint, Terminal)> {
    let spec = FlowSpec::new(FlowKind::Normalized, start.to_mat(), s_end)
        .with_stride(s_end / 200.0)
        .with_stationary_stop(DEFAULT_EPS_FIX);
    let traj = integrate(&spec)?;
    Ok((Phase2DPoint::from_mat(&traj.last().a).0, traj.terminal))
}

/// `c_lambda = lambda^2 + (1 - lambda)^2 + 1`.
pub fn c_lambda(lambda: f64) -> f64 {
    lambda * lambda + (1.0 - lambda) * (1.0 - lambda) + 1.0
}

/// Value of `alpha` at which the family is an algebraic soliton.
pub fn ejsol_soliton_alpha(lambda: f64) -> f64 {
    (3.0 / (2.0 * c_lambda(lambda))).sqrt()
}

/// Structure constants of the family on `e_0, ..., e_3`.
pub fn ejsol_algebra(lambda: f64, alpha: f64, h: f64) -> Result<MetricLieAlgebra> {
    MetricLieAlgebra::from_constants(
        4,
        &[
            (0, 1, 1, alpha * lambda),
            (0, 2, 2, alpha * (1.0 - lambda)),
            (0, 3, 3, alpha),
            (1, 2, 3, h),
        ],
    )
}

/// `K(e_1, e_3) = h^2/4 - lambda alpha^2`.
pub fn ejsol_k13(lambda: f64, alpha: f64, h: f64) -> f64 {
    0.25 * h * h - lambda * alpha * alpha
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EjsolState {
    pub lambda: f64,
    pub alpha0: f64,
    pub alpha: f64,
    pub h: f64,
    pub t: f64,
}

impl EjsolState {
    pub fn initial(lambda: f64, alpha0: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) || !lambda.is_finite() {
            return Err(Error::OutOfRange(format!(
                "need finite lambda and alpha0 > 0, got lambda = {lambda}, alpha0 = {alpha0}"
            )));
        }
        Ok(EjsolState {
            lambda,
            alpha0,
            alpha: alpha0,
            h: 1.0,
            t: 0.0,
        })
    }

    pub fn k13(&self) -> f64 {
        ejsol_k13(self.lambda, self.alpha, self.h)
    }

    pub fn algebra(&self) -> Result<MetricLieAlgebra> {
        ejsol_algebra(self.lambda, self.alpha, self.h)
    }
}

/// `alpha(t) = (2 c_lambda t + alpha0^-2)^(-1/2)`, `h(t) = (3t + 1)^(-1/2)`.
pub fn ejsol_exact(s: &EjsolState, t: f64) -> Result<EjsolState> {
    if !(t >= 0.0) {
        return Err(Error::OutOfRange(format!("time must be non-negative, got {t}")));
    }
    let c = c_lambda(s.lambda);
    Ok(EjsolState {
        alpha: (2.0 * c * t + s.alpha0.powi(-2)).powf(-0.5),
        h: (3.0 * t + 1.0).powf(-0.5),
        t,
        ..*s
    })
}

struct EjsolFlow {
    c: f64,
}

impl OdeSystem for EjsolFlow {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        dy[0] = -self.c * y[0].powi(3);
        dy[1] = -1.5 * y[1].powi(3);
    }
}

/// Numerical solution of `alpha' = -c_lambda alpha^3`, `h' = -3/2 h^3`.
pub fn ejsol_integrate(start: &EjsolState, t_end: f64, stride: f64) -> Vec<EjsolState> {
    let ctrl = StepControl {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        ..StepControl::default()
    };
    let sys = EjsolFlow {
        c: c_lambda(start.lambda),
    };
    let sol = ode::solve(&sys, &[start.alpha, start.h], t_end, stride, &ctrl, |_, _, _| false);
    sol.samples
        .into_iter()
        .map(|(t, y)| EjsolState {
            alpha: y[0],
            h: y[1],
            t,
            ..*start
        })
        .collect()
}

/// First time from which `K(e_1, e_3) >= 0` along the flow started at
/// `alpha0`, for `0 < lambda <= 2 - sqrt(3)`.
pub fn ejsol_curvature_crossing(lambda: f64, alpha0: f64) -> Result<Option<f64>> {
    let upper = 2.0 - 3f64.sqrt();
    if !(lambda > 0.0 && lambda <= upper) {
        return Err(Error::OutOfRange(format!(
            "lambda must lie in (0, 2 - sqrt(3)], got {lambda}"
        )));
    }
    if !(alpha0 > 0.0) {
        return Err(Error::OutOfRange(format!("alpha0 must be positive, got {alpha0}")));
    }
    // K >= 0  <=>  (2 c_lambda - 12 lambda) t >= 4 lambda - alpha0^-2.
    let slope = 2.0 * c_lambda(lambda) - 12.0 * lambda;
    let need = 4.0 * lambda - alpha0.powi(-2);
    if need <= 0.0 {
        return Ok(Some(0.0));
    }
    if slope <= 0.0 {
        return Ok(None);
    }
    Ok(Some(need / slope))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureWatchReport {
    pub first_negative_time: Option<f64>,
    /// Negativity held at every sample from the first negative one to the end.
    pub persistent: bool,
    /// Negativity never observed by `t_end`.
    pub inconclusive: bool,
    pub samples_checked: usize,
    /// Random and probe planes found no curvature `>= 0` where Heintze's
    /// criteria say negative.
    pub sampler_agrees: bool,
    pub sampler_max_at_first: Option<f64>,
    pub seed: u64,
}

/// Follows the bracket flow from `a0` and reports when its metric becomes
/// negatively curved.
pub fn curvature_watch(a0: &Mat, t_end: f64, seed: u64) -> Result<CurvatureWatchReport> {
    if !admits_negative_curvature(a0) {
        return Err(Error::Precondition(
            "the spectrum of A0 must lie strictly on one side of the imaginary axis".into(),
        ));
    }
    let spec = FlowSpec::new(FlowKind::Bracket, a0.clone(), t_end).with_stride(t_end / 1000.0);
    let traj = integrate(&spec)?;
    let flags: Vec<bool> = traj.samples.iter().map(|s| heintze_check(&s.a).negative).collect();
    let first = flags.iter().position(|&f| f);
    let Some(k) = first else {
        return Ok(CurvatureWatchReport {
            first_negative_time: None,
            persistent: false,
            inconclusive: true,
            samples_checked: flags.len(),
            sampler_agrees: true,
            sampler_max_at_first: None,
            seed,
        });
    };
    let persistent = flags[k..].iter().all(|&f| f) && traj.terminal == Terminal::ReachedTEnd;
    let sample_max = |a: &Mat| {
        let g = mu_of_a(a);
        sectional_range(&g, 500, seed, &mu_a_probe_planes(a)).1
    };
    let at_first = sample_max(&traj.samples[k].a);
    let at_last = sample_max(&traj.last().a);
    Ok(CurvatureWatchReport {
        first_negative_time: Some(traj.samples[k].t),
        persistent,
        inconclusive: false,
        samples_checked: flags.len(),
        sampler_agrees: at_first < 0.0 && at_last < 0.0,
        sampler_max_at_first: Some(at_first),
        seed,
    })
}

/// Largest sampled sectional curvature after multiplying every bracket with
/// `e_0` by `factor`. For `0 < lambda < 1` the derivation
/// `diag(lambda, 1 - lambda, 1)` is positive, so large factors give
/// negatively curved metrics in the family.
pub fn ejsol_rescaled_max_curvature(
    lambda: f64,
    alpha: f64,
    h: f64,
    factor: f64,
    planes: usize,
    seed: u64,
) -> Result<f64> {
    let g = rescale_direction(&ejsol_algebra(lambda, alpha, h)?, 0, factor)?;
    let axes: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut extra = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            extra.push((axes[i].clone(), axes[j].clone()));
        }
    }
    Ok(sectional_range(&g, planes, seed, &extra).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::bracket_rhs;
    use crate::geometry::{bracket_flow_velocity, sectional_curvature};

    #[test]
    fn phase_rhs_examples() {
        let f = phase2d_rhs(Phase2DPoint::new(1.3, -1.3));
        assert_eq!((f.x, f.y), (0.0, 0.0));
        let f = phase2d_rhs(Phase2DPoint::new(1.0, 1.0));
        assert_eq!((f.x, f.y), (-2.0, -2.0));
    }

    #[test]
    fn phase_rhs_is_the_antidiagonal_bracket_flow() {
        for p in [Phase2DPoint::new(0.7, -1.9), Phase2DPoint::new(2.0, 0.5)] {
            let r = bracket_rhs(&p.to_mat());
            let (q, off) = Phase2DPoint::from_mat(&r);
            let f = phase2d_rhs(p);
            assert!((q.x - f.x).abs() < 1e-12 && (q.y - f.y).abs() < 1e-12 && off < 1e-12);
        }
    }

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 41 * 41 - 41);
        assert!(g.iter().all(|p| p.x + p.y != 0.0));
    }

    #[test]
    fn small_sweep_classes() {
        let grid = [
            Phase2DPoint::new(1.0, 1.0),
            Phase2DPoint::new(1.0, 0.0),
            Phase2DPoint::new(0.0, -1.0),
            Phase2DPoint::new(1.0, -0.5),
            Phase2DPoint::new(-1.0, -0.5),
            Phase2DPoint::new(0.5, -0.5),
        ];
        let atlas = phase2d_sweep(&grid, 200.0).unwrap();
        let classes: Vec<_> = atlas.entries.iter().map(|e| e.class).collect();
        assert_eq!(
            classes,
            vec![
                PhaseClass::OriginDiagonal,
                PhaseClass::OriginXAxis,
                PhaseClass::OriginYAxis,
                PhaseClass::Flat,
                PhaseClass::OriginDiagonal,
                PhaseClass::Fixed,
            ]
        );
        for e in &atlas.entries {
            assert!((e.limit.x + e.limit.y).abs() <= 1e-5);
        }
        let csv = atlas.atlas_csv();
        assert_eq!(csv.lines().count(), grid.len() + 1);
        assert!(atlas.gnuplot_script().contains("traj_0000.csv"));
    }

    #[test]
    fn ejsol_exact_examples() {
        let s = EjsolState::initial(1.0, 1.0).unwrap();
        let at0 = ejsol_exact(&s, 0.0).unwrap();
        assert_eq!((at0.alpha, at0.h), (1.0, 1.0));
        let at1 = ejsol_exact(&s, 1.0).unwrap();
        assert!((at1.alpha - 5f64.sqrt().recip()).abs() < 1e-15);
        assert!((at1.h - 0.5).abs() < 1e-15);
        assert!(EjsolState::initial(0.2, 0.0).is_err());
    }

    #[test]
    fn family_is_flow_invariant() {
        // The general bracket-flow velocity stays in the (alpha, h) family with
        // alpha' = -c alpha^3 and h' = -3/2 h^3.
        for (lambda, alpha, h) in [(0.2, 0.9, 0.7), (1.0, 0.3, 1.0), (3.8, 0.1, 0.4)] {
            let g = ejsol_algebra(lambda, alpha, h).unwrap();
            let v = bracket_flow_velocity(&g);
            let da = -c_lambda(lambda) * alpha.powi(3);
            let dh = -1.5 * h.powi(3);
            let want = ejsol_algebra(lambda, 1.0, 0.0).unwrap();
            let m = 4;
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        let idx = (i * m + j) * m + k;
                        let mut expect = da * want.c(i, j, k);
                        if (i, j, k) == (1, 2, 3) {
                            expect = dh;
                        } else if (i, j, k) == (2, 1, 3) {
                            expect = -dh;
                        }
                        assert!((v[idx] - expect).abs() < 1e-12, "({i},{j},{k})");
                    }
                }
            }
        }
    }

    #[test]
    fn k13_formula_matches_tensor() {
        for (lambda, alpha, h) in [(0.2, 0.9, 0.7), (1.0, 0.3, 1.0)] {
            let g = ejsol_algebra(lambda, alpha, h).unwrap();
            let e1 = [0.0, 1.0, 0.0, 0.0];
            let e3 = [0.0, 0.0, 0.0, 1.0];
            let k = sectional_curvature(&g, &e1, &e3).unwrap();
            assert!((k - ejsol_k13(lambda, alpha, h)).abs() < 1e-14);
        }
    }

    #[test]
    fn crossing_examples() {
        let lambda: f64 = 0.2;
        let alpha0 = 1.0 / (4.0 * lambda).sqrt() * 0.9;
        assert_eq!(ejsol_curvature_crossing(lambda, alpha0).unwrap(), Some(0.0));
        assert!(ejsol_curvature_crossing(1.0, 1.0).is_err());
        let t0 = ejsol_curvature_crossing(0.1, 3.0).unwrap().unwrap();
        let s = ejsol_exact(&EjsolState::initial(0.1, 3.0).unwrap(), t0).unwrap();
        assert!(s.k13().abs() < 1e-12);
    }

    #[test]
    fn rescaling_makes_the_family_negative() {
        let alpha = ejsol_soliton_alpha(0.2);
        assert!(ejsol_rescaled_max_curvature(0.2, alpha, 1.0, 1.0, 500, 1).unwrap() >= 0.0);
        assert!(ejsol_rescaled_max_curvature(0.2, alpha, 1.0, 20.0, 500, 1).unwrap() < 0.0);
    }

    #[test]
    fn watch_identity_and_shear() {
        let r = curvature_watch(&Mat::identity(2), 10.0, 3).unwrap();
        assert_eq!(r.first_negative_time, Some(0.0));
        assert!(r.persistent && r.sampler_agrees);
        let shear = Mat::from_rows(&[[1.0, 5.0], [0.0, 1.0]]).unwrap();
        let r = curvature_watch(&shear, 100.0, 3).unwrap();
        assert!(r.first_negative_time.unwrap() > 0.0 && r.persistent);
        assert!(curvature_watch(&Mat::diag(&[1.0, -1.0]), 10.0, 3).is_err());
    }
}
