use std::fmt::Write as _;

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::json;

use solvflow_core::casebook::{
    c_lambda, default_grid, ejsol_algebra, ejsol_curvature_crossing, ejsol_exact, ejsol_integrate,
    ejsol_rescaled_max_curvature, ejsol_soliton_alpha, phase2d_sweep, Atlas, EjsolState, Phase2DPoint,
};
use solvflow_core::flow::{fmt_f64, integrate, Clock, FlowKind, FlowSpec, Terminal};
use solvflow_core::geometry::{
    admits_negative_curvature, curvature_report, heintze_check, mu_of_a, sectional_curvature, type3_monitor,
};
use solvflow_core::mat::tr_sq;
use solvflow_core::soliton::{certify_algebraic_soliton, classify_soliton, monitor_suite};
use solvflow_core::validate::{run_validation, ValidateOptions};
use solvflow_core::{classify_matrix, MetricLieAlgebra};

use crate::config::{Input, RunConfig};
use crate::{Command, EXIT_CHECKS_FAILED, EXIT_STEP_FAILURE};

const DEFAULT_CLASSIFY_TOL: f64 = 1e-8;

pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub stdout: Option<String>,
    /// Lines for stderr.
    pub messages: Vec<String>,
    pub code: u8,
}

/// A validated command, ready to run.
pub enum Prepared {
    Simulate { spec: FlowSpec, t1: f64 },
    Classify { input: Input, tol: f64, planes: usize, seed: u64 },
    Curvature { algebra: MetricLieAlgebra, planes: usize, seed: u64 },
    PhasePlane { grid: Vec<Phase2DPoint>, sigma_end: f64 },
    Ejsol { start: EjsolState, t_end: f64, stride: f64, planes: usize, seed: u64 },
    Validate { seed: u64 },
}

pub fn prepare(command: Command, cfg: &RunConfig) -> anyhow::Result<Prepared> {
    let tol = cfg.classify_tol.unwrap_or(DEFAULT_CLASSIFY_TOL);
    if !(tol > 0.0 && tol < 1.0) {
        bail!("tolerance must lie in (0, 1), got {tol}");
    }
    Ok(match command {
        Command::Simulate => {
            let Input::Matrix(a0) = cfg.load_input()? else {
                bail!("simulate needs a matrix input");
            };
            Prepared::Simulate {
                spec: cfg.flow_spec(a0)?,
                t1: cfg.type3_t1,
            }
        }
        Command::Classify => Prepared::Classify {
            input: cfg.load_input()?,
            tol,
            planes: cfg.planes,
            seed: cfg.seed,
        },
        Command::Curvature => {
            let algebra = match cfg.load_input()? {
                Input::Matrix(a) => mu_of_a(&a),
                Input::Algebra(g) => g,
            };
            Prepared::Curvature {
                algebra,
                planes: cfg.planes,
                seed: cfg.seed,
            }
        }
        Command::PhasePlane => {
            let pp = &cfg.phase_plane;
            if !(pp.sigma_end > 0.0 && pp.sigma_end.is_finite()) {
                bail!("phase_plane.sigma_end must be positive, got {}", pp.sigma_end);
            }
            let grid = match &pp.grid {
                Some(points) => points.iter().map(|&(x, y)| Phase2DPoint::new(x, y)).collect(),
                None => default_grid(),
            };
            if grid.is_empty() {
                bail!("phase_plane.grid is empty");
            }
            Prepared::PhasePlane {
                grid,
                sigma_end: pp.sigma_end,
            }
        }
        Command::Ejsol => {
            let Some(e) = &cfg.ejsol else {
                bail!("ejsol needs an `ejsol` section with at least `lambda`");
            };
            let alpha0 = e.alpha0.unwrap_or_else(|| ejsol_soliton_alpha(e.lambda));
            let start = EjsolState::initial(e.lambda, alpha0)?;
            let t_end = e.t_end.unwrap_or(100.0);
            let stride = e.stride.unwrap_or(t_end / 100.0);
            if !(t_end > 0.0 && stride > 0.0) {
                bail!("ejsol t_end and stride must be positive");
            }
            Prepared::Ejsol {
                start,
                t_end,
                stride,
                planes: cfg.planes,
                seed: cfg.seed,
            }
        }
        Command::Validate => Prepared::Validate { seed: cfg.seed },
    })
}

fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

impl Prepared {
    pub fn planned_files(&self) -> Vec<String> {
        let names: &[&str] = match self {
            Prepared::Simulate { .. } => &["trajectory.csv", "diagnostics.jsonl", "monitors.json"],
            Prepared::Classify { .. } => &["classification.json"],
            Prepared::Curvature { .. } => &["curvature.json"],
            Prepared::Ejsol { .. } => &["ejsol.csv", "ejsol.json"],
            Prepared::Validate { .. } => &["validate.json"],
            Prepared::PhasePlane { grid, .. } => {
                let mut v = vec!["atlas.csv".to_string(), "phase.gp".to_string()];
                v.extend((0..grid.len()).map(Atlas::trajectory_file_name));
                return v;
            }
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn run(self) -> anyhow::Result<Outcome> {
        match self {
            Prepared::Simulate { spec, t1 } => simulate(spec, t1),
            Prepared::Classify { input, tol, planes, seed } => classify(input, tol, planes, seed),
            Prepared::Curvature { algebra, planes, seed } => {
                let report = curvature_report(&algebra, planes, seed);
                let bytes = json_bytes(&report)?;
                Ok(Outcome {
                    stdout: Some(String::from_utf8(bytes.clone())?.trim_end().to_string()),
                    files: vec![("curvature.json".into(), bytes)],
                    messages: vec![],
                    code: 0,
                })
            }
            Prepared::PhasePlane { grid, sigma_end } => phase_plane(&grid, sigma_end),
            Prepared::Ejsol {
                start,
                t_end,
                stride,
                planes,
                seed,
            } => ejsol(start, t_end, stride, planes, seed),
            Prepared::Validate { seed } => validate(seed),
        }
    }
}

fn simulate(spec: FlowSpec, t1: f64) -> anyhow::Result<Outcome> {
    let traj = integrate(&spec)?;
    let violations = monitor_suite(&traj);
    let type3 = if spec.kind == FlowKind::Bracket
        && spec.clock == Clock::Physical
        && tr_sq(&spec.a0) >= -1e-12 * spec.a0.norm_sq()
    {
        Some(type3_monitor(&traj, t1)?)
    } else {
        None
    };
    let mut jsonl = String::new();
    for s in &traj.samples {
        let row = json!({ "t": s.t, "physical_t": s.physical_t, "diagnostics": s.diag });
        writeln!(jsonl, "{}", serde_json::to_string(&row)?)?;
    }
    let monitors = json!({
        "terminal": traj.terminal,
        "samples": traj.samples.len(),
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "violations": violations,
        "type3": type3.map(|r| json!({
            "t1": r.t1,
            "sup_t_riem": r.sup_t_riem,
            "argsup": r.argsup,
            "tail_variation": r.tail_variation,
            "log_decade_variation": r.log_decade_variation,
        })),
    });
    let mut messages = Vec::new();
    let code = if traj.terminal == Terminal::StepFailure {
        messages.push(format!("step size underflow at t = {}", traj.last().t));
        EXIT_STEP_FAILURE
    } else if !violations.is_empty() {
        for v in &violations {
            messages.push(format!("monitor violation: {:?} at t = {} (magnitude {:e})", v.rule, v.t, v.magnitude));
        }
        EXIT_CHECKS_FAILED
    } else {
        0
    };
    Ok(Outcome {
        files: vec![
            ("trajectory.csv".into(), traj.to_csv().into_bytes()),
            ("diagnostics.jsonl".into(), jsonl.into_bytes()),
            ("monitors.json".into(), json_bytes(&monitors)?),
        ],
        stdout: None,
        messages,
        code,
    })
}

fn classify(input: Input, tol: f64, planes: usize, seed: u64) -> anyhow::Result<Outcome> {
    let value = match input {
        Input::Matrix(a) => {
            let verdict = if a.is_zero() { None } else { Some(classify_soliton(&a, tol)?) };
            let g = mu_of_a(&a);
            json!({
                "matrix_class": classify_matrix(&a, tol),
                "soliton": verdict,
                "certified": certify_algebraic_soliton(&g, tol),
                "admits_negative_curvature": admits_negative_curvature(&a),
                "heintze": heintze_check(&a),
                "curvature": curvature_report(&g, planes, seed),
            })
        }
        Input::Algebra(g) => json!({
            "certified": certify_algebraic_soliton(&g, tol),
            "curvature": curvature_report(&g, planes, seed),
        }),
    };
    let bytes = json_bytes(&value)?;
    Ok(Outcome {
        stdout: Some(String::from_utf8(bytes.clone())?.trim_end().to_string()),
        files: vec![("classification.json".into(), bytes)],
        messages: vec![],
        code: 0,
    })
}

fn phase_plane(grid: &[Phase2DPoint], sigma_end: f64) -> anyhow::Result<Outcome> {
    let atlas = phase2d_sweep(grid, sigma_end)?;
    let mut files = vec![
        ("atlas.csv".to_string(), atlas.atlas_csv().into_bytes()),
        ("phase.gp".to_string(), atlas.gnuplot_script().into_bytes()),
    ];
    for e in &atlas.entries {
        let csv = atlas.trajectory_csv(e.index).context("entry index")?;
        files.push((Atlas::trajectory_file_name(e.index), csv.into_bytes()));
    }
    let unresolved = atlas
        .entries
        .iter()
        .filter(|e| e.class == solvflow_core::casebook::PhaseClass::Unresolved)
        .count();
    let messages = if unresolved > 0 {
        vec![format!("{unresolved} trajectories did not reach a limit")]
    } else {
        vec![]
    };
    Ok(Outcome {
        files,
        stdout: None,
        messages,
        code: 0,
    })
}

fn ejsol(start: EjsolState, t_end: f64, stride: f64, planes: usize, seed: u64) -> anyhow::Result<Outcome> {
    let lambda = start.lambda;
    let e1 = [0.0, 1.0, 0.0, 0.0];
    let e3 = [0.0, 0.0, 0.0, 1.0];
    let mut csv = String::from("t,alpha,h,alpha_exact,h_exact,k13_exact,k13_tensor\n");
    for s in ejsol_integrate(&start, t_end, stride) {
        let exact = ejsol_exact(&start, s.t)?;
        let k_tensor = sectional_curvature(&ejsol_algebra(lambda, s.alpha, s.h)?, &e1, &e3)?;
        let row = [s.t, s.alpha, s.h, exact.alpha, exact.h, exact.k13(), k_tensor];
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(csv, "{}", cells.join(","))?;
    }
    let crossing = match ejsol_curvature_crossing(lambda, start.alpha0) {
        Ok(t0) => json!({ "t0": t0 }),
        Err(err) => json!({ "error": err.to_string() }),
    };
    let certified = certify_algebraic_soliton(&start.algebra()?, DEFAULT_CLASSIFY_TOL);
    let rescaled = ejsol_rescaled_max_curvature(lambda, start.alpha0, 1.0, 20.0, planes, seed)?;
    let summary = json!({
        "lambda": lambda,
        "alpha0": start.alpha0,
        "c_lambda": c_lambda(lambda),
        "soliton_alpha": ejsol_soliton_alpha(lambda),
        "initial_certification": certified,
        "crossing": crossing,
        "rescaled_by_20_max_sampled_curvature": rescaled,
        "seed": seed,
    });
    Ok(Outcome {
        files: vec![
            ("ejsol.csv".into(), csv.into_bytes()),
            ("ejsol.json".into(), json_bytes(&summary)?),
        ],
        stdout: None,
        messages: vec![],
        code: 0,
    })
}

fn validate(seed: u64) -> anyhow::Result<Outcome> {
    let report = run_validation(&ValidateOptions::new(seed));
    let messages = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("failed: {} (worst {:e}, tolerance {:e})", c.name, c.worst, c.tolerance))
        .collect();
    Ok(Outcome {
        files: vec![("validate.json".into(), json_bytes(&report)?)],
        stdout: None,
        messages,
        code: if report.all_passed { 0 } else { EXIT_CHECKS_FAILED },
    })
}
