use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;
use serde_json::Value;

use solvflow_core::flow::{Clock, FlowKind, FlowSpec};
use solvflow_core::{Mat, MetricLieAlgebra};

fn default_t_end() -> f64 {
    10.0
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
fn default_planes() -> usize {
    1000
}
fn default_t1() -> f64 {
    0.1
}
fn default_sigma_end() -> f64 {
    200.0
}
fn default_kind() -> FlowKind {
    FlowKind::Bracket
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    #[serde(default = "default_kind")]
    pub kind: FlowKind,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default = "default_init_step")]
    pub init_step: f64,
    #[serde(default)]
    pub sample_stride: Option<f64>,
    #[serde(default)]
    pub stop_when_stationary: Option<f64>,
    #[serde(default)]
    pub clock: Clock,
}

impl Default for FlowSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePlaneSection {
    /// Run length in the homogeneous clock.
    #[serde(default = "default_sigma_end")]
    pub sigma_end: f64,
    /// Explicit `[x, y]` starts; the 41 x 41 grid when absent.
    #[serde(default)]
    pub grid: Option<Vec<(f64, f64)>>,
}

impl Default for PhasePlaneSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EjsolSection {
    pub lambda: f64,
    /// Soliton value when absent.
    #[serde(default)]
    pub alpha0: Option<f64>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub stride: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Matrix (array of rows) or structure constants (`dim`, `constants`).
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_planes")]
    pub planes: usize,
    #[serde(default)]
    pub classify_tol: Option<f64>,
    #[serde(default = "default_t1")]
    pub type3_t1: f64,
    #[serde(default)]
    pub phase_plane: PhasePlaneSection,
    #[serde(default)]
    pub ejsol: Option<EjsolSection>,
}

pub enum Input {
    Matrix(Mat),
    Algebra(MetricLieAlgebra),
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative paths are taken from the config's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(input) = &cfg.input {
            if input.is_relative() {
                cfg.input = Some(base.join(input));
            }
        }
        Ok(cfg)
    }

    pub fn load_input(&self) -> anyhow::Result<Input> {
        let Some(path) = &self.input else {
            bail!("config needs an `input` file for this command");
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading input {}", path.display()))?;
        let value: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing input {}", path.display()))?;
        if value.is_array() {
            let m: Mat = serde_json::from_value(value).with_context(|| format!("matrix in {}", path.display()))?;
            Ok(Input::Matrix(m))
        } else {
            let g: MetricLieAlgebra = serde_json::from_value(value)
                .with_context(|| format!("structure constants in {}", path.display()))?;
            Ok(Input::Algebra(g))
        }
    }

    pub fn flow_spec(&self, a0: Mat) -> anyhow::Result<FlowSpec> {
        let f = &self.flow;
        let spec = FlowSpec {
            kind: f.kind,
            a0,
            t_end: f.t_end,
            rel_tol: f.rel_tol,
            abs_tol: f.abs_tol,
            max_step: f.max_step,
            init_step: f.init_step,
            sample_stride: f.sample_stride,
            stop_when_stationary: f.stop_when_stationary,
            clock: f.clock,
        };
        spec.validate()?;
        Ok(spec)
    }
}
