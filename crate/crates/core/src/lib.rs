//! Numerical tools for the bracket flow of solvable Lie groups with a
//! codimension-one abelian ideal: matrix flows, curvature of left-invariant
//! metrics, soliton certification and the two worked examples.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod casebook;
pub mod eigen;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod mat;
pub mod ode;
pub mod soliton;
pub mod validate;

pub use eigen::{eigenvalues, SpectrumMultiset};
pub use error::{Error, Result};
pub use flow::{Clock, DiagnosticRow, FlowKind, FlowSpec, Sample, Terminal, Trajectory};
pub use geometry::{CurvatureReport, HeintzeReport, MetricLieAlgebra};
pub use mat::{classify_matrix, commutator, frob_inner, frob_norm, sym_part, Mat, MatrixClass};
pub use soliton::{OmegaLimitReport, SolitonLabel, SolitonVerdict, Violation};
