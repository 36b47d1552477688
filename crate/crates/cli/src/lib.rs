//! Configuration-driven runner for the sephier check suites: builds a
//! hierarchy from a file or preset, runs the requested checks and produces
//! a JSON report, an optional CSV evolution trace and an exit status.

pub mod config;
pub mod report;
mod run;

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use sephier_core::derivation::DerivationError;
use sephier_core::evolution::EvolutionError;
use sephier_core::gauge::GaugeError;
use sephier_core::opdsl::HierarchyError;

pub use config::{Check, Expect, GaugeConfig, GridConfig, HierarchySource, RunConfig, SpecOverride, StateConfig};
pub use report::{Bound, CheckReport, CheckWitness, GaugeMeasure, ReplayOutcome, Report, Skipped, TraceRow};
pub use run::{build_hierarchy, replay, run, write_trace, Run};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// Agreement required between a replayed witness and its report entry.
pub const REPLAY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid hierarchy: {0}")]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Derivation(#[from] DerivationError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid report: {0}")]
    Report(String),
}

impl RunError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io { path: path.to_path_buf(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Io { .. } => "io",
            RunError::Config(_) => "config",
            RunError::Hierarchy(_) => "hierarchy",
            RunError::Derivation(_) => "derivation",
            RunError::Evolution(_) => "evolution",
            RunError::Gauge(_) => "gauge",
            RunError::Csv(_) => "csv",
            RunError::Report(_) => "report",
        }
    }

    /// Structured form written to stderr; domain errors carry the offending
    /// sample or grid point.
    pub fn to_json(&self) -> Value {
        let mut out = json!({ "error": self.kind(), "message": self.to_string() });
        let detail = match self {
            RunError::Io { path, .. } => Some(json!({ "path": path })),
            RunError::Derivation(DerivationError::Eval { sample, witness, .. }) => {
                Some(json!({ "sample": sample, "witness": witness }))
            }
            RunError::Evolution(e) | RunError::Gauge(GaugeError::Evolution(e)) => evolution_detail(e),
            RunError::Gauge(GaugeError::Amplitude { point, amplitude })
            | RunError::Gauge(GaugeError::IntermediateZero { point, amplitude }) => {
                Some(json!({ "point": point, "amplitude": amplitude }))
            }
            RunError::Gauge(GaugeError::PhaseUnwrap { point, jump }) => Some(json!({ "point": point, "jump": jump })),
            _ => None,
        };
        if let Some(detail) = detail {
            out["detail"] = detail;
        }
        out
    }
}

fn evolution_detail(e: &EvolutionError) -> Option<Value> {
    match e {
        EvolutionError::AmplitudeFloor { step, point, amplitude } => {
            Some(json!({ "step": step, "point": point, "amplitude": amplitude }))
        }
        EvolutionError::Domain { step, point, .. } => Some(json!({ "step": step, "point": point })),
        EvolutionError::Solver { step, residual } => Some(json!({ "step": step, "residual": residual })),
        _ => None,
    }
}
