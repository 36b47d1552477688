use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use sephier_core::derivation::Witness;
use sephier_core::evolution::Product;
use sephier_core::opdsl::HierarchyDoc;

use crate::config::{Expect, GridConfig, RunConfig, StateConfig};
use crate::{EXIT_CHECK_FAILED, EXIT_PASS};

/// Whether a check's value must stay below or exceed its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Below,
    Above,
}

impl Bound {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Bound::Below => value < threshold,
            Bound::Above => value > threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeMeasure {
    /// Gap against `⊗_N`.
    Deformed,
    /// Gap against `⊗̂`.
    Undeformed,
    /// `max ‖N⁻¹Nχ − χ‖ / ‖χ‖` over the test pair.
    RoundTrip,
}

/// Everything needed to recompute a check's value given the report's
/// hierarchy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum CheckWitness {
    Jet { witness: Box<Witness> },
    Evolution { grid: GridConfig, states: StateConfig, product: Product },
    Gauge { grid: GridConfig, states: StateConfig, gamma: f64, lambda: f64, measure: GaugeMeasure },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    /// Max normalized residual, certificate deviation or relative gap.
    pub value: f64,
    pub bound: Bound,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exceed_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_hat: Option<Complex64>,
    pub verdict: String,
    pub witness: CheckWitness,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub check: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub toolkit: String,
    pub version: String,
    /// Seconds since the Unix epoch at the end of the run.
    pub timestamp: u64,
    pub config: RunConfig,
    pub hierarchy: HierarchyDoc,
    pub checks: Vec<CheckReport>,
    pub skipped: Vec<Skipped>,
    pub pass: bool,
    pub exit_code: i32,
}

impl Report {
    pub fn all_pass(checks: &[CheckReport]) -> bool {
        checks.iter().all(|c| c.pass)
    }

    pub fn exit_code_for(expect: Expect, all_pass: bool) -> i32 {
        let met = match expect {
            Expect::Pass => all_pass,
            Expect::Fail => !all_pass,
        };
        if met {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, crate::RunError> {
        serde_json::from_str(text).map_err(|e| crate::RunError::Report(e.to_string()))
    }

    /// The report with timestamp and wall times zeroed, for comparing runs.
    pub fn without_timing(&self) -> Report {
        let mut r = self.clone();
        r.timestamp = 0;
        for c in &mut r.checks {
            c.wall_time_s = 0.0;
        }
        r
    }
}

/// One row of the evolution trace CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub check: String,
    pub product: String,
    pub step: usize,
    pub t: f64,
    pub gap: f64,
    #[serde(default)]
    pub norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub name: String,
    pub reported: f64,
    pub replayed: f64,
    pub agree: bool,
}
