use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use sephier_core::derivation::ConglomerateSign;
use sephier_core::evolution::{Grid, Integrator};
use sephier_core::opdsl::Preset;

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    PlainDerivation,
    SymDerivation,
    FlowInvariance,
    FlowField,
    CertifyLinearity,
    Conglomerate,
    EvolveGap,
    GaugeDemo,
    All,
}

impl Check {
    /// Order in which `all` runs the suites.
    pub const SUITES: [Check; 8] = [
        Check::PlainDerivation,
        Check::SymDerivation,
        Check::FlowInvariance,
        Check::FlowField,
        Check::CertifyLinearity,
        Check::Conglomerate,
        Check::EvolveGap,
        Check::GaugeDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::PlainDerivation => "plain-derivation",
            Check::SymDerivation => "sym-derivation",
            Check::FlowInvariance => "flow-invariance",
            Check::FlowField => "flow-field",
            Check::CertifyLinearity => "certify-linearity",
            Check::Conglomerate => "conglomerate",
            Check::EvolveGap => "evolve-gap",
            Check::GaugeDemo => "gauge-demo",
            Check::All => "all",
        }
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            Check::FlowInvariance => 1e-12,
            Check::EvolveGap => 1e-6,
            Check::GaugeDemo => 1e-5,
            _ => 1e-8,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

/// A hierarchy file (relative paths resolve against the config's
/// directory) or a builtin preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HierarchySource {
    File { file: PathBuf },
    Preset(Preset),
}

impl Default for HierarchySource {
    fn default() -> Self {
        HierarchySource::Preset(Preset::LinearSchrodinger { omega2: 0.5 })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L", default = "default_length")]
    pub length: f64,
    #[serde(default = "default_points")]
    pub n: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    /// Trace checkpoints per run (CSV rows per product).
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            length: default_length(),
            n: default_points(),
            dt: default_dt(),
            steps: default_steps(),
            integrator: default_integrator(),
            checkpoints: default_checkpoints(),
        }
    }
}

fn default_length() -> f64 {
    Grid::DEFAULT_LENGTH
}
fn default_points() -> usize {
    64
}
fn default_dt() -> f64 {
    1e-4
}
fn default_steps() -> usize {
    100
}
fn default_integrator() -> Integrator {
    Integrator::Rk4
}
fn default_checkpoints() -> usize {
    10
}

/// Test pair `φ = 1 + a e^{ix}`, `ψ = 1 + a e^{-ix}`, normalized, repeated
/// in every internal component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    #[serde(default = "default_modulation")]
    pub modulation: f64,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self { modulation: default_modulation() }
    }
}

fn default_modulation() -> f64 {
    0.3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// The undeformed gap must exceed this.
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    /// Test-pair modulation for the gauge demo.
    #[serde(default = "default_gauge_modulation")]
    pub modulation: f64,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            lambda: default_lambda(),
            contrast: default_contrast(),
            modulation: default_gauge_modulation(),
        }
    }
}

fn default_gamma() -> f64 {
    0.3
}
fn default_lambda() -> f64 {
    1.0
}
fn default_contrast() -> f64 {
    1e-3
}
fn default_gauge_modulation() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_check")]
    pub check: Check,
    #[serde(default)]
    pub hierarchy: HierarchySource,
    #[serde(default)]
    pub spec: SpecOverride,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides every check's default tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Conglomerate size `N`.
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default)]
    pub conglomerate_sign: ConglomerateSign,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub states: StateConfig,
    #[serde(default)]
    pub gauge: GaugeConfig,
    #[serde(default)]
    pub expect: Expect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn default_check() -> Check {
    Check::All
}
fn default_samples() -> usize {
    100
}
fn default_particles() -> usize {
    2
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config and resolves a relative hierarchy path against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        if let HierarchySource::File { file } = &mut config.hierarchy {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(RunError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if self.samples == 0 {
            return Err(RunError::Config("samples must be positive".into()));
        }
        if self.particles == 0 {
            return Err(RunError::Config("particles must be positive".into()));
        }
        if let Some(t) = self.tolerance {
            positive("tolerance", t)?;
        }
        positive("grid.L", self.grid.length)?;
        positive("grid.dt", self.grid.dt)?;
        positive("gauge.contrast", self.gauge.contrast)?;
        if self.grid.n < Grid::MIN_POINTS {
            return Err(RunError::Config(format!("grid.n must be at least {}", Grid::MIN_POINTS)));
        }
        if self.grid.steps == 0 || self.grid.checkpoints == 0 {
            return Err(RunError::Config("grid.steps and grid.checkpoints must be positive".into()));
        }
        if !(self.states.modulation.is_finite() && self.gauge.modulation.is_finite()) {
            return Err(RunError::Config("modulations must be finite".into()));
        }
        Ok(())
    }

    pub fn tolerance_for(&self, check: Check) -> f64 {
        self.tolerance.unwrap_or_else(|| check.default_tolerance())
    }
}
