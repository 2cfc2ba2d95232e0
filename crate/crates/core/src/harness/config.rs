//! Declarative experiment configuration, read from TOML.
//!
//! A config names a preset system and optionally overrides the initial
//! state, integrator settings, output destinations, and the post-run checks.
//! Unknown keys are rejected everywhere so typos fail loudly instead of
//! silently running defaults.

use serde::{Deserialize, Serialize};

/// A TOML number that may be written as integer or float.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Num {
    /// Integer literal.
    I(i64),
    /// Float literal.
    F(f64),
}

impl Num {
    /// Value as f64.
    pub fn f(&self) -> f64 {
        match self {
            Num::I(i) => *i as f64,
            Num::F(f) => *f,
        }
    }
}

/// Complete experiment description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Which system to run and its structural parameters.
    pub system: SystemConfig,
    /// Initial state; presets provide a default.
    #[serde(default)]
    pub initial: InitialConfig,
    /// Time stepping; presets provide defaults.
    #[serde(default)]
    pub integrator: IntegratorSection,
    /// Where results go.
    #[serde(default)]
    pub output: OutputConfig,
    /// Post-run threshold checks; empty means the preset's own set.
    #[serde(default)]
    pub report: ReportConfig,
}

impl ExperimentConfig {
    /// Parse from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// System selection and structural parameters. Fields apply only to the
/// presets that read them; setting an irrelevant one is harmless.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Preset tag; `metriflow list` prints the catalog.
    pub preset: String,
    /// Spectral band limit N (spectral presets).
    pub max_mode: Option<usize>,
    /// Principal moments (rigid body presets).
    pub inertia: Option<[f64; 3]>,
    /// Fixed algebra direction: the entropy/energy axis of the two
    /// metriplectic examples and the target of the double bracket preset.
    pub axis: Option<[f64; 3]>,
    /// Lattice size n (Toda presets).
    pub size: Option<usize>,
    /// Chop depth k (dissipative full Toda).
    pub chop: Option<usize>,
}

/// Initial state. `kind` selects the constructor; omitted fields fall back
/// to per-preset defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// "default", "cosine", "sine", "modes", "random" (spectral);
    /// "default", "values" (vector); "default", "lattice", "matrix" (matrix).
    pub kind: Option<String>,
    /// Amplitude for cosine/sine/random kinds.
    pub amplitude: Option<f64>,
    /// Mode number for cosine/sine kinds.
    pub mode: Option<usize>,
    /// Explicit modes (n, Re, Im) for kind = "modes".
    pub modes: Option<Vec<(i64, Num, Num)>>,
    /// Component values for vector states.
    pub values: Option<Vec<Num>>,
    /// Lattice diagonal b_k for kind = "lattice".
    pub diagonal: Option<Vec<Num>>,
    /// Lattice offdiagonal a_k for kind = "lattice".
    pub offdiagonal: Option<Vec<Num>>,
    /// Full symmetric matrix rows for kind = "matrix".
    pub matrix: Option<Vec<Vec<Num>>>,
    /// Highest excited mode for kind = "random".
    pub excite: Option<usize>,
    /// Seed for random/seeded initial data.
    pub seed: Option<u64>,
}

/// Integrator settings; every field optional, preset defaults fill the rest.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    /// "rk4", "rk45", or "ifrk4".
    pub method: Option<String>,
    /// Step size (initial step for rk45).
    pub dt: Option<f64>,
    /// Final time.
    pub t_max: Option<f64>,
    /// Relative tolerance (rk45).
    pub rtol: Option<f64>,
    /// Absolute tolerance (rk45).
    pub atol: Option<f64>,
    /// Step budget.
    pub max_steps: Option<usize>,
    /// Record every k-th accepted step.
    pub record_every: Option<usize>,
}

/// Output destinations, relative to the run's output directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// CSV path; default "<preset>.csv", empty string disables.
    pub csv: Option<String>,
    /// JSON path; default "<preset>.json", empty string disables.
    pub json: Option<String>,
    /// "auto" (states kept when the component count is at most 32),
    /// "always", or "never".
    pub include_state: Option<String>,
}

/// Check list wrapper.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Threshold checks evaluated after the run and stored in the JSON.
    #[serde(default)]
    pub check: Vec<CheckSpec>,
}

/// A threshold check on one recorded diagnostic series.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum CheckSpec {
    /// max_t |x(t) - x(0)| <= tol.
    Conserved {
        /// Series name.
        diagnostic: String,
        /// Allowed drift.
        tol: f64,
    },
    /// x never rises by more than `slack` between consecutive records.
    Nonincreasing {
        /// Series name.
        diagnostic: String,
        /// Allowed per-record violation.
        #[serde(default)]
        slack: f64,
    },
    /// x never falls by more than `slack` between consecutive records.
    Nondecreasing {
        /// Series name.
        diagnostic: String,
        /// Allowed per-record violation.
        #[serde(default)]
        slack: f64,
    },
    /// Final value <= value.
    FinalAtMost {
        /// Series name.
        diagnostic: String,
        /// Bound.
        value: f64,
    },
    /// Final value >= value.
    FinalAtLeast {
        /// Series name.
        diagnostic: String,
        /// Bound.
        value: f64,
    },
}

impl CheckSpec {
    /// The diagnostic this check reads.
    pub fn diagnostic(&self) -> &str {
        match self {
            CheckSpec::Conserved { diagnostic, .. }
            | CheckSpec::Nonincreasing { diagnostic, .. }
            | CheckSpec::Nondecreasing { diagnostic, .. }
            | CheckSpec::FinalAtMost { diagnostic, .. }
            | CheckSpec::FinalAtLeast { diagnostic, .. } => diagnostic,
        }
    }

    /// One-line description for summaries.
    pub fn describe(&self) -> String {
        match self {
            CheckSpec::Conserved { diagnostic, tol } => {
                format!("{diagnostic} conserved within {tol:.1e}")
            }
            CheckSpec::Nonincreasing { diagnostic, slack } => {
                format!("{diagnostic} nonincreasing (slack {slack:.1e})")
            }
            CheckSpec::Nondecreasing { diagnostic, slack } => {
                format!("{diagnostic} nondecreasing (slack {slack:.1e})")
            }
            CheckSpec::FinalAtMost { diagnostic, value } => {
                format!("final {diagnostic} <= {value:.3e}")
            }
            CheckSpec::FinalAtLeast { diagnostic, value } => {
                format!("final {diagnostic} >= {value:.3e}")
            }
        }
    }
}
