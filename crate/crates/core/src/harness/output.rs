//! Run artifacts: the JSON trajectory document, the CSV table, and
//! evaluation of threshold checks against recorded diagnostics.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::CheckSpec;
use super::HarnessError;

/// Metadata block of a trajectory document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    /// Preset tag the run was built from.
    pub preset: String,
    /// Integrator method name.
    pub method: String,
    /// Step size used (initial step for rk45).
    pub dt: f64,
    /// Requested final time.
    pub t_max: f64,
    /// Time actually reached.
    pub final_time: f64,
    /// Accepted steps.
    pub steps: usize,
    /// Rejected attempts (rk45).
    pub rejected_steps: usize,
    /// Seed used for random initial data, when any.
    pub seed: Option<u64>,
    /// Crate version that produced the file.
    pub tool_version: String,
    /// "all" when every recorded frame is stored, "final" otherwise.
    pub state_frames: String,
}

/// State frames in a layout-tagged, exactly reconstructible form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum StateDump {
    /// Plain vectors.
    Vector {
        /// Component count.
        dim: usize,
        /// One row per stored frame.
        frames: Vec<Vec<f64>>,
    },
    /// Row-major matrices.
    Matrix {
        /// Row count.
        rows: usize,
        /// Column count.
        cols: usize,
        /// One row-major dump per stored frame.
        frames: Vec<Vec<f64>>,
    },
    /// Band-limited fields as (mode, Re, Im) triples for modes 0..=N.
    Spectral {
        /// Band limit N.
        max_mode: usize,
        /// One triple list per stored frame.
        frames: Vec<Vec<(i64, f64, f64)>>,
    },
}

impl StateDump {
    /// Number of stored frames.
    pub fn frame_count(&self) -> usize {
        match self {
            StateDump::Vector { frames, .. } => frames.len(),
            StateDump::Matrix { frames, .. } => frames.len(),
            StateDump::Spectral { frames, .. } => frames.len(),
        }
    }
}

/// One named diagnostic series sampled at the recorded times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    /// Observer name.
    pub name: String,
    /// One value per recorded time.
    pub values: Vec<f64>,
}

/// Everything a run produced, in one self-describing JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryDoc {
    /// Run metadata.
    pub meta: RunMeta,
    /// Recorded times.
    pub times: Vec<f64>,
    /// Stored state frames.
    pub state: StateDump,
    /// Recorded diagnostics, one series per observer.
    pub diagnostics: Vec<DiagnosticSeries>,
    /// Checks attached to the run, re-evaluable via `metriflow report`.
    pub checks: Vec<CheckSpec>,
}

impl TrajectoryDoc {
    /// Write as pretty JSON.
    pub fn write_json(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| HarnessError::Config(format!("serializing trajectory: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Load a document previously written by `write_json`.
    pub fn load_json(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("parsing {}: {e}", path.display())))
    }

    /// Evaluate the document's own checks against its diagnostics.
    pub fn evaluate(&self) -> Vec<CheckResult> {
        let series: Vec<(String, Vec<f64>)> = self
            .diagnostics
            .iter()
            .map(|d| (d.name.clone(), d.values.clone()))
            .collect();
        evaluate_checks(&self.checks, &series)
    }
}

/// Outcome of one threshold check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    /// Human-readable statement of the check.
    pub description: String,
    /// Whether it held.
    pub passed: bool,
    /// Measured quantity backing the verdict.
    pub detail: String,
}

/// Evaluate checks against named diagnostic series. A missing series or an
/// empty one fails the check; NaN values fail comparisons by construction.
pub fn evaluate_checks(
    checks: &[CheckSpec],
    diagnostics: &[(String, Vec<f64>)],
) -> Vec<CheckResult> {
    checks
        .iter()
        .map(|check| {
            let description = check.describe();
            let Some((_, values)) = diagnostics.iter().find(|(n, _)| n == check.diagnostic())
            else {
                return CheckResult {
                    description,
                    passed: false,
                    detail: format!("diagnostic '{}' not recorded", check.diagnostic()),
                };
            };
            if values.is_empty() {
                return CheckResult {
                    description,
                    passed: false,
                    detail: "diagnostic series is empty".to_string(),
                };
            }
            let (passed, detail) = match check {
                CheckSpec::Conserved { tol, .. } => {
                    let first = values[0];
                    let drift = values
                        .iter()
                        .map(|v| (v - first).abs())
                        .fold(0.0_f64, f64::max);
                    (drift <= *tol, format!("max drift {drift:.3e}"))
                }
                CheckSpec::Nonincreasing { slack, .. } => {
                    let rise = values
                        .windows(2)
                        .map(|w| w[1] - w[0])
                        .fold(0.0_f64, f64::max);
                    (
                        rise <= *slack && values.iter().all(|v| v.is_finite()),
                        format!("max rise {rise:.3e}"),
                    )
                }
                CheckSpec::Nondecreasing { slack, .. } => {
                    let fall = values
                        .windows(2)
                        .map(|w| w[0] - w[1])
                        .fold(0.0_f64, f64::max);
                    (
                        fall <= *slack && values.iter().all(|v| v.is_finite()),
                        format!("max fall {fall:.3e}"),
                    )
                }
                CheckSpec::FinalAtMost { value, .. } => {
                    let last = *values.last().expect("nonempty");
                    (last <= *value, format!("final value {last:.6e}"))
                }
                CheckSpec::FinalAtLeast { value, .. } => {
                    let last = *values.last().expect("nonempty");
                    (last >= *value, format!("final value {last:.6e}"))
                }
            };
            CheckResult {
                description,
                passed,
                detail,
            }
        })
        .collect()
}

/// Write the CSV table: a `t` column, optional flattened state columns, and
/// one column per diagnostic. All floats use `{:.16e}` so reruns of the same
/// config are byte-identical.
pub fn write_csv(
    path: &Path,
    times: &[f64],
    state_headers: &[String],
    state_rows: Option<&[Vec<f64>]>,
    diagnostics: &[(String, Vec<f64>)],
) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = Vec::new();
    write!(out, "t")?;
    if state_rows.is_some() {
        for h in state_headers {
            write!(out, ",{h}")?;
        }
    }
    for (name, _) in diagnostics {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for (row, t) in times.iter().enumerate() {
        write!(out, "{t:.16e}")?;
        if let Some(states) = state_rows {
            for v in &states[row] {
                write!(out, ",{v:.16e}")?;
            }
        }
        for (_, series) in diagnostics {
            write!(out, ",{:.16e}", series[row])?;
        }
        writeln!(out)?;
    }
    fs::write(path, out)?;
    Ok(())
}
