//! Experiment harness: build a preset system from a declarative config,
//! integrate it, evaluate threshold checks, and write CSV/JSON artifacts.

pub mod config;
pub mod output;
mod presets;

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::circle_field::PeriodicField;
use crate::integrators::{
    integrate, integrating_factor_rk4, FieldError, IntegratorConfig, Method, SolverError,
    Trajectory,
};

pub use config::{
    CheckSpec, ExperimentConfig, InitialConfig, IntegratorSection, Num, OutputConfig, ReportConfig,
    SystemConfig,
};
pub use output::{
    evaluate_checks, write_csv, CheckResult, DiagnosticSeries, RunMeta, StateDump, TrajectoryDoc,
};

use presets::{BuiltSystem, Defaults};

/// Why a run could not be completed.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// The preset tag is not in the catalog.
    #[error("unknown preset '{name}'")]
    UnknownPreset {
        /// Offending tag.
        name: String,
    },
    /// The config is malformed or inconsistent.
    #[error("invalid config: {0}")]
    Config(String),
    /// The initial data is malformed.
    #[error("invalid initial data: {0}")]
    Initial(String),
    /// Time stepping failed.
    #[error("integration failed: {0}")]
    Solver(#[from] SolverError),
    /// Filesystem failure while writing artifacts.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code convention: 2 for bad input, 3 for runtime failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::UnknownPreset { .. }
            | HarnessError::Config(_)
            | HarnessError::Initial(_) => 2,
            HarnessError::Solver(_) | HarnessError::Io(_) => 3,
        }
    }
}

/// What `run_experiment` hands back for display.
#[derive(Debug)]
pub struct RunSummary {
    /// Preset tag that ran.
    pub preset: String,
    /// Method actually used.
    pub method: String,
    /// Time reached.
    pub final_time: f64,
    /// Accepted steps.
    pub steps: usize,
    /// Rejected attempts.
    pub rejected_steps: usize,
    /// Recorded rows.
    pub records: usize,
    /// Check outcomes in config order.
    pub checks: Vec<CheckResult>,
    /// CSV artifact, when written.
    pub csv: Option<PathBuf>,
    /// JSON artifact, when written.
    pub json: Option<PathBuf>,
}

impl RunSummary {
    /// True when every check held.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// The catalog of preset tags with one-line summaries, for `list` displays.
pub fn preset_catalog() -> &'static [(&'static str, &'static str)] {
    presets::CATALOG
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Rk4 => "rk4",
        Method::Rk45 => "rk45",
        Method::IfRk4 => "ifrk4",
    }
}

fn resolve_integrator(
    section: &IntegratorSection,
    defaults: &Defaults,
) -> Result<IntegratorConfig, HarnessError> {
    let base = IntegratorConfig::default();
    let method = match &section.method {
        Some(s) => s.parse::<Method>().map_err(HarnessError::Config)?,
        None => defaults.method,
    };
    let cfg = IntegratorConfig {
        method,
        dt: section.dt.unwrap_or(defaults.dt),
        t_max: section.t_max.unwrap_or(defaults.t_max),
        rtol: section.rtol.unwrap_or(base.rtol),
        atol: section.atol.unwrap_or(base.atol),
        max_steps: section.max_steps.unwrap_or(base.max_steps),
        record_every: section.record_every.unwrap_or(defaults.record_every),
        store_states: true,
    };
    if cfg.dt <= 0.0 || cfg.dt.is_nan() {
        return Err(HarnessError::Config("'dt' must be positive".to_string()));
    }
    if cfg.t_max <= 0.0 || cfg.t_max.is_nan() {
        return Err(HarnessError::Config("'t_max' must be positive".to_string()));
    }
    if cfg.record_every == 0 {
        return Err(HarnessError::Config(
            "'record_every' must be at least 1".to_string(),
        ));
    }
    Ok(cfg)
}

/// Everything an integration produced, reduced to a layout-free form.
struct RunPieces {
    times: Vec<f64>,
    diagnostics: Vec<(String, Vec<f64>)>,
    headers: Vec<String>,
    rows: Option<Vec<Vec<f64>>>,
    dump: StateDump,
    final_time: f64,
    steps: usize,
    rejected_steps: usize,
}

fn pieces_vector(traj: Trajectory<DVector<f64>>, include: bool) -> RunPieces {
    let dim = traj.final_state.len();
    let flatten = |v: &DVector<f64>| v.iter().copied().collect::<Vec<f64>>();
    let frames: Vec<Vec<f64>> = if include {
        traj.states.iter().map(flatten).collect()
    } else {
        vec![flatten(&traj.final_state)]
    };
    RunPieces {
        times: traj.times,
        diagnostics: traj.diagnostics,
        headers: (0..dim).map(|i| format!("s{i}")).collect(),
        rows: include.then(|| frames.clone()),
        dump: StateDump::Vector { dim, frames },
        final_time: traj.final_time,
        steps: traj.steps,
        rejected_steps: traj.rejected_steps,
    }
}

fn pieces_matrix(traj: Trajectory<DMatrix<f64>>, include: bool) -> RunPieces {
    let (rows_n, cols_n) = (traj.final_state.nrows(), traj.final_state.ncols());
    let flatten = |m: &DMatrix<f64>| {
        (0..rows_n)
            .flat_map(|i| (0..cols_n).map(move |j| m[(i, j)]))
            .collect::<Vec<f64>>()
    };
    let frames: Vec<Vec<f64>> = if include {
        traj.states.iter().map(flatten).collect()
    } else {
        vec![flatten(&traj.final_state)]
    };
    let headers = (0..rows_n)
        .flat_map(|i| (0..cols_n).map(move |j| format!("m{i}_{j}")))
        .collect();
    RunPieces {
        times: traj.times,
        diagnostics: traj.diagnostics,
        headers,
        rows: include.then(|| frames.clone()),
        dump: StateDump::Matrix {
            rows: rows_n,
            cols: cols_n,
            frames,
        },
        final_time: traj.final_time,
        steps: traj.steps,
        rejected_steps: traj.rejected_steps,
    }
}

fn pieces_spectral(traj: Trajectory<PeriodicField>, include: bool) -> RunPieces {
    let max_mode = traj.final_state.max_mode();
    let flatten = |u: &PeriodicField| {
        (0..=max_mode as i64)
            .flat_map(|n| {
                let c = u.coeff(n);
                [c.re, c.im]
            })
            .collect::<Vec<f64>>()
    };
    // Nonnegative modes determine the field; negatives are their conjugates.
    let triples = |u: &PeriodicField| {
        u.to_mode_triples()
            .into_iter()
            .filter(|(n, _, _)| *n >= 0)
            .collect::<Vec<_>>()
    };
    let frames: Vec<Vec<(i64, f64, f64)>> = if include {
        traj.states.iter().map(triples).collect()
    } else {
        vec![triples(&traj.final_state)]
    };
    let rows = include.then(|| traj.states.iter().map(flatten).collect::<Vec<_>>());
    let headers = (0..=max_mode)
        .flat_map(|n| [format!("re_{n}"), format!("im_{n}")])
        .collect();
    RunPieces {
        times: traj.times,
        diagnostics: traj.diagnostics,
        headers,
        rows,
        dump: StateDump::Spectral { max_mode, frames },
        final_time: traj.final_time,
        steps: traj.steps,
        rejected_steps: traj.rejected_steps,
    }
}

fn resolve_artifact(
    configured: &Option<String>,
    default_name: String,
    out_dir: &Path,
) -> Option<PathBuf> {
    match configured {
        Some(s) if s.is_empty() => None,
        Some(s) => Some(out_dir.join(s)),
        None => Some(out_dir.join(default_name)),
    }
}

/// Run one experiment end to end. Artifact paths from the config are
/// resolved relative to `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunSummary, HarnessError> {
    let (system, defaults) = presets::build(config)?;
    let mut icfg = resolve_integrator(&config.integrator, &defaults)?;
    let checks = if config.report.check.is_empty() {
        defaults.checks.clone()
    } else {
        config.report.check.clone()
    };

    let components = match &system {
        BuiltSystem::Vector(v) => v.initial.len(),
        BuiltSystem::Matrix(m) => m.initial.nrows() * m.initial.ncols(),
        BuiltSystem::Spectral(s) => 2 * s.initial.max_mode() + 1,
    };
    let include = match config.output.include_state.as_deref() {
        None | Some("auto") => components <= 32,
        Some("always") => true,
        Some("never") => false,
        Some(other) => {
            return Err(HarnessError::Config(format!(
                "include_state must be auto, always, or never, not '{other}'"
            )))
        }
    };
    icfg.store_states = include;

    let pieces = match system {
        BuiltSystem::Vector(v) => {
            let field = v.field;
            let traj = integrate(|y| field(y), v.initial.clone(), &icfg, &v.observers)?;
            pieces_vector(traj, include)
        }
        BuiltSystem::Matrix(m) => {
            let field = m.field;
            let traj = integrate(|y| field(y), m.initial.clone(), &icfg, &m.observers)?;
            pieces_matrix(traj, include)
        }
        BuiltSystem::Spectral(s) => {
            let traj = match icfg.method {
                Method::IfRk4 => {
                    integrating_factor_rk4(&s.spec, s.initial.clone(), &icfg, &s.observers)?
                }
                _ => {
                    let spec = &s.spec;
                    integrate(
                        |u| spec.field(u).map_err(FieldError::new),
                        s.initial.clone(),
                        &icfg,
                        &s.observers,
                    )?
                }
            };
            pieces_spectral(traj, include)
        }
    };

    let meta = RunMeta {
        preset: config.system.preset.clone(),
        method: method_name(icfg.method).to_string(),
        dt: icfg.dt,
        t_max: icfg.t_max,
        final_time: pieces.final_time,
        steps: pieces.steps,
        rejected_steps: pieces.rejected_steps,
        seed: config.initial.seed.or(defaults.seed_used),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        state_frames: if include {
            "all".to_string()
        } else {
            "final".to_string()
        },
    };

    let csv_path = resolve_artifact(
        &config.output.csv,
        format!("{}.csv", config.system.preset),
        out_dir,
    );
    if let Some(path) = &csv_path {
        write_csv(
            path,
            &pieces.times,
            &pieces.headers,
            pieces.rows.as_deref(),
            &pieces.diagnostics,
        )?;
    }

    let results = evaluate_checks(&checks, &pieces.diagnostics);
    let records = pieces.times.len();

    let json_path = resolve_artifact(
        &config.output.json,
        format!("{}.json", config.system.preset),
        out_dir,
    );
    if let Some(path) = &json_path {
        let doc = TrajectoryDoc {
            meta: meta.clone(),
            times: pieces.times,
            state: pieces.dump,
            diagnostics: pieces
                .diagnostics
                .into_iter()
                .map(|(name, values)| DiagnosticSeries { name, values })
                .collect(),
            checks: checks.clone(),
        };
        doc.write_json(path)?;
    }

    Ok(RunSummary {
        preset: meta.preset,
        method: meta.method,
        final_time: meta.final_time,
        steps: meta.steps,
        rejected_steps: meta.rejected_steps,
        records,
        checks: results,
        csv: csv_path,
        json: json_path,
    })
}
