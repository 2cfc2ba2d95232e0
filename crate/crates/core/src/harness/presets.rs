//! The preset catalog: named, ready-to-run systems with default initial
//! data, integrator settings, diagnostics, and checks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circle_field::{normal_inner, PeriodicField};
use crate::integrators::{FieldError, Method, Observer};
use crate::pde_flows::{FlowSpec, Functional};
use crate::quadratic_lie::{LieAlgebraSpec, PoissonSign, ScalarField};
use crate::toda::{self, TodaState};

use super::config::{CheckSpec, ExperimentConfig, InitialConfig, Num, SystemConfig};
use super::HarnessError;

/// Default seed for randomly drawn lattice initial data.
pub(crate) const DEFAULT_LATTICE_SEED: u64 = 3;
// The chopped-invariant ascent divides by the leading chopped coefficient, which the
// flow can drive through zero in finite time. Seed 7 keeps it bounded away from zero
// over the default window; seed 3 hits a genuine singularity near t = 0.77.
pub(crate) const DEFAULT_DISSIPATIVE_SEED: u64 = 7;
/// Default seed for random band-limited fields.
pub(crate) const DEFAULT_FIELD_SEED: u64 = 11;

/// (tag, one-line summary) for every preset.
pub(crate) const CATALOG: &[(&str, &str)] = &[
    (
        "rigid_body",
        "free rigid body as a Lie-Poisson flow on so(3)*",
    ),
    (
        "rigid_body_metriplectic",
        "rigid body with energy-conserving, entropy-producing relaxation",
    ),
    (
        "so3_ex1",
        "so(3)* metriplectic flow with quadratic energy and linear entropy",
    ),
    (
        "so3_ex2",
        "so(3)* metriplectic flow with linear energy and quadratic entropy",
    ),
    (
        "double_bracket_so3",
        "double-bracket descent of the pairing with a fixed target on so(3)*",
    ),
    ("toda_lax", "open Toda lattice in tridiagonal Lax form"),
    (
        "toda_double_bracket",
        "double-bracket sorting flow with the staircase target",
    ),
    (
        "full_toda",
        "full symmetric Toda flow with chopped-determinant invariants",
    ),
    (
        "full_toda_dissipative",
        "full Toda plus a double-bracket term ascending a chopped invariant",
    ),
    ("kdv", "KdV on the circle via the Gardner structure"),
    (
        "kdv_linear_damping",
        "KdV damped through the normal metric (uniform rate)",
    ),
    (
        "kdv_viscous",
        "KdV damped through the induced metric (rate n^2)",
    ),
    (
        "kdv_landau",
        "KdV damped through the Kahler metric (rate |n|)",
    ),
    (
        "advection_landau",
        "Kahler-symplectic advection with Kahler damping of the Dirichlet energy",
    ),
    ("heat", "heat equation as a symmetric-bracket mass flow"),
    (
        "gardner_metriplectic",
        "Gardner metriplectic flow conserving the L2 energy while producing mass",
    ),
    (
        "benjamin_ono",
        "Benjamin-Ono on the circle via the Gardner structure",
    ),
    (
        "translation",
        "rigid translation as the Kahler-symplectic Dirichlet flow",
    ),
];

/// Boxed right-hand side for a built system.
pub(crate) type SystemField<S> = Box<dyn Fn(&S) -> Result<S, FieldError> + Send + Sync>;

/// A vector-valued system ready to integrate.
pub(crate) struct VectorSystem {
    pub initial: DVector<f64>,
    pub field: SystemField<DVector<f64>>,
    pub observers: Vec<Observer<DVector<f64>>>,
}

/// A matrix-valued system ready to integrate.
pub(crate) struct MatrixSystem {
    pub initial: DMatrix<f64>,
    pub field: SystemField<DMatrix<f64>>,
    pub observers: Vec<Observer<DMatrix<f64>>>,
}

/// A spectral system; the flow itself supplies the stiff linear split.
pub(crate) struct SpectralSystem {
    pub initial: PeriodicField,
    pub spec: FlowSpec,
    pub observers: Vec<Observer<PeriodicField>>,
}

/// State-layout dispatch for built presets.
pub(crate) enum BuiltSystem {
    Vector(VectorSystem),
    Matrix(MatrixSystem),
    Spectral(SpectralSystem),
}

/// Per-preset defaults; the config's integrator section overrides them.
pub(crate) struct Defaults {
    pub method: Method,
    pub dt: f64,
    pub t_max: f64,
    pub record_every: usize,
    pub checks: Vec<CheckSpec>,
    pub seed_used: Option<u64>,
}

fn conserved(name: &str, tol: f64) -> CheckSpec {
    CheckSpec::Conserved {
        diagnostic: name.to_string(),
        tol,
    }
}

fn nondecreasing(name: &str, slack: f64) -> CheckSpec {
    CheckSpec::Nondecreasing {
        diagnostic: name.to_string(),
        slack,
    }
}

fn nonincreasing(name: &str, slack: f64) -> CheckSpec {
    CheckSpec::Nonincreasing {
        diagnostic: name.to_string(),
        slack,
    }
}

fn final_at_most(name: &str, value: f64) -> CheckSpec {
    CheckSpec::FinalAtMost {
        diagnostic: name.to_string(),
        value,
    }
}

fn nums(v: &[Num]) -> Vec<f64> {
    v.iter().map(Num::f).collect()
}

/// Build the system a config names, or report why it cannot be built.
pub(crate) fn build(cfg: &ExperimentConfig) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let sys = &cfg.system;
    let init = &cfg.initial;
    match sys.preset.as_str() {
        "rigid_body" => rigid_body(sys, init),
        "rigid_body_metriplectic" => rigid_body_metriplectic(sys, init),
        "so3_ex1" => so3_ex1(sys, init),
        "so3_ex2" => so3_ex2(sys, init),
        "double_bracket_so3" => double_bracket_so3(sys, init),
        "toda_lax" => toda_lax(sys, init),
        "toda_double_bracket" => toda_double_bracket(sys, init),
        "full_toda" => full_toda(sys, init),
        "full_toda_dissipative" => full_toda_dissipative(sys, init),
        tag if FlowSpec::preset_tags().contains(&tag) => spectral(tag, sys, init),
        other => Err(HarnessError::UnknownPreset {
            name: other.to_string(),
        }),
    }
}

// ---- shared initial-data constructors ----

fn vector_initial(init: &InitialConfig, default: [f64; 3]) -> Result<DVector<f64>, HarnessError> {
    match init.kind.as_deref() {
        None | Some("default") | Some("values") => {}
        Some(other) => {
            return Err(HarnessError::Initial(format!(
                "initial kind '{other}' does not apply to vector states"
            )))
        }
    }
    match &init.values {
        Some(v) => {
            if v.len() != 3 {
                return Err(HarnessError::Initial(format!(
                    "expected 3 components, got {}",
                    v.len()
                )));
            }
            Ok(DVector::from_vec(nums(v)))
        }
        None => {
            if init.kind.as_deref() == Some("values") {
                return Err(HarnessError::Initial(
                    "initial kind 'values' needs a 'values' array".to_string(),
                ));
            }
            Ok(DVector::from_row_slice(&default))
        }
    }
}

fn lattice_initial(
    init: &InitialConfig,
    size: usize,
) -> Result<(DMatrix<f64>, Option<u64>), HarnessError> {
    match (&init.diagonal, &init.offdiagonal) {
        (Some(d), Some(o)) => {
            let state = TodaState::new(nums(d), nums(o))
                .map_err(|e| HarnessError::Initial(e.to_string()))?;
            Ok((state.to_matrix(), None))
        }
        (None, None) => {
            let seed = init.seed.unwrap_or(DEFAULT_LATTICE_SEED);
            Ok((TodaState::seeded(size, seed).to_matrix(), Some(seed)))
        }
        _ => Err(HarnessError::Initial(
            "lattice initial data needs both 'diagonal' and 'offdiagonal'".to_string(),
        )),
    }
}

fn symmetric_initial(
    init: &InitialConfig,
    size: usize,
    default_seed: u64,
) -> Result<(DMatrix<f64>, Option<u64>), HarnessError> {
    if let Some(rows) = &init.matrix {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(HarnessError::Initial("'matrix' must be square".to_string()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j].f());
        let defect = (&m - m.transpose()).norm();
        if defect > 1e-12 * (1.0 + m.norm()) {
            return Err(HarnessError::Initial(format!(
                "'matrix' must be symmetric (defect {defect:.3e})"
            )));
        }
        return Ok((m, None));
    }
    if init.diagonal.is_some() || init.offdiagonal.is_some() {
        return lattice_initial(init, size);
    }
    let seed = init.seed.unwrap_or(default_seed);
    Ok((toda::seeded_symmetric(size, seed), Some(seed)))
}

fn spectral_initial(
    init: &InitialConfig,
    max_mode: usize,
    default: &SpectralDefault,
) -> Result<(PeriodicField, Option<u64>), HarnessError> {
    let mode_in_band = |m: usize| -> Result<(), HarnessError> {
        if m > max_mode {
            Err(HarnessError::Initial(format!(
                "mode {m} exceeds band limit {max_mode}"
            )))
        } else {
            Ok(())
        }
    };
    match init.kind.as_deref().unwrap_or("default") {
        "default" => Ok((
            match default {
                SpectralDefault::Cosine(a) => PeriodicField::cosine(max_mode, 1, *a),
                SpectralDefault::Modes(ms) => PeriodicField::from_modes(max_mode, ms),
            },
            None,
        )),
        "cosine" => {
            let m = init.mode.unwrap_or(1);
            mode_in_band(m)?;
            Ok((
                PeriodicField::cosine(max_mode, m, init.amplitude.unwrap_or(1.0)),
                None,
            ))
        }
        "sine" => {
            let m = init.mode.unwrap_or(1);
            mode_in_band(m)?;
            Ok((
                PeriodicField::sine(max_mode, m, init.amplitude.unwrap_or(1.0)),
                None,
            ))
        }
        "modes" => {
            let ms = init.modes.as_ref().ok_or_else(|| {
                HarnessError::Initial("initial kind 'modes' needs a 'modes' array".to_string())
            })?;
            let mut u = PeriodicField::zeros(max_mode);
            for (n, re, im) in ms {
                mode_in_band(n.unsigned_abs() as usize)?;
                if *n == 0 && im.f() != 0.0 {
                    return Err(HarnessError::Initial(
                        "mode 0 must be real for a real field".to_string(),
                    ));
                }
                u.set_coeff(*n, Complex64::new(re.f(), im.f()));
            }
            Ok((u, None))
        }
        "random" => {
            let excite = init.excite.unwrap_or_else(|| (max_mode / 2).max(1));
            mode_in_band(excite)?;
            let seed = init.seed.unwrap_or(DEFAULT_FIELD_SEED);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amp = init.amplitude.unwrap_or(1.0);
            Ok((
                PeriodicField::random_bandlimited(max_mode, excite, amp, &mut rng),
                Some(seed),
            ))
        }
        other => Err(HarnessError::Initial(format!(
            "initial kind '{other}' does not apply to spectral states"
        ))),
    }
}

// ---- so(3)* presets ----

fn axis_vector(sys: &SystemConfig) -> Result<DVector<f64>, HarnessError> {
    let a = sys.axis.unwrap_or([0.0, 0.0, 1.0]);
    let v = DVector::from_row_slice(&a);
    if v.norm() == 0.0 {
        return Err(HarnessError::Config("'axis' must be nonzero".to_string()));
    }
    Ok(v)
}

fn inertia_tensor(sys: &SystemConfig) -> Result<[f64; 3], HarnessError> {
    let inertia = sys.inertia.unwrap_or([1.0, 2.0, 3.0]);
    if inertia.iter().any(|&m| m <= 0.0) {
        return Err(HarnessError::Config(
            "'inertia' moments must be positive".to_string(),
        ));
    }
    Ok(inertia)
}

fn so3_value_observer(name: &str, f: &ScalarField) -> Observer<DVector<f64>> {
    let f = f.clone();
    Observer::new(name, move |xi: &DVector<f64>| f.value(xi))
}

fn rigid_body(
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let inertia = inertia_tensor(sys)?;
    let alg = Arc::new(LieAlgebraSpec::so3());
    let h = ScalarField::rigid_body_energy(inertia);
    let initial = vector_initial(init, [1.0, 1.0, 1.0])?;
    let field = {
        let alg = alg.clone();
        let h = h.clone();
        move |xi: &DVector<f64>| Ok(alg.lie_poisson_field(&h, xi, PoissonSign::Minus))
    };
    let observers = vec![
        so3_value_observer("energy", &h),
        so3_value_observer("casimir", &alg.casimir_c2()),
    ];
    Ok((
        BuiltSystem::Vector(VectorSystem {
            initial,
            field: Box::new(field),
            observers,
        }),
        Defaults {
            method: Method::Rk4,
            dt: 1e-3,
            t_max: 10.0,
            record_every: 1,
            checks: vec![conserved("energy", 1e-8), conserved("casimir", 1e-8)],
            seed_used: None,
        },
    ))
}

fn metriplectic_system(
    alg: Arc<LieAlgebraSpec>,
    h: ScalarField,
    s: ScalarField,
    initial: DVector<f64>,
    extra: Vec<Observer<DVector<f64>>>,
) -> VectorSystem {
    let field = {
        let alg = alg.clone();
        let h = h.clone();
        let s = s.clone();
        move |xi: &DVector<f64>| alg.metriplectic_field(&h, &s, xi).map_err(FieldError::new)
    };
    let mut observers = vec![
        so3_value_observer("energy", &h),
        so3_value_observer("entropy", &s),
    ];
    observers.extend(extra);
    VectorSystem {
        initial,
        field: Box::new(field),
        observers,
    }
}

fn rigid_body_metriplectic(
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let inertia = inertia_tensor(sys)?;
    let alg = Arc::new(LieAlgebraSpec::so3());
    let h = ScalarField::rigid_body_energy(inertia);
    let s = alg.casimir_c2();
    let initial = vector_initial(init, [1.0, 1.0, 1.0])?;
    // Defect of the conservative part alone: zero exactly at relaxed states.
    let defect = {
        let alg = alg.clone();
        let h = h.clone();
        Observer::new("equilibrium_defect", move |xi: &DVector<f64>| {
            alg.lie_poisson_field(&h, xi, PoissonSign::Minus).norm()
        })
    };
    let system = metriplectic_system(alg, h, s, initial, vec![defect]);
    Ok((
        BuiltSystem::Vector(system),
        Defaults {
            method: Method::Rk4,
            dt: 1e-3,
            t_max: 50.0,
            record_every: 10,
            checks: vec![
                conserved("energy", 1e-8),
                nondecreasing("entropy", 1e-10),
                final_at_most("equilibrium_defect", 1e-6),
            ],
            seed_used: None,
        },
    ))
}

fn so3_ex1(
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let axis = axis_vector(sys)?;
    let alg = Arc::new(LieAlgebraSpec::so3());
    let h = alg.casimir_c2();
    let s = ScalarField::linear(axis.clone());
    let initial = vector_initial(init, [1.0, 0.0, 0.0])?;
    // Distance from the relaxed ray: the flow aligns xi with the axis.
    let align = {
        let alg = alg.clone();
        Observer::new("alignment_defect", move |xi: &DVector<f64>| {
            alg.bracket(xi, &axis).norm()
        })
    };
    let system = metriplectic_system(alg, h, s, initial, vec![align]);
    Ok((
        BuiltSystem::Vector(system),
        Defaults {
            method: Method::Rk4,
            dt: 1e-3,
            t_max: 10.0,
            record_every: 1,
            checks: vec![
                conserved("energy", 1e-8),
                nondecreasing("entropy", 1e-10),
                final_at_most("alignment_defect", 1e-3),
            ],
            seed_used: None,
        },
    ))
}

fn so3_ex2(
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let axis = axis_vector(sys)?;
    let alg = Arc::new(LieAlgebraSpec::so3());
    let h = ScalarField::linear(axis);
    let s = alg.casimir_c2();
    let initial = vector_initial(init, [1.0, 0.0, 0.5])?;
    let system = metriplectic_system(alg, h, s, initial, vec![]);
    Ok((
        BuiltSystem::Vector(system),
        Defaults {
            method: Method::Rk4,
            dt: 1e-3,
            // The transverse component grows like e^t; keep the window short.
            t_max: 5.0,
            record_every: 1,
            checks: vec![conserved("energy", 1e-8), nondecreasing("entropy", 1e-10)],
            seed_used: None,
        },
    ))
}

fn double_bracket_so3(
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let target = axis_vector(sys)?;
    let alg = Arc::new(LieAlgebraSpec::so3());
    let initial = vector_initial(init, [1.0, 0.5, -0.25])?;
    let norm0 = initial.norm();
    let field = {
        let alg = alg.clone();
        let target = target.clone();
        move |xi: &DVector<f64>| Ok(alg.double_bracket_field(xi, &target))
    };
    let observers = vec![
        {
            let alg = alg.clone();
            let target = target.clone();
            Observer::new("alignment", move |xi: &DVector<f64>| {
                alg.pairing(xi, &target)
            })
        },
        so3_value_observer("casimir", &alg.casimir_c2()),
    ];
    Ok((
        BuiltSystem::Vector(VectorSystem {
            initial,
            field: Box::new(field),
            observers,
        }),
        Defaults {
            method: Method::Rk4,
            dt: 1e-3,
            t_max: 20.0,
            record_every: 1,
            checks: vec![
                conserved("casimir", 1e-8),
                nonincreasing("alignment", 1e-10),
                // The pairing relaxes to -|xi_0||target|.
                final_at_most("alignment", -0.99 * norm0 * target.norm()),
            ],
            seed_used: None,
        },
    ))
}

// ---- Toda presets ----

fn lattice_size(sys: &SystemConfig) -> Result<usize, HarnessError> {
    let size = sys.size.unwrap_or(4);
    if size < 2 {
        return Err(HarnessError::Config(
            "'size' must be at least 2".to_string(),
        ));
    }
    Ok(size)
}

fn offdiag_norm(l: &DMatrix<f64>) -> f64 {
    let diag_sq: f64 = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).sum();
    (l.norm_squared() - diag_sq).max(0.0).sqrt()
}

fn spectrum_observers(n: usize) -> Vec<Observer<DMatrix<f64>>> {
    let mut obs = vec![Observer::new("energy", |l: &DMatrix<f64>| {
        0.5 * l.norm_squared()
    })];
    for i in 0..n {
        obs.push(Observer::new(
            format!("lambda_{i}"),
            move |l: &DMatrix<f64>| toda::spectrum(l)[i],
        ));
    }
    obs.push(Observer::new("offdiag_norm", |l: &DMatrix<f64>| {
        offdiag_norm(l)
    }));
    obs
}

fn spectrum_checks(n: usize) -> Vec<CheckSpec> {
    let mut checks = vec![conserved("energy", 1e-8)];
    for i in 0..n {
        checks.push(conserved(&format!("lambda_{i}"), 1e-8));
    }
    checks
}

fn toda_lax(
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let size = lattice_size(sys)?;
    let (initial, seed_used) = lattice_initial(init, size)?;
    let n = initial.nrows();
    let field = move |l: &DMatrix<f64>| Ok(toda::lax_field(l));
    Ok((
        BuiltSystem::Matrix(MatrixSystem {
            initial,
            field: Box::new(field),
            observers: spectrum_observers(n),
        }),
        Defaults {
            method: Method::Rk4,
            dt: 1e-3,
            t_max: 20.0,
            record_every: 10,
            checks: spectrum_checks(n),
            seed_used,
        },
    ))
}

fn toda_double_bracket(
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let size = lattice_size(sys)?;
    let (initial, seed_used) = lattice_initial(init, size)?;
    let n = initial.nrows();
    let target = toda::diag_target(n);
    let field = {
        let target = target.clone();
        move |l: &DMatrix<f64>| Ok(toda::double_bracket_field(l, &target))
    };
    let mut observers = spectrum_observers(n);
    observers.push(Observer::new(
        "target_alignment",
        move |l: &DMatrix<f64>| (l * &target).trace(),
    ));
    let mut checks = spectrum_checks(n);
    checks.push(nondecreasing("target_alignment", 1e-10));
    checks.push(final_at_most("offdiag_norm", 1e-6));
    Ok((
        BuiltSystem::Matrix(MatrixSystem {
            initial,
            field: Box::new(field),
            observers,
        }),
        Defaults {
            method: Method::Rk4,
            dt: 1e-3,
            t_max: 50.0,
            record_every: 10,
            checks,
            seed_used,
        },
    ))
}

fn chopped_observers(n: usize, obs: &mut Vec<Observer<DMatrix<f64>>>) {
    for k in 0..=((n - 1) / 2) {
        obs.push(Observer::new(format!("i1{k}"), move |l: &DMatrix<f64>| {
            toda::casimir_i1k(l, k).unwrap_or(f64::NAN)
        }));
    }
}

fn full_toda(
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let size = lattice_size(sys)?;
    let (initial, seed_used) = symmetric_initial(init, size, DEFAULT_LATTICE_SEED)?;
    let n = initial.nrows();
    let field = move |l: &DMatrix<f64>| Ok(toda::full_toda_field(l));
    let mut observers = spectrum_observers(n);
    chopped_observers(n, &mut observers);
    let mut checks = spectrum_checks(n);
    for k in 0..=((n - 1) / 2) {
        checks.push(conserved(&format!("i1{k}"), 1e-8));
    }
    Ok((
        BuiltSystem::Matrix(MatrixSystem {
            initial,
            field: Box::new(field),
            observers,
        }),
        Defaults {
            method: Method::Rk4,
            dt: 1e-3,
            t_max: 10.0,
            record_every: 10,
            checks,
            seed_used,
        },
    ))
}

fn full_toda_dissipative(
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let size = lattice_size(sys)?;
    let chop = sys.chop.unwrap_or(1);
    if size < 2 * chop + 1 {
        return Err(HarnessError::Config(format!(
            "chop depth {chop} needs a lattice of at least {} sites",
            2 * chop + 1
        )));
    }
    let (initial, seed_used) = symmetric_initial(init, size, DEFAULT_DISSIPATIVE_SEED)?;
    let n = initial.nrows();
    let field =
        move |l: &DMatrix<f64>| toda::dissipative_full_toda_field(l, chop).map_err(FieldError::new);
    let mut observers = vec![Observer::new("energy", |l: &DMatrix<f64>| {
        0.5 * l.norm_squared()
    })];
    chopped_observers(n, &mut observers);
    observers.push(Observer::new("offdiag_norm", |l: &DMatrix<f64>| {
        offdiag_norm(l)
    }));
    let mut checks = vec![conserved("energy", 1e-8)];
    if chop > 0 {
        checks.push(conserved("i10", 1e-8));
    }
    checks.push(nondecreasing(&format!("i1{chop}"), 1e-10));
    Ok((
        BuiltSystem::Matrix(MatrixSystem {
            initial,
            field: Box::new(field),
            observers,
        }),
        Defaults {
            method: Method::Rk4,
            dt: 1e-4,
            t_max: 1.0,
            record_every: 10,
            checks,
            seed_used,
        },
    ))
}

// ---- spectral presets ----

enum SpectralDefault {
    Cosine(f64),
    Modes(&'static [(i64, f64, f64)]),
}

struct SpectralParams {
    max_mode: usize,
    initial: SpectralDefault,
    method: Method,
    dt: f64,
    t_max: f64,
}

fn spectral_params(tag: &str) -> SpectralParams {
    let p = |max_mode, initial, method, dt, t_max| SpectralParams {
        max_mode,
        initial,
        method,
        dt,
        t_max,
    };
    match tag {
        "kdv" => p(128, SpectralDefault::Cosine(1.0), Method::IfRk4, 1e-4, 1.0),
        "kdv_linear_damping" | "kdv_viscous" | "kdv_landau" => {
            p(64, SpectralDefault::Cosine(1.0), Method::IfRk4, 1e-4, 1.0)
        }
        "advection_landau" => p(64, SpectralDefault::Cosine(1.0), Method::IfRk4, 1e-3, 1.0),
        "heat" => p(64, SpectralDefault::Cosine(1.0), Method::IfRk4, 1e-3, 1.0),
        "gardner_metriplectic" => p(
            128,
            // Positive mean plus two gentle harmonics: forward diffusion from t = 0.
            SpectralDefault::Modes(&[(0, 0.5, 0.0), (1, 0.05, 0.0), (2, 0.0, -0.025)]),
            Method::IfRk4,
            2.5e-4,
            1.0,
        ),
        "benjamin_ono" => p(128, SpectralDefault::Cosine(1.0), Method::IfRk4, 1e-4, 1.0),
        "translation" => p(32, SpectralDefault::Cosine(1.0), Method::Rk4, 1e-3, 1.0),
        other => unreachable!("spectral_params called for unknown tag {other}"),
    }
}

fn functional_observer(f: Functional) -> Observer<PeriodicField> {
    let name = f.name().to_string();
    Observer::new(name, move |u: &PeriodicField| f.value(u))
}

fn spectral_observers(tag: &str) -> Vec<Observer<PeriodicField>> {
    let mut obs = vec![
        functional_observer(Functional::mass()),
        functional_observer(Functional::quadratic()),
    ];
    match tag {
        "kdv" | "kdv_linear_damping" | "kdv_viscous" | "kdv_landau" => {
            obs.push(functional_observer(Functional::kdv_energy()));
            obs.push(functional_observer(Functional::dirichlet()));
        }
        "benjamin_ono" => obs.push(functional_observer(Functional::bo_energy())),
        "advection_landau" | "heat" | "translation" => {
            obs.push(functional_observer(Functional::dirichlet()))
        }
        "gardner_metriplectic" => {
            // d(mass)/dt equals 2 pi INT u'^2 dtheta along the flow.
            obs.push(Observer::new("mass_production", |u: &PeriodicField| {
                let tp = 2.0 * std::f64::consts::PI;
                tp * tp * normal_inner(u, u)
            }));
        }
        _ => {}
    }
    obs
}

fn spectral_checks(tag: &str) -> Vec<CheckSpec> {
    match tag {
        "kdv" => vec![
            conserved("mass", 1e-6),
            conserved("quadratic", 1e-6),
            conserved("kdv_energy", 1e-6),
        ],
        "kdv_linear_damping" | "kdv_viscous" | "kdv_landau" => {
            vec![conserved("mass", 1e-8), nonincreasing("quadratic", 1e-10)]
        }
        "advection_landau" => vec![
            conserved("mass", 1e-10),
            nonincreasing("quadratic", 1e-10),
            nonincreasing("dirichlet", 1e-10),
        ],
        "heat" => vec![
            conserved("mass", 1e-12),
            nonincreasing("quadratic", 1e-12),
            nonincreasing("dirichlet", 1e-12),
        ],
        "gardner_metriplectic" => {
            vec![conserved("quadratic", 1e-8), nondecreasing("mass", 1e-10)]
        }
        "benjamin_ono" => vec![
            conserved("mass", 1e-6),
            conserved("quadratic", 1e-6),
            conserved("bo_energy", 1e-6),
        ],
        "translation" => vec![
            conserved("quadratic", 1e-8),
            conserved("dirichlet", 1e-8),
            conserved("mass", 1e-10),
        ],
        _ => vec![],
    }
}

fn spectral(
    tag: &str,
    sys: &SystemConfig,
    init: &InitialConfig,
) -> Result<(BuiltSystem, Defaults), HarnessError> {
    let p = spectral_params(tag);
    let max_mode = sys.max_mode.unwrap_or(p.max_mode);
    if max_mode == 0 {
        return Err(HarnessError::Config(
            "'max_mode' must be positive".to_string(),
        ));
    }
    let (initial, seed_used) = spectral_initial(init, max_mode, &p.initial)?;
    let spec = FlowSpec::preset(tag).expect("tag comes from the catalog");
    Ok((
        BuiltSystem::Spectral(SpectralSystem {
            initial,
            spec,
            observers: spectral_observers(tag),
        }),
        Defaults {
            method: p.method,
            dt: p.dt,
            t_max: p.t_max,
            record_every: 1,
            checks: spectral_checks(tag),
            seed_used,
        },
    ))
}
