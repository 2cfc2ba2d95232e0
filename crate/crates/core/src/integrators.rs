//! Time integrators over a minimal state interface: classical RK4, an
//! adaptive Dormand-Prince 5(4) pair, and an integrating factor RK4 for
//! stiff spectral problems.
//!
//! Vector fields return `Result`, so a right-hand side can refuse a state
//! (overflow, lost parabolicity) instead of emitting NaN. The fixed-step
//! methods abort on such a refusal; the adaptive method treats it as a
//! rejected step and retries with half the step until the step underflows.
//!
//! The integrating factor method freezes the flow's linear multiplier at
//! the start of each step, integrates that part exactly with elementwise
//! exponentials, and applies RK4 to the remainder. The split is exact (the
//! remainder is defined as field minus multiplier times state), so the
//! scheme converges at order four regardless of how much of the field the
//! multiplier captures; capturing the stiff part is what removes the step
//! size restriction.

use crate::circle_field::PeriodicField;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::Arc;
use thiserror::Error;

/// Smallest step the adaptive method will attempt.
const MIN_DT: f64 = 1e-12;

/// A right-hand side refused to evaluate at the given state.
#[derive(Debug, Error)]
#[error("vector field evaluation failed: {reason}")]
pub struct FieldError {
    /// What the field reported.
    pub reason: String,
}

impl FieldError {
    /// Wrap any displayable refusal.
    pub fn new(reason: impl std::fmt::Display) -> Self {
        FieldError {
            reason: reason.to_string(),
        }
    }
}

/// Integration failures.
#[derive(Debug, Error)]
pub enum SolverError {
    /// A fixed-step method hit a field refusal.
    #[error("at t = {t:.6e}: {source}")]
    Field {
        /// Time of the failed evaluation.
        t: f64,
        /// The underlying refusal.
        source: FieldError,
    },
    /// The adaptive method shrank the step below the floor.
    #[error("step size underflow at t = {t:.6e} (dt = {dt:.3e})")]
    StepUnderflow {
        /// Time reached.
        t: f64,
        /// Step size at failure.
        dt: f64,
    },
    /// The state left f64 range.
    #[error("non-finite state at t = {t:.6e}")]
    NonFinite {
        /// Time reached.
        t: f64,
    },
    /// Too many steps.
    #[error("step budget {max_steps} exhausted at t = {t:.6e}")]
    BudgetExhausted {
        /// Time reached.
        t: f64,
        /// Configured budget.
        max_steps: usize,
    },
    /// `integrate` was asked for the spectral method.
    #[error(
        "the integrating factor method needs a spectral splitting; call integrating_factor_rk4"
    )]
    NeedsSpectralSplit,
}

/// Time stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Classical fixed-step Runge-Kutta 4.
    Rk4,
    /// Adaptive Dormand-Prince 5(4).
    Rk45,
    /// Integrating factor RK4 on spectral states.
    IfRk4,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "rk45" => Ok(Method::Rk45),
            "ifrk4" => Ok(Method::IfRk4),
            other => Err(format!(
                "unknown method '{other}' (expected rk4, rk45, or ifrk4)"
            )),
        }
    }
}

/// Minimal linear-space interface the steppers need.
pub trait State: Clone {
    /// self += a * other.
    fn scaled_add(&mut self, a: f64, other: &Self);
    /// self *= a.
    fn scale(&mut self, a: f64);
    /// A norm for error control and divergence checks.
    fn norm(&self) -> f64;
    /// False as soon as any component leaves f64 range.
    fn all_finite(&self) -> bool;
}

impl State for DVector<f64> {
    fn scaled_add(&mut self, a: f64, other: &Self) {
        self.zip_apply(other, |s, o| *s += a * o);
    }
    fn scale(&mut self, a: f64) {
        *self *= a;
    }
    fn norm(&self) -> f64 {
        nalgebra::DVector::norm(self)
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

impl State for DMatrix<f64> {
    fn scaled_add(&mut self, a: f64, other: &Self) {
        self.zip_apply(other, |s, o| *s += a * o);
    }
    fn scale(&mut self, a: f64) {
        *self *= a;
    }
    fn norm(&self) -> f64 {
        nalgebra::DMatrix::norm(self)
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

impl State for PeriodicField {
    fn scaled_add(&mut self, a: f64, other: &Self) {
        assert_eq!(self.max_mode(), other.max_mode(), "band limits must agree");
        for (s, o) in self.coeffs_mut().iter_mut().zip(other.coeffs()) {
            *s += *o * a;
        }
    }
    fn scale(&mut self, a: f64) {
        for s in self.coeffs_mut() {
            *s *= a;
        }
    }
    fn norm(&self) -> f64 {
        self.l2_norm()
    }
    fn all_finite(&self) -> bool {
        self.coeffs()
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Named scalar diagnostic recorded along a trajectory.
#[derive(Clone)]
pub struct Observer<S> {
    name: String,
    eval: Arc<dyn Fn(&S) -> f64 + Send + Sync>,
}

impl<S> Observer<S> {
    /// Build from a name and closure.
    pub fn new(name: impl Into<String>, eval: impl Fn(&S) -> f64 + Send + Sync + 'static) -> Self {
        Observer {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// Diagnostic name.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Evaluate on a state.
    pub fn eval(&self, s: &S) -> f64 {
        (self.eval)(s)
    }
}

/// Integration settings. `rtol`/`atol` drive the adaptive method only;
/// `record_every` thins recording to every k-th accepted step (the initial
/// and final states are always recorded).
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    /// Scheme to use.
    pub method: Method,
    /// Fixed step (rk4, ifrk4) or initial step (rk45).
    pub dt: f64,
    /// Final time.
    pub t_max: f64,
    /// Relative tolerance for step control.
    pub rtol: f64,
    /// Absolute tolerance for step control.
    pub atol: f64,
    /// Budget over accepted plus rejected steps.
    pub max_steps: usize,
    /// Record every k-th accepted step.
    pub record_every: usize,
    /// Keep every recorded state (false keeps only the final one).
    pub store_states: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            dt: 1e-3,
            t_max: 1.0,
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 10_000_000,
            record_every: 1,
            store_states: true,
        }
    }
}

/// Recorded run: times, diagnostics, and (optionally) the state frames.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    /// Recording times.
    pub times: Vec<f64>,
    /// State frames parallel to `times`; empty when states are not stored.
    pub states: Vec<S>,
    /// State at `final_time` regardless of storage settings.
    pub final_state: S,
    /// Time actually reached.
    pub final_time: f64,
    /// Diagnostic series parallel to `times`, in observer order.
    pub diagnostics: Vec<(String, Vec<f64>)>,
    /// Accepted steps taken.
    pub steps: usize,
    /// Rejected attempts (adaptive method only).
    pub rejected_steps: usize,
}

struct Recorder<S> {
    times: Vec<f64>,
    states: Vec<S>,
    diagnostics: Vec<(String, Vec<f64>)>,
    store_states: bool,
    record_every: usize,
}

impl<S: State> Recorder<S> {
    fn new(observers: &[Observer<S>], store_states: bool, record_every: usize) -> Self {
        Recorder {
            times: Vec::new(),
            states: Vec::new(),
            diagnostics: observers
                .iter()
                .map(|o| (o.name().to_string(), Vec::new()))
                .collect(),
            store_states,
            record_every: record_every.max(1),
        }
    }

    fn record(&mut self, t: f64, y: &S, observers: &[Observer<S>]) {
        self.times.push(t);
        if self.store_states {
            self.states.push(y.clone());
        }
        for (obs, (_, series)) in observers.iter().zip(self.diagnostics.iter_mut()) {
            series.push(obs.eval(y));
        }
    }

    fn due(&self, step: usize) -> bool {
        step % self.record_every == 0
    }

    fn finish(self, y: S, t: f64, steps: usize, rejected: usize) -> Trajectory<S> {
        Trajectory {
            times: self.times,
            states: self.states,
            final_state: y,
            final_time: t,
            diagnostics: self.diagnostics,
            steps,
            rejected_steps: rejected,
        }
    }
}

fn end_reached(t: f64, t_max: f64) -> bool {
    t >= t_max - 1e-12 * (1.0 + t_max.abs())
}

/// Integrate y' = field(y) from t = 0 to `t_max` with rk4 or rk45.
///
/// The spectral method is rejected here; it needs the splitting interface
/// of `integrating_factor_rk4`.
pub fn integrate<S: State>(
    field: impl Fn(&S) -> Result<S, FieldError>,
    y0: S,
    config: &IntegratorConfig,
    observers: &[Observer<S>],
) -> Result<Trajectory<S>, SolverError> {
    match config.method {
        Method::Rk4 => fixed_rk4(field, y0, config, observers),
        Method::Rk45 => adaptive_rk45(field, y0, config, observers),
        Method::IfRk4 => Err(SolverError::NeedsSpectralSplit),
    }
}

fn fixed_rk4<S: State>(
    field: impl Fn(&S) -> Result<S, FieldError>,
    y0: S,
    config: &IntegratorConfig,
    observers: &[Observer<S>],
) -> Result<Trajectory<S>, SolverError> {
    let mut rec = Recorder::new(observers, config.store_states, config.record_every);
    let mut y = y0;
    let mut t = 0.0;
    let mut steps = 0usize;
    rec.record(t, &y, observers);
    while !end_reached(t, config.t_max) {
        if steps >= config.max_steps {
            return Err(SolverError::BudgetExhausted {
                t,
                max_steps: config.max_steps,
            });
        }
        let h = config.dt.min(config.t_max - t);
        let eval = |s: &S| field(s).map_err(|source| SolverError::Field { t, source });

        let k1 = eval(&y)?;
        let mut stage = y.clone();
        stage.scaled_add(0.5 * h, &k1);
        let k2 = eval(&stage)?;
        let mut stage = y.clone();
        stage.scaled_add(0.5 * h, &k2);
        let k3 = eval(&stage)?;
        let mut stage = y.clone();
        stage.scaled_add(h, &k3);
        let k4 = eval(&stage)?;

        y.scaled_add(h / 6.0, &k1);
        y.scaled_add(h / 3.0, &k2);
        y.scaled_add(h / 3.0, &k3);
        y.scaled_add(h / 6.0, &k4);
        t += h;
        steps += 1;
        if !y.all_finite() {
            return Err(SolverError::NonFinite { t });
        }
        if rec.due(steps) || end_reached(t, config.t_max) {
            rec.record(t, &y, observers);
        }
    }
    Ok(rec.finish(y, t, steps, 0))
}

/// Dormand-Prince coefficients (5th-order weights b5, embedded 4th-order b4).
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn adaptive_rk45<S: State>(
    field: impl Fn(&S) -> Result<S, FieldError>,
    y0: S,
    config: &IntegratorConfig,
    observers: &[Observer<S>],
) -> Result<Trajectory<S>, SolverError> {
    let mut rec = Recorder::new(observers, config.store_states, config.record_every);
    let mut y = y0;
    let mut t = 0.0;
    let mut h = config.dt.min(config.t_max);
    let mut steps = 0usize;
    let mut rejected = 0usize;
    rec.record(t, &y, observers);

    while !end_reached(t, config.t_max) {
        if steps + rejected >= config.max_steps {
            return Err(SolverError::BudgetExhausted {
                t,
                max_steps: config.max_steps,
            });
        }
        if h < MIN_DT {
            return Err(SolverError::StepUnderflow { t, dt: h });
        }
        let h_step = h.min(config.t_max - t);

        // One attempt; field refusals and non-finite results reject the step.
        let attempt = (|| -> Result<Option<(S, f64)>, FieldError> {
            let mut k: Vec<S> = Vec::with_capacity(7);
            k.push(field(&y)?);
            for a_row in &DP_A {
                let mut stage = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = a_row[j];
                    if a != 0.0 {
                        stage.scaled_add(h_step * a, kj);
                    }
                }
                if !stage.all_finite() {
                    return Ok(None);
                }
                k.push(field(&stage)?);
            }
            let mut y_new = y.clone();
            for (j, kj) in k.iter().take(6).enumerate() {
                if DP_B5[j] != 0.0 {
                    y_new.scaled_add(h_step * DP_B5[j], kj);
                }
            }
            let mut err = y.clone();
            err.scale(0.0);
            for (j, kj) in k.iter().enumerate() {
                let d = DP_B5[j] - DP_B4[j];
                if d != 0.0 {
                    err.scaled_add(h_step * d, kj);
                }
            }
            if !y_new.all_finite() {
                return Ok(None);
            }
            let scale = config.atol + config.rtol * y.norm().max(y_new.norm());
            Ok(Some((y_new, err.norm() / scale)))
        })();

        match attempt {
            Err(_) | Ok(None) => {
                // Refused or blew up: halve and retry.
                rejected += 1;
                h = 0.5 * h_step;
            }
            Ok(Some((y_new, err))) => {
                if !err.is_finite() {
                    rejected += 1;
                    h = 0.5 * h_step;
                    continue;
                }
                if err <= 1.0 {
                    y = y_new;
                    t += h_step;
                    steps += 1;
                    if rec.due(steps) || end_reached(t, config.t_max) {
                        rec.record(t, &y, observers);
                    }
                } else {
                    rejected += 1;
                }
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = h_step * factor;
            }
        }
    }
    Ok(rec.finish(y, t, steps, rejected))
}

/// A flow that exposes a per-step linear multiplier alongside its full
/// right-hand side, for integrating factor stepping.
pub trait SpectralSplit {
    /// The complete field u_t = X(u).
    fn full_field(&self, u: &PeriodicField) -> Result<PeriodicField, FieldError>;
    /// Multiplier of the (stiff) linear part at u, indexed n + max_mode.
    /// Must be conjugate-symmetric in n so reality is preserved.
    fn linear_multiplier(&self, u: &PeriodicField) -> Vec<Complex64>;
}

fn mode_scaled(u: &PeriodicField, m: &[Complex64]) -> PeriodicField {
    let mut out = u.clone();
    for (c, f) in out.coeffs_mut().iter_mut().zip(m) {
        *c *= *f;
    }
    out
}

/// Integrating factor RK4. The multiplier is frozen at the start of each
/// step, its exponential advances the linear part exactly, and classical
/// RK4 handles the remainder N(v) = X(v) - multiplier * v.
pub fn integrating_factor_rk4(
    split: &dyn SpectralSplit,
    y0: PeriodicField,
    config: &IntegratorConfig,
    observers: &[Observer<PeriodicField>],
) -> Result<Trajectory<PeriodicField>, SolverError> {
    let mut rec = Recorder::new(observers, config.store_states, config.record_every);
    let mut u = y0;
    let mut t = 0.0;
    let mut steps = 0usize;
    rec.record(t, &u, observers);
    while !end_reached(t, config.t_max) {
        if steps >= config.max_steps {
            return Err(SolverError::BudgetExhausted {
                t,
                max_steps: config.max_steps,
            });
        }
        let h = config.dt.min(config.t_max - t);
        let lam = split.linear_multiplier(&u);
        assert_eq!(
            lam.len(),
            u.coeffs().len(),
            "multiplier length must match the band"
        );
        let e_half: Vec<Complex64> = lam.iter().map(|l| (*l * (h / 2.0)).exp()).collect();
        let e_full: Vec<Complex64> = e_half.iter().map(|e| *e * *e).collect();
        let remainder = |v: &PeriodicField| -> Result<PeriodicField, SolverError> {
            let mut f = split
                .full_field(v)
                .map_err(|source| SolverError::Field { t, source })?;
            for (c, (l, vc)) in f.coeffs_mut().iter_mut().zip(lam.iter().zip(v.coeffs())) {
                *c -= *l * *vc;
            }
            Ok(f)
        };

        let mut a = remainder(&u)?;
        a.scale(h);
        let mut stage = u.clone();
        stage.scaled_add(0.5, &a);
        let mut b = remainder(&mode_scaled(&stage, &e_half))?;
        b.scale(h);
        let mut stage = mode_scaled(&u, &e_half);
        stage.scaled_add(0.5, &b);
        let mut c = remainder(&stage)?;
        c.scale(h);
        let mut stage = mode_scaled(&u, &e_full);
        stage.scaled_add(1.0, &mode_scaled(&c, &e_half));
        let mut d = remainder(&stage)?;
        d.scale(h);

        // u+ = E^2 u + (E^2 a + 2 E (b + c) + d) / 6
        let mut next = mode_scaled(&u, &e_full);
        next.scaled_add(1.0 / 6.0, &mode_scaled(&a, &e_full));
        let mut bc = b;
        bc.scaled_add(1.0, &c);
        next.scaled_add(1.0 / 3.0, &mode_scaled(&bc, &e_half));
        next.scaled_add(1.0 / 6.0, &d);
        next.symmetrize();
        u = next;
        t += h;
        steps += 1;
        if !u.all_finite() {
            return Err(SolverError::NonFinite { t });
        }
        if rec.due(steps) || end_reached(t, config.t_max) {
            rec.record(t, &u, observers);
        }
    }
    Ok(rec.finish(u, t, steps, 0))
}

/// Result of a step size refinement study.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Step sizes, largest first.
    pub dts: Vec<f64>,
    /// Final-state errors against a reference run at dts.min()/8.
    pub errors: Vec<f64>,
    /// Least squares slope of log error against log dt over the three
    /// finest steps.
    pub order: f64,
}

/// Run `run(dt)` at each step size plus a reference at min/8 and estimate
/// the convergence order from the finest three points.
pub fn convergence_study<S: State>(
    run: impl Fn(f64) -> Result<S, SolverError>,
    dts: &[f64],
) -> Result<ConvergenceReport, SolverError> {
    assert!(
        dts.len() >= 3,
        "need at least three step sizes to fit a slope"
    );
    let mut dts = dts.to_vec();
    dts.sort_by(|a, b| b.partial_cmp(a).expect("finite step sizes"));
    let reference = run(dts[dts.len() - 1] / 8.0)?;
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in &dts {
        let y = run(dt)?;
        let mut diff = y;
        diff.scaled_add(-1.0, &reference);
        errors.push(diff.norm());
    }
    let tail = 3;
    let xs: Vec<f64> = dts[dts.len() - tail..].iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors[errors.len() - tail..]
        .iter()
        .map(|e| e.max(1e-300).ln())
        .collect();
    let xm = xs.iter().sum::<f64>() / tail as f64;
    let ym = ys.iter().sum::<f64>() / tail as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    Ok(ConvergenceReport {
        dts,
        errors,
        order: num / den,
    })
}
