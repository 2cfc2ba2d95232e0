//! Structure-preserving flows on quadratic Lie algebras and periodic fields.
//!
//! The library has two legs that share one numerical toolkit:
//!
//! * finite-dimensional systems on quadratic Lie algebras (Lie-Poisson,
//!   double-bracket, and metriplectic flows, with so(3) and the Toda
//!   lattice as the worked families), and
//! * infinite-dimensional flows on truncated Fourier fields over the
//!   circle (Gardner/KdV Hamiltonian dynamics, gradient flows in the
//!   induced, normal, and Kahler metrics, and hybrid conservative plus
//!   dissipative equations).
//!
//! Every flow exposes the conservation or production law that defines it,
//! and the integrators never project back onto invariants: observed drift
//! is the quality signal, not something to hide.

pub mod circle_field;
pub mod harness;
pub mod integrators;
pub mod pde_flows;
pub mod quadratic_lie;
pub mod toda;

pub use circle_field::{CircleFieldError, PeriodicField};
pub use harness::{run_experiment, ExperimentConfig, HarnessError, TrajectoryDoc};
pub use integrators::{
    convergence_study, integrate, integrating_factor_rk4, ConvergenceReport, FieldError,
    IntegratorConfig, Method, Observer, SolverError, SpectralSplit, State, Trajectory,
};
pub use pde_flows::{FlowSpec, Functional, GradientMetric, PdeError};
pub use quadratic_lie::{AlgebraElement, AlgebraError, LieAlgebraSpec, PoissonSign, ScalarField};
pub use toda::{TodaError, TodaPhysicalState, TodaState};
