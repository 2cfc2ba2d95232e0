//! Hamiltonian, gradient, hybrid, and metriplectic flows for fields on the
//! circle.
//!
//! Functionals are written with the plain measure, H[u] = INT h(u) dtheta,
//! and carry their variational derivative w = dH/du defined by
//! DH(u).v = INT w v dtheta. The inner products in `circle_field` use the
//! normalized measure, so duality picks up the circumference:
//!
//!   DH(u).v = 2 pi <grad H, v>_metric
//!
//! for each of the three metrics (induced <.,.>, normal <.',.'>, Kahler
//! <., H .'>). The induced gradient is w itself; the normal and Kahler
//! gradients divide by n^2 and |n| and therefore exist only when w has zero
//! mean, which is reported as an error rather than projected away.
//!
//! Structures:
//!
//! * Gardner: u_t = (dH/du)', the KdV structure;
//! * Kahler-symplectic: u_t = the mean-free primitive of dH/du, whose
//!   quadratic-energy flow is exact translation u_t = -u';
//! * gradient descent u_t = -grad S in a chosen metric;
//! * hybrid: Hamiltonian plus descent, covering damped KdV variants;
//! * a bulk-coupled metriplectic flow u_t = u' + S u'' + Q with S = INT u
//!   and Q = INT u'^2: it conserves INT u^2/2 exactly while producing mass
//!   at rate 2 pi Q, and is parabolic only while S > 0;
//! * the symmetric flow u_t = -(dG/du)'' generated by the mass functional,
//!   which is the heat equation for G = -INT u^2/2.
//!
//! The triple bracket on functionals,
//! {E,F,G} = (INT G_u) INT F_u E_u' + (INT E_u) INT G_u F_u'
//!         + (INT F_u) INT E_u G_u',
//! is completely antisymmetric; freezing the mass functional in the middle
//! slot collapses it to 2 pi times the Gardner bracket INT F_u G_u'.

use crate::circle_field::{
    induced_inner, kahler_inner, next_fast_len, normal_inner, CircleFieldError, PeriodicField,
};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

/// Errors from gradient and flow evaluation.
#[derive(Debug, Error)]
pub enum PdeError {
    /// The metric cannot invert data with a mean component.
    #[error("functional derivative has mean {mean:.3e}; the {metric} metric inverts only zero-mean data")]
    MeanObstruction {
        /// Which metric raised the obstruction.
        metric: &'static str,
        /// The offending mean.
        mean: f64,
    },
    /// The bulk-coupled flow lost parabolicity.
    #[error("bulk mean {s:.3e} is not positive; the diffusive term would run backward")]
    BackwardDiffusion {
        /// Current value of S = INT u.
        s: f64,
    },
}

/// INT u^3 dtheta by quadrature on a grid fine enough to be alias-free for
/// band-limited u (anything past 3N requires at least that many points).
fn cubic_integral(u: &PeriodicField) -> f64 {
    let m = next_fast_len(4 * u.max_mode() + 4);
    let samples = u.to_samples(m).expect("padded grid holds the band");
    samples.iter().map(|s| s * s * s).sum::<f64>() * (2.0 * PI / m as f64)
}

/// Functional of the field with its variational derivative and the spectral
/// symbol of the derivative's linear part (used for integrating factors).
#[derive(Clone)]
pub struct Functional {
    name: String,
    value: Arc<dyn Fn(&PeriodicField) -> f64 + Send + Sync>,
    derivative: Arc<dyn Fn(&PeriodicField) -> PeriodicField + Send + Sync>,
    linear_symbol: Arc<dyn Fn(i64) -> Complex64 + Send + Sync>,
}

impl std::fmt::Debug for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Functional({})", self.name)
    }
}

impl Functional {
    /// Assemble from closures. `linear_symbol` must be the multiplier of the
    /// linear-in-u part of the derivative (zero for constant derivatives).
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(&PeriodicField) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(&PeriodicField) -> PeriodicField + Send + Sync + 'static,
        linear_symbol: impl Fn(i64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Functional {
            name: name.into(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            linear_symbol: Arc::new(linear_symbol),
        }
    }

    /// Mass INT u dtheta; derivative 1.
    pub fn mass() -> Self {
        Self::new(
            "mass",
            |u| u.integral(),
            |u| {
                let mut one = PeriodicField::zeros(u.max_mode());
                one.set_coeff(0, Complex64::new(1.0, 0.0));
                one
            },
            |_| Complex64::new(0.0, 0.0),
        )
    }

    /// Quadratic energy INT u^2/2 dtheta; derivative u.
    pub fn quadratic() -> Self {
        Self::new(
            "quadratic",
            |u| PI * induced_inner(u, u),
            |u| u.clone(),
            |_| Complex64::new(1.0, 0.0),
        )
    }

    /// Dirichlet energy INT u'^2/2 dtheta; derivative -u''.
    pub fn dirichlet() -> Self {
        Self::new(
            "dirichlet",
            |u| PI * normal_inner(u, u),
            |u| u.multiplier(|n| Complex64::new((n * n) as f64, 0.0)),
            |n| Complex64::new((n * n) as f64, 0.0),
        )
    }

    /// KdV energy INT u^3 + u'^2/2 dtheta; derivative 3u^2 - u''.
    pub fn kdv_energy() -> Self {
        Self::new(
            "kdv_energy",
            |u| cubic_integral(u) + PI * normal_inner(u, u),
            |u| {
                u.pointwise_product(u)
                    .scaled(3.0)
                    .add(&u.multiplier(|n| Complex64::new((n * n) as f64, 0.0)))
            },
            |n| Complex64::new((n * n) as f64, 0.0),
        )
    }

    /// Deep-water energy INT u (-d^2)^(1/2) u / 2 + u^3/3 dtheta;
    /// derivative H u' + u^2.
    pub fn bo_energy() -> Self {
        Self::new(
            "bo_energy",
            |u| PI * kahler_inner(u, u) + cubic_integral(u) / 3.0,
            |u| u.sqrt_laplacian().add(&u.pointwise_product(u)),
            |n| Complex64::new(n.unsigned_abs() as f64, 0.0),
        )
    }

    /// Weighted mass INT u w dtheta for a fixed weight; derivative w. With a
    /// theta-dependent weight this breaks translation invariance, which is
    /// what makes triple bracket tests nondegenerate.
    pub fn weighted_mass(name: impl Into<String>, w: PeriodicField) -> Self {
        let w2 = w.clone();
        Self::new(
            name,
            move |u| 2.0 * PI * induced_inner(u, &w),
            move |_| w2.clone(),
            |_| Complex64::new(0.0, 0.0),
        )
    }

    /// The functional scaled by a constant.
    pub fn scaled(&self, factor: f64) -> Self {
        let value = self.value.clone();
        let derivative = self.derivative.clone();
        let symbol = self.linear_symbol.clone();
        Functional {
            name: format!("{}*{}", factor, self.name),
            value: Arc::new(move |u| factor * value(u)),
            derivative: Arc::new(move |u| derivative(u).scaled(factor)),
            linear_symbol: Arc::new(move |n| factor * symbol(n)),
        }
    }

    /// Name given at construction.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// H[u].
    pub fn value(&self, u: &PeriodicField) -> f64 {
        (self.value)(u)
    }

    /// dH/du at u.
    pub fn derivative(&self, u: &PeriodicField) -> PeriodicField {
        (self.derivative)(u)
    }

    /// Spectral symbol of the linear part of dH/du.
    pub fn linear_symbol(&self, n: i64) -> Complex64 {
        (self.linear_symbol)(n)
    }
}

/// Riemannian pairing used for gradient flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMetric {
    /// <u, v>: gradient is the derivative itself.
    Induced,
    /// <u', v'>: gradient divides by n^2; needs zero-mean data.
    Normal,
    /// <u, H v'>: gradient divides by |n|; needs zero-mean data.
    Kahler,
}

impl GradientMetric {
    /// Metric name for error messages.
    pub fn name(&self) -> &'static str {
        match self {
            GradientMetric::Induced => "induced",
            GradientMetric::Normal => "normal",
            GradientMetric::Kahler => "kahler",
        }
    }

    /// Pairing of two fields under this metric (normalized measure).
    pub fn pairing(&self, u: &PeriodicField, v: &PeriodicField) -> f64 {
        match self {
            GradientMetric::Induced => induced_inner(u, v),
            GradientMetric::Normal => normal_inner(u, v),
            GradientMetric::Kahler => kahler_inner(u, v),
        }
    }

    /// Gradient from the variational derivative w, satisfying
    /// DH(u).v = 2 pi <grad, v> for all admissible v.
    pub fn gradient(&self, w: &PeriodicField) -> Result<PeriodicField, PdeError> {
        match self {
            GradientMetric::Induced => Ok(w.clone()),
            GradientMetric::Normal | GradientMetric::Kahler => {
                let mean = w.mean();
                if mean.abs() > 1e-12 * (1.0 + w.l2_norm()) {
                    return Err(PdeError::MeanObstruction {
                        metric: self.name(),
                        mean,
                    });
                }
                Ok(w.multiplier(|n| {
                    if n == 0 {
                        Complex64::new(0.0, 0.0)
                    } else if *self == GradientMetric::Normal {
                        Complex64::new(1.0 / (n * n) as f64, 0.0)
                    } else {
                        Complex64::new(1.0 / n.unsigned_abs() as f64, 0.0)
                    }
                }))
            }
        }
    }

    fn descent_multiplier(&self, symbol: Complex64, n: i64) -> Complex64 {
        match self {
            GradientMetric::Induced => -symbol,
            GradientMetric::Normal => {
                if n == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    -symbol / (n * n) as f64
                }
            }
            GradientMetric::Kahler => {
                if n == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    -symbol / n.unsigned_abs() as f64
                }
            }
        }
    }
}

/// Poisson structure for the Hamiltonian part of a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianStructure {
    /// u_t = (dH/du)'.
    Gardner,
    /// u_t = mean-free primitive of dH/du; defined on zero-mean derivatives.
    KahlerSymplectic,
}

impl HamiltonianStructure {
    fn apply(&self, w: &PeriodicField) -> Result<PeriodicField, PdeError> {
        match self {
            HamiltonianStructure::Gardner => Ok(w.derivative()),
            HamiltonianStructure::KahlerSymplectic => {
                w.antiderivative_mean_free().map_err(|e| match e {
                    CircleFieldError::NonZeroMean { mean } => PdeError::MeanObstruction {
                        metric: "kahler-symplectic",
                        mean,
                    },
                    other => unreachable!("mean-free primitive only rejects means: {other}"),
                })
            }
        }
    }

    fn multiplier(&self, symbol: Complex64, n: i64) -> Complex64 {
        match self {
            HamiltonianStructure::Gardner => Complex64::new(0.0, n as f64) * symbol,
            HamiltonianStructure::KahlerSymplectic => {
                if n == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    symbol / Complex64::new(0.0, n as f64)
                }
            }
        }
    }
}

/// A complete right-hand side u_t = X(u).
#[derive(Debug, Clone)]
pub enum FlowSpec {
    /// u_t = structure(dH/du).
    Hamiltonian {
        /// Poisson structure.
        structure: HamiltonianStructure,
        /// The conserved functional.
        hamiltonian: Functional,
    },
    /// u_t = -grad S.
    GradientDescent {
        /// Metric for the gradient.
        metric: GradientMetric,
        /// The dissipated functional.
        potential: Functional,
    },
    /// u_t = structure(dH/du) - grad S.
    Hybrid {
        /// Poisson structure of the conservative part.
        structure: HamiltonianStructure,
        /// Conserved by the structure part.
        hamiltonian: Functional,
        /// Metric for the descent part.
        metric: GradientMetric,
        /// Dissipated functional.
        entropy: Functional,
    },
    /// u_t = u' + S u'' + Q with S = INT u, Q = INT u'^2. Conserves
    /// INT u^2/2 exactly and produces mass at rate 2 pi Q; requires S > 0.
    GardnerMetriplectic,
    /// u_t = -(dG/du)'', the flow of the symmetric bracket generated by the
    /// mass functional. G = -quadratic gives the heat equation.
    SymmetricMass {
        /// Generating functional G.
        generator: Functional,
    },
}

impl FlowSpec {
    /// Spectral presets by tag.
    pub fn preset(tag: &str) -> Option<FlowSpec> {
        use FlowSpec::*;
        use GradientMetric::*;
        use HamiltonianStructure::*;
        Some(match tag {
            "kdv" => Hamiltonian {
                structure: Gardner,
                hamiltonian: Functional::kdv_energy(),
            },
            "kdv_linear_damping" => Hybrid {
                structure: Gardner,
                hamiltonian: Functional::kdv_energy(),
                metric: Normal,
                entropy: Functional::dirichlet(),
            },
            "kdv_viscous" => Hybrid {
                structure: Gardner,
                hamiltonian: Functional::kdv_energy(),
                metric: Induced,
                entropy: Functional::dirichlet(),
            },
            "kdv_landau" => Hybrid {
                structure: Gardner,
                hamiltonian: Functional::kdv_energy(),
                metric: Kahler,
                entropy: Functional::dirichlet(),
            },
            "advection_landau" => Hybrid {
                structure: KahlerSymplectic,
                hamiltonian: Functional::dirichlet(),
                metric: Kahler,
                entropy: Functional::dirichlet(),
            },
            "heat" => SymmetricMass {
                generator: Functional::quadratic().scaled(-1.0),
            },
            "gardner_metriplectic" => GardnerMetriplectic,
            "benjamin_ono" => Hamiltonian {
                structure: Gardner,
                hamiltonian: Functional::bo_energy(),
            },
            "translation" => Hamiltonian {
                structure: KahlerSymplectic,
                hamiltonian: Functional::dirichlet(),
            },
            _ => return None,
        })
    }

    /// Tags accepted by `preset`.
    pub fn preset_tags() -> &'static [&'static str] {
        &[
            "kdv",
            "kdv_linear_damping",
            "kdv_viscous",
            "kdv_landau",
            "advection_landau",
            "heat",
            "gardner_metriplectic",
            "benjamin_ono",
            "translation",
        ]
    }

    /// Human-readable name.
    pub fn name(&self) -> String {
        match self {
            FlowSpec::Hamiltonian {
                structure,
                hamiltonian,
            } => {
                format!("{structure:?} flow of {}", hamiltonian.name())
            }
            FlowSpec::GradientDescent { metric, potential } => {
                format!("{} descent of {}", metric.name(), potential.name())
            }
            FlowSpec::Hybrid {
                structure,
                hamiltonian,
                metric,
                entropy,
            } => format!(
                "{structure:?} flow of {} with {} descent of {}",
                hamiltonian.name(),
                metric.name(),
                entropy.name()
            ),
            FlowSpec::GardnerMetriplectic => "bulk-coupled metriplectic flow".to_string(),
            FlowSpec::SymmetricMass { generator } => {
                format!("mass-symmetric flow of {}", generator.name())
            }
        }
    }

    /// Evaluate the right-hand side at u.
    pub fn field(&self, u: &PeriodicField) -> Result<PeriodicField, PdeError> {
        match self {
            FlowSpec::Hamiltonian {
                structure,
                hamiltonian,
            } => structure.apply(&hamiltonian.derivative(u)),
            FlowSpec::GradientDescent { metric, potential } => {
                Ok(metric.gradient(&potential.derivative(u))?.scaled(-1.0))
            }
            FlowSpec::Hybrid {
                structure,
                hamiltonian,
                metric,
                entropy,
            } => {
                let conservative = structure.apply(&hamiltonian.derivative(u))?;
                let descent = metric.gradient(&entropy.derivative(u))?;
                Ok(conservative.add(&descent.scaled(-1.0)))
            }
            FlowSpec::GardnerMetriplectic => {
                let s = u.integral();
                if s <= 0.0 {
                    return Err(PdeError::BackwardDiffusion { s });
                }
                let q = 2.0 * PI * normal_inner(u, u);
                let mut out = u.derivative().add(&u.derivative().derivative().scaled(s));
                out.set_coeff(0, Complex64::new(q, 0.0));
                Ok(out)
            }
            FlowSpec::SymmetricMass { generator } => Ok(generator
                .derivative(u)
                .multiplier(|n| Complex64::new((n * n) as f64, 0.0))),
        }
    }

    /// Multiplier of the flow's linear part at the current state, suitable
    /// as the stiff half of an integrating factor split. Conjugate-symmetric
    /// in n, so the split preserves reality.
    pub fn linear_multiplier(&self, u: &PeriodicField) -> Vec<Complex64> {
        let nn = u.max_mode() as i64;
        let at = |n: i64| -> Complex64 {
            match self {
                FlowSpec::Hamiltonian {
                    structure,
                    hamiltonian,
                } => structure.multiplier(hamiltonian.linear_symbol(n), n),
                FlowSpec::GradientDescent { metric, potential } => {
                    metric.descent_multiplier(potential.linear_symbol(n), n)
                }
                FlowSpec::Hybrid {
                    structure,
                    hamiltonian,
                    metric,
                    entropy,
                } => {
                    structure.multiplier(hamiltonian.linear_symbol(n), n)
                        + metric.descent_multiplier(entropy.linear_symbol(n), n)
                }
                FlowSpec::GardnerMetriplectic => {
                    // u' + S u'' with S frozen at the step start; the bulk
                    // production term Q stays in the nonlinear remainder.
                    let s = u.integral();
                    Complex64::new(-s * (n * n) as f64, n as f64)
                }
                FlowSpec::SymmetricMass { generator } => {
                    Complex64::new((n * n) as f64, 0.0) * generator.linear_symbol(n)
                }
            }
        };
        (-nn..=nn).map(at).collect()
    }
}

impl crate::integrators::SpectralSplit for FlowSpec {
    fn full_field(
        &self,
        u: &PeriodicField,
    ) -> Result<PeriodicField, crate::integrators::FieldError> {
        self.field(u).map_err(crate::integrators::FieldError::new)
    }

    fn linear_multiplier(&self, u: &PeriodicField) -> Vec<Complex64> {
        FlowSpec::linear_multiplier(self, u)
    }
}

/// Gardner bracket {F,G} = INT (dF/du) (dG/du)' dtheta.
pub fn gardner_bracket(f: &Functional, g: &Functional, u: &PeriodicField) -> f64 {
    let fu = f.derivative(u);
    let gu = g.derivative(u);
    fu.pointwise_product(&gu.derivative()).integral()
}

/// Completely antisymmetric triple bracket on functionals:
/// {E,F,G} = (INT G_u) INT F_u E_u' + (INT E_u) INT G_u F_u'
///         + (INT F_u) INT E_u G_u'.
pub fn triple_bracket(e: &Functional, f: &Functional, g: &Functional, u: &PeriodicField) -> f64 {
    let eu = e.derivative(u);
    let fu = f.derivative(u);
    let gu = g.derivative(u);
    let beta =
        |a: &PeriodicField, b: &PeriodicField| a.pointwise_product(&b.derivative()).integral();
    gu.integral() * beta(&fu, &eu) + eu.integral() * beta(&gu, &fu) + fu.integral() * beta(&eu, &gu)
}
