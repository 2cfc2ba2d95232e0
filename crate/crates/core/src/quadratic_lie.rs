//! Quadratic Lie algebras: a bracket given by structure constants together
//! with a symmetric, invariant, nondegenerate bilinear form kappa.
//!
//! The form turns differentials into gradients (grad f = kappa^-1 df) and
//! supports four derived objects used by the flows in this crate:
//!
//! * the completely antisymmetric triple bracket
//!   {f,g,h} = kappa(grad f, [grad g, grad h]);
//! * Lie-Poisson vector fields X_h = +-[grad h, xi], whose minus branch on
//!   so(3) is the rigid body equation;
//! * the symmetric bracket (f,g)_h = sigma kappa([grad f, grad h],
//!   [grad g, grad h]) and the metriplectic field
//!   xi' = [grad S, grad H] - sigma [grad H, [grad H, grad S]],
//!   where sigma is the sign making sigma*kappa positive on bracket
//!   directions (sampled at construction; absent when indefinite);
//! * the normal metric on adjoint orbits, evaluated by solving
//!   [L, X] = v with a minimum-norm least squares step and removing the
//!   kernel component of X against kappa.
//!
//! Construction validates antisymmetry, the Jacobi identity, and the
//! symmetry, invariance, and nondegeneracy of the form, so downstream code
//! can rely on the algebraic identities holding to rounding.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

/// Element of the algebra in the chosen basis.
pub type AlgebraElement = DVector<f64>;

/// Validation tolerance for structure constants and the form.
const STRUCTURE_TOL: f64 = 1e-12;
/// Relative residual above which a vector is rejected as orbit tangent.
const RANGE_RESIDUAL_TOL: f64 = 1e-8;
/// Random bracket directions sampled to classify the dissipative sign.
const SIGN_SAMPLES: usize = 64;

/// Errors from algebra construction and derived operations.
#[derive(Debug, Error)]
pub enum AlgebraError {
    /// c^p_ij != -c^p_ji somewhere.
    #[error("structure constants violate antisymmetry by {defect:.3e}")]
    NotAntisymmetric {
        /// Largest violation found.
        defect: f64,
    },
    /// The Jacobi identity fails on the basis.
    #[error("structure constants violate the Jacobi identity by {defect:.3e}")]
    JacobiFails {
        /// Largest violation found.
        defect: f64,
    },
    /// Structure constant array has the wrong length.
    #[error("structure data has wrong length: expected {expected}, got {got}")]
    BadShape {
        /// dim^3 for the given dimension.
        expected: usize,
        /// Length supplied.
        got: usize,
    },
    /// The form is not symmetric.
    #[error("invariant form is not symmetric (defect {defect:.3e})")]
    FormNotSymmetric {
        /// Largest asymmetry found.
        defect: f64,
    },
    /// The form is numerically singular.
    #[error("invariant form is numerically degenerate (sigma_min/sigma_max = {ratio:.3e})")]
    FormDegenerate {
        /// Condition ratio from the SVD.
        ratio: f64,
    },
    /// kappa([x,y],z) != kappa(x,[y,z]) somewhere on the basis.
    #[error("form is not ad-invariant (defect {defect:.3e})")]
    FormNotInvariant {
        /// Largest violation found.
        defect: f64,
    },
    /// The form takes both signs on bracket directions, so no dissipative
    /// sign exists and symmetric/metriplectic structures are unavailable.
    #[error("bracket directions are indefinite for this form; no dissipative sign exists")]
    IndefiniteDissipation,
    /// A vector handed to the normal metric is not tangent to the orbit.
    #[error("vector is not tangent to the adjoint orbit: relative residual {residual:.3e}")]
    NotInOrbitTangent {
        /// Residual of the least squares solve, relative to 1 + |v|.
        residual: f64,
    },
}

/// Scalar function on the algebra, optionally with an exact differential.
///
/// When no differential is supplied, a central finite difference with step
/// 1e-6 (1 + |xi|) stands in; that is accurate to ~1e-10 for smooth f and
/// exact for quadratics up to rounding.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    value: Arc<dyn Fn(&AlgebraElement) -> f64 + Send + Sync>,
    differential: Option<DifferentialFn>,
}

type DifferentialFn = Arc<dyn Fn(&AlgebraElement) -> AlgebraElement + Send + Sync>;

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ScalarField({}, {})",
            self.name,
            if self.differential.is_some() {
                "exact differential"
            } else {
                "finite differences"
            }
        )
    }
}

impl ScalarField {
    /// Field with an exact differential.
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(&AlgebraElement) -> f64 + Send + Sync + 'static,
        differential: impl Fn(&AlgebraElement) -> AlgebraElement + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            name: name.into(),
            value: Arc::new(value),
            differential: Some(Arc::new(differential)),
        }
    }

    /// Field whose differential is taken by finite differences.
    pub fn from_value(
        name: impl Into<String>,
        value: impl Fn(&AlgebraElement) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            name: name.into(),
            value: Arc::new(value),
            differential: None,
        }
    }

    /// f(xi) = c . xi.
    pub fn linear(c: AlgebraElement) -> Self {
        let c2 = c.clone();
        Self::new("linear", move |xi| c.dot(xi), move |_| c2.clone())
    }

    /// f(xi) = xi_i.
    pub fn coordinate(i: usize, dim: usize) -> Self {
        Self::new(
            format!("coordinate_{i}"),
            move |xi| xi[i],
            move |_| {
                let mut d = DVector::zeros(dim);
                d[i] = 1.0;
                d
            },
        )
    }

    /// f(xi) = xi^T A xi / 2 with differential (A + A^T) xi / 2.
    pub fn quadratic_form(a: DMatrix<f64>) -> Self {
        let sym = 0.5 * (&a + a.transpose());
        let sym2 = sym.clone();
        Self::new(
            "quadratic_form",
            move |xi| 0.5 * (xi.transpose() * &sym * xi)[(0, 0)],
            move |xi| &sym2 * xi,
        )
    }

    /// Rigid body kinetic energy sum_i Pi_i^2 / (2 I_i).
    pub fn rigid_body_energy(inertia: [f64; 3]) -> Self {
        Self::new(
            "rigid_body_energy",
            move |xi| (0..3).map(|i| xi[i] * xi[i] / (2.0 * inertia[i])).sum(),
            move |xi| DVector::from_fn(3, |i, _| xi[i] / inertia[i]),
        )
    }

    /// Pointwise product fg with the Leibniz differential when both factors
    /// carry exact differentials.
    pub fn product(f: &ScalarField, g: &ScalarField) -> Self {
        let name = format!("{}*{}", f.name, g.name);
        let (fv, gv) = (f.value.clone(), g.value.clone());
        match (&f.differential, &g.differential) {
            (Some(fd), Some(gd)) => {
                let (fv2, gv2) = (fv.clone(), gv.clone());
                let (fd, gd) = (fd.clone(), gd.clone());
                Self::new(
                    name,
                    move |xi| fv(xi) * gv(xi),
                    move |xi| fd(xi) * gv2(xi) + gd(xi) * fv2(xi),
                )
            }
            _ => Self::from_value(name, move |xi| fv(xi) * gv(xi)),
        }
    }

    /// Name given at construction.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// f(xi).
    pub fn value(&self, xi: &AlgebraElement) -> f64 {
        (self.value)(xi)
    }

    /// df at xi, exact or by central differences.
    pub fn differential(&self, xi: &AlgebraElement) -> AlgebraElement {
        if let Some(d) = &self.differential {
            return d(xi);
        }
        let h = 1e-6 * (1.0 + xi.norm());
        let mut d = DVector::zeros(xi.len());
        let mut probe = xi.clone();
        for i in 0..xi.len() {
            probe[i] = xi[i] + h;
            let fp = (self.value)(&probe);
            probe[i] = xi[i] - h;
            let fm = (self.value)(&probe);
            probe[i] = xi[i];
            d[i] = (fp - fm) / (2.0 * h);
        }
        d
    }
}

/// Sign choice for the Lie-Poisson bracket and its vector field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonSign {
    /// {f,g} = +kappa(xi, [grad f, grad g]).
    Plus,
    /// {f,g} = -kappa(xi, [grad f, grad g]).
    Minus,
}

impl PoissonSign {
    fn factor(self) -> f64 {
        match self {
            PoissonSign::Plus => 1.0,
            PoissonSign::Minus => -1.0,
        }
    }
}

/// A Lie algebra with structure constants and an invariant form.
#[derive(Debug, Clone)]
pub struct LieAlgebraSpec {
    name: String,
    dim: usize,
    /// c^p_ij at index (p*dim + i)*dim + j.
    structure: Vec<f64>,
    form: DMatrix<f64>,
    form_inv: DMatrix<f64>,
    /// Sign sigma with sigma*kappa >= 0 on bracket directions, when one exists.
    bracket_sign: Option<f64>,
}

impl LieAlgebraSpec {
    /// Validate and build. `structure[(p*dim + i)*dim + j]` holds c^p_ij in
    /// [e_i, e_j] = sum_p c^p_ij e_p.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        structure: Vec<f64>,
        form: DMatrix<f64>,
    ) -> Result<Self, AlgebraError> {
        let expected = dim * dim * dim;
        if structure.len() != expected {
            return Err(AlgebraError::BadShape {
                expected,
                got: structure.len(),
            });
        }
        let c = |p: usize, i: usize, j: usize| structure[(p * dim + i) * dim + j];

        let mut defect: f64 = 0.0;
        for p in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    defect = defect.max((c(p, i, j) + c(p, j, i)).abs());
                }
            }
        }
        if defect > STRUCTURE_TOL {
            return Err(AlgebraError::NotAntisymmetric { defect });
        }

        let mut defect: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for p in 0..dim {
                        // [[e_i,e_j],e_k] + [[e_j,e_k],e_i] + [[e_k,e_i],e_j] = 0
                        let mut s = 0.0;
                        for m in 0..dim {
                            s += c(m, i, j) * c(p, m, k)
                                + c(m, j, k) * c(p, m, i)
                                + c(m, k, i) * c(p, m, j);
                        }
                        defect = defect.max(s.abs());
                    }
                }
            }
        }
        if defect > STRUCTURE_TOL {
            return Err(AlgebraError::JacobiFails { defect });
        }

        let asym = (&form - form.transpose()).abs().max();
        if asym > STRUCTURE_TOL * (1.0 + form.abs().max()) {
            return Err(AlgebraError::FormNotSymmetric { defect: asym });
        }
        let svd = form.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax == 0.0 || smin <= STRUCTURE_TOL * smax {
            return Err(AlgebraError::FormDegenerate {
                ratio: if smax == 0.0 { 0.0 } else { smin / smax },
            });
        }

        let mut defect: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    // kappa([e_i,e_j], e_k) = kappa(e_i, [e_j,e_k])
                    let lhs: f64 = (0..dim).map(|p| c(p, i, j) * form[(p, k)]).sum();
                    let rhs: f64 = (0..dim).map(|p| c(p, j, k) * form[(i, p)]).sum();
                    defect = defect.max((lhs - rhs).abs());
                }
            }
        }
        if defect > STRUCTURE_TOL * (1.0 + form.abs().max()) {
            return Err(AlgebraError::FormNotInvariant { defect });
        }

        let form_inv = form
            .clone()
            .try_inverse()
            .expect("form passed the nondegeneracy gate, so it inverts");

        let mut spec = LieAlgebraSpec {
            name: name.into(),
            dim,
            structure,
            form,
            form_inv,
            bracket_sign: None,
        };
        spec.bracket_sign = spec.sample_bracket_sign();
        Ok(spec)
    }

    /// Classify the sign of kappa on bracket directions by sampling.
    fn sample_bracket_sign(&self) -> Option<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x516e);
        let scale = self.form.abs().max();
        let tol = 1e-9 * scale;
        let (mut saw_pos, mut saw_neg) = (false, false);
        let mut samples = 0;
        while samples < SIGN_SAMPLES {
            let x = DVector::from_fn(self.dim, |_, _| rng.gen_range(-1.0..1.0));
            let y = DVector::from_fn(self.dim, |_, _| rng.gen_range(-1.0..1.0));
            let v = self.bracket(&x, &y);
            let n = v.norm();
            if n < 1e-12 {
                continue;
            }
            samples += 1;
            let q = self.pairing(&v, &v) / (n * n);
            if q > tol {
                saw_pos = true;
            } else if q < -tol {
                saw_neg = true;
            }
        }
        match (saw_pos, saw_neg) {
            (true, false) => Some(1.0),
            (false, true) => Some(-1.0),
            _ => None,
        }
    }

    /// Rotation algebra so(3) with the dot product form; the bracket is the
    /// cross product.
    pub fn so3() -> Self {
        let dim = 3;
        let mut structure = vec![0.0; dim * dim * dim];
        // c^p_ij = epsilon_ijp
        for (i, j, p, s) in [
            (0, 1, 2, 1.0),
            (1, 0, 2, -1.0),
            (1, 2, 0, 1.0),
            (2, 1, 0, -1.0),
            (2, 0, 1, 1.0),
            (0, 2, 1, -1.0),
        ] {
            structure[(p * dim + i) * dim + j] = s;
        }
        Self::new("so3", dim, structure, DMatrix::identity(3, 3))
            .expect("so(3) satisfies every construction gate")
    }

    /// sl(2,R) in the basis (h, e, f) with its Killing form. The form is
    /// indefinite on bracket directions, so no dissipative sign exists.
    pub fn sl2_killing() -> Self {
        let dim = 3;
        let mut structure = vec![0.0; dim * dim * dim];
        // [h,e] = 2e, [h,f] = -2f, [e,f] = h with (h,e,f) = (e_0,e_1,e_2)
        for (p, i, j, s) in [
            (1, 0, 1, 2.0),
            (1, 1, 0, -2.0),
            (2, 0, 2, -2.0),
            (2, 2, 0, 2.0),
            (0, 1, 2, 1.0),
            (0, 2, 1, -1.0),
        ] {
            structure[(p * dim + i) * dim + j] = s;
        }
        let form = DMatrix::from_row_slice(3, 3, &[8.0, 0.0, 0.0, 0.0, 0.0, 4.0, 0.0, 4.0, 0.0]);
        Self::new("sl2_killing", dim, structure, form)
            .expect("sl(2) with its Killing form satisfies every construction gate")
    }

    /// Dimension of the algebra.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Name given at construction.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Invariant form kappa as a matrix.
    pub fn form(&self) -> &DMatrix<f64> {
        &self.form
    }

    /// The sampled dissipative sign, if the form is semidefinite on
    /// bracket directions.
    pub fn bracket_sign(&self) -> Option<f64> {
        self.bracket_sign
    }

    fn c(&self, p: usize, i: usize, j: usize) -> f64 {
        self.structure[(p * self.dim + i) * self.dim + j]
    }

    /// [x, y] from the structure constants.
    pub fn bracket(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        let mut out = DVector::zeros(self.dim);
        for p in 0..self.dim {
            let mut s = 0.0;
            for i in 0..self.dim {
                if x[i] == 0.0 {
                    continue;
                }
                for j in 0..self.dim {
                    s += self.c(p, i, j) * x[i] * y[j];
                }
            }
            out[p] = s;
        }
        out
    }

    /// kappa(x, y).
    pub fn pairing(&self, x: &AlgebraElement, y: &AlgebraElement) -> f64 {
        (x.transpose() * &self.form * y)[(0, 0)]
    }

    /// grad f = kappa^-1 df at xi.
    pub fn gradient(&self, f: &ScalarField, xi: &AlgebraElement) -> AlgebraElement {
        &self.form_inv * f.differential(xi)
    }

    /// Quadratic Casimir C2 = kappa(xi, xi)/2, whose gradient is xi itself.
    pub fn casimir_c2(&self) -> ScalarField {
        let form = self.form.clone();
        let form2 = self.form.clone();
        ScalarField::new(
            "casimir_c2",
            move |xi| 0.5 * (xi.transpose() * &form * xi)[(0, 0)],
            move |xi| &form2 * xi,
        )
    }

    /// Triple bracket {f,g,h} = kappa(grad f, [grad g, grad h]).
    pub fn triple_bracket(
        &self,
        f: &ScalarField,
        g: &ScalarField,
        h: &ScalarField,
        xi: &AlgebraElement,
    ) -> f64 {
        let gf = self.gradient(f, xi);
        let gg = self.gradient(g, xi);
        let gh = self.gradient(h, xi);
        self.pairing(&gf, &self.bracket(&gg, &gh))
    }

    /// Lie-Poisson bracket {f,g} = +-kappa(xi, [grad f, grad g]).
    pub fn lie_poisson_bracket(
        &self,
        f: &ScalarField,
        g: &ScalarField,
        xi: &AlgebraElement,
        sign: PoissonSign,
    ) -> f64 {
        let gf = self.gradient(f, xi);
        let gg = self.gradient(g, xi);
        sign.factor() * self.pairing(xi, &self.bracket(&gf, &gg))
    }

    /// Vector field of h: xi' = +-[grad h, xi]. The minus branch on so(3)
    /// with h the rigid body energy is Euler's equation Pi' = Pi x Omega.
    pub fn lie_poisson_field(
        &self,
        h: &ScalarField,
        xi: &AlgebraElement,
        sign: PoissonSign,
    ) -> AlgebraElement {
        let gh = self.gradient(h, xi);
        sign.factor() * self.bracket(&gh, xi)
    }

    /// Symmetric bracket (f,g)_h = sigma kappa([grad f, grad h], [grad g, grad h]).
    ///
    /// Positive semidefinite in f = g by the choice of sigma; errs when the
    /// form is indefinite on bracket directions.
    pub fn symmetric_bracket(
        &self,
        h: &ScalarField,
        f: &ScalarField,
        g: &ScalarField,
        xi: &AlgebraElement,
    ) -> Result<f64, AlgebraError> {
        let sigma = self
            .bracket_sign
            .ok_or(AlgebraError::IndefiniteDissipation)?;
        let gh = self.gradient(h, xi);
        let xf = self.bracket(&self.gradient(f, xi), &gh);
        let xg = self.bracket(&self.gradient(g, xi), &gh);
        Ok(sigma * self.pairing(&xf, &xg))
    }

    /// Metriplectic field xi' = [grad S, grad H] - sigma [grad H, [grad H, grad S]].
    ///
    /// Conserves H exactly (both terms pair to zero against grad H) and
    /// produces entropy: dS/dt = sigma kappa([grad H, grad S], [grad H, grad S]) >= 0.
    pub fn metriplectic_field(
        &self,
        h: &ScalarField,
        s: &ScalarField,
        xi: &AlgebraElement,
    ) -> Result<AlgebraElement, AlgebraError> {
        let sigma = self
            .bracket_sign
            .ok_or(AlgebraError::IndefiniteDissipation)?;
        let gh = self.gradient(h, xi);
        let gs = self.gradient(s, xi);
        let hamiltonian = self.bracket(&gs, &gh);
        let dissipative = self.bracket(&gh, &self.bracket(&gh, &gs));
        Ok(hamiltonian - sigma * dissipative)
    }

    /// Double bracket [l, [l, n]]. Along l' = [l, [l, n]] the pairing
    /// kappa(l, n) decreases at rate |[l, n]|^2 in the kappa norm.
    pub fn double_bracket_field(&self, l: &AlgebraElement, n: &AlgebraElement) -> AlgebraElement {
        self.bracket(l, &self.bracket(l, n))
    }

    /// Matrix of ad_l: (ad_l x)^p = sum_ij c^p_ij l^i x^j, i.e. x -> [l, x].
    pub fn ad_matrix(&self, l: &AlgebraElement) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |p, j| {
            (0..self.dim).map(|i| self.c(p, i, j) * l[i]).sum()
        })
    }

    /// Solve [l, x] = v for the kappa-clean representative x: the minimum
    /// norm least squares solution with its ad_l-kernel component removed
    /// against kappa. Errs when v is not tangent to the orbit through l.
    fn orbit_representative(
        &self,
        ad: &DMatrix<f64>,
        v: &AlgebraElement,
    ) -> Result<AlgebraElement, AlgebraError> {
        let svd = ad.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = 1e-12 * smax.max(1.0);
        let x = svd
            .solve(v, eps)
            .expect("SVD solve with computed factors cannot fail");
        let residual = (ad * &x - v).norm() / (1.0 + v.norm());
        if residual > RANGE_RESIDUAL_TOL {
            return Err(AlgebraError::NotInOrbitTangent { residual });
        }
        // Kernel basis: right singular vectors with vanishing singular value.
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        let kernel_cols: Vec<usize> = (0..self.dim)
            .filter(|&i| svd.singular_values[i] <= eps)
            .collect();
        if kernel_cols.is_empty() {
            return Ok(x);
        }
        let k = DMatrix::from_fn(self.dim, kernel_cols.len(), |r, c| v_t[(kernel_cols[c], r)]);
        // Remove the kernel component in the kappa sense: solve
        // (K^T kappa K) alpha = K^T kappa x and subtract K alpha.
        let gram = k.transpose() * &self.form * &k;
        let rhs = k.transpose() * &self.form * &x;
        let gsvd = gram.svd(true, true);
        let geps = 1e-12 * gsvd.singular_values.max().max(1.0);
        let alpha = gsvd
            .solve(&rhs, geps)
            .expect("SVD solve with computed factors cannot fail");
        Ok(x - k * alpha)
    }

    /// Normal metric on the adjoint orbit through l:
    /// g(v1, v2) = sigma kappa(x1, x2) where [l, x_i] = v_i and the x_i are
    /// kappa-orthogonal to ker(ad_l).
    pub fn normal_metric_pairing(
        &self,
        l: &AlgebraElement,
        v1: &AlgebraElement,
        v2: &AlgebraElement,
    ) -> Result<f64, AlgebraError> {
        let sigma = self
            .bracket_sign
            .ok_or(AlgebraError::IndefiniteDissipation)?;
        let ad = self.ad_matrix(l);
        let x1 = self.orbit_representative(&ad, v1)?;
        let x2 = self.orbit_representative(&ad, v2)?;
        Ok(sigma * self.pairing(&x1, &x2))
    }

    /// Gradient of h on the orbit in the normal metric:
    /// grad h = -sigma [l, [l, grad_kappa h]], so the steepest descent flow
    /// l' = -grad h is sigma [l, [l, grad_kappa h]].
    pub fn normal_metric_gradient(
        &self,
        h: &ScalarField,
        l: &AlgebraElement,
    ) -> Result<AlgebraElement, AlgebraError> {
        let sigma = self
            .bracket_sign
            .ok_or(AlgebraError::IndefiniteDissipation)?;
        let gh = self.gradient(h, l);
        Ok(-sigma * self.double_bracket_field(l, &gh))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn v3(a: f64, b: f64, c: f64) -> AlgebraElement {
        DVector::from_vec(vec![a, b, c])
    }

    #[test]
    fn so3_bracket_is_cross_product() {
        let g = LieAlgebraSpec::so3();
        let out = g.bracket(&v3(1.0, 2.0, 3.0), &v3(4.0, 5.0, 6.0));
        assert!((out - v3(-3.0, 6.0, -3.0)).norm() < TOL);
        assert_eq!(g.bracket_sign(), Some(1.0));
    }

    #[test]
    fn construction_gates_reject_bad_data() {
        // Antisymmetry: c^0_01 = c^0_10 = 1 in the (p * dim + i) * dim + j layout.
        let mut s = vec![0.0; 8];
        s[1] = 1.0; // p = 0, i = 0, j = 1
        s[2] = 1.0; // p = 0, i = 1, j = 0
        assert!(matches!(
            LieAlgebraSpec::new("bad", 2, s, DMatrix::identity(2, 2)),
            Err(AlgebraError::NotAntisymmetric { .. })
        ));

        // Jacobi: [e0,e1]=e0, [e1,e2]=e1, [e2,e0]=e2 has cyclic sum e0+e1+e2.
        let dim = 3;
        let mut s = vec![0.0; 27];
        for (p, i, j) in [(0, 0, 1), (1, 1, 2), (2, 2, 0)] {
            s[(p * dim + i) * dim + j] = 1.0;
            s[(p * dim + j) * dim + i] = -1.0;
        }
        assert!(matches!(
            LieAlgebraSpec::new("bad", 3, s, DMatrix::identity(3, 3)),
            Err(AlgebraError::JacobiFails { .. })
        ));

        // Degenerate form on valid so(3) structure.
        let so3 = LieAlgebraSpec::so3();
        let degenerate = DMatrix::from_diagonal(&v3(1.0, 1.0, 0.0));
        assert!(matches!(
            LieAlgebraSpec::new("bad", 3, so3.structure.clone(), degenerate),
            Err(AlgebraError::FormDegenerate { .. })
        ));

        // Non-invariant form: diag(1,1,2) breaks kappa([e0,e1],e2) = kappa(e0,[e1,e2]).
        let skew = DMatrix::from_diagonal(&v3(1.0, 1.0, 2.0));
        assert!(matches!(
            LieAlgebraSpec::new("bad", 3, so3.structure.clone(), skew),
            Err(AlgebraError::FormNotInvariant { .. })
        ));
    }

    #[test]
    fn gradient_inverts_the_form() {
        let so3 = LieAlgebraSpec::so3();
        let scaled = LieAlgebraSpec::new(
            "so3_2k",
            3,
            so3.structure.clone(),
            2.0 * DMatrix::identity(3, 3),
        )
        .unwrap();
        let f = ScalarField::coordinate(0, 3);
        let xi = v3(0.3, -0.7, 0.2);
        let grad = scaled.gradient(&f, &xi);
        assert!((grad - v3(0.5, 0.0, 0.0)).norm() < TOL);
        // Casimir gradient is xi for any valid form.
        let c2 = scaled.casimir_c2();
        let grad = scaled.gradient(&c2, &xi);
        assert!((grad - xi).norm() < TOL);
    }

    #[test]
    fn triple_bracket_pin_and_antisymmetry() {
        let g = LieAlgebraSpec::so3();
        let f = ScalarField::from_value("norm2_half", |xi| 0.5 * xi.norm_squared());
        let p1 = ScalarField::coordinate(0, 3);
        let p2 = ScalarField::coordinate(1, 3);
        let xi = v3(1.0, 2.0, 3.0);
        // grad f = Pi, [e0, e1] = e2, kappa(Pi, e2) = 3.
        let val = g.triple_bracket(&f, &p1, &p2, &xi);
        assert!(
            (val - 3.0).abs() < 1e-9,
            "finite difference gradient widens the tolerance"
        );
        // Complete antisymmetry on a sample of slot swaps.
        let swap = g.triple_bracket(&p1, &f, &p2, &xi);
        assert!((val + swap).abs() < 1e-9);
        let cycle = g.triple_bracket(&p2, &f, &p1, &xi);
        assert!((val - cycle).abs() < 1e-9);
        // The plus bracket is the triple bracket with C2 in the first slot.
        let c2 = g.casimir_c2();
        let lhs = g.triple_bracket(&c2, &p1, &p2, &xi);
        let rhs = g.lie_poisson_bracket(&p1, &p2, &xi, PoissonSign::Plus);
        assert!((lhs - rhs).abs() < TOL);
    }

    #[test]
    fn lie_poisson_minus_is_rigid_body() {
        let g = LieAlgebraSpec::so3();
        let h = ScalarField::rigid_body_energy([1.0, 2.0, 3.0]);
        let field = g.lie_poisson_field(&h, &v3(1.0, 1.0, 1.0), PoissonSign::Minus);
        assert!((field - v3(-1.0 / 6.0, 2.0 / 3.0, -0.5)).norm() < TOL);
        // Principal axes are equilibria.
        let eq = g.lie_poisson_field(&h, &v3(0.0, 1.0, 0.0), PoissonSign::Minus);
        assert!(eq.norm() < TOL);
    }

    #[test]
    fn symmetric_bracket_pins() {
        let g = LieAlgebraSpec::so3();
        let h = ScalarField::coordinate(2, 3);
        let f = ScalarField::coordinate(0, 3);
        let xi = v3(0.4, -0.2, 0.9);
        // [e0, e2] = -e1 so (f,f)_h = |e1|^2 = 1.
        let ff = g.symmetric_bracket(&h, &f, &f, &xi).unwrap();
        assert!((ff - 1.0).abs() < TOL);
        // (h,g)_h = 0 for every g: the generator slot kills itself.
        let hg = g.symmetric_bracket(&h, &h, &f, &xi).unwrap();
        assert!(hg.abs() < TOL);
        // Symmetric and positive on the diagonal.
        let p = ScalarField::linear(v3(0.3, 1.1, -0.5));
        let q = ScalarField::linear(v3(-0.8, 0.2, 0.6));
        let pq = g.symmetric_bracket(&h, &p, &q, &xi).unwrap();
        let qp = g.symmetric_bracket(&h, &q, &p, &xi).unwrap();
        assert!((pq - qp).abs() < TOL);
        assert!(g.symmetric_bracket(&h, &p, &p, &xi).unwrap() >= 0.0);
    }

    #[test]
    fn metriplectic_field_pin_and_exact_laws() {
        let g = LieAlgebraSpec::so3();
        let h = ScalarField::from_value("norm2_half", |xi| 0.5 * xi.norm_squared());
        let h_exact = ScalarField::new(
            "norm2_half",
            |xi: &AlgebraElement| 0.5 * xi.norm_squared(),
            |xi: &AlgebraElement| xi.clone(),
        );
        let s = ScalarField::linear(v3(0.0, 0.0, 1.0));
        let field = g
            .metriplectic_field(&h_exact, &s, &v3(1.0, 0.0, 0.0))
            .unwrap();
        assert!((field.clone() - v3(0.0, 1.0, 1.0)).norm() < TOL);
        // Energy conservation and entropy production hold pointwise.
        let xi = v3(0.7, -1.2, 0.4);
        let field = g.metriplectic_field(&h_exact, &s, &xi).unwrap();
        let gh = g.gradient(&h_exact, &xi);
        let gs = g.gradient(&s, &xi);
        assert!(g.pairing(&gh, &field).abs() < TOL);
        let ds = g.pairing(&gs, &field);
        let rate = g.bracket(&gh, &gs).norm_squared();
        assert!((ds - rate).abs() < 1e-12);
        // Finite-difference h gives the same field to FD accuracy.
        let field_fd = g.metriplectic_field(&h, &s, &xi).unwrap();
        assert!((field_fd - field).norm() < 1e-8);
    }

    #[test]
    fn double_bracket_descends_the_pairing() {
        let g = LieAlgebraSpec::so3();
        let l = v3(1.0, 0.0, 0.0);
        let n = v3(0.0, 0.0, 1.0);
        let field = g.double_bracket_field(&l, &n);
        assert!((field - v3(0.0, 0.0, -1.0)).norm() < TOL);
        // d/dt kappa(l, n) = kappa([l,[l,n]], n) = -|[l,n]|^2.
        let l = v3(0.9, -0.3, 0.5);
        let n = v3(0.2, 0.8, -0.1);
        let rate = g.pairing(&g.double_bracket_field(&l, &n), &n);
        assert!((rate + g.bracket(&l, &n).norm_squared()).abs() < TOL);
    }

    #[test]
    fn normal_metric_pairing_pin_and_rejection() {
        let g = LieAlgebraSpec::so3();
        let l = v3(0.0, 0.0, 1.0);
        // [l, e0] = e1, so the representative of e1 is e0 and g(e1,e1) = 1.
        let p = g
            .normal_metric_pairing(&l, &v3(0.0, 1.0, 0.0), &v3(0.0, 1.0, 0.0))
            .unwrap();
        assert!((p - 1.0).abs() < 1e-10);
        // e2 is normal to the orbit through e2: not a tangent vector.
        let bad = g.normal_metric_pairing(&l, &v3(0.0, 0.0, 1.0), &v3(0.0, 1.0, 0.0));
        assert!(matches!(bad, Err(AlgebraError::NotInOrbitTangent { .. })));
    }

    #[test]
    fn normal_metric_gradient_satisfies_the_defining_identity() {
        let g = LieAlgebraSpec::so3();
        let n = v3(0.3, -0.9, 0.6);
        let h = ScalarField::linear(n.clone());
        let l = v3(1.1, 0.4, -0.7);
        let grad = g.normal_metric_gradient(&h, &l).unwrap();
        // g(grad h, v) = dh(v) for tangent vectors v = [l, x].
        for x in [v3(0.2, 0.5, -0.3), v3(-1.0, 0.1, 0.8)] {
            let v = g.bracket(&l, &x);
            let lhs = g.normal_metric_pairing(&l, &grad, &v).unwrap();
            let rhs = g.pairing(&n, &v);
            assert!((lhs - rhs).abs() < 1e-9, "lhs {lhs} rhs {rhs}");
        }
        // Steepest descent flow l' = -grad h decreases h.
        let drop = g.pairing(&n, &(-1.0 * &grad));
        assert!(drop <= TOL);
    }

    #[test]
    fn indefinite_form_reports_no_sign() {
        let g = LieAlgebraSpec::sl2_killing();
        assert_eq!(g.bracket_sign(), None);
        let f = ScalarField::coordinate(0, 3);
        let err = g.symmetric_bracket(&f, &f, &f, &v3(1.0, 0.0, 0.0));
        assert!(matches!(err, Err(AlgebraError::IndefiniteDissipation)));
        // Flipping the form's sign on so(3) flips the sampled sign.
        let so3 = LieAlgebraSpec::so3();
        let flipped = LieAlgebraSpec::new(
            "so3_neg",
            3,
            so3.structure.clone(),
            -1.0 * DMatrix::identity(3, 3),
        )
        .unwrap();
        assert_eq!(flipped.bracket_sign(), Some(-1.0));
    }

    #[test]
    fn finite_difference_differential_matches_exact() {
        let f = ScalarField::from_value("cubic", |xi| xi[0].powi(3) + xi[0] * xi[1]);
        let xi = v3(0.7, -0.4, 0.0);
        let d = f.differential(&xi);
        let exact = v3(3.0 * 0.7 * 0.7 + -0.4, 0.7, 0.0);
        assert!((d - exact).norm() < 1e-9);
    }
}
