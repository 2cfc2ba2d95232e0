//! Toda lattice flows in Lax form, plus the full symmetric extension and
//! its chopped characteristic invariants.
//!
//! States are real symmetric matrices L. Three isospectral fields appear:
//!
//! * `lax_field`: the tridiagonal lattice written through its component
//!   equations a_k' = a_k (b_{k+1} - b_k), b_k' = 2 (a_k^2 - a_{k-1}^2);
//! * `full_toda_field`: [pi(L), L] with pi(M) the skew part
//!   strictupper(M) - strictupper(M)^T, which restricts to `lax_field` on
//!   tridiagonal matrices but is defined for every symmetric L;
//! * `double_bracket_field`: [L, [L, N]] for a fixed symmetric target N.
//!   With N = diag(1..n) the commutator [L, N] scales entries by (j - i),
//!   so on tridiagonal matrices [pi(L), L] = [[L, N], L] = [L, [L, -N]]
//!   and the lattice is a double bracket flow. Along L' = [L, [L, N]] the
//!   alignment Tr(L N) grows at rate |[L, N]|_F^2, so the diagonal sorts
//!   ascending against diag(1..n); the lattice itself sorts descending.
//!
//! The chopped invariants come from deleting the first k rows and last k
//! columns of L - lambda I: the determinant is a degree n-2k polynomial
//! sum_r E_rk lambda^(n-2k-r), each E_rk is invariant along the full Toda
//! flow, and I_1k = E_1k / E_0k generates a dissipative correction
//! [L, [L, grad I_1k]] that preserves Tr(L^2)/2 while driving I_1k up at
//! rate |[L, grad I_1k]|_F^2. Coefficients are extracted by sampling the
//! determinant at small integers and solving the Vandermonde system, and
//! gradients go through cofactor matrices, so nothing requires L - lambda I
//! to be invertible.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Exponent bound beyond which exp overflows f64.
const EXP_ARG_LIMIT: f64 = 700.0;

/// Errors from Toda state handling and invariant extraction.
#[derive(Debug, Error)]
pub enum TodaError {
    /// Lattice sizes disagree.
    #[error("offdiagonal length {off} does not match diagonal length {diag} (need diag - 1)")]
    SizeMismatch {
        /// Diagonal entries supplied.
        diag: usize,
        /// Offdiagonal entries supplied.
        off: usize,
    },
    /// Flaschka or the physical field would overflow exp.
    #[error("coordinate spread produces exp({arg:.3e}), beyond f64 range")]
    CoordinateOverflow {
        /// The offending exponent.
        arg: f64,
    },
    /// The chop removes the whole spectral parameter.
    #[error("chop depth {k} leaves no invariant for size {n} (need n - 2k >= 1)")]
    ChopTooDeep {
        /// Matrix size.
        n: usize,
        /// Chop depth.
        k: usize,
    },
    /// Leading coefficient too small to divide by.
    #[error("leading chopped coefficient {value:.3e} is numerically zero at depth {k}")]
    SingularLeadingCoefficient {
        /// The coefficient E_0k.
        value: f64,
        /// Chop depth.
        k: usize,
    },
}

/// Tridiagonal lattice state: diagonal b_1..b_n and offdiagonal a_1..a_{n-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct TodaState {
    /// Diagonal entries b_k.
    pub diagonal: Vec<f64>,
    /// Offdiagonal entries a_k.
    pub offdiagonal: Vec<f64>,
}

impl TodaState {
    /// Build after checking the size relation.
    pub fn new(diagonal: Vec<f64>, offdiagonal: Vec<f64>) -> Result<Self, TodaError> {
        if diagonal.is_empty() || offdiagonal.len() + 1 != diagonal.len() {
            return Err(TodaError::SizeMismatch {
                diag: diagonal.len(),
                off: offdiagonal.len(),
            });
        }
        Ok(TodaState {
            diagonal,
            offdiagonal,
        })
    }

    /// Seeded generic state: b_k uniform in [-1, 1), a_k uniform in
    /// [0.3, 1.0) so the matrix is irreducible with well separated spectrum.
    pub fn seeded(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let diagonal = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let offdiagonal = (0..n.saturating_sub(1))
            .map(|_| rng.gen_range(0.3..1.0))
            .collect();
        TodaState {
            diagonal,
            offdiagonal,
        }
    }

    /// The symmetric tridiagonal matrix with these entries.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.diagonal.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, &b) in self.diagonal.iter().enumerate() {
            m[(k, k)] = b;
        }
        for (k, &a) in self.offdiagonal.iter().enumerate() {
            m[(k, k + 1)] = a;
            m[(k + 1, k)] = a;
        }
        m
    }

    /// Read the tridiagonal part of a square matrix back into lattice form.
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        TodaState {
            diagonal: (0..n).map(|k| m[(k, k)]).collect(),
            offdiagonal: (0..n.saturating_sub(1)).map(|k| m[(k, k + 1)]).collect(),
        }
    }
}

/// Particle-side state: positions x_k and momenta y_k of the open lattice
/// with Hamiltonian sum y_k^2/2 + sum exp(x_k - x_{k+1}).
#[derive(Debug, Clone, PartialEq)]
pub struct TodaPhysicalState {
    /// Positions x_k.
    pub positions: Vec<f64>,
    /// Momenta y_k.
    pub momenta: Vec<f64>,
}

impl TodaPhysicalState {
    /// Build after checking the size relation.
    pub fn new(positions: Vec<f64>, momenta: Vec<f64>) -> Result<Self, TodaError> {
        if positions.is_empty() || positions.len() != momenta.len() {
            return Err(TodaError::SizeMismatch {
                diag: positions.len(),
                off: momenta.len(),
            });
        }
        Ok(TodaPhysicalState { positions, momenta })
    }

    /// Physical Hamiltonian sum y_k^2/2 + sum exp(x_k - x_{k+1}), which
    /// equals 2 Tr L^2 of the Flaschka image.
    pub fn hamiltonian(&self) -> f64 {
        let kinetic: f64 = self.momenta.iter().map(|y| y * y / 2.0).sum();
        let potential: f64 = self.positions.windows(2).map(|w| (w[0] - w[1]).exp()).sum();
        kinetic + potential
    }

    /// Flaschka map a_k = exp((x_k - x_{k+1})/2)/2, b_k = -y_k/2.
    pub fn flaschka(&self) -> Result<TodaState, TodaError> {
        let mut offdiagonal = Vec::with_capacity(self.positions.len() - 1);
        for w in self.positions.windows(2) {
            let arg = (w[0] - w[1]) / 2.0;
            if arg > EXP_ARG_LIMIT {
                return Err(TodaError::CoordinateOverflow { arg });
            }
            offdiagonal.push(0.5 * arg.exp());
        }
        let diagonal = self.momenta.iter().map(|y| -y / 2.0).collect();
        Ok(TodaState {
            diagonal,
            offdiagonal,
        })
    }

    /// Pack as a flat vector [x; y] for the integrators.
    pub fn packed(&self) -> DVector<f64> {
        let n = self.positions.len();
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.positions[i]
            } else {
                self.momenta[i - n]
            }
        })
    }

    /// Unpack from [x; y].
    pub fn from_packed(v: &DVector<f64>) -> Self {
        let n = v.len() / 2;
        TodaPhysicalState {
            positions: (0..n).map(|i| v[i]).collect(),
            momenta: (0..n).map(|i| v[n + i]).collect(),
        }
    }
}

/// Hamiltonian field of the open lattice on packed [x; y]:
/// x_k' = y_k, y_k' = exp(x_{k-1} - x_k) - exp(x_k - x_{k+1}).
pub fn physical_field(v: &DVector<f64>) -> Result<DVector<f64>, TodaError> {
    let n = v.len() / 2;
    let x = |k: usize| v[k];
    let mut spring = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n - 1 {
        let arg = x(k) - x(k + 1);
        if arg > EXP_ARG_LIMIT {
            return Err(TodaError::CoordinateOverflow { arg });
        }
        spring.push(arg.exp());
    }
    let mut out = DVector::zeros(2 * n);
    for k in 0..n {
        out[k] = v[n + k];
        let right = if k < n - 1 { spring[k] } else { 0.0 };
        let left = if k > 0 { spring[k - 1] } else { 0.0 };
        out[n + k] = left - right;
    }
    Ok(out)
}

/// Skew projection pi(M) = strictupper(M) - strictupper(M)^T.
pub fn skew_projection(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if j > i {
            m[(i, j)]
        } else if j < i {
            -m[(j, i)]
        } else {
            0.0
        }
    })
}

fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Lattice field through the component equations, reading a_k and b_k off
/// the tridiagonal part of L. Equals `full_toda_field` on tridiagonal input
/// but exercises an independent code path.
pub fn lax_field(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let a = |k: usize| l[(k, k + 1)];
    let b = |k: usize| l[(k, k)];
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let right = if k < n - 1 { a(k) * a(k) } else { 0.0 };
        let left = if k > 0 { a(k - 1) * a(k - 1) } else { 0.0 };
        out[(k, k)] = 2.0 * (right - left);
    }
    for k in 0..n - 1 {
        let da = a(k) * (b(k + 1) - b(k));
        out[(k, k + 1)] = da;
        out[(k + 1, k)] = da;
    }
    out
}

/// Full symmetric Toda field [pi(L), L].
pub fn full_toda_field(l: &DMatrix<f64>) -> DMatrix<f64> {
    commutator(&skew_projection(l), l)
}

/// Double bracket field [L, [L, N]] toward the symmetric target N.
pub fn double_bracket_field(l: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    commutator(l, &commutator(l, target))
}

/// The sorting target diag(1, 2, .., n).
pub fn diag_target(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { (i + 1) as f64 } else { 0.0 })
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
pub fn spectrum(l: &DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = l
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    eig
}

/// Chop sample points 0, 1, -1, 2, -2, ...
fn sample_points(count: usize) -> Vec<f64> {
    (0..count)
        .map(|s| {
            let half = s.div_ceil(2) as f64;
            if s % 2 == 1 {
                half
            } else {
                -half
            }
        })
        .collect()
}

/// Determinant of (L - lambda I) with the first k rows and last k columns
/// deleted.
fn chopped_det(l: &DMatrix<f64>, k: usize, lambda: f64) -> f64 {
    let n = l.nrows();
    let size = n - k;
    DMatrix::from_fn(size, size, |i, j| {
        l[(i + k, j)] - if i + k == j { lambda } else { 0.0 }
    })
    .determinant()
}

/// Cofactor matrix of a square matrix by explicit minors. Singular input is
/// fine; that is the point of avoiding the inverse.
fn cofactor_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |i, j| {
        let minor = m.clone().remove_row(i).remove_column(j).determinant();
        if (i + j) % 2 == 0 {
            minor
        } else {
            -minor
        }
    })
}

/// Vandermonde matrix for det(lambda_s) = sum_m E_m lambda_s^(d - m).
fn vandermonde(samples: &[f64], degree: usize) -> DMatrix<f64> {
    DMatrix::from_fn(samples.len(), degree + 1, |s, m| {
        samples[s].powi((degree - m) as i32)
    })
}

/// Coefficients E_0k..E_dk (leading first) of the chopped characteristic
/// polynomial at depth k, with d = n - 2k.
pub fn chopped_char_coeffs(l: &DMatrix<f64>, k: usize) -> Result<Vec<f64>, TodaError> {
    let n = l.nrows();
    if n < 2 * k + 1 || n == k {
        return Err(TodaError::ChopTooDeep { n, k });
    }
    let degree = n - 2 * k;
    let samples = sample_points(degree + 1);
    let dets = DVector::from_iterator(
        samples.len(),
        samples.iter().map(|&lam| chopped_det(l, k, lam)),
    );
    let v = vandermonde(&samples, degree);
    let coeffs = v
        .lu()
        .solve(&dets)
        .expect("Vandermonde at distinct points is invertible");
    Ok(coeffs.iter().copied().collect())
}

fn leading_coeff_gate(l: &DMatrix<f64>, k: usize, e0: f64) -> Result<(), TodaError> {
    let scale = (1.0 + l.norm()).powi(k as i32);
    if e0.abs() <= 1e-12 * scale {
        return Err(TodaError::SingularLeadingCoefficient { value: e0, k });
    }
    Ok(())
}

/// Invariant I_1k = E_1k / E_0k. At k = 0 this is -Tr L.
pub fn casimir_i1k(l: &DMatrix<f64>, k: usize) -> Result<f64, TodaError> {
    let n = l.nrows();
    if n < 2 * k + 1 {
        return Err(TodaError::ChopTooDeep { n, k });
    }
    let coeffs = chopped_char_coeffs(l, k)?;
    leading_coeff_gate(l, k, coeffs[0])?;
    Ok(coeffs[1] / coeffs[0])
}

/// Gradient of I_1k with respect to the symmetric matrix L, meaning
/// dI = Tr(grad . dL) for symmetric perturbations dL.
///
/// Per sample lambda the derivative of the chopped determinant with respect
/// to the free entry L_ab is the cofactor at position (a - k, b); the same
/// Vandermonde combination that produces E_0 and E_1 from the determinants
/// produces their gradients from the cofactor matrices, the quotient rule
/// gives the gradient of the ratio, and symmetrizing restricts it to
/// symmetric directions.
pub fn casimir_i1k_gradient(l: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>, TodaError> {
    let n = l.nrows();
    if n < 2 * k + 1 {
        return Err(TodaError::ChopTooDeep { n, k });
    }
    let degree = n - 2 * k;
    let samples = sample_points(degree + 1);
    let size = n - k;

    let mut dets = DVector::zeros(samples.len());
    let mut grads: Vec<DMatrix<f64>> = Vec::with_capacity(samples.len());
    for (s, &lam) in samples.iter().enumerate() {
        let chop = DMatrix::from_fn(size, size, |i, j| {
            l[(i + k, j)] - if i + k == j { lam } else { 0.0 }
        });
        dets[s] = chop.determinant();
        let cof = cofactor_matrix(&chop);
        let mut g = DMatrix::zeros(n, n);
        for i in 0..size {
            for j in 0..size {
                g[(i + k, j)] = cof[(i, j)];
            }
        }
        grads.push(g);
    }

    let v = vandermonde(&samples, degree);
    let v_inv = v
        .try_inverse()
        .expect("Vandermonde at distinct points is invertible");
    let combine = |row: usize| -> (f64, DMatrix<f64>) {
        let mut value = 0.0;
        let mut grad = DMatrix::zeros(n, n);
        for s in 0..samples.len() {
            let w = v_inv[(row, s)];
            value += w * dets[s];
            grad += w * &grads[s];
        }
        (value, grad)
    };
    let (e0, g0) = combine(0);
    let (e1, g1) = combine(1);
    leading_coeff_gate(l, k, e0)?;
    let free = (g1 * e0 - g0 * e1) / (e0 * e0);
    Ok(0.5 * (&free + free.transpose()))
}

/// Dissipative full Toda field [pi(L), L] + [L, [L, grad I_1k]].
///
/// Both terms have zero trace pairing with L, so Tr(L^2)/2 is conserved
/// exactly, while I_1k grows at rate |[L, grad I_1k]|_F^2: the Hamiltonian
/// part does not move the invariant and the correction climbs it.
pub fn dissipative_full_toda_field(l: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>, TodaError> {
    let grad = casimir_i1k_gradient(l, k)?;
    Ok(full_toda_field(l) + double_bracket_field(l, &grad))
}

/// Seeded dense symmetric matrix with entries uniform in [-1, 1).
pub fn seeded_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    0.5 * (&raw + raw.transpose())
}
