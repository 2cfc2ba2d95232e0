//! Real scalar fields on the circle, represented by truncated Fourier series.
//!
//! A field u is stored as coefficients u_hat(n) for n = -N..N with the
//! reality constraint u_hat(-n) = conj(u_hat(n)), so u(theta) =
//! sum_n u_hat(n) exp(i n theta) is real. The sample grid is uniform on
//! [-pi, pi).
//!
//! Conventions used throughout this module:
//!
//! * inner products carry the normalized measure: <f,g> = (1/2pi) INT f g,
//!   so <f,g> = sum_n f_hat(n) conj(g_hat(n));
//! * `induced_inner` is that pairing, `normal_inner` weights by n^2
//!   (an H^1 seminorm), `kahler_inner` weights by |n| (an H^(1/2) form);
//! * the Hilbert transform is the multiplier -i sign(n);
//! * `antiderivative` matches the primitive INT_0^theta (it vanishes at
//!   theta = 0) and rejects fields with nonzero mean, since only zero-mean
//!   fields have periodic primitives.
//!
//! Nonlinear work (pointwise products) is done on a zero-padded grid large
//! enough that no aliased image lands inside the retained band, so products
//! followed by truncation are exact projections.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

/// Errors from circle-field operations.
#[derive(Debug, Error)]
pub enum CircleFieldError {
    /// A periodic primitive was requested for a field with nonzero mean.
    #[error("field has nonzero mean {mean:.3e}; no periodic antiderivative exists")]
    NonZeroMean {
        /// The offending mean value.
        mean: f64,
    },
    /// A sample grid cannot hold the requested band.
    #[error("grid of {got} points cannot resolve modes up to {max_mode} (need >= {need})")]
    GridTooCoarse {
        /// Points provided.
        got: usize,
        /// Maximum retained mode.
        max_mode: usize,
        /// Minimum points required.
        need: usize,
    },
    /// Empty sample input.
    #[error("empty sample grid")]
    EmptySamples,
    /// Mode triples violate the reality constraint.
    #[error("mode list violates reality: |u(-n) - conj(u(n))| = {defect:.3e} at n = {mode}")]
    RealityDefect {
        /// Mode where the defect was found.
        mode: i64,
        /// Size of the defect.
        defect: f64,
    },
}

/// Real field on the circle stored as Fourier coefficients n = -N..N.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    max_mode: usize,
    /// Index n + max_mode, length 2 * max_mode + 1.
    coeffs: Vec<Complex64>,
}

// Shared FFT plans keyed by (length, inverse). Arc<dyn Fft> is Send + Sync,
// so one cache serves concurrent harness runs.
type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Smallest 2^a 3^b 5^c length >= `n`, for friendly FFT sizes.
pub(crate) fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

impl PeriodicField {
    /// Zero field with the given band limit.
    pub fn zeros(max_mode: usize) -> Self {
        PeriodicField {
            max_mode,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * max_mode + 1],
        }
    }

    /// Build from explicit modes `(n, re, im)`. Each entry sets u_hat(n) and
    /// the conjugate at -n; the n = 0 entry keeps only its real part.
    pub fn from_modes(max_mode: usize, modes: &[(i64, f64, f64)]) -> Self {
        let mut f = Self::zeros(max_mode);
        for &(n, re, im) in modes {
            f.set_coeff(n, Complex64::new(re, im));
        }
        f
    }

    /// a cos(k theta): u_hat(+-k) = a/2.
    pub fn cosine(max_mode: usize, k: usize, amplitude: f64) -> Self {
        Self::from_modes(max_mode, &[(k as i64, amplitude / 2.0, 0.0)])
    }

    /// a sin(k theta): u_hat(k) = -i a/2.
    pub fn sine(max_mode: usize, k: usize, amplitude: f64) -> Self {
        Self::from_modes(max_mode, &[(k as i64, 0.0, -amplitude / 2.0)])
    }

    /// Sample a closure on a dense grid and project onto the band.
    pub fn from_fn(max_mode: usize, f: impl Fn(f64) -> f64) -> Self {
        let m = next_fast_len(4 * max_mode + 4);
        let samples: Vec<f64> = theta_grid(m).into_iter().map(f).collect();
        Self::from_samples_truncated(&samples, max_mode).expect("grid sized for the band")
    }

    /// Random zero-mean band-limited field. Modes 1..=excite get uniform
    /// coefficients scaled by amplitude/(1+n) so draws stay smooth.
    pub fn random_bandlimited(
        max_mode: usize,
        excite: usize,
        amplitude: f64,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let mut f = Self::zeros(max_mode);
        for n in 1..=excite.min(max_mode) {
            let scale = amplitude / (1.0 + n as f64);
            let re = rng.gen_range(-1.0..1.0) * scale;
            let im = rng.gen_range(-1.0..1.0) * scale;
            f.set_coeff(n as i64, Complex64::new(re, im));
        }
        f
    }

    /// Analyze uniform samples on [-pi, pi). The retained band is the widest
    /// the grid supports, N = floor((M-1)/2).
    pub fn from_samples(samples: &[f64]) -> Result<Self, CircleFieldError> {
        if samples.is_empty() {
            return Err(CircleFieldError::EmptySamples);
        }
        let max_mode = (samples.len() - 1) / 2;
        Self::from_samples_truncated(samples, max_mode)
    }

    /// Analyze uniform samples on [-pi, pi), retaining modes |n| <= max_mode.
    pub fn from_samples_truncated(
        samples: &[f64],
        max_mode: usize,
    ) -> Result<Self, CircleFieldError> {
        let m = samples.len();
        if m < 2 * max_mode + 1 {
            return Err(CircleFieldError::GridTooCoarse {
                got: m,
                max_mode,
                need: 2 * max_mode + 1,
            });
        }
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        fft_plan(m, false).process(&mut buf);
        let mut f = Self::zeros(max_mode);
        let mm = m as i64;
        for n in -(max_mode as i64)..=(max_mode as i64) {
            let bin = n.rem_euclid(mm) as usize;
            // Grid starts at -pi, so the analysis picks up the phase e^{i n pi}.
            let phase = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            f.coeffs[(n + max_mode as i64) as usize] = buf[bin] * (phase / m as f64);
        }
        // Real input gives conjugate symmetry up to rounding; enforce it exactly.
        f.symmetrize();
        Ok(f)
    }

    /// Synthesize on a uniform grid of `m >= 2N+1` points over [-pi, pi).
    pub fn to_samples(&self, m: usize) -> Result<Vec<f64>, CircleFieldError> {
        if m < 2 * self.max_mode + 1 {
            return Err(CircleFieldError::GridTooCoarse {
                got: m,
                max_mode: self.max_mode,
                need: 2 * self.max_mode + 1,
            });
        }
        let mut bins = vec![Complex64::new(0.0, 0.0); m];
        let mm = m as i64;
        for n in -(self.max_mode as i64)..=(self.max_mode as i64) {
            let bin = n.rem_euclid(mm) as usize;
            let phase = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            bins[bin] += self.coeff(n) * phase;
        }
        fft_plan(m, true).process(&mut bins);
        Ok(bins.into_iter().map(|c| c.re).collect())
    }

    /// Band limit N.
    pub fn max_mode(&self) -> usize {
        self.max_mode
    }

    /// u_hat(n); zero outside the band.
    pub fn coeff(&self, n: i64) -> Complex64 {
        let nn = n + self.max_mode as i64;
        if n.unsigned_abs() as usize > self.max_mode {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[nn as usize]
        }
    }

    /// Set u_hat(n) and the conjugate at -n. Panics outside the band.
    pub fn set_coeff(&mut self, n: i64, c: Complex64) {
        assert!(
            n.unsigned_abs() as usize <= self.max_mode,
            "mode {n} outside band N = {}",
            self.max_mode
        );
        let nn = self.max_mode as i64;
        if n == 0 {
            self.coeffs[nn as usize] = Complex64::new(c.re, 0.0);
        } else {
            self.coeffs[(n + nn) as usize] = c;
            self.coeffs[(-n + nn) as usize] = c.conj();
        }
    }

    /// Raw coefficient slice, index n + max_mode.
    pub(crate) fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Mutable raw coefficients for in-place integrator arithmetic.
    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub(crate) fn symmetrize(&mut self) {
        let nn = self.max_mode as i64;
        for n in 1..=nn {
            let avg =
                0.5 * (self.coeffs[(n + nn) as usize] + self.coeffs[(nn - n) as usize].conj());
            self.coeffs[(n + nn) as usize] = avg;
            self.coeffs[(nn - n) as usize] = avg.conj();
        }
        self.coeffs[nn as usize] = Complex64::new(self.coeffs[nn as usize].re, 0.0);
    }

    /// Largest reality violation max_n |u_hat(-n) - conj(u_hat(n))|.
    pub fn reality_defect(&self) -> f64 {
        let nn = self.max_mode as i64;
        (0..=nn)
            .map(|n| {
                (self.coeffs[(nn - n) as usize] - self.coeffs[(n + nn) as usize].conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Mean value u_hat(0).
    pub fn mean(&self) -> f64 {
        self.coeffs[self.max_mode].re
    }

    /// Copy with the band limit changed; truncation is spectral projection.
    pub fn project(&self, new_max: usize) -> PeriodicField {
        let mut out = PeriodicField::zeros(new_max);
        let keep = new_max.min(self.max_mode) as i64;
        for n in -keep..=keep {
            out.coeffs[(n + new_max as i64) as usize] = self.coeff(n);
        }
        out
    }

    /// Apply a multiplier m(n) mode by mode.
    pub fn multiplier(&self, m: impl Fn(i64) -> Complex64) -> PeriodicField {
        let mut out = self.clone();
        let nn = self.max_mode as i64;
        for n in -nn..=nn {
            out.coeffs[(n + nn) as usize] = self.coeff(n) * m(n);
        }
        out
    }

    /// d/dtheta: multiplier i n.
    pub fn derivative(&self) -> PeriodicField {
        self.multiplier(|n| Complex64::new(0.0, n as f64))
    }

    /// Hilbert transform: multiplier -i sign(n). Kills the mean.
    pub fn hilbert(&self) -> PeriodicField {
        self.multiplier(|n| Complex64::new(0.0, -(n.signum() as f64)))
    }

    /// (-d^2/dtheta^2)^(1/2): multiplier |n|. Equals H applied to u'.
    pub fn sqrt_laplacian(&self) -> PeriodicField {
        self.multiplier(|n| Complex64::new(n.unsigned_abs() as f64, 0.0))
    }

    /// Primitive INT_0^theta u, defined only for zero-mean fields. The
    /// integration constant makes the result vanish at theta = 0.
    pub fn antiderivative(&self) -> Result<PeriodicField, CircleFieldError> {
        let mean = self.mean();
        if mean.abs() > 1e-12 * (1.0 + self.l2_norm()) {
            return Err(CircleFieldError::NonZeroMean { mean });
        }
        let mut out = self.multiplier(|n| {
            if n == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / n as f64) // 1/(i n)
            }
        });
        // value at theta = 0 is sum of all coefficients; cancel it with the mean.
        let at_zero: Complex64 = out.coeffs.iter().sum();
        out.coeffs[self.max_mode] = -Complex64::new(at_zero.re, 0.0);
        Ok(out)
    }

    /// Primitive with zero mean instead of a zero at theta = 0. This is the
    /// inverse of d/dtheta on the zero-mean subspace.
    pub fn antiderivative_mean_free(&self) -> Result<PeriodicField, CircleFieldError> {
        let mean = self.mean();
        if mean.abs() > 1e-12 * (1.0 + self.l2_norm()) {
            return Err(CircleFieldError::NonZeroMean { mean });
        }
        Ok(self.multiplier(|n| {
            if n == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / n as f64)
            }
        }))
    }

    /// Dealiased pointwise product, truncated back to max(N_u, N_v).
    ///
    /// The work grid is large enough that every alias image of the true
    /// product (degree up to N_u + N_v) lands outside the retained band, so
    /// the result is the exact spectral projection of u*v.
    pub fn pointwise_product(&self, other: &PeriodicField) -> PeriodicField {
        let n_out = self.max_mode.max(other.max_mode);
        let m = next_fast_len(4 * n_out + 4);
        let a = self.to_samples(m).expect("padded grid holds the band");
        let b = other.to_samples(m).expect("padded grid holds the band");
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::from_samples_truncated(&prod, n_out).expect("padded grid holds the band")
    }

    /// l2 norm sqrt(<u,u>) in the normalized measure.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Plain integral INT u dtheta = 2 pi u_hat(0).
    pub fn integral(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.mean()
    }

    /// Sum u + v (bands promoted to the larger).
    pub fn add(&self, other: &PeriodicField) -> PeriodicField {
        let n = self.max_mode.max(other.max_mode);
        let mut out = self.project(n);
        let nn = n as i64;
        for k in -nn..=nn {
            let c = out.coeff(k) + other.coeff(k);
            out.coeffs[(k + nn) as usize] = c;
        }
        out
    }

    /// Scalar multiple a*u.
    pub fn scaled(&self, a: f64) -> PeriodicField {
        self.multiplier(|_| Complex64::new(a, 0.0))
    }

    /// Mode triples (n, Re u_hat(n), Im u_hat(n)) for every retained n.
    pub fn to_mode_triples(&self) -> Vec<(i64, f64, f64)> {
        let nn = self.max_mode as i64;
        (-nn..=nn)
            .map(|n| {
                let c = self.coeff(n);
                (n, c.re, c.im)
            })
            .collect()
    }

    /// Rebuild from mode triples, validating the reality constraint.
    pub fn from_mode_triples(triples: &[(i64, f64, f64)]) -> Result<Self, CircleFieldError> {
        let max_mode = triples
            .iter()
            .map(|t| t.0.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        let mut f = Self::zeros(max_mode);
        for &(n, re, im) in triples {
            f.coeffs[(n + max_mode as i64) as usize] = Complex64::new(re, im);
        }
        let defect = f.reality_defect();
        if defect > 1e-10 * (1.0 + f.l2_norm()) {
            let nn = max_mode as i64;
            let worst = (0..=nn)
                .max_by(|&a, &b| {
                    let da =
                        (f.coeffs[(nn - a) as usize] - f.coeffs[(a + nn) as usize].conj()).norm();
                    let db =
                        (f.coeffs[(nn - b) as usize] - f.coeffs[(b + nn) as usize].conj()).norm();
                    da.partial_cmp(&db).expect("finite defects")
                })
                .unwrap_or(0);
            return Err(CircleFieldError::RealityDefect {
                mode: worst,
                defect,
            });
        }
        f.symmetrize();
        Ok(f)
    }

    /// Write `theta,u` rows for a uniform grid of `m` points.
    pub fn write_grid_csv(&self, w: &mut impl Write, m: usize) -> std::io::Result<()> {
        let samples = self
            .to_samples(m)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
        writeln!(w, "theta,u")?;
        for (theta, u) in theta_grid(m).into_iter().zip(samples) {
            writeln!(w, "{:.16e},{:.16e}", theta, u)?;
        }
        Ok(())
    }
}

/// Uniform grid of `m` points on [-pi, pi).
pub fn theta_grid(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / m as f64)
        .collect()
}

/// Induced pairing b(u,v) = <u,v> = sum u_hat(n) conj(v_hat(n)).
pub fn induced_inner(u: &PeriodicField, v: &PeriodicField) -> f64 {
    let nn = u.max_mode().max(v.max_mode()) as i64;
    (-nn..=nn)
        .map(|n| (u.coeff(n) * v.coeff(n).conj()).re)
        .sum()
}

/// Normal (H^1) pairing b1(u,v) = <u',v'> = sum n^2 u_hat(n) conj(v_hat(n)).
pub fn normal_inner(u: &PeriodicField, v: &PeriodicField) -> f64 {
    let nn = u.max_mode().max(v.max_mode()) as i64;
    (-nn..=nn)
        .map(|n| (n * n) as f64 * (u.coeff(n) * v.coeff(n).conj()).re)
        .sum()
}

/// Kahler (H^(1/2)) pairing b2(u,v) = <u, H v'> = sum |n| u_hat(n) conj(v_hat(n)).
pub fn kahler_inner(u: &PeriodicField, v: &PeriodicField) -> f64 {
    let nn = u.max_mode().max(v.max_mode()) as i64;
    (-nn..=nn)
        .map(|n| n.unsigned_abs() as f64 * (u.coeff(n) * v.coeff(n).conj()).re)
        .sum()
}

/// Cocycle omega(u,v) = <u',v>. Antisymmetric; relates to the Kahler pairing
/// through omega(u,v) = b2(u, H v).
pub fn cocycle(u: &PeriodicField, v: &PeriodicField) -> f64 {
    induced_inner(&u.derivative(), v)
}

/// Weak form sigma(u1,u2) = <INT_0^theta u1, u2>. The first argument must
/// have zero mean; the vanish-at-zero integration constant participates in
/// the pairing, so sigma is sensitive to it by design.
pub fn zf_form(u1: &PeriodicField, u2: &PeriodicField) -> Result<f64, CircleFieldError> {
    Ok(induced_inner(&u1.antiderivative()?, u2))
}
