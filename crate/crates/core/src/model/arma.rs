//! ARMA frequency-noise filter and the wrapped-phase state it drives.
//!
//! The filter is
//!
//! ```text
//!          1 + Σ b_k z^-k
//! H(z) = ------------------ ,  k = 1..N
//!          1 - Σ a_k z^-k
//! ```
//!
//! realised as a shift register `ω` with feedback taps `a` and forward taps `b`.
//! The state is `s_k = (φ_k, ω_{k-1}, …, ω_{k-N})` and evolves as
//!
//! ```text
//! ω_k     = v_k + Σ a_i ω_{k-i}
//! φ_{k+1} = [φ_k + ω_k + Σ b_i ω_{k-i}] mod 2π
//! ```

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle::wrap_2pi;
use crate::error::{Error, Result};

/// One numerator factor `(1 - coeff · z^-delay)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroFactor {
    pub coeff: f64,
    pub delay: usize,
}

impl ZeroFactor {
    pub fn new(coeff: f64, delay: usize) -> Self {
        Self { coeff, delay }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmaSpec {
    a: Vec<f64>,
    b: Vec<f64>,
    gamma: f64,
}

impl ArmaSpec {
    /// Builds a spec from tap vectors; the shorter one is zero-padded.
    ///
    /// Rejects `N = 0`, `gamma <= 0` and any root of `1 - Σ a_k z^-k` with `|z| >= 1`.
    pub fn new(a: Vec<f64>, b: Vec<f64>, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let n = a.len().max(b.len());
        if n == 0 {
            return Err(Error::invalid(
                "order",
                "N must be at least 1; use ArmaSpec::wiener for H(z) = 1",
            ));
        }
        if a.iter().chain(&b).any(|t| !t.is_finite()) {
            return Err(Error::invalid("taps", "non-finite filter tap"));
        }
        let mut a = a;
        let mut b = b;
        a.resize(n, 0.0);
        b.resize(n, 0.0);
        let bad: Vec<Complex64> = denominator_roots(&a)
            .into_iter()
            .filter(|r| r.norm() >= 1.0)
            .collect();
        if !bad.is_empty() {
            return Err(Error::UnstableDenominator { roots: bad });
        }
        Ok(Self { a, b, gamma })
    }

    /// Expands `Π (1 - c z^-d) / Π (1 - α z^-1)` into tap vectors of common order
    /// `N = max(numerator degree, denominator degree)`.
    pub fn from_zero_pole(zeros: &[ZeroFactor], poles: &[f64], gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let bad: Vec<Complex64> = poles
            .iter()
            .filter(|p| !(p.abs() < 1.0))
            .map(|&p| Complex64::new(p, 0.0))
            .collect();
        if !bad.is_empty() {
            return Err(Error::UnstableDenominator { roots: bad });
        }
        if zeros.iter().any(|z| z.delay == 0) {
            return Err(Error::invalid("zeros", "zero factor delay must be at least 1"));
        }
        let mut num = vec![1.0];
        for z in zeros {
            num = poly_mul(&num, &monomial_factor(z.coeff, z.delay));
        }
        let mut den = vec![1.0];
        for &p in poles {
            den = poly_mul(&den, &[1.0, -p]);
        }
        let b = num[1..].to_vec();
        let a = den[1..].iter().map(|c| -c).collect();
        Self::new(a, b, gamma)
    }

    /// Random phase walk: `H(z) = 1` emulated with one all-zero tap.
    pub fn wiener(gamma: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![0.0], gamma)
    }

    /// The oscillator model `(1 - β1 z^-1)(1 - β2 z^-2) / (1 - α1 z^-1)` with
    /// `α1 = 0.9999`, `β1 = 0.9937`, `β2 = 0.7286`.
    pub fn sm_oscillator(gamma: f64) -> Result<Self> {
        Self::from_zero_pole(&SM_ZEROS, &SM_POLES, gamma)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }

    /// Register length `N`; the state has dimension `N + 1`.
    pub fn order(&self) -> usize {
        self.a.len()
    }

    pub fn state_dim(&self) -> usize {
        self.order() + 1
    }

    pub fn a_taps(&self) -> &[f64] {
        &self.a
    }

    pub fn b_taps(&self) -> &[f64] {
        &self.b
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// State transition matrix `F`:
    ///
    /// ```text
    /// [ 1        (a + b)^T        ]
    /// [ 0          a^T            ]
    /// [ 0_{N-1}  I_{N-1}  0_{N-1} ]
    /// ```
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut f = DMatrix::zeros(n + 1, n + 1);
        f[(0, 0)] = 1.0;
        for i in 0..n {
            f[(0, i + 1)] = self.a[i] + self.b[i];
            f[(1, i + 1)] = self.a[i];
        }
        for i in 2..=n {
            f[(i, i - 1)] = 1.0;
        }
        f
    }

    /// Stationary covariance of the register `(ω_{k-1}, …, ω_{k-N})`.
    ///
    /// Solves `P = A P A^T + γ² e1 e1^T` for the companion matrix `A` of the
    /// autoregressive part by the doubling iteration `P += A P A^T`, `A ← A²`.
    pub fn register_stationary_cov(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(0, i)] = self.a[i];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut p = DMatrix::zeros(n, n);
        p[(0, 0)] = self.gamma * self.gamma;
        for _ in 0..128 {
            let inc = &a * &p * a.transpose();
            p += &inc;
            a = &a * &a;
            if a.amax() < 1e-300 || inc.amax() <= 1e-17 * p.amax() {
                break;
            }
        }
        (&p + p.transpose()) * 0.5
    }

    /// Advances a state held in place: `phi` and the register slice (newest first).
    /// Returns the new wrapped phase.
    #[inline]
    pub fn advance(&self, phi: f64, register: &mut [f64], v: f64) -> f64 {
        let n = self.a.len();
        debug_assert_eq!(register.len(), n);
        let mut omega = v;
        let mut forward = 0.0;
        for i in 0..n {
            omega += self.a[i] * register[i];
            forward += self.b[i] * register[i];
        }
        register.copy_within(0..n - 1, 1);
        register[0] = omega;
        wrap_2pi(phi + omega + forward)
    }

    /// One state transition driven by innovation `v`.
    pub fn step_state(&self, s: &StateVector, v: f64) -> StateVector {
        let mut register = s.register.clone();
        let phi = self.advance(s.phi, &mut register, v);
        StateVector { phi, register }
    }

    /// The real `m` with `2mπ = φ_{k+1} - φ_k - ω_k - Σ b_i ω_{k-i}`; an integer
    /// for every transition produced by [`ArmaSpec::step_state`].
    pub fn modulo_offset(&self, s: &StateVector, next: &StateVector) -> f64 {
        let forward: f64 = self.b.iter().zip(&s.register).map(|(b, w)| b * w).sum();
        (next.phi - s.phi - next.register[0] - forward) / TAU
    }
}

pub const SM_POLES: [f64; 1] = [0.9999];
pub const SM_ZEROS: [ZeroFactor; 2] = [
    ZeroFactor {
        coeff: 0.9937,
        delay: 1,
    },
    ZeroFactor {
        coeff: 0.7286,
        delay: 2,
    },
];

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("gamma", format!("must be > 0, got {gamma}")))
    }
}

fn monomial_factor(c: f64, d: usize) -> Vec<f64> {
    let mut p = vec![0.0; d + 1];
    p[0] = 1.0;
    p[d] = -c;
    p
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            r[i + j] += a * b;
        }
    }
    r
}

/// Roots in `z` of `1 - Σ a_k z^-k`, i.e. eigenvalues of its companion matrix.
fn denominator_roots(a: &[f64]) -> Vec<Complex64> {
    let n = a.len();
    if a.iter().all(|&t| t == 0.0) {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(0, i)] = a[i];
    }
    for i in 1..n {
        c[(i, i - 1)] = 1.0;
    }
    c.complex_eigenvalues().iter().copied().collect()
}

/// Wrapped phase plus shift-register contents, newest first.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub phi: f64,
    pub register: Vec<f64>,
}

impl StateVector {
    pub fn new(phi: f64, register: Vec<f64>) -> Self {
        Self {
            phi: wrap_2pi(phi),
            register,
        }
    }

    pub fn dim(&self) -> usize {
        self.register.len() + 1
    }

    /// `(φ, ω_{k-1}, …, ω_{k-N})` as a column vector.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            std::iter::once(self.phi).chain(self.register.iter().copied()),
        )
    }
}
