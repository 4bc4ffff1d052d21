//! Multivariate and phase-folded Gaussian densities.
//!
//! A [`FoldedGaussian`] is a Gaussian over `(φ, ω_{k-1}, …, ω_{k-N})` summed over
//! all `2π` translates of the phase coordinate:
//!
//! ```text
//! q(s) = Σ_l g(μ, Σ; φ + 2lπ, ω)
//! ```
//!
//! Evaluation factors the Gaussian as `g(ω) · g(φ | ω)`. The phase conditional is
//! a one-dimensional normal, so the sum over `l` is a wrapped normal in the
//! residual `φ - E[φ | ω]`. Narrow conditionals are summed directly, starting from
//! the dominant translate; wide ones use the dual Fourier series, which converges
//! in a handful of terms once the spread exceeds a couple of radians.

use std::f64::consts::{PI, TAU};

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::angle::wrap_pi;
use crate::error::{Error, Result};
use crate::model::StateVector;

/// Smallest eigenvalue tolerated before a covariance is rejected, relative to `max(1, max |Σ_ij|)`.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Asymmetry absorbed silently by re-symmetrization, relative to `max(1, max |Σ_ij|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;
/// Covariances whose smallest eigenvalue is below this get `REGULARIZATION · I` added before factoring.
pub const REGULARIZATION: f64 = 1e-14;
/// Cap on `|l|` in the direct translate sum.
pub const FOLD_CAP: i32 = 16;
/// Relative size of the next translate below which the direct sum stops.
const FOLD_TOL: f64 = 1e-12;
/// Conditional phase spread (radians) above which the Fourier series is used.
const FOURIER_SPREAD: f64 = 2.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianNd {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl GaussianNd {
    /// Validates shape, symmetry and positive semi-definiteness, then re-symmetrizes.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.nrows().max(cov.ncols()),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("gaussian", "non-finite mean or covariance"));
        }
        let scale = cov.amax().max(1.0);
        let asymmetry = (&cov - cov.transpose()).amax();
        if asymmetry > SYMMETRY_TOLERANCE * scale {
            return Err(Error::AsymmetricCovariance { asymmetry });
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let min_eigenvalue = if d == 0 {
            0.0
        } else {
            cov.symmetric_eigenvalues().min()
        };
        if min_eigenvalue < -PSD_TOLERANCE * scale {
            return Err(Error::NotPositiveSemiDefinite { min_eigenvalue });
        }
        Ok(Self {
            mean,
            cov,
            min_eigenvalue,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Returns a copy with the mean replaced.
    pub fn with_mean(&self, mean: DVector<f64>) -> Self {
        assert_eq!(mean.len(), self.dim());
        Self {
            mean,
            ..self.clone()
        }
    }

    /// `log g_d(μ, Σ; x)` in nats.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let f = Factor::new(self)?;
        let (maha, _, _) = f.whiten(x, &self.mean);
        Ok(-0.5 * maha - 0.5 * f.log_det - 0.5 * self.dim() as f64 * LN_2PI)
    }

    /// Predictive moments `(F μ, F Σ F^T + Q)`.
    pub fn propagate(&self, f: &DMatrix<f64>, q: &ProcessCov) -> Result<GaussianNd> {
        if f.nrows() != self.dim() || f.ncols() != self.dim() || q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: f.nrows(),
            });
        }
        let mean = f * &self.mean;
        let mut cov = f * &self.cov * f.transpose();
        q.add_to(&mut cov);
        let cov = (&cov + cov.transpose()) * 0.5;
        GaussianNd::new(mean, cov)
    }
}

/// Cholesky factor of the covariance with the phase coordinate ordered last and
/// every coordinate scaled to unit variance.
struct Factor {
    /// Permuted coordinate order: register coordinates, then the phase.
    order: Vec<usize>,
    scale: Vec<f64>,
    l: DMatrix<f64>,
    log_det: f64,
}

impl Factor {
    fn new(g: &GaussianNd) -> Result<Self> {
        let d = g.dim();
        let mut cov = g.cov.clone();
        if g.min_eigenvalue < REGULARIZATION {
            for i in 0..d {
                cov[(i, i)] += REGULARIZATION;
            }
        }
        let order: Vec<usize> = (1..d).chain(std::iter::once(0)).take(d).collect();
        let scale: Vec<f64> = order.iter().map(|&i| cov[(i, i)].sqrt()).collect();
        let corr = DMatrix::from_fn(d, d, |r, c| {
            cov[(order[r], order[c])] / (scale[r] * scale[c])
        });
        let chol = Cholesky::new(corr).ok_or(Error::NotPositiveSemiDefinite {
            min_eigenvalue: g.min_eigenvalue,
        })?;
        let l = chol.unpack();
        let log_det = 2.0
            * (0..d)
                .map(|i| scale[i].ln() + l[(i, i)].ln())
                .sum::<f64>();
        Ok(Self {
            order,
            scale,
            l,
            log_det,
        })
    }

    /// Forward substitution on `x - μ`. Returns the full Mahalanobis distance,
    /// the distance of the leading `d - 1` (register) coordinates, and the
    /// unwhitened phase residual `φ - E[φ | ω]` with its conditional standard deviation.
    fn whiten(&self, x: &DVector<f64>, mean: &DVector<f64>) -> (f64, f64, (f64, f64)) {
        let d = self.order.len();
        let mut z = vec![0.0; d];
        let mut maha_head = 0.0;
        let mut residual = 0.0;
        for r in 0..d {
            let u = (x[self.order[r]] - mean[self.order[r]]) / self.scale[r];
            let mut acc = u;
            for c in 0..r {
                acc -= self.l[(r, c)] * z[c];
            }
            if r == d - 1 {
                residual = acc;
            }
            z[r] = acc / self.l[(r, r)];
            if r < d - 1 {
                maha_head += z[r] * z[r];
            }
        }
        let last = z[d - 1];
        let phase_scale = self.scale[d - 1];
        (
            maha_head + last * last,
            maha_head,
            (residual * phase_scale, self.l[(d - 1, d - 1)] * phase_scale),
        )
    }

    /// `log det` of the leading `d - 1` block (the register marginal).
    fn head_log_det(&self) -> f64 {
        let d = self.order.len();
        2.0 * (0..d - 1)
            .map(|i| self.scale[i].ln() + self.l[(i, i)].ln())
            .sum::<f64>()
    }
}

/// Rank-one process covariance `Σ_v`: `γ²` on the top-left 2×2 block, zero elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessCov {
    dim: usize,
    gamma: f64,
}

impl ProcessCov {
    pub fn new(dim: usize, gamma: f64) -> Self {
        assert!(dim >= 2, "process covariance needs the phase and one register slot");
        Self { dim, gamma }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        self.add_to(&mut m);
        m
    }

    fn add_to(&self, m: &mut DMatrix<f64>) {
        let g2 = self.gamma * self.gamma;
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] += g2;
            }
        }
    }
}

/// Outcome of folded evaluation, for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FoldInfo {
    /// Number of translates summed (or Fourier terms when `fourier` is set).
    pub terms: usize,
    pub fourier: bool,
    /// Set when the direct sum hit [`FOLD_CAP`] before converging.
    pub capped: bool,
}

/// Gaussian over the state with its phase coordinate (index 0) wrapped modulo `2π`.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldedGaussian {
    base: GaussianNd,
}

impl FoldedGaussian {
    pub fn new(base: GaussianNd) -> Self {
        Self { base }
    }

    pub fn base(&self) -> &GaussianNd {
        &self.base
    }

    /// `log Σ_l g(μ, Σ; (φ + 2lπ, ω))` in nats.
    pub fn log_density(&self, s: &StateVector) -> Result<f64> {
        self.log_density_with_info(s).map(|(v, _)| v)
    }

    pub fn log_density_with_info(&self, s: &StateVector) -> Result<(f64, FoldInfo)> {
        let d = self.base.dim();
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.dim(),
            });
        }
        let f = Factor::new(&self.base)?;
        let (_, maha_head, (residual, spread)) = f.whiten(&s.to_vector(), &self.base.mean);
        let head = -0.5 * maha_head - 0.5 * f.head_log_det() - 0.5 * (d - 1) as f64 * LN_2PI;
        let (wrapped, info) = log_wrapped_normal(residual, spread);
        if info.capped {
            log::warn!("fold truncation cap reached (spread {spread}, residual {residual})");
        }
        Ok((head + wrapped, info))
    }
}

/// Log density of the wrapped normal `Σ_l N(δ + 2lπ; 0, s²)`.
pub fn log_wrapped_normal(delta: f64, s: f64) -> (f64, FoldInfo) {
    let delta = wrap_pi(delta);
    if s > FOURIER_SPREAD {
        // (1/2π) [1 + 2 Σ_k e^{-k² s²/2} cos(kδ)]
        let mut acc = 1.0;
        let mut k = 1usize;
        loop {
            let kf = k as f64;
            let damp = (-0.5 * kf * kf * s * s).exp();
            if damp < 1e-17 {
                break;
            }
            acc += 2.0 * damp * (kf * delta).cos();
            k += 1;
        }
        let info = FoldInfo {
            terms: k - 1,
            fourier: true,
            capped: false,
        };
        return (acc.ln() - TAU.ln(), info);
    }
    let inv = 0.5 / (s * s);
    let t0 = -delta * delta * inv;
    let mut acc = 1.0;
    let mut terms = 1;
    let mut capped = true;
    for l in 1..=FOLD_CAP {
        let shift = TAU * l as f64;
        let up = (-(delta + shift).powi(2) * inv - t0).exp();
        let down = (-(delta - shift).powi(2) * inv - t0).exp();
        acc += up + down;
        terms += 2;
        if up.max(down) < FOLD_TOL * acc {
            capped = false;
            break;
        }
    }
    let info = FoldInfo {
        terms,
        fourier: false,
        capped,
    };
    (t0 + acc.ln() - 0.5 * (2.0 * PI * s * s).ln(), info)
}
