//! Extended Kalman filter for the phase state.
//!
//! The observation `y = x e^{jφ} + w` is handled as a two-dimensional real
//! measurement `(Re y, Im y)` with noise covariance `(1/(2 snr)) I₂`, linearized
//! about the predicted phase. The dynamics are linear apart from the modulo on
//! the phase, so prediction is exact moment propagation followed by wrapping the
//! phase mean. Covariance updates use the Joseph form.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;

use crate::angle::wrap_2pi;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianNd, ProcessCov};
use crate::model::{ArmaSpec, ChannelParams};

/// Prior variance of the phase at `k = 1`, where the phase itself is known.
pub const INITIAL_PHASE_VAR: f64 = 1e-4;

/// Filter moments after processing `k` observations.
#[derive(Clone, Debug, PartialEq)]
pub struct EkfState {
    pub moments: GaussianNd,
    pub k: usize,
}

/// Precomputed model matrices for the filter.
#[derive(Clone, Debug)]
pub struct Ekf {
    f: DMatrix<f64>,
    q: ProcessCov,
    register_cov: DMatrix<f64>,
}

impl Ekf {
    pub fn new(spec: &ArmaSpec) -> Self {
        Self {
            f: spec.transition_matrix(),
            q: ProcessCov::new(spec.state_dim(), spec.gamma()),
            register_cov: spec.register_stationary_cov(),
        }
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    /// Prior for `s_1`: mean `(φ₁, 0)`, phase variance [`INITIAL_PHASE_VAR`], and
    /// the stationary register covariance, uncorrelated with the phase.
    pub fn init(&self, phi1: f64) -> Result<EkfState> {
        let d = self.dim();
        let mut mean = DVector::zeros(d);
        mean[0] = wrap_2pi(phi1);
        let mut cov = DMatrix::zeros(d, d);
        cov[(0, 0)] = INITIAL_PHASE_VAR;
        cov.view_mut((1, 1), (d - 1, d - 1))
            .copy_from(&self.register_cov);
        Ok(EkfState {
            moments: GaussianNd::new(mean, cov)?,
            k: 0,
        })
    }

    /// Moment propagation through the transition, with the phase mean wrapped.
    pub fn predict(&self, state: &EkfState) -> Result<EkfState> {
        let mut m = state.moments.propagate(&self.f, &self.q)?;
        let mut mean = m.mean().clone();
        mean[0] = wrap_2pi(mean[0]);
        m = m.with_mean(mean);
        Ok(EkfState {
            moments: m,
            k: state.k,
        })
    }

    /// Measurement update with the known symbol `x` (Joseph form).
    pub fn update(
        &self,
        state: &EkfState,
        y: Complex64,
        x: Complex64,
        ch: &ChannelParams,
    ) -> Result<EkfState> {
        self.update_with(state, y, x, ch, CovUpdate::Joseph)
    }

    /// Measurement update with a chosen covariance form.
    pub fn update_with(
        &self,
        state: &EkfState,
        y: Complex64,
        x: Complex64,
        ch: &ChannelParams,
        form: CovUpdate,
    ) -> Result<EkfState> {
        if x.norm_sqr() == 0.0 {
            return Err(Error::invalid("x", "update needs a nonzero symbol"));
        }
        let d = self.dim();
        let mean = state.moments.mean();
        let p = state.moments.cov();
        let r = 0.5 * ch.noise_var();

        let pred = x * Complex64::from_polar(1.0, mean[0]);
        // dh/dφ; the measurement Jacobian is zero in every register column
        let h = Vector2::new(-pred.im, pred.re);
        let innovation = Vector2::new(y.re - pred.re, y.im - pred.im);

        let p0 = p.column(0).clone_owned();
        let s = h * h.transpose() * p[(0, 0)] + Matrix2::identity() * r;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::invalid("innovation covariance", "singular"))?;
        let gain_row = h.transpose() * s_inv;
        // K = P H^T S^{-1} = p0 (h^T S^{-1})
        let k = &p0 * gain_row;

        let mut new_mean = mean + &k * innovation;
        new_mean[0] = wrap_2pi(new_mean[0]);

        let kh = &k * h; // d x 1; K H = kh e_0^T
        let mut i_kh = DMatrix::<f64>::identity(d, d);
        for row in 0..d {
            i_kh[(row, 0)] -= kh[row];
        }
        let new_cov = match form {
            CovUpdate::Joseph => &i_kh * p * i_kh.transpose() + &k * k.transpose() * r,
            CovUpdate::Standard => &i_kh * p,
        };
        let new_cov = (&new_cov + new_cov.transpose()) * 0.5;
        Ok(EkfState {
            moments: GaussianNd::new(new_mean, new_cov)?,
            k: state.k + 1,
        })
    }

    /// Predict then update.
    pub fn step(
        &self,
        state: &EkfState,
        y: Complex64,
        x: Complex64,
        ch: &ChannelParams,
    ) -> Result<EkfState> {
        self.update(&self.predict(state)?, y, x, ch)
    }
}

/// Covariance update form. The two agree in exact arithmetic; Joseph keeps the
/// result symmetric positive semi-definite under rounding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovUpdate {
    Joseph,
    /// `(I - K H) P`.
    Standard,
}
