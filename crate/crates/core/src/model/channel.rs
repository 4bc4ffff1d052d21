//! AWGN channel with multiplicative phase: `y = x e^{jφ} + w`, `w ~ CN(0, 1/snr)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::Constellation;
use crate::error::{Error, Result};

/// Linear symbol SNR (`Es/N0` with unit-energy inputs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    snr: f64,
}

impl ChannelParams {
    pub fn new(snr: f64) -> Result<Self> {
        if snr > 0.0 && snr.is_finite() {
            Ok(Self { snr })
        } else {
            Err(Error::invalid("snr", format!("must be > 0, got {snr}")))
        }
    }

    pub fn from_db(snr_db: f64) -> Result<Self> {
        Self::new(10f64.powf(snr_db / 10.0))
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// Two-dimensional noise variance `1/snr`.
    pub fn noise_var(&self) -> f64 {
        1.0 / self.snr
    }

    /// `log(snr/π)`, the log peak of the complex Gaussian density.
    #[inline]
    pub fn log_peak(&self) -> f64 {
        (self.snr / PI).ln()
    }
}

/// `log g_c(x e^{jφ}, 1/snr; y)`.
#[inline]
pub fn data_aided_log_likelihood(y: Complex64, x: Complex64, phi: f64, ch: &ChannelParams) -> f64 {
    let (s, c) = phi.sin_cos();
    let mean = x * Complex64::new(c, s);
    ch.log_peak() - ch.snr * (y - mean).norm_sqr()
}

/// `g_c(x e^{jφ}, 1/snr; y) = (snr/π) exp(-snr |y - x e^{jφ}|²)`.
pub fn data_aided_likelihood(y: Complex64, x: Complex64, phi: f64, ch: &ChannelParams) -> f64 {
    data_aided_log_likelihood(y, x, phi, ch).exp()
}

/// `log Σ_x p(x) g_c(x e^{jφ}, 1/snr; y)`.
pub fn blind_log_likelihood(
    y: Complex64,
    phi: f64,
    constellation: &Constellation,
    ch: &ChannelParams,
) -> f64 {
    let terms: Vec<f64> = constellation
        .points()
        .iter()
        .zip(constellation.log_priors())
        .map(|(&x, lp)| lp + data_aided_log_likelihood(y, x, phi, ch))
        .collect();
    crate::stats::log_sum_exp(&terms)
}

/// Blind channel transition probability `p(y | φ)`.
pub fn blind_likelihood(
    y: Complex64,
    phi: f64,
    constellation: &Constellation,
    ch: &ChannelParams,
) -> f64 {
    constellation
        .points()
        .iter()
        .zip(constellation.priors())
        .map(|(&x, p)| p * data_aided_likelihood(y, x, phi, ch))
        .sum()
}

/// Blind log-likelihood of one observation, precomputed for evaluation at many phases.
///
/// Uses `|y - x e^{jφ}|² = |y|² + |x|² - 2 Re(conj(y) x e^{jφ})`, so each phase costs
/// two multiply-adds and one `exp` per constellation point.
#[derive(Clone, Debug)]
pub struct BlindEvaluator {
    offset: Vec<f64>,
    rot: Vec<Complex64>,
    peak: f64,
}

impl BlindEvaluator {
    pub fn new(y: Complex64, constellation: &Constellation, ch: &ChannelParams) -> Self {
        let snr = ch.snr();
        let base = ch.log_peak() - snr * y.norm_sqr();
        let mut offset = Vec::with_capacity(constellation.len());
        let mut rot = Vec::with_capacity(constellation.len());
        for (x, lp) in constellation.points().iter().zip(constellation.log_priors()) {
            offset.push(base + lp - snr * x.norm_sqr());
            rot.push(2.0 * snr * y.conj() * x);
        }
        let peak = offset
            .iter()
            .zip(&rot)
            .map(|(o, r)| o + r.norm())
            .fold(f64::NEG_INFINITY, f64::max);
        Self { offset, rot, peak }
    }

    /// The largest single-symbol log-likelihood over all phases. The blind
    /// log-likelihood never exceeds it by more than `ln M`.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// `exp(log_at(cos, sin) - peak())`, computed without a logarithm.
    #[inline]
    pub fn relative_at(&self, cos: f64, sin: f64) -> f64 {
        let mut acc = 0.0;
        for (o, r) in self.offset.iter().zip(&self.rot) {
            acc += (o - self.peak + r.re * cos - r.im * sin).exp();
        }
        acc
    }

    /// Log-likelihood at the phase with the given cosine and sine.
    #[inline]
    pub fn log_at(&self, cos: f64, sin: f64) -> f64 {
        let term = |i: usize| self.offset[i] + self.rot[i].re * cos - self.rot[i].im * sin;
        let mut m = f64::NEG_INFINITY;
        for i in 0..self.offset.len() {
            m = m.max(term(i));
        }
        let mut acc = 0.0;
        for i in 0..self.offset.len() {
            acc += (term(i) - m).exp();
        }
        m + acc.ln()
    }
}

/// Data-aided log-likelihood of one observation given its symbol.
#[derive(Clone, Copy, Debug)]
pub struct DataAidedEvaluator {
    offset: f64,
    rot: Complex64,
}

impl DataAidedEvaluator {
    pub fn new(y: Complex64, x: Complex64, ch: &ChannelParams) -> Self {
        let snr = ch.snr();
        Self {
            offset: ch.log_peak() - snr * (y.norm_sqr() + x.norm_sqr()),
            rot: 2.0 * snr * y.conj() * x,
        }
    }

    #[inline]
    pub fn log_at(&self, cos: f64, sin: f64) -> f64 {
        self.offset + self.rot.re * cos - self.rot.im * sin
    }

    /// The maximum of the log-likelihood over all phases.
    pub fn peak(&self) -> f64 {
        self.offset + self.rot.norm()
    }

    /// `exp(log_at(cos, sin) - peak())`.
    #[inline]
    pub fn relative_at(&self, cos: f64, sin: f64) -> f64 {
        (self.rot.re * cos - self.rot.im * sin - self.rot.norm()).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn data_aided_examples() {
        let ch = ChannelParams::new(1.0).unwrap();
        let x = Constellation::qam4().points()[1];
        let phi = 0.7;
        let y = x * Complex64::from_polar(1.0, phi);
        assert!((data_aided_likelihood(y, x, phi, &ch) - 1.0 / PI).abs() < 1e-15);
        // |y - x e^{jφ}|² = 1
        let y1 = y + Complex64::new(0.6, 0.8);
        assert!((data_aided_likelihood(y1, x, phi, &ch) - 0.11709966).abs() < 1e-8);
        let ch2 = ChannelParams::new(2.0).unwrap();
        let r = data_aided_likelihood(y, x, phi, &ch2) / data_aided_likelihood(y, x, phi, &ch);
        assert!((r - 2.0).abs() < 1e-14);
    }

    #[test]
    fn blind_examples() {
        let ch = ChannelParams::new(1.0).unwrap();
        let qam4 = Constellation::qam4();
        let v = blind_likelihood(Complex64::new(0.0, 0.0), 0.3, &qam4, &ch);
        assert!((v - (-1f64).exp() / PI).abs() < 1e-15);

        let y = Complex64::new(0.3, -0.9);
        for phi in [0.0, 0.4, 2.0, 5.5] {
            let a = blind_likelihood(y, phi, &qam4, &ch);
            let b = blind_likelihood(y, phi + FRAC_PI_2, &qam4, &ch);
            assert!((a - b).abs() < 1e-14 * a);
        }

        let one = Constellation::uniform(vec![Complex64::new(1.0, 0.0)]).unwrap();
        let a = blind_likelihood(y, 1.1, &one, &ch);
        let b = data_aided_likelihood(y, Complex64::new(1.0, 0.0), 1.1, &ch);
        assert!((a - b).abs() < 1e-15 * b);
    }

    #[test]
    fn evaluators_agree_with_direct_forms() {
        let ch = ChannelParams::from_db(7.0).unwrap();
        let c = Constellation::qam16();
        let y = Complex64::new(-0.4, 0.75);
        let x = c.points()[5];
        for phi in [0.1, 1.9, 4.0] {
            let (s, co) = f64::sin_cos(phi);
            let d = DataAidedEvaluator::new(y, x, &ch).log_at(co, s);
            assert!((d - data_aided_log_likelihood(y, x, phi, &ch)).abs() < 1e-12);
            let direct: f64 = c
                .points()
                .iter()
                .zip(c.priors())
                .map(|(x, p)| p * data_aided_likelihood(y, *x, phi, &ch))
                .sum();
            let be = BlindEvaluator::new(y, &c, &ch);
            let b = be.log_at(co, s).exp();
            assert!((b - direct).abs() < 1e-13 * direct);
            let rel = be.relative_at(co, s) * be.peak().exp();
            assert!((rel - direct).abs() < 1e-13 * direct);
            assert!(be.log_at(co, s) <= be.peak() + (c.len() as f64).ln());
            let de = DataAidedEvaluator::new(y, x, &ch);
            assert!((de.relative_at(co, s).ln() + de.peak() - d).abs() < 1e-12);
        }
    }

    #[test]
    fn db_conversion() {
        assert!((ChannelParams::from_db(10.0).unwrap().snr() - 10.0).abs() < 1e-12);
        assert!(ChannelParams::new(0.0).is_err());
    }
}
