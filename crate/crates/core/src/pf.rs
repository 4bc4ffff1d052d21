//! Bootstrap particle filter over the phase state.
//!
//! Particles are stored as flat arrays (phases, and registers particle-major) and
//! carry normalized log weights whose maximum is zero. The filter runs in one of
//! two observation modes: blind, where the likelihood averages over the input
//! prior, and data-aided, where the transmitted symbol is known. In the blind mode
//! the log normalizer of each weighting step is an unbiased-in-expectation
//! estimate of `log p(y_k | y^{k-1})`, which is how the output entropy is computed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::angle::wrap_2pi;
use crate::error::{Error, Result};
use crate::gaussian::GaussianNd;
use crate::model::{
    ArmaSpec, BlindEvaluator, ChannelParams, Constellation, DataAidedEvaluator, RegisterSampler,
};
use crate::seed::{self, StreamRng};

/// Resultant length below which the phase posterior is considered dispersed.
pub const MIN_RESULTANT: f64 = 1e-6;
/// Initial phase spread around the known `φ₁`, matching the Kalman prior.
const INITIAL_PHASE_SD: f64 = 1e-2;

/// How observations are weighted.
#[derive(Clone, Copy, Debug)]
pub enum Observation<'a> {
    /// `p(y | φ) = Σ_x p(x) g_c(x e^{jφ}, 1/snr; y)`.
    Blind(&'a Constellation),
    /// `g_c(x e^{jφ}, 1/snr; y)` with `x` known.
    DataAided(Complex64),
}

#[derive(Clone, Debug)]
pub struct ParticleSet {
    order: usize,
    phi: Vec<f64>,
    reg: Vec<f64>,
    /// Unnormalized linear weights, rescaled so the largest is one after each observation.
    w: Vec<f64>,
    next_w: Vec<f64>,
    sum_w: f64,
    sum_w2: f64,
    /// `(cos φ_i, sin φ_i)` from the last weighting, valid while `trig_valid`.
    cos: Vec<f64>,
    sin: Vec<f64>,
    trig_valid: bool,
    rng: StreamRng,
    steps: usize,
    resamples: usize,
    scratch_phi: Vec<f64>,
    scratch_reg: Vec<f64>,
    scratch_idx: Vec<usize>,
}

impl ParticleSet {
    /// `np` particles with phases near `φ₁` and registers from the stationary distribution.
    pub fn init(spec: &ArmaSpec, phi1: f64, np: usize, seed_value: u64) -> Result<Self> {
        if np < 2 {
            return Err(Error::invalid("np", format!("need at least 2 particles, got {np}")));
        }
        let order = spec.order();
        let mut rng = seed::stream(seed_value, "pf");
        let sampler = RegisterSampler::new(spec);
        let mut phi = Vec::with_capacity(np);
        let mut reg = vec![0.0; np * order];
        for i in 0..np {
            let z: f64 = rng.sample(StandardNormal);
            phi.push(wrap_2pi(phi1 + INITIAL_PHASE_SD * z));
            sampler.sample_into(&mut rng, &mut reg[i * order..(i + 1) * order]);
        }
        Ok(Self {
            order,
            phi,
            reg,
            w: vec![1.0; np],
            next_w: vec![0.0; np],
            sum_w: np as f64,
            sum_w2: np as f64,
            cos: vec![0.0; np],
            sin: vec![0.0; np],
            trig_valid: false,
            rng,
            steps: 0,
            resamples: 0,
            scratch_phi: vec![0.0; np],
            scratch_reg: vec![0.0; np * order],
            scratch_idx: vec![0; np],
        })
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Number of observations weighted so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of resampling events so far.
    pub fn resamples(&self) -> usize {
        self.resamples
    }

    pub fn phase(&self, i: usize) -> f64 {
        self.phi[i]
    }

    pub fn register(&self, i: usize) -> &[f64] {
        &self.reg[i * self.order..(i + 1) * self.order]
    }

    /// Weights normalized to sum to one.
    pub fn weights(&self) -> Vec<f64> {
        self.w.iter().map(|w| w / self.sum_w).collect()
    }

    /// Effective sample size `(Σ w)² / Σ w²`.
    pub fn ess(&self) -> f64 {
        self.sum_w * self.sum_w / self.sum_w2
    }

    /// Samples the transition for every particle.
    pub fn propagate(&mut self, spec: &ArmaSpec) {
        debug_assert_eq!(spec.order(), self.order);
        let gamma = spec.gamma();
        let order = self.order;
        for (phi, reg) in self.phi.iter_mut().zip(self.reg.chunks_exact_mut(order)) {
            let v = gamma * self.rng.sample::<f64, _>(StandardNormal);
            *phi = spec.advance(*phi, reg, v);
        }
        self.trig_valid = false;
    }

    fn refresh_trig(&mut self) {
        if !self.trig_valid {
            for ((c, s), phi) in self.cos.iter_mut().zip(self.sin.iter_mut()).zip(&self.phi) {
                (*s, *c) = phi.sin_cos();
            }
            self.trig_valid = true;
        }
    }

    /// Multiplies the weights by the observation likelihood and renormalizes.
    /// Returns `log Σ w_i p(y | s_i) - log Σ w_i`.
    ///
    /// Likelihoods are evaluated relative to their maximum over all phases, so
    /// the update needs no logarithms. If every product underflows the step is
    /// redone in the log domain.
    pub fn weight(&mut self, y: Complex64, obs: Observation<'_>, ch: &ChannelParams) -> Result<f64> {
        self.refresh_trig();
        self.steps += 1;
        let log_prev = self.sum_w.ln();
        let peak = match obs {
            Observation::Blind(c) => {
                let ev = BlindEvaluator::new(y, c, ch);
                self.scale_weights(|co, s| ev.relative_at(co, s));
                ev.peak()
            }
            Observation::DataAided(x) => {
                let ev = DataAidedEvaluator::new(y, x, ch);
                self.scale_weights(|co, s| ev.relative_at(co, s));
                ev.peak()
            }
        };
        let (max, sum) = weight_stats(&self.next_w);
        let log_total = if sum > 0.0 && sum.is_finite() {
            std::mem::swap(&mut self.w, &mut self.next_w);
            self.normalize(max);
            peak + sum.ln()
        } else {
            self.weight_log_domain(y, obs, ch)
        };
        let log_pred = log_total - log_prev;
        if !log_pred.is_finite() {
            return Err(Error::ParticleDepletion { step: self.steps });
        }
        Ok(log_pred)
    }

    #[inline]
    fn scale_weights(&mut self, lik: impl Fn(f64, f64) -> f64) {
        for (((n, w), c), s) in self.next_w.iter_mut().zip(&self.w).zip(&self.cos).zip(&self.sin) {
            *n = w * lik(*c, *s);
        }
    }

    fn normalize(&mut self, max: f64) {
        let inv = 1.0 / max;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for w in self.w.iter_mut() {
            *w *= inv;
            sum += *w;
            sum2 += *w * *w;
        }
        self.sum_w = sum;
        self.sum_w2 = sum2;
    }

    /// The weighting step in the log domain, for when every linear product
    /// underflowed. Returns `log Σ w_i p(y | s_i)`, or `-inf` if nothing survives.
    fn weight_log_domain(&mut self, y: Complex64, obs: Observation<'_>, ch: &ChannelParams) -> f64 {
        log::debug!("particle weights underflowed at step {}; using log domain", self.steps);
        let log_w: Vec<f64> = match obs {
            Observation::Blind(c) => {
                let ev = BlindEvaluator::new(y, c, ch);
                self.joint_log(|co, s| ev.log_at(co, s))
            }
            Observation::DataAided(x) => {
                let ev = DataAidedEvaluator::new(y, x, ch);
                self.joint_log(|co, s| ev.log_at(co, s))
            }
        };
        let total = crate::stats::log_sum_exp(&log_w);
        if !total.is_finite() {
            return total;
        }
        let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (w, l) in self.w.iter_mut().zip(&log_w) {
            *w = (l - m).exp();
        }
        self.normalize(1.0);
        total
    }

    fn joint_log(&self, ll: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.cos)
            .zip(&self.sin)
            .map(|((w, c), s)| w.ln() + ll(*c, *s))
            .collect()
    }

    /// Systematic resampling when the effective sample size drops below half
    /// the particle count. Returns whether resampling happened.
    pub fn resample_if_needed(&mut self) -> bool {
        if self.ess() < 0.5 * self.len() as f64 {
            self.resample();
            true
        } else {
            false
        }
    }

    /// Systematic resampling to equal weights.
    pub fn resample(&mut self) {
        let np = self.len();
        let step = self.sum_w / np as f64;
        let mut u = self.rng.random::<f64>() * step;
        let mut cum = 0.0;
        let mut j = 0;
        for i in 0..np {
            cum += self.w[i];
            while j < np && u < cum {
                self.scratch_idx[j] = i;
                j += 1;
                u += step;
            }
        }
        // rounding can leave the last few slots unfilled
        let last = np - 1;
        for slot in self.scratch_idx[j..].iter_mut() {
            *slot = last;
        }
        let order = self.order;
        for (dst, &src) in self.scratch_idx.iter().enumerate() {
            self.scratch_phi[dst] = self.phi[src];
            self.scratch_reg[dst * order..(dst + 1) * order]
                .copy_from_slice(&self.reg[src * order..(src + 1) * order]);
        }
        std::mem::swap(&mut self.phi, &mut self.scratch_phi);
        std::mem::swap(&mut self.reg, &mut self.scratch_reg);
        self.w.iter_mut().for_each(|w| *w = 1.0);
        self.sum_w = np as f64;
        self.sum_w2 = np as f64;
        self.trig_valid = false;
        self.resamples += 1;
    }

    /// Weights the first observation, whose state is the initial one.
    pub fn observe(&mut self, y: Complex64, obs: Observation<'_>, ch: &ChannelParams) -> Result<f64> {
        let lp = self.weight(y, obs, ch)?;
        self.resample_if_needed();
        Ok(lp)
    }

    /// Propagate, weight, and resample if needed. Returns the log predictive likelihood.
    pub fn step(
        &mut self,
        spec: &ArmaSpec,
        y: Complex64,
        obs: Observation<'_>,
        ch: &ChannelParams,
    ) -> Result<f64> {
        self.propagate(spec);
        self.observe(y, obs, ch)
    }

    /// Weighted mean and covariance of the particle states. The phase is
    /// centred on its circular mean so the moments describe the wrapped cloud.
    pub fn posterior_moments(&mut self) -> Result<GaussianNd> {
        self.refresh_trig();
        let d = self.order + 1;
        let inv = 1.0 / self.sum_w;
        let (mut c, mut s) = (0.0, 0.0);
        for ((w, cs), sn) in self.w.iter().zip(&self.cos).zip(&self.sin) {
            c += w * cs;
            s += w * sn;
        }
        let resultant = (c * c + s * s).sqrt() * inv;
        if !(resultant >= MIN_RESULTANT) {
            return Err(Error::DispersedPhase { resultant });
        }
        let centre = s.atan2(c);

        let mut mean = DVector::zeros(d);
        let mut row = vec![0.0; d];
        let fill = |i: usize, row: &mut [f64]| {
            row[0] = crate::angle::wrap_pi(self.phi[i] - centre);
            row[1..].copy_from_slice(&self.reg[i * self.order..(i + 1) * self.order]);
        };
        for i in 0..self.len() {
            let w = self.w[i] * inv;
            fill(i, &mut row);
            for a in 0..d {
                mean[a] += w * row[a];
            }
        }
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..self.len() {
            let w = self.w[i] * inv;
            if w == 0.0 {
                continue;
            }
            fill(i, &mut row);
            for a in 0..d {
                let da = row[a] - mean[a];
                for b in 0..=a {
                    cov[(a, b)] += w * da * (row[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                cov[(b, a)] = cov[(a, b)];
            }
        }
        mean[0] = wrap_2pi(mean[0] + centre);
        GaussianNd::new(mean, cov)
    }

    /// Weighted circular mean of the phases in `[0, 2π)`.
    pub fn circular_mean(&self) -> f64 {
        let (mut c, mut s) = (0.0, 0.0);
        for (w, phi) in self.w.iter().zip(&self.phi) {
            c += w * phi.cos();
            s += w * phi.sin();
        }
        wrap_2pi(s.atan2(c))
    }
}

fn weight_stats(w: &[f64]) -> (f64, f64) {
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for &x in w {
        max = max.max(x);
        sum += x;
    }
    (max, sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;
    use crate::model::generate_trace;

    #[test]
    fn init_and_weights() {
        let spec = ArmaSpec::sm_oscillator(0.05).unwrap();
        let p = ParticleSet::init(&spec, 1.0, 64, 3).unwrap();
        assert_eq!(p.len(), 64);
        assert_eq!(p.register(5).len(), 3);
        assert!((p.ess() - 64.0).abs() < 1e-12);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(ParticleSet::init(&spec, 1.0, 1, 3).is_err());
    }

    #[test]
    fn same_seed_same_particles() {
        let spec = ArmaSpec::wiener(0.1).unwrap();
        let c = Constellation::qam4();
        let ch = ChannelParams::from_db(6.0).unwrap();
        let t = generate_trace(&spec, &c, &ch, 50, 9).unwrap();
        let run = || {
            let mut p = ParticleSet::init(&spec, t.initial_phase(), 128, 4).unwrap();
            let mut acc = p.observe(t.y[0], Observation::Blind(&c), &ch).unwrap();
            for k in 1..t.len() {
                acc += p.step(&spec, t.y[k], Observation::Blind(&c), &ch).unwrap();
            }
            (acc, p.phi.clone())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn tracks_data_aided() {
        let spec = ArmaSpec::sm_oscillator(0.05).unwrap();
        let c = Constellation::qam4();
        let ch = ChannelParams::from_db(15.0).unwrap();
        let t = generate_trace(&spec, &c, &ch, 400, 21).unwrap();
        let mut p = ParticleSet::init(&spec, t.initial_phase(), 512, 1).unwrap();
        p.observe(t.y[0], Observation::DataAided(t.x[0]), &ch).unwrap();
        for k in 1..t.len() {
            p.step(&spec, t.y[k], Observation::DataAided(t.x[k]), &ch).unwrap();
        }
        let m = p.posterior_moments().unwrap();
        let err = crate::angle::wrap_pi(m.mean()[0] - t.states[t.len() - 1].phi);
        let sd = m.cov()[(0, 0)].sqrt();
        assert!(sd < 0.2 && err.abs() < 4.0 * sd, "{err} vs sd {sd}");
        assert!(p.resamples() > 0);
    }

    #[test]
    fn dispersed_cloud_is_reported() {
        let spec = ArmaSpec::wiener(0.1).unwrap();
        let mut p = ParticleSet::init(&spec, 0.0, 4, 1).unwrap();
        p.phi.copy_from_slice(&[0.0, TAU / 4.0, TAU / 2.0, 3.0 * TAU / 4.0]);
        p.trig_valid = false;
        assert!(matches!(
            p.posterior_moments(),
            Err(Error::DispersedPhase { .. })
        ));
    }
}
