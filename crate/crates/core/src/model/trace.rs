//! Joint realizations `(x_1..x_n, s_1..s_{n+1}, y_1..y_n)` of source, phase state and output.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ArmaSpec, ChannelParams, Constellation, StateVector};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug)]
pub struct Trace {
    /// Transmitted symbols.
    pub x: Vec<Complex64>,
    /// Constellation index of each symbol.
    pub symbols: Vec<usize>,
    /// States `s_1..s_{n+1}`.
    pub states: Vec<StateVector>,
    pub y: Vec<Complex64>,
    pub seed: u64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// The initial phase `φ_1`, which trackers are given.
    pub fn initial_phase(&self) -> f64 {
        self.states[0].phi
    }
}

/// Draws registers from the stationary distribution of the autoregressive part.
#[derive(Clone, Debug)]
pub struct RegisterSampler {
    root: DMatrix<f64>,
}

impl RegisterSampler {
    pub fn new(spec: &ArmaSpec) -> Self {
        let eig = SymmetricEigen::new(spec.register_stationary_cov());
        let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        Self {
            root: &eig.eigenvectors * scale,
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = out.len();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let r = &self.root * z;
        out.copy_from_slice(r.as_slice());
    }
}

/// Simulates `n` channel uses. The result is a pure function of the arguments.
///
/// The initial phase is uniform on `[0, 2π)` and the register starts in its
/// stationary distribution. Symbols, innovations, channel noise and the initial
/// state come from separate streams of `seed`, so a shorter trace is a prefix of
/// a longer one with the same seed.
pub fn generate_trace(
    spec: &ArmaSpec,
    constellation: &Constellation,
    channel: &ChannelParams,
    n: usize,
    seed_value: u64,
) -> Result<Trace> {
    if n == 0 {
        return Err(Error::invalid("n", "trace length must be at least 1"));
    }
    let mut init_rng = seed::stream(seed_value, "trace/init");
    let mut sym_rng = seed::stream(seed_value, "trace/symbols");
    let mut innov_rng = seed::stream(seed_value, "trace/innovation");
    let mut noise_rng = seed::stream(seed_value, "trace/noise");

    let phi1 = init_rng.random::<f64>() * TAU;
    let mut register = vec![0.0; spec.order()];
    RegisterSampler::new(spec).sample_into(&mut init_rng, &mut register);
    let mut states = Vec::with_capacity(n + 1);
    states.push(StateVector::new(phi1, register));

    let sampler = constellation.index_sampler();
    let noise_sd = (0.5 * channel.noise_var()).sqrt();
    let gamma = spec.gamma();
    let mut x = Vec::with_capacity(n);
    let mut symbols = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for k in 0..n {
        let idx = sampler.sample(&mut sym_rng);
        let xk = constellation.points()[idx];
        let s = &states[k];
        let w = Complex64::new(
            noise_sd * noise_rng.sample::<f64, _>(StandardNormal),
            noise_sd * noise_rng.sample::<f64, _>(StandardNormal),
        );
        y.push(xk * Complex64::from_polar(1.0, s.phi) + w);
        x.push(xk);
        symbols.push(idx);
        let v = gamma * innov_rng.sample::<f64, _>(StandardNormal);
        let next = spec.step_state(s, v);
        states.push(next);
    }
    Ok(Trace {
        x,
        symbols,
        states,
        y,
        seed: seed_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_prefix_stable() {
        let spec = ArmaSpec::sm_oscillator(0.05).unwrap();
        let c = Constellation::qam16();
        let ch = ChannelParams::from_db(10.0).unwrap();
        let a = generate_trace(&spec, &c, &ch, 500, 11).unwrap();
        let b = generate_trace(&spec, &c, &ch, 500, 11).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.states, b.states);
        let short = generate_trace(&spec, &c, &ch, 200, 11).unwrap();
        assert_eq!(short.y[..], a.y[..200]);
        assert_eq!(a.states.len(), 501);
        assert!(generate_trace(&spec, &c, &ch, 0, 1).is_err());
    }

    #[test]
    fn tiny_gamma_freezes_phase() {
        let spec = ArmaSpec::sm_oscillator(1e-12).unwrap();
        let t = generate_trace(
            &spec,
            &Constellation::qam4(),
            &ChannelParams::new(1e12).unwrap(),
            1000,
            3,
        )
        .unwrap();
        let phi1 = t.initial_phase();
        for s in &t.states {
            let d = crate::angle::wrap_pi(s.phi - phi1).abs();
            assert!(d < 1e-7, "{d}");
        }
        for k in 0..t.len() {
            let clean = t.x[k] * Complex64::from_polar(1.0, t.states[k].phi);
            assert!((t.y[k] - clean).norm() < 1e-5);
        }
    }
}
