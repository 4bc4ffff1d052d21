//! Mutual information of a discrete input on the AWGN channel without phase noise.
//!
//! `I(X; Y) = -Σ_x p(x) E_w[log₂ Σ_{x'} p(x') exp(-snr (|x - x' + w|² - |w|²))]`
//! with `w ~ CN(0, 1/snr)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{ChannelParams, Constellation};
use crate::quadrature::GaussHermite;
use crate::seed;
use crate::stats::{self, Summary};

/// Tolerance between the quadrature and Monte Carlo evaluations, in bits.
pub const AGREEMENT_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AwgnMethod {
    /// Product Gauss-Hermite rule with `nodes` points per real dimension.
    Quadrature { nodes: usize },
    /// Sample average over `n` noise draws per input symbol.
    MonteCarlo { n: usize, seed: u64 },
}

impl Default for AwgnMethod {
    fn default() -> Self {
        AwgnMethod::Quadrature { nodes: 128 }
    }
}

/// `log₂ p(y|x)/p(y)` for `y = x + w`, given `d_j = x - x'_j`.
fn info_density(c: &Constellation, x: Complex64, w: Complex64, snr: f64, buf: &mut [f64]) -> f64 {
    let w2 = w.norm_sqr();
    for ((b, xp), lp) in buf.iter_mut().zip(c.points()).zip(c.log_priors()) {
        *b = lp - snr * ((x - xp + w).norm_sqr() - w2);
    }
    -stats::log_sum_exp(buf) / std::f64::consts::LN_2
}

/// Mutual information in bits by the chosen method.
pub fn awgn_mi(constellation: &Constellation, ch: &ChannelParams, method: AwgnMethod) -> Result<f64> {
    match method {
        AwgnMethod::Quadrature { nodes } => Ok(quadrature(constellation, ch, nodes)),
        AwgnMethod::MonteCarlo { n, seed } => monte_carlo(constellation, ch, n, seed).map(|s| s.mean),
    }
}

fn quadrature(c: &Constellation, ch: &ChannelParams, nodes: usize) -> f64 {
    let gh = GaussHermite::new(nodes);
    let sigma = ch.noise_var().sqrt();
    let snr = ch.snr();
    let mut buf = vec![0.0; c.len()];
    let mut total = 0.0;
    for (x, p) in c.points().iter().zip(c.priors()) {
        let mut acc = 0.0;
        for (ti, wi) in gh.nodes.iter().zip(&gh.weights) {
            for (tj, wj) in gh.nodes.iter().zip(&gh.weights) {
                let w = Complex64::new(sigma * ti, sigma * tj);
                acc += wi * wj * info_density(c, *x, w, snr, &mut buf);
            }
        }
        total += p * acc / std::f64::consts::PI;
    }
    total
}

/// Monte Carlo estimate with its i.i.d. standard error. Inputs are drawn from the prior.
pub fn monte_carlo(c: &Constellation, ch: &ChannelParams, n: usize, seed_value: u64) -> Result<Summary> {
    if n < 2 {
        return Err(Error::invalid("n", "Monte Carlo needs at least two samples"));
    }
    let mut rng = seed::stream(seed_value, "oracle/awgn");
    let sampler = c.index_sampler();
    let sd = (0.5 * ch.noise_var()).sqrt();
    let snr = ch.snr();
    let mut buf = vec![0.0; c.len()];
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let x = c.points()[sampler.sample(&mut rng)];
            let w = Complex64::new(
                sd * rng.sample::<f64, _>(StandardNormal),
                sd * rng.sample::<f64, _>(StandardNormal),
            );
            info_density(c, x, w, snr, &mut buf)
        })
        .collect();
    Ok(stats::iid_summary(&samples))
}

/// Runs both methods and fails if they differ by more than [`AGREEMENT_TOL`].
/// Returns the quadrature value.
pub fn awgn_mi_checked(
    constellation: &Constellation,
    ch: &ChannelParams,
    nodes: usize,
    mc_samples: usize,
    seed_value: u64,
) -> Result<f64> {
    let q = quadrature(constellation, ch, nodes);
    let mc = monte_carlo(constellation, ch, mc_samples, seed_value)?.mean;
    if (q - mc).abs() > AGREEMENT_TOL {
        return Err(Error::OracleDisagreement {
            quadrature: q,
            monte_carlo: mc,
        });
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits() {
        let q4 = Constellation::qam4();
        let lo = awgn_mi(&q4, &ChannelParams::new(1e-6).unwrap(), AwgnMethod::default()).unwrap();
        assert!(lo.abs() < 1e-4, "{lo}");
        let hi = awgn_mi(&q4, &ChannelParams::new(1e6).unwrap(), AwgnMethod::default()).unwrap();
        assert!((hi - 2.0).abs() < 1e-6, "{hi}");
    }

    #[test]
    fn qpsk_is_two_independent_bpsk_channels() {
        // 4-QAM at snr splits into two BPSK channels at snr/2 each; BPSK MI by 1-D quadrature
        let snr: f64 = 4.0;
        let gh = GaussHermite::new(128);
        // amplitude over noise sd per dimension
        let a = snr.sqrt();
        let bpsk: f64 = gh
            .nodes
            .iter()
            .zip(&gh.weights)
            .map(|(t, w)| {
                let z = std::f64::consts::SQRT_2 * t;
                w * (1.0 - (1.0 + (-2.0 * a * (a + z)).exp()).log2())
            })
            .sum::<f64>()
            / std::f64::consts::PI.sqrt();
        let mi = awgn_mi(&Constellation::qam4(), &ChannelParams::new(snr).unwrap(), AwgnMethod::default())
            .unwrap();
        // the softplus integrand limits Gauss-Hermite to about 1e-8 here
        assert!((mi - 2.0 * bpsk).abs() < 1e-7, "{mi} vs {}", 2.0 * bpsk);
    }
}
