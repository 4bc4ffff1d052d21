//! Quantized-phase trellis rate for Wiener phase noise.
//!
//! The phase is restricted to `bins` levels `jΔ`, `Δ = 2π / bins`, and the
//! random-walk increment `N(0, γ²)` becomes a circulant transition kernel whose
//! entries integrate the wrapped Gaussian over each destination bin. Two forward
//! recursions run over a simulated trace, one blind and one data-aided, and the
//! rate is the sample mean of `log₂ p(y_k | x^k, y^{k-1}) - log₂ p(y_k | y^{k-1})`
//! under this auxiliary finite-state channel. It converges to the true rate as the
//! number of bins grows.
//!
//! Both recursions share each FFT: the blind message goes in the real part and the
//! data-aided message in the imaginary part, which is exact because the kernel is real.

use std::f64::consts::{LN_2, SQRT_2, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::{
    generate_trace, ArmaSpec, BlindEvaluator, ChannelParams, Constellation, DataAidedEvaluator,
    Trace,
};
use crate::stats::{self, Summary};

pub const MIN_BINS: usize = 64;

/// Phase grid with its circulant transition kernel.
#[derive(Clone)]
pub struct TrellisGrid {
    bins: usize,
    /// `kernel[m]`: probability of moving `m` bins forward (mod `bins`).
    kernel: Vec<f64>,
    kernel_hat: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl std::fmt::Debug for TrellisGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrellisGrid")
            .field("bins", &self.bins)
            .finish_non_exhaustive()
    }
}

/// `P(a < Z < b)` for standard normal `Z`, accurate in both tails.
fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (erfc(a / SQRT_2) - erfc(b / SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / SQRT_2) - erfc(-a / SQRT_2))
    } else {
        1.0 - 0.5 * (erfc(-a / SQRT_2) + erfc(b / SQRT_2))
    }
}

impl TrellisGrid {
    pub fn new(gamma: f64, bins: usize) -> Result<Self> {
        if bins < MIN_BINS {
            return Err(Error::invalid("bins", format!("need at least {MIN_BINS}, got {bins}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be > 0, got {gamma}")));
        }
        let delta = TAU / bins as f64;
        // wrapped translates needed to cover ±40σ of the increment
        let wraps = ((40.0 * gamma) / TAU).ceil() as i64 + 1;
        let mut kernel: Vec<f64> = (0..bins)
            .map(|m| {
                let centre = m as f64 * delta;
                (-wraps..=wraps)
                    .map(|l| {
                        let c = centre + l as f64 * TAU;
                        normal_interval((c - 0.5 * delta) / gamma, (c + 0.5 * delta) / gamma)
                    })
                    .sum::<f64>()
            })
            .collect();
        let total: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= total);

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(bins);
        let ifft = planner.plan_fft_inverse(bins);
        let mut kernel_hat: Vec<Complex64> = kernel.iter().map(|&k| Complex64::new(k, 0.0)).collect();
        fft.process(&mut kernel_hat);
        let scale = 1.0 / bins as f64;
        kernel_hat.iter_mut().for_each(|k| *k *= scale);
        let (sin, cos) = (0..bins).map(|j| (j as f64 * delta).sin_cos()).unzip();
        Ok(Self {
            bins,
            kernel,
            kernel_hat,
            fft,
            ifft,
            cos,
            sin,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn delta(&self) -> f64 {
        TAU / self.bins as f64
    }

    /// Transition probability from bin `from` to bin `to`.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.kernel[(to + self.bins - from) % self.bins]
    }

    /// Bin whose centre is nearest to `phi`.
    pub fn nearest_bin(&self, phi: f64) -> usize {
        let j = (crate::angle::wrap_2pi(phi) / self.delta()).round() as usize;
        j % self.bins
    }

    /// Propagates both messages one step through the kernel (circular convolution).
    fn convolve(&self, blind: &mut [f64], aided: &mut [f64], buf: &mut [Complex64]) {
        for ((b, &u), &v) in buf.iter_mut().zip(blind.iter()).zip(aided.iter()) {
            *b = Complex64::new(u, v);
        }
        self.fft.process(buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.ifft.process(buf);
        for ((b, u), v) in buf.iter().zip(blind.iter_mut()).zip(aided.iter_mut()) {
            // round-off can leave tiny negatives where the message is ~0
            *u = b.re.max(0.0);
            *v = b.im.max(0.0);
        }
    }

    /// Direct circular convolution in the log domain, for steps where the
    /// linear-domain message has underflowed.
    fn convolve_log(&self, log_msg: &[f64]) -> Vec<f64> {
        let n = self.bins;
        let log_k: Vec<f64> = self.kernel.iter().map(|k| k.ln()).collect();
        let mut terms = vec![0.0; n];
        (0..n)
            .map(|j| {
                for (i, t) in terms.iter_mut().enumerate() {
                    *t = log_msg[i] + log_k[(j + n - i) % n];
                }
                stats::log_sum_exp(&terms)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrellisConfig {
    pub bins: usize,
    pub n: usize,
    pub burn_in: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrellisConfig {
    fn default() -> Self {
        Self {
            bins: 1024,
            n: 100_000,
            burn_in: 1000,
            batch: 1000,
            seed: 1,
        }
    }
}

/// Trellis rate on a freshly simulated Wiener trace, with its batch-means error.
pub fn trellis_rate(
    gamma: f64,
    constellation: &Constellation,
    ch: &ChannelParams,
    cfg: &TrellisConfig,
) -> Result<Summary> {
    let spec = ArmaSpec::wiener(gamma)?;
    let trace = generate_trace(&spec, constellation, ch, cfg.n, cfg.seed)?;
    let grid = TrellisGrid::new(gamma, cfg.bins)?;
    let series = trellis_series(&grid, constellation, ch, &trace)?;
    if series.len() < cfg.burn_in + 10 * cfg.batch {
        return Err(Error::InsufficientSamples {
            available: series.len().saturating_sub(cfg.burn_in),
            required: 10 * cfg.batch,
        });
    }
    stats::summarize(&series[cfg.burn_in..], cfg.batch)
}

/// Per-sample output entropies along a trace: `(-log₂ p(y_k | y^{k-1}), -log₂ p(y_k | x^k, y^{k-1}))`.
pub fn trellis_entropy_series(
    grid: &TrellisGrid,
    constellation: &Constellation,
    ch: &ChannelParams,
    trace: &Trace,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = grid.bins;
    let mut blind = vec![0.0; b];
    let mut aided = vec![0.0; b];
    let start = grid.nearest_bin(trace.initial_phase());
    blind[start] = 1.0;
    aided[start] = 1.0;
    let mut buf = vec![Complex64::new(0.0, 0.0); b];
    let mut ll_b = vec![0.0; b];
    let mut ll_a = vec![0.0; b];
    let mut prev_blind = vec![0.0; b];
    let mut prev_aided = vec![0.0; b];
    let mut h_blind = Vec::with_capacity(trace.len());
    let mut h_aided = Vec::with_capacity(trace.len());
    for k in 0..trace.len() {
        if k > 0 {
            prev_blind.copy_from_slice(&blind);
            prev_aided.copy_from_slice(&aided);
            grid.convolve(&mut blind, &mut aided, &mut buf);
        }
        let eb = BlindEvaluator::new(trace.y[k], constellation, ch);
        let ea = DataAidedEvaluator::new(trace.y[k], trace.x[k], ch);
        for j in 0..b {
            ll_b[j] = eb.log_at(grid.cos[j], grid.sin[j]);
            ll_a[j] = ea.log_at(grid.cos[j], grid.sin[j]);
        }
        let prev = |p: &[f64]| if k > 0 { Some(p.to_vec()) } else { None };
        let lb = weigh(&mut blind, &ll_b, grid, k, || prev(&prev_blind))?;
        let la = weigh(&mut aided, &ll_a, grid, k, || prev(&prev_aided))?;
        h_blind.push(-lb / LN_2);
        h_aided.push(-la / LN_2);
    }
    Ok((h_blind, h_aided))
}

/// Multiplies a normalized predictive message by the likelihood, renormalizes it
/// in place, and returns the log normalizer `log Σ_j π_j p(y | φ_j)`.
///
/// If every bin carrying predictive mass has negligible likelihood, the linear
/// product underflows; the predictive is then recomputed in the log domain from
/// the previous posterior (`prev`), since the FFT has flushed its tails to zero.
fn weigh(
    msg: &mut [f64],
    ll: &[f64],
    grid: &TrellisGrid,
    k: usize,
    prev: impl FnOnce() -> Option<Vec<f64>>,
) -> Result<f64> {
    let m = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (p, l) in msg.iter().zip(ll) {
        total += p * (l - m).exp();
    }
    if total > 0.0 && total.is_finite() {
        for (p, l) in msg.iter_mut().zip(ll) {
            *p *= (l - m).exp() / total;
        }
        return Ok(m + total.ln());
    }
    log::debug!("trellis underflow at step {}, using log-domain fallback", k + 1);
    let log_pred = match prev() {
        Some(post) => grid.convolve_log(&post.iter().map(|p| p.ln()).collect::<Vec<_>>()),
        None => msg.iter().map(|p| p.ln()).collect(),
    };
    let joint: Vec<f64> = log_pred.iter().zip(ll).map(|(a, b)| a + b).collect();
    let norm = stats::log_sum_exp(&joint);
    if !norm.is_finite() {
        return Err(Error::TrellisUnderflow { step: k + 1 });
    }
    for (p, j) in msg.iter_mut().zip(&joint) {
        *p = (j - norm).exp();
    }
    Ok(norm)
}

/// Per-sample information density `log₂ p(y_k | x^k, y^{k-1}) - log₂ p(y_k | y^{k-1})`.
pub fn trellis_series(
    grid: &TrellisGrid,
    constellation: &Constellation,
    ch: &ChannelParams,
    trace: &Trace,
) -> Result<Vec<f64>> {
    let (hb, ha) = trellis_entropy_series(grid, constellation, ch, trace)?;
    Ok(hb.iter().zip(&ha).map(|(b, a)| b - a).collect())
}
