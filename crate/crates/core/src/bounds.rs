//! Simulation-based lower and upper bounds on the information rate.
//!
//! Both bounds are averages of per-channel-use quantities along one long trace:
//!
//! * upper: `h(Y) - h(Y | X, S) + E[log₂ q_pred(s_{k+1}) - log₂ q_post(s_k)]`, where
//!   `h(Y)` comes from a blind particle filter and `q_post`, `q_pred` are folded
//!   Gaussians fitted by a data-aided tracker (Kalman or particle);
//! * lower: `H(X) - E[-log₂ q(x_k | y^k, x^{k-1})]`, where `q` is built from the
//!   Kalman predictive phase marginal and Gauss-Hermite quadrature over the phase.
//!
//! All rates are in bits per channel use. The first `burn_in` samples are
//! discarded and the standard error comes from non-overlapping batch means.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ekf::Ekf;
use crate::error::{Error, Result};
use crate::gaussian::{FoldedGaussian, GaussianNd, ProcessCov};
use crate::model::{ArmaSpec, ChannelParams, Constellation, DataAidedEvaluator, Trace};
use crate::pf::{Observation, ParticleSet};
use crate::quadrature::GaussHermite;
use crate::seed;
use crate::stats::{self, Summary};

/// The data-aided tracker that supplies the auxiliary state densities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrackerChoice {
    Kalman,
    Particle(usize),
}

impl fmt::Display for TrackerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackerChoice::Kalman => f.write_str("kalman"),
            TrackerChoice::Particle(np) => write!(f, "particle:{np}"),
        }
    }
}

impl FromStr for TrackerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "kalman" || s == "ekf" {
            return Ok(TrackerChoice::Kalman);
        }
        if let Some(np) = s.strip_prefix("particle:") {
            let np: usize = np
                .parse()
                .map_err(|_| Error::Config(format!("bad particle count in tracker `{s}`")))?;
            if np < 2 {
                return Err(Error::Config(format!("tracker `{s}` needs at least 2 particles")));
            }
            return Ok(TrackerChoice::Particle(np));
        }
        Err(Error::Config(format!(
            "unknown tracker `{s}` (expected kalman or particle:<count>)"
        )))
    }
}

impl Serialize for TrackerChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TrackerChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorOptions {
    pub burn_in: usize,
    pub batch: usize,
    /// Gauss-Hermite nodes for the lower bound's phase integral.
    pub quad_nodes: usize,
    /// Particles in the blind filter that estimates `h(Y)`.
    pub np_blind: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            batch: 1000,
            quad_nodes: 32,
            np_blind: 4096,
        }
    }
}

/// Named parts of a bound, each a post-burn-in mean in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Components {
    Upper {
        h_y: f64,
        h_y_given_xs: f64,
        d_term: f64,
    },
    Lower {
        hx: f64,
        hx_given_y: f64,
    },
}

/// Counters that flag numerical trouble without failing the estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    /// Resampling events in the particle filters.
    pub resamples: usize,
    /// Folded-density evaluations that hit the translate cap.
    pub fold_caps: usize,
    /// Steps whose input posterior would have underflowed outside the log domain.
    pub underflows: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Samples averaged after burn-in.
    pub n_used: usize,
    pub first_half: f64,
    pub second_half: f64,
    pub components: Components,
    pub diagnostics: Diagnostics,
}

/// `h(Y | X, S) = log₂(π e / snr)`.
pub fn h_y_given_xs(ch: &ChannelParams) -> f64 {
    (PI * std::f64::consts::E / ch.snr()).log2()
}

/// Per-sample `-log₂ p̂(y_k | y^{k-1})` from a blind bootstrap particle filter.
pub fn output_entropy_series(
    spec: &ArmaSpec,
    constellation: &Constellation,
    ch: &ChannelParams,
    trace: &Trace,
    np: usize,
) -> Result<(Vec<f64>, Diagnostics)> {
    let seed_value = seed::child_seed(trace.seed, "pf/blind");
    let mut pf = ParticleSet::init(spec, trace.initial_phase(), np, seed_value)?;
    let obs = Observation::Blind(constellation);
    let mut out = Vec::with_capacity(trace.len());
    for k in 0..trace.len() {
        let lp = if k == 0 {
            pf.observe(trace.y[k], obs, ch)
        } else {
            pf.step(spec, trace.y[k], obs, ch)
        }
        .map_err(|e| e.at_step(k + 1))?;
        out.push(-lp / LN_2);
    }
    let diag = Diagnostics {
        resamples: pf.resamples(),
        ..Diagnostics::default()
    };
    Ok((out, diag))
}

/// Per-sample `d_k = log₂ q_pred(s_{k+1}) - log₂ q_post(s_k)` along the true states.
pub fn state_entropy_gap_series(
    spec: &ArmaSpec,
    ch: &ChannelParams,
    trace: &Trace,
    tracker: TrackerChoice,
) -> Result<(Vec<f64>, Diagnostics)> {
    let f = spec.transition_matrix();
    let q = ProcessCov::new(spec.state_dim(), spec.gamma());
    let mut diag = Diagnostics::default();
    let mut out = Vec::with_capacity(trace.len());
    let mut gap = |post: &GaussianNd, pred: &GaussianNd, k: usize| -> Result<f64> {
        let (lp, ip) = FoldedGaussian::new(pred.clone()).log_density_with_info(&trace.states[k + 1])?;
        let (lq, iq) = FoldedGaussian::new(post.clone()).log_density_with_info(&trace.states[k])?;
        diag.fold_caps += ip.capped as usize + iq.capped as usize;
        Ok((lp - lq) / LN_2)
    };
    match tracker {
        TrackerChoice::Kalman => {
            let ekf = Ekf::new(spec);
            let mut prior = ekf.init(trace.initial_phase())?;
            for k in 0..trace.len() {
                let mut step = || -> Result<f64> {
                    let post = ekf.update(&prior, trace.y[k], trace.x[k], ch)?;
                    prior = ekf.predict(&post)?;
                    gap(&post.moments, &prior.moments, k)
                };
                out.push(step().map_err(|e| e.at_step(k + 1))?);
            }
        }
        TrackerChoice::Particle(np) => {
            let seed_value = seed::child_seed(trace.seed, "pf/tracker");
            let mut pf = ParticleSet::init(spec, trace.initial_phase(), np, seed_value)?;
            for k in 0..trace.len() {
                let mut step = || -> Result<f64> {
                    if k > 0 {
                        pf.propagate(spec);
                    }
                    pf.weight(trace.y[k], Observation::DataAided(trace.x[k]), ch)?;
                    let post = pf.posterior_moments()?;
                    pf.resample_if_needed();
                    let pred = post.propagate(&f, &q)?;
                    gap(&post, &pred, k)
                };
                out.push(step().map_err(|e| e.at_step(k + 1))?);
            }
            diag.resamples = pf.resamples();
        }
    }
    Ok((out, diag))
}

/// Per-sample `-log₂ q(x_k | y^k, x^{k-1})` and the number of steps whose
/// unnormalized posterior fell below the smallest positive double.
pub fn input_entropy_series(
    spec: &ArmaSpec,
    constellation: &Constellation,
    ch: &ChannelParams,
    trace: &Trace,
    quad_nodes: usize,
) -> Result<(Vec<f64>, Diagnostics)> {
    let gh = GaussHermite::new(quad_nodes);
    let log_w: Vec<f64> = gh.weights.iter().map(|w| w.ln() - 0.5 * PI.ln()).collect();
    let ekf = Ekf::new(spec);
    let mut state = ekf.init(trace.initial_phase())?;
    let m = constellation.len();
    let mut diag = Diagnostics::default();
    let mut out = Vec::with_capacity(trace.len());
    let mut rot: Vec<(f64, f64)> = vec![(0.0, 0.0); gh.len()];
    let mut log_q = vec![0.0; m];
    let mut terms = vec![0.0; gh.len()];
    for k in 0..trace.len() {
        let mut step = || -> Result<f64> {
            if k > 0 {
                state = ekf.predict(&state)?;
            }
            let mean = state.moments.mean()[0];
            let sd = state.moments.cov()[(0, 0)].max(0.0).sqrt();
            for (r, t) in rot.iter_mut().zip(&gh.nodes) {
                let (s, c) = (mean + std::f64::consts::SQRT_2 * sd * t).sin_cos();
                *r = (c, s);
            }
            for (j, x) in constellation.points().iter().enumerate() {
                let ev = DataAidedEvaluator::new(trace.y[k], *x, ch);
                for (i, (c, s)) in rot.iter().enumerate() {
                    terms[i] = log_w[i] + ev.log_at(*c, *s);
                }
                log_q[j] = constellation.log_priors()[j] + stats::log_sum_exp(&terms);
            }
            let norm = stats::log_sum_exp(&log_q);
            if norm < f64::MIN_POSITIVE.ln() {
                diag.underflows += 1;
            }
            let idx = trace.symbols[k];
            let v = -(log_q[idx] - norm) / LN_2;
            state = ekf.update(&state, trace.y[k], trace.x[k], ch)?;
            Ok(v)
        };
        out.push(step().map_err(|e| e.at_step(k + 1))?);
    }
    Ok((out, diag))
}

fn post_burn_in<'a>(series: &'a [f64], opts: &EstimatorOptions) -> Result<&'a [f64]> {
    let required = opts.burn_in + 10 * opts.batch;
    if series.len() < required || opts.batch == 0 {
        return Err(Error::InsufficientSamples {
            available: series.len().saturating_sub(opts.burn_in),
            required: 10 * opts.batch,
        });
    }
    Ok(&series[opts.burn_in..])
}

fn halves(s: &[f64]) -> (f64, f64) {
    let h = s.len() / 2;
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    (mean(&s[..h]), mean(&s[h..]))
}

fn mean(s: &[f64]) -> f64 {
    s.iter().sum::<f64>() / s.len() as f64
}

/// Combines `-log₂ p̂(y_k | y^{k-1})` and `d_k` series into the upper bound.
pub fn upper_bound_from_series(
    h_y: &[f64],
    d: &[f64],
    ch: &ChannelParams,
    opts: &EstimatorOptions,
    diagnostics: Diagnostics,
) -> Result<BoundEstimate> {
    if h_y.len() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: h_y.len(),
            got: d.len(),
        });
    }
    let c = h_y_given_xs(ch);
    let h_y = post_burn_in(h_y, opts)?;
    let d = post_burn_in(d, opts)?;
    let combined: Vec<f64> = h_y.iter().zip(d).map(|(h, d)| h - c + d).collect();
    let Summary { mean: value, stderr, n } = stats::summarize(&combined, opts.batch)?;
    let (first_half, second_half) = halves(&combined);
    Ok(BoundEstimate {
        value,
        stderr,
        n_used: n,
        first_half,
        second_half,
        components: Components::Upper {
            h_y: mean(h_y),
            h_y_given_xs: c,
            d_term: mean(d),
        },
        diagnostics,
    })
}

/// Combines `-log₂ q(x_k | …)` into the lower bound `H(X) - E[…]`.
pub fn lower_bound_from_series(
    constellation: &Constellation,
    neg_log_q: &[f64],
    opts: &EstimatorOptions,
    diagnostics: Diagnostics,
) -> Result<BoundEstimate> {
    let hx = constellation.entropy_bits();
    let s = post_burn_in(neg_log_q, opts)?;
    let per: Vec<f64> = s.iter().map(|v| hx - v).collect();
    let Summary { mean: value, stderr, n } = stats::summarize(&per, opts.batch)?;
    let (first_half, second_half) = halves(&per);
    Ok(BoundEstimate {
        value,
        stderr,
        n_used: n,
        first_half,
        second_half,
        components: Components::Lower {
            hx,
            hx_given_y: mean(s),
        },
        diagnostics,
    })
}

/// Upper bound estimate on one trace.
pub fn upper_bound(
    spec: &ArmaSpec,
    constellation: &Constellation,
    ch: &ChannelParams,
    trace: &Trace,
    tracker: TrackerChoice,
    opts: &EstimatorOptions,
) -> Result<BoundEstimate> {
    let (h_y, d1) = output_entropy_series(spec, constellation, ch, trace, opts.np_blind)?;
    let (d, d2) = state_entropy_gap_series(spec, ch, trace, tracker)?;
    let diag = Diagnostics {
        resamples: d1.resamples + d2.resamples,
        fold_caps: d2.fold_caps,
        underflows: 0,
    };
    upper_bound_from_series(&h_y, &d, ch, opts, diag)
}

/// Lower bound estimate on one trace.
pub fn lower_bound(
    spec: &ArmaSpec,
    constellation: &Constellation,
    ch: &ChannelParams,
    trace: &Trace,
    opts: &EstimatorOptions,
) -> Result<BoundEstimate> {
    let (s, diag) = input_entropy_series(spec, constellation, ch, trace, opts.quad_nodes)?;
    lower_bound_from_series(constellation, &s, opts, diag)
}

/// Single-symbol input posterior `q(x | y)` for a phase known to be `N(mean, var)`;
/// exposed for checking the quadrature against direct integration.
pub fn input_posterior(
    constellation: &Constellation,
    ch: &ChannelParams,
    y: Complex64,
    phase_mean: f64,
    phase_var: f64,
    quad_nodes: usize,
) -> Vec<f64> {
    let gh = GaussHermite::new(quad_nodes);
    let sd = phase_var.max(0.0).sqrt();
    let log_q: Vec<f64> = constellation
        .points()
        .iter()
        .zip(constellation.log_priors())
        .map(|(x, lp)| {
            let ev = DataAidedEvaluator::new(y, *x, ch);
            let terms: Vec<f64> = gh
                .nodes
                .iter()
                .zip(&gh.weights)
                .map(|(t, w)| {
                    let (s, c) = (phase_mean + std::f64::consts::SQRT_2 * sd * t).sin_cos();
                    w.ln() - 0.5 * PI.ln() + ev.log_at(c, s)
                })
                .collect();
            lp + stats::log_sum_exp(&terms)
        })
        .collect();
    let norm = stats::log_sum_exp(&log_q);
    log_q.iter().map(|l| (l - norm).exp()).collect()
}
