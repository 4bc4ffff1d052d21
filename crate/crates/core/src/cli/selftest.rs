//! Fast consistency checks run by `pnrate selftest`.

use std::f64::consts::TAU;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::bounds::{lower_bound, upper_bound, EstimatorOptions, TrackerChoice};
use crate::error::{Error, Result};
use crate::gaussian::{FoldedGaussian, GaussianNd, ProcessCov};
use crate::model::{
    blind_likelihood, data_aided_likelihood, generate_trace, ArmaSpec, ChannelParams,
    Constellation, StateVector,
};
use crate::oracle::{awgn_mi, AwgnMethod};
use crate::seed;

/// Faults that can be injected to confirm a check is able to fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Perturbs one off-diagonal entry of a propagated covariance.
    CovAsymmetry,
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn(Option<Fault>) -> Result<String>;

const CHECKS: [(&str, Check); 4] = [
    ("folded-normalization", folded_normalization),
    ("likelihood-identity", likelihood_identity),
    ("covariance-symmetry", covariance_symmetry),
    ("zero-noise-oracle", zero_noise_oracle),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check; a check that returns an error is reported as failed.
pub fn run(fault: Option<Fault>) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let t = Instant::now();
            let r = check(fault);
            let seconds = t.elapsed().as_secs_f64();
            match r {
                Ok(detail) => CheckOutcome {
                    name,
                    passed: true,
                    detail,
                    seconds,
                },
                Err(e) => CheckOutcome {
                    name,
                    passed: false,
                    detail: e.to_string(),
                    seconds,
                },
            }
        })
        .collect()
}

fn fail(msg: String) -> Error {
    Error::Config(msg)
}

/// Integrates folded 2-D densities over `[0, 2π) × ℝ` with the trapezoid rule,
/// which converges geometrically for smooth periodic and rapidly decaying integrands.
fn folded_normalization(_: Option<Fault>) -> Result<String> {
    let mut rng = seed::stream(11, "selftest/folded");
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let sp = rng.random_range(0.05..3.0);
        let sw = rng.random_range(0.05..2.0);
        let rho: f64 = rng.random_range(-0.9..0.9);
        let mean = DVector::from_vec(vec![rng.random_range(-10.0..10.0), rng.random_range(-1.0..1.0)]);
        let cov = DMatrix::from_row_slice(2, 2, &[sp * sp, rho * sp * sw, rho * sp * sw, sw * sw]);
        let f = FoldedGaussian::new(GaussianNd::new(mean.clone(), cov)?);
        let (np, nw) = (512, 400);
        let half = 10.0 * sw;
        let (hp, hw) = (TAU / np as f64, 2.0 * half / nw as f64);
        let mut total = 0.0;
        for i in 0..np {
            let phi = i as f64 * hp;
            for j in 0..=nw {
                let w = mean[1] - half + j as f64 * hw;
                total += f.log_density(&StateVector::new(phi, vec![w]))?.exp();
            }
        }
        worst = worst.max((total * hp * hw - 1.0).abs());
    }
    if worst > 1e-6 {
        return Err(fail(format!("max |integral - 1| = {worst:e}")));
    }
    Ok(format!("max |integral - 1| = {worst:.1e}"))
}

fn likelihood_identity(_: Option<Fault>) -> Result<String> {
    let mut rng = seed::stream(12, "selftest/likelihood");
    let mut worst = 0.0f64;
    for c in &[Constellation::qam4(), Constellation::qam16()] {
        for _ in 0..1000 {
            let ch = ChannelParams::from_db(rng.random_range(-5.0..25.0))?;
            let phi = rng.random_range(0.0..TAU);
            let x = c.points()[rng.random_range(0..c.len())];
            let noise = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let y = x * Complex64::from_polar(1.0, rng.random_range(0.0..TAU)) + 0.3 * noise;
            let blind = blind_likelihood(y, phi, c, &ch);
            let sum: f64 = c
                .points()
                .iter()
                .zip(c.priors())
                .map(|(&x, p)| p * data_aided_likelihood(y, x, phi, &ch))
                .sum();
            if sum > 1e-250 {
                worst = worst.max((blind - sum).abs() / sum);
            }
        }
    }
    if worst > 1e-12 {
        return Err(fail(format!("max relative error {worst:e}")));
    }
    Ok(format!("max relative error {worst:.1e}"))
}

/// Recomputes `F Σ Fᵀ + Q` directly and requires it to be symmetric and to match
/// `GaussianNd::propagate`.
fn covariance_symmetry(fault: Option<Fault>) -> Result<String> {
    let spec = ArmaSpec::sm_oscillator(0.15)?;
    let f = spec.transition_matrix();
    let q = ProcessCov::new(spec.state_dim(), spec.gamma());
    let d = spec.state_dim();
    let mut rng = seed::stream(13, "selftest/propagate");
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let cov = &a * a.transpose();
    let g = GaussianNd::new(DVector::zeros(d), cov.clone())?;
    let mut direct = &f * &cov * f.transpose() + q.matrix();
    if fault == Some(Fault::CovAsymmetry) {
        direct[(0, 1)] += 1e-3;
    }
    GaussianNd::new(DVector::zeros(d), direct.clone())?;
    let p = g.propagate(&f, &q)?;
    let diff = (p.cov() - &direct).amax();
    if diff > 1e-9 * direct.amax() {
        return Err(fail(format!("propagate differs from F Σ Fᵀ + Q by {diff:e}")));
    }
    Ok(format!("max |Δ| = {diff:.1e}"))
}

/// Near-zero phase noise must reproduce the memoryless AWGN rate.
fn zero_noise_oracle(_: Option<Fault>) -> Result<String> {
    let spec = ArmaSpec::sm_oscillator(1e-6)?;
    let c = Constellation::qam4();
    let ch = ChannelParams::from_db(6.0)?;
    let trace = generate_trace(&spec, &c, &ch, 20_000, 14)?;
    let opts = EstimatorOptions {
        np_blind: 1024,
        ..Default::default()
    };
    let reference = awgn_mi(&c, &ch, AwgnMethod::default())?;
    let lb = lower_bound(&spec, &c, &ch, &trace, &opts)?;
    let ub = upper_bound(&spec, &c, &ch, &trace, TrackerChoice::Kalman, &opts)?;
    let (dl, du) = (lb.value - reference, ub.value - reference);
    let summary = format!(
        "awgn {reference:.4}, LB {:.4} ({dl:+.4}), UB {:.4} ({du:+.4})",
        lb.value, ub.value
    );
    if dl.abs() > 0.03 || du.abs() > 0.05 {
        return Err(fail(summary));
    }
    Ok(summary)
}
