use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Built-in modulation formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Qam4,
    Qam16,
}

impl Modulation {
    pub fn constellation(self) -> Constellation {
        match self {
            Modulation::Qam4 => Constellation::qam4(),
            Modulation::Qam16 => Constellation::qam16(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modulation::Qam4 => "qam4",
            Modulation::Qam16 => "qam16",
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qam4" | "4qam" | "qpsk" => Ok(Modulation::Qam4),
            "qam16" | "16qam" => Ok(Modulation::Qam16),
            other => Err(Error::Config(format!(
                "unknown modulation `{other}` (expected qam4 or qam16)"
            ))),
        }
    }
}

/// Discrete input alphabet with its prior. Points carry unit average energy.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    priors: Vec<f64>,
    log_priors: Vec<f64>,
}

impl Constellation {
    /// Validates `Σ p = 1` and `Σ p |x|² = 1`. Zero mean is not enforced so
    /// that degenerate alphabets such as `{1}` remain usable in tests.
    pub fn new(points: Vec<Complex64>, priors: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != priors.len() {
            return Err(Error::invalid(
                "constellation",
                "need one prior per point and at least one point",
            ));
        }
        if priors.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invalid("priors", "priors must be positive"));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("priors", format!("sum to {total}, not 1")));
        }
        let energy: f64 = points.iter().zip(&priors).map(|(x, p)| p * x.norm_sqr()).sum();
        if (energy - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "constellation",
                format!("average energy {energy}, expected 1"),
            ));
        }
        let log_priors = priors.iter().map(|p| p.ln()).collect();
        Ok(Self {
            points,
            priors,
            log_priors,
        })
    }

    pub fn uniform(points: Vec<Complex64>) -> Result<Self> {
        let m = points.len().max(1);
        Self::new(points, vec![1.0 / m as f64; m])
    }

    /// `{±1 ± j} / √2`.
    pub fn qam4() -> Self {
        square_qam(2)
    }

    /// `{±1, ±3} + j{±1, ±3}`, scaled by `1/√10`.
    pub fn qam16() -> Self {
        square_qam(4)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn mean(&self) -> Complex64 {
        self.points.iter().zip(&self.priors).map(|(x, p)| x * p).sum()
    }

    pub fn energy(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.priors)
            .map(|(x, p)| p * x.norm_sqr())
            .sum()
    }

    /// Source entropy `H(X)` in bits.
    pub fn entropy_bits(&self) -> f64 {
        -self.priors.iter().map(|p| p * p.log2()).sum::<f64>()
    }

    /// Sampler for symbol indices distributed by the prior.
    pub fn index_sampler(&self) -> SymbolSampler {
        let uniform = self.priors.iter().all(|&p| p == self.priors[0]);
        if uniform {
            SymbolSampler::Uniform(self.len())
        } else {
            SymbolSampler::Weighted(
                WeightedIndex::new(&self.priors).expect("priors validated at construction"),
            )
        }
    }
}

#[derive(Clone, Debug)]
pub enum SymbolSampler {
    Uniform(usize),
    Weighted(WeightedIndex<f64>),
}

impl SymbolSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            SymbolSampler::Uniform(m) => rng.random_range(0..*m),
            SymbolSampler::Weighted(w) => w.sample(rng),
        }
    }
}

fn square_qam(side: usize) -> Constellation {
    let levels: Vec<f64> = (0..side)
        .map(|i| 2.0 * i as f64 - (side as f64 - 1.0))
        .collect();
    let energy = 2.0 * levels.iter().map(|l| l * l).sum::<f64>() / side as f64;
    let scale = energy.sqrt().recip();
    let points = levels
        .iter()
        .flat_map(|&re| levels.iter().map(move |&im| Complex64::new(re, im) * scale))
        .collect();
    Constellation::uniform(points).expect("square QAM is a valid constellation")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_zero_mean_unit_energy() {
        for m in [Modulation::Qam4, Modulation::Qam16] {
            let c = m.constellation();
            assert!((c.energy() - 1.0).abs() < 1e-12, "{m}");
            assert!(c.mean().norm() < 1e-12, "{m}");
            assert!((c.priors().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(Constellation::qam4().len(), 4);
        assert_eq!(Constellation::qam16().len(), 16);
        assert!((Constellation::qam4().points()[0].norm() - 1.0).abs() < 1e-15);
        let corner = Constellation::qam16().points()[0];
        assert!((corner.re.abs() - 3.0 / 10f64.sqrt()).abs() < 1e-15);
        assert!((Constellation::qam16().entropy_bits() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(Constellation::uniform(vec![Complex64::new(1.0, 0.0)]).is_ok());
        assert!(Constellation::uniform(vec![Complex64::new(2.0, 0.0)]).is_err());
        assert!(Constellation::new(vec![Complex64::new(1.0, 0.0)], vec![0.5]).is_err());
        assert!(Constellation::uniform(vec![]).is_err());
    }

    #[test]
    fn parse_modulation() {
        assert_eq!("qam16".parse::<Modulation>().unwrap(), Modulation::Qam16);
        assert_eq!("QAM4".parse::<Modulation>().unwrap(), Modulation::Qam4);
        assert!("psk8".parse::<Modulation>().is_err());
    }
}
