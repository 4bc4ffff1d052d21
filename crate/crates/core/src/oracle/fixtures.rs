//! Checked-in oracle constants.
//!
//! The file is TOML with a format version, the command that produced it, and the
//! full parameter set of every entry, so any value can be regenerated and compared.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{awgn_mi, awgn_mi_monte_carlo, trellis_rate, AwgnMethod, TrellisConfig};
use crate::error::{Error, Result};
use crate::model::{ChannelParams, Modulation};

pub const FIXTURE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AwgnFixture {
    pub modulation: Modulation,
    /// Linear SNR.
    pub snr: f64,
    pub nodes: usize,
    pub mc_samples: usize,
    pub mc_seed: u64,
    pub mi: f64,
    pub mc_mi: f64,
    pub mc_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrellisFixture {
    pub modulation: Modulation,
    pub gamma: f64,
    pub snr_db: f64,
    pub bins: usize,
    pub n: usize,
    pub burn_in: usize,
    pub batch: usize,
    pub seed: u64,
    pub rate: f64,
    pub stderr: f64,
}

impl TrellisFixture {
    pub fn config(&self) -> TrellisConfig {
        TrellisConfig {
            bins: self.bins,
            n: self.n,
            burn_in: self.burn_in,
            batch: self.batch,
            seed: self.seed,
        }
    }

    /// Recomputes the entry from its parameters.
    pub fn recompute(&self) -> Result<TrellisFixture> {
        let ch = ChannelParams::from_db(self.snr_db)?;
        let s = trellis_rate(self.gamma, &self.modulation.constellation(), &ch, &self.config())?;
        Ok(TrellisFixture {
            rate: s.mean,
            stderr: s.stderr,
            ..self.clone()
        })
    }
}

impl AwgnFixture {
    pub fn recompute(&self) -> Result<AwgnFixture> {
        let c = self.modulation.constellation();
        let ch = ChannelParams::new(self.snr)?;
        let mi = awgn_mi(&c, &ch, AwgnMethod::Quadrature { nodes: self.nodes })?;
        let mc = awgn_mi_monte_carlo(&c, &ch, self.mc_samples, self.mc_seed)?;
        if (mi - mc.mean).abs() > super::AGREEMENT_TOL {
            return Err(Error::OracleDisagreement {
                quadrature: mi,
                monte_carlo: mc.mean,
            });
        }
        Ok(AwgnFixture {
            mi,
            mc_mi: mc.mean,
            mc_stderr: mc.stderr,
            ..self.clone()
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixtures {
    pub version: u32,
    pub generator: String,
    #[serde(default)]
    pub awgn: Vec<AwgnFixture>,
    #[serde(default)]
    pub trellis: Vec<TrellisFixture>,
}

impl Fixtures {
    /// Location of the fixtures shipped with the crate.
    pub fn default_path() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/oracle.toml")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: Fixtures = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if f.version != FIXTURE_VERSION {
            return Err(Error::Config(format!(
                "{}: fixture version {} (expected {FIXTURE_VERSION})",
                path.display(),
                f.version
            )));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// The entry set the crate ships: AWGN values at the zero-noise check points and
    /// Wiener trellis rates for the bracketing checks.
    pub fn reference_set() -> Fixtures {
        let awgn = [
            (Modulation::Qam4, 4.0),
            (Modulation::Qam4, 10f64.powf(0.6)),
            (Modulation::Qam16, 10f64.powf(1.2)),
        ]
        .into_iter()
        .enumerate()
        .map(|(i, (modulation, snr))| AwgnFixture {
            modulation,
            snr,
            nodes: 128,
            mc_samples: 10_000_000,
            mc_seed: 100 + i as u64,
            mi: f64::NAN,
            mc_mi: f64::NAN,
            mc_stderr: f64::NAN,
        })
        .collect();
        let trellis = [3.0, 6.0, 9.0]
            .into_iter()
            .enumerate()
            .map(|(i, snr_db)| TrellisFixture {
                modulation: Modulation::Qam4,
                gamma: 0.1,
                snr_db,
                bins: 1024,
                n: 100_000,
                burn_in: 1000,
                batch: 1000,
                seed: 200 + i as u64,
                rate: f64::NAN,
                stderr: f64::NAN,
            })
            .collect();
        Fixtures {
            version: FIXTURE_VERSION,
            generator: format!("pnrate {} oracle fixtures --write", env!("CARGO_PKG_VERSION")),
            awgn,
            trellis,
        }
    }

    /// Fills in every value.
    pub fn compute(mut self) -> Result<Fixtures> {
        for a in self.awgn.iter_mut() {
            *a = a.recompute()?;
        }
        for t in self.trellis.iter_mut() {
            *t = t.recompute()?;
        }
        Ok(self)
    }

    pub fn awgn_entry(&self, modulation: Modulation, snr: f64) -> Option<&AwgnFixture> {
        self.awgn
            .iter()
            .find(|a| a.modulation == modulation && (a.snr - snr).abs() <= 1e-9 * snr)
    }

    pub fn trellis_entry(&self, modulation: Modulation, gamma: f64, snr_db: f64) -> Option<&TrellisFixture> {
        self.trellis.iter().find(|t| {
            t.modulation == modulation && t.gamma == gamma && (t.snr_db - snr_db).abs() < 1e-9
        })
    }
}
