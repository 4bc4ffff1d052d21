//! Run configuration files.
//!
//! A config file is flat TOML: one key per sweep parameter, no tables. List-valued
//! parameters also accept a single scalar. Every key is optional in the file; a
//! command-line flag with the same name overrides it.
//!
//! ```toml
//! model = "sm"                # sm | wiener | arma
//! zeros = [[0.9937, 1], [0.7286, 2]]   # (1 - c z^-d) factors, model = "arma" only
//! poles = [0.9999]                     # (1 - p z^-1) factors, model = "arma" only
//! modulation = ["qam4", "qam16"]
//! snr_db = [0, 3, 6]
//! gamma = 0.05
//! tracker = ["kalman", "particle:4096"]
//! n = 200000
//! burn_in = 1000
//! batch = 1000
//! np_blind = 4096
//! quad_nodes = 32
//! seed = 1
//! repeats = 1
//! workers = 8
//! output = "results.csv"
//! timing = false
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bounds::TrackerChoice;
use crate::error::{Error, Result};
use crate::harness::SweepConfig;
use crate::model::{Modulation, ZeroFactor, SM_POLES, SM_ZEROS};

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Free-running oscillator model (one pole, two zeros).
    #[default]
    Sm,
    /// Random phase walk.
    Wiener,
    /// Custom zeros and poles from the config file.
    Arma,
}

impl ModelKind {
    fn as_str(self) -> &'static str {
        match self {
            ModelKind::Sm => "sm",
            ModelKind::Wiener => "wiener",
            ModelKind::Arma => "arma",
        }
    }
}

/// Contents of a config file, or the overrides collected from flags.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelKind>,
    pub model_id: Option<String>,
    /// `[coeff, delay]` pairs.
    pub zeros: Option<Vec<(f64, usize)>>,
    pub poles: Option<Vec<f64>>,
    pub modulation: Option<OneOrMany<Modulation>>,
    pub snr_db: Option<OneOrMany<f64>>,
    pub gamma: Option<OneOrMany<f64>>,
    pub tracker: Option<OneOrMany<TrackerChoice>>,
    pub n: Option<usize>,
    pub burn_in: Option<usize>,
    pub batch: Option<usize>,
    pub np_blind: Option<usize>,
    pub quad_nodes: Option<usize>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub timing: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: FileConfig) -> FileConfig {
        FileConfig {
            model: other.model.or(self.model),
            model_id: other.model_id.or(self.model_id),
            zeros: other.zeros.or(self.zeros),
            poles: other.poles.or(self.poles),
            modulation: other.modulation.or(self.modulation),
            snr_db: other.snr_db.or(self.snr_db),
            gamma: other.gamma.or(self.gamma),
            tracker: other.tracker.or(self.tracker),
            n: other.n.or(self.n),
            burn_in: other.burn_in.or(self.burn_in),
            batch: other.batch.or(self.batch),
            np_blind: other.np_blind.or(self.np_blind),
            quad_nodes: other.quad_nodes.or(self.quad_nodes),
            seed: other.seed.or(self.seed),
            repeats: other.repeats.or(self.repeats),
            workers: other.workers.or(self.workers),
            output: other.output.or(self.output),
            timing: other.timing.or(self.timing),
        }
    }

    /// Sweep configuration with unset fields taken from the default sweep.
    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let d = SweepConfig::default_sweep();
        let model = self.model.unwrap_or_default();
        let (zeros, poles) = match model {
            ModelKind::Sm => {
                self.reject_taps("sm")?;
                (SM_ZEROS.to_vec(), SM_POLES.to_vec())
            }
            ModelKind::Wiener => {
                self.reject_taps("wiener")?;
                // one zero at the origin keeps N = 1 with all-zero taps
                (vec![ZeroFactor::new(0.0, 1)], vec![0.0])
            }
            ModelKind::Arma => (
                self.zeros
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .map(|(c, d)| ZeroFactor::new(c, d))
                    .collect(),
                self.poles.clone().unwrap_or_default(),
            ),
        };
        let cfg = SweepConfig {
            model_id: self
                .model_id
                .clone()
                .unwrap_or_else(|| model.as_str().to_string()),
            zeros,
            poles,
            modulations: list(&self.modulation).unwrap_or(d.modulations),
            snr_db: list(&self.snr_db).unwrap_or(d.snr_db),
            gammas: list(&self.gamma).unwrap_or(d.gammas),
            n: self.n.unwrap_or(d.n),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            batch: self.batch.unwrap_or(d.batch),
            np_blind: self.np_blind.unwrap_or(d.np_blind),
            trackers: list(&self.tracker).unwrap_or(d.trackers),
            quad_nodes: self.quad_nodes.unwrap_or(d.quad_nodes),
            master_seed: self.seed.unwrap_or(d.master_seed),
            repeats: self.repeats.unwrap_or(d.repeats),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Single-point configuration: `modulation`, `snr_db` and `gamma` must each be
    /// given exactly once.
    pub fn point_config(&self) -> Result<SweepConfig> {
        single("modulation", &self.modulation)?;
        single("snr_db", &self.snr_db)?;
        single("gamma", &self.gamma)?;
        self.sweep_config()
    }

    fn reject_taps(&self, model: &str) -> Result<()> {
        if self.zeros.is_some() || self.poles.is_some() {
            return Err(Error::Config(format!(
                "`zeros`/`poles` only apply to model = \"arma\", not \"{model}\""
            )));
        }
        Ok(())
    }
}

fn list<T: Clone>(v: &Option<OneOrMany<T>>) -> Option<Vec<T>> {
    v.clone().map(OneOrMany::into_vec)
}

fn single<T: Clone>(name: &str, v: &Option<OneOrMany<T>>) -> Result<()> {
    match list(v).map(|l| l.len()) {
        None => Err(Error::Config(format!("missing required field `{name}`"))),
        Some(1) => Ok(()),
        Some(k) => Err(Error::Config(format!(
            "field `{name}` must have exactly one value here, got {k}"
        ))),
    }
}
