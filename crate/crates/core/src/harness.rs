//! Parameter sweeps: one simulated trace per grid point and repeat, both bounds
//! on each, and a deterministic result table.
//!
//! Every trace seed is derived from the master seed and the grid coordinates, so
//! a row does not depend on which other rows are in the sweep or on the order in
//! which workers finish. Rows are sorted by coordinates before they are returned.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    input_entropy_series, lower_bound_from_series, output_entropy_series,
    state_entropy_gap_series, upper_bound_from_series, BoundEstimate, Components, Diagnostics,
    EstimatorOptions, TrackerChoice,
};
use crate::error::{Error, Result};
use crate::model::{
    generate_trace, ArmaSpec, ChannelParams, Modulation, ZeroFactor, SM_POLES, SM_ZEROS,
};
use crate::seed;

/// Column order of the result CSV.
pub const CSV_COLUMNS: [&str; 21] = [
    "model_id",
    "modulation",
    "snr_db",
    "gamma",
    "tracker",
    "n",
    "burn_in",
    "np_blind",
    "quad_nodes",
    "seed",
    "lb",
    "lb_se",
    "ub",
    "ub_se",
    "h_y",
    "h_y_given_xs",
    "d_term",
    "hx",
    "hx_given_y",
    "status",
    "wall_ms",
];

/// Minimum number of post-burn-in samples a sweep must average.
pub const MIN_AVERAGED: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// Label for the phase-noise model in the output.
    pub model_id: String,
    pub zeros: Vec<ZeroFactor>,
    pub poles: Vec<f64>,
    pub modulations: Vec<Modulation>,
    pub snr_db: Vec<f64>,
    pub gammas: Vec<f64>,
    pub n: usize,
    pub burn_in: usize,
    pub batch: usize,
    pub np_blind: usize,
    pub trackers: Vec<TrackerChoice>,
    pub quad_nodes: usize,
    pub master_seed: u64,
    pub repeats: usize,
}

impl SweepConfig {
    /// The oscillator model on 4- and 16-QAM over 0..21 dB, `γ ∈ {0.05, 0.15}`.
    pub fn default_sweep() -> Self {
        Self {
            model_id: "sm".into(),
            zeros: SM_ZEROS.to_vec(),
            poles: SM_POLES.to_vec(),
            modulations: vec![Modulation::Qam4, Modulation::Qam16],
            snr_db: (0..8).map(|i| 3.0 * i as f64).collect(),
            gammas: vec![0.05, 0.15],
            n: 200_000,
            burn_in: 1000,
            batch: 1000,
            np_blind: 4096,
            trackers: vec![TrackerChoice::Kalman, TrackerChoice::Particle(4096)],
            quad_nodes: 32,
            master_seed: 1,
            repeats: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.n <= self.burn_in + MIN_AVERAGED {
            return cfg(format!(
                "n = {} must exceed burn_in + {MIN_AVERAGED} = {}",
                self.n,
                self.burn_in + MIN_AVERAGED
            ));
        }
        if self.repeats == 0 {
            return cfg("repeats must be at least 1".into());
        }
        if self.batch == 0 || self.n - self.burn_in < 10 * self.batch {
            return cfg(format!(
                "batch = {} leaves fewer than 10 batches after burn-in",
                self.batch
            ));
        }
        if self.modulations.is_empty() || self.snr_db.is_empty() || self.gammas.is_empty() {
            return cfg("modulation, snr_db and gamma need at least one value each".into());
        }
        if self.trackers.is_empty() {
            return cfg("at least one tracker is required".into());
        }
        if self.np_blind < 2 {
            return cfg("np_blind must be at least 2".into());
        }
        if !(1..=crate::quadrature::MAX_NODES).contains(&self.quad_nodes) {
            return cfg(format!(
                "quad_nodes must be in 1..={}",
                crate::quadrature::MAX_NODES
            ));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return cfg("snr_db values must be finite".into());
        }
        for &g in &self.gammas {
            self.spec(g)?;
        }
        Ok(())
    }

    pub fn spec(&self, gamma: f64) -> Result<ArmaSpec> {
        ArmaSpec::from_zero_pole(&self.zeros, &self.poles, gamma)
    }

    pub fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions {
            burn_in: self.burn_in,
            batch: self.batch,
            quad_nodes: self.quad_nodes,
            np_blind: self.np_blind,
        }
    }

    /// Grid points in canonical order.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &modulation in &self.modulations {
            for &snr_db in &self.snr_db {
                for &gamma in &self.gammas {
                    for repeat in 0..self.repeats {
                        out.push(GridPoint {
                            modulation,
                            snr_db,
                            gamma,
                            repeat,
                        });
                    }
                }
            }
        }
        out
    }

    /// Trace seed of a grid point. Depends only on the master seed and the
    /// point's coordinates.
    pub fn trace_seed(&self, p: &GridPoint) -> u64 {
        let coords = format!(
            "model={};modulation={};snr_db={};gamma={};n={};repeat={}",
            self.model_id, p.modulation, p.snr_db, p.gamma, self.n, p.repeat
        );
        seed::child_seed(self.master_seed, &coords)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub modulation: Modulation,
    pub snr_db: f64,
    pub gamma: f64,
    pub repeat: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub model_id: String,
    pub modulation: Modulation,
    pub snr_db: f64,
    pub gamma: f64,
    pub tracker: TrackerChoice,
    pub repeat: usize,
    pub n: usize,
    pub burn_in: usize,
    pub np_blind: usize,
    pub quad_nodes: usize,
    pub seed: u64,
    pub lb: Option<BoundEstimate>,
    pub ub: Option<BoundEstimate>,
    /// `ok`, or `failed:<kind>` with the kind of the first error.
    pub status: String,
    pub error: Option<String>,
    pub wall_ms: u64,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn lb_value(&self) -> Option<(f64, f64)> {
        self.lb.as_ref().map(|b| (b.value, b.stderr))
    }

    pub fn ub_value(&self) -> Option<(f64, f64)> {
        self.ub.as_ref().map(|b| (b.value, b.stderr))
    }

    fn sort_key(&self) -> (Modulation, u64, u64, TrackerChoice, usize) {
        (
            self.modulation,
            order_bits(self.snr_db),
            order_bits(self.gamma),
            self.tracker,
            self.repeat,
        )
    }

    /// CSV fields in [`CSV_COLUMNS`] order. `wall_ms` is left empty unless
    /// `timing` is set, so that untimed output is reproducible byte for byte.
    pub fn csv_record(&self, timing: bool) -> Vec<String> {
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let (h_y, h_c, d) = match self.ub.as_ref().map(|b| b.components) {
            Some(Components::Upper {
                h_y,
                h_y_given_xs,
                d_term,
            }) => (Some(h_y), Some(h_y_given_xs), Some(d_term)),
            _ => (None, None, None),
        };
        let (hx, hxy) = match self.lb.as_ref().map(|b| b.components) {
            Some(Components::Lower { hx, hx_given_y }) => (Some(hx), Some(hx_given_y)),
            _ => (None, None),
        };
        vec![
            self.model_id.clone(),
            self.modulation.to_string(),
            self.snr_db.to_string(),
            self.gamma.to_string(),
            self.tracker.to_string(),
            self.n.to_string(),
            self.burn_in.to_string(),
            self.np_blind.to_string(),
            self.quad_nodes.to_string(),
            self.seed.to_string(),
            num(self.lb.as_ref().map(|b| b.value)),
            num(self.lb.as_ref().map(|b| b.stderr)),
            num(self.ub.as_ref().map(|b| b.value)),
            num(self.ub.as_ref().map(|b| b.stderr)),
            num(h_y),
            num(h_c),
            num(d),
            num(hx),
            num(hxy),
            self.status.clone(),
            if timing {
                self.wall_ms.to_string()
            } else {
                String::new()
            },
        ]
    }
}

/// Maps a float to an integer with the same ordering (for sort keys).
fn order_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Runs every grid point on up to `workers` threads. Estimator failures are
/// recorded in the affected rows; only an invalid configuration is an error.
pub fn run_sweep(cfg: &SweepConfig, workers: usize) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let points = cfg.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut rows: Vec<ResultRow> = pool.install(|| {
        points
            .par_iter()
            .flat_map_iter(|p| run_point(cfg, p))
            .collect()
    });
    rows.sort_by_key(|r| r.sort_key());
    Ok(rows)
}

/// All tracker rows for one grid point, sharing the trace, the lower bound and
/// the output entropy.
pub fn run_point(cfg: &SweepConfig, p: &GridPoint) -> Vec<ResultRow> {
    let start = Instant::now();
    let seed_value = cfg.trace_seed(p);
    let opts = cfg.estimator_options();
    let template = |tracker: TrackerChoice| ResultRow {
        model_id: cfg.model_id.clone(),
        modulation: p.modulation,
        snr_db: p.snr_db,
        gamma: p.gamma,
        tracker,
        repeat: p.repeat,
        n: cfg.n,
        burn_in: cfg.burn_in,
        np_blind: cfg.np_blind,
        quad_nodes: cfg.quad_nodes,
        seed: seed_value,
        lb: None,
        ub: None,
        status: "ok".into(),
        error: None,
        wall_ms: 0,
    };
    let fail = |row: &mut ResultRow, e: &Error| {
        if row.error.is_none() {
            row.status = format!("failed:{}", e.kind());
            row.error = Some(e.to_string());
        }
    };

    let constellation = p.modulation.constellation();
    let shared = (|| -> Result<_> {
        let spec = cfg.spec(p.gamma)?;
        let ch = ChannelParams::from_db(p.snr_db)?;
        let trace = generate_trace(&spec, &constellation, &ch, cfg.n, seed_value)?;
        Ok((spec, ch, trace))
    })();
    let (spec, ch, trace) = match shared {
        Ok(v) => v,
        Err(e) => {
            return cfg
                .trackers
                .iter()
                .map(|&t| {
                    let mut row = template(t);
                    fail(&mut row, &e);
                    row
                })
                .collect()
        }
    };

    let lb = input_entropy_series(&spec, &constellation, &ch, &trace, cfg.quad_nodes)
        .and_then(|(s, d)| lower_bound_from_series(&constellation, &s, &opts, d));
    let h_y = output_entropy_series(&spec, &constellation, &ch, &trace, cfg.np_blind);
    let shared_ms = start.elapsed().as_millis() as u64;

    let rows: Vec<ResultRow> = cfg
        .trackers
        .iter()
        .map(|&tracker| {
            let t0 = Instant::now();
            let mut row = template(tracker);
            match &lb {
                Ok(b) => row.lb = Some(*b),
                Err(e) => fail(&mut row, e),
            }
            match &h_y {
                Ok((h, d1)) => {
                    let ub = state_entropy_gap_series(&spec, &ch, &trace, tracker).and_then(
                        |(d, d2)| {
                            let diag = Diagnostics {
                                resamples: d1.resamples + d2.resamples,
                                fold_caps: d2.fold_caps,
                                underflows: 0,
                            };
                            upper_bound_from_series(h, &d, &ch, &opts, diag)
                        },
                    );
                    match ub {
                        Ok(b) => row.ub = Some(b),
                        Err(e) => fail(&mut row, &e),
                    }
                }
                Err(e) => fail(&mut row, e),
            }
            row.wall_ms = shared_ms + t0.elapsed().as_millis() as u64;
            log::info!(
                "{} {} snr={} gamma={} {}: {} ({} ms)",
                row.model_id,
                row.modulation,
                row.snr_db,
                row.gamma,
                row.tracker,
                row.status,
                row.wall_ms
            );
            row
        })
        .collect();
    rows
}

/// Writes rows as CSV with a header.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r.csv_record(timing))?;
    }
    w.flush()?;
    Ok(())
}

/// Estimate-versus-estimate comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Check {
    pub delta: f64,
    /// Combined standard error `sqrt(σ_a² + σ_b²)`.
    pub sigma: f64,
    pub flagged: bool,
}

impl Check {
    pub fn new(a: (f64, f64), b: (f64, f64)) -> Self {
        let delta = b.0 - a.0;
        let sigma = (a.1 * a.1 + b.1 * b.1).sqrt();
        Self {
            delta,
            sigma,
            flagged: delta.abs() > 3.0 * sigma,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    /// First versus second half of the averaged samples of one row.
    Halves,
    /// Two rows of the same configuration, for example `n` versus `2n`, or
    /// different particle counts.
    Pair,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub lb: Option<Check>,
    pub ub: Option<Check>,
}

impl ConvergenceReport {
    pub fn flagged(&self) -> bool {
        self.lb.is_some_and(|c| c.flagged) || self.ub.is_some_and(|c| c.flagged)
    }
}

/// Compares two estimates of the same configuration. With [`Split::Halves`]
/// only the first row is used; each half carries roughly `√2` times the
/// full-run standard error.
pub fn convergence_report(rows: &[&ResultRow], split: Split) -> Result<ConvergenceReport> {
    match split {
        Split::Halves => {
            let r = rows
                .first()
                .ok_or_else(|| Error::invalid("rows", "need one row to split"))?;
            let halves = |b: &BoundEstimate| {
                let se = b.stderr * std::f64::consts::SQRT_2;
                Check::new((b.first_half, se), (b.second_half, se))
            };
            Ok(ConvergenceReport {
                lb: r.lb.as_ref().map(halves),
                ub: r.ub.as_ref().map(halves),
            })
        }
        Split::Pair => {
            let [a, b] = rows else {
                return Err(Error::invalid("rows", "pair comparison needs exactly two rows"));
            };
            let pair = |x: Option<(f64, f64)>, y: Option<(f64, f64)>| match (x, y) {
                (Some(x), Some(y)) => Some(Check::new(x, y)),
                _ => None,
            };
            Ok(ConvergenceReport {
                lb: pair(a.lb_value(), b.lb_value()),
                ub: pair(a.ub_value(), b.ub_value()),
            })
        }
    }
}
