//! A small parameter sweep written as CSV to stdout.

use pnrate::bounds::TrackerChoice;
use pnrate::harness::{run_sweep, write_csv, SweepConfig};
use pnrate::model::Modulation;

fn main() -> pnrate::Result<()> {
    let cfg = SweepConfig {
        modulations: vec![Modulation::Qam4],
        snr_db: vec![0.0, 6.0, 12.0],
        gammas: vec![0.05],
        n: 12_000,
        np_blind: 256,
        trackers: vec![TrackerChoice::Kalman],
        ..SweepConfig::default_sweep()
    };
    let rows = run_sweep(&cfg, 1)?;
    write_csv(&rows, std::io::stdout().lock(), false)
}
