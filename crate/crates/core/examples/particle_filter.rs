//! Runs a blind particle filter and reports the output entropy rate it implies.

use pnrate::bounds::output_entropy_series;
use pnrate::model::{generate_trace, ArmaSpec, ChannelParams, Constellation};
use pnrate::stats;

fn main() -> pnrate::Result<()> {
    let spec = ArmaSpec::sm_oscillator(0.1)?;
    let c = Constellation::qam4();
    let ch = ChannelParams::from_db(9.0)?;
    let t = generate_trace(&spec, &c, &ch, 20_000, 3)?;
    for np in [64, 512, 2048] {
        let (series, diag) = output_entropy_series(&spec, &c, &ch, &t, np)?;
        let s = stats::summarize(&series[1000..], 1000)?;
        println!(
            "Np={np:>5}: h(Y) = {:.4} ± {:.4} bits, {} resamples",
            s.mean, s.stderr, diag.resamples
        );
    }
    Ok(())
}
