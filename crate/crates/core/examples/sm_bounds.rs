//! Lower and upper rate bounds for the SM oscillator model with both trackers.

use pnrate::bounds::{lower_bound, upper_bound, EstimatorOptions, TrackerChoice};
use pnrate::model::{generate_trace, ArmaSpec, ChannelParams, Constellation};

fn main() -> pnrate::Result<()> {
    let spec = ArmaSpec::sm_oscillator(0.05)?;
    let c = Constellation::qam4();
    let ch = ChannelParams::from_db(6.0)?;
    let t = generate_trace(&spec, &c, &ch, 20_000, 5)?;
    let opts = EstimatorOptions {
        np_blind: 1024,
        ..EstimatorOptions::default()
    };
    let lb = lower_bound(&spec, &c, &ch, &t, &opts)?;
    println!("LB = {:.4} ± {:.4}  {:?}", lb.value, lb.stderr, lb.components);
    for tracker in [TrackerChoice::Kalman, TrackerChoice::Particle(512)] {
        let ub = upper_bound(&spec, &c, &ch, &t, tracker, &opts)?;
        println!("UB[{tracker}] = {:.4} ± {:.4}  {:?}", ub.value, ub.stderr, ub.components);
    }
    Ok(())
}
