//! Tracks the phase of the SM oscillator with the data-aided extended Kalman filter.

use pnrate::angle::wrap_pi;
use pnrate::ekf::Ekf;
use pnrate::model::{generate_trace, ArmaSpec, ChannelParams, Constellation};

fn main() -> pnrate::Result<()> {
    let spec = ArmaSpec::sm_oscillator(0.05)?;
    let c = Constellation::qam16();
    let ch = ChannelParams::from_db(20.0)?;
    let t = generate_trace(&spec, &c, &ch, 2000, 11)?;
    let ekf = Ekf::new(&spec);
    let mut s = ekf.init(t.initial_phase())?;
    let mut sq = 0.0;
    for k in 0..t.len() {
        if k > 0 {
            s = ekf.predict(&s)?;
        }
        s = ekf.update(&s, t.y[k], t.x[k], &ch)?;
        let err = wrap_pi(s.moments.mean()[0] - t.states[k].phi);
        sq += err * err;
        if k % 400 == 0 {
            println!(
                "k={k:>4} true {:.3} est {:.3} sd {:.4}",
                t.states[k].phi,
                s.moments.mean()[0],
                s.moments.cov()[(0, 0)].sqrt()
            );
        }
    }
    println!("rms phase error {:.4} rad", (sq / t.len() as f64).sqrt());
    Ok(())
}
