//! Builds phase-noise models from zeros and poles and simulates a short trace.

use pnrate::model::{generate_trace, ArmaSpec, ChannelParams, Constellation, ZeroFactor};

fn main() -> pnrate::Result<()> {
    let sm = ArmaSpec::sm_oscillator(0.05)?;
    println!("SM oscillator: order {}, state dim {}", sm.order(), sm.state_dim());
    println!("  a = {:?}", sm.a_taps());
    println!("  b = {:?}", sm.b_taps());

    let custom = ArmaSpec::from_zero_pole(&[ZeroFactor::new(0.5, 1)], &[0.9, -0.5], 0.1)?;
    println!("custom register covariance:\n{}", custom.register_stationary_cov());

    let c = Constellation::qam4();
    let ch = ChannelParams::from_db(10.0)?;
    let t = generate_trace(&sm, &c, &ch, 8, 7)?;
    for (k, (y, s)) in t.y.iter().zip(&t.states).enumerate() {
        println!("k={k} phi={:.4} y={:.3}", s.phi, y);
    }
    Ok(())
}
