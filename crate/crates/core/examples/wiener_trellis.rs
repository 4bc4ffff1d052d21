//! Information rate under Wiener phase noise from the quantized-phase trellis.

use pnrate::model::{ChannelParams, Constellation};
use pnrate::oracle::{trellis_rate, TrellisConfig};

fn main() -> pnrate::Result<()> {
    let c = Constellation::qam4();
    let cfg = TrellisConfig {
        bins: 512,
        n: 20_000,
        ..TrellisConfig::default()
    };
    for gamma in [0.01, 0.1, 0.3] {
        for db in [3.0, 9.0] {
            let ch = ChannelParams::from_db(db)?;
            let r = trellis_rate(gamma, &c, &ch, &cfg)?;
            println!("gamma {gamma:<4} {db} dB: {:.4} ± {:.4} bits", r.mean, r.stderr);
        }
    }
    Ok(())
}
