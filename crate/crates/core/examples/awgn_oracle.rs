//! Mutual information of QAM over the AWGN channel, by quadrature and by sampling.

use pnrate::model::{ChannelParams, Modulation};
use pnrate::oracle::{awgn_mi, AwgnMethod};

fn main() -> pnrate::Result<()> {
    for m in [Modulation::Qam4, Modulation::Qam16] {
        let c = m.constellation();
        for db in [0.0, 6.0, 12.0, 18.0] {
            let ch = ChannelParams::from_db(db)?;
            let q = awgn_mi(&c, &ch, AwgnMethod::default())?;
            let mc = awgn_mi(&c, &ch, AwgnMethod::MonteCarlo { n: 50_000, seed: 1 })?;
            println!("{:>5} {db:>4} dB: {q:.5} bits (sampled {mc:.5})", m.as_str());
        }
    }
    Ok(())
}
