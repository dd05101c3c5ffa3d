//! Monte Carlo one-slot drift of the total backlog, inside and outside the
//! band `B <= K_m <= D`.

use mrbcra::sim::{drift_probe, Mode};
use mrbcra::SystemConfig;

fn main() -> mrbcra::Result<()> {
    for lambda in [12.0, 16.0, 22.0] {
        let cfg = SystemConfig { lambda, ..SystemConfig::default() };
        let t = drift_probe(&cfg, Mode::Abstract, 5000)?;
        for e in [t.interior, t.complement] {
            println!(
                "lambda = {lambda:>4}: {:?} drift {:>8.3} +- {:.3} (bound {:.3})",
                e.region, e.mean_drift, e.stderr, e.bound
            );
        }
    }
    Ok(())
}
