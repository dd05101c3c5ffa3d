//! CRA against controlled multichannel ALOHA over a range of loads.

use mrbcra::sim::{run_aloha, run_with, Mode, SimOptions};
use mrbcra::SystemConfig;

fn main() -> mrbcra::Result<()> {
    println!("{:>6} {:>10} {:>9} {:>10} {:>9}", "lambda", "CRA thr", "CRA dly", "ALOHA thr", "ALOHA dly");
    for frac in [0.1, 0.2, 0.3, 0.4, 0.5] {
        let cfg = SystemConfig { lambda: frac * 32.0, slots: 4000, ..SystemConfig::default() };
        let cra = run_with(&cfg, Mode::Abstract, &SimOptions::for_config(&cfg))?;
        let aloha = run_aloha(&cfg, true)?;
        println!(
            "{:>6.1} {:>10.3} {:>9.3} {:>10.3} {:>9.3}",
            cfg.lambda, cra.throughput_per_rb, cra.normalized_delay, aloha.throughput_per_rb, aloha.normalized_delay
        );
    }
    Ok(())
}
