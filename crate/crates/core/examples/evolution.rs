//! Slot-by-slot load of the abstract model below and above the rate limit.

use mrbcra::sim::{run, Mode};
use mrbcra::SystemConfig;

fn main() -> mrbcra::Result<()> {
    for lambda in [10.0, 12.0, 14.0] {
        let cfg = SystemConfig { lambda, slots: 3000, ..SystemConfig::default() };
        let m = run(&cfg, Mode::Abstract, 300)?;
        println!("lambda = {lambda}");
        for rec in m.trace.iter().step_by(500) {
            println!(
                "  slot {:>5}: transmitted {:>4}, successful {:>4}, backlog {:>4}, rate-controlled RBs {}",
                rec.slot, rec.transmitted, rec.successful, rec.carried, rec.rate_control_active
            );
        }
        println!(
            "  mean K/RB {:.3}, throughput/RB {:.3}, delay {:.3}, blocked {:.3}",
            m.mean_k_per_rb, m.throughput_per_rb, m.normalized_delay, m.blocked_fraction
        );
    }
    Ok(())
}
