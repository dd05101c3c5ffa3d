//! A few slots with synthesized signals and one S-OMP detector per RB.

use mrbcra::csmud::generate_codebook;
use mrbcra::sim::{step_phy, BacklogState, SimOptions};
use mrbcra::SystemConfig;

fn main() -> mrbcra::Result<()> {
    let cfg = SystemConfig { L: 16, N: 160, M: 4, T: 320, D: 12, Kbar: 32, lambda: 6.0, slots: 10, ..SystemConfig::default() };
    let codebook = generate_codebook(cfg.L, cfg.N, cfg.seed)?;
    let opts = SimOptions::for_config(&cfg);
    let mut state = BacklogState::empty(cfg.M);
    for _ in 0..cfg.slots {
        let (next, rec) = step_phy(&state, &cfg, &codebook, &opts)?;
        let per_rb: Vec<String> = rec.per_rb.iter().map(|c| format!("{}/{}", c.successes, c.k)).collect();
        println!("slot {:>2}: arrivals {:>2}, decoded per RB {}", rec.slot, rec.arrivals_admitted, per_rb.join(" "));
        state = next;
    }
    println!("backlog after {} slots: {}", cfg.slots, state.backlog());
    Ok(())
}
