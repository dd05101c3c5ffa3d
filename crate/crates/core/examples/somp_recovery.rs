//! Detects the active spreading codes of one resource block with S-OMP.

use mrbcra::csmud::{evaluate_recovery, generate_codebook, somp_recover, synthesize_rb, DEFAULT_STOP_FACTOR};
use mrbcra::rng::{derive_stream, Purpose};
use mrbcra::SystemConfig;
use rand::Rng;

fn main() -> mrbcra::Result<()> {
    let cfg = SystemConfig { N: 256, ..SystemConfig::default() };
    let codebook = generate_codebook(cfg.L, cfg.N, cfg.seed)?;
    let mut pick = derive_stream(cfg.seed, Purpose::Custom(1), 0, 0);
    for k in [4usize, 12, 20, 28] {
        let active: Vec<(u64, usize)> = (0..k as u64).map(|id| (id, pick.gen_range(0..cfg.N))).collect();
        let mut rng = derive_stream(cfg.seed, Purpose::Phy, 0, k as u64);
        let obs = synthesize_rb(&cfg, &codebook, &active, &mut rng)?;
        let res = somp_recover(&obs.y, &codebook, cfg.L - 1, DEFAULT_STOP_FACTOR, cfg.noise_var())?;
        let out = evaluate_recovery(&obs, &res);
        println!(
            "K = {k:>2}: {:>2} iterations, residual {:>10.3}, {} of {k} devices failed{}",
            res.iterations,
            res.residual_energy,
            out.unsuccessful,
            if res.ill_conditioned { " (stopped on conditioning)" } else { "" }
        );
    }
    Ok(())
}
