//! Mean unsuccessful devices per RB versus load, and the implied threshold D.
//!
//! `cargo run --release --example mud_curve -- 32 40`  (L, trials)

use mrbcra::csmud::{collision_only, empirical_unsuccessful_curve, estimate_d, CurveParams, DEFAULT_STOP_FACTOR};

fn main() -> mrbcra::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let l = args.next().unwrap_or(16);
    let trials = args.next().unwrap_or(30);
    let n = 8 * l;
    let p = CurveParams {
        l,
        n,
        t: 20 * l,
        snr_db: 20.0,
        k_values: (1..l).step_by((l / 16).max(1)).collect(),
        trials,
        seed: 1,
        stop_factor: DEFAULT_STOP_FACTOR,
    };
    let curve = empirical_unsuccessful_curve(&p)?;
    for pt in &curve {
        println!("K = {:>3}  U = {:>7.3} +- {:.3}   collisions only {:.3}", pt.k, pt.mean_unsuccessful, pt.stderr, collision_only(pt.k, n));
    }
    let d = estimate_d(&curve, n, 0.1)?;
    println!("estimated D = {d} ({:.2} L)", d as f64 / l as f64);
    Ok(())
}
