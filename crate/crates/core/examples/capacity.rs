//! Closed-form capacity numbers for a range of recovery thresholds.

use mrbcra::analysis::{capacity_report, cra_aloha_advantage, throughput_aloha};

fn main() -> mrbcra::Result<()> {
    let (l, n) = (32, 320);
    println!("{:>3} {:>9} {:>10} {:>9} {:>10} {:>6}", "D", "B_DN", "lambda_max", "lambda1*", "upper", "N*");
    for d in [5, 10, 15, 20, 25, 28, 31] {
        let r = capacity_report(n, d)?;
        let ns = r.n_star.map_or("-".to_string(), |v| v.to_string());
        println!(
            "{d:>3} {:>9.4} {:>10.4} {:>9.4} {:>10.4} {ns:>6}",
            r.b_dn, r.lambda_max, r.lambda1_star, r.lambda_max_upper
        );
    }
    println!();
    println!("ALOHA peak throughput per RB (L = {l}): {:.4}", throughput_aloha(l as f64, l));
    for eta in [1.0, 2.0, 3.258, 5.0, 10.0] {
        println!("eta = {eta:>6}: CRA/ALOHA advantage {:.4}", cra_aloha_advantage(eta));
    }
    Ok(())
}
