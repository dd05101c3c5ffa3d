//! Lower fixed point of the retransmission balance as the arrival rate grows.

use mrbcra::analysis::{lambda_max, solve_lambda1};
use mrbcra::Error;

fn main() -> mrbcra::Result<()> {
    let (n, d) = (320, 25);
    let peak = lambda_max(n, d)?;
    println!("lambda_max = {:.4} at lambda1 = {:.4}", peak.lambda_max, peak.lambda1_star);
    println!("{:>7} {:>9} {:>9} {:>7}  upper roots", "lambda", "lambda1", "lambda2", "delay");
    for lambda in [2.0, 6.0, 10.0, 14.0, 15.5, 16.0, 16.5] {
        match solve_lambda1(lambda, n, d, 1e-12) {
            Ok(s) => println!(
                "{lambda:>7.2} {:>9.4} {:>9.4} {:>7.4}  {:?}",
                s.lambda1,
                s.lambda2,
                s.delay,
                s.upper_roots.iter().map(|r| (r * 1e3).round() / 1e3).collect::<Vec<_>>()
            ),
            Err(Error::NoSteadyState { .. }) => println!("{lambda:>7.2}  no steady state"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
