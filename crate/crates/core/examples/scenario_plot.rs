//! Runs the rate-sweep scenario and extracts plot columns.

use mrbcra::scenario::{emit_plotdata, run_scenario, Overrides, Scenario, ScenarioName};

fn main() -> mrbcra::Result<()> {
    let dir = std::env::temp_dir().join("mrbcra-example");
    let out = run_scenario(&Scenario {
        name: ScenarioName::RateSweep,
        overrides: Overrides { slots: Some(2000), lambda_frac: Some((0.1, 0.5)), ..Default::default() },
        output_dir: dir.clone(),
    })?;
    let dat = dir.join("rate-sweep.dat");
    emit_plotdata(&out.csv, &["lambda", "cra_throughput", "aloha_throughput"], &dat)?;
    print!("{}", std::fs::read_to_string(&dat)?);
    println!("files in {}", dir.display());
    Ok(())
}
