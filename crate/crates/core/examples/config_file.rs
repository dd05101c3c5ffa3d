//! Writes, edits and reloads a system configuration.

use mrbcra::{validate_config, SystemConfig};

fn main() -> mrbcra::Result<()> {
    let cfg = SystemConfig::default();
    let text = cfg.to_toml_string();
    println!("{text}");
    let edited = text.replace("D = 25", "D = 40");
    match SystemConfig::from_toml_str(&edited) {
        Ok(_) => println!("unexpectedly valid"),
        Err(e) => println!("rejected: {e}"),
    }
    let tuned = validate_config(SystemConfig { N: 640, lambda: 18.0, ..cfg })?;
    println!("eta = {}, noise variance = {}", tuned.eta(), tuned.noise_var());
    Ok(())
}
