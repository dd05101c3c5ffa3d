use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mrbcra::scenario::{emit_plotdata, rerun_from_meta, run_scenario, Overrides, Scenario, ScenarioName};
use mrbcra::sim::Mode;
use mrbcra::SystemConfig;

/// Runs one named MRB-CRA experiment and writes `<name>.csv`, `.meta` and `.summary`.
#[derive(Debug, Parser)]
#[command(name = "mrbcra", version)]
#[allow(non_snake_case)]
struct Args {
    /// mud-curve | evolution | d-sweep | rate-sweep | l-sweep | eta-sweep | analyze
    #[arg(value_name = "SCENARIO")]
    name: Option<ScenarioName>,
    #[arg(long)]
    scenario: Option<ScenarioName>,
    /// Full config file (TOML, keys as in SystemConfig).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run exactly from a previously written `.meta` file.
    #[arg(long)]
    from_meta: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long = "L")]
    L: Option<usize>,
    #[arg(long = "N")]
    N: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "M")]
    M: Option<usize>,
    #[arg(long = "T")]
    T: Option<usize>,
    #[arg(long = "D")]
    D: Option<usize>,
    #[arg(long)]
    kbar: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Range of lambda / L, e.g. `0.1..0.9`.
    #[arg(long, value_parser = parse_range)]
    lambda_frac: Option<(f64, f64)>,
    /// Also write `<name>.dat` with these comma-separated CSV columns.
    #[arg(long, value_delimiter = ',')]
    plot: Vec<String>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once("..").ok_or("expected FROM..TO")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b {
        return Err("FROM must not exceed TO".into());
    }
    Ok((a, b))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: Args) -> mrbcra::Result<()> {
    let out = if let Some(meta) = &args.from_meta {
        rerun_from_meta(meta, &args.out)?
    } else {
        let name = args
            .name
            .or(args.scenario)
            .ok_or_else(|| mrbcra::Error::Parse("no scenario given".into()))?;
        let base = match &args.config {
            Some(path) => Overrides::from_config(&SystemConfig::load(path)?),
            None => Overrides::default(),
        };
        let cli = Overrides {
            L: args.L,
            N: args.N,
            eta: args.eta,
            M: args.M,
            T: args.T,
            D: args.D,
            kbar: args.kbar,
            lambda: args.lambda,
            snr_db: args.snr,
            slots: args.slots,
            seed: args.seed,
            mode: args.mode,
            trials: args.trials,
            k_max: args.k_max,
            lambda_frac: args.lambda_frac,
        };
        run_scenario(&Scenario { name, overrides: base.merge(cli), output_dir: args.out.clone() })?
    };
    if !args.plot.is_empty() {
        let cols: Vec<&str> = args.plot.iter().map(String::as_str).collect();
        emit_plotdata(&out.csv, &cols, out.csv.with_extension("dat"))?;
    }
    println!("{}", std::fs::read_to_string(&out.summary)?.trim_end());
    Ok(())
}
