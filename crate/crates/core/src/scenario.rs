//! Named experiments: each resolves a full parameter set, runs, and writes
//! `<name>.csv`, `<name>.meta` and `<name>.summary` into an output directory.
//!
//! The `.meta` file is the resolved [`ResolvedScenario`] in TOML and is enough
//! to re-run the experiment bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    capacity_report, collided_rate, cra_aloha_advantage, drift_bound, lambda_max, lambda_max_upper, min_stable_n,
    solve_lambda1, stability_bound, throughput_aloha, SteadyState,
};
use crate::config::{validate_config, SystemConfig};
use crate::csmud::{empirical_unsuccessful_curve, estimate_d, write_curve_csv, CurveParams, DEFAULT_STOP_FACTOR};
use crate::error::{Error, Result};
use crate::sim::{complexity_model, run_aloha_with, run_with, Mode, RunMetrics, SimOptions};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

const SOLVER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    /// Mean unsuccessful devices versus per-RB load under S-OMP.
    MudCurve,
    /// Slot trace of total load and arrivals.
    Evolution,
    /// Arrival rate set to `lambda_max(D)` for a range of `D`.
    DSweep,
    /// CRA against ALOHA over a range of `lambda / L`.
    RateSweep,
    /// Varying `L` at fixed total subcarriers `J`.
    LSweep,
    /// Varying the expansion factor `eta`.
    EtaSweep,
    /// Closed-form capacity tables.
    Analyze,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        ScenarioName::MudCurve,
        ScenarioName::Evolution,
        ScenarioName::DSweep,
        ScenarioName::RateSweep,
        ScenarioName::LSweep,
        ScenarioName::EtaSweep,
        ScenarioName::Analyze,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::MudCurve => "mud-curve",
            ScenarioName::Evolution => "evolution",
            ScenarioName::DSweep => "d-sweep",
            ScenarioName::RateSweep => "rate-sweep",
            ScenarioName::LSweep => "l-sweep",
            ScenarioName::EtaSweep => "eta-sweep",
            ScenarioName::Analyze => "analyze",
        }
    }
}

impl std::str::FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown scenario `{s}`")))
    }
}

/// Partial parameter set given on the command line or in a config file.
#[derive(Debug, Clone, Default, PartialEq)]
#[allow(non_snake_case)]
pub struct Overrides {
    pub L: Option<usize>,
    pub N: Option<usize>,
    pub eta: Option<f64>,
    pub M: Option<usize>,
    pub T: Option<usize>,
    pub D: Option<usize>,
    pub kbar: Option<usize>,
    pub lambda: Option<f64>,
    pub snr_db: Option<f64>,
    pub slots: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub trials: Option<usize>,
    pub k_max: Option<usize>,
    pub lambda_frac: Option<(f64, f64)>,
}

impl Overrides {
    /// Every field of a full config as an override.
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self {
            L: Some(cfg.L),
            N: Some(cfg.N),
            M: Some(cfg.M),
            T: Some(cfg.T),
            D: Some(cfg.D),
            kbar: Some(cfg.Kbar),
            lambda: Some(cfg.lambda),
            snr_db: Some(cfg.snr_db),
            slots: Some(cfg.slots),
            seed: Some(cfg.seed),
            ..Default::default()
        }
    }

    /// Fields set in `other` win.
    pub fn merge(self, other: Overrides) -> Self {
        Self {
            L: other.L.or(self.L),
            N: other.N.or(self.N),
            eta: other.eta.or(self.eta),
            M: other.M.or(self.M),
            T: other.T.or(self.T),
            D: other.D.or(self.D),
            kbar: other.kbar.or(self.kbar),
            lambda: other.lambda.or(self.lambda),
            snr_db: other.snr_db.or(self.snr_db),
            slots: other.slots.or(self.slots),
            seed: other.seed.or(self.seed),
            mode: other.mode.or(self.mode),
            trials: other.trials.or(self.trials),
            k_max: other.k_max.or(self.k_max),
            lambda_frac: other.lambda_frac.or(self.lambda_frac),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: ScenarioName,
    pub overrides: Overrides,
    pub output_dir: PathBuf,
}

/// Everything a scenario run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedScenario {
    pub scenario: ScenarioName,
    pub version: String,
    pub mode: Mode,
    pub trials: usize,
    pub k_max: usize,
    pub lambda_frac_from: f64,
    pub lambda_frac_to: f64,
    pub lambda_frac_step: f64,
    pub d_values: Vec<usize>,
    pub l_values: Vec<usize>,
    pub eta_values: Vec<usize>,
    pub total_subcarriers: usize,
    pub load_frac: f64,
    pub d_frac: f64,
    pub complexity_c: f64,
    pub slack: f64,
    pub stop_factor: f64,
    pub config: SystemConfig,
}

fn default_d(l: usize) -> usize {
    ((25.0 / 32.0 * l as f64).round() as usize).clamp(1, l.saturating_sub(1).max(1))
}

/// Fills every unset parameter with the scenario's defaults: `(L, M) = (32, 8)`,
/// `eta = 10` (8 for the MUD curve), `Kbar = 2L`, `T = 20L`, 20 dB, and the
/// arrival rate at `lambda_max(N, D)`.
pub fn resolve(name: ScenarioName, o: &Overrides) -> Result<ResolvedScenario> {
    let l = o.L.unwrap_or(32);
    let eta = o.eta.unwrap_or(if name == ScenarioName::MudCurve { 8.0 } else { 10.0 });
    let n = o.N.unwrap_or((eta * l as f64).round() as usize);
    let d = o.D.unwrap_or_else(|| default_d(l));
    let mode = o.mode.unwrap_or(Mode::Abstract);
    let lambda = match o.lambda {
        Some(v) => v,
        None if name == ScenarioName::EtaSweep => 12.0,
        None if d <= n && d >= 1 => (lambda_max(n, d)?.lambda_max * 100.0).round() / 100.0,
        None => 0.0,
    };
    let config = SystemConfig {
        L: l,
        N: n,
        M: o.M.unwrap_or(8),
        T: o.T.unwrap_or(20 * l),
        D: d,
        Kbar: o.kbar.unwrap_or(2 * l),
        lambda,
        snr_db: o.snr_db.unwrap_or(20.0),
        slots: o.slots.unwrap_or(match mode {
            Mode::Abstract => 10_000,
            Mode::Phy => 1_000,
        }),
        seed: o.seed.unwrap_or(1),
    };
    let config = validate_config(config)?;
    let (from, to) = o.lambda_frac.unwrap_or((0.1, 0.9));
    Ok(ResolvedScenario {
        scenario: name,
        version: VERSION.to_string(),
        mode,
        trials: o.trials.unwrap_or(100),
        k_max: o.k_max.unwrap_or(40),
        lambda_frac_from: from,
        lambda_frac_to: to,
        lambda_frac_step: 0.1,
        d_values: ((5 * l).div_ceil(8)..l).collect(),
        l_values: vec![16, 32, 64, 128],
        eta_values: (1..=10).collect(),
        total_subcarriers: 512,
        load_frac: 0.8,
        d_frac: 0.8,
        complexity_c: 2.0,
        slack: 0.1,
        stop_factor: DEFAULT_STOP_FACTOR,
        config,
    })
}

impl ResolvedScenario {
    pub fn to_meta(&self) -> String {
        toml::to_string(self).expect("resolved scenario is always serializable")
    }

    pub fn from_meta(text: &str) -> Result<Self> {
        let r: ResolvedScenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        validate_config(r.config)?;
        Ok(r)
    }

    fn sim_options(&self, cfg: &SystemConfig) -> SimOptions {
        SimOptions { stop_factor: self.stop_factor, ..SimOptions::for_config(cfg) }
    }

    fn lambda_fracs(&self) -> Vec<f64> {
        let steps = ((self.lambda_frac_to - self.lambda_frac_from) / self.lambda_frac_step + 1e-9).floor() as usize;
        (0..=steps)
            .map(|i| ((self.lambda_frac_from + i as f64 * self.lambda_frac_step) * 1e9).round() / 1e9)
            .collect()
    }
}

/// Files written by one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub summary: PathBuf,
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutput> {
    let resolved = resolve(scenario.name, &scenario.overrides)?;
    run_resolved(&resolved, &scenario.output_dir)
}

/// Re-runs a scenario from its `.meta` file.
pub fn rerun_from_meta(meta_path: impl AsRef<Path>, output_dir: impl AsRef<Path>) -> Result<ScenarioOutput> {
    let text = fs::read_to_string(meta_path)?;
    run_resolved(&ResolvedScenario::from_meta(&text)?, output_dir.as_ref())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

fn steady(lambda: f64, n: usize, d: usize) -> Option<SteadyState> {
    solve_lambda1(lambda, n, d, SOLVER_TOL).ok()
}

struct Summary(String);

impl Summary {
    fn new() -> Self {
        Summary(String::new())
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }

    fn metrics(&mut self, prefix: &str, m: &RunMetrics) {
        self.kv(&format!("{prefix}mean_k_per_rb"), m.mean_k_per_rb);
        self.kv(&format!("{prefix}throughput_per_rb"), m.throughput_per_rb);
        self.kv(&format!("{prefix}throughput_stderr"), m.throughput_stderr);
        self.kv(&format!("{prefix}normalized_delay"), m.normalized_delay);
        self.kv(&format!("{prefix}mean_packet_delay_slots"), m.mean_packet_delay_slots);
        self.kv(&format!("{prefix}blocked_fraction"), m.blocked_fraction);
        self.kv(&format!("{prefix}measured_slots"), m.measured_slots);
    }
}

pub fn run_resolved(r: &ResolvedScenario, out_dir: &Path) -> Result<ScenarioOutput> {
    fs::create_dir_all(out_dir)?;
    let name = r.scenario.as_str();
    let cfg = r.config;
    let mut csv = String::new();
    let mut summary = Summary::new();
    summary.kv("scenario", name);

    match r.scenario {
        ScenarioName::Analyze => {
            csv.push_str("D,B_DN,lambda_max,lambda1_star,lambda_max_upper,N_star\n");
            for d in 1..cfg.L.min(cfg.N + 1) {
                let rep = capacity_report(cfg.N, d)?;
                let _ = writeln!(
                    csv,
                    "{d},{},{},{},{},{}",
                    rep.b_dn,
                    rep.lambda_max,
                    rep.lambda1_star,
                    rep.lambda_max_upper,
                    rep.n_star.map_or_else(String::new, |n| n.to_string())
                );
            }
            let rep = capacity_report(cfg.N, cfg.D)?;
            summary.kv("L", cfg.L);
            summary.kv("N", cfg.N);
            summary.kv("D", cfg.D);
            summary.kv("eta", cfg.eta());
            summary.kv("B_DN", rep.b_dn);
            summary.kv("lambda_max", rep.lambda_max);
            summary.kv("lambda1_star", rep.lambda1_star);
            summary.kv("lambda_max_upper", rep.lambda_max_upper);
            if let Some(ns) = rep.n_star {
                summary.kv("N_star", ns);
            }
            summary.kv("stable_by_bounds", rep.lambda_max_upper < rep.b_dn);
            summary.kv("aloha_max_throughput", throughput_aloha(cfg.L as f64, cfg.L));
            summary.kv("cra_aloha_advantage", cra_aloha_advantage(cfg.eta()));
            summary.kv("lambda", cfg.lambda);
            summary.kv("drift_bound", drift_bound(&cfg)?);
            if let Some(s) = steady(cfg.lambda, cfg.N, cfg.D) {
                summary.kv("lambda1", s.lambda1);
                summary.kv("lambda2", s.lambda2);
                summary.kv("throughput", s.throughput);
                summary.kv("delay", s.delay);
            }
        }
        ScenarioName::MudCurve => {
            let p = CurveParams {
                l: cfg.L,
                n: cfg.N,
                t: cfg.T,
                snr_db: cfg.snr_db,
                k_values: (1..=r.k_max).collect(),
                trials: r.trials,
                seed: cfg.seed,
                stop_factor: r.stop_factor,
            };
            let curve = empirical_unsuccessful_curve(&p)?;
            let mut buf = Vec::new();
            write_curve_csv(&curve, &mut buf)?;
            csv = String::from_utf8(buf).expect("csv is ascii");
            summary.kv("L", cfg.L);
            summary.kv("N", cfg.N);
            summary.kv("T", cfg.T);
            summary.kv("snr_db", cfg.snr_db);
            summary.kv("trials", r.trials);
            if let Ok(d) = estimate_d(&curve, cfg.N, r.slack) {
                summary.kv("estimated_D", d);
                summary.kv("estimated_D_over_L", d as f64 / cfg.L as f64);
            }
        }
        ScenarioName::Evolution => {
            let m = run_with(&cfg, r.mode, &r.sim_options(&cfg))?;
            csv.push_str("slot,arrivals_offered,arrivals_admitted,transmitted,successful,blocked_rbs,total_backlog\n");
            for rec in &m.trace {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    rec.slot,
                    rec.arrivals_offered,
                    rec.arrivals_admitted,
                    rec.transmitted,
                    rec.successful,
                    rec.rate_control_active,
                    rec.carried
                );
            }
            summary.kv("mode", r.mode);
            summary.kv("lambda", cfg.lambda);
            summary.metrics("", &m);
            if let Some(s) = steady(cfg.lambda, cfg.N, cfg.D) {
                summary.kv("analysis_lambda1", s.lambda1);
                summary.kv("analysis_delay", s.delay);
            }
        }
        ScenarioName::DSweep => {
            csv.push_str("D,lambda,kbar,mean_k_per_rb,throughput_per_rb,normalized_delay,blocked_fraction,analysis_lambda1,analysis_delay\n");
            for &d in &r.d_values {
                let lambda = lambda_max(cfg.N, d)?.lambda_max;
                let c = validate_config(SystemConfig { D: d, Kbar: 2 * d, lambda, ..cfg })?;
                let m = run_with(&c, r.mode, &r.sim_options(&c))?;
                let s = steady(lambda, cfg.N, d);
                let _ = writeln!(
                    csv,
                    "{d},{lambda},{},{},{},{},{},{},{}",
                    c.Kbar,
                    m.mean_k_per_rb,
                    m.throughput_per_rb,
                    m.normalized_delay,
                    m.blocked_fraction,
                    fmt_opt(s.as_ref().map(|s| s.lambda1)),
                    fmt_opt(s.as_ref().map(|s| s.delay))
                );
                summary.kv(&format!("D{d}_throughput_per_rb"), m.throughput_per_rb);
            }
        }
        ScenarioName::RateSweep => {
            csv.push_str(
                "lambda_frac,lambda,cra_throughput,cra_mean_k,cra_delay,cra_blocked_fraction,aloha_throughput,aloha_mean_k,aloha_delay,analysis_throughput,analysis_delay\n",
            );
            for frac in r.lambda_fracs() {
                let lambda = frac * cfg.L as f64;
                let c = validate_config(SystemConfig { lambda, ..cfg })?;
                let cra = run_with(&c, r.mode, &r.sim_options(&c))?;
                let aloha = run_aloha_with(&c, true, &r.sim_options(&c))?;
                let s = steady(lambda, cfg.N, cfg.D);
                let _ = writeln!(
                    csv,
                    "{frac},{lambda},{},{},{},{},{},{},{},{},{}",
                    cra.throughput_per_rb,
                    cra.mean_k_per_rb,
                    cra.normalized_delay,
                    cra.blocked_fraction,
                    aloha.throughput_per_rb,
                    aloha.mean_k_per_rb,
                    aloha.normalized_delay,
                    fmt_opt(s.as_ref().map(|s| s.throughput)),
                    fmt_opt(s.as_ref().map(|s| s.delay))
                );
            }
            summary.kv("mode", r.mode);
            summary.kv("points", r.lambda_fracs().len());
        }
        ScenarioName::LSweep => {
            csv.push_str("L,M,D,lambda,total_successful,total_transmitted,normalized_delay,complexity\n");
            for &l in &r.l_values {
                if r.total_subcarriers % l != 0 || l < 2 {
                    continue;
                }
                let m_rbs = r.total_subcarriers / l;
                let d = ((r.d_frac * l as f64).round() as usize).clamp(1, l - 1);
                let n = (cfg.eta() * l as f64).round() as usize;
                let c = validate_config(SystemConfig {
                    L: l,
                    N: n,
                    M: m_rbs,
                    T: 20 * l,
                    D: d,
                    Kbar: 2 * l,
                    lambda: r.load_frac * l as f64,
                    ..cfg
                })?;
                let m = run_with(&c, r.mode, &r.sim_options(&c))?;
                let _ = writeln!(
                    csv,
                    "{l},{m_rbs},{d},{},{},{},{},{}",
                    c.lambda,
                    m.throughput_per_rb * m_rbs as f64,
                    m.mean_k_per_rb * m_rbs as f64,
                    m.normalized_delay,
                    complexity_model(l, m_rbs, c.eta(), r.complexity_c)
                );
            }
            summary.kv("total_subcarriers", r.total_subcarriers);
            summary.kv("mode", r.mode);
        }
        ScenarioName::EtaSweep => {
            csv.push_str("eta,N,lambda,mean_k_per_rb,throughput_per_rb,normalized_delay,blocked_fraction,analysis_lambda1\n");
            for &eta in &r.eta_values {
                let n = eta * cfg.L;
                let c = validate_config(SystemConfig { N: n, ..cfg })?;
                let m = run_with(&c, r.mode, &r.sim_options(&c))?;
                let s = if cfg.D <= n { steady(cfg.lambda, n, cfg.D) } else { None };
                let _ = writeln!(
                    csv,
                    "{eta},{n},{},{},{},{},{},{}",
                    c.lambda,
                    m.mean_k_per_rb,
                    m.throughput_per_rb,
                    m.normalized_delay,
                    m.blocked_fraction,
                    fmt_opt(s.map(|s| s.lambda1))
                );
            }
            summary.kv("lambda", cfg.lambda);
            summary.kv("mode", r.mode);
        }
    }

    let out = ScenarioOutput {
        csv: out_dir.join(format!("{name}.csv")),
        meta: out_dir.join(format!("{name}.meta")),
        summary: out_dir.join(format!("{name}.summary")),
    };
    fs::write(&out.csv, csv)?;
    fs::write(&out.meta, r.to_meta())?;
    fs::write(&out.summary, summary.0)?;
    Ok(out)
}

/// Selects columns of a CSV file and writes them as whitespace-separated
/// plot data with one `#` comment line per column.
pub fn emit_plotdata(csv_path: impl AsRef<Path>, columns: &[&str], out_path: impl AsRef<Path>) -> Result<()> {
    let mut reader = csv::Reader::from_path(csv_path)?;
    let header = reader.headers()?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| header.iter().position(|h| h == *c).ok_or_else(|| Error::MissingColumn(c.to_string())))
        .collect::<Result<_>>()?;
    let mut out = std::io::BufWriter::new(fs::File::create(out_path)?);
    for (i, c) in columns.iter().enumerate() {
        writeln!(out, "# column {}: {c}", i + 1)?;
    }
    for row in reader.records() {
        let row = row?;
        let fields: Vec<&str> = idx.iter().map(|&i| row.get(i).unwrap_or("NaN")).collect();
        writeln!(out, "{}", fields.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

/// Steady-state sanity numbers used by the summaries and examples.
pub fn analysis_table(n: usize, d: usize) -> Result<Vec<(&'static str, f64)>> {
    let peak = lambda_max(n, d)?;
    let mut rows = vec![
        ("B_DN", stability_bound(d, n)?),
        ("lambda_max", peak.lambda_max),
        ("lambda1_star", peak.lambda1_star),
        ("lambda_max_upper", lambda_max_upper(n, d)?),
        ("collided_rate_at_peak", collided_rate(peak.lambda1_star, n, d)),
    ];
    if d > 1 {
        rows.push(("N_star", min_stable_n(d)? as f64));
    }
    Ok(rows)
}
