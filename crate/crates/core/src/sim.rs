//! Slot-level simulation of MRB-CRA with fast retrial and of multichannel
//! ALOHA.
//!
//! Slot `q` proceeds as: draw Poisson arrivals per RB and drop them if the
//! RB was over `Kbar` in slot `q-1`; every packet in an RB picks a spreading
//! code (or an orthogonal channel for ALOHA); the RB's detector decides who
//! succeeds; every failed packet picks a fresh RB uniformly for slot `q+1`.
//!
//! Each RB draws from its own `(seed, purpose, rb, slot)` streams, so the
//! per-RB work can run in parallel without changing results.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::stability_bound;
use crate::config::SystemConfig;
use crate::csmud::{evaluate_assignments, generate_codebook, somp_recover, synthesize, Codebook, DEFAULT_STOP_FACTOR};
use crate::error::{Error, Result};
use crate::rng::{derive_stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// All-or-nothing recovery above `D`, collisions fail below it.
    Abstract,
    /// Synthesized signals detected by S-OMP.
    Phy,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abstract" => Ok(Mode::Abstract),
            "phy" => Ok(Mode::Phy),
            other => Err(Error::Parse(format!("unknown mode `{other}` (abstract|phy)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Abstract => "abstract",
            Mode::Phy => "phy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub arrival_slot: u64,
    pub attempts: u32,
    /// RB the packet will use in the next slot.
    pub rb: usize,
    /// Code (or ALOHA channel) used in the last transmission.
    pub sc: Option<usize>,
}

/// Backlog carried between slots.
#[derive(Debug, Clone, PartialEq)]
pub struct BacklogState {
    /// Index of the next slot to simulate.
    pub slot: u64,
    /// `K_m` of the last simulated slot.
    pub per_rb_transmitting: Vec<usize>,
    /// Packets waiting for the next slot, each already routed to an RB.
    pub packets: Vec<Packet>,
    /// `blocked_flags[m]` is true iff RB `m` exceeded `Kbar` last slot.
    pub blocked_flags: Vec<bool>,
    next_id: u64,
}

impl BacklogState {
    pub fn empty(m: usize) -> Self {
        Self {
            slot: 0,
            per_rb_transmitting: vec![0; m],
            packets: Vec::new(),
            blocked_flags: vec![false; m],
            next_id: 0,
        }
    }

    /// `V(q)`, the number of packets carried into the next slot.
    pub fn backlog(&self) -> usize {
        self.packets.len()
    }

    /// Pending packets routed to each RB.
    pub fn pending_per_rb(&self) -> Vec<usize> {
        let mut v = vec![0; self.blocked_flags.len()];
        for p in &self.packets {
            v[p.rb] += 1;
        }
        v
    }

    /// Places `count` fresh pending packets in RB `rb`.
    pub fn push_packets(&mut self, rb: usize, count: usize) {
        for _ in 0..count {
            self.packets.push(Packet { id: self.next_id, arrival_slot: self.slot, attempts: 0, rb, sc: None });
            self.next_id += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RbCounts {
    pub k: usize,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotRecord {
    pub slot: u64,
    pub arrivals_offered: usize,
    pub arrivals_admitted: usize,
    pub arrivals_blocked: usize,
    pub transmitted: usize,
    pub successful: usize,
    pub collided_or_failed: usize,
    /// ALOHA packets that held back this slot.
    pub deferred: usize,
    pub per_rb: Vec<RbCounts>,
    pub rate_control_active: usize,
    /// Packets carried into the next slot.
    pub carried: usize,
    /// Sum over delivered packets of slots spent in the system (arrival slot counts as one).
    pub delivered_delay_sum: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub mean_k_per_rb: f64,
    pub throughput_per_rb: f64,
    /// Batch-means standard error of `throughput_per_rb`.
    pub throughput_stderr: f64,
    /// Transmissions per success.
    pub normalized_delay: f64,
    /// Mean slots from arrival to delivery of delivered packets.
    pub mean_packet_delay_slots: f64,
    /// Fraction of offered arrivals dropped by rate control.
    pub blocked_fraction: f64,
    /// Time-average of `sum_m K_m(q)`.
    pub mean_total_k: f64,
    pub warmup_slots: usize,
    pub measured_slots: usize,
    pub trace: Vec<SlotRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub warmup_slots: usize,
    /// Resolve RBs on the rayon pool.
    pub parallel: bool,
    pub stop_factor: f64,
}

/// 10% of the horizon, at least 200 slots, and always leaving one slot measured.
pub fn default_warmup(slots: usize) -> usize {
    (slots / 10).max(200).min(slots.saturating_sub(1))
}

impl SimOptions {
    pub fn for_config(cfg: &SystemConfig) -> Self {
        Self { warmup_slots: default_warmup(cfg.slots), parallel: true, stop_factor: DEFAULT_STOP_FACTOR }
    }
}

enum Detector<'a> {
    Abstract,
    Phy { codebook: &'a Codebook, stop_factor: f64 },
}

/// Success flags for the packets of one RB in one slot, plus the codes they used.
fn resolve_rb(det: &Detector<'_>, cfg: &SystemConfig, rb: usize, slot: u64, k: usize) -> Result<(Vec<bool>, Vec<usize>)> {
    if k == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut code_rng = derive_stream(cfg.seed, Purpose::SpreadingCode, rb as u64, slot);
    let codes: Vec<usize> = (0..k).map(|_| code_rng.gen_range(0..cfg.N)).collect();
    let ok = match det {
        Detector::Abstract => {
            if k > cfg.D {
                vec![false; k]
            } else {
                let mut users = vec![0u32; cfg.N];
                for &c in &codes {
                    users[c] += 1;
                }
                codes.iter().map(|&c| users[c] == 1).collect()
            }
        }
        Detector::Phy { codebook, stop_factor } => {
            let active: Vec<(u64, usize)> = codes.iter().enumerate().map(|(i, &c)| (i as u64, c)).collect();
            let mut rng = derive_stream(cfg.seed, Purpose::Phy, rb as u64, slot);
            let obs = synthesize(codebook, cfg.T, cfg.noise_var(), &active, &mut rng)?;
            let result = somp_recover(&obs.y, codebook, cfg.L - 1, *stop_factor, cfg.noise_var())?;
            let outcome = evaluate_assignments(&active, &result.support_set());
            (0..k as u64).map(|i| outcome.successful_device_ids.contains(&i)).collect()
        }
    };
    Ok((ok, codes))
}

fn draw_arrivals(cfg: &SystemConfig, rb: usize, slot: u64) -> usize {
    if cfg.lambda <= 0.0 {
        return 0;
    }
    let mut rng = derive_stream(cfg.seed, Purpose::Arrivals, rb as u64, slot);
    let pois = Poisson::new(cfg.lambda).expect("lambda validated positive");
    pois.sample(&mut rng) as usize
}

/// Admits this slot's arrivals under rate control and groups every packet by RB.
fn admit(state: &mut BacklogState, cfg: &SystemConfig, rec: &mut SlotRecord) -> Vec<Vec<Packet>> {
    let q = state.slot;
    for m in 0..cfg.M {
        let a = draw_arrivals(cfg, m, q);
        rec.arrivals_offered += a;
        if state.blocked_flags[m] {
            rec.arrivals_blocked += a;
        } else {
            rec.arrivals_admitted += a;
            state.push_packets(m, a);
        }
    }
    rec.rate_control_active = state.blocked_flags.iter().filter(|&&b| b).count();
    let mut by_rb: Vec<Vec<Packet>> = vec![Vec::new(); cfg.M];
    for p in state.packets.drain(..) {
        by_rb[p.rb].push(p);
    }
    by_rb
}

/// Routes failed (and deferred) packets of RB `m` to uniformly random RBs for the next slot.
fn reroute(cfg: &SystemConfig, rb: usize, slot: u64, packets: &mut [Packet]) {
    let mut rng = derive_stream(cfg.seed, Purpose::Retrial, rb as u64, slot);
    for p in packets {
        p.rb = rng.gen_range(0..cfg.M);
    }
}

fn step_with(state: &BacklogState, cfg: &SystemConfig, det: &Detector<'_>, parallel: bool) -> Result<(BacklogState, SlotRecord)> {
    let mut next = state.clone();
    let q = state.slot;
    let mut rec = SlotRecord { slot: q, ..Default::default() };
    let by_rb = admit(&mut next, cfg, &mut rec);

    let resolve = |m: usize| -> Result<(Vec<Packet>, RbCounts, u64)> {
        let pk = &by_rb[m];
        let (ok, codes) = resolve_rb(det, cfg, m, q, pk.len())?;
        let mut failed = Vec::new();
        let mut delay = 0u64;
        for ((p, &s), &c) in pk.iter().zip(&ok).zip(&codes) {
            if s {
                delay += q - p.arrival_slot + 1;
            } else {
                failed.push(Packet { attempts: p.attempts + 1, sc: Some(c), ..*p });
            }
        }
        let counts = RbCounts { k: pk.len(), successes: pk.len() - failed.len(), failures: failed.len() };
        reroute(cfg, m, q, &mut failed);
        Ok((failed, counts, delay))
    };
    let outcomes: Vec<_> = if parallel {
        (0..cfg.M).into_par_iter().map(resolve).collect::<Result<_>>()?
    } else {
        (0..cfg.M).map(resolve).collect::<Result<_>>()?
    };

    for (m, (failed, counts, delay)) in outcomes.into_iter().enumerate() {
        rec.transmitted += counts.k;
        rec.successful += counts.successes;
        rec.collided_or_failed += counts.failures;
        rec.delivered_delay_sum += delay;
        rec.per_rb.push(counts);
        next.per_rb_transmitting[m] = counts.k;
        next.blocked_flags[m] = counts.k > cfg.Kbar;
        next.packets.extend(failed);
    }
    rec.carried = next.packets.len();
    next.slot = q + 1;
    Ok((next, rec))
}

/// One slot under the abstract recovery model.
pub fn step_abstract(state: &BacklogState, cfg: &SystemConfig) -> (BacklogState, SlotRecord) {
    step_with(state, cfg, &Detector::Abstract, false).expect("abstract detector cannot fail")
}

/// One slot with synthesized signals and S-OMP detection per RB.
pub fn step_phy(state: &BacklogState, cfg: &SystemConfig, codebook: &Codebook, opts: &SimOptions) -> Result<(BacklogState, SlotRecord)> {
    if codebook.code_len() != cfg.L || codebook.num_codes() != cfg.N {
        return Err(Error::Domain(format!(
            "codebook is {}x{}, config wants {}x{}",
            codebook.code_len(),
            codebook.num_codes(),
            cfg.L,
            cfg.N
        )));
    }
    step_with(state, cfg, &Detector::Phy { codebook, stop_factor: opts.stop_factor }, opts.parallel)
}

fn batch_stderr(samples: &[f64], batches: usize) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let b = batches.min(n);
    let size = n / b;
    let means: Vec<f64> = (0..b).map(|i| samples[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64).collect();
    let mu = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    (var / b as f64).sqrt()
}

/// Aggregates the post-warmup part of a trace.
pub fn summarize(trace: Vec<SlotRecord>, m: usize, warmup: usize) -> RunMetrics {
    let measured = &trace[warmup.min(trace.len())..];
    let slots = measured.len().max(1) as f64;
    let mf = m as f64;
    let tx: usize = measured.iter().map(|r| r.transmitted).sum();
    let ok: usize = measured.iter().map(|r| r.successful).sum();
    let offered: usize = measured.iter().map(|r| r.arrivals_offered).sum();
    let blocked: usize = measured.iter().map(|r| r.arrivals_blocked).sum();
    let delay_sum: u64 = measured.iter().map(|r| r.delivered_delay_sum).sum();
    let per_slot: Vec<f64> = measured.iter().map(|r| r.successful as f64 / mf).collect();
    let normalized_delay = match (tx, ok) {
        (0, _) => 1.0,
        (_, 0) => f64::INFINITY,
        _ => tx as f64 / ok as f64,
    };
    RunMetrics {
        mean_k_per_rb: tx as f64 / (slots * mf),
        throughput_per_rb: ok as f64 / (slots * mf),
        throughput_stderr: batch_stderr(&per_slot, 20),
        normalized_delay,
        mean_packet_delay_slots: if ok == 0 { 1.0 } else { delay_sum as f64 / ok as f64 },
        blocked_fraction: if offered == 0 { 0.0 } else { blocked as f64 / offered as f64 },
        mean_total_k: tx as f64 / slots,
        warmup_slots: warmup,
        measured_slots: measured.len(),
        trace,
    }
}

fn check_horizon(cfg: &SystemConfig, warmup: usize) -> Result<()> {
    if cfg.slots <= warmup {
        return Err(Error::Domain(format!("slots ({}) must exceed warmup ({warmup})", cfg.slots)));
    }
    Ok(())
}

/// Runs MRB-CRA for `cfg.slots` slots from an empty system.
pub fn run(cfg: &SystemConfig, mode: Mode, warmup_slots: usize) -> Result<RunMetrics> {
    run_with(cfg, mode, &SimOptions { warmup_slots, ..SimOptions::for_config(cfg) })
}

pub fn run_with(cfg: &SystemConfig, mode: Mode, opts: &SimOptions) -> Result<RunMetrics> {
    let cfg = crate::config::validate_config(*cfg)?;
    check_horizon(&cfg, opts.warmup_slots)?;
    let codebook = match mode {
        Mode::Phy => Some(generate_codebook(cfg.L, cfg.N, cfg.seed)?),
        Mode::Abstract => None,
    };
    let det = match &codebook {
        Some(codebook) => Detector::Phy { codebook, stop_factor: opts.stop_factor },
        None => Detector::Abstract,
    };
    let mut state = BacklogState::empty(cfg.M);
    let mut trace = Vec::with_capacity(cfg.slots);
    for _ in 0..cfg.slots {
        let (next, rec) = step_with(&state, &cfg, &det, opts.parallel)?;
        state = next;
        trace.push(rec);
    }
    Ok(summarize(trace, cfg.M, opts.warmup_slots))
}

/// One ALOHA slot: `L` orthogonal channels per RB, success iff a packet is
/// alone on its channel. With `controlled`, each pending packet transmits
/// with probability `min(1, J / n(q))`; held-back packets are re-routed like
/// failures but keep their attempt count. Rate control counts every packet
/// present in the RB, transmitting or not.
pub fn step_aloha(state: &BacklogState, cfg: &SystemConfig, controlled: bool, parallel: bool) -> (BacklogState, SlotRecord) {
    let mut next = state.clone();
    let q = state.slot;
    let mut rec = SlotRecord { slot: q, ..Default::default() };
    let by_rb = admit(&mut next, cfg, &mut rec);
    let population: usize = by_rb.iter().map(Vec::len).sum();
    let p_access = if controlled && population > 0 {
        (cfg.total_subcarriers() as f64 / population as f64).min(1.0)
    } else {
        1.0
    };

    let resolve = |m: usize| -> (Vec<Packet>, RbCounts, usize, u64, usize) {
        let pk = &by_rb[m];
        let mut rng = derive_stream(cfg.seed, Purpose::Access, m as u64, q);
        let choice: Vec<Option<usize>> = pk
            .iter()
            .map(|_| {
                let go = p_access >= 1.0 || rng.gen::<f64>() < p_access;
                go.then(|| rng.gen_range(0..cfg.L))
            })
            .collect();
        let mut users = vec![0u32; cfg.L];
        for c in choice.iter().flatten() {
            users[*c] += 1;
        }
        let mut carried = Vec::new();
        let (mut k, mut ok, mut deferred, mut delay) = (0, 0, 0, 0u64);
        for (p, c) in pk.iter().zip(&choice) {
            match c {
                Some(c) if users[*c] == 1 => {
                    k += 1;
                    ok += 1;
                    delay += q - p.arrival_slot + 1;
                }
                Some(c) => {
                    k += 1;
                    carried.push(Packet { attempts: p.attempts + 1, sc: Some(*c), ..*p });
                }
                None => {
                    deferred += 1;
                    carried.push(*p);
                }
            }
        }
        reroute(cfg, m, q, &mut carried);
        (carried, RbCounts { k, successes: ok, failures: k - ok }, deferred, delay, pk.len())
    };
    let outcomes: Vec<_> = if parallel {
        (0..cfg.M).into_par_iter().map(resolve).collect()
    } else {
        (0..cfg.M).map(resolve).collect()
    };
    for (m, (carried, counts, deferred, delay, present)) in outcomes.into_iter().enumerate() {
        rec.transmitted += counts.k;
        rec.successful += counts.successes;
        rec.collided_or_failed += counts.failures;
        rec.deferred += deferred;
        rec.delivered_delay_sum += delay;
        rec.per_rb.push(counts);
        next.per_rb_transmitting[m] = counts.k;
        // Held-back packets still occupy the RB.
        next.blocked_flags[m] = present > cfg.Kbar;
        next.packets.extend(carried);
    }
    rec.carried = next.packets.len();
    next.slot = q + 1;
    (next, rec)
}

/// Multichannel ALOHA baseline over the same arrival, rate-control and
/// retrial skeleton as [`run`].
pub fn run_aloha(cfg: &SystemConfig, controlled: bool) -> Result<RunMetrics> {
    run_aloha_with(cfg, controlled, &SimOptions::for_config(cfg))
}

pub fn run_aloha_with(cfg: &SystemConfig, controlled: bool, opts: &SimOptions) -> Result<RunMetrics> {
    let cfg = crate::config::validate_config(*cfg)?;
    check_horizon(&cfg, opts.warmup_slots)?;
    let mut state = BacklogState::empty(cfg.M);
    let mut trace = Vec::with_capacity(cfg.slots);
    for _ in 0..cfg.slots {
        let (next, rec) = step_aloha(&state, &cfg, controlled, opts.parallel);
        state = next;
        trace.push(rec);
    }
    Ok(summarize(trace, cfg.M, opts.warmup_slots))
}

/// Region of the backlog state space used by [`drift_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftRegion {
    /// Every RB holds between `B_{D,N}` and `D` packets.
    Interior,
    /// Everything else up to `M * Kbar` packets per RB.
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub region: DriftRegion,
    pub samples: usize,
    pub mean_drift: f64,
    pub stderr: f64,
    /// `M (lambda - B)` for the interior, `M lambda` for the complement.
    /// Successes `K (1 - 1/N)^{K-1}` never exceed `B` for `K <= D`, so the
    /// interior figure is the drift at `K_m = D` and bounds the interior drift
    /// from below; the complement figure bounds it from above.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftTable {
    pub interior: DriftEstimate,
    pub complement: DriftEstimate,
}

fn sample_state(cfg: &SystemConfig, region: DriftRegion, i: usize, lo: usize) -> Vec<usize> {
    let tag = match region {
        DriftRegion::Interior => 0,
        DriftRegion::Complement => 1,
    };
    let mut rng = derive_stream(cfg.seed, Purpose::DriftState, tag, i as u64);
    let top = cfg.M * cfg.Kbar;
    loop {
        let k: Vec<usize> = match region {
            DriftRegion::Interior => (0..cfg.M).map(|_| rng.gen_range(lo..=cfg.D)).collect(),
            DriftRegion::Complement => (0..cfg.M).map(|_| rng.gen_range(0..=top)).collect(),
        };
        let inside = k.iter().all(|&x| (lo..=cfg.D).contains(&x));
        if (region == DriftRegion::Interior) == inside {
            return k;
        }
    }
}

/// Monte Carlo estimate of `E[V(q+1) - V(q) | k(q)]` over states drawn
/// uniformly from each region, one slot of the chosen detector per sample.
pub fn drift_probe(cfg: &SystemConfig, mode: Mode, samples: usize) -> Result<DriftTable> {
    let cfg = crate::config::validate_config(*cfg)?;
    if samples < 1000 {
        return Err(Error::InsufficientSamples(format!("need at least 1000 samples, got {samples}")));
    }
    let b = stability_bound(cfg.D, cfg.N)?;
    let lo = b.ceil() as usize;
    if lo > cfg.D {
        return Err(Error::InsufficientSamples(format!("interior region [{b}, {}] holds no integer state", cfg.D)));
    }
    let codebook = match mode {
        Mode::Phy => Some(generate_codebook(cfg.L, cfg.N, cfg.seed)?),
        Mode::Abstract => None,
    };
    let det = match &codebook {
        Some(codebook) => Detector::Phy { codebook, stop_factor: DEFAULT_STOP_FACTOR },
        None => Detector::Abstract,
    };
    let estimate = |region: DriftRegion, bound: f64| -> Result<DriftEstimate> {
        let drifts: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let k = sample_state(&cfg, region, i, lo);
                let slot = i as u64 + if region == DriftRegion::Complement { samples as u64 } else { 0 };
                let mut next_v = 0usize;
                for (m, &km) in k.iter().enumerate() {
                    let (ok, _) = resolve_rb(&det, &cfg, m, slot, km)?;
                    next_v += ok.iter().filter(|&&s| !s).count();
                    if km <= cfg.Kbar {
                        next_v += draw_arrivals(&cfg, m, slot + 1);
                    }
                }
                Ok(next_v as f64 - k.iter().sum::<usize>() as f64)
            })
            .collect::<Result<_>>()?;
        let n = drifts.len() as f64;
        let mean = drifts.iter().sum::<f64>() / n;
        let var = drifts.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(DriftEstimate { region, samples, mean_drift: mean, stderr: (var / n).sqrt(), bound })
    };
    let mf = cfg.M as f64;
    Ok(DriftTable {
        interior: estimate(DriftRegion::Interior, mf * (cfg.lambda - b))?,
        complement: estimate(DriftRegion::Complement, mf * cfg.lambda)?,
    })
}

/// Total receiver cost `M (c L^2 + eta L)` of `M` parallel S-OMP detectors.
pub fn complexity_model(l: usize, m: usize, eta: f64, c: f64) -> f64 {
    let lf = l as f64;
    m as f64 * (c * lf * lf + eta * lf)
}

/// Set of RB indices that were rate-controlled in a slot.
pub fn blocked_rbs(state: &BacklogState) -> BTreeSet<usize> {
    state.blocked_flags.iter().enumerate().filter(|(_, &b)| b).map(|(m, _)| m).collect()
}
