//! Per-RB signal synthesis and compressed-sensing multiuser detection.
//!
//! One RB observes `Y = C S + N` over `T` symbols, where `C` is the `L x N`
//! spreading codebook and row `n` of `S` is the sum of the signals of the
//! devices that picked code `n`. Detection is simultaneous orthogonal
//! matching pursuit (S-OMP) over the `T` measurement vectors.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::analysis::unsuccessful_mean;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::{derive_stream, Purpose, RngStream};

pub type CMatrix = DMatrix<Complex64>;

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Gram matrices of the selected columns beyond this condition number stop S-OMP.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Default noise-floor factor for the S-OMP residual test.
pub const DEFAULT_STOP_FACTOR: f64 = 1.2;

/// Residual energy relative to `||Y||^2` treated as exact fit when the noise
/// variance is zero.
const EXACT_FIT_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// `L x N`, column `n` is spreading code `c_n`.
    pub entries: CMatrix,
    pub seed: u64,
}

impl Codebook {
    pub fn code_len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_codes(&self) -> usize {
        self.entries.ncols()
    }

    fn column(&self, n: usize) -> &[Complex64] {
        let l = self.code_len();
        &self.entries.as_slice()[n * l..(n + 1) * l]
    }
}

fn cscg(rng: &mut impl RngCore, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// `L x N` codebook with iid `CN(0, 1/L)` entries.
pub fn generate_codebook(l: usize, n: usize, seed: u64) -> Result<Codebook> {
    if l < 1 || n < l {
        return Err(Error::Domain(format!("codebook needs 1 <= L <= N (L={l}, N={n})")));
    }
    let mut rng = derive_stream(seed, Purpose::Codebook, 0, 0);
    let var = 1.0 / l as f64;
    let entries = CMatrix::from_fn(l, n, |_, _| CZERO);
    let mut entries = entries;
    for v in entries.iter_mut() {
        *v = cscg(&mut rng, var);
    }
    Ok(Codebook { entries, seed })
}

/// One RB's received block together with the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct RbObservation {
    /// `L x T`.
    pub y: CMatrix,
    /// `(device id, spreading code)` for each active device.
    pub truth_assignments: Vec<(u64, usize)>,
    /// `N x T` composite symbols.
    pub s_true: CMatrix,
    /// `L x T` noise realization.
    pub noise: CMatrix,
    pub noise_var: f64,
}

/// `C S + noise`, touching only the nonzero rows of `S`.
fn mix(codebook: &Codebook, s: &CMatrix, rows: &BTreeSet<usize>, noise: &CMatrix) -> CMatrix {
    let (l, t) = (codebook.code_len(), s.ncols());
    let mut y = noise.clone();
    for tt in 0..t {
        let col = &mut y.as_mut_slice()[tt * l..(tt + 1) * l];
        for &n in rows {
            let sv = s[(n, tt)];
            for (yv, cv) in col.iter_mut().zip(codebook.column(n)) {
                *yv += cv * sv;
            }
        }
    }
    y
}

impl RbObservation {
    /// Recomputes `C S_true + noise`.
    pub fn reconstruct(&self, codebook: &Codebook) -> CMatrix {
        let rows: BTreeSet<usize> = self.truth_assignments.iter().map(|&(_, n)| n).collect();
        mix(codebook, &self.s_true, &rows, &self.noise)
    }
}

/// Builds `Y` for the given active devices. Every device sends `T`
/// unit-magnitude symbols with independent uniform phases (channel phase and
/// power control folded in), so `|h x| = sqrt(P) = 1`.
pub fn synthesize_rb(
    cfg: &SystemConfig,
    codebook: &Codebook,
    active: &[(u64, usize)],
    rng: &mut RngStream,
) -> Result<RbObservation> {
    synthesize(codebook, cfg.T, cfg.noise_var(), active, rng)
}

pub(crate) fn synthesize(
    codebook: &Codebook,
    t: usize,
    noise_var: f64,
    active: &[(u64, usize)],
    rng: &mut impl RngCore,
) -> Result<RbObservation> {
    let (l, n) = (codebook.code_len(), codebook.num_codes());
    if let Some(&(dev, sc)) = active.iter().find(|&&(_, sc)| sc >= n) {
        return Err(Error::Domain(format!("device {dev} uses code {sc} >= N={n}")));
    }
    let mut s_true = CMatrix::from_element(n, t, CZERO);
    for &(_, sc) in active {
        for tt in 0..t {
            let theta = rng.gen::<f64>() * 2.0 * PI;
            s_true[(sc, tt)] += Complex64::from_polar(1.0, theta);
        }
    }
    let mut noise = CMatrix::from_element(l, t, CZERO);
    if noise_var > 0.0 {
        for v in noise.iter_mut() {
            *v = cscg(rng, noise_var);
        }
    }
    let rows: BTreeSet<usize> = active.iter().map(|&(_, sc)| sc).collect();
    let y = mix(codebook, &s_true, &rows, &noise);
    Ok(RbObservation { y, truth_assignments: active.to_vec(), s_true, noise, noise_var })
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Selected code indices in selection order.
    pub support: Vec<usize>,
    /// `N x T` least-squares estimate, nonzero only on the support rows.
    pub s_hat: CMatrix,
    pub iterations: usize,
    pub residual_energy: f64,
    /// Residual energy before the first and after every iteration.
    pub residual_history: Vec<f64>,
    /// Set when a candidate column would have made the selected Gram matrix
    /// ill-conditioned; the result holds the support selected before it.
    pub ill_conditioned: bool,
}

impl RecoveryResult {
    pub fn support_set(&self) -> BTreeSet<usize> {
        self.support.iter().copied().collect()
    }
}

#[inline]
fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // sum conj(a_i) b_i
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

fn frob2(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum()
}

fn triangular_condition(r: &CMatrix) -> f64 {
    let sv = r.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// S-OMP over the columns of `y`.
///
/// Each iteration picks the code maximizing `sum_t |c_n^H r_t|` on the current
/// residual, extends a QR factorization of the selected columns by one
/// column, and projects the residual off the new direction. Correlations are
/// carried forward with a rank-one update instead of being recomputed.
/// Stops at `max_sparsity` codes or once the residual energy reaches
/// `stop_factor * L * T * noise_var`.
pub fn somp_recover(
    y: &CMatrix,
    codebook: &Codebook,
    max_sparsity: usize,
    stop_factor: f64,
    noise_var: f64,
) -> Result<RecoveryResult> {
    let (l, n) = (codebook.code_len(), codebook.num_codes());
    let t = y.ncols();
    if y.nrows() != l {
        return Err(Error::Domain(format!("Y has {} rows, codebook has L={l}", y.nrows())));
    }
    if max_sparsity < 1 || max_sparsity > l.saturating_sub(1).max(1) || max_sparsity > n {
        return Err(Error::Domain(format!("max_sparsity must be in 1..=L-1, got {max_sparsity}")));
    }
    if !(noise_var >= 0.0) || !(stop_factor >= 0.0) {
        return Err(Error::Domain("noise_var and stop_factor must be nonnegative".into()));
    }

    let energy0 = frob2(y);
    let floor = (stop_factor * (l * t) as f64 * noise_var).max(EXACT_FIT_FLOOR * energy0);

    let mut resid = y.clone();
    // corr[n * t + tt] = c_n^H r_tt
    let mut corr = vec![CZERO; n * t];
    for nn in 0..n {
        let c = codebook.column(nn);
        let row = &mut corr[nn * t..(nn + 1) * t];
        for (tt, v) in row.iter_mut().enumerate() {
            *v = cdot(c, &resid.as_slice()[tt * l..(tt + 1) * l]);
        }
    }

    let mut support: Vec<usize> = Vec::new();
    let mut selected = vec![false; n];
    let mut q_cols: Vec<Vec<Complex64>> = Vec::new();
    let mut r_fac = CMatrix::from_element(0, 0, CZERO);
    let mut history = vec![energy0];
    let mut energy = energy0;
    let mut ill_conditioned = false;

    while support.len() < max_sparsity && energy > floor {
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for nn in 0..n {
            if selected[nn] {
                continue;
            }
            let score: f64 = corr[nn * t..(nn + 1) * t].iter().map(|v| v.norm()).sum();
            if score > best_score {
                best_score = score;
                best = Some(nn);
            }
        }
        let Some(pick) = best else { break };

        // Gram-Schmidt against the current basis, twice for stability.
        let c = codebook.column(pick);
        let mut w: Vec<Complex64> = c.to_vec();
        let k = q_cols.len();
        let mut coeffs = vec![CZERO; k];
        for _ in 0..2 {
            for (j, q) in q_cols.iter().enumerate() {
                let h = cdot(q, &w);
                coeffs[j] += h;
                for (wv, qv) in w.iter_mut().zip(q) {
                    *wv -= qv * h;
                }
            }
        }
        let beta = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let mut grown = r_fac.clone().resize(k + 1, k + 1, CZERO);
        for (j, h) in coeffs.iter().enumerate() {
            grown[(j, k)] = *h;
        }
        grown[(k, k)] = Complex64::new(beta, 0.0);
        let cond = triangular_condition(&grown);
        if !(beta > 0.0) || cond * cond > MAX_GRAM_CONDITION {
            ill_conditioned = true;
            break;
        }
        r_fac = grown;
        for v in w.iter_mut() {
            *v /= beta;
        }

        // z = q^H R, R -= q z, corr -= (C^H q) z
        let z: Vec<Complex64> = (0..t).map(|tt| cdot(&w, &resid.as_slice()[tt * l..(tt + 1) * l])).collect();
        for (tt, zv) in z.iter().enumerate() {
            let col = &mut resid.as_mut_slice()[tt * l..(tt + 1) * l];
            for (rv, qv) in col.iter_mut().zip(&w) {
                *rv -= qv * zv;
            }
        }
        for nn in 0..n {
            let h = cdot(codebook.column(nn), &w);
            for (cv, zv) in corr[nn * t..(nn + 1) * t].iter_mut().zip(&z) {
                *cv -= h * zv;
            }
        }

        q_cols.push(w);
        support.push(pick);
        selected[pick] = true;
        energy = frob2(&resid);
        history.push(energy);
    }

    // S_hat on the support: R_fac X = Q^H Y.
    let k = support.len();
    let mut s_hat = CMatrix::from_element(n, t, CZERO);
    if k > 0 {
        let mut x = CMatrix::from_fn(k, t, |j, tt| cdot(&q_cols[j], &y.as_slice()[tt * l..(tt + 1) * l]));
        for tt in 0..t {
            for j in (0..k).rev() {
                let mut acc = x[(j, tt)];
                for i in j + 1..k {
                    acc -= r_fac[(j, i)] * x[(i, tt)];
                }
                x[(j, tt)] = acc / r_fac[(j, j)];
            }
        }
        for (j, &sc) in support.iter().enumerate() {
            for tt in 0..t {
                s_hat[(sc, tt)] = x[(j, tt)];
            }
        }
    }

    Ok(RecoveryResult {
        iterations: support.len(),
        support,
        s_hat,
        residual_energy: energy,
        residual_history: history,
        ill_conditioned,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryOutcome {
    pub unsuccessful: usize,
    pub successful_device_ids: BTreeSet<u64>,
}

/// A device succeeds iff it is the only user of its code and that code was
/// detected. Detected collided codes still fail all of their devices.
pub fn evaluate_recovery(truth: &RbObservation, result: &RecoveryResult) -> RecoveryOutcome {
    evaluate_assignments(&truth.truth_assignments, &result.support_set())
}

pub(crate) fn evaluate_assignments(assignments: &[(u64, usize)], support: &BTreeSet<usize>) -> RecoveryOutcome {
    let mut users: HashMap<usize, usize> = HashMap::new();
    for &(_, sc) in assignments {
        *users.entry(sc).or_default() += 1;
    }
    let successful_device_ids: BTreeSet<u64> = assignments
        .iter()
        .filter(|&&(_, sc)| users[&sc] == 1 && support.contains(&sc))
        .map(|&(id, _)| id)
        .collect();
    RecoveryOutcome {
        unsuccessful: assignments.len() - successful_device_ids.len(),
        successful_device_ids,
    }
}

/// Parameters of a Monte Carlo run of mean unsuccessful devices versus load.
#[derive(Debug, Clone)]
pub struct CurveParams {
    pub l: usize,
    pub n: usize,
    pub t: usize,
    pub snr_db: f64,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub stop_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub mean_unsuccessful: f64,
    pub stderr: f64,
    pub trials: usize,
}

fn curve_trial(p: &CurveParams, k: usize, trial: usize) -> Result<usize> {
    let mut assign_rng = derive_stream(p.seed, Purpose::CurveAssign, k as u64, trial as u64);
    let codebook_seed = assign_rng.next_u64();
    let codebook = generate_codebook(p.l, p.n, codebook_seed)?;
    let active: Vec<(u64, usize)> = (0..k as u64).map(|id| (id, assign_rng.gen_range(0..p.n))).collect();
    let mut noise_rng = derive_stream(p.seed, Purpose::CurveNoise, k as u64, trial as u64);
    let noise_var = 10f64.powf(-p.snr_db / 10.0);
    let obs = synthesize(&codebook, p.t, noise_var, &active, &mut noise_rng)?;
    let result = somp_recover(&obs.y, &codebook, p.l - 1, p.stop_factor, noise_var)?;
    Ok(evaluate_recovery(&obs, &result).unsuccessful)
}

/// Empirical mean number of unsuccessful devices per RB for each load in
/// `k_values`, with a fresh codebook, assignment and noise per trial.
pub fn empirical_unsuccessful_curve(p: &CurveParams) -> Result<Vec<CurvePoint>> {
    if p.trials < 1 {
        return Err(Error::Domain("trials must be >= 1".into()));
    }
    if p.l < 2 {
        return Err(Error::Domain("S-OMP needs L >= 2".into()));
    }
    p.k_values
        .iter()
        .map(|&k| {
            let fails: Vec<usize> = (0..p.trials)
                .into_par_iter()
                .map(|trial| curve_trial(p, k, trial))
                .collect::<Result<_>>()?;
            let m = p.trials as f64;
            let mean = fails.iter().sum::<usize>() as f64 / m;
            let stderr = if p.trials > 1 {
                let var = fails.iter().map(|&u| (u as f64 - mean).powi(2)).sum::<f64>() / (m - 1.0);
                (var / m).sqrt()
            } else {
                0.0
            };
            Ok(CurvePoint { k, mean_unsuccessful: mean, stderr, trials: p.trials })
        })
        .collect()
}

/// Collision-only mean failures `K - K (1 - 1/N)^{K-1}`, no detector limit.
pub fn collision_only(k: usize, n: usize) -> f64 {
    unsuccessful_mean(k, n, usize::MAX)
}

/// Operational recovery threshold: the largest `K` whose measured failures
/// stay within `slack * K` of the collision-only value.
pub fn estimate_d(curve: &[CurvePoint], n: usize, slack: f64) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::InsufficientData(format!("curve has {} points, need 3", curve.len())));
    }
    curve
        .iter()
        .filter(|p| p.mean_unsuccessful <= collision_only(p.k, n) + slack * p.k as f64)
        .map(|p| p.k)
        .max()
        .ok_or_else(|| Error::InsufficientData("no load stays near the collision bound".into()))
}

pub fn write_curve_csv(curve: &[CurvePoint], mut out: impl Write) -> Result<()> {
    writeln!(out, "K,mean_unsuccessful,stderr,trials")?;
    for p in curve {
        writeln!(out, "{},{},{},{}", p.k, p.mean_unsuccessful, p.stderr, p.trials)?;
    }
    Ok(())
}
