//! Closed-form steady-state analysis of MRB-CRA with fast retrial.
//!
//! Every rate here is per resource block per slot. `lambda` is the offered
//! new-arrival rate, `lambda1` the rate of transmitted packets and `lambda2`
//! the rate of packets that fail and are retried, with
//! `lambda1 = lambda + lambda2` at steady state under the Poisson
//! (Kleinrock independence) approximation.

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// `Gamma(D, x) / (D-1)!` for integer `D >= 1`, i.e. `P[Pois(x) < D]`.
///
/// Uses the finite sum `e^{-x} sum_{n<D} x^n / n!` built by term recursion.
pub fn regularized_upper_gamma(d: usize, x: f64) -> Result<f64> {
    if d < 1 {
        return Err(Error::Domain(format!("D must be >= 1, got {d}")));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("x must be finite and >= 0, got {x}")));
    }
    Ok(upper_gamma_sum(d, x))
}

pub(crate) fn upper_gamma_sum(d: usize, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let start = (-x).exp();
    if start > 0.0 {
        let mut term = start;
        let mut sum = start;
        for n in 1..d {
            term *= x / n as f64;
            sum += term;
        }
        return sum.min(1.0);
    }
    // e^{-x} underflows: accumulate in the log domain.
    let ln_x = x.ln();
    let mut ln_term = -x;
    let mut ln_max = ln_term;
    let mut logs = Vec::with_capacity(d);
    logs.push(ln_term);
    for n in 1..d {
        ln_term += ln_x - (n as f64).ln();
        ln_max = ln_max.max(ln_term);
        logs.push(ln_term);
    }
    let s: f64 = logs.iter().map(|l| (l - ln_max).exp()).sum();
    (ln_max + s.ln()).exp().min(1.0)
}

/// Mean number of devices that fail in an RB holding `k` devices.
///
/// With `k <= d` only spreading-code collisions fail; above `d` the detector
/// recovers nothing.
pub fn unsuccessful_mean(k: usize, n: usize, d: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > d {
        return k as f64;
    }
    let kf = k as f64;
    kf - kf * (1.0 - 1.0 / n as f64).powi(k as i32 - 1)
}

/// `B_{D,N} = D (1 - 1/N)^{D-1}`; arrival rates below it keep the backlog
/// chain positive recurrent.
pub fn stability_bound(d: usize, n: usize) -> Result<f64> {
    if d < 1 || n < 1 {
        return Err(Error::Domain(format!("D and N must be positive (D={d}, N={n})")));
    }
    if d > n {
        return Err(Error::Domain(format!("stability bound needs D <= N (D={d}, N={n})")));
    }
    Ok(d as f64 * (1.0 - 1.0 / n as f64).powi(d as i32 - 1))
}

fn nu(lambda1: f64, n: usize) -> f64 {
    lambda1 * (1.0 - 1.0 / n as f64)
}

/// Mean successes per RB when the load is `Pois(lambda1)`:
/// `lambda1 e^{-lambda1/N} Gamma(D, nu1)/(D-1)!`.
///
/// This is the map `lambda1 -> lambda` whose maximum is `lambda_max`.
pub fn departure_rate(lambda1: f64, n: usize, d: usize) -> f64 {
    if lambda1 <= 0.0 {
        return 0.0;
    }
    lambda1 * (-lambda1 / n as f64).exp() * upper_gamma_sum(d, nu(lambda1, n))
}

fn departure_rate_upper(lambda1: f64, n: usize, d: usize) -> f64 {
    if lambda1 <= 0.0 {
        return 0.0;
    }
    lambda1 * upper_gamma_sum(d, nu(lambda1, n))
}

/// Rate of packets that fail and are retried, `lambda2`, for `Pois(lambda1)` load.
pub fn collided_rate(lambda1: f64, n: usize, d: usize) -> f64 {
    if lambda1 <= 0.0 {
        return 0.0;
    }
    let ok = (-lambda1 / n as f64).exp() * upper_gamma_sum(d, nu(lambda1, n));
    (lambda1 * (1.0 - ok)).clamp(0.0, lambda1)
}

/// Per-RB throughput `E[successes]` for `Pois(lambda1)` load:
/// `sum_{n<=D} P[K=n] n (1-1/N)^{n-1} = lambda1 e^{-lambda1} sum_{n<D} nu1^n/n!`.
pub fn throughput_cra(lambda1: f64, n: usize, d: usize) -> f64 {
    departure_rate(lambda1, n, d)
}

/// Multichannel ALOHA with `L` orthogonal channels per RB: `lambda e^{-lambda/L}`.
pub fn throughput_aloha(lambda: f64, l: usize) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    lambda * (-lambda / l as f64).exp()
}

/// Throughput ratio of CRA over ALOHA at full load, `e^{-1/eta} / e^{-1}`.
pub fn cra_aloha_advantage(eta: f64) -> f64 {
    (1.0 - 1.0 / eta).exp()
}

/// Upper bound on the one-slot drift of `V(q) = sum_m K_m(q)` inside the
/// region where every RB holds between `B_{D,N}` and `D` packets:
/// `M (lambda - B_{D,N})`.
pub fn drift_bound(cfg: &SystemConfig) -> Result<f64> {
    let b = stability_bound(cfg.D, cfg.N)?;
    Ok(cfg.M as f64 * (cfg.lambda - b))
}

/// Maximum of a scalar objective: grid scan on `[lo, hi]` followed by a
/// golden-section refinement around the best grid point. No unimodality is
/// assumed for the grid stage.
pub(crate) fn grid_golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> (f64, f64) {
    let h = (hi - lo) / steps as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        let v = f(lo + h * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut a = lo + h * best_i.saturating_sub(1) as f64;
    let mut b = (lo + h * (best_i + 1) as f64).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fe = f(e);
    while b - a > 1e-8 {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    if fx >= best {
        (x, fx)
    } else {
        (lo + h * best_i as f64, best)
    }
}

fn check_nd(n: usize, d: usize) -> Result<()> {
    if d < 1 || d > n {
        return Err(Error::Domain(format!("need 1 <= D <= N (D={d}, N={n})")));
    }
    Ok(())
}

// Grid covers (0, 2D]; the maximizers lie below D for D > 1 and just above
// 1 for the upper-bound objective at D = 1.
fn grid_steps() -> usize {
    2000
}

/// Largest sustainable arrival rate and the transmitted rate at which it is reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMaximum {
    pub lambda_max: f64,
    pub lambda1_star: f64,
}

pub fn lambda_max(n: usize, d: usize) -> Result<RateMaximum> {
    check_nd(n, d)?;
    let (x, v) = grid_golden_max(|l| departure_rate(l, n, d), 0.0, 2.0 * d as f64, grid_steps());
    Ok(RateMaximum { lambda_max: v, lambda1_star: x })
}

/// `max_{lambda1} lambda1 Gamma(D, nu1)/(D-1)!`, an upper bound on `lambda_max`.
pub fn lambda_max_upper(n: usize, d: usize) -> Result<f64> {
    check_nd(n, d)?;
    let (_, v) = grid_golden_max(|l| departure_rate_upper(l, n, d), 0.0, 2.0 * d as f64, grid_steps());
    Ok(v)
}

/// Smallest `N >= D` with `lambda_max_upper(N, D) < B_{D,N}`.
pub fn min_stable_n(d: usize) -> Result<usize> {
    if d <= 1 {
        return Err(Error::Domain(format!("min_stable_n needs D > 1, got {d}")));
    }
    // As N grows the upper bound falls to eps_inf = D - max_u u Q(D, u) below
    // D, and B_{D,N} - lambda_max_upper >= eps_inf - (D(D-1) + 2D)/N, which
    // gives a cap the search can never pass.
    let (_, limit) = grid_golden_max(|u| u * upper_gamma_sum(d, u), 0.0, 2.0 * d as f64, grid_steps());
    let eps = d as f64 - limit;
    if eps <= 0.0 {
        return Err(Error::Domain(format!("upper bound does not fall below D={d}")));
    }
    let df = d as f64;
    let cap = (((df * (df - 1.0) + 2.0 * df) / eps).ceil() as usize + 1).max(d);
    for n in d..=cap {
        if lambda_max_upper(n, d)? < stability_bound(d, n)? {
            return Ok(n);
        }
    }
    Err(Error::Domain(format!("no stable N found for D={d} up to {cap}")))
}

/// Closed-form capacity figures for one `(N, D)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityReport {
    pub b_dn: f64,
    pub lambda_max: f64,
    pub lambda1_star: f64,
    pub lambda_max_upper: f64,
    /// `None` for `D = 1`, where no finite `N` separates the bounds.
    pub n_star: Option<usize>,
}

pub fn capacity_report(n: usize, d: usize) -> Result<CapacityReport> {
    let b_dn = stability_bound(d, n)?;
    let RateMaximum { lambda_max, lambda1_star } = lambda_max(n, d)?;
    let upper = lambda_max_upper(n, d)?;
    let n_star = if d > 1 { Some(min_stable_n(d)?) } else { None };
    Ok(CapacityReport { b_dn, lambda_max, lambda1_star, lambda_max_upper: upper, n_star })
}

/// Steady-state operating point for a given arrival rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu1: f64,
    pub throughput: f64,
    /// Normalized access delay `lambda1 / lambda`; 1 when `lambda = 0`.
    pub delay: f64,
    /// Fixed points above `lambda1_star`. These are unstable and only
    /// reported for diagnostics.
    pub upper_roots: Vec<f64>,
}

fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm.abs() < tol || b - a < 1e-15 * b.abs().max(1.0) {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Solves `lambda1 = lambda + collided_rate(lambda1)` for the smallest root.
pub fn solve_lambda1(lambda: f64, n: usize, d: usize, tol: f64) -> Result<SteadyState> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol must be positive, got {tol}")));
    }
    check_nd(n, d)?;
    if lambda == 0.0 {
        return Ok(SteadyState {
            lambda,
            lambda1: 0.0,
            lambda2: 0.0,
            nu1: 0.0,
            throughput: 0.0,
            delay: 1.0,
            upper_roots: Vec::new(),
        });
    }
    let peak = lambda_max(n, d)?;
    if lambda > peak.lambda_max + tol {
        return Err(Error::NoSteadyState { lambda, lambda_max: peak.lambda_max });
    }
    let g = |l: f64| departure_rate(l, n, d) - lambda;

    // First sign change of g on [lambda, lambda1_star]; g(lambda) <= 0 always.
    let (lo, hi) = (lambda.min(peak.lambda1_star), peak.lambda1_star);
    let steps = 1000;
    let h = (hi - lo) / steps as f64;
    let mut lambda1 = hi;
    if g(lo) >= 0.0 {
        lambda1 = lo;
    } else {
        for i in 1..=steps {
            let x = lo + h * i as f64;
            if g(x) >= 0.0 {
                lambda1 = bisect(g, x - h, x, tol);
                break;
            }
        }
    }

    let mut upper_roots = Vec::new();
    let top = 4.0 * d as f64 + 50.0;
    let up_steps = 4000;
    let uh = (top - hi) / up_steps as f64;
    for i in 0..up_steps {
        let (a, b) = (hi + uh * i as f64, hi + uh * (i + 1) as f64);
        if g(a) > 0.0 && g(b) <= 0.0 {
            upper_roots.push(bisect(g, a, b, tol));
        }
    }

    let lambda2 = collided_rate(lambda1, n, d);
    Ok(SteadyState {
        lambda,
        lambda1,
        lambda2,
        nu1: nu(lambda1, n),
        throughput: throughput_cra(lambda1, n, d),
        delay: lambda1 / lambda,
        upper_roots,
    })
}
