//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

/// Nodes and weights of `n`-point Gauss-Legendre quadrature on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `Gamma(d, x) / (d-1)!` as the integral of the Gamma(d) density over
/// `[x, inf)`, by composite Gauss-Legendre on unit panels.
pub fn upper_gamma_quadrature(d: usize, x: f64) -> f64 {
    let ln_fact: f64 = (1..d).map(|k| (k as f64).ln()).sum();
    let density = |t: f64| {
        if t <= 0.0 {
            if d == 1 { 1.0 } else { 0.0 }
        } else {
            ((d as f64 - 1.0) * t.ln() - t - ln_fact).exp()
        }
    };
    let nodes = gauss_legendre(24);
    let end = x.max(d as f64) + 40.0 + 12.0 * (d as f64).sqrt();
    let panels = ((end - x) / 0.5).ceil() as usize;
    let h = (end - x) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let (a, b) = (x + p as f64 * h, x + (p + 1) as f64 * h);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        total += nodes.iter().map(|&(u, w)| w * density(mid + half * u)).sum::<f64>() * half;
    }
    total
}

/// Mean failures over all `N^K` equally likely code assignments, with
/// everything failing above `D`.
pub fn enumerate_unsuccessful(k: usize, n: usize, d: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let total = n.pow(k as u32);
    let mut sum = 0usize;
    let mut codes = vec![0usize; k];
    for idx in 0..total {
        let mut r = idx;
        for c in codes.iter_mut() {
            *c = r % n;
            r /= n;
        }
        sum += if k > d {
            k
        } else {
            codes.iter().filter(|&&c| codes.iter().filter(|&&o| o == c).count() > 1).count()
        };
    }
    sum as f64 / total as f64
}

/// Largest value of `f` on a uniform grid of `(0, hi]`.
pub fn dense_grid_max(f: impl Fn(f64) -> f64, hi: f64, steps: usize) -> (f64, f64) {
    (1..=steps)
        .map(|i| {
            let x = hi * i as f64 / steps as f64;
            (x, f(x))
        })
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
}

/// Root of `f` on `[lo, hi]` by plain bisection (assumes a sign change).
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
