//! Quadrature rules on uniform dyadic grids and Gauss-Legendre panels.

use crate::C64;

/// Composite trapezoid rule over `n` equal intervals, refined by one Richardson
/// step against the rule on every second node. `n` must be even for the
/// extrapolation; odd `n` falls back to the plain trapezoid.
pub fn richardson_trapezoid(n: usize, step: f64, f: impl Fn(usize) -> f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut fine = 0.5 * (f(0) + f(n));
    let mut coarse = fine;
    for i in 1..n {
        let v = f(i);
        fine += v;
        if i % 2 == 0 {
            coarse += v;
        }
    }
    let fine = fine * step;
    if n % 2 == 1 {
        return fine;
    }
    let coarse = coarse * 2.0 * step;
    (4.0 * fine - coarse) / 3.0
}

/// Complex-valued version of [`richardson_trapezoid`].
pub fn richardson_trapezoid_c(n: usize, step: f64, f: impl Fn(usize) -> C64) -> C64 {
    if n == 0 {
        return C64::new(0.0, 0.0);
    }
    let mut fine = (f(0) + f(n)) * 0.5;
    let mut coarse = fine;
    for i in 1..n {
        let v = f(i);
        fine += v;
        if i % 2 == 0 {
            coarse += v;
        }
    }
    let fine = fine * step;
    if n % 2 == 1 {
        return fine;
    }
    let coarse = coarse * (2.0 * step);
    (fine * 4.0 - coarse) / 3.0
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Integrates `f` over `[lo, hi]` with `panels` equal Gauss-Legendre panels of
/// `order` nodes each.
pub fn gauss_panels(lo: f64, hi: f64, panels: usize, order: usize, f: impl Fn(f64) -> C64) -> C64 {
    let (x, w) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc += f(mid + 0.5 * h * xi) * (wi * 0.5 * h);
        }
    }
    acc
}
