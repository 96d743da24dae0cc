//! Daubechies filters, refinement symbols, Fourier transforms of the scaling
//! function and wavelet, and point values from the cascade recursion.
//!
//! Filters follow `phi(x) = sqrt(2) sum_n h_n phi(2x - n)`, supported on
//! `[0, 2p - 1]`, with the wavelet `psi(x) = sqrt(2) sum_n g_n phi(2x - n)`,
//! `g_n = (-1)^n h_{2p-1-n}`. The Fourier convention is
//! `f^(w) = int f(x) exp(-2 pi i w x) dx`.

use crate::error::{Error, Result};
use crate::C64;
use std::f64::consts::{PI, SQRT_2};

/// Largest supported number of vanishing moments.
pub const MAX_VANISHING_MOMENTS: usize = 10;

/// Orthonormal Daubechies family with `p` vanishing moments (`p = 1` is Haar).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFamily {
    p: usize,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

impl WaveletFamily {
    pub fn daubechies(p: usize) -> Result<Self> {
        let lowpass = daubechies_filter(p)?;
        let n = lowpass.len() - 1;
        let highpass = (0..=n)
            .map(|k| if k % 2 == 0 { lowpass[n - k] } else { -lowpass[n - k] })
            .collect();
        Ok(WaveletFamily { p, lowpass, highpass })
    }

    pub fn haar() -> Self {
        Self::daubechies(1).expect("Haar filter")
    }

    pub fn vanishing_moments(&self) -> usize {
        self.p
    }

    /// Support width `a = 2p - 1`; `phi` lives on `[0, a]`.
    pub fn support_width(&self) -> i64 {
        2 * self.p as i64 - 1
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    /// `m0(xi) = 2^-1/2 sum_n h_n exp(-2 pi i n xi)`.
    pub fn lowpass_symbol(&self, xi: f64) -> C64 {
        symbol(&self.lowpass, xi)
    }

    /// `m1(xi) = 2^-1/2 sum_n g_n exp(-2 pi i n xi)`.
    pub fn highpass_symbol(&self, xi: f64) -> C64 {
        symbol(&self.highpass, xi)
    }
}

fn symbol(filter: &[f64], xi: f64) -> C64 {
    let w = C64::from_polar(1.0, -2.0 * PI * xi);
    // Horner in w
    let mut acc = C64::new(0.0, 0.0);
    for &h in filter.iter().rev() {
        acc = acc * w + h;
    }
    acc / SQRT_2
}

/// Minimal-phase Daubechies lowpass filter with `p` vanishing moments,
/// normalised so that the taps sum to `sqrt(2)`.
///
/// The squared modulus `cos^2p(pi xi) P(sin^2(pi xi))` with
/// `P(y) = sum_{k<p} C(p-1+k, k) y^k` is factorised by mapping each root of `P`
/// to the root `z` of `z + 1/z = 2 - 4y` inside the unit disc.
pub fn daubechies_filter(p: usize) -> Result<Vec<f64>> {
    if p == 0 || p > MAX_VANISHING_MOMENTS {
        return Err(Error::UnsupportedFamily(p));
    }
    let coeffs: Vec<f64> = (0..p).map(|k| binomial(p - 1 + k, k)).collect();
    let roots = polynomial_roots(&coeffs)?;
    let mut poly = vec![C64::new(1.0, 0.0)];
    for _ in 0..p {
        poly = poly_mul(&poly, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
    }
    for y in roots {
        let b = C64::new(1.0, 0.0) - y * 2.0;
        let s = (b * b - 1.0).sqrt();
        let z = if (b + s).norm() < (b - s).norm() { b + s } else { b - s };
        poly = poly_mul(&poly, &[C64::new(1.0, 0.0), -z]);
    }
    let sum: f64 = poly.iter().map(|c| c.re).sum();
    Ok(poly.iter().map(|c| c.re * SQRT_2 / sum).collect())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Roots of `sum_k c_k y^k` (ascending coefficients) by Aberth iteration.
fn polynomial_roots(c: &[f64]) -> Result<Vec<C64>> {
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = c[deg];
    let radius = 1.0 + c[..deg].iter().map(|v| (v / lead).abs()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..deg)
        .map(|k| C64::from_polar(0.5 * radius, 2.0 * PI * (k as f64 + 0.25) / deg as f64))
        .collect();
    let eval = |y: C64| {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &ck in c.iter().rev() {
            dp = dp * y + p;
            p = p * y + ck;
        }
        (p, dp)
    };
    let mut change = f64::INFINITY;
    for _ in 0..500 {
        change = 0.0;
        for i in 0..deg {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..deg).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let w = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            z[i] -= w;
            change = change.max(w.norm() / z[i].norm().max(1.0));
        }
        if change < 1e-15 {
            return Ok(z);
        }
    }
    if change < 1e-12 {
        return Ok(z);
    }
    Err(Error::NonConvergence {
        what: "polynomial root finding",
        iterations: 500,
        residual: change,
    })
}

/// Evaluates `phi^` and `psi^` through the infinite product
/// `phi^(xi) = prod_k m0(xi / 2^k)`, truncated at `depth` factors. The neglected
/// tail is replaced by its first-order expansion `exp(-2 pi i mu xi / 2^depth)`
/// with `mu = 2^-1/2 sum_n n h_n`.
#[derive(Debug, Clone)]
pub struct FrequencyEvaluator {
    family: WaveletFamily,
    depth: u32,
    first_moment: f64,
    second_moment: f64,
}

impl FrequencyEvaluator {
    pub const DEFAULT_DEPTH: u32 = 40;

    pub fn new(family: WaveletFamily) -> Self {
        Self::with_depth(family, Self::DEFAULT_DEPTH).expect("default depth")
    }

    pub fn with_depth(family: WaveletFamily, depth: u32) -> Result<Self> {
        if depth == 0 || depth > 1000 {
            return Err(Error::InvalidArgument(format!("truncation depth {depth} out of range")));
        }
        let first_moment = family.lowpass.iter().enumerate().map(|(n, h)| n as f64 * h).sum::<f64>() / SQRT_2;
        let second_moment = family
            .lowpass
            .iter()
            .enumerate()
            .map(|(n, h)| (n * n) as f64 * h.abs())
            .sum::<f64>()
            / SQRT_2;
        Ok(FrequencyEvaluator {
            family,
            depth,
            first_moment,
            second_moment,
        })
    }

    pub fn family(&self) -> &WaveletFamily {
        &self.family
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn scaling_hat(&self, xi: f64) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        let mut x = xi;
        for _ in 0..self.depth {
            x *= 0.5;
            acc *= self.family.lowpass_symbol(x);
        }
        acc * C64::from_polar(1.0, -2.0 * PI * self.first_moment * x)
    }

    /// `psi^(xi) = m1(xi/2) phi^(xi/2)`.
    pub fn wavelet_hat(&self, xi: f64) -> C64 {
        self.family.highpass_symbol(0.5 * xi) * self.scaling_hat(0.5 * xi)
    }

    /// Estimate of the error left by the truncated product at `xi`: the
    /// second-order term of the tail, `(2 pi)^2 mu_2 (xi / 2^depth)^2`.
    pub fn truncation_bound(&self, xi: f64) -> f64 {
        let t = xi / 2f64.powi(self.depth as i32);
        (2.0 * PI).powi(2) * self.second_moment * t * t
    }

    /// Tensor scaling function `phi(x1) phi(x2)`.
    pub fn scaling_hat_2d(&self, xi: [f64; 2]) -> C64 {
        self.scaling_hat(xi[0]) * self.scaling_hat(xi[1])
    }

    /// Tensor wavelets: generator 1 is `phi (x) psi`, 2 is `psi (x) phi`,
    /// 3 is `psi (x) psi`.
    pub fn wavelet_hat_2d(&self, generator: u32, xi: [f64; 2]) -> Result<C64> {
        Ok(match generator {
            1 => self.scaling_hat(xi[0]) * self.wavelet_hat(xi[1]),
            2 => self.wavelet_hat(xi[0]) * self.scaling_hat(xi[1]),
            3 => self.wavelet_hat(xi[0]) * self.wavelet_hat(xi[1]),
            _ => return Err(Error::InvalidArgument(format!("tensor generator {generator} not in 1..=3"))),
        })
    }

    /// `sum_{s=-S}^{S-1} |phi^(xi + s)|^2`, the partial periodization that tends
    /// to one as `S` grows.
    pub fn shifted_energy(&self, xi: f64, s: i64) -> f64 {
        (-s..s).map(|k| self.scaling_hat(xi + k as f64).norm_sqr()).sum()
    }

    /// `sup |phi^(xi)| (1 + |xi|)` over `n` points of `[-xi_max, xi_max]`.
    pub fn decay_constant(&self, xi_max: f64, n: usize) -> f64 {
        (0..=n)
            .map(|i| -xi_max + 2.0 * xi_max * i as f64 / n as f64)
            .map(|x| self.scaling_hat(x).norm() * (1.0 + x.abs()))
            .fold(0.0, f64::max)
    }
}

/// Samples of a function on the dyadic grid `x_i = start + i 2^-level`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicSamples {
    pub level: u32,
    pub start: f64,
    pub values: Vec<f64>,
}

impl DyadicSamples {
    pub fn step(&self) -> f64 {
        2f64.powi(-(self.level as i32))
    }

    pub fn x(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step()
    }

    /// Index of the grid point `x`, if it lies on the grid.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.start) / self.step();
        let r = t.round();
        ((t - r).abs() < 1e-9 && r >= 0.0 && (r as usize) < self.values.len()).then_some(r as usize)
    }

    /// Value at `x`, zero off the sampled interval and off-grid points rejected.
    pub fn value_at(&self, x: f64) -> Option<f64> {
        let t = (x - self.start) / self.step();
        let r = t.round();
        if (t - r).abs() > 1e-9 {
            return None;
        }
        if r < 0.0 || r as usize >= self.values.len() {
            return Some(0.0);
        }
        Some(self.values[r as usize])
    }
}

/// Values of `phi` on `[0, 2p-1]` at spacing `2^-level`.
///
/// Integer values are the fixed point of `v <- M v`, `M_ij = sqrt(2) h_{2i-j}`,
/// iterated until successive iterates agree to `1e-14`; finer levels follow
/// from the refinement equation. Haar is returned as the right-continuous box.
pub fn cascade_evaluate(family: &WaveletFamily, level: u32) -> Result<DyadicSamples> {
    if level > 24 {
        return Err(Error::InvalidArgument(format!("cascade level {level} too large")));
    }
    let h = &family.lowpass;
    let n = h.len() - 1;
    let len = n * (1usize << level) + 1;
    if n == 1 {
        let mut values = vec![1.0; len];
        values[len - 1] = 0.0;
        return Ok(DyadicSamples { level, start: 0.0, values });
    }
    // interior integers 1..n-1
    let m = n - 1;
    let mut v = vec![1.0 / m as f64; m];
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while change > 1e-14 {
        iterations += 1;
        if iterations > 2000 {
            return Err(Error::NonConvergence {
                what: "cascade fixed point",
                iterations,
                residual: change,
            });
        }
        let mut next = vec![0.0; m];
        for (i, out) in next.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                let k = 2 * (i as i64 + 1) - (j as i64 + 1);
                if (0..=n as i64).contains(&k) {
                    *out += SQRT_2 * h[k as usize] * vj;
                }
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
    }
    let mut values = vec![0.0; n + 1];
    values[1..n].copy_from_slice(&v);
    for lev in 1..=level {
        let half = 1usize << (lev - 1);
        let new_len = n * (1usize << lev) + 1;
        let mut next = vec![0.0; new_len];
        for i in 0..new_len {
            if i % 2 == 0 {
                next[i] = values[i / 2];
            } else {
                let mut acc = 0.0;
                for (k, hk) in h.iter().enumerate() {
                    let idx = i as i64 - (k * half) as i64;
                    if idx >= 0 && (idx as usize) < values.len() {
                        acc += hk * values[idx as usize];
                    }
                }
                next[i] = SQRT_2 * acc;
            }
        }
        values = next;
    }
    Ok(DyadicSamples { level, start: 0.0, values })
}

/// Values of `psi` on `[0, 2p-1]` at spacing `2^-(level-1)` from samples of
/// `phi` at `level`.
pub fn wavelet_samples(family: &WaveletFamily, phi: &DyadicSamples) -> Result<DyadicSamples> {
    if phi.level == 0 {
        return Err(Error::InvalidArgument("need level >= 1 for wavelet samples".into()));
    }
    let n = family.lowpass.len() - 1;
    let level = phi.level - 1;
    let len = n * (1usize << level) + 1;
    let unit = 1usize << phi.level;
    let values = (0..len)
        .map(|i| {
            family
                .highpass
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    // psi(x_i) uses phi(2 x_i - k), index 4i - k 2^level in phi's grid
                    let idx = 4 * i as i64 - (k * unit) as i64;
                    if idx >= 0 && (idx as usize) < phi.values.len() {
                        g * phi.values[idx as usize]
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                * SQRT_2
        })
        .collect();
    Ok(DyadicSamples { level, start: 0.0, values })
}
