//! Sampling inequalities for trigonometric polynomials and the constants they
//! feed into the sampling rate.

use crate::error::{Error, Result};
use crate::lattice::{mesh_norm, ExpansionBounds, MeshGeometry};
use crate::wavelet::FrequencyEvaluator;
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Coefficients `alpha_{k,l}` of `Phi(z) = sum alpha_{k,l} exp(2 pi i (k z1 + l z2))`
/// for `k` from `first.0` and `l` from `first.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigBlock {
    pub first: (i64, i64),
    pub coefficients: DMatrix<C64>,
}

impl TrigBlock {
    pub fn eval(&self, z: [f64; 2]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, row) in self.coefficients.row_iter().enumerate() {
            let k = (self.first.0 + i as i64) as f64;
            for (j, a) in row.iter().enumerate() {
                let l = (self.first.1 + j as i64) as f64;
                acc += a * C64::from_polar(1.0, 2.0 * PI * (k * z[0] + l * z[1]));
            }
        }
        acc
    }
}

/// `|sum_{m,n} |Phi(m / 2L1, n / 2L2)|^2 / (4 L1 L2) - sum |alpha|^2|`, with the
/// grid values from a two-dimensional FFT. The identity is exact once the grid
/// is at least as wide as the block.
pub fn grid_parseval_check(block: &TrigBlock, l1: usize, l2: usize) -> Result<f64> {
    let (w1, w2) = block.coefficients.shape();
    if 2 * l1 < w1 || 2 * l2 < w2 {
        return Err(Error::InvalidArgument(format!(
            "grid {}x{} narrower than the {}x{} coefficient block",
            2 * l1,
            2 * l2,
            w1,
            w2
        )));
    }
    let (n1, n2) = (2 * l1, 2 * l2);
    let mut grid = vec![C64::new(0.0, 0.0); n1 * n2];
    for i in 0..w1 {
        let r = (block.first.0 + i as i64).rem_euclid(n1 as i64) as usize;
        for j in 0..w2 {
            let c = (block.first.1 + j as i64).rem_euclid(n2 as i64) as usize;
            grid[r * n2 + c] += block.coefficients[(i, j)];
        }
    }
    let mut planner = FftPlanner::new();
    let f2 = planner.plan_fft_inverse(n2);
    for row in grid.chunks_mut(n2) {
        f2.process(row);
    }
    let f1 = planner.plan_fft_inverse(n1);
    let mut col = vec![C64::new(0.0, 0.0); n1];
    for c in 0..n2 {
        for r in 0..n1 {
            col[r] = grid[r * n2 + c];
        }
        f1.process(&mut col);
        for r in 0..n1 {
            grid[r * n2 + c] = col[r];
        }
    }
    let lhs: f64 = grid.iter().map(|z| z.norm_sqr()).sum::<f64>() / (n1 * n2) as f64;
    let rhs: f64 = block.coefficients.iter().map(|z| z.norm_sqr()).sum();
    Ok((lhs - rhs).abs())
}

/// Lower frame constant for sampling trigonometric polynomials on a perturbed grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MzBound {
    /// `1 - (exp(2 pi delta L) - 1) sqrt(mu)`.
    pub constant: f64,
    /// Largest admissible mesh norm `log(1/sqrt(mu) + 1) / (2 pi L)`.
    pub threshold: f64,
    /// `delta` is below the threshold, so the constant is positive.
    pub admissible: bool,
}

/// The constant for mesh norm `delta`, translation bounds `L` and region measure `mu`.
pub fn mz_lower_bound(delta: f64, bounds: &ExpansionBounds, mu: f64) -> MzBound {
    let lmax = bounds.max_abs() as f64;
    let root = mu.sqrt();
    let constant = 1.0 - ((2.0 * PI * delta * lmax).exp() - 1.0) * root;
    let threshold = if lmax == 0.0 || root == 0.0 {
        f64::INFINITY
    } else {
        (1.0 / root + 1.0).ln() / (2.0 * PI * lmax)
    };
    MzBound {
        constant,
        threshold,
        admissible: delta < threshold && constant > 0.0,
    }
}

/// Outcome of [`mz_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct MzSweep {
    pub bound: MzBound,
    pub delta: f64,
    pub region_measure: f64,
    pub draws: usize,
    /// Draws with `sum w |Phi(x_l)|^2 < C^2 ||Phi||^2`.
    pub violations: usize,
    /// Smallest `sum w |Phi(x_l)|^2 / ||Phi||^2` seen.
    pub min_ratio: f64,
}

/// Sinc `sin(pi x) / (pi x)`.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-300 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Checks the lower sampling inequality on `draws` seeded random polynomials
/// `Phi(z) = sum_m alpha_m exp(-2 pi i <z, m>)`, `m` in the expansion bounds,
/// complex standard normal coefficients. `||Phi||` is the `L^2` norm over the
/// region `B([-M1, M1] x [-M2, M2])` spanned by the nodes `x_l = B l`, evaluated
/// exactly as a quadratic form in sinc products.
pub fn mz_sweep(geom: &MeshGeometry, bounds: &ExpansionBounds, draws: usize, seed: u64) -> Result<MzSweep> {
    let (m1, m2) = geom.half_widths;
    if m1 == 0 || m2 == 0 {
        return Err(Error::InvalidArgument("sampling region has zero measure".into()));
    }
    let delta = mesh_norm(geom);
    let mu = geom.region_measure();
    let bound = mz_lower_bound(delta, bounds, mu);
    let b = geom.generator;
    let cell = geom.cell_measure();
    let ms: Vec<(i64, i64)> = (bounds.lower.0..=bounds.upper.0)
        .flat_map(|a| (bounds.lower.1..=bounds.upper.1).map(move |c| (a, c)))
        .collect();
    let k = ms.len();
    // w = B^T m
    let bt = |m: (f64, f64)| [b[0][0] * m.0 + b[1][0] * m.1, b[0][1] * m.0 + b[1][1] * m.1];
    let gram = DMatrix::from_fn(k, k, |i, j| {
        let d = ((ms[i].0 - ms[j].0) as f64, (ms[i].1 - ms[j].1) as f64);
        let w = bt(d);
        let v = cell * (2.0 * m1 as f64) * (2.0 * m2 as f64) * sinc(2.0 * m1 as f64 * w[0]) * sinc(2.0 * m2 as f64 * w[1]);
        C64::new(v, 0.0)
    });
    let nodes: Vec<(i64, i64)> = (-m1..=m1).flat_map(|a| (-m2..=m2).map(move |c| (a, c))).collect();
    let eval = DMatrix::from_fn(nodes.len(), k, |r, c| {
        let x = geom.node(nodes[r]);
        let m = ms[c];
        C64::from_polar(1.0, -2.0 * PI * (x[0] * m.0 as f64 + x[1] * m.1 as f64))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let required = bound.constant.max(0.0).powi(2);
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..draws {
        let alpha = DVector::from_fn(k, |_, _| {
            C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let norm_sq = (alpha.adjoint() * &gram * &alpha)[(0, 0)].re;
        let discrete = cell * (&eval * &alpha).norm_squared();
        let ratio = discrete / norm_sq;
        min_ratio = min_ratio.min(ratio);
        if discrete < required * norm_sq {
            violations += 1;
        }
    }
    Ok(MzSweep {
        bound,
        delta,
        region_measure: mu,
        draws,
        violations,
        min_ratio,
    })
}

/// Largest `S` tried by [`tail_mass_s`].
pub const TAIL_MASS_CAP: i64 = 1 << 16;

/// Smallest `S` with `sum_{s,t = -S}^{S-1} |phi^(xi + (s, t))|^2 >= 1/theta` at
/// every point of a `grid x grid` mesh of `[0, 1)^2`. The two-dimensional sum is
/// the product of one-dimensional ones for tensor generators.
pub fn tail_mass_s(ev: &FrequencyEvaluator, theta: f64, grid: usize) -> Result<i64> {
    if !(theta > 1.0) {
        return Err(Error::InvalidArgument(format!("theta={theta} must exceed 1")));
    }
    let xs: Vec<f64> = (0..grid.max(1)).map(|i| i as f64 / grid.max(1) as f64).collect();
    let target = 1.0 / theta;
    let mut energy: Vec<f64> = xs.iter().map(|&x| ev.scaling_hat(x).norm_sqr() + ev.scaling_hat(x - 1.0).norm_sqr()).collect();
    let mut s = 1;
    loop {
        let lo = energy.iter().cloned().fold(f64::INFINITY, f64::min);
        if lo * lo >= target {
            return Ok(s);
        }
        if s >= TAIL_MASS_CAP {
            return Err(Error::SearchCapExceeded {
                largest: (s, s),
                sigma_min: lo * lo,
            });
        }
        // extend [-S, S) to [-S-1, S+1)
        for (e, &x) in energy.iter_mut().zip(&xs) {
            *e += ev.scaling_hat(x + s as f64).norm_sqr() + ev.scaling_hat(x - s as f64 - 1.0).norm_sqr();
        }
        s += 1;
    }
}

/// Left side of the transfer condition
/// `sqrt(1/theta^2 - 16 / (pi^4 (C - 1)^2)) - sqrt(1 - 1/theta)`, or `None` when
/// the first root is imaginary or `C <= 1`.
pub fn transfer_margin(theta: f64, c: f64) -> Option<f64> {
    if c <= 1.0 || theta <= 1.0 {
        return None;
    }
    let inner = 1.0 / (theta * theta) - 16.0 / (PI.powi(4) * (c - 1.0).powi(2));
    (inner >= 0.0).then(|| inner.sqrt() - (1.0 - 1.0 / theta).sqrt())
}

/// Sample block at density `eps2` that keeps `sigma_min >= 1/gamma` given a block
/// `m` at density `eps1` with `sigma_min >= 1/theta`:
/// `K_i = ceil(C M_i eps1 / eps2)`.
pub fn epsilon_transfer(gamma: f64, eps1: f64, eps2: f64, m: (i64, i64), theta: f64, c: f64) -> Result<(i64, i64)> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidArgument(format!("gamma={gamma} must exceed 1")));
    }
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::InvalidArgument("sampling densities must be positive".into()));
    }
    match transfer_margin(theta, c) {
        Some(v) if v > 1.0 / gamma => {}
        Some(v) => {
            return Err(Error::ConstraintViolated(format!(
                "transfer margin {v} does not exceed 1/gamma = {}",
                1.0 / gamma
            )))
        }
        None => {
            return Err(Error::ConstraintViolated(format!(
                "no transfer margin for theta={theta}, C={c}"
            )))
        }
    }
    let k = |mi: i64| (c * mi as f64 * eps1 / eps2 - 1e-9).ceil() as i64;
    Ok((k(m.0), k(m.1)))
}
