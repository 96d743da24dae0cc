//! Generalized sampling solves and the stable sampling rate.

use crate::error::{Error, Result};
use crate::gramian::{assemble_rows, FourierBasis, RowSource, SamplingScheme};
use crate::lattice::ScalingMatrix2;
use crate::linalg::{
    cgls, exceeds, hermitian_extremes, norm, operator_singular_range, qr_least_squares, singular_range,
    GramAccumulator, LinearOperator,
};
use crate::C64;
use nalgebra::DMatrix;
use std::fmt::Write as _;

/// `sigma_min / sigma_max` below which a cross-Gramian is treated as singular.
/// Singular values come from eigenvalues of `U^H U`, so smaller ratios are noise.
pub const RANK_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct GsOptions {
    /// Relative normal-equation residual `||U^H (U a - m)|| / ||U^H m||`.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest `N` for the dense QR fallback.
    pub qr_fallback_limit: usize,
}

impl Default for GsOptions {
    fn default() -> Self {
        GsOptions {
            tol: 1e-12,
            max_iter: 1000,
            qr_fallback_limit: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Cgls,
    Qr,
}

/// Generalized sampling reconstruction.
#[derive(Debug, Clone)]
pub struct GsResult {
    pub coefficients: Vec<C64>,
    /// `||U a - m||`.
    pub residual: f64,
    pub normal_residual: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Reconstruction constant `1 / sigma_min`.
    pub constant: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

fn check_rank(sigma_min: f64, sigma_max: f64) -> Result<()> {
    if sigma_max == 0.0 || sigma_min <= RANK_THRESHOLD * sigma_max {
        return Err(Error::RankDeficient { sigma_min });
    }
    Ok(())
}

fn solve(
    op: &dyn LinearOperator,
    dense: Option<&DMatrix<C64>>,
    m: &[C64],
    sigma: (f64, f64),
    opts: &GsOptions,
) -> Result<GsResult> {
    if m.len() != op.rows() {
        return Err(Error::InvalidArgument(format!(
            "{} measurements for {} sampling vectors",
            m.len(),
            op.rows()
        )));
    }
    let out = cgls(op, m, opts.tol, opts.max_iter);
    let (x, iterations, normal_residual, method) = if out.converged {
        (out.x, out.iterations, out.normal_residual, SolveMethod::Cgls)
    } else {
        match dense {
            Some(u) if u.ncols() <= opts.qr_fallback_limit => {
                let x = qr_least_squares(u, m)?;
                let r: Vec<C64> = op.apply(&x).iter().zip(m).map(|(a, b)| a - b).collect();
                let s0 = norm(&op.apply_adjoint(m));
                let rel = if s0 == 0.0 { 0.0 } else { norm(&op.apply_adjoint(&r)) / s0 };
                (x, out.iterations, rel, SolveMethod::Qr)
            }
            _ => {
                return Err(Error::NonConvergence {
                    what: "CGLS",
                    iterations: out.iterations,
                    residual: out.normal_residual,
                })
            }
        }
    };
    let residual = norm(&op.apply(&x).iter().zip(m).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok(GsResult {
        coefficients: x,
        residual,
        normal_residual,
        sigma_min: sigma.0,
        sigma_max: sigma.1,
        constant: 1.0 / sigma.0,
        iterations,
        method,
    })
}

/// Least-squares solution of `U a = m` with the singular values of `U`.
pub fn gs_solve(u: &DMatrix<C64>, m: &[C64], opts: &GsOptions) -> Result<GsResult> {
    let sigma = singular_range(u)?;
    check_rank(sigma.0, sigma.1)?;
    solve(u, Some(u), m, sigma, opts)
}

/// [`gs_solve`] for a matrix-free operator; singular values come from Lanczos.
pub fn gs_solve_operator(op: &dyn LinearOperator, m: &[C64], opts: &GsOptions) -> Result<GsResult> {
    let sigma = operator_singular_range(op)?;
    check_rank(sigma.0, sigma.1)?;
    solve(op, None, m, sigma, opts)
}

/// Growth direction `(A^J)^T (1, 1)` of the sampling block.
pub fn aspect(a_mat: &ScalingMatrix2, scale: u32) -> Result<(i64, i64)> {
    Ok(a_mat.power(scale)?.col_sums())
}

/// Half-widths at search parameter `t`: the larger axis is `t`, the other is
/// scaled by the aspect and rounded up.
pub fn half_widths_at(t: i64, aspect: (i64, i64)) -> (i64, i64) {
    let c = aspect.0.max(aspect.1).max(1);
    let up = |v: i64| (t * v + c - 1) / c;
    (up(aspect.0.max(1)), up(aspect.1.max(1)))
}

pub fn total_samples(half_widths: (i64, i64)) -> usize {
    ((2 * half_widths.0 + 1) * (2 * half_widths.1 + 1)) as usize
}

/// Frequencies of `outer` not in `inner`, row-major.
pub fn ring(inner: Option<(i64, i64)>, outer: (i64, i64)) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for l1 in -outer.0..=outer.0 {
        for l2 in -outer.1..=outer.1 {
            let inside = inner.is_some_and(|(m1, m2)| l1.abs() <= m1 && l2.abs() <= m2);
            if !inside {
                out.push((l1, l2));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct RateOptions {
    /// Target `1 / theta`.
    pub theta_inv: f64,
    /// After the scalar search, shrink each axis while the bound holds.
    pub refine_axes: bool,
    /// Largest half-width tried on either axis.
    pub max_half_width: i64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            theta_inv: 0.45,
            refine_axes: false,
            max_half_width: 4096,
        }
    }
}

/// Minimal sampling block for one basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub n: usize,
    pub half_widths: (i64, i64),
    pub total: usize,
    pub sigma_min: f64,
}

/// One tested block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchStep {
    pub n: usize,
    pub half_widths: (i64, i64),
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub theta_inv: f64,
    pub epsilon: f64,
    pub points: Vec<RatePoint>,
    pub trace: Vec<SearchStep>,
}

impl RateCurve {
    pub const CSV_HEADER: &'static str = "N,M_total,M1,M2,sigma_min,theta_inv,epsilon";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.12},{},{}",
                p.n, p.total, p.half_widths.0, p.half_widths.1, p.sigma_min, self.theta_inv, self.epsilon
            );
        }
        s
    }

    /// Slope `M_max / N_max` of the linear reference through the largest point.
    pub fn linear_reference(&self) -> Option<f64> {
        let p = self.points.iter().max_by_key(|p| p.n)?;
        Some(p.total as f64 / p.n as f64)
    }

    /// Least-squares slope of `log M` against `log N`.
    pub fn log_slope(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let xs: Vec<f64> = self.points.iter().map(|p| (p.n as f64).ln()).collect();
        let ys: Vec<f64> = self.points.iter().map(|p| (p.total as f64).ln()).collect();
        let k = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / k;
        let my = ys.iter().sum::<f64>() / k;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }

    /// `max (M/N) / min (M/N)` over the points.
    pub fn ratio_spread(&self) -> Option<f64> {
        let r: Vec<f64> = self.points.iter().map(|p| p.total as f64 / p.n as f64).collect();
        let hi = r.iter().cloned().fold(f64::NAN, f64::max);
        let lo = r.iter().cloned().fold(f64::NAN, f64::min);
        (!r.is_empty()).then(|| hi / lo)
    }

    /// Plain-text comparison with the linear reference.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "theta_inv = {}", self.theta_inv);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let Some(slope) = self.linear_reference() else {
            let _ = writeln!(s, "no points");
            return s;
        };
        let _ = writeln!(s, "linear reference f(N) = {slope:.6} N");
        let _ = writeln!(s, "{:>8} {:>10} {:>12} {:>8}", "N", "M_total", "f(N)", "M/f(N)");
        for p in &self.points {
            let f = slope * p.n as f64;
            let _ = writeln!(s, "{:>8} {:>10} {:>12.1} {:>8.4}", p.n, p.total, f, p.total as f64 / f);
        }
        if let Some(v) = self.log_slope() {
            let _ = writeln!(s, "log-log slope = {v:.4}");
        }
        if let Some(v) = self.ratio_spread() {
            let _ = writeln!(s, "ratio spread = {v:.4}");
        }
        s
    }
}

/// Row source whose frequency tables grow on demand.
struct GrowingRows<'a> {
    basis: &'a dyn FourierBasis,
    epsilon: f64,
    width: i64,
    source: Option<Box<dyn RowSource + 'a>>,
}

impl<'a> GrowingRows<'a> {
    fn rows(&mut self, freqs: &[(i64, i64)]) -> Result<Vec<C64>> {
        let need = freqs.iter().map(|l| l.0.abs().max(l.1.abs())).max().unwrap_or(0);
        if self.source.is_none() || need > self.width {
            self.width = need.max(2 * self.width).max(8);
            let scheme = SamplingScheme::new(self.epsilon, (self.width, self.width))?;
            self.source = Some(self.basis.rows(&scheme)?);
        }
        let src = self.source.as_deref().expect("source prepared");
        Ok(assemble_rows(src, self.basis.dim(), freqs))
    }
}

fn add_ring(
    acc: &mut GramAccumulator,
    rows: &mut GrowingRows<'_>,
    inner: Option<(i64, i64)>,
    outer: (i64, i64),
    sign: f64,
) -> Result<()> {
    let freqs = ring(inner, outer);
    let buf = rows.rows(&freqs)?;
    acc.update(&buf, sign);
    Ok(())
}

/// Smallest block along `aspect` with `sigma_min >= theta_inv`, found by
/// exponential search and bisection on the scalar parameter (`sigma_min` is
/// nondecreasing as the block grows). Each candidate is accepted when
/// `U^H U - theta_inv^2 I` admits a Cholesky factor.
pub fn rate_for_basis(
    basis: &dyn FourierBasis,
    epsilon: f64,
    aspect: (i64, i64),
    opts: &RateOptions,
    trace: &mut Vec<SearchStep>,
) -> Result<RatePoint> {
    if !(opts.theta_inv > 0.0 && opts.theta_inv < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "theta_inv={} must lie in (0, 1)",
            opts.theta_inv
        )));
    }
    let n = basis.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty basis".into()));
    }
    let (lo, hi) = basis.support();
    SamplingScheme::new(epsilon, (0, 0))?.check_support(lo, hi)?;
    let tau = opts.theta_inv * opts.theta_inv;
    let mut rows = GrowingRows {
        basis,
        epsilon,
        width: 0,
        source: None,
    };
    let hw = |t: i64| half_widths_at(t, aspect);
    let within_cap = |t: i64| {
        let h = hw(t);
        h.0.max(h.1) <= opts.max_half_width
    };
    // blocks with fewer rows than columns are rank deficient
    let mut t_lo: i64 = -1;
    while total_samples(hw(t_lo + 1)) < n {
        t_lo += 1;
    }
    if !within_cap(t_lo.max(0)) {
        return Err(Error::SearchCapExceeded {
            largest: hw(t_lo.max(0)),
            sigma_min: 0.0,
        });
    }
    let mut g_lo = GramAccumulator::new(n);
    if t_lo >= 0 {
        add_ring(&mut g_lo, &mut rows, None, hw(t_lo), 1.0)?;
    }
    let inner = |t: i64| (t >= 0).then(|| hw(t));
    let mut step = 1;
    let (mut t_hi, mut g_hi) = loop {
        let mut t = t_lo + step;
        if !within_cap(t) {
            t = (t_lo + 1..t).rev().find(|&s| within_cap(s)).unwrap_or(t_lo);
            if t <= t_lo {
                let sigma = if g_lo.rows() >= n {
                    hermitian_extremes(&g_lo.hermitian())?.0.max(0.0).sqrt()
                } else {
                    0.0
                };
                return Err(Error::SearchCapExceeded {
                    largest: hw(t_lo.max(0)),
                    sigma_min: sigma,
                });
            }
        }
        let mut g = g_lo.clone();
        add_ring(&mut g, &mut rows, inner(t_lo), hw(t), 1.0)?;
        let ok = exceeds(&g.hermitian(), tau);
        trace.push(SearchStep {
            n,
            half_widths: hw(t),
            accepted: ok,
        });
        if ok {
            break (t, g);
        }
        t_lo = t;
        g_lo = g;
        step *= 2;
    };
    while t_hi - t_lo > 1 {
        let mid = t_lo + (t_hi - t_lo) / 2;
        let mut g = g_lo.clone();
        add_ring(&mut g, &mut rows, inner(t_lo), hw(mid), 1.0)?;
        let ok = exceeds(&g.hermitian(), tau);
        trace.push(SearchStep {
            n,
            half_widths: hw(mid),
            accepted: ok,
        });
        if ok {
            t_hi = mid;
            g_hi = g;
        } else {
            t_lo = mid;
            g_lo = g;
        }
    }
    let mut best = hw(t_hi);
    if opts.refine_axes {
        for axis in 0..2 {
            loop {
                let cur = best;
                let smaller = if axis == 0 { (cur.0 - 1, cur.1) } else { (cur.0, cur.1 - 1) };
                if smaller.0 < 0 || smaller.1 < 0 || total_samples(smaller) < n {
                    break;
                }
                let mut g = g_hi.clone();
                add_ring(&mut g, &mut rows, Some(smaller), cur, -1.0)?;
                let ok = exceeds(&g.hermitian(), tau);
                trace.push(SearchStep {
                    n,
                    half_widths: smaller,
                    accepted: ok,
                });
                if !ok {
                    break;
                }
                best = smaller;
                g_hi = g;
            }
        }
    }
    let sigma_min = hermitian_extremes(&g_hi.hermitian())?.0.max(0.0).sqrt();
    Ok(RatePoint {
        n,
        half_widths: best,
        total: total_samples(best),
        sigma_min,
    })
}

/// One basis of a ladder and its growth direction.
pub struct LadderRung<'a> {
    pub basis: &'a dyn FourierBasis,
    pub aspect: (i64, i64),
}

/// `Theta(N, theta)` for every basis of the ladder.
pub fn stable_sampling_rate(ladder: &[LadderRung<'_>], epsilon: f64, opts: &RateOptions) -> Result<RateCurve> {
    let mut trace = Vec::new();
    let mut points = Vec::with_capacity(ladder.len());
    for rung in ladder {
        points.push(rate_for_basis(rung.basis, epsilon, rung.aspect, opts, &mut trace)?);
    }
    Ok(RateCurve {
        theta_inv: opts.theta_inv,
        epsilon,
        points,
        trace,
    })
}
