//! Dense and matrix-free linear algebra on complex operators.

use crate::error::{Error, Result};
use crate::gramian::ImplicitOperator;
use crate::C64;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest dimension for which eigenvalues are computed densely.
pub const DENSE_EIGEN_LIMIT: usize = 800;

/// A linear map `C^cols -> C^rows` with its adjoint.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64>;
}

impl LinearOperator for DMatrix<C64> {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn cols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let v = self * DVector::from_column_slice(x);
        v.as_slice().to_vec()
    }

    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let v = self.ad_mul(&DVector::from_column_slice(y));
        v.as_slice().to_vec()
    }
}

impl LinearOperator for ImplicitOperator {
    fn rows(&self) -> usize {
        ImplicitOperator::rows(self)
    }

    fn cols(&self) -> usize {
        ImplicitOperator::cols(self)
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        ImplicitOperator::apply(self, x)
    }

    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        ImplicitOperator::apply_adjoint(self, y)
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Accumulates `G = U^H U` from blocks of rows using real products:
/// `Re G = X^T X + Y^T Y`, `Im G = X^T Y - Y^T X` for `U = X + iY`.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    rows: usize,
}

/// Rows per product when accumulating.
const GRAM_CHUNK: usize = 2048;

impl GramAccumulator {
    pub fn new(n: usize) -> Self {
        GramAccumulator {
            re: DMatrix::zeros(n, n),
            im: DMatrix::zeros(n, n),
            rows: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    /// Number of rows currently accumulated.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) rows given row-major.
    pub fn update(&mut self, rows: &[C64], sign: f64) {
        let n = self.dim();
        if n == 0 || rows.is_empty() {
            return;
        }
        let count = rows.len() / n;
        for chunk in rows.chunks(GRAM_CHUNK * n) {
            let k = chunk.len() / n;
            // row-major k x n is column-major n x k
            let xt = DMatrix::from_iterator(n, k, chunk.iter().map(|z| z.re));
            let yt = DMatrix::from_iterator(n, k, chunk.iter().map(|z| z.im));
            let x = xt.transpose();
            let y = yt.transpose();
            self.re.gemm(sign, &xt, &x, 1.0);
            self.re.gemm(sign, &yt, &y, 1.0);
            let p = &xt * &y;
            self.im += (&p - p.transpose()) * sign;
        }
        if sign > 0.0 {
            self.rows += count;
        } else {
            self.rows -= count;
        }
    }

    pub fn hermitian(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| C64::new(self.re[(i, j)], self.im[(i, j)]))
    }
}

/// `U^H U` by real matrix products.
pub fn gram_matrix(u: &DMatrix<C64>) -> DMatrix<C64> {
    let n = u.ncols();
    let xt = u.map(|z| z.re).transpose();
    let yt = u.map(|z| z.im).transpose();
    let x = xt.transpose();
    let y = yt.transpose();
    let re = &xt * &x + &yt * &y;
    let p = &xt * &y;
    let im = &p - p.transpose();
    DMatrix::from_fn(n, n, |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

/// True when `G - tau I` is positive definite. The test factors the real
/// symmetric embedding `[[Re G, -Im G], [Im G, Re G]]`, whose spectrum is that of
/// `G` doubled; complex Cholesky cannot fail on indefinite input.
pub fn exceeds(g: &DMatrix<C64>, tau: f64) -> bool {
    let n = g.nrows();
    let e = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = g[(i % n, j % n)];
        let v = match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        };
        if i == j {
            v - tau
        } else {
            v
        }
    });
    Cholesky::new(e).is_some()
}

/// Which Ritz values must converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremes {
    Largest,
    Both,
}

/// Options for [`lanczos`].
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Residual bound relative to the largest Ritz value.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iter: 400,
            tol: 1e-11,
            seed: 7,
        }
    }
}

/// Largest relative residual accepted for the top of the spectrum in
/// [`hermitian_extremes`] when Lanczos runs out of iterations. The largest
/// eigenvalues of a cross-Gramian cluster just below one, so the Ritz vectors
/// converge slowly while the Ritz value itself is already accurate.
pub const TOP_TOLERANCE: f64 = 1e-3;

/// Extreme eigenvalues `(min, max)` of a Hermitian operator by Lanczos with full
/// reorthogonalisation.
pub fn lanczos(
    n: usize,
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    which: Extremes,
    opts: &LanczosOptions,
) -> Result<(f64, f64)> {
    let (lmin, lmax, residual, converged) = lanczos_run(n, apply, which, opts)?;
    if converged {
        Ok((lmin, lmax))
    } else {
        Err(Error::NonConvergence {
            what: "Lanczos",
            iterations: opts.max_iter.min(n),
            residual,
        })
    }
}

/// Ritz values, relative residual and whether the tolerance was met.
fn lanczos_run(
    n: usize,
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    which: Extremes,
    opts: &LanczosOptions,
) -> Result<(f64, f64, f64, bool)> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<C64> = (0..n)
        .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let s = norm(&q);
    q.iter_mut().for_each(|z| *z /= s);
    let mut basis: Vec<Vec<C64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let cap = opts.max_iter.min(n);
    let mut last = (0.0, 0.0, f64::INFINITY);
    for k in 0..cap {
        let mut w = apply(&basis[k]);
        let a = dot(&basis[k], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let b = norm(&w);
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (mut imin, mut imax) = (0, 0);
        for i in 0..m {
            if eig.eigenvalues[i] < eig.eigenvalues[imin] {
                imin = i;
            }
            if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                imax = i;
            }
        }
        let (lmin, lmax) = (eig.eigenvalues[imin], eig.eigenvalues[imax]);
        let scale = lmax.abs().max(lmin.abs()).max(f64::MIN_POSITIVE);
        let rmax = (b * eig.eigenvectors[(m - 1, imax)]).abs();
        let rmin = (b * eig.eigenvectors[(m - 1, imin)]).abs();
        let res = match which {
            Extremes::Largest => rmax,
            Extremes::Both => rmax.max(rmin),
        };
        last = (lmin, lmax, res / scale);
        if res <= opts.tol * scale || b <= 1e-14 * scale || m == n {
            return Ok((lmin, lmax, res / scale, true));
        }
        beta.push(b);
        w.iter_mut().for_each(|z| *z /= b);
        basis.push(w);
    }
    Ok((last.0, last.1, last.2, false))
}

/// Extreme eigenvalues `(min, max)` of a Hermitian positive semidefinite matrix.
/// Small matrices are diagonalised; larger ones use Lanczos on `G` for the top,
/// accepting [`TOP_TOLERANCE`], and on `G^-1` through a Cholesky factor for the bottom. A matrix that is not
/// numerically positive definite reports a minimum of zero.
pub fn hermitian_extremes(g: &DMatrix<C64>) -> Result<(f64, f64)> {
    let n = g.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if n <= DENSE_EIGEN_LIMIT {
        let ev = g.clone().symmetric_eigenvalues();
        return Ok((ev.min(), ev.max()));
    }
    let opts = LanczosOptions::default();
    let apply = |v: &[C64]| (g * DVector::from_column_slice(v)).as_slice().to_vec();
    let (_, top, residual, converged) = lanczos_run(n, &apply, Extremes::Largest, &opts)?;
    if !converged && residual > TOP_TOLERANCE {
        return Err(Error::NonConvergence {
            what: "Lanczos",
            iterations: opts.max_iter.min(n),
            residual,
        });
    }
    if !exceeds(g, 0.0) {
        return Ok((0.0, top));
    }
    let chol = Cholesky::new(g.clone()).expect("positive definite");
    let (_, inv_top) = lanczos(
        n,
        &|v| chol.solve(&DVector::from_column_slice(v)).as_slice().to_vec(),
        Extremes::Largest,
        &opts,
    )?;
    Ok((1.0 / inv_top, top))
}

/// `(sigma_min, sigma_max)` of a dense matrix.
pub fn singular_range(u: &DMatrix<C64>) -> Result<(f64, f64)> {
    if u.nrows() < u.ncols() {
        let top = if u.ncols() <= DENSE_EIGEN_LIMIT {
            gram_matrix(u).symmetric_eigenvalues().max()
        } else {
            hermitian_extremes(&gram_matrix(u))?.1
        };
        return Ok((0.0, top.max(0.0).sqrt()));
    }
    let (lo, hi) = hermitian_extremes(&gram_matrix(u))?;
    Ok((lo.max(0.0).sqrt(), hi.max(0.0).sqrt()))
}

/// `sigma_min(U)`, the infimum cosine between the reconstruction and sampling spaces.
pub fn smallest_singular_value(u: &DMatrix<C64>) -> Result<f64> {
    Ok(singular_range(u)?.0)
}

/// `(sigma_min, sigma_max)` of an operator by Lanczos on `U^H U`.
pub fn operator_singular_range(op: &dyn LinearOperator) -> Result<(f64, f64)> {
    let opts = LanczosOptions::default();
    let (lo, hi) = lanczos(op.cols(), &|v| op.apply_adjoint(&op.apply(v)), Extremes::Both, &opts)?;
    Ok((lo.max(0.0).sqrt(), hi.max(0.0).sqrt()))
}

/// Outcome of [`cgls`].
#[derive(Debug, Clone)]
pub struct CglsOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub converged: bool,
    /// `||U^H (U x - b)|| / ||U^H b||`.
    pub normal_residual: f64,
}

/// Conjugate gradients on the normal equations `U^H U x = U^H b`.
pub fn cgls(op: &dyn LinearOperator, b: &[C64], tol: f64, max_iter: usize) -> CglsOutcome {
    let n = op.cols();
    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut r = b.to_vec();
    let mut s = op.apply_adjoint(&r);
    let s0 = norm(&s);
    if s0 == 0.0 {
        return CglsOutcome {
            x,
            iterations: 0,
            converged: true,
            normal_residual: 0.0,
        };
    }
    let mut p = s.clone();
    let mut gamma = s0 * s0;
    for it in 1..=max_iter {
        let q = op.apply(&p);
        let qq: f64 = q.iter().map(|z| z.norm_sqr()).sum();
        if qq == 0.0 {
            break;
        }
        let a = C64::new(gamma / qq, 0.0);
        axpy(a, &p, &mut x);
        axpy(-a, &q, &mut r);
        s = op.apply_adjoint(&r);
        let g_new: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        let rel = g_new.sqrt() / s0;
        if rel <= tol {
            return CglsOutcome {
                x,
                iterations: it,
                converged: true,
                normal_residual: rel,
            };
        }
        let beta = g_new / gamma;
        gamma = g_new;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + *pi * beta;
        }
    }
    let rel = norm(&s) / s0;
    CglsOutcome {
        x,
        iterations: max_iter,
        converged: rel <= tol,
        normal_residual: rel,
    }
}

/// Least squares by Householder QR.
pub fn qr_least_squares(u: &DMatrix<C64>, b: &[C64]) -> Result<Vec<C64>> {
    let n = u.ncols();
    let qr = u.clone().qr();
    let qtb = qr.q().ad_mul(&DVector::from_column_slice(b));
    let r = qr.r();
    let rhs = qtb.rows(0, n).into_owned();
    let x = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient { sigma_min: 0.0 })?;
    Ok(x.as_slice().to_vec())
}
