//! Orthonormal scaling functions and wavelets on `[0, 1]` built from Daubechies
//! translates restricted to the interval, and their tensor products on the unit
//! square.
//!
//! The scaling function is used in its centred form `phi_c(x) = phi(x + p - 1)`,
//! supported on `[-p+1, p]`. At scale `j >= J0` (the least `j` with `2^j >= 2p`)
//! the space `V_j` is spanned by
//! * `p` left edge functions, combinations of `phi_c(x - m)` restricted to
//!   `[0, inf)`, `m in [-p+1, p-1]`, whose span reproduces polynomials of degree
//!   below `p` near the left edge,
//! * the interior translates `phi_c(2^j x - n)`, `p <= n < 2^j - p`,
//! * `p` right edge functions built the same way from `m in [-p, p-2]` on
//!   `(-inf, 0]` and moved to `x = 1`.
//!
//! Every function is stored as a coefficient row over the restricted translates
//! `tau_{s,n}(x) = 2^{s/2} phi_c(2^s x - n) chi_[0,1](x)`, `n in [-p+1, 2^s+p-2]`.
//! Inner products between restricted translates reduce to the half-line Gram
//! `int_0^inf phi_c(x - m) phi_c(x - m') dx`, obtained exactly from its two-scale
//! relation; Fourier transforms of the truncated translates use quadrature on
//! the cascade grid. Boundary wavelets are an orthonormal basis of the part of
//! `V_{j+1}` orthogonal to `V_j` and to the interior wavelets, split into a left
//! and a right group by diagonalising the position operator.

use crate::error::{Error, Result};
use crate::quadrature::{richardson_trapezoid, richardson_trapezoid_c};
use crate::wavelet::{cascade_evaluate, DyadicSamples, FrequencyEvaluator, WaveletFamily};
use crate::C64;
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

/// Default dyadic level of the cascade grid used for quadrature.
pub const DEFAULT_LEVEL: u32 = 12;

/// Edge functions and quadrature data for one Daubechies family.
#[derive(Debug, Clone)]
pub struct BoundaryFamily {
    family: WaveletFamily,
    evaluator: FrequencyEvaluator,
    p: i64,
    phi: DyadicSamples,
    /// Half-line Gram for translates `m, m' in [-p+1, p-2]` crossing the origin.
    half_line: DMatrix<f64>,
    /// Left edge coefficients, `p x (2p-1)`, column `c` is translate `c - p + 1`.
    left: DMatrix<f64>,
    /// Right edge coefficients, `p x (2p-1)`, column `c` is translate `c - p`.
    right: DMatrix<f64>,
}

impl BoundaryFamily {
    /// Builds the edge functions for `p` vanishing moments with quadrature on a
    /// cascade grid of spacing `2^-level`.
    pub fn new(p: usize, level: u32) -> Result<Self> {
        let family = WaveletFamily::daubechies(p)?;
        if level < 2 {
            return Err(Error::InvalidArgument(format!("quadrature level {level} too coarse")));
        }
        let mut phi = cascade_evaluate(&family, level)?;
        let pi = p as i64;
        phi.start = -(pi - 1) as f64;
        if p == 1 {
            // left limit at the right end keeps the trapezoid rule exact for the box
            *phi.values.last_mut().unwrap() = 1.0;
        }
        let evaluator = FrequencyEvaluator::new(family.clone());
        let mut out = BoundaryFamily {
            family,
            evaluator,
            p: pi,
            phi,
            half_line: DMatrix::zeros(0, 0),
            left: DMatrix::zeros(0, 0),
            right: DMatrix::zeros(0, 0),
        };
        let lo = -pi + 1;
        out.half_line = out.solve_half_line_gram()?;
        let moments = out.centred_moments();
        out.left = out.edge_coefficients(&moments, lo, true)?;
        out.right = out.edge_coefficients(&moments, -pi, false)?;
        Ok(out)
    }

    pub fn family(&self) -> &WaveletFamily {
        &self.family
    }

    pub fn evaluator(&self) -> &FrequencyEvaluator {
        &self.evaluator
    }

    pub fn vanishing_moments(&self) -> usize {
        self.p as usize
    }

    /// Coarsest admissible scale `J0 = min { j : 2^j >= 2p }`.
    pub fn coarsest_scale(&self) -> u32 {
        coarsest_scale(self.p as usize)
    }

    /// Samples of `phi_c` on `[-p+1, p]`.
    pub fn samples(&self) -> &DyadicSamples {
        &self.phi
    }

    /// Left edge coefficients: row `k`, column `c` multiplies `phi_c(x - (c - p + 1))`.
    pub fn left_coefficients(&self) -> &DMatrix<f64> {
        &self.left
    }

    /// Right edge coefficients: row `k`, column `c` multiplies `phi_c(x - (c - p))`
    /// restricted to `(-inf, 0]`.
    pub fn right_coefficients(&self) -> &DMatrix<f64> {
        &self.right
    }

    fn sample_index(&self, t: i64) -> usize {
        ((t + self.p - 1) as usize) << self.phi.level
    }

    /// Half-line Gram entries for pairs of translates that both cross the origin,
    /// from the two-scale relation
    /// `G(m, m') = sum_{k,k'} h_k h_k' G(2m + k - p + 1, 2m' + k' - p + 1)`,
    /// whose remaining terms are known from full-line orthonormality.
    fn solve_half_line_gram(&self) -> Result<DMatrix<f64>> {
        let p = self.p;
        let n = (2 * p - 2) as usize;
        let lo = -p + 1;
        if n == 0 {
            return Ok(DMatrix::zeros(0, 0));
        }
        let idx = |m: i64, mp: i64| ((m - lo) as usize) * n + (mp - lo) as usize;
        let h = self.family.lowpass();
        let mut a = DMatrix::<f64>::identity(n * n, n * n);
        let mut b = nalgebra::DVector::<f64>::zeros(n * n);
        for m in lo..p - 1 {
            for mp in lo..p - 1 {
                let row = idx(m, mp);
                for (k, hk) in h.iter().enumerate() {
                    for (kp, hkp) in h.iter().enumerate() {
                        let c = 2 * m + k as i64 - p + 1;
                        let cp = 2 * mp + kp as i64 - p + 1;
                        let w = hk * hkp;
                        if c <= -p || cp <= -p {
                            continue;
                        }
                        if c.max(cp) >= p - 1 {
                            if c == cp {
                                b[row] += w;
                            }
                        } else {
                            a[(row, idx(c, cp))] -= w;
                        }
                    }
                }
            }
        }
        let x = a.lu().solve(&b).ok_or(Error::NotPositiveDefinite {
            what: "half-line two-scale system",
            pivot: 0.0,
        })?;
        Ok(DMatrix::from_fn(n, n, |r, c| x[r * n + c]))
    }

    /// Quadrature value of the half-line Gram entry on the cascade grid.
    pub fn half_line_quadrature(&self, m: i64, mp: i64) -> f64 {
        let p = self.p;
        let a = 0.max(m - p + 1).max(mp - p + 1);
        let b = (m + p).min(mp + p);
        if b <= a {
            return 0.0;
        }
        let n = ((b - a) as usize) << self.phi.level;
        let (i0, j0) = (self.sample_index(a - m), self.sample_index(a - mp));
        let v = &self.phi.values;
        richardson_trapezoid(n, self.phi.step(), |i| v[i0 + i] * v[j0 + i])
    }

    /// `int_0^inf phi_c(x - m) phi_c(x - m') dx`.
    pub fn half_line_gram(&self, m: i64, mp: i64) -> f64 {
        let p = self.p;
        if m <= -p || mp <= -p || (m - mp).abs() >= 2 * p - 1 {
            return 0.0;
        }
        if m.max(mp) >= p - 1 {
            // the common support starts inside the half-line: full-line orthonormality
            return if m == mp { 1.0 } else { 0.0 };
        }
        let lo = -p + 1;
        self.half_line[((m - lo) as usize, (mp - lo) as usize)]
    }

    /// Moments `int t^k phi_c(t) dt`, `k < p`, from the refinement equation.
    fn centred_moments(&self) -> Vec<f64> {
        let h = self.family.lowpass();
        let p = self.p as usize;
        let hm: Vec<f64> = (0..p)
            .map(|r| h.iter().enumerate().map(|(n, v)| v * (n as f64).powi(r as i32)).sum::<f64>() / std::f64::consts::SQRT_2)
            .collect();
        let mut m = vec![1.0; p];
        for k in 1..p {
            let s: f64 = (0..k).map(|i| binomial(k, i) * hm[k - i] * m[i]).sum();
            m[k] = s / ((1u64 << k) as f64 - 1.0);
        }
        // shift from [0, 2p-1] to [-p+1, p]
        let c = (self.p - 1) as f64;
        (0..p)
            .map(|k| (0..=k).map(|i| binomial(k, i) * m[i] * (-c).powi((k - i) as i32)).sum())
            .collect()
    }

    fn edge_coefficients(&self, moments: &[f64], first: i64, left: bool) -> Result<DMatrix<f64>> {
        let p = self.p as usize;
        let width = 2 * p - 1;
        let mut c = DMatrix::zeros(p, width);
        for k in 0..p {
            for col in 0..width {
                let m = (first + col as i64) as f64;
                c[(k, col)] = (0..=k).map(|i| binomial(k, i) * m.powi((k - i) as i32) * moments[i]).sum();
            }
        }
        let mut gram = DMatrix::zeros(width, width);
        for r in 0..width {
            for s in 0..width {
                let (m, mp) = (first + r as i64, first + s as i64);
                let hl = self.half_line_gram(m, mp);
                gram[(r, s)] = if left { hl } else { f64::from(u8::from(m == mp)) - hl };
            }
        }
        let edge = &c * &gram * c.transpose();
        let chol = nalgebra::Cholesky::new(edge.clone()).ok_or(Error::NotPositiveDefinite {
            what: "edge Gram matrix",
            pivot: edge.diagonal().min(),
        })?;
        let l = chol.l();
        let coeffs = l
            .solve_lower_triangular(&c)
            .ok_or(Error::NotPositiveDefinite {
                what: "edge Gram factor",
                pivot: l.diagonal().min(),
            })?;
        Ok(coeffs)
    }

    /// Transforms `int_i^{i+1} phi_c(t) exp(-2 pi i xi t) dt` of the unit pieces
    /// `i in [-p+1, p-1]`, by Richardson-extrapolated trapezoid sums.
    pub fn piece_transforms(&self, xi: f64) -> Vec<C64> {
        let unit = 1usize << self.phi.level;
        let h = self.phi.step();
        let v = &self.phi.values;
        (0..(2 * self.p - 1) as usize)
            .map(|piece| {
                let t0 = (piece as i64 - self.p + 1) as f64;
                let base = piece * unit;
                // exp(-2 pi i xi t) by recurrence, refreshed every 64 nodes
                let rot = C64::from_polar(1.0, -2.0 * PI * xi * h);
                let mut cache = Vec::with_capacity(unit + 1);
                let mut w = C64::new(1.0, 0.0);
                for i in 0..=unit {
                    if i % 64 == 0 {
                        w = C64::from_polar(1.0, -2.0 * PI * xi * (t0 + i as f64 * h));
                    }
                    cache.push(w * v[base + i]);
                    w *= rot;
                }
                richardson_trapezoid_c(unit, h, |i| cache[i])
            })
            .collect()
    }

    /// Fourier transform of `phi_c`.
    pub fn centred_hat(&self, xi: f64) -> C64 {
        C64::from_polar(1.0, 2.0 * PI * (self.p - 1) as f64 * xi) * self.evaluator.scaling_hat(xi)
    }

    /// Plain-text coefficient table: one line per edge function,
    /// `side k` followed by `translate coefficient` pairs with 17 significant digits.
    pub fn coefficient_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# boundary coefficients p={} J0={}", self.p, self.coarsest_scale());
        for (side, mat, first) in [("left", &self.left, -self.p + 1), ("right", &self.right, -self.p)] {
            for k in 0..mat.nrows() {
                let _ = write!(s, "{side} {k}");
                for c in 0..mat.ncols() {
                    let _ = write!(s, " {} {:.16e}", first + c as i64, mat[(k, c)]);
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Parses a table written by [`BoundaryFamily::coefficient_table`] into
/// `(side, k, [(translate, coefficient)])` records.
pub fn parse_coefficient_table(text: &str) -> Result<Vec<(String, usize, Vec<(i64, f64)>)>> {
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let mut it = line.split_whitespace();
        let side = it.next().ok_or_else(|| Error::Parse(line.into()))?.to_string();
        let k = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(line.into()))?;
        let rest: Vec<&str> = it.collect();
        if !rest.len().is_multiple_of(2) {
            return Err(Error::Parse(line.into()));
        }
        let pairs = rest
            .chunks(2)
            .map(|c| Ok((c[0].parse().map_err(|_| Error::Parse(line.into()))?, c[1].parse().map_err(|_| Error::Parse(line.into()))?)))
            .collect::<Result<Vec<_>>>()?;
        out.push((side, k, pairs));
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `min { j : 2^j >= 2p }`.
pub fn coarsest_scale(p: usize) -> u32 {
    let mut j = 0;
    while (1usize << j) < 2 * p {
        j += 1;
    }
    j
}

/// Kind of a one-dimensional interval function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntervalKind {
    Scaling,
    Wavelet,
}

/// Multiscale orthonormal basis of `V_J` on `[0, 1]`, with the scaling spaces
/// `V_j` for every `J0 <= j <= J`.
#[derive(Debug, Clone)]
pub struct IntervalBasis {
    fam: Arc<BoundaryFamily>,
    top: u32,
    /// `R_j`, `2^j x T_j`, for `j = J0..=top`.
    scaling: Vec<DMatrix<f64>>,
    /// Wavelet rows over `tau_{j+1}`, `2^j x T_{j+1}`, for `j = J0..top`.
    wavelets: Vec<DMatrix<f64>>,
}

impl IntervalBasis {
    pub fn new(fam: Arc<BoundaryFamily>, top: u32) -> Result<Self> {
        let j0 = fam.coarsest_scale();
        if top < j0 {
            return Err(Error::InvalidArgument(format!(
                "scale {top} below the coarsest admissible scale {j0}"
            )));
        }
        if top > 20 {
            return Err(Error::InvalidArgument(format!("scale {top} too large")));
        }
        let mut basis = IntervalBasis {
            fam,
            top,
            scaling: Vec::new(),
            wavelets: Vec::new(),
        };
        for j in j0..=top {
            let r = basis.scaling_rows(j);
            basis.scaling.push(r);
        }
        for j in j0..top {
            let w = basis.wavelet_rows(j)?;
            basis.wavelets.push(w);
        }
        Ok(basis)
    }

    pub fn family(&self) -> &Arc<BoundaryFamily> {
        &self.fam
    }

    pub fn top(&self) -> u32 {
        self.top
    }

    pub fn coarsest(&self) -> u32 {
        self.fam.coarsest_scale()
    }

    fn p(&self) -> i64 {
        self.fam.p
    }

    /// Number of restricted translates at scale `s`.
    pub fn translate_count(&self, s: u32) -> usize {
        (1usize << s) + 2 * self.p() as usize - 2
    }

    /// First translate index at any scale, `-p + 1`.
    pub fn first_translate(&self) -> i64 {
        -self.p() + 1
    }

    fn scaling_rows(&self, j: u32) -> DMatrix<f64> {
        let p = self.p();
        let size = 1i64 << j;
        let t = self.translate_count(j);
        let off = p - 1;
        let mut r = DMatrix::zeros(size as usize, t);
        for k in 0..p as usize {
            for c in 0..(2 * p - 1) as usize {
                // left translate m = c - p + 1 sits in column m + off
                r[(k, c)] = self.fam.left[(k, c)];
            }
        }
        for n in p..size - p {
            r[(n as usize, (n + off) as usize)] = 1.0;
        }
        for k in 0..p as usize {
            // row 2^j - 1 - k holds the right function of degree k
            let row = (size - 1) as usize - k;
            for c in 0..(2 * p - 1) as usize {
                let m = c as i64 - p;
                r[(row, (size + m + off) as usize)] = self.fam.right[(k, c)];
            }
        }
        r
    }

    /// Gram matrix of the restricted translates at scale `s` on `[0, 1]`.
    pub fn translate_gram(&self, s: u32) -> DMatrix<f64> {
        let t = self.translate_count(s);
        let first = self.first_translate();
        let size = 1i64 << s;
        DMatrix::from_fn(t, t, |r, c| {
            let (n, np) = (first + r as i64, first + c as i64);
            self.fam.half_line_gram(n, np) - self.fam.half_line_gram(n - size, np - size)
        })
    }

    /// Two-scale map: `tau_{s,n} = sum_k h_k tau_{s+1, 2n+k-p+1}`.
    pub fn refinement(&self, s: u32) -> DMatrix<f64> {
        let p = self.p();
        let first = self.first_translate();
        let (t0, t1) = (self.translate_count(s), self.translate_count(s + 1));
        let mut m = DMatrix::zeros(t0, t1);
        for r in 0..t0 {
            let n = first + r as i64;
            for (k, hk) in self.fam.family.lowpass().iter().enumerate() {
                let np = 2 * n + k as i64 - p + 1;
                let c = np - first;
                if c >= 0 && (c as usize) < t1 {
                    m[(r, c as usize)] = *hk;
                }
            }
        }
        m
    }

    fn wavelet_rows(&self, j: u32) -> Result<DMatrix<f64>> {
        let p = self.p();
        let size = 1i64 << j;
        let fine = 2 * size as usize;
        let first = self.first_translate();
        let t1 = self.translate_count(j + 1);
        let rj = self.scaling_matrix(j);
        let rj1 = self.scaling_matrix(j + 1);
        let g1 = self.translate_gram(j + 1);
        let to_coords = &g1 * rj1.transpose();
        let pmat = rj * self.refinement(j) * &to_coords;
        let mut interior = DMatrix::zeros((size - 2 * p).max(0) as usize, t1);
        for (row, n) in (p..size - p).enumerate() {
            for (k, gk) in self.fam.family.highpass().iter().enumerate() {
                let np = 2 * n + k as i64 - p + 1;
                interior[(row, (np - first) as usize)] = *gk;
            }
        }
        let icoords = &interior * &to_coords;
        let q = DMatrix::identity(fine, fine) - pmat.transpose() * &pmat - icoords.transpose() * &icoords;
        let eig = SymmetricEigen::new(q);
        let keep: Vec<usize> = (0..fine).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        if keep.len() != 2 * p as usize {
            return Err(Error::NonConvergence {
                what: "boundary wavelet complement",
                iterations: keep.len(),
                residual: eig.eigenvalues.iter().map(|v| v.min(1.0 - v).abs()).fold(0.0, f64::max),
            });
        }
        let v = DMatrix::from_fn(fine, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
        let pos = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(fine, |i, _| i as f64));
        let local = SymmetricEigen::new(v.transpose() * pos * &v);
        let mut order: Vec<usize> = (0..keep.len()).collect();
        order.sort_by(|&a, &b| local.eigenvalues[a].total_cmp(&local.eigenvalues[b]));
        let mut coords = DMatrix::zeros(keep.len(), fine);
        for (row, &o) in order.iter().enumerate() {
            let mut vec = &v * local.eigenvectors.column(o);
            let lead = vec.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                vec.neg_mut();
            }
            coords.row_mut(row).copy_from(&vec.transpose());
        }
        let boundary_rows = coords * &rj1;
        let mut w = DMatrix::zeros(size as usize, t1);
        for k in 0..p as usize {
            w.row_mut(k).copy_from(&boundary_rows.row(k));
            w.row_mut(size as usize - p as usize + k)
                .copy_from(&boundary_rows.row(p as usize + k));
        }
        for (row, n) in (p..size - p).enumerate() {
            w.row_mut(n as usize).copy_from(&interior.row(row));
        }
        Ok(w)
    }

    fn scaling_matrix(&self, j: u32) -> DMatrix<f64> {
        let j0 = self.coarsest();
        match self.scaling.get((j - j0) as usize) {
            Some(m) => m.clone(),
            None => self.scaling_rows(j),
        }
    }

    /// Coefficient row of a function and the scale of its translates.
    pub fn function(&self, kind: IntervalKind, j: u32, n: usize) -> Result<(u32, Vec<f64>)> {
        let j0 = self.coarsest();
        if j < j0 || n >= (1usize << j) {
            return Err(Error::InvalidArgument(format!("no interval function ({kind:?}, {j}, {n})")));
        }
        match kind {
            IntervalKind::Scaling if j <= self.top => {
                Ok((j, self.scaling[(j - j0) as usize].row(n).iter().copied().collect()))
            }
            IntervalKind::Wavelet if j < self.top => {
                Ok((j + 1, self.wavelets[(j - j0) as usize].row(n).iter().copied().collect()))
            }
            _ => Err(Error::InvalidArgument(format!(
                "function ({kind:?}, {j}, {n}) is above the top scale {}",
                self.top
            ))),
        }
    }

    /// All `2^J` functions of the multiscale basis: `V_J0` then `W_j`, `J0 <= j < J`.
    pub fn multiscale_functions(&self) -> Vec<(IntervalKind, u32, usize)> {
        let j0 = self.coarsest();
        let mut out: Vec<_> = (0..1usize << j0).map(|n| (IntervalKind::Scaling, j0, n)).collect();
        for j in j0..self.top {
            out.extend((0..1usize << j).map(|n| (IntervalKind::Wavelet, j, n)));
        }
        out
    }

    /// `max |<e_i, e_k> - delta_ik|` over the scaling functions of `V_j`.
    pub fn orthonormality_defect(&self, j: u32) -> f64 {
        let r = self.scaling_matrix(j);
        let g = r.clone() * self.translate_gram(j) * r.transpose();
        (g - DMatrix::identity(1 << j, 1 << j)).abs().max()
    }

    /// Largest squared norm of a `V_j` function left after projection onto `V_{j+1}`.
    pub fn nesting_defect(&self, j: u32) -> f64 {
        let rj = self.scaling_matrix(j);
        let rj1 = self.scaling_matrix(j + 1);
        let p = rj * self.refinement(j) * self.translate_gram(j + 1) * rj1.transpose();
        let pp = &p * p.transpose();
        (0..pp.nrows()).map(|i| (1.0 - pp[(i, i)]).abs()).fold(0.0, f64::max)
    }

    /// Gram matrix of the whole multiscale basis, expressed at the top scale.
    pub fn multiscale_gram(&self) -> DMatrix<f64> {
        let rows = self.top_rows();
        &rows * self.translate_gram(self.top) * rows.transpose()
    }

    /// Rows of the multiscale basis over `tau_{J}`.
    pub fn top_rows(&self) -> DMatrix<f64> {
        let funcs = self.multiscale_functions();
        let t = self.translate_count(self.top);
        let mut out = DMatrix::zeros(funcs.len(), t);
        for (i, &(kind, j, n)) in funcs.iter().enumerate() {
            let (mut s, row) = self.function(kind, j, n).expect("listed function");
            let mut v = DMatrix::from_row_slice(1, row.len(), &row);
            while s < self.top {
                v *= self.refinement(s);
                s += 1;
            }
            out.row_mut(i).copy_from(&v.row(0));
        }
        out
    }

    /// Point values on `[0, 1]` at the cascade spacing of a function given by a
    /// coefficient row over `tau_s`.
    pub fn sample_function(&self, s: u32, row: &[f64]) -> Result<Vec<f64>> {
        let level = self.fam.phi.level;
        if s > level {
            return Err(Error::InvalidArgument("scale finer than the sample grid".into()));
        }
        let mut out = vec![0.0; (1usize << level) + 1];
        let first = self.first_translate();
        let amp = 2f64.powf(s as f64 / 2.0);
        let v = &self.fam.phi.values;
        for (c, &coef) in row.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            let n = first + c as i64;
            for (i, o) in out.iter_mut().enumerate() {
                // phi_c(2^s x_i - n) sits at index 2^s i - (n - p + 1) 2^level
                let idx = ((i as i64) << s) - ((n - self.p() + 1) << level);
                if idx >= 0 && (idx as usize) < v.len() {
                    *o += coef * amp * v[idx as usize];
                }
            }
        }
        Ok(out)
    }

    /// Grid step of [`IntervalBasis::sample_function`] output.
    pub fn sample_step(&self) -> f64 {
        self.fam.phi.step()
    }

    /// `<g, tau_{s,n}>` for every translate at scale `s`, by quadrature on the
    /// cascade grid.
    pub fn translate_inner_products(&self, s: u32, g: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let p = self.p();
        let level = self.fam.phi.level;
        let v = &self.fam.phi.values;
        let scale = (1i64 << s) as f64;
        let first = self.first_translate();
        (0..self.translate_count(s))
            .map(|c| {
                let n = first + c as i64;
                // substitute t = 2^s x - n: 2^{-s/2} int phi_c(t) g((t + n) / 2^s) dt
                let a = (-n).max(-p + 1);
                let b = ((1i64 << s) - n).min(p);
                if b <= a {
                    return 0.0;
                }
                let i0 = ((a + p - 1) as usize) << level;
                let cnt = ((b - a) as usize) << level;
                let h = self.fam.phi.step();
                richardson_trapezoid(cnt, h, |i| {
                    let t = a as f64 + i as f64 * h;
                    v[i0 + i] * g((t + n as f64) / scale)
                }) / scale.sqrt()
            })
            .collect()
    }

    /// Fourier transform of the restricted translate `tau_{s,n}` at `omega`, given
    /// the piece transforms and `phi_c^` at `omega / 2^s`.
    fn translate_hat(&self, s: u32, n: i64, omega: f64, pieces: &[C64], full: C64) -> C64 {
        let p = self.p();
        let size = 1i64 << s;
        let lo = (-n).max(-p + 1);
        let hi = (size - n).min(p);
        if hi <= lo {
            return C64::new(0.0, 0.0);
        }
        let partial = if lo == -p + 1 && hi == p {
            full
        } else {
            (lo..hi).map(|i| pieces[(i + p - 1) as usize]).sum()
        };
        let scale = size as f64;
        C64::from_polar(scale.powf(-0.5), -2.0 * PI * omega * n as f64 / scale) * partial
    }

    /// Fourier transforms of every translate at scale `s` for the frequencies `omegas`:
    /// result `[k][c]` for frequency `k` and translate column `c`.
    pub fn translate_hats(&self, s: u32, omegas: &[f64]) -> Vec<Vec<C64>> {
        let first = self.first_translate();
        let t = self.translate_count(s);
        let scale = (1i64 << s) as f64;
        omegas
            .iter()
            .map(|&w| {
                let xi = w / scale;
                let pieces = if self.p() > 1 { self.fam.piece_transforms(xi) } else { Vec::new() };
                let full = self.fam.centred_hat(xi);
                (0..t)
                    .map(|c| self.translate_hat(s, first + c as i64, w, &pieces, full))
                    .collect()
            })
            .collect()
    }

    /// Fourier transform over `[0, 1]` of a function row at scale `s`.
    pub fn function_hats(&self, s: u32, row: &[f64], omegas: &[f64]) -> Vec<C64> {
        self.translate_hats(s, omegas)
            .iter()
            .map(|hats| hats.iter().zip(row).map(|(h, c)| h * c).sum())
            .collect()
    }
}

/// One element of the two-dimensional boundary basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryElement {
    /// 0 for `phi (x) phi`, 1 for `phi (x) psi`, 2 for `psi (x) phi`, 3 for `psi (x) psi`.
    pub generator: u32,
    pub scale: u32,
    pub index: (usize, usize),
}

impl BoundaryElement {
    /// One-dimensional factors along each axis.
    pub fn factors(&self) -> [(IntervalKind, u32, usize); 2] {
        use IntervalKind::*;
        let (k1, k2) = match self.generator {
            0 => (Scaling, Scaling),
            1 => (Scaling, Wavelet),
            2 => (Wavelet, Scaling),
            _ => (Wavelet, Wavelet),
        };
        [(k1, self.scale, self.index.0), (k2, self.scale, self.index.1)]
    }
}

/// Ordered elements of `V_J (x) V_J` on the unit square: the `4^J0` scaling
/// products first, then for each scale `J0 <= j < J` and generator `k = 1, 2, 3`
/// the `4^j` wavelets, translation indices lexicographic.
pub fn enumerate_boundary_basis(p: usize, scale: u32) -> Result<Vec<BoundaryElement>> {
    let j0 = coarsest_scale(p);
    if scale < j0 {
        return Err(Error::InvalidArgument(format!(
            "scale {scale} below the coarsest admissible scale {j0}"
        )));
    }
    let mut out = Vec::with_capacity(1 << (2 * scale));
    let n0 = 1usize << j0;
    for a in 0..n0 {
        for b in 0..n0 {
            out.push(BoundaryElement {
                generator: 0,
                scale: j0,
                index: (a, b),
            });
        }
    }
    for j in j0..scale {
        let n = 1usize << j;
        for generator in 1..=3 {
            for a in 0..n {
                for b in 0..n {
                    out.push(BoundaryElement {
                        generator,
                        scale: j,
                        index: (a, b),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// The two-dimensional boundary basis up to scale `J`.
#[derive(Debug, Clone)]
pub struct BoundaryBasis2D {
    interval: Arc<IntervalBasis>,
    elements: Vec<BoundaryElement>,
}

impl BoundaryBasis2D {
    pub fn new(fam: Arc<BoundaryFamily>, scale: u32) -> Result<Self> {
        let elements = enumerate_boundary_basis(fam.vanishing_moments(), scale)?;
        let interval = Arc::new(IntervalBasis::new(fam, scale)?);
        Ok(BoundaryBasis2D { interval, elements })
    }

    pub fn interval(&self) -> &Arc<IntervalBasis> {
        &self.interval
    }

    pub fn elements(&self) -> &[BoundaryElement] {
        &self.elements
    }

    /// Distinct one-dimensional factors in first-use order and, per element,
    /// the indices of its two factors.
    pub fn factor_table(&self) -> (Vec<(IntervalKind, u32, usize)>, Vec<(usize, usize)>) {
        let mut factors = Vec::new();
        let mut lookup = std::collections::HashMap::new();
        let mut pairs = Vec::with_capacity(self.elements.len());
        for e in &self.elements {
            let [f1, f2] = e.factors();
            let mut id = |f| {
                *lookup.entry(f).or_insert_with(|| {
                    factors.push(f);
                    factors.len() - 1
                })
            };
            let a = id(f1);
            let b = id(f2);
            pairs.push((a, b));
        }
        (factors, pairs)
    }

    /// Single entry `eps F1(eps l1) F2(eps l2)` of the cross-Gramian.
    pub fn gramian_entry(&self, element: &BoundaryElement, l: (i64, i64), eps: f64) -> Result<C64> {
        let [f1, f2] = element.factors();
        let (s1, r1) = self.interval.function(f1.0, f1.1, f1.2)?;
        let (s2, r2) = self.interval.function(f2.0, f2.1, f2.2)?;
        let a = self.interval.function_hats(s1, &r1, &[eps * l.0 as f64])[0];
        let b = self.interval.function_hats(s2, &r2, &[eps * l.1 as f64])[0];
        Ok(a * b * eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::richardson_trapezoid;

    fn family(p: usize) -> Arc<BoundaryFamily> {
        Arc::new(BoundaryFamily::new(p, 11).unwrap())
    }

    #[test]
    fn coarsest_scales() {
        assert_eq!(coarsest_scale(1), 1);
        assert_eq!(coarsest_scale(2), 2);
        assert_eq!(coarsest_scale(3), 3);
        assert_eq!(coarsest_scale(4), 3);
    }

    #[test]
    fn half_line_gram_matches_quadrature() {
        for p in 2..=4 {
            let f = BoundaryFamily::new(p, 13).unwrap();
            let pi = p as i64;
            for m in (-pi + 1)..(pi - 1) {
                for mp in (-pi + 1)..(pi - 1) {
                    let q = f.half_line_quadrature(m, mp);
                    let e = f.half_line_gram(m, mp);
                    assert!((q - e).abs() < 1e-7, "p={p} ({m},{mp}): {q} vs {e}");
                }
            }
        }
    }

    #[test]
    fn half_line_gram_is_consistent() {
        for p in 2..=3 {
            let f = family(p);
            let pi = p as i64;
            let pieces = f.piece_transforms(0.0);
            // partition of unity: sum_m' G(m, m') = int_0^inf phi_c(x - m) dx
            for m in (-pi + 1)..(pi - 1) {
                let row: f64 = (-3 * pi..4 * pi).map(|mp| f.half_line_gram(m, mp)).sum();
                let mass: f64 = ((-m).max(-pi + 1)..pi).map(|i| pieces[(i + pi - 1) as usize].re).sum();
                assert!((row - mass).abs() < 1e-8, "p={p} m={m}: {row} vs {mass}");
            }
            let g = f.half_line_gram(0, 0);
            assert!(g > 0.0 && g < 1.0);
        }
    }

    #[test]
    fn edge_functions_are_orthonormal_by_independent_quadrature() {
        for p in 2..=3 {
            let f = family(p);
            let s = f.samples();
            let unit = 1usize << s.level;
            let pi = p as i64;
            // sample the left edge functions on [0, 3p]
            let len = 3 * p * unit + 1;
            let eval = |row: usize, coefs: &DMatrix<f64>, first: i64, sign: f64| -> Vec<f64> {
                (0..len)
                    .map(|i| {
                        let x = sign * i as f64 * s.step();
                        (0..coefs.ncols())
                            .map(|c| coefs[(row, c)] * s.value_at(x - (first + c as i64) as f64).unwrap())
                            .sum()
                    })
                    .collect()
            };
            for (coefs, first, sign) in [(f.left_coefficients(), -pi + 1, 1.0), (f.right_coefficients(), -pi, -1.0)] {
                let rows: Vec<Vec<f64>> = (0..p).map(|k| eval(k, coefs, first, sign)).collect();
                for a in 0..p {
                    for b in 0..p {
                        let v = richardson_trapezoid(len - 1, s.step(), |i| rows[a][i] * rows[b][i]);
                        let want = if a == b { 1.0 } else { 0.0 };
                        assert!((v - want).abs() < 1e-6, "p={p} sign={sign} ({a},{b}): {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn interval_basis_is_orthonormal_and_nested() {
        for p in 1..=3 {
            let f = family(p);
            let j0 = f.coarsest_scale();
            let b = IntervalBasis::new(f, j0 + 2).unwrap();
            let tol = 1e-12;
            for j in j0..=j0 + 2 {
                assert!(b.orthonormality_defect(j) < tol, "p={p} j={j}: {}", b.orthonormality_defect(j));
            }
            for j in j0..j0 + 2 {
                assert!(b.nesting_defect(j) < tol, "p={p} j={j}: {}", b.nesting_defect(j));
            }
            let g = b.multiscale_gram();
            let n = g.nrows();
            assert_eq!(n, 1 << (j0 + 2));
            assert!((g - DMatrix::identity(n, n)).abs().max() < tol, "p={p}");
        }
    }

    #[test]
    fn refinement_preserves_gram() {
        let f = family(3);
        let b = IntervalBasis::new(f, 4).unwrap();
        let r = b.refinement(3);
        let lhs = r.clone() * b.translate_gram(4) * r.transpose();
        assert!((lhs - b.translate_gram(3)).abs().max() < 1e-9);
    }

    #[test]
    fn polynomials_lie_in_the_space() {
        // x^2 on [0,1] is reproduced exactly for p = 3
        let f = family(3);
        let b = IntervalBasis::new(f, 3).unwrap();
        let rows = b.top_rows();
        let ip = b.translate_inner_products(3, &|x| x * x);
        let coeffs = &rows * nalgebra::DVector::from_vec(ip);
        let energy: f64 = coeffs.iter().map(|c| c * c).sum();
        assert!((energy - 0.2).abs() < 1e-9, "{energy}");
    }

    #[test]
    fn fourier_of_translates_matches_quadrature() {
        let f = family(2);
        let b = IntervalBasis::new(f.clone(), 2).unwrap();
        let omegas = [0.0, 0.7, -2.3, 5.5];
        let hats = b.translate_hats(2, &omegas);
        let s = f.samples();
        for (k, w) in omegas.iter().enumerate() {
            for c in 0..b.translate_count(2) {
                let n = b.first_translate() + c as i64;
                // direct: int_0^1 2 phi_c(4x - n) exp(-2 pi i w x) dx on a fine x grid
                let steps = 1usize << 13;
                let h = 1.0 / steps as f64;
                let re = richardson_trapezoid(steps, h, |i| {
                    let x = i as f64 * h;
                    let y = 4.0 * x - n as f64;
                    2.0 * s.value_at(y).unwrap_or(0.0) * (2.0 * PI * w * x).cos()
                });
                let im = richardson_trapezoid(steps, h, |i| {
                    let x = i as f64 * h;
                    let y = 4.0 * x - n as f64;
                    -2.0 * s.value_at(y).unwrap_or(0.0) * (2.0 * PI * w * x).sin()
                });
                assert!((hats[k][c] - C64::new(re, im)).norm() < 1e-5, "w={w} n={n}");
            }
        }
    }

    #[test]
    fn pieces_sum_to_full_transform() {
        let f = family(3);
        for xi in [0.0, 0.4, -1.3, 3.0] {
            let s: C64 = f.piece_transforms(xi).iter().sum();
            assert!((s - f.centred_hat(xi)).norm() < 1e-9, "xi={xi}");
        }
    }

    #[test]
    fn enumeration_counts() {
        let e = enumerate_boundary_basis(3, 5).unwrap();
        assert_eq!(e.len(), 1024);
        assert_eq!(e[0].generator, 0);
        assert_eq!(e[64].generator, 1);
        assert!(enumerate_boundary_basis(3, 2).is_err());
    }

    #[test]
    fn coefficient_table_round_trip() {
        let f = family(2);
        let parsed = parse_coefficient_table(&f.coefficient_table()).unwrap();
        assert_eq!(parsed.len(), 4);
        for (side, k, pairs) in parsed {
            let m = if side == "left" { f.left_coefficients() } else { f.right_coefficients() };
            for (c, (_, v)) in pairs.iter().enumerate() {
                assert_eq!(*v, m[(k, c)]);
            }
        }
    }

    #[test]
    fn entry_rejects_scale_above_top() {
        let b = BoundaryBasis2D::new(family(2), 2).unwrap();
        let bad = BoundaryElement {
            generator: 1,
            scale: 2,
            index: (0, 0),
        };
        assert!(b.gramian_entry(&bad, (0, 0), 0.5).is_err());
    }
}
