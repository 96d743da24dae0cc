//! Reconstruction of separable functions from Fourier samples: projection
//! errors, the generalized-sampling error, truncated Fourier series, and image
//! output.
//!
//! Errors are computed in closed form from one-dimensional projections. For
//! `f = g (x) h` and an orthonormal basis of `V (x) V`,
//! `||f - Pf||^2 = ||g - Pg||^2 ||h||^2 + ||Pg||^2 ||h - Ph||^2`, and the
//! generalized-sampling error adds `||c - alpha||^2` for the exact coefficients
//! `c` and the computed ones `alpha`.

use crate::boundary::{BoundaryBasis2D, IntervalKind};
use crate::error::{Error, Result};
use crate::gramian::{assemble, measure, AssemblyOptions, FourierBasis, InteriorBasis, SamplingScheme};
use crate::quadrature::{gauss_panels, richardson_trapezoid};
use crate::solver::{gs_solve, GsOptions, GsResult};
use crate::testfns::{ExpPoly, SeparableFunction};
use crate::C64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Orthogonal projection of a one-dimensional function onto the axis space.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisProjection {
    /// `<g, F_a>` for every axis factor.
    pub coefficients: Vec<f64>,
    /// `||Pg||^2`.
    pub projected_norm_sq: f64,
    /// `||g - Pg||^2`.
    pub residual_sq: f64,
}

/// A basis of tensor products `F_a(x) F_b(y)` of one-dimensional factors on `[0, 1]`
/// spanning `V (x) V` for a one-dimensional space `V`.
pub trait TensorBasis: FourierBasis {
    fn factor_count(&self) -> usize;
    /// Factor indices `(a, b)` per element.
    fn factor_pairs(&self) -> Vec<(usize, usize)>;
    fn axis_projection(&self, g: &ExpPoly) -> Result<AxisProjection>;
    /// `[factor][i]` values at `x_i = i / r`, `0 <= i < r`.
    fn axis_samples(&self, r: usize) -> Result<Vec<Vec<f64>>>;
}

/// Haar factor `(is_wavelet, j, m)` at `x`.
fn haar_factor(f: (bool, u32, i64), x: f64) -> f64 {
    let (wav, j, m) = f;
    let scale = (1u64 << j) as f64;
    let t = scale * x - m as f64;
    if !(0.0..1.0).contains(&t) {
        return 0.0;
    }
    let amp = scale.sqrt();
    if wav && t >= 0.5 {
        -amp
    } else {
        amp
    }
}

fn check_haar(basis: &InteriorBasis) -> Result<()> {
    if basis.scaling_matrix().is_dyadic() && basis.generator().tensor_factors().is_some() && basis.generator().support_width() == 1 {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "projection errors need the boundary basis or the dyadic Haar basis".into(),
        ))
    }
}

const GAUSS_ORDER: usize = 20;

fn integrate(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    gauss_panels(lo, hi, 1, GAUSS_ORDER, |x| C64::new(f(x), 0.0)).re
}

impl TensorBasis for InteriorBasis {
    fn factor_count(&self) -> usize {
        self.tensor_factors().0.len()
    }

    fn factor_pairs(&self) -> Vec<(usize, usize)> {
        self.tensor_factors().1
    }

    fn axis_projection(&self, g: &ExpPoly) -> Result<AxisProjection> {
        check_haar(self)?;
        let (factors, _) = self.tensor_factors();
        let coefficients = factors
            .iter()
            .map(|&(wav, j, m)| {
                let scale = (1u64 << j) as f64;
                let lo = m as f64 / scale;
                let mid = (m as f64 + 0.5) / scale;
                let hi = (m as f64 + 1.0) / scale;
                let left = integrate(lo, mid, |x| g.eval(x));
                let right = integrate(mid, hi, |x| g.eval(x));
                scale.sqrt() * if wav { left - right } else { left + right }
            })
            .collect();
        let n = 1usize << self.scale();
        let h = 1.0 / n as f64;
        let mut projected = 0.0;
        let mut residual = 0.0;
        for k in 0..n {
            let (lo, hi) = (k as f64 * h, (k + 1) as f64 * h);
            let avg = integrate(lo, hi, |x| g.eval(x)) / h;
            projected += h * avg * avg;
            residual += integrate(lo, hi, |x| (g.eval(x) - avg).powi(2));
        }
        Ok(AxisProjection {
            coefficients,
            projected_norm_sq: projected,
            residual_sq: residual,
        })
    }

    fn axis_samples(&self, r: usize) -> Result<Vec<Vec<f64>>> {
        check_haar(self)?;
        let (factors, _) = self.tensor_factors();
        Ok(factors
            .iter()
            .map(|&f| (0..r).map(|i| haar_factor(f, i as f64 / r as f64)).collect())
            .collect())
    }
}

impl BoundaryBasis2D {
    fn factor_rows(&self) -> Result<Vec<(u32, Vec<f64>)>> {
        let (factors, _) = self.factor_table();
        factors.iter().map(|&(k, j, n)| self.interval().function(k, j, n)).collect()
    }

    fn grid_size(&self) -> usize {
        (1.0 / self.interval().sample_step()).round() as usize
    }
}

impl TensorBasis for BoundaryBasis2D {
    fn factor_count(&self) -> usize {
        self.factor_table().0.len()
    }

    fn factor_pairs(&self) -> Vec<(usize, usize)> {
        self.factor_table().1
    }

    fn axis_projection(&self, g: &ExpPoly) -> Result<AxisProjection> {
        let interval = self.interval();
        let rows = self.factor_rows()?;
        let mut products: HashMap<u32, Vec<f64>> = HashMap::new();
        let mut products_at = |s: u32| -> Vec<f64> {
            products
                .entry(s)
                .or_insert_with(|| interval.translate_inner_products(s, &|x| g.eval(x)))
                .clone()
        };
        let coefficients = rows
            .iter()
            .map(|(s, row)| products_at(*s).iter().zip(row).map(|(a, b)| a * b).sum())
            .collect();
        // projection onto V_J through its scaling functions
        let top = interval.top();
        let t = products_at(top);
        let mut combined = vec![0.0; interval.translate_count(top)];
        let mut projected = 0.0;
        for n in 0..1usize << top {
            let (_, row) = interval.function(IntervalKind::Scaling, top, n)?;
            let d: f64 = row.iter().zip(&t).map(|(a, b)| a * b).sum();
            projected += d * d;
            for (c, r) in combined.iter_mut().zip(&row) {
                *c += d * r;
            }
        }
        let pg = interval.sample_function(top, &combined)?;
        let h = interval.sample_step();
        let residual = richardson_trapezoid(pg.len() - 1, h, |i| (g.eval(i as f64 * h) - pg[i]).powi(2));
        Ok(AxisProjection {
            coefficients,
            projected_norm_sq: projected,
            residual_sq: residual,
        })
    }

    fn axis_samples(&self, r: usize) -> Result<Vec<Vec<f64>>> {
        let n = self.grid_size();
        if r == 0 || !n.is_multiple_of(r) {
            return Err(Error::InvalidArgument(format!(
                "image resolution {r} must divide the sample grid size {n}"
            )));
        }
        let stride = n / r;
        self.factor_rows()?
            .par_iter()
            .map(|(s, row)| {
                let v = self.interval().sample_function(*s, row)?;
                Ok((0..r).map(|i| v[i * stride]).collect())
            })
            .collect()
    }
}

/// Exact coefficients `<f, F_a (x) F_b>` of a separable function.
pub fn separable_coefficients(pairs: &[(usize, usize)], x: &AxisProjection, y: &AxisProjection) -> Vec<f64> {
    pairs.iter().map(|&(a, b)| x.coefficients[a] * y.coefficients[b]).collect()
}

/// `||f - Pf||` for a separable `f`.
pub fn best_approximation_error(f: &SeparableFunction, x: &AxisProjection, y: &AxisProjection) -> f64 {
    (x.residual_sq * f.y.norm_sq() + x.projected_norm_sq * y.residual_sq).max(0.0).sqrt()
}

/// `sum_{|l| <= m} eps |g^(eps l)|^2`, the squared norm of the one-dimensional
/// truncated Fourier series of `g`.
fn fourier_partial_norm_sq(g: &ExpPoly, eps: f64, m: i64) -> f64 {
    (-m..=m).map(|l| eps * g.fourier(eps * l as f64).norm_sqr()).sum()
}

/// `L^2` error over the sampling box of the truncated Fourier series
/// `sum_l <f, s_l> s_l` built from the same samples.
pub fn fourier_error(f: &SeparableFunction, scheme: &SamplingScheme) -> f64 {
    let (m1, m2) = scheme.half_widths;
    let (gx, gy) = (f.x.norm_sq(), f.y.norm_sq());
    let px = fourier_partial_norm_sq(&f.x, scheme.epsilon, m1);
    let py = fourier_partial_norm_sq(&f.y, scheme.epsilon, m2);
    ((gx - px) * gy + px * (gy - py)).max(0.0).sqrt()
}

/// Outcome of [`quasi_optimality_check`].
#[derive(Debug, Clone)]
pub struct QuasiOptimality {
    /// `||f - Pf||`.
    pub best: f64,
    /// `||f - G(f)||`.
    pub gs: f64,
    /// `||f - Pf|| / sigma_min`.
    pub bound: f64,
    pub sigma_min: f64,
    /// Truncated Fourier error from the same samples.
    pub fourier: f64,
    /// Slack in both inequalities, relative to the larger side plus `||f||`.
    pub tolerance: f64,
    pub holds: bool,
    pub solve: GsResult,
}

/// Reconstructs `f` from its samples and checks
/// `||f - Pf|| <= ||f - G(f)|| <= ||f - Pf|| / sigma_min` up to a slack of
/// `tolerance (rhs + ||f||)`.
pub fn quasi_optimality_check(
    basis: &dyn TensorBasis,
    f: &SeparableFunction,
    scheme: &SamplingScheme,
    opts: &GsOptions,
    tolerance: f64,
) -> Result<QuasiOptimality> {
    let u = assemble(basis, scheme, &AssemblyOptions::default())?;
    let m = measure(&|w| f.fourier(w), scheme);
    let solve = gs_solve(&u.matrix, &m, opts)?;
    let px = basis.axis_projection(&f.x)?;
    let py = basis.axis_projection(&f.y)?;
    let c = separable_coefficients(&basis.factor_pairs(), &px, &py);
    let diff: f64 = c.iter().zip(&solve.coefficients).map(|(a, b)| (b - a).norm_sqr()).sum();
    let best = best_approximation_error(f, &px, &py);
    let gs = (best * best + diff).sqrt();
    let bound = best / solve.sigma_min;
    // scaled by ||f|| so that functions inside the span compare at round-off level
    let slack = |side: f64| tolerance * (side + f.norm_sq().sqrt());
    let holds = best <= gs + slack(gs) && gs <= bound + slack(bound);
    Ok(QuasiOptimality {
        best,
        gs,
        bound,
        sigma_min: solve.sigma_min,
        fourier: fourier_error(f, scheme),
        tolerance,
        holds,
        solve,
    })
}

/// Real image on an `r x r` grid, row `i` at `x = i / r`, column `k` at `y = k / r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub size: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn range(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Real part of `sum_j alpha_j F_a(x) F_b(y)` on the image grid.
pub fn synthesize_image(basis: &dyn TensorBasis, alpha: &[C64], r: usize) -> Result<Image> {
    let pairs = basis.factor_pairs();
    if alpha.len() != pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} basis elements",
            alpha.len(),
            pairs.len()
        )));
    }
    let samples = basis.axis_samples(r)?;
    // inner[a][k] = sum over elements with first factor a of alpha F_b(y_k)
    let mut inner: HashMap<usize, Vec<C64>> = HashMap::new();
    for (&(a, b), &c) in pairs.iter().zip(alpha) {
        let row = inner.entry(a).or_insert_with(|| vec![C64::new(0.0, 0.0); r]);
        for (o, v) in row.iter_mut().zip(&samples[b]) {
            *o += c * v;
        }
    }
    let mut keys: Vec<usize> = inner.keys().copied().collect();
    keys.sort_unstable();
    let mut pixels = vec![0.0; r * r];
    pixels.par_chunks_mut(r).enumerate().for_each(|(i, row)| {
        for &a in &keys {
            let u = samples[a][i];
            if u != 0.0 {
                for (p, v) in row.iter_mut().zip(&inner[&a]) {
                    *p += u * v.re;
                }
            }
        }
    });
    Ok(Image { size: r, pixels })
}

/// Real part of the truncated Fourier series `sum_l m_l s_l` on the image grid.
pub fn fourier_image(scheme: &SamplingScheme, samples: &[C64], r: usize) -> Result<Image> {
    if samples.len() != scheme.rows() {
        return Err(Error::InvalidArgument(format!(
            "{} samples for a block of {}",
            samples.len(),
            scheme.rows()
        )));
    }
    let (m1, m2) = scheme.half_widths;
    let eps = scheme.epsilon;
    let w2 = (2 * m2 + 1) as usize;
    let xs: Vec<f64> = (0..r).map(|i| i as f64 / r as f64).collect();
    // partial[l1][k] = sum_l2 m_{l1,l2} exp(2 pi i eps l2 y_k)
    let partial: Vec<Vec<C64>> = (0..(2 * m1 + 1) as usize)
        .into_par_iter()
        .map(|row| {
            xs.iter()
                .map(|&y| {
                    (0..w2)
                        .map(|c| samples[row * w2 + c] * C64::from_polar(1.0, 2.0 * PI * eps * (c as i64 - m2) as f64 * y))
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut pixels = vec![0.0; r * r];
    pixels.par_chunks_mut(r).enumerate().for_each(|(i, out)| {
        for (row, p) in partial.iter().enumerate() {
            let e = C64::from_polar(eps, 2.0 * PI * eps * (row as i64 - m1) as f64 * xs[i]);
            for (o, v) in out.iter_mut().zip(p) {
                *o += (e * v).re;
            }
        }
    });
    Ok(Image { size: r, pixels })
}

/// Writes a 16-bit big-endian binary PGM with pixels mapped affinely from
/// `[min, max]` onto `[0, 65535]`; returns `(min, max)`.
pub fn write_pgm(image: &Image, out: &mut dyn Write) -> Result<(f64, f64)> {
    let (lo, hi) = image.range();
    let span = hi - lo;
    write!(out, "P5\n{} {}\n65535\n", image.size, image.size)?;
    let mut bytes = Vec::with_capacity(2 * image.pixels.len());
    for &v in &image.pixels {
        let q = if span > 0.0 { ((v - lo) / span * 65535.0).round() as u16 } else { 0 };
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    out.write_all(&bytes)?;
    Ok((lo, hi))
}

/// Writes a sample file: a header `samples v1 epsilon M1 M2` and one `re im`
/// pair per line in row order.
pub fn write_samples(scheme: &SamplingScheme, samples: &[C64], out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "samples v1 {:.17e} {} {}",
        scheme.epsilon, scheme.half_widths.0, scheme.half_widths.1
    )?;
    for s in samples {
        writeln!(out, "{:.17e} {:.17e}", s.re, s.im)?;
    }
    Ok(())
}

pub fn read_samples(input: &mut dyn BufRead) -> Result<(SamplingScheme, Vec<C64>)> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty sample file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "samples" || fields[1] != "v1" {
        return Err(Error::Parse(format!("bad sample header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    let int = |s: &str| s.parse::<i64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    let scheme = SamplingScheme::new(num(fields[2])?, (int(fields[3])?, int(fields[4])?))?;
    let mut samples = Vec::with_capacity(scheme.rows());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!("bad sample line {line:?}")));
        }
        samples.push(C64::new(num(parts[0])?, num(parts[1])?));
    }
    if samples.len() != scheme.rows() {
        return Err(Error::Parse(format!(
            "{} samples for a {}x{} block",
            samples.len(),
            2 * scheme.half_widths.0 + 1,
            2 * scheme.half_widths.1 + 1
        )));
    }
    Ok((scheme, samples))
}

/// Generalized-sampling reconstruction from given samples.
pub fn reconstruct(basis: &dyn TensorBasis, scheme: &SamplingScheme, samples: &[C64], opts: &GsOptions) -> Result<GsResult> {
    let u = assemble(basis, scheme, &AssemblyOptions::default())?;
    gs_solve(&u.matrix, samples, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryFamily;
    use crate::testfns::{f1, f2};
    use std::sync::Arc;

    fn boundary(p: usize, j: u32) -> BoundaryBasis2D {
        BoundaryBasis2D::new(Arc::new(BoundaryFamily::new(p, 12).unwrap()), j).unwrap()
    }

    #[test]
    fn haar_factor_transforms_match() {
        // the factor closed form against the evaluator rows
        let basis = InteriorBasis::daubechies(1, 2).unwrap();
        let scheme = SamplingScheme::new(0.5, (3, 3)).unwrap();
        let u = assemble(&basis, &scheme, &AssemblyOptions::default()).unwrap();
        let (factors, pairs) = basis.tensor_factors();
        for (col, &(a, b)) in pairs.iter().enumerate() {
            for r in [0, 5, 17, 30, 48] {
                let l = scheme.frequency(r);
                let hat = |f: (bool, u32, i64), w: f64| {
                    gauss_panels(0.0, 1.0, 64, 8, |x| C64::from_polar(haar_factor(f, x), -2.0 * PI * w * x))
                };
                let expect = hat(factors[a], 0.5 * l.0 as f64) * hat(factors[b], 0.5 * l.1 as f64) * 0.5;
                assert!((u.matrix[(r, col)] - expect).norm() < 1e-12, "col {col} row {r}");
            }
        }
    }

    #[test]
    fn haar_projection_of_linear_function() {
        // g = x: Haar residual on n intervals is 1 / (12 n^2)
        let basis = InteriorBasis::daubechies(1, 3).unwrap();
        let p = basis.axis_projection(&ExpPoly::polynomial(&[0.0, 1.0])).unwrap();
        assert!((p.residual_sq - 1.0 / (12.0 * 64.0)).abs() < 1e-15);
        assert!((p.projected_norm_sq + p.residual_sq - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_projection_is_exact_on_polynomials() {
        // degree < p lies in V_J
        let basis = boundary(3, 3);
        let g = ExpPoly::polynomial(&[0.3, -1.0, 2.0]);
        let p = basis.axis_projection(&g).unwrap();
        assert!(p.residual_sq < 1e-12, "{}", p.residual_sq);
        assert!((p.projected_norm_sq - g.norm_sq()).abs() < 1e-8);
    }

    #[test]
    fn boundary_projection_pythagoras() {
        let basis = boundary(3, 3);
        let g = f1().x;
        let p = basis.axis_projection(&g).unwrap();
        assert!(p.residual_sq > 0.0);
        assert!((p.projected_norm_sq + p.residual_sq - g.norm_sq()).abs() < 1e-8);
    }

    #[test]
    fn separable_coefficients_match_quadrature() {
        let basis = InteriorBasis::daubechies(1, 2).unwrap();
        let f = f1();
        let px = basis.axis_projection(&f.x).unwrap();
        let py = basis.axis_projection(&f.y).unwrap();
        let c = separable_coefficients(&basis.factor_pairs(), &px, &py);
        let (factors, pairs) = basis.tensor_factors();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let ix = gauss_panels(0.0, 1.0, 64, 10, |x| C64::new(f.x.eval(x) * haar_factor(factors[a], x), 0.0)).re;
            let iy = gauss_panels(0.0, 1.0, 64, 10, |y| C64::new(f.y.eval(y) * haar_factor(factors[b], y), 0.0)).re;
            assert!((c[k] - ix * iy).abs() < 1e-13);
        }
    }

    #[test]
    fn sandwich_haar() {
        let f = f1();
        for j in 2..=3 {
            let basis = InteriorBasis::daubechies(1, j).unwrap();
            let m = (1i64 << j) * 2;
            let scheme = SamplingScheme::new(0.5, (m, m)).unwrap();
            let q = quasi_optimality_check(&basis, &f, &scheme, &GsOptions::default(), 1e-10).unwrap();
            assert!(q.holds, "{q:?}");
            assert!(q.gs > q.best);
        }
    }

    #[test]
    fn sandwich_boundary_f2() {
        let basis = boundary(2, 2);
        let scheme = SamplingScheme::new(0.5, (12, 12)).unwrap();
        let q = quasi_optimality_check(&basis, &f2(), &scheme, &GsOptions::default(), 1e-6).unwrap();
        assert!(q.holds, "{q:?}");
    }

    #[test]
    fn sandwich_holds_at_round_off_inside_the_span() {
        // (1 + x^2)(2y - 1) is reproduced by three vanishing moments
        let basis = boundary(3, 3);
        let scheme = SamplingScheme::new(0.5, (16, 16)).unwrap();
        let q = quasi_optimality_check(&basis, &f2(), &scheme, &GsOptions::default(), 1e-9).unwrap();
        assert!(q.best < 1e-9 && q.gs < 1e-9, "{q:?}");
        assert!(q.holds, "{q:?}");
    }

    #[test]
    fn member_of_space_is_recovered() {
        // f = x y lies in V_J (x) V_J for p = 2
        let basis = boundary(2, 2);
        let g = ExpPoly::polynomial(&[0.0, 1.0]);
        let f = SeparableFunction {
            name: "xy".into(),
            x: g.clone(),
            y: g,
        };
        let scheme = SamplingScheme::new(0.5, (10, 10)).unwrap();
        let q = quasi_optimality_check(&basis, &f, &scheme, &GsOptions::default(), 1e-6).unwrap();
        assert!(q.best < 1e-6 && q.gs < 1e-5, "{q:?}");
    }

    #[test]
    fn fourier_error_matches_parseval() {
        let f = f1();
        let scheme = SamplingScheme::new(0.5, (6, 4)).unwrap();
        let m = measure(&|w| f.fourier(w), &scheme);
        let kept: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        let direct = (f.norm_sq() - kept).sqrt();
        assert!((fourier_error(&f, &scheme) - direct).abs() < 1e-12);
    }

    #[test]
    fn images_reproduce_functions() {
        // Haar synthesis of exact coefficients equals cell averages
        let basis = InteriorBasis::daubechies(1, 3).unwrap();
        let f = f2();
        let px = basis.axis_projection(&f.x).unwrap();
        let py = basis.axis_projection(&f.y).unwrap();
        let c: Vec<C64> = separable_coefficients(&basis.factor_pairs(), &px, &py)
            .into_iter()
            .map(|v| C64::new(v, 0.0))
            .collect();
        let img = synthesize_image(&basis, &c, 16).unwrap();
        let avg = |g: &ExpPoly, k: usize| integrate(k as f64 / 8.0, (k + 1) as f64 / 8.0, |x| g.eval(x)) * 8.0;
        for i in 0..16 {
            for k in 0..16 {
                let expect = avg(&f.x, i / 2) * avg(&f.y, k / 2);
                assert!((img.pixels[i * 16 + k] - expect).abs() < 1e-12);
            }
        }
        // Fourier image of a single sample is a plane wave
        let scheme = SamplingScheme::new(0.5, (1, 1)).unwrap();
        let mut s = vec![C64::new(0.0, 0.0); 9];
        s[scheme.row_of((1, 0)).unwrap()] = C64::new(1.0, 0.0);
        let img = fourier_image(&scheme, &s, 4).unwrap();
        for i in 0..4 {
            let v = 0.5 * (PI * i as f64 / 4.0).cos();
            assert!((img.pixels[i * 4 + 2] - v).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_samples_match_projection() {
        let basis = boundary(2, 2);
        let samples = basis.axis_samples(8).unwrap();
        assert_eq!(samples.len(), basis.factor_count());
        assert!(basis.axis_samples(3).is_err());
    }

    #[test]
    fn pgm_layout() {
        let img = Image {
            size: 2,
            pixels: vec![0.0, 1.0, 0.5, -1.0],
        };
        let mut buf = Vec::new();
        let (lo, hi) = write_pgm(&img, &mut buf).unwrap();
        assert_eq!((lo, hi), (-1.0, 1.0));
        let head = b"P5\n2 2\n65535\n";
        assert_eq!(&buf[..head.len()], head);
        let body = &buf[head.len()..];
        assert_eq!(body, &[0x80, 0x00, 0xff, 0xff, 0xbf, 0xff, 0x00, 0x00][..]);
    }

    #[test]
    fn sample_file_round_trip() {
        let scheme = SamplingScheme::new(1.0 / 3.0, (1, 2)).unwrap();
        let s: Vec<C64> = (0..15).map(|k| C64::new(k as f64 / 7.0, -(k as f64).sqrt())).collect();
        let mut buf = Vec::new();
        write_samples(&scheme, &s, &mut buf).unwrap();
        let (back, t) = read_samples(&mut buf.as_slice()).unwrap();
        assert_eq!(back, scheme);
        assert_eq!(t, s);
        let short = b"samples v1 0.5 1 1\n1 0\n";
        assert!(read_samples(&mut &short[..]).is_err());
    }
}
