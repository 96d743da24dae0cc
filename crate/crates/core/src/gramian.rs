//! Cross-Gramian between Fourier sampling vectors and a wavelet basis.
//!
//! Sampling vectors are `s_l(x) = eps exp(2 pi i eps <l, x>)` on a box of side
//! `1/eps` containing the support of the basis, so that
//! `<f, s_l> = eps f^(eps l)`. Rows are the frequencies `l` in row-major order
//! (first coordinate outermost), columns follow the basis order.

use crate::boundary::BoundaryBasis2D;
use crate::error::{Error, Result};
use crate::lattice::{order_basis, BasisIndex, ElementKind, ScalingMatrix2};
use crate::wavelet::FrequencyEvaluator;
use crate::C64;
use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// Default cap on the size of a dense cross-Gramian.
pub const DEFAULT_MEMORY_CAP: usize = 2 << 30;

/// Sampling density and the half-widths of the frequency block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingScheme {
    pub epsilon: f64,
    pub half_widths: (i64, i64),
}

impl SamplingScheme {
    pub fn new(epsilon: f64, half_widths: (i64, i64)) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon={epsilon} must be positive")));
        }
        if half_widths.0 < 0 || half_widths.1 < 0 {
            return Err(Error::InvalidArgument(format!("negative half-widths {half_widths:?}")));
        }
        Ok(SamplingScheme { epsilon, half_widths })
    }

    pub fn rows(&self) -> usize {
        ((2 * self.half_widths.0 + 1) * (2 * self.half_widths.1 + 1)) as usize
    }

    /// Frequency of row `r`.
    pub fn frequency(&self, r: usize) -> (i64, i64) {
        let w2 = (2 * self.half_widths.1 + 1) as usize;
        ((r / w2) as i64 - self.half_widths.0, (r % w2) as i64 - self.half_widths.1)
    }

    /// Row of frequency `l`, if inside the block.
    pub fn row_of(&self, l: (i64, i64)) -> Option<usize> {
        let (m1, m2) = self.half_widths;
        if l.0.abs() > m1 || l.1.abs() > m2 {
            return None;
        }
        Some(((l.0 + m1) * (2 * m2 + 1) + l.1 + m2) as usize)
    }

    pub fn frequencies(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.rows()).map(|r| self.frequency(r))
    }

    /// Fails unless a box of side `1/eps` holds the support box `[lo, hi]`.
    pub fn check_support(&self, lo: [f64; 2], hi: [f64; 2]) -> Result<()> {
        for axis in 0..2 {
            let extent = hi[axis] - lo[axis];
            if extent * self.epsilon > 1.0 + 1e-12 {
                return Err(Error::ConstraintViolated(format!(
                    "epsilon {} too large: support extent {} on axis {} exceeds 1/epsilon",
                    self.epsilon,
                    extent,
                    axis + 1
                )));
            }
        }
        Ok(())
    }
}

/// Parameters written into the dump header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisLabel {
    pub a: i64,
    pub scale: u32,
    pub det: i64,
}

/// Fills rows of the cross-Gramian.
pub trait RowSource: Sync {
    fn fill_row(&self, l: (i64, i64), out: &mut [C64]);
}

/// A reconstruction basis with known Fourier transforms.
pub trait FourierBasis: Sync {
    fn dim(&self) -> usize;
    /// Bounding box of the supports of all elements.
    fn support(&self) -> ([f64; 2], [f64; 2]);
    fn label(&self) -> BasisLabel;
    /// Prepares a row source for all frequencies of `scheme`.
    fn rows<'a>(&'a self, scheme: &SamplingScheme) -> Result<Box<dyn RowSource + 'a>>;
}

/// Rows of a basis of tensor products: `eps F_a(eps l1) F_b(eps l2)`.
pub struct SeparableRows {
    eps: f64,
    half_widths: (i64, i64),
    factors: usize,
    /// `[l1 + M1][factor]`, flattened.
    axis1: Vec<C64>,
    axis2: Vec<C64>,
    pairs: Vec<(usize, usize)>,
}

impl SeparableRows {
    /// `tables(ls)` returns `[l][factor]` transforms at the frequencies `eps l`.
    pub fn new(
        scheme: &SamplingScheme,
        factors: usize,
        pairs: Vec<(usize, usize)>,
        tables: impl Fn(&[f64]) -> Vec<Vec<C64>>,
    ) -> Self {
        let (m1, m2) = scheme.half_widths;
        let flat = |m: i64| {
            let w: Vec<f64> = (-m..=m).map(|l| scheme.epsilon * l as f64).collect();
            tables(&w).into_iter().flatten().collect::<Vec<_>>()
        };
        let axis1 = flat(m1);
        let axis2 = if m2 == m1 { axis1.clone() } else { flat(m2) };
        SeparableRows {
            eps: scheme.epsilon,
            half_widths: scheme.half_widths,
            factors,
            axis1,
            axis2,
            pairs,
        }
    }
}

impl RowSource for SeparableRows {
    fn fill_row(&self, l: (i64, i64), out: &mut [C64]) {
        let r1 = &self.axis1[(l.0 + self.half_widths.0) as usize * self.factors..][..self.factors];
        let r2 = &self.axis2[(l.1 + self.half_widths.1) as usize * self.factors..][..self.factors];
        for (o, &(a, b)) in out.iter_mut().zip(&self.pairs) {
            *o = r1[a] * r2[b] * self.eps;
        }
    }
}

/// Generator functions of a two-dimensional multiresolution.
pub trait Generator2D: Send + Sync + std::fmt::Debug {
    /// Support width `a`: generators live on `[0, a]^2`.
    fn support_width(&self) -> i64;
    fn wavelet_count(&self) -> u32;
    fn scaling_hat(&self, xi: [f64; 2]) -> C64;
    fn wavelet_hat(&self, generator: u32, xi: [f64; 2]) -> C64;
    /// One-dimensional evaluator when the generators are Daubechies tensor products.
    fn tensor_factors(&self) -> Option<&FrequencyEvaluator> {
        None
    }
}

/// Tensor-product Daubechies generators for `A = diag(2, 2)`.
#[derive(Debug, Clone)]
pub struct TensorDaubechies(pub FrequencyEvaluator);

impl Generator2D for TensorDaubechies {
    fn support_width(&self) -> i64 {
        self.0.family().support_width()
    }

    fn wavelet_count(&self) -> u32 {
        3
    }

    fn scaling_hat(&self, xi: [f64; 2]) -> C64 {
        self.0.scaling_hat_2d(xi)
    }

    fn wavelet_hat(&self, generator: u32, xi: [f64; 2]) -> C64 {
        self.0.wavelet_hat_2d(generator, xi).unwrap_or_default()
    }

    fn tensor_factors(&self) -> Option<&FrequencyEvaluator> {
        Some(&self.0)
    }
}

/// Smooth synthetic generators for matrices without a wavelet construction.
/// They are not orthonormal; they exercise the general entry formula.
#[derive(Debug, Clone)]
pub struct GaussianGenerator {
    pub a: i64,
    pub count: u32,
}

impl Generator2D for GaussianGenerator {
    fn support_width(&self) -> i64 {
        self.a
    }

    fn wavelet_count(&self) -> u32 {
        self.count
    }

    fn scaling_hat(&self, xi: [f64; 2]) -> C64 {
        let c = self.a as f64 / 2.0;
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        C64::from_polar((-PI * r2).exp(), -2.0 * PI * c * (xi[0] + xi[1]))
    }

    fn wavelet_hat(&self, generator: u32, xi: [f64; 2]) -> C64 {
        let t = generator as f64;
        self.scaling_hat(xi) * C64::new(0.0, (t * xi[0] - xi[1]).sin())
    }
}

/// The interior basis `r_1, ..., r_N` for a scaling matrix and generators.
#[derive(Debug, Clone)]
pub struct InteriorBasis {
    a_mat: ScalingMatrix2,
    scale: u32,
    elements: Vec<BasisIndex>,
    generator: Arc<dyn Generator2D>,
}

impl InteriorBasis {
    pub fn new(a_mat: ScalingMatrix2, scale: u32, generator: Arc<dyn Generator2D>) -> Result<Self> {
        if generator.wavelet_count() as i64 != a_mat.det().abs() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} wavelet generators for |det A| = {}",
                generator.wavelet_count(),
                a_mat.det().abs()
            )));
        }
        let elements = order_basis(&a_mat, generator.support_width(), scale)?;
        Ok(InteriorBasis {
            a_mat,
            scale,
            elements,
            generator,
        })
    }

    /// Separable Daubechies basis with `p` vanishing moments for `diag(2, 2)`.
    pub fn daubechies(p: usize, scale: u32) -> Result<Self> {
        let fam = crate::wavelet::WaveletFamily::daubechies(p)?;
        Self::new(
            ScalingMatrix2::dyadic(),
            scale,
            Arc::new(TensorDaubechies(FrequencyEvaluator::new(fam))),
        )
    }

    pub fn elements(&self) -> &[BasisIndex] {
        &self.elements
    }

    pub fn scaling_matrix(&self) -> &ScalingMatrix2 {
        &self.a_mat
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn generator(&self) -> &Arc<dyn Generator2D> {
        &self.generator
    }

    /// Entry `<r, s_l> = eps |det A|^{-j/2} exp(-2 pi i <w, m>) g^(w)`,
    /// `w = eps (A^-j)^T l`.
    pub fn entry(&self, index: &BasisIndex, l: (i64, i64), eps: f64) -> Result<C64> {
        let pw = self.a_mat.power(index.scale)?;
        let it = pw.inverse_transpose();
        Ok(interior_entry(&*self.generator, index, pw.det, &it, l, eps))
    }

    /// One-dimensional factors `(is_wavelet, j, m)` of a tensor-product basis in
    /// first-use order and, per element, the indices of its two factors.
    pub fn tensor_factors(&self) -> (Vec<(bool, u32, i64)>, Vec<(usize, usize)>) {
        let mut factors: Vec<(bool, u32, i64)> = Vec::new();
        let mut lookup = std::collections::HashMap::new();
        let mut pairs = Vec::with_capacity(self.elements.len());
        for e in &self.elements {
            let (w1, w2) = match e.kind {
                ElementKind::Scaling => (false, false),
                ElementKind::Wavelet { generator: 1 } => (false, true),
                ElementKind::Wavelet { generator: 2 } => (true, false),
                ElementKind::Wavelet { .. } => (true, true),
            };
            let mut id = |f: (bool, u32, i64)| {
                *lookup.entry(f).or_insert_with(|| {
                    factors.push(f);
                    factors.len() - 1
                })
            };
            let a = id((w1, e.scale, e.translation.0));
            let b = id((w2, e.scale, e.translation.1));
            pairs.push((a, b));
        }
        (factors, pairs)
    }

    fn separable_rows(&self, ev: &FrequencyEvaluator, scheme: &SamplingScheme) -> SeparableRows {
        let (factors, pairs) = self.tensor_factors();
        let n = factors.len();
        SeparableRows::new(scheme, n, pairs, |omegas| {
            omegas
                .iter()
                .map(|&w| {
                    let mut cache = std::collections::HashMap::new();
                    factors
                        .iter()
                        .map(|&(wav, j, m)| {
                            let scale = (1u64 << j) as f64;
                            let xi = w / scale;
                            let g = *cache
                                .entry((wav, j))
                                .or_insert_with(|| if wav { ev.wavelet_hat(xi) } else { ev.scaling_hat(xi) });
                            C64::from_polar(scale.powf(-0.5), -2.0 * PI * xi * m as f64) * g
                        })
                        .collect()
                })
                .collect()
        })
    }
}

fn interior_entry(
    gen: &dyn Generator2D,
    index: &BasisIndex,
    det: i64,
    it: &[[f64; 2]; 2],
    l: (i64, i64),
    eps: f64,
) -> C64 {
    let (l1, l2) = (l.0 as f64 * eps, l.1 as f64 * eps);
    let w = [it[0][0] * l1 + it[0][1] * l2, it[1][0] * l1 + it[1][1] * l2];
    let (m1, m2) = index.translation;
    let phase = C64::from_polar(1.0, -2.0 * PI * (w[0] * m1 as f64 + w[1] * m2 as f64));
    let g = match index.kind {
        ElementKind::Scaling => gen.scaling_hat(w),
        ElementKind::Wavelet { generator } => gen.wavelet_hat(generator, w),
    };
    phase * g * (eps / (det.abs() as f64).sqrt())
}

struct DirectRows<'a> {
    basis: &'a InteriorBasis,
    eps: f64,
    transforms: Vec<(i64, [[f64; 2]; 2])>,
}

impl RowSource for DirectRows<'_> {
    fn fill_row(&self, l: (i64, i64), out: &mut [C64]) {
        for (o, e) in out.iter_mut().zip(&self.basis.elements) {
            let (det, it) = &self.transforms[e.scale as usize];
            *o = interior_entry(&*self.basis.generator, e, *det, it, l, self.eps);
        }
    }
}

impl FourierBasis for InteriorBasis {
    fn dim(&self) -> usize {
        self.elements.len()
    }

    fn support(&self) -> ([f64; 2], [f64; 2]) {
        let a = self.generator.support_width();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut boxes = vec![(0u32, (1 - a, a - 1), (1 - a, a - 1))];
        for j in 0..self.scale {
            let (r1, r2) = self.a_mat.power(j).expect("cached power").row_sums();
            boxes.push((j, (1 - a, a * r1 - 1), (1 - a, a * r2 - 1)));
        }
        for (j, (lo1, hi1), (lo2, hi2)) in boxes {
            let pw = self.a_mat.power(j).expect("cached power");
            let it = pw.inverse_transpose();
            // A^-j = transpose of it
            for x in [lo1 as f64, (hi1 + a) as f64] {
                for y in [lo2 as f64, (hi2 + a) as f64] {
                    let p = [it[0][0] * x + it[1][0] * y, it[0][1] * x + it[1][1] * y];
                    for k in 0..2 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
            }
        }
        (lo, hi)
    }

    fn label(&self) -> BasisLabel {
        BasisLabel {
            a: self.generator.support_width(),
            scale: self.scale,
            det: self.a_mat.det(),
        }
    }

    fn rows<'a>(&'a self, scheme: &SamplingScheme) -> Result<Box<dyn RowSource + 'a>> {
        let (lo, hi) = self.support();
        scheme.check_support(lo, hi)?;
        if self.a_mat.is_dyadic() {
            if let Some(ev) = self.generator.tensor_factors() {
                return Ok(Box::new(self.separable_rows(ev, scheme)));
            }
        }
        let transforms = (0..=self.scale)
            .map(|j| {
                let pw = self.a_mat.power(j)?;
                Ok((pw.det, pw.inverse_transpose()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(DirectRows {
            basis: self,
            eps: scheme.epsilon,
            transforms,
        }))
    }
}

impl FourierBasis for BoundaryBasis2D {
    fn dim(&self) -> usize {
        self.elements().len()
    }

    fn support(&self) -> ([f64; 2], [f64; 2]) {
        ([0.0, 0.0], [1.0, 1.0])
    }

    fn label(&self) -> BasisLabel {
        BasisLabel {
            a: self.interval().family().family().support_width(),
            scale: self.interval().top(),
            det: 4,
        }
    }

    fn rows<'a>(&'a self, scheme: &SamplingScheme) -> Result<Box<dyn RowSource + 'a>> {
        scheme.check_support([0.0, 0.0], [1.0, 1.0])?;
        let (factors, pairs) = self.factor_table();
        let interval = self.interval();
        let rows: Vec<(u32, Vec<f64>)> = factors
            .iter()
            .map(|&(k, j, n)| interval.function(k, j, n))
            .collect::<Result<_>>()?;
        let n = factors.len();
        Ok(Box::new(SeparableRows::new(scheme, n, pairs, |omegas| {
            let mut by_scale = std::collections::BTreeMap::new();
            for (s, _) in &rows {
                by_scale.entry(*s).or_insert_with(|| interval.translate_hats(*s, omegas));
            }
            (0..omegas.len())
                .map(|k| {
                    rows.iter()
                        .map(|(s, row)| by_scale[s][k].iter().zip(row).map(|(h, c)| h * c).sum())
                        .collect()
                })
                .collect()
        })))
    }
}

/// Dense cross-Gramian with its sampling scheme.
#[derive(Debug, Clone)]
pub struct CrossGramian {
    pub matrix: DMatrix<C64>,
    pub scheme: SamplingScheme,
    pub label: BasisLabel,
}

/// Options for dense assembly.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    pub memory_cap: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }
}

/// Row-major buffer of selected rows, filled in parallel.
pub fn assemble_rows(source: &dyn RowSource, cols: usize, freqs: &[(i64, i64)]) -> Vec<C64> {
    let mut buf = vec![C64::new(0.0, 0.0); freqs.len() * cols];
    if cols == 0 {
        return buf;
    }
    buf.par_chunks_mut(cols)
        .zip(freqs.par_iter())
        .for_each(|(row, &l)| source.fill_row(l, row));
    buf
}

/// Assembles the dense `M x N` cross-Gramian.
pub fn assemble(basis: &dyn FourierBasis, scheme: &SamplingScheme, opts: &AssemblyOptions) -> Result<CrossGramian> {
    let rows = scheme.rows();
    let cols = basis.dim();
    let required = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(2 * std::mem::size_of::<C64>()))
        .ok_or(Error::Overflow("Gramian size"))?;
    if required > opts.memory_cap {
        return Err(Error::MemoryCap {
            rows,
            cols,
            required,
            cap: opts.memory_cap,
        });
    }
    let source = basis.rows(scheme)?;
    let freqs: Vec<_> = scheme.frequencies().collect();
    let buf = assemble_rows(&*source, cols, &freqs);
    Ok(CrossGramian {
        matrix: DMatrix::from_row_slice(rows, cols, &buf),
        scheme: *scheme,
        label: basis.label(),
    })
}

/// Measurements `m_l = eps f^(eps l)` in row order.
pub fn measure(fourier: &(dyn Fn([f64; 2]) -> C64 + Sync), scheme: &SamplingScheme) -> Vec<C64> {
    let freqs: Vec<_> = scheme.frequencies().collect();
    freqs
        .par_iter()
        .map(|&(l1, l2)| fourier([scheme.epsilon * l1 as f64, scheme.epsilon * l2 as f64]) * scheme.epsilon)
        .collect()
}

/// Writes the plain-text dump: a header line
/// `gramian v1 rows cols epsilon a J det` and one `re im` pair per line,
/// row-major, 17 significant digits.
pub fn write_dump(g: &CrossGramian, out: &mut dyn Write) -> Result<()> {
    let (r, c) = g.matrix.shape();
    writeln!(
        out,
        "gramian v1 {r} {c} {:.16e} {} {} {}",
        g.scheme.epsilon, g.label.a, g.label.scale, g.label.det
    )?;
    for i in 0..r {
        for j in 0..c {
            let v = g.matrix[(i, j)];
            writeln!(out, "{:.16e} {:.16e}", v.re, v.im)?;
        }
    }
    Ok(())
}

/// Reads a dump written by [`write_dump`]. The half-widths are recovered from
/// the row count for square blocks only.
pub fn read_dump(input: &mut dyn BufRead) -> Result<(DMatrix<C64>, f64, BasisLabel)> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 8 || f[0] != "gramian" || f[1] != "v1" {
        return Err(Error::Parse(format!("bad dump header {header:?}")));
    }
    let bad = |s: &str| Error::Parse(format!("bad header field {s:?}"));
    let rows: usize = f[2].parse().map_err(|_| bad(f[2]))?;
    let cols: usize = f[3].parse().map_err(|_| bad(f[3]))?;
    let eps: f64 = f[4].parse().map_err(|_| bad(f[4]))?;
    let label = BasisLabel {
        a: f[5].parse().map_err(|_| bad(f[5]))?,
        scale: f[6].parse().map_err(|_| bad(f[6]))?,
        det: f[7].parse().map_err(|_| bad(f[7]))?,
    };
    let mut data = Vec::with_capacity(rows * cols);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut next = || -> Result<f64> {
            let s = it.next().ok_or_else(|| Error::Parse(line.clone()))?;
            s.parse().map_err(|_| Error::Parse(line.clone()))
        };
        let re = next()?;
        let im = next()?;
        data.push(C64::new(re, im));
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!("expected {} entries, found {}", rows * cols, data.len())));
    }
    Ok((DMatrix::from_row_slice(rows, cols, &data), eps, label))
}

/// Two-dimensional coefficient array over an index box.
#[derive(Debug, Clone)]
struct Grid {
    lo: (i64, i64),
    n: (usize, usize),
    data: Vec<C64>,
}

impl Grid {
    fn zeros(lo: (i64, i64), hi: (i64, i64)) -> Self {
        let n = ((hi.0 - lo.0 + 1) as usize, (hi.1 - lo.1 + 1) as usize);
        Grid {
            lo,
            n,
            data: vec![C64::new(0.0, 0.0); n.0 * n.1],
        }
    }

    fn hi(&self) -> (i64, i64) {
        (self.lo.0 + self.n.0 as i64 - 1, self.lo.1 + self.n.1 as i64 - 1)
    }
}

/// Coefficient block of the basis: scale, generator (0 = scaling) and box.
#[derive(Debug, Clone, Copy)]
struct Block {
    scale: u32,
    generator: u32,
    lo: i64,
    hi: i64,
    offset: usize,
}

/// Matrix-free cross-Gramian for the separable Daubechies basis with
/// `A = diag(2, 2)` and `1/eps` an integer: coefficients are synthesised to
/// scale `J` by the inverse wavelet transform, then
/// `(U alpha)_l = eps 2^-J phi^(eps l1 / 2^J) phi^(eps l2 / 2^J) sum_n beta_n exp(-2 pi i <l, n> / K)`
/// with `K = 2^J / eps`, evaluated by a two-dimensional FFT.
pub struct ImplicitOperator {
    scheme: SamplingScheme,
    scale: u32,
    dim: usize,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    blocks: Vec<Block>,
    /// Index ranges of the scaling coefficients at every scale `0..=J`.
    ranges: Vec<(i64, i64)>,
    k: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    weight1: Vec<C64>,
    weight2: Vec<C64>,
}

impl std::fmt::Debug for ImplicitOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImplicitOperator")
            .field("scheme", &self.scheme)
            .field("scale", &self.scale)
            .field("dim", &self.dim)
            .field("k", &self.k)
            .finish()
    }
}

impl ImplicitOperator {
    pub fn new(basis: &InteriorBasis, scheme: &SamplingScheme) -> Result<Self> {
        let ev = basis
            .generator()
            .tensor_factors()
            .filter(|_| basis.scaling_matrix().is_dyadic())
            .ok_or_else(|| Error::Unsupported("implicit operator needs separable dyadic generators".into()))?;
        let q = (1.0 / scheme.epsilon).round();
        if (q * scheme.epsilon - 1.0).abs() > 1e-12 {
            return Err(Error::Unsupported(format!(
                "implicit operator needs 1/epsilon integral, got epsilon={}",
                scheme.epsilon
            )));
        }
        let (lo, hi) = basis.support();
        scheme.check_support(lo, hi)?;
        let fam = ev.family();
        let a = fam.support_width();
        let scale = basis.scale();
        let mut blocks = vec![Block {
            scale: 0,
            generator: 0,
            lo: 1 - a,
            hi: a - 1,
            offset: 0,
        }];
        let mut offset = ((2 * a - 1) * (2 * a - 1)) as usize;
        let mut ranges = vec![(1 - a, a - 1)];
        for j in 0..scale {
            let whi = a * (1 << j) - 1;
            for generator in 1..=3 {
                blocks.push(Block {
                    scale: j,
                    generator,
                    lo: 1 - a,
                    hi: whi,
                    offset,
                });
                offset += ((whi + a) * (whi + a)) as usize;
            }
            let (clo, chi) = ranges[j as usize];
            ranges.push(((2 * clo).min(2 * (1 - a)), (2 * chi + a).max(2 * whi + a)));
        }
        if offset != basis.dim() {
            return Err(Error::Unsupported("basis layout does not match the dyadic ordering".into()));
        }
        let k = q as usize * (1usize << scale);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(k);
        let ifft = planner.plan_fft_inverse(k);
        let norm = 2f64.powi(-(scale as i32));
        let weights = |m: i64| -> Vec<C64> {
            (-m..=m)
                .map(|l| ev.scaling_hat(scheme.epsilon * l as f64 * norm))
                .collect()
        };
        let weight1 = weights(scheme.half_widths.0);
        let weight2 = weights(scheme.half_widths.1);
        Ok(ImplicitOperator {
            scheme: *scheme,
            scale,
            dim: basis.dim(),
            lowpass: fam.lowpass().to_vec(),
            highpass: fam.highpass().to_vec(),
            blocks,
            ranges,
            k,
            fft,
            ifft,
            weight1,
            weight2,
        })
    }

    pub fn rows(&self) -> usize {
        self.scheme.rows()
    }

    pub fn cols(&self) -> usize {
        self.dim
    }

    fn block_grid(&self, b: &Block, x: &[C64]) -> Grid {
        let mut g = Grid::zeros((b.lo, b.lo), (b.hi, b.hi));
        let len = g.data.len();
        g.data.copy_from_slice(&x[b.offset..b.offset + len]);
        g
    }

    /// `out[2m + k] += x[m] f1[k1] f2[k2]` over both axes.
    fn upsample(x: &Grid, f1: &[f64], f2: &[f64], out: &mut Grid) {
        for i in 0..x.n.0 {
            let m1 = x.lo.0 + i as i64;
            for j in 0..x.n.1 {
                let v = x.data[i * x.n.1 + j];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let m2 = x.lo.1 + j as i64;
                for (k1, a) in f1.iter().enumerate() {
                    let r = (2 * m1 + k1 as i64 - out.lo.0) as usize;
                    let base = r * out.n.1;
                    for (k2, b) in f2.iter().enumerate() {
                        let c = (2 * m2 + k2 as i64 - out.lo.1) as usize;
                        out.data[base + c] += v * (a * b);
                    }
                }
            }
        }
    }

    /// Transpose of [`Self::upsample`]: `out[m] = sum_k x[2m + k] f1[k1] f2[k2]`.
    fn downsample(x: &Grid, f1: &[f64], f2: &[f64], out: &mut Grid) {
        for i in 0..out.n.0 {
            let m1 = out.lo.0 + i as i64;
            for j in 0..out.n.1 {
                let m2 = out.lo.1 + j as i64;
                let mut acc = C64::new(0.0, 0.0);
                for (k1, a) in f1.iter().enumerate() {
                    let r = 2 * m1 + k1 as i64 - x.lo.0;
                    if r < 0 || r as usize >= x.n.0 {
                        continue;
                    }
                    let base = r as usize * x.n.1;
                    for (k2, b) in f2.iter().enumerate() {
                        let c = 2 * m2 + k2 as i64 - x.lo.1;
                        if c >= 0 && (c as usize) < x.n.1 {
                            acc += x.data[base + c as usize] * (a * b);
                        }
                    }
                }
                out.data[i * out.n.1 + j] = acc;
            }
        }
    }

    fn filters(&self, generator: u32) -> (&[f64], &[f64]) {
        match generator {
            0 => (&self.lowpass, &self.lowpass),
            1 => (&self.lowpass, &self.highpass),
            2 => (&self.highpass, &self.lowpass),
            _ => (&self.highpass, &self.highpass),
        }
    }

    /// Coefficients of `sum_j alpha_j r_j` in the scale-`J` scaling basis.
    pub fn synthesize(&self, x: &[C64]) -> (i64, Vec<C64>, usize) {
        let mut c = self.block_grid(&self.blocks[0], x);
        for j in 0..self.scale {
            let (lo, hi) = self.ranges[j as usize + 1];
            let mut out = Grid::zeros((lo, lo), (hi, hi));
            Self::upsample(&c, &self.lowpass, &self.lowpass, &mut out);
            for b in self.blocks.iter().filter(|b| b.generator > 0 && b.scale == j) {
                let (f1, f2) = self.filters(b.generator);
                Self::upsample(&self.block_grid(b, x), f1, f2, &mut out);
            }
            c = out;
        }
        (c.lo.0, c.data, c.n.0)
    }

    /// `y = U x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let (lo, beta, n) = self.synthesize(x);
        let k = self.k;
        let mut z = vec![C64::new(0.0, 0.0); k * k];
        for i in 0..n {
            let r = (lo + i as i64).rem_euclid(k as i64) as usize;
            for j in 0..n {
                let c = (lo + j as i64).rem_euclid(k as i64) as usize;
                z[r * k + c] += beta[i * n + j];
            }
        }
        self.fft2(&mut z, false);
        let (m1, m2) = self.scheme.half_widths;
        let scale = self.scheme.epsilon * 2f64.powi(-(self.scale as i32));
        let mut y = Vec::with_capacity(self.rows());
        for l1 in -m1..=m1 {
            let r = l1.rem_euclid(k as i64) as usize;
            let w1 = self.weight1[(l1 + m1) as usize] * scale;
            for l2 in -m2..=m2 {
                let c = l2.rem_euclid(k as i64) as usize;
                y.push(z[r * k + c] * w1 * self.weight2[(l2 + m2) as usize]);
            }
        }
        y
    }

    /// `x = U^H y`.
    pub fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let k = self.k;
        let (m1, m2) = self.scheme.half_widths;
        let scale = self.scheme.epsilon * 2f64.powi(-(self.scale as i32));
        let mut z = vec![C64::new(0.0, 0.0); k * k];
        let mut idx = 0;
        for l1 in -m1..=m1 {
            let r = l1.rem_euclid(k as i64) as usize;
            let w1 = self.weight1[(l1 + m1) as usize].conj() * scale;
            for l2 in -m2..=m2 {
                let c = l2.rem_euclid(k as i64) as usize;
                z[r * k + c] += y[idx] * w1 * self.weight2[(l2 + m2) as usize].conj();
                idx += 1;
            }
        }
        self.fft2(&mut z, true);
        let (lo, hi) = self.ranges[self.scale as usize];
        let mut c = Grid::zeros((lo, lo), (hi, hi));
        for i in 0..c.n.0 {
            let r = (lo + i as i64).rem_euclid(k as i64) as usize;
            for j in 0..c.n.1 {
                let col = (lo + j as i64).rem_euclid(k as i64) as usize;
                c.data[i * c.n.1 + j] = z[r * k + col];
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); self.dim];
        for j in (0..self.scale).rev() {
            for b in self.blocks.iter().filter(|b| b.generator > 0 && b.scale == j) {
                let (f1, f2) = self.filters(b.generator);
                let mut g = Grid::zeros((b.lo, b.lo), (b.hi, b.hi));
                Self::downsample(&c, f1, f2, &mut g);
                x[b.offset..b.offset + g.data.len()].copy_from_slice(&g.data);
            }
            let (lo, hi) = self.ranges[j as usize];
            let mut coarse = Grid::zeros((lo, lo), (hi, hi));
            Self::downsample(&c, &self.lowpass, &self.lowpass, &mut coarse);
            c = coarse;
        }
        let b = self.blocks[0];
        debug_assert_eq!((c.lo.0, c.hi().0), (b.lo, b.hi));
        x[..c.data.len()].copy_from_slice(&c.data);
        x
    }

    fn fft2(&self, z: &mut [C64], inverse: bool) {
        let k = self.k;
        let plan = if inverse { &self.ifft } else { &self.fft };
        plan.process(z);
        let mut t = vec![C64::new(0.0, 0.0); k * k];
        for r in 0..k {
            for c in 0..k {
                t[c * k + r] = z[r * k + c];
            }
        }
        plan.process(&mut t);
        for r in 0..k {
            for c in 0..k {
                z[r * k + c] = t[c * k + r];
            }
        }
    }
}
