//! Mode drivers: basis construction, rate ladders, reconstructions and dumps.

use crate::config::{ConfigError, ExperimentConfig, Family, Source};
use f2w_core::boundary::{BoundaryBasis2D, BoundaryFamily};
use f2w_core::gramian::{assemble, measure, write_dump, AssemblyOptions, FourierBasis, GaussianGenerator, InteriorBasis, SamplingScheme};
use f2w_core::reconstruct::{
    fourier_image, quasi_optimality_check, read_samples, reconstruct as gs_reconstruct, synthesize_image, write_pgm,
    write_samples, Image, QuasiOptimality, TensorBasis,
};
use f2w_core::solver::{aspect, rate_for_basis, stable_sampling_rate, GsOptions, GsResult, LadderRung, RateOptions};
use f2w_core::testfns::{f1, f2, SeparableFunction};
use std::fmt::Write as _;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

/// Resolution of the dyadic samples behind boundary wavelets.
pub const BOUNDARY_LEVEL: u32 = 12;

/// Relative slack in the quasi-optimality inequalities.
pub const SANDWICH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] f2w_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use f2w_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::InvalidScalingMatrix { .. }
                | E::InvalidArgument(_)
                | E::UnsupportedFamily(_)
                | E::Unsupported(_)
                | E::ConstraintViolated(_)
                | E::Parse(_)
                | E::MemoryCap { .. },
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// A reconstruction basis at one scale.
pub enum Basis {
    Interior(InteriorBasis),
    Boundary(BoundaryBasis2D),
}

impl Basis {
    pub fn fourier(&self) -> &dyn FourierBasis {
        match self {
            Basis::Interior(b) => b,
            Basis::Boundary(b) => b,
        }
    }

    pub fn tensor(&self) -> &dyn TensorBasis {
        match self {
            Basis::Interior(b) => b,
            Basis::Boundary(b) => b,
        }
    }
}

/// Parsed configuration plus the output directory and shared boundary tables.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    family: Option<Arc<BoundaryFamily>>,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, out: PathBuf) -> Result<Self> {
        let family = if cfg.boundary {
            Some(Arc::new(BoundaryFamily::new(cfg.p, BOUNDARY_LEVEL)?))
        } else {
            None
        };
        Ok(Context { cfg, out, family })
    }

    pub fn basis(&self, j: u32) -> Result<Basis> {
        if let Some(fam) = &self.family {
            return Ok(Basis::Boundary(BoundaryBasis2D::new(fam.clone(), j)?));
        }
        let cfg = &self.cfg;
        let b = match cfg.family {
            Family::Haar | Family::Daubechies => InteriorBasis::daubechies(cfg.p, j)?,
            Family::Synthetic => {
                let count = (cfg.matrix.det().unsigned_abs() - 1) as u32;
                InteriorBasis::new(cfg.matrix.clone(), j, Arc::new(GaussianGenerator { a: cfg.a, count }))?
            }
        };
        Ok(Basis::Interior(b))
    }

    /// Growth direction of the sampling block for scale `j`.
    pub fn aspect(&self, j: u32) -> Result<(i64, i64)> {
        if self.cfg.boundary {
            Ok((1, 1))
        } else {
            Ok(aspect(&self.cfg.matrix, j)?)
        }
    }

    pub fn rate_options(&self) -> RateOptions {
        RateOptions {
            theta_inv: self.cfg.theta_inv,
            refine_axes: self.cfg.refine_axes,
            max_half_width: self.cfg.max_half_width,
        }
    }

    pub fn gs_options(&self) -> GsOptions {
        GsOptions {
            tol: self.cfg.tolerance,
            ..GsOptions::default()
        }
    }

    /// Configured half-widths, or the stable sampling rate of `basis` at scale `j`.
    pub fn half_widths(&self, basis: &Basis, j: u32) -> Result<(i64, i64)> {
        if let Some(hw) = self.cfg.half_width {
            return Ok(hw);
        }
        let mut trace = Vec::new();
        let pt = rate_for_basis(basis.fourier(), self.cfg.epsilon, self.aspect(j)?, &self.rate_options(), &mut trace)?;
        Ok(pt.half_widths)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Write { path, source })
    }
}

fn analytic(source: &Source) -> Option<(&'static str, SeparableFunction)> {
    match source {
        Source::F1 => Some(("f1", f1())),
        Source::F2 => Some(("f2", f2())),
        Source::File(_) => None,
    }
}

fn load_samples(path: &Path) -> Result<(SamplingScheme, Vec<f2w_core::C64>)> {
    let file = std::fs::File::open(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(read_samples(&mut BufReader::new(file))?)
}

fn pgm(image: &Image) -> Result<(Vec<u8>, (f64, f64))> {
    let mut bytes = Vec::new();
    let range = write_pgm(image, &mut bytes)?;
    Ok((bytes, range))
}

pub fn rate(ctx: &Context) -> Result<bool> {
    let bases: Vec<(Basis, (i64, i64))> = ctx
        .cfg
        .scales()
        .map(|j| Ok((ctx.basis(j)?, ctx.aspect(j)?)))
        .collect::<Result<_>>()?;
    let ladder: Vec<LadderRung<'_>> = bases
        .iter()
        .map(|(b, aspect)| LadderRung {
            basis: b.fourier(),
            aspect: *aspect,
        })
        .collect();
    let curve = stable_sampling_rate(&ladder, ctx.cfg.epsilon, &ctx.rate_options())?;
    let summary = curve.summary();
    ctx.write("rate.csv", curve.to_csv().as_bytes())?;
    ctx.write("rate_summary.txt", summary.as_bytes())?;
    print!("{summary}");
    Ok(true)
}

/// Block of samples of the configured source at scale `j`.
fn samples_for(ctx: &Context, basis: &Basis, j: u32) -> Result<(SamplingScheme, Vec<f2w_core::C64>)> {
    match &ctx.cfg.source {
        Source::File(path) => {
            let (scheme, samples) = load_samples(path)?;
            if let Some(hw) = ctx.cfg.half_width {
                if hw != scheme.half_widths {
                    return Err(ConfigError::Invalid(format!(
                        "half_width {hw:?} disagrees with the sample file block {:?}",
                        scheme.half_widths
                    ))
                    .into());
                }
            }
            Ok((scheme, samples))
        }
        source => {
            let (_, f) = analytic(source).expect("analytic source");
            let scheme = SamplingScheme::new(ctx.cfg.epsilon, ctx.half_widths(basis, j)?)?;
            let samples = measure(&|w| f.fourier(w), &scheme);
            Ok((scheme, samples))
        }
    }
}

pub fn reconstruct(ctx: &Context) -> Result<bool> {
    let j = ctx.cfg.j_max;
    let basis = ctx.basis(j)?;
    let (scheme, samples) = samples_for(ctx, &basis, j)?;
    let mut report = String::new();
    let _ = writeln!(report, "N = {}", basis.fourier().dim());
    let _ = writeln!(report, "J = {j}");
    let _ = writeln!(report, "epsilon = {}", scheme.epsilon);
    let _ = writeln!(report, "M1 = {}", scheme.half_widths.0);
    let _ = writeln!(report, "M2 = {}", scheme.half_widths.1);
    let _ = writeln!(report, "samples = {}", scheme.rows());
    let (solve, check): (GsResult, Option<QuasiOptimality>) = match analytic(&ctx.cfg.source) {
        Some((name, f)) => {
            let q = quasi_optimality_check(basis.tensor(), &f, &scheme, &ctx.gs_options(), SANDWICH_TOLERANCE)?;
            let _ = writeln!(report, "function = {name}");
            (q.solve.clone(), Some(q))
        }
        None => {
            let _ = writeln!(report, "function = samples");
            (gs_reconstruct(basis.tensor(), &scheme, &samples, &ctx.gs_options())?, None)
        }
    };
    let _ = writeln!(report, "sigma_min = {:.12e}", solve.sigma_min);
    let _ = writeln!(report, "residual = {:.12e}", solve.residual);
    if let Some(q) = &check {
        let _ = writeln!(report, "best_error = {:.12e}", q.best);
        let _ = writeln!(report, "gs_error = {:.12e}", q.gs);
        let _ = writeln!(report, "gs_bound = {:.12e}", q.bound);
        let _ = writeln!(report, "fourier_error = {:.12e}", q.fourier);
        let _ = writeln!(report, "quasi_optimal = {}", q.holds);
    }

    let r = ctx.cfg.grid;
    let (gs_pgm, gs_range) = pgm(&synthesize_image(basis.tensor(), &solve.coefficients, r)?)?;
    let (fourier_pgm, fourier_range) = pgm(&fourier_image(&scheme, &samples, r)?)?;
    ctx.write("gs.pgm", &gs_pgm)?;
    ctx.write("fourier.pgm", &fourier_pgm)?;
    let mut sidecar = String::new();
    for (name, (lo, hi)) in [("gs.pgm", gs_range), ("fourier.pgm", fourier_range)] {
        let _ = writeln!(sidecar, "{name} min {lo:.12e} max {hi:.12e}");
    }
    ctx.write("images.txt", sidecar.as_bytes())?;
    if check.is_some() {
        let mut buf = Vec::new();
        write_samples(&scheme, &samples, &mut buf)?;
        ctx.write("samples.txt", &buf)?;
    }
    ctx.write("report.txt", report.as_bytes())?;
    print!("{report}");
    Ok(check.is_none_or(|q| q.holds))
}

/// Least-squares slope of `log y` against `log x`.
fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn compare(ctx: &Context) -> Result<bool> {
    let Some((name, f)) = analytic(&ctx.cfg.source) else {
        return Err(ConfigError::Invalid("compare needs an analytic function, not a sample file".into()).into());
    };
    let mut csv = String::from("J,N,M1,M2,samples,sigma_min,best_error,gs_error,gs_bound,fourier_error,quasi_optimal\n");
    let mut rows = Vec::new();
    let mut ok = true;
    for j in ctx.cfg.scales() {
        let basis = ctx.basis(j)?;
        let scheme = SamplingScheme::new(ctx.cfg.epsilon, ctx.half_widths(&basis, j)?)?;
        let q = quasi_optimality_check(basis.tensor(), &f, &scheme, &ctx.gs_options(), SANDWICH_TOLERANCE)?;
        let n = basis.fourier().dim();
        let _ = writeln!(
            csv,
            "{j},{n},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            scheme.half_widths.0,
            scheme.half_widths.1,
            scheme.rows(),
            q.sigma_min,
            q.best,
            q.gs,
            q.bound,
            q.fourier,
            q.holds
        );
        ok &= q.holds;
        rows.push((j, n, scheme.rows(), q));
    }
    let mut summary = String::new();
    let _ = writeln!(summary, "function = {name}");
    let _ = writeln!(summary, "epsilon = {}", ctx.cfg.epsilon);
    let _ = writeln!(
        summary,
        "{:>3} {:>7} {:>8} {:>12} {:>12} {:>10}",
        "J", "N", "samples", "gs_error", "fourier", "gain"
    );
    for (j, n, m, q) in &rows {
        let _ = writeln!(
            summary,
            "{j:>3} {n:>7} {m:>8} {:>12.4e} {:>12.4e} {:>10.1}",
            q.gs,
            q.fourier,
            q.fourier / q.gs
        );
    }
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dn = (b.2 as f64 / a.2 as f64).ln();
        let _ = writeln!(
            summary,
            "J {}->{}: error slope against samples gs {:.3}, fourier {:.3}",
            a.0,
            b.0,
            (b.3.gs / a.3.gs).ln() / dn,
            (b.3.fourier / a.3.fourier).ln() / dn
        );
    }
    let pts = |e: fn(&QuasiOptimality) -> f64| rows.iter().map(|r| (r.2 as f64, e(&r.3))).collect::<Vec<_>>();
    if let (Some(g), Some(fo)) = (log_slope(&pts(|q| q.gs)), log_slope(&pts(|q| q.fourier))) {
        let _ = writeln!(summary, "least-squares slope gs {g:.3}, fourier {fo:.3}");
    }
    let _ = writeln!(summary, "quasi_optimal = {ok}");
    ctx.write("compare.csv", csv.as_bytes())?;
    ctx.write("compare_summary.txt", summary.as_bytes())?;
    print!("{summary}");
    Ok(ok)
}

pub fn gramian_dump(ctx: &Context) -> Result<bool> {
    let j = ctx.cfg.j_max;
    let basis = ctx.basis(j)?;
    let scheme = SamplingScheme::new(ctx.cfg.epsilon, ctx.half_widths(&basis, j)?)?;
    let g = assemble(basis.fourier(), &scheme, &AssemblyOptions::default())?;
    let mut buf = Vec::new();
    write_dump(&g, &mut buf)?;
    ctx.write("gramian.txt", &buf)?;
    if let Some(fam) = &ctx.family {
        ctx.write("boundary_coefficients.txt", fam.coefficient_table().as_bytes())?;
    }
    println!(
        "gramian {}x{} at J = {j}, epsilon = {}, M = {:?}",
        g.matrix.nrows(),
        g.matrix.ncols(),
        scheme.epsilon,
        scheme.half_widths
    );
    Ok(true)
}
