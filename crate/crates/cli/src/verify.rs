//! Deterministic numerical checks, one `name,status,measured,threshold` row each.
//!
//! `xfail` marks a check that is expected to fail for the given configuration,
//! such as the mesh-norm assumption at a coarse sampling density; it does not
//! fail the run.

use crate::config::Family;
use crate::modes::{Basis, Context, Result, SANDWICH_TOLERANCE};
use f2w_core::gramian::{assemble, AssemblyOptions, FourierBasis, InteriorBasis, SamplingScheme};
use f2w_core::inequalities::{epsilon_transfer, grid_parseval_check, mz_sweep, tail_mass_s, transfer_margin, TrigBlock, TAIL_MASS_CAP};
use f2w_core::lattice::{
    check_assumption, count_elements, count_elements_dyadic, expansion_bounds, mesh_norm, order_basis, MeshGeometry,
    ScalingMatrix2,
};
use f2w_core::linalg::smallest_singular_value;
use f2w_core::reconstruct::quasi_optimality_check;
use f2w_core::solver::{gs_solve, rate_for_basis, RateOptions};
use f2w_core::testfns::f1;
use f2w_core::wavelet::{FrequencyEvaluator, WaveletFamily};
use f2w_core::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Xfail,
}

impl Status {
    fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Xfail => "xfail",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: &'static str,
    pub status: Status,
    pub measured: f64,
    pub threshold: f64,
}

fn row(name: &'static str, ok: bool, measured: f64, threshold: f64) -> Row {
    Row {
        name,
        status: if ok { Status::Pass } else { Status::Fail },
        measured,
        threshold,
    }
}

pub fn format_rows(rows: &[Row]) -> String {
    let mut s = String::from("name,status,measured,threshold\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.6e},{:.6e}", r.name, r.status.name(), r.measured, r.threshold);
    }
    s
}

pub fn verify(ctx: &Context) -> Result<bool> {
    let rows = checks(ctx)?;
    let table = format_rows(&rows);
    ctx.write("verify.csv", table.as_bytes())?;
    print!("{table}");
    Ok(rows.iter().all(|r| r.status != Status::Fail))
}

/// Smallest scale exercised by the single-scale checks.
fn first_scale(ctx: &Context) -> u32 {
    ctx.cfg.j_min
}

fn evaluator(ctx: &Context) -> Result<Option<FrequencyEvaluator>> {
    Ok(match ctx.cfg.family {
        Family::Haar => Some(FrequencyEvaluator::new(WaveletFamily::haar())),
        Family::Daubechies => Some(FrequencyEvaluator::new(WaveletFamily::daubechies(ctx.cfg.p)?)),
        Family::Synthetic => None,
    })
}

fn example_half_width(j: u32, eps: f64, s: i64) -> i64 {
    ((1i64 << j) as f64 * s as f64 / eps - 1e-9).ceil() as i64
}

fn sigma(basis: &dyn FourierBasis, eps: f64, m: (i64, i64)) -> Result<f64> {
    let scheme = SamplingScheme::new(eps, m)?;
    Ok(smallest_singular_value(&assemble(basis, &scheme, &AssemblyOptions::default())?.matrix)?)
}

fn checks(ctx: &Context) -> Result<Vec<Row>> {
    let cfg = &ctx.cfg;
    let dyadic = cfg.matrix.is_dyadic();
    let top = cfg.j_max.max(cfg.j_min).max(1);
    let mut rows = Vec::new();

    // element counts: enumeration against the counting formula
    let mut worst = 0u64;
    for j in 0..=top.min(5) {
        let listed = order_basis(&cfg.matrix, cfg.a, j)?.len() as u64;
        let counted = count_elements(&cfg.matrix, cfg.a, j)?;
        worst = worst.max(listed.abs_diff(counted));
        if dyadic {
            worst = worst.max(counted.abs_diff(count_elements_dyadic(cfg.a, j)));
        }
    }
    rows.push(row("element_count", worst == 0, worst as f64, 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (w1, w2) = (rng.random_range(1..10), rng.random_range(1..10));
        let block = TrigBlock {
            first: (rng.random_range(-16..16), rng.random_range(-16..16)),
            coefficients: DMatrix::from_fn(w1, w2, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
        };
        let l1 = w1.div_ceil(2) + rng.random_range(0..3);
        let l2 = w2.div_ceil(2) + rng.random_range(0..3);
        worst = worst.max(grid_parseval_check(&block, l1, l2)?);
    }
    rows.push(row("grid_parseval", worst <= 1e-12, worst, 1e-12));

    let ev = evaluator(ctx)?;
    let theta = 1.0 / cfg.theta_inv;
    let s = match &ev {
        Some(ev) => Some(tail_mass_s(ev, theta, 64)?),
        None => None,
    };

    if dyadic {
        let mut worst: f64 = 0.0;
        for j in 1..=top {
            let geom = MeshGeometry::new(&cfg.matrix, j, cfg.epsilon, (8, 8))?;
            worst = worst.max(mesh_norm(&geom) * (1u64 << j) as f64 / cfg.epsilon);
        }
        rows.push(row("mesh_norm_bound", worst <= 1.0 + 1e-12, worst, 1.0));

        let mut worst: f64 = 0.0;
        for j in 1..=top {
            let b = expansion_bounds(&cfg.matrix, cfg.a, j)?;
            worst = worst.max(b.max_abs() as f64 / ((1i64 << j) * (3 * cfg.a - 1)) as f64);
        }
        rows.push(row("expansion_bounds", worst <= 1.0, worst, 1.0));
    }

    if let (true, Some(s)) = (dyadic, s) {
        // the worked example density eps = 1 / (4 pi (3a - 1))
        let eps = 1.0 / (4.0 * PI * (3 * cfg.a - 1) as f64);
        let mut worst: f64 = 0.0;
        for j in 1..=top {
            let m = example_half_width(j, eps, s);
            let geom = MeshGeometry::new(&cfg.matrix, j, eps, (m, m))?;
            let c = check_assumption(&geom, &expansion_bounds(&cfg.matrix, cfg.a, j)?);
            worst = worst.max(c.delta / c.bound);
        }
        rows.push(row("assumption_example", worst < 1.0, worst, 1.0));

        let m = cfg.half_width.unwrap_or_else(|| {
            let k = example_half_width(top, cfg.epsilon, s);
            (k, k)
        });
        let geom = MeshGeometry::new(&cfg.matrix, top, cfg.epsilon, m)?;
        let c = check_assumption(&geom, &expansion_bounds(&cfg.matrix, cfg.a, top)?);
        let mut r = row("assumption_config", c.holds, c.delta / c.bound, 1.0);
        if !c.holds {
            r.status = Status::Xfail;
        }
        rows.push(r);
    }

    {
        let a = ScalingMatrix2::dyadic();
        let eps = 1.0 / (8.0 * PI);
        let m = example_half_width(2, eps, 1);
        let geom = MeshGeometry::new(&a, 2, eps, (m, m))?;
        let sweep = mz_sweep(&geom, &expansion_bounds(&a, 1, 2)?, 100, cfg.seed)?;
        let ok = sweep.bound.admissible && sweep.violations == 0;
        rows.push(row("sampling_inequality", ok, sweep.violations as f64, 0.0));
    }

    if let (Some(ev), Some(s)) = (&ev, s) {
        let mut levels = [0.3, 0.45, 0.6, 0.75, 0.9, cfg.theta_inv];
        levels.sort_by(f64::total_cmp);
        let counts: Vec<i64> = levels.iter().map(|&t| tail_mass_s(ev, 1.0 / t, 64)).collect::<std::result::Result<_, _>>()?;
        let monotone = counts.windows(2).all(|w| w[0] <= w[1]);
        rows.push(row("tail_mass_monotone", monotone, s as f64, TAIL_MASS_CAP as f64));

        if dyadic && !cfg.boundary {
            let mut worst = f64::INFINITY;
            for j in cfg.scales() {
                let basis = ctx.basis(j)?;
                let m = example_half_width(j, cfg.epsilon, s);
                worst = worst.min(sigma(basis.fourier(), cfg.epsilon, (m, m))?);
            }
            if worst.is_finite() {
                rows.push(row("rate_sufficiency", worst >= cfg.theta_inv, worst, cfg.theta_inv));
            }
        }
    }

    {
        // Haar at J = 2 from eps = 1/2 to eps = 1/3
        let (theta1, c) = (1.01, 1.5);
        let margin = transfer_margin(theta1, c).unwrap_or(0.0);
        let gamma = 1.0 / (0.95 * margin);
        let basis = InteriorBasis::daubechies(1, 2)?;
        let (eps1, eps2) = (0.5, 1.0 / 3.0);
        let opts = RateOptions {
            theta_inv: 1.0 / theta1,
            ..RateOptions::default()
        };
        let m = rate_for_basis(&basis, eps1, (1, 1), &opts, &mut Vec::new())?.half_widths;
        let k = epsilon_transfer(gamma, eps1, eps2, m, theta1, c)?;
        let at_k = sigma(&basis, eps2, k)?;
        let opts = RateOptions {
            theta_inv: 1.0 / gamma,
            ..RateOptions::default()
        };
        let observed = rate_for_basis(&basis, eps2, (1, 1), &opts, &mut Vec::new())?.half_widths;
        let ok = at_k >= 1.0 / gamma && observed.0 <= k.0 && observed.1 <= k.1;
        rows.push(row("epsilon_transfer", ok, at_k, 1.0 / gamma));
    }

    let j = first_scale(ctx);
    let basis = ctx.basis(j)?;
    let m = ctx.half_widths(&basis, j)?;
    {
        let scheme = SamplingScheme::new(cfg.epsilon, m)?;
        let u = assemble(basis.fourier(), &scheme, &AssemblyOptions::default())?.matrix;
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let c = DVector::from_fn(u.ncols(), |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let y = &u * &c;
            let r = gs_solve(&u, y.as_slice(), &ctx.gs_options())?;
            let err = r.coefficients.iter().zip(c.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            worst = worst.max(err);
        }
        rows.push(row("perfect_recovery", worst <= 1e-8, worst, 1e-8));
    }
    {
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..6 {
            let small = (
                (m.0 - rng.random_range(0..3)).max(0),
                (m.1 - rng.random_range(0..3)).max(0),
            );
            let big = (small.0 + rng.random_range(0..3), small.1 + rng.random_range(0..3));
            worst = worst.max(sigma(basis.fourier(), cfg.epsilon, small)? - sigma(basis.fourier(), cfg.epsilon, big)?);
        }
        rows.push(row("sigma_monotone", worst <= 1e-10, worst.max(0.0), 1e-10));
    }
    let tensor = match &basis {
        Basis::Boundary(_) => true,
        Basis::Interior(_) => cfg.family == Family::Haar,
    };
    if tensor {
        let scheme = SamplingScheme::new(cfg.epsilon, m)?;
        let q = quasi_optimality_check(basis.tensor(), &f1(), &scheme, &ctx.gs_options(), SANDWICH_TOLERANCE)?;
        rows.push(row("quasi_optimality", q.holds, q.gs / q.bound, 1.0 + SANDWICH_TOLERANCE));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_format() {
        let rows = [row("x", true, 0.5, 1.0), row("y", false, 2.0, 1.0)];
        assert_eq!(
            format_rows(&rows),
            "name,status,measured,threshold\nx,pass,5.000000e-1,1.000000e0\ny,fail,2.000000e0,1.000000e0\n"
        );
    }

    #[test]
    fn example_half_width_rounds_up() {
        assert_eq!(example_half_width(2, 0.5, 1), 8);
        assert_eq!(example_half_width(1, 1.0 / 3.0, 2), 12);
    }
}
