//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails. Large-scale rows run only with `F2W_ACCEPTANCE_FULL=1`.

use f2w_core::boundary::{BoundaryBasis2D, BoundaryFamily};
use f2w_core::gramian::{assemble, AssemblyOptions, FourierBasis, InteriorBasis, SamplingScheme};
use f2w_core::inequalities::{grid_parseval_check, mz_sweep, tail_mass_s, TrigBlock};
use f2w_core::lattice::{check_assumption, expansion_bounds, ElementKind, MeshGeometry, ScalingMatrix2};
use f2w_core::linalg::smallest_singular_value;
use f2w_core::quadrature::{gauss_panels, richardson_trapezoid_c};
use f2w_core::reconstruct::quasi_optimality_check;
use f2w_core::solver::{gs_solve, rate_for_basis, stable_sampling_rate, GsOptions, LadderRung, RateCurve, RateOptions};
use f2w_core::testfns::f1;
use f2w_core::wavelet::{cascade_evaluate, wavelet_samples, DyadicSamples, FrequencyEvaluator, WaveletFamily};
use f2w_core::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

type Outcome = Result<String, String>;

fn full() -> bool {
    std::env::var("F2W_ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn haar(j: u32) -> InteriorBasis {
    InteriorBasis::daubechies(1, j).unwrap()
}

fn db2(j: u32) -> InteriorBasis {
    InteriorBasis::daubechies(2, j).unwrap()
}

fn boundary(p: usize, j: u32) -> BoundaryBasis2D {
    BoundaryBasis2D::new(Arc::new(BoundaryFamily::new(p, 12).unwrap()), j).unwrap()
}

fn square_rate(bases: &[&dyn FourierBasis], eps: f64) -> RateCurve {
    let ladder: Vec<LadderRung> = bases.iter().map(|&b| LadderRung { basis: b, aspect: (1, 1) }).collect();
    stable_sampling_rate(&ladder, eps, &RateOptions::default()).unwrap()
}

fn totals(curve: &RateCurve) -> Vec<(usize, usize)> {
    curve.points.iter().map(|p| (p.n, p.total)).collect()
}

fn haar_rates() -> Outcome {
    let start = Instant::now();
    let mut scales: Vec<u32> = (1..=4).collect();
    if full() {
        scales.push(5);
    }
    let bases: Vec<InteriorBasis> = scales.iter().map(|&j| haar(j)).collect();
    let refs: Vec<&dyn FourierBasis> = bases.iter().map(|b| b as &dyn FourierBasis).collect();
    let half = totals(&square_rate(&refs, 0.5));
    let third = totals(&square_rate(&refs[1..2], 1.0 / 3.0));
    let mut expected = vec![(4, 25), (16, 81), (64, 289), (256, 1089)];
    if full() {
        expected.push((1024, 4225));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        half == expected && third == vec![(16, 169)] && secs <= if full() { 900.0 } else { 120.0 },
        format!("eps=1/2 {half:?}; eps=1/3 {third:?}; {secs:.1}s"),
    )
}

fn daubechies_rates() -> Outcome {
    let start = Instant::now();
    let mut scales = vec![1, 2];
    if full() {
        scales.extend([3, 4]);
    }
    let bases: Vec<InteriorBasis> = scales.iter().map(|&j| db2(j)).collect();
    let refs: Vec<&dyn FourierBasis> = bases.iter().map(|b| b as &dyn FourierBasis).collect();
    let got = totals(&square_rate(&refs, 1.0 / 7.0));
    let mut expected = vec![(100, 225), (292, 841)];
    if full() {
        expected.extend([(880, 3249), (2908, 12769)]);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        got == expected && (full() || secs <= 600.0),
        format!("eps=1/7 {got:?}; {secs:.1}s"),
    )
}

fn linearity() -> Outcome {
    let bases: Vec<InteriorBasis> = (1..=4).map(haar).collect();
    let refs: Vec<&dyn FourierBasis> = bases.iter().map(|b| b as &dyn FourierBasis).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, eps) in [("haar eps=1/2", 0.5), ("haar eps=1/3", 1.0 / 3.0)] {
        let curve = square_rate(&refs, eps);
        let spread = curve.ratio_spread().unwrap();
        let slope = curve.log_slope().unwrap();
        ok &= spread < 25.0 && (0.9..=1.1).contains(&slope);
        lines.push(format!("{label}: spread {spread:.3}, slope {slope:.3}"));
    }
    // reported, not gated: the Daubechies rows are pre-asymptotic
    let dbs: Vec<InteriorBasis> = (1..=2).map(db2).collect();
    let refs: Vec<&dyn FourierBasis> = dbs.iter().map(|b| b as &dyn FourierBasis).collect();
    let curve = square_rate(&refs, 1.0 / 7.0);
    lines.push(format!(
        "db2 eps=1/7 (info): spread {:.3}, slope {:.3}",
        curve.ratio_spread().unwrap(),
        curve.log_slope().unwrap()
    ));
    ensure(ok, lines.join("; "))
}

fn grid_parseval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (w1, w2) = (rng.random_range(1..12), rng.random_range(1..12));
        let block = TrigBlock {
            first: (rng.random_range(-20..20), rng.random_range(-20..20)),
            coefficients: DMatrix::from_fn(w1, w2, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)),
        };
        let l1 = w1.div_ceil(2) + rng.random_range(0..4);
        let l2 = w2.div_ceil(2) + rng.random_range(0..4);
        worst = worst.max(grid_parseval_check(&block, l1, l2).map_err(|e| e.to_string())?);
    }
    ensure(worst <= 1e-12, format!("200 blocks, max deviation {worst:.2e}"))
}

/// `int g(t) exp(-2 pi i xi t) dt` from cascade samples.
fn sampled_hat(s: &DyadicSamples, xi: f64) -> C64 {
    let h = s.step();
    richardson_trapezoid_c(s.values.len() - 1, h, |i| C64::from_polar(s.values[i], -2.0 * PI * xi * s.x(i)))
}

/// Haar box or wavelet transform by Gauss quadrature on the two halves.
fn haar_hat_quadrature(wavelet: bool, xi: f64) -> C64 {
    let e = |t: f64| C64::from_polar(1.0, -2.0 * PI * xi * t);
    let left = gauss_panels(0.0, 0.5, 4, 12, e);
    let right = gauss_panels(0.5, 1.0, 4, 12, e);
    if wavelet {
        left - right
    } else {
        left + right
    }
}

fn haar_hat_closed(wavelet: bool, xi: f64) -> C64 {
    if xi == 0.0 {
        return C64::new(if wavelet { 0.0 } else { 1.0 }, 0.0);
    }
    let d = C64::new(0.0, 2.0 * PI * xi);
    if wavelet {
        (C64::new(1.0, 0.0) - C64::from_polar(1.0, -PI * xi)).powi(2) / d
    } else {
        (C64::new(1.0, 0.0) - C64::from_polar(1.0, -2.0 * PI * xi)) / d
    }
}

/// `eps F1(eps l1) F2(eps l2)` for a tensor element with one-dimensional transforms `hat`.
fn tensor_entry(kind: ElementKind, j: u32, m: (i64, i64), l: (i64, i64), eps: f64, hat: &dyn Fn(bool, f64) -> C64) -> C64 {
    let (wx, wy) = match kind {
        ElementKind::Scaling => (false, false),
        ElementKind::Wavelet { generator: 1 } => (false, true),
        ElementKind::Wavelet { generator: 2 } => (true, false),
        ElementKind::Wavelet { .. } => (true, true),
    };
    let scale = (1u64 << j) as f64;
    let axis = |w: bool, li: i64, mi: i64| {
        let xi = eps * li as f64 / scale;
        C64::from_polar(scale.powf(-0.5), -2.0 * PI * xi * mi as f64) * hat(w, xi)
    };
    axis(wx, l.0, m.0) * axis(wy, l.1, m.1) * eps
}

fn oracle_entries() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fam = WaveletFamily::daubechies(2).unwrap();
    let phi = cascade_evaluate(&fam, 15).unwrap();
    let psi = wavelet_samples(&fam, &phi).unwrap();
    let db_hat = |w: bool, xi: f64| sampled_hat(if w { &psi } else { &phi }, xi);
    let (mut quad_err, mut closed_err): (f64, f64) = (0.0, 0.0);
    let hb = haar(4);
    let db = db2(3);
    for k in 0..50 {
        let (basis, eps) = if k % 2 == 0 { (&hb, 0.5) } else { (&db, 1.0 / 7.0) };
        let e = basis.elements()[rng.random_range(0..basis.elements().len())];
        let l = (rng.random_range(-40..=40), rng.random_range(-40..=40));
        let got = basis.entry(&e, l, eps).map_err(|e| e.to_string())?;
        if k % 2 == 0 {
            let quad = tensor_entry(e.kind, e.scale, e.translation, l, eps, &haar_hat_quadrature);
            let closed = tensor_entry(e.kind, e.scale, e.translation, l, eps, &haar_hat_closed);
            quad_err = quad_err.max((got - quad).norm());
            closed_err = closed_err.max((got - closed).norm());
        } else {
            let quad = tensor_entry(e.kind, e.scale, e.translation, l, eps, &db_hat);
            quad_err = quad_err.max((got - quad).norm());
        }
    }
    ensure(
        quad_err <= 1e-6 && closed_err <= 1e-10,
        format!("50 entries: quadrature max error {quad_err:.2e}, Haar closed form max error {closed_err:.2e}"),
    )
}

fn example_half_width(j: u32, eps: f64, s: i64) -> i64 {
    ((1i64 << j) as f64 * s as f64 / eps).ceil() as i64
}

fn mz_bound() -> Outcome {
    let a = ScalingMatrix2::dyadic();
    let eps = 1.0 / (8.0 * PI);
    let j = 2;
    let m = example_half_width(j, eps, 1);
    let geom = MeshGeometry::new(&a, j, eps, (m, m)).unwrap();
    let bounds = expansion_bounds(&a, 1, j).unwrap();
    let sweep = mz_sweep(&geom, &bounds, 100, 11).map_err(|e| e.to_string())?;
    ensure(
        sweep.bound.admissible && sweep.bound.constant > 0.0 && sweep.violations == 0,
        format!(
            "M={m}, delta {:.4e}, C {:.4}, {} violations in {} draws, min ratio {:.4}",
            sweep.delta, sweep.bound.constant, sweep.violations, sweep.draws, sweep.min_ratio
        ),
    )
}

fn sandwich() -> Outcome {
    let fam = Arc::new(BoundaryFamily::new(3, 12).unwrap());
    let f = f1();
    let mut lines = Vec::new();
    let mut ok = true;
    for j in fam.coarsest_scale()..=fam.coarsest_scale() + 2 {
        let basis = BoundaryBasis2D::new(fam.clone(), j).unwrap();
        let mut trace = Vec::new();
        let pt = rate_for_basis(&basis, 0.5, (1, 1), &RateOptions::default(), &mut trace).map_err(|e| e.to_string())?;
        let scheme = SamplingScheme::new(0.5, pt.half_widths).unwrap();
        let q = quasi_optimality_check(&basis, &f, &scheme, &GsOptions::default(), 1e-9).map_err(|e| e.to_string())?;
        let factor = q.fourier / q.gs;
        ok &= q.holds && factor >= 3.0;
        lines.push(format!(
            "J={j} M={} best {:.3e} gs {:.3e} bound {:.3e} fourier {:.3e} ({factor:.0}x)",
            pt.half_widths.0, q.best, q.gs, q.bound, q.fourier
        ));
    }
    ensure(ok, lines.join("; "))
}

fn perfect(basis: &dyn FourierBasis, eps: f64, m: i64, rng: &mut ChaCha8Rng) -> f64 {
    let scheme = SamplingScheme::new(eps, (m, m)).unwrap();
    let u = assemble(basis, &scheme, &AssemblyOptions::default()).unwrap().matrix;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let c = DVector::from_fn(u.ncols(), |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &u * &c;
        let r = gs_solve(&u, m.as_slice(), &GsOptions::default()).unwrap();
        let err = r.coefficients.iter().zip(c.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(err);
    }
    worst
}

fn perfectness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lines = Vec::new();
    let mut worst: f64 = 0.0;
    let cases: Vec<(String, Box<dyn FourierBasis>, f64, i64)> = vec![
        ("haar J=1".into(), Box::new(haar(1)), 0.5, 2),
        ("haar J=2".into(), Box::new(haar(2)), 0.5, 4),
        ("haar J=3".into(), Box::new(haar(3)), 0.5, 8),
        ("db2 J=1".into(), Box::new(db2(1)), 1.0 / 7.0, 7),
        ("db2 J=2".into(), Box::new(db2(2)), 1.0 / 7.0, 14),
        ("boundary db3 J=3".into(), Box::new(boundary(3, 3)), 0.5, 16),
    ];
    for (label, basis, eps, m) in &cases {
        let e = perfect(basis.as_ref(), *eps, *m, &mut rng);
        worst = worst.max(e);
        lines.push(format!("{label} {e:.1e}"));
    }
    ensure(worst <= 1e-8, format!("20 draws each: {}", lines.join(", ")))
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let bases: Vec<(Box<dyn FourierBasis>, f64)> = vec![
        (Box::new(haar(2)), 0.5),
        (Box::new(db2(1)), 1.0 / 7.0),
        (Box::new(boundary(2, 2)), 0.5),
    ];
    let mut worst = f64::NEG_INFINITY;
    for k in 0..30 {
        let (basis, eps) = &bases[k % bases.len()];
        let small = (rng.random_range(1..8), rng.random_range(1..8));
        let big = (small.0 + rng.random_range(0..4), small.1 + rng.random_range(0..4));
        let sigma = |m| {
            let scheme = SamplingScheme::new(*eps, m).unwrap();
            smallest_singular_value(&assemble(basis.as_ref(), &scheme, &AssemblyOptions::default()).unwrap().matrix).unwrap()
        };
        worst = worst.max(sigma(small) - sigma(big));
    }
    ensure(worst <= 1e-10, format!("30 nested pairs, largest decrease {worst:.2e}"))
}

fn assumption() -> Outcome {
    let a = ScalingMatrix2::dyadic();
    let eps = 1.0 / (8.0 * PI);
    let s = tail_mass_s(&FrequencyEvaluator::new(WaveletFamily::haar()), 1.0 / 0.45, 64).unwrap();
    let mut ok = true;
    let mut margins = Vec::new();
    for j in 1..=6 {
        let m = example_half_width(j, eps, s);
        let geom = MeshGeometry::new(&a, j, eps, (m, m)).unwrap();
        let c = check_assumption(&geom, &expansion_bounds(&a, 1, j).unwrap());
        ok &= c.holds;
        margins.push(format!("J={j} {:.3}", c.delta / c.bound));
    }
    // constructed violation: unit sample spacing
    let m = example_half_width(3, 1.0, s);
    let geom = MeshGeometry::new(&a, 3, 1.0, (m, m)).unwrap();
    let bad = check_assumption(&geom, &expansion_bounds(&a, 1, 3).unwrap());
    ensure(
        ok && !bad.holds,
        format!(
            "S={s}, delta/bound {}; eps=1 flagged: {}",
            margins.join(", "),
            !bad.holds
        ),
    )
}

fn main() {
    // libtest passes flags such as --nocapture or filters; they do not apply here
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("haar sampling rates", haar_rates),
        ("daubechies sampling rates", daubechies_rates),
        ("linear growth of the rate", linearity),
        ("grid parseval identity", grid_parseval),
        ("gramian entries against oracles", oracle_entries),
        ("sampling inequality on random polynomials", mz_bound),
        ("quasi-optimality and gain over fourier", sandwich),
        ("perfect recovery", perfectness),
        ("monotone in the sample set", monotonicity),
        ("mesh norm assumption", assumption),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    if !full() {
        println!("large rows skipped; set F2W_ACCEPTANCE_FULL=1 to include them");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
