//! Closed-form test functions on the unit square and their Fourier transforms.
//!
//! Functions are separable products of one-dimensional exponential polynomials
//! `sum_k c_k x^{n_k} exp(a_k x)` on `[0, 1]`, extended by zero.

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_panels};
use crate::C64;
use std::f64::consts::PI;

/// `int_0^1 x^n exp(z x) dx`.
pub fn exp_moment(n: u32, z: C64) -> C64 {
    if z.norm() < n as f64 + 2.0 {
        // power series sum_k z^k / (k! (n + k + 1))
        let mut term = C64::new(1.0, 0.0);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..200u32 {
            let add = term / (n + k + 1) as f64;
            acc += add;
            if add.norm() < 1e-18 * acc.norm().max(1e-300) {
                break;
            }
            term = term * z / (k + 1) as f64;
        }
        acc
    } else {
        let ez = z.exp();
        let mut acc = (ez - 1.0) / z;
        for k in 1..=n {
            acc = (ez - acc * k as f64) / z;
        }
        acc
    }
}

/// Real-valued exponential polynomial on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPoly {
    terms: Vec<(C64, u32, C64)>,
}

impl ExpPoly {
    /// Terms `(c, n, a)` meaning `c x^n exp(a x)`; the imaginary parts must cancel.
    pub fn new(terms: Vec<(C64, u32, C64)>) -> Self {
        ExpPoly { terms }
    }

    /// Polynomial with real ascending coefficients.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        ExpPoly::new(
            coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(n, c)| (C64::new(*c, 0.0), n as u32, C64::new(0.0, 0.0)))
                .collect(),
        )
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|(c, n, a)| c * x.powi(*n as i32) * (a * x).exp())
            .sum::<C64>()
            .re
    }

    /// `int_0^1 f(x) exp(-2 pi i w x) dx`.
    pub fn fourier(&self, w: f64) -> C64 {
        let shift = C64::new(0.0, -2.0 * PI * w);
        self.terms.iter().map(|(c, n, a)| c * exp_moment(*n, a + shift)).sum()
    }

    /// `int_0^1 f g dx` for real-valued `f, g`.
    pub fn inner(&self, other: &ExpPoly) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for (c, n, a) in &self.terms {
            for (d, m, b) in &other.terms {
                acc += c * d.conj() * exp_moment(n + m, a + b.conj());
            }
        }
        acc.re
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }
}

/// Product `g(x) h(y)` supported on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableFunction {
    pub name: String,
    pub x: ExpPoly,
    pub y: ExpPoly,
}

impl SeparableFunction {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.x.eval(x) * self.y.eval(y)
    }

    pub fn fourier(&self, w: [f64; 2]) -> C64 {
        self.x.fourier(w[0]) * self.y.fourier(w[1])
    }

    pub fn norm_sq(&self) -> f64 {
        self.x.norm_sq() * self.y.norm_sq()
    }
}

/// `f1(x, y) = cos^2(x) exp(-y)`.
pub fn f1() -> SeparableFunction {
    let q = C64::new(0.25, 0.0);
    SeparableFunction {
        name: "f1".into(),
        x: ExpPoly::new(vec![
            (C64::new(0.5, 0.0), 0, C64::new(0.0, 0.0)),
            (q, 0, C64::new(0.0, 2.0)),
            (q, 0, C64::new(0.0, -2.0)),
        ]),
        y: ExpPoly::new(vec![(C64::new(1.0, 0.0), 0, C64::new(-1.0, 0.0))]),
    }
}

/// `f2(x, y) = (1 + x^2)(2y - 1)`.
pub fn f2() -> SeparableFunction {
    SeparableFunction {
        name: "f2".into(),
        x: ExpPoly::polynomial(&[1.0, 0.0, 1.0]),
        y: ExpPoly::polynomial(&[-1.0, 2.0]),
    }
}

/// Looks up a named test function.
pub fn by_name(name: &str) -> Result<SeparableFunction> {
    match name {
        "f1" => Ok(f1()),
        "f2" => Ok(f2()),
        _ => Err(Error::InvalidArgument(format!("unknown test function {name:?}"))),
    }
}

/// Fourier transform of a general function on `[lo, hi]^2` by tensor
/// Gauss-Legendre panels; the panel count doubles until two successive values
/// agree to `tol`.
pub fn fourier_by_quadrature(
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    lo: f64,
    hi: f64,
    w: [f64; 2],
    tol: f64,
) -> Result<C64> {
    let order = 12;
    let (x, wt) = gauss_legendre(order);
    let eval = |panels: usize| {
        let h = (hi - lo) / panels as f64;
        let nodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|p| {
                let mid = lo + (p as f64 + 0.5) * h;
                x.iter().zip(&wt).map(move |(xi, wi)| (mid + 0.5 * h * xi, wi * 0.5 * h))
            })
            .collect();
        let mut acc = C64::new(0.0, 0.0);
        for &(u, wu) in &nodes {
            let eu = C64::from_polar(wu, -2.0 * PI * w[0] * u);
            for &(v, wv) in &nodes {
                acc += eu * C64::from_polar(wv, -2.0 * PI * w[1] * v) * f(u, v);
            }
        }
        acc
    };
    let mut panels = 2 + ((hi - lo) * w[0].abs().max(w[1].abs())) as usize;
    let mut prev = eval(panels);
    for _ in 0..8 {
        panels *= 2;
        let next = eval(panels);
        if (next - prev).norm() <= tol * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConvergence {
        what: "Fourier quadrature",
        iterations: 8,
        residual: (eval(panels) - prev).norm(),
    })
}

/// `int_0^1 g(x) dx` by Gauss-Legendre panels.
pub fn inner_1d(g: &dyn Fn(f64) -> C64, panels: usize) -> C64 {
    gauss_panels(0.0, 1.0, panels, 10, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_both_branches() {
        for n in 0..5 {
            for z in [C64::new(0.1, 0.2), C64::new(-3.0, 4.0), C64::new(0.0, 40.0), C64::new(0.0, 0.0)] {
                let direct = inner_1d(&|x| x.powi(n as i32) * (z * x).exp(), 200);
                assert!((exp_moment(n, z) - direct).norm() < 1e-12, "n={n} z={z}");
            }
        }
    }

    #[test]
    fn f1_closed_forms() {
        let f = f1();
        assert!((f.eval(0.3, 0.7) - 0.3f64.cos().powi(2) * (-0.7f64).exp()).abs() < 1e-15);
        // int_0^1 cos^4 = 3/8 + sin(2)/4 + sin(4)/32
        let nx = 3.0 / 8.0 + 2f64.sin() / 4.0 + 4f64.sin() / 32.0;
        let ny = (1.0 - (-2f64).exp()) / 2.0;
        assert!((f.norm_sq() - nx * ny).abs() < 1e-14);
        for w in [[0.0, 0.0], [1.5, -2.0], [10.0, 3.3]] {
            let q = fourier_by_quadrature(&|x, y| f.eval(x, y), 0.0, 1.0, w, 1e-13).unwrap();
            assert!((q - f.fourier(w)).norm() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn f2_closed_forms() {
        let f = f2();
        assert_eq!(f.eval(0.5, 1.0), 1.25);
        // int (1+x^2)^2 = 1 + 2/3 + 1/5, int (2y-1)^2 = 1/3
        assert!((f.norm_sq() - (28.0 / 15.0) / 3.0).abs() < 1e-14);
        assert!(f.fourier([0.0, 0.0]).norm() < 1e-15);
    }

    #[test]
    fn unknown_name() {
        assert!(by_name("f3").is_err());
    }
}
