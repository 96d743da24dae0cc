//! Integer scaling matrices, ordering of the interior reconstruction basis and
//! the geometry of the transformed sampling lattice.
//!
//! A scaling matrix `A = [[l1, l2], [l3, l4]]` acts on column vectors; `A^j`
//! is written `[[l1^(j), l2^(j)], [l3^(j), l4^(j)]]`. Sampling nodes are the
//! points `x_l = B l` of the lattice generated by `B = eps (A^-J)^T`.

use crate::error::{Error, Result};

/// Largest exponent for which powers are cached.
const MAX_CACHED_POWER: usize = 62;

/// An integer power `A^j` of a scaling matrix, entries row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatrixPower {
    pub entries: [i64; 4],
    pub det: i64,
}

impl MatrixPower {
    pub const IDENTITY: MatrixPower = MatrixPower {
        entries: [1, 0, 0, 1],
        det: 1,
    };

    /// Row sums `(l1 + l2, l3 + l4)`; they bound the wavelet translation ranges.
    pub fn row_sums(&self) -> (i64, i64) {
        let [a, b, c, d] = self.entries;
        (a + b, c + d)
    }

    /// Column sums, i.e. `(A^j)^T (1, 1)`.
    pub fn col_sums(&self) -> (i64, i64) {
        let [a, b, c, d] = self.entries;
        (a + c, b + d)
    }

    /// `((A^j)^-1)^T` as a floating point matrix, row-major.
    pub fn inverse_transpose(&self) -> [[f64; 2]; 2] {
        let [a, b, c, d] = self.entries.map(|v| v as f64);
        let det = self.det as f64;
        // inverse = [[d, -b], [-c, a]] / det, transposed
        [[d / det, -c / det], [-b / det, a / det]]
    }

    fn checked_mul(&self, other: &MatrixPower) -> Option<MatrixPower> {
        let [a, b, c, d] = self.entries;
        let [e, f, g, h] = other.entries;
        let m = |x: i64, y: i64, z: i64, w: i64| x.checked_mul(y)?.checked_add(z.checked_mul(w)?);
        Some(MatrixPower {
            entries: [
                m(a, e, b, g)?,
                m(a, f, b, h)?,
                m(c, e, d, g)?,
                m(c, f, d, h)?,
            ],
            det: self.det.checked_mul(other.det)?,
        })
    }
}

/// A 2x2 expanding integer matrix with nonnegative entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalingMatrix2 {
    entries: [i64; 4],
    powers: Vec<MatrixPower>,
}

impl ScalingMatrix2 {
    /// Validates nonnegativity and that both eigenvalues have modulus above one,
    /// then caches every power that fits in `i64`.
    pub fn new(l1: i64, l2: i64, l3: i64, l4: i64) -> Result<Self> {
        let entries = [l1, l2, l3, l4];
        let invalid = |reason: &str| Error::InvalidScalingMatrix {
            entries,
            reason: reason.to_string(),
        };
        if entries.iter().any(|&v| v < 0) {
            return Err(invalid("entries must be nonnegative"));
        }
        let det = l1 as i128 * l4 as i128 - l2 as i128 * l3 as i128;
        if det == 0 {
            return Err(invalid("matrix is singular"));
        }
        let tr = (l1 + l4) as f64;
        let detf = det as f64;
        let disc = tr * tr - 4.0 * detf;
        let expanding = if disc >= 0.0 {
            let s = disc.sqrt();
            ((tr + s) / 2.0).abs() > 1.0 && ((tr - s) / 2.0).abs() > 1.0
        } else {
            detf > 1.0
        };
        if !expanding {
            return Err(invalid("an eigenvalue has modulus at most one"));
        }
        let det = i64::try_from(det).map_err(|_| Error::Overflow("determinant"))?;
        let base = MatrixPower { entries, det };
        let mut powers = vec![MatrixPower::IDENTITY];
        while powers.len() <= MAX_CACHED_POWER {
            match powers.last().unwrap().checked_mul(&base) {
                Some(next) => powers.push(next),
                None => break,
            }
        }
        Ok(ScalingMatrix2 { entries, powers })
    }

    /// The dyadic matrix `diag(2, 2)`.
    pub fn dyadic() -> Self {
        Self::new(2, 0, 0, 2).expect("diag(2,2) is expanding")
    }

    pub fn entries(&self) -> [i64; 4] {
        self.entries
    }

    pub fn det(&self) -> i64 {
        self.powers[1].det
    }

    pub fn is_dyadic(&self) -> bool {
        self.entries == [2, 0, 0, 2]
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries[1] == 0 && self.entries[2] == 0
    }

    /// `A^j`, or an overflow error when an entry leaves `i64`.
    pub fn power(&self, j: u32) -> Result<MatrixPower> {
        self.powers
            .get(j as usize)
            .copied()
            .ok_or(Error::Overflow("matrix power"))
    }
}

/// Number of elements of the reconstruction basis up to scale `J`:
/// `(2a-1)^2 + (|det A| - 1) sum_{j<J} (a(r1_j + 1) - 1)(a(r2_j + 1) - 1)`,
/// with `r1_j, r2_j` the row sums of `A^j`.
pub fn count_elements(a_mat: &ScalingMatrix2, a: i64, scale: u32) -> Result<u64> {
    if a < 1 {
        return Err(Error::InvalidArgument(format!("support width a={a} must be positive")));
    }
    let a = a as i128;
    let mut total: i128 = (2 * a - 1) * (2 * a - 1);
    let gens = (a_mat.det().abs() - 1) as i128;
    for j in 0..scale {
        let (r1, r2) = a_mat.power(j)?.row_sums();
        let n1 = a * (r1 as i128 + 1) - 1;
        let n2 = a * (r2 as i128 + 1) - 1;
        total = n1
            .checked_mul(n2)
            .and_then(|v| v.checked_mul(gens))
            .and_then(|v| v.checked_add(total))
            .ok_or(Error::Overflow("element count"))?;
    }
    u64::try_from(total).map_err(|_| Error::Overflow("element count"))
}

/// Closed form of [`count_elements`] for `A = diag(2, 2)`:
/// `(2a-1)^2 + 3((a-1)^2 J + 2a(a-1)(2^J - 1) + a^2 (4^J - 1)/3)`.
pub fn count_elements_dyadic(a: i64, scale: u32) -> u64 {
    let a = a as u128;
    let j = scale as u128;
    let p2 = 1u128 << scale;
    let p4 = p2 * p2;
    let sum = (a - 1) * (a - 1) * j + 2 * a * (a - 1) * (p2 - 1) + a * a * (p4 - 1) / 3;
    ((2 * a - 1) * (2 * a - 1) + 3 * sum) as u64
}

/// Role of an element in the reconstruction basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Scaling,
    /// Wavelet generated by the `generator`-th mother wavelet, `1..|det A|`.
    Wavelet { generator: u32 },
}

/// One element of the ordered basis with its 1-based position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub kind: ElementKind,
    pub scale: u32,
    pub translation: (i64, i64),
    pub position: usize,
}

/// Enumerates the basis in the canonical order: scaling functions first, then
/// wavelets by increasing scale, then generator, then translation with the first
/// coordinate outermost.
pub fn order_basis(a_mat: &ScalingMatrix2, a: i64, scale: u32) -> Result<Vec<BasisIndex>> {
    let expected = count_elements(a_mat, a, scale)?;
    let mut out = Vec::with_capacity(expected as usize);
    let mut push = |kind, scale, m1, m2| {
        let position = out.len() + 1;
        out.push(BasisIndex {
            kind,
            scale,
            translation: (m1, m2),
            position,
        });
    };
    for m1 in (1 - a)..a {
        for m2 in (1 - a)..a {
            push(ElementKind::Scaling, 0, m1, m2);
        }
    }
    let gens = a_mat.det().unsigned_abs() as u32;
    for j in 0..scale {
        let (r1, r2) = a_mat.power(j)?.row_sums();
        let hi1 = a.checked_mul(r1).ok_or(Error::Overflow("translation range"))?;
        let hi2 = a.checked_mul(r2).ok_or(Error::Overflow("translation range"))?;
        for generator in 1..gens {
            for m1 in (1 - a)..hi1 {
                for m2 in (1 - a)..hi2 {
                    push(ElementKind::Wavelet { generator }, j, m1, m2);
                }
            }
        }
    }
    debug_assert_eq!(out.len() as u64, expected);
    Ok(out)
}

/// Inclusive ranges `[lower, upper]` of the scale-`J` translates `l` with
/// `<r_j, phi_{J,l}> != 0` for some basis element `r_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionBounds {
    pub lower: (i64, i64),
    pub upper: (i64, i64),
}

impl ExpansionBounds {
    pub fn max_abs(&self) -> i64 {
        [self.lower.0, self.lower.1, self.upper.0, self.upper.1]
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap()
    }

    pub fn contains(&self, other: &ExpansionBounds) -> bool {
        self.lower.0 <= other.lower.0
            && self.lower.1 <= other.lower.1
            && self.upper.0 >= other.upper.0
            && self.upper.1 >= other.upper.1
    }

    /// The wider range quoted for `diag(2, 2)` in the worked example:
    /// upper `2^J (3a - 1)`, lower `-a + 2^J (1 - a)`.
    pub fn dyadic_reference(a: i64, scale: u32) -> Self {
        let p = 1i64 << scale;
        let up = p * (3 * a - 1);
        let lo = -a + p * (1 - a);
        ExpansionBounds {
            lower: (lo, lo),
            upper: (up, up),
        }
    }
}

/// Translation bounds from support geometry. A generator supported in
/// `[0, a]^2` gives `supp r = A^-j([0,a]^2 + m)`, and `phi_{J,l}` overlaps it only if
/// `l` lies in the open set `A^{J-j}([0,a]^2 + m) - [0,a]^2`. Because every entry
/// of `A^{J-j}` is nonnegative, the extreme translations give the extreme `l`.
pub fn expansion_bounds(a_mat: &ScalingMatrix2, a: i64, scale: u32) -> Result<ExpansionBounds> {
    if a < 1 {
        return Err(Error::InvalidArgument(format!("support width a={a} must be positive")));
    }
    let ov = || Error::Overflow("expansion bounds");
    let a128 = a as i128;
    let mut lower = (i128::MAX, i128::MAX);
    let mut upper = (i128::MIN, i128::MIN);
    // (scale of the element, inclusive translation range per axis)
    let mut groups = vec![(0u32, (1 - a128, a128 - 1), (1 - a128, a128 - 1))];
    for j in 0..scale {
        let (r1, r2) = a_mat.power(j)?.row_sums();
        groups.push((j, (1 - a128, a128 * r1 as i128 - 1), (1 - a128, a128 * r2 as i128 - 1)));
    }
    for (j, (lo1, hi1), (lo2, hi2)) in groups {
        let p = a_mat.power(scale - j)?.entries.map(|v| v as i128);
        let min1 = p[0] * lo1 + p[1] * lo2;
        let min2 = p[2] * lo1 + p[3] * lo2;
        let max1 = p[0] * (hi1 + a128) + p[1] * (hi2 + a128);
        let max2 = p[2] * (hi1 + a128) + p[3] * (hi2 + a128);
        lower.0 = lower.0.min(min1 - a128 + 1);
        lower.1 = lower.1.min(min2 - a128 + 1);
        upper.0 = upper.0.max(max1 - 1);
        upper.1 = upper.1.max(max2 - 1);
    }
    let cv = |v: i128| i64::try_from(v).map_err(|_| ov());
    Ok(ExpansionBounds {
        lower: (cv(lower.0)?, cv(lower.1)?),
        upper: (cv(upper.0)?, cv(upper.1)?),
    })
}

/// Transformed sampling lattice `x_l = eps (A^-J)^T l`, `|l_i| <= M_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshGeometry {
    pub epsilon: f64,
    pub scale: u32,
    pub half_widths: (i64, i64),
    /// Lattice generator `eps (A^-J)^T`, row-major.
    pub generator: [[f64; 2]; 2],
}

impl MeshGeometry {
    pub fn new(a_mat: &ScalingMatrix2, scale: u32, epsilon: f64, half_widths: (i64, i64)) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon={epsilon} must be positive")));
        }
        if half_widths.0 < 0 || half_widths.1 < 0 {
            return Err(Error::InvalidArgument("half-widths must be nonnegative".into()));
        }
        let it = a_mat.power(scale)?.inverse_transpose();
        Ok(MeshGeometry {
            epsilon,
            scale,
            half_widths,
            generator: [
                [epsilon * it[0][0], epsilon * it[0][1]],
                [epsilon * it[1][0], epsilon * it[1][1]],
            ],
        })
    }

    pub fn node(&self, l: (i64, i64)) -> [f64; 2] {
        apply(&self.generator, [l.0 as f64, l.1 as f64])
    }

    /// Area of one lattice cell, `eps^2 |det A^-J|`.
    pub fn cell_measure(&self) -> f64 {
        let g = &self.generator;
        (g[0][0] * g[1][1] - g[0][1] * g[1][0]).abs()
    }

    /// Measure of the sampling region `B([-M1, M1] x [-M2, M2])`.
    pub fn region_measure(&self) -> f64 {
        4.0 * self.half_widths.0 as f64 * self.half_widths.1 as f64 * self.cell_measure()
    }
}

fn apply(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Lagrange-Gauss reduction of the lattice basis given by the columns of `g`.
fn reduced_basis(g: &[[f64; 2]; 2]) -> ([f64; 2], [f64; 2]) {
    let mut b1 = [g[0][0], g[1][0]];
    let mut b2 = [g[0][1], g[1][1]];
    let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
    if dot(b1, b1) > dot(b2, b2) {
        std::mem::swap(&mut b1, &mut b2);
    }
    for _ in 0..200 {
        let mu = (dot(b1, b2) / dot(b1, b1)).round();
        b2 = [b2[0] - mu * b1[0], b2[1] - mu * b1[1]];
        if dot(b2, b2) >= dot(b1, b1) {
            break;
        }
        std::mem::swap(&mut b1, &mut b2);
    }
    (b1, b2)
}

/// Sup-norm distance from `x` to the nearest lattice point, given the reduced basis.
fn lattice_distance(x: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> f64 {
    let det = b1[0] * b2[1] - b2[0] * b1[1];
    let t1 = (x[0] * b2[1] - b2[0] * x[1]) / det;
    let t2 = (b1[0] * x[1] - x[0] * b1[1]) / det;
    let (f1, f2) = (t1.floor() as i64, t2.floor() as i64);
    let mut best = f64::INFINITY;
    for k1 in (f1 - 2)..=(f1 + 3) {
        for k2 in (f2 - 2)..=(f2 + 3) {
            let q = [
                k1 as f64 * b1[0] + k2 as f64 * b2[0],
                k1 as f64 * b1[1] + k2 as f64 * b2[1],
            ];
            best = best.min((x[0] - q[0]).abs().max((x[1] - q[1]).abs()));
        }
    }
    best
}

/// Mesh norm `delta = sup_x min_l rho(x_l, x)` under the lattice quotient metric
/// `rho(x, y) = min_k ||x - y + B k||_inf`. Because every node differs from every
/// other by a lattice vector, `delta` is the sup-norm covering radius of the lattice
/// as soon as the region holds a full cell. The radius is the largest vertex value
/// of the piecewise-linear distance function; vertices are found by intersecting
/// triples of the affine pieces `s (x_c - q_c) = r` around one reduced cell.
pub fn mesh_norm(geom: &MeshGeometry) -> f64 {
    let (m1, m2) = geom.half_widths;
    if m1 == 0 || m2 == 0 {
        // Degenerate grid: the quotient region collapses and no point is farther
        // from a node than the nodes themselves.
        return 0.0;
    }
    let (b1, b2) = reduced_basis(&geom.generator);
    let mut points = Vec::with_capacity(36);
    for k1 in -2..=3 {
        for k2 in -2..=3 {
            points.push([
                k1 as f64 * b1[0] + k2 as f64 * b2[0],
                k1 as f64 * b1[1] + k2 as f64 * b2[1],
            ]);
        }
    }
    // piece: s * x_c - r = s * q_c
    let mut pieces = Vec::with_capacity(points.len() * 4);
    for q in &points {
        for c in 0..2 {
            for s in [-1.0, 1.0] {
                let mut row = [0.0; 3];
                row[c] = s;
                row[2] = -1.0;
                pieces.push((row, s * q[c]));
            }
        }
    }
    let scale = b1[0].abs().max(b1[1].abs()).max(b2[0].abs()).max(b2[1].abs());
    let det = b1[0] * b2[1] - b2[0] * b1[1];
    let mut best: f64 = 0.0;
    for i in 0..pieces.len() {
        for j in (i + 1)..pieces.len() {
            for k in (j + 1)..pieces.len() {
                let Some(sol) = solve3([pieces[i].0, pieces[j].0, pieces[k].0], [pieces[i].1, pieces[j].1, pieces[k].1])
                else {
                    continue;
                };
                let (x, r) = ([sol[0], sol[1]], sol[2]);
                if !(r >= 0.0) || r <= best {
                    continue;
                }
                // stay within one reduced cell (with margin)
                let t1 = (x[0] * b2[1] - b2[0] * x[1]) / det;
                let t2 = (b1[0] * x[1] - x[0] * b1[1]) / det;
                if !(-1e-9..=1.0 + 1e-9).contains(&t1) || !(-1e-9..=1.0 + 1e-9).contains(&t2) {
                    continue;
                }
                let d = lattice_distance(x, b1, b2);
                if (d - r).abs() <= 1e-12 * scale {
                    best = best.max(d);
                }
            }
        }
    }
    best
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}

/// Mesh norm by exhaustive evaluation on an `(R+1) x (R+1)` grid covering the
/// sampling region. Used as a cross-check of [`mesh_norm`].
pub fn mesh_norm_dense(geom: &MeshGeometry, resolution: usize) -> Result<f64> {
    let (m1, m2) = geom.half_widths;
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be positive".into()));
    }
    let step1 = 2.0 * m1 as f64 / resolution as f64;
    let step2 = 2.0 * m2 as f64 / resolution as f64;
    if step1 > 1.0 || step2 > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "grid step ({step1}, {step2}) is coarser than the node spacing"
        )));
    }
    if m1 == 0 || m2 == 0 {
        return Ok(0.0);
    }
    let (b1, b2) = reduced_basis(&geom.generator);
    let mut best: f64 = 0.0;
    for i in 0..=resolution {
        let t1 = -(m1 as f64) + i as f64 * step1;
        for k in 0..=resolution {
            let t2 = -(m2 as f64) + k as f64 * step2;
            let x = apply(&geom.generator, [t1, t2]);
            best = best.max(lattice_distance(x, b1, b2));
        }
    }
    Ok(best)
}

/// Measures of the cells `V_l`, `l` in row-major order. The cells are the images
/// under `B` of the integer-grid cells `[l - 1/2, l + 1/2]` clipped to the box
/// `[-M1, M1] x [-M2, M2]`, so boundary nodes own half or quarter cells.
pub fn voronoi_measures(geom: &MeshGeometry) -> Vec<f64> {
    let (m1, m2) = geom.half_widths;
    let cell = geom.cell_measure();
    let width = |l: i64, m: i64| -> f64 {
        if m == 0 {
            0.0
        } else if l.abs() == m {
            0.5
        } else {
            1.0
        }
    };
    let mut out = Vec::with_capacity(((2 * m1 + 1) * (2 * m2 + 1)) as usize);
    for l1 in -m1..=m1 {
        for l2 in -m2..=m2 {
            out.push(width(l1, m1) * width(l2, m2) * cell);
        }
    }
    out
}

/// Outcome of checking `delta < log(1/sqrt(mu) + 1) / (4 pi max|L_i|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionCheck {
    pub holds: bool,
    pub delta: f64,
    pub bound: f64,
    pub region_measure: f64,
    pub max_translation: i64,
}

/// Checks the mesh-norm assumption with `mu` the measure of the sampling region
/// and `L` the expansion bounds.
pub fn check_assumption(geom: &MeshGeometry, bounds: &ExpansionBounds) -> AssumptionCheck {
    let delta = mesh_norm(geom);
    let mu = geom.region_measure();
    let lmax = bounds.max_abs();
    let bound = if mu == 0.0 {
        f64::INFINITY
    } else {
        (1.0 / mu.sqrt() + 1.0).ln() / (4.0 * std::f64::consts::PI * lmax.max(1) as f64)
    };
    AssumptionCheck {
        holds: delta < bound,
        delta,
        bound,
        region_measure: mu,
        max_translation: lmax,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_expanding() {
        assert!(ScalingMatrix2::new(1, 0, 0, 2).is_err());
        assert!(ScalingMatrix2::new(1, 1, 0, 1).is_err());
        assert!(ScalingMatrix2::new(2, -1, 0, 2).is_err());
        assert!(ScalingMatrix2::new(2, 1, 0, 2).is_ok());
        assert!(ScalingMatrix2::new(1, 1, 1, 2).is_err());
        assert!(ScalingMatrix2::new(2, 1, 1, 3).is_ok());
    }

    #[test]
    fn dyadic_powers() {
        let a = ScalingMatrix2::dyadic();
        let p = a.power(3).unwrap();
        assert_eq!(p.entries, [8, 0, 0, 8]);
        assert_eq!(p.det, 64);
        assert!(a.power(70).is_err());
    }

    #[test]
    fn table_counts() {
        let a = ScalingMatrix2::dyadic();
        let haar: Vec<u64> = (0..5).map(|j| count_elements(&a, 1, j).unwrap()).collect();
        assert_eq!(haar, vec![1, 4, 16, 64, 256]);
        let db: Vec<u64> = (1..5).map(|j| count_elements(&a, 3, j).unwrap()).collect();
        assert_eq!(db, vec![100, 292, 880, 2908]);
    }

    #[test]
    fn ordering_starts_with_scaling() {
        let a = ScalingMatrix2::dyadic();
        let b = order_basis(&a, 1, 2).unwrap();
        assert_eq!(b.len(), 16);
        assert_eq!(b[0].kind, ElementKind::Scaling);
        assert_eq!(b[1].kind, ElementKind::Wavelet { generator: 1 });
        assert_eq!(b[4].scale, 1);
        assert_eq!(b[4].translation, (0, 0));
        assert_eq!(b[5].translation, (0, 1));
        assert!(b.iter().enumerate().all(|(i, e)| e.position == i + 1));
    }

    #[test]
    fn unit_lattice_mesh_norm() {
        let a = ScalingMatrix2::dyadic();
        let g = MeshGeometry::new(&a, 0, 1.0, (3, 3)).unwrap();
        assert!((mesh_norm(&g) - 0.5).abs() < 1e-14);
        let g = MeshGeometry::new(&a, 2, 0.5, (3, 3)).unwrap();
        assert!((mesh_norm(&g) - 0.5 / 8.0).abs() < 1e-14);
        let g = MeshGeometry::new(&a, 2, 0.5, (0, 0)).unwrap();
        assert_eq!(mesh_norm(&g), 0.0);
    }

    #[test]
    fn sheared_mesh_norm_matches_dense() {
        for (mat, j) in [((2, 1, 0, 2), 1), ((2, 1, 1, 3), 2), ((3, 1, 1, 2), 1), ((2, 0, 0, 3), 2)] {
            let a = ScalingMatrix2::new(mat.0, mat.1, mat.2, mat.3).unwrap();
            let g = MeshGeometry::new(&a, j, 0.5, (4, 4)).unwrap();
            let exact = mesh_norm(&g);
            let dense = mesh_norm_dense(&g, 512).unwrap();
            let step = 8.0 / 512.0 * g.generator.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())) * 2.0;
            assert!(dense <= exact + 1e-12, "{mat:?}: dense {dense} exact {exact}");
            assert!(exact - dense <= step, "{mat:?}: dense {dense} exact {exact}");
        }
    }

    #[test]
    fn dense_rejects_coarse_grid() {
        let a = ScalingMatrix2::dyadic();
        let g = MeshGeometry::new(&a, 1, 0.5, (10, 10)).unwrap();
        assert!(mesh_norm_dense(&g, 8).is_err());
    }

    #[test]
    fn voronoi_example() {
        let a = ScalingMatrix2::dyadic();
        let g = MeshGeometry::new(&a, 1, 0.5, (3, 2)).unwrap();
        let v = voronoi_measures(&g);
        assert!(v.iter().all(|&m| m <= 1.0 / 16.0 + 1e-16));
        let s: f64 = v.iter().sum();
        assert!((s - g.region_measure()).abs() < 1e-14);
        let g = MeshGeometry::new(&a, 0, 1.0, (2, 2)).unwrap();
        assert_eq!(voronoi_measures(&g)[12], 1.0);
    }

    #[test]
    fn bounds_contained_in_reference() {
        for a in 1..5 {
            for j in 0..6 {
                let b = expansion_bounds(&ScalingMatrix2::dyadic(), a, j).unwrap();
                assert!(ExpansionBounds::dyadic_reference(a, j).contains(&b), "a={a} J={j}");
            }
        }
        // Haar, J=1: only phi_{1,(0|1, 0|1)} meet the four basis elements
        let b = expansion_bounds(&ScalingMatrix2::dyadic(), 1, 1).unwrap();
        assert_eq!(b, ExpansionBounds { lower: (0, 0), upper: (1, 1) });
    }

    /// Brute force for box generators: `chi_[0,1]^2` is refinable for any diagonal
    /// dilation, so every element is a sum of scale-J boxes inside its own box.
    #[test]
    fn bounds_brute_force_diag_2_3() {
        let a = ScalingMatrix2::new(2, 0, 0, 3).unwrap();
        for scale in 0..4 {
            let bounds = expansion_bounds(&a, 1, scale).unwrap();
            let pj = a.power(scale).unwrap().entries;
            let mut lo = (i64::MAX, i64::MAX);
            let mut hi = (i64::MIN, i64::MIN);
            for e in order_basis(&a, 1, scale).unwrap() {
                let pe = a.power(e.scale).unwrap().entries;
                // element box in units of the scale-J grid
                let (s1, s2) = (pj[0] / pe[0], pj[3] / pe[3]);
                let (x0, y0) = (e.translation.0 * s1, e.translation.1 * s2);
                lo = (lo.0.min(x0), lo.1.min(y0));
                hi = (hi.0.max(x0 + s1 - 1), hi.1.max(y0 + s2 - 1));
            }
            let brute = ExpansionBounds { lower: lo, upper: hi };
            assert!(bounds.contains(&brute), "J={scale}: {bounds:?} vs {brute:?}");
        }
    }

    proptest! {
        #[test]
        fn count_matches_closed_form(a in 1i64..12, j in 0u32..12) {
            let n = count_elements(&ScalingMatrix2::dyadic(), a, j).unwrap();
            prop_assert_eq!(n, count_elements_dyadic(a, j));
        }

        #[test]
        fn count_matches_enumeration(l1 in 2i64..4, l2 in 0i64..2, l3 in 0i64..2, l4 in 2i64..4, a in 1i64..4, j in 0u32..3) {
            let Ok(mat) = ScalingMatrix2::new(l1, l2, l3, l4) else { return Ok(()) };
            let n = count_elements(&mat, a, j).unwrap();
            prop_assert_eq!(order_basis(&mat, a, j).unwrap().len() as u64, n);
        }

        #[test]
        fn row_sum_recursion(l1 in 2i64..5, l2 in 0i64..3, l3 in 0i64..3, l4 in 2i64..5, j in 1u32..8) {
            let Ok(mat) = ScalingMatrix2::new(l1, l2, l3, l4) else { return Ok(()) };
            let prev = mat.power(j - 1).unwrap().entries;
            let (r1, r2) = mat.power(j).unwrap().row_sums();
            prop_assert_eq!(r1, prev[0] * (l1 + l2) + prev[1] * (l3 + l4));
            prop_assert_eq!(r2, prev[2] * (l1 + l2) + prev[3] * (l3 + l4));
        }

        #[test]
        fn dyadic_mesh_norm_bound(j in 0u32..6, inv_eps in 1u32..9, m in 1i64..6) {
            let eps = 1.0 / inv_eps as f64;
            let g = MeshGeometry::new(&ScalingMatrix2::dyadic(), j, eps, (m, m)).unwrap();
            prop_assert!(mesh_norm(&g) <= eps / (1u64 << j) as f64 + 1e-15);
        }

        #[test]
        fn voronoi_sum(l1 in 2i64..4, l2 in 0i64..2, l3 in 0i64..2, l4 in 2i64..4, j in 0u32..3, m1 in 0i64..5, m2 in 0i64..5) {
            let Ok(mat) = ScalingMatrix2::new(l1, l2, l3, l4) else { return Ok(()) };
            let g = MeshGeometry::new(&mat, j, 0.5, (m1, m2)).unwrap();
            let v = voronoi_measures(&g);
            let cell = g.cell_measure();
            prop_assert!(v.iter().all(|&x| x <= cell * (1.0 + 1e-14)));
            prop_assert!((v.iter().sum::<f64>() - g.region_measure()).abs() <= 1e-12 * (1.0 + g.region_measure()));
        }
    }
}
