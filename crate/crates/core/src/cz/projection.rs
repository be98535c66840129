//! Projection onto polynomials of total degree `≤ D` on a dyadic cube.
//!
//! The basis is the tensor product of shifted Legendre polynomials
//! `p_n(t) = L_n(2t)` on `[-1/2, 1/2]`, with `‖p_n‖² = 1/(2n+1)`. They are
//! kept unnormalized so that every coefficient and norm is rational; the
//! orthonormal basis is `p_β / ‖p_β‖`.

use num_traits::{One, Zero};

use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

/// Largest total degree with a coefficient table.
pub const MAX_DEGREE: usize = 32;

/// Tensor Legendre basis on `[-1/2, 1/2]^d`.
#[derive(Clone, Debug)]
pub struct PolynomialBasis<T> {
    dim: usize,
    degree_cap: usize,
    /// Multi-indices in graded lexicographic order.
    indices: Vec<Vec<usize>>,
    /// `coeffs[n][k]` = coefficient of `t^k` in `p_n`.
    coeffs: Vec<Vec<T>>,
    /// `‖p_β‖²` per multi-index.
    norms: Vec<T>,
}

fn legendre_table(max: usize) -> Vec<Vec<Rational>> {
    // (n+1) L_{n+1} = (2n+1) x L_n − n L_{n−1}, then substitute x = 2t.
    let mut l: Vec<Vec<Rational>> = vec![vec![Rational::one()], vec![Rational::zero(), Rational::one()]];
    for n in 1..max {
        let mut next = vec![Rational::zero(); n + 2];
        let a = Rational::new((2 * n as i64 + 1).into(), (n as i64 + 1).into());
        let b = Rational::new((n as i64).into(), (n as i64 + 1).into());
        for (k, c) in l[n].iter().enumerate() {
            next[k + 1] += &a * c;
        }
        for (k, c) in l[n - 1].iter().enumerate() {
            next[k] -= &b * c;
        }
        l.push(next);
    }
    l.truncate(max + 1);
    l.into_iter()
        .map(|p| {
            p.into_iter()
                .enumerate()
                .map(|(k, c)| c * crate::scalar::pow2(k as i64))
                .collect()
        })
        .collect()
}

fn multi_indices(dim: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=max {
        let mut cur = vec![0usize; dim];
        gen(&mut cur, 0, total, &mut out);
    }
    out
}

fn gen(cur: &mut Vec<usize>, j: usize, left: usize, out: &mut Vec<Vec<usize>>) {
    if j + 1 == cur.len() {
        cur[j] = left;
        out.push(cur.clone());
        return;
    }
    for v in (0..=left).rev() {
        cur[j] = v;
        gen(cur, j + 1, left - v, out);
    }
}

/// `∫_a^b t^k dt`.
fn monomial_integral<T: Scalar>(k: usize, a: &T, b: &T) -> T {
    let k1 = k + 1;
    (powi(b, k1) - powi(a, k1)) / T::from_i64(k1 as i64)
}

fn powi<T: Scalar>(x: &T, k: usize) -> T {
    let mut r = T::one();
    for _ in 0..k {
        r = r * x.clone();
    }
    r
}

impl<T: Scalar> PolynomialBasis<T> {
    pub fn new(dim: usize, degree_cap: usize) -> Result<Self> {
        if degree_cap > MAX_DEGREE {
            return Err(Error::DegreeCap {
                requested: degree_cap,
                available: MAX_DEGREE,
            });
        }
        if dim == 0 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let table = legendre_table(degree_cap.max(1));
        let coeffs = table
            .iter()
            .take(degree_cap + 1)
            .map(|p| p.iter().map(T::from_rational).collect())
            .collect();
        let indices = multi_indices(dim, degree_cap);
        let norms = indices
            .iter()
            .map(|b| {
                let mut r = Rational::one();
                for &n in b {
                    r /= Rational::from_integer((2 * n as i64 + 1).into());
                }
                T::from_rational(&r)
            })
            .collect();
        Ok(PolynomialBasis {
            dim,
            degree_cap,
            indices,
            coeffs,
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn norm_sq(&self, i: usize) -> &T {
        &self.norms[i]
    }

    /// `p_n(t)`.
    pub fn eval_1d(&self, n: usize, t: &T) -> T {
        self.coeffs[n]
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * t.clone() + c.clone())
    }

    /// `∫_a^b p_n(t) dt`.
    pub fn integral_1d(&self, n: usize, a: &T, b: &T) -> T {
        self.coeffs[n]
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, c)| acc + c.clone() * monomial_integral(k, a, b))
    }

    /// `∫_{-1/2}^{1/2} p_n(t) t^m dt`.
    pub fn moment_1d(&self, n: usize, m: usize) -> T {
        let h = T::from_rational(&Rational::new(1.into(), 2.into()));
        let lo = -h.clone();
        self.coeffs[n]
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, c)| acc + c.clone() * monomial_integral(k + m, &lo, &h))
    }

    /// `p_β(u)` at local coordinates `u ∈ [-1/2, 1/2]^d`.
    pub fn eval(&self, i: usize, u: &[T]) -> T {
        self.indices[i]
            .iter()
            .zip(u)
            .fold(T::one(), |acc, (&n, t)| acc * self.eval_1d(n, t))
    }

    /// Gram matrix of the orthonormalized basis, computed from the coefficient
    /// tables (not from the orthogonality identity).
    pub fn gram_normalized(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut g = vec![vec![0.0; n]; n];
        for (i, row) in g.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut v = T::one();
                for a in 0..self.dim {
                    v = v * self.product_integral_1d(self.indices[i][a], self.indices[j][a]);
                }
                let s = (self.norms[i].to_f64_lossy() * self.norms[j].to_f64_lossy()).sqrt();
                *cell = v.to_f64_lossy() / s;
            }
        }
        g
    }

    /// Gram matrix of the unnormalized basis in `T` arithmetic.
    pub fn gram(&self) -> Vec<Vec<T>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..self.dim).fold(T::one(), |acc, a| {
                            acc * self.product_integral_1d(self.indices[i][a], self.indices[j][a])
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// `∫_{-1/2}^{1/2} p_m p_n`.
    fn product_integral_1d(&self, m: usize, n: usize) -> T {
        let mut s = T::zero();
        for (k, c) in self.coeffs[n].iter().enumerate() {
            s = s + c.clone() * self.moment_1d(m, k);
        }
        s
    }
}

/// Step function on a cube given by `(value, subcube)` pairs, the subcubes
/// disjoint and inside `q`.
#[derive(Clone, Debug)]
pub struct StepPiece<T> {
    pub q: DyadicCube,
    pub cells: Vec<(T, DyadicCube)>,
}

/// Local coordinates `(x − x_q)/l(q)` of a subcube's corners.
pub fn local_bounds<T: Scalar>(q: &DyadicCube, cell: &DyadicCube) -> (Vec<T>, Vec<T>) {
    let unit = cell.scale.min(q.scale);
    let (qlo, _) = q.bounds_at(unit);
    let (clo, chi) = cell.bounds_at(unit);
    let side = (1i64 << (q.scale - unit)) as i128;
    let mk = |x: i64, j: usize| -> T {
        // (x − qlo − side/2) / side
        let num = 2 * (x as i128 - qlo[j] as i128) - side;
        T::from_rational(&Rational::new(num.into(), (2 * side).into()))
    };
    (
        (0..q.dim()).map(|j| mk(clo[j], j)).collect(),
        (0..q.dim()).map(|j| mk(chi[j], j)).collect(),
    )
}

/// `Π_q h` in the basis: `Σ c_β p_β((x − x_q)/l(q))`.
#[derive(Clone, Debug)]
pub struct PolyPiece<T> {
    pub q: DyadicCube,
    pub coeffs: Vec<T>,
}

impl<T: Scalar> PolyPiece<T> {
    /// Value at local coordinates.
    pub fn eval_local(&self, basis: &PolynomialBasis<T>, u: &[T]) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, c)| acc + c.clone() * basis.eval(i, u))
    }

    /// `∫ Π h(y) ((y−x_q)/l)^m dy / l^d` over the cube.
    pub fn local_moment(&self, basis: &PolynomialBasis<T>, m: &[usize]) -> T {
        self.coeffs.iter().enumerate().fold(T::zero(), |acc, (i, c)| {
            let v = basis.indices[i]
                .iter()
                .zip(m)
                .fold(T::one(), |a, (&n, &mm)| a * basis.moment_1d(n, mm));
            acc + c.clone() * v
        })
    }

    /// `∫_{sub} Π h / l^d` over a subcube in local coordinates.
    pub fn local_integral(&self, basis: &PolynomialBasis<T>, lo: &[T], hi: &[T]) -> T {
        self.coeffs.iter().enumerate().fold(T::zero(), |acc, (i, c)| {
            let v = basis.indices[i]
                .iter()
                .enumerate()
                .fold(T::one(), |a, (j, &n)| a * basis.integral_1d(n, &lo[j], &hi[j]));
            acc + c.clone() * v
        })
    }
}

/// `Π_q h` for a step function supported in `q`.
pub fn projection<T: Scalar>(h: &StepPiece<T>, basis: &PolynomialBasis<T>, degree: usize) -> Result<PolyPiece<T>> {
    if degree > basis.degree_cap() {
        return Err(Error::DegreeCap {
            requested: degree,
            available: basis.degree_cap(),
        });
    }
    if basis.dim() != h.q.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: h.q.dim(),
        });
    }
    let mut coeffs = vec![T::zero(); basis.len()];
    for (v, cell) in &h.cells {
        if !h.q.contains(cell) {
            return Err(Error::OutOfRange(format!("cell {cell} outside projection cube {}", h.q)));
        }
        let (lo, hi) = local_bounds::<T>(&h.q, cell);
        for (i, b) in basis.indices.iter().enumerate() {
            if b.iter().sum::<usize>() > degree {
                continue;
            }
            let w = b
                .iter()
                .enumerate()
                .fold(T::one(), |a, (j, &n)| a * basis.integral_1d(n, &lo[j], &hi[j]));
            coeffs[i] = coeffs[i].clone() + v.clone() * w;
        }
    }
    for (i, c) in coeffs.iter_mut().enumerate() {
        *c = c.clone() / basis.norms[i].clone();
    }
    Ok(PolyPiece { q: h.q.clone(), coeffs })
}

/// Project a polynomial piece again by computing its inner products with the
/// basis from the coefficient tables.
pub fn project_poly<T: Scalar>(p: &PolyPiece<T>, basis: &PolynomialBasis<T>) -> PolyPiece<T> {
    let g = basis.gram();
    let n = basis.len();
    let coeffs = (0..n)
        .map(|i| {
            let ip = (0..n).fold(T::zero(), |acc, j| acc + p.coeffs[j].clone() * g[j][i].clone());
            ip / basis.norms[i].clone()
        })
        .collect();
    PolyPiece { q: p.q.clone(), coeffs }
}

/// Local moments `∫ h(y) ((y−x_q)/l)^m dy / l^d`.
pub fn step_local_moment<T: Scalar>(h: &StepPiece<T>, m: &[usize]) -> T {
    h.cells.iter().fold(T::zero(), |acc, (v, cell)| {
        let (lo, hi) = local_bounds::<T>(&h.q, cell);
        let w = m
            .iter()
            .enumerate()
            .fold(T::one(), |a, (j, &k)| a * monomial_integral(k, &lo[j], &hi[j]));
        acc + v.clone() * w
    })
}

/// `avg_q |h| = Σ |v| |cell| / |q|`.
pub fn step_avg_abs<T: Scalar>(h: &StepPiece<T>) -> T {
    h.cells.iter().fold(T::zero(), |acc, (v, cell)| {
        let (lo, hi) = local_bounds::<T>(&h.q, cell);
        let vol = lo
            .iter()
            .zip(&hi)
            .fold(T::one(), |a, (l, u)| a * (u.clone() - l.clone()));
        acc + v.abs() * vol
    })
}

/// Largest moment defect of `b = h − Π h`, relative to `avg_q |h|`:
/// `max_β |∫ b (x−x_q)^β| / (‖h‖₁ l^{|β|})` over `|β| ≤ degree`.
pub fn moment_defect<T: Scalar>(h: &StepPiece<T>, p: &PolyPiece<T>, basis: &PolynomialBasis<T>, degree: usize) -> f64 {
    let avg = step_avg_abs(h).to_f64_lossy();
    if avg == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for b in &basis.indices {
        if b.iter().sum::<usize>() > degree {
            continue;
        }
        let d = step_local_moment(h, b) - p.local_moment(basis, b);
        worst = worst.max(d.to_f64_lossy().abs() / avg);
    }
    worst
}

/// Evaluation grid `{-1/2, ..., 1/2}^d` with `m + 1` points per axis.
pub fn local_grid(dim: usize, m: usize) -> Vec<Vec<f64>> {
    let pts: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64 - 0.5).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        out.push(idx.iter().map(|&i| pts[i]).collect());
        let mut j = dim;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] <= m {
                break;
            }
            idx[j] = 0;
        }
    }
}

/// `sup_q |Π h| / avg_q |h|`, the supremum taken over a grid that contains the corners.
pub fn sup_ratio(h: &StepPiece<f64>, p: &PolyPiece<f64>, basis: &PolynomialBasis<f64>) -> f64 {
    let avg = step_avg_abs(h);
    if avg == 0.0 {
        return 0.0;
    }
    let m = 8 * basis.degree_cap().max(1);
    local_grid(basis.dim(), m)
        .iter()
        .map(|u| p.eval_local(basis, u).abs())
        .fold(0.0, f64::max)
        / avg
}

/// `∫_q |h − Π h| / |q|` by tensor Gauss–Legendre quadrature on each cell of
/// `h` and on a uniform subdivision of `q` for the part where `h = 0`.
pub fn l1_defect(h: &StepPiece<f64>, p: &PolyPiece<f64>, basis: &PolynomialBasis<f64>) -> f64 {
    let dim = basis.dim();
    let sub = 8usize;
    let mut total = 0.0;
    // ∫_q |Π h|
    let step = 1.0 / sub as f64;
    let mut idx = vec![0usize; dim];
    loop {
        let lo: Vec<f64> = idx.iter().map(|&i| -0.5 + i as f64 * step).collect();
        let hi: Vec<f64> = lo.iter().map(|x| x + step).collect();
        total += gauss_box(dim, &lo, &hi, |u| p.eval_local(basis, u).abs());
        let mut j = dim;
        let mut done = true;
        while j > 0 {
            j -= 1;
            idx[j] += 1;
            if idx[j] < sub {
                done = false;
                break;
            }
            idx[j] = 0;
        }
        if done {
            break;
        }
    }
    // correct on the support of h
    for (v, cell) in &h.cells {
        let (lo, hi) = local_bounds::<f64>(&h.q, cell);
        total += gauss_box(dim, &lo, &hi, |u| {
            let pv = p.eval_local(basis, u);
            (v - pv).abs() - pv.abs()
        });
    }
    total
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_26, 0.652_145_154_862_546_2),
    (0.339_981_043_584_856_26, 0.652_145_154_862_546_2),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

fn gauss_box<F: Fn(&[f64]) -> f64>(dim: usize, lo: &[f64], hi: &[f64], f: F) -> f64 {
    let n = GAUSS4.len();
    let mut idx = vec![0usize; dim];
    let mut u = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for j in 0..dim {
            let (x, wx) = GAUSS4[idx[j]];
            let half = 0.5 * (hi[j] - lo[j]);
            u[j] = lo[j] + half * (x + 1.0);
            w *= wx * half;
        }
        total += w * f(&u);
        let mut j = dim;
        loop {
            if j == 0 {
                return total;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < n {
                break;
            }
            idx[j] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn legendre_coefficients() {
        let t = legendre_table(3);
        // p_2(t) = L_2(2t) = (3·4t² − 1)/2 = 6t² − 1/2
        assert_eq!(t[2], vec![ratio(-1, 2), ratio(0, 1), ratio(6, 1)]);
    }

    #[test]
    fn exact_gram_is_diagonal_with_rational_norms() {
        let b = PolynomialBasis::<Rational>::new(2, 3).unwrap();
        let g = b.gram();
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i == j {
                    assert_eq!(v, b.norm_sq(i));
                } else {
                    assert!(v.is_zero());
                }
            }
        }
    }

    #[test]
    fn float_gram_is_identity() {
        let b = PolynomialBasis::<f64>::new(3, 4).unwrap();
        let g = b.gram_normalized();
        assert_eq!(g.len(), b.len());
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "{i},{j}: {v}");
            }
        }
    }

    #[test]
    fn indicator_projects_to_constant() {
        let q = DyadicCube::new(-2, vec![1, 2]);
        let b = PolynomialBasis::<Rational>::new(2, 2).unwrap();
        let h = StepPiece {
            q: q.clone(),
            cells: q.children().into_iter().map(|c| (ratio(1, 1), c)).collect(),
        };
        let p = projection(&h, &b, 2).unwrap();
        assert_eq!(p.coeffs[0], ratio(1, 1));
        assert!(p.coeffs[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn exact_moments_vanish() {
        let q = DyadicCube::new(0, vec![0, 0]);
        let b = PolynomialBasis::<Rational>::new(2, 3).unwrap();
        let h = StepPiece {
            q: q.clone(),
            cells: vec![
                (ratio(3, 1), DyadicCube::new(-2, vec![0, 3])),
                (ratio(-1, 1), DyadicCube::new(-3, vec![5, 1])),
                (ratio(7, 2), DyadicCube::new(-1, vec![1, 1])),
            ],
        };
        let p = projection(&h, &b, 3).unwrap();
        assert_eq!(moment_defect(&h, &p, &b, 3), 0.0);
        let pp = project_poly(&p, &b);
        assert_eq!(pp.coeffs, p.coeffs);
    }

    #[test]
    fn degree_cap_errors() {
        assert!(PolynomialBasis::<f64>::new(2, MAX_DEGREE + 1).is_err());
        let b = PolynomialBasis::<f64>::new(2, 1).unwrap();
        let h = StepPiece { q: DyadicCube::new(0, vec![0, 0]), cells: vec![] };
        assert!(matches!(projection(&h, &b, 2), Err(Error::DegreeCap { .. })));
    }

    #[test]
    fn corner_kernel_value() {
        // Σ_β p_β(c)² / ‖p_β‖² at a corner for D = 2, d = 2
        let b = PolynomialBasis::<f64>::new(2, 2).unwrap();
        let c = [0.5, 0.5];
        let k: f64 = (0..b.len()).map(|i| b.eval(i, &c).powi(2) / b.norm_sq(i)).sum();
        assert!((k - 26.0).abs() < 1e-12);
    }
}
