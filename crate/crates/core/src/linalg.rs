//! Dense complex linear algebra helpers built on `nalgebra`.
//!
//! Every rank decision in the crate goes through [`rank`] / [`null_space`],
//! which threshold singular values relative to the largest one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative singular-value cutoff used for span and rank decisions.
pub const RANK_TOL: f64 = 1e-9;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, cols: usize) -> CMat {
    CMat::zeros(r, cols)
}

/// Matrix with a single one at `(i, j)`.
pub fn elementary(rows: usize, cols: usize, i: usize, j: usize) -> CMat {
    let mut m = zeros(rows, cols);
    m[(i, j)] = ONE;
    m
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| c(x, 0.0)))
}

/// All-ones matrix.
pub fn ones(n: usize) -> CMat {
    CMat::from_element(n, n, ONE)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Column-major vectorization.
pub fn vectorize(m: &CMat) -> CVec {
    CVec::from_iterator(m.len(), m.iter().copied())
}

pub fn unvectorize(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_iterator(rows, cols, v.iter().copied())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Stack matrices as the columns of one matrix, each vectorized column-major.
pub fn columns_of(mats: &[CMat], rows: usize, cols: usize) -> CMat {
    let mut out = zeros(rows * cols, mats.len());
    for (k, m) in mats.iter().enumerate() {
        out.set_column(k, &vectorize(m));
    }
    out
}

fn padded(m: &CMat) -> CMat {
    if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        let mut p = zeros(m.ncols(), m.ncols());
        p.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
        p
    }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

fn cutoff(s: &[f64], rel_tol: f64) -> f64 {
    s.iter().copied().fold(0.0, f64::max) * rel_tol
}

pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    rank_floor(m, rel_tol, 0.0)
}

/// Rank with the cutoff `rel_tol · max(σ_max, floor)`, so that a matrix made
/// of roundoff relative to `floor` has rank zero.
pub fn rank_floor(m: &CMat, rel_tol: f64, floor: f64) -> usize {
    let s = singular_values(m);
    let cut = cutoff(&s, rel_tol).max(rel_tol * floor);
    s.iter().filter(|&&x| x > cut && x > 0.0).count()
}

/// Orthonormal basis (as columns) of the right null space of `m`.
pub fn null_space(m: &CMat, rel_tol: f64) -> CMat {
    null_space_below(m, |s| cutoff(s, rel_tol))
}

/// Null space keeping singular values at or below the absolute `cut`.
pub fn null_space_abs(m: &CMat, cut: f64) -> CMat {
    null_space_below(m, |_| cut)
}

fn null_space_below(m: &CMat, cut: impl Fn(&[f64]) -> f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    if m.nrows() == 0 {
        return identity(n);
    }
    let p = padded(m);
    let svd = p.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values.as_slice();
    let cut = cut(s);
    let mut cols = Vec::new();
    for (k, &sigma) in s.iter().enumerate() {
        if !(sigma > cut && sigma > 0.0) {
            cols.push(v_t.row(k).adjoint());
        }
    }
    let mut out = zeros(n, cols.len());
    for (k, col) in cols.iter().enumerate() {
        out.set_column(k, col);
    }
    out
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_space(m: &CMat, rel_tol: f64) -> CMat {
    column_space_floor(m, rel_tol, 0.0)
}

/// [`column_space`] with the cutoff of [`rank_floor`].
pub fn column_space_floor(m: &CMat, rel_tol: f64, floor: f64) -> CMat {
    if m.ncols() == 0 || m.nrows() == 0 {
        return zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let s = svd.singular_values.as_slice();
    let cut = cutoff(s, rel_tol).max(rel_tol * floor);
    let keep: Vec<usize> = (0..s.len()).filter(|&k| s[k] > cut && s[k] > 0.0).collect();
    let mut out = zeros(m.nrows(), keep.len());
    for (j, &k) in keep.iter().enumerate() {
        out.set_column(j, &u.column(k));
    }
    out
}

/// Minimal-norm least-squares solution of `a x = b` via the pseudo-inverse.
pub fn solve_min_norm(a: &CMat, b: &CMat, rel_tol: f64) -> CMat {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return zeros(n, b.ncols());
    }
    let pa = padded(a);
    let mut pb = zeros(pa.nrows(), b.ncols());
    pb.view_mut((0, 0), (b.nrows(), b.ncols())).copy_from(b);
    let svd = pa.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values.as_slice();
    let cut = cutoff(s, rel_tol);
    let mut x = zeros(n, b.ncols());
    for (k, &sigma) in s.iter().enumerate() {
        if sigma > cut && sigma > 0.0 {
            let coef = u.column(k).adjoint() * &pb / Complex64::new(sigma, 0.0);
            x += v_t.row(k).adjoint() * coef;
        }
    }
    x
}

/// Greedy selection of the earliest rows that form a maximal independent set.
pub fn independent_rows(m: &CMat, rel_tol: f64) -> Vec<usize> {
    let scale = (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut chosen: Vec<usize> = Vec::new();
    if scale == 0.0 {
        return chosen;
    }
    for i in 0..m.nrows() {
        if chosen.len() == m.ncols() {
            break;
        }
        let mut trial = chosen.clone();
        trial.push(i);
        let sub = CMat::from_fn(trial.len(), m.ncols(), |r, col| m[(trial[r], col)]);
        let s = singular_values(&sub);
        let smallest = s.last().copied().unwrap_or(0.0);
        if smallest > rel_tol * scale {
            chosen = trial;
        }
    }
    chosen
}

/// Residual of `x` against the span of the orthonormal columns of `basis`.
pub fn distance_to_span(basis: &CMat, x: &CVec) -> f64 {
    if basis.ncols() == 0 {
        return x.norm();
    }
    let proj = basis * (basis.adjoint() * x);
    (x - proj).norm()
}

/// `(e^z - 1) / z`, continuous through `z = 0`.
pub fn exprel(z: Complex64) -> Complex64 {
    if z.norm() < 0.05 {
        // 1 + z/2! + z^2/3! + ...
        let mut term = ONE;
        let mut sum = ONE;
        for k in 2..20 {
            term = term * z / (k as f64);
            sum += term;
        }
        sum
    } else {
        (z.exp() - ONE) / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let a = from_real(1, 3, &[1.0, 1.0, 1.0]);
        let ns = null_space(&a, RANK_TOL);
        assert_eq!(ns.ncols(), 2);
        assert!(max_abs(&(&a * &ns)) < 1e-14);
    }

    #[test]
    fn rank_of_zero_is_zero() {
        assert_eq!(rank(&zeros(3, 3), RANK_TOL), 0);
        assert_eq!(null_space(&zeros(2, 2), RANK_TOL).ncols(), 2);
    }

    #[test]
    fn min_norm_underdetermined() {
        let a = from_real(1, 2, &[1.0, 1.0]);
        let b = from_real(1, 1, &[2.0]);
        let x = solve_min_norm(&a, &b, RANK_TOL);
        assert!((x[(0, 0)] - ONE).norm() < 1e-14);
        assert!((x[(1, 0)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn independent_rows_prefers_earliest() {
        let m = from_real(4, 2, &[0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 0.0, 1.0]);
        assert_eq!(independent_rows(&m, RANK_TOL), vec![1, 3]);
    }

    #[test]
    fn independent_rows_stop_at_column_count() {
        let m = from_real(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(independent_rows(&m, RANK_TOL), vec![0, 1]);
    }

    #[test]
    fn floor_suppresses_roundoff_rank() {
        let m = from_real(2, 2, &[1e-17, 0.0, 0.0, 2e-17]);
        assert_eq!(rank(&m, RANK_TOL), 2);
        assert_eq!(rank_floor(&m, RANK_TOL, 1.0), 0);
    }

    #[test]
    fn exprel_matches_direct_formula() {
        for z in [c(0.3, -0.2), c(1e-4, 2e-4), c(-2.0, 5.0), c(0.049, 0.0)] {
            let direct = (z.exp() - ONE) / z;
            assert!((exprel(z) - direct).norm() < 1e-11 * direct.norm().max(1.0));
        }
        assert_eq!(exprel(ZERO), ONE);
    }
}
