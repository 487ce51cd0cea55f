//! Test-side oracles built only on nalgebra, independent of the library's
//! own rank, projection and quadrature code.
#![allow(dead_code)]

use equivar_core::{CMat, Complex64};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Numerical rank with singular values above `tol * max(σ₁, floor)`.
pub fn svd_rank(m: &CMat, tol: f64, floor: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let top = s.iter().copied().fold(0.0, f64::max).max(floor);
    s.iter().filter(|&&x| x > tol * top).count()
}

pub fn vec_of(m: &CMat) -> Vec<Complex64> {
    // column-major
    m.iter().copied().collect()
}

pub fn columns(mats: &[CMat]) -> CMat {
    let rows = mats.first().map_or(0, |m| m.len());
    DMatrix::from_fn(rows, mats.len(), |i, j| mats[j].as_slice()[i])
}

/// Dimension of `{X : G X = X G for all G}` from the stacked Kronecker system.
pub fn commutant_dim(gs: &[CMat]) -> usize {
    let c = gs[0].nrows();
    let id = DMatrix::<Complex64>::identity(c, c);
    let mut stacked = DMatrix::<Complex64>::zeros(c * c * gs.len(), c * c);
    for (k, g) in gs.iter().enumerate() {
        let block = id.kronecker(g) - g.transpose().kronecker(&id);
        stacked.view_mut((k * c * c, 0), (c * c, c * c)).copy_from(&block);
    }
    c * c - svd_rank(&stacked, 1e-9, 1.0)
}

/// Basis of the commutant by SVD null space.
pub fn commutant(gs: &[CMat]) -> Vec<CMat> {
    let c = gs[0].nrows();
    let id = DMatrix::<Complex64>::identity(c, c);
    let mut stacked = DMatrix::<Complex64>::zeros(c * c * gs.len(), c * c);
    for (k, g) in gs.iter().enumerate() {
        let block = id.kronecker(g) - g.transpose().kronecker(&id);
        stacked.view_mut((k * c * c, 0), (c * c, c * c)).copy_from(&block);
    }
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.unwrap();
    let s = svd.singular_values;
    let top = s.iter().copied().fold(0.0, f64::max).max(1.0);
    (0..v_t.nrows())
        .filter(|&i| s[i] <= 1e-9 * top)
        .map(|i| {
            let row = v_t.row(i).adjoint();
            DMatrix::from_column_slice(c, c, row.as_slice())
        })
        .collect()
}

/// `(1/|G|) Σ ρL(g) M ρR(g)⁻¹`, with inverses by LU.
pub fn average(left: &[CMat], right: &[CMat], m: &CMat) -> CMat {
    let mut acc = DMatrix::zeros(m.nrows(), m.ncols());
    for (l, r) in left.iter().zip(right) {
        let inv = r.clone().try_inverse().expect("invertible");
        acc += l * m * inv;
    }
    acc / cx(left.len() as f64, 0.0)
}

/// `det` of the D₃ characteristic matrix written out by hand.
pub fn d3_det(lambda: Complex64, alpha: f64, beta: f64, tau_s: f64, tau_n: f64) -> Complex64 {
    let d = lambda + 1.0 - (-lambda * tau_s).exp() * alpha;
    let o = -(-lambda * tau_n).exp() * beta;
    let m = DMatrix::from_row_slice(3, 3, &[d, o, o, o, d, o, o, o, d]);
    m.determinant()
}

/// `ψ(0)φ(0) + Σ_k ∫_{−r_k}^0 ψ(ξ+r_k) A_k φ(ξ) dξ` by composite Simpson.
pub fn simpson_form(
    w: &[Complex64],
    mu: Complex64,
    u: &[Complex64],
    lambda: Complex64,
    terms: &[(f64, CMat)],
    intervals: usize,
) -> Complex64 {
    let n = w.len();
    let dot = |a: &CMat, x: f64| -> Complex64 {
        let mut s = cx(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += w[i] * a[(i, j)] * u[j];
            }
        }
        s * (-mu * x).exp()
    };
    let mut acc: Complex64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
    for (r, a) in terms {
        if *r == 0.0 {
            continue;
        }
        let h = r / intervals as f64;
        let f = |xi: f64| dot(a, xi + r) * (lambda * xi).exp();
        let mut s = f(-r) + f(0.0);
        for k in 1..intervals {
            let x = -r + h * k as f64;
            s += f(x) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc += s * (h / 3.0);
    }
    acc
}

/// `[φ_j(−r_k)]` stacked over delays, from the raw directions.
pub fn stacked(directions: &[Vec<Complex64>], lambdas: &[Complex64], delays: &[f64]) -> CMat {
    let n = directions[0].len();
    DMatrix::from_fn(n * delays.len(), directions.len(), |i, j| {
        let (k, row) = (i / n, i % n);
        directions[j][row] * (-lambdas[j] * delays[k]).exp()
    })
}

pub fn omega() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

pub fn all_ones(n: usize) -> CMat {
    DMatrix::from_element(n, n, cx(1.0, 0.0))
}

/// Relative deviation of `a` from the nearest multiple of `p`.
pub fn pattern_gap(a: &CMat, p: &CMat, scale: f64) -> f64 {
    let coef = p.dotc(a) / p.dotc(p);
    max_abs(&(a - p * coef)) / scale
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
