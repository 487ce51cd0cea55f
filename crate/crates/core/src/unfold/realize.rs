use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, RANK_TOL};
use crate::spectral::SpectralFrame;

use super::geometry::OrbitGeometry;

/// Reconstruction tolerance for `Σ_j A_j Φ(−r_j) = R`.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// Entries of an `n × n` coefficient matrix that may be nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryMask {
    pub n: usize,
    /// Row-major.
    pub allowed: Vec<bool>,
}

impl EntryMask {
    pub fn full(n: usize) -> Self {
        Self { n, allowed: vec![true; n * n] }
    }

    pub fn diagonal(n: usize) -> Self {
        Self { n, allowed: (0..n * n).map(|k| k / n == k % n).collect() }
    }

    pub fn off_diagonal(n: usize) -> Self {
        Self { n, allowed: (0..n * n).map(|k| k / n != k % n).collect() }
    }

    pub fn allows(&self, row: usize, col: usize) -> bool {
        self.allowed[row * self.n + col]
    }

    /// Largest entry of `m` outside the mask.
    pub fn violation(&self, m: &CMat) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.allows(i, j) {
                    worst = worst.max(m[(i, j)].norm());
                }
            }
        }
        worst
    }
}

/// One `R^m` per `Ω` slot: a single nonzero column `j` holding the
/// minimal-norm `v` with `Π v = e`, where `Π` stacks the `Ψ(0)` rows of the
/// eigenvalue class of row `i`.
pub fn build_r_matrices(frame: &SpectralFrame, geometry: &OrbitGeometry) -> Result<Vec<CMat>> {
    let slots = geometry
        .slots
        .as_ref()
        .ok_or_else(|| Error::Structural("R construction needs a diagonal B".into()))?;
    if geometry.c() != frame.c() {
        return Err(Error::Structural("geometry and frame sizes differ".into()));
    }
    let n = frame.n();
    let psi0 = frame.psi_at(0.0);
    let mut out = Vec::with_capacity(slots.len());
    for &(i, j) in slots {
        let block = frame.blocks[frame.block_of(i)].clone();
        let m = block.len();
        let pi = psi0.rows(block.start, m).into_owned();
        if linalg::rank(&pi, RANK_TOL) < m {
            return Err(Error::AdjointRowsDependent);
        }
        let mut e = linalg::zeros(m, 1);
        e[(i - block.start, 0)] = linalg::ONE;
        let v = linalg::solve_min_norm(&pi, &e, RANK_TOL);
        let mut r = linalg::zeros(n, frame.c());
        r.set_column(j, &v.column(0));
        out.push(r);
    }
    Ok(out)
}

/// Rejects empty, negative, non-finite or repeated lags.
pub fn check_delays(delays: &[f64]) -> Result<()> {
    if delays.is_empty() {
        return Err(Error::InvalidDelays("no delays".into()));
    }
    for (k, &d) in delays.iter().enumerate() {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::InvalidDelays(format!("delay {d} is not a finite nonnegative lag")));
        }
        if delays[..k].iter().any(|&e| (e - d).abs() <= 1e-12 * d.abs().max(1.0)) {
            return Err(Error::InvalidDelays(format!("delay {d} repeated")));
        }
    }
    Ok(())
}

/// `col(Φ(−r_0), …, Φ(−r_J))`.
pub fn stacked_phi(frame: &SpectralFrame, delays: &[f64]) -> CMat {
    let n = frame.n();
    let mut s = linalg::zeros(n * delays.len(), frame.c());
    for (k, &d) in delays.iter().enumerate() {
        s.view_mut((k * n, 0), (n, frame.c())).copy_from(&frame.phi_at(-d));
    }
    s
}

pub fn stacked_rank(frame: &SpectralFrame, delays: &[f64]) -> usize {
    linalg::rank(&stacked_phi(frame, delays), RANK_TOL)
}

/// Native lags plus zero, then extra lags `τk/(c+1)` until the stacked
/// rank reaches `c`.
pub fn choose_delays(frame: &SpectralFrame) -> Result<Vec<f64>> {
    let mut delays = vec![0.0];
    for d in frame.op.delays() {
        if !delays.iter().any(|&e| (e - d).abs() <= 1e-12 * d.max(1.0)) {
            delays.push(d);
        }
    }
    let c = frame.c();
    let tau = frame.op.horizon().max(1.0);
    let mut extra = 0;
    let mut k = 1;
    while stacked_rank(frame, &delays) < c {
        if extra == c || k > c {
            return Err(Error::RankDeficient { achieved: stacked_rank(frame, &delays), required: c });
        }
        let d = tau * k as f64 / (c + 1) as f64;
        k += 1;
        if delays.iter().any(|&e| (e - d).abs() <= 1e-12 * d.max(1.0)) {
            continue;
        }
        delays.push(d);
        extra += 1;
    }
    Ok(delays)
}

/// Coefficient matrices `A_j` with `Σ_j A_j Φ(−r_j) = R`.
#[derive(Debug, Clone)]
pub struct Realization {
    pub matrices: Vec<CMat>,
    pub residual: f64,
}

/// `Σ_j A_j Φ(−r_j)`.
pub fn reconstruct(frame: &SpectralFrame, delays: &[f64], matrices: &[CMat]) -> CMat {
    let mut acc = linalg::zeros(frame.n(), frame.c());
    for (a, &d) in matrices.iter().zip(delays) {
        acc += a * frame.phi_at(-d);
    }
    acc
}

/// Minimal-norm solution of `R = Σ_j A_j Φ(−r_j)` over the entries allowed
/// by `masks` (all entries when `None`).
pub fn solve_delay_realization(
    frame: &SpectralFrame,
    delays: &[f64],
    r: &CMat,
    masks: Option<&[EntryMask]>,
) -> Result<Realization> {
    check_delays(delays)?;
    let n = frame.n();
    let c = frame.c();
    if r.nrows() != n || r.ncols() != c {
        return Err(Error::Structural(format!("R must be {n}x{c}")));
    }
    if let Some(m) = masks {
        if m.len() != delays.len() || m.iter().any(|e| e.n != n) {
            return Err(Error::Structural("one n x n mask per delay required".into()));
        }
    }
    let achieved = stacked_rank(frame, delays);
    if achieved < c {
        return Err(Error::RankDeficient { achieved, required: c });
    }
    // vec(A F) = (Fᵀ ⊗ I) vec A, one column per free entry
    let id = linalg::identity(n);
    let mut cols: Vec<CVec> = Vec::new();
    let mut index: Vec<(usize, usize, usize)> = Vec::new();
    for (k, &d) in delays.iter().enumerate() {
        let block = linalg::kron(&frame.phi_at(-d).transpose(), &id);
        for col in 0..n {
            for row in 0..n {
                if masks.is_none_or(|m| m[k].allows(row, col)) {
                    cols.push(block.column(row + col * n).into_owned());
                    index.push((k, row, col));
                }
            }
        }
    }
    let mut system = linalg::zeros(n * c, cols.len());
    for (k, col) in cols.iter().enumerate() {
        system.set_column(k, col);
    }
    let rhs = linalg::vectorize(r);
    let rhs = linalg::unvectorize(&rhs, n * c, 1);
    let x = linalg::solve_min_norm(&system, &rhs, RANK_TOL);
    let mut matrices = vec![linalg::zeros(n, n); delays.len()];
    for (t, &(k, row, col)) in index.iter().enumerate() {
        matrices[k][(row, col)] = x[(t, 0)];
    }
    let residual = linalg::frob(&(reconstruct(frame, delays, &matrices) - r)) / linalg::frob(r).max(1.0);
    if residual > RECONSTRUCTION_TOL {
        return Err(match masks {
            Some(_) => Error::InfeasibleMask(residual),
            None => Error::Decomposition { residual, tolerance: RECONSTRUCTION_TOL },
        });
    }
    Ok(Realization { matrices, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{ode, scalar};
    use crate::linalg::{c, from_real, I};
    use crate::spectral::eigenbasis;
    use crate::unfold::geometry::{orbit_geometry, semisimple_spec};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn scalar_r_is_inverse_of_psi0() {
        let op = ode(from_real(1, 1, &[2.0])).unwrap();
        let mut frame = eigenbasis(&op, &[c(2.0, 0.0)], None).unwrap();
        frame.psi[0].direction[0] = c(2.0, 0.0);
        let g = orbit_geometry(&frame.b, &semisimple_spec(&frame.b)).unwrap();
        let r = build_r_matrices(&frame, &g).unwrap();
        assert!((r[0][(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coincident_delays_are_rejected() {
        let op = scalar(-1.0, FRAC_PI_2);
        let frame = eigenbasis(&op, &[I, -I], None).unwrap();
        let r = linalg::zeros(1, 2);
        let err = solve_delay_realization(&frame, &[0.0, 1.0, 1.0], &r, None).unwrap_err();
        assert!(matches!(err, Error::InvalidDelays(_)));
    }

    #[test]
    fn single_delay_cannot_span_a_pair() {
        let op = scalar(-1.0, FRAC_PI_2);
        let frame = eigenbasis(&op, &[I, -I], None).unwrap();
        let r = from_real(1, 2, &[1.0, 0.0]);
        let err = solve_delay_realization(&frame, &[0.0], &r, None).unwrap_err();
        assert_eq!(err, Error::RankDeficient { achieved: 1, required: 2 });
    }

    #[test]
    fn pair_is_realized_with_two_lags() {
        let op = scalar(-1.0, FRAC_PI_2);
        let frame = eigenbasis(&op, &[I, -I], None).unwrap();
        let delays = choose_delays(&frame).unwrap();
        assert_eq!(delays, vec![0.0, FRAC_PI_2]);
        let r = from_real(1, 2, &[1.0, 0.0]);
        let sol = solve_delay_realization(&frame, &delays, &r, None).unwrap();
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn two_frequencies_on_four_lags() {
        // Φ columns e^{±iθ}, e^{±2iθ} on lags {0,1,2,3}
        let op = scalar(-1.0, FRAC_PI_2);
        let mut frame = eigenbasis(&op, &[I, -I], None).unwrap();
        let mut extra = frame.phi.clone();
        for f in &mut extra {
            f.exponent *= 2.0;
        }
        frame.phi.extend(extra);
        let delays = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(stacked_rank(&frame, &delays), 4);
        let r = from_real(1, 4, &[1.0, 0.0, 0.0, 0.0]);
        let sol = solve_delay_realization(&frame, &delays, &r, None).unwrap();
        let back = reconstruct(&frame, &delays, &sol.matrices);
        assert!(linalg::max_abs(&(back - r)) < 1e-10);
    }

    #[test]
    fn impossible_mask_is_reported() {
        let op = scalar(-1.0, FRAC_PI_2);
        let frame = eigenbasis(&op, &[I, -I], None).unwrap();
        let r = from_real(1, 2, &[1.0, 0.0]);
        let masks = [EntryMask::off_diagonal(1), EntryMask::off_diagonal(1)];
        let err = solve_delay_realization(&frame, &[0.0, 1.0], &r, Some(&masks)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleMask(_)));
    }
}
