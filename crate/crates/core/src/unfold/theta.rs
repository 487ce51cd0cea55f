use crate::error::{Error, Result};
use crate::group::{self, Representation};
use crate::linalg::{self, CMat, RANK_TOL};

use super::geometry::OrbitGeometry;

/// Residual above which a decomposition over `T ⊕ W` is rejected.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

/// Coordinates of unfolding directions in the complement `W`.
#[derive(Debug, Clone)]
pub struct ThetaReport {
    /// One row per direction, one column per `Ω`.
    pub theta: CMat,
    pub residuals: Vec<f64>,
    pub selected_rows: Vec<usize>,
    pub k: usize,
}

/// Applies the group average with `G` on both sides to each direction.
pub fn project_unfolding_directions(directions: &[CMat], g: &Representation) -> Result<Vec<CMat>> {
    directions.iter().map(|d| group::equivariant_average(g, g, d)).collect()
}

/// Splits each `B̂_i = [B, y_i] + Σ_j θ_ij Ω_j` and picks a maximal set of
/// independent rows of `Θ`, earliest rows first.
pub fn theta_extract(geometry: &OrbitGeometry, directions: &[CMat]) -> Result<ThetaReport> {
    let c = geometry.c();
    let nt = geometry.t_basis.len();
    let nw = geometry.w_basis.len();
    let mut basis = geometry.t_basis.clone();
    basis.extend(geometry.w_basis.iter().cloned());
    let a = linalg::columns_of(&basis, c, c);
    let mut rhs = linalg::zeros(c * c, directions.len());
    for (k, d) in directions.iter().enumerate() {
        if d.nrows() != c || d.ncols() != c {
            return Err(Error::Structural(format!("direction {k} is not {c}x{c}")));
        }
        rhs.set_column(k, &linalg::vectorize(d));
    }
    let x = linalg::solve_min_norm(&a, &rhs, RANK_TOL);
    let fit = &a * &x - &rhs;
    let mut theta = linalg::zeros(directions.len(), nw);
    let mut residuals = Vec::with_capacity(directions.len());
    for (k, d) in directions.iter().enumerate() {
        let r = fit.column(k).norm() / linalg::frob(d).max(1.0);
        if r > DECOMPOSITION_TOL {
            return Err(Error::Decomposition { residual: r, tolerance: DECOMPOSITION_TOL });
        }
        residuals.push(r);
        for j in 0..nw {
            theta[(k, j)] = x[(nt + j, k)];
        }
    }
    let selected_rows = linalg::independent_rows(&theta, RANK_TOL);
    let k = selected_rows.len();
    Ok(ThetaReport { theta, residuals, selected_rows, k })
}
