use rayon::prelude::*;

use crate::delay::{DelayOperator, DelayTerm};
use crate::error::{Error, Result};
use crate::group::{self, Representation};
use crate::linalg::{self, CMat, RANK_TOL};
use crate::spectral::SpectralFrame;

use super::geometry::{commutation_residual, GammaOrbitGeometry, OrbitGeometry};
use super::realize::{build_r_matrices, reconstruct, solve_delay_realization, EntryMask, RECONSTRUCTION_TOL};
use super::theta::{theta_extract, ThetaReport};

/// `L(α) = L₀ + Σ_m α_m Σ_j A_j^m z(−r_j)`.
#[derive(Debug, Clone)]
pub struct UnfoldingFamily {
    pub base: DelayOperator,
    pub delays: Vec<f64>,
    /// `directions[m][j]` multiplies `z(−r_j)` in parameter `m`.
    pub directions: Vec<Vec<CMat>>,
    pub names: Vec<String>,
    pub equivariant: bool,
}

impl UnfoldingFamily {
    pub fn parameters(&self) -> usize {
        self.directions.len()
    }

    /// The operator at parameter value `alpha`.
    pub fn at(&self, alpha: &[f64]) -> Result<DelayOperator> {
        if alpha.len() != self.parameters() {
            return Err(Error::Structural(format!("{} parameters expected", self.parameters())));
        }
        let mut terms = self.base.terms().to_vec();
        for (m, &a) in alpha.iter().enumerate() {
            for (j, &d) in self.delays.iter().enumerate() {
                terms.push(DelayTerm { delay: d, matrix: &self.directions[m][j] * linalg::c(a, 0.0) });
            }
        }
        DelayOperator::merged(self.base.n(), terms)
    }

    /// Largest commutator of any coefficient matrix with `ρ(g)`.
    pub fn equivariance_residual(&self, rep: &Representation) -> f64 {
        self.directions
            .iter()
            .flatten()
            .flat_map(|a| rep.matrices().iter().map(move |r| linalg::max_abs(&linalg::commutator(a, r))))
            .fold(0.0, f64::max)
    }

    /// `Σ_j Ψ(0) A_j^m Φ(−r_j)`.
    pub fn reduced_direction(&self, frame: &SpectralFrame, m: usize) -> CMat {
        frame.psi_at(0.0) * reconstruct(frame, &self.delays, &self.directions[m])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VersalityReport {
    pub commutant_dim: usize,
    pub tangent_dim: usize,
    pub codimension: usize,
    pub parameters: usize,
    pub span_rank: usize,
    /// Largest distance of a direction from the commutant.
    pub outside_residual: f64,
    pub commutation_residual: f64,
    pub versal: bool,
    pub mini_versal: bool,
}

impl VersalityReport {
    pub fn deficiency(&self) -> usize {
        self.commutant_dim.saturating_sub(self.span_rank)
    }
}

/// Checks `Mat^Γ = T_BΣ^Γ + span(directions)` by rank over commutant
/// coordinates.
pub fn verify_gamma_versality(b: &CMat, g: &Representation, directions: &[CMat]) -> VersalityReport {
    let c = b.nrows();
    let commutant = group::commutant_basis(g);
    let dim = commutant.len();
    let comm_res = commutation_residual(b, g);
    let images: Vec<CMat> = commutant.iter().map(|y| linalg::commutator(b, y)).collect();
    let tangent_dim = if images.is_empty() {
        0
    } else {
        linalg::rank_floor(&linalg::columns_of(&images, c, c), RANK_TOL, linalg::max_abs(b).max(1.0))
    };
    let mut outside: f64 = 0.0;
    let mut coords = linalg::zeros(dim, images.len() + directions.len());
    for (k, m) in images.iter().chain(directions).enumerate() {
        let x = group::coordinates(&commutant, m);
        let mut back = linalg::zeros(c, c);
        for (i, (xi, ci)) in x.iter().zip(&commutant).enumerate() {
            back += ci * *xi;
            coords[(i, k)] = *xi;
        }
        if k >= images.len() {
            outside = outside.max(linalg::frob(&(m - back)) / linalg::frob(m).max(1.0));
        }
    }
    let span_rank = if dim == 0 { 0 } else { linalg::rank(&coords, RANK_TOL) };
    let scale = linalg::max_abs(b).max(1.0);
    let versal = span_rank == dim && outside < 1e-8 && comm_res < 1e-10 * scale;
    let codimension = dim - tangent_dim;
    VersalityReport {
        commutant_dim: dim,
        tangent_dim,
        codimension,
        parameters: directions.len(),
        span_rank,
        outside_residual: outside,
        commutation_residual: comm_res,
        versal,
        mini_versal: versal && directions.len() == codimension,
    }
}

#[derive(Debug, Clone)]
pub struct AssembleOptions {
    /// Per-delay entry masks for the final coefficient matrices.
    pub masks: Option<Vec<EntryMask>>,
    /// Keep only the rows selected from `Θ`; otherwise keep every direction.
    pub mini_versal: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self { masks: None, mini_versal: true }
    }
}

/// Everything produced on the way to the equivariant family.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub family: UnfoldingFamily,
    pub theta: ThetaReport,
    /// `R^m` for every slot.
    pub r: Vec<CMat>,
    /// `π(R^m)` for every slot.
    pub r_bar: Vec<CMat>,
    /// Projected reduced directions `B̂_m` for every slot.
    pub b_hat: Vec<CMat>,
    /// Slot index of each family parameter.
    pub parameters: Vec<usize>,
    pub versality: VersalityReport,
    pub reconstruction_residual: f64,
}

fn project_all(rep: &Representation, mats: &[CMat]) -> Result<Vec<CMat>> {
    mats.iter().map(|a| group::equivariant_average(rep, rep, a)).collect()
}

/// Builds the equivariant unfolding over the given delays.
pub fn assemble_gamma_unfolding(
    l0: &DelayOperator,
    rep: &Representation,
    frame: &SpectralFrame,
    geometry: &OrbitGeometry,
    gamma: &GammaOrbitGeometry,
    delays: &[f64],
    options: &AssembleOptions,
) -> Result<Assembly> {
    let g = frame
        .g
        .as_ref()
        .ok_or_else(|| Error::Structural("frame has no induced representation".into()))?;
    let r = build_r_matrices(frame, geometry)?;
    let solved: Vec<Vec<CMat>> = r
        .par_iter()
        .map(|rm| solve_delay_realization(frame, delays, rm, None).map(|s| s.matrices))
        .collect::<Result<_>>()?;
    let projected: Vec<Vec<CMat>> = solved.iter().map(|a| project_all(rep, a)).collect::<Result<_>>()?;

    let psi0 = frame.psi_at(0.0);
    let mut r_bar = Vec::with_capacity(r.len());
    let mut b_hat = Vec::with_capacity(r.len());
    for (rm, am) in r.iter().zip(&projected) {
        let rb = reconstruct(frame, delays, am);
        let bh = &psi0 * &rb;
        let expected = group::equivariant_average(g, g, &(&psi0 * rm))?;
        let gap = linalg::max_abs(&(&bh - &expected)) / linalg::max_abs(&expected).max(1.0);
        if gap > RECONSTRUCTION_TOL {
            return Err(Error::Decomposition { residual: gap, tolerance: RECONSTRUCTION_TOL });
        }
        r_bar.push(rb);
        b_hat.push(bh);
    }

    let theta = theta_extract(geometry, &b_hat)?;
    let parameters: Vec<usize> =
        if options.mini_versal { theta.selected_rows.clone() } else { (0..r.len()).collect() };

    let mut directions = Vec::with_capacity(parameters.len());
    let mut worst: f64 = 0.0;
    for &m in &parameters {
        let coeffs = match &options.masks {
            Some(masks) => {
                let sol = solve_delay_realization(frame, delays, &r_bar[m], Some(masks))?;
                project_all(rep, &sol.matrices)?
            }
            None => projected[m].clone(),
        };
        let back = reconstruct(frame, delays, &coeffs);
        worst = worst.max(linalg::frob(&(back - &r_bar[m])) / linalg::frob(&r_bar[m]).max(1.0));
        directions.push(coeffs);
    }
    if worst > RECONSTRUCTION_TOL {
        return Err(Error::InfeasibleMask(worst));
    }
    let family = UnfoldingFamily {
        base: l0.clone(),
        delays: delays.to_vec(),
        names: parameters.iter().map(|m| format!("alpha{}", m + 1)).collect(),
        directions,
        equivariant: true,
    };
    let residual = family.equivariance_residual(rep);
    if residual > 1e-10 {
        return Err(Error::Equivariance { residual, tolerance: 1e-10 });
    }
    let selected: Vec<CMat> = parameters.iter().map(|&m| b_hat[m].clone()).collect();
    let versality = verify_gamma_versality(&frame.b, g, &selected);
    if !versality.versal {
        return Err(Error::NotVersal {
            rank: versality.span_rank,
            required: versality.commutant_dim,
            deficiency: versality.deficiency(),
        });
    }
    debug_assert_eq!(versality.codimension, gamma.z_gamma_dim);
    Ok(Assembly {
        family,
        theta,
        r,
        r_bar,
        b_hat,
        parameters,
        versality,
        reconstruction_residual: worst,
    })
}

/// Real form of a family whose directions come in conjugate pairs.
#[derive(Debug, Clone)]
pub struct RealFamily {
    pub family: UnfoldingFamily,
    /// Complex parameter indices `(m, m̄)` merged into each real pair.
    pub pairs: Vec<(usize, Option<usize>)>,
    /// Rows: distinct nonzero coefficient coordinates; columns: real parameters.
    pub reparametrization: CMat,
    pub reparametrization_labels: Vec<(usize, usize, usize)>,
}

fn is_conj_of(a: &[CMat], b: &[CMat], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| linalg::max_abs(&(x.map(|z| z.conj()) - y)) <= tol)
}

/// Replaces each conjugate pair `(L, L̄)` by `(Re L, Im L)` and checks that
/// the induced change of parameters is nonsingular.
pub fn realify(family: &UnfoldingFamily) -> Result<RealFamily> {
    let scale = family
        .directions
        .iter()
        .flatten()
        .map(linalg::max_abs)
        .fold(0.0, f64::max)
        .max(1e-300);
    let tol = 1e-8 * scale;
    let p = family.parameters();
    let mut used = vec![false; p];
    let mut pairs = Vec::new();
    let mut dirs = Vec::new();
    let mut names = Vec::new();
    for m in 0..p {
        if used[m] {
            continue;
        }
        used[m] = true;
        let dm = &family.directions[m];
        if is_conj_of(dm, dm, tol) {
            pairs.push((m, None));
            dirs.push(dm.iter().map(|a| a.map(|z| linalg::c(z.re, 0.0))).collect());
            names.push(family.names[m].clone());
            continue;
        }
        let partner = (m + 1..p).find(|&k| !used[k] && is_conj_of(dm, &family.directions[k], tol));
        let Some(k) = partner else {
            return Err(Error::NotConjugatePairs(m));
        };
        used[k] = true;
        pairs.push((m, Some(k)));
        dirs.push(dm.iter().map(|a| a.map(|z| linalg::c(z.re, 0.0))).collect());
        dirs.push(dm.iter().map(|a| a.map(|z| linalg::c(z.im, 0.0))).collect());
        names.push(format!("re_{}", family.names[m]));
        names.push(format!("im_{}", family.names[m]));
    }
    let real = UnfoldingFamily {
        base: family.base.clone(),
        delays: family.delays.clone(),
        directions: dirs,
        names,
        equivariant: family.equivariant,
    };
    let (reparametrization, labels) = reparametrization_matrix(&real);
    let s = linalg::singular_values(&reparametrization);
    let q = real.parameters();
    let ratio = if reparametrization.nrows() < q || s.is_empty() { 0.0 } else { s[q - 1] / s[0] };
    if !(ratio > 1e-8) {
        return Err(Error::SingularReparametrization(ratio));
    }
    Ok(RealFamily { family: real, pairs, reparametrization, reparametrization_labels: labels })
}

/// Coefficient coordinates `(delay, row, col)` against parameters, with
/// zero rows and repeated rows removed.
pub fn reparametrization_matrix(family: &UnfoldingFamily) -> (CMat, Vec<(usize, usize, usize)>) {
    let q = family.parameters();
    let n = family.base.n();
    let scale = family
        .directions
        .iter()
        .flatten()
        .map(linalg::max_abs)
        .fold(0.0, f64::max)
        .max(1e-300);
    let tol = 1e-12 * scale.max(1.0);
    let mut rows: Vec<Vec<num_complex::Complex64>> = Vec::new();
    let mut labels = Vec::new();
    for j in 0..family.delays.len() {
        for a in 0..n {
            for b in 0..n {
                let row: Vec<_> = (0..q).map(|m| family.directions[m][j][(a, b)]).collect();
                if row.iter().all(|z| z.norm() <= tol) {
                    continue;
                }
                let dup = rows.iter().any(|r| r.iter().zip(&row).all(|(x, y)| (x - y).norm() <= tol));
                if dup {
                    continue;
                }
                rows.push(row);
                labels.push((j, a, b));
            }
        }
    }
    let m = CMat::from_fn(rows.len(), q, |i, k| rows[i][k]);
    (m, labels)
}
