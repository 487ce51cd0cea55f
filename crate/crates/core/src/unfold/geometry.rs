use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::group::{self, Representation};
use crate::linalg::{self, CMat, RANK_TOL};

/// Jordan block sizes attached to one eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanBlocks {
    pub eigenvalue: Complex64,
    pub sizes: Vec<usize>,
}

/// `Σ_ℓ (2ℓ − 1) n_ℓ` per eigenvalue, block sizes sorted descending.
pub fn codimension_formula(spec: &[JordanBlocks]) -> usize {
    spec.iter()
        .map(|j| {
            let mut s = j.sizes.clone();
            s.sort_unstable_by(|a, b| b.cmp(a));
            s.iter().enumerate().map(|(l, n)| (2 * l + 1) * n).sum::<usize>()
        })
        .sum()
}

/// Matrix of `Y ↦ BY − YB` acting on column-major `vec Y`.
pub fn ad_matrix(b: &CMat) -> CMat {
    let c = b.nrows();
    let id = linalg::identity(c);
    linalg::kron(&id, b) - linalg::kron(&b.transpose(), &id)
}

fn is_diagonal(b: &CMat) -> bool {
    let scale = linalg::max_abs(b).max(1.0);
    b.iter().enumerate().all(|(k, z)| k % b.nrows() == k / b.nrows() || z.norm() <= 1e-14 * scale)
}

fn same(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-10 * a.norm().max(b.norm()).max(1.0)
}

/// Groups the diagonal of `b` into eigenvalue classes, first occurrence first.
pub fn eigenvalue_classes(b: &CMat) -> Vec<(Complex64, Vec<usize>)> {
    let mut classes: Vec<(Complex64, Vec<usize>)> = Vec::new();
    for i in 0..b.nrows() {
        let l = b[(i, i)];
        match classes.iter_mut().find(|(m, _)| same(*m, l)) {
            Some((_, idx)) => idx.push(i),
            None => classes.push((l, vec![i])),
        }
    }
    classes
}

/// Jordan data of a diagonal matrix: one 1×1 block per diagonal entry.
pub fn semisimple_spec(b: &CMat) -> Vec<JordanBlocks> {
    eigenvalue_classes(b)
        .into_iter()
        .map(|(l, idx)| JordanBlocks { eigenvalue: l, sizes: vec![1; idx.len()] })
        .collect()
}

/// Checks `spec` against `rank (B − λI)^k = c − Σ_ℓ min(n_ℓ, k)`.
pub fn validate_jordan_spec(b: &CMat, spec: &[JordanBlocks]) -> Result<()> {
    let c = b.nrows();
    if b.ncols() != c {
        return Err(Error::JordanSpec("B is not square".into()));
    }
    let total: usize = spec.iter().flat_map(|j| j.sizes.iter()).sum();
    if total != c {
        return Err(Error::JordanSpec(format!("block sizes sum to {total}, expected {c}")));
    }
    for (i, j) in spec.iter().enumerate() {
        if spec[..i].iter().any(|o| same(o.eigenvalue, j.eigenvalue)) {
            return Err(Error::JordanSpec(format!("eigenvalue {} listed twice", j.eigenvalue)));
        }
        if j.sizes.contains(&0) {
            return Err(Error::JordanSpec("zero block size".into()));
        }
        let shifted = b - linalg::identity(c) * j.eigenvalue;
        let mut power = linalg::identity(c);
        let top = j.sizes.iter().copied().max().unwrap_or(0);
        for k in 1..=top + 1 {
            power = &power * &shifted;
            let expected = c - j.sizes.iter().map(|&n| n.min(k)).sum::<usize>();
            let got = linalg::rank_floor(&power, 1e-8, linalg::max_abs(&shifted).max(1.0).powi(k as i32));
            if got != expected {
                return Err(Error::JordanSpec(format!(
                    "rank of (B - {}I)^{k} is {got}, spec implies {expected}",
                    j.eigenvalue
                )));
            }
        }
    }
    Ok(())
}

/// Tangent space to the similarity orbit of `B` and a complement.
#[derive(Debug, Clone)]
pub struct OrbitGeometry {
    pub b: CMat,
    pub jordan_spec: Vec<JordanBlocks>,
    pub t_basis: Vec<CMat>,
    pub w_basis: Vec<CMat>,
    /// `(row, column)` of each `Ω` when the complement is spanned by
    /// elementary matrices.
    pub slots: Option<Vec<(usize, usize)>>,
    pub delta: usize,
}

impl OrbitGeometry {
    pub fn c(&self) -> usize {
        self.b.nrows()
    }
}

/// Elementary slots `(i, j)` with `λ_i = λ_j`, ordered column-in-class,
/// then row-in-class, then class.
fn diagonal_slots(b: &CMat) -> Vec<(usize, usize)> {
    let classes = eigenvalue_classes(b);
    let top = classes.iter().map(|(_, idx)| idx.len()).max().unwrap_or(0);
    let mut slots = Vec::new();
    for col in 0..top {
        for row in 0..top {
            for (_, idx) in &classes {
                if row < idx.len() && col < idx.len() {
                    slots.push((idx[row], idx[col]));
                }
            }
        }
    }
    slots
}

pub fn orbit_geometry(b: &CMat, jordan_spec: &[JordanBlocks]) -> Result<OrbitGeometry> {
    validate_jordan_spec(b, jordan_spec)?;
    let c = b.nrows();
    let ad = ad_matrix(b);
    let floor = linalg::max_abs(b).max(1.0);
    let r = linalg::rank_floor(&ad, RANK_TOL, floor);
    let delta = c * c - r;
    let formula = codimension_formula(jordan_spec);
    if formula != delta {
        return Err(Error::JordanSpec(format!(
            "codimension from rank is {delta}, block formula gives {formula}"
        )));
    }
    let t_cols = linalg::column_space_floor(&ad, RANK_TOL, floor);
    let t_basis: Vec<CMat> = (0..t_cols.ncols())
        .map(|k| linalg::unvectorize(&t_cols.column(k).into_owned(), c, c))
        .collect();
    let (w_basis, slots) = if is_diagonal(b) {
        let slots = diagonal_slots(b);
        let w: Vec<CMat> = slots.iter().map(|&(i, j)| linalg::elementary(c, c, i, j)).collect();
        (w, Some(slots))
    } else {
        let ns = linalg::null_space_abs(&ad_matrix(&b.adjoint()), RANK_TOL * floor.max(linalg::frob(&ad)));
        let w = (0..ns.ncols())
            .map(|k| linalg::unvectorize(&ns.column(k).into_owned(), c, c))
            .collect();
        (w, None)
    };
    let mut all = t_basis.clone();
    all.extend(w_basis.iter().cloned());
    let full = linalg::rank(&linalg::columns_of(&all, c, c), RANK_TOL);
    if full != c * c || w_basis.len() != delta {
        return Err(Error::Decomposition { residual: (c * c - full) as f64, tolerance: 0.0 });
    }
    Ok(OrbitGeometry { b: b.clone(), jordan_spec: jordan_spec.to_vec(), t_basis, w_basis, slots, delta })
}

/// Restriction of the orbit geometry to equivariant matrices.
#[derive(Debug, Clone)]
pub struct GammaOrbitGeometry {
    pub commutant: Vec<CMat>,
    pub t_gamma: Vec<CMat>,
    pub z_gamma_dim: usize,
}

impl GammaOrbitGeometry {
    pub fn commutant_dim(&self) -> usize {
        self.commutant.len()
    }
}

/// Largest `‖[B, G(g)]‖` over the group.
pub fn commutation_residual(b: &CMat, g: &Representation) -> f64 {
    g.matrices()
        .iter()
        .map(|m| linalg::max_abs(&linalg::commutator(b, m)))
        .fold(0.0, f64::max)
}

pub fn gamma_orbit_geometry(b: &CMat, g: &Representation) -> Result<GammaOrbitGeometry> {
    if g.dim() != b.nrows() || b.ncols() != b.nrows() {
        return Err(Error::Structural(format!(
            "B is {}x{} but the representation acts on C^{}",
            b.nrows(),
            b.ncols(),
            g.dim()
        )));
    }
    let residual = commutation_residual(b, g);
    if residual > 1e-10 * linalg::max_abs(b).max(1.0) {
        return Err(Error::NotEquivariant(residual));
    }
    let c = b.nrows();
    let commutant = group::commutant_basis(g);
    let images: Vec<CMat> = commutant.iter().map(|y| linalg::commutator(b, y)).collect();
    let stacked = linalg::columns_of(&images, c, c);
    let floor = linalg::max_abs(b).max(1.0);
    let t_cols = if images.is_empty() {
        linalg::zeros(c * c, 0)
    } else {
        linalg::column_space_floor(&stacked, RANK_TOL, floor)
    };
    let t_gamma: Vec<CMat> = (0..t_cols.ncols())
        .map(|k| linalg::unvectorize(&t_cols.column(k).into_owned(), c, c))
        .collect();
    let z_gamma_dim = commutant.len() - t_gamma.len();
    Ok(GammaOrbitGeometry { commutant, t_gamma, z_gamma_dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FiniteGroup;
    use crate::linalg::{c, from_real, ONE};
    use std::sync::Arc;

    fn diag(v: &[Complex64]) -> CMat {
        let mut m = linalg::zeros(v.len(), v.len());
        for (i, z) in v.iter().enumerate() {
            m[(i, i)] = *z;
        }
        m
    }

    #[test]
    fn distinct_imaginary_pairs_have_codimension_four() {
        let b = diag(&[c(0.0, 1.0), c(0.0, -1.0), c(0.0, 2.5), c(0.0, -2.5)]);
        let g = orbit_geometry(&b, &semisimple_spec(&b)).unwrap();
        assert_eq!(g.delta, 4);
        assert_eq!(g.t_basis.len(), 12);
        assert_eq!(g.slots.unwrap(), vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn doubled_pairs_have_codimension_sixteen() {
        let l = [c(0.0, 1.0), c(0.0, -1.0), c(0.0, 2.5), c(0.0, -2.5)];
        let b = diag(&[l[0], l[0], l[1], l[1], l[2], l[2], l[3], l[3]]);
        let g = orbit_geometry(&b, &semisimple_spec(&b)).unwrap();
        assert_eq!(g.delta, 16);
        let slots = g.slots.unwrap();
        assert_eq!(&slots[..4], &[(0, 0), (2, 2), (4, 4), (6, 6)]);
        assert_eq!(&slots[4..8], &[(1, 0), (3, 2), (5, 4), (7, 6)]);
        assert_eq!(&slots[8..12], &[(0, 1), (2, 3), (4, 5), (6, 7)]);
        assert_eq!(&slots[12..], &[(1, 1), (3, 3), (5, 5), (7, 7)]);
    }

    #[test]
    fn zero_matrix_is_its_own_complement() {
        let b = linalg::zeros(3, 3);
        let spec = vec![JordanBlocks { eigenvalue: c(0.0, 0.0), sizes: vec![1, 1, 1] }];
        let g = orbit_geometry(&b, &spec).unwrap();
        assert_eq!(g.delta, 9);
        assert!(g.t_basis.is_empty());
        assert_eq!(g.w_basis.len(), 9);
    }

    #[test]
    fn jordan_block_uses_adjoint_centralizer() {
        // one 3-block at 0: codimension 3
        let b = from_real(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let spec = vec![JordanBlocks { eigenvalue: c(0.0, 0.0), sizes: vec![3] }];
        let g = orbit_geometry(&b, &spec).unwrap();
        assert_eq!(g.delta, 3);
        assert!(g.slots.is_none());
        for w in &g.w_basis {
            assert!(linalg::max_abs(&linalg::commutator(&b.adjoint(), w)) < 1e-12);
        }
    }

    #[test]
    fn wrong_spec_is_rejected() {
        let b = from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let spec = vec![JordanBlocks { eigenvalue: c(0.0, 0.0), sizes: vec![1, 1] }];
        assert!(matches!(orbit_geometry(&b, &spec), Err(Error::JordanSpec(_))));
    }

    #[test]
    fn formula_sorts_blocks() {
        let spec = vec![JordanBlocks { eigenvalue: ONE, sizes: vec![1, 3, 2] }];
        // sorted 3,2,1 -> 3 + 3*2 + 5*1
        assert_eq!(codimension_formula(&spec), 14);
    }

    #[test]
    fn trivial_group_reduces_to_plain_orbit() {
        let b = diag(&[c(0.0, 1.0), c(0.0, -1.0), c(0.0, 1.0)]);
        let rep = Representation::trivial(Arc::new(FiniteGroup::trivial()), 3);
        let gg = gamma_orbit_geometry(&b, &rep).unwrap();
        let og = orbit_geometry(&b, &semisimple_spec(&b)).unwrap();
        assert_eq!(gg.commutant_dim(), 9);
        assert_eq!(gg.t_gamma.len(), og.t_basis.len());
        assert_eq!(gg.z_gamma_dim, og.delta);
    }

    #[test]
    fn non_commuting_b_is_rejected() {
        let rep = crate::group::d3_permutation_rep();
        let b = diag(&[ONE, c(2.0, 0.0), c(3.0, 0.0)]);
        assert!(matches!(gamma_orbit_geometry(&b, &rep), Err(Error::NotEquivariant(_))));
    }
}
