//! Finite groups, their matrix representations, and group-average projections.
//!
//! The Haar integral over a finite group is the normalized sum
//! `(1/|G|) Σ_g`, so the average of `ρL(g) M ρR(g)⁻¹` lands in the space of
//! intertwiners between the two representations.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Default cap on the number of elements produced by generator closure.
pub const DEFAULT_CLOSURE_CAP: usize = 512;

/// Entrywise tolerance used to identify matrices during closure.
pub const CLOSURE_TOL: f64 = 1e-10;

/// Default homomorphism tolerance for [`check_representation`].
pub const REP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    mul_table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
    generators: Vec<usize>,
}

impl FiniteGroup {
    /// Builds a group from its multiplication table, `table[a][b] = a·b`.
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::Structural("empty multiplication table".into()));
        }
        for row in &table {
            if row.len() != n {
                return Err(Error::Structural("multiplication table is not square".into()));
            }
            if !is_permutation(row) {
                return Err(Error::Structural("multiplication table row is not a permutation".into()));
            }
        }
        for col in 0..n {
            let column: Vec<usize> = table.iter().map(|r| r[col]).collect();
            if !is_permutation(&column) {
                return Err(Error::Structural("multiplication table column is not a permutation".into()));
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| Error::Structural("no identity element".into()))?;
        let mut inverse = vec![0; n];
        for g in 0..n {
            inverse[g] = (0..n)
                .find(|&h| table[g][h] == identity && table[h][g] == identity)
                .ok_or_else(|| Error::Structural(format!("element {g} has no inverse")))?;
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::Structural(format!("associativity fails on ({a},{b},{c})")));
                    }
                }
            }
        }
        Ok(Self {
            mul_table: table,
            identity,
            inverse,
            generators: Vec::new(),
        })
    }

    /// Records `gens` as the generating set, checking that they generate.
    pub fn with_generators(mut self, gens: Vec<usize>) -> Result<Self> {
        let n = self.order();
        if gens.iter().any(|&g| g >= n) {
            return Err(Error::Structural("generator index out of range".into()));
        }
        let mut reached = vec![false; n];
        reached[self.identity] = true;
        let mut queue = vec![self.identity];
        while let Some(a) = queue.pop() {
            for &g in &gens {
                let b = self.mul_table[a][g];
                if !reached[b] {
                    reached[b] = true;
                    queue.push(b);
                }
            }
        }
        if reached.iter().any(|r| !r) {
            return Err(Error::Structural("generators do not generate the group".into()));
        }
        self.generators = gens;
        Ok(self)
    }

    pub fn trivial() -> Self {
        Self {
            mul_table: vec![vec![0]],
            identity: 0,
            inverse: vec![0],
            generators: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.mul_table.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul_table[a][b]
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inverse[g]
    }

    pub fn mul_table(&self) -> &[Vec<usize>] {
        &self.mul_table
    }

    /// Indices of the generators, when the group came from generator closure.
    pub fn generators(&self) -> &[usize] {
        &self.generators
    }
}

fn is_permutation(row: &[usize]) -> bool {
    let mut seen = vec![false; row.len()];
    for &x in row {
        if x >= row.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

/// A matrix representation of a finite group.
#[derive(Debug, Clone)]
pub struct Representation {
    group: Arc<FiniteGroup>,
    dim: usize,
    matrices: Vec<CMat>,
    inverses: Vec<CMat>,
}

impl Representation {
    /// Wraps one matrix per group element. Checks shapes and invertibility;
    /// the homomorphism property is checked by [`check_representation`].
    pub fn new(group: Arc<FiniteGroup>, matrices: Vec<CMat>) -> Result<Self> {
        if matrices.len() != group.order() {
            return Err(Error::Structural(format!(
                "{} matrices for a group of order {}",
                matrices.len(),
                group.order()
            )));
        }
        let dim = matrices[0].nrows();
        if dim == 0 {
            return Err(Error::Structural("zero-dimensional representation".into()));
        }
        let mut inverses = Vec::with_capacity(matrices.len());
        for (g, m) in matrices.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Structural(format!(
                    "matrix {g} has shape {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let inv = m
                .clone()
                .try_inverse()
                .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
                .ok_or(Error::SingularRepresentation { element: g })?;
            inverses.push(inv);
        }
        Ok(Self {
            group,
            dim,
            matrices,
            inverses,
        })
    }

    /// Closes a set of generator matrices under multiplication.
    ///
    /// Element 0 is the identity; generators follow in the given order
    /// (duplicates collapse), then products in breadth-first order.
    pub fn from_generators(generators: &[CMat], cap: usize) -> Result<Self> {
        let dim = generators
            .first()
            .map(|g| g.nrows())
            .ok_or_else(|| Error::Structural("no generators".into()))?;
        for g in generators {
            if g.nrows() != dim || g.ncols() != dim {
                return Err(Error::Structural("generators differ in shape".into()));
            }
        }
        let find = |elems: &[CMat], m: &CMat| {
            elems
                .iter()
                .position(|e| linalg::max_abs(&(e - m)) < CLOSURE_TOL)
        };
        let mut elems: Vec<CMat> = vec![linalg::identity(dim)];
        let mut gen_idx = Vec::new();
        for g in generators {
            match find(&elems, g) {
                Some(k) => gen_idx.push(k),
                None => {
                    elems.push(g.clone());
                    gen_idx.push(elems.len() - 1);
                }
            }
        }
        let mut frontier = 0;
        while frontier < elems.len() {
            for g in generators {
                let prod = &elems[frontier] * g;
                if find(&elems, &prod).is_none() {
                    if elems.len() >= cap {
                        return Err(Error::ClosureCap { cap });
                    }
                    elems.push(prod);
                }
            }
            frontier += 1;
        }
        let n = elems.len();
        let mut table = vec![vec![0; n]; n];
        for a in 0..n {
            for b in 0..n {
                let prod = &elems[a] * &elems[b];
                table[a][b] = find(&elems, &prod).ok_or_else(|| {
                    Error::Structural("generator closure is not closed under products".into())
                })?;
            }
        }
        let mut group = FiniteGroup::from_table(table)?;
        gen_idx.dedup();
        group.generators = gen_idx;
        Self::new(Arc::new(group), elems)
    }

    /// Every element acts as the identity on `C^dim`.
    pub fn trivial(group: Arc<FiniteGroup>, dim: usize) -> Self {
        let mats = vec![linalg::identity(dim); group.order()];
        Self::new(group, mats).expect("identity matrices form a representation")
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self, g: usize) -> &CMat {
        &self.matrices[g]
    }

    pub fn inverse_matrix(&self, g: usize) -> &CMat {
        &self.inverses[g]
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.matrices
    }

    /// Elements whose commutation constraints determine the commutant.
    fn constraint_elements(&self) -> Vec<usize> {
        if self.group.generators.is_empty() {
            (0..self.group.order()).collect()
        } else {
            self.group.generators.clone()
        }
    }

    /// Same group, new matrices (e.g. the induced action on a center space).
    pub fn with_matrices(&self, matrices: Vec<CMat>) -> Result<Self> {
        Self::new(Arc::clone(&self.group), matrices)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationReport {
    /// Pairs `(g, h)` with `‖ρ(gh) − ρ(g)ρ(h)‖_max` above tolerance.
    pub violations: Vec<(usize, usize)>,
    pub max_residual: f64,
    pub worst_pair: (usize, usize),
    pub identity_residual: f64,
}

impl RepresentationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `ρ(e) = I` and `ρ(gh) = ρ(g)ρ(h)` over every pair.
pub fn check_representation(rep: &Representation, tol: f64) -> RepresentationReport {
    let group = rep.group();
    let n = group.order();
    let identity_residual =
        linalg::max_abs(&(rep.matrix(group.identity()) - linalg::identity(rep.dim())));
    let mut violations = Vec::new();
    let mut max_residual = 0.0;
    let mut worst_pair = (group.identity(), group.identity());
    for g in 0..n {
        for h in 0..n {
            let lhs = rep.matrix(group.mul(g, h));
            let rhs = rep.matrix(g) * rep.matrix(h);
            let r = linalg::max_abs(&(lhs - rhs));
            if r > max_residual {
                max_residual = r;
                worst_pair = (g, h);
            }
            if r > tol {
                violations.push((g, h));
            }
        }
    }
    RepresentationReport {
        violations,
        max_residual,
        worst_pair,
        identity_residual,
    }
}

/// Group average `(1/|G|) Σ_g ρL(g) · M · ρR(g)⁻¹`.
///
/// The result intertwines the two representations. With `left == right`
/// this is the projection onto the commutant.
pub fn equivariant_average(left: &Representation, right: &Representation, m: &CMat) -> Result<CMat> {
    if left.group() != right.group() {
        return Err(Error::GroupMismatch);
    }
    if m.nrows() != left.dim() || m.ncols() != right.dim() {
        return Err(Error::Structural(format!(
            "matrix is {}x{}, expected {}x{}",
            m.nrows(),
            m.ncols(),
            left.dim(),
            right.dim()
        )));
    }
    let order = left.group().order();
    let mut acc = linalg::zeros(m.nrows(), m.ncols());
    for g in 0..order {
        acc += left.matrix(g) * m * right.inverse_matrix(g);
    }
    Ok(acc / num_complex::Complex64::new(order as f64, 0.0))
}

/// Basis of `{X : ρ(g) X = X ρ(g) for all g}`, orthonormal in the Frobenius
/// inner product.
pub fn commutant_basis(rep: &Representation) -> Vec<CMat> {
    let d = rep.dim();
    let eye = linalg::identity(d);
    let elems = rep.constraint_elements();
    let mut stacked = linalg::zeros(elems.len() * d * d, d * d);
    for (k, &g) in elems.iter().enumerate() {
        let a = rep.matrix(g);
        // vec(AX - XA) = (I ⊗ A - Aᵀ ⊗ I) vec X
        let block = linalg::kron(&eye, a) - linalg::kron(&a.transpose(), &eye);
        stacked.view_mut((k * d * d, 0), (d * d, d * d)).copy_from(&block);
    }
    let scale = rep.matrices().iter().map(linalg::max_abs).fold(1.0, f64::max);
    let sv = linalg::singular_values(&stacked);
    let cut = linalg::RANK_TOL * sv.first().copied().unwrap_or(0.0).max(scale);
    let ns = linalg::null_space_abs(&stacked, cut);
    (0..ns.ncols())
        .map(|j| linalg::unvectorize(&ns.column(j).into_owned(), d, d))
        .collect()
}

/// Coordinates of `x` in an orthonormal (Frobenius) basis.
pub fn coordinates(basis: &[CMat], x: &CMat) -> Vec<num_complex::Complex64> {
    basis.iter().map(|b| b.dotc(x)).collect()
}

/// The standard D₃ permutation representation on `C³`, generated
/// by the transposition `κ` (swap cells 2 and 3) and the 3-cycle `γ`.
/// Element 1 is `κ`, element 2 is `γ`.
pub fn d3_permutation_rep() -> Representation {
    let kappa = linalg::from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    let gamma = linalg::from_real(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    Representation::from_generators(&[kappa, gamma], DEFAULT_CLOSURE_CAP)
        .expect("D3 generators close to a group of order 6")
}
