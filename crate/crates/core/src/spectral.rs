//! Critical eigenvalues, eigenfunction bases `Φ`, `Ψ` normalized so that
//! `(Ψ, Φ) = I`, the reduced matrix `B`, and the group action `G` induced
//! on the center coordinates.

use std::ops::Range;

use num_complex::Complex64;

use crate::delay::{self, char_matrix, char_matrix_derivative, DelayOperator, ExpVector};
use crate::error::{Error, Result};
use crate::group::{self, Representation};
use crate::linalg::{self, CMat, CVec, ONE, ZERO};

/// Relative singular-value cutoff for null spaces of `Δ(λ)`.
pub const MULTIPLICITY_TOL: f64 = 1e-8;
/// Tolerance for `‖Δ(λ)u‖` and for `(Ψ,Φ) = I`.
pub const FRAME_TOL: f64 = 1e-9;
/// Largest residual accepted for an equivariant operator.
pub const EQUIVARIANCE_TOL: f64 = 1e-10;
/// Pointwise tolerance for `ρ(g)Φ(θ) = Φ(θ)G(g)`.
pub const INDUCED_TOL: f64 = 1e-8;

const ROOT_TOL: f64 = 1e-12;
const DERIVATIVE_FLOOR: f64 = 1e-14;
const MAX_ITER: usize = 100;
const POLISH_ITER: usize = 12;
const POLISH_NULLITY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootMethod {
    Newton,
    Secant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootResult {
    pub lambda: Complex64,
    /// `|det Δ(λ)|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub method: RootMethod,
    /// Set when `|d/dλ det Δ|` dropped below the floor along the way.
    pub suspected_multiple: bool,
}

fn adjugate(m: &CMat) -> CMat {
    let n = m.nrows();
    if n == 1 {
        return CMat::from_element(1, 1, ONE);
    }
    let mut adj = linalg::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = m.clone().remove_row(j).remove_column(i);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(i, j)] = minor.determinant() * sign;
        }
    }
    adj
}

/// `det Δ(λ)` and its derivative by Jacobi's formula `tr(adj(Δ) Δ')`.
pub fn det_and_derivative(op: &DelayOperator, lambda: Complex64) -> (Complex64, Complex64) {
    let d = char_matrix(op, lambda);
    let dp = char_matrix_derivative(op, lambda);
    let det = d.determinant();
    let deriv = (adjugate(&d) * dp).trace();
    (det, deriv)
}

/// Newton iteration on `det Δ(λ)` from the seed `lambda0`, then a polish
/// on the logarithmic derivative `tr(Δ⁻¹Δ')` scaled by the nullity of `Δ`.
///
/// Falls back to a secant iteration when the derivative vanishes, which
/// happens near multiple roots. A semisimple root of multiplicity `m` makes
/// `det Δ` vanish to order `m`, so the determinant alone only locates it to
/// about `ε^(1/m)`; the polish restores full precision.
pub fn find_root(op: &DelayOperator, lambda0: Complex64) -> Result<RootResult> {
    let mut r = coarse_root(op, lambda0)?;
    r.lambda = polish(op, r.lambda);
    r.residual = char_matrix(op, r.lambda).determinant().norm();
    Ok(r)
}

fn smallest_singular(op: &DelayOperator, lambda: Complex64) -> f64 {
    linalg::singular_values(&char_matrix(op, lambda)).into_iter().fold(f64::INFINITY, f64::min)
}

fn polish(op: &DelayOperator, start: Complex64) -> Complex64 {
    let s = linalg::singular_values(&char_matrix(op, start));
    let top = s.iter().copied().fold(1.0, f64::max);
    let m = s.iter().filter(|&&x| x < POLISH_NULLITY_TOL * top).count().max(1) as f64;
    let mut lambda = start;
    for _ in 0..POLISH_ITER {
        let d = char_matrix(op, lambda);
        let Some(inv) = d.lu().try_inverse() else { break };
        let log_deriv = (inv * char_matrix_derivative(op, lambda)).trace();
        if log_deriv.norm() == 0.0 || !log_deriv.norm().is_finite() {
            break;
        }
        let step = Complex64::new(m, 0.0) / log_deriv;
        lambda -= step;
        if step.norm() <= 4.0 * f64::EPSILON * lambda.norm().max(1.0) {
            break;
        }
    }
    if smallest_singular(op, lambda) <= smallest_singular(op, start) {
        lambda
    } else {
        start
    }
}

fn coarse_root(op: &DelayOperator, lambda0: Complex64) -> Result<RootResult> {
    let mut lambda = lambda0;
    let mut suspected_multiple = false;
    for it in 0..MAX_ITER {
        let (f, fp) = det_and_derivative(op, lambda);
        if !(f.re.is_finite() && f.im.is_finite()) {
            break;
        }
        if f.norm() < ROOT_TOL {
            return Ok(RootResult {
                lambda,
                residual: f.norm(),
                iterations: it,
                method: RootMethod::Newton,
                suspected_multiple,
            });
        }
        if fp.norm() < DERIVATIVE_FLOOR {
            suspected_multiple = true;
            return secant(op, lambda, it, suspected_multiple);
        }
        lambda -= f / fp;
    }
    let residual = char_matrix(op, lambda).determinant().norm();
    Err(Error::NonConvergence { iterations: MAX_ITER, last: lambda, residual })
}

fn secant(op: &DelayOperator, start: Complex64, used: usize, flagged: bool) -> Result<RootResult> {
    let det = |l: Complex64| char_matrix(op, l).determinant();
    let h = Complex64::new(1e-4, 1e-4) * start.norm().max(1.0);
    let (mut x0, mut x1) = (start, start + h);
    let (mut f0, mut f1) = (det(x0), det(x1));
    for it in used..MAX_ITER {
        if f1.norm() < ROOT_TOL {
            return Ok(RootResult {
                lambda: x1,
                residual: f1.norm(),
                iterations: it,
                method: RootMethod::Secant,
                suspected_multiple: flagged,
            });
        }
        let denom = f1 - f0;
        if denom.norm() == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / denom;
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = det(x1);
    }
    Err(Error::NonConvergence { iterations: MAX_ITER, last: x1, residual: f1.norm() })
}

/// Eigenfunction bases for a semisimple set of critical eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralFrame {
    pub op: DelayOperator,
    /// Distinct eigenvalues in caller order.
    pub lambdas: Vec<Complex64>,
    /// Column range of each eigenvalue inside `Φ`.
    pub blocks: Vec<Range<usize>>,
    pub phi: Vec<ExpVector>,
    pub psi: Vec<ExpVector>,
    pub b: CMat,
    /// Set for `λ̄` blocks whose bases are conjugates of an earlier `λ` block.
    pub conjugate_of: Vec<Option<usize>>,
    pub g: Option<Representation>,
}

impl SpectralFrame {
    pub fn c(&self) -> usize {
        self.phi.len()
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.blocks.iter().map(|r| r.len()).collect()
    }

    /// `Φ(θ)`, an `n × c` matrix.
    pub fn phi_at(&self, theta: f64) -> CMat {
        delay::eval_columns(&self.phi, theta, self.n())
    }

    /// `Ψ(s)`, a `c × n` matrix.
    pub fn psi_at(&self, s: f64) -> CMat {
        delay::eval_rows(&self.psi, s, self.n())
    }

    pub fn gram(&self) -> Result<CMat> {
        delay::gram(&self.psi, &self.phi, &self.op)
    }

    /// Index of the eigenvalue block holding column `j`.
    pub fn block_of(&self, j: usize) -> usize {
        self.blocks.iter().position(|r| r.contains(&j)).expect("column in range")
    }

    /// Residuals of the frame invariants.
    pub fn check(&self) -> Result<FrameReport> {
        let mut null_residual: f64 = 0.0;
        for f in &self.phi {
            let r = char_matrix(&self.op, f.exponent) * &f.direction;
            null_residual = null_residual.max(r.norm() / f.direction.norm());
        }
        for p in &self.psi {
            let r = p.direction.transpose() * char_matrix(&self.op, p.exponent);
            null_residual = null_residual.max(r.norm() / p.direction.norm());
        }
        let gram = self.gram()?;
        let gram_residual = linalg::max_abs(&(gram - linalg::identity(self.c())));
        let mut b_diag_residual: f64 = 0.0;
        for (j, f) in self.phi.iter().enumerate() {
            for i in 0..self.c() {
                let expect = if i == j { f.exponent } else { ZERO };
                b_diag_residual = b_diag_residual.max((self.b[(i, j)] - expect).norm());
            }
        }
        let commute_residual = match &self.g {
            Some(g) => g
                .matrices()
                .iter()
                .map(|m| linalg::max_abs(&linalg::commutator(&self.b, m)))
                .fold(0.0, f64::max),
            None => 0.0,
        };
        Ok(FrameReport { null_residual, gram_residual, b_diag_residual, commute_residual })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub null_residual: f64,
    pub gram_residual: f64,
    pub b_diag_residual: f64,
    pub commute_residual: f64,
}

impl FrameReport {
    pub fn passes(&self) -> bool {
        self.null_residual < FRAME_TOL
            && self.gram_residual < FRAME_TOL
            && self.b_diag_residual < FRAME_TOL
            && self.commute_residual < 1e-10
    }
}

fn first_nonzero(v: &CVec) -> Option<Complex64> {
    let scale = v.norm();
    v.iter().copied().find(|z| z.norm() > 1e-8 * scale)
}

/// Rotates the phase so the first nonzero entry is real and positive.
fn phase_normalized(v: CVec) -> CVec {
    match first_nonzero(&v) {
        Some(z) => {
            let phase = z.conj() / z.norm();
            v * phase
        }
        None => v,
    }
}

/// Magnitude of the terms making up `Δ(λ)`, the reference for rank cutoffs.
pub fn delta_scale(op: &DelayOperator, lambda: Complex64) -> f64 {
    let terms: f64 = op
        .terms()
        .iter()
        .map(|t| linalg::frob(&t.matrix) * (-lambda * t.delay).exp().norm())
        .sum();
    (lambda.norm() + terms).max(1.0)
}

/// Null space of `Δ(λ)` with the cutoff scaled by [`delta_scale`].
pub fn char_null_space(op: &DelayOperator, lambda: Complex64, transpose: bool) -> CMat {
    let d = char_matrix(op, lambda);
    let d = if transpose { d.transpose() } else { d };
    linalg::null_space_abs(&d, MULTIPLICITY_TOL * delta_scale(op, lambda))
}

fn default_directions(ns: &CMat) -> Vec<CVec> {
    let mut dirs: Vec<CVec> = (0..ns.ncols())
        .map(|j| phase_normalized(ns.column(j).into_owned()))
        .collect();
    // stable: ties keep null-space index order
    dirs.sort_by(|a, b| {
        let ka = first_nonzero(a).map_or(0.0, |z| z.norm());
        let kb = first_nonzero(b).map_or(0.0, |z| z.norm());
        kb.partial_cmp(&ka).unwrap_or(std::cmp::Ordering::Equal)
    });
    dirs
}

/// Builds `Φ`, `Ψ` and `B` for the eigenvalues `lambdas`.
///
/// `seeds`, when given, supplies the right null vectors per eigenvalue
/// (`None` entries fall back to the default ordering). For a real operator
/// an eigenvalue whose conjugate appears earlier reuses the conjugated
/// bases of that earlier block.
pub fn eigenbasis(
    op: &DelayOperator,
    lambdas: &[Complex64],
    seeds: Option<&[Option<Vec<CVec>>]>,
) -> Result<SpectralFrame> {
    if lambdas.is_empty() {
        return Err(Error::Multiplicity("empty eigenvalue set".into()));
    }
    if let Some(s) = seeds {
        if s.len() != lambdas.len() {
            return Err(Error::Multiplicity("one seed entry per eigenvalue required".into()));
        }
    }
    for (i, a) in lambdas.iter().enumerate() {
        if lambdas[..i].iter().any(|b| (a - b).norm() < 1e-10 * a.norm().max(1.0)) {
            return Err(Error::Multiplicity(format!("eigenvalue {a} listed twice")));
        }
    }
    let real_op = op.is_real(0.0);
    let n = op.n();
    let mut phi: Vec<ExpVector> = Vec::new();
    let mut blocks: Vec<Range<usize>> = Vec::new();
    let mut conjugate_of: Vec<Option<usize>> = Vec::new();
    let mut raw_left: Vec<Vec<CVec>> = Vec::new();

    for (k, &lambda) in lambdas.iter().enumerate() {
        let delta = char_matrix(op, lambda);
        let s = linalg::singular_values(&delta);
        let smax = delta_scale(op, lambda);
        let smin = s.last().copied().unwrap_or(0.0);
        if smin > MULTIPLICITY_TOL * smax {
            return Err(Error::NotARoot(lambda, smin));
        }
        let conj_src = if real_op {
            lambdas[..k]
                .iter()
                .position(|l| (l.conj() - lambda).norm() < 1e-10 * lambda.norm().max(1.0))
                .filter(|&i| conjugate_of[i].is_none())
        } else {
            None
        };
        let seeded = seeds.and_then(|s| s[k].clone());
        let dirs: Vec<CVec> = match (&seeded, conj_src) {
            (Some(v), _) => {
                let geo = char_null_space(op, lambda, false).ncols();
                if v.len() != geo {
                    return Err(Error::Multiplicity(format!(
                        "{} seed vectors for a null space of dimension {geo} at {lambda}",
                        v.len()
                    )));
                }
                for u in v {
                    if u.len() != n || (&delta * u).norm() > FRAME_TOL * u.norm() * smax {
                        return Err(Error::NotARoot(lambda, (&delta * u).norm()));
                    }
                }
                v.clone()
            }
            (None, Some(i)) => phi[blocks[i].clone()]
                .iter()
                .map(|f| f.direction.map(|z| z.conj()))
                .collect(),
            (None, None) => default_directions(&char_null_space(op, lambda, false)),
        };
        let start = phi.len();
        for u in dirs {
            phi.push(ExpVector::column(u, lambda));
        }
        blocks.push(start..phi.len());
        conjugate_of.push(conj_src);

        let left = char_null_space(op, lambda, true);
        if left.ncols() != blocks[k].len() {
            return Err(Error::Multiplicity(format!(
                "left null space dimension {} differs from right {} at {lambda}",
                left.ncols(),
                blocks[k].len()
            )));
        }
        raw_left.push((0..left.ncols()).map(|j| left.column(j).into_owned()).collect());
    }

    let mut psi: Vec<ExpVector> = vec![ExpVector::row(CVec::zeros(n), ZERO); phi.len()];
    for (k, &lambda) in lambdas.iter().enumerate() {
        let range = blocks[k].clone();
        if let Some(i) = conjugate_of[k] {
            let src = blocks[i].clone();
            for (dst, s) in range.zip(src) {
                psi[dst] = psi[s].conj();
            }
            continue;
        }
        let rows: Vec<ExpVector> = raw_left[k]
            .iter()
            .map(|w| ExpVector::row(w.clone(), lambda))
            .collect();
        let gram = delay::gram(&rows, &phi[range.clone()], op)?;
        let sv = linalg::singular_values(&gram);
        let (gmax, gmin) = (sv[0], *sv.last().expect("nonempty"));
        if !(gmin > 1e-10 * gmax.max(1e-300)) {
            return Err(Error::DefectiveSpectrum);
        }
        let inv = gram.try_inverse().ok_or(Error::DefectiveSpectrum)?;
        for (a, dst) in range.enumerate() {
            let mut w = CVec::zeros(n);
            for (b, row) in rows.iter().enumerate() {
                w += &row.direction * inv[(a, b)];
            }
            psi[dst] = ExpVector::row(w, lambda);
        }
    }

    let c = phi.len();
    let mut b = linalg::zeros(c, c);
    for (j, f) in phi.iter().enumerate() {
        b[(j, j)] = f.exponent;
    }
    let frame = SpectralFrame {
        op: op.clone(),
        lambdas: lambdas.to_vec(),
        blocks,
        phi,
        psi,
        b,
        conjugate_of,
        g: None,
    };
    let gram = frame.gram()?;
    if linalg::max_abs(&(gram - linalg::identity(c))) > FRAME_TOL {
        return Err(Error::DefectiveSpectrum);
    }
    Ok(frame)
}

/// `G(g)_{ij} = (ψ_i, ρ(g)φ_j)`, the action induced on the center space.
pub fn induce_representation(frame: &SpectralFrame, rep: &Representation) -> Result<Representation> {
    let residual = delay::check_equivariance(&frame.op, rep)?;
    if residual > EQUIVARIANCE_TOL {
        return Err(Error::Equivariance { residual, tolerance: EQUIVARIANCE_TOL });
    }
    let c = frame.c();
    let mut mats = Vec::with_capacity(rep.group().order());
    for rho in rep.matrices() {
        let moved: Vec<ExpVector> = frame.phi.iter().map(|f| f.transformed(rho)).collect();
        let mut g = linalg::zeros(c, c);
        for i in 0..c {
            for j in 0..c {
                g[(i, j)] = delay::bilinear_form(&frame.psi[i], &moved[j], &frame.op)?;
            }
        }
        mats.push(g);
    }
    let induced = rep.with_matrices(mats)?;
    let report = group::check_representation(&induced, INDUCED_TOL);
    if !report.is_valid() || report.identity_residual > INDUCED_TOL {
        return Err(Error::InducedRepresentation(report.max_residual.max(report.identity_residual)));
    }
    let tau = frame.op.horizon();
    let mut worst: f64 = 0.0;
    for k in 0..=16 {
        let theta = -tau * k as f64 / 16.0;
        let phi = frame.phi_at(theta);
        let scale = linalg::max_abs(&phi).max(1.0);
        for (g, rho) in rep.matrices().iter().enumerate() {
            let r = linalg::max_abs(&(rho * &phi - &phi * induced.matrix(g)));
            worst = worst.max(r / scale);
        }
    }
    if worst > INDUCED_TOL {
        return Err(Error::InducedRepresentation(worst));
    }
    Ok(induced)
}

impl SpectralFrame {
    /// Attaches the induced representation.
    pub fn with_induced(mut self, rep: &Representation) -> Result<Self> {
        self.g = Some(induce_representation(&self, rep)?);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{ode, scalar, DelayTerm};
    use crate::group::{d3_permutation_rep, FiniteGroup};
    use crate::linalg::{c, from_real, I};
    use std::f64::consts::FRAC_PI_2;
    use std::sync::Arc;

    #[test]
    fn ode_root_is_found_from_nearby_seed() {
        let op = ode(from_real(2, 2, &[2.0, 0.0, 0.0, 3.0])).unwrap();
        let r = find_root(&op, c(2.1, 0.0)).unwrap();
        assert!((r.lambda - c(2.0, 0.0)).norm() < 1e-10);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn quarter_period_delay_has_root_at_i() {
        // Δ(λ) = λ + e^{−λπ/2}; Δ(i) = i + e^{−iπ/2} = 0
        let op = scalar(-1.0, FRAC_PI_2);
        let r = find_root(&op, c(0.0, 0.9)).unwrap();
        assert!((r.lambda - I).norm() < 1e-12);
        assert_eq!(r.method, RootMethod::Newton);
    }

    #[test]
    fn double_root_flags_or_converges() {
        // det = (λ − 1)² has a double root at 1
        let op = ode(linalg::identity(2)).unwrap();
        let r = find_root(&op, c(1.3, 0.1)).unwrap();
        assert!((r.lambda - ONE).norm() < 1e-12);
    }

    #[test]
    fn symmetric_double_root_is_polished() {
        // two uncoupled copies of ż = −(π/2) z(t − 1): det Δ = (λ + (π/2)e^{−λ})²
        let a = from_real(2, 2, &[-FRAC_PI_2, 0.0, 0.0, -FRAC_PI_2]);
        let op = DelayOperator::new(2, vec![DelayTerm { delay: 1.0, matrix: a }]).unwrap();
        let r = find_root(&op, c(0.0, 1.5)).unwrap();
        assert!((r.lambda - I * FRAC_PI_2).norm() < 1e-13, "{}", r.lambda);
        assert!(eigenbasis(&op, &[r.lambda, r.lambda.conj()], None).is_ok());
    }

    #[test]
    fn overflow_reports_nonconvergence() {
        // e^{-λ} overflows far in the left half plane
        let op = scalar(1.0, 1.0);
        let err = find_root(&op, c(-1000.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn ode_frame_is_trivial_pairing() {
        let op = ode(from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        let frame = eigenbasis(&op, &[ONE], None).unwrap();
        assert_eq!(frame.c(), 1);
        let u = &frame.phi[0].direction;
        assert!((u[0] - ONE).norm() < 1e-14 && u[1].norm() < 1e-14);
        let w = &frame.psi[0].direction;
        assert!((w[0] - ONE).norm() < 1e-14 && w[1].norm() < 1e-14);
        assert!((frame.b[(0, 0)] - ONE).norm() < 1e-15);
        assert!(frame.check().unwrap().passes());
    }

    #[test]
    fn non_root_is_rejected() {
        let op = ode(from_real(1, 1, &[2.0])).unwrap();
        assert!(matches!(eigenbasis(&op, &[ONE], None), Err(Error::NotARoot(..))));
    }

    #[test]
    fn repeated_eigenvalue_is_rejected() {
        let op = ode(from_real(1, 1, &[2.0])).unwrap();
        let l = c(2.0, 0.0);
        assert!(matches!(eigenbasis(&op, &[l, l], None), Err(Error::Multiplicity(_))));
    }

    #[test]
    fn jordan_block_is_defective() {
        // ż = J z with a 2x2 Jordan block at 0: one eigenfunction, Gram (w·u) = 0
        let op = ode(from_real(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(eigenbasis(&op, &[ZERO], None).unwrap_err(), Error::DefectiveSpectrum);
    }

    #[test]
    fn trivial_group_induces_identity() {
        let op = scalar(-1.0, FRAC_PI_2);
        let frame = eigenbasis(&op, &[I, -I], None).unwrap();
        let rep = Representation::trivial(Arc::new(FiniteGroup::trivial()), 1);
        let frame = frame.with_induced(&rep).unwrap();
        let g = frame.g.as_ref().unwrap();
        assert!(linalg::max_abs(&(g.matrix(0) - linalg::identity(2))) < 1e-12);
        assert_eq!(frame.conjugate_of, vec![None, Some(0)]);
        // conjugate convention: ψ₂ = ψ̄₁
        assert!((frame.psi[1].direction[0] - frame.psi[0].direction[0].conj()).norm() == 0.0);
    }

    #[test]
    fn non_equivariant_operator_cannot_induce() {
        let i3 = linalg::identity(3);
        let op = DelayOperator::new(
            3,
            vec![
                DelayTerm { delay: 0.0, matrix: -i3.clone() * c(2.0, 0.0) },
                DelayTerm { delay: 1.0, matrix: linalg::elementary(3, 3, 0, 0) },
            ],
        )
        .unwrap();
        let frame = eigenbasis(&op, &[c(-2.0, 0.0)], None).unwrap();
        let err = induce_representation(&frame, &d3_permutation_rep()).unwrap_err();
        assert!(matches!(err, Error::Equivariance { .. }));
    }
}
