//! Linear retarded equations with finitely many point delays,
//! `ż(t) = Σ_k A_k z(t − r_k)`.
//!
//! Holds the characteristic matrix, the equivariance check, and the adjoint
//! bilinear form between exponential row and column functions, both in
//! closed form and by quadrature.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::Representation;
use crate::linalg::{self, CMat, CVec, ZERO};
use crate::quadrature;

/// One point-delay term `A z(−r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub delay: f64,
    pub matrix: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayOperator {
    n: usize,
    terms: Vec<DelayTerm>,
}

impl DelayOperator {
    pub fn new(n: usize, terms: Vec<DelayTerm>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structural("state dimension must be positive".into()));
        }
        if terms.is_empty() {
            return Err(Error::Structural("operator needs at least one term".into()));
        }
        for (k, t) in terms.iter().enumerate() {
            if !(t.delay.is_finite() && t.delay >= 0.0) {
                return Err(Error::InvalidDelays(format!("term {k} has delay {}", t.delay)));
            }
            if t.matrix.nrows() != n || t.matrix.ncols() != n {
                return Err(Error::Structural(format!("term {k} matrix is not {n}x{n}")));
            }
            if terms[..k].iter().any(|o| o.delay == t.delay) {
                return Err(Error::InvalidDelays(format!("delay {} repeated", t.delay)));
            }
        }
        Ok(Self { n, terms })
    }

    /// Like [`new`](Self::new) but sums the matrices of coinciding delays.
    pub fn merged(n: usize, terms: Vec<DelayTerm>) -> Result<Self> {
        let mut out: Vec<DelayTerm> = Vec::new();
        for t in terms {
            match out.iter_mut().find(|o| o.delay == t.delay) {
                Some(o) => o.matrix += &t.matrix,
                None => out.push(t),
            }
        }
        Self::new(n, out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[DelayTerm] {
        &self.terms
    }

    /// Largest lag τ; the history interval is `[−τ, 0]`.
    pub fn horizon(&self) -> f64 {
        self.terms.iter().map(|t| t.delay).fold(0.0, f64::max)
    }

    pub fn delays(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.delay).collect()
    }

    /// True when every coefficient matrix is real (within `tol`).
    pub fn is_real(&self, tol: f64) -> bool {
        self.terms
            .iter()
            .all(|t| t.matrix.iter().all(|z| z.im.abs() <= tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `φ(θ) = u e^{λθ}` on `[−τ, 0]`.
    Column,
    /// `ψ(s) = w e^{−λs}` on `[0, τ]`.
    Row,
}

/// Exponential function with a constant vector direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpVector {
    pub direction: CVec,
    pub exponent: Complex64,
    pub side: Side,
}

impl ExpVector {
    pub fn column(direction: CVec, exponent: Complex64) -> Self {
        Self { direction, exponent, side: Side::Column }
    }

    pub fn row(direction: CVec, exponent: Complex64) -> Self {
        Self { direction, exponent, side: Side::Row }
    }

    /// Value at `t` (θ ∈ [−τ,0] for columns, s ∈ [0,τ] for rows).
    pub fn eval(&self, t: f64) -> CVec {
        let arg = match self.side {
            Side::Column => self.exponent * t,
            Side::Row => -self.exponent * t,
        };
        &self.direction * arg.exp()
    }

    /// Applies a matrix to the direction: `M φ` for columns, `ψ M` for rows.
    pub fn transformed(&self, m: &CMat) -> Self {
        let direction = match self.side {
            Side::Column => m * &self.direction,
            Side::Row => (self.direction.transpose() * m).transpose(),
        };
        Self { direction, ..self.clone() }
    }

    pub fn conj(&self) -> Self {
        Self {
            direction: self.direction.map(|z| z.conj()),
            exponent: self.exponent.conj(),
            side: self.side,
        }
    }
}

/// `Δ(λ) = λI − Σ_k A_k e^{−λ r_k}`.
pub fn char_matrix(op: &DelayOperator, lambda: Complex64) -> CMat {
    let mut m = linalg::identity(op.n) * lambda;
    for t in &op.terms {
        m -= &t.matrix * (-lambda * t.delay).exp();
    }
    m
}

/// `Δ'(λ) = I + Σ_k r_k A_k e^{−λ r_k}`.
pub fn char_matrix_derivative(op: &DelayOperator, lambda: Complex64) -> CMat {
    let mut m = linalg::identity(op.n);
    for t in &op.terms {
        m += &t.matrix * ((-lambda * t.delay).exp() * t.delay);
    }
    m
}

/// Largest `‖ρ(g)A_k − A_kρ(g)‖_F` over group elements and terms.
pub fn check_equivariance(op: &DelayOperator, rep: &Representation) -> Result<f64> {
    if rep.dim() != op.n {
        return Err(Error::Structural(format!(
            "representation acts on C^{}, operator on C^{}",
            rep.dim(),
            op.n
        )));
    }
    let mut worst: f64 = 0.0;
    for g in rep.matrices() {
        for t in &op.terms {
            worst = worst.max(linalg::frob(&linalg::commutator(g, &t.matrix)));
        }
    }
    Ok(worst)
}

fn check_pair(psi: &ExpVector, phi: &ExpVector, op: &DelayOperator) -> Result<()> {
    if psi.side != Side::Row || phi.side != Side::Column {
        return Err(Error::Structural("bilinear form takes (row, column)".into()));
    }
    if psi.direction.len() != op.n || phi.direction.len() != op.n {
        return Err(Error::Structural("direction length differs from state dimension".into()));
    }
    Ok(())
}

/// `(ψ, φ) = ψ(0)φ(0) − Σ_k ∫_0^{−r_k} ψ(ξ + r_k) A_k φ(ξ) dξ` in closed form.
///
/// For `ψ = w e^{−μs}` and `φ = u e^{λθ}` each integral is
/// `w A_k u e^{−μ r_k} ∫_0^{−r_k} e^{(λ−μ)ξ} dξ`; the inner integral is
/// `−r_k · exprel(−(λ−μ) r_k)`, which is exact through `λ = μ`.
pub fn bilinear_form(psi: &ExpVector, phi: &ExpVector, op: &DelayOperator) -> Result<Complex64> {
    check_pair(psi, phi, op)?;
    let w = &psi.direction;
    let u = &phi.direction;
    let mu = psi.exponent;
    let d = phi.exponent - mu;
    let mut value = w.transpose() * u;
    let mut acc = value[(0, 0)];
    for t in &op.terms {
        if t.delay == 0.0 {
            continue;
        }
        value = w.transpose() * &t.matrix * u;
        let integral = -linalg::exprel(-d * t.delay) * t.delay;
        acc -= value[(0, 0)] * (-mu * t.delay).exp() * integral;
    }
    Ok(acc)
}

/// Gauss–Legendre panel size used by [`bilinear_form_quadrature`].
pub const QUAD_ORDER: usize = 8;

/// The same form evaluated by composite Gauss–Legendre quadrature of each
/// delay integral, using pointwise values of `ψ` and `φ`. `npoints` is the
/// node count per delay term (rounded up to whole 8-node panels).
pub fn bilinear_form_quadrature(
    psi: &ExpVector,
    phi: &ExpVector,
    op: &DelayOperator,
    npoints: usize,
) -> Result<Complex64> {
    check_pair(psi, phi, op)?;
    if npoints < 8 {
        return Err(Error::Structural("quadrature needs at least 8 points".into()));
    }
    let panels = npoints.div_ceil(QUAD_ORDER);
    let head = psi.eval(0.0).transpose() * phi.eval(0.0);
    let mut acc = head[(0, 0)];
    for t in &op.terms {
        let r = t.delay;
        if r == 0.0 {
            continue;
        }
        let integrand = |xi: f64| -> Cx {
            let v = psi.eval(xi + r).transpose() * &t.matrix * phi.eval(xi);
            Cx(v[(0, 0)])
        };
        // ∫_0^{−r} = −∫_{−r}^0
        let Cx(integral) = quadrature::composite(-r, 0.0, panels, QUAD_ORDER, integrand);
        acc += integral;
    }
    Ok(acc)
}

#[derive(Clone, Copy)]
struct Cx(Complex64);

impl Default for Cx {
    fn default() -> Self {
        Cx(ZERO)
    }
}

impl std::ops::Add for Cx {
    type Output = Cx;
    fn add(self, o: Cx) -> Cx {
        Cx(self.0 + o.0)
    }
}

impl std::ops::Mul<f64> for Cx {
    type Output = Cx;
    fn mul(self, s: f64) -> Cx {
        Cx(self.0 * s)
    }
}

/// Gram matrix `((ψ_i, φ_j))`.
pub fn gram(psi: &[ExpVector], phi: &[ExpVector], op: &DelayOperator) -> Result<CMat> {
    let mut g = linalg::zeros(psi.len(), phi.len());
    for (i, p) in psi.iter().enumerate() {
        for (j, f) in phi.iter().enumerate() {
            g[(i, j)] = bilinear_form(p, f, op)?;
        }
    }
    Ok(g)
}

/// `Φ(θ)` as an `n × c` matrix.
pub fn eval_columns(phi: &[ExpVector], theta: f64, n: usize) -> CMat {
    let mut m = linalg::zeros(n, phi.len());
    for (j, f) in phi.iter().enumerate() {
        m.set_column(j, &f.eval(theta));
    }
    m
}

/// `Ψ(s)` as a `c × n` matrix.
pub fn eval_rows(psi: &[ExpVector], s: f64, n: usize) -> CMat {
    let mut m = linalg::zeros(psi.len(), n);
    for (i, p) in psi.iter().enumerate() {
        m.set_row(i, &p.eval(s).transpose());
    }
    m
}

/// Scalar operator `ż = a z(t − r)`, handy in tests and examples.
pub fn scalar(a: f64, r: f64) -> DelayOperator {
    DelayOperator::new(
        1,
        vec![DelayTerm { delay: r, matrix: linalg::from_real(1, 1, &[a]) }],
    )
    .expect("scalar operator")
}

/// Pure ODE `ż = A z`.
pub fn ode(a: CMat) -> Result<DelayOperator> {
    let n = a.nrows();
    DelayOperator::new(n, vec![DelayTerm { delay: 0.0, matrix: a }])
}
