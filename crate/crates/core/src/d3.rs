//! Three identical cells with self and nearest-neighbour delayed coupling,
//! symmetric under D₃:
//!
//! `ż = −z(t) + α z(t − τ_s) + β (J − I) z(t − τ_n)`.
//!
//! `det Δ = Δ₁ Δ₂²` with `Δ₁ = λ + 1 − αe^{−λτ_s} − 2βe^{−λτ_n}` on the
//! synchronous direction `(1,1,1)` and `Δ₂ = λ + 1 − αe^{−λτ_s} + βe^{−λτ_n}`
//! on the two-dimensional complement.

use std::f64::consts::PI;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::delay::{DelayOperator, DelayTerm};
use crate::error::{Error, Result};
use crate::group::{self, Representation};
use crate::linalg::{self, c, CMat, CVec, I, ONE, ZERO};
use crate::spectral::{eigenbasis, SpectralFrame};
use crate::unfold::{
    assemble_gamma_unfolding, gamma_orbit_geometry, orbit_geometry, realify, semisimple_spec, AssembleOptions,
    Assembly, EntryMask, GammaOrbitGeometry, OrbitGeometry, RealFamily, UnfoldingFamily,
};

/// Residual required of a refined double Hopf point.
pub const DOUBLE_HOPF_TOL: f64 = 1e-10;
/// Smallest admissible frequency gap.
pub const RESONANCE_GAP: f64 = 1e-6;

/// `e^{2πi/3}`.
pub fn omega3() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// `(1, ω, ω̄)`.
pub fn v_vector() -> CVec {
    let w = omega3();
    CVec::from_vec(vec![ONE, w, w.conj()])
}

pub fn sync_vector() -> CVec {
    CVec::from_element(3, ONE)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D3Params {
    pub alpha: f64,
    pub beta: f64,
    pub tau_s: f64,
    pub tau_n: f64,
}

pub fn d3_operator(p: &D3Params) -> Result<DelayOperator> {
    let id = linalg::identity(3);
    let off = linalg::ones(3) - &id;
    DelayOperator::merged(
        3,
        vec![
            DelayTerm { delay: 0.0, matrix: -id.clone() },
            DelayTerm { delay: p.tau_s, matrix: id * c(p.alpha, 0.0) },
            DelayTerm { delay: p.tau_n, matrix: off * c(p.beta, 0.0) },
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    Delta1,
    Delta2,
}

impl Factor {
    /// Coefficient of `βe^{−λτ_n}` subtracted in the factor.
    pub fn coupling(self) -> f64 {
        match self {
            Factor::Delta1 => 2.0,
            Factor::Delta2 => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Factor::Delta1 => "delta1",
            Factor::Delta2 => "delta2",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Factor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta1" => Ok(Factor::Delta1),
            "delta2" => Ok(Factor::Delta2),
            other => Err(Error::Schema(format!("unknown factor {other:?}, expected delta1 or delta2"))),
        }
    }
}

pub fn factor_value(f: Factor, p: &D3Params, lambda: Complex64) -> Complex64 {
    lambda + 1.0 - (-lambda * p.tau_s).exp() * p.alpha - (-lambda * p.tau_n).exp() * (f.coupling() * p.beta)
}

/// `(α, τ_s)` at which `Δ_f(iω) = 0`.
///
/// `sign` picks the sign of `α`; `branch` shifts `τ_s` by `2π·branch/ω`.
pub fn hopf_curve(f: Factor, omega: f64, beta: f64, tau_n: f64, sign: i8, branch: i32) -> (f64, f64) {
    let cb = f.coupling() * beta;
    let x = 1.0 - cb * (omega * tau_n).cos();
    let y = omega + cb * (omega * tau_n).sin();
    let modulus = x.hypot(y);
    let alpha = if sign < 0 { -modulus } else { modulus };
    let shift = if sign < 0 { PI } else { 0.0 };
    let tau_s = ((-y).atan2(x) + shift + 2.0 * PI * branch as f64) / omega;
    (alpha, tau_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub omega: f64,
    pub alpha: f64,
    pub tau_s: f64,
    pub sign: i8,
    pub branch: i32,
    pub factor: Factor,
}

/// `start, start + step, …` up to `end` inclusive.
pub fn omega_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) || step <= 0.0 || start <= 0.0 || end < start {
        return Err(Error::Schema(format!(
            "omega range {start}:{end}:{step} must satisfy 0 < start <= end and step > 0"
        )));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + step * k as f64).collect())
}

/// Points on every `(sign, branch)` curve, ordered by sign, branch, then `ω`.
pub fn sweep_curves(
    f: Factor,
    beta: f64,
    tau_n: f64,
    omegas: &[f64],
    branches: RangeInclusive<i32>,
) -> Vec<CurvePoint> {
    let keys: Vec<(i8, i32)> = [1i8, -1].iter().flat_map(|&s| branches.clone().map(move |b| (s, b))).collect();
    keys.par_iter()
        .flat_map_iter(|&(sign, branch)| {
            omegas.iter().map(move |&omega| {
                let (alpha, tau_s) = hopf_curve(f, omega, beta, tau_n, sign, branch);
                CurvePoint { omega, alpha, tau_s, sign, branch, factor: f }
            })
        })
        .collect()
}

pub fn curves_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("omega,alpha,tau_s,sign,branch,factor\n");
    for p in points {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{},{},{}\n",
            p.omega, p.alpha, p.tau_s, p.sign, p.branch, p.factor
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub alpha: (f64, f64),
    pub tau_s: (f64, f64),
}

impl Default for Window {
    fn default() -> Self {
        Self { alpha: (-4.0, 4.0), tau_s: (0.0, 10.0) }
    }
}

impl Window {
    pub fn contains(&self, alpha: f64, tau_s: f64) -> bool {
        (self.alpha.0..=self.alpha.1).contains(&alpha) && (self.tau_s.0..=self.tau_s.1).contains(&tau_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleHopfSeed {
    pub omega1: f64,
    pub omega2: f64,
    pub alpha: f64,
    pub tau_s: f64,
}

/// Crossings between curve polylines of the same `α` sign.
pub fn intersection_seeds(
    f: Factor,
    beta: f64,
    tau_n: f64,
    omegas: &[f64],
    branches: RangeInclusive<i32>,
    window: &Window,
) -> Vec<DoubleHopfSeed> {
    let points = sweep_curves(f, beta, tau_n, omegas, branches.clone());
    let mut curves: Vec<Vec<CurvePoint>> = Vec::new();
    for p in points {
        match curves.last_mut() {
            Some(cur) if cur[0].sign == p.sign && cur[0].branch == p.branch => cur.push(p),
            _ => curves.push(vec![p]),
        }
    }
    // segments inside the window, skipping the jumps where the angle wraps
    let segments: Vec<Vec<(usize, CurvePoint, CurvePoint)>> = curves
        .iter()
        .map(|cur| {
            cur.windows(2)
                .enumerate()
                .filter(|(_, w)| {
                    (window.contains(w[0].alpha, w[0].tau_s) || window.contains(w[1].alpha, w[1].tau_s))
                        && (w[1].tau_s - w[0].tau_s).abs() < 1.0
                        && (w[1].alpha - w[0].alpha).abs() < 1.0
                })
                .map(|(i, w)| (i, w[0], w[1]))
                .collect()
        })
        .collect();
    let mut pairs = Vec::new();
    for a in 0..curves.len() {
        for b in a..curves.len() {
            if curves[a][0].sign == curves[b][0].sign {
                pairs.push((a, b));
            }
        }
    }
    let mut seeds: Vec<DoubleHopfSeed> = pairs
        .par_iter()
        .flat_map_iter(|&(a, b)| {
            let mut found = Vec::new();
            for &(i, p0, p1) in &segments[a] {
                for &(j, q0, q1) in &segments[b] {
                    if a == b && j <= i + 1 {
                        continue;
                    }
                    if let Some((s, t)) = segment_crossing(&p0, &p1, &q0, &q1) {
                        let alpha = p0.alpha + s * (p1.alpha - p0.alpha);
                        let tau_s = p0.tau_s + s * (p1.tau_s - p0.tau_s);
                        if window.contains(alpha, tau_s) {
                            found.push(DoubleHopfSeed {
                                omega1: p0.omega + s * (p1.omega - p0.omega),
                                omega2: q0.omega + t * (q1.omega - q0.omega),
                                alpha,
                                tau_s,
                            });
                        }
                    }
                }
            }
            found
        })
        .collect();
    seeds.sort_by(|x, y| x.tau_s.total_cmp(&y.tau_s).then(x.alpha.total_cmp(&y.alpha)));
    seeds
}

fn segment_crossing(p0: &CurvePoint, p1: &CurvePoint, q0: &CurvePoint, q1: &CurvePoint) -> Option<(f64, f64)> {
    let (rx, ry) = (p1.alpha - p0.alpha, p1.tau_s - p0.tau_s);
    let (sx, sy) = (q1.alpha - q0.alpha, q1.tau_s - q0.tau_s);
    let den = rx * sy - ry * sx;
    if den == 0.0 {
        return None;
    }
    let (dx, dy) = (q0.alpha - p0.alpha, q0.tau_s - p0.tau_s);
    let s = (dx * sy - dy * sx) / den;
    let t = (dx * ry - dy * rx) / den;
    ((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t)).then_some((s, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleHopfPoint {
    pub factor: Factor,
    pub beta: f64,
    pub tau_n: f64,
    pub alpha: f64,
    pub tau_s: f64,
    /// `ω₁ < ω₂`.
    pub omega1: f64,
    pub omega2: f64,
    pub residual: f64,
}

impl DoubleHopfPoint {
    pub fn params(&self) -> D3Params {
        D3Params { alpha: self.alpha, beta: self.beta, tau_s: self.tau_s, tau_n: self.tau_n }
    }

    /// `(iω₁, −iω₁, iω₂, −iω₂)`.
    pub fn lambdas(&self) -> [Complex64; 4] {
        [I * self.omega1, -I * self.omega1, I * self.omega2, -I * self.omega2]
    }

    /// Largest `|Δ_f(±iω_k)|` at the stored parameters.
    pub fn check_residual(&self) -> f64 {
        let p = self.params();
        self.lambdas().iter().map(|&l| factor_value(self.factor, &p, l).norm()).fold(0.0, f64::max)
    }
}

/// Newton on `(α, τ_s, ω₁, ω₂)` for `Δ_f(iω₁) = Δ_f(iω₂) = 0`.
pub fn find_double_hopf(f: Factor, beta: f64, tau_n: f64, seed: &DoubleHopfSeed) -> Result<DoubleHopfPoint> {
    if (seed.omega1 - seed.omega2).abs() < RESONANCE_GAP {
        return Err(Error::Resonant((seed.omega1 - seed.omega2).abs()));
    }
    let cb = f.coupling() * beta;
    let mut x = DVector::from_vec(vec![seed.alpha, seed.tau_s, seed.omega1, seed.omega2]);
    let eval = |x: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let (alpha, tau_s) = (x[0], x[1]);
        let mut r = DVector::zeros(4);
        let mut jac = DMatrix::zeros(4, 4);
        for k in 0..2 {
            let w = x[2 + k];
            let es = Complex64::from_polar(1.0, -w * tau_s);
            let en = Complex64::from_polar(1.0, -w * tau_n);
            let d = I * w + 1.0 - es * alpha - en * cb;
            let d_alpha = -es;
            let d_tau = I * w * alpha * es;
            let d_omega = I + I * tau_s * alpha * es + I * cb * tau_n * en;
            r[2 * k] = d.re;
            r[2 * k + 1] = d.im;
            for (col, z) in [(0, d_alpha), (1, d_tau), (2 + k, d_omega)] {
                jac[(2 * k, col)] = z.re;
                jac[(2 * k + 1, col)] = z.im;
            }
        }
        (r, jac)
    };
    let mut trace = Vec::new();
    for _ in 0..60 {
        let (r, jac) = eval(&x);
        let res = r.amax();
        trace.push(res);
        if res < 1e-13 {
            break;
        }
        let Some(step) = jac.lu().solve(&r) else {
            return Err(Error::DoubleHopf(format!("singular Jacobian after residuals {trace:?}")));
        };
        x -= step;
    }
    let (r, _) = eval(&x);
    let residual = r.amax();
    if !(residual < DOUBLE_HOPF_TOL) {
        return Err(Error::DoubleHopf(format!("no convergence, residual trace {trace:?}")));
    }
    let (mut w1, mut w2) = (x[2].abs(), x[3].abs());
    if (w1 - w2).abs() < RESONANCE_GAP {
        return Err(Error::Resonant((w1 - w2).abs()));
    }
    if w1 > w2 {
        std::mem::swap(&mut w1, &mut w2);
    }
    Ok(DoubleHopfPoint { factor: f, beta, tau_n, alpha: x[0], tau_s: x[1], omega1: w1, omega2: w2, residual })
}

/// Default frequency grid and branches for [`scan_double_hopf`].
pub const SCAN_OMEGA: (f64, f64, f64) = (0.05, 5.0, 0.005);
pub const SCAN_BRANCHES: RangeInclusive<i32> = -1..=8;

/// All refined double Hopf points inside `window`, sorted by `τ_s` then `α`.
pub fn scan_double_hopf(f: Factor, beta: f64, tau_n: f64, window: &Window) -> Result<Vec<DoubleHopfPoint>> {
    let omegas = omega_grid(SCAN_OMEGA.0, SCAN_OMEGA.1, SCAN_OMEGA.2)?;
    let seeds = intersection_seeds(f, beta, tau_n, &omegas, SCAN_BRANCHES, window);
    let refined: Vec<DoubleHopfPoint> =
        seeds.par_iter().filter_map(|s| find_double_hopf(f, beta, tau_n, s).ok()).collect();
    let mut out: Vec<DoubleHopfPoint> = Vec::new();
    for p in refined {
        if !window.contains(p.alpha, p.tau_s) || p.tau_s <= 0.0 {
            continue;
        }
        let dup = out.iter().any(|q| {
            (q.alpha - p.alpha).abs() < 1e-6
                && (q.tau_s - p.tau_s).abs() < 1e-6
                && (q.omega1 - p.omega1).abs() < 1e-6
                && (q.omega2 - p.omega2).abs() < 1e-6
        });
        if !dup {
            out.push(p);
        }
    }
    out.sort_by(|x, y| x.tau_s.total_cmp(&y.tau_s).then(x.alpha.total_cmp(&y.alpha)));
    Ok(out)
}

/// `M_{kj} = e^{−λ_k r_j}`.
pub fn delay_matrix(lambdas: &[Complex64], delays: &[f64]) -> CMat {
    CMat::from_fn(lambdas.len(), delays.len(), |k, j| (-lambdas[k] * delays[j]).exp())
}

/// `|det M|` after scaling each row to unit max-norm.
pub fn row_scaled_det(m: &CMat) -> f64 {
    let mut s = m.clone();
    for mut row in s.row_iter_mut() {
        let scale = row.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale > 0.0 {
            row /= c(scale, 0.0);
        }
    }
    s.determinant().norm()
}

/// Largest `kτ/7` distinct from the other lags, halved until `M` is
/// nonsingular.
pub fn default_tau3(point: &DoubleHopfPoint) -> Result<f64> {
    let tau = point.tau_s.max(point.tau_n);
    let others = [0.0, point.tau_s, point.tau_n];
    let distinct = |d: f64| others.iter().all(|&o| (o - d).abs() > 1e-9 * tau.max(1.0));
    let mut tau3 = (1..=7)
        .rev()
        .map(|k| tau * k as f64 / 7.0)
        .find(|&d| distinct(d))
        .ok_or_else(|| Error::InvalidDelays("no admissible fourth lag".into()))?;
    let lambdas = point.lambdas();
    let mut det = 0.0;
    for _ in 0..=10 {
        det = delay_matrix(&lambdas, &[0.0, point.tau_s, point.tau_n, tau3]).determinant().norm();
        if det > 1e-10 && distinct(tau3) {
            return Ok(tau3);
        }
        tau3 /= 2.0;
    }
    Err(Error::SingularDelayMatrix(det))
}

/// `I` at lag 0 and `τ_s`, `J − I` at `τ_n` and `τ₃`.
pub fn d3_masks() -> Vec<EntryMask> {
    vec![EntryMask::diagonal(3), EntryMask::diagonal(3), EntryMask::off_diagonal(3), EntryMask::off_diagonal(3)]
}

/// Coefficient shapes per lag in the same order as [`d3_masks`].
pub fn d3_patterns() -> Vec<CMat> {
    let id = linalg::identity(3);
    let off = linalg::ones(3) - &id;
    vec![id.clone(), id, off.clone(), off]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Simple eigenvalues from `Δ₁`.
    Simple,
    /// Double eigenvalues from `Δ₂`.
    Double,
}

impl Case {
    pub fn factor(self) -> Factor {
        match self {
            Case::Simple => Factor::Delta1,
            Case::Double => Factor::Delta2,
        }
    }

    /// `(β, τ_n)` of the reference sweeps.
    pub fn reference(self) -> (f64, f64) {
        match self {
            Case::Simple => (-0.5, 4.0),
            Case::Double => (0.5, 3.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::Simple => "simple",
            Case::Double => "double",
        }
    }
}

impl FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Case::Simple),
            "double" => Ok(Case::Double),
            other => Err(Error::Schema(format!("unknown case {other:?}"))),
        }
    }
}

/// First double Hopf point of the reference sweep for `case`.
pub fn reference_point(case: Case) -> Result<DoubleHopfPoint> {
    let (beta, tau_n) = case.reference();
    scan_double_hopf(case.factor(), beta, tau_n, &Window::default())?
        .into_iter()
        .next()
        .ok_or_else(|| Error::DoubleHopf("no double Hopf point in the window".into()))
}

/// Null vector seeds: `(1,1,1)` for `Δ₁`, `(v, v̄)` for `Δ₂`.
pub fn case_seeds(case: Case) -> Vec<Option<Vec<CVec>>> {
    let first = match case {
        Case::Simple => vec![sync_vector()],
        Case::Double => {
            let v = v_vector();
            vec![v.clone(), v.map(|z| z.conj())]
        }
    };
    vec![Some(first.clone()), None, Some(first), None]
}

#[derive(Debug, Clone)]
pub struct CaseRun {
    pub case: Case,
    pub point: DoubleHopfPoint,
    pub op: DelayOperator,
    pub rep: Representation,
    pub frame: SpectralFrame,
    pub geometry: OrbitGeometry,
    pub gamma: GammaOrbitGeometry,
    pub delays: Vec<f64>,
    pub assembly: Assembly,
    pub real: RealFamily,
}

/// Frame, geometry, assembly and real form at a double Hopf point.
pub fn run_case(case: Case, point: &DoubleHopfPoint, options: &AssembleOptions) -> Result<CaseRun> {
    if point.factor != case.factor() {
        return Err(Error::DoubleHopf(format!("{} case needs a {} point", case.name(), case.factor())));
    }
    if (point.tau_s - point.tau_n).abs() < 1e-9 {
        return Err(Error::InvalidDelays("self and coupling delays coincide".into()));
    }
    let op = d3_operator(&point.params())?;
    let rep = group::d3_permutation_rep();
    let seeds = case_seeds(case);
    let frame = eigenbasis(&op, &point.lambdas(), Some(&seeds))?.with_induced(&rep)?;
    let geometry = orbit_geometry(&frame.b, &semisimple_spec(&frame.b))?;
    let gamma = gamma_orbit_geometry(&frame.b, frame.g.as_ref().expect("induced"))?;
    let delays = vec![0.0, point.tau_s, point.tau_n, default_tau3(point)?];
    let assembly = assemble_gamma_unfolding(&op, &rep, &frame, &geometry, &gamma, &delays, options)?;
    let real = realify(&assembly.family)?;
    Ok(CaseRun { case, point: *point, op, rep, frame, geometry, gamma, delays, assembly, real })
}

/// Options reproducing the structure-preserving family.
pub fn d3_options() -> AssembleOptions {
    AssembleOptions { masks: Some(d3_masks()), mini_versal: true }
}

/// Largest deviation of a coefficient matrix from a multiple of its lag's
/// pattern, relative to the largest coefficient.
pub fn pattern_residual(family: &UnfoldingFamily) -> f64 {
    let patterns = d3_patterns();
    let scale = family.directions.iter().flatten().map(linalg::max_abs).fold(0.0, f64::max).max(1e-300);
    let mut worst: f64 = 0.0;
    for dir in &family.directions {
        for (a, p) in dir.iter().zip(&patterns) {
            let coef = p.dotc(a) / p.dotc(p);
            worst = worst.max(linalg::max_abs(&(a - p * coef)) / scale);
        }
    }
    worst
}

/// `(a_0, a_1, b_2, b_3)` per direction.
pub fn pattern_coefficients(family: &UnfoldingFamily) -> Vec<[Complex64; 4]> {
    family.directions.iter().map(|dir| [dir[0][(0, 0)], dir[1][(0, 0)], dir[2][(0, 1)], dir[3][(0, 1)]]).collect()
}

/// Expected `G(γ)` and `G(κ)` in the double case.
pub fn double_case_action() -> (CMat, CMat) {
    let w = omega3();
    let diag = [w, w.conj(), w.conj(), w, w, w.conj(), w.conj(), w];
    let mut g = linalg::zeros(8, 8);
    let mut k = linalg::zeros(8, 8);
    for i in 0..8 {
        g[(i, i)] = diag[i];
        k[(i, i ^ 1)] = ONE;
    }
    (g, k)
}

/// `η₁(ν) = ν¹ + ω̄ν² + ων³`, `η₂(ν) = ν¹ + ων² + ω̄ν³`.
pub fn eta(nu: &CVec) -> (Complex64, Complex64) {
    let w = omega3();
    (nu[0] + w.conj() * nu[1] + w * nu[2], nu[0] + w * nu[1] + w.conj() * nu[2])
}

/// Largest deviation of `Σ_g ρ(g) N_p G(g⁻¹)` from the predicted two-column
/// form, over `p = 1..8`, for a given `ν`.
pub fn column_pattern_residual(g: &Representation, nu: &CVec) -> Result<f64> {
    let rho = group::d3_permutation_rep();
    let v = v_vector();
    let vb = v.map(|z| z.conj());
    let (e1, e2) = eta(nu);
    let order = c(rho.group().order() as f64, 0.0);
    let mut worst: f64 = 0.0;
    for p in 0..8 {
        let mut n = linalg::zeros(3, 8);
        n.set_column(p, nu);
        let bar = group::equivariant_average(&rho, g, &n)? * order;
        // 0-based p: {0,4}, {3,7}, {2,6}, {1,5}
        let (cols, first, second) = match p % 4 {
            0 => ((p, p + 1), &v * e1, &vb * e1),
            3 => ((p - 1, p), &vb * e1, &v * e1),
            2 => ((p, p + 1), &vb * e2, &v * e2),
            _ => ((p - 1, p), &v * e2, &vb * e2),
        };
        let mut expected = linalg::zeros(3, 8);
        expected.set_column(cols.0, &first);
        expected.set_column(cols.1, &second);
        worst = worst.max(linalg::max_abs(&(bar - expected)));
    }
    Ok(worst)
}

/// Whether `η₁` and `η₂` of the nonzero column of each `R^m` are nonzero.
pub fn eta_pattern(r: &[CMat]) -> Vec<(bool, bool)> {
    r.iter()
        .map(|m| {
            let col = (0..m.ncols()).find(|&j| m.column(j).norm() > 0.0).unwrap_or(0);
            let (e1, e2) = eta(&m.column(col).into_owned());
            let scale = m.column(col).norm().max(1e-300);
            (e1.norm() > 1e-8 * scale, e2.norm() > 1e-8 * scale)
        })
        .collect()
}

/// The zero pattern of `(η₁(v_j), η₂(v_j))` for the sixteen double-case slots.
pub fn expected_eta_pattern() -> Vec<(bool, bool)> {
    let half = [(true, false), (false, true), (true, false), (false, true)];
    let swapped: Vec<(bool, bool)> = half.iter().map(|&(a, b)| (b, a)).collect();
    let mut out = Vec::with_capacity(16);
    for _ in 0..2 {
        out.extend(half);
        out.extend(swapped.iter().copied());
    }
    out
}

/// Largest `|det Δ(λ) − Δ₁(λ)Δ₂(λ)²| / (1 + |det Δ(λ)|)` helper for one input.
pub fn factorization_gap(p: &D3Params, lambda: Complex64) -> Result<f64> {
    let det = crate::delay::char_matrix(&d3_operator(p)?, lambda).determinant();
    let prod = factor_value(Factor::Delta1, p, lambda) * factor_value(Factor::Delta2, p, lambda).powi(2);
    Ok((det - prod).norm() / (1.0 + det.norm()))
}

/// `(ψ_i(0) summed over cells)`, the diagonal of `Θ` in the simple case up to
/// the `R` scaling.
pub fn psi_sums(frame: &SpectralFrame) -> Vec<Complex64> {
    frame.psi.iter().map(|p| p.direction.iter().fold(ZERO, |a, z| a + z)).collect()
}
