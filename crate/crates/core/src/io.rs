//! JSON documents: models, groups, frames and the unfolding artifact.
//!
//! Complex numbers are `[re, im]`, matrices are row-major arrays of rows.
//! [`to_json`] writes keys in sorted order and every float with 17
//! significant digits, so equal inputs give byte-identical files.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::d3::{CaseRun, DoubleHopfPoint, Window, SCAN_BRANCHES, SCAN_OMEGA};
use crate::delay::{DelayOperator, DelayTerm, ExpVector};
use crate::error::{Error, Result};
use crate::group::{FiniteGroup, Representation};
use crate::linalg::{CMat, CVec};
use crate::spectral::SpectralFrame;
use crate::unfold::{Assembly, EntryMask, RealFamily, UnfoldingFamily, VersalityReport};

pub const SCHEMA: &str = "equivar-unfold/1";

pub type MatrixDoc = Vec<Vec<Complex64>>;

pub fn matrix_doc(m: &CMat) -> MatrixDoc {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn matrix_from_doc(d: &MatrixDoc) -> Result<CMat> {
    let rows = d.len();
    let cols = d.first().map_or(0, |r| r.len());
    if d.iter().any(|r| r.len() != cols) {
        return Err(Error::Schema("ragged matrix".into()));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| d[i][j]))
}

fn square(d: &MatrixDoc, n: usize, what: &str) -> Result<CMat> {
    let m = matrix_from_doc(d)?;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Schema(format!("{what} must be {n}x{n}")));
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    pub delay: f64,
    pub matrix: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub n: usize,
    pub terms: Vec<TermDoc>,
}

impl ModelDoc {
    pub fn from_operator(op: &DelayOperator) -> Self {
        Self {
            n: op.n(),
            terms: op.terms().iter().map(|t| TermDoc { delay: t.delay, matrix: matrix_doc(&t.matrix) }).collect(),
        }
    }

    pub fn to_operator(&self) -> Result<DelayOperator> {
        let terms = self
            .terms
            .iter()
            .map(|t| Ok(DelayTerm { delay: t.delay, matrix: square(&t.matrix, self.n, "model term")? }))
            .collect::<Result<Vec<_>>>()?;
        DelayOperator::new(self.n, terms).map_err(|e| Error::Schema(e.to_string()))
    }
}

/// A representation with its group given by the multiplication table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDoc {
    pub mul_table: Vec<Vec<usize>>,
    /// Element indices; empty means "not recorded".
    #[serde(default)]
    pub generators: Vec<usize>,
    pub matrices: Vec<MatrixDoc>,
}

impl GroupDoc {
    pub fn from_representation(rep: &Representation) -> Self {
        Self {
            mul_table: rep.group().mul_table().to_vec(),
            generators: rep.group().generators().to_vec(),
            matrices: rep.matrices().iter().map(matrix_doc).collect(),
        }
    }

    pub fn to_group(&self) -> Result<Arc<FiniteGroup>> {
        let g = FiniteGroup::from_table(self.mul_table.clone()).map_err(|e| Error::Schema(e.to_string()))?;
        let g = if self.generators.is_empty() { g } else { g.with_generators(self.generators.clone())? };
        Ok(Arc::new(g))
    }

    /// Matrices of `docs` over the group of `self`.
    pub fn representation(&self, group: &Arc<FiniteGroup>, docs: &[MatrixDoc]) -> Result<Representation> {
        let mats = docs.iter().map(matrix_from_doc).collect::<Result<Vec<_>>>()?;
        Representation::new(Arc::clone(group), mats)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpDoc {
    pub direction: Vec<Complex64>,
    pub exponent: Complex64,
}

impl ExpDoc {
    fn from_exp(e: &ExpVector) -> Self {
        Self { direction: e.direction.iter().copied().collect(), exponent: e.exponent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDoc {
    pub lambdas: Vec<Complex64>,
    pub multiplicities: Vec<usize>,
    pub conjugate_of: Vec<Option<usize>>,
    pub phi: Vec<ExpDoc>,
    pub psi: Vec<ExpDoc>,
    pub b: MatrixDoc,
    /// Induced action, one matrix per group element.
    pub g: Vec<MatrixDoc>,
}

impl FrameDoc {
    pub fn from_frame(frame: &SpectralFrame) -> Self {
        Self {
            lambdas: frame.lambdas.clone(),
            multiplicities: frame.multiplicities(),
            conjugate_of: frame.conjugate_of.clone(),
            phi: frame.phi.iter().map(ExpDoc::from_exp).collect(),
            psi: frame.psi.iter().map(ExpDoc::from_exp).collect(),
            b: matrix_doc(&frame.b),
            g: frame.g.as_ref().map_or_else(Vec::new, |g| g.matrices().iter().map(matrix_doc).collect()),
        }
    }

    /// Rebuilds the frame without re-deriving anything.
    pub fn to_frame(&self, op: &DelayOperator, g: Option<Representation>) -> Result<SpectralFrame> {
        let c = self.phi.len();
        let n = op.n();
        if self.psi.len() != c || self.multiplicities.iter().sum::<usize>() != c {
            return Err(Error::Schema("frame sizes disagree".into()));
        }
        if self.lambdas.len() != self.multiplicities.len() || self.conjugate_of.len() != self.lambdas.len() {
            return Err(Error::Schema("one multiplicity and conjugate entry per eigenvalue".into()));
        }
        let vec_of = |e: &ExpDoc| -> Result<CVec> {
            if e.direction.len() != n {
                return Err(Error::Schema(format!("frame vectors must have length {n}")));
            }
            Ok(CVec::from_vec(e.direction.clone()))
        };
        let phi = self.phi.iter().map(|e| Ok(ExpVector::column(vec_of(e)?, e.exponent))).collect::<Result<_>>()?;
        let psi = self.psi.iter().map(|e| Ok(ExpVector::row(vec_of(e)?, e.exponent))).collect::<Result<_>>()?;
        let mut blocks = Vec::new();
        let mut start = 0;
        for &m in &self.multiplicities {
            blocks.push(start..start + m);
            start += m;
        }
        Ok(SpectralFrame {
            op: op.clone(),
            lambdas: self.lambdas.clone(),
            blocks,
            phi,
            psi,
            b: square(&self.b, c, "B")?,
            conjugate_of: self.conjugate_of.clone(),
            g,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub names: Vec<String>,
    /// `directions[m][j]` multiplies `z(−delays[j])`.
    pub directions: Vec<Vec<MatrixDoc>>,
    pub equivariant: bool,
}

impl FamilyDoc {
    pub fn from_family(f: &UnfoldingFamily) -> Self {
        Self {
            names: f.names.clone(),
            directions: f.directions.iter().map(|d| d.iter().map(matrix_doc).collect()).collect(),
            equivariant: f.equivariant,
        }
    }

    pub fn to_family(&self, base: &DelayOperator, delays: &[f64]) -> Result<UnfoldingFamily> {
        if self.names.len() != self.directions.len() {
            return Err(Error::Schema("one name per direction".into()));
        }
        let directions = self
            .directions
            .iter()
            .map(|d| {
                if d.len() != delays.len() {
                    return Err(Error::Schema("one coefficient matrix per delay".into()));
                }
                d.iter().map(|m| square(m, base.n(), "coefficient")).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UnfoldingFamily {
            base: base.clone(),
            delays: delays.to_vec(),
            directions,
            names: self.names.clone(),
            equivariant: self.equivariant,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealFamilyDoc {
    pub family: FamilyDoc,
    pub pairs: Vec<(usize, Option<usize>)>,
    pub reparametrization: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDoc {
    pub theta: MatrixDoc,
    pub residuals: Vec<f64>,
    pub selected_rows: Vec<usize>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersalityDoc {
    pub commutant_dim: usize,
    pub tangent_dim: usize,
    pub codimension: usize,
    pub parameters: usize,
    pub span_rank: usize,
    pub deficiency: usize,
    pub versal: bool,
    pub mini_versal: bool,
}

impl VersalityDoc {
    pub fn from_report(r: &VersalityReport) -> Self {
        Self {
            commutant_dim: r.commutant_dim,
            tangent_dim: r.tangent_dim,
            codimension: r.codimension,
            parameters: r.parameters,
            span_rank: r.span_rank,
            deficiency: r.deficiency(),
            versal: r.versal,
            mini_versal: r.mini_versal,
        }
    }
}

/// Where a D₃ run came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDoc {
    pub case: String,
    pub factor: String,
    pub alpha: f64,
    pub beta: f64,
    pub tau_s: f64,
    pub tau_n: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub residual: f64,
}

impl PointDoc {
    pub fn from_point(case: &str, p: &DoubleHopfPoint) -> Self {
        Self {
            case: case.into(),
            factor: p.factor.name().into(),
            alpha: p.alpha,
            beta: p.beta,
            tau_s: p.tau_s,
            tau_n: p.tau_n,
            omega1: p.omega1,
            omega2: p.omega2,
            residual: p.residual,
        }
    }
}

impl PointDoc {
    pub fn to_point(&self) -> Result<DoubleHopfPoint> {
        Ok(DoubleHopfPoint {
            factor: self.factor.parse()?,
            beta: self.beta,
            tau_n: self.tau_n,
            alpha: self.alpha,
            tau_s: self.tau_s,
            omega1: self.omega1,
            omega2: self.omega2,
            residual: self.residual,
        })
    }
}

/// Double Hopf points of one sweep, with the sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanDoc {
    pub alpha_window: (f64, f64),
    pub tau_s_window: (f64, f64),
    /// `(start, end, step)`.
    pub omega_grid: (f64, f64, f64),
    pub branches: (i32, i32),
    pub points: Vec<PointDoc>,
}

impl ScanDoc {
    pub fn new(window: &Window, case: &str, points: &[DoubleHopfPoint]) -> Self {
        Self {
            alpha_window: window.alpha,
            tau_s_window: window.tau_s,
            omega_grid: SCAN_OMEGA,
            branches: (*SCAN_BRANCHES.start(), *SCAN_BRANCHES.end()),
            points: points.iter().map(|p| PointDoc::from_point(case, p)).collect(),
        }
    }
}

/// Thresholds the verifier applies. Missing fields take the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub equivariance: f64,
    pub frame: f64,
    pub reconstruction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { equivariance: 1e-10, frame: 1e-9, reconstruction: 1e-9 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("equivariance", self.equivariance), ("frame", self.frame), ("reconstruction", self.reconstruction)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Schema(format!("tolerance {name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Output of `unfold`, input of `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub schema: String,
    pub model: ModelDoc,
    pub group: GroupDoc,
    pub frame: FrameDoc,
    pub delays: Vec<f64>,
    /// Row-major allowed entries per delay.
    pub masks: Option<Vec<Vec<bool>>>,
    pub family: FamilyDoc,
    /// Slot index behind each family parameter.
    pub parameter_slots: Vec<usize>,
    pub real_family: Option<RealFamilyDoc>,
    pub theta: ThetaDoc,
    /// `π(R^m)` per family parameter.
    pub r_bar: Vec<MatrixDoc>,
    /// `Ψ(0) π(R^m)` per family parameter.
    pub b_hat: Vec<MatrixDoc>,
    pub versality: VersalityDoc,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: Tolerances,
    pub point: Option<PointDoc>,
}

/// Everything needed to write an artifact.
pub struct ArtifactInput<'a> {
    pub op: &'a DelayOperator,
    pub rep: &'a Representation,
    pub frame: &'a SpectralFrame,
    pub delays: &'a [f64],
    pub masks: Option<&'a [EntryMask]>,
    pub assembly: &'a Assembly,
    pub real: Option<&'a RealFamily>,
    pub point: Option<PointDoc>,
    pub tolerances: Tolerances,
}

pub fn build_artifact(input: ArtifactInput<'_>) -> Result<Artifact> {
    let a = input.assembly;
    let frame_report = input.frame.check()?;
    let mut residuals = BTreeMap::new();
    residuals.insert("frame_null".to_string(), frame_report.null_residual);
    residuals.insert("frame_gram".to_string(), frame_report.gram_residual);
    residuals.insert("b_commutes_with_g".to_string(), frame_report.commute_residual);
    residuals.insert("reconstruction".to_string(), a.reconstruction_residual);
    residuals.insert("equivariance".to_string(), a.family.equivariance_residual(input.rep));
    residuals.insert("theta_decomposition".to_string(), a.theta.residuals.iter().copied().fold(0.0, f64::max));
    Ok(Artifact {
        schema: SCHEMA.to_string(),
        model: ModelDoc::from_operator(input.op),
        group: GroupDoc::from_representation(input.rep),
        frame: FrameDoc::from_frame(input.frame),
        delays: input.delays.to_vec(),
        masks: input.masks.map(|m| m.iter().map(|e| e.allowed.clone()).collect()),
        family: FamilyDoc::from_family(&a.family),
        parameter_slots: a.parameters.clone(),
        real_family: input.real.map(|r| RealFamilyDoc {
            family: FamilyDoc::from_family(&r.family),
            pairs: r.pairs.clone(),
            reparametrization: matrix_doc(&r.reparametrization),
        }),
        theta: ThetaDoc {
            theta: matrix_doc(&a.theta.theta),
            residuals: a.theta.residuals.clone(),
            selected_rows: a.theta.selected_rows.clone(),
            k: a.theta.k,
        },
        r_bar: a.parameters.iter().map(|&m| matrix_doc(&a.r_bar[m])).collect(),
        b_hat: a.parameters.iter().map(|&m| matrix_doc(&a.b_hat[m])).collect(),
        versality: VersalityDoc::from_report(&a.versality),
        residuals,
        tolerances: input.tolerances,
        point: input.point,
    })
}

pub fn case_artifact(run: &CaseRun) -> Result<Artifact> {
    let masks = crate::d3::d3_masks();
    build_artifact(ArtifactInput {
        op: &run.op,
        rep: &run.rep,
        frame: &run.frame,
        delays: &run.delays,
        masks: Some(&masks),
        assembly: &run.assembly,
        real: Some(&run.real),
        point: Some(PointDoc::from_point(run.case.name(), &run.point)),
        tolerances: Tolerances::default(),
    })
}

/// Pretty printer that writes every `f64` with 17 significant digits.
pub struct ExactFormatter(PrettyFormatter<'static>);

impl Default for ExactFormatter {
    fn default() -> Self {
        Self(PrettyFormatter::with_indent(b"  "))
    }
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for ExactFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

/// Sorted keys, 17 significant digits, two-space indent, trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    // going through Value sorts the keys
    let v = serde_json::to_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFormatter::default());
    v.serialize(&mut ser).map_err(|e| Error::Schema(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Schema(e.to_string()))
}

pub fn parse_artifact(text: &str) -> Result<Artifact> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    match v.get("schema").and_then(|s| s.as_str()) {
        Some(SCHEMA) => {}
        Some(other) => return Err(Error::Schema(format!("unsupported schema {other:?}"))),
        None => return Err(Error::Schema("missing \"schema\" field".into())),
    }
    serde_json::from_value(v).map_err(|e| Error::Schema(e.to_string()))
}
