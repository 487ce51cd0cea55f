//! Independent re-check of a stored unfolding artifact.

use std::sync::Arc;

use serde::Serialize;

use crate::delay;
use crate::error::{Error, Result};
use crate::group::{self, Representation};
use crate::io::{matrix_from_doc, Artifact, SCHEMA};
use crate::linalg::{self, CMat};
use crate::spectral::{self, INDUCED_TOL};
use crate::unfold::{
    self, commutation_residual, orbit_geometry, reconstruct, semisimple_spec, stacked_rank, theta_extract,
    verify_gamma_versality, EntryMask,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Versal, but with more parameters than the codimension.
    NotMinimal,
    Fail,
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::NotMinimal => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

impl AuditReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn below(&mut self, name: &str, value: f64, tolerance: f64) {
        self.0.push(Check {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
            detail: String::new(),
        });
    }

    fn flag(&mut self, name: &str, passed: bool, detail: String) {
        self.0.push(Check {
            name: name.into(),
            value: if passed { 0.0 } else { 1.0 },
            tolerance: 0.0,
            passed,
            detail,
        });
    }

    fn error(&mut self, name: &str, e: &Error) {
        self.flag(name, false, e.to_string());
    }
}

fn schema(e: Error) -> Error {
    match e {
        Error::Structural(s) => Error::Schema(s),
        other => other,
    }
}

fn rel_gap(a: &CMat, b: &CMat) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    linalg::max_abs(&(a - b)) / linalg::max_abs(b).max(1.0)
}

/// Recomputes every invariant of `artifact` from its stored data.
///
/// `Err` means the document cannot be decoded; numerical problems are
/// reported as failed checks.
pub fn verify_artifact(artifact: &Artifact) -> Result<AuditReport> {
    if artifact.schema != SCHEMA {
        return Err(Error::Schema(format!("unsupported schema {:?}", artifact.schema)));
    }
    let tol = artifact.tolerances;
    tol.validate()?;
    let mut out = Checks(Vec::new());

    let op = artifact.model.to_operator()?;
    let group = artifact.group.to_group()?;
    let rep = match artifact.group.representation(&group, &artifact.group.matrices) {
        Ok(r) => Some(r),
        Err(Error::SingularRepresentation { element }) => {
            out.flag("group_representation", false, format!("rho({element}) is singular"));
            None
        }
        Err(e) => return Err(schema(e)),
    };
    if let Some(rep) = &rep {
        if rep.dim() != op.n() {
            return Err(Error::Schema("group acts on a different dimension than the model".into()));
        }
        let r = group::check_representation(rep, group::REP_TOL);
        out.below("group_representation", r.max_residual.max(r.identity_residual), group::REP_TOL);
        out.below("model_equivariance", delay::check_equivariance(&op, rep).map_err(schema)?, tol.equivariance);
    }

    let c = artifact.frame.phi.len();
    let g = if artifact.frame.g.is_empty() {
        out.flag("induced_action", false, "frame stores no induced action".into());
        None
    } else {
        match artifact.group.representation(&group, &artifact.frame.g) {
            Ok(g) if g.dim() == c => Some(g),
            Ok(_) => return Err(Error::Schema("induced action has the wrong size".into())),
            Err(Error::SingularRepresentation { element }) => {
                out.flag("induced_action", false, format!("G({element}) is singular"));
                None
            }
            Err(e) => return Err(schema(e)),
        }
    };
    let frame = artifact.frame.to_frame(&op, g.clone())?;
    match frame.check() {
        Ok(r) => {
            out.below("frame_null_vectors", r.null_residual, tol.frame);
            out.below("frame_gram", r.gram_residual, tol.frame);
            out.below("frame_b_diagonal", r.b_diag_residual, tol.frame);
        }
        Err(e) => out.error("frame_gram", &schema(e)),
    }
    let b = frame.b.clone();
    if let Some(g) = &g {
        let r = group::check_representation(g, INDUCED_TOL);
        out.below("induced_action", r.max_residual.max(r.identity_residual), INDUCED_TOL);
        out.below("induced_commutes_with_b", commutation_residual(&b, g), tol.equivariance * linalg::max_abs(&b).max(1.0));
        if let Some(rep) = &rep {
            match spectral::induce_representation(&frame, rep) {
                Ok(recomputed) => {
                    let gap = g
                        .matrices()
                        .iter()
                        .zip(recomputed.matrices())
                        .map(|(a, b)| rel_gap(a, b))
                        .fold(0.0, f64::max);
                    out.below("induced_action_matches", gap, INDUCED_TOL);
                }
                Err(e) => out.error("induced_action_matches", &e),
            }
        }
    }

    let delays = &artifact.delays;
    if let Err(e) = unfold::check_delays(delays) {
        return Err(Error::Schema(e.to_string()));
    }
    let rank = stacked_rank(&frame, delays);
    out.flag("stacked_rank", rank == c, format!("rank {rank}, need {c}"));

    let family = artifact.family.to_family(&op, delays)?;
    let p = family.parameters();
    if artifact.r_bar.len() != p || artifact.b_hat.len() != p || artifact.parameter_slots.len() != p {
        return Err(Error::Schema("one r_bar, b_hat and slot per parameter".into()));
    }
    if let Some(rep) = &rep {
        out.below("family_equivariance", family.equivariance_residual(rep), tol.equivariance);
    }
    if let Some(masks) = &artifact.masks {
        if masks.len() != delays.len() || masks.iter().any(|m| m.len() != op.n() * op.n()) {
            return Err(Error::Schema("one n*n mask per delay".into()));
        }
        let masks: Vec<EntryMask> = masks.iter().map(|a| EntryMask { n: op.n(), allowed: a.clone() }).collect();
        let worst = family
            .directions
            .iter()
            .flat_map(|d| d.iter().zip(&masks).map(|(a, m)| m.violation(a)))
            .fold(0.0, f64::max);
        out.below("sparsity", worst, tol.reconstruction);
    }

    let psi0 = frame.psi_at(0.0);
    let mut recon: f64 = 0.0;
    let mut bhat_gap: f64 = 0.0;
    let mut b_hat = Vec::with_capacity(p);
    for m in 0..p {
        let rb = matrix_from_doc(&artifact.r_bar[m])?;
        let bh = matrix_from_doc(&artifact.b_hat[m])?;
        if rb.shape() != (op.n(), c) || bh.shape() != (c, c) {
            return Err(Error::Schema(format!("r_bar/b_hat {m} has the wrong shape")));
        }
        let back = reconstruct(&frame, delays, &family.directions[m]);
        recon = recon.max(linalg::frob(&(back - &rb)) / linalg::frob(&rb).max(1.0));
        bhat_gap = bhat_gap.max(rel_gap(&(&psi0 * &rb), &bh));
        b_hat.push(bh);
    }
    out.below("reconstruction", recon, tol.reconstruction);
    out.below("reduced_directions", bhat_gap, tol.reconstruction);
    if let Some(g) = &g {
        let worst = b_hat.iter().map(|x| commutation_residual(x, g)).fold(0.0, f64::max);
        out.below("reduced_directions_equivariant", worst, tol.reconstruction);
    }

    match orbit_geometry(&b, &semisimple_spec(&b)) {
        Ok(geometry) => {
            out.flag("orbit_direct_sum", true, format!("codimension {}", geometry.delta));
            match theta_extract(&geometry, &b_hat) {
                Ok(theta) => {
                    let stored = matrix_from_doc(&artifact.theta.theta)?;
                    let mut gap: f64 = 0.0;
                    for (k, &slot) in artifact.parameter_slots.iter().enumerate() {
                        if slot >= stored.nrows() || stored.ncols() != theta.theta.ncols() {
                            return Err(Error::Schema("theta does not match the parameter slots".into()));
                        }
                        let row = stored.row(slot) - theta.theta.row(k);
                        gap = gap.max(row.iter().map(|z| z.norm()).fold(0.0, f64::max));
                    }
                    out.below("theta_rows", gap, 1e-8);
                }
                Err(e) => out.error("theta_rows", &e),
            }
        }
        Err(e) => out.error("orbit_direct_sum", &e),
    }

    let mut not_minimal = false;
    if let Some(g) = &g {
        let v = verify_gamma_versality(&b, g, &b_hat);
        out.flag(
            "versality",
            v.versal,
            format!("span {} of {} (tangent {}, deficiency {})", v.span_rank, v.commutant_dim, v.tangent_dim, v.deficiency()),
        );
        let claims = &artifact.versality;
        let consistent = claims.commutant_dim == v.commutant_dim
            && claims.tangent_dim == v.tangent_dim
            && claims.span_rank == v.span_rank
            && claims.versal == v.versal
            && claims.mini_versal == v.mini_versal;
        out.flag("versality_claims", consistent, "stored report matches recomputation".into());
        not_minimal = v.versal && !v.mini_versal;
        if not_minimal {
            out.flag(
                "mini_versality",
                false,
                format!("{} parameters, codimension {}", v.parameters, v.codimension),
            );
        } else {
            out.flag("mini_versality", v.mini_versal, format!("codimension {}", v.codimension));
        }
    }

    if let Some(real) = &artifact.real_family {
        let stored = real.family.to_family(&op, delays)?;
        match unfold::realify(&family) {
            Ok(recomputed) => {
                let gap = if recomputed.family.parameters() != stored.parameters() {
                    f64::INFINITY
                } else {
                    recomputed
                        .family
                        .directions
                        .iter()
                        .flatten()
                        .zip(stored.directions.iter().flatten())
                        .map(|(a, b)| rel_gap(b, a))
                        .fold(0.0, f64::max)
                };
                out.below("real_family", gap, tol.reconstruction);
                let (m, _) = unfold::reparametrization_matrix(&stored);
                let s = linalg::singular_values(&m);
                let q = stored.parameters();
                let ratio = if m.nrows() < q || s.is_empty() || q == 0 { 0.0 } else { s[q - 1] / s[0] };
                out.flag("reparametrization", ratio > 1e-8, format!("sigma_min / sigma_max = {ratio:.3e}"));
            }
            Err(e) => out.error("real_family", &e),
        }
        if let Some(rep) = &rep {
            out.below("real_family_equivariance", stored.equivariance_residual(rep), tol.equivariance);
        }
    }

    let hard_fail = out.0.iter().any(|c| !c.passed && c.name != "mini_versality");
    let verdict = if hard_fail {
        Verdict::Fail
    } else if not_minimal {
        Verdict::NotMinimal
    } else {
        Verdict::Pass
    };
    Ok(AuditReport { checks: out.0, verdict })
}

/// Convenience for callers holding only the group.
pub fn representation_of(artifact: &Artifact) -> Result<Representation> {
    let group: Arc<_> = artifact.group.to_group()?;
    artifact.group.representation(&group, &artifact.group.matrices).map_err(schema)
}
