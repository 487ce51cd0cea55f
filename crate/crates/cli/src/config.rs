//! Run configuration for `unfold` and the pipeline it drives.

use std::path::{Path, PathBuf};

use equivar_core::d3::{self, Case};
use equivar_core::group::{Representation, DEFAULT_CLOSURE_CAP};
use equivar_core::io::{self, Artifact, ArtifactInput, GroupDoc, MatrixDoc, ModelDoc, PointDoc, Tolerances};
use equivar_core::spectral::{eigenbasis, find_root};
use equivar_core::unfold::{
    assemble_gamma_unfolding, choose_delays, gamma_orbit_geometry, orbit_geometry, realify, semisimple_spec,
    AssembleOptions, EntryMask,
};
use equivar_core::{Complex64, Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GroupSpec {
    Generators { generators: Vec<MatrixDoc> },
    Table(GroupDoc),
}

impl GroupSpec {
    pub fn representation(&self) -> Result<Representation> {
        match self {
            GroupSpec::Generators { generators } => {
                let mats = generators.iter().map(io::matrix_from_doc).collect::<Result<Vec<_>>>()?;
                Representation::from_generators(&mats, DEFAULT_CLOSURE_CAP)
            }
            GroupSpec::Table(doc) => {
                let g = doc.to_group()?;
                doc.representation(&g, &doc.matrices)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Preset(String),
    List(Vec<Complex64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Sparsity {
    /// `"d3"`: the structure-preserving masks of the three-cell model.
    Preset(String),
    Masks(Vec<Vec<bool>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<ModelDoc>,
    #[serde(default)]
    pub model_file: Option<PathBuf>,
    #[serde(default)]
    pub group: Option<GroupSpec>,
    pub lambda_seeds: Seeds,
    #[serde(default)]
    pub delays: Option<Vec<f64>>,
    #[serde(default)]
    pub sparsity: Option<Sparsity>,
    #[serde(default = "yes")]
    pub mini_versal: bool,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

pub fn parse_preset(name: &str) -> Result<Case> {
    name.strip_prefix("d3:")
        .ok_or_else(|| schema(format!("unknown preset {name:?}, expected d3:simple or d3:double")))?
        .parse()
}

impl RunConfig {
    pub fn preset(case: Case) -> Self {
        Self {
            model: None,
            model_file: None,
            group: None,
            lambda_seeds: Seeds::Preset(format!("d3:{}", case.name())),
            delays: None,
            sparsity: None,
            mini_versal: true,
            tolerances: Tolerances::default(),
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| schema(format!("{}: {e}", path.display())))?;
        // relative model paths are taken from the config's directory
        if let (Some(p), Some(dir)) = (&cfg.model_file, path.parent()) {
            if p.is_relative() {
                cfg.model_file = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    /// Shape checks that do not need any numerics.
    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        let sources = usize::from(self.model.is_some()) + usize::from(self.model_file.is_some());
        match &self.lambda_seeds {
            Seeds::Preset(name) => {
                parse_preset(name)?;
                if sources != 0 || self.group.is_some() {
                    return Err(schema("a preset brings its own model and group"));
                }
            }
            Seeds::List(list) => {
                if sources != 1 {
                    return Err(schema("exactly one of \"model\" and \"model_file\" is required"));
                }
                if self.group.is_none() {
                    return Err(schema("\"group\" is required with explicit seeds"));
                }
                if list.is_empty() {
                    return Err(schema("\"lambda_seeds\" is empty"));
                }
            }
        }
        if let Some(Sparsity::Preset(p)) = &self.sparsity {
            if p != "d3" {
                return Err(schema(format!("unknown sparsity preset {p:?}")));
            }
        }
        Ok(())
    }

    fn model(&self) -> Result<ModelDoc> {
        match (&self.model, &self.model_file) {
            (Some(m), None) => Ok(m.clone()),
            (None, Some(p)) => {
                let text = std::fs::read_to_string(p).map_err(|e| schema(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| schema(format!("{}: {e}", p.display())))
            }
            _ => Err(schema("exactly one of \"model\" and \"model_file\" is required")),
        }
    }

    fn masks(&self, n: usize, delays: usize) -> Result<Option<Vec<EntryMask>>> {
        let masks = match &self.sparsity {
            None => return Ok(None),
            Some(Sparsity::Preset(_)) => d3::d3_masks(),
            Some(Sparsity::Masks(m)) => m.iter().map(|a| EntryMask { n, allowed: a.clone() }).collect(),
        };
        if masks.len() != delays || masks.iter().any(|m| m.n != n || m.allowed.len() != n * n) {
            return Err(schema(format!("sparsity needs {delays} masks of {} entries", n * n)));
        }
        Ok(Some(masks))
    }
}

/// Result of a run that produced an artifact.
pub struct Outcome {
    pub artifact: Artifact,
    pub mini_versal: bool,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match &cfg.lambda_seeds {
        Seeds::Preset(name) => run_preset(cfg, parse_preset(name)?),
        Seeds::List(seeds) => run_generic(cfg, seeds),
    }
}

fn run_preset(cfg: &RunConfig, case: Case) -> Result<Outcome> {
    if cfg.delays.is_some() || matches!(cfg.sparsity, Some(Sparsity::Masks(_))) {
        return Err(schema("presets fix their own delays and sparsity"));
    }
    let point = d3::reference_point(case)?;
    if cfg.mini_versal {
        let run = d3::run_case(case, &point, &d3::d3_options())?;
        let mut artifact = io::case_artifact(&run)?;
        artifact.tolerances = cfg.tolerances;
        return Ok(Outcome { mini_versal: run.assembly.versality.mini_versal, artifact });
    }
    // every slot kept: same ingredients, but no real form is required
    let op = d3::d3_operator(&point.params())?;
    let seeds = d3::case_seeds(case);
    let inputs = Inputs {
        op,
        rep: equivar_core::group::d3_permutation_rep(),
        lambdas: point.lambdas().to_vec(),
        seeds: Some(seeds),
        delays: Some(vec![0.0, point.tau_s, point.tau_n, d3::default_tau3(&point)?]),
        masks: Some(d3::d3_masks()),
        point: Some(PointDoc::from_point(case.name(), &point)),
    };
    pipeline(inputs, false, cfg.tolerances)
}

fn run_generic(cfg: &RunConfig, seeds: &[Complex64]) -> Result<Outcome> {
    let op = cfg.model()?.to_operator()?;
    let rep = cfg.group.as_ref().expect("validated").representation()?;
    if rep.dim() != op.n() {
        return Err(schema(format!("group acts on C^{}, model on C^{}", rep.dim(), op.n())));
    }
    let lambdas = seeds.iter().map(|&s| find_root(&op, s).map(|r| r.lambda)).collect::<Result<Vec<_>>>()?;
    let masks = match &cfg.delays {
        Some(d) => cfg.masks(op.n(), d.len())?,
        None if cfg.sparsity.is_some() => return Err(schema("sparsity masks need explicit delays")),
        None => None,
    };
    let inputs = Inputs { op, rep, lambdas, seeds: None, delays: cfg.delays.clone(), masks, point: None };
    pipeline(inputs, cfg.mini_versal, cfg.tolerances)
}

struct Inputs {
    op: equivar_core::DelayOperator,
    rep: Representation,
    lambdas: Vec<Complex64>,
    seeds: Option<Vec<Option<Vec<equivar_core::CVec>>>>,
    delays: Option<Vec<f64>>,
    masks: Option<Vec<EntryMask>>,
    point: Option<PointDoc>,
}

fn pipeline(inp: Inputs, mini_versal: bool, tolerances: Tolerances) -> Result<Outcome> {
    let Inputs { op, rep, lambdas, seeds, delays, masks, point } = inp;
    let frame = eigenbasis(&op, &lambdas, seeds.as_deref())?.with_induced(&rep)?;
    let geometry = orbit_geometry(&frame.b, &semisimple_spec(&frame.b))?;
    let gamma = gamma_orbit_geometry(&frame.b, frame.g.as_ref().expect("induced"))?;
    let delays = match delays {
        Some(d) => d,
        None => choose_delays(&frame)?,
    };
    let options = AssembleOptions { masks: masks.clone(), mini_versal };
    let assembly = assemble_gamma_unfolding(&op, &rep, &frame, &geometry, &gamma, &delays, &options)?;
    // a real form exists only for conjugate-closed, independent directions
    let real = match realify(&assembly.family) {
        Ok(r) => Some(r),
        Err(Error::NotConjugatePairs(_)) => None,
        Err(Error::SingularReparametrization(_)) if !mini_versal => None,
        Err(e) => return Err(e),
    };
    let artifact = io::build_artifact(ArtifactInput {
        op: &op,
        rep: &rep,
        frame: &frame,
        delays: &delays,
        masks: masks.as_deref(),
        assembly: &assembly,
        real: real.as_ref(),
        point,
        tolerances,
    })?;
    Ok(Outcome { mini_versal: assembly.versality.mini_versal, artifact })
}
