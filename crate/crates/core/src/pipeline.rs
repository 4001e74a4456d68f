//! Program-level glue: raw rows in, fitted model file and labels out.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::extract_thresholds;
use crate::baselines::{fit_independent, fit_learned_deps, majority_vote, LabelerKind};
use crate::dsl::{
    evaluate_hf, evaluate_specifier, parse, DslError, Env, Label, PrimitiveValues, SourceUnit,
};
use crate::learn::{
    fit, posterior_label, select_similarity_pairs, FitConfig, FitDiagnostics, LabelRecord,
    LearnError, TrainedModel,
};
use crate::model::{
    build_program_model, posterior_from_labels, Discretization, ModelError, WeightVector,
};

pub const MODEL_FORMAT: &str = "wslabel-model/1";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("row {row}: {source}")]
    Evaluation { row: usize, source: DslError },
    #[error("stored program does not parse: {0}")]
    Program(DslError),
    #[error("model file is inconsistent: {0}")]
    Inconsistent(String),
    #[error("labeler `{0}` does not apply here")]
    UnsupportedMethod(LabelerKind),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Runs the primitive specifier over every raw row.
pub fn evaluate_rows<E: Env>(
    unit: &SourceUnit,
    rows: &[E],
) -> Result<Vec<PrimitiveValues>, PipelineError> {
    rows.iter()
        .enumerate()
        .map(|(row, raw)| {
            evaluate_specifier(&unit.specifier, raw)
                .map_err(|source| PipelineError::Evaluation { row, source })
        })
        .collect()
}

/// Heuristic outputs evaluated directly on primitive values.
pub fn hf_outputs(
    unit: &SourceUnit,
    values: &[PrimitiveValues],
) -> Result<Vec<Vec<Label>>, PipelineError> {
    values
        .iter()
        .enumerate()
        .map(|(row, v)| {
            unit.heuristics
                .iter()
                .map(|hf| {
                    evaluate_hf(hf, v).map_err(|source| PipelineError::Evaluation { row, source })
                })
                .collect()
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub program_sha256: String,
}

/// Everything needed to label new data with a fitted program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub method: LabelerKind,
    pub n: usize,
    pub m: usize,
    pub hf_names: Vec<String>,
    pub primitive_names: Vec<String>,
    pub domains: Vec<usize>,
    pub similarity_pairs: Vec<(usize, usize)>,
    pub theta_acc: Vec<f64>,
    pub theta_sim: Vec<f64>,
    pub threshold_map: BTreeMap<String, Vec<f64>>,
    pub discretization: Discretization,
    pub provenance: Provenance,
    pub program: String,
    pub fit_config: FitConfig,
    pub diagnostics: FitDiagnostics,
}

/// A model file reconstituted into its parsed program and trained model.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub unit: SourceUnit,
    pub discretization: Discretization,
    pub trained: TrainedModel,
    pub method: LabelerKind,
}

impl LoadedModel {
    pub fn bins(&self, values: &[PrimitiveValues]) -> Result<Vec<Vec<usize>>, PipelineError> {
        values
            .iter()
            .map(|v| self.discretization.bins_for(v).map_err(PipelineError::from))
            .collect()
    }

    /// Posterior records for primitive rows, in input order.
    pub fn label(&self, values: &[PrimitiveValues]) -> Result<Vec<LabelRecord>, PipelineError> {
        self.bins(values)?
            .iter()
            .map(|p| posterior_label(&self.trained, p).map_err(PipelineError::from))
            .collect()
    }
}

/// Discretises, optionally selects similarity pairs, fits.
pub fn fit_program(
    source: &str,
    unit: &SourceUnit,
    values: &[PrimitiveValues],
    cfg: &FitConfig,
    method: LabelerKind,
) -> Result<ModelFile, PipelineError> {
    if !method.uses_program() {
        return Err(PipelineError::UnsupportedMethod(method));
    }
    cfg.validate()?;
    if values.is_empty() {
        return Err(LearnError::EmptyData.into());
    }
    let disc = Discretization::fit(unit, values, cfg.quantile_bins);
    let spec = build_program_model(unit, &disc, Vec::new())?;
    let data: Vec<Vec<usize>> = values
        .iter()
        .map(|v| disc.bins_for(v))
        .collect::<Result<_, _>>()?;
    let spec = if method == LabelerKind::HfDspDep {
        let pairs = select_similarity_pairs(&spec, &data, cfg.l1_strength)?;
        spec.with_similarity_pairs(pairs)?
    } else {
        spec
    };
    let trained = fit(&spec, &data, cfg)?;
    Ok(ModelFile {
        format: MODEL_FORMAT.to_string(),
        method,
        n: spec.n(),
        m: spec.m(),
        hf_names: spec.hfs().iter().map(|h| h.name.clone()).collect(),
        primitive_names: spec.primitive_names().to_vec(),
        domains: spec.domains().to_vec(),
        similarity_pairs: spec.similarity_pairs().to_vec(),
        theta_acc: trained.weights.theta_acc.clone(),
        theta_sim: trained.weights.theta_sim.clone(),
        threshold_map: extract_thresholds(unit),
        discretization: disc,
        provenance: Provenance {
            program_sha256: sha256_hex(source.as_bytes()),
        },
        program: source.to_string(),
        fit_config: cfg.clone(),
        diagnostics: trained.diagnostics,
    })
}

impl ModelFile {
    /// Re-parses the stored program, rebuilds the factor graph and checks it
    /// against the recorded shape.
    pub fn load(&self) -> Result<LoadedModel, PipelineError> {
        if self.format != MODEL_FORMAT {
            return Err(PipelineError::Inconsistent(format!(
                "unsupported format `{}`",
                self.format
            )));
        }
        if sha256_hex(self.program.as_bytes()) != self.provenance.program_sha256 {
            return Err(PipelineError::Inconsistent(
                "program hash does not match".into(),
            ));
        }
        let unit = parse(&self.program).map_err(PipelineError::Program)?;
        let spec = build_program_model(&unit, &self.discretization, self.similarity_pairs.clone())?;
        let hf_names: Vec<String> = spec.hfs().iter().map(|h| h.name.clone()).collect();
        if spec.n() != self.n
            || spec.m() != self.m
            || spec.domains() != self.domains.as_slice()
            || spec.similarity_pairs() != self.similarity_pairs.as_slice()
            || hf_names != self.hf_names
            || spec.primitive_names() != self.primitive_names.as_slice()
        {
            return Err(PipelineError::Inconsistent(
                "recorded shape differs from the rebuilt model".into(),
            ));
        }
        let weights = WeightVector {
            theta_acc: self.theta_acc.clone(),
            theta_sim: self.theta_sim.clone(),
        };
        weights.check(&spec)?;
        Ok(LoadedModel {
            unit,
            discretization: self.discretization.clone(),
            trained: TrainedModel {
                spec,
                weights,
                diagnostics: self.diagnostics.clone(),
            },
            method: self.method,
        })
    }
}

/// Labels from heuristic outputs with a labeler that ignores the program.
pub fn label_from_outputs(
    kind: LabelerKind,
    matrix: &[Vec<Label>],
    cfg: &FitConfig,
) -> Result<Vec<LabelRecord>, PipelineError> {
    let theta = match kind {
        LabelerKind::MajorityVote => {
            return Ok(matrix
                .iter()
                .map(|lam| LabelRecord {
                    p_y1: majority_vote(lam),
                    lam: lam.clone(),
                })
                .collect())
        }
        LabelerKind::Independent => fit_independent(matrix, cfg)?.weights.theta_acc,
        LabelerKind::LearnedDeps => {
            fit_learned_deps(matrix, cfg.l1_strength, cfg)?
                .weights
                .theta_acc
        }
        other => return Err(PipelineError::UnsupportedMethod(other)),
    };
    Ok(matrix
        .iter()
        .map(|lam| LabelRecord {
            p_y1: posterior_from_labels(&theta, lam),
            lam: lam.clone(),
        })
        .collect())
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
