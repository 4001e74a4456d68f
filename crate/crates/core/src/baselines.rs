//! Reference labelers working from heuristic outputs alone.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsl::Label;
use crate::learn::{fit, select_similarity_pairs, FitConfig, LearnError, TrainedModel};
use crate::model::{HfNode, ModelSpec};

/// The labelers compared in benchmarks and exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelerKind {
    MajorityVote,
    Independent,
    /// Pairwise output correlations selected by pseudolikelihood.
    LearnedDeps,
    /// Dependencies read off the program source.
    HfDep,
    /// Source dependencies plus learned primitive similarities.
    HfDspDep,
}

impl LabelerKind {
    pub const ALL: [LabelerKind; 5] = [
        LabelerKind::MajorityVote,
        LabelerKind::Independent,
        LabelerKind::LearnedDeps,
        LabelerKind::HfDep,
        LabelerKind::HfDspDep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LabelerKind::MajorityVote => "mv",
            LabelerKind::Independent => "indep",
            LabelerKind::LearnedDeps => "learn-dep",
            LabelerKind::HfDep => "hf-dep",
            LabelerKind::HfDspDep => "hf-dsp-dep",
        }
    }

    /// Whether the labeler needs the program's primitives rather than only
    /// the heuristic outputs.
    pub fn uses_program(self) -> bool {
        matches!(self, LabelerKind::HfDep | LabelerKind::HfDspDep)
    }
}

impl fmt::Display for LabelerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LabelerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown labeler `{s}`"))
    }
}

/// `1` on a positive vote sum, `0` on a negative one, `0.5` on a tie.
pub fn majority_vote(lam: &[Label]) -> f64 {
    let sum: i32 = lam.iter().map(|l| i32::from(l.value())).sum();
    match sum.cmp(&0) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => 0.5,
    }
}

/// Gives every heuristic a private primitive whose bins are the distinct
/// outputs it produced, in label order, and returns the model with the
/// label matrix rewritten as bins.
pub fn private_primitive_model(
    matrix: &[Vec<Label>],
) -> Result<(ModelSpec, Vec<Vec<usize>>), LearnError> {
    let Some(first) = matrix.first() else {
        return Err(LearnError::EmptyData);
    };
    let n = first.len();
    if let Some(r) = matrix.iter().position(|row| row.len() != n) {
        return Err(LearnError::ShapeMismatch(format!(
            "row {r} has {} outputs, expected {n}",
            matrix[r].len()
        )));
    }
    let values: Vec<Vec<Label>> = (0..n)
        .map(|i| {
            let mut seen: Vec<Label> = matrix.iter().map(|row| row[i]).collect();
            seen.sort();
            seen.dedup();
            seen
        })
        .collect();
    let domains: Vec<usize> = values.iter().map(Vec::len).collect();
    let hfs = values
        .iter()
        .enumerate()
        .map(|(i, labels)| HfNode::from_table(format!("hf_{i}"), vec![i], &domains, labels.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let names = (0..n).map(|i| format!("output_{i}")).collect();
    let spec = ModelSpec::new(names, domains, hfs, Vec::new())?;
    let data = matrix
        .iter()
        .map(|row| {
            row.iter()
                .zip(&values)
                .map(|(l, vals)| vals.binary_search(l).expect("observed"))
                .collect()
        })
        .collect();
    Ok((spec, data))
}

/// Fits the accuracy-only model, treating heuristics as conditionally
/// independent given the class.
pub fn fit_independent(matrix: &[Vec<Label>], cfg: &FitConfig) -> Result<TrainedModel, LearnError> {
    let (spec, data) = private_primitive_model(matrix)?;
    fit(&spec, &data, cfg)
}

/// Selects pairwise output-equality factors by ℓ1 pseudolikelihood, then
/// fits accuracies and pair weights jointly. Only pairwise dependencies are
/// representable.
pub fn fit_learned_deps(
    matrix: &[Vec<Label>],
    l1_strength: f64,
    cfg: &FitConfig,
) -> Result<TrainedModel, LearnError> {
    let (spec, data) = private_primitive_model(matrix)?;
    let pairs = select_similarity_pairs(&spec, &data, l1_strength)?;
    let spec = spec.with_similarity_pairs(pairs)?;
    fit(&spec, &data, cfg)
}
