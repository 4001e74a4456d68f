//! Weight fitting without ground truth: contrastive divergence on the
//! marginal likelihood of observed primitives, with a blocked Gibbs sampler
//! for the model expectations, plus ℓ1 pseudolikelihood selection of
//! similarity pairs.

mod fit;
mod gibbs;
mod gradient;
mod select;

pub use fit::{fit, FitDiagnostics, TrainedModel};
pub use gibbs::{blocked_gibbs_step, GibbsState};
pub use gradient::{cd_gradient, Gradient, NegativePhase};
pub use select::{pseudolikelihood, select_similarity_pairs, SELECTION_KILL_THRESHOLD};

use serde::{Deserialize, Serialize};

use crate::dsl::Label;
use crate::model::{posterior_from_labels, ModelError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("no data rows")]
    EmptyData,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("weights diverged at step {step}; lower the step size")]
    NonFiniteWeight { step: usize },
    #[error("expected {expected} primitive values, got {found}")]
    MissingPrimitive { expected: usize, found: usize },
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepDecay {
    /// `η₀ / √t` with `t` the 1-based epoch, constant within an epoch.
    InvSqrt,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub epochs: usize,
    pub step_size: f64,
    pub decay: StepDecay,
    pub batch_size: usize,
    /// Sampler chains per negative-phase estimate.
    pub chains: usize,
    /// Sweeps run on the chains before the first update.
    pub burn_in: usize,
    /// Sweeps per negative-phase estimate.
    pub cd_k: usize,
    /// Chains carry over between updates; otherwise they restart at the batch.
    pub persistent: bool,
    /// Replaces the sampled negative phase with exact enumeration.
    pub exact_negative_phase: bool,
    pub l1_strength: f64,
    /// Similarity weights smaller than this in magnitude are zeroed at the end.
    pub kill_threshold: f64,
    /// Starting accuracy weight. Must be positive: the likelihood is
    /// symmetric under negating every weight and the sign is fixed here.
    pub init_acc: f64,
    /// Fraction of the final steps whose iterates are averaged.
    pub average_fraction: f64,
    /// Stop once an epoch moves no weight by more than this.
    pub tolerance: f64,
    pub seed: u64,
    /// Bins for primitives that are never compared against a constant.
    pub quantile_bins: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 50,
            step_size: 0.01,
            decay: StepDecay::InvSqrt,
            batch_size: 20,
            chains: 10,
            burn_in: 100,
            cd_k: 5,
            persistent: true,
            exact_negative_phase: false,
            l1_strength: 0.1,
            kill_threshold: 1e-3,
            init_acc: 0.5,
            average_fraction: 0.5,
            tolerance: 1e-6,
            seed: 0,
            quantile_bins: 2,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |msg: &str| Err(LearnError::Config(msg.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.chains == 0 || self.cd_k == 0 {
            return bad("epochs, batch_size, chains and cd_k must be positive");
        }
        if self.quantile_bins == 0 {
            return bad("quantile_bins must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be positive");
        }
        if !(self.l1_strength >= 0.0 && self.l1_strength.is_finite()) {
            return bad("l1_strength must be non-negative");
        }
        if !(self.kill_threshold >= 0.0) {
            return bad("kill_threshold must be non-negative");
        }
        if !(self.init_acc.is_finite()) {
            return bad("init_acc must be finite");
        }
        if !(0.0..=1.0).contains(&self.average_fraction) {
            return bad("average_fraction must lie in [0, 1]");
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be non-negative");
        }
        Ok(())
    }
}

/// Posterior for one data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub p_y1: f64,
    pub lam: Vec<Label>,
}

pub fn posterior_label(tm: &TrainedModel, p: &[usize]) -> Result<LabelRecord, LearnError> {
    if p.len() != tm.spec.m() {
        return Err(LearnError::MissingPrimitive {
            expected: tm.spec.m(),
            found: p.len(),
        });
    }
    tm.spec.check_row(p)?;
    let lam = tm.spec.eval_all(p);
    Ok(LabelRecord {
        p_y1: posterior_from_labels(&tm.weights.theta_acc, &lam),
        lam,
    })
}

/// Checks every row against the model's domains.
pub(crate) fn check_data(
    spec: &crate::model::ModelSpec,
    data: &[Vec<usize>],
) -> Result<(), LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyData);
    }
    for (r, row) in data.iter().enumerate() {
        spec.check_row(row)
            .map_err(|e| LearnError::ShapeMismatch(format!("row {r}: {e}")))?;
    }
    Ok(())
}
