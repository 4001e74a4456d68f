//! The factor graph over the latent class, primitive bins and heuristic
//! outputs: accuracy factors `θ·y·λ`, hard validity factors tying each
//! heuristic to its inputs and pairwise similarity factors `θ·𝕀[p_i = p_j]`.

mod discretize;
mod enumerate;
mod program;
mod spec;

pub use discretize::{discretize, Binning};
pub use enumerate::{enumerate_posterior, ExactDistribution, MAX_ENUMERATION};
pub use program::{build_program_model, Discretization, PrimitiveBins};
pub use spec::{Assignment, HfEval, HfNode, ModelSpec, WeightVector, MAX_TABLE_ENTRIES};

use crate::dsl::{DslError, Label};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("similarity between domains of {left} and {right} bins is undefined")]
    IncomparableDomains { left: usize, right: usize },
    #[error("state space of {size} configurations is too large to enumerate (limit {limit})")]
    IntractableEnumeration { size: u128, limit: u128 },
    #[error("primitive `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("similarity pair ({0}, {1}) is not an ordered pair of primitives")]
    InvalidPair(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no value for primitive `{0}`")]
    MissingPrimitive(String),
    #[error("weights must be finite")]
    NonFinite,
    #[error(transparent)]
    Evaluation(#[from] DslError),
}

/// A bin index together with the size of the domain it was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinValue {
    pub bin: usize,
    pub cardinality: usize,
}

impl BinValue {
    pub fn new(bin: usize, cardinality: usize) -> Self {
        BinValue { bin, cardinality }
    }
}

pub fn accuracy_factor(y: i8, lam: Label) -> f64 {
    f64::from(y) * lam.as_f64()
}

/// `0` when the recorded output of heuristic `i` matches its evaluation.
pub fn hf_validity_factor(spec: &ModelSpec, i: usize, a: &Assignment) -> f64 {
    if a.lam[i] == spec.hf_eval(i, &a.p) {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

pub fn similarity_factor(a: BinValue, b: BinValue) -> Result<f64, ModelError> {
    if a.cardinality != b.cardinality {
        return Err(ModelError::IncomparableDomains {
            left: a.cardinality,
            right: b.cardinality,
        });
    }
    Ok(if a.bin == b.bin { 1.0 } else { 0.0 })
}

/// Unnormalised log-density of a joint assignment.
pub fn log_density(spec: &ModelSpec, w: &WeightVector, a: &Assignment) -> f64 {
    let mut total = 0.0;
    for i in 0..spec.n() {
        let valid = hf_validity_factor(spec, i, a);
        if valid == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        total += w.theta_acc[i] * accuracy_factor(a.y, a.lam[i]) + valid;
    }
    total + similarity_score(spec, w, &a.p)
}

/// `Σ θ_i λ_i`, the log-odds half-width of the class given the outputs.
#[inline]
pub fn accuracy_score(theta_acc: &[f64], lam: &[Label]) -> f64 {
    theta_acc.iter().zip(lam).map(|(t, l)| t * l.as_f64()).sum()
}

/// `Σ θ_ij 𝕀[p_i = p_j]` over the active pairs.
pub fn similarity_score(spec: &ModelSpec, w: &WeightVector, p: &[usize]) -> f64 {
    spec.similarity_pairs()
        .iter()
        .zip(&w.theta_sim)
        .filter(|(&(i, j), _)| p[i] == p[j])
        .map(|(_, t)| t)
        .sum()
}

/// `P(Y = 1 | λ) = σ(2 Σ θ_i λ_i)`.
pub fn posterior_from_labels(theta_acc: &[f64], lam: &[Label]) -> f64 {
    sigmoid(2.0 * accuracy_score(theta_acc, lam))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(2 cosh x)` without overflow.
pub fn log_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_examples() {
        assert_eq!(accuracy_factor(1, Label::Positive), 1.0);
        assert_eq!(accuracy_factor(1, Label::Abstain), 0.0);
        assert_eq!(accuracy_factor(-1, Label::Positive), -1.0);
        assert_eq!(
            similarity_factor(BinValue::new(2, 3), BinValue::new(2, 3)),
            Ok(1.0)
        );
        assert_eq!(
            similarity_factor(BinValue::new(0, 3), BinValue::new(1, 3)),
            Ok(0.0)
        );
        assert_eq!(
            similarity_factor(BinValue::new(0, 2), BinValue::new(0, 3)),
            Err(ModelError::IncomparableDomains { left: 2, right: 3 })
        );
    }

    #[test]
    fn log_2cosh_is_stable() {
        assert!((log_2cosh(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log_2cosh(1.3) - (2.0 * 1.3f64.cosh()).ln()).abs() < 1e-14);
        assert_eq!(log_2cosh(1000.0), 1000.0);
        assert_eq!(log_2cosh(-1000.0), 1000.0);
    }

    #[test]
    fn sigmoid_tails() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
