use crate::dsl::Label;

use super::spec::advance;
use super::{log_density, Assignment, ModelError, ModelSpec, WeightVector};

/// Largest primitive configuration count enumerated exactly.
pub const MAX_ENUMERATION: u128 = 1 << 20;

fn check_size(spec: &ModelSpec) -> Result<(), ModelError> {
    match spec.primitive_space_size() {
        Some(size) if size <= MAX_ENUMERATION => Ok(()),
        size => Err(ModelError::IntractableEnumeration {
            size: size.unwrap_or(u128::MAX),
            limit: MAX_ENUMERATION,
        }),
    }
}

/// Exact `P(Y = 1 | p)` by summing the joint density over both classes with
/// the heuristic outputs forced by `p`.
pub fn enumerate_posterior(
    spec: &ModelSpec,
    w: &WeightVector,
    observed_p: &[usize],
) -> Result<f64, ModelError> {
    check_size(spec)?;
    spec.check_row(observed_p)?;
    w.check(spec)?;
    let pos = log_density(spec, w, &Assignment::forced(spec, 1, observed_p.to_vec()));
    let neg = log_density(spec, w, &Assignment::forced(spec, -1, observed_p.to_vec()));
    let hi = pos.max(neg);
    let ep = (pos - hi).exp();
    let en = (neg - hi).exp();
    Ok(ep / (ep + en))
}

/// The full joint distribution over valid assignments, tabulated.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    /// Every primitive configuration in mixed-radix order, last primitive fastest.
    pub configs: Vec<Vec<usize>>,
    pub labels: Vec<Vec<Label>>,
    /// `prob[c][0]` is `P(Y = -1, p = configs[c])`, `prob[c][1]` is `Y = 1`.
    pub prob: Vec<[f64; 2]>,
    pub log_partition: f64,
}

impl ExactDistribution {
    pub fn new(spec: &ModelSpec, w: &WeightVector) -> Result<Self, ModelError> {
        check_size(spec)?;
        w.check(spec)?;
        let sizes = spec.domains().to_vec();
        let mut p = vec![0usize; sizes.len()];
        let mut configs = Vec::new();
        let mut labels = Vec::new();
        let mut logs = Vec::new();
        loop {
            let lam = spec.eval_all(&p);
            let mut pair = [0.0; 2];
            for (slot, y) in [(0, -1i8), (1, 1)] {
                let a = Assignment {
                    y,
                    p: p.clone(),
                    lam: lam.clone(),
                };
                pair[slot] = log_density(spec, w, &a);
            }
            configs.push(p.clone());
            labels.push(lam);
            logs.push(pair);
            if !advance(&mut p, &sizes) {
                break;
            }
        }
        let hi = logs
            .iter()
            .flat_map(|l| l.iter())
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let z: f64 = logs
            .iter()
            .flat_map(|l| l.iter())
            .map(|&l| (l - hi).exp())
            .sum();
        let log_partition = hi + z.ln();
        let prob = logs
            .iter()
            .map(|l| [(l[0] - log_partition).exp(), (l[1] - log_partition).exp()])
            .collect();
        Ok(ExactDistribution {
            configs,
            labels,
            prob,
            log_partition,
        })
    }

    /// Marginal probability of each primitive configuration.
    pub fn primitive_marginal(&self) -> Vec<f64> {
        self.prob.iter().map(|p| p[0] + p[1]).collect()
    }

    /// Index of `p` in [`ExactDistribution::configs`].
    pub fn index_of(&self, spec: &ModelSpec, p: &[usize]) -> usize {
        p.iter()
            .zip(spec.domains())
            .fold(0, |acc, (&v, &d)| acc * d + v)
    }

    /// `ln P(p)` for an observed primitive configuration.
    pub fn log_marginal(&self, spec: &ModelSpec, p: &[usize]) -> f64 {
        let pr = self.prob[self.index_of(spec, p)];
        (pr[0] + pr[1]).ln()
    }

    /// Mean log-likelihood of observed primitive rows.
    pub fn mean_log_likelihood(&self, spec: &ModelSpec, rows: &[Vec<usize>]) -> f64 {
        rows.iter().map(|r| self.log_marginal(spec, r)).sum::<f64>() / rows.len() as f64
    }

    /// `E[y λ_i]` and `E[𝕀[p_a = p_b]]` under the model, the sufficient
    /// statistics paired with the weights.
    pub fn expected_statistics(&self, spec: &ModelSpec) -> (Vec<f64>, Vec<f64>) {
        let mut acc = vec![0.0; spec.n()];
        let mut sim = vec![0.0; spec.similarity_pairs().len()];
        for ((p, lam), pr) in self.configs.iter().zip(&self.labels).zip(&self.prob) {
            let signed = pr[1] - pr[0];
            for (a, l) in acc.iter_mut().zip(lam) {
                *a += signed * l.as_f64();
            }
            let mass = pr[0] + pr[1];
            for (s, &(i, j)) in sim.iter_mut().zip(spec.similarity_pairs()) {
                if p[i] == p[j] {
                    *s += mass;
                }
            }
        }
        (acc, sim)
    }

    /// Per-primitive marginal distributions over bins.
    pub fn bin_marginals(&self, spec: &ModelSpec) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = spec.domains().iter().map(|&d| vec![0.0; d]).collect();
        for (p, pr) in self.configs.iter().zip(&self.prob) {
            for (k, &v) in p.iter().enumerate() {
                out[k][v] += pr[0] + pr[1];
            }
        }
        out
    }

    /// `P(Y = 1)` under the model.
    pub fn class_marginal(&self) -> f64 {
        self.prob.iter().map(|p| p[1]).sum()
    }
}
