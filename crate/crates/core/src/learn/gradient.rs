use crate::model::{accuracy_score, ExactDistribution, ModelSpec, WeightVector};

use super::{blocked_gibbs_step, GibbsState, LearnError};

/// Gradient of the mean log marginal likelihood, split like the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub acc: Vec<f64>,
    pub sim: Vec<f64>,
}

impl Gradient {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Gradient {
            acc: vec![0.0; spec.n()],
            sim: vec![0.0; spec.similarity_pairs().len()],
        }
    }

    pub fn norm(&self) -> f64 {
        self.acc
            .iter()
            .chain(&self.sim)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn as_flat(&self) -> Vec<f64> {
        self.acc.iter().chain(&self.sim).copied().collect()
    }
}

/// Source of the model expectation.
pub enum NegativePhase<'a> {
    /// Advance each chain `steps` sweeps and average over the chains.
    Gibbs {
        chains: &'a mut [GibbsState],
        steps: usize,
    },
    /// Exact expectation by enumeration.
    Exact,
}

/// Adds the class-integrated statistics of configuration `p` with weight `scale`.
fn accumulate(
    spec: &ModelSpec,
    w: &WeightVector,
    p: &[usize],
    lam: &[crate::dsl::Label],
    scale: f64,
    g: &mut Gradient,
) {
    let t = accuracy_score(&w.theta_acc, lam).tanh() * scale;
    for (a, l) in g.acc.iter_mut().zip(lam) {
        *a += t * l.as_f64();
    }
    for (s, &(i, j)) in g.sim.iter_mut().zip(spec.similarity_pairs()) {
        if p[i] == p[j] {
            *s += scale;
        }
    }
}

/// Data statistics minus model statistics. In both phases the class is
/// integrated out: `E[y λ_i | p] = tanh(Σ θ_j λ_j) λ_i`.
pub fn cd_gradient(
    spec: &ModelSpec,
    w: &WeightVector,
    batch: &[&[usize]],
    negative: NegativePhase<'_>,
) -> Result<Gradient, LearnError> {
    if batch.is_empty() {
        return Err(LearnError::EmptyData);
    }
    w.check(spec)?;
    let mut g = Gradient::zeros(spec);
    let scale = 1.0 / batch.len() as f64;
    let mut lam = Vec::with_capacity(spec.n());
    for row in batch {
        spec.check_row(row)
            .map_err(|e| LearnError::ShapeMismatch(e.to_string()))?;
        lam.clear();
        lam.extend(spec.hfs().iter().map(|h| h.eval(row)));
        accumulate(spec, w, row, &lam, scale, &mut g);
    }

    let mut neg = Gradient::zeros(spec);
    match negative {
        NegativePhase::Gibbs { chains, steps } => {
            if chains.is_empty() {
                return Err(LearnError::ShapeMismatch("no sampler chains".into()));
            }
            let scale = 1.0 / chains.len() as f64;
            for chain in chains.iter_mut() {
                for _ in 0..steps {
                    blocked_gibbs_step(spec, w, chain);
                }
                let c = &chain.current;
                accumulate(spec, w, &c.p, &c.lam, scale, &mut neg);
            }
        }
        NegativePhase::Exact => {
            let dist = ExactDistribution::new(spec, w)?;
            let (acc, sim) = dist.expected_statistics(spec);
            neg.acc = acc;
            neg.sim = sim;
        }
    }
    for (a, b) in g.acc.iter_mut().zip(&neg.acc) {
        *a -= b;
    }
    for (a, b) in g.sim.iter_mut().zip(&neg.sim) {
        *a -= b;
    }
    Ok(g)
}
