use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::Label;
use crate::model::{ModelSpec, WeightVector};

use super::{
    blocked_gibbs_step, cd_gradient, check_data, pseudolikelihood, FitConfig, GibbsState,
    LearnError, NegativePhase, StepDecay,
};

/// Rows used for the per-epoch pseudolikelihood trace.
const TRACE_ROWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Mean gradient norm per epoch.
    pub grad_norms: Vec<f64>,
    /// Mean log pseudolikelihood per epoch, at the end-of-epoch weights.
    pub pseudolikelihood: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub weights: WeightVector,
    pub diagnostics: FitDiagnostics,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Stochastic gradient ascent on the marginal likelihood of the observed
/// primitive rows with a proximal ℓ1 step on the similarity weights. The
/// returned weights are the average of the last `average_fraction` of
/// iterates.
pub fn fit(
    spec: &ModelSpec,
    data: &[Vec<usize>],
    cfg: &FitConfig,
) -> Result<TrainedModel, LearnError> {
    cfg.validate()?;
    check_data(spec, data)?;
    let n_rows = data.len();
    // A heuristic that abstains on every row has a flat likelihood in its
    // weight and no evidence of accuracy; it stays at zero.
    let theta_acc = (0..spec.n())
        .map(|i| {
            let votes = data
                .iter()
                .any(|row| spec.hf_eval(i, row) != Label::Abstain);
            if votes {
                cfg.init_acc
            } else {
                0.0
            }
        })
        .collect();
    let mut w = WeightVector {
        theta_acc,
        theta_sim: vec![0.0; spec.similarity_pairs().len()],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Sampler streams are keyed off the seed but independent of the shuffle stream.
    let chain_seed = cfg.seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut chains: Vec<GibbsState> = (0..cfg.chains)
        .map(|c| {
            let row = &data[rng.gen_range(0..n_rows)];
            GibbsState::new(spec, row.clone(), 1, chain_seed, c as u64)
        })
        .collect();
    if !cfg.exact_negative_phase {
        for chain in chains.iter_mut() {
            for _ in 0..cfg.burn_in {
                blocked_gibbs_step(spec, &w, chain);
            }
        }
    }

    let batch = cfg.batch_size.min(n_rows);
    let steps_per_epoch = n_rows.div_ceil(batch);
    let total_steps = cfg.epochs * steps_per_epoch;
    let average_from = total_steps - (cfg.average_fraction * total_steps as f64).round() as usize;
    let mut avg = WeightVector::zeros(spec);
    let mut averaged = 0usize;

    let trace_rows: Vec<Vec<usize>> = data.iter().take(TRACE_ROWS).cloned().collect();
    let mut diagnostics = FitDiagnostics::default();
    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut step = 0usize;
    let mut rows: Vec<&[usize]> = Vec::with_capacity(batch);

    for epoch in 0..cfg.epochs {
        let start = w.as_flat();
        let mut norm_sum = 0.0;
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            rows.clear();
            rows.extend(chunk.iter().map(|&r| data[r].as_slice()));
            if !cfg.persistent {
                for (c, chain) in chains.iter_mut().enumerate() {
                    chain.reset(spec, rows[c % rows.len()]);
                }
            }
            let negative = if cfg.exact_negative_phase {
                NegativePhase::Exact
            } else {
                NegativePhase::Gibbs {
                    chains: &mut chains,
                    steps: cfg.cd_k,
                }
            };
            let g = cd_gradient(spec, &w, &rows, negative)?;
            norm_sum += g.norm();
            step += 1;
            let eta = match cfg.decay {
                StepDecay::InvSqrt => cfg.step_size / ((epoch + 1) as f64).sqrt(),
                StepDecay::Constant => cfg.step_size,
            };
            for (t, d) in w.theta_acc.iter_mut().zip(&g.acc) {
                *t += eta * d;
            }
            for (t, d) in w.theta_sim.iter_mut().zip(&g.sim) {
                *t = soft_threshold(*t + eta * d, eta * cfg.l1_strength);
            }
            if w.as_flat().iter().any(|v| !v.is_finite()) {
                return Err(LearnError::NonFiniteWeight { step });
            }
            if step > average_from {
                averaged += 1;
                let k = averaged as f64;
                for (a, t) in avg.theta_acc.iter_mut().zip(&w.theta_acc) {
                    *a += (t - *a) / k;
                }
                for (a, t) in avg.theta_sim.iter_mut().zip(&w.theta_sim) {
                    *a += (t - *a) / k;
                }
            }
        }
        diagnostics
            .grad_norms
            .push(norm_sum / steps_per_epoch as f64);
        diagnostics
            .pseudolikelihood
            .push(pseudolikelihood(spec, &w, &trace_rows));
        let moved = start
            .iter()
            .zip(w.as_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if moved < cfg.tolerance {
            diagnostics.converged = true;
            break;
        }
    }
    diagnostics.steps = step;

    let mut weights = if averaged > 0 { avg } else { w };
    for t in weights.theta_sim.iter_mut() {
        if t.abs() < cfg.kill_threshold {
            *t = 0.0;
        }
    }
    Ok(TrainedModel {
        spec: spec.clone(),
        weights,
        diagnostics,
    })
}
