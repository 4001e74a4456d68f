use std::collections::{BTreeMap, BTreeSet};

use crate::model::{log_2cosh, ModelSpec, WeightVector};

use super::{check_data, LearnError};

/// Coefficients at or below this magnitude count as eliminated.
pub const SELECTION_KILL_THRESHOLD: f64 = 1e-3;

const MAX_ITERATIONS: usize = 500;
const STEP_TOLERANCE: f64 = 1e-7;
const INIT_ACC: f64 = 0.5;

/// Mean over rows of `Σ_k ln P(p_k | p_{-k})` under the marginal model of
/// the primitives, `P(p) ∝ 2cosh(Σ θ_i λ_i(p)) · exp(Σ θ_ij 𝕀[p_i = p_j])`.
pub fn pseudolikelihood(spec: &ModelSpec, w: &WeightVector, rows: &[Vec<usize>]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let mut p = Vec::with_capacity(spec.m());
    let mut logits = Vec::new();
    let mut total = 0.0;
    for row in rows {
        p.clear();
        p.extend_from_slice(row);
        let base: Vec<f64> = spec
            .hfs()
            .iter()
            .zip(&w.theta_acc)
            .map(|(h, t)| t * h.eval(row).as_f64())
            .collect();
        let full: f64 = base.iter().sum();
        for k in 0..spec.m() {
            let d = spec.domains()[k];
            if d == 1 {
                continue;
            }
            let outside: f64 = full - spec.dependents(k).iter().map(|&i| base[i]).sum::<f64>();
            logits.clear();
            for v in 0..d {
                p[k] = v;
                let a = outside
                    + spec
                        .dependents(k)
                        .iter()
                        .map(|&i| w.theta_acc[i] * spec.hf_eval(i, &p).as_f64())
                        .sum::<f64>();
                let s: f64 = spec
                    .neighbors(k)
                    .iter()
                    .filter(|&&(j, _)| p[j] == v)
                    .map(|&(_, t)| w.theta_sim[t])
                    .sum();
                logits.push(log_2cosh(a) + s);
            }
            p[k] = row[k];
            total += logits[row[k]] - log_sum_exp(&logits);
        }
    }
    total / rows.len() as f64
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// The conditional of one primitive's bin: every heuristic's output for each
/// candidate bin, and the bins of the comparable primitives, per distinct row.
struct Conditional {
    k: usize,
    d: usize,
    observed: Vec<usize>,
    /// `lam[(r * d + v) * n + i]`.
    lam: Vec<f64>,
    /// `others[r * c + t]` is the bin of candidate `t` in row `r`.
    others: Vec<usize>,
    candidates: Vec<usize>,
    /// Offset of this conditional's equality weights in the parameter vector.
    offset: usize,
}

/// All per-primitive conditionals with one shared set of accuracy weights
/// and separate equality weights per direction, over distinct rows.
struct Problem {
    n: usize,
    weights: Vec<f64>,
    total: f64,
    parts: Vec<Conditional>,
    dim: usize,
}

impl Problem {
    fn new(spec: &ModelSpec, data: &[Vec<usize>]) -> Self {
        let mut counts: BTreeMap<&[usize], f64> = BTreeMap::new();
        for row in data {
            *counts.entry(row.as_slice()).or_default() += 1.0;
        }
        let rows: Vec<&[usize]> = counts.keys().copied().collect();
        let weights: Vec<f64> = counts.values().copied().collect();
        let n = spec.n();
        let mut offset = n;
        let mut parts = Vec::new();
        for k in 0..spec.m() {
            let d = spec.domains()[k];
            if d < 2 {
                continue;
            }
            let candidates: Vec<usize> = (0..spec.m())
                .filter(|&j| j != k && spec.domains()[j] == d)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let mut lam = Vec::with_capacity(rows.len() * d * n);
            let mut others = Vec::with_capacity(rows.len() * candidates.len());
            let mut p = Vec::new();
            for row in &rows {
                p.clear();
                p.extend_from_slice(row);
                for v in 0..d {
                    p[k] = v;
                    lam.extend(spec.hfs().iter().map(|h| h.eval(&p).as_f64()));
                }
                others.extend(candidates.iter().map(|&j| row[j]));
            }
            let c = candidates.len();
            parts.push(Conditional {
                k,
                d,
                observed: rows.iter().map(|r| r[k]).collect(),
                lam,
                others,
                candidates,
                offset,
            });
            offset += c;
        }
        Problem {
            n,
            weights,
            total: data.len() as f64,
            parts,
            dim: offset,
        }
    }

    /// Mean negative log pseudolikelihood and, if asked, its gradient.
    fn evaluate(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let n = self.n;
        let theta = &x[..n];
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut loss = 0.0;
        for part in &self.parts {
            let (d, c) = (part.d, part.candidates.len());
            let sim = &x[part.offset..part.offset + c];
            let mut logits = vec![0.0; d];
            let mut tanhs = vec![0.0; d];
            for (r, &count) in self.weights.iter().enumerate() {
                let others = &part.others[r * c..(r + 1) * c];
                for v in 0..d {
                    let lam = &part.lam[(r * d + v) * n..(r * d + v + 1) * n];
                    let a: f64 = theta.iter().zip(lam).map(|(t, l)| t * l).sum();
                    let s: f64 = sim
                        .iter()
                        .zip(others)
                        .filter(|(_, &o)| o == v)
                        .map(|(w, _)| w)
                        .sum();
                    logits[v] = log_2cosh(a) + s;
                    tanhs[v] = a.tanh();
                }
                let lse = log_sum_exp(&logits);
                let obs = part.observed[r];
                loss += count * (lse - logits[obs]);
                if let Some(g) = grad.as_deref_mut() {
                    for v in 0..d {
                        let q = (logits[v] - lse).exp();
                        let weight = count * (q - if v == obs { 1.0 } else { 0.0 });
                        if weight == 0.0 {
                            continue;
                        }
                        let lam = &part.lam[(r * d + v) * n..(r * d + v + 1) * n];
                        for (gi, l) in g[..n].iter_mut().zip(lam) {
                            *gi += weight * tanhs[v] * l;
                        }
                        let gs = &mut g[part.offset..part.offset + c];
                        for (gt, &o) in gs.iter_mut().zip(others) {
                            if o == v {
                                *gt += weight;
                            }
                        }
                    }
                }
            }
        }
        let scale = 1.0 / self.total;
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v *= scale);
        }
        loss * scale
    }

    /// Proximal gradient descent with backtracking on
    /// `loss + l1 · ‖w‖₁`, the accuracy weights unpenalised.
    fn solve(&self, l1: f64) -> Vec<f64> {
        let (n, dim) = (self.n, self.dim);
        let mut x = vec![0.0; dim];
        x[..n].fill(INIT_ACC);
        let mut grad = vec![0.0; dim];
        let mut f = self.evaluate(&x, Some(&mut grad));
        let mut step = 1.0;
        let mut trial = vec![0.0; dim];
        for _ in 0..MAX_ITERATIONS {
            let moved: f64;
            loop {
                for t in 0..dim {
                    let z = x[t] - step * grad[t];
                    trial[t] = if t < n {
                        z
                    } else {
                        z.signum() * (z.abs() - step * l1).max(0.0)
                    };
                }
                let f_trial = self.evaluate(&trial, None);
                let mut lin = 0.0;
                let mut sq = 0.0;
                for t in 0..dim {
                    let dx = trial[t] - x[t];
                    lin += grad[t] * dx;
                    sq += dx * dx;
                }
                if f_trial <= f + lin + sq / (2.0 * step) + 1e-15 || step < 1e-10 {
                    moved = trial
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    break;
                }
                step *= 0.5;
            }
            x.copy_from_slice(&trial);
            f = self.evaluate(&x, Some(&mut grad));
            if moved < STEP_TOLERANCE {
                break;
            }
            step *= 1.5;
        }
        x
    }
}

/// Fits, for every primitive, an ℓ1-penalised model of its bin given the
/// equality indicators with every other primitive of the same cardinality,
/// with the class marginalised out through accuracy weights shared by all
/// primitives. A pair is selected when its coefficient survives in either
/// direction.
pub fn select_similarity_pairs(
    spec: &ModelSpec,
    data: &[Vec<usize>],
    l1_strength: f64,
) -> Result<Vec<(usize, usize)>, LearnError> {
    check_data(spec, data)?;
    let problem = Problem::new(spec, data);
    if problem.parts.is_empty() {
        return Ok(Vec::new());
    }
    let x = problem.solve(l1_strength);
    let mut selected = BTreeSet::new();
    for part in &problem.parts {
        let k = part.k;
        for (t, &j) in part.candidates.iter().enumerate() {
            if x[part.offset + t].abs() > SELECTION_KILL_THRESHOLD {
                selected.insert((k.min(j), k.max(j)));
            }
        }
    }
    Ok(selected.into_iter().collect())
}
