use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{accuracy_score, sigmoid, Assignment, ModelSpec, WeightVector};

/// One sampler chain. Each sweep consumes exactly `m + 1` uniforms from the
/// chain's own stream, so the draw used for variable `v` at sweep `t` is a
/// fixed position in the stream keyed by `(rng_seed, chain, t, v)`.
#[derive(Debug, Clone)]
pub struct GibbsState {
    /// Always valid: `lam` is the evaluation of `p`.
    pub current: Assignment,
    pub rng_seed: u64,
    pub step_count: u64,
    rng: ChaCha8Rng,
    scores: Vec<f64>,
}

impl GibbsState {
    /// Chain `chain` started at primitive configuration `p`.
    pub fn new(spec: &ModelSpec, p: Vec<usize>, y: i8, rng_seed: u64, chain: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(chain);
        GibbsState {
            current: Assignment::forced(spec, y, p),
            rng_seed,
            step_count: 0,
            rng,
            scores: Vec::new(),
        }
    }

    /// Moves the chain to a new primitive configuration without touching its
    /// random stream.
    pub fn reset(&mut self, spec: &ModelSpec, p: &[usize]) {
        self.current.p.clear();
        self.current.p.extend_from_slice(p);
        for (i, l) in self.current.lam.iter_mut().enumerate() {
            *l = spec.hf_eval(i, p);
        }
    }
}

/// One blocked sweep: resample the class, then each primitive jointly with
/// the outputs of every heuristic reading it.
pub fn blocked_gibbs_step(spec: &ModelSpec, w: &WeightVector, state: &mut GibbsState) {
    let GibbsState {
        current,
        rng,
        scores,
        ..
    } = state;

    let a = accuracy_score(&w.theta_acc, &current.lam);
    let u: f64 = rng.gen();
    current.y = if u < sigmoid(2.0 * a) { 1 } else { -1 };
    let y = f64::from(current.y);

    for k in 0..spec.m() {
        let u: f64 = rng.gen();
        let order = spec.candidate_order(k);
        if order.len() == 1 {
            continue;
        }
        scores.clear();
        for &v in order {
            current.p[k] = v;
            let mut s = 0.0;
            for &i in spec.dependents(k) {
                s += w.theta_acc[i] * spec.hf_eval(i, &current.p).as_f64();
            }
            s *= y;
            for &(j, t) in spec.neighbors(k) {
                if current.p[j] == v {
                    s += w.theta_sim[t];
                }
            }
            scores.push(s);
        }
        let hi = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut total = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - hi).exp();
            total += *s;
        }
        let target = u * total;
        let mut chosen = order[order.len() - 1];
        let mut acc = 0.0;
        for (&v, &s) in order.iter().zip(scores.iter()) {
            acc += s;
            if target < acc {
                chosen = v;
                break;
            }
        }
        current.p[k] = chosen;
        for &i in spec.dependents(k) {
            current.lam[i] = spec.hf_eval(i, &current.p);
        }
    }
    state.step_count += 1;
}
