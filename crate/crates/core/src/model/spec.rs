use std::fmt;
use std::sync::Arc;

use crate::dsl::Label;

use super::ModelError;

/// Lookup tables are used up to this many input combinations.
pub const MAX_TABLE_ENTRIES: usize = 4096;

type EvalFn = dyn Fn(&[usize]) -> Label + Send + Sync;

/// How a heuristic's output is computed from the bins of its inputs.
#[derive(Clone)]
pub enum HfEval {
    /// Row-major table over the input bins; `strides[t]` belongs to `inputs[t]`.
    Table {
        strides: Vec<usize>,
        labels: Vec<Label>,
    },
    /// Called with the input bins in `inputs` order.
    Closure(Arc<EvalFn>),
}

impl fmt::Debug for HfEval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HfEval::Table { labels, .. } => write!(f, "Table({} entries)", labels.len()),
            HfEval::Closure(_) => f.write_str("Closure"),
        }
    }
}

/// One heuristic node of the factor graph.
#[derive(Debug, Clone)]
pub struct HfNode {
    pub name: String,
    /// Base-primitive indices, ascending and distinct.
    pub inputs: Vec<usize>,
    pub eval: HfEval,
}

impl HfNode {
    /// Builds a node from a function of the input bins. The function is
    /// tabulated when the input space has at most [`MAX_TABLE_ENTRIES`] cells.
    pub fn from_fn<F>(
        name: impl Into<String>,
        inputs: Vec<usize>,
        domains: &[usize],
        f: F,
    ) -> Result<HfNode, ModelError>
    where
        F: Fn(&[usize]) -> Label + Send + Sync + 'static,
    {
        let name = name.into();
        check_inputs(&name, &inputs, domains)?;
        let sizes: Vec<usize> = inputs.iter().map(|&k| domains[k]).collect();
        let total = sizes
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .unwrap_or(usize::MAX);
        if total > MAX_TABLE_ENTRIES {
            return Ok(HfNode {
                name,
                inputs,
                eval: HfEval::Closure(Arc::new(f)),
            });
        }
        let strides = strides_for(&sizes);
        let mut labels = Vec::with_capacity(total);
        let mut bins = vec![0usize; sizes.len()];
        for _ in 0..total {
            labels.push(f(&bins));
            advance(&mut bins, &sizes);
        }
        Ok(HfNode {
            name,
            inputs,
            eval: HfEval::Table { strides, labels },
        })
    }

    /// Node whose table is given explicitly, row-major over `inputs`.
    pub fn from_table(
        name: impl Into<String>,
        inputs: Vec<usize>,
        domains: &[usize],
        labels: Vec<Label>,
    ) -> Result<HfNode, ModelError> {
        let name = name.into();
        check_inputs(&name, &inputs, domains)?;
        let sizes: Vec<usize> = inputs.iter().map(|&k| domains[k]).collect();
        let total: usize = sizes.iter().product();
        if labels.len() != total {
            return Err(ModelError::ShapeMismatch(format!(
                "table for `{name}` has {} entries, expected {total}",
                labels.len()
            )));
        }
        Ok(HfNode {
            name,
            inputs,
            eval: HfEval::Table {
                strides: strides_for(&sizes),
                labels,
            },
        })
    }

    /// Output for a full primitive assignment `p`.
    #[inline]
    pub fn eval(&self, p: &[usize]) -> Label {
        match &self.eval {
            HfEval::Table { strides, labels } => {
                let mut idx = 0;
                for (t, &k) in self.inputs.iter().enumerate() {
                    idx += p[k] * strides[t];
                }
                labels[idx]
            }
            HfEval::Closure(f) => {
                let bins: Vec<usize> = self.inputs.iter().map(|&k| p[k]).collect();
                f(&bins)
            }
        }
    }

    pub fn is_table(&self) -> bool {
        matches!(self.eval, HfEval::Table { .. })
    }
}

fn check_inputs(name: &str, inputs: &[usize], domains: &[usize]) -> Result<(), ModelError> {
    if inputs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ModelError::ShapeMismatch(format!(
            "inputs of `{name}` must be ascending and distinct"
        )));
    }
    if let Some(&k) = inputs.iter().find(|&&k| k >= domains.len()) {
        return Err(ModelError::ShapeMismatch(format!(
            "`{name}` reads primitive {k} of {}",
            domains.len()
        )));
    }
    Ok(())
}

fn strides_for(sizes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; sizes.len()];
    for t in (0..sizes.len().saturating_sub(1)).rev() {
        strides[t] = strides[t + 1] * sizes[t + 1];
    }
    strides
}

/// Mixed-radix increment, last position fastest. Returns false on wrap-around.
pub(crate) fn advance(bins: &mut [usize], sizes: &[usize]) -> bool {
    for t in (0..bins.len()).rev() {
        bins[t] += 1;
        if bins[t] < sizes[t] {
            return true;
        }
        bins[t] = 0;
    }
    false
}

/// Topology of the factor graph: primitives with finite domains, heuristic
/// nodes over them and the set of primitive pairs carrying a similarity factor.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    primitive_names: Vec<String>,
    domains: Vec<usize>,
    hfs: Vec<HfNode>,
    similarity_pairs: Vec<(usize, usize)>,
    dependents: Vec<Vec<usize>>,
    neighbors: Vec<Vec<(usize, usize)>>,
    candidate_order: Vec<Vec<usize>>,
}

impl ModelSpec {
    pub fn new(
        primitive_names: Vec<String>,
        domains: Vec<usize>,
        hfs: Vec<HfNode>,
        similarity_pairs: Vec<(usize, usize)>,
    ) -> Result<ModelSpec, ModelError> {
        if primitive_names.len() != domains.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} primitive names for {} domains",
                primitive_names.len(),
                domains.len()
            )));
        }
        if let Some(k) = domains.iter().position(|&d| d == 0) {
            return Err(ModelError::EmptyDomain(primitive_names[k].clone()));
        }
        for hf in &hfs {
            check_inputs(&hf.name, &hf.inputs, &domains)?;
            if let HfEval::Table { labels, .. } = &hf.eval {
                let total: usize = hf.inputs.iter().map(|&k| domains[k]).product();
                if labels.len() != total {
                    return Err(ModelError::ShapeMismatch(format!(
                        "table for `{}` does not cover its input domain",
                        hf.name
                    )));
                }
            }
        }
        let mut pairs = similarity_pairs;
        pairs.sort_unstable();
        pairs.dedup();
        for &(i, j) in &pairs {
            if i >= j || j >= domains.len() {
                return Err(ModelError::InvalidPair(i, j));
            }
            if domains[i] != domains[j] {
                return Err(ModelError::IncomparableDomains {
                    left: domains[i],
                    right: domains[j],
                });
            }
        }

        let m = domains.len();
        let mut dependents = vec![Vec::new(); m];
        for (i, hf) in hfs.iter().enumerate() {
            for &k in &hf.inputs {
                dependents[k].push(i);
            }
        }
        let mut neighbors = vec![Vec::new(); m];
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            neighbors[i].push((j, idx));
            neighbors[j].push((i, idx));
        }
        let candidate_order = (0..m)
            .map(|k| single_input_order(k, domains[k], &hfs, &dependents[k], &domains))
            .collect();

        Ok(ModelSpec {
            primitive_names,
            domains,
            hfs,
            similarity_pairs: pairs,
            dependents,
            neighbors,
            candidate_order,
        })
    }

    /// Same topology with a different similarity-pair set.
    pub fn with_similarity_pairs(
        &self,
        pairs: Vec<(usize, usize)>,
    ) -> Result<ModelSpec, ModelError> {
        ModelSpec::new(
            self.primitive_names.clone(),
            self.domains.clone(),
            self.hfs.clone(),
            pairs,
        )
    }

    /// Number of heuristics.
    pub fn n(&self) -> usize {
        self.hfs.len()
    }

    /// Number of primitives.
    pub fn m(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[usize] {
        &self.domains
    }

    pub fn primitive_names(&self) -> &[String] {
        &self.primitive_names
    }

    pub fn hfs(&self) -> &[HfNode] {
        &self.hfs
    }

    pub fn similarity_pairs(&self) -> &[(usize, usize)] {
        &self.similarity_pairs
    }

    /// Heuristics reading primitive `k`.
    pub fn dependents(&self, k: usize) -> &[usize] {
        &self.dependents[k]
    }

    /// `(other primitive, pair index)` for every similarity pair touching `k`.
    pub fn neighbors(&self, k: usize) -> &[(usize, usize)] {
        &self.neighbors[k]
    }

    /// Order in which the sampler visits the bins of `k`. Bins are sorted by
    /// the outputs of heuristics reading only `k`, so models that differ only
    /// by a relabelling of bins draw identical samples.
    pub fn candidate_order(&self, k: usize) -> &[usize] {
        &self.candidate_order[k]
    }

    #[inline]
    pub fn hf_eval(&self, i: usize, p: &[usize]) -> Label {
        self.hfs[i].eval(p)
    }

    pub fn eval_all(&self, p: &[usize]) -> Vec<Label> {
        self.hfs.iter().map(|h| h.eval(p)).collect()
    }

    /// Number of primitive configurations, `None` on overflow.
    pub fn primitive_space_size(&self) -> Option<u128> {
        self.domains
            .iter()
            .try_fold(1u128, |acc, &d| acc.checked_mul(d as u128))
    }

    pub fn check_row(&self, p: &[usize]) -> Result<(), ModelError> {
        if p.len() != self.m() {
            return Err(ModelError::ShapeMismatch(format!(
                "row has {} primitives, model has {}",
                p.len(),
                self.m()
            )));
        }
        if let Some(k) = (0..p.len()).find(|&k| p[k] >= self.domains[k]) {
            return Err(ModelError::ShapeMismatch(format!(
                "bin {} out of range for `{}` ({} bins)",
                p[k], self.primitive_names[k], self.domains[k]
            )));
        }
        Ok(())
    }
}

fn single_input_order(
    k: usize,
    size: usize,
    hfs: &[HfNode],
    dependents: &[usize],
    domains: &[usize],
) -> Vec<usize> {
    let own: Vec<&HfNode> = dependents
        .iter()
        .map(|&i| &hfs[i])
        .filter(|h| h.inputs == [k])
        .collect();
    let mut p = vec![0usize; domains.len()];
    let mut keyed: Vec<(Vec<Label>, usize)> = (0..size)
        .map(|v| {
            p[k] = v;
            (own.iter().map(|h| h.eval(&p)).collect(), v)
        })
        .collect();
    keyed.sort();
    keyed.into_iter().map(|(_, v)| v).collect()
}

/// Factor weights. `theta_sim[t]` belongs to `spec.similarity_pairs()[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub theta_acc: Vec<f64>,
    pub theta_sim: Vec<f64>,
}

impl WeightVector {
    pub fn zeros(spec: &ModelSpec) -> Self {
        WeightVector {
            theta_acc: vec![0.0; spec.n()],
            theta_sim: vec![0.0; spec.similarity_pairs().len()],
        }
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<(), ModelError> {
        if self.theta_acc.len() != spec.n() || self.theta_sim.len() != spec.similarity_pairs().len()
        {
            return Err(ModelError::ShapeMismatch(format!(
                "weights ({}, {}) do not match model ({}, {})",
                self.theta_acc.len(),
                self.theta_sim.len(),
                spec.n(),
                spec.similarity_pairs().len()
            )));
        }
        if self
            .theta_acc
            .iter()
            .chain(&self.theta_sim)
            .any(|v| !v.is_finite())
        {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }

    pub fn sim(&self, spec: &ModelSpec, i: usize, j: usize) -> Option<f64> {
        let key = if i < j { (i, j) } else { (j, i) };
        spec.similarity_pairs()
            .iter()
            .position(|&p| p == key)
            .map(|t| self.theta_sim[t])
    }

    pub fn as_flat(&self) -> Vec<f64> {
        self.theta_acc
            .iter()
            .chain(&self.theta_sim)
            .copied()
            .collect()
    }
}

/// One joint configuration of the latent class, the primitives and the
/// heuristic outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Latent class, `-1` or `1`.
    pub y: i8,
    pub p: Vec<usize>,
    pub lam: Vec<Label>,
}

impl Assignment {
    /// The valid assignment for `p`: heuristic outputs forced by evaluation.
    pub fn forced(spec: &ModelSpec, y: i8, p: Vec<usize>) -> Assignment {
        let lam = spec.eval_all(&p);
        Assignment { y, p, lam }
    }

    pub fn is_valid(&self, spec: &ModelSpec) -> bool {
        (0..spec.n()).all(|i| self.lam[i] == spec.hf_eval(i, &self.p))
    }
}
