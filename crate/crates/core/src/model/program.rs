use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::analysis::{
    extract_compositions, extract_cut_points, resolve_hf_inputs, CompositionGraph,
};
use crate::dsl::{evaluate_hf, Assignment as DslAssignment, Label, PrimitiveValues, SourceUnit};

use super::{Binning, HfNode, ModelError, ModelSpec};

/// Bins of one base primitive and a raw value standing in for each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveBins {
    pub name: String,
    pub binning: Binning,
    /// One value per bin; lies inside its bin.
    pub representatives: Vec<f64>,
}

/// Discretisation of every base primitive of a program, in specifier order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub primitives: Vec<PrimitiveBins>,
}

impl Discretization {
    /// Primitives compared against constants are cut at those constants.
    /// The rest get `quantile_bins` quantile bins over `rows`. Each bin's
    /// representative is the median of the training values it holds, or a
    /// synthetic in-bin value if it holds none.
    pub fn fit(unit: &SourceUnit, rows: &[PrimitiveValues], quantile_bins: usize) -> Self {
        let graph = extract_compositions(&unit.specifier);
        let mut cuts = extract_cut_points(unit);
        let primitives = base_in_order(unit, &graph)
            .into_iter()
            .map(|name| {
                let values: Vec<f64> = rows.iter().filter_map(|r| r.get(&name).copied()).collect();
                let binning = match cuts.remove(&name) {
                    Some(c) => Binning::new(c),
                    None => Binning::quantile(&values, quantile_bins),
                };
                let representatives = representatives(&binning, &values);
                PrimitiveBins {
                    name,
                    binning,
                    representatives,
                }
            })
            .collect();
        Discretization { primitives }
    }

    pub fn names(&self) -> Vec<String> {
        self.primitives.iter().map(|p| p.name.clone()).collect()
    }

    pub fn domains(&self) -> Vec<usize> {
        self.primitives
            .iter()
            .map(|p| p.binning.cardinality())
            .collect()
    }

    /// Bin vector for one data point's primitive values.
    pub fn bins_for(&self, values: &PrimitiveValues) -> Result<Vec<usize>, ModelError> {
        self.primitives
            .iter()
            .map(|p| {
                values
                    .get(&p.name)
                    .map(|&x| p.binning.bin(x))
                    .ok_or_else(|| ModelError::MissingPrimitive(p.name.clone()))
            })
            .collect()
    }
}

fn base_in_order(unit: &SourceUnit, graph: &CompositionGraph) -> Vec<String> {
    unit.specifier
        .primitive_names()
        .filter(|n| graph.is_base(n))
        .map(str::to_string)
        .collect()
}

fn representatives(binning: &Binning, values: &[f64]) -> Vec<f64> {
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); binning.cardinality()];
    for &v in values.iter().filter(|v| v.is_finite()) {
        per_bin[binning.bin(v)].push(v);
    }
    per_bin
        .into_iter()
        .enumerate()
        .map(|(b, mut vs)| {
            if vs.is_empty() {
                return binning.synthetic_value(b);
            }
            vs.sort_by(f64::total_cmp);
            vs[(vs.len() - 1) / 2]
        })
        .collect()
}

/// Builds the factor graph of a program: one variable per base primitive and
/// one node per heuristic over the base primitives it reads. A heuristic over
/// composed primitives is evaluated at the bin representatives of its inputs.
/// Evaluation failures at representative values (division by zero) abstain.
pub fn build_program_model(
    unit: &SourceUnit,
    disc: &Discretization,
    similarity_pairs: Vec<(usize, usize)>,
) -> Result<ModelSpec, ModelError> {
    let graph = extract_compositions(&unit.specifier);
    let names = disc.names();
    let domains = disc.domains();
    if base_in_order(unit, &graph) != names {
        return Err(ModelError::ShapeMismatch(
            "discretization does not match the program's base primitives".into(),
        ));
    }
    let index: BTreeMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut hfs = Vec::with_capacity(unit.heuristics.len());
    for hf in &unit.heuristics {
        let mut inputs: Vec<usize> = resolve_hf_inputs(hf, &graph)
            .iter()
            .map(|n| index[n.as_str()])
            .collect();
        inputs.sort_unstable();
        let composed: Vec<DslAssignment> = unit
            .specifier
            .assignments
            .iter()
            .filter(|a| {
                !graph.is_base(&a.target.name)
                    && graph.compose[&a.target.name]
                        .iter()
                        .all(|b| inputs.contains(&index[b.as_str()]))
            })
            .cloned()
            .collect();
        let reps: Vec<(String, Vec<f64>)> = inputs
            .iter()
            .map(|&k| (names[k].clone(), disc.primitives[k].representatives.clone()))
            .collect();
        let decl = hf.clone();
        let eval = move |bins: &[usize]| -> Label {
            let mut env: PrimitiveValues = reps
                .iter()
                .zip(bins)
                .map(|((name, r), &b)| (name.clone(), r[b]))
                .collect();
            for a in &composed {
                match crate::dsl::evaluate_expr(&a.value, &env, &a.target.name) {
                    Ok(v) => {
                        env.insert(a.target.name.clone(), v);
                    }
                    Err(_) => return Label::Abstain,
                }
            }
            evaluate_hf(&decl, &env).unwrap_or(Label::Abstain)
        };
        hfs.push(HfNode::from_fn(
            hf.name.name.clone(),
            inputs,
            &domains,
            eval,
        )?);
    }
    ModelSpec::new(names, domains, hfs, similarity_pairs)
}
