//! Static dependency analysis over a parsed program. Nothing here looks at
//! data: every result is a function of the [`SourceUnit`] alone.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsl::{CmpOp, Expr, ExprKind, HeuristicDecl, PrimitiveSpecifier, SourceUnit};

/// Which base primitives each primitive is built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionGraph {
    pub base_primitives: BTreeSet<String>,
    /// For base primitives this is the singleton `{b}`.
    pub compose: BTreeMap<String, BTreeSet<String>>,
}

impl CompositionGraph {
    pub fn is_base(&self, name: &str) -> bool {
        self.base_primitives.contains(name)
    }
}

/// Bipartite incidence between heuristics and the base primitives they read,
/// directly or through compositions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyStructure {
    pub hf_inputs: BTreeMap<String, BTreeSet<String>>,
    /// Base primitive → heuristics reading it. Primitives no heuristic reads
    /// have no entry.
    pub sharing_groups: BTreeMap<String, BTreeSet<String>>,
}

impl DependencyStructure {
    /// Groups of two or more heuristics related through a shared primitive.
    pub fn shared_groups(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.sharing_groups.iter().filter(|(_, g)| g.len() >= 2)
    }
}

/// Traverses each assignment's right-hand side and records every earlier
/// primitive it mentions. Mentions of raw inputs do not count.
pub fn extract_compositions(spec: &PrimitiveSpecifier) -> CompositionGraph {
    let mut base = BTreeSet::new();
    let mut compose: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for a in &spec.assignments {
        let name = &a.target.name;
        let mut resolved = BTreeSet::new();
        for mention in a.value.names() {
            if let Some(parts) = compose.get(mention) {
                resolved.extend(parts.iter().cloned());
            }
        }
        if resolved.is_empty() {
            base.insert(name.clone());
            resolved.insert(name.clone());
        }
        compose.insert(name.clone(), resolved);
    }
    CompositionGraph {
        base_primitives: base,
        compose,
    }
}

/// Union of the base-primitive sets of every parameter.
pub fn resolve_hf_inputs(hf: &HeuristicDecl, graph: &CompositionGraph) -> BTreeSet<String> {
    hf.param_names()
        .filter_map(|p| graph.compose.get(p))
        .flatten()
        .cloned()
        .collect()
}

pub fn build_dependency_structure(unit: &SourceUnit) -> DependencyStructure {
    let graph = extract_compositions(&unit.specifier);
    dependency_structure_with(unit, &graph)
}

fn dependency_structure_with(unit: &SourceUnit, graph: &CompositionGraph) -> DependencyStructure {
    let mut hf_inputs = BTreeMap::new();
    let mut sharing_groups: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for hf in &unit.heuristics {
        let inputs = resolve_hf_inputs(hf, graph);
        for p in &inputs {
            sharing_groups
                .entry(p.clone())
                .or_default()
                .insert(hf.name.name.clone());
        }
        hf_inputs.insert(hf.name.name.clone(), inputs);
    }
    DependencyStructure {
        hf_inputs,
        sharing_groups,
    }
}

/// Which side of a threshold a value equal to it falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutSide {
    /// Splits `x < t | x >= t` (from `<` and `>=`).
    Below,
    /// Splits `x <= t | x > t` (from `<=` and `>`).
    Above,
}

/// A bin boundary induced by a comparison against a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutPoint {
    pub value: f64,
    pub side: CutSide,
}

impl CutPoint {
    /// Whether `x` lies on the upper side of the boundary.
    pub fn passed_by(&self, x: f64) -> bool {
        match self.side {
            CutSide::Below => x >= self.value,
            CutSide::Above => x > self.value,
        }
    }

    fn sort_key(&self, other: &Self) -> std::cmp::Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.side.cmp(&other.side))
    }
}

/// Comparisons of the form `name op constant` (either orientation) in every
/// heuristic body, keyed by the primitive name actually compared.
fn comparisons(unit: &SourceUnit) -> Vec<(String, CmpOp, f64)> {
    let mut out = Vec::new();
    for hf in &unit.heuristics {
        hf.body.walk(&mut |e: &Expr| {
            if let ExprKind::Compare { op, lhs, rhs } = &e.kind {
                match (&lhs.kind, &rhs.kind) {
                    (ExprKind::Name(n), _) => {
                        if let Some(c) = rhs.as_constant() {
                            out.push((n.clone(), *op, c));
                        }
                    }
                    (_, ExprKind::Name(n)) => {
                        if let Some(c) = lhs.as_constant() {
                            out.push((n.clone(), op.flipped(), c));
                        }
                    }
                    _ => {}
                }
            }
        });
    }
    out
}

/// Threshold constants per compared primitive, ascending and deduplicated.
/// Comparisons over arithmetic combinations contribute nothing.
pub fn extract_thresholds(unit: &SourceUnit) -> BTreeMap<String, Vec<f64>> {
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (name, _, c) in comparisons(unit) {
        out.entry(name).or_default().push(c);
    }
    for v in out.values_mut() {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    out
}

/// Sided bin boundaries per compared primitive, ordered so that a value's
/// bin index is the number of boundaries it has passed. A threshold used
/// with both `<=` and `>=` (or with `==`) yields two boundaries and so a
/// singleton bin holding exactly that value.
pub fn extract_cut_points(unit: &SourceUnit) -> BTreeMap<String, Vec<CutPoint>> {
    let mut out: BTreeMap<String, Vec<CutPoint>> = BTreeMap::new();
    for (name, op, value) in comparisons(unit) {
        let sides: &[CutSide] = match op {
            CmpOp::Lt | CmpOp::Ge => &[CutSide::Below],
            CmpOp::Le | CmpOp::Gt => &[CutSide::Above],
            CmpOp::Eq => &[CutSide::Below, CutSide::Above],
        };
        let entry = out.entry(name).or_default();
        entry.extend(sides.iter().map(|&side| CutPoint { value, side }));
    }
    for v in out.values_mut() {
        v.sort_by(CutPoint::sort_key);
        v.dedup();
    }
    out
}

/// Everything the `analyze` command reports, with deterministic key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub base_primitives: BTreeSet<String>,
    pub compositions: BTreeMap<String, BTreeSet<String>>,
    pub hf_inputs: BTreeMap<String, BTreeSet<String>>,
    pub sharing_groups: BTreeMap<String, BTreeSet<String>>,
    pub thresholds: BTreeMap<String, Vec<f64>>,
}

pub fn analyze(unit: &SourceUnit) -> AnalysisReport {
    let graph = extract_compositions(&unit.specifier);
    let deps = dependency_structure_with(unit, &graph);
    AnalysisReport {
        base_primitives: graph.base_primitives,
        compositions: graph.compose,
        hf_inputs: deps.hf_inputs,
        sharing_groups: deps.sharing_groups,
        thresholds: extract_thresholds(unit),
    }
}
