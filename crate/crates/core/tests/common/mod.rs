//! Random valid programs for property tests. Generated as text so every test
//! exercises the parser too.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).expect("fixture readable")
}

pub const CORPUS: [&str; 5] = [
    "running_example.coral",
    "mammogram.coral",
    "visual_genome.coral",
    "activitynet.coral",
    "bone_tumor.coral",
];

const CONSTANTS: [&str; 8] = ["0", "1", "2.5", "0.125", "100000", "3e-4", "12345.678", "7"];

pub struct Limits {
    pub inputs: usize,
    pub primitives: usize,
    pub heuristics: usize,
    pub depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            inputs: 4,
            primitives: 8,
            heuristics: 5,
            depth: 3,
        }
    }
}

/// A generated program plus what its author knows about it.
pub struct Generated {
    pub text: String,
    pub inputs: Vec<String>,
    pub primitives: Vec<String>,
    /// Primitive names mentioned directly by each assignment (inputs excluded).
    pub mentions: BTreeMap<String, BTreeSet<String>>,
    pub heuristics: Vec<(String, Vec<String>)>,
}

pub fn num_expr(rng: &mut impl Rng, names: &[String], depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        return if !names.is_empty() && rng.gen_bool(0.7) {
            names.choose(rng).unwrap().clone()
        } else {
            CONSTANTS.choose(rng).unwrap().to_string()
        };
    }
    match rng.gen_range(0..6) {
        0 => format!("-{}", num_expr(rng, names, depth - 1)),
        1 => format!(
            "if {} {{ {} }} else {{ {} }}",
            bool_expr(rng, names, depth - 1),
            num_expr(rng, names, depth - 1),
            num_expr(rng, names, depth - 1)
        ),
        k => {
            let op = ["+", "-", "*", "/"][k - 2];
            format!(
                "({} {op} {})",
                num_expr(rng, names, depth - 1),
                num_expr(rng, names, depth - 1)
            )
        }
    }
}

pub fn bool_expr(rng: &mut impl Rng, names: &[String], depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.5) {
        let op = ["<", "<=", ">", ">=", "=="].choose(rng).unwrap();
        let lhs = if names.is_empty() {
            CONSTANTS.choose(rng).unwrap().to_string()
        } else {
            names.choose(rng).unwrap().clone()
        };
        return format!("{lhs} {op} {}", num_expr(rng, names, depth.min(1)));
    }
    match rng.gen_range(0..3) {
        0 => format!("not ({})", bool_expr(rng, names, depth - 1)),
        1 => format!(
            "({} and {})",
            bool_expr(rng, names, depth - 1),
            bool_expr(rng, names, depth - 1)
        ),
        _ => format!(
            "({} or {})",
            bool_expr(rng, names, depth - 1),
            bool_expr(rng, names, depth - 1)
        ),
    }
}

pub fn label_tree(rng: &mut impl Rng, names: &[String], depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return ["-1", "0", "1"].choose(rng).unwrap().to_string();
    }
    let mut s = format!(
        "if {} {{ {} }}",
        bool_expr(rng, names, depth - 1),
        label_tree(rng, names, depth - 1)
    );
    for _ in 0..rng.gen_range(0..2) {
        s += &format!(
            " elif {} {{ {} }}",
            bool_expr(rng, names, depth - 1),
            label_tree(rng, names, depth - 1)
        );
    }
    s + &format!(" else {{ {} }}", label_tree(rng, names, depth - 1))
}

pub fn random_program(rng: &mut impl Rng, limits: &Limits) -> Generated {
    let n_inputs = rng.gen_range(1..=limits.inputs);
    let inputs: Vec<String> = (0..n_inputs).map(|i| format!("raw_{i}")).collect();
    let n_prims = rng.gen_range(1..=limits.primitives);
    let mut primitives: Vec<String> = Vec::new();
    let mut mentions = BTreeMap::new();
    let mut text = format!("primitives {{\n    input {}\n", inputs.join(", "));
    for k in 0..n_prims {
        let name = format!("p_{k}");
        // Either a function of raw inputs or of earlier primitives, never both.
        let from_prims = !primitives.is_empty() && rng.gen_bool(0.6);
        let (expr, direct) = if from_prims {
            let k = rng.gen_range(1..=primitives.len().min(3));
            let pool: Vec<String> = primitives.choose_multiple(rng, k).cloned().collect();
            let e = num_expr(rng, &pool, limits.depth);
            let used = mentioned(&e, &pool);
            (e, used)
        } else {
            let input = inputs.choose(rng).unwrap().clone();
            (num_expr(rng, &[input], limits.depth), BTreeSet::new())
        };
        text += &format!("    {name} = {expr}\n");
        mentions.insert(name.clone(), direct);
        primitives.push(name);
    }
    text += "}\n";
    let mut heuristics = Vec::new();
    for h in 0..rng.gen_range(0..=limits.heuristics) {
        let k = rng.gen_range(1..=primitives.len().min(3));
        let params: Vec<String> = primitives.choose_multiple(rng, k).cloned().collect();
        let body = label_tree(rng, &params, limits.depth);
        text += &format!("\nhf hf_{h}({}) {{\n    {body}\n}}\n", params.join(", "));
        heuristics.push((format!("hf_{h}"), params));
    }
    Generated {
        text,
        inputs,
        primitives,
        mentions,
        heuristics,
    }
}

/// Which of `pool` occur as whole identifiers in `text`.
pub fn mentioned(text: &str, pool: &[String]) -> BTreeSet<String> {
    let words: BTreeSet<&str> = text
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .collect();
    pool.iter()
        .filter(|p| words.contains(p.as_str()))
        .cloned()
        .collect()
}

use wslabel::dsl::Label;
use wslabel::model::{ExactDistribution, HfNode, ModelSpec, WeightVector};

pub fn random_label(rng: &mut impl Rng) -> Label {
    Label::ALL[rng.gen_range(0..3)]
}

/// A random small factor graph: `m` primitives with domains of 1..=`max_d`
/// bins, `n` heuristics each over a random nonempty subset of at most three
/// primitives with a random output table, and, when `pairs` is set, a random
/// subset of the comparable primitive pairs.
pub fn random_spec(rng: &mut impl Rng, m: usize, max_d: usize, n: usize, pairs: bool) -> ModelSpec {
    let domains: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=max_d)).collect();
    let names = (0..m).map(|k| format!("p{k}")).collect();
    let hfs = (0..n)
        .map(|i| {
            let size = rng.gen_range(1..=m.min(3));
            let mut inputs: Vec<usize> = (0..m)
                .collect::<Vec<_>>()
                .choose_multiple(rng, size)
                .copied()
                .collect();
            inputs.sort_unstable();
            let cells: usize = inputs.iter().map(|&k| domains[k]).product();
            let table = (0..cells).map(|_| random_label(rng)).collect();
            HfNode::from_table(format!("h{i}"), inputs, &domains, table).unwrap()
        })
        .collect();
    let mut chosen = Vec::new();
    if pairs {
        for i in 0..m {
            for j in i + 1..m {
                if domains[i] == domains[j] && rng.gen_bool(0.5) {
                    chosen.push((i, j));
                }
            }
        }
    }
    ModelSpec::new(names, domains, hfs, chosen).unwrap()
}

pub fn random_weights(rng: &mut impl Rng, spec: &ModelSpec, scale: f64) -> WeightVector {
    WeightVector {
        theta_acc: (0..spec.n())
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
        theta_sim: (0..spec.similarity_pairs().len())
            .map(|_| rng.gen_range(-scale..scale))
            .collect(),
    }
}

/// Every primitive configuration, last primitive fastest.
pub fn all_configs(domains: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &d in domains {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..d).map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Raw input rows for `unit` that land on, near and between the program's
/// constants, dropping rows the specifier cannot evaluate.
pub fn spread_rows(
    rng: &mut impl Rng,
    unit: &wslabel::dsl::SourceUnit,
    n: usize,
) -> Vec<std::collections::HashMap<String, f64>> {
    let mut constants = vec![0.0];
    for hf in &unit.heuristics {
        hf.body.walk(&mut |e| constants.extend(e.as_constant()));
    }
    let lo = constants.iter().copied().fold(f64::INFINITY, f64::min) - 10.0;
    let hi = constants.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 10.0;
    let inputs: Vec<String> = unit.specifier.input_names().map(str::to_string).collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let row: std::collections::HashMap<String, f64> = inputs
            .iter()
            .map(|name| {
                let c = constants[rng.gen_range(0..constants.len())];
                let v = match rng.gen_range(0..3) {
                    0 => c,
                    1 => c + rng.gen_range(-1.0..1.0),
                    _ => rng.gen_range(lo..hi),
                };
                (name.clone(), v)
            })
            .collect();
        if wslabel::dsl::evaluate_specifier(&unit.specifier, &row).is_ok() {
            out.push(row);
        }
    }
    out
}

/// Draws `n` primitive rows from the model's exact marginal.
pub fn sample_rows(
    spec: &ModelSpec,
    w: &WeightVector,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<usize>> {
    let exact = ExactDistribution::new(spec, w).unwrap();
    let marginal = exact.primitive_marginal();
    let configs = all_configs(spec.domains());
    let mut cdf = Vec::with_capacity(configs.len());
    let mut acc = 0.0;
    for p in &configs {
        acc += marginal[exact.index_of(spec, p)];
        cdf.push(acc);
    }
    (0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            let k = cdf.partition_point(|&c| c < u).min(configs.len() - 1);
            configs[k].clone()
        })
        .collect()
}
