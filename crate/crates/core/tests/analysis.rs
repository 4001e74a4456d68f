mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{label_tree, random_program, read_fixture, Generated, Limits};
use wslabel::analysis::{
    analyze, build_dependency_structure, extract_compositions, extract_thresholds,
    resolve_hf_inputs,
};
use wslabel::dsl::parse;

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn running_example_structure() {
    let unit = parse(&read_fixture("running_example.coral")).unwrap();
    let g = extract_compositions(&unit.specifier);
    assert_eq!(g.base_primitives, set(&["area", "intensity", "perimeter"]));
    assert_eq!(g.compose["ratio"], set(&["intensity", "perimeter"]));
    assert_eq!(g.compose["area"], set(&["area"]));
    let ratio_hf = unit.heuristic("hf_ratio_check").unwrap();
    assert_eq!(
        resolve_hf_inputs(ratio_hf, &g),
        set(&["intensity", "perimeter"])
    );
    let area_hf = unit.heuristic("hf_area_check").unwrap();
    assert_eq!(resolve_hf_inputs(area_hf, &g), set(&["area"]));
    let deps = build_dependency_structure(&unit);
    assert_eq!(
        deps.sharing_groups["perimeter"],
        set(&["hf_perimeter_check", "hf_ratio_check"])
    );
    let shared: Vec<_> = deps.shared_groups().map(|(p, _)| p.as_str()).collect();
    assert_eq!(shared, ["perimeter"]);
}

#[test]
fn mammogram_has_no_shared_primitives() {
    let unit = parse(&read_fixture("mammogram.coral")).unwrap();
    assert_eq!(unit.heuristics.len(), 6);
    let deps = build_dependency_structure(&unit);
    assert_eq!(deps.shared_groups().count(), 0);
    let thresholds = extract_thresholds(&unit);
    assert_eq!(thresholds.len(), 6);
    assert!(thresholds.values().all(|t| t.len() == 2), "{thresholds:?}");
    assert_eq!(thresholds["area"], vec![30000.0, 100000.0]);
}

#[test]
fn visual_genome_has_large_groups() {
    let unit = parse(&read_fixture("visual_genome.coral")).unwrap();
    let deps = build_dependency_structure(&unit);
    for p in ["person", "bike"] {
        let group = &deps.sharing_groups[p];
        for hf in ["hf_positions", "hf_size", "hf_number"] {
            assert!(group.contains(hf), "{p}: {group:?}");
        }
    }
    assert!(deps.shared_groups().filter(|(_, g)| g.len() >= 3).count() >= 2);
}

#[test]
fn chained_composition_resolves_to_bases() {
    let unit = parse(
        "primitives {\n input rx, ry, rz\n x = rx\n y = ry\n z = rz\n a = x + y\n b = a * z\n}\n",
    )
    .unwrap();
    let g = extract_compositions(&unit.specifier);
    assert_eq!(g.compose["b"], set(&["x", "y", "z"]));
    assert_eq!(g.compose["a"], set(&["x", "y"]));
}

#[test]
fn no_comparisons_no_thresholds() {
    let unit = parse("primitives {\n input r\n p = r\n}\nhf h(p) {\n 1\n}\n").unwrap();
    assert!(extract_thresholds(&unit).is_empty());
}

/// Base primitives reachable from `p` in the raw mention graph.
fn reachable_bases(g: &Generated, p: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![p.to_string()];
    let mut seen = BTreeSet::new();
    while let Some(q) = stack.pop() {
        if !seen.insert(q.clone()) {
            continue;
        }
        let direct = &g.mentions[&q];
        if direct.is_empty() {
            out.insert(q);
        } else {
            stack.extend(direct.iter().cloned());
        }
    }
    out
}

fn big_limits() -> Limits {
    Limits {
        inputs: 6,
        primitives: 50,
        heuristics: 8,
        depth: 6,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn compositions_equal_reachability(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_program(&mut rng, &big_limits());
        let unit = parse(&g.text).unwrap();
        let graph = extract_compositions(&unit.specifier);
        for p in &g.primitives {
            prop_assert_eq!(&graph.compose[p], &reachable_bases(&g, p), "{}", p);
            prop_assert_eq!(graph.is_base(p), g.mentions[p].is_empty());
        }
        for (p, bases) in &graph.compose {
            prop_assert!(bases.iter().all(|b| graph.base_primitives.contains(b)), "{}", p);
        }
    }

    #[test]
    fn sharing_groups_transpose_hf_inputs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_program(&mut rng, &big_limits());
        let deps = build_dependency_structure(&parse(&g.text).unwrap());
        let mut transposed: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (hf, inputs) in &deps.hf_inputs {
            for p in inputs {
                transposed.entry(p.clone()).or_default().insert(hf.clone());
            }
        }
        let nonempty: BTreeMap<_, _> = deps
            .sharing_groups
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        prop_assert_eq!(transposed, nonempty);
    }

    #[test]
    fn adding_a_heuristic_keeps_existing_inputs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_program(&mut rng, &Limits::default());
        let before = build_dependency_structure(&parse(&g.text).unwrap());
        let params = vec![g.primitives[0].clone()];
        let extra = format!(
            "{}\nhf hf_extra({}) {{\n    {}\n}}\n",
            g.text,
            params[0],
            label_tree(&mut rng, &params, 2)
        );
        let after = build_dependency_structure(&parse(&extra).unwrap());
        for (hf, inputs) in &before.hf_inputs {
            prop_assert_eq!(&after.hf_inputs[hf], inputs);
        }
        prop_assert_eq!(after.hf_inputs.len(), before.hf_inputs.len() + 1);
    }

    #[test]
    fn analysis_output_is_reproducible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_program(&mut rng, &Limits::default());
        let a = serde_json::to_string(&analyze(&parse(&g.text).unwrap())).unwrap();
        let b = serde_json::to_string(&analyze(&parse(&g.text).unwrap())).unwrap();
        prop_assert_eq!(a, b);
    }
}
