use std::collections::BTreeSet;

use wslabel::analysis::build_dependency_structure;
use wslabel::baselines::{majority_vote, LabelerKind};
use wslabel::learn::FitConfig;
use wslabel::sim::{
    curves_csv, emit_curves, generate_dataset, run_comparison, SimConfig, SimError, SimResult,
    BAYES,
};

#[test]
fn emitted_programs_carry_the_planted_groups() {
    for arity in 1..=4 {
        let cfg = SimConfig {
            dependency_arity: arity,
            ..SimConfig::default()
        };
        for seed in 0..100 {
            let data = generate_dataset(&cfg, 10, seed);
            let deps = build_dependency_structure(&data.program);
            let groups: Vec<BTreeSet<String>> = deps
                .sharing_groups
                .values()
                .filter(|g| !g.is_empty())
                .cloned()
                .collect();
            assert_eq!(groups.len(), cfg.n_hfs - arity + 1);
            let planted: BTreeSet<String> = (0..arity).map(|i| format!("hf_{i}")).collect();
            if arity > 1 {
                assert!(groups.contains(&planted), "arity {arity}: {groups:?}");
            }
            assert!(groups.iter().all(|g| g.len() == 1 || *g == planted));
            assert_eq!(deps.shared_groups().count(), usize::from(arity > 1));
        }
    }
}

#[test]
fn heuristics_have_the_configured_accuracy() {
    let cfg = SimConfig {
        dependency_arity: 3,
        ..SimConfig::default()
    };
    let data = generate_dataset(&cfg, 100_000, 7);
    for i in 0..cfg.n_hfs {
        let hits = data
            .labels
            .iter()
            .zip(&data.y)
            .filter(|(lam, &y)| lam[i].value() == y)
            .count();
        let rate = hits as f64 / data.y.len() as f64;
        assert!((rate - 0.75).abs() < 0.01, "hf {i}: {rate}");
    }
    let positive = data.y.iter().filter(|&&y| y == 1).count() as f64 / 1e5;
    assert!((positive - 0.5).abs() < 0.01);
    // The group members emit the shared primitive itself.
    assert!(data.labels.iter().all(|l| l[0] == l[1] && l[1] == l[2]));
}

/// Majority vote labels a point from its own votes only.
#[test]
fn majority_vote_needs_no_training() {
    let cfg = SimConfig::default();
    let data = generate_dataset(&cfg, 500, 3);
    let full =
        wslabel::pipeline::label_from_outputs(LabelerKind::MajorityVote, &data.labels, &cfg.fit)
            .unwrap();
    let head = wslabel::pipeline::label_from_outputs(
        LabelerKind::MajorityVote,
        &data.labels[..50],
        &cfg.fit,
    )
    .unwrap();
    for (i, (a, b)) in full.iter().zip(&head).enumerate() {
        assert_eq!(a.p_y1, b.p_y1);
        assert_eq!(a.p_y1, majority_vote(&data.labels[i]));
    }
}

fn small() -> SimConfig {
    SimConfig {
        dependency_arity: 3,
        n_grid: vec![50, 100, 200, 400],
        seeds: vec![0, 1, 2],
        methods: vec![
            LabelerKind::MajorityVote,
            LabelerKind::Independent,
            LabelerKind::HfDep,
        ],
        fit: FitConfig {
            epochs: 10,
            ..FitConfig::default()
        },
        ..SimConfig::default()
    }
}

/// Means recomputed from the cells in a separate pass.
fn second_pass_mean(result: &SimResult, method: &str, n: usize) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for cell in &result.cells {
        if cell.method == method && cell.n == n {
            sum += cell.accuracy.unwrap();
            count += 1;
        }
    }
    sum / count as f64
}

#[test]
fn comparison_outputs_are_consistent() {
    let cfg = small();
    let result = run_comparison(&cfg).unwrap();
    assert!(result.cells.iter().all(|c| c.error.is_none()));
    assert!(result
        .cells
        .iter()
        .all(|c| (0.0..=1.0).contains(&c.accuracy.unwrap())));

    let csv = curves_csv(&result);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,n,mean,stderr,seeds");
    // Three methods plus the reference labeler over four sizes.
    assert_eq!(lines.len() - 1, (3 + 1) * 4);
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        let n: usize = cols[1].parse().unwrap();
        let mean: f64 = cols[2].parse().unwrap();
        assert!(
            (mean - second_pass_mean(&result, cols[0], n)).abs() < 1e-12,
            "{line}"
        );
        assert_eq!(cols[4], "3");
    }

    // The reference is the ceiling up to noise.
    for row in &result.summary {
        let bayes = result.mean(BAYES, row.n).unwrap();
        assert!(row.mean <= bayes + row.stderr.max(0.01), "{row:?}");
    }

    let again = run_comparison(&cfg).unwrap();
    assert_eq!(curves_csv(&again), csv);
    assert_eq!(again, result);
}

#[test]
fn emitting_writes_both_files_or_fails_cleanly() {
    let mut cfg = small();
    cfg.n_grid = vec![50];
    cfg.seeds = vec![0];
    let result = run_comparison(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_curves(&result, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(csv, curves_csv(&result));
    let json: SimResult =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("curves.json")).unwrap())
            .unwrap();
    assert_eq!(json, result);

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert!(matches!(
        emit_curves(&result, &blocker),
        Err(SimError::IoFailure { .. })
    ));
    let empty = SimResult {
        summary: vec![],
        cells: vec![],
        ..result
    };
    assert!(matches!(
        emit_curves(&empty, dir.path()),
        Err(SimError::EmptyResult)
    ));
}

#[test]
fn invalid_configs_are_rejected() {
    for cfg in [
        SimConfig {
            dependency_arity: 9,
            ..SimConfig::default()
        },
        SimConfig {
            hf_accuracy: 0.5,
            ..SimConfig::default()
        },
        SimConfig {
            n_grid: vec![0],
            ..SimConfig::default()
        },
    ] {
        assert!(matches!(run_comparison(&cfg), Err(SimError::Config(_))));
    }
}
