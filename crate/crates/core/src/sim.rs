//! Synthetic benchmark: heuristics of fixed accuracy where one group reads a
//! single shared primitive and the rest read private ones. Every labeler is
//! fit on each generated dataset and scored against the planted class.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::LabelerKind;
use crate::dsl::{parse, Label, PrimitiveValues, SourceUnit};
use crate::learn::{FitConfig, LabelRecord};
use crate::pipeline::{
    evaluate_rows, fit_program, hf_outputs, label_from_outputs, write_atomic, PipelineError,
};

/// Name of the closed-form reference labeler in results.
pub const BAYES: &str = "bayes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_hfs: usize,
    /// Size of the group sharing one primitive; `1` plants no dependency.
    pub dependency_arity: usize,
    pub hf_accuracy: f64,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<LabelerKind>,
    pub fit: FitConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_hfs: 8,
            dependency_arity: 1,
            hf_accuracy: 0.75,
            n_grid: vec![100, 300, 1000, 3000, 10000],
            seeds: (0..20).collect(),
            methods: LabelerKind::ALL.to_vec(),
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        source: std::io::Error,
    },
    #[error("nothing to write: result has no cells")]
    EmptyResult,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.n_hfs == 0 {
            return bad("n_hfs must be positive");
        }
        if self.dependency_arity == 0 || self.dependency_arity > self.n_hfs {
            return bad("dependency_arity must lie in 1..=n_hfs");
        }
        if !(self.hf_accuracy > 0.5 && self.hf_accuracy < 1.0) {
            return bad("hf_accuracy must lie strictly between 0.5 and 1");
        }
        if self.n_grid.iter().any(|&n| n == 0) {
            return bad("grid sizes must be positive");
        }
        self.fit
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))
    }
}

/// One generated benchmark instance.
#[derive(Debug, Clone)]
pub struct SimDataset {
    /// Raw input names, one column each in `raw`.
    pub inputs: Vec<String>,
    /// `±1` values of every input per row.
    pub raw: Vec<Vec<f64>>,
    pub labels: Vec<Vec<Label>>,
    pub y: Vec<i8>,
    pub program: SourceUnit,
    pub program_text: String,
}

impl SimDataset {
    pub fn raw_maps(&self) -> Vec<PrimitiveValues> {
        self.raw
            .iter()
            .map(|r| self.inputs.iter().cloned().zip(r.iter().copied()).collect())
            .collect()
    }
}

/// Program text for the planted wiring: heuristics `0..arity` read
/// `shared`, every other heuristic `i` reads `private_i`.
pub fn program_text(n_hfs: usize, arity: usize) -> String {
    let shared = arity >= 2;
    let mut inputs = Vec::new();
    let mut assigns = Vec::new();
    if shared {
        inputs.push("g".to_string());
        assigns.push("shared = g".to_string());
    }
    let first_private = if shared { arity } else { 0 };
    for i in first_private..n_hfs {
        inputs.push(format!("u{i}"));
        assigns.push(format!("private_{i} = u{i}"));
    }
    let mut out = String::from("primitives {\n");
    let _ = writeln!(out, "    input {}", inputs.join(", "));
    for a in &assigns {
        let _ = writeln!(out, "    {a}");
    }
    out.push_str("}\n");
    for i in 0..n_hfs {
        let param = if shared && i < arity {
            "shared".to_string()
        } else {
            format!("private_{i}")
        };
        let _ = write!(
            out,
            "\nhf hf_{i}({param}) {{\n    if {param} > 0 {{\n        1\n    }} else {{\n        -1\n    }}\n}}\n"
        );
    }
    out
}

/// Draws `n_points` rows. The class is uniform; every primitive agrees with
/// it with probability `hf_accuracy`, independently.
pub fn generate_dataset(cfg: &SimConfig, n_points: usize, seed: u64) -> SimDataset {
    let text = program_text(cfg.n_hfs, cfg.dependency_arity);
    let program = parse(&text).expect("generated program parses");
    let inputs = program
        .specifier
        .input_names()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n_points as u64);
    let shared = cfg.dependency_arity >= 2;
    let mut raw = Vec::with_capacity(n_points);
    let mut labels = Vec::with_capacity(n_points);
    let mut y = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let class: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
        let row: Vec<f64> = inputs
            .iter()
            .map(|_| {
                let agree = rng.gen_bool(cfg.hf_accuracy);
                f64::from(if agree { class } else { -class })
            })
            .collect();
        let lam = (0..cfg.n_hfs)
            .map(|i| {
                let col = if shared && i < cfg.dependency_arity {
                    0
                } else if shared {
                    i - cfg.dependency_arity + 1
                } else {
                    i
                };
                if row[col] > 0.0 {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect();
        raw.push(row);
        labels.push(lam);
        y.push(class);
    }
    SimDataset {
        inputs,
        raw,
        labels,
        y,
        program,
        program_text: text,
    }
}

/// Posterior under the generating parameters: the shared primitive counts
/// once and all votes carry equal weight.
pub fn bayes_posterior(data: &SimDataset) -> Vec<f64> {
    data.raw
        .iter()
        .map(|row| {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                1.0
            } else if sum < 0.0 {
                0.0
            } else {
                0.5
            }
        })
        .collect()
}

/// Fraction of points whose most probable class is the true one; a posterior
/// of exactly one half earns half credit.
pub fn accuracy(p_y1: &[f64], y: &[i8]) -> f64 {
    let total: f64 = p_y1
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            if p == 0.5 {
                0.5
            } else if (p > 0.5) == (t > 0) {
                1.0
            } else {
                0.0
            }
        })
        .sum();
    total / y.len() as f64
}

/// Labels one dataset with one method.
pub fn run_method(
    kind: LabelerKind,
    data: &SimDataset,
    fit_cfg: &FitConfig,
) -> Result<Vec<LabelRecord>, PipelineError> {
    let values = evaluate_rows(&data.program, &data.raw_maps())?;
    if kind.uses_program() {
        let model = fit_program(&data.program_text, &data.program, &values, fit_cfg, kind)?;
        model.load()?.label(&values)
    } else {
        label_from_outputs(kind, &hf_outputs(&data.program, &values)?, fit_cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub n: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
}

impl SimResult {
    pub fn mean(&self, method: &str, n: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.method == method && r.n == n)
            .map(|r| r.mean)
    }
}

/// Every (seed, N, method) cell plus the closed-form reference. Fit failures
/// are recorded in their cell and left out of the summary.
pub fn run_comparison(cfg: &SimConfig) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let grid: Vec<(u64, usize)> = cfg
        .seeds
        .iter()
        .flat_map(|&seed| cfg.n_grid.iter().map(move |&n| (seed, n)))
        .collect();
    // Cells are independent; collecting in grid order keeps the output
    // identical to a sequential run.
    let cells: Vec<CellResult> = grid
        .par_iter()
        .map(|&(seed, n)| run_cell(cfg, seed, n))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let mut order: Vec<String> = cfg.methods.iter().map(|k| k.to_string()).collect();
    order.push(BAYES.to_string());
    let summary = summarize(&cells, &order, &cfg.n_grid);
    Ok(SimResult {
        config: cfg.clone(),
        cells,
        summary,
    })
}

/// Every method plus the closed-form reference on one generated dataset.
fn run_cell(cfg: &SimConfig, seed: u64, n: usize) -> Vec<CellResult> {
    let data = generate_dataset(cfg, n, seed);
    let fit_cfg = FitConfig {
        seed,
        ..cfg.fit.clone()
    };
    let mut cells = Vec::with_capacity(cfg.methods.len() + 1);
    for &kind in &cfg.methods {
        let (accuracy, error) = match run_method(kind, &data, &fit_cfg) {
            Ok(records) => {
                let p: Vec<f64> = records.iter().map(|r| r.p_y1).collect();
                (Some(accuracy(&p, &data.y)), None)
            }
            Err(e) => (None, Some(e.to_string())),
        };
        cells.push(CellResult {
            method: kind.to_string(),
            n,
            seed,
            accuracy,
            error,
        });
    }
    cells.push(CellResult {
        method: BAYES.to_string(),
        n,
        seed,
        accuracy: Some(accuracy(&bayes_posterior(&data), &data.y)),
        error: None,
    });
    cells
}

/// Mean and standard error per (method, N), methods in `order`, N in grid order.
pub fn summarize(cells: &[CellResult], order: &[String], grid: &[usize]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for c in cells {
        if let Some(a) = c.accuracy {
            groups.entry((c.method.as_str(), c.n)).or_default().push(a);
        }
    }
    let mut rows = Vec::new();
    for method in order {
        for &n in grid {
            let Some(values) = groups.get(&(method.as_str(), n)) else {
                continue;
            };
            let k = values.len() as f64;
            let mean = values.iter().sum::<f64>() / k;
            let stderr = if values.len() > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
                (var / k).sqrt()
            } else {
                0.0
            };
            rows.push(SummaryRow {
                method: method.clone(),
                n,
                mean,
                stderr,
                seeds: values.len(),
            });
        }
    }
    rows
}

/// `curves.csv` contents: one row per method and N, in summary order.
pub fn curves_csv(result: &SimResult) -> String {
    let mut csv = String::from("method,n,mean,stderr,seeds\n");
    for r in &result.summary {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.method, r.n, r.mean, r.stderr, r.seeds
        );
    }
    csv
}

/// `curves.json` contents: config, every cell and the summary.
pub fn curves_json(result: &SimResult) -> String {
    serde_json::to_string_pretty(result).expect("serializable")
}

/// Writes `curves.csv` and `curves.json` into `dir`.
pub fn emit_curves(result: &SimResult, dir: &Path) -> Result<(), SimError> {
    if result.summary.is_empty() {
        return Err(SimError::EmptyResult);
    }
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| SimError::IoFailure { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let csv_path = dir.join("curves.csv");
    write_atomic(&csv_path, curves_csv(result).as_bytes()).map_err(io(&csv_path))?;
    let json_path = dir.join("curves.json");
    write_atomic(&json_path, curves_json(result).as_bytes()).map_err(io(&json_path))?;
    Ok(())
}
