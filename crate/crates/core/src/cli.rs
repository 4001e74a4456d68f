//! Command-line front end. Every subcommand computes its outputs fully in
//! memory, stages them next to their destinations and only then renames
//! them into place, so a failed run leaves nothing behind.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context as _};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use tempfile::NamedTempFile;

use wslabel::analysis::analyze;
use wslabel::baselines::LabelerKind;
use wslabel::dsl::{parse_named, Label, PrimitiveValues, SourceUnit};
use wslabel::learn::{FitConfig, LabelRecord, LearnError};
use wslabel::model::{enumerate_posterior, ModelError};
use wslabel::pipeline::{
    evaluate_rows, fit_program, hf_outputs, label_from_outputs, sha256_hex, LoadedModel, ModelFile,
    PipelineError,
};
use wslabel::sim::{curves_csv, curves_json, program_text, run_comparison, SimConfig, SimError};

/// Relative output paths resolve against this directory when it is set.
pub const OUTPUT_DIR_ENV: &str = "WSLABEL_OUTPUT_DIR";

const ID_COLUMN: &str = "id";

/// A failed run, split by whose fault it is: exit 1 for bad input, 2 for
/// anything the tool itself got wrong.
pub enum Failure {
    Usage(clap::Error),
    /// A pre-rendered source diagnostic.
    Diagnostic(String),
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Diagnostic(_) | Failure::User(_) => 1,
            Failure::Internal(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "{}", e.render().to_string().trim_end()),
            Failure::Diagnostic(d) => f.write_str(d),
            Failure::User(e) => write!(f, "error: {e:#}"),
            Failure::Internal(e) => write!(f, "internal error: {e:#}"),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let user = match &e {
            PipelineError::Evaluation { .. }
            | PipelineError::Program(_)
            | PipelineError::Inconsistent(_)
            | PipelineError::UnsupportedMethod(_) => true,
            PipelineError::Learn(l) => learn_is_user(l),
            PipelineError::Model(m) => model_is_user(m),
        };
        if user {
            Failure::User(e.into())
        } else {
            Failure::Internal(e.into())
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::IoFailure { .. } => Failure::User(e.into()),
            SimError::EmptyResult => Failure::Internal(e.into()),
        }
    }
}

fn learn_is_user(e: &LearnError) -> bool {
    match e {
        LearnError::Model(m) => model_is_user(m),
        _ => true,
    }
}

fn model_is_user(e: &ModelError) -> bool {
    matches!(
        e,
        ModelError::IntractableEnumeration { .. } | ModelError::MissingPrimitive(_)
    )
}

trait UserFault<T> {
    fn user(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UserFault<T> for Result<T, E> {
    fn user(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::User(e.into()))
    }
}

#[derive(Parser)]
#[command(
    name = "wslabel",
    version,
    about = "Label data with heuristic programs and a learned label model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the primitive compositions, heuristic inputs, sharing groups and
    /// thresholds of a program as JSON.
    Analyze {
        program: PathBuf,
        /// Write the JSON here (with a manifest) instead of standard output.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit a label model for a program on a CSV of raw inputs.
    Fit {
        program: PathBuf,
        /// CSV with an `id` column and one column per raw input.
        data: PathBuf,
        /// JSON fit configuration; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `hf-dep` or `hf-dsp-dep`.
        #[arg(long, default_value = "hf-dep")]
        method: LabelerKind,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Write one JSON line {"id", "p_y1", "lam"} per input row.
    Label {
        model: PathBuf,
        data: PathBuf,
        /// Labeler: mv, indep, learn-dep, hf-dep or hf-dsp-dep. Defaults to
        /// the method the model was fit with. `mv` ignores the model
        /// weights; `indep` and `learn-dep` refit on the given data.
        #[arg(long)]
        method: Option<LabelerKind>,
        /// Seed for labelers that refit; defaults to the model's.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the synthetic labeler comparison and write accuracy curves.
    Simulate {
        /// Size of the heuristic group sharing one primitive; 1 plants none.
        #[arg(long)]
        arity: Option<usize>,
        #[arg(long)]
        n_hfs: Option<usize>,
        /// Training-set sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        /// Seeds as a half-open range `a..b` or a comma-separated list.
        #[arg(long)]
        seeds: Option<String>,
        /// Labelers, comma separated.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<LabelerKind>>,
        #[arg(long)]
        accuracy: Option<f64>,
        /// JSON simulation configuration; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Exact posteriors by enumeration, in the `label` output format.
    Oracle {
        model: PathBuf,
        data: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

/// The command tree with the materialised defaults appended to the long help.
fn command() -> clap::Command {
    let fit_defaults = format!(
        "Fit configuration defaults:\n{}",
        serde_json::to_string_pretty(&FitConfig::default()).expect("serializable")
    );
    let sim_defaults = format!(
        "Simulation configuration defaults:\n{}",
        serde_json::to_string_pretty(&SimConfig::default()).expect("serializable")
    );
    Cli::command()
        .mut_subcommand("fit", |c| c.after_long_help(fit_defaults.clone()))
        .mut_subcommand("label", |c| c.after_long_help(fit_defaults))
        .mut_subcommand("simulate", |c| c.after_long_help(sim_defaults))
}

pub fn run() -> Result<(), Failure> {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(Failure::Usage(e)),
    };
    let cli = Cli::from_arg_matches(&matches).map_err(Failure::Usage)?;
    match cli.command {
        Command::Analyze { program, out } => cmd_analyze(&program, out.as_deref()),
        Command::Fit {
            program,
            data,
            config,
            method,
            seed,
            out,
        } => cmd_fit(&program, &data, config.as_deref(), method, seed, &out),
        Command::Label {
            model,
            data,
            method,
            seed,
            out,
        } => cmd_label(&model, &data, method, seed, &out),
        Command::Simulate {
            arity,
            n_hfs,
            grid,
            seeds,
            methods,
            accuracy,
            config,
            out,
        } => {
            let mut cfg: SimConfig = match config {
                Some(path) => read_json(&path)?,
                None => SimConfig::default(),
            };
            if let Some(a) = arity {
                cfg.dependency_arity = a;
            }
            if let Some(k) = n_hfs {
                cfg.n_hfs = k;
            }
            if let Some(g) = grid {
                cfg.n_grid = g;
            }
            if let Some(s) = seeds {
                cfg.seeds = parse_seeds(&s).user()?;
            }
            if let Some(m) = methods {
                cfg.methods = m;
            }
            if let Some(a) = accuracy {
                cfg.hf_accuracy = a;
            }
            cmd_simulate(&cfg, &out)
        }
        Command::Oracle { model, data, out } => cmd_oracle(&model, &data, &out),
    }
}

/// What produced an output: enough to reproduce it byte for byte.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    version: &'a str,
    seed: Option<u64>,
    config: serde_json::Value,
    /// SHA-256 of each input file, keyed by its role.
    inputs: BTreeMap<&'a str, String>,
}

impl<'a> RunManifest<'a> {
    fn new(subcommand: &'a str, seed: Option<u64>, config: impl Serialize) -> Self {
        RunManifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config).expect("serializable"),
            inputs: BTreeMap::new(),
        }
    }

    fn input(mut self, role: &'a str, bytes: &[u8]) -> Self {
        self.inputs.insert(role, sha256_hex(bytes));
        self
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s.into_bytes()
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Files written to temporaries beside their targets, renamed on commit.
#[derive(Default)]
struct Staged {
    files: Vec<(PathBuf, NamedTempFile)>,
}

impl Staged {
    fn stage(&mut self, path: &Path, bytes: &[u8]) -> Result<(), Failure> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir)
            .with_context(|| format!("cannot write into {}", dir.display()))
            .user()?;
        tmp.write_all(bytes)
            .and_then(|()| tmp.as_file().sync_all())
            .with_context(|| format!("writing {}", path.display()))
            .user()?;
        self.files.push((path.to_path_buf(), tmp));
        Ok(())
    }

    fn commit(self) -> Result<(), Failure> {
        for (path, tmp) in self.files {
            tmp.persist(&path)
                .map_err(|e| e.error)
                .with_context(|| format!("writing {}", path.display()))
                .user()?;
        }
        Ok(())
    }
}

fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .user()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let bytes = read_input(path)?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("invalid JSON in {}", path.display()))
        .user()
}

fn load_program(path: &Path) -> Result<(String, SourceUnit), Failure> {
    let bytes = read_input(path)?;
    let source = String::from_utf8(bytes)
        .with_context(|| format!("{} is not UTF-8", path.display()))
        .user()?;
    let name = path.display().to_string();
    let unit =
        parse_named(&source, &name).map_err(|e| Failure::Diagnostic(e.render(&name, &source)))?;
    Ok((source, unit))
}

/// Row ids and raw-input maps from a CSV whose header names an `id` column
/// and every raw input; other columns are ignored.
fn read_rows(
    path: &Path,
    bytes: &[u8],
    inputs: &[String],
) -> Result<(Vec<String>, Vec<PrimitiveValues>), Failure> {
    let mut reader = csv::Reader::from_reader(bytes);
    let headers = reader
        .headers()
        .with_context(|| format!("cannot read the header of {}", path.display()))
        .user()?
        .clone();
    let column = |name: &str| -> Result<usize, Failure> {
        let mut found = headers.iter().enumerate().filter(|(_, h)| *h == name);
        match (found.next(), found.next()) {
            (Some((i, _)), None) => Ok(i),
            (Some(_), Some(_)) => Err(Failure::User(anyhow!(
                "schema mismatch in {}: column `{name}` appears more than once",
                path.display()
            ))),
            (None, _) => Err(Failure::User(anyhow!(
                "schema mismatch in {}: missing column `{name}`",
                path.display()
            ))),
        }
    };
    let id_col = column(ID_COLUMN)?;
    let cols = inputs
        .iter()
        .map(|name| column(name))
        .collect::<Result<Vec<_>, _>>()?;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record
            .with_context(|| format!("{}: malformed record {}", path.display(), r + 1))
            .user()?;
        let id = record[id_col].to_string();
        let mut values = PrimitiveValues::new();
        for (name, &c) in inputs.iter().zip(&cols) {
            let cell = record[c].trim();
            let v: f64 = cell.parse().map_err(|_| {
                Failure::User(anyhow!(
                    "{}: row `{id}`: column `{name}` holds `{cell}`, not a number",
                    path.display()
                ))
            })?;
            values.insert(name.clone(), v);
        }
        ids.push(id);
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Failure::User(anyhow!(
            "{} has no data rows",
            path.display()
        )));
    }
    Ok((ids, rows))
}

/// Primitive values per row, with evaluation failures reported by row id.
fn primitive_values(
    unit: &SourceUnit,
    ids: &[String],
    raw: &[PrimitiveValues],
) -> Result<Vec<PrimitiveValues>, Failure> {
    evaluate_rows(unit, raw).map_err(|e| with_row_id(e, ids))
}

fn with_row_id(e: PipelineError, ids: &[String]) -> Failure {
    match e {
        PipelineError::Evaluation { row, source } => {
            Failure::User(anyhow!("row `{}`: {source}", ids[row]))
        }
        other => other.into(),
    }
}

fn input_names(unit: &SourceUnit) -> Vec<String> {
    unit.specifier.input_names().map(str::to_string).collect()
}

#[derive(Serialize)]
struct OutputRecord<'a> {
    id: &'a str,
    p_y1: f64,
    lam: &'a [Label],
}

fn jsonl(ids: &[String], records: &[LabelRecord]) -> Vec<u8> {
    let mut out = String::new();
    for (id, r) in ids.iter().zip(records) {
        let line = serde_json::to_string(&OutputRecord {
            id,
            p_y1: r.p_y1,
            lam: &r.lam,
        })
        .expect("serializable");
        out.push_str(&line);
        out.push('\n');
    }
    out.into_bytes()
}

fn cmd_analyze(program: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let (source, unit) = load_program(program)?;
    let mut json = serde_json::to_string_pretty(&analyze(&unit)).expect("serializable");
    json.push('\n');
    match out {
        None => {
            print!("{json}");
            Ok(())
        }
        Some(out) => {
            let out = resolve_output(out);
            let manifest = RunManifest::new("analyze", None, serde_json::Value::Null)
                .input("program", source.as_bytes());
            let mut staged = Staged::default();
            staged.stage(&out, json.as_bytes())?;
            staged.stage(&manifest_path(&out), &manifest.to_bytes())?;
            staged.commit()
        }
    }
}

fn cmd_fit(
    program: &Path,
    data: &Path,
    config: Option<&Path>,
    method: LabelerKind,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), Failure> {
    if !method.uses_program() {
        return Err(Failure::User(anyhow!(
            "`fit` takes hf-dep or hf-dsp-dep; `{method}` needs no model file"
        )));
    }
    let (source, unit) = load_program(program)?;
    let mut cfg: FitConfig = match config {
        Some(path) => read_json(path)?,
        None => FitConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(PipelineError::from)?;
    let data_bytes = read_input(data)?;
    let (ids, raw) = read_rows(data, &data_bytes, &input_names(&unit))?;
    let values = primitive_values(&unit, &ids, &raw)?;
    let model = fit_program(&source, &unit, &values, &cfg, method)?;
    let mut json = serde_json::to_string_pretty(&model)
        .context("serializing the model")
        .map_err(Failure::Internal)?;
    json.push('\n');

    #[derive(Serialize)]
    struct Resolved<'a> {
        method: LabelerKind,
        fit: &'a FitConfig,
    }
    let manifest = RunManifest::new("fit", Some(cfg.seed), Resolved { method, fit: &cfg })
        .input("program", source.as_bytes())
        .input("data", &data_bytes);
    let out = resolve_output(out);
    let mut staged = Staged::default();
    staged.stage(&out, json.as_bytes())?;
    staged.stage(&manifest_path(&out), &manifest.to_bytes())?;
    staged.commit()
}

fn load_model(path: &Path) -> Result<(Vec<u8>, ModelFile, LoadedModel), Failure> {
    let bytes = read_input(path)?;
    let file: ModelFile = serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is not a model file", path.display()))
        .user()?;
    let loaded = file.load()?;
    Ok((bytes, file, loaded))
}

fn cmd_label(
    model: &Path,
    data: &Path,
    method: Option<LabelerKind>,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), Failure> {
    let (model_bytes, file, loaded) = load_model(model)?;
    let method = method.unwrap_or(file.method);
    let mut cfg = file.fit_config.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let data_bytes = read_input(data)?;
    let (ids, raw) = read_rows(data, &data_bytes, &input_names(&loaded.unit))?;
    let values = primitive_values(&loaded.unit, &ids, &raw)?;
    let records = if method.uses_program() {
        if method != file.method {
            return Err(Failure::User(anyhow!(
                "the model was fit with `{}`; refit it to label with `{method}`",
                file.method
            )));
        }
        loaded.label(&values)?
    } else {
        let matrix = hf_outputs(&loaded.unit, &values).map_err(|e| with_row_id(e, &ids))?;
        label_from_outputs(method, &matrix, &cfg)?
    };

    #[derive(Serialize)]
    struct Resolved<'a> {
        method: LabelerKind,
        fit: &'a FitConfig,
    }
    let manifest = RunManifest::new("label", Some(cfg.seed), Resolved { method, fit: &cfg })
        .input("model", &model_bytes)
        .input("data", &data_bytes);
    let out = resolve_output(out);
    let mut staged = Staged::default();
    staged.stage(&out, &jsonl(&ids, &records))?;
    staged.stage(&manifest_path(&out), &manifest.to_bytes())?;
    staged.commit()
}

fn cmd_oracle(model: &Path, data: &Path, out: &Path) -> Result<(), Failure> {
    let (model_bytes, _, loaded) = load_model(model)?;
    let data_bytes = read_input(data)?;
    let (ids, raw) = read_rows(data, &data_bytes, &input_names(&loaded.unit))?;
    let values = primitive_values(&loaded.unit, &ids, &raw)?;
    let tm = &loaded.trained;
    let records = loaded
        .bins(&values)?
        .into_iter()
        .map(|p| {
            let p_y1 = enumerate_posterior(&tm.spec, &tm.weights, &p)
                .map_err(|e| Failure::from(PipelineError::from(e)))?;
            Ok(LabelRecord {
                p_y1,
                lam: tm.spec.eval_all(&p),
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let manifest = RunManifest::new("oracle", None, serde_json::Value::Null)
        .input("model", &model_bytes)
        .input("data", &data_bytes);
    let out = resolve_output(out);
    let mut staged = Staged::default();
    staged.stage(&out, &jsonl(&ids, &records))?;
    staged.stage(&manifest_path(&out), &manifest.to_bytes())?;
    staged.commit()
}

fn cmd_simulate(cfg: &SimConfig, out: &Path) -> Result<(), Failure> {
    cfg.validate()?;
    let result = run_comparison(cfg)?;
    if result.summary.is_empty() {
        return Err(SimError::EmptyResult.into());
    }
    let dir = resolve_output(out);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .user()?;
    let program = program_text(cfg.n_hfs, cfg.dependency_arity);
    let manifest = RunManifest::new("simulate", None, cfg);
    let mut staged = Staged::default();
    staged.stage(&dir.join("curves.csv"), curves_csv(&result).as_bytes())?;
    staged.stage(&dir.join("curves.json"), curves_json(&result).as_bytes())?;
    staged.stage(
        &dir.join(format!(
            "program_arity{}_hfs{}.coral",
            cfg.dependency_arity, cfg.n_hfs
        )),
        program.as_bytes(),
    )?;
    staged.stage(&dir.join("manifest.json"), &manifest.to_bytes())?;
    staged.commit()
}

/// `a..b` (half-open) or a comma-separated list.
fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let bad = || anyhow!("seeds must be `a..b` or a comma-separated list, got `{s}`");
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}
