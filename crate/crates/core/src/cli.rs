//! Command-line driver: `gen-data`, `validate`, `train`, `audit` and `report`.
//!
//! [`run`] parses arguments, executes one command and returns the process
//! exit code: 0 on success, 1 for usage or configuration errors, 2 for data
//! errors (missing or malformed inputs and report directories) and 3 for any
//! other failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::attribution::Method;
use crate::dataset::{
    default_templates, generate_null_paired, generate_synthetic_paired, load_compas_csv,
    load_dataset, save_paired, AuditDataset, DataFormat, Injection, Schema, Subgroups, FEMALE,
    MALE,
};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::pipeline::{
    fit_classifier, read_report_dir, run_audit, write_report_dir, write_scores_table, AuditConfig,
};
use crate::report::{grid_csv, render_bias, render_effect_table, render_grid, write_box_plots};
use crate::textmodel::{save_model, split_tokens};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "AUDIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "xai-disparity",
    version,
    about = "Audit feature-attribution explanations for subgroup disparity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic paired corpus
    GenData(GenDataArgs),
    /// Load a dataset and print a summary
    Validate(ValidateArgs),
    /// Train one classifier and save it as JSON
    Train(TrainArgs),
    /// Run a repeated disparity audit and print the result grid
    Audit(AuditArgs),
    /// Render a saved report directory
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Csv,
    Jsonl,
    Compas,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset file (canonical CSV/JSONL or a raw COMPAS CSV)
    #[arg(long)]
    dataset: PathBuf,
    /// Input format; inferred from the file extension when omitted
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
}

#[derive(Debug, Args, Serialize)]
struct GenDataArgs {
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    /// none, length or noise
    #[arg(long, default_value = "none")]
    injection: String,
    /// Draw each variant's gender independently (symmetric null corpus)
    #[arg(long)]
    null: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// csv or jsonl; inferred from --out when omitted
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    split_ratio: Option<f64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Share one embedding row between the two words of every gendered pair
    #[arg(long)]
    tied_embeddings: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Model JSON to write
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// Comma-separated methods (GRAD,GXI,IG,IGXI,LIME,SHAP); all by default
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Comma-separated metrics; all but sensitivity by default
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// Add the sensitivity metric
    #[arg(long)]
    with_sensitivity: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    d_threshold: Option<f64>,
    /// Report directory to write
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
    Svg,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory written by `audit --out`
    dir: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
    /// Output directory for csv/svg files; csv goes to stdout when omitted,
    /// svg defaults to DIR/plots
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::Data { .. }
        | Error::Io { .. }
        | Error::Csv(_)
        | Error::Json(_)
        | Error::Record(_)
        | Error::EmptyCorpus
        | Error::EmptyText
        | Error::SingleClass => 2,
        _ => 3,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Results go to `out`, diagnostics and the resolved
/// configuration to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let threads = std::env::var(THREADS_ENV).ok();
    match dispatch(cli.command, threads.as_deref(), out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(
    command: Command,
    threads: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(&a, err),
        Command::Validate(a) => validate(&a, out),
        Command::Train(a) => train(&a, out, err),
        Command::Audit(a) => audit(&a, threads, out, err),
        Command::Report(a) => report(&a, out),
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::Report(format!("writing output: {e}")))
}

fn echo_config<T: Serialize>(err: &mut dyn Write, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    write_out(err, &format!("{json}\n"))
}

fn parse_list<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    items
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn parse_threads(value: Option<&str>) -> Result<Option<usize>> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got '{v}'"
            ))),
        },
    }
}

fn load(data: &DataArgs) -> Result<AuditDataset> {
    let path = &data.dataset;
    if !path.is_file() {
        return Err(Error::data(path, 0, "dataset file not found"));
    }
    match data.format {
        Some(InputFormat::Compas) => Ok(AuditDataset::Unpaired {
            subgroups: Subgroups {
                a: MALE.into(),
                b: FEMALE.into(),
            },
            records: load_compas_csv(path)?,
        }),
        Some(InputFormat::Csv) => load_dataset(path, DataFormat::Csv, &Schema::default()),
        Some(InputFormat::Jsonl) => load_dataset(path, DataFormat::Jsonl, &Schema::default()),
        None => load_dataset(path, DataFormat::from_path(path), &Schema::default()),
    }
}

fn gen_data(a: &GenDataArgs, err: &mut dyn Write) -> Result<()> {
    echo_config(err, a)?;
    let injection: Injection = a.injection.parse()?;
    let format = match &a.format {
        Some(f) => f.parse()?,
        None => DataFormat::from_path(&a.out),
    };
    if a.null && injection != Injection::None {
        return Err(Error::Config(
            "--null cannot be combined with an injection".into(),
        ));
    }
    let templates = default_templates();
    let records = if a.null {
        generate_null_paired(&templates, a.pairs, a.seed)?
    } else {
        generate_synthetic_paired(&templates, a.pairs, injection, a.seed)?
    };
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    save_paired(&a.out, format, &records)
}

#[derive(Serialize)]
struct GroupSummary {
    subgroup: String,
    texts: usize,
    positive: usize,
    negative: usize,
    mean_tokens: f64,
}

#[derive(Serialize)]
struct DatasetSummary {
    path: PathBuf,
    paired: bool,
    records: usize,
    texts: usize,
    groups: Vec<GroupSummary>,
}

fn summarize(path: &Path, data: &AuditDataset) -> DatasetSummary {
    let rows: Vec<(&str, &str, usize)> = match data {
        AuditDataset::Paired { records, .. } => records
            .iter()
            .flat_map(|r| [&r.a, &r.b])
            .map(|v| (v.subgroup.as_str(), v.text.as_str(), v.label))
            .collect(),
        AuditDataset::Unpaired { records, .. } => records
            .iter()
            .map(|r| (r.subgroup.as_str(), r.text.as_str(), r.label))
            .collect(),
    };
    let sg = data.subgroups();
    let groups = [&sg.a, &sg.b]
        .into_iter()
        .map(|name| {
            let mine: Vec<_> = rows.iter().filter(|r| r.0 == name).collect();
            let tokens: usize = mine.iter().map(|r| split_tokens(r.1).len()).sum();
            GroupSummary {
                subgroup: name.clone(),
                texts: mine.len(),
                positive: mine.iter().filter(|r| r.2 == 1).count(),
                negative: mine.iter().filter(|r| r.2 == 0).count(),
                mean_tokens: if mine.is_empty() {
                    0.0
                } else {
                    tokens as f64 / mine.len() as f64
                },
            }
        })
        .collect();
    let records = match data {
        AuditDataset::Paired { records, .. } => records.len(),
        AuditDataset::Unpaired { records, .. } => records.len(),
    };
    DatasetSummary {
        path: path.to_path_buf(),
        paired: data.is_paired(),
        records,
        texts: rows.len(),
        groups,
    }
}

fn validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<()> {
    let data = load(&a.data)?;
    let summary = summarize(&a.data.dataset, &data);
    write_out(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )
}

fn model_config(m: &ModelArgs) -> AuditConfig {
    let mut cfg = AuditConfig {
        seed: m.seed,
        tied_embeddings: m.tied_embeddings,
        ..Default::default()
    };
    if let Some(e) = m.epochs {
        cfg.train.epochs = e;
    }
    if let Some(r) = m.split_ratio {
        cfg.split_ratio = r;
    }
    if let Some(d) = m.embed_dim {
        cfg.embed_dim = d;
    }
    if let Some(h) = m.hidden {
        cfg.hidden = h;
    }
    cfg
}

#[derive(Serialize)]
struct TrainSummary {
    model: PathBuf,
    n_train: usize,
    n_test: usize,
    final_train_loss: f64,
    test_accuracy: f64,
}

fn train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut cfg = model_config(&a.model);
    cfg.runs = 1;
    echo_config(err, &cfg)?;
    cfg.validate()?;
    let data = load(&a.data)?;
    let fitted = fit_classifier(&data, &cfg, 0)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    save_model(&a.out, &fitted.model, &fitted.vocabulary)?;
    let summary = TrainSummary {
        model: a.out.clone(),
        n_train: fitted.n_train,
        n_test: fitted.n_test,
        final_train_loss: fitted.final_train_loss,
        test_accuracy: fitted.test_accuracy,
    };
    write_out(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )
}

fn audit_config(a: &AuditArgs, threads: Option<&str>) -> Result<AuditConfig> {
    let mut cfg = model_config(&a.model);
    cfg.runs = a.runs;
    cfg.threads = parse_threads(threads)?;
    if !a.methods.is_empty() {
        cfg.methods = parse_list::<Method>(&a.methods)?;
    }
    if !a.metrics.is_empty() {
        cfg.metrics = parse_list::<Metric>(&a.metrics)?;
    }
    if a.with_sensitivity && !cfg.metrics.contains(&Metric::Sensitivity) {
        cfg.metrics.push(Metric::Sensitivity);
    }
    if let Some(alpha) = a.alpha {
        cfg.disparity.alpha = alpha;
    }
    if let Some(d) = a.d_threshold {
        cfg.disparity.d_threshold = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn audit(
    a: &AuditArgs,
    threads: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    let cfg = audit_config(a, threads)?;
    echo_config(err, &cfg)?;
    let data = load(&a.data)?;
    let report = run_audit(&data, &cfg)?;
    if let Some(dir) = &a.out {
        write_report_dir(dir, &report)?;
    }
    write_out(
        out,
        &format!(
            "{}\n{}\n{}",
            render_grid(&report),
            render_effect_table(&report),
            render_bias(&report)
        ),
    )
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let report = read_report_dir(&a.dir)?;
    match a.format {
        ReportFormat::Table => write_out(
            out,
            &format!(
                "{}\n{}\n{}",
                render_grid(&report),
                render_effect_table(&report),
                render_bias(&report)
            ),
        ),
        ReportFormat::Csv => match &a.out {
            None => write_scores_table(out, &report.runs),
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let scores = dir.join("scores.csv");
                let mut buf = Vec::new();
                write_scores_table(&mut buf, &report.runs)?;
                fs::write(&scores, buf).map_err(|e| Error::io(&scores, e))?;
                let grid = dir.join("grid.csv");
                fs::write(&grid, grid_csv(&report)?).map_err(|e| Error::io(&grid, e))?;
                write_out(out, &format!("{}\n{}\n", scores.display(), grid.display()))
            }
        },
        ReportFormat::Svg => {
            let dir = a.out.clone().unwrap_or_else(|| a.dir.join("plots"));
            let paths = write_box_plots(&report, &dir)?;
            let listing: String = paths.iter().map(|p| format!("{}\n", p.display())).collect();
            write_out(out, &listing)
        }
    }
}
