use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AuditConfig, AuditReport, RunAggregate, RunReport};
use crate::dataset::Subgroups;
use crate::error::{Error, Result};
use crate::metrics::ScoreSample;
use crate::stats::{BiasReport, DisparityResult};

pub const REPORT_FILES: [&str; 5] = [
    "config.json",
    "scores.csv",
    "disparity.json",
    "aggregate.json",
    "bias.json",
];

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    config: AuditConfig,
    config_hash: String,
    data_hash: String,
    subgroups: Subgroups,
    run_seeds: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RunDisparity {
    run: usize,
    #[serde(flatten)]
    result: DisparityResult,
}

#[derive(Serialize, Deserialize)]
struct RunSummary {
    run: usize,
    seed: u64,
    n_train: usize,
    n_test: usize,
    final_train_loss: f64,
    test_accuracy: f64,
    explanations: usize,
    bias: BiasReport,
}

#[derive(Serialize, Deserialize)]
struct BiasFile {
    runs: Vec<RunSummary>,
    summary: super::BiasSummary,
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    run: usize,
    #[serde(flatten)]
    sample: ScoreSample,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Score table of every run: `run,pair_id,subgroup,method,metric,value`, with
/// undefined values left empty.
pub fn write_scores_table<W: Write>(out: W, runs: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "pair_id", "subgroup", "method", "metric", "value"])?;
    for r in runs {
        for s in &r.scores {
            let value = s.value.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                r.run.to_string().as_str(),
                s.pair_id.as_str(),
                s.subgroup.as_str(),
                s.method.as_str(),
                s.metric.as_str(),
                value.as_str(),
            ])?;
        }
    }
    w.flush()
        .map_err(|e| Error::Report(format!("writing score table: {e}")))
}

fn write_scores_file(path: &Path, runs: &[RunReport]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_scores_table(&mut w, runs)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_files(dir: &Path, report: &AuditReport) -> Result<()> {
    write_json(
        &dir.join("config.json"),
        &ConfigFile {
            config: report.config.clone(),
            config_hash: report.config_hash.clone(),
            data_hash: report.data_hash.clone(),
            subgroups: report.subgroups.clone(),
            run_seeds: report.runs.iter().map(|r| r.seed).collect(),
        },
    )?;
    write_scores_file(&dir.join("scores.csv"), &report.runs)?;
    let disparity: Vec<RunDisparity> = report
        .runs
        .iter()
        .flat_map(|r| {
            r.disparity.iter().map(|d| RunDisparity {
                run: r.run,
                result: d.clone(),
            })
        })
        .collect();
    write_json(&dir.join("disparity.json"), &disparity)?;
    write_json(&dir.join("aggregate.json"), &report.aggregate)?;
    let runs = report
        .runs
        .iter()
        .map(|r| RunSummary {
            run: r.run,
            seed: r.seed,
            n_train: r.n_train,
            n_test: r.n_test,
            final_train_loss: r.final_train_loss,
            test_accuracy: r.test_accuracy,
            explanations: r.explanations,
            bias: r.bias,
        })
        .collect();
    write_json(
        &dir.join("bias.json"),
        &BiasFile {
            runs,
            summary: report.aggregate.bias,
        },
    )
}

fn staging_path(dir: &Path) -> Result<PathBuf> {
    let name = dir
        .file_name()
        .ok_or_else(|| Error::Report(format!("{} is not a directory name", dir.display())))?;
    let mut staged = name.to_os_string();
    staged.push(".partial");
    Ok(dir.with_file_name(staged))
}

/// Writes the report directory. Files go to a sibling staging directory that
/// is renamed into place at the end, so a failed write leaves no partial report.
pub fn write_report_dir(dir: &Path, report: &AuditReport) -> Result<()> {
    let staging = staging_path(dir)?;
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    if let Some(parent) = staging.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;
    if let Err(e) = write_files(&staging, report) {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::data(path, e.line(), e.to_string()))
}

fn read_scores(path: &Path) -> Result<Vec<ScoreRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            Error::data(
                path,
                e.position().map_or(0, |p| p.line() as usize),
                e.to_string(),
            )
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |msg: String| Error::data(path, line, msg);
        if record.len() != 6 {
            return Err(bad(format!("expected 6 columns, found {}", record.len())));
        }
        let value = match &record[5] {
            "" => None,
            v => Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
        };
        rows.push(ScoreRow {
            run: record[0]
                .parse()
                .map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            sample: ScoreSample {
                pair_id: record[1].to_string(),
                subgroup: record[2].to_string(),
                method: record[3].parse().map_err(|e: Error| bad(e.to_string()))?,
                metric: record[4].parse().map_err(|e: Error| bad(e.to_string()))?,
                value,
            },
        });
    }
    Ok(rows)
}

/// Reads a directory written by [`write_report_dir`].
pub fn read_report_dir(dir: &Path) -> Result<AuditReport> {
    if !dir.is_dir() {
        return Err(Error::data(dir, 0, "report directory not found"));
    }
    let config: ConfigFile = read_json(&dir.join("config.json"))?;
    let aggregate: RunAggregate = read_json(&dir.join("aggregate.json"))?;
    let bias: BiasFile = read_json(&dir.join("bias.json"))?;
    let disparity: Vec<RunDisparity> = read_json(&dir.join("disparity.json"))?;
    let scores = read_scores(&dir.join("scores.csv"))?;

    let runs = bias
        .runs
        .into_iter()
        .map(|s| RunReport {
            run: s.run,
            seed: s.seed,
            n_train: s.n_train,
            n_test: s.n_test,
            final_train_loss: s.final_train_loss,
            test_accuracy: s.test_accuracy,
            bias: s.bias,
            explanations: s.explanations,
            disparity: disparity
                .iter()
                .filter(|d| d.run == s.run)
                .map(|d| d.result.clone())
                .collect(),
            scores: scores
                .iter()
                .filter(|r| r.run == s.run)
                .map(|r| r.sample.clone())
                .collect(),
        })
        .collect();
    Ok(AuditReport {
        config: config.config,
        config_hash: config.config_hash,
        data_hash: config.data_hash,
        subgroups: config.subgroups,
        runs,
        aggregate,
    })
}
