//! Audit orchestration.
//!
//! One run trains a classifier on the training split, explains every test
//! input once per method, scores each explanation with every metric and
//! tests each `(method, metric)` cell for a subgroup disparity. Repeated runs
//! use seeds `seed, seed + 1, ...` and are folded into a [`RunAggregate`].

mod aggregate;
mod io;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use aggregate::{
    aggregate_reports, format_effect, BiasSummary, CellAggregate, MeanStd, RunAggregate, Totals,
};
pub use io::{read_report_dir, write_report_dir, write_scores_table, REPORT_FILES};

use crate::attribution::{AttributionConfig, Method};
use crate::dataset::{
    split_paired, split_unpaired, AuditDataset, PairedRecord, Subgroups, UnpairedRecord,
    GENDER_PAIRS,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, Metric, MetricConfig, MetricInput, ScoreSample};
use crate::stats::{
    bias_analysis, bias_analysis_unpaired, disparity_test, BiasReport, DisparityConfig,
    DisparityResult, LabelledPrediction, PValueMode, PairPrediction, Side, SubgroupScores,
};
use crate::textmodel::{
    train, Activation, ClassifierModel, ModelConfig, Prediction, TokenSeq, TrainConfig, Vocabulary,
};

/// Which class the faithfulness metrics and explanations track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassMode {
    Predicted,
    Gold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub methods: Vec<Method>,
    pub metrics: Vec<Metric>,
    pub runs: usize,
    pub seed: u64,
    pub split_ratio: f64,
    pub embed_dim: usize,
    pub hidden: usize,
    /// Gendered word pairs share one embedding row.
    pub tied_embeddings: bool,
    pub class_mode: ClassMode,
    pub disparity: DisparityConfig,
    pub metric: MetricConfig,
    pub attribution: AttributionConfig,
    pub train: TrainConfig,
    /// Worker threads; `None` lets rayon decide. Not part of the config hash.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            metrics: Metric::ALL
                .into_iter()
                .filter(|m| *m != Metric::Sensitivity)
                .collect(),
            runs: 5,
            seed: 0,
            split_ratio: 0.8,
            embed_dim: 16,
            hidden: 32,
            tied_embeddings: false,
            class_mode: ClassMode::Predicted,
            disparity: DisparityConfig::default(),
            metric: MetricConfig::default(),
            attribution: AttributionConfig::default(),
            train: TrainConfig::default(),
            threads: None,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("run count must be >= 1".into()));
        }
        if self.methods.is_empty() || self.metrics.is_empty() {
            return Err(Error::Config(
                "method and metric lists must be non-empty".into(),
            ));
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        let mut metrics = self.metrics.clone();
        metrics.sort();
        metrics.dedup();
        if methods.len() != self.methods.len() || metrics.len() != self.metrics.len() {
            return Err(Error::Config(
                "method and metric lists must not repeat entries".into(),
            ));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config("split ratio must lie in (0, 1)".into()));
        }
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("model dimensions must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        self.disparity.validate()?;
        self.metric.validate()?;
        self.attribution.validate()?;
        self.train.validate()
    }

    /// SHA-256 of the JSON form of the configuration.
    pub fn hash(&self) -> String {
        sha256_json(self)
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

fn sha256_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    hex::encode(Sha256::digest(bytes))
}

/// 64-bit FNV-1a hash, stable across platforms and releases.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed shared by every variant of one input within a run.
pub fn input_seed(run_seed: u64, id: &str) -> u64 {
    run_seed ^ fnv1a(id)
}

/// Per-run results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub final_train_loss: f64,
    pub test_accuracy: f64,
    pub bias: BiasReport,
    /// Explanations computed in this run; one per (test input, method).
    pub explanations: usize,
    pub disparity: Vec<DisparityResult>,
    pub scores: Vec<ScoreSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config: AuditConfig,
    pub config_hash: String,
    pub data_hash: String,
    pub subgroups: Subgroups,
    pub runs: Vec<RunReport>,
    pub aggregate: RunAggregate,
}

struct TextItem<'a> {
    id: &'a str,
    side: Side,
    text: &'a str,
    label: usize,
}

fn texts(data: &AuditDataset) -> Vec<&str> {
    match data {
        AuditDataset::Paired { records, .. } => records
            .iter()
            .flat_map(|r| [r.a.text.as_str(), r.b.text.as_str()])
            .collect(),
        AuditDataset::Unpaired { records, .. } => records.iter().map(|r| r.text.as_str()).collect(),
    }
}

/// Id groups of gendered word pairs present in `vocab`.
pub fn gender_tie_groups(vocab: &Vocabulary) -> Vec<Vec<usize>> {
    GENDER_PAIRS
        .iter()
        .filter_map(|(m, f)| Some(vec![vocab.id(m)?, vocab.id(f)?]))
        .collect()
}

/// Trains a fresh classifier on `examples` with the run's seed.
pub fn train_classifier(
    vocab: &Vocabulary,
    examples: &[(TokenSeq, usize)],
    cfg: &AuditConfig,
    seed: u64,
) -> Result<(ClassifierModel, f64)> {
    let model_cfg = ModelConfig {
        vocab_size: vocab.len(),
        embed_dim: cfg.embed_dim,
        hidden: cfg.hidden,
        activation: Activation::Tanh,
    };
    let mut model = ClassifierModel::new(model_cfg, seed);
    if cfg.tied_embeddings {
        model.tie_rows(&gender_tie_groups(vocab))?;
    }
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let log = train(&mut model, examples, &train_cfg)?;
    Ok((model, log.epoch_loss.last().copied().unwrap_or(f64::NAN)))
}

struct Evaluated {
    prediction: Prediction,
    label: usize,
    values: Vec<Option<f64>>,
}

fn evaluate_input(
    model: &ClassifierModel,
    vocab: &Vocabulary,
    item: &TextItem<'_>,
    cfg: &AuditConfig,
    run_seed: u64,
    counter: &AtomicUsize,
) -> Result<Evaluated> {
    let seq = vocab.tokenize(item.text)?;
    let x = model.embed(&seq)?;
    let prediction = model.forward(&x)?;
    let class = match cfg.class_mode {
        ClassMode::Predicted => prediction.class,
        ClassMode::Gold => item.label,
    };
    let seed = input_seed(run_seed, item.id);
    let attr_cfg = cfg.attribution.with_seed(seed);
    let metric_cfg = cfg.metric.with_seed(seed);
    let mut values = Vec::with_capacity(cfg.methods.len() * cfg.metrics.len());
    for &method in &cfg.methods {
        counter.fetch_add(1, Ordering::Relaxed);
        let scores = match method.explain(model, &x, class, &attr_cfg) {
            Ok(s) => s,
            Err(e) => {
                warn!("{method} failed on input {}: {e}", item.id);
                values.extend(std::iter::repeat_n(None, cfg.metrics.len()));
                continue;
            }
        };
        let input = MetricInput {
            model,
            x: &x,
            scores: &scores,
            class,
            method,
            attribution: &attr_cfg,
        };
        for &metric in &cfg.metrics {
            let v = evaluate(metric, &input, &metric_cfg).unwrap_or_else(|e| {
                warn!("{metric} failed for {method} on input {}: {e}", item.id);
                None
            });
            values.push(v.filter(|v| v.is_finite()));
        }
    }
    Ok(Evaluated {
        prediction,
        label: item.label,
        values,
    })
}

fn untestable(metric: Metric, method: Method, n_a: usize, n_b: usize) -> DisparityResult {
    DisparityResult {
        metric,
        method,
        u: 0.0,
        p: 1.0,
        p_mode: PValueMode::Exact,
        d: None,
        significant: false,
        considerable: false,
        direction: None,
        n_a,
        n_b,
    }
}

/// One full audit run with seed `cfg.seed + run`.
///
/// Cells whose score list is empty for a subgroup (for example sensitivity
/// when every explanation is zero) are reported with `p = 1`.
pub fn run_single_audit(data: &AuditDataset, cfg: &AuditConfig, run: usize) -> Result<RunReport> {
    cfg.validate()?;
    let run_seed = cfg.run_seed(run);
    let (vocab, train_rows, test_rows) = prepare(data, cfg, run_seed)?;
    finish_run(data, cfg, run, run_seed, &vocab, train_rows, test_rows)
}

fn prepare(
    data: &AuditDataset,
    cfg: &AuditConfig,
    run_seed: u64,
) -> Result<(Vocabulary, Vec<Row>, Vec<Row>)> {
    let vocab = Vocabulary::build(&texts(data))?;
    let (train_rows, test_rows) = match data {
        AuditDataset::Paired { records, .. } => {
            let s = split_paired(records, cfg.split_ratio, run_seed)?;
            let rows = |rs: &[PairedRecord]| -> Vec<Row> {
                rs.iter()
                    .flat_map(|r| {
                        [
                            (r.pair_id.clone(), Side::A, r.a.text.clone(), r.a.label),
                            (r.pair_id.clone(), Side::B, r.b.text.clone(), r.b.label),
                        ]
                    })
                    .collect()
            };
            (rows(&s.train), rows(&s.test))
        }
        AuditDataset::Unpaired { subgroups, records } => {
            let s = split_unpaired(records, cfg.split_ratio, run_seed)?;
            let rows = |rs: &[UnpairedRecord]| -> Vec<Row> {
                rs.iter()
                    .map(|r| {
                        let side = if r.subgroup == subgroups.a {
                            Side::A
                        } else {
                            Side::B
                        };
                        (r.id.clone(), side, r.text.clone(), r.label)
                    })
                    .collect()
            };
            (rows(&s.train), rows(&s.test))
        }
    };
    Ok((vocab, train_rows, test_rows))
}

/// A classifier trained exactly as in audit run `run`, without explanations.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub model: ClassifierModel,
    pub vocabulary: Vocabulary,
    pub n_train: usize,
    pub n_test: usize,
    pub final_train_loss: f64,
    pub test_accuracy: f64,
}

pub fn fit_classifier(data: &AuditDataset, cfg: &AuditConfig, run: usize) -> Result<FittedModel> {
    cfg.validate()?;
    let run_seed = cfg.run_seed(run);
    let (vocab, train_rows, test_rows) = prepare(data, cfg, run_seed)?;
    let examples = train_rows
        .iter()
        .map(|(_, _, text, label)| Ok((vocab.tokenize(text)?, *label)))
        .collect::<Result<Vec<_>>>()?;
    let (model, final_train_loss) = train_classifier(&vocab, &examples, cfg, run_seed)?;
    let mut correct = 0;
    for (_, _, text, label) in &test_rows {
        if model.forward(&model.embed(&vocab.tokenize(text)?)?)?.class == *label {
            correct += 1;
        }
    }
    let test_accuracy = if test_rows.is_empty() {
        0.0
    } else {
        correct as f64 / test_rows.len() as f64
    };
    Ok(FittedModel {
        model,
        vocabulary: vocab,
        n_train: examples.len(),
        n_test: test_rows.len(),
        final_train_loss,
        test_accuracy,
    })
}

/// `(id, side, text, label)` of one text.
type Row = (String, Side, String, usize);

fn finish_run(
    data: &AuditDataset,
    cfg: &AuditConfig,
    run: usize,
    run_seed: u64,
    vocab: &Vocabulary,
    train_rows: Vec<Row>,
    test_rows: Vec<Row>,
) -> Result<RunReport> {
    let subgroups = data.subgroups();
    let examples = train_rows
        .iter()
        .map(|(_, _, text, label)| Ok((vocab.tokenize(text)?, *label)))
        .collect::<Result<Vec<_>>>()?;
    let (model, final_train_loss) = train_classifier(vocab, &examples, cfg, run_seed)?;
    info!(
        "run {run}: trained on {} texts, final loss {final_train_loss:.4}",
        examples.len()
    );

    let items: Vec<TextItem<'_>> = test_rows
        .iter()
        .map(|(id, side, text, label)| TextItem {
            id,
            side: *side,
            text,
            label: *label,
        })
        .collect();
    let counter = AtomicUsize::new(0);
    let evaluated: Vec<Evaluated> = items
        .par_iter()
        .map(|item| evaluate_input(&model, vocab, item, cfg, run_seed, &counter))
        .collect::<Result<_>>()?;

    let mut scores = Vec::with_capacity(items.len() * cfg.methods.len() * cfg.metrics.len());
    let mut cells: HashMap<(Method, Metric), (Vec<f64>, Vec<f64>)> = HashMap::new();
    for (item, ev) in items.iter().zip(&evaluated) {
        let subgroup = match item.side {
            Side::A => &subgroups.a,
            Side::B => &subgroups.b,
        };
        let mut values = ev.values.iter();
        for &method in &cfg.methods {
            for &metric in &cfg.metrics {
                let value = *values.next().expect("one value per cell");
                if let Some(v) = value {
                    let lists = cells.entry((method, metric)).or_default();
                    match item.side {
                        Side::A => lists.0.push(v),
                        Side::B => lists.1.push(v),
                    }
                }
                scores.push(ScoreSample {
                    pair_id: item.id.to_string(),
                    subgroup: subgroup.clone(),
                    method,
                    metric,
                    value,
                });
            }
        }
    }

    let mut disparity = Vec::with_capacity(cfg.methods.len() * cfg.metrics.len());
    for &method in &cfg.methods {
        for &metric in &cfg.metrics {
            let (a, b) = cells.remove(&(method, metric)).unwrap_or_default();
            if a.is_empty() || b.is_empty() {
                disparity.push(untestable(metric, method, a.len(), b.len()));
                continue;
            }
            let s = SubgroupScores {
                metric,
                method,
                label_a: subgroups.a.clone(),
                label_b: subgroups.b.clone(),
                scores_a: a,
                scores_b: b,
            };
            disparity.push(disparity_test(&s, &cfg.disparity)?);
        }
    }

    let labelled: Vec<LabelledPrediction> = evaluated
        .iter()
        .map(|e| LabelledPrediction {
            label: e.label,
            prediction: e.prediction,
        })
        .collect();
    let bias = if data.is_paired() {
        let pairs: Vec<PairPrediction> = labelled
            .chunks(2)
            .map(|c| PairPrediction { a: c[0], b: c[1] })
            .collect();
        bias_analysis(&pairs)?
    } else {
        bias_analysis_unpaired(&labelled)?
    };
    let correct = labelled
        .iter()
        .filter(|l| l.prediction.class == l.label)
        .count();
    let test_accuracy = if labelled.is_empty() {
        0.0
    } else {
        correct as f64 / labelled.len() as f64
    };

    Ok(RunReport {
        run,
        seed: run_seed,
        n_train: examples.len(),
        n_test: items.len(),
        final_train_loss,
        test_accuracy,
        bias,
        explanations: counter.into_inner(),
        disparity,
        scores,
    })
}

/// Runs `cfg.runs` audits and aggregates them.
pub fn run_audit(data: &AuditDataset, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs = pool.install(|| {
        (0..cfg.runs)
            .map(|r| run_single_audit(data, cfg, r))
            .collect::<Result<Vec<_>>>()
    })?;
    let aggregate = aggregate_reports(&runs)?;
    Ok(AuditReport {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        data_hash: sha256_json(data),
        subgroups: data.subgroups().clone(),
        runs,
        aggregate,
    })
}
