//! The full evaluation grid: for every level, metric and model, a grouped
//! stratified holdout, k folds over the remainder, and a final fit on the
//! whole remainder scored on the held-out test set.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::score::{accuracy, fold_stddev, mean, per_player_delta, DeltaTable, Gold};
use super::split::{derive_seed, stratified_holdout, stratified_kfold, FoldMode, SplitItem};
use crate::dataset::LabeledExample;
use crate::error::{Error, Result};
use crate::ids::{InterviewId, PlayerId};
use crate::io::json_hash;
use crate::metrics::{Level, Metric};
use crate::models::{
    fit_ar_rows, fit_common_class, fit_logreg, fit_random_forest, BowVectorizer, Classifier, Document, FeatureSet,
    Features, ForestConfig, Link, LogRegConfig, PredictionRecord, SparseVector, TfidfVectorizer,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextFeatures {
    Bow,
    Tfidf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    RandomForest,
    LogisticRegression,
}

/// A model in the evaluation grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelSpec {
    CommonClass,
    Ar { all_metrics: bool, logistic: bool },
    Text { features: TextFeatures, learner: Learner },
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 9] = [
        ModelSpec::CommonClass,
        ModelSpec::Ar {
            all_metrics: false,
            logistic: false,
        },
        ModelSpec::Ar {
            all_metrics: true,
            logistic: false,
        },
        ModelSpec::Ar {
            all_metrics: false,
            logistic: true,
        },
        ModelSpec::Ar {
            all_metrics: true,
            logistic: true,
        },
        ModelSpec::Text {
            features: TextFeatures::Bow,
            learner: Learner::RandomForest,
        },
        ModelSpec::Text {
            features: TextFeatures::Tfidf,
            learner: Learner::RandomForest,
        },
        ModelSpec::Text {
            features: TextFeatures::Bow,
            learner: Learner::LogisticRegression,
        },
        ModelSpec::Text {
            features: TextFeatures::Tfidf,
            learner: Learner::LogisticRegression,
        },
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelSpec::CommonClass => "CC",
            ModelSpec::Ar {
                all_metrics: false,
                logistic: false,
            } => "AR(3)-M",
            ModelSpec::Ar {
                all_metrics: true,
                logistic: false,
            } => "AR(3)-M*",
            ModelSpec::Ar {
                all_metrics: false,
                logistic: true,
            } => "AR(3)-M-logit",
            ModelSpec::Ar {
                all_metrics: true,
                logistic: true,
            } => "AR(3)-M*-logit",
            ModelSpec::Text { features, learner } => match (features, learner) {
                (TextFeatures::Bow, Learner::RandomForest) => "BoW-RF-T",
                (TextFeatures::Tfidf, Learner::RandomForest) => "TFIDF-RF-T",
                (TextFeatures::Bow, Learner::LogisticRegression) => "BoW-LR-T",
                (TextFeatures::Tfidf, Learner::LogisticRegression) => "TFIDF-LR-T",
            },
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ModelSpec::ALL
            .into_iter()
            .find(|m| m.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model `{s}`")))
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub test_fraction: f64,
    pub n_folds: usize,
    pub seed: u64,
    pub fold_mode: FoldMode,
    pub models: Vec<ModelSpec>,
    pub metrics: Vec<Metric>,
    pub forest: ForestConfig,
    pub logreg: LogRegConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            n_folds: 5,
            seed: 212,
            fold_mode: FoldMode::Resample,
            models: ModelSpec::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            forest: ForestConfig::default(),
            logreg: LogRegConfig::default(),
        }
    }
}

/// Examples of one level (built in combined mode, so every model finds its
/// inputs) and the documents they reference.
#[derive(Clone, Debug, Default)]
pub struct LevelData {
    pub level: Level,
    pub examples: Vec<LabeledExample>,
    pub documents: BTreeMap<InterviewId, Document>,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentData {
    pub levels: Vec<LevelData>,
    pub players: Vec<PlayerId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub level: Level,
    pub metric: Metric,
    pub model: ModelSpec,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub fold_stddev: f64,
    pub test_accuracy: f64,
    pub n_rest: usize,
    pub n_test: usize,
    pub test_positive_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub level: Level,
    pub model: ModelSpec,
    pub table: DeltaTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub config_hash: String,
    pub seed: u64,
    pub n_folds: usize,
    pub test_fraction: f64,
    pub fold_mode: FoldMode,
    pub stddev: String,
    pub accuracy_scale: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub cells: Vec<GridCell>,
    pub deltas: Vec<DeltaEntry>,
    pub notices: Vec<String>,
}

impl EvalReport {
    pub fn cell(&self, level: Level, metric: Metric, model: ModelSpec) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.level == level && c.metric == metric && c.model == model)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: EvalReport,
    /// Test-set predictions of every (level, metric, model) final fit.
    pub predictions: Vec<PredictionRecord>,
}

fn document<'a>(docs: &'a BTreeMap<InterviewId, Document>, e: &LabeledExample) -> Result<&'a Document> {
    let id = e
        .text_ref
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter(format!("example {}/{} has no interview text", e.player, e.unit)))?;
    docs.get(id).ok_or_else(|| {
        Error::KeyMismatch(format!(
            "interview {id} referenced by {}/{} is missing",
            e.player, e.unit
        ))
    })
}

fn lag_features(spec: FeatureSet, e: &LabeledExample) -> Result<Vec<f64>> {
    let lags = e
        .lagged_labels
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter(format!("example {}/{} has no lagged labels", e.player, e.unit)))?;
    Ok(spec.features(e.metric, lags))
}

/// Fits `spec` on `train` and returns confidences for `eval`, in order.
pub fn fit_and_score(
    spec: ModelSpec,
    cfg: &ExperimentConfig,
    train: &[&LabeledExample],
    eval: &[&LabeledExample],
    docs: &BTreeMap<InterviewId, Document>,
    seed: u64,
) -> Result<Vec<f64>> {
    let labels: Vec<u8> = train.iter().map(|e| e.label).collect();
    match spec {
        ModelSpec::CommonClass => {
            let cc = fit_common_class(&labels)?;
            eval.iter().map(|_| cc.confidence(Features::None)).collect()
        }
        ModelSpec::Ar { all_metrics, logistic } => {
            let fs = if all_metrics {
                FeatureSet::AllMetrics
            } else {
                FeatureSet::SameMetric
            };
            let link = if logistic { Link::Logistic } else { Link::Linear };
            let rows = train.iter().map(|e| lag_features(fs, e)).collect::<Result<Vec<_>>>()?;
            let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
            let metric = train.first().map_or(Metric::Pts, |e| e.metric);
            let fit = fit_ar_rows(&rows, &y, metric, fs, link)?;
            eval.iter()
                .map(|e| fit.confidence(Features::Lags(&lag_features(fs, e)?)))
                .collect()
        }
        ModelSpec::Text { features, learner } => {
            let train_docs: Vec<Document> = train
                .iter()
                .map(|e| document(docs, e).cloned())
                .collect::<Result<_>>()?;
            let eval_docs: Vec<&Document> = eval.iter().map(|e| document(docs, e)).collect::<Result<_>>()?;
            let (dim, xs, xe): (usize, Vec<SparseVector>, Vec<SparseVector>) = match features {
                TextFeatures::Bow => {
                    let v = BowVectorizer::fit(&train_docs)?;
                    let xs = train_docs.iter().map(|d| v.transform(d)).collect();
                    (
                        v.vocabulary.len(),
                        xs,
                        eval_docs.iter().map(|d| v.transform(d)).collect(),
                    )
                }
                TextFeatures::Tfidf => {
                    let v = TfidfVectorizer::fit(&train_docs)?;
                    let xs = train_docs.iter().map(|d| v.transform(d)).collect();
                    (
                        v.vocabulary.len(),
                        xs,
                        eval_docs.iter().map(|d| v.transform(d)).collect(),
                    )
                }
            };
            let model: Box<dyn Classifier> = match learner {
                Learner::LogisticRegression => Box::new(fit_logreg(&xs, &labels, dim, &cfg.logreg)?),
                Learner::RandomForest => {
                    let fc = ForestConfig { seed, ..cfg.forest };
                    Box::new(fit_random_forest(&xs, &labels, dim, &fc)?)
                }
            };
            xe.iter().map(|x| model.confidence(Features::Sparse(x))).collect()
        }
    }
}

struct MetricSplit<'a> {
    level: Level,
    metric: Metric,
    examples: Vec<&'a LabeledExample>,
    docs: &'a BTreeMap<InterviewId, Document>,
    rest: Vec<usize>,
    test: Vec<usize>,
    folds: Vec<super::split::Fold>,
}

fn plan<'a>(data: &'a LevelData, metric: Metric, cfg: &ExperimentConfig) -> Result<MetricSplit<'a>> {
    let mut examples: Vec<&LabeledExample> = data.examples.iter().filter(|e| e.metric == metric).collect();
    examples.sort_by_key(|e| e.key());
    let items: Vec<SplitItem> = examples
        .iter()
        .map(|e| SplitItem {
            group: e.key().group(),
            label: e.label,
        })
        .collect();
    let tag = format!("{}/{}", data.level.name(), metric.name());
    let holdout = stratified_holdout(&items, cfg.test_fraction, derive_seed(cfg.seed, &tag))?;
    let folds = stratified_kfold(
        &items,
        &holdout.rest,
        cfg.n_folds,
        cfg.fold_mode,
        derive_seed(cfg.seed, &format!("{tag}/folds")),
    )?;
    Ok(MetricSplit {
        level: data.level,
        metric,
        examples,
        docs: &data.documents,
        rest: holdout.rest,
        test: holdout.test,
        folds,
    })
}

fn records(model: ModelSpec, examples: &[&LabeledExample], conf: &[f64]) -> Result<Vec<PredictionRecord>> {
    examples
        .iter()
        .zip(conf)
        .map(|(e, &c)| PredictionRecord::new(&e.key(), e.text_ref.clone(), c, model.id()))
        .collect()
}

fn gold(examples: &[&LabeledExample]) -> Gold {
    examples.iter().map(|e| (e.key(), e.label)).collect()
}

fn run_cell(
    split: &MetricSplit<'_>,
    model: ModelSpec,
    cfg: &ExperimentConfig,
) -> Result<(GridCell, Vec<PredictionRecord>)> {
    let pick = |idx: &[usize]| idx.iter().map(|&i| split.examples[i]).collect::<Vec<_>>();
    let tag = format!("{}/{}/{}", split.level.name(), split.metric.name(), model.id());
    let mut fold_accuracies = Vec::with_capacity(split.folds.len());
    for (k, fold) in split.folds.iter().enumerate() {
        let (train, dev) = (pick(&fold.train), pick(&fold.dev));
        let seed = derive_seed(cfg.forest.seed, &format!("{tag}/fold{k}"));
        let conf = fit_and_score(model, cfg, &train, &dev, split.docs, seed)?;
        fold_accuracies.push(accuracy(&records(model, &dev, &conf)?, &gold(&dev))?);
    }
    let (rest, test) = (pick(&split.rest), pick(&split.test));
    let seed = derive_seed(cfg.forest.seed, &format!("{tag}/test"));
    let conf = fit_and_score(model, cfg, &rest, &test, split.docs, seed)?;
    let preds = records(model, &test, &conf)?;
    let test_accuracy = accuracy(&preds, &gold(&test))?;
    let pos = test.iter().filter(|e| e.label == 1).count();
    Ok((
        GridCell {
            level: split.level,
            metric: split.metric,
            model,
            mean_accuracy: mean(&fold_accuracies),
            fold_stddev: fold_stddev(&fold_accuracies)?,
            fold_accuracies,
            test_accuracy,
            n_rest: rest.len(),
            n_test: test.len(),
            test_positive_share: 100.0 * pos as f64 / test.len() as f64,
        },
        preds,
    ))
}

pub fn run_experiment(data: &ExperimentData, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.models.is_empty() || cfg.metrics.is_empty() {
        return Err(Error::InvalidParameter("no models or metrics selected".into()));
    }
    let mut splits = Vec::new();
    for level in &data.levels {
        for &metric in &cfg.metrics {
            splits.push(
                plan(level, metric, cfg).map_err(|e| e.context(format!("{} {}", level.level.name(), metric.name())))?,
            );
        }
    }
    let tasks: Vec<(usize, ModelSpec)> = (0..splits.len())
        .flat_map(|s| cfg.models.iter().map(move |&m| (s, m)))
        .collect();
    let results: Vec<(GridCell, Vec<PredictionRecord>)> = tasks
        .par_iter()
        .map(|&(s, m)| {
            run_cell(&splits[s], m, cfg).map_err(|e| {
                e.context(format!(
                    "{} {} {}",
                    splits[s].level.name(),
                    splits[s].metric.name(),
                    m.id()
                ))
            })
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(results.len());
    let mut predictions = Vec::new();
    for (cell, preds) in results {
        cells.push(cell);
        predictions.extend(preds);
    }

    let mut deltas = Vec::new();
    let mut notices = Vec::new();
    for level in &data.levels {
        let gold_all: Gold = level.examples.iter().map(|e| (e.key(), e.label)).collect();
        for &model in &cfg.models {
            let preds: Vec<PredictionRecord> = predictions
                .iter()
                .filter(|p| p.model_id == model.id() && p.period.is_some() == (level.level == Level::Period))
                .cloned()
                .collect();
            let gold: Gold = preds.iter().map(|p| (p.key(), gold_all[&p.key()])).collect();
            let table = per_player_delta(&preds, &gold, &data.players)?;
            for (player, metric) in &table.omitted {
                notices.push(format!(
                    "{} {} {}: player {player} has no test examples; omitted from ΔACC",
                    level.level.name(),
                    model.id(),
                    metric.name()
                ));
            }
            deltas.push(DeltaEntry {
                level: level.level,
                model,
                table,
            });
        }
    }

    Ok(ExperimentOutput {
        report: EvalReport {
            meta: ReportMeta {
                config_hash: json_hash(cfg),
                seed: cfg.seed,
                n_folds: cfg.n_folds,
                test_fraction: cfg.test_fraction,
                fold_mode: cfg.fold_mode,
                stddev: "population".into(),
                accuracy_scale: "0-100".into(),
            },
            cells,
            deltas,
            notices,
        },
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_ids_round_trip() {
        for m in ModelSpec::ALL {
            assert_eq!(m.id().parse::<ModelSpec>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), m);
        }
        assert!("CNN-T".parse::<ModelSpec>().is_err());
    }
}
