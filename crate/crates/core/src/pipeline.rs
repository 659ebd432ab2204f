//! Staged runs driven by a TOML run configuration.
//!
//! Stages write under `<output>/<stage>/` and finish by writing a
//! `manifest.json` with the settings hash and the content hashes of their
//! inputs and outputs. A stage whose manifest still matches is skipped
//! unless forced.
//!
//! Artifacts carry run metadata (settings hash, seeds, tokenizer rules):
//! JSONL files in their header line, CSV files in a leading `#` comment,
//! JSON files under `run`. The settings hash covers everything except
//! filesystem paths, so equal settings on equal inputs give byte-identical
//! artifacts wherever they are written. `<output>/config.toml` holds the
//! resolved configuration with every default and seed spelled out.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{build_examples, InterviewIndex, LabeledExample, Mode};
use crate::error::{Error, Result};
use crate::eval::experiment::{
    run_experiment, EvalReport, ExperimentConfig, ExperimentData, Learner, LevelData, ModelSpec, TextFeatures,
};
use crate::eval::report::{render_tables, write_delta_csv};
use crate::eval::split::{derive_seed, FoldMode};
use crate::ids::{InterviewId, PlayerId};
use crate::interpret::analysis::{
    class_topics, confidence_curve, correlations, write_class_topics, write_correlations, write_curves,
    ClassTopicResult, CorrelationMethod, Thetas,
};
use crate::interpret::coherence::{coherence, select_k};
use crate::interpret::lda::{read_topic_model, write_topic_model_with, LdaConfig, LdaCorpus, TopicModel};
use crate::interview::{
    merge_all, parse_interview, Interview, Markers, DEFAULT_ANSWER_PATTERN, DEFAULT_QUESTION_PATTERN, TOKENIZER_RULES,
};
use crate::io::{read_jsonl, sha256_hex, write_header, write_jsonl};
use crate::metrics::{Level, Metric, MetricConfig, MetricStore, ThreePointCount};
use crate::models::forest::{ForestConfig, MaxFeatures};
use crate::models::logreg::LogRegConfig;
use crate::models::text::Document;
use crate::models::{read_predictions, write_predictions, PredictionRecord};
use crate::pbp::{filter_relevant, parse_pbp, ColumnMap, CourtGeometry, IngestSettings, PlayEvent, ThreePointLine};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Raw play-by-play table.
    pub events: PathBuf,
    /// TOML column map of the play-by-play table.
    pub column_map: PathBuf,
    /// Directory of transcript files (`*.txt`).
    pub interviews: PathBuf,
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub split: u64,
    pub forest: u64,
    pub lda: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            split: 212,
            forest: 212,
            lda: 212,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub question_pattern: String,
    pub answer_pattern: String,
    pub geometry: CourtGeometry,
    pub three_point_line: ThreePointLine,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            question_pattern: DEFAULT_QUESTION_PATTERN.to_owned(),
            answer_pattern: DEFAULT_ANSWER_PATTERN.to_owned(),
            geometry: CourtGeometry::default(),
            three_point_line: ThreePointLine::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub levels: Vec<Level>,
    pub three_point_count: ThreePointCount,
    /// Keep interviewer questions in the model input text.
    pub include_questions: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            levels: vec![Level::Game, Level::Period],
            three_point_count: ThreePointCount::Attempts,
            include_questions: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub models: Vec<ModelSpec>,
    pub metrics: Vec<Metric>,
    pub n_folds: usize,
    pub test_fraction: f64,
    pub fold_mode: FoldMode,
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub logreg: LogRegConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let x = ExperimentConfig::default();
        let f = ForestConfig::default();
        Self {
            models: x.models,
            metrics: x.metrics,
            n_folds: x.n_folds,
            test_fraction: x.test_fraction,
            fold_mode: x.fold_mode,
            n_trees: f.n_trees,
            max_features: f.max_features,
            min_leaf: f.min_leaf,
            max_depth: f.max_depth,
            bootstrap: f.bootstrap,
            logreg: x.logreg,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSet {
    /// Only predictions on documents held out of topic-model training.
    Test,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpretConfig {
    pub level: Level,
    /// Model whose predictions are analysed; may be left out when the
    /// predictions file holds a single model.
    pub model: Option<String>,
    /// Predictions file; defaults to the eval stage export.
    pub predictions: Option<PathBuf>,
    /// Existing topic model to reuse instead of selecting K.
    pub topic_model: Option<PathBuf>,
    pub k_grid: Vec<usize>,
    pub lda: LdaConfig,
    pub coherence_top_n: usize,
    pub n_words: usize,
    pub correlation: CorrelationMethod,
    /// Train the topic model on every interview instead of folding in the
    /// predicted ones.
    pub joint_training: bool,
    pub curve_set: CurveSet,
}

impl Default for InterpretConfig {
    fn default() -> Self {
        Self {
            level: Level::Game,
            model: None,
            predictions: None,
            topic_model: None,
            k_grid: vec![5, 10, 15, 20],
            lda: LdaConfig::default(),
            coherence_top_n: 10,
            n_words: 10,
            correlation: CorrelationMethod::Pearson,
            joint_training: false,
            curve_set: CurveSet::Test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub build: BuildConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub interpret: InterpretConfig,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Parses a config; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        resolve(base, &mut cfg.paths.events);
        resolve(base, &mut cfg.paths.column_map);
        resolve(base, &mut cfg.paths.interviews);
        resolve(base, &mut cfg.paths.output);
        for p in [&mut cfg.interpret.predictions, &mut cfg.interpret.topic_model]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|_| Error::MissingPath(path.to_path_buf()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks inputs and parameters before any work starts.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.paths.events, &self.paths.column_map] {
            if !p.is_file() {
                return Err(Error::MissingPath(p.clone()));
            }
        }
        if !self.paths.interviews.is_dir() {
            return Err(Error::MissingPath(self.paths.interviews.clone()));
        }
        if let Some(p) = &self.interpret.topic_model {
            if !p.is_file() {
                return Err(Error::MissingPath(p.clone()));
            }
        }
        Markers::new(&self.ingest.question_pattern, &self.ingest.answer_pattern)?;
        let bad = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.build.levels.is_empty() {
            return bad("build.levels is empty");
        }
        if self.eval.models.is_empty() || self.eval.metrics.is_empty() {
            return bad("eval.models and eval.metrics must be nonempty");
        }
        if self.eval.n_folds < 2 {
            return bad("eval.n_folds must be at least 2");
        }
        if !(self.eval.test_fraction > 0.0 && self.eval.test_fraction < 1.0) {
            return bad("eval.test_fraction must lie in (0, 1)");
        }
        if self.eval.n_trees == 0 || self.eval.min_leaf == 0 {
            return bad("eval.n_trees and eval.min_leaf must be positive");
        }
        if self.interpret.k_grid.is_empty() || self.interpret.k_grid.iter().any(|&k| k < 2) {
            return bad("interpret.k_grid must be nonempty with every K >= 2");
        }
        if self.interpret.coherence_top_n < 2 || self.interpret.n_words == 0 {
            return bad("interpret.coherence_top_n must be >= 2 and interpret.n_words positive");
        }
        if self.interpret.joint_training && self.interpret.curve_set == CurveSet::Test {
            return bad("curve_set = \"test\" needs held-out documents; use \"all\" with joint_training");
        }
        if self.interpret.lda.thin == 0 || self.interpret.lda.burn_in >= self.interpret.lda.iterations {
            return bad("interpret.lda needs thin >= 1 and burn_in < iterations");
        }
        Ok(())
    }

    /// Hash of every setting except filesystem paths.
    pub fn settings_hash(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths {
            events: PathBuf::new(),
            column_map: PathBuf::new(),
            interviews: PathBuf::new(),
            output: PathBuf::new(),
        };
        c.interpret.predictions = None;
        c.interpret.topic_model = None;
        crate::io::json_hash(&c)
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        let e = &self.eval;
        ExperimentConfig {
            test_fraction: e.test_fraction,
            n_folds: e.n_folds,
            seed: self.seeds.split,
            fold_mode: e.fold_mode,
            models: e.models.clone(),
            metrics: e.metrics.clone(),
            forest: ForestConfig {
                n_trees: e.n_trees,
                max_features: e.max_features,
                min_leaf: e.min_leaf,
                max_depth: e.max_depth,
                bootstrap: e.bootstrap,
                seed: self.seeds.forest,
            },
            logreg: e.logreg,
        }
    }

    fn stage_dir(&self, stage: &str) -> PathBuf {
        self.paths.output.join(stage)
    }
}

/// Metadata embedded in every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub stage: String,
    pub config_hash: String,
    pub seeds: Seeds,
    pub tokenizer_rules: String,
}

impl RunMeta {
    fn new(cfg: &RunConfig, stage: &str) -> Self {
        Self {
            stage: stage.to_owned(),
            config_hash: cfg.settings_hash(),
            seeds: cfg.seeds,
            tokenizer_rules: TOKENIZER_RULES.to_owned(),
        }
    }

    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }

    fn comment(&self) -> String {
        format!("# run {}\n", serde_json::to_string(self).expect("serializable"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    stage: String,
    config_hash: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    UpToDate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub status: StageStatus,
    /// Output paths relative to the output directory.
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingPath(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(sha256_hex(&bytes))
}

fn manifest_is_current(root: &Path, m: &Manifest, config_hash: &str, inputs: &BTreeMap<String, String>) -> bool {
    m.config_hash == config_hash
        && &m.inputs == inputs
        && m.outputs
            .iter()
            .all(|(rel, h)| hash_file(&root.join(rel)).map(|x| &x == h).unwrap_or(false))
}

/// Output sink collecting the relative paths a stage writes.
struct Outputs<'a> {
    root: &'a Path,
    written: Vec<String>,
}

impl Outputs<'_> {
    fn create(&mut self, rel: &str) -> Result<BufWriter<File>> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        self.written.push(rel.to_owned());
        Ok(BufWriter::new(File::create(path)?))
    }
}

fn run_stage(
    cfg: &RunConfig,
    stage: &'static str,
    inputs: BTreeMap<String, String>,
    force: bool,
    body: impl FnOnce(&mut Outputs) -> Result<Vec<String>>,
) -> Result<StageOutcome> {
    let root = cfg.paths.output.as_path();
    let config_hash = cfg.settings_hash();
    let manifest_path = cfg.stage_dir(stage).join("manifest.json");
    if !force {
        if let Ok(text) = fs::read_to_string(&manifest_path) {
            if let Ok(m) = serde_json::from_str::<Manifest>(&text) {
                if manifest_is_current(root, &m, &config_hash, &inputs) {
                    return Ok(StageOutcome {
                        stage,
                        status: StageStatus::UpToDate,
                        outputs: m.outputs.keys().cloned().collect(),
                        notes: m.notes,
                    });
                }
            }
        }
    }
    fs::create_dir_all(cfg.stage_dir(stage)).map_err(|e| Error::Io(e).in_stage(stage))?;
    fs::write(root.join("config.toml"), cfg.to_toml())?;
    let mut out = Outputs {
        root,
        written: Vec::new(),
    };
    let notes = body(&mut out).map_err(|e| e.in_stage(stage))?;
    let mut outputs = BTreeMap::new();
    for rel in &out.written {
        outputs.insert(rel.clone(), hash_file(&root.join(rel))?);
    }
    let manifest = Manifest {
        stage: stage.to_owned(),
        config_hash,
        inputs,
        outputs,
        notes: notes.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text)?;
    Ok(StageOutcome {
        stage,
        status: StageStatus::Ran,
        outputs: out.written,
        notes,
    })
}

fn stage_inputs(cfg: &RunConfig, rels: &[String]) -> Result<BTreeMap<String, String>> {
    rels.iter()
        .map(|r| Ok((r.clone(), hash_file(&cfg.paths.output.join(r))?)))
        .collect()
}

fn transcript_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"));
    files.sort();
    Ok(files)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|_| Error::MissingPath(path.to_path_buf()))
}

const EVENTS: &str = "ingest/events.jsonl";
const INTERVIEWS: &str = "ingest/interviews.jsonl";
const REPORT_JSON: &str = "eval/report.json";
const PREDICTIONS: &str = "eval/predictions.csv";
const INTERPRET_SUMMARY: &str = "interpret/summary.json";

fn examples_path(level: Level, mode: Mode) -> String {
    format!("build/{}/examples_{}.jsonl", level.name(), mode.name())
}

fn store_path(level: Level) -> String {
    format!("build/{}/metric_store.jsonl", level.name())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub input_rows: usize,
    pub events: usize,
    pub ignored_events: usize,
    pub skipped_overtime: usize,
    pub rejected_rows: usize,
    pub transcripts: usize,
    pub failed_transcripts: usize,
    pub dropped_questions: usize,
    pub orphan_answers: usize,
    pub interviews: usize,
}

pub fn cmd_ingest(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate()?;
    let files = transcript_files(&cfg.paths.interviews)?;
    let mut inputs = BTreeMap::new();
    inputs.insert("events".to_owned(), hash_file(&cfg.paths.events)?);
    inputs.insert("column_map".to_owned(), hash_file(&cfg.paths.column_map)?);
    for f in &files {
        inputs.insert(format!("interviews/{}", file_name(f)), hash_file(f)?);
    }
    run_stage(cfg, "ingest", inputs, force, |out| {
        let meta = RunMeta::new(cfg, "ingest");
        let map = ColumnMap::from_toml(&fs::read_to_string(&cfg.paths.column_map)?)?;
        let settings = IngestSettings {
            geometry: cfg.ingest.geometry,
            three_point_line: cfg.ingest.three_point_line,
        };
        let parsed = parse_pbp(open(&cfg.paths.events)?, &map, &settings)?;
        let events = filter_relevant(&parsed.events);
        let mut summary = IngestSummary {
            input_rows: parsed.input_rows(),
            events: events.len(),
            ignored_events: parsed.events.len() - events.len(),
            skipped_overtime: parsed.skipped_overtime,
            rejected_rows: parsed.rejected.len(),
            transcripts: files.len(),
            ..Default::default()
        };
        let mut notes = Vec::new();
        if let Some(first) = parsed.rejected.first() {
            notes.push(format!(
                "{} play-by-play rows rejected (first: row {}: {})",
                parsed.rejected.len(),
                first.row,
                first.reason
            ));
        }
        if events.is_empty() {
            return Err(Error::Insufficient("no usable play-by-play rows".into()));
        }

        let markers = Markers::new(&cfg.ingest.question_pattern, &cfg.ingest.answer_pattern)?;
        let mut interviews = Vec::new();
        let mut failures: BTreeMap<String, usize> = BTreeMap::new();
        for f in &files {
            match parse_interview(&fs::read_to_string(f)?, &markers) {
                Ok(p) => {
                    summary.dropped_questions += p.dropped_questions;
                    summary.orphan_answers += p.orphan_answers;
                    interviews.push(p.interview);
                }
                Err(e) => *failures.entry(e.to_string()).or_default() += 1,
            }
        }
        summary.failed_transcripts = failures.values().sum();
        for (reason, n) in &failures {
            notes.push(format!("{n} transcripts failed: {reason}"));
        }
        let interviews = merge_all(interviews)?;
        summary.interviews = interviews.len();
        if interviews.is_empty() {
            return Err(Error::Insufficient("no usable transcripts".into()));
        }

        let mut w = out.create(EVENTS)?;
        write_header(&mut w, &meta)?;
        write_jsonl(&mut w, &events)?;
        w.flush()?;
        let mut w = out.create(INTERVIEWS)?;
        write_header(&mut w, &meta)?;
        write_jsonl(&mut w, &interviews)?;
        w.flush()?;
        let mut w = out.create("ingest/summary.json")?;
        write_json(&mut w, &meta, &summary)?;
        notes.insert(
            0,
            format!(
                "{} events ({} overtime rows skipped, {} rejected); {} interviews from {} transcripts",
                summary.events,
                summary.skipped_overtime,
                summary.rejected_rows,
                summary.interviews,
                summary.transcripts
            ),
        );
        Ok(notes)
    })
}

fn write_json<W: Write, T: Serialize>(w: &mut W, meta: &RunMeta, value: &T) -> Result<()> {
    let doc = serde_json::json!({ "run": meta, "data": value });
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let doc: serde_json::Value = serde_json::from_reader(open(path)?)?;
    let data = doc.get("data").cloned().ok_or_else(|| Error::Record {
        path: path.display().to_string(),
        line: 1,
        reason: "missing `data`".into(),
    })?;
    Ok(serde_json::from_value(data)?)
}

fn load_events(cfg: &RunConfig) -> Result<Vec<PlayEvent>> {
    let path = cfg.paths.output.join(EVENTS);
    read_jsonl(open(&path)?, &path.display().to_string())
}

fn load_interviews(cfg: &RunConfig) -> Result<Vec<Interview>> {
    let path = cfg.paths.output.join(INTERVIEWS);
    read_jsonl(open(&path)?, &path.display().to_string())
}

#[derive(Clone, Debug, Serialize)]
struct BuildHeader<'a> {
    #[serde(flatten)]
    run: &'a RunMeta,
    level: Level,
    mode: Mode,
    linked_units: usize,
    dropped_no_history: usize,
    dropped_unlinked: usize,
}

pub fn cmd_build(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate()?;
    let inputs = stage_inputs(cfg, &[EVENTS.to_owned(), INTERVIEWS.to_owned()])?;
    run_stage(cfg, "build", inputs, force, |out| {
        let meta = RunMeta::new(cfg, "build");
        let events = load_events(cfg)?;
        let interviews = load_interviews(cfg)?;
        let index = InterviewIndex::new(&interviews);
        let players = index.players();
        let mcfg = MetricConfig {
            three_point_count: cfg.build.three_point_count,
        };
        let mut notes = Vec::new();
        for &level in &cfg.build.levels {
            let store = MetricStore::build(&events, level, Some(&players), &cfg.ingest.geometry, &mcfg)?;
            let mut w = out.create(&store_path(level))?;
            write_header(&mut w, &meta)?;
            let records: Vec<_> = store.iter().collect();
            write_jsonl(&mut w, &records)?;
            w.flush()?;
            for mode in Mode::ALL {
                let built = build_examples(&index, &store, mode, &Metric::ALL);
                let mut w = out.create(&examples_path(level, mode))?;
                write_header(
                    &mut w,
                    &BuildHeader {
                        run: &meta,
                        level,
                        mode,
                        linked_units: built.linked_units,
                        dropped_no_history: built.dropped_no_history,
                        dropped_unlinked: built.dropped_unlinked,
                    },
                )?;
                write_jsonl(&mut w, &built.examples)?;
                w.flush()?;
                if mode == Mode::Combined {
                    notes.push(format!(
                        "{level}: {} linked units, {} examples per mode; dropped {} without history, {} unlinked interviews",
                        built.linked_units,
                        built.examples.len(),
                        built.dropped_no_history,
                        built.dropped_unlinked
                    ));
                    if built.examples.is_empty() {
                        notes.push(format!(
                            "warning: {level}: no interview matches a tracked game; examples are empty"
                        ));
                    }
                }
            }
        }
        Ok(notes)
    })
}

fn documents(interviews: &[Interview], include_questions: bool) -> BTreeMap<InterviewId, Document> {
    interviews
        .iter()
        .map(|iv| (iv.interview_id.clone(), iv.text_sentences(include_questions)))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ReportFile {
    run: RunMeta,
    report: EvalReport,
}

pub fn cmd_eval(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate()?;
    let mut rels = vec![INTERVIEWS.to_owned()];
    rels.extend(cfg.build.levels.iter().map(|&l| examples_path(l, Mode::Combined)));
    let inputs = stage_inputs(cfg, &rels)?;
    run_stage(cfg, "eval", inputs, force, |out| {
        let meta = RunMeta::new(cfg, "eval");
        let docs = documents(&load_interviews(cfg)?, cfg.build.include_questions);
        let mut levels = Vec::new();
        let mut players: BTreeSet<PlayerId> = BTreeSet::new();
        for &level in &cfg.build.levels {
            let path = cfg.paths.output.join(examples_path(level, Mode::Combined));
            let examples: Vec<LabeledExample> = read_jsonl(open(&path)?, &path.display().to_string())?;
            players.extend(examples.iter().map(|e| e.player.clone()));
            let referenced: BTreeSet<&InterviewId> = examples.iter().filter_map(|e| e.text_ref.as_ref()).collect();
            let documents = docs
                .iter()
                .filter(|(id, _)| referenced.contains(id))
                .map(|(id, d)| (id.clone(), d.clone()))
                .collect();
            levels.push(LevelData {
                level,
                examples,
                documents,
            });
        }
        let data = ExperimentData {
            levels,
            players: players.into_iter().collect(),
        };
        let result = run_experiment(&data, &cfg.experiment_config())?;

        let mut w = out.create(REPORT_JSON)?;
        let file = ReportFile {
            run: meta.clone(),
            report: result.report.clone(),
        };
        serde_json::to_writer_pretty(&mut w, &file)?;
        w.write_all(b"\n")?;
        w.flush()?;

        let mut w = out.create(PREDICTIONS)?;
        w.write_all(meta.comment().as_bytes())?;
        write_predictions(&mut w, &result.predictions)?;
        w.flush()?;

        let mut w = out.create("eval/delta.csv")?;
        w.write_all(meta.comment().as_bytes())?;
        write_delta_csv(&mut w, &result.report)?;
        w.flush()?;

        let mut w = out.create("eval/tables.txt")?;
        w.write_all(render_tables(&result.report).as_bytes())?;
        w.flush()?;

        let mut notes = vec![format!(
            "{} grid cells, {} test predictions; split seed {}, forest seed {}",
            result.report.cells.len(),
            result.predictions.len(),
            cfg.seeds.split,
            cfg.seeds.forest
        )];
        notes.extend(result.report.notices.iter().cloned());
        Ok(notes)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpretSummary {
    pub model_id: String,
    pub level: Level,
    pub k: usize,
    /// (K, mean NPMI) per grid value; a single entry when a model was reused.
    pub coherence: Vec<(usize, f64)>,
    pub vocab_hash: String,
    pub n_train_documents: usize,
    pub n_heldout_documents: usize,
    pub correlation: CorrelationMethod,
    pub class_topics: Vec<ClassTopicResult>,
}

const TFIDF_LR: ModelSpec = ModelSpec::Text {
    features: TextFeatures::Tfidf,
    learner: Learner::LogisticRegression,
};

fn choose_model(cfg: &RunConfig, preds: &[PredictionRecord]) -> Result<String> {
    if let Some(m) = &cfg.interpret.model {
        return Ok(m.clone());
    }
    let ids: BTreeSet<&str> = preds.iter().map(|p| p.model_id.as_str()).collect();
    match ids.len() {
        0 => Err(Error::Insufficient("predictions file is empty".into())),
        1 => Ok(ids.into_iter().next().expect("one id").to_owned()),
        _ if ids.contains(TFIDF_LR.id()) => Ok(TFIDF_LR.id().to_owned()),
        _ => Err(Error::Config(
            "predictions hold several models; set interpret.model".into(),
        )),
    }
}

pub fn cmd_interpret(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate()?;
    let pred_path = cfg
        .interpret
        .predictions
        .clone()
        .unwrap_or_else(|| cfg.paths.output.join(PREDICTIONS));
    let mut inputs = stage_inputs(cfg, &[INTERVIEWS.to_owned()])?;
    inputs.insert("predictions".to_owned(), hash_file(&pred_path)?);
    if let Some(p) = &cfg.interpret.topic_model {
        inputs.insert("topic_model".to_owned(), hash_file(p)?);
    }
    let ic = &cfg.interpret;
    run_stage(cfg, "interpret", inputs, force, |out| {
        let meta = RunMeta::new(cfg, "interpret");
        let all_preds = read_predictions(open(&pred_path)?, &pred_path.display().to_string())?;
        let model_id = choose_model(cfg, &all_preds)?;
        let preds: Vec<PredictionRecord> = all_preds
            .into_iter()
            .filter(|p| p.model_id == model_id && p.period.is_some() == (ic.level == Level::Period))
            .collect();
        if preds.is_empty() {
            return Err(Error::Insufficient(format!(
                "no {} predictions of model {model_id}",
                ic.level
            )));
        }

        let docs = documents(&load_interviews(cfg)?, cfg.build.include_questions);
        let mut predicted: BTreeSet<InterviewId> = BTreeSet::new();
        for p in &preds {
            let id = p.interview_id.as_ref().ok_or_else(|| {
                Error::KeyMismatch(format!("prediction {}/{} has no interview id", p.player, p.game_id))
            })?;
            if !docs.contains_key(id) {
                return Err(Error::KeyMismatch(format!(
                    "interview {id} is not in the ingested corpus"
                )));
            }
            predicted.insert(id.clone());
        }
        let train_ids: Vec<&InterviewId> = docs
            .keys()
            .filter(|id| ic.joint_training || !predicted.contains(*id))
            .collect();
        if train_ids.is_empty() {
            return Err(Error::Insufficient(
                "no interviews left to train the topic model".into(),
            ));
        }
        let train_docs: Vec<Document> = train_ids.iter().map(|id| docs[*id].clone()).collect();
        let corpus = LdaCorpus::from_documents(train_ids.iter().map(|id| id.to_string()).collect(), &train_docs)?;

        let (model, scores): (TopicModel, Vec<(usize, f64)>) = match &ic.topic_model {
            Some(p) => {
                let model = read_topic_model(open(p)?, &p.display().to_string())?;
                model.check_vocabulary(&corpus)?;
                let c = coherence(&model, &corpus, ic.coherence_top_n.min(corpus.vocab.len()))?;
                (model, vec![(0, c.mean)])
            }
            None => {
                let s = select_k(&corpus, &ic.k_grid, &ic.lda, cfg.seeds.lda, ic.coherence_top_n)?;
                (s.model, s.scores)
            }
        };
        let scores = if ic.topic_model.is_some() {
            vec![(model.k, scores[0].1)]
        } else {
            scores
        };

        let mut thetas: Thetas = model
            .doc_ids
            .iter()
            .zip(&model.doc_topic)
            .map(|(id, t)| (InterviewId::new(id.clone()), t.clone()))
            .collect();
        let heldout: Vec<&InterviewId> = predicted.iter().filter(|id| !thetas.contains_key(*id)).collect();
        let encoded: Vec<Vec<u32>> = heldout.iter().map(|id| corpus.encode(&docs[*id])).collect();
        let folded = model.fold_in(
            &encoded,
            ic.lda.fold_in_iterations,
            derive_seed(cfg.seeds.lda, "fold_in"),
        );
        for (id, t) in heldout.iter().zip(folded) {
            thetas.insert((*id).clone(), t);
        }
        let heldout_set: BTreeSet<&InterviewId> = heldout.iter().copied().collect();

        let mut class_rows = Vec::new();
        let mut curves = Vec::new();
        for metric in Metric::ALL {
            let pm: Vec<PredictionRecord> = preds.iter().filter(|p| p.metric == metric).cloned().collect();
            if pm.is_empty() {
                continue;
            }
            let row = class_topics(metric, &pm, &thetas, &model, ic.n_words)?;
            let curve_preds: Vec<PredictionRecord> = match ic.curve_set {
                CurveSet::All => pm.clone(),
                CurveSet::Test => pm
                    .iter()
                    .filter(|p| p.interview_id.as_ref().is_some_and(|id| heldout_set.contains(id)))
                    .cloned()
                    .collect(),
            };
            curves.push((metric, confidence_curve(&curve_preds, &thetas, row.positive_topic)?));
            class_rows.push(row);
        }
        let matrix = correlations(&preds, &thetas, model.k, ic.correlation)?;

        let mut w = out.create("interpret/topic_model.jsonl")?;
        write_topic_model_with(&mut w, &model, Some(&meta.json()))?;
        w.flush()?;
        let mut w = out.create("interpret/coherence.csv")?;
        w.write_all(meta.comment().as_bytes())?;
        writeln!(w, "k,mean_npmi")?;
        for (k, c) in &scores {
            writeln!(w, "{k},{c:.6}")?;
        }
        w.flush()?;
        let mut w = out.create("interpret/class_topics.csv")?;
        w.write_all(meta.comment().as_bytes())?;
        write_class_topics(&mut w, &class_rows)?;
        w.flush()?;
        let mut w = out.create("interpret/curves.csv")?;
        w.write_all(meta.comment().as_bytes())?;
        write_curves(&mut w, &curves)?;
        w.flush()?;
        let mut w = out.create("interpret/correlations.csv")?;
        w.write_all(meta.comment().as_bytes())?;
        write_correlations(&mut w, &matrix)?;
        w.flush()?;

        let summary = InterpretSummary {
            model_id: model_id.clone(),
            level: ic.level,
            k: model.k,
            coherence: scores,
            vocab_hash: model.vocab_hash.clone(),
            n_train_documents: corpus.docs.len(),
            n_heldout_documents: heldout.len(),
            correlation: ic.correlation,
            class_topics: class_rows,
        };
        let mut w = out.create(INTERPRET_SUMMARY)?;
        write_json(&mut w, &meta, &summary)?;
        Ok(vec![format!(
            "{model_id} at {} level: K = {} over {} training documents, {} folded in",
            ic.level,
            model.k,
            corpus.docs.len(),
            heldout.len()
        )])
    })
}

/// Renders the evaluation tables and, when present, the interpretation
/// summary into `report/report.txt`.
pub fn cmd_report(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate()?;
    let mut rels = vec![REPORT_JSON.to_owned()];
    let has_interpret = cfg.paths.output.join(INTERPRET_SUMMARY).is_file();
    if has_interpret {
        rels.push(INTERPRET_SUMMARY.to_owned());
    }
    let inputs = stage_inputs(cfg, &rels)?;
    run_stage(cfg, "report", inputs, force, |out| {
        let meta = RunMeta::new(cfg, "report");
        let text = render_report(cfg, &meta, has_interpret)?;
        let mut w = out.create("report/report.txt")?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(Vec::new())
    })
}

pub fn render_report(cfg: &RunConfig, meta: &RunMeta, with_interpret: bool) -> Result<String> {
    use std::fmt::Write as _;
    let path = cfg.paths.output.join(REPORT_JSON);
    let file: ReportFile = serde_json::from_reader(open(&path)?)?;
    let mut s = String::new();
    let _ = writeln!(s, "# run {}", serde_json::to_string(meta)?);
    let _ = writeln!(
        s,
        "# evaluation: {} folds ({:?}), test fraction {}, split seed {}, stddev {}",
        file.report.meta.n_folds,
        file.report.meta.fold_mode,
        file.report.meta.test_fraction,
        file.report.meta.seed,
        file.report.meta.stddev
    );
    s.push('\n');
    s.push_str(&render_tables(&file.report));
    if with_interpret {
        let summary: InterpretSummary = read_json(&cfg.paths.output.join(INTERPRET_SUMMARY))?;
        let _ = writeln!(
            s,
            "\n## topics ({} predictions, {} level, K = {})",
            summary.model_id, summary.level, summary.k
        );
        for (k, c) in &summary.coherence {
            let _ = writeln!(s, "coherence K={k}: {c:.4}");
        }
        for r in &summary.class_topics {
            let _ = writeln!(
                s,
                "{:<5} + topic {:>2}: {}",
                r.metric.name(),
                r.positive_topic,
                r.positive_words.join(" ")
            );
            let _ = writeln!(
                s,
                "{:<5} - topic {:>2}: {}",
                "",
                r.negative_topic,
                r.negative_words.join(" ")
            );
        }
    }
    Ok(s)
}

/// Every stage in order.
pub fn run_all(cfg: &RunConfig, force: bool) -> Result<Vec<StageOutcome>> {
    Ok(vec![
        cmd_ingest(cfg, force)?,
        cmd_build(cfg, force)?,
        cmd_eval(cfg, force)?,
        cmd_interpret(cfg, force)?,
        cmd_report(cfg, force)?,
    ])
}

/// Writes a synthetic season and a matching config into `dir`, returning
/// the config path. Used by the demo command and the tests.
pub fn write_demo(dir: &Path, season: &crate::synth::Season, extra_toml: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir.join("transcripts"))?;
    fs::write(dir.join("pbp.csv"), &season.pbp_csv)?;
    fs::write(dir.join("columns.toml"), &season.column_map_toml)?;
    for (name, text) in &season.transcripts {
        fs::write(dir.join("transcripts").join(name), text)?;
    }
    let config = format!(
        "[paths]\nevents = \"pbp.csv\"\ncolumn_map = \"columns.toml\"\ninterviews = \"transcripts\"\noutput = \"out\"\n\n{extra_toml}"
    );
    let path = dir.join("run.toml");
    fs::write(&path, config)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{season, SeasonConfig};

    fn small_config(dir: &Path) -> RunConfig {
        let s = season(
            &SeasonConfig {
                n_players: 6,
                n_games: 14,
                events_per_period: 30,
                ..Default::default()
            },
            5,
        );
        let extra = r#"
[build]
levels = ["game"]

[eval]
models = ["CC", "AR(3)-M", "TFIDF-LR-T"]
metrics = ["PTS", "FGR"]
n_folds = 3

[interpret]
k_grid = [2, 3]
lda = { iterations = 60, burn_in = 20, thin = 5 }
"#;
        RunConfig::load(&write_demo(dir, &s, extra).unwrap()).unwrap()
    }

    #[test]
    fn stages_rerun_as_no_ops() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let first = run_all(&cfg, false).unwrap();
        assert!(first.iter().all(|o| o.status == StageStatus::Ran), "{first:?}");
        let second = run_all(&cfg, false).unwrap();
        assert!(second.iter().all(|o| o.status == StageStatus::UpToDate));
        assert_eq!(cmd_eval(&cfg, true).unwrap().status, StageStatus::Ran);
        let text = fs::read_to_string(cfg.paths.output.join("report/report.txt")).unwrap();
        assert!(text.contains("## game level"));
        assert!(text.contains(&cfg.settings_hash()));
    }

    #[test]
    fn missing_input_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.paths.events = dir.path().join("nope.csv");
        let err = cmd_ingest(&cfg, false).unwrap_err();
        assert!(err.is_validation());
        assert!(!cfg.paths.output.exists());
    }

    #[test]
    fn settings_hash_ignores_paths() {
        let dir = tempfile::tempdir().unwrap();
        let a = small_config(dir.path());
        let mut b = a.clone();
        b.paths.output = PathBuf::from("/elsewhere");
        assert_eq!(a.settings_hash(), b.settings_hash());
        b.seeds.split = 7;
        assert_ne!(a.settings_hash(), b.settings_hash());
        let round = RunConfig::from_toml(&a.to_toml(), Path::new("/")).unwrap();
        assert_eq!(round, a);
    }
}
