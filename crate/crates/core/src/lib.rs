//! Pre-game interview analytics: play-by-play metrics, deviation-from-mean
//! labels, classical text and autoregressive models, stratified evaluation
//! and LDA-based interpretation of model confidences.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod ids;
pub mod interpret;
pub mod interview;
pub mod io;
pub mod metrics;
pub mod models;
pub mod pbp;
pub mod pipeline;
pub mod synth;

pub use dataset::{build_examples, BuildOutcome, ExampleKey, InterviewIndex, LabeledExample, LagLabels, Mode};
pub use error::{Error, Result};
pub use ids::{GameId, InterviewId, PlayerId};
pub use interview::{corpus_stats, merge_consecutive, parse_interview, tokenize, CorpusStats, Interview, Markers};
pub use metrics::{
    aggregate, compute_metrics, label, player_mean, Level, Metric, MetricStore, MetricVector, PeriodBox, PlayerMean,
    UnitKey,
};
pub use pbp::{filter_relevant, on_court, parse_pbp, shot_distance, ColumnMap, CourtGeometry, EventKind, PlayEvent};
