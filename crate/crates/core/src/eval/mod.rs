//! Evaluation protocol: grouped stratified splits, accuracy and fold
//! spread, per-player ΔACC and the model × metric × level grid.

pub mod experiment;
pub mod report;
pub mod score;
pub mod split;

pub use experiment::{
    fit_and_score, run_experiment, EvalReport, ExperimentConfig, ExperimentData, ExperimentOutput, GridCell, Learner,
    LevelData, ModelSpec, TextFeatures,
};
pub use score::{accuracy, fold_stddev, per_player_delta, round1, DeltaRow, DeltaTable, Gold};
pub use split::{derive_seed, is_stratified, stratified_holdout, stratified_kfold, Fold, FoldMode, Holdout, SplitItem};
