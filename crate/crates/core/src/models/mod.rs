//! Classifiers emitting positive-class confidences: the common-class
//! baseline, AR(3) models over lagged labels, and bag-of-words / TF-IDF
//! text models with logistic regression or a random forest.

pub mod ar;
pub mod forest;
pub mod linalg;
pub mod logreg;
pub mod text;

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ExampleKey;
use crate::error::{Error, Result};
use crate::ids::{GameId, InterviewId, PlayerId};
use crate::metrics::{Metric, UnitKey};

pub use ar::{fit_ar, fit_ar_rows, predict_ar, ARModelFit, FeatureSet, Link};
pub use forest::{fit_random_forest, ForestConfig, ForestModel, MaxFeatures};
pub use logreg::{fit_logreg, LogRegConfig, LogRegModel};
pub use text::{build_bow, build_tfidf, BowVectorizer, Document, SparseVector, TfidfVectorizer, Vocabulary};

/// Decision threshold shared by every model.
pub const THRESHOLD: f64 = 0.5;

pub fn predicted_label(confidence: f64) -> u8 {
    u8::from(confidence >= THRESHOLD)
}

/// Constant predictor of the majority training label; ties go to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommonClass {
    pub label: u8,
    pub positive_rate: f64,
}

pub fn fit_common_class(labels: &[u8]) -> Result<CommonClass> {
    if labels.is_empty() {
        return Err(Error::Insufficient("no training labels".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    Ok(CommonClass {
        label: u8::from(2 * pos >= labels.len()),
        positive_rate: pos as f64 / labels.len() as f64,
    })
}

/// Input handed to a fitted model.
#[derive(Clone, Copy, Debug)]
pub enum Features<'a> {
    None,
    Lags(&'a [f64]),
    Sparse(&'a SparseVector),
}

/// Uniform confidence interface over the fitted model kinds.
pub trait Classifier: Sync {
    fn confidence(&self, x: Features<'_>) -> Result<f64>;
}

fn wrong_input(kind: &str) -> Error {
    Error::InvalidParameter(format!("{kind} model received the wrong feature kind"))
}

impl Classifier for CommonClass {
    fn confidence(&self, _: Features<'_>) -> Result<f64> {
        Ok(f64::from(self.label))
    }
}

impl Classifier for ARModelFit {
    fn confidence(&self, x: Features<'_>) -> Result<f64> {
        match x {
            Features::Lags(lags) => self.predict(lags),
            _ => Err(wrong_input("AR")),
        }
    }
}

impl Classifier for LogRegModel {
    fn confidence(&self, x: Features<'_>) -> Result<f64> {
        match x {
            Features::Sparse(v) => self.predict_proba(v),
            _ => Err(wrong_input("logistic regression")),
        }
    }
}

impl Classifier for ForestModel {
    fn confidence(&self, x: Features<'_>) -> Result<f64> {
        match x {
            Features::Sparse(v) => self.predict_proba(v),
            _ => Err(wrong_input("random forest")),
        }
    }
}

/// One scored example. Also the import format for externally produced
/// confidences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub player: PlayerId,
    pub game_id: GameId,
    pub period: Option<u8>,
    pub metric: Metric,
    pub interview_id: Option<InterviewId>,
    pub confidence: f64,
    pub predicted: u8,
    pub model_id: String,
}

impl PredictionRecord {
    pub fn new(key: &ExampleKey, interview_id: Option<InterviewId>, confidence: f64, model_id: &str) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidParameter(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            player: key.player.clone(),
            game_id: key.unit.game_id.clone(),
            period: key.unit.period,
            metric: key.metric,
            interview_id,
            confidence,
            predicted: predicted_label(confidence),
            model_id: model_id.to_owned(),
        })
    }

    pub fn key(&self) -> ExampleKey {
        ExampleKey {
            player: self.player.clone(),
            unit: UnitKey {
                game_id: self.game_id.clone(),
                period: self.period,
            },
            metric: self.metric,
        }
    }
}

pub fn predict_proba(
    model: &dyn Classifier,
    key: &ExampleKey,
    interview_id: Option<InterviewId>,
    x: Features<'_>,
    model_id: &str,
) -> Result<PredictionRecord> {
    PredictionRecord::new(key, interview_id, model.confidence(x)?, model_id)
}

const COLUMNS: [&str; 8] = [
    "player",
    "game_id",
    "period",
    "metric",
    "interview_id",
    "confidence",
    "predicted",
    "model_id",
];

/// Writes predictions as CSV with confidences at six decimals.
pub fn write_predictions<W: Write>(out: W, records: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record([
            r.player.as_str(),
            r.game_id.as_str(),
            &r.period.map(|p| p.to_string()).unwrap_or_default(),
            r.metric.name(),
            r.interview_id.as_ref().map(InterviewId::as_str).unwrap_or(""),
            &format!("{:.6}", r.confidence),
            &r.predicted.to_string(),
            &r.model_id,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a predictions file. Lines starting with `#` are comments; the
/// `predicted` column is optional and, when present, must agree with the
/// confidence.
pub fn read_predictions<R: Read>(input: R, path: &str) -> Result<Vec<PredictionRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let fail = |line: usize, reason: String| Error::Record {
        path: path.to_owned(),
        line,
        reason,
    };
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        match col(name) {
            Some(i) => *slot = i,
            None if name == "predicted" || name == "interview_id" || name == "period" => *slot = usize::MAX,
            None => return Err(fail(1, format!("missing column `{name}`"))),
        }
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let get = |k: usize| {
            if idx[k] == usize::MAX {
                ""
            } else {
                row.get(idx[k]).unwrap_or("")
            }
        };
        let period = match get(2) {
            "" => None,
            p => Some(p.parse::<u8>().map_err(|_| fail(line, format!("bad period `{p}`")))?),
        };
        let metric = Metric::from_str(get(3)).map_err(|e| fail(line, e.to_string()))?;
        let confidence: f64 = get(5)
            .parse()
            .map_err(|_| fail(line, format!("bad confidence `{}`", get(5))))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(fail(line, format!("confidence {confidence} outside [0, 1]")));
        }
        let predicted = predicted_label(confidence);
        match get(6) {
            "" => {}
            p if p == predicted.to_string() => {}
            p => {
                return Err(fail(
                    line,
                    format!("predicted `{p}` disagrees with confidence {confidence}"),
                ))
            }
        }
        let interview_id = Some(get(4)).filter(|s| !s.is_empty()).map(InterviewId::new);
        out.push(PredictionRecord {
            player: PlayerId::new(get(0)),
            game_id: GameId::new(get(1)),
            period,
            metric,
            interview_id,
            confidence,
            predicted,
            model_id: get(7).to_owned(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(game: &str) -> ExampleKey {
        ExampleKey {
            player: PlayerId::new("p1"),
            unit: UnitKey::game(GameId::new(game)),
            metric: Metric::Pts,
        }
    }

    #[test]
    fn common_class_majority_and_tie() {
        assert_eq!(fit_common_class(&[1, 1, 1, 0, 0]).unwrap().label, 1);
        assert_eq!(fit_common_class(&[1, 0, 0]).unwrap().label, 0);
        assert_eq!(fit_common_class(&[1, 0, 1, 0]).unwrap().label, 1);
        assert!(fit_common_class(&[]).is_err());
        let cc = fit_common_class(&[0, 0, 1]).unwrap();
        let recs: Vec<_> = (0..4)
            .map(|i| predict_proba(&cc, &key(&format!("g{i}")), None, Features::None, "CC").unwrap())
            .collect();
        assert!(recs.iter().all(|r| r.confidence == 0.0 && r.predicted == 0));
        assert_eq!(recs[3].game_id.as_str(), "g3");
    }

    #[test]
    fn boundary_confidence_predicts_one() {
        assert_eq!(predicted_label(0.5), 1);
        assert_eq!(predicted_label(0.4999999), 0);
        assert!(PredictionRecord::new(&key("g"), None, 1.2, "x").is_err());
    }

    #[test]
    fn wrong_feature_kind_is_an_error() {
        let lr = LogRegModel {
            weights: vec![0.0; 2],
            intercept: 0.0,
            iterations: 0,
            grad_norm: 0.0,
            loss_history: vec![],
        };
        assert!(lr.confidence(Features::Lags(&[1.0])).is_err());
        assert!(lr
            .confidence(Features::Sparse(&SparseVector::from_dense(&[0.0, 0.0, 1.0])))
            .is_err());
        assert_eq!(lr.confidence(Features::Sparse(&SparseVector::default())).unwrap(), 0.5);
    }

    #[test]
    fn predictions_round_trip() {
        let mut k = key("g1");
        k.unit.period = Some(3);
        let recs = vec![
            PredictionRecord::new(&k, Some(InterviewId::new("iv1")), 0.1234567, "BoW-RF-T").unwrap(),
            PredictionRecord::new(&key("g2"), None, 0.5, "CC").unwrap(),
        ];
        let mut buf = Vec::new();
        write_predictions(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("0.123457"));
        let back = read_predictions(buf.as_slice(), "mem").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].confidence, 0.123457);
        assert_eq!(back[0].period, Some(3));
        assert_eq!(back[1].interview_id, None);
        assert_eq!(back[1].predicted, 1);
    }

    #[test]
    fn import_reports_line_numbers() {
        let csv = "# external model\nplayer,game_id,metric,confidence,model_id\np,g1,PTS,0.7,bert\np,g2,PTS,1.7,bert\n";
        let err = read_predictions(csv.as_bytes(), "ext.csv").unwrap_err();
        assert!(matches!(err, Error::Record { line: 4, .. }), "{err}");
        let ok = "player,game_id,metric,confidence,predicted,model_id\np,g1,FGR,0.2,0,bert\n";
        assert_eq!(read_predictions(ok.as_bytes(), "x").unwrap()[0].predicted, 0);
        let bad = "player,game_id,metric,confidence,predicted,model_id\np,g1,FGR,0.2,1,bert\n";
        assert!(read_predictions(bad.as_bytes(), "x").is_err());
    }
}
