//! Analyses of model confidences against document-topic mixtures: class
//! topics, top words, binned confidence curves and topic-confidence
//! correlations.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::lda::TopicModel;
use crate::error::{Error, Result};
use crate::ids::InterviewId;
use crate::metrics::Metric;
use crate::models::{PredictionRecord, THRESHOLD};

/// θ rows keyed by interview.
pub type Thetas = BTreeMap<InterviewId, Vec<f64>>;

pub fn top_word_ids(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<u32>> {
    if topic >= model.k {
        return Err(Error::InvalidParameter(format!(
            "topic {topic} out of range for K = {}",
            model.k
        )));
    }
    if n > model.vocab.len() {
        return Err(Error::InvalidParameter(format!(
            "asked for {n} words from a vocabulary of {}",
            model.vocab.len()
        )));
    }
    let phi = &model.topic_word[topic];
    let mut ids: Vec<u32> = (0..model.vocab.len() as u32).collect();
    ids.sort_by(|&a, &b| {
        phi[b as usize]
            .total_cmp(&phi[a as usize])
            .then_with(|| model.vocab[a as usize].cmp(&model.vocab[b as usize]))
    });
    ids.truncate(n);
    Ok(ids)
}

/// The `n` most probable words of a topic; ties in lexicographic order.
pub fn top_words(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<String>> {
    Ok(top_word_ids(model, topic, n)?
        .into_iter()
        .map(|w| model.vocab[w as usize].clone())
        .collect())
}

fn theta_of<'a>(thetas: &'a Thetas, p: &PredictionRecord) -> Result<&'a [f64]> {
    let id = p
        .interview_id
        .as_ref()
        .ok_or_else(|| Error::KeyMismatch(format!("prediction for {}/{} names no interview", p.player, p.game_id)))?;
    thetas
        .get(id)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::KeyMismatch(format!("no topic mixture for interview {id}")))
}

/// `Σ_i ŷ_i θ_z^i` for every topic, with `ŷ_i = +1` when confidence ≥ 0.5 and −1 otherwise.
pub fn class_topic_scores(predictions: &[PredictionRecord], thetas: &Thetas) -> Result<Vec<f64>> {
    let mut scores: Option<Vec<f64>> = None;
    for p in predictions {
        let theta = theta_of(thetas, p)?;
        let sign = if p.confidence >= THRESHOLD { 1.0 } else { -1.0 };
        let s = scores.get_or_insert_with(|| vec![0.0; theta.len()]);
        if s.len() != theta.len() {
            return Err(Error::Arity {
                expected: s.len(),
                got: theta.len(),
            });
        }
        s.iter_mut().zip(theta).for_each(|(acc, t)| *acc += sign * t);
    }
    scores.ok_or_else(|| Error::Insufficient("no predictions".into()))
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(xs: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTopicResult {
    pub metric: Metric,
    pub positive_topic: usize,
    pub negative_topic: usize,
    pub positive_score: f64,
    pub negative_score: f64,
    pub positive_words: Vec<String>,
    pub negative_words: Vec<String>,
}

/// Topics most associated with positive and with negative predictions for one metric.
pub fn class_topics(
    metric: Metric,
    predictions: &[PredictionRecord],
    thetas: &Thetas,
    model: &TopicModel,
    n_words: usize,
) -> Result<ClassTopicResult> {
    if let Some(p) = predictions.iter().find(|p| p.metric != metric) {
        return Err(Error::KeyMismatch(format!(
            "prediction for {} mixed into {}",
            p.metric, metric
        )));
    }
    let scores = class_topic_scores(predictions, thetas)?;
    let positive_topic = argmax(scores.iter().copied());
    let negative_topic = argmax(scores.iter().map(|s| -s));
    let n = n_words.min(model.vocab.len());
    Ok(ClassTopicResult {
        metric,
        positive_topic,
        negative_topic,
        positive_score: scores[positive_topic],
        negative_score: -scores[negative_topic],
        positive_words: top_words(model, positive_topic, n)?,
        negative_words: top_words(model, negative_topic, n)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    /// Right edge `j`; the bin holds θ ∈ (j − 0.1, j].
    pub upper: f64,
    pub count: usize,
    pub mean_confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedCurve {
    pub topic: usize,
    pub bins: Vec<Bin>,
}

/// Bin index 0..10 for θ: the smallest `j` with `θ ≤ j/10`. θ = 0 joins the first bin.
pub fn bin_index(theta: f64) -> usize {
    (1..=10).find(|&j| theta <= j as f64 / 10.0).unwrap_or(10) - 1
}

/// Mean confidence per 0.1-wide bin of `θ_topic`.
pub fn confidence_curve(predictions: &[PredictionRecord], thetas: &Thetas, topic: usize) -> Result<BinnedCurve> {
    let mut sums = [0.0; 10];
    let mut counts = [0usize; 10];
    for p in predictions {
        let theta = theta_of(thetas, p)?;
        let t = *theta.get(topic).ok_or_else(|| Error::Arity {
            expected: topic + 1,
            got: theta.len(),
        })?;
        let b = bin_index(t);
        sums[b] += p.confidence;
        counts[b] += 1;
    }
    let bins = (0..10)
        .map(|b| Bin {
            upper: (b + 1) as f64 / 10.0,
            count: counts[b],
            mean_confidence: (counts[b] > 0).then(|| sums[b] / counts[b] as f64),
        })
        .collect();
    Ok(BinnedCurve { topic, bins })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub method: CorrelationMethod,
    pub metrics: Vec<Metric>,
    /// `values[m][z]`; `None` where either series has zero variance.
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let constant = |s: &[f64]| s.iter().all(|&v| v == s[0]);
    if x.len() != y.len() || x.len() < 2 || constant(x) || constant(y) {
        return None;
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Correlation between every topic's θ and the confidences, per metric.
pub fn correlations(
    predictions: &[PredictionRecord],
    thetas: &Thetas,
    k: usize,
    method: CorrelationMethod,
) -> Result<CorrelationMatrix> {
    let mut by_metric: BTreeMap<usize, (Metric, Vec<&PredictionRecord>)> = BTreeMap::new();
    for p in predictions {
        by_metric
            .entry(p.metric.index())
            .or_insert((p.metric, Vec::new()))
            .1
            .push(p);
    }
    let mut metrics = Vec::new();
    let mut values = Vec::new();
    for (metric, preds) in by_metric.into_values() {
        if preds.len() < 3 {
            return Err(Error::Insufficient(format!(
                "{} point(s) for {metric}; need at least three",
                preds.len()
            )));
        }
        let conf: Vec<f64> = preds.iter().map(|p| p.confidence).collect();
        let rows = preds.iter().map(|p| theta_of(thetas, p)).collect::<Result<Vec<_>>>()?;
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::Arity {
                expected: k,
                got: bad.len(),
            });
        }
        let row: Vec<Option<f64>> = (0..k)
            .map(|z| {
                let t: Vec<f64> = rows.iter().map(|r| r[z]).collect();
                match method {
                    CorrelationMethod::Pearson => pearson(&t, &conf),
                    CorrelationMethod::Spearman => pearson(&ranks(&t), &ranks(&conf)),
                }
            })
            .collect();
        metrics.push(metric);
        values.push(row);
    }
    Ok(CorrelationMatrix {
        method,
        metrics,
        values,
    })
}

/// `metric,positive_topic,positive_words,negative_topic,negative_words`.
pub fn write_class_topics<W: Write>(out: W, rows: &[ClassTopicResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "metric",
        "positive_topic",
        "positive_words",
        "negative_topic",
        "negative_words",
    ])?;
    for r in rows {
        w.write_record([
            r.metric.name(),
            &r.positive_topic.to_string(),
            &r.positive_words.join(" "),
            &r.negative_topic.to_string(),
            &r.negative_words.join(" "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `metric,topic,bin,mean_confidence,count`; empty bins leave the mean blank.
pub fn write_curves<W: Write>(out: W, curves: &[(Metric, BinnedCurve)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "topic", "bin", "mean_confidence", "count"])?;
    for (m, c) in curves {
        for b in &c.bins {
            w.write_record([
                m.name(),
                &c.topic.to_string(),
                &format!("{:.1}", b.upper),
                &b.mean_confidence.map(|v| format!("{v:.6}")).unwrap_or_default(),
                &b.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Metric rows by `topic_<z>` columns; undefined entries are blank.
pub fn write_correlations<W: Write>(out: W, matrix: &CorrelationMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let k = matrix.values.first().map_or(0, Vec::len);
    let mut header = vec!["metric".to_owned()];
    header.extend((0..k).map(|z| format!("topic_{z}")));
    w.write_record(&header)?;
    for (m, row) in matrix.metrics.iter().zip(&matrix.values) {
        let mut rec = vec![m.name().to_owned()];
        rec.extend(row.iter().map(|v| v.map(|x| format!("{x:.6}")).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ExampleKey;
    use crate::ids::{GameId, PlayerId};
    use crate::metrics::UnitKey;

    fn pred(i: usize, metric: Metric, confidence: f64) -> PredictionRecord {
        let key = ExampleKey {
            player: PlayerId::new("p"),
            unit: UnitKey::game(GameId::new(format!("g{i}"))),
            metric,
        };
        PredictionRecord::new(&key, Some(InterviewId::new(format!("iv{i}"))), confidence, "M").unwrap()
    }

    fn thetas(rows: &[Vec<f64>]) -> Thetas {
        rows.iter()
            .enumerate()
            .map(|(i, r)| (InterviewId::new(format!("iv{i}")), r.clone()))
            .collect()
    }

    fn model(phi: Vec<Vec<f64>>, vocab: &[&str]) -> TopicModel {
        TopicModel {
            k: phi.len(),
            alpha: 1.0,
            beta: 0.01,
            seed: 0,
            n_iterations: 0,
            burn_in: 0,
            thin: 1,
            vocab: vocab.iter().map(|s| s.to_string()).collect(),
            vocab_hash: String::new(),
            doc_ids: vec![],
            topic_word: phi,
            doc_topic: vec![],
        }
    }

    #[test]
    fn top_words_order_and_ties() {
        let m = model(vec![vec![0.1, 0.1, 0.7, 0.1], vec![0.25; 4]], &["a", "b", "c", "d"]);
        assert_eq!(top_words(&m, 0, 2).unwrap(), vec!["c", "a"]);
        assert_eq!(top_words(&m, 1, 4).unwrap(), vec!["a", "b", "c", "d"]);
        assert!(top_words(&m, 0, 5).is_err());
        assert!(top_words(&m, 2, 1).is_err());
    }

    #[test]
    fn all_positive_picks_the_heaviest_topic() {
        let th = thetas(&[vec![0.2, 0.5, 0.3], vec![0.1, 0.6, 0.3]]);
        let preds = [pred(0, Metric::Pts, 0.9), pred(1, Metric::Pts, 0.5)];
        let m = model(vec![vec![1.0]; 3], &["w"]);
        let r = class_topics(Metric::Pts, &preds, &th, &m, 10).unwrap();
        assert_eq!(r.positive_topic, 1);
        assert_eq!(r.negative_topic, 0);
        assert!(class_topics(Metric::Pts, &[], &th, &m, 1).is_err());
    }

    #[test]
    fn curve_boundaries() {
        assert_eq!(bin_index(0.1), 0);
        assert_eq!(bin_index(0.0), 0);
        assert_eq!(bin_index(0.10000001), 1);
        assert_eq!(bin_index(1.0), 9);
        assert_eq!(bin_index(0.3), 2);
        let th = thetas(&[vec![0.05, 0.95], vec![0.08, 0.92]]);
        let c = confidence_curve(&[pred(0, Metric::Fgr, 0.2), pred(1, Metric::Fgr, 0.6)], &th, 0).unwrap();
        assert_eq!(c.bins[0].count, 2);
        assert!((c.bins[0].mean_confidence.unwrap() - 0.4).abs() < 1e-12);
        assert!(c.bins[1..].iter().all(|b| b.count == 0 && b.mean_confidence.is_none()));
    }

    #[test]
    fn correlation_fixtures() {
        let t = [0.1, 0.4, 0.2, 0.8, 0.5];
        let th = thetas(&t.iter().map(|&x| vec![x, 1.0 - x]).collect::<Vec<_>>());
        let preds: Vec<_> = t.iter().enumerate().map(|(i, &x)| pred(i, Metric::Sr, x)).collect();
        let c = correlations(&preds, &th, 2, CorrelationMethod::Pearson).unwrap();
        assert!((c.values[0][0].unwrap() - 1.0).abs() < 1e-9);
        assert!((c.values[0][1].unwrap() + 1.0).abs() < 1e-9);
        let flat: Vec<_> = (0..5).map(|i| pred(i, Metric::Sr, 0.3)).collect();
        let c = correlations(&flat, &th, 2, CorrelationMethod::Pearson).unwrap();
        assert!(c.values[0].iter().all(Option::is_none));
        assert!(correlations(&preds[..2], &th, 2, CorrelationMethod::Pearson).is_err());
        let s = correlations(&preds, &th, 2, CorrelationMethod::Spearman).unwrap();
        assert!((s.values[0][0].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }
}
