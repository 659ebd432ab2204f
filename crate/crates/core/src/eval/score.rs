//! Accuracy on a 0–100 scale, fold spread and per-player relative accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::ExampleKey;
use crate::error::{Error, Result};
use crate::ids::PlayerId;
use crate::metrics::Metric;
use crate::models::PredictionRecord;

/// Gold label per example key.
pub type Gold = BTreeMap<ExampleKey, u8>;

fn aligned<'a>(predictions: &'a [PredictionRecord], gold: &Gold) -> Result<Vec<(&'a PredictionRecord, u8)>> {
    if predictions.len() != gold.len() {
        return Err(Error::KeyMismatch(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    predictions
        .iter()
        .map(|p| {
            let key = p.key();
            let y = *gold.get(&key).ok_or_else(|| {
                Error::KeyMismatch(format!("no gold label for {}/{}/{}", key.player, key.unit, key.metric))
            })?;
            if !seen.insert(key.clone()) {
                return Err(Error::KeyMismatch(format!(
                    "duplicate prediction for {}/{}",
                    key.player, key.unit
                )));
            }
            Ok((p, y))
        })
        .collect()
}

fn percent(correct: usize, total: usize) -> f64 {
    100.0 * correct as f64 / total as f64
}

/// `100 · matches / total`.
pub fn accuracy(predictions: &[PredictionRecord], gold: &Gold) -> Result<f64> {
    let pairs = aligned(predictions, gold)?;
    if pairs.is_empty() {
        return Err(Error::Insufficient("no predictions to score".into()));
    }
    Ok(percent(
        pairs.iter().filter(|(p, y)| p.predicted == *y).count(),
        pairs.len(),
    ))
}

/// Population standard deviation.
pub fn fold_stddev(accuracies: &[f64]) -> Result<f64> {
    if accuracies.len() < 2 {
        return Err(Error::Insufficient(format!(
            "{} fold(s); need at least two",
            accuracies.len()
        )));
    }
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    Ok((accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Rounds to one decimal for table output.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub player: PlayerId,
    pub metric: Metric,
    pub model_id: String,
    pub n_test: usize,
    pub accuracy: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub rows: Vec<DeltaRow>,
    /// Players from the index without test examples, per metric.
    pub omitted: Vec<(PlayerId, Metric)>,
}

/// `ΔACC^{p,m} = ACC^{p,m} − ACC^m` for every player in `players` and
/// every metric present in `predictions` (one model's predictions).
pub fn per_player_delta(predictions: &[PredictionRecord], gold: &Gold, players: &[PlayerId]) -> Result<DeltaTable> {
    let pairs = aligned(predictions, gold)?;
    let mut by_metric: BTreeMap<Metric, Vec<(&PredictionRecord, u8)>> = BTreeMap::new();
    for (p, y) in pairs {
        by_metric.entry(p.metric).or_default().push((p, y));
    }
    let mut table = DeltaTable::default();
    for (metric, recs) in by_metric {
        let overall = percent(recs.iter().filter(|(p, y)| p.predicted == *y).count(), recs.len());
        let mut per: BTreeMap<&PlayerId, (usize, usize)> = BTreeMap::new();
        for (p, y) in &recs {
            let e = per.entry(&p.player).or_default();
            e.0 += usize::from(p.predicted == *y);
            e.1 += 1;
        }
        for player in players {
            match per.get(player) {
                Some(&(correct, total)) => {
                    let acc = percent(correct, total);
                    table.rows.push(DeltaRow {
                        player: player.clone(),
                        metric,
                        model_id: recs[0].0.model_id.clone(),
                        n_test: total,
                        accuracy: acc,
                        delta: acc - overall,
                    });
                }
                None => table.omitted.push((player.clone(), metric)),
            }
        }
        if let Some(stray) = per.keys().find(|p| !players.contains(p)) {
            return Err(Error::KeyMismatch(format!("player {stray} is not in the player index")));
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::GameId;
    use crate::metrics::UnitKey;

    fn rec(player: &str, game: usize, metric: Metric, predicted: u8) -> PredictionRecord {
        let key = ExampleKey {
            player: PlayerId::new(player),
            unit: UnitKey::game(GameId::new(format!("g{game}"))),
            metric,
        };
        PredictionRecord::new(&key, None, f64::from(predicted), "M").unwrap()
    }

    fn gold_of(recs: &[PredictionRecord], labels: &[u8]) -> Gold {
        recs.iter().zip(labels).map(|(r, &y)| (r.key(), y)).collect()
    }

    #[test]
    fn accuracy_fixtures() {
        let recs: Vec<_> = (0..7).map(|i| rec("a", i, Metric::Pts, 1)).collect();
        let gold = gold_of(&recs, &[1, 1, 1, 1, 0, 0, 0]);
        let acc = accuracy(&recs, &gold).unwrap();
        assert!((acc - 400.0 / 7.0).abs() < 1e-12);
        assert_eq!(round1(acc), 57.1);
        assert_eq!(accuracy(&recs, &gold_of(&recs, &[1; 7])).unwrap(), 100.0);
        assert_eq!(accuracy(&recs[..2], &gold_of(&recs[..2], &[1, 0])).unwrap(), 50.0);
    }

    #[test]
    fn key_mismatch() {
        let recs = vec![rec("a", 0, Metric::Pts, 1)];
        let gold = gold_of(&[rec("b", 0, Metric::Pts, 1)], &[1]);
        assert!(matches!(accuracy(&recs, &gold), Err(Error::KeyMismatch(_))));
    }

    #[test]
    fn stddev_fixtures() {
        assert_eq!(fold_stddev(&[60.0; 5]).unwrap(), 0.0);
        assert_eq!(fold_stddev(&[50.0, 60.0]).unwrap(), 5.0);
        assert!(fold_stddev(&[50.0]).is_err());
    }

    #[test]
    fn delta_fixtures() {
        let recs: Vec<_> = (0..4).map(|i| rec("a", i, Metric::Fgr, 1)).collect();
        let t = per_player_delta(&recs, &gold_of(&recs, &[1, 0, 1, 0]), &[PlayerId::new("a")]).unwrap();
        assert_eq!(t.rows[0].delta, 0.0);

        let mut recs: Vec<_> = (0..2).map(|i| rec("a", i, Metric::Fgr, 1)).collect();
        recs.extend((2..4).map(|i| rec("b", i, Metric::Fgr, 1)));
        let players = [PlayerId::new("a"), PlayerId::new("b"), PlayerId::new("c")];
        let t = per_player_delta(&recs, &gold_of(&recs, &[1, 1, 0, 0]), &players).unwrap();
        assert_eq!(t.rows[0].delta, 50.0);
        assert_eq!(t.rows[1].delta, -50.0);
        assert_eq!(t.omitted, vec![(PlayerId::new("c"), Metric::Fgr)]);
    }
}
