//! Labeled examples linking interviews to metric labels in the three input
//! modes (text only, lagged metrics only, both).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{GameId, InterviewId, PlayerId};
use crate::interview::Interview;
use crate::metrics::{Level, Metric, MetricStore, UnitKey};

/// Number of lagged time units used as metric features.
pub const LAGS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TextOnly,
    MetricOnly,
    Combined,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::TextOnly, Mode::MetricOnly, Mode::Combined];

    pub fn name(self) -> &'static str {
        match self {
            Mode::TextOnly => "text_only",
            Mode::MetricOnly => "metric_only",
            Mode::Combined => "combined",
        }
    }

    fn has_text(self) -> bool {
        self != Mode::MetricOnly
    }

    fn has_lags(self) -> bool {
        self != Mode::TextOnly
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mode `{s}`")))
    }
}

/// Labels of the previous three units for every metric: `labels[metric][j-1]`
/// is the label `j` units back. Serialized as 21 fields `FGR_lag1` … `PTS_lag3`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LagLabels(pub [[u8; LAGS]; 7]);

impl LagLabels {
    pub fn get(&self, metric: Metric, lag: usize) -> u8 {
        self.0[metric.index()][lag - 1]
    }

    /// Features for the same-metric autoregression: lags 1..=3.
    pub fn same_metric(&self, metric: Metric) -> Vec<f64> {
        self.0[metric.index()].iter().map(|&v| f64::from(v)).collect()
    }

    /// Features for the all-metric autoregression, metric-major.
    pub fn all_metrics(&self) -> Vec<f64> {
        self.0.iter().flatten().map(|&v| f64::from(v)).collect()
    }

    pub fn field_names() -> Vec<String> {
        Metric::ALL
            .iter()
            .flat_map(|m| (1..=LAGS).map(move |j| format!("{}_lag{j}", m.name())))
            .collect()
    }
}

impl Serialize for LagLabels {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(7 * LAGS))?;
        for (name, v) in Self::field_names().iter().zip(self.0.iter().flatten()) {
            map.serialize_entry(name, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for LagLabels {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: BTreeMap<String, u8> = BTreeMap::deserialize(d)?;
        let mut out = LagLabels::default();
        for (mi, m) in Metric::ALL.iter().enumerate() {
            for j in 1..=LAGS {
                let key = format!("{}_lag{j}", m.name());
                let v = *raw.get(&key).ok_or_else(|| de::Error::missing_field("lag field"))?;
                if v > 1 {
                    return Err(de::Error::custom(format!("{key} must be 0 or 1")));
                }
                out.0[mi][j - 1] = v;
            }
        }
        if raw.len() != 7 * LAGS {
            return Err(de::Error::custom("unexpected lag fields"));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExampleKey {
    pub player: PlayerId,
    pub unit: UnitKey,
    pub metric: Metric,
}

impl ExampleKey {
    /// Grouping key for splits: all periods of one game's interview travel together.
    pub fn group(&self) -> String {
        format!("{}|{}", self.player, self.unit.game_id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub player: PlayerId,
    pub unit: UnitKey,
    pub metric: Metric,
    pub label: u8,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_ref: Option<InterviewId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lagged_labels: Option<LagLabels>,
}

impl LabeledExample {
    pub fn key(&self) -> ExampleKey {
        ExampleKey {
            player: self.player.clone(),
            unit: self.unit.clone(),
            metric: self.metric,
        }
    }

    pub fn check_mode(&self) -> Result<()> {
        let ok =
            self.text_ref.is_some() == self.mode.has_text() && self.lagged_labels.is_some() == self.mode.has_lags();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "example {}/{} does not match mode {}",
                self.player, self.unit, self.mode
            )))
        }
    }
}

/// (player, game) → interview id, after merging.
#[derive(Clone, Debug, Default)]
pub struct InterviewIndex {
    map: BTreeMap<(PlayerId, GameId), InterviewId>,
}

impl InterviewIndex {
    pub fn new(interviews: &[Interview]) -> Self {
        let map = interviews
            .iter()
            .map(|iv| ((iv.player.clone(), iv.game_id.clone()), iv.interview_id.clone()))
            .collect();
        Self { map }
    }

    pub fn insert(&mut self, player: PlayerId, game: GameId, id: InterviewId) {
        self.map.insert((player, game), id);
    }

    pub fn get(&self, player: &PlayerId, game: &GameId) -> Option<&InterviewId> {
        self.map.get(&(player.clone(), game.clone()))
    }

    pub fn players(&self) -> BTreeSet<PlayerId> {
        self.map.keys().map(|(p, _)| p.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct BuildOutcome {
    pub examples: Vec<LabeledExample>,
    /// Interview-linked units without three earlier units.
    pub dropped_no_history: usize,
    /// Interviews with no metric unit for their (player, game).
    pub dropped_unlinked: usize,
    /// Interview-linked units that produced examples.
    pub linked_units: usize,
}

/// Builds one example per (interview-linked unit, metric). Every mode uses
/// the same unit set, so models in different modes see identical examples.
pub fn build_examples(
    interviews: &InterviewIndex,
    store: &MetricStore,
    mode: Mode,
    metrics: &[Metric],
) -> BuildOutcome {
    let mut out = BuildOutcome::default();
    let mut linked: BTreeSet<(PlayerId, GameId)> = BTreeSet::new();

    for (player, records) in &store.records {
        for (i, rec) in records.iter().enumerate() {
            let Some(iv) = interviews.get(player, &rec.unit.game_id) else {
                continue;
            };
            linked.insert((player.clone(), rec.unit.game_id.clone()));
            if i < LAGS {
                out.dropped_no_history += 1;
                continue;
            }
            out.linked_units += 1;
            let mut lags = LagLabels::default();
            for j in 1..=LAGS {
                let prev = &records[i - j].labels;
                for m in Metric::ALL {
                    lags.0[m.index()][j - 1] = prev.get(m);
                }
            }
            for &m in metrics {
                out.examples.push(LabeledExample {
                    player: player.clone(),
                    unit: rec.unit.clone(),
                    metric: m,
                    label: rec.labels.get(m),
                    mode,
                    text_ref: mode.has_text().then(|| iv.clone()),
                    lagged_labels: mode.has_lags().then_some(lags),
                });
            }
        }
    }
    out.dropped_unlinked = interviews.map.keys().filter(|k| !linked.contains(k)).count();
    out
}

/// Examples of one metric at one level, in stable key order.
pub fn select(examples: &[LabeledExample], metric: Metric) -> Vec<LabeledExample> {
    let mut v: Vec<LabeledExample> = examples.iter().filter(|e| e.metric == metric).cloned().collect();
    v.sort_by_key(LabeledExample::key);
    v
}

pub fn level_of(example: &LabeledExample) -> Level {
    if example.unit.period.is_some() {
        Level::Period
    } else {
        Level::Game
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricVector;

    fn store(level: Level, units: &[(&str, Vec<UnitKey>)]) -> MetricStore {
        let mut map = BTreeMap::new();
        for (p, keys) in units {
            let series = keys
                .iter()
                .enumerate()
                .map(|(i, k)| {
                    let v = i as f64;
                    (
                        k.clone(),
                        MetricVector {
                            fgr: (v / 10.0) % 1.0,
                            msd2: v,
                            msd3: 0.0,
                            pr: 0.5,
                            sr: 0.1 * (i % 3) as f64,
                            pf: (i % 2) as f64,
                            pts: v * 2.0,
                        },
                    )
                })
                .collect();
            map.insert(PlayerId::new(*p), series);
        }
        MetricStore::from_values(level, map).unwrap()
    }

    fn games(n: usize) -> Vec<UnitKey> {
        (1..=n).map(|g| UnitKey::game(GameId::new(format!("G{g}")))).collect()
    }

    fn index(player: &str, games: impl IntoIterator<Item = usize>) -> InterviewIndex {
        let mut idx = InterviewIndex::default();
        for g in games {
            idx.insert(
                player.into(),
                GameId::new(format!("G{g}")),
                InterviewId::new(format!("I{g}")),
            );
        }
        idx
    }

    #[test]
    fn five_games_give_two_examples() {
        let s = store(Level::Game, &[("p", games(5))]);
        let out = build_examples(&index("p", 1..=5), &s, Mode::Combined, &[Metric::Pts]);
        assert_eq!(out.examples.len(), 2);
        assert_eq!(out.dropped_no_history, 3);
        let units: Vec<String> = out.examples.iter().map(|e| e.unit.to_string()).collect();
        assert_eq!(units, vec!["G4", "G5"]);
        // lag 1 of G5 is G4's label
        let g4 = &s.records[&PlayerId::new("p")][3];
        assert_eq!(
            out.examples[1].lagged_labels.unwrap().get(Metric::Pts, 1),
            g4.labels.pts
        );
    }

    #[test]
    fn modes_control_fields() {
        let s = store(Level::Game, &[("p", games(6))]);
        for mode in Mode::ALL {
            let out = build_examples(&index("p", 1..=6), &s, mode, &Metric::ALL);
            assert_eq!(out.examples.len(), 3 * 7);
            for e in &out.examples {
                e.check_mode().unwrap();
            }
        }
        let text = build_examples(&index("p", 1..=6), &s, Mode::TextOnly, &Metric::ALL);
        assert!(text.examples.iter().all(|e| e.lagged_labels.is_none()));
    }

    #[test]
    fn unlinked_interviews_are_counted() {
        let s = store(Level::Game, &[("p", games(4))]);
        let mut idx = index("p", [4, 9]);
        idx.insert("ghost".into(), GameId::new("G1"), InterviewId::new("X"));
        let out = build_examples(&idx, &s, Mode::TextOnly, &[Metric::Fgr]);
        assert_eq!(out.examples.len(), 1);
        assert_eq!(out.dropped_unlinked, 2);
    }

    #[test]
    fn lag_labels_serialize_as_21_fields() {
        let mut l = LagLabels::default();
        l.0[6][2] = 1;
        let v = serde_json::to_value(l).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 21);
        assert_eq!(obj["PTS_lag3"], 1);
        let json = serde_json::to_string(&l).unwrap();
        assert!(json.starts_with("{\"FGR_lag1\":0"));
        assert_eq!(serde_json::from_str::<LagLabels>(&json).unwrap(), l);
    }
}
