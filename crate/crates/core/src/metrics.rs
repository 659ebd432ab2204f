//! Per-player aggregation of play-by-play events into boxes, the seven
//! performance metrics, player means and deviation-from-mean labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{GameId, PlayerId};
use crate::pbp::{shot_distance, CourtGeometry, EventKind, PlayEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "FGR")]
    Fgr,
    #[serde(rename = "MSD2")]
    Msd2,
    #[serde(rename = "MSD3")]
    Msd3,
    #[serde(rename = "PR")]
    Pr,
    #[serde(rename = "SR")]
    Sr,
    #[serde(rename = "PF")]
    Pf,
    #[serde(rename = "PTS")]
    Pts,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Fgr,
        Metric::Msd2,
        Metric::Msd3,
        Metric::Pr,
        Metric::Sr,
        Metric::Pf,
        Metric::Pts,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Fgr => "FGR",
            Metric::Msd2 => "MSD2",
            Metric::Msd3 => "MSD3",
            Metric::Pr => "PR",
            Metric::Sr => "SR",
            Metric::Pf => "PF",
            Metric::Pts => "PTS",
        }
    }

    pub fn is_ratio(self) -> bool {
        matches!(self, Metric::Fgr | Metric::Pr | Metric::Sr)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Game,
    Period,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Game => "game",
            Level::Period => "period",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "game" => Ok(Level::Game),
            "period" => Ok(Level::Period),
            _ => Err(Error::InvalidParameter(format!("unknown level `{s}`"))),
        }
    }
}

/// A time unit: a whole game, or one period of a game.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitKey {
    pub game_id: GameId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<u8>,
}

impl UnitKey {
    pub fn game(game_id: GameId) -> Self {
        Self { game_id, period: None }
    }

    pub fn period(game_id: GameId, period: u8) -> Self {
        Self {
            game_id,
            period: Some(period),
        }
    }
}

impl fmt::Display for UnitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.period {
            Some(p) => write!(f, "{}/P{p}", self.game_id),
            None => write!(f, "{}", self.game_id),
        }
    }
}

/// Counts and shot distances for one player in one time unit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodBox {
    pub player: PlayerId,
    pub unit: Option<UnitKey>,
    pub n_shot: u32,
    pub n_miss: u32,
    pub n_2pt_att: u32,
    pub n_3pt_att: u32,
    pub n_2pt_made: u32,
    pub n_3pt_made: u32,
    pub n_assist: u32,
    pub n_turnover: u32,
    pub n_pf: u32,
    pub pts: u32,
    pub dist2: Vec<f64>,
    pub dist3: Vec<f64>,
}

impl PeriodBox {
    pub fn empty(player: PlayerId, unit: UnitKey) -> Self {
        Self {
            player,
            unit: Some(unit),
            ..Default::default()
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("box for {}: {what}", self.player)));
        if self.n_shot + self.n_miss != self.n_2pt_att + self.n_3pt_att {
            return bad("made + missed != 2pt + 3pt attempts");
        }
        if self.n_shot != self.n_2pt_made + self.n_3pt_made {
            return bad("made split does not add up");
        }
        if self.n_2pt_made > self.n_2pt_att || self.n_3pt_made > self.n_3pt_att {
            return bad("more makes than attempts");
        }
        if self.dist2.len() != self.n_2pt_att as usize || self.dist3.len() != self.n_3pt_att as usize {
            return bad("distance lists disagree with attempt counts");
        }
        if self.pts < 2 * self.n_2pt_made + 3 * self.n_3pt_made {
            return bad("points below field-goal points");
        }
        if self.dist2.iter().chain(&self.dist3).any(|d| !d.is_finite() || *d < 0.0) {
            return bad("invalid shot distance");
        }
        Ok(())
    }

    /// Fieldwise sum, used to roll periods up into a game.
    pub fn absorb(&mut self, other: &PeriodBox) {
        self.n_shot += other.n_shot;
        self.n_miss += other.n_miss;
        self.n_2pt_att += other.n_2pt_att;
        self.n_3pt_att += other.n_3pt_att;
        self.n_2pt_made += other.n_2pt_made;
        self.n_3pt_made += other.n_3pt_made;
        self.n_assist += other.n_assist;
        self.n_turnover += other.n_turnover;
        self.n_pf += other.n_pf;
        self.pts += other.pts;
        self.dist2.extend_from_slice(&other.dist2);
        self.dist3.extend_from_slice(&other.dist3);
    }

    fn record(&mut self, event: &PlayEvent, geo: &CourtGeometry) {
        match event.kind {
            EventKind::Shot | EventKind::Miss => {
                let made = event.kind == EventKind::Shot;
                let dist = event.shot_coords.map(|c| shot_distance(c, geo)).unwrap_or(0.0);
                if made {
                    self.n_shot += 1;
                    self.pts += u32::from(event.points);
                } else {
                    self.n_miss += 1;
                }
                if event.attempt_value == Some(3) {
                    self.n_3pt_att += 1;
                    self.n_3pt_made += u32::from(made);
                    self.dist3.push(dist);
                } else {
                    self.n_2pt_att += 1;
                    self.n_2pt_made += u32::from(made);
                    self.dist2.push(dist);
                }
            }
            EventKind::FreeThrowMade => self.pts += u32::from(event.points),
            EventKind::Assist => self.n_assist += 1,
            EventKind::Turnover => self.n_turnover += 1,
            EventKind::Foul => self.n_pf += 1,
            _ => {}
        }
    }
}

/// Orders games chronologically: by date when every game has one,
/// otherwise by first appearance in the event stream.
pub fn game_order(events: &[PlayEvent]) -> Vec<GameId> {
    let mut seen: Vec<(GameId, Option<String>)> = Vec::new();
    let mut index: HashMap<&GameId, usize> = HashMap::new();
    for e in events {
        if !index.contains_key(&e.game_id) {
            index.insert(&e.game_id, seen.len());
            seen.push((e.game_id.clone(), e.game_date.clone()));
        } else if let Some(d) = &e.game_date {
            let slot = &mut seen[index[&e.game_id]].1;
            if slot.is_none() {
                *slot = Some(d.clone());
            }
        }
    }
    if seen.iter().all(|(_, d)| d.is_some()) {
        // stable: same-date games keep appearance order
        seen.sort_by(|a, b| a.1.cmp(&b.1));
    }
    seen.into_iter().map(|(g, _)| g).collect()
}

fn accumulate(
    events: &[PlayEvent],
    level: Level,
    geo: &CourtGeometry,
    include: impl Fn(&PlayerId) -> bool,
) -> BTreeMap<PlayerId, Vec<PeriodBox>> {
    let order = game_order(events);
    let rank: HashMap<&GameId, usize> = order.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let mut boxes: BTreeMap<PlayerId, BTreeMap<(usize, u8), PeriodBox>> = BTreeMap::new();

    for e in events {
        let key = (rank[&e.game_id], e.period);
        let unit = UnitKey::period(e.game_id.clone(), e.period);
        for p in e.home_lineup.iter().chain(e.away_lineup.iter()) {
            if include(p) {
                boxes
                    .entry(p.clone())
                    .or_default()
                    .entry(key)
                    .or_insert_with(|| PeriodBox::empty(p.clone(), unit.clone()));
            }
        }
        if let Some(actor) = &e.actor {
            if include(actor) {
                boxes
                    .entry(actor.clone())
                    .or_default()
                    .entry(key)
                    .or_insert_with(|| PeriodBox::empty(actor.clone(), unit.clone()))
                    .record(e, geo);
            }
        }
    }

    boxes
        .into_iter()
        .map(|(player, units)| {
            let list = match level {
                Level::Period => units.into_values().collect(),
                Level::Game => {
                    let mut games: Vec<PeriodBox> = Vec::new();
                    for b in units.into_values() {
                        let game = b.unit.as_ref().expect("unit set").game_id.clone();
                        match games.last_mut() {
                            Some(last) if last.unit.as_ref().map(|u| &u.game_id) == Some(&game) => last.absorb(&b),
                            _ => {
                                let mut g = b;
                                g.unit = Some(UnitKey::game(game));
                                games.push(g);
                            }
                        }
                    }
                    games
                }
            };
            (player, list)
        })
        .collect()
}

/// Boxes for one player, in chronological order. A unit gets a box when the
/// player is on court for at least one event in it; counts only include
/// events whose actor is the player.
pub fn aggregate(events: &[PlayEvent], player: &PlayerId, level: Level, geo: &CourtGeometry) -> Vec<PeriodBox> {
    accumulate(events, level, geo, |p| p == player)
        .remove(player)
        .unwrap_or_default()
}

pub fn aggregate_all(events: &[PlayEvent], level: Level, geo: &CourtGeometry) -> BTreeMap<PlayerId, Vec<PeriodBox>> {
    accumulate(events, level, geo, |_| true)
}

/// How the shot-risk numerator counts three-pointers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThreePointCount {
    #[default]
    Attempts,
    Made,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub three_point_count: ThreePointCount,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    #[serde(rename = "FGR")]
    pub fgr: f64,
    #[serde(rename = "MSD2")]
    pub msd2: f64,
    #[serde(rename = "MSD3")]
    pub msd3: f64,
    #[serde(rename = "PR")]
    pub pr: f64,
    #[serde(rename = "SR")]
    pub sr: f64,
    #[serde(rename = "PF")]
    pub pf: f64,
    #[serde(rename = "PTS")]
    pub pts: f64,
}

impl MetricVector {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Fgr => self.fgr,
            Metric::Msd2 => self.msd2,
            Metric::Msd3 => self.msd3,
            Metric::Pr => self.pr,
            Metric::Sr => self.sr,
            Metric::Pf => self.pf,
            Metric::Pts => self.pts,
        }
    }

    pub fn values(&self) -> [f64; 7] {
        Metric::ALL.map(|m| self.get(m))
    }
}

/// 0/0 and empty means are defined as 0.
fn ratio(num: u32, den: u32) -> f64 {
    if den == 0 {
        0.0
    } else {
        f64::from(num) / f64::from(den)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn compute_metrics(b: &PeriodBox) -> MetricVector {
    compute_metrics_with(b, &MetricConfig::default())
}

pub fn compute_metrics_with(b: &PeriodBox, cfg: &MetricConfig) -> MetricVector {
    let attempts = b.n_shot + b.n_miss;
    let threes = match cfg.three_point_count {
        ThreePointCount::Attempts => b.n_3pt_att,
        ThreePointCount::Made => b.n_3pt_made,
    };
    MetricVector {
        fgr: ratio(b.n_shot, attempts),
        msd2: mean(&b.dist2),
        msd3: mean(&b.dist3),
        pr: ratio(b.n_turnover, b.n_assist + b.n_turnover),
        sr: ratio(threes, attempts),
        pf: f64::from(b.n_pf),
        pts: f64::from(b.pts),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerMean {
    pub player: PlayerId,
    pub metric: Metric,
    pub mean: f64,
    pub n_units: usize,
}

/// Arithmetic mean of a player's metric over all of their units.
///
/// The quotient is clamped into `[min, max]` of the series so rounding can
/// never push the mean above every value.
pub fn player_mean(player: &PlayerId, metric: Metric, values: &[f64]) -> Result<PlayerMean> {
    if values.is_empty() {
        return Err(Error::EmptySeries {
            player: player.to_string(),
            metric: metric.to_string(),
        });
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let m = (values.iter().sum::<f64>() / values.len() as f64).clamp(lo, hi);
    Ok(PlayerMean {
        player: player.clone(),
        metric,
        mean: m,
        n_units: values.len(),
    })
}

pub fn label(value: f64, mean: &PlayerMean) -> u8 {
    u8::from(value >= mean.mean)
}

/// One 0/1 label per metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelVector {
    #[serde(rename = "FGR")]
    pub fgr: u8,
    #[serde(rename = "MSD2")]
    pub msd2: u8,
    #[serde(rename = "MSD3")]
    pub msd3: u8,
    #[serde(rename = "PR")]
    pub pr: u8,
    #[serde(rename = "SR")]
    pub sr: u8,
    #[serde(rename = "PF")]
    pub pf: u8,
    #[serde(rename = "PTS")]
    pub pts: u8,
}

impl LabelVector {
    pub fn get(&self, m: Metric) -> u8 {
        match m {
            Metric::Fgr => self.fgr,
            Metric::Msd2 => self.msd2,
            Metric::Msd3 => self.msd3,
            Metric::Pr => self.pr,
            Metric::Sr => self.sr,
            Metric::Pf => self.pf,
            Metric::Pts => self.pts,
        }
    }

    pub fn set(&mut self, m: Metric, v: u8) {
        let slot = match m {
            Metric::Fgr => &mut self.fgr,
            Metric::Msd2 => &mut self.msd2,
            Metric::Msd3 => &mut self.msd3,
            Metric::Pr => &mut self.pr,
            Metric::Sr => &mut self.sr,
            Metric::Pf => &mut self.pf,
            Metric::Pts => &mut self.pts,
        };
        *slot = v;
    }
}

/// Metric-store record: one (player, unit) with values and labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub player: PlayerId,
    pub unit: UnitKey,
    pub values: MetricVector,
    pub labels: LabelVector,
}

/// Labeled metric values for every tracked player at one level, each
/// player's records in chronological order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricStore {
    pub level: Option<Level>,
    pub records: BTreeMap<PlayerId, Vec<UnitRecord>>,
    pub means: BTreeMap<PlayerId, Vec<PlayerMean>>,
}

impl MetricStore {
    /// Builds the store from filtered events. `players` restricts the
    /// store to a subset (typically the interviewed players).
    pub fn build(
        events: &[PlayEvent],
        level: Level,
        players: Option<&BTreeSet<PlayerId>>,
        geo: &CourtGeometry,
        cfg: &MetricConfig,
    ) -> Result<Self> {
        let boxes = accumulate(events, level, geo, |p| players.is_none_or(|set| set.contains(p)));
        let mut units = BTreeMap::new();
        for (player, list) in boxes {
            let series: Vec<(UnitKey, MetricVector)> = list
                .iter()
                .map(|b| (b.unit.clone().expect("unit set"), compute_metrics_with(b, cfg)))
                .collect();
            units.insert(player, series);
        }
        Self::from_values(level, units)
    }

    /// Labels precomputed metric series.
    pub fn from_values(level: Level, units: BTreeMap<PlayerId, Vec<(UnitKey, MetricVector)>>) -> Result<Self> {
        let mut records = BTreeMap::new();
        let mut means = BTreeMap::new();
        for (player, series) in units {
            if series.is_empty() {
                continue;
            }
            let player_means: Vec<PlayerMean> = Metric::ALL
                .into_iter()
                .map(|m| {
                    let vals: Vec<f64> = series.iter().map(|(_, v)| v.get(m)).collect();
                    player_mean(&player, m, &vals)
                })
                .collect::<Result<_>>()?;
            let recs: Vec<UnitRecord> = series
                .into_iter()
                .map(|(unit, values)| {
                    let mut labels = LabelVector::default();
                    for pm in &player_means {
                        labels.set(pm.metric, label(values.get(pm.metric), pm));
                    }
                    UnitRecord {
                        player: player.clone(),
                        unit,
                        values,
                        labels,
                    }
                })
                .collect();
            records.insert(player.clone(), recs);
            means.insert(player, player_means);
        }
        Ok(Self {
            level: Some(level),
            records,
            means,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &UnitRecord> {
        self.records.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.records.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lineups() -> ([PlayerId; 5], [PlayerId; 5]) {
        (
            ["p1", "p2", "p3", "p4", "p5"].map(PlayerId::from),
            ["o1", "o2", "o3", "o4", "o5"].map(PlayerId::from),
        )
    }

    fn ev(
        game: &str,
        period: u8,
        kind: EventKind,
        actor: &str,
        value: Option<u8>,
        coords: Option<(f64, f64)>,
    ) -> PlayEvent {
        let (home, away) = lineups();
        PlayEvent {
            game_id: GameId::new(game),
            game_date: None,
            period,
            kind,
            actor: Some(PlayerId::new(actor)),
            secondary_actor: None,
            points: match kind {
                EventKind::Shot => value.unwrap_or(2),
                EventKind::FreeThrowMade => 1,
                _ => 0,
            },
            attempt_value: value,
            attempt_value_inferred: false,
            shot_coords: coords,
            home_lineup: home,
            away_lineup: away,
        }
    }

    #[test]
    fn aggregates_scripted_period() {
        let g = CourtGeometry::default();
        let events = vec![
            ev("G1", 1, EventKind::Shot, "p1", Some(2), Some((3.0, 4.0))),
            ev("G1", 1, EventKind::Shot, "p1", Some(2), Some((6.0, 8.0))),
            ev("G1", 1, EventKind::Miss, "p1", Some(3), Some((0.0, 24.0))),
            ev("G1", 1, EventKind::Foul, "p2", None, None),
        ];
        let boxes = aggregate(&events, &"p1".into(), Level::Period, &g);
        assert_eq!(boxes.len(), 1);
        let b = &boxes[0];
        assert_eq!((b.n_shot, b.n_miss, b.n_2pt_att, b.n_3pt_att, b.pts), (2, 1, 2, 1, 4));
        assert_eq!(b.dist2, vec![5.0, 10.0]);
        assert_eq!(b.dist3, vec![24.0]);
        b.check_invariants().unwrap();
    }

    #[test]
    fn on_court_only_player_gets_zero_box() {
        let g = CourtGeometry::default();
        let events = vec![ev("G1", 1, EventKind::Foul, "p2", None, None)];
        let boxes = aggregate(&events, &"p3".into(), Level::Period, &g);
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0], PeriodBox::empty("p3".into(), UnitKey::period("G1".into(), 1)));
        assert!(aggregate(&events, &"bench".into(), Level::Period, &g).is_empty());
    }

    #[test]
    fn game_box_is_sum_of_period_boxes() {
        let g = CourtGeometry::default();
        let events = vec![
            ev("G1", 1, EventKind::Shot, "p1", Some(3), Some((0.0, 25.0))),
            ev("G1", 2, EventKind::Miss, "p1", Some(2), Some((0.0, 5.0))),
            ev("G1", 2, EventKind::FreeThrowMade, "p1", None, None),
            ev("G1", 2, EventKind::Assist, "p1", None, None),
        ];
        let periods = aggregate(&events, &"p1".into(), Level::Period, &g);
        let games = aggregate(&events, &"p1".into(), Level::Game, &g);
        assert_eq!(periods.len(), 2);
        assert_eq!(games.len(), 1);
        let mut sum = PeriodBox::empty("p1".into(), UnitKey::game("G1".into()));
        periods.iter().for_each(|b| sum.absorb(b));
        assert_eq!(games[0], sum);
        assert_eq!(games[0].pts, 4);
    }

    #[test]
    fn metric_examples() {
        let b = PeriodBox {
            n_shot: 3,
            n_miss: 1,
            n_2pt_att: 4,
            n_2pt_made: 3,
            pts: 6,
            dist2: vec![1.0, 2.0, 3.0, 4.0],
            ..Default::default()
        };
        let m = compute_metrics(&b);
        assert_eq!(m.fgr, 0.75);
        assert_eq!(m.msd3, 0.0);
        assert_eq!(m.pr, 0.0);
        assert_eq!(m.msd2, 2.5);

        let b = PeriodBox {
            n_shot: 4,
            n_miss: 4,
            n_2pt_att: 6,
            n_3pt_att: 2,
            n_2pt_made: 4,
            pts: 8,
            dist2: vec![1.0; 6],
            dist3: vec![24.0; 2],
            ..Default::default()
        };
        assert_eq!(compute_metrics(&b).sr, 0.25);
        let made = MetricConfig {
            three_point_count: ThreePointCount::Made,
        };
        assert_eq!(compute_metrics_with(&b, &made).sr, 0.0);
    }

    #[test]
    fn mean_and_labels() {
        let p = PlayerId::new("p");
        assert_eq!(player_mean(&p, Metric::Pts, &[10.0, 20.0, 30.0]).unwrap().mean, 20.0);
        assert_eq!(player_mean(&p, Metric::Pts, &[7.0]).unwrap().mean, 7.0);
        assert!(player_mean(&p, Metric::Pts, &[]).is_err());
        let m = player_mean(&p, Metric::Fgr, &[0.1, 0.1, 0.1]).unwrap();
        assert_eq!(label(0.1, &m), 1);
        assert_eq!(label(m.mean, &m), 1);
        assert_eq!(label(m.mean - 1e-9, &m), 0);
    }

    #[test]
    fn game_order_prefers_dates() {
        let mut a = ev("G2", 1, EventKind::Foul, "p1", None, None);
        let mut b = ev("G1", 1, EventKind::Foul, "p1", None, None);
        assert_eq!(
            game_order(&[a.clone(), b.clone()]),
            vec![GameId::new("G2"), GameId::new("G1")]
        );
        a.game_date = Some("2019-05-02".into());
        b.game_date = Some("2019-05-01".into());
        assert_eq!(game_order(&[a, b]), vec![GameId::new("G1"), GameId::new("G2")]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn box_strategy() -> impl Strategy<Value = PeriodBox> {
            (0u32..6, 0u32..6, 0u32..6, 0u32..6, 0u32..8, 0u32..8, 0u32..7, 0u32..10).prop_map(
                |(m2, x2, m3, x3, ast, tov, pf, ft)| PeriodBox {
                    player: PlayerId::new("p"),
                    unit: None,
                    n_shot: m2 + m3,
                    n_miss: x2 + x3,
                    n_2pt_att: m2 + x2,
                    n_3pt_att: m3 + x3,
                    n_2pt_made: m2,
                    n_3pt_made: m3,
                    n_assist: ast,
                    n_turnover: tov,
                    n_pf: pf,
                    pts: 2 * m2 + 3 * m3 + ft,
                    dist2: (0..m2 + x2).map(|i| f64::from(i) * 1.7).collect(),
                    dist3: (0..m3 + x3).map(|i| 23.0 + f64::from(i) * 0.9).collect(),
                },
            )
        }

        proptest! {
            #[test]
            fn metrics_are_total_and_in_range(b in box_strategy()) {
                b.check_invariants().unwrap();
                let m = compute_metrics(&b);
                for v in m.values() {
                    prop_assert!(v.is_finite());
                    prop_assert!(v >= 0.0);
                }
                prop_assert!(m.fgr <= 1.0 && m.sr <= 1.0 && m.pr <= 1.0);
                // SR * attempts recovers the three-point attempt count
                prop_assert_eq!((m.sr * f64::from(b.n_shot + b.n_miss)).round() as u32, b.n_3pt_att);
            }

            #[test]
            fn label_series_contains_a_one(values in proptest::collection::vec(-1e6f64..1e6, 1..60)) {
                let pm = player_mean(&PlayerId::new("p"), Metric::Pts, &values).unwrap();
                prop_assert!(values.iter().any(|&v| label(v, &pm) == 1));
            }
        }
    }
}
