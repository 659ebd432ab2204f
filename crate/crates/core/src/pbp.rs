//! Play-by-play ingestion.
//!
//! Rows of a delimited export are mapped onto [`PlayEvent`]s through a
//! [`ColumnMap`], so different export layouts can be read without code
//! changes. Overtime rows are skipped and counted; malformed rows are
//! rejected with their row index and never abort the whole file.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{GameId, PlayerId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Shot,
    Miss,
    FreeThrowMade,
    FreeThrowMiss,
    Assist,
    Block,
    Rebound,
    Foul,
    Turnover,
    Violation,
    Timeout,
    Substitution,
    JumpBall,
    PeriodBoundary,
}

impl EventKind {
    pub const ALL: [EventKind; 14] = [
        EventKind::Shot,
        EventKind::Miss,
        EventKind::FreeThrowMade,
        EventKind::FreeThrowMiss,
        EventKind::Assist,
        EventKind::Block,
        EventKind::Rebound,
        EventKind::Foul,
        EventKind::Turnover,
        EventKind::Violation,
        EventKind::Timeout,
        EventKind::Substitution,
        EventKind::JumpBall,
        EventKind::PeriodBoundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Shot => "shot",
            EventKind::Miss => "miss",
            EventKind::FreeThrowMade => "free_throw_made",
            EventKind::FreeThrowMiss => "free_throw_miss",
            EventKind::Assist => "assist",
            EventKind::Block => "block",
            EventKind::Rebound => "rebound",
            EventKind::Foul => "foul",
            EventKind::Turnover => "turnover",
            EventKind::Violation => "violation",
            EventKind::Timeout => "timeout",
            EventKind::Substitution => "substitution",
            EventKind::JumpBall => "jump_ball",
            EventKind::PeriodBoundary => "period_boundary",
        }
    }

    /// Case-insensitive lookup of the canonical name; spaces and hyphens are
    /// treated as underscores.
    pub fn from_name(s: &str) -> Option<EventKind> {
        let norm = normalize_label(s);
        EventKind::ALL.into_iter().find(|k| k.name() == norm)
    }

    /// Kinds that carry no information for the performance metrics.
    pub fn is_ignored(self) -> bool {
        matches!(
            self,
            EventKind::Timeout | EventKind::JumpBall | EventKind::Substitution | EventKind::PeriodBoundary
        )
    }

    pub fn is_field_goal(self) -> bool {
        matches!(self, EventKind::Shot | EventKind::Miss)
    }
}

fn normalize_label(s: &str) -> String {
    s.trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

/// One parsed play-by-play row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayEvent {
    pub game_id: GameId,
    /// Optional sortable game date; when absent, games are ordered by first appearance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game_date: Option<String>,
    pub period: u8,
    pub kind: EventKind,
    /// Player credited or charged. Team-level rows (timeouts, boundaries) may have none.
    pub actor: Option<PlayerId>,
    pub secondary_actor: Option<PlayerId>,
    pub points: u8,
    /// 2 or 3 for field goals, absent otherwise.
    pub attempt_value: Option<u8>,
    /// True when `attempt_value` was derived from the shot distance rather than read.
    pub attempt_value_inferred: bool,
    pub shot_coords: Option<(f64, f64)>,
    pub home_lineup: [PlayerId; 5],
    pub away_lineup: [PlayerId; 5],
}

impl PlayEvent {
    pub fn on_court(&self, player: &PlayerId) -> bool {
        on_court(self, player)
    }
}

pub fn on_court(event: &PlayEvent, player: &PlayerId) -> bool {
    event
        .home_lineup
        .iter()
        .chain(event.away_lineup.iter())
        .any(|p| p == player)
}

/// Basket location on the court, in feet. `x` runs sideline to sideline,
/// `y` runs along the length of the court.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CourtGeometry {
    pub basket_x: f64,
    pub basket_y: f64,
}

impl Default for CourtGeometry {
    fn default() -> Self {
        Self {
            basket_x: 0.0,
            basket_y: 0.0,
        }
    }
}

impl CourtGeometry {
    pub fn new(basket_x: f64, basket_y: f64) -> Result<Self> {
        if !basket_x.is_finite() || !basket_y.is_finite() {
            return Err(Error::InvalidParameter("basket location must be finite".into()));
        }
        Ok(Self { basket_x, basket_y })
    }
}

pub fn shot_distance(coords: (f64, f64), geo: &CourtGeometry) -> f64 {
    let dx = coords.0 - geo.basket_x;
    let dy = coords.1 - geo.basket_y;
    dx.hypot(dy)
}

/// Three-point line used to infer the value of missed attempts when the
/// export carries no shot-type column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThreePointLine {
    pub arc_radius: f64,
    pub corner_distance: f64,
    /// Along-court extent (from the basket) of the straight corner segment.
    pub corner_depth: f64,
}

impl Default for ThreePointLine {
    fn default() -> Self {
        Self {
            arc_radius: 23.75,
            corner_distance: 22.0,
            corner_depth: 8.75,
        }
    }
}

impl ThreePointLine {
    pub fn value_of(&self, coords: (f64, f64), geo: &CourtGeometry) -> u8 {
        let dx = (coords.0 - geo.basket_x).abs();
        let dy = coords.1 - geo.basket_y;
        let corner = dy.abs() <= self.corner_depth && dx > self.corner_distance;
        if corner || shot_distance(coords, geo) > self.arc_radius {
            3
        } else {
            2
        }
    }
}

/// Column indices of each field in the source table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Columns {
    pub game_id: usize,
    #[serde(default)]
    pub game_date: Option<usize>,
    pub period: usize,
    pub kind: usize,
    pub actor: usize,
    #[serde(default)]
    pub secondary_actor: Option<usize>,
    #[serde(default)]
    pub points: Option<usize>,
    /// Single column holding `(x,y)`, `x,y` or `x;y`.
    #[serde(default)]
    pub shot_coords: Option<usize>,
    #[serde(default)]
    pub shot_x: Option<usize>,
    #[serde(default)]
    pub shot_y: Option<usize>,
    /// Column holding 2/3 (or `2pt`/`3pt`) for field-goal rows.
    #[serde(default)]
    pub shot_type: Option<usize>,
    pub home_lineup: [usize; 5],
    pub away_lineup: [usize; 5],
}

/// External description of a play-by-play export layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// Exact number of fields per row. Defaults to the header width, or to
    /// the largest mapped index + 1 when there is no header.
    #[serde(default)]
    pub arity: Option<usize>,
    pub columns: Columns,
    /// Source label → canonical kind name, for exports with their own vocabulary.
    #[serde(default)]
    pub kind_aliases: BTreeMap<String, String>,
}

fn default_delimiter() -> char {
    ','
}

fn default_true() -> bool {
    true
}

impl ColumnMap {
    pub fn from_toml(s: &str) -> Result<Self> {
        let map: ColumnMap = toml::from_str(s).map_err(|e| Error::ColumnMap(e.to_string()))?;
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delimiter.is_ascii() {
            return Err(Error::ColumnMap("delimiter must be a single ASCII character".into()));
        }
        let c = &self.columns;
        if c.shot_coords.is_some() && (c.shot_x.is_some() || c.shot_y.is_some()) {
            return Err(Error::ColumnMap(
                "use either shot_coords or shot_x/shot_y, not both".into(),
            ));
        }
        if c.shot_x.is_some() != c.shot_y.is_some() {
            return Err(Error::ColumnMap("shot_x and shot_y must be given together".into()));
        }
        for (alias, target) in &self.kind_aliases {
            if EventKind::from_name(target).is_none() {
                return Err(Error::ColumnMap(format!(
                    "alias `{alias}` maps to unknown kind `{target}`"
                )));
            }
        }
        Ok(())
    }

    fn max_index(&self) -> usize {
        let c = &self.columns;
        let mut all = vec![c.game_id, c.period, c.kind, c.actor];
        all.extend(
            [
                c.game_date,
                c.secondary_actor,
                c.points,
                c.shot_coords,
                c.shot_x,
                c.shot_y,
                c.shot_type,
            ]
            .into_iter()
            .flatten(),
        );
        all.extend(c.home_lineup);
        all.extend(c.away_lineup);
        all.into_iter().max().unwrap_or(0)
    }

    fn kind_of(&self, label: &str) -> Option<EventKind> {
        let norm = normalize_label(label);
        self.kind_aliases
            .iter()
            .find(|(alias, _)| normalize_label(alias) == norm)
            .and_then(|(_, target)| EventKind::from_name(target))
            .or_else(|| EventKind::from_name(label))
    }
}

/// Settings for one ingestion run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSettings {
    pub geometry: CourtGeometry,
    pub three_point_line: ThreePointLine,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// Zero-based data row index (header excluded).
    pub row: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParseOutcome {
    pub events: Vec<PlayEvent>,
    pub skipped_overtime: usize,
    pub rejected: Vec<Rejection>,
}

impl ParseOutcome {
    pub fn input_rows(&self) -> usize {
        self.events.len() + self.skipped_overtime + self.rejected.len()
    }
}

enum RowResult {
    Event(PlayEvent),
    Overtime,
}

/// Parses a delimited play-by-play table.
pub fn parse_pbp<R: Read>(source: R, schema: &ColumnMap, settings: &IngestSettings) -> Result<ParseOutcome> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(schema.has_header)
        .flexible(true)
        .from_reader(source);

    let arity = match schema.arity {
        Some(n) => Some(n),
        None if schema.has_header => Some(reader.headers()?.len()),
        None => None,
    };
    let min_width = schema.max_index() + 1;
    if let Some(n) = arity {
        if n < min_width {
            return Err(Error::ColumnMap(format!(
                "table has {n} columns but the map references column {}",
                min_width - 1
            )));
        }
    }

    let mut out = ParseOutcome::default();
    for (row, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.rejected.push(Rejection {
                    row,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let fields: Vec<&str> = record.iter().collect();
        let arity_ok = match arity {
            Some(n) => fields.len() == n,
            None => fields.len() >= min_width,
        };
        if !arity_ok {
            out.rejected.push(Rejection {
                row,
                reason: format!("wrong arity: {} fields", fields.len()),
            });
            continue;
        }
        match parse_row(row, &fields, schema, settings) {
            Ok(RowResult::Event(e)) => out.events.push(e),
            Ok(RowResult::Overtime) => out.skipped_overtime += 1,
            Err(e) => out.rejected.push(Rejection {
                row,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

fn malformed(row: usize, reason: impl Into<String>) -> Error {
    Error::MalformedRow {
        row,
        reason: reason.into(),
    }
}

fn opt_field<'a>(fields: &[&'a str], idx: Option<usize>) -> Option<&'a str> {
    idx.map(|i| fields[i].trim()).filter(|s| !s.is_empty())
}

fn parse_num<T: std::str::FromStr>(row: usize, name: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| malformed(row, format!("unparsable {name} `{s}`")))
}

fn parse_coords(row: usize, s: &str) -> Result<(f64, f64)> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    let mut parts = inner.split([',', ';']);
    let (Some(x), Some(y), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(malformed(row, format!("unparsable coordinates `{s}`")));
    };
    let x: f64 = parse_num(row, "shot x", x)?;
    let y: f64 = parse_num(row, "shot y", y)?;
    if !x.is_finite() || !y.is_finite() {
        return Err(malformed(row, "non-finite coordinates"));
    }
    Ok((x, y))
}

fn parse_shot_type(row: usize, s: &str) -> Result<u8> {
    let norm = s.trim().to_ascii_lowercase();
    match norm.trim_end_matches("pt").trim_end_matches("-point").trim() {
        "2" => Ok(2),
        "3" => Ok(3),
        _ => Err(malformed(row, format!("unparsable shot type `{s}`"))),
    }
}

fn parse_lineup(row: usize, fields: &[&str], idx: &[usize; 5]) -> Result<[PlayerId; 5]> {
    let mut out: Vec<PlayerId> = Vec::with_capacity(5);
    for &i in idx {
        let id = fields[i].trim();
        if id.is_empty() {
            return Err(malformed(row, "lineup slot is empty"));
        }
        out.push(PlayerId::new(id));
    }
    Ok(out.try_into().expect("five slots"))
}

fn parse_row(row: usize, fields: &[&str], schema: &ColumnMap, settings: &IngestSettings) -> Result<RowResult> {
    let c = &schema.columns;
    let period: u8 = parse_num(row, "period", fields[c.period])?;
    if period == 0 {
        return Err(malformed(row, "period must be at least 1"));
    }
    let kind_label = fields[c.kind].trim();
    let kind = schema.kind_of(kind_label).ok_or_else(|| Error::UnknownEventKind {
        row,
        kind: kind_label.to_owned(),
    })?;
    if period > 4 {
        return Ok(RowResult::Overtime);
    }

    let game_id = fields[c.game_id].trim();
    if game_id.is_empty() {
        return Err(malformed(row, "empty game id"));
    }
    let actor = opt_field(fields, Some(c.actor)).map(PlayerId::new);
    let secondary_actor = opt_field(fields, c.secondary_actor).map(PlayerId::new);

    let home_lineup = parse_lineup(row, fields, &c.home_lineup)?;
    let away_lineup = parse_lineup(row, fields, &c.away_lineup)?;
    let mut seen = HashSet::new();
    for p in home_lineup.iter().chain(away_lineup.iter()) {
        if !seen.insert(p) {
            return Err(malformed(row, format!("player {p} listed twice in lineups")));
        }
    }

    let shot_coords = match (c.shot_coords, c.shot_x, c.shot_y) {
        (Some(i), _, _) => opt_field(fields, Some(i)).map(|s| parse_coords(row, s)).transpose()?,
        (None, Some(xi), Some(yi)) => match (opt_field(fields, Some(xi)), opt_field(fields, Some(yi))) {
            (Some(x), Some(y)) => Some(parse_coords(row, &format!("{x},{y}"))?),
            (None, None) => None,
            _ => return Err(malformed(row, "only one shot coordinate present")),
        },
        _ => None,
    };

    let points_col: Option<u8> = opt_field(fields, c.points)
        .map(|s| parse_num(row, "points", s))
        .transpose()?;
    if matches!(points_col, Some(p) if p > 3) {
        return Err(malformed(row, "points must be 0..=3"));
    }
    let shot_type = opt_field(fields, c.shot_type)
        .map(|s| parse_shot_type(row, s))
        .transpose()?;

    let needs_actor = !kind.is_ignored();
    if needs_actor && actor.is_none() {
        return Err(malformed(row, format!("{} row without an actor", kind.name())));
    }

    let (points, attempt_value, inferred) = match kind {
        EventKind::Shot | EventKind::Miss => {
            let coords = shot_coords.ok_or_else(|| malformed(row, "field goal without coordinates"))?;
            let from_points = match (kind, points_col) {
                (EventKind::Shot, Some(p @ (2 | 3))) => Some(p),
                (EventKind::Shot, Some(p)) => {
                    return Err(malformed(row, format!("made field goal worth {p} points")));
                }
                (EventKind::Miss, Some(p)) if p != 0 => {
                    return Err(malformed(row, "missed field goal with nonzero points"));
                }
                _ => None,
            };
            if let (Some(a), Some(b)) = (from_points, shot_type) {
                if a != b {
                    return Err(malformed(row, "points disagree with shot type"));
                }
            }
            let (value, inferred) = match shot_type.or(from_points) {
                Some(v) => (v, false),
                None => (settings.three_point_line.value_of(coords, &settings.geometry), true),
            };
            let points = if kind == EventKind::Shot { value } else { 0 };
            (points, Some(value), inferred)
        }
        EventKind::FreeThrowMade => match points_col {
            None | Some(1) => (1, None, false),
            Some(_) => return Err(malformed(row, "made free throw must be worth 1 point")),
        },
        _ => match points_col {
            None | Some(0) => (0, None, false),
            Some(_) => return Err(malformed(row, format!("{} row with points", kind.name()))),
        },
    };

    Ok(RowResult::Event(PlayEvent {
        game_id: GameId::new(game_id),
        game_date: opt_field(fields, c.game_date).map(str::to_owned),
        period,
        kind,
        actor,
        secondary_actor,
        points,
        attempt_value,
        attempt_value_inferred: inferred,
        shot_coords: if kind.is_field_goal() { shot_coords } else { None },
        home_lineup,
        away_lineup,
    }))
}

/// Drops event kinds that do not feed any metric, preserving order.
pub fn filter_relevant(events: &[PlayEvent]) -> Vec<PlayEvent> {
    events.iter().filter(|e| !e.kind.is_ignored()).cloned().collect()
}

/// Writes the canonical events file: one JSON object per line, keys in
/// declaration order of [`PlayEvent`].
pub fn write_events<W: Write>(mut out: W, events: &[PlayEvent]) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events<R: BufRead>(input: R, path: &str) -> Result<Vec<PlayEvent>> {
    crate::io::read_jsonl(input, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn column_map() -> ColumnMap {
        ColumnMap {
            delimiter: ',',
            has_header: false,
            arity: Some(17),
            columns: Columns {
                game_id: 0,
                game_date: None,
                period: 1,
                kind: 2,
                actor: 3,
                secondary_actor: Some(4),
                points: Some(5),
                shot_coords: Some(6),
                shot_x: None,
                shot_y: None,
                shot_type: None,
                home_lineup: [7, 8, 9, 10, 11],
                away_lineup: [12, 13, 14, 15, 16],
            },
            kind_aliases: BTreeMap::new(),
        }
    }

    const LINEUPS: &str = "pl1,pl2,pl3,pl4,pl7,op1,op2,op3,op4,op5";

    fn parse(text: &str) -> ParseOutcome {
        parse_pbp(text.as_bytes(), &column_map(), &IngestSettings::default()).unwrap()
    }

    #[test]
    fn parses_made_shot() {
        let out = parse(&format!("G1,2,shot,pl7,,2,\"(10.0,5.0)\",{LINEUPS}\n"));
        assert_eq!(out.events.len(), 1);
        let e = &out.events[0];
        assert_eq!(e.period, 2);
        assert_eq!(e.kind, EventKind::Shot);
        assert_eq!(e.points, 2);
        assert_eq!(e.attempt_value, Some(2));
        assert!(!e.attempt_value_inferred);
        assert_eq!(e.shot_coords, Some((10.0, 5.0)));
        assert_eq!(e.actor, Some(PlayerId::new("pl7")));
    }

    #[test]
    fn overtime_rows_are_counted_not_rejected() {
        let out = parse(&format!(
            "G1,5,shot,pl7,,2,\"(1,1)\",{LINEUPS}\nG1,4,foul,pl7,op1,,,{LINEUPS}\n"
        ));
        assert_eq!(out.events.len(), 1);
        assert_eq!(out.skipped_overtime, 1);
        assert!(out.rejected.is_empty());
        assert_eq!(out.input_rows(), 2);
    }

    #[test]
    fn empty_input() {
        let out = parse("");
        assert!(out.events.is_empty());
        assert_eq!(out.skipped_overtime, 0);
        assert!(out.rejected.is_empty());
    }

    #[test]
    fn rejects_bad_rows_with_index() {
        let text = format!(
            "G1,1,shot,pl7,,2,\"(1,1)\",{LINEUPS}\n\
             G1,x,shot,pl7,,2,\"(1,1)\",{LINEUPS}\n\
             G1,1,dunk_contest,pl7,,2,\"(1,1)\",{LINEUPS}\n\
             G1,1,shot,pl7\n\
             G1,1,foul,pl7,,,,pl1,pl1,pl3,pl4,pl7,op1,op2,op3,op4,op5\n"
        );
        let out = parse(&text);
        assert_eq!(out.events.len(), 1);
        let rows: Vec<usize> = out.rejected.iter().map(|r| r.row).collect();
        assert_eq!(rows, vec![1, 2, 3, 4]);
        assert!(out.rejected[1].reason.contains("unknown event kind"));
        assert!(out.rejected[3].reason.contains("listed twice"));
        assert_eq!(out.input_rows(), 5);
    }

    #[test]
    fn miss_value_read_or_inferred() {
        let mut map = column_map();
        map.columns.shot_type = Some(17);
        map.arity = Some(18);
        let text = format!(
            "G1,1,miss,pl7,,0,\"(3,4)\",{LINEUPS},3pt\n\
             G1,1,miss,pl7,,,\"(0,25)\",{LINEUPS},\n\
             G1,1,miss,pl7,,,\"(0,10)\",{LINEUPS},\n\
             G1,1,miss,pl7,,,\"(22.5,1)\",{LINEUPS},\n"
        );
        let out = parse_pbp(text.as_bytes(), &map, &IngestSettings::default()).unwrap();
        assert!(out.rejected.is_empty(), "{:?}", out.rejected);
        let vals: Vec<(Option<u8>, bool)> = out
            .events
            .iter()
            .map(|e| (e.attempt_value, e.attempt_value_inferred))
            .collect();
        assert_eq!(
            vals,
            vec![(Some(3), false), (Some(3), true), (Some(2), true), (Some(3), true)]
        );
        assert!(out.events.iter().all(|e| e.points == 0));
    }

    #[test]
    fn aliases_map_export_labels() {
        let mut map = column_map();
        map.kind_aliases.insert("Made Shot".into(), "shot".into());
        let text = format!("G1,1,made shot,pl7,,3,\"(0,25)\",{LINEUPS}\n");
        let out = parse_pbp(text.as_bytes(), &map, &IngestSettings::default()).unwrap();
        assert_eq!(out.events[0].kind, EventKind::Shot);
        assert_eq!(out.events[0].points, 3);
    }

    #[test]
    fn filter_drops_ignored_kinds() {
        let out = parse(&format!(
            "G1,1,shot,pl7,,2,\"(1,1)\",{LINEUPS}\nG1,1,timeout,,,,,{LINEUPS}\nG1,1,foul,pl7,op1,,,{LINEUPS}\n"
        ));
        let kinds: Vec<EventKind> = filter_relevant(&out.events).iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::Shot, EventKind::Foul]);
    }

    #[test]
    fn shot_distance_examples() {
        let g = CourtGeometry::default();
        assert_eq!(shot_distance((3.0, 4.0), &g), 5.0);
        assert_eq!(shot_distance((0.0, 0.0), &g), 0.0);
        assert_eq!(shot_distance((-3.0, 4.0), &g), 5.0);
    }

    #[test]
    fn on_court_checks_both_lineups() {
        let out = parse(&format!("G1,1,foul,pl7,op1,,,{LINEUPS}\n"));
        let e = &out.events[0];
        assert!(on_court(e, &"pl2".into()));
        assert!(on_court(e, &"op5".into()));
        assert!(!on_court(e, &"bench9".into()));
    }

    #[test]
    fn column_map_from_toml() {
        let text = r#"
            delimiter = ";"
            has_header = true
            [columns]
            game_id = 0
            period = 1
            kind = 2
            actor = 3
            shot_x = 4
            shot_y = 5
            home_lineup = [6, 7, 8, 9, 10]
            away_lineup = [11, 12, 13, 14, 15]
            [kind_aliases]
            "2pt miss" = "miss"
        "#;
        let map = ColumnMap::from_toml(text).unwrap();
        assert_eq!(map.delimiter, ';');
        assert_eq!(map.columns.shot_x, Some(4));
        assert!(ColumnMap::from_toml("[columns]\ngame_id = 0").is_err());
    }

    #[test]
    fn events_file_round_trip() {
        let out = parse(&format!("G1,2,shot,pl7,,2,\"(10.0,5.0)\",{LINEUPS}\n"));
        let mut buf = Vec::new();
        write_events(&mut buf, &out.events).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(line.starts_with("{\"game_id\":\"G1\",\"period\":2,\"kind\":\"shot\""));
        let back = read_events(&buf[..], "mem").unwrap();
        assert_eq!(back, out.events);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn kind() -> impl Strategy<Value = EventKind> {
            proptest::sample::select(EventKind::ALL.to_vec())
        }

        proptest! {
            #[test]
            fn filter_is_idempotent(kinds in proptest::collection::vec(kind(), 0..40)) {
                let base = parse(&format!("G1,1,foul,pl7,op1,,,{LINEUPS}\n")).events[0].clone();
                let events: Vec<PlayEvent> = kinds.into_iter().map(|k| PlayEvent { kind: k, ..base.clone() }).collect();
                let once = filter_relevant(&events);
                prop_assert_eq!(filter_relevant(&once), once.clone());
                prop_assert!(once.iter().all(|e| !e.kind.is_ignored()));
            }

            #[test]
            fn distance_is_reflection_symmetric(
                bx in -200i32..200, by in -200i32..200, dx in -400i32..400, dy in -400i32..400,
            ) {
                // quarter-foot grid keeps the reflection exact in binary floating point
                let g = CourtGeometry::new(bx as f64 / 4.0, by as f64 / 4.0).unwrap();
                let c = ((bx + dx) as f64 / 4.0, (by + dy) as f64 / 4.0);
                let r = ((bx - dx) as f64 / 4.0, (by - dy) as f64 / 4.0);
                prop_assert_eq!(shot_distance(c, &g), shot_distance(r, &g));
                prop_assert!(shot_distance(c, &g) >= 0.0);
            }
        }
    }
}
