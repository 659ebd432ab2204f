//! Seeded synthetic data: a raw season (play-by-play table and transcripts),
//! planted-signal experiment data, a topic-structured corpus and AR series.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::dataset::{LabeledExample, LagLabels, Mode, LAGS};
use crate::eval::experiment::{ExperimentData, LevelData};
use crate::ids::{GameId, InterviewId, PlayerId};
use crate::metrics::{Level, Metric, UnitKey};
use crate::models::text::Document;

const SURNAMES: [&str; 12] = [
    "ADAMS", "BAKER", "CLARK", "DAVIS", "EVANS", "FOSTER", "GREEN", "HAYES", "IRWIN", "JONES", "KELLY", "LEWIS",
];

const FILLER: [&str; 24] = [
    "we", "just", "the", "team", "game", "tonight", "play", "good", "they", "ball", "coach", "defense", "gonna",
    "really", "know", "think", "out", "there", "night", "together", "shots", "minutes", "guys", "focus",
];

const HOT_WORDS: [&str; 4] = ["confident", "rhythm", "rested", "ready"];
const COLD_WORDS: [&str; 4] = ["tired", "sore", "struggling", "frustrated"];

const QUESTIONS: [&str; 6] = [
    "How are you feeling before tonight?",
    "What did you work on this week?",
    "How do you approach this matchup?",
    "Anything different in the game plan?",
    "How is the team chemistry right now?",
    "What does this stretch of games mean?",
];

#[derive(Clone, Debug)]
pub struct SeasonConfig {
    /// Home roster size; every home player is tracked and interviewed.
    pub n_players: usize,
    pub n_games: usize,
    pub events_per_period: usize,
    /// Probability that a (player, game) pair has a pre-game interview.
    pub interview_rate: f64,
    /// Probability that an interview answer carries a word matching the
    /// player's form for that game.
    pub signal: f64,
}

impl Default for SeasonConfig {
    fn default() -> Self {
        Self {
            n_players: 8,
            n_games: 24,
            events_per_period: 40,
            interview_rate: 0.8,
            signal: 0.8,
        }
    }
}

/// Raw inputs in the formats the ingest stage reads.
#[derive(Clone, Debug)]
pub struct Season {
    pub pbp_csv: String,
    pub column_map_toml: String,
    /// (file name, transcript text)
    pub transcripts: Vec<(String, String)>,
}

pub const SEASON_COLUMN_MAP: &str = r#"delimiter = ","
has_header = true

[columns]
game_id = 0
game_date = 1
period = 2
kind = 3
actor = 4
secondary_actor = 5
points = 6
shot_x = 7
shot_y = 8
home_lineup = [9, 10, 11, 12, 13]
away_lineup = [14, 15, 16, 17, 18]
"#;

fn game_date(g: usize) -> String {
    format!("2024-{:02}-{:02}", 1 + g / 28, 1 + g % 28)
}

fn shot_spot(rng: &mut ChaCha8Rng, three: bool) -> (f64, f64) {
    let angle = rng.random_range(0.3..std::f64::consts::PI - 0.3);
    let r = if three {
        rng.random_range(24.0..27.0)
    } else {
        rng.random_range(1.0..20.0)
    };
    (r * angle.cos(), r * angle.sin())
}

/// One regular-time season of a single home team against rotating opponents.
pub fn season(cfg: &SeasonConfig, seed: u64) -> Season {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n_players.clamp(5, SURNAMES.len());
    let roster: Vec<&str> = SURNAMES[..n].to_vec();
    let ids: Vec<String> = roster.iter().map(|s| s.to_ascii_lowercase()).collect();

    let mut csv = String::from("game,date,period,type,player,other,points,x,y,h1,h2,h3,h4,h5,a1,a2,a3,a4,a5\n");
    let mut transcripts = Vec::new();
    for g in 0..cfg.n_games {
        let game = format!("G{:03}", g + 1);
        let date = game_date(g);
        let away: Vec<String> = (1..=5).map(|i| format!("opp{}_{i}", g % 6)).collect();
        let form: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();

        for period in 1..=4u8 {
            let mut slots: Vec<usize> = (0..n).collect();
            slots.shuffle(&mut rng);
            let mut home: Vec<usize> = slots[..5].to_vec();
            home.sort_unstable();
            let lineup = |csv: &mut String| {
                for &h in &home {
                    let _ = write!(csv, ",{}", ids[h]);
                }
                for a in &away {
                    let _ = write!(csv, ",{a}");
                }
                csv.push('\n');
            };
            for _ in 0..cfg.events_per_period {
                let who = home[rng.random_range(0..5)];
                let actor = &ids[who];
                let hot = form[who];
                let roll: f64 = rng.random();
                let _ = write!(csv, "{game},{date},{period},");
                if roll < 0.45 {
                    let three = rng.random_bool(if hot { 0.45 } else { 0.25 });
                    let made = rng.random_bool(if hot { 0.55 } else { 0.35 });
                    let (x, y) = shot_spot(&mut rng, three);
                    let kind = if made { "shot" } else { "miss" };
                    let pts = if made {
                        if three {
                            3
                        } else {
                            2
                        }
                    } else {
                        0
                    };
                    let _ = write!(csv, "{kind},{actor},,{pts},{x:.2},{y:.2}");
                } else if roll < 0.55 {
                    let kind = if rng.random_bool(0.75) {
                        "free_throw_made"
                    } else {
                        "free_throw_miss"
                    };
                    let _ = write!(csv, "{kind},{actor},,,,");
                } else if roll < 0.7 {
                    let _ = write!(csv, "assist,{actor},,,,");
                } else if roll < 0.8 {
                    let p_to = if hot { 0.3 } else { 0.6 };
                    let kind = if rng.random_bool(p_to) { "turnover" } else { "rebound" };
                    let _ = write!(csv, "{kind},{actor},,,,");
                } else if roll < 0.9 {
                    let victim = &away[rng.random_range(0..5)];
                    let _ = write!(csv, "foul,{actor},{victim},,,");
                } else if roll < 0.95 {
                    let _ = write!(csv, "timeout,,,,,");
                } else {
                    let _ = write!(csv, "rebound,{},,,,", away[rng.random_range(0..5)]);
                }
                lineup(&mut csv);
            }
        }

        for (i, name) in roster.iter().enumerate() {
            if !rng.random_bool(cfg.interview_rate) {
                continue;
            }
            let id = format!("{}-{game}", ids[i]);
            let mut text = format!("@interview_id {id}\n@player {}\n@game {game}\n@date {date}\n", ids[i]);
            let n_pairs = rng.random_range(2..=4);
            for q in QUESTIONS.choose_multiple(&mut rng, n_pairs) {
                let _ = writeln!(text, "Q: {q}");
                let mut words: Vec<&str> = (0..rng.random_range(8..16))
                    .map(|_| *FILLER.choose(&mut rng).expect("nonempty"))
                    .collect();
                if rng.random_bool(cfg.signal) {
                    let pool = if form[i] { &HOT_WORDS } else { &COLD_WORDS };
                    let at = rng.random_range(0..=words.len());
                    words.insert(at, pool.choose(&mut rng).expect("nonempty"));
                }
                let _ = writeln!(text, "{name}: {}.", words.join(" "));
            }
            transcripts.push((format!("{id}.txt"), text));
        }
    }
    Season {
        pbp_csv: csv,
        column_map_toml: SEASON_COLUMN_MAP.to_owned(),
        transcripts,
    }
}

#[derive(Clone, Debug)]
pub struct PlantedConfig {
    pub n_players: usize,
    pub games_per_player: usize,
    pub filler_vocab: usize,
    pub doc_len: usize,
    /// Class words per document, all drawn from the same side.
    pub signal_tokens: usize,
    /// Probability that the class words agree with the label; this is the
    /// Bayes accuracy of the text.
    pub bayes: f64,
    /// Share of positive labels.
    pub positive_rate: f64,
    pub metric: Metric,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_players: 10,
            games_per_player: 60,
            filler_vocab: 300,
            doc_len: 40,
            signal_tokens: 4,
            bayes: 0.8,
            positive_rate: 0.4,
            metric: Metric::Pts,
        }
    }
}

/// Game-level examples whose documents hold `signal_tokens` label-bearing
/// words: from the label's class with probability `bayes`, otherwise from the
/// other class. Lag features are pure noise.
pub fn planted_signal(cfg: &PlantedConfig, seed: u64) -> ExperimentData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler: Vec<String> = (0..cfg.filler_vocab).map(|i| format!("w{i:04}")).collect();
    let class_words = [["gloomy", "doubt", "uneasy"], ["sharp", "eager", "fresh"]];
    let mut examples = Vec::new();
    let mut documents = BTreeMap::new();
    let mut players = Vec::new();
    for p in 0..cfg.n_players {
        let player = PlayerId::new(format!("p{p:02}"));
        players.push(player.clone());
        for g in 0..cfg.games_per_player {
            let label = u8::from(rng.random_bool(cfg.positive_rate));
            let side = if rng.random_bool(cfg.bayes) { label } else { 1 - label };
            let n_filler = cfg.doc_len.saturating_sub(cfg.signal_tokens);
            let mut tokens: Vec<String> = (0..n_filler)
                .map(|_| filler.choose(&mut rng).expect("nonempty").clone())
                .collect();
            for _ in 0..cfg.signal_tokens {
                let at = rng.random_range(0..=tokens.len());
                tokens.insert(
                    at,
                    class_words[side as usize]
                        .choose(&mut rng)
                        .expect("nonempty")
                        .to_string(),
                );
            }
            let id = InterviewId::new(format!("{player}-g{g:03}"));
            documents.insert(id.clone(), vec![tokens]);
            let mut lags = LagLabels::default();
            for row in lags.0.iter_mut() {
                for v in row.iter_mut().take(LAGS) {
                    *v = u8::from(rng.random_bool(0.5));
                }
            }
            examples.push(LabeledExample {
                player: player.clone(),
                unit: UnitKey::game(GameId::new(format!("g{g:03}"))),
                metric: cfg.metric,
                label,
                mode: Mode::Combined,
                text_ref: Some(id),
                lagged_labels: Some(lags),
            });
        }
    }
    ExperimentData {
        levels: vec![LevelData {
            level: Level::Game,
            examples,
            documents,
        }],
        players,
    }
}

#[derive(Clone, Debug)]
pub struct TopicCorpusConfig {
    pub n_topics: usize,
    pub words_per_topic: usize,
    pub n_docs: usize,
    pub doc_len: usize,
    /// Dirichlet concentration of each document's topic mixture.
    pub doc_alpha: f64,
    /// Zipf exponent of word frequencies inside a topic.
    pub zipf: f64,
}

impl Default for TopicCorpusConfig {
    fn default() -> Self {
        Self {
            n_topics: 5,
            words_per_topic: 10,
            n_docs: 500,
            doc_len: 100,
            doc_alpha: 0.1,
            zipf: 1.0,
        }
    }
}

/// Corpus drawn from topics with disjoint word supports.
#[derive(Clone, Debug)]
pub struct TopicCorpus {
    pub doc_ids: Vec<InterviewId>,
    pub documents: Vec<Document>,
    /// True word distribution of each topic, keyed by word.
    pub topics: Vec<BTreeMap<String, f64>>,
    pub thetas: Vec<Vec<f64>>,
}

pub fn topic_word(topic: usize, rank: usize) -> String {
    format!("t{topic}w{rank}")
}

pub fn topic_corpus(cfg: &TopicCorpusConfig, seed: u64) -> TopicCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=cfg.words_per_topic).map(|r| (r as f64).powf(-cfg.zipf)).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let topics: Vec<BTreeMap<String, f64>> = (0..cfg.n_topics)
        .map(|z| (0..cfg.words_per_topic).map(|r| (topic_word(z, r), probs[r])).collect())
        .collect();
    let gamma = Gamma::new(cfg.doc_alpha, 1.0).expect("positive concentration");
    let mut doc_ids = Vec::with_capacity(cfg.n_docs);
    let mut documents = Vec::with_capacity(cfg.n_docs);
    let mut thetas = Vec::with_capacity(cfg.n_docs);
    for d in 0..cfg.n_docs {
        // Dirichlet draw as normalized gammas
        let mut theta: Vec<f64> = (0..cfg.n_topics).map(|_| gamma.sample(&mut rng).max(1e-300)).collect();
        let sum: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|t| *t /= sum);
        let tokens: Vec<String> = (0..cfg.doc_len)
            .map(|_| {
                let z = draw(&mut rng, &theta);
                topic_word(z, draw(&mut rng, &probs))
            })
            .collect();
        doc_ids.push(InterviewId::new(format!("d{d:04}")));
        documents.push(vec![tokens]);
        thetas.push(theta);
    }
    TopicCorpus {
        doc_ids,
        documents,
        topics,
        thetas,
    }
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// `y_t = Σ coefs[j] y_{t-1-j} + ε_t`, ε ~ N(0, σ²), after a burn-in of 200
/// draws from a zero start.
pub fn ar_series(coefs: &[f64], sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let burn = 200;
    let mut ys: Vec<f64> = vec![0.0; coefs.len()];
    for _ in 0..n + burn {
        let t = ys.len();
        let mean: f64 = coefs.iter().enumerate().map(|(j, c)| c * ys[t - 1 - j]).sum();
        ys.push(mean + noise.sample(&mut rng));
    }
    ys.split_off(coefs.len() + burn)
}
