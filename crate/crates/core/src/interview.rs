//! Pre-game interview transcripts: Q-A parsing, merging, tokenization and
//! corpus statistics.
//!
//! A transcript file starts with `@key value` header lines giving the
//! interview id, player id and game id, followed by speaker turns:
//!
//! ```text
//! @interview_id I0001
//! @player pl7
//! @game G12
//! Q: How do you feel going into tonight?
//! LEBRON JAMES: Good. We're ready.
//! ```
//!
//! Lines that match neither speaker marker continue the current turn.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{GameId, InterviewId, PlayerId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interview {
    pub interview_id: InterviewId,
    pub player: PlayerId,
    pub game_id: GameId,
    pub qa_pairs: Vec<QaPair>,
    pub sentences: Vec<Vec<String>>,
    pub token_count: usize,
}

impl Interview {
    /// Builds an interview, tokenizing questions and answers in order.
    pub fn new(interview_id: InterviewId, player: PlayerId, game_id: GameId, qa_pairs: Vec<QaPair>) -> Result<Self> {
        if qa_pairs.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "interview {interview_id} has no Q-A pairs"
            )));
        }
        let sentences: Vec<Vec<String>> = qa_pairs
            .iter()
            .flat_map(|qa| tokenize(&qa.question).into_iter().chain(tokenize(&qa.answer)))
            .collect();
        let token_count = sentences.iter().map(Vec::len).sum();
        Ok(Self {
            interview_id,
            player,
            game_id,
            qa_pairs,
            sentences,
            token_count,
        })
    }

    /// Sentences used as model input; questions can be left out.
    pub fn text_sentences(&self, include_questions: bool) -> Vec<Vec<String>> {
        if include_questions {
            self.sentences.clone()
        } else {
            self.qa_pairs.iter().flat_map(|qa| tokenize(&qa.answer)).collect()
        }
    }
}

/// Speaker-label patterns. Both are anchored at line start; the matched
/// prefix is stripped from the turn text.
#[derive(Clone, Debug)]
pub struct Markers {
    pub question: Regex,
    pub answer: Regex,
}

pub const DEFAULT_QUESTION_PATTERN: &str = r"^\s*Q[.:]\s*";
pub const DEFAULT_ANSWER_PATTERN: &str = r"^\s*[A-Z][A-Z.'\- ]*[A-Z.]:\s*";

impl Markers {
    pub fn new(question: &str, answer: &str) -> Result<Self> {
        let compile = |p: &str| Regex::new(p).map_err(|e| Error::Config(format!("bad marker pattern `{p}`: {e}")));
        Ok(Self {
            question: compile(question)?,
            answer: compile(answer)?,
        })
    }
}

impl Default for Markers {
    fn default() -> Self {
        Self::new(DEFAULT_QUESTION_PATTERN, DEFAULT_ANSWER_PATTERN).expect("default patterns compile")
    }
}

#[derive(Clone, Debug)]
pub struct ParsedInterview {
    pub interview: Interview,
    /// Questions with no answer before the next question (or the end).
    pub dropped_questions: usize,
    /// Answer turns with no preceding question.
    pub orphan_answers: usize,
    pub game_date: Option<String>,
}

enum Turn {
    Question(String),
    Answer(String),
}

pub fn parse_interview(raw: &str, markers: &Markers) -> Result<ParsedInterview> {
    let mut headers: BTreeMap<String, String> = BTreeMap::new();
    let mut turns: Vec<Turn> = Vec::new();

    for line in raw.lines() {
        let trimmed = line.trim();
        if turns.is_empty() {
            if let Some(h) = trimmed.strip_prefix('@') {
                let (k, v) = h.split_once(char::is_whitespace).unwrap_or((h, ""));
                headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_owned());
                continue;
            }
        }
        if let Some(m) = markers.question.find(line) {
            turns.push(Turn::Question(line[m.end()..].trim().to_owned()));
        } else if let Some(m) = markers.answer.find(line) {
            turns.push(Turn::Answer(line[m.end()..].trim().to_owned()));
        } else if !trimmed.is_empty() {
            match turns.last_mut() {
                Some(Turn::Question(t)) | Some(Turn::Answer(t)) => {
                    if !t.is_empty() {
                        t.push(' ');
                    }
                    t.push_str(trimmed);
                }
                None => {}
            }
        }
    }
    if turns.is_empty() {
        return Err(Error::NoMarkers);
    }

    let mut pairs: Vec<QaPair> = Vec::new();
    let mut pending: Option<String> = None;
    let mut dropped_questions = 0;
    let mut orphan_answers = 0;
    let mut last_was_answer = false;
    for turn in turns {
        match turn {
            Turn::Question(q) => {
                if pending.replace(q).is_some() {
                    dropped_questions += 1;
                }
                last_was_answer = false;
            }
            Turn::Answer(a) => match pending.take() {
                Some(q) => {
                    pairs.push(QaPair { question: q, answer: a });
                    last_was_answer = true;
                }
                // consecutive answer turns extend the previous answer
                None if last_was_answer => {
                    let prev = &mut pairs.last_mut().expect("previous pair").answer;
                    prev.push(' ');
                    prev.push_str(&a);
                }
                None => orphan_answers += 1,
            },
        }
    }
    if pending.is_some() {
        dropped_questions += 1;
    }
    if pairs.is_empty() {
        return Err(Error::NoMarkers);
    }

    let header = |k: &'static str| {
        headers
            .get(k)
            .filter(|v| !v.is_empty())
            .cloned()
            .ok_or(Error::MissingHeader(k))
    };
    let interview = Interview::new(
        InterviewId::new(header("interview_id")?),
        PlayerId::new(header("player")?),
        GameId::new(header("game")?),
        pairs,
    )?;
    Ok(ParsedInterview {
        interview,
        dropped_questions,
        orphan_answers,
        game_date: headers.get("date").cloned(),
    })
}

/// Concatenates two interviews given by the same player before the same game.
pub fn merge_consecutive(a: &Interview, b: &Interview) -> Result<Interview> {
    if a.player != b.player {
        return Err(Error::Merge(format!("players differ: {} vs {}", a.player, b.player)));
    }
    if a.game_id != b.game_id {
        return Err(Error::Merge(format!("games differ: {} vs {}", a.game_id, b.game_id)));
    }
    if a.qa_pairs.is_empty() || b.qa_pairs.is_empty() {
        return Err(Error::Merge("interview without Q-A pairs".into()));
    }
    let mut qa_pairs = a.qa_pairs.clone();
    qa_pairs.extend(b.qa_pairs.iter().cloned());
    let mut sentences = a.sentences.clone();
    sentences.extend(b.sentences.iter().cloned());
    Ok(Interview {
        interview_id: a.interview_id.clone(),
        player: a.player.clone(),
        game_id: a.game_id.clone(),
        qa_pairs,
        sentences,
        token_count: a.token_count + b.token_count,
    })
}

/// Merges every run of interviews sharing (player, game). Input order is
/// kept within a group; groups come out in order of first appearance.
pub fn merge_all(interviews: Vec<Interview>) -> Result<Vec<Interview>> {
    let mut out: Vec<Interview> = Vec::new();
    let mut slot: BTreeMap<(PlayerId, GameId), usize> = BTreeMap::new();
    for iv in interviews {
        let key = (iv.player.clone(), iv.game_id.clone());
        match slot.get(&key) {
            Some(&i) => out[i] = merge_consecutive(&out[i], &iv)?,
            None => {
                slot.insert(key, out.len());
                out.push(iv);
            }
        }
    }
    Ok(out)
}

fn is_joiner(c: char) -> bool {
    c == '\'' || c == '-'
}

fn clean_token(raw: &str) -> String {
    let kept: String = raw
        .chars()
        .map(|c| if c == '\u{2019}' || c == '\u{2018}' { '\'' } else { c })
        .filter(|c| c.is_alphanumeric() || is_joiner(*c))
        .flat_map(char::to_lowercase)
        .collect();
    // keep a joiner only when it is a single character between two word characters
    let chars: Vec<char> = kept.chars().collect();
    let mut out = String::with_capacity(kept.len());
    let mut i = 0;
    while i < chars.len() {
        if is_joiner(chars[i]) {
            let start = i;
            while i < chars.len() && is_joiner(chars[i]) {
                i += 1;
            }
            if i - start == 1 && start > 0 && i < chars.len() {
                out.push(chars[start]);
            }
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

/// Splits text into sentences on `.`, `!` or `?` followed by whitespace (or
/// the end), then into lowercase tokens. Punctuation is stripped except
/// apostrophes and hyphens inside a word.
pub fn tokenize(text: &str) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut current: Vec<String> = Vec::new();
    for word in text.split_whitespace() {
        let ends_sentence = word.ends_with(['.', '!', '?']);
        let tok = clean_token(word);
        if !tok.is_empty() {
            current.push(tok);
        }
        if ends_sentence && !current.is_empty() {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

/// Tokenizer rules, recorded in artifact headers.
pub const TOKENIZER_RULES: &str = "sentences split at [.!?] followed by whitespace; tokens lowercased; \
     non-alphanumeric characters removed except single apostrophes/hyphens between word characters; \
     no stopword removal";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlayerStats {
    pub n_interviews: usize,
    pub avg_qa_pairs: f64,
    pub avg_sentences: f64,
    pub avg_words: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_player: BTreeMap<PlayerId, PlayerStats>,
    pub n_interviews: usize,
    pub n_players: usize,
    pub total_qa_pairs: usize,
    pub total_sentences: usize,
    pub total_tokens: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub avg_qa_pairs: f64,
    pub avg_sentences: f64,
    pub avg_words: f64,
}

pub fn corpus_stats(interviews: &[Interview]) -> Result<CorpusStats> {
    if interviews.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    #[derive(Default)]
    struct Acc {
        n: usize,
        qa: usize,
        sent: usize,
        tok: usize,
    }
    let mut acc: BTreeMap<PlayerId, Acc> = BTreeMap::new();
    for iv in interviews {
        let a = acc.entry(iv.player.clone()).or_default();
        a.n += 1;
        a.qa += iv.qa_pairs.len();
        a.sent += iv.sentences.len();
        a.tok += iv.token_count;
    }
    let avg = |x: usize, n: usize| x as f64 / n as f64;
    let n = interviews.len();
    let total_qa_pairs = acc.values().map(|a| a.qa).sum();
    let total_sentences = acc.values().map(|a| a.sent).sum();
    let total_tokens = acc.values().map(|a| a.tok).sum();
    Ok(CorpusStats {
        n_players: acc.len(),
        per_player: acc
            .into_iter()
            .map(|(p, a)| {
                (
                    p,
                    PlayerStats {
                        n_interviews: a.n,
                        avg_qa_pairs: avg(a.qa, a.n),
                        avg_sentences: avg(a.sent, a.n),
                        avg_words: avg(a.tok, a.n),
                    },
                )
            })
            .collect(),
        n_interviews: n,
        total_qa_pairs,
        total_sentences,
        total_tokens,
        min_sentences: interviews.iter().map(|i| i.sentences.len()).min().unwrap_or(0),
        max_sentences: interviews.iter().map(|i| i.sentences.len()).max().unwrap_or(0),
        avg_qa_pairs: avg(total_qa_pairs, n),
        avg_sentences: avg(total_sentences, n),
        avg_words: avg(total_tokens, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "@interview_id I1\n@player pl7\n@game G1\n";

    fn parse(body: &str) -> Result<ParsedInterview> {
        parse_interview(&format!("{HEADER}{body}"), &Markers::default())
    }

    fn toks(s: &[&[&str]]) -> Vec<Vec<String>> {
        s.iter().map(|x| x.iter().map(|t| t.to_string()).collect()).collect()
    }

    #[test]
    fn single_pair() {
        let p = parse("Q: How are you?\nLEBRON JAMES: Fine.\n").unwrap();
        assert_eq!(p.interview.qa_pairs.len(), 1);
        assert_eq!(p.interview.player, PlayerId::new("pl7"));
        assert_eq!(p.interview.game_id, GameId::new("G1"));
        assert_eq!(p.dropped_questions, 0);
    }

    #[test]
    fn unanswered_question_is_dropped() {
        let p = parse("Q: First?\nQ: Second?\nLEBRON JAMES: Answer.\n").unwrap();
        assert_eq!(p.interview.qa_pairs.len(), 1);
        assert_eq!(p.interview.qa_pairs[0].question, "Second?");
        assert_eq!(p.dropped_questions, 1);
    }

    #[test]
    fn three_pairs_in_order_with_continuations() {
        let body = "Q: One?\nK. LEONARD: A1 starts\nand continues.\nQ: Two?\nK. LEONARD: A2.\n\
                    Q: Three?\nK. LEONARD: A3.\nK. LEONARD: More of A3.\n";
        let p = parse(body).unwrap();
        let pairs: Vec<(&str, &str)> = p
            .interview
            .qa_pairs
            .iter()
            .map(|qa| (qa.question.as_str(), qa.answer.as_str()))
            .collect();
        assert_eq!(
            pairs,
            vec![
                ("One?", "A1 starts and continues."),
                ("Two?", "A2."),
                ("Three?", "A3. More of A3."),
            ]
        );
    }

    #[test]
    fn no_markers_is_an_error() {
        assert!(matches!(parse("just some prose\n"), Err(Error::NoMarkers)));
        assert!(matches!(
            parse_interview("Q: a?\nLEBRON JAMES: b.\n", &Markers::default()),
            Err(Error::MissingHeader("interview_id"))
        ));
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("We won. It's great!"),
            toks(&[&["we", "won"], &["it's", "great"]])
        );
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("Well -- it's a \"well-known\" fact... Right?! 'Cause we're U.S.A.-based."),
            toks(&[
                &["well", "it's", "a", "well-known", "fact"],
                &["right"],
                &["cause", "we're", "usa-based"]
            ])
        );
        assert_eq!(
            tokenize("Game 6 in Toronto, and that's it"),
            toks(&[&["game", "6", "in", "toronto", "and", "that's", "it"]])
        );
    }

    #[test]
    fn merge_concatenates() {
        let a = parse("Q: a?\nLEBRON JAMES: b.\nQ: c?\nLEBRON JAMES: d.\n")
            .unwrap()
            .interview;
        let b = parse("Q: e?\nLEBRON JAMES: f g.\nQ: h?\nLEBRON JAMES: i.\nQ: j?\nLEBRON JAMES: k.\n")
            .unwrap()
            .interview;
        let m = merge_consecutive(&a, &b).unwrap();
        assert_eq!(m.qa_pairs.len(), 5);
        assert_eq!(m.token_count, a.token_count + b.token_count);
        assert_eq!(m.token_count, m.sentences.iter().map(Vec::len).sum::<usize>());

        let mut empty = b.clone();
        empty.qa_pairs.clear();
        assert!(merge_consecutive(&a, &empty).is_err());
        let mut other = b.clone();
        other.player = PlayerId::new("someone");
        assert!(merge_consecutive(&a, &other).is_err());
    }

    #[test]
    fn stats_average_sentences() {
        let a = parse("Q: a?\nLEBRON JAMES: b.\n").unwrap().interview;
        let b = parse("Q: a?\nLEBRON JAMES: b. c. d.\n").unwrap().interview;
        assert_eq!(a.sentences.len(), 2);
        assert_eq!(b.sentences.len(), 4);
        let s = corpus_stats(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.avg_sentences, 3.0);
        assert_eq!(s.n_interviews, 2);
        assert_eq!(s.n_players, 1);
        assert_eq!(s.total_tokens, a.token_count + b.token_count);
        assert_eq!((s.min_sentences, s.max_sentences), (2, 4));
        assert!(corpus_stats(&[]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tokenize_is_idempotent(text in "[a-zA-Z'\\-.,!? \n\u{2019}]{0,120}") {
                let first: Vec<String> = tokenize(&text).concat();
                let again: Vec<String> = tokenize(&first.join(" ")).concat();
                prop_assert_eq!(&again, &first);
                prop_assert_eq!(tokenize(&text), tokenize(&text));
                prop_assert!(tokenize(&text).iter().all(|s| !s.is_empty()));
            }

            #[test]
            fn merge_is_associative(sizes in proptest::collection::vec(1usize..4, 3)) {
                let mk = |n: usize, tag: usize| {
                    let body: String = (0..n).map(|i| format!("Q: q{tag}{i}?\nLEBRON JAMES: a{tag} {i}.\n")).collect();
                    parse(&body).unwrap().interview
                };
                let (a, b, c) = (mk(sizes[0], 0), mk(sizes[1], 1), mk(sizes[2], 2));
                let left = merge_consecutive(&merge_consecutive(&a, &b).unwrap(), &c).unwrap();
                let right = merge_consecutive(&a, &merge_consecutive(&b, &c).unwrap()).unwrap();
                prop_assert_eq!(left, right);
            }
        }
    }
}
