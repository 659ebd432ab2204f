//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_header, sha256_hex, write_header, write_jsonl};
use crate::models::Document;

/// Documents as token-id sequences over a lexicographically sorted vocabulary.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LdaCorpus {
    pub doc_ids: Vec<String>,
    pub vocab: Vec<String>,
    pub docs: Vec<Vec<u32>>,
}

impl LdaCorpus {
    pub fn from_documents(ids: Vec<String>, documents: &[Document]) -> Result<Self> {
        if ids.len() != documents.len() {
            return Err(Error::Arity {
                expected: documents.len(),
                got: ids.len(),
            });
        }
        let vocab: Vec<String> = documents
            .iter()
            .flatten()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, u32> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
        let docs = documents
            .iter()
            .map(|d| d.iter().flatten().map(|w| index[w.as_str()]).collect())
            .collect();
        Ok(Self {
            doc_ids: ids,
            vocab,
            docs,
        })
    }

    /// Builds a corpus from raw id sequences with an explicit vocabulary.
    pub fn from_ids(vocab: Vec<String>, docs: Vec<Vec<u32>>) -> Result<Self> {
        if let Some(&w) = docs.iter().flatten().find(|&&w| w as usize >= vocab.len()) {
            return Err(Error::Arity {
                expected: vocab.len(),
                got: w as usize + 1,
            });
        }
        Ok(Self {
            doc_ids: (0..docs.len()).map(|i| format!("d{i}")).collect(),
            vocab,
            docs,
        })
    }

    pub fn n_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    pub fn vocab_hash(&self) -> String {
        sha256_hex(self.vocab.join("\n").as_bytes())
    }

    /// Maps a document onto this vocabulary, dropping unknown words.
    pub fn encode(&self, doc: &Document) -> Vec<u32> {
        doc.iter()
            .flatten()
            .filter_map(|w| self.vocab.binary_search(w).ok().map(|i| i as u32))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    /// Document-topic prior; `None` means `50 / K`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Samples are averaged every `thin` sweeps after burn-in.
    pub thin: usize,
    pub fold_in_iterations: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            thin: 10,
            fold_in_iterations: 50,
        }
    }
}

impl LdaConfig {
    pub fn alpha_for(&self, k: usize) -> f64 {
        self.alpha.unwrap_or(50.0 / k as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub vocab: Vec<String>,
    pub vocab_hash: String,
    pub doc_ids: Vec<String>,
    /// φ: K rows over the vocabulary.
    pub topic_word: Vec<Vec<f64>>,
    /// θ: one row per training document.
    pub doc_topic: Vec<Vec<f64>>,
}

/// Collapsed Gibbs sampler state: one topic per token plus the count tables.
pub struct GibbsSampler<'a> {
    corpus: &'a LdaCorpus,
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    assignments: Vec<Vec<u16>>,
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
    doc_topic: Vec<u32>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(corpus: &'a LdaCorpus, k: usize, alpha: f64, beta: f64, seed: u64) -> Result<Self> {
        let v = corpus.vocab.len();
        if k < 2 || k > v {
            return Err(Error::InvalidParameter(format!(
                "topic count {k} must lie in [2, {v}] (vocabulary size)"
            )));
        }
        if k > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!("topic count {k} is too large")));
        }
        if corpus.docs.len() < k {
            return Err(Error::Insufficient(format!(
                "{} documents for {k} topics",
                corpus.docs.len()
            )));
        }
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidParameter("LDA priors must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self {
            corpus,
            k,
            v,
            alpha,
            beta,
            assignments: Vec::with_capacity(corpus.docs.len()),
            topic_word: vec![0; k * v],
            topic_total: vec![0; k],
            doc_topic: vec![0; corpus.docs.len() * k],
            rng: ChaCha8Rng::seed_from_u64(0),
            weights: vec![0.0; k],
        };
        for (d, doc) in corpus.docs.iter().enumerate() {
            let mut zs = Vec::with_capacity(doc.len());
            for &w in doc {
                let z = rng.random_range(0..k);
                s.topic_word[z * v + w as usize] += 1;
                s.topic_total[z] += 1;
                s.doc_topic[d * k + z] += 1;
                zs.push(z as u16);
            }
            s.assignments.push(zs);
        }
        s.rng = rng;
        Ok(s)
    }

    /// One pass over every token, resampling its topic from the full conditional.
    pub fn sweep(&mut self) {
        let (k, v) = (self.k, self.v);
        let vbeta = v as f64 * self.beta;
        let corpus = self.corpus;
        for (d, doc) in corpus.docs.iter().enumerate() {
            for (t, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = self.assignments[d][t] as usize;
                self.topic_word[old * v + w] -= 1;
                self.topic_total[old] -= 1;
                self.doc_topic[d * k + old] -= 1;

                let mut total = 0.0;
                for z in 0..k {
                    let p = (f64::from(self.doc_topic[d * k + z]) + self.alpha)
                        * (f64::from(self.topic_word[z * v + w]) + self.beta)
                        / (f64::from(self.topic_total[z]) + vbeta);
                    total += p;
                    self.weights[z] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.topic_word[new * v + w] += 1;
                self.topic_total[new] += 1;
                self.doc_topic[d * k + new] += 1;
                self.assignments[d][t] = new as u16;
            }
        }
    }

    /// Sum of the topic-word table; equals the corpus token count.
    pub fn topic_word_total(&self) -> u64 {
        self.topic_word.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn doc_topic_total(&self) -> u64 {
        self.doc_topic.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn topic_totals(&self) -> &[u32] {
        &self.topic_total
    }

    /// Current φ estimate from counts and prior.
    pub fn phi(&self) -> Vec<Vec<f64>> {
        let vbeta = self.v as f64 * self.beta;
        (0..self.k)
            .map(|z| {
                let denom = f64::from(self.topic_total[z]) + vbeta;
                (0..self.v)
                    .map(|w| (f64::from(self.topic_word[z * self.v + w]) + self.beta) / denom)
                    .collect()
            })
            .collect()
    }

    /// Current θ estimate from counts and prior.
    pub fn theta(&self) -> Vec<Vec<f64>> {
        let kalpha = self.k as f64 * self.alpha;
        self.corpus
            .docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                let denom = doc.len() as f64 + kalpha;
                (0..self.k)
                    .map(|z| (f64::from(self.doc_topic[d * self.k + z]) + self.alpha) / denom)
                    .collect()
            })
            .collect()
    }
}

fn normalize_rows(rows: &mut [Vec<f64>]) {
    for row in rows {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
}

fn accumulate(acc: &mut [Vec<f64>], rows: &[Vec<f64>]) {
    for (a, r) in acc.iter_mut().zip(rows) {
        a.iter_mut().zip(r).for_each(|(x, y)| *x += y);
    }
}

pub fn train_lda(corpus: &LdaCorpus, k: usize, cfg: &LdaConfig, seed: u64) -> Result<TopicModel> {
    if cfg.iterations == 0 || cfg.thin == 0 || cfg.burn_in >= cfg.iterations {
        return Err(Error::InvalidParameter("need iterations > burn_in and thin > 0".into()));
    }
    let alpha = cfg.alpha_for(k);
    let mut sampler = GibbsSampler::new(corpus, k, alpha, cfg.beta, seed)?;
    let mut phi = vec![vec![0.0; corpus.vocab.len()]; k];
    let mut theta = vec![vec![0.0; k]; corpus.docs.len()];
    for it in 1..=cfg.iterations {
        sampler.sweep();
        if it > cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
            accumulate(&mut phi, &sampler.phi());
            accumulate(&mut theta, &sampler.theta());
        }
    }
    if theta.first().is_some_and(|r| r.iter().all(|&x| x == 0.0)) {
        // fewer post-burn-in sweeps than the thinning interval
        phi = sampler.phi();
        theta = sampler.theta();
    }
    normalize_rows(&mut phi);
    normalize_rows(&mut theta);
    Ok(TopicModel {
        k,
        alpha,
        beta: cfg.beta,
        seed,
        n_iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        vocab: corpus.vocab.clone(),
        vocab_hash: corpus.vocab_hash(),
        doc_ids: corpus.doc_ids.clone(),
        topic_word: phi,
        doc_topic: theta,
    })
}

impl TopicModel {
    /// θ for unseen documents by Gibbs sampling with φ held fixed. The
    /// estimate averages the second half of the sweeps. Documents without
    /// known words get the uniform distribution.
    pub fn fold_in(&self, docs: &[Vec<u32>], iterations: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.k;
        let iterations = iterations.max(2);
        let mut weights = vec![0.0; k];
        docs.iter()
            .map(|doc| {
                if doc.is_empty() {
                    return vec![1.0 / k as f64; k];
                }
                let mut counts = vec![0u32; k];
                let mut zs: Vec<usize> = doc
                    .iter()
                    .map(|_| {
                        let z = rng.random_range(0..k);
                        counts[z] += 1;
                        z
                    })
                    .collect();
                let mut acc = vec![0.0; k];
                let denom = doc.len() as f64 + k as f64 * self.alpha;
                for it in 0..iterations {
                    for (t, &w) in doc.iter().enumerate() {
                        counts[zs[t]] -= 1;
                        let mut total = 0.0;
                        for z in 0..k {
                            total += (f64::from(counts[z]) + self.alpha) * self.topic_word[z][w as usize];
                            weights[z] = total;
                        }
                        let u = rng.random::<f64>() * total;
                        let new = weights.iter().position(|&c| u < c).unwrap_or(k - 1);
                        counts[new] += 1;
                        zs[t] = new;
                    }
                    if it >= iterations / 2 {
                        for z in 0..k {
                            acc[z] += (f64::from(counts[z]) + self.alpha) / denom;
                        }
                    }
                }
                let s: f64 = acc.iter().sum();
                acc.iter().map(|x| x / s).collect()
            })
            .collect()
    }

    pub fn check_vocabulary(&self, corpus: &LdaCorpus) -> Result<()> {
        let hash = corpus.vocab_hash();
        if hash != self.vocab_hash {
            return Err(Error::VocabularyMismatch(format!(
                "topic model vocabulary {} does not match corpus vocabulary {}",
                &self.vocab_hash[..12],
                &hash[..12]
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    n_iterations: usize,
    burn_in: usize,
    thin: usize,
    vocab_hash: String,
    n_docs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ModelLine {
    Vocab { vocab: Vec<String> },
    Topic { topic: usize, phi: Vec<f64> },
    Doc { doc: String, theta: Vec<f64> },
}

/// Text layout: a header line, one `{"vocab": [...]}` line, K `{"topic", "phi"}`
/// lines and one `{"doc", "theta"}` line per training document.
pub fn write_topic_model<W: Write>(out: W, model: &TopicModel) -> Result<()> {
    write_topic_model_with(out, model, None)
}

/// As [`write_topic_model`], with run metadata (config hash, seeds) stored
/// in the header under `run`.
pub fn write_topic_model_with<W: Write>(mut out: W, model: &TopicModel, run: Option<&serde_json::Value>) -> Result<()> {
    write_header(
        &mut out,
        &ModelHeader {
            k: model.k,
            alpha: model.alpha,
            beta: model.beta,
            seed: model.seed,
            n_iterations: model.n_iterations,
            burn_in: model.burn_in,
            thin: model.thin,
            vocab_hash: model.vocab_hash.clone(),
            n_docs: model.doc_topic.len(),
            run: run.cloned(),
        },
    )?;
    let mut lines = vec![ModelLine::Vocab {
        vocab: model.vocab.clone(),
    }];
    lines.extend(
        model
            .topic_word
            .iter()
            .enumerate()
            .map(|(topic, phi)| ModelLine::Topic {
                topic,
                phi: phi.clone(),
            }),
    );
    lines.extend(
        model
            .doc_ids
            .iter()
            .zip(&model.doc_topic)
            .map(|(doc, theta)| ModelLine::Doc {
                doc: doc.clone(),
                theta: theta.clone(),
            }),
    );
    write_jsonl(&mut out, &lines)
}

pub fn read_topic_model<R: BufRead>(mut input: R, path: &str) -> Result<TopicModel> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let header = read_header(text.as_bytes())?.ok_or_else(|| Error::Record {
        path: path.to_owned(),
        line: 1,
        reason: "missing topic-model header".into(),
    })?;
    let h: ModelHeader = serde_json::from_value(header)?;
    let lines: Vec<ModelLine> = crate::io::read_jsonl(text.as_bytes(), path)?;
    let mut model = TopicModel {
        k: h.k,
        alpha: h.alpha,
        beta: h.beta,
        seed: h.seed,
        n_iterations: h.n_iterations,
        burn_in: h.burn_in,
        thin: h.thin,
        vocab: Vec::new(),
        vocab_hash: h.vocab_hash,
        doc_ids: Vec::new(),
        topic_word: Vec::new(),
        doc_topic: Vec::new(),
    };
    for line in lines {
        match line {
            ModelLine::Vocab { vocab } => model.vocab = vocab,
            ModelLine::Topic { phi, .. } => model.topic_word.push(phi),
            ModelLine::Doc { doc, theta } => {
                model.doc_ids.push(doc);
                model.doc_topic.push(theta);
            }
        }
    }
    if model.topic_word.len() != model.k || model.doc_topic.len() != h.n_docs {
        return Err(Error::Record {
            path: path.to_owned(),
            line: 0,
            reason: "topic or document rows do not match the header".into(),
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LdaCorpus {
        let docs = vec![vec![0, 0, 1, 1], vec![2, 3, 3, 2], vec![0, 1, 0, 1, 0], vec![3, 2, 2]];
        LdaCorpus::from_ids(["a", "b", "c", "d"].map(String::from).to_vec(), docs).unwrap()
    }

    fn quick() -> LdaConfig {
        LdaConfig {
            iterations: 60,
            burn_in: 20,
            ..Default::default()
        }
    }

    #[test]
    fn rows_are_distributions_and_runs_repeat() {
        let c = tiny();
        let a = train_lda(&c, 2, &quick(), 4).unwrap();
        for row in a.topic_word.iter().chain(&a.doc_topic) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
        assert_eq!(a, train_lda(&c, 2, &quick(), 4).unwrap());
        assert_eq!(a.alpha, 25.0);
    }

    #[test]
    fn counts_are_conserved_every_sweep() {
        let c = tiny();
        let mut s = GibbsSampler::new(&c, 3, 0.5, 0.01, 1).unwrap();
        for _ in 0..50 {
            s.sweep();
            assert_eq!(s.topic_word_total(), c.n_tokens() as u64);
            assert_eq!(s.doc_topic_total(), c.n_tokens() as u64);
            assert_eq!(
                s.topic_totals().iter().map(|&x| u64::from(x)).sum::<u64>(),
                c.n_tokens() as u64
            );
        }
    }

    #[test]
    fn topic_count_bounds() {
        let c = tiny();
        assert!(train_lda(&c, 1, &quick(), 0).is_err());
        assert!(train_lda(&c, 5, &quick(), 0).is_err());
    }

    #[test]
    fn corpus_from_documents_sorts_vocabulary() {
        let docs = vec![
            vec![vec!["zeta".to_owned(), "alpha".to_owned()]],
            vec![vec!["beta".to_owned()]],
        ];
        let c = LdaCorpus::from_documents(vec!["x".into(), "y".into()], &docs).unwrap();
        assert_eq!(c.vocab, vec!["alpha", "beta", "zeta"]);
        assert_eq!(c.docs[0], vec![2, 0]);
        assert_eq!(c.encode(&vec![vec!["beta".to_owned(), "unknown".to_owned()]]), vec![1]);
    }

    #[test]
    fn fold_in_and_round_trip() {
        let c = tiny();
        let m = train_lda(&c, 2, &quick(), 9).unwrap();
        let th = m.fold_in(&[vec![0, 1, 0], vec![]], 50, 3);
        for row in &th {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(th[1], vec![0.5, 0.5]);
        let mut buf = Vec::new();
        write_topic_model(&mut buf, &m).unwrap();
        let back = read_topic_model(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, m);
        m.check_vocabulary(&c).unwrap();
        let other = LdaCorpus::from_ids(vec!["q".into(), "r".into()], vec![vec![0, 1]]).unwrap();
        assert!(matches!(m.check_vocabulary(&other), Err(Error::VocabularyMismatch(_))));
    }
}
