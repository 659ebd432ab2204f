//! NPMI topic coherence and coherence-driven choice of the topic count.
//!
//! For top words `w_i, w_j` of a topic, with document frequencies over the
//! training corpus of `N` documents:
//! `NPMI = ln((P(i,j) + ε) / (P(i) P(j))) / −ln(P(i,j) + ε)`, `ε = 1e-12`.
//! A pair present in every document scores 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::top_word_ids;
use super::lda::{train_lda, LdaConfig, LdaCorpus, TopicModel};
use crate::error::{Error, Result};

pub const EPSILON: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// Sorted ids of the documents containing each word.
fn postings(corpus: &LdaCorpus) -> Vec<Vec<u32>> {
    let mut post = vec![Vec::new(); corpus.vocab.len()];
    for (d, doc) in corpus.docs.iter().enumerate() {
        for &w in doc {
            let list = &mut post[w as usize];
            if list.last() != Some(&(d as u32)) {
                list.push(d as u32);
            }
        }
    }
    post
}

fn intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// NPMI from document counts.
pub fn npmi(n_docs: usize, df_i: usize, df_j: usize, df_ij: usize) -> f64 {
    let n = n_docs as f64;
    let (pi, pj, pij) = (df_i as f64 / n, df_j as f64 / n, df_ij as f64 / n);
    if df_ij == n_docs {
        return 1.0;
    }
    if df_i == 0 || df_j == 0 {
        return 0.0;
    }
    let joint = pij + EPSILON;
    (joint / (pi * pj)).ln() / -joint.ln()
}

fn word_set_coherence(n_docs: usize, post: &[Vec<u32>], words: &[u32]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (a, &wi) in words.iter().enumerate() {
        for &wj in &words[a + 1..] {
            let (pi, pj) = (&post[wi as usize], &post[wj as usize]);
            sum += npmi(n_docs, pi.len(), pj.len(), intersection_len(pi, pj));
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// Mean pairwise NPMI of each topic's `top_n` words.
pub fn coherence(model: &TopicModel, corpus: &LdaCorpus, top_n: usize) -> Result<Coherence> {
    model.check_vocabulary(corpus)?;
    if top_n > corpus.vocab.len() || top_n == 0 {
        return Err(Error::InvalidParameter(format!(
            "top_n {top_n} must lie in [1, {}]",
            corpus.vocab.len()
        )));
    }
    if corpus.docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let post = postings(corpus);
    let per_topic: Vec<f64> = (0..model.k)
        .map(|z| {
            let words = top_word_ids(model, z, top_n)?;
            Ok(word_set_coherence(corpus.docs.len(), &post, &words))
        })
        .collect::<Result<_>>()?;
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(Coherence { per_topic, mean })
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub k: usize,
    /// (K, mean coherence) for every grid value, in grid order.
    pub scores: Vec<(usize, f64)>,
    pub model: TopicModel,
}

/// Trains one model per K (concurrently) and keeps the most coherent;
/// ties go to the smaller K.
pub fn select_k(corpus: &LdaCorpus, grid: &[usize], cfg: &LdaConfig, seed: u64, top_n: usize) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty topic-count grid".into()));
    }
    let mut fitted: Vec<(usize, f64, TopicModel)> = grid
        .par_iter()
        .map(|&k| {
            let m = train_lda(corpus, k, cfg, seed)?;
            let c = coherence(&m, corpus, top_n.min(corpus.vocab.len()))?;
            Ok((k, c.mean, m))
        })
        .collect::<Result<_>>()?;
    let scores = fitted.iter().map(|(k, c, _)| (*k, *c)).collect();
    let best = (0..fitted.len())
        .max_by(|&a, &b| {
            fitted[a]
                .1
                .total_cmp(&fitted[b].1)
                .then_with(|| fitted[b].0.cmp(&fitted[a].0))
        })
        .expect("nonempty grid");
    let (k, _, model) = fitted.swap_remove(best);
    Ok(Selection { k, scores, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn always_together_is_one_and_never_together_is_negative() {
        assert_eq!(npmi(10, 10, 10, 10), 1.0);
        assert!((npmi(10, 4, 4, 4) - 1.0).abs() < 1e-9);
        assert!(npmi(10, 4, 4, 0) < 0.0);
        assert!((npmi(10, 5, 5, 0) + 1.0).abs() < 0.1);
    }

    #[test]
    fn four_document_fixture_matches_brute_force() {
        let vocab: Vec<String> = ["a", "b", "c", "d"].map(String::from).to_vec();
        let docs = vec![vec![0, 1, 1], vec![0, 2], vec![1, 2, 3], vec![0, 1, 3, 3]];
        let corpus = LdaCorpus::from_ids(vocab.clone(), docs.clone()).unwrap();
        let model = TopicModel {
            k: 2,
            alpha: 1.0,
            beta: 0.01,
            seed: 0,
            n_iterations: 0,
            burn_in: 0,
            thin: 1,
            vocab_hash: corpus.vocab_hash(),
            vocab,
            doc_ids: corpus.doc_ids.clone(),
            topic_word: vec![vec![0.4, 0.3, 0.2, 0.1], vec![0.1, 0.2, 0.3, 0.4]],
            doc_topic: vec![vec![0.5, 0.5]; 4],
        };
        // brute force: document sets per word, probability ratios straight from the definition
        let sets: Vec<BTreeSet<u32>> = docs.iter().map(|d| d.iter().copied().collect()).collect();
        let p = |ws: &[u32]| sets.iter().filter(|s| ws.iter().all(|w| s.contains(w))).count() as f64 / 4.0;
        let pair = |i: u32, j: u32| {
            let joint = p(&[i, j]) + 1e-12;
            (joint / (p(&[i]) * p(&[j]))).ln() / -joint.ln()
        };
        let oracle = |ws: [u32; 3]| (pair(ws[0], ws[1]) + pair(ws[0], ws[2]) + pair(ws[1], ws[2])) / 3.0;
        let c = coherence(&model, &corpus, 3).unwrap();
        assert!((c.per_topic[0] - oracle([0, 1, 2])).abs() < 1e-12);
        assert!((c.per_topic[1] - oracle([3, 2, 1])).abs() < 1e-12);
        assert!((c.mean - (c.per_topic[0] + c.per_topic[1]) / 2.0).abs() < 1e-15);
        assert!(coherence(&model, &corpus, 5).is_err());
    }

    #[test]
    fn singleton_grid() {
        let docs = vec![vec![0, 1], vec![2, 3], vec![0, 1], vec![2, 3]];
        let corpus = LdaCorpus::from_ids(["a", "b", "c", "d"].map(String::from).to_vec(), docs).unwrap();
        let cfg = LdaConfig {
            iterations: 30,
            burn_in: 10,
            ..Default::default()
        };
        let s = select_k(&corpus, &[2], &cfg, 1, 2).unwrap();
        assert_eq!(s.k, 2);
        assert!(select_k(&corpus, &[], &cfg, 1, 2).is_err());
    }
}
