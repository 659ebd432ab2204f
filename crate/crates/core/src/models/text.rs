//! Bag-of-words and TF-IDF feature vectors over tokenized interviews.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::sha256_hex;

/// A tokenized document: sentences of tokens.
pub type Document = Vec<Vec<String>>;

/// Sparse vector with strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn from_map(map: BTreeMap<u32, f64>) -> Self {
        let (indices, values) = map.into_iter().filter(|(_, v)| *v != 0.0).unzip();
        Self { indices, values }
    }

    pub fn from_dense(xs: &[f64]) -> Self {
        let (indices, values) = xs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        Self { indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, v)| v * dense[i as usize])
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn max_index(&self) -> Option<u32> {
        self.indices.last().copied()
    }
}

/// Term → index map with document frequencies. Indices follow the
/// lexicographic order of terms, so the vocabulary does not depend on the
/// order documents were seen in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub df: Vec<u32>,
    pub n_docs: u32,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_df(df_map: BTreeMap<String, u32>, n_docs: u32) -> Self {
        let (terms, df): (Vec<String>, Vec<u32>) = df_map.into_iter().unzip();
        let mut v = Self {
            terms,
            df,
            n_docs,
            index: HashMap::new(),
        };
        v.reindex();
        v
    }

    /// Rebuilds the lookup table (needed after deserialization).
    pub fn reindex(&mut self) {
        self.index = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.terms.join("\n").as_bytes())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramRange {
    pub min: usize,
    pub max: usize,
}

impl NgramRange {
    pub const UNIGRAMS: NgramRange = NgramRange { min: 1, max: 1 };
    pub const UNI_BI: NgramRange = NgramRange { min: 1, max: 2 };
}

/// N-grams of adjacent tokens, never crossing a sentence boundary.
pub fn ngrams(doc: &Document, range: NgramRange) -> Vec<String> {
    let mut out = Vec::new();
    for sentence in doc {
        for n in range.min..=range.max {
            if n == 0 || sentence.len() < n {
                continue;
            }
            out.extend(sentence.windows(n).map(|w| w.join(" ")));
        }
    }
    out
}

fn fit_vocabulary(corpus: &[Document], range: NgramRange) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for doc in corpus {
        let mut terms = ngrams(doc, range);
        terms.sort_unstable();
        terms.dedup();
        for t in terms {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Vocabulary::from_df(df, corpus.len() as u32))
}

fn term_counts(vocab: &Vocabulary, doc: &Document, range: NgramRange) -> BTreeMap<u32, f64> {
    let mut counts = BTreeMap::new();
    for t in ngrams(doc, range) {
        if let Some(i) = vocab.get(&t) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// Raw unigram counts over the training vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowVectorizer {
    pub vocabulary: Vocabulary,
    pub ngrams: NgramRange,
}

impl BowVectorizer {
    pub fn fit(corpus: &[Document]) -> Result<Self> {
        Ok(Self {
            vocabulary: fit_vocabulary(corpus, NgramRange::UNIGRAMS)?,
            ngrams: NgramRange::UNIGRAMS,
        })
    }

    pub fn transform(&self, doc: &Document) -> SparseVector {
        SparseVector::from_map(term_counts(&self.vocabulary, doc, self.ngrams))
    }
}

/// `tf · (ln((1 + N) / (1 + df)) + 1)`, L2-normalized per document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    pub vocabulary: Vocabulary,
    pub ngrams: NgramRange,
    pub idf: Vec<f64>,
}

impl TfidfVectorizer {
    pub fn fit(corpus: &[Document]) -> Result<Self> {
        Self::fit_with(corpus, NgramRange::UNI_BI)
    }

    pub fn fit_with(corpus: &[Document], ngrams: NgramRange) -> Result<Self> {
        let vocabulary = fit_vocabulary(corpus, ngrams)?;
        let n = f64::from(vocabulary.n_docs);
        let idf = vocabulary
            .df
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + f64::from(df))).ln() + 1.0)
            .collect();
        Ok(Self {
            vocabulary,
            ngrams,
            idf,
        })
    }

    pub fn transform(&self, doc: &Document) -> SparseVector {
        let mut weights = term_counts(&self.vocabulary, doc, self.ngrams);
        for (i, w) in weights.iter_mut() {
            *w *= self.idf[*i as usize];
        }
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            weights.values_mut().for_each(|w| *w /= norm);
        }
        SparseVector::from_map(weights)
    }
}

pub fn build_bow(corpus: &[Document]) -> Result<(BowVectorizer, Vec<SparseVector>)> {
    let v = BowVectorizer::fit(corpus)?;
    let rows = corpus.iter().map(|d| v.transform(d)).collect();
    Ok((v, rows))
}

pub fn build_tfidf(corpus: &[Document]) -> Result<(TfidfVectorizer, Vec<SparseVector>)> {
    let v = TfidfVectorizer::fit(corpus)?;
    let rows = corpus.iter().map(|d| v.transform(d)).collect();
    Ok((v, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn doc(text: &str) -> Document {
        text.split(" | ")
            .map(|s| s.split_whitespace().map(str::to_owned).collect())
            .collect()
    }

    #[test]
    fn bow_counts() {
        let corpus = vec![doc("win win game"), doc("lose game")];
        let (v, rows) = build_bow(&corpus).unwrap();
        assert_eq!(v.vocabulary.len(), 3);
        let win = v.vocabulary.get("win").unwrap();
        let game = v.vocabulary.get("game").unwrap();
        assert_eq!(rows[0].get(win), 2.0);
        assert_eq!(rows[0].get(game), 1.0);
        assert_eq!(rows[0].nnz(), 2);
        assert_eq!(v.transform(&doc("unseen words only")).nnz(), 0);
        assert!(build_bow(&[]).is_err());
    }

    #[test]
    fn bigrams_stay_inside_sentences() {
        let grams = ngrams(&doc("a b | c"), NgramRange::UNI_BI);
        assert_eq!(grams, vec!["a", "b", "a b", "c"]);
    }

    #[test]
    fn tfidf_single_term_and_full_df() {
        let corpus = vec![doc("team"), doc("team win"), doc("team lose")];
        let (v, rows) = build_tfidf(&corpus).unwrap();
        let team = v.vocabulary.get("team").unwrap();
        assert_eq!(v.idf[team as usize], 1.0);
        assert_eq!(rows[0].get(team), 1.0);
        for r in &rows {
            assert!((r.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tfidf_hand_computed_fixture() {
        // N = 3 documents; hand-derived weights before normalization:
        // doc0 "a a b": a: tf 2, df 2 -> 2*(ln(4/3)+1); b: tf 1, df 1 -> ln(2)+1; "a a": df 1 -> ln 2 + 1;
        // "a b": df 1 -> ln 2 + 1.
        let corpus = vec![doc("a a b"), doc("a c"), doc("c")];
        let (v, rows) = build_tfidf(&corpus).unwrap();
        let w_a = 2.0 * ((4.0f64 / 3.0).ln() + 1.0);
        let w_rare = 2.0f64.ln() + 1.0;
        let norm = (w_a * w_a + 3.0 * w_rare * w_rare).sqrt();
        let get = |d: usize, t: &str| rows[d].get(v.vocabulary.get(t).unwrap());
        assert!((get(0, "a") - w_a / norm).abs() < 1e-12);
        assert!((get(0, "b") - w_rare / norm).abs() < 1e-12);
        assert!((get(0, "a a") - w_rare / norm).abs() < 1e-12);
        assert!((get(0, "a b") - w_rare / norm).abs() < 1e-12);
        // doc2 "c": only one term
        assert_eq!(get(2, "c"), 1.0);
        assert_eq!(rows[2].nnz(), 1);
    }

    #[test]
    fn vocabulary_is_order_independent() {
        let a = build_tfidf(&[doc("x y"), doc("z")]).unwrap().0;
        let b = build_tfidf(&[doc("z"), doc("x y")]).unwrap().0;
        assert_eq!(a.vocabulary.terms, b.vocabulary.terms);
        assert_eq!(a.vocabulary.hash(), b.vocabulary.hash());
    }
}
