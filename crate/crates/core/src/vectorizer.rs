//! TF-IDF features over tokenized narratives.

use crate::textprep::TokenizedDoc;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

const MODEL_HEADER: &str = "tfidf-model v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorizerConfig {
    pub min_df: u64,
    /// Adds adjacent-token bigrams joined with `_`.
    pub bigrams: bool,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        VectorizerConfig { min_df: 2, bigrams: false }
    }
}

/// Sparse row with strictly increasing column indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector { indices: Vec::new(), values: Vec::new(), dim }
    }

    /// Builds from unsorted `(index, value)` pairs, summing duplicates and
    /// dropping zeros.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, v) in pairs {
            if i as usize >= dim {
                return Err(Error::DimensionMismatch { expected: dim, got: i as usize + 1 });
            }
            *acc.entry(i).or_insert(0.0) += v;
        }
        let (indices, values) = acc.into_iter().filter(|&(_, v)| v != 0.0).unzip();
        Ok(SparseVector { indices, values, dim })
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().zip(&self.values).map(|(&i, &v)| (i as usize, v))
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    terms: Vec<String>,
    df: Vec<u64>,
    idf: Vec<f64>,
    n_docs: u64,
    config: VectorizerConfig,
    index: HashMap<String, usize>,
}

fn features(doc: &TokenizedDoc, bigrams: bool) -> Vec<String> {
    let mut out = doc.tokens.clone();
    if bigrams {
        out.extend(doc.tokens.windows(2).map(|w| format!("{}_{}", w[0], w[1])));
    }
    out
}

/// Smoothed inverse document frequency.
pub fn smoothed_idf(n_docs: u64, df: u64) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl TfidfModel {
    pub fn fit(corpus: &[TokenizedDoc], config: VectorizerConfig) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::InvalidArgument("cannot fit TF-IDF on an empty corpus".into()));
        }
        if config.min_df < 1 {
            return Err(Error::InvalidArgument("min_df must be at least 1".into()));
        }
        let counts: HashMap<String, u64> = corpus
            .par_iter()
            .fold(HashMap::new, |mut acc: HashMap<String, u64>, doc| {
                let distinct: HashSet<String> = features(doc, config.bigrams).into_iter().collect();
                for t in distinct {
                    *acc.entry(t).or_insert(0) += 1;
                }
                acc
            })
            .reduce(HashMap::new, |mut a, b| {
                for (t, c) in b {
                    *a.entry(t).or_insert(0) += c;
                }
                a
            });
        let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|&(_, c)| c >= config.min_df).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary { min_df: config.min_df as usize });
        }
        kept.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let n_docs = corpus.len() as u64;
        let (terms, df): (Vec<String>, Vec<u64>) = kept.into_iter().unzip();
        let idf = df.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
        Ok(Self::assemble(terms, df, idf, n_docs, config))
    }

    fn assemble(terms: Vec<String>, df: Vec<u64>, idf: Vec<f64>, n_docs: u64, config: VectorizerConfig) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfidfModel { terms, df, idf, n_docs, config, index }
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn config(&self) -> VectorizerConfig {
        self.config
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, term: &str) -> Option<u64> {
        self.index_of(term).map(|i| self.df[i])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf[i])
    }

    /// Raw term frequency times idf, L2-normalized. Out-of-vocabulary
    /// tokens are ignored; a document with none left maps to zero.
    pub fn transform(&self, doc: &TokenizedDoc) -> SparseVector {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for t in features(doc, self.config.bigrams) {
            if let Some(&i) = self.index.get(&t) {
                *tf.entry(i as u32).or_insert(0.0) += 1.0;
            }
        }
        let mut indices = Vec::with_capacity(tf.len());
        let mut values = Vec::with_capacity(tf.len());
        for (i, c) in tf {
            indices.push(i);
            values.push(c * self.idf[i as usize]);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        SparseVector { indices, values, dim: self.dim() }
    }

    pub fn transform_all(&self, docs: &[TokenizedDoc]) -> Vec<SparseVector> {
        docs.par_iter().map(|d| self.transform(d)).collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{MODEL_HEADER}")?;
        writeln!(w, "n_docs\t{}", self.n_docs)?;
        writeln!(w, "min_df\t{}", self.config.min_df)?;
        writeln!(w, "bigrams\t{}", self.config.bigrams)?;
        writeln!(w, "terms\t{}", self.terms.len())?;
        for (i, t) in self.terms.iter().enumerate() {
            writeln!(w, "{t}\t{i}\t{}\t{:?}", self.df[i], self.idf[i])?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let bad = |d: String| Error::format("tfidf model", d);
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            match lines.next() {
                Some(Ok(l)) => Ok(l),
                Some(Err(e)) => Err(bad(e.to_string())),
                None => Err(bad(format!("truncated before {what}"))),
            }
        };
        let header = next("header")?;
        if header.trim_end() != MODEL_HEADER {
            return Err(bad(format!("unsupported header {header:?}")));
        }
        fn field<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
            line.strip_prefix(key)
                .and_then(|s| s.strip_prefix('\t'))
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::format("tfidf model", format!("expected {key}, got {line:?}")))
        }
        let n_docs: u64 = field(&next("n_docs")?, "n_docs")?;
        let min_df: u64 = field(&next("min_df")?, "min_df")?;
        let bigrams: bool = field(&next("bigrams")?, "bigrams")?;
        let n_terms: usize = field(&next("terms")?, "terms")?;
        let (mut terms, mut df, mut idf) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n_terms {
            let line = next("term rows")?;
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 || parts[1].parse::<usize>().ok() != Some(i) {
                return Err(bad(format!("bad term row {}: {line:?}", i)));
            }
            terms.push(parts[0].to_string());
            df.push(parts[2].parse().map_err(|_| bad(format!("bad df in {line:?}")))?);
            idf.push(parts[3].parse().map_err(|_| bad(format!("bad idf in {line:?}")))?);
        }
        if terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("terms not strictly sorted".into()));
        }
        Ok(Self::assemble(terms, df, idf, n_docs, VectorizerConfig { min_df, bigrams }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: &[&str]) -> TokenizedDoc {
        TokenizedDoc { crash_key: 0, tokens: tokens.iter().map(|s| s.to_string()).collect() }
    }

    fn cfg(min_df: u64) -> VectorizerConfig {
        VectorizerConfig { min_df, bigrams: false }
    }

    #[test]
    fn single_term_corpus() {
        let m = TfidfModel::fit(&[doc(&["a"]), doc(&["a"])], cfg(1)).unwrap();
        assert_eq!(m.index_of("a"), Some(0));
        assert_eq!(m.df("a"), Some(2));
        assert_eq!(m.idf("a"), Some(1.0));
    }

    #[test]
    fn rare_term_idf_and_hand_weights() {
        let corpus = [doc(&["odor", "car"]), doc(&["car"]), doc(&["car", "road"])];
        let m = TfidfModel::fit(&corpus, cfg(1)).unwrap();
        assert_eq!(m.terms(), &["car", "odor", "road"]);
        assert_eq!(m.idf("odor"), Some((4.0f64 / 2.0).ln() + 1.0));
        assert_eq!(m.idf("car"), Some(1.0));

        let v = m.transform(&doc(&["odor", "car", "car"]));
        let (wc, wo) = (2.0 * 1.0, (2.0f64).ln() + 1.0);
        let n = (wc * wc + wo * wo).sqrt();
        assert_eq!(v.indices, vec![0, 1]);
        assert!((v.values[0] - wc / n).abs() < 1e-15);
        assert!((v.values[1] - wo / n).abs() < 1e-15);
    }

    #[test]
    fn empty_vocabulary_and_corpus() {
        assert!(matches!(TfidfModel::fit(&[doc(&["a"])], cfg(2)), Err(Error::EmptyVocabulary { min_df: 2 })));
        assert!(TfidfModel::fit(&[], cfg(1)).is_err());
    }

    #[test]
    fn oov_and_repeated_terms() {
        let m = TfidfModel::fit(&[doc(&["a", "b"]), doc(&["a"])], cfg(1)).unwrap();
        let z = m.transform(&doc(&["zzz"]));
        assert_eq!(z.nnz(), 0);
        assert_eq!(z.dim, 2);
        for k in 1..5 {
            let v = m.transform(&doc(&vec!["b"; k]));
            assert_eq!(v.indices, vec![1]);
            assert_eq!(v.values, vec![1.0]);
        }
    }

    #[test]
    fn bigrams_optional() {
        let corpus = [doc(&["no", "odor"]), doc(&["no", "odor"])];
        let m = TfidfModel::fit(&corpus, VectorizerConfig { min_df: 1, bigrams: true }).unwrap();
        assert_eq!(m.terms(), &["no", "no_odor", "odor"]);
    }

    #[test]
    fn roundtrip_exact() {
        let corpus = [doc(&["x", "y"]), doc(&["y", "z"]), doc(&["x"]), doc(&["q", "x"])];
        let m = TfidfModel::fit(&corpus, cfg(1)).unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = TfidfModel::read(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert!(TfidfModel::read(&b"tfidf-model v9\n"[..]).is_err());
    }

    #[test]
    fn sparse_helpers() {
        let v = SparseVector::from_pairs(4, [(3, 1.0), (1, 2.0), (3, 1.0), (0, 0.0)]).unwrap();
        assert_eq!(v.indices, vec![1, 3]);
        assert_eq!(v.values, vec![2.0, 2.0]);
        assert_eq!(v.dot(&[1.0, 1.0, 1.0, 0.5]), 3.0);
        assert!(SparseVector::from_pairs(2, [(2, 1.0)]).is_err());
    }
}
