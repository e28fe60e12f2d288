//! Feature extraction: tokenization, unigram/hashtag counting, LDA topic
//! proportions, and tertile discretization into bins `{0, 1, 2}`.

mod bins;
mod count;
pub mod lda;
mod tokenize;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bins::{apply_bins, fit_bins, tertile_thresholds, Thresholds};
pub use count::{count_features, tokenize_corpus, CountConfig, Normalization, TokenizedCorpus};
pub use lda::{topic_features, LdaParams, TopicModel};
pub use tokenize::{is_hashtag, tokenize};

use crate::fingerprint::Provenance;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no token occurs at least {min_count} times; vocabulary is empty")]
    EmptyVocabulary { min_count: usize },
    #[error("corpus has no communities")]
    EmptyCorpus,
    #[error("topic count {topics} exceeds vocabulary size {vocab}")]
    TooManyTopics { topics: usize, vocab: usize },
    #[error("invalid LDA parameters: {0}")]
    InvalidLda(String),
    #[error("invalid feature id `{0}` (expected word:<w>, hashtag:#<h> or topic:<k>)")]
    BadFeatureId(String),
    #[error("bin value {0} out of range (bins are 0, 1, 2)")]
    BadBin(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Word,
    Hashtag,
    Topic,
}

impl FeatureKind {
    fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Word => "word",
            FeatureKind::Hashtag => "hashtag",
            FeatureKind::Topic => "topic",
        }
    }
}

/// A feature, serialized as `kind:key` (`word:fruit`, `hashtag:#cook`, `topic:7`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId {
    pub kind: FeatureKind,
    pub key: String,
}

impl FeatureId {
    pub fn word(w: impl Into<String>) -> Self {
        FeatureId {
            kind: FeatureKind::Word,
            key: w.into(),
        }
    }

    pub fn hashtag(h: impl AsRef<str>) -> Self {
        let h = h.as_ref();
        let key = if h.starts_with('#') {
            h.to_string()
        } else {
            format!("#{h}")
        };
        FeatureId {
            kind: FeatureKind::Hashtag,
            key,
        }
    }

    pub fn topic(k: usize) -> Self {
        FeatureId {
            kind: FeatureKind::Topic,
            key: k.to_string(),
        }
    }

    /// Word or hashtag feature for a token produced by [`tokenize`].
    pub fn from_token(token: &str) -> Self {
        if is_hashtag(token) {
            FeatureId::hashtag(token)
        } else {
            FeatureId::word(token)
        }
    }

    pub fn topic_index(&self) -> Option<usize> {
        match self.kind {
            FeatureKind::Topic => self.key.parse().ok(),
            _ => None,
        }
    }

    /// The key without a leading `#`.
    pub fn bare_key(&self) -> &str {
        self.key.trim_start_matches('#')
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.key)
    }
}

impl FromStr for FeatureId {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FeatureError::BadFeatureId(s.to_string());
        let (kind, key) = s.split_once(':').ok_or_else(bad)?;
        if key.is_empty() {
            return Err(bad());
        }
        match kind {
            "word" if !key.starts_with('#') => Ok(FeatureId::word(key)),
            "hashtag" if key.starts_with('#') && key.len() > 1 => Ok(FeatureId::hashtag(key)),
            "topic" => key.parse::<usize>().map(FeatureId::topic).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl Serialize for FeatureId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Discretized frequency level: 0 infrequent, 1 somewhat frequent, 2 very frequent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Bin(u8);

impl Bin {
    pub const LOW: Bin = Bin(0);
    pub const MID: Bin = Bin(1);
    pub const HIGH: Bin = Bin(2);
    pub const ALL: [Bin; 3] = [Bin::LOW, Bin::MID, Bin::HIGH];

    pub fn new(v: u8) -> Option<Bin> {
        (v <= 2).then_some(Bin(v))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Bin {
    type Error = FeatureError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Bin::new(v).ok_or(FeatureError::BadBin(v))
    }
}

impl From<Bin> for u8 {
    fn from(b: Bin) -> u8 {
        b.0
    }
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Community × feature matrix of raw (possibly normalized) values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMatrix {
    pub communities: Vec<String>,
    pub features: Vec<FeatureId>,
    /// Row-major: `values[community][feature]`.
    pub values: Vec<Vec<f64>>,
}

impl RawMatrix {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    pub fn feature_index(&self, id: &FeatureId) -> Option<usize> {
        self.features.iter().position(|f| f == id)
    }

    pub fn value(&self, community: &str, id: &FeatureId) -> Option<f64> {
        let i = self.communities.iter().position(|c| c == community)?;
        let j = self.feature_index(id)?;
        Some(self.values[i][j])
    }

    /// Appends the columns of `other`, whose rows must be the same communities
    /// in the same order.
    pub fn append_columns(&mut self, other: RawMatrix) {
        assert_eq!(self.communities, other.communities, "row sets differ");
        self.features.extend(other.features);
        for (row, extra) in self.values.iter_mut().zip(other.values) {
            row.extend(extra);
        }
    }
}

/// One fitted feature with its tertile cut points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub id: FeatureId,
    pub thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_tokens: Option<Vec<String>>,
}

/// The fitted vocabulary. Serialized as `featurespace.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub features: Vec<FeatureEntry>,
    pub min_count: usize,
    pub normalization: Normalization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lda: Option<LdaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl FeatureSpace {
    pub fn get(&self, id: &FeatureId) -> Option<&FeatureEntry> {
        self.features.iter().find(|e| &e.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &FeatureId> {
        self.features.iter().map(|e| &e.id)
    }

    /// Bins an unseen row with the training thresholds. Absent features are raw 0.
    pub fn bin_row(&self, raw: &BTreeMap<FeatureId, f64>) -> BTreeMap<FeatureId, Bin> {
        self.features
            .iter()
            .map(|e| {
                let v = raw.get(&e.id).copied().unwrap_or(0.0);
                (e.id.clone(), e.thresholds.bin(v))
            })
            .collect()
    }

    /// Attaches top tokens to topic features.
    pub fn describe_topics(&mut self, model: &TopicModel, n: usize) {
        for e in &mut self.features {
            if let Some(k) = e.id.topic_index() {
                if k < model.topics() {
                    e.top_tokens = Some(model.top_tokens(k, n));
                }
            }
        }
    }
}

/// Community × feature bins, with the raw values kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedMatrix {
    pub communities: Vec<String>,
    pub features: Vec<FeatureId>,
    pub bins: Vec<Vec<Bin>>,
    pub raw: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub fn n_rows(&self) -> usize {
        self.communities.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn row_map(&self, i: usize) -> BTreeMap<FeatureId, Bin> {
        self.features
            .iter()
            .cloned()
            .zip(self.bins[i].iter().copied())
            .collect()
    }

    /// Builds a matrix straight from bins (raw values mirror the bins).
    pub fn from_bins(communities: Vec<String>, features: Vec<FeatureId>, bins: Vec<Vec<Bin>>) -> Self {
        let raw = bins
            .iter()
            .map(|r| r.iter().map(|b| f64::from(b.get())).collect())
            .collect();
        BinnedMatrix {
            communities,
            features,
            bins,
            raw,
        }
    }

    /// The same matrix without row `skip`.
    pub fn without_row(&self, skip: usize) -> BinnedMatrix {
        let keep = |i: &usize| *i != skip;
        let idx: Vec<usize> = (0..self.n_rows()).filter(keep).collect();
        BinnedMatrix {
            communities: idx.iter().map(|&i| self.communities[i].clone()).collect(),
            features: self.features.clone(),
            bins: idx.iter().map(|&i| self.bins[i].clone()).collect(),
            raw: idx.iter().map(|&i| self.raw[i].clone()).collect(),
        }
    }
}
