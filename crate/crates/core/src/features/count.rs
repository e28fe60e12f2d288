use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{tokenize, FeatureError, FeatureId, RawMatrix};
use crate::corpus::CommunityCorpus;
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    RawCount,
    /// Count divided by the community's total token count.
    #[default]
    RelativeFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountConfig {
    pub min_count: usize,
    pub normalization: Normalization,
}

impl Default for CountConfig {
    fn default() -> Self {
        CountConfig {
            min_count: 3,
            normalization: Normalization::default(),
        }
    }
}

/// Every document of every community, tokenized once.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpus {
    pub communities: Vec<String>,
    /// `docs[community][document]` is a token list.
    pub docs: Vec<Vec<Vec<String>>>,
}

impl TokenizedCorpus {
    pub fn total_tokens(&self) -> usize {
        self.docs.iter().flatten().map(Vec::len).sum()
    }
}

pub fn tokenize_corpus(corpus: &CommunityCorpus, exec: Execution) -> TokenizedCorpus {
    let groups: Vec<(&String, &Vec<String>)> = corpus.groups.iter().collect();
    let docs = exec.map_slice(&groups, |(_, texts)| texts.iter().map(|t| tokenize(t)).collect());
    TokenizedCorpus {
        communities: groups.iter().map(|(c, _)| (*c).clone()).collect(),
        docs,
    }
}

/// Counts unigrams and hashtags per community, keeping tokens that occur at
/// least `min_count` times over the whole corpus. Columns are sorted by
/// feature id.
pub fn count_features(
    corpus: &TokenizedCorpus,
    config: &CountConfig,
    exec: Execution,
) -> Result<RawMatrix, FeatureError> {
    if corpus.communities.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let per_community: Vec<(HashMap<&str, usize>, usize)> = exec.map_slice(&corpus.docs, |docs| {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut total = 0;
        for tok in docs.iter().flatten() {
            *counts.entry(tok.as_str()).or_default() += 1;
            total += 1;
        }
        (counts, total)
    });

    let mut global: BTreeMap<FeatureId, usize> = BTreeMap::new();
    for (counts, _) in &per_community {
        for (tok, n) in counts {
            *global.entry(FeatureId::from_token(tok)).or_default() += n;
        }
    }
    let kept: Vec<FeatureId> = global
        .into_iter()
        .filter(|&(_, n)| n >= config.min_count)
        .map(|(id, _)| id)
        .collect();
    if kept.is_empty() {
        return Err(FeatureError::EmptyVocabulary {
            min_count: config.min_count,
        });
    }

    let values = per_community
        .iter()
        .map(|(counts, total)| {
            kept.iter()
                .map(|id| {
                    let token = match id.kind {
                        super::FeatureKind::Word | super::FeatureKind::Hashtag => id.key.as_str(),
                        super::FeatureKind::Topic => unreachable!(),
                    };
                    let n = counts.get(token).copied().unwrap_or(0) as f64;
                    match config.normalization {
                        Normalization::RawCount => n,
                        Normalization::RelativeFrequency if *total == 0 => 0.0,
                        Normalization::RelativeFrequency => n / *total as f64,
                    }
                })
                .collect()
        })
        .collect();

    Ok(RawMatrix {
        communities: corpus.communities.clone(),
        features: kept,
        values,
    })
}
