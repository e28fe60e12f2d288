//! Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.
//!
//! The sampler is single-threaded and fully determined by its seed.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureId, RawMatrix, TokenizedCorpus};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub topics: usize,
    /// Document-topic prior.
    pub alpha: f64,
    /// Topic-word prior.
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    /// Common collapsed-Gibbs defaults: `alpha = 50 / K`, `beta = 0.01`.
    pub fn with_topics(topics: usize) -> Self {
        LdaParams {
            topics,
            alpha: 50.0 / topics.max(1) as f64,
            beta: 0.01,
            iterations: 500,
            seed: 0,
        }
    }

    fn check(&self, vocab: usize) -> Result<(), FeatureError> {
        if self.topics < 2 {
            return Err(FeatureError::InvalidLda("need at least 2 topics".into()));
        }
        if self.iterations == 0 {
            return Err(FeatureError::InvalidLda("need at least 1 iteration".into()));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(FeatureError::InvalidLda("priors must be positive".into()));
        }
        if vocab == 0 {
            return Err(FeatureError::EmptyVocabulary { min_count: 0 });
        }
        if self.topics > vocab {
            return Err(FeatureError::TooManyTopics {
                topics: self.topics,
                vocab,
            });
        }
        Ok(())
    }
}

impl Default for LdaParams {
    fn default() -> Self {
        LdaParams::with_topics(50)
    }
}

/// State of a collapsed Gibbs sampler over integer-coded documents.
pub struct GibbsSampler {
    topics: usize,
    vocab: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<u32>>,
    assignments: Vec<Vec<u32>>,
    doc_topic: Vec<u32>,
    topic_word: Vec<u32>,
    topic_total: Vec<u64>,
    rng: seed::Rng,
    weights: Vec<f64>,
}

impl GibbsSampler {
    pub fn new(docs: Vec<Vec<u32>>, vocab: usize, params: &LdaParams) -> Result<Self, FeatureError> {
        params.check(vocab)?;
        let k = params.topics;
        let mut rng = seed::rng(params.seed, &[]);
        let mut doc_topic = vec![0u32; docs.len() * k];
        let mut topic_word = vec![0u32; k * vocab];
        let mut topic_total = vec![0u64; k];
        let mut assignments = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let mut z = Vec::with_capacity(doc.len());
            for &w in doc {
                assert!((w as usize) < vocab, "token id out of range");
                let t = rng.random_range(0..k);
                doc_topic[d * k + t] += 1;
                topic_word[t * vocab + w as usize] += 1;
                topic_total[t] += 1;
                z.push(t as u32);
            }
            assignments.push(z);
        }
        Ok(GibbsSampler {
            topics: k,
            vocab,
            alpha: params.alpha,
            beta: params.beta,
            docs,
            assignments,
            doc_topic,
            topic_word,
            topic_total,
            rng,
            weights: vec![0.0; k],
        })
    }

    /// One full pass resampling every token's topic.
    pub fn sweep(&mut self) {
        let k = self.topics;
        let v = self.vocab;
        let vbeta = v as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i] as usize;
                let old = self.assignments[d][i] as usize;
                self.doc_topic[d * k + old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (f64::from(self.doc_topic[d * k + t]) + self.alpha)
                        * (f64::from(self.topic_word[t * v + w]) + self.beta)
                        / (self.topic_total[t] as f64 + vbeta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.doc_topic[d * k + new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_total[new] += 1;
                self.assignments[d][i] = new as u32;
            }
        }
    }

    /// Tokens currently assigned to each topic.
    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_total
    }

    pub fn token_count(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Point estimates of the topic-word and document-topic distributions.
    pub fn estimate(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let k = self.topics;
        let v = self.vocab;
        let phi = (0..k)
            .map(|t| {
                normalized(
                    (0..v).map(|w| f64::from(self.topic_word[t * v + w]) + self.beta),
                )
            })
            .collect();
        let theta = (0..self.docs.len())
            .map(|d| normalized((0..k).map(|t| f64::from(self.doc_topic[d * k + t]) + self.alpha)))
            .collect();
        (phi, theta)
    }
}

fn normalized(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let v: Vec<f64> = it.collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub params: LdaParams,
    pub vocab: Vec<String>,
    /// `phi[topic][word]`.
    pub phi: Vec<Vec<f64>>,
    /// `theta[document][topic]`.
    pub theta: Vec<Vec<f64>>,
}

impl TopicModel {
    pub fn train(docs: Vec<Vec<u32>>, vocab: Vec<String>, params: LdaParams) -> Result<Self, FeatureError> {
        let mut sampler = GibbsSampler::new(docs, vocab.len(), &params)?;
        for _ in 0..params.iterations {
            sampler.sweep();
        }
        let (phi, theta) = sampler.estimate();
        Ok(TopicModel {
            params,
            vocab,
            phi,
            theta,
        })
    }

    pub fn topics(&self) -> usize {
        self.phi.len()
    }

    /// The `n` most probable tokens of topic `k`, ties broken by token.
    pub fn top_tokens(&self, k: usize, n: usize) -> Vec<String> {
        let mut idx: Vec<usize> = (0..self.vocab.len()).collect();
        idx.sort_by(|&a, &b| {
            self.phi[k][b]
                .total_cmp(&self.phi[k][a])
                .then_with(|| self.vocab[a].cmp(&self.vocab[b]))
        });
        idx.into_iter().take(n).map(|i| self.vocab[i].clone()).collect()
    }
}

/// Trains LDA on every document, restricted to the given word/hashtag
/// vocabulary, and returns per-community mean topic proportions as
/// `topic:<k>` columns.
pub fn topic_features(
    corpus: &TokenizedCorpus,
    vocab: &[FeatureId],
    params: LdaParams,
) -> Result<(TopicModel, RawMatrix), FeatureError> {
    let tokens: Vec<String> = vocab
        .iter()
        .filter(|f| f.topic_index().is_none())
        .map(|f| f.key.clone())
        .collect();
    let index: HashMap<&str, u32> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i as u32))
        .collect();

    let mut docs = Vec::new();
    let mut owner = Vec::new();
    for (c, community_docs) in corpus.docs.iter().enumerate() {
        for doc in community_docs {
            docs.push(doc.iter().filter_map(|t| index.get(t.as_str()).copied()).collect());
            owner.push(c);
        }
    }

    let model = TopicModel::train(docs, tokens, params)?;
    let k = model.topics();
    let mut sums = vec![vec![0.0; k]; corpus.communities.len()];
    let mut counts = vec![0usize; corpus.communities.len()];
    for (theta, &c) in model.theta.iter().zip(&owner) {
        for (s, x) in sums[c].iter_mut().zip(theta) {
            *s += x;
        }
        counts[c] += 1;
    }
    let values = sums
        .into_iter()
        .zip(counts)
        .map(|(row, n)| {
            if n == 0 {
                row
            } else {
                row.into_iter().map(|x| x / n as f64).collect()
            }
        })
        .collect();
    let matrix = RawMatrix {
        communities: corpus.communities.clone(),
        features: (0..k).map(FeatureId::topic).collect(),
        values,
    };
    Ok((model, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::planted_topic_corpus;

    fn small_params(seed: u64) -> LdaParams {
        LdaParams {
            topics: 2,
            alpha: 0.5,
            beta: 0.01,
            iterations: 60,
            seed,
        }
    }

    #[test]
    fn sweep_preserves_token_total() {
        let planted = planted_topic_corpus(5, 40, 30);
        let mut s = GibbsSampler::new(planted.docs.clone(), planted.vocab.len(), &small_params(1)).unwrap();
        let n = s.token_count() as u64;
        for _ in 0..10 {
            s.sweep();
            assert_eq!(s.topic_totals().iter().sum::<u64>(), n);
        }
    }

    #[test]
    fn distributions_normalized() {
        let planted = planted_topic_corpus(2, 30, 20);
        let m = TopicModel::train(planted.docs, planted.vocab, small_params(4)).unwrap();
        for row in m.phi.iter().chain(&m.theta) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let planted = planted_topic_corpus(9, 30, 20);
        let a = TopicModel::train(planted.docs.clone(), planted.vocab.clone(), small_params(5)).unwrap();
        let b = TopicModel::train(planted.docs, planted.vocab, small_params(5)).unwrap();
        let bits = |m: &TopicModel| -> Vec<u64> {
            m.phi.iter().chain(&m.theta).flatten().map(|x| x.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn parameter_errors() {
        let docs = vec![vec![0, 1, 2]];
        let vocab: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut p = small_params(0);
        p.topics = 4;
        assert!(matches!(
            TopicModel::train(docs.clone(), vocab.clone(), p),
            Err(FeatureError::TooManyTopics { topics: 4, vocab: 3 })
        ));
        p.topics = 1;
        assert!(TopicModel::train(docs.clone(), vocab.clone(), p).is_err());
        p.topics = 2;
        p.iterations = 0;
        assert!(TopicModel::train(docs, vocab, p).is_err());
    }

    #[test]
    fn recovers_planted_topics() {
        let planted = planted_topic_corpus(21, 200, 40);
        let m = TopicModel::train(planted.docs.clone(), planted.vocab.clone(), LdaParams { iterations: 200, ..small_params(2) }).unwrap();
        let sims = planted.matched_cosines(&m.phi);
        assert!(sims.iter().all(|&s| s >= 0.8), "{sims:?}");
    }
}
