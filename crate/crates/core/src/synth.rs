//! Synthetic corpora with known structure, for tests, benchmarks and the
//! `synth` command.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_documents, write_labels, CommunityCorpus, CommunityLabels, CorpusError, Document, HashtagFilter, DEFAULT_MEAL_HASHTAGS};
use crate::features::{Bin, BinnedMatrix, FeatureId};
use crate::forest::{Forest, ForestParams, Node};
use crate::seed;
use crate::stats::{DemographicsInput, Gender, Units};

/// Tokens whose frequency tracks the community rate. The first half become
/// rarer as the rate rises, the second half more common.
pub const PLANTED_TOKENS: [&str; 10] = [
    "fruit", "kale", "salad", "quinoa", "yogurt", "fries", "donuts", "bacon", "wings", "pizza",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub communities: usize,
    pub planted: usize,
    pub noise: usize,
    pub docs_per_community: usize,
    pub tokens_per_doc: usize,
    /// Log-scale change in planted-token weight per standard deviation of
    /// the rate. Zero gives a corpus unrelated to the labels.
    pub signal: f64,
    /// Weight of one planted token relative to one noise token at the mean rate.
    pub planted_weight: f64,
    pub seed: u64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            communities: 51,
            planted: PLANTED_TOKENS.len(),
            noise: 200,
            docs_per_community: 150,
            tokens_per_doc: 12,
            signal: 1.5,
            planted_weight: 4.0,
            seed: 0,
        }
    }
}

impl SurrogateParams {
    pub fn noise_only(seed: u64) -> Self {
        SurrogateParams {
            signal: 0.0,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub params: SurrogateParams,
    pub rates: BTreeMap<String, f64>,
    pub documents: Vec<Document>,
}

pub fn noise_token(i: usize) -> String {
    format!("noise{i:03}")
}

pub fn planted_token(i: usize) -> String {
    PLANTED_TOKENS
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("planted{i:03}"))
}

/// Communities with distinct rates, documents built from planted and noise
/// tokens, each carrying one meal hashtag so it passes the default filter.
pub fn surrogate_corpus(params: &SurrogateParams) -> SyntheticCorpus {
    let mut rng = seed::rng(params.seed, &[0]);
    let names: Vec<String> = (0..params.communities).map(|i| format!("c{i:02}")).collect();
    let mut rates = BTreeMap::new();
    for name in &names {
        // Continuous draws; a repeat is practically impossible but cheap to rule out.
        loop {
            let r = 15.0 + 25.0 * rng.random::<f64>();
            if !rates.values().any(|&x: &f64| x == r) {
                rates.insert(name.clone(), r);
                break;
            }
        }
    }
    let n = rates.len() as f64;
    let mean = rates.values().sum::<f64>() / n;
    let sd = (rates.values().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt().max(f64::EPSILON);

    let vocab: Vec<String> = (0..params.planted)
        .map(planted_token)
        .chain((0..params.noise).map(noise_token))
        .collect();
    let mut documents = Vec::new();
    for (ci, name) in names.iter().enumerate() {
        let z = (rates[name] - mean) / sd;
        let weights: Vec<f64> = (0..vocab.len())
            .map(|i| {
                if i < params.planted {
                    let sign = if i < params.planted / 2 { -1.0 } else { 1.0 };
                    params.planted_weight * (sign * params.signal * z).exp()
                } else {
                    1.0
                }
            })
            .collect();
        let dist = WeightedIndex::new(&weights).expect("positive weights");
        let mut rng = seed::rng(params.seed, &[1, ci as u64]);
        for _ in 0..params.docs_per_community {
            let tag = DEFAULT_MEAL_HASHTAGS[rng.random_range(0..DEFAULT_MEAL_HASHTAGS.len())];
            let mut words: Vec<&str> = (0..params.tokens_per_doc).map(|_| vocab[dist.sample(&mut rng)].as_str()).collect();
            words.push(tag);
            documents.push(Document {
                community: name.clone(),
                text: words.join(" "),
            });
        }
    }
    SyntheticCorpus {
        params: params.clone(),
        rates,
        documents,
    }
}

impl SyntheticCorpus {
    pub fn labels(&self) -> CommunityLabels {
        CommunityLabels::from_rates(self.rates.iter().map(|(c, &r)| (c.clone(), r)), false)
            .expect("generated rates are valid")
    }

    pub fn write_corpus<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for d in &self.documents {
            serde_json::to_writer(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_labels<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        write_labels(&self.rates, out)
    }

    /// Writes `corpus.jsonl` and `labels.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_corpus(std::io::BufWriter::new(std::fs::File::create(dir.join("corpus.jsonl"))?))?;
        self.write_labels(std::fs::File::create(dir.join("labels.csv"))?)
            .map_err(std::io::Error::other)?;
        Ok(())
    }

    /// Loads the corpus through the same path as files on disk.
    pub fn load(&self) -> Result<(CommunityCorpus, CommunityLabels), CorpusError> {
        let labels = self.labels();
        let mut buf = Vec::new();
        self.write_corpus(&mut buf).expect("in-memory write");
        let (corpus, _) = read_documents(buf.as_slice(), &HashtagFilter::default(), &labels)?;
        Ok((corpus, labels))
    }
}

/// A matrix where `signal` feature(s) reproduce the label exactly (bin 2 for
/// true, 0 for false) and the remaining features are uniform noise.
pub fn separable_matrix(seed: u64, rows: usize, signal: usize, noise: usize) -> (BinnedMatrix, CommunityLabels) {
    bin_matrix(seed, rows, signal, noise, true)
}

/// Labels independent of every feature.
pub fn noise_matrix(seed: u64, rows: usize, features: usize) -> (BinnedMatrix, CommunityLabels) {
    bin_matrix(seed, rows, 0, features, false)
}

fn bin_matrix(seed: u64, rows: usize, signal: usize, noise: usize, planted: bool) -> (BinnedMatrix, CommunityLabels) {
    let mut rng = seed::rng(seed, &[2]);
    let communities: Vec<String> = (0..rows).map(|i| format!("r{i:03}")).collect();
    // Rates are a random permutation of 0..rows, so labels split at the median.
    let mut order: Vec<usize> = (0..rows).collect();
    for i in (1..rows).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let rates: Vec<(String, f64)> = communities
        .iter()
        .zip(&order)
        .map(|(c, &r)| (c.clone(), 100.0 * r as f64 / rows.max(1) as f64))
        .collect();
    let labels = CommunityLabels::from_rates(rates, false).expect("valid rates");
    let features: Vec<FeatureId> = (0..signal)
        .map(|i| FeatureId::word(format!("signal{i}")))
        .chain((0..noise).map(|i| FeatureId::word(noise_token(i))))
        .collect();
    let bins = communities
        .iter()
        .map(|c| {
            let truth = labels.label(c).unwrap_or(false);
            (0..signal)
                .map(|_| if planted && truth { Bin::HIGH } else { Bin::LOW })
                .chain((0..noise).map(|_| Bin::new(rng.random_range(0..3)).expect("bin in range")))
                .collect()
        })
        .collect();
    (BinnedMatrix::from_bins(communities, features, bins), labels)
}

/// Documents drawn from two topics over disjoint halves of the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTopics {
    pub vocab: Vec<String>,
    pub docs: Vec<Vec<u32>>,
    /// `phi[topic][word]` used to generate the corpus.
    pub phi: Vec<Vec<f64>>,
}

pub const PLANTED_VOCAB: usize = 20;

pub fn planted_topic_corpus(seed: u64, n_docs: usize, doc_len: usize) -> PlantedTopics {
    let mut rng = seed::rng(seed, &[3]);
    let half = PLANTED_VOCAB / 2;
    let vocab: Vec<String> = (0..PLANTED_VOCAB).map(|i| format!("w{i:02}")).collect();
    let phi: Vec<Vec<f64>> = (0..2)
        .map(|k| {
            let raw: Vec<f64> = (0..PLANTED_VOCAB)
                .map(|w| if w / half == k { 0.5 + rng.random::<f64>() } else { 0.0 })
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        })
        .collect();
    let dists: Vec<WeightedIndex<f64>> = phi.iter().map(|p| WeightedIndex::new(p).expect("valid topic")).collect();
    let docs = (0..n_docs)
        .map(|_| {
            let dominant = rng.random_range(0..2usize);
            let share = 0.8 + 0.2 * rng.random::<f64>();
            (0..doc_len)
                .map(|_| {
                    let k = if rng.random::<f64>() < share { dominant } else { 1 - dominant };
                    dists[k].sample(&mut rng) as u32
                })
                .collect()
        })
        .collect();
    PlantedTopics { vocab, docs, phi }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

impl PlantedTopics {
    /// Greedy one-to-one matching of planted to recovered topics by cosine
    /// similarity; result is indexed by planted topic.
    pub fn matched_cosines(&self, recovered: &[Vec<f64>]) -> Vec<f64> {
        let mut pairs: Vec<(f64, usize, usize)> = self
            .phi
            .iter()
            .enumerate()
            .flat_map(|(i, p)| recovered.iter().enumerate().map(move |(j, r)| (cosine(p, r), i, j)))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut out = vec![0.0; self.phi.len()];
        let mut used_p = vec![false; self.phi.len()];
        let mut used_r = vec![false; recovered.len()];
        for (s, i, j) in pairs {
            if !used_p[i] && !used_r[j] {
                used_p[i] = true;
                used_r[j] = true;
                out[i] = s;
            }
        }
        out
    }
}

/// The small example tree: fruit at the root, home cooking and
/// curry on the low-fruit side, brunch on the high-fruit side. `true` means
/// overweight.
pub fn fruit_tree() -> Node {
    Node::split(
        FeatureId::word("fruit"),
        1,
        Node::split(
            FeatureId::hashtag("cook"),
            0,
            Node::leaf(true),
            Node::split(FeatureId::word("curry"), 1, Node::leaf(false), Node::leaf(true)),
        ),
        Node::split(FeatureId::word("brunch"), 1, Node::leaf(false), Node::leaf(true)),
    )
}

/// `n` copies of [`fruit_tree`].
pub fn fruit_forest(n: usize) -> Forest {
    Forest {
        params: ForestParams {
            n_trees: n,
            ..ForestParams::default()
        },
        trees: vec![fruit_tree(); n],
        training_fingerprint: "fruit-tree".into(),
        provenance: None,
    }
}

/// Feature pool for [`random_forest`]: food words, other words, hashtags and topics.
pub fn feature_pool(n: usize) -> Vec<FeatureId> {
    (0..n)
        .map(|i| match i % 4 {
            0 => FeatureId::word(PLANTED_TOKENS[(i / 4) % PLANTED_TOKENS.len()]),
            1 => FeatureId::word(noise_token(i)),
            2 => FeatureId::hashtag(format!("tag{i}")),
            _ => FeatureId::topic(i),
        })
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// A forest of random trees of depth at most `max_depth`. Features may repeat
/// along a path with different thresholds, as in trained trees.
pub fn random_forest(seed: u64, n_trees: usize, max_depth: usize, pool: &[FeatureId]) -> Forest {
    fn grow(rng: &mut seed::Rng, depth: usize, pool: &[FeatureId]) -> Node {
        if depth == 0 || rng.random::<f64>() < 0.2 {
            return Node::leaf(rng.random());
        }
        Node::split(
            pool[rng.random_range(0..pool.len())].clone(),
            rng.random_range(0..2),
            grow(rng, depth - 1, pool),
            grow(rng, depth - 1, pool),
        )
    }
    let mut rng = seed::rng(seed, &[4]);
    let trees = (0..n_trees).map(|_| grow(&mut rng, max_depth, pool)).collect();
    Forest {
        params: ForestParams {
            n_trees,
            max_depth,
            seed,
            ..ForestParams::default()
        },
        trees,
        training_fingerprint: format!("random-{seed}"),
        provenance: None,
    }
}

/// Population used for simulated respondents: BMI mean and spread chosen so
/// about 18% fall at or above 28.7, heights around 1.73 m.
pub const SIM_BMI_MEAN: f64 = 24.9;
pub const SIM_BMI_SD: f64 = 4.1;
pub const SIM_HEIGHT_MEAN: f64 = 1.73;
pub const SIM_HEIGHT_SD: f64 = 0.09;

/// A plausible demographics form for a simulated respondent.
pub fn simulated_respondent(seed: u64) -> DemographicsInput {
    use rand_distr::Normal;
    let mut rng = seed::rng(seed, &[5]);
    let height = Normal::new(SIM_HEIGHT_MEAN, SIM_HEIGHT_SD)
        .expect("valid normal")
        .sample(&mut rng)
        .clamp(1.45, 2.05);
    let bmi = Normal::new(SIM_BMI_MEAN, SIM_BMI_SD).expect("valid normal").sample(&mut rng).clamp(16.0, 50.0);
    let age = Normal::new(31.0_f64, 9.0).expect("valid normal").sample(&mut rng).clamp(18.0, 75.0).round();
    let gender = [Gender::Female, Gender::Male, Gender::Other, Gender::Undisclosed][rng.random_range(0..4)];
    let locations = ["Austin, TX", "Seattle, WA", "Toronto, Ontario", "London, UK", "Ohio", "somewhere"];
    DemographicsInput {
        height: Some((height * 100.0).round() / 100.0),
        weight: Some((bmi * height * height * 10.0).round() / 10.0),
        units: Units::Metric,
        age: Some(age),
        gender: Some(gender),
        location: Some(locations[rng.random_range(0..locations.len())].to_string()),
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_shape() {
        let s = surrogate_corpus(&SurrogateParams { docs_per_community: 5, ..Default::default() });
        assert_eq!(s.rates.len(), 51);
        let labels = s.labels();
        assert_eq!(labels.positives(), 25);
        let (corpus, _) = s.load().unwrap();
        assert_eq!(corpus.groups.len(), 51);
        assert!(corpus.sizes().values().all(|&n| n == 5));
    }

    #[test]
    fn surrogate_is_seeded() {
        let p = SurrogateParams { docs_per_community: 3, seed: 4, ..Default::default() };
        assert_eq!(surrogate_corpus(&p), surrogate_corpus(&p));
        let q = SurrogateParams { seed: 5, ..p.clone() };
        assert_ne!(surrogate_corpus(&p).documents, surrogate_corpus(&q).documents);
    }

    #[test]
    fn matching_identity() {
        let p = planted_topic_corpus(1, 4, 5);
        let swapped = vec![p.phi[1].clone(), p.phi[0].clone()];
        let s = p.matched_cosines(&swapped);
        assert!(s.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(cosine(&p.phi[0], &p.phi[1]).abs() < 1e-12);
    }

    #[test]
    fn simulated_respondents_are_plausible() {
        let cutoff = crate::stats::Cutoff::default();
        let mut high = 0;
        for seed in 0..2000 {
            let input = simulated_respondent(seed);
            let d = crate::stats::Demographics::from_intake(&input, "s").unwrap();
            high += usize::from(cutoff.label(d.bmi().unwrap()));
        }
        let share = high as f64 / 2000.0;
        assert!((0.13..0.23).contains(&share), "{share}");
    }

    #[test]
    fn separable_labels_follow_signal() {
        let (m, labels) = separable_matrix(3, 51, 1, 5);
        for (i, c) in m.communities.iter().enumerate() {
            assert_eq!(m.bins[i][0] == Bin::HIGH, labels.label(c).unwrap());
        }
    }
}
