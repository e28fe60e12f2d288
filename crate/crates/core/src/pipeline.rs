//! Corpus-to-forest training, shared by the command line and tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CommunityCorpus, CommunityLabels};
use crate::exec::Execution;
use crate::features::{
    apply_bins, count_features, fit_bins, tokenize_corpus, topic_features, BinnedMatrix, CountConfig, FeatureError,
    FeatureSpace, LdaParams, TopicModel,
};
use crate::fingerprint::Provenance;
use crate::forest::{loocv, train_forest, Forest, ForestError, ForestParams, LoocvReport};

/// Words listed per topic in the feature space.
pub const TOPIC_TOP_TOKENS: usize = 20;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainConfig {
    pub count: CountConfig,
    /// Topic features are added only when set.
    #[serde(default)]
    pub lda: Option<LdaParams>,
    pub forest: ForestParams,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("community `{0}` has no label")]
    Unlabeled(String),
}

/// The binned training matrix with its labels in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub space: FeatureSpace,
    pub matrix: BinnedMatrix,
    pub labels: Vec<bool>,
    pub topics: Option<TopicModel>,
}

pub fn build_features(
    corpus: &CommunityCorpus,
    labels: &CommunityLabels,
    config: &TrainConfig,
    exec: Execution,
) -> Result<Features, PipelineError> {
    let tokens = tokenize_corpus(corpus, exec);
    let mut raw = count_features(&tokens, &config.count, exec)?;
    let topics = match &config.lda {
        Some(p) => {
            let (model, cols) = topic_features(&tokens, &raw.features, *p)?;
            raw.append_columns(cols);
            Some(model)
        }
        None => None,
    };
    let mut space = fit_bins(&raw, config.count.min_count, config.count.normalization);
    space.lda = config.lda;
    if let Some(m) = &topics {
        space.describe_topics(m, TOPIC_TOP_TOKENS);
    }
    space.provenance = Some(Provenance::new(config.forest.seed, config));
    let matrix = apply_bins(&raw, &space);
    let row_labels = matrix
        .communities
        .iter()
        .map(|c| labels.label(c).ok_or_else(|| PipelineError::Unlabeled(c.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Features {
        space,
        matrix,
        labels: row_labels,
        topics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub features: Features,
    pub forest: Forest,
    pub loocv: Option<LoocvReport>,
}

/// Builds features, trains the forest on every community and, if asked,
/// runs leave-one-out cross-validation on the same bins.
pub fn train(
    corpus: &CommunityCorpus,
    labels: &CommunityLabels,
    config: &TrainConfig,
    with_loocv: bool,
    exec: Execution,
) -> Result<Trained, PipelineError> {
    let features = build_features(corpus, labels, config, exec)?;
    let mut forest = train_forest(&features.matrix, &features.labels, &config.forest, exec)?;
    forest.provenance = Some(Provenance::new(config.forest.seed, config));
    let report = if with_loocv {
        Some(loocv(&features.matrix, &features.labels, &config.forest, exec)?)
    } else {
        None
    };
    Ok(Trained {
        features,
        forest,
        loocv: report,
    })
}
