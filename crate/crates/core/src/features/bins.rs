use serde::{Deserialize, Serialize};

use super::{Bin, BinnedMatrix, FeatureEntry, FeatureSpace, Normalization, RawMatrix};

/// Raw-value cut points: bin 0 if `v <= low`, 1 if `low < v <= high`, else 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub low: f64,
    pub high: f64,
}

impl Thresholds {
    pub fn bin(&self, v: f64) -> Bin {
        if v <= self.low {
            Bin::LOW
        } else if v <= self.high {
            Bin::MID
        } else {
            Bin::HIGH
        }
    }
}

/// Nearest-rank tertiles: `sorted[(n-1)/3]` and `sorted[2(n-1)/3]`.
///
/// Panics on an empty slice or NaN values.
pub fn tertile_thresholds(values: &[f64]) -> Thresholds {
    assert!(!values.is_empty(), "tertiles of an empty column");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in feature column"));
    let n = sorted.len();
    Thresholds {
        low: sorted[(n - 1) / 3],
        high: sorted[2 * (n - 1) / 3],
    }
}

/// Fits per-feature tertile thresholds over the rows of `raw`.
pub fn fit_bins(raw: &RawMatrix, min_count: usize, normalization: Normalization) -> FeatureSpace {
    assert!(!raw.communities.is_empty(), "fit_bins needs at least one community");
    let features = raw
        .features
        .iter()
        .enumerate()
        .map(|(j, id)| FeatureEntry {
            id: id.clone(),
            thresholds: tertile_thresholds(&raw.column(j)),
            top_tokens: None,
        })
        .collect();
    FeatureSpace {
        features,
        min_count,
        normalization,
        lda: None,
        provenance: None,
    }
}

/// Bins `raw` with the fitted thresholds of `space`. Features of `space` the
/// matrix lacks are treated as raw 0; extra matrix columns are ignored.
pub fn apply_bins(raw: &RawMatrix, space: &FeatureSpace) -> BinnedMatrix {
    let cols: Vec<Option<usize>> = space.ids().map(|id| raw.feature_index(id)).collect();
    let mut bins = Vec::with_capacity(raw.communities.len());
    let mut kept = Vec::with_capacity(raw.communities.len());
    for row in &raw.values {
        let vals: Vec<f64> = cols.iter().map(|c| c.map_or(0.0, |j| row[j])).collect();
        bins.push(
            vals.iter()
                .zip(&space.features)
                .map(|(&v, e)| e.thresholds.bin(v))
                .collect(),
        );
        kept.push(vals);
    }
    BinnedMatrix {
        communities: raw.communities.clone(),
        features: space.ids().cloned().collect(),
        bins,
        raw: kept,
    }
}
