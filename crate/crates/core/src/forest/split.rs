use serde::{Deserialize, Serialize};

use crate::features::Bin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    #[default]
    Gini,
    InfoGain,
}

impl SplitCriterion {
    /// Impurity of a node holding `neg` negatives and `pos` positives.
    pub fn impurity(self, neg: usize, pos: usize) -> f64 {
        let n = (neg + pos) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let p = pos as f64 / n;
        let q = 1.0 - p;
        match self {
            SplitCriterion::Gini => 1.0 - p * p - q * q,
            SplitCriterion::InfoGain => {
                let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
                h(p) + h(q)
            }
        }
    }

    /// Parent impurity minus the size-weighted impurity of the two sides.
    /// `no` and `yes` are `[negatives, positives]`.
    pub fn gain(self, no: [usize; 2], yes: [usize; 2]) -> f64 {
        let n_no = no[0] + no[1];
        let n_yes = yes[0] + yes[1];
        let n = (n_no + n_yes) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let parent = self.impurity(no[0] + yes[0], no[1] + yes[1]);
        let children = (n_no as f64 * self.impurity(no[0], no[1])
            + n_yes as f64 * self.impurity(yes[0], yes[1]))
            / n;
        (parent - children).max(0.0)
    }
}

/// Class counts per bin: `counts[bin] = [negatives, positives]`.
pub(crate) fn bin_class_counts<I: IntoIterator<Item = (Bin, bool)>>(it: I) -> [[usize; 2]; 3] {
    let mut counts = [[0usize; 2]; 3];
    for (b, label) in it {
        counts[b.get() as usize][usize::from(label)] += 1;
    }
    counts
}

/// Splits per-bin counts by the predicate `bin > t` into (no, yes).
pub(crate) fn partition(counts: &[[usize; 2]; 3], t: u8) -> ([usize; 2], [usize; 2]) {
    let mut no = [0; 2];
    let mut yes = [0; 2];
    for (b, c) in counts.iter().enumerate() {
        let side = if b as u8 > t { &mut yes } else { &mut no };
        side[0] += c[0];
        side[1] += c[1];
    }
    (no, yes)
}

/// Gain of the predicate `bin > t` on one feature column.
pub fn split_gain(bins: &[Bin], labels: &[bool], t: u8, criterion: SplitCriterion) -> f64 {
    assert!(t <= 1, "threshold must be 0 or 1");
    assert_eq!(bins.len(), labels.len());
    let counts = bin_class_counts(bins.iter().copied().zip(labels.iter().copied()));
    let (no, yes) = partition(&counts, t);
    criterion.gain(no, yes)
}
