use serde::{Deserialize, Serialize};

use super::{Cutoff, RespondentRecord, StatsError};

/// What accuracy and engagement reports need from a record.
pub trait Scored {
    fn bmi(&self) -> Option<f64>;
    fn predicted(&self) -> bool;
    fn tie(&self) -> bool;
    fn commented(&self) -> bool;
}

impl Scored for RespondentRecord {
    fn bmi(&self) -> Option<f64> {
        self.bmi
    }
    fn predicted(&self) -> bool {
        self.prediction.label
    }
    fn tie(&self) -> bool {
        self.prediction.tie
    }
    fn commented(&self) -> bool {
        self.demographics.comment.as_deref().is_some_and(|c| !c.trim().is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub n: usize,
    pub correct: usize,
    /// Share of scored records in this class.
    pub proportion: f64,
    /// `None` when the class is empty.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub cutoff: Cutoff,
    pub n_records: usize,
    pub n_scored: usize,
    pub n_missing_bmi: usize,
    pub ties: usize,
    pub overall: f64,
    /// BMI at or above the cutoff.
    pub positive: ClassAccuracy,
    /// BMI below the cutoff.
    pub negative: ClassAccuracy,
}

impl AccuracyReport {
    /// `overall - Σ proportion·accuracy`; zero up to rounding.
    pub fn identity_residual(&self) -> f64 {
        let part = |c: &ClassAccuracy| c.proportion * c.accuracy.unwrap_or(0.0);
        self.overall - part(&self.positive) - part(&self.negative)
    }
}

pub fn accuracy_report<R: Scored>(records: &[R], cutoff: &Cutoff) -> Result<AccuracyReport, StatsError> {
    let mut counts = [[0usize; 2]; 2]; // [class][correct?]
    let mut missing = 0;
    let mut ties = 0;
    for r in records {
        if r.tie() {
            ties += 1;
        }
        let Some(b) = r.bmi() else {
            missing += 1;
            continue;
        };
        let truth = cutoff.label(b);
        counts[usize::from(truth)][usize::from(truth == r.predicted())] += 1;
    }
    let scored = records.len() - missing;
    if scored == 0 {
        return Err(StatsError::NoScoredRecords);
    }
    let class = |c: [usize; 2]| {
        let n = c[0] + c[1];
        ClassAccuracy {
            n,
            correct: c[1],
            proportion: n as f64 / scored as f64,
            accuracy: (n > 0).then(|| c[1] as f64 / n as f64),
        }
    };
    Ok(AccuracyReport {
        cutoff: *cutoff,
        n_records: records.len(),
        n_scored: scored,
        n_missing_bmi: missing,
        ties,
        overall: (counts[0][1] + counts[1][1]) as f64 / scored as f64,
        positive: class(counts[1]),
        negative: class(counts[0]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementStats {
    pub n_correct: usize,
    pub commented_correct: usize,
    pub n_incorrect: usize,
    pub commented_incorrect: usize,
    pub rate_correct: Option<f64>,
    pub rate_incorrect: Option<f64>,
    /// `rate_incorrect / rate_correct`; `None` when undefined.
    pub ratio: Option<f64>,
}

impl EngagementStats {
    pub fn from_counts(commented_correct: usize, n_correct: usize, commented_incorrect: usize, n_incorrect: usize) -> Self {
        let rate = |k: usize, n: usize| (n > 0).then(|| k as f64 / n as f64);
        let rate_correct = rate(commented_correct, n_correct);
        let rate_incorrect = rate(commented_incorrect, n_incorrect);
        let ratio = match (rate_correct, rate_incorrect) {
            (Some(c), Some(i)) if c > 0.0 => Some(i / c),
            _ => None,
        };
        EngagementStats {
            n_correct,
            commented_correct,
            n_incorrect,
            commented_incorrect,
            rate_correct,
            rate_incorrect,
            ratio,
        }
    }
}

/// Comment rates among correctly and incorrectly classified respondents.
pub fn engagement_stats<R: Scored>(records: &[R], cutoff: &Cutoff) -> EngagementStats {
    let mut k = [0usize; 2];
    let mut n = [0usize; 2];
    for r in records {
        if let Some(b) = r.bmi() {
            let correct = usize::from(cutoff.label(b) == r.predicted());
            n[correct] += 1;
            k[correct] += usize::from(r.commented());
        }
    }
    EngagementStats::from_counts(k[1], n[1], k[0], n[0])
}
