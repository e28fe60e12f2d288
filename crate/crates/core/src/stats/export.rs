use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{coarsen_location, Gender, HandleHash, Location, RespondentRecord, Scored};
use crate::features::{Bin, FeatureId};
use crate::fingerprint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Overweight,
    NotOverweight,
}

impl From<bool> for Prediction {
    fn from(b: bool) -> Self {
        if b {
            Prediction::Overweight
        } else {
            Prediction::NotOverweight
        }
    }
}

/// One anonymized respondent. Session ids and handles are re-keyed with the
/// export salt; locations are coarsened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub respondent: String,
    pub answers: BTreeMap<FeatureId, Bin>,
    pub prediction: Prediction,
    pub votes_true: usize,
    pub votes_total: usize,
    pub tie: bool,
    pub bmi: Option<f64>,
    pub correct: Option<bool>,
    pub height_m: Option<f64>,
    pub weight_kg: Option<f64>,
    pub age: Option<f64>,
    pub gender: Option<Gender>,
    pub location: Option<Location>,
    pub handles: Vec<HandleHash>,
    pub comment: Option<String>,
}

impl ExportRecord {
    pub fn from_record(r: &RespondentRecord, salt: &str) -> Self {
        let d = &r.demographics;
        ExportRecord {
            respondent: fingerprint::salted(salt, &r.session_id),
            answers: r.answers.clone(),
            prediction: r.prediction.label.into(),
            votes_true: r.prediction.votes_true,
            votes_total: r.prediction.votes_total,
            tie: r.prediction.tie,
            bmi: r.bmi,
            correct: r.correct,
            height_m: d.height_m,
            weight_kg: d.weight_kg,
            age: d.age,
            gender: d.gender,
            location: d.location.as_deref().map(coarsen_location),
            handles: d
                .handles
                .iter()
                .map(|h| HandleHash {
                    platform: h.platform.clone(),
                    hash: fingerprint::salted(salt, &h.hash),
                })
                .collect(),
            comment: d.comment.clone(),
        }
    }
}

impl Scored for ExportRecord {
    fn bmi(&self) -> Option<f64> {
        self.bmi
    }
    fn predicted(&self) -> bool {
        self.prediction == Prediction::Overweight
    }
    fn tie(&self) -> bool {
        self.tie
    }
    fn commented(&self) -> bool {
        self.comment.as_deref().is_some_and(|c| !c.trim().is_empty())
    }
}

/// JSON Lines, one respondent per line.
pub fn export_anonymized(records: &[RespondentRecord], salt: &str) -> String {
    let mut out = String::new();
    for r in records {
        let e = ExportRecord::from_record(r, salt);
        out.push_str(&serde_json::to_string(&e).expect("export record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_export(text: &str) -> Result<Vec<ExportRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Session, Status};
    use crate::forest::Vote;
    use crate::stats::{accuracy_report, Cutoff, Demographics, DemographicsInput};

    fn record(id: &str, w: f64, predicted: bool) -> RespondentRecord {
        let input = DemographicsInput {
            height: Some(1.75),
            weight: Some(w),
            location: Some("Austin, TX".into()),
            instagram: Some("someone".into()),
            comment: Some("nice".into()),
            ..Default::default()
        };
        let d = Demographics::from_intake(&input, "intake").unwrap();
        let session = Session {
            session_id: id.into(),
            quiz_fingerprint: "fp".into(),
            started_ms: 0,
            answers: BTreeMap::new(),
            transcript: Vec::new(),
            status: Status::Complete,
            prediction: Some(Vote::from_labels([predicted])),
            tree_labels: Some(vec![predicted]),
        };
        RespondentRecord::new(&session, d, &Cutoff::default()).unwrap()
    }

    #[test]
    fn roundtrip_preserves_scores_and_hides_ids() {
        let recs = vec![record("abc", 100.0, true), record("def", 60.0, true), record("ghi", 60.0, false)];
        let text = export_anonymized(&recs, "export-salt");
        assert!(!text.contains("abc"));
        assert!(!text.contains("someone"));
        assert!(!text.contains("Austin"));
        let back = read_export(&text).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0].location.as_ref().unwrap().label(), "US/Texas");
        let a = accuracy_report(&recs, &Cutoff::default()).unwrap();
        let b = accuracy_report(&back, &Cutoff::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(back[0].handles[0].hash, recs[0].demographics.handles[0].hash);
    }
}
