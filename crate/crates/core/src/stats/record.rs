use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bmi, Cutoff, StatsError, Units};
use crate::engine::{Session, TranscriptEntry};
use crate::features::{Bin, FeatureId};
use crate::fingerprint;
use crate::forest::Vote;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    Other,
    Undisclosed,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
            Gender::Undisclosed => "undisclosed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HandleHash {
    pub platform: String,
    pub hash: String,
}

/// The voluntary form as submitted; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemographicsInput {
    #[serde(default)]
    pub height: Option<f64>,
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub age: Option<f64>,
    #[serde(default)]
    pub gender: Option<Gender>,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub twitter: Option<String>,
    #[serde(default)]
    pub instagram: Option<String>,
    #[serde(default)]
    pub facebook: Option<String>,
    #[serde(default)]
    pub comment: Option<String>,
}

/// Stored demographics: SI units, handles only as salted hashes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub height_m: Option<f64>,
    pub weight_kg: Option<f64>,
    pub age: Option<f64>,
    pub gender: Option<Gender>,
    pub location: Option<String>,
    #[serde(default)]
    pub handles: Vec<HandleHash>,
    pub comment: Option<String>,
}

fn normalize_handle(h: &str) -> String {
    h.trim().trim_start_matches('@').to_lowercase()
}

/// Removes `@mentions` and any of the raw handles from free text.
fn scrub(text: &str, handles: &[String]) -> String {
    let words: Vec<String> = text
        .split_whitespace()
        .map(|w| {
            let lower = w.to_lowercase();
            let bare = lower.trim_matches(|c: char| !(c.is_alphanumeric() || c == '_' || c == '.'));
            if w.starts_with('@') || handles.iter().any(|h| !h.is_empty() && lower.contains(h.as_str())) || handles.iter().any(|h| h == bare) {
                "[handle]".to_string()
            } else {
                w.to_string()
            }
        })
        .collect();
    words.join(" ")
}

impl Demographics {
    /// Validates and converts a submitted form. Raw handles are hashed with
    /// `salt` and scrubbed from the comment.
    pub fn from_intake(input: &DemographicsInput, salt: &str) -> Result<Self, StatsError> {
        let (weight_kg, height_m) = match (input.weight, input.height) {
            (Some(w), Some(h)) => {
                let (kg, m) = input.units.to_si(w, h);
                bmi(kg, m)?;
                (Some(kg), Some(m))
            }
            (Some(w), None) => {
                let (kg, _) = input.units.to_si(w, 1.0);
                bmi(kg, 1.7)?;
                (Some(kg), None)
            }
            (None, Some(h)) => {
                let (_, m) = input.units.to_si(70.0, h);
                bmi(70.0, m)?;
                (None, Some(m))
            }
            (None, None) => (None, None),
        };
        if let Some(a) = input.age {
            if !(a > 0.0 && a < 130.0) {
                return Err(StatsError::ImplausibleAge(a));
            }
        }
        let raw: Vec<(&str, String)> = [
            ("twitter", &input.twitter),
            ("instagram", &input.instagram),
            ("facebook", &input.facebook),
        ]
        .into_iter()
        .filter_map(|(p, h)| h.as_deref().map(|h| (p, normalize_handle(h))))
        .filter(|(_, h)| !h.is_empty())
        .collect();
        let handles = raw
            .iter()
            .map(|(p, h)| HandleHash {
                platform: p.to_string(),
                hash: fingerprint::salted(salt, h),
            })
            .collect();
        let raw_handles: Vec<String> = raw.into_iter().map(|(_, h)| h).collect();
        Ok(Demographics {
            height_m,
            weight_kg,
            age: input.age,
            gender: input.gender,
            location: input.location.as_ref().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()),
            handles,
            comment: input
                .comment
                .as_deref()
                .map(|c| scrub(c, &raw_handles))
                .filter(|c| !c.trim().is_empty()),
        })
    }

    pub fn bmi(&self) -> Option<f64> {
        match (self.weight_kg, self.height_m) {
            (Some(w), Some(h)) => bmi(w, h).ok(),
            _ => None,
        }
    }
}

/// A finished session joined with what the participant reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentRecord {
    pub session_id: String,
    pub transcript: Vec<TranscriptEntry>,
    pub answers: BTreeMap<FeatureId, Bin>,
    pub prediction: Vote,
    pub demographics: Demographics,
    pub bmi: Option<f64>,
    pub true_label: Option<bool>,
    pub correct: Option<bool>,
}

impl RespondentRecord {
    pub fn new(session: &Session, demographics: Demographics, cutoff: &Cutoff) -> Result<Self, StatsError> {
        let prediction = session.prediction.ok_or(StatsError::IncompleteSession)?;
        let bmi = demographics.bmi();
        let true_label = bmi.map(|b| cutoff.label(b));
        Ok(RespondentRecord {
            session_id: session.session_id.clone(),
            transcript: session.transcript.clone(),
            answers: session.answers.clone(),
            prediction,
            demographics,
            bmi,
            true_label,
            correct: true_label.map(|t| t == prediction.label),
        })
    }
}
