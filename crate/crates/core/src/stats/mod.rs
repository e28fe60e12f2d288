//! Individual evaluation: BMI, accuracy with per-class decomposition,
//! engagement rates, demographic summaries, and anonymized export.

mod anthropometry;
mod demographics;
mod export;
mod location;
mod record;
mod report;

pub use anthropometry::{bmi, bmi_from_units, label_individual, Cutoff, Units, IN_TO_M, LB_TO_KG};
pub use demographics::{demographics_summary, CsvTable, DemographicTables};
pub use export::{export_anonymized, read_export, ExportRecord, Prediction};
pub use location::{coarsen_location, Location};
pub use record::{Demographics, DemographicsInput, Gender, HandleHash, RespondentRecord};
pub use report::{accuracy_report, engagement_stats, AccuracyReport, ClassAccuracy, EngagementStats, Scored};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("implausible_anthropometry: {0}")]
    ImplausibleAnthropometry(String),
    #[error("implausible age {0}")]
    ImplausibleAge(f64),
    #[error("no record carries a BMI")]
    NoScoredRecords,
    #[error("session is not complete")]
    IncompleteSession,
}
