//! Interpretable community classifier over food language, compiled into an
//! adaptive Likert quiz.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`corpus`] loads community-localized posts and the community labels.
//! 2. [`features`] tokenizes, counts, optionally adds LDA topic proportions,
//!    and bins every feature into tertiles `{0, 1, 2}`.
//! 3. [`forest`] grows a small random forest over the bins and evaluates it
//!    with leave-one-out cross-validation.
//! 4. [`quizkit`] turns each distinct feature tested by the forest into one
//!    three-choice question and rewrites the trees to reference questions.
//! 5. [`engine`] walks the trees for a respondent, asking only the questions
//!    their answers make relevant, and [`stats`] scores predictions against
//!    self-reported BMI.

pub mod corpus;
pub mod engine;
pub mod exec;
pub mod features;
pub mod fingerprint;
pub mod forest;
pub mod pipeline;
pub mod quizkit;
pub mod seed;
pub mod stats;
pub mod synth;

pub use corpus::{CommunityCorpus, CommunityLabels, HashtagFilter};
pub use engine::{QuizRunner, Session};
pub use exec::Execution;
pub use features::{Bin, BinnedMatrix, FeatureId, FeatureKind, FeatureSpace, RawMatrix};
pub use forest::{Forest, ForestParams, Vote};
pub use quizkit::{QuestionBank, QuizSpec};
