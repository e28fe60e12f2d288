//! Compiles a [`Forest`] into a [`QuizSpec`]: one three-choice question per
//! distinct feature tested anywhere in the forest, and trees rewritten to
//! reference question ids.
//!
//! Question text comes from a template bank (`templates.json`) and may be
//! replaced by human edits (`overrides.json`). Both are plain JSON so the
//! manual review step stays a file edit followed by a recompile.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Bin, FeatureId, FeatureKind, FeatureSpace};
use crate::fingerprint::{self, Provenance};
use crate::forest::{Forest, Node};

#[derive(Debug, Error)]
pub enum QuizError {
    #[error("no template or override for: {}", join(.0))]
    Uncovered(Vec<FeatureId>),
    #[error("override for {feature} must list exactly 3 choices, got {got}")]
    BadOverride { feature: FeatureId, got: usize },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn join(ids: &[FeatureId]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, QuizError> {
    let text = std::fs::read_to_string(path).map_err(|source| QuizError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| QuizError::Parse {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    /// Pattern with `{x}` (the food name) or `{desc}` (a meal description).
    pub text: String,
    pub choices: [String; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateClass {
    /// "How often do you eat x?"
    Food,
    /// "What proportion of your meals ...?"
    Proportion,
}

/// Question templates plus the food/non-food classification. Serialized as
/// `templates.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionBank {
    pub templates: BTreeMap<TemplateClass, Template>,
    /// Tokens (without `#`) that name a food.
    #[serde(default)]
    pub food_words: BTreeSet<String>,
    /// Curated `{desc}` phrases for proportion questions, keyed by feature.
    #[serde(default)]
    pub descriptions: BTreeMap<FeatureId, String>,
    /// Image references keyed by bare token.
    #[serde(default)]
    pub images: BTreeMap<String, String>,
}

impl QuestionBank {
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../data/templates.json")).expect("bundled bank parses")
    }

    pub fn load(path: &Path) -> Result<Self, QuizError> {
        read_json(path)
    }

    pub fn classify(&self, feature: &FeatureId) -> TemplateClass {
        match feature.kind {
            FeatureKind::Topic => TemplateClass::Proportion,
            FeatureKind::Word | FeatureKind::Hashtag => {
                if self.food_words.contains(feature.bare_key()) {
                    TemplateClass::Food
                } else {
                    TemplateClass::Proportion
                }
            }
        }
    }
}

/// A human edit for one feature's question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Override {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

/// `overrides.json`: feature id → edit.
pub type Overrides = BTreeMap<FeatureId, Override>;

pub fn load_overrides(path: &Path) -> Result<Overrides, QuizError> {
    read_json(path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub bin: Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionSource {
    AutoDraft,
    HumanEdited,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub feature: FeatureId,
    pub text: String,
    pub choices: Vec<Choice>,
    pub source: QuestionSource,
    #[serde(default)]
    pub needs_review: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

impl Question {
    /// Whether the choices map one-to-one onto bins 0, 1, 2.
    pub fn choices_are_bijective(&self) -> bool {
        let bins: BTreeSet<Bin> = self.choices.iter().map(|c| c.bin).collect();
        self.choices.len() == 3 && bins.len() == 3
    }
}

/// Stable question id derived from the feature alone, so text edits never
/// break tree references.
pub fn question_id(feature: &FeatureId) -> String {
    format!("q_{}", &fingerprint::of_bytes(feature.to_string().as_bytes())[..12])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum QuizNode {
    Ask {
        question: String,
        threshold: u8,
        no: Box<QuizNode>,
        yes: Box<QuizNode>,
    },
    Leaf {
        label: bool,
    },
}

impl QuizNode {
    fn from_forest(node: &Node) -> QuizNode {
        match node {
            Node::Leaf { label, .. } => QuizNode::Leaf { label: *label },
            Node::Split {
                feature,
                threshold,
                no,
                yes,
            } => QuizNode::Ask {
                question: question_id(feature),
                threshold: *threshold,
                no: Box::new(QuizNode::from_forest(no)),
                yes: Box::new(QuizNode::from_forest(yes)),
            },
        }
    }

    /// Calls `f(path, question, threshold)` for every internal node, pre-order.
    pub fn walk<'a>(&'a self, path: &mut String, f: &mut impl FnMut(&str, &'a str, u8)) {
        if let QuizNode::Ask {
            question,
            threshold,
            no,
            yes,
        } = self
        {
            f(path, question, *threshold);
            let len = path.len();
            path.push_str(".no");
            no.walk(path, f);
            path.truncate(len);
            path.push_str(".yes");
            yes.walk(path, f);
            path.truncate(len);
        }
    }

    pub fn internal_nodes(&self) -> usize {
        match self {
            QuizNode::Leaf { .. } => 0,
            QuizNode::Ask { no, yes, .. } => 1 + no.internal_nodes() + yes.internal_nodes(),
        }
    }
}

/// The compiled questionnaire. Serialized as `quiz.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizSpec {
    pub questions: Vec<Question>,
    pub trees: Vec<QuizNode>,
    pub forest_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl QuizSpec {
    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint::of_json(self)
    }

    pub fn internal_nodes(&self) -> usize {
        self.trees.iter().map(QuizNode::internal_nodes).sum()
    }

    pub fn load(path: &Path) -> Result<Self, QuizError> {
        read_json(path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("quiz serializes")
    }

    /// Structural checks that need no forest.
    pub fn self_check(&self) -> CoverageReport {
        let mut failures = Vec::new();
        let mut by_id: BTreeMap<&str, &Question> = BTreeMap::new();
        let mut features = BTreeSet::new();
        for q in &self.questions {
            if by_id.insert(&q.id, q).is_some() {
                failures.push(CoverageFailure::DuplicateQuestion { question: q.id.clone() });
            }
            if !features.insert(&q.feature) {
                failures.push(CoverageFailure::DuplicateFeature {
                    feature: q.feature.clone(),
                });
            }
            if !q.choices_are_bijective() {
                failures.push(CoverageFailure::BadChoices { question: q.id.clone() });
            }
        }
        let mut used = BTreeSet::new();
        for (t, tree) in self.trees.iter().enumerate() {
            tree.walk(&mut "root".to_string(), &mut |path, qid, th| {
                if !by_id.contains_key(qid) {
                    failures.push(CoverageFailure::OrphanedNode {
                        tree: t,
                        path: path.to_string(),
                        question: qid.to_string(),
                    });
                }
                if th > 1 {
                    failures.push(CoverageFailure::BadThreshold {
                        tree: t,
                        path: path.to_string(),
                        threshold: th,
                    });
                }
                used.insert(qid.to_string());
            });
        }
        for q in &self.questions {
            if !used.contains(&q.id) {
                failures.push(CoverageFailure::UnusedQuestion { question: q.id.clone() });
            }
        }
        CoverageReport { failures }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoverageFailure {
    OrphanedNode { tree: usize, path: String, question: String },
    UnusedQuestion { question: String },
    DuplicateQuestion { question: String },
    DuplicateFeature { feature: FeatureId },
    BadChoices { question: String },
    BadThreshold { tree: usize, path: String, threshold: u8 },
    FingerprintMismatch { expected: String, found: String },
    TreeCountMismatch { expected: usize, found: usize },
    StructureMismatch { tree: usize, path: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub failures: Vec<CoverageFailure>,
}

impl CoverageReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// What the compiler did with each feature.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftReport {
    pub drafted: Vec<FeatureId>,
    pub needs_review: Vec<FeatureId>,
    pub overridden: Vec<FeatureId>,
    /// Overrides naming features the forest never tests.
    pub unused_overrides: Vec<FeatureId>,
}

/// Distinct features in first-seen pre-order, tree by tree.
fn features_in_order(forest: &Forest) -> Vec<FeatureId> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in &forest.trees {
        t.for_each_predicate(&mut |f, _| {
            if seen.insert(f.clone()) {
                out.push(f.clone());
            }
        });
    }
    out
}

fn draft(
    feature: &FeatureId,
    bank: &QuestionBank,
    space: Option<&FeatureSpace>,
) -> Option<(String, [String; 3], bool)> {
    let class = bank.classify(feature);
    let template = bank.templates.get(&class)?;
    let (text, review) = match class {
        TemplateClass::Food => (template.text.replace("{x}", feature.bare_key()), false),
        TemplateClass::Proportion => {
            let (desc, review) = match bank.descriptions.get(feature) {
                Some(d) => (d.clone(), false),
                None => (fallback_description(feature, space), true),
            };
            (template.text.replace("{desc}", &desc), review)
        }
    };
    Some((text, template.choices.clone(), review))
}

fn fallback_description(feature: &FeatureId, space: Option<&FeatureSpace>) -> String {
    match feature.kind {
        FeatureKind::Topic => {
            let top = space
                .and_then(|s| s.get(feature))
                .and_then(|e| e.top_tokens.as_ref())
                .map(|t| t.iter().take(3).cloned().collect::<Vec<_>>())
                .unwrap_or_default();
            if top.is_empty() {
                format!("fall into food topic {}", feature.key)
            } else {
                format!("include things like {}", top.join(", "))
            }
        }
        _ => format!("involve {}", feature.bare_key()),
    }
}

/// Compiles the forest. Overrides win over drafts; a feature with neither
/// is a compile error listing every such feature.
pub fn compile_quiz(
    forest: &Forest,
    bank: &QuestionBank,
    overrides: &Overrides,
    space: Option<&FeatureSpace>,
) -> Result<(QuizSpec, DraftReport), QuizError> {
    let features = features_in_order(forest);
    let mut report = DraftReport::default();
    let mut uncovered = Vec::new();
    let mut questions = Vec::with_capacity(features.len());

    for feature in &features {
        let image = bank.images.get(feature.bare_key()).cloned();
        let question = if let Some(ov) = overrides.get(feature) {
            let choices: [String; 3] = match &ov.choices {
                Some(c) => c.clone().try_into().map_err(|c: Vec<String>| QuizError::BadOverride {
                    feature: feature.clone(),
                    got: c.len(),
                })?,
                None => match bank.templates.get(&bank.classify(feature)) {
                    Some(t) => t.choices.clone(),
                    None => {
                        uncovered.push(feature.clone());
                        continue;
                    }
                },
            };
            report.overridden.push(feature.clone());
            build_question(feature, ov.text.clone(), choices, QuestionSource::HumanEdited, false, ov.image.clone().or(image))
        } else if let Some((text, choices, review)) = draft(feature, bank, space) {
            report.drafted.push(feature.clone());
            if review {
                report.needs_review.push(feature.clone());
            }
            build_question(feature, text, choices, QuestionSource::AutoDraft, review, image)
        } else {
            uncovered.push(feature.clone());
            continue;
        };
        questions.push(question);
    }
    if !uncovered.is_empty() {
        return Err(QuizError::Uncovered(uncovered));
    }
    let used: BTreeSet<&FeatureId> = features.iter().collect();
    report.unused_overrides = overrides.keys().filter(|f| !used.contains(f)).cloned().collect();

    Ok((
        QuizSpec {
            questions,
            trees: forest.trees.iter().map(QuizNode::from_forest).collect(),
            forest_fingerprint: forest.fingerprint(),
            provenance: Some(Provenance::new(forest.params.seed, &(forest.fingerprint(), bank, overrides))),
        },
        report,
    ))
}

fn build_question(
    feature: &FeatureId,
    text: String,
    choices: [String; 3],
    source: QuestionSource,
    needs_review: bool,
    image: Option<String>,
) -> Question {
    Question {
        id: question_id(feature),
        feature: feature.clone(),
        text,
        choices: choices
            .into_iter()
            .zip(Bin::ALL)
            .map(|(label, bin)| Choice { label, bin })
            .collect(),
        source,
        needs_review,
        image,
    }
}

/// Checks that `spec` covers every decision node of `forest` and nothing else.
pub fn validate_quiz(spec: &QuizSpec, forest: &Forest) -> CoverageReport {
    let mut report = spec.self_check();
    let expected = forest.fingerprint();
    if spec.forest_fingerprint != expected {
        report.failures.push(CoverageFailure::FingerprintMismatch {
            expected,
            found: spec.forest_fingerprint.clone(),
        });
    }
    if spec.trees.len() != forest.trees.len() {
        report.failures.push(CoverageFailure::TreeCountMismatch {
            expected: forest.trees.len(),
            found: spec.trees.len(),
        });
    }
    let features: BTreeMap<&str, &FeatureId> =
        spec.questions.iter().map(|q| (q.id.as_str(), &q.feature)).collect();
    for (t, (qt, ft)) in spec.trees.iter().zip(&forest.trees).enumerate() {
        mirror(qt, ft, &features, t, "root".to_string(), &mut report.failures);
    }
    report
}

fn mirror(
    q: &QuizNode,
    f: &Node,
    features: &BTreeMap<&str, &FeatureId>,
    tree: usize,
    path: String,
    out: &mut Vec<CoverageFailure>,
) {
    match (q, f) {
        (QuizNode::Leaf { label: a }, Node::Leaf { label: b, .. }) if a == b => {}
        (
            QuizNode::Ask {
                question,
                threshold,
                no,
                yes,
            },
            Node::Split {
                feature,
                threshold: ft,
                no: fno,
                yes: fyes,
            },
        ) if threshold == ft => {
            // A missing question is already reported as orphaned.
            if let Some(&qf) = features.get(question.as_str()) {
                if qf != feature {
                    out.push(CoverageFailure::StructureMismatch {
                        tree,
                        path: path.clone(),
                    });
                }
            }
            mirror(no, fno, features, tree, format!("{path}.no"), out);
            mirror(yes, fyes, features, tree, format!("{path}.yes"), out);
        }
        _ => out.push(CoverageFailure::StructureMismatch { tree, path }),
    }
}
