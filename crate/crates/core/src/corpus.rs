//! Community-localized posts and community overweight labels.
//!
//! Posts come from `corpus.jsonl` (`{"community": "<id>", "text": "<post>"}`
//! per line) and labels from `labels.csv` (header `community,overweight_rate`).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{is_hashtag, tokenize};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate community `{0}` in labels")]
    DuplicateCommunity(String),
    #[error("overweight rate {rate} for `{community}` is outside [0, 100]")]
    RateOutOfRange { community: String, rate: f64 },
    #[error("labels file lists no communities")]
    NoCommunities,
}

impl CorpusError {
    pub fn is_io(&self) -> bool {
        matches!(self, CorpusError::Io { .. })
    }
}

pub const DEFAULT_MEAL_HASHTAGS: [&str; 7] = [
    "#breakfast",
    "#brunch",
    "#lunch",
    "#dinner",
    "#supper",
    "#snack",
    "#meal",
];

/// Hashtags a post must carry to be admitted. Matching is case-insensitive
/// and only considers `#`-prefixed tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashtagFilter(BTreeSet<String>);

impl HashtagFilter {
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        HashtagFilter(
            tags.into_iter()
                .map(|t| {
                    let t = t.as_ref().trim().to_lowercase();
                    if t.starts_with('#') {
                        t
                    } else {
                        format!("#{t}")
                    }
                })
                .collect(),
        )
    }

    pub fn matches(&self, text: &str) -> bool {
        tokenize(text)
            .iter()
            .any(|t| is_hashtag(t) && self.0.contains(t))
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for HashtagFilter {
    fn default() -> Self {
        HashtagFilter::new(DEFAULT_MEAL_HASHTAGS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub community: String,
    pub text: String,
}

/// Admitted posts grouped by community. Keys are exactly the labeled
/// communities, including those with no documents.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityCorpus {
    pub groups: BTreeMap<String, Vec<String>>,
    pub filter: HashtagFilter,
}

impl CommunityCorpus {
    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sizes(&self) -> BTreeMap<&str, usize> {
        self.groups.iter().map(|(c, d)| (c.as_str(), d.len())).collect()
    }

    /// Writes the corpus back out as JSONL, communities in key order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (community, docs) in &self.groups {
            for text in docs {
                let doc = Document {
                    community: community.clone(),
                    text: text.clone(),
                };
                serde_json::to_writer(&mut out, &doc)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedLine {
    pub line: usize,
    pub community: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub kept: usize,
    /// Lines with no filter hashtag or with blank text.
    pub discarded: usize,
    /// Lines naming a community absent from the labels.
    pub rejects: Vec<RejectedLine>,
    pub empty_communities: Vec<String>,
}

pub fn load_documents(
    path: &Path,
    filter: &HashtagFilter,
    labels: &CommunityLabels,
) -> Result<(CommunityCorpus, LoadReport), CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_documents(BufReader::new(file), filter, labels).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_documents<R: BufRead>(
    reader: R,
    filter: &HashtagFilter,
    labels: &CommunityLabels,
) -> Result<(CommunityCorpus, LoadReport), CorpusError> {
    let mut groups: BTreeMap<String, Vec<String>> =
        labels.communities().map(|c| (c.to_string(), Vec::new())).collect();
    let mut report = LoadReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let Some(docs) = groups.get_mut(&doc.community) else {
            report.rejects.push(RejectedLine {
                line: line_no,
                community: doc.community,
            });
            continue;
        };
        if doc.text.trim().is_empty() || !filter.matches(&doc.text) {
            report.discarded += 1;
            continue;
        }
        docs.push(doc.text);
        report.kept += 1;
    }
    report.empty_communities = groups
        .iter()
        .filter(|(_, d)| d.is_empty())
        .map(|(c, _)| c.clone())
        .collect();
    Ok((
        CommunityCorpus {
            groups,
            filter: filter.clone(),
        },
        report,
    ))
}

/// Per-community overweight rates and the derived binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityLabels {
    pub rates: BTreeMap<String, f64>,
    pub median: f64,
    pub labels: BTreeMap<String, bool>,
    /// Whether a community exactly at the median is labeled positive.
    pub median_tie_positive: bool,
}

impl CommunityLabels {
    pub fn from_rates<I, S>(rates: I, median_tie_positive: bool) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (c, rate) in rates {
            let c = c.into();
            if !(0.0..=100.0).contains(&rate) {
                return Err(CorpusError::RateOutOfRange { community: c, rate });
            }
            if map.insert(c.clone(), rate).is_some() {
                return Err(CorpusError::DuplicateCommunity(c));
            }
        }
        if map.is_empty() {
            return Err(CorpusError::NoCommunities);
        }
        let median = median(map.values().copied());
        let labels = map
            .iter()
            .map(|(c, &r)| (c.clone(), r > median || (median_tie_positive && r == median)))
            .collect();
        Ok(CommunityLabels {
            rates: map,
            median,
            labels,
            median_tie_positive,
        })
    }

    pub fn communities(&self) -> impl Iterator<Item = &str> {
        self.rates.keys().map(String::as_str)
    }

    pub fn label(&self, community: &str) -> Option<bool> {
        self.labels.get(community).copied()
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.values().filter(|&&l| l).count()
    }

    /// Labels in the order of `communities`; `None` for unknown ids.
    pub fn aligned(&self, communities: &[String]) -> Option<Vec<bool>> {
        communities.iter().map(|c| self.label(c)).collect()
    }
}

/// Median; the mean of the two central values for an even count.
pub fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    community: String,
    overweight_rate: f64,
}

pub fn load_labels(path: &Path, median_tie_positive: bool) -> Result<CommunityLabels, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_labels(file, median_tie_positive)
}

pub fn read_labels<R: Read>(reader: R, median_tie_positive: bool) -> Result<CommunityLabels, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| CorpusError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["community", "overweight_rate"] {
        return Err(CorpusError::Malformed {
            line: 1,
            message: "expected header `community,overweight_rate`".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<LabelRow>().enumerate() {
        let row = rec.map_err(|e| CorpusError::Malformed {
            line: i + 2,
            message: e.to_string(),
        })?;
        rows.push((row.community, row.overweight_rate));
    }
    CommunityLabels::from_rates(rows, median_tie_positive)
}

/// Writes labels as `community,overweight_rate` CSV.
pub fn write_labels<W: Write>(rates: &BTreeMap<String, f64>, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["community", "overweight_rate"])?;
    for (c, r) in rates {
        w.write_record([c.as_str(), &r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
