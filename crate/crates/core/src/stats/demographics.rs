use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{coarsen_location, Gender, RespondentRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn new(name: &str, header: &[&str]) -> Self {
        CsvTable {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Summary tables for external plotting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DemographicTables {
    pub age: CsvTable,
    pub bmi: CsvTable,
    pub gender: CsvTable,
    pub location: CsvTable,
    pub completeness: CsvTable,
}

impl DemographicTables {
    pub fn tables(&self) -> [&CsvTable; 5] {
        [&self.age, &self.bmi, &self.gender, &self.location, &self.completeness]
    }

    /// Writes `demographics_<name>.csv` for every table.
    pub fn write_all(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for t in self.tables() {
            let p = dir.join(format!("demographics_{}.csv", t.name));
            std::fs::write(&p, t.to_csv())?;
            out.push(p);
        }
        Ok(out)
    }
}

pub const AGE_BIN_WIDTH: f64 = 5.0;
pub const BMI_BIN_WIDTH: f64 = 2.0;

/// Histogram over bins `[k·w, (k+1)·w)` spanning the data; empty input gives no rows.
fn histogram(values: &[f64], width: f64) -> BTreeMap<i64, usize> {
    let mut h = BTreeMap::new();
    for &v in values {
        *h.entry((v / width).floor() as i64).or_default() += 1;
    }
    if let (Some(&lo), Some(&hi)) = (h.keys().next(), h.keys().next_back()) {
        for k in lo..=hi {
            h.entry(k).or_insert(0);
        }
    }
    h
}

fn edge(k: i64, width: f64) -> String {
    format!("{}", k as f64 * width)
}

pub fn demographics_summary(records: &[RespondentRecord]) -> DemographicTables {
    let mut age = CsvTable::new("age", &["bin_start", "bin_end", "count"]);
    let ages: Vec<f64> = records.iter().filter_map(|r| r.demographics.age).collect();
    for (k, n) in histogram(&ages, AGE_BIN_WIDTH) {
        age.rows.push(vec![edge(k, AGE_BIN_WIDTH), edge(k + 1, AGE_BIN_WIDTH), n.to_string()]);
    }

    let mut bmi = CsvTable::new("bmi", &["group", "bin_start", "bin_end", "count"]);
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(b) = r.bmi {
            groups.entry("all").or_default().push(b);
            let g = r.demographics.gender.map_or("unknown", Gender::as_str);
            groups.entry(g).or_default().push(b);
        }
    }
    let order = ["all", "female", "male", "other", "undisclosed", "unknown"];
    for g in order {
        if let Some(vals) = groups.get(g) {
            for (k, n) in histogram(vals, BMI_BIN_WIDTH) {
                bmi.rows.push(vec![g.to_string(), edge(k, BMI_BIN_WIDTH), edge(k + 1, BMI_BIN_WIDTH), n.to_string()]);
            }
        }
    }

    let mut gender = CsvTable::new("gender", &["gender", "count"]);
    let mut gc: BTreeMap<Gender, usize> = BTreeMap::new();
    for g in records.iter().filter_map(|r| r.demographics.gender) {
        *gc.entry(g).or_default() += 1;
    }
    for (g, n) in gc {
        gender.rows.push(vec![g.as_str().to_string(), n.to_string()]);
    }

    let mut location = CsvTable::new("location", &["location", "count"]);
    let mut lc: BTreeMap<String, usize> = BTreeMap::new();
    for l in records.iter().filter_map(|r| r.demographics.location.as_deref()) {
        *lc.entry(coarsen_location(l).label()).or_default() += 1;
    }
    for (l, n) in lc {
        location.rows.push(vec![l, n.to_string()]);
    }

    let mut completeness = CsvTable::new("completeness", &["field", "provided", "total"]);
    let total = records.len();
    if total > 0 {
        let count = |f: &dyn Fn(&RespondentRecord) -> bool| records.iter().filter(|r| f(r)).count();
        let fields: [(&str, usize); 5] = [
            ("age", count(&|r| r.demographics.age.is_some())),
            ("bmi", count(&|r| r.bmi.is_some())),
            ("gender", count(&|r| r.demographics.gender.is_some())),
            ("location", count(&|r| r.demographics.location.is_some())),
            ("any", count(&|r| {
                let d = &r.demographics;
                d.age.is_some() || d.height_m.is_some() || d.weight_kg.is_some() || d.gender.is_some()
                    || d.location.is_some() || !d.handles.is_empty() || d.comment.is_some()
            })),
        ];
        for (f, n) in fields {
            completeness.rows.push(vec![f.to_string(), n.to_string(), total.to_string()]);
        }
    }

    DemographicTables {
        age,
        bmi,
        gender,
        location,
        completeness,
    }
}
