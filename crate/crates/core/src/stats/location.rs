use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Country plus first-level region, or `other` when the text is not
/// recognized.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub country: String,
    pub region: Option<String>,
}

impl Location {
    pub fn other() -> Self {
        Location {
            country: "other".into(),
            region: None,
        }
    }

    pub fn label(&self) -> String {
        match &self.region {
            Some(r) => format!("{}/{}", self.country, r),
            None => self.country.clone(),
        }
    }
}

struct Table {
    regions: HashMap<String, (String, String)>,
    countries: HashMap<String, String>,
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut regions = HashMap::new();
        let mut countries = HashMap::new();
        let mut rdr = csv::Reader::from_reader(include_str!("../../data/regions.csv").as_bytes());
        for rec in rdr.records() {
            let rec = rec.expect("bundled region table parses");
            let (pattern, country, region) = (&rec[0], &rec[1], &rec[2]);
            if region.is_empty() {
                countries.insert(pattern.to_string(), country.to_string());
            } else {
                regions.insert(pattern.to_string(), (country.to_string(), region.to_string()));
            }
        }
        Table { regions, countries }
    })
}

/// Maps free text such as `"Tucson, AZ"` or `"Ontario, Canada"` through the
/// bundled lookup table.
pub fn coarsen_location(text: &str) -> Location {
    let t = table();
    let lower = text.to_lowercase();
    let parts: Vec<&str> = std::iter::once(lower.trim())
        .chain(lower.split([',', ';', '/', '(', ')']).map(str::trim))
        .filter(|p| !p.is_empty())
        .collect();
    for p in &parts {
        if let Some((country, region)) = t.regions.get(*p) {
            return Location {
                country: country.clone(),
                region: Some(region.clone()),
            };
        }
    }
    for p in &parts {
        if let Some(country) = t.countries.get(*p) {
            return Location {
                country: country.clone(),
                region: None,
            };
        }
    }
    Location::other()
}
