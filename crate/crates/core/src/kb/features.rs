use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub type FeatureSet = BTreeSet<String>;

/// Notional cores of everyday terms, plus the category hierarchy used when
/// tightening role constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub name: String,
    pub vocabulary: BTreeSet<String>,
    pub entries: BTreeMap<String, FeatureSet>,
    /// Child category to parent category.
    pub categories: BTreeMap<String, String>,
}

impl FeatureTable {
    pub fn new(name: &str) -> Self {
        FeatureTable {
            name: name.to_string(),
            vocabulary: BTreeSet::new(),
            entries: BTreeMap::new(),
            categories: BTreeMap::new(),
        }
    }

    /// Features used by entries but missing from the vocabulary.
    pub fn undeclared(&self) -> Vec<(&str, &str)> {
        self.entries
            .iter()
            .flat_map(|(t, fs)| {
                fs.iter().filter(|f| !self.vocabulary.contains(*f)).map(move |f| (t.as_str(), f.as_str()))
            })
            .collect()
    }
}
