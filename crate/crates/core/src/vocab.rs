//! Resolved value sets: the permissible labels of a controlled field plus
//! any synonyms a terminology source knows for them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ValueSetError;
use crate::normalize;
use crate::template::ValueSetBinding;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueSet {
    pub id: String,
    pub labels: Vec<String>,
    #[serde(default)]
    pub synonyms: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term_iris: Option<BTreeMap<String, String>>,
}

impl ValueSet {
    pub fn new(
        id: impl Into<String>,
        labels: Vec<String>,
        synonyms: BTreeMap<String, Vec<String>>,
    ) -> Result<Self, ValueSetError> {
        let set = Self {
            id: id.into(),
            labels,
            synonyms,
            term_iris: None,
        };
        set.check()?;
        Ok(set)
    }

    /// Checks label uniqueness and that no synonym shadows another label.
    pub fn check(&self) -> Result<(), ValueSetError> {
        let mut seen = BTreeSet::new();
        for label in &self.labels {
            if !seen.insert(label.as_str()) {
                return Err(ValueSetError::DuplicateLabel {
                    id: self.id.clone(),
                    label: label.clone(),
                });
            }
        }
        for (label, synonyms) in &self.synonyms {
            if !seen.contains(label.as_str()) {
                return Err(ValueSetError::UnknownSynonymLabel {
                    id: self.id.clone(),
                    label: label.clone(),
                });
            }
            for synonym in synonyms {
                let folded = normalize(synonym);
                if let Some(other) = self
                    .labels
                    .iter()
                    .find(|o| *o != label && normalize(o) == folded)
                {
                    return Err(ValueSetError::SynonymCollision {
                        id: self.id.clone(),
                        label: label.clone(),
                        synonym: synonym.clone(),
                        other: other.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, value: &str) -> bool {
        self.labels.iter().any(|l| l == value)
    }

    /// The preferred label one of whose synonyms equals `observed` after
    /// trimming and case folding.
    pub fn label_for_synonym(&self, observed: &str) -> Option<&str> {
        let folded = normalize(observed);
        self.labels.iter().find_map(|label| {
            self.synonyms
                .get(label)?
                .iter()
                .any(|s| normalize(s) == folded)
                .then_some(label.as_str())
        })
    }
}

/// Resolves an inline binding without any lookup. Terminology bindings
/// return `None`; those need a terminology client.
pub fn resolve_inline(binding: &ValueSetBinding) -> Option<ValueSet> {
    match binding {
        ValueSetBinding::Inline { labels } => Some(ValueSet {
            id: String::from("inline"),
            labels: labels.clone(),
            synonyms: BTreeMap::new(),
            term_iris: None,
        }),
        ValueSetBinding::Terminology { .. } => None,
    }
}
