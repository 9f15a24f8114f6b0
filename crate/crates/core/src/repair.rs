//! Repair suggestions and their application.
//!
//! Suggestions come from three places: terminology synonyms, normalized
//! Levenshtein similarity against the permissible labels, and simple type
//! coercions (stripping quotes off numbers, mapping yes/no to booleans).
//! Nothing is applied without an explicit [`RepairAction`].

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::RepairError;
use crate::table::{CellAddress, Table};
use crate::template::{Datatype, FieldSpec, Template};
use crate::validate::{parses_as, GroupKey, IssueGroup, IssueKind, ValidationReport};
use crate::vocab::ValueSet;
use crate::normalize;

/// Levenshtein distance over Unicode scalar values with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / longer length` after trimming and lowercasing both sides.
pub fn similarity(observed: &str, candidate: &str) -> f64 {
    let a = normalize(observed);
    let b = normalize(candidate);
    if a == b {
        return 1.0;
    }
    let len = a.chars().count().max(b.chars().count()).max(1);
    1.0 - edit_distance(&a, &b) as f64 / len as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuggestionSource {
    ExactSynonym,
    EditDistance,
    TypeCoercion,
    SoleOption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairSuggestion {
    pub value: String,
    pub score: f64,
    pub provenance: SuggestionSource,
}

impl RepairSuggestion {
    fn new(value: impl Into<String>, score: f64, provenance: SuggestionSource) -> Self {
        Self {
            value: value.into(),
            score,
            provenance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuggestConfig {
    /// Minimum similarity for an edit-distance suggestion.
    pub threshold: f64,
    pub top_k: usize,
}

impl Default for SuggestConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            top_k: 5,
        }
    }
}

fn by_rank(a: &RepairSuggestion, b: &RepairSuggestion) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.value.cmp(&b.value))
}

/// Strips one matching pair of surrounding quotes and whitespace, returning
/// the result if it parses as `datatype`.
pub fn coerce_numeric(observed: &str, datatype: Datatype) -> Option<String> {
    let s = observed.trim();
    let unquoted = ['"', '\'']
        .into_iter()
        .find_map(|q| s.strip_prefix(q).and_then(|r| r.strip_suffix(q)))
        .unwrap_or(s)
        .trim();
    parses_as(datatype, unquoted).then(|| unquoted.to_string())
}

pub fn coerce_boolean(observed: &str) -> Option<&'static str> {
    match normalize(observed).as_str() {
        "yes" | "y" | "1" | "true" => Some("true"),
        "no" | "n" | "0" | "false" => Some("false"),
        _ => None,
    }
}

/// Ranked suggestions for one issue group.
pub fn suggest_for_group(
    group: &IssueGroup,
    spec: &FieldSpec,
    set: Option<&ValueSet>,
    config: &SuggestConfig,
) -> Vec<RepairSuggestion> {
    let observed = group.key.normalized_observed.as_str();
    match group.key.kind {
        IssueKind::NotInValueSet => {
            let Some(set) = set else { return Vec::new() };
            let mut best: BTreeMap<&str, RepairSuggestion> = BTreeMap::new();
            if let Some(label) = set.label_for_synonym(observed) {
                best.insert(label, RepairSuggestion::new(label, 1.0, SuggestionSource::ExactSynonym));
            }
            for label in &set.labels {
                let score = similarity(observed, label);
                if score < config.threshold {
                    continue;
                }
                best.entry(label.as_str())
                    .and_modify(|s| {
                        if score > s.score {
                            *s = RepairSuggestion::new(label.as_str(), score, SuggestionSource::EditDistance);
                        }
                    })
                    .or_insert_with(|| RepairSuggestion::new(label.as_str(), score, SuggestionSource::EditDistance));
            }
            let mut out: Vec<RepairSuggestion> = best.into_values().collect();
            out.sort_by(by_rank);
            out.truncate(config.top_k);
            out
        }
        IssueKind::TypeMismatch => match spec.datatype {
            Datatype::Integer | Datatype::Decimal => coerce_numeric(observed, spec.datatype)
                .map(|v| RepairSuggestion::new(v, 1.0, SuggestionSource::TypeCoercion))
                .into_iter()
                .collect(),
            Datatype::Boolean => coerce_boolean(observed)
                .map(|v| RepairSuggestion::new(v, 1.0, SuggestionSource::TypeCoercion))
                .into_iter()
                .collect(),
            _ => Vec::new(),
        },
        IssueKind::MissingRequired => match set {
            Some(set) if spec.datatype == Datatype::Controlled && set.labels.len() == 1 => {
                alloc::vec![RepairSuggestion::new(set.labels[0].as_str(), 1.0, SuggestionSource::SoleOption)]
            }
            _ => Vec::new(),
        },
        _ => Vec::new(),
    }
}

/// Fills every group's suggestion slot in place.
pub fn fill_suggestions(
    report: &mut ValidationReport,
    template: &Template,
    sets: &BTreeMap<String, ValueSet>,
    config: &SuggestConfig,
) {
    for group in &mut report.groups {
        group.suggestions = match template.lookup_field(&group.key.column) {
            Some(spec) => suggest_for_group(group, spec, sets.get(&spec.name), config),
            None => Vec::new(),
        };
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairTarget {
    /// Every member of the group.
    Group(GroupKey),
    Cell(CellAddress),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairAction {
    pub target: RepairTarget,
    pub replacement: String,
}

impl RepairAction {
    pub fn group(key: GroupKey, replacement: impl Into<String>) -> Self {
        Self {
            target: RepairTarget::Group(key),
            replacement: replacement.into(),
        }
    }

    pub fn cell(address: CellAddress, replacement: impl Into<String>) -> Self {
        Self {
            target: RepairTarget::Cell(address),
            replacement: replacement.into(),
        }
    }
}

/// One batch action per group that has at least one suggestion, using the
/// top-ranked value.
pub fn accept_top_suggestions(report: &ValidationReport) -> Vec<RepairAction> {
    report
        .groups
        .iter()
        .filter_map(|g| {
            let top = g.suggestions.first()?;
            Some(RepairAction::group(g.key.clone(), top.value.clone()))
        })
        .collect()
}

/// Resolves every action to concrete cells, rejecting the whole batch on the
/// first unknown target or conflicting pair.
pub fn plan_repairs(
    table: &Table,
    report: &ValidationReport,
    actions: &[RepairAction],
) -> Result<BTreeMap<CellAddress, String>, RepairError> {
    let mut plan: BTreeMap<CellAddress, String> = BTreeMap::new();
    for action in actions {
        if action.replacement.contains(['\t', '\n', '\r']) {
            return Err(RepairError::InvalidReplacement {
                value: action.replacement.clone(),
            });
        }
        let targets: Vec<CellAddress> = match &action.target {
            RepairTarget::Group(key) => report
                .group(key)
                .ok_or_else(|| RepairError::UnknownGroup {
                    column: key.column.clone(),
                    kind: key.kind.to_string(),
                    normalized: key.normalized_observed.clone(),
                })?
                .members
                .clone(),
            RepairTarget::Cell(address) => alloc::vec![address.clone()],
        };
        for address in targets {
            if table.cell(&address).is_none() {
                return Err(RepairError::OutOfBounds {
                    row: address.row,
                    column: address.column,
                });
            }
            match plan.get(&address) {
                Some(existing) if *existing != action.replacement => {
                    return Err(RepairError::Conflict {
                        row: address.row,
                        column: address.column,
                        first: existing.clone(),
                        second: action.replacement.clone(),
                    });
                }
                Some(_) => {}
                None => {
                    plan.insert(address, action.replacement.clone());
                }
            }
        }
    }
    Ok(plan)
}

/// Returns a copy of `table` with exactly the targeted cells replaced.
pub fn apply_repairs(
    table: &Table,
    report: &ValidationReport,
    actions: &[RepairAction],
) -> Result<Table, RepairError> {
    let plan = plan_repairs(table, report, actions)?;
    let mut out = table.clone();
    for (address, value) in plan {
        if let Some(cell) = out.cell_mut(&address) {
            *cell = value;
        }
    }
    Ok(out)
}
