//! Application syntax registry: which object types are valid in which
//! block family, plus "did you mean" correction for near-miss names.
//!
//! A registry is loaded from JSON
//! (`{"app": ..., "families": {FAMILY: [{"name", "description",
//! "parameters"}]}}`) or converted from a captured MOOSE `--json` dump.
//! Validation walks the `type =` usages of a parsed input; correction is a
//! context-conditioned similarity search restricted to the family named by
//! the block path, ranked by a composite of lexical similarity (normalized
//! Damerau-Levenshtein plus camel-case token overlap) and an optional
//! pluggable semantic scorer.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hit::{is_ident_char, SyntaxTree, TypeUsage};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub value_hint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamSpec>,
}

/// Valid objects per block family for one application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxRegistry {
    #[serde(rename = "app")]
    pub app_name: String,
    pub families: BTreeMap<String, Vec<ObjectEntry>>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("failed to read registry: {0}")]
    Io(#[from] std::io::Error),
    #[error("registry is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("registry has an empty families map")]
    EmptyFamilies,
    #[error("invalid family name {family:?}")]
    BadFamilyName { family: String },
    #[error("invalid object name {name:?} in family {family:?}")]
    BadObjectName { family: String, name: String },
    #[error("duplicate object {name:?} in family {family:?}")]
    DuplicateObject { family: String, name: String },
}

impl SyntaxRegistry {
    /// Load and validate a registry from its JSON serialization.
    pub fn from_json(json: &str) -> Result<Self, RegistryError> {
        let reg: SyntaxRegistry = serde_json::from_str(json)?;
        reg.validate()?;
        Ok(reg)
    }

    pub fn from_path(path: &Path) -> Result<Self, RegistryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<(), RegistryError> {
        if self.families.is_empty() {
            return Err(RegistryError::EmptyFamilies);
        }
        for (family, entries) in &self.families {
            if family.is_empty() || !family.chars().all(is_ident_char) {
                return Err(RegistryError::BadFamilyName {
                    family: family.clone(),
                });
            }
            let mut seen = BTreeSet::new();
            for e in entries {
                if e.name.is_empty() || !e.name.chars().all(is_ident_char) {
                    return Err(RegistryError::BadObjectName {
                        family: family.clone(),
                        name: e.name.clone(),
                    });
                }
                if !seen.insert(e.name.as_str()) {
                    return Err(RegistryError::DuplicateObject {
                        family: family.clone(),
                        name: e.name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn family(&self, name: &str) -> Option<&[ObjectEntry]> {
        self.families.get(name).map(Vec::as_slice)
    }

    pub fn get(&self, family: &str, object: &str) -> Option<&ObjectEntry> {
        self.families
            .get(family)?
            .iter()
            .find(|e| e.name == object)
    }

    pub fn contains(&self, family: &str, object: &str) -> bool {
        self.get(family, object).is_some()
    }

    /// Families (other than `family`) that define `object`.
    pub fn other_families_with(&self, family: &str, object: &str) -> Vec<&str> {
        self.families
            .iter()
            .filter(|(f, _)| f.as_str() != family)
            .filter(|(_, es)| es.iter().any(|e| e.name == object))
            .map(|(f, _)| f.as_str())
            .collect()
    }

    pub fn object_count(&self) -> usize {
        self.families.values().map(Vec::len).sum()
    }
}

/// Convert a captured MOOSE `--json` syntax dump into a registry.
///
/// The dump may be wrapped in the `**START JSON DATA**` / `**END JSON
/// DATA**` markers the executable prints. Only the parts the registry needs
/// are read: `blocks.<Family>.star.subblock_types.<Type>` with each type's
/// `description` and `parameters` (`required`, `cpp_type` as the hint).
pub fn convert_moose_dump(dump: &str, app_name: &str) -> Result<SyntaxRegistry, RegistryError> {
    let body = match (dump.find("**START JSON DATA**"), dump.find("**END JSON DATA**")) {
        (Some(s), Some(e)) => &dump[s + "**START JSON DATA**".len()..e],
        _ => dump,
    };
    let value: serde_json::Value = serde_json::from_str(body.trim())?;
    let mut families = BTreeMap::new();
    let blocks = value.get("blocks").and_then(|b| b.as_object());
    if let Some(blocks) = blocks {
        for (family, fval) in blocks {
            let subblocks = fval
                .pointer("/star/subblock_types")
                .and_then(|s| s.as_object());
            let Some(subblocks) = subblocks else { continue };
            let mut entries = Vec::new();
            for (type_name, tval) in subblocks {
                let description = tval
                    .get("description")
                    .and_then(|d| d.as_str())
                    .unwrap_or_default()
                    .to_owned();
                let mut parameters = BTreeMap::new();
                if let Some(params) = tval.get("parameters").and_then(|p| p.as_object()) {
                    for (key, pval) in params {
                        parameters.insert(
                            key.clone(),
                            ParamSpec {
                                required: pval
                                    .get("required")
                                    .and_then(|r| r.as_bool())
                                    .unwrap_or(false),
                                value_hint: pval
                                    .get("cpp_type")
                                    .and_then(|t| t.as_str())
                                    .unwrap_or_default()
                                    .to_owned(),
                            },
                        );
                    }
                }
                entries.push(ObjectEntry {
                    name: type_name.clone(),
                    description,
                    parameters,
                });
            }
            entries.sort_by(|a, b| a.name.cmp(&b.name));
            families.insert(family.clone(), entries);
        }
    }
    let reg = SyntaxRegistry {
        app_name: app_name.to_owned(),
        families,
    };
    reg.validate()?;
    Ok(reg)
}

// ---------------------------------------------------------------------------
// Type validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeIssueKind {
    /// The name exists in no family at all.
    UnknownType,
    /// The name exists somewhere, but not in the family of this block.
    WrongFamily,
}

/// An invalid `type =` usage, with correction candidates once
/// [`fill_candidates`] has run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeIssue {
    pub usage: TypeUsage,
    pub kind: TypeIssueKind,
    #[serde(default)]
    pub candidates: Vec<TypeCandidate>,
}

/// A ranked correction candidate. `score` is the weighted composite of the
/// lexical and semantic components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeCandidate {
    pub name: String,
    pub family: String,
    pub score: f64,
    pub lexical: f64,
    pub semantic: f64,
}

/// One issue per `type =` usage whose name is not an exact match in its
/// family; exact matches produce nothing. Candidates are left empty.
pub fn validate_types(tree: &SyntaxTree, registry: &SyntaxRegistry) -> Vec<TypeIssue> {
    tree.extract_types()
        .into_iter()
        .filter_map(|usage| {
            if registry.contains(&usage.family, &usage.type_name) {
                return None;
            }
            let kind = if registry
                .other_families_with(&usage.family, &usage.type_name)
                .is_empty()
            {
                TypeIssueKind::UnknownType
            } else {
                TypeIssueKind::WrongFamily
            };
            Some(TypeIssue {
                usage,
                kind,
                candidates: Vec::new(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Similarity scoring and suggestion
// ---------------------------------------------------------------------------

/// Pluggable semantic similarity over object names and descriptions,
/// e.g. an embedding index. Scores must lie in [0, 1].
pub trait SemanticScorer {
    fn score(&self, query: &str, entry: &ObjectEntry) -> f64;
}

/// Composite score weights; `lexical + semantic` must be 1. The default
/// disables the semantic component entirely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights {
    pub lexical: f64,
    pub semantic: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            lexical: 1.0,
            semantic: 0.0,
        }
    }
}

/// Split a class name into lower-cased camel-case tokens. Boundaries are
/// case transitions, digit runs, and the separators `_`, `:`, `-`.
/// `ADDiffusion` gives `["ad", "diffusion"]`; `Neumann2BC` gives
/// `["neumann", "2", "bc"]`.
pub fn camel_tokens(name: &str) -> Vec<String> {
    #[derive(PartialEq, Clone, Copy)]
    enum Class {
        Upper,
        Lower,
        Digit,
    }
    let classify = |c: char| {
        if c.is_ascii_digit() {
            Some(Class::Digit)
        } else if c.is_uppercase() {
            Some(Class::Upper)
        } else if c.is_alphabetic() {
            Some(Class::Lower)
        } else {
            None // separator
        }
    };
    let chars: Vec<char> = name.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for i in 0..chars.len() {
        let Some(class) = classify(chars[i]) else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            continue;
        };
        if !current.is_empty() {
            let prev = classify(chars[i - 1]).unwrap();
            let boundary = match (prev, class) {
                (Class::Lower, Class::Upper) => true,
                (Class::Digit, Class::Upper | Class::Lower) => true,
                (Class::Upper | Class::Lower, Class::Digit) => true,
                // end of an acronym run: "ADDi" splits before "Di"
                (Class::Upper, Class::Lower) => {
                    i >= 2 && classify(chars[i - 2]) == Some(Class::Upper)
                }
                _ => false,
            };
            if boundary {
                // For the acronym case the previous upper belongs to the
                // new token.
                if prev == Class::Upper && class == Class::Lower {
                    let moved = current.pop().unwrap();
                    if !current.is_empty() {
                        tokens.push(std::mem::take(&mut current));
                    }
                    current.push(moved);
                } else {
                    tokens.push(std::mem::take(&mut current));
                }
            }
        }
        current.push(chars[i]);
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    let sa: BTreeSet<&str> = a.iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = b.iter().map(String::as_str).collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count() as f64;
    let union = sa.union(&sb).count() as f64;
    inter / union
}

/// Lexical similarity in [0, 1]: equal parts normalized Damerau-Levenshtein
/// similarity and Jaccard overlap of camel-case token sets.
pub fn lexical_similarity(query: &str, name: &str) -> f64 {
    let edit = strsim::normalized_damerau_levenshtein(query, name);
    let tokens = jaccard(&camel_tokens(query), &camel_tokens(name));
    0.5 * edit + 0.5 * tokens
}

/// Rank correction candidates for `issue`, drawn only from the family named
/// by the block path. At most `k` results, sorted by score descending with
/// ties broken by name ascending. An empty or missing family yields an
/// empty list.
pub fn suggest_types(issue: &TypeIssue, registry: &SyntaxRegistry, k: usize) -> Vec<TypeCandidate> {
    suggest_types_with(issue, registry, k, ScoreWeights::default(), None)
}

/// [`suggest_types`] with explicit weights and an optional semantic scorer.
pub fn suggest_types_with(
    issue: &TypeIssue,
    registry: &SyntaxRegistry,
    k: usize,
    weights: ScoreWeights,
    scorer: Option<&dyn SemanticScorer>,
) -> Vec<TypeCandidate> {
    let family = &issue.usage.family;
    let Some(entries) = registry.family(family) else {
        return Vec::new();
    };
    let query = &issue.usage.type_name;
    let mut candidates: Vec<TypeCandidate> = entries
        .iter()
        .map(|entry| {
            let lexical = lexical_similarity(query, &entry.name);
            let semantic = scorer.map_or(0.0, |s| s.score(query, entry).clamp(0.0, 1.0));
            TypeCandidate {
                name: entry.name.clone(),
                family: family.clone(),
                score: weights.lexical * lexical + weights.semantic * semantic,
                lexical,
                semantic,
            }
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.name.cmp(&b.name))
    });
    candidates.truncate(k);
    candidates
}

/// Fill `issue.candidates` in place (the usual step between validation and
/// substitution).
pub fn fill_candidates(
    issue: &mut TypeIssue,
    registry: &SyntaxRegistry,
    k: usize,
    weights: ScoreWeights,
    scorer: Option<&dyn SemanticScorer>,
) {
    issue.candidates = suggest_types_with(issue, registry, k, weights, scorer);
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

/// Confidence gate for automatic substitution. Both constants are
/// config-overridable; the defaults are deliberately conservative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionPolicy {
    pub auto_threshold: f64,
    pub margin: f64,
    pub force: bool,
}

impl Default for SubstitutionPolicy {
    fn default() -> Self {
        SubstitutionPolicy {
            auto_threshold: 0.85,
            margin: 0.05,
            force: false,
        }
    }
}

/// Substitution refused: confidence too low and not forced. Carries the
/// ranked candidates so the caller can ask for clarification.
#[derive(Debug, Clone, Error)]
#[error("substitution of {candidate:?} refused: {reason}")]
pub struct SubstitutionRefused {
    pub candidate: String,
    pub reason: String,
    pub candidates: Vec<TypeCandidate>,
}

/// Replace the invalid `type` value with `candidate`, provided the policy
/// gate passes (score at or above the threshold AND leading the runner-up
/// by the margin) or `force` is set. Only the value span changes; every
/// byte outside it is preserved.
pub fn apply_substitution(
    tree: &SyntaxTree,
    issue: &TypeIssue,
    candidate: &TypeCandidate,
    policy: &SubstitutionPolicy,
) -> Result<SyntaxTree, SubstitutionRefused> {
    if !policy.force {
        let refuse = |reason: String| SubstitutionRefused {
            candidate: candidate.name.clone(),
            reason,
            candidates: issue.candidates.clone(),
        };
        if candidate.score < policy.auto_threshold {
            return Err(refuse(format!(
                "score {:.3} below auto threshold {:.3}",
                candidate.score, policy.auto_threshold
            )));
        }
        let runner_up = issue
            .candidates
            .iter()
            .find(|c| c.name != candidate.name)
            .map_or(0.0, |c| c.score);
        if candidate.score - runner_up < policy.margin {
            return Err(refuse(format!(
                "margin {:.3} over runner-up below {:.3}",
                candidate.score - runner_up,
                policy.margin
            )));
        }
    }
    let raw = issue.usage.span.slice(tree.source());
    let new_raw = match raw.chars().next() {
        Some('\'') => format!("'{}'", candidate.name),
        Some('"') => format!("\"{}\"", candidate.name),
        _ => candidate.name.clone(),
    };
    Ok(tree
        .replace_span(issue.usage.span, &new_raw)
        .expect("substituting an identifier keeps the tree parsable"))
}

// ---------------------------------------------------------------------------
// Parameter validation
// ---------------------------------------------------------------------------

/// Parameter keys valid in any block regardless of the object schema.
pub const BUILTIN_PARAMS: &[&str] = &["type", "active", "inactive"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamIssueKind {
    MissingRequired,
    UnknownParam,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamIssue {
    pub block_path: String,
    pub kind: ParamIssueKind,
    pub key: String,
    pub object: String,
}

/// Check block parameters against the schemas of their (exactly matched)
/// object types. Blocks without a `type`, or whose type is not an exact
/// registry match, are skipped — the latter are already reported as
/// [`TypeIssue`]s.
pub fn validate_params(tree: &SyntaxTree, registry: &SyntaxRegistry) -> Vec<ParamIssue> {
    let mut issues = Vec::new();
    for block in tree.blocks() {
        let Some(type_param) = block.get_param("type") else {
            continue;
        };
        let family = block.path[1..].split('/').next().unwrap_or_default();
        let Some(entry) = registry.get(family, type_param.value()) else {
            continue;
        };
        let present: BTreeSet<&str> = block.params().map(|p| p.key.as_str()).collect();
        for (key, spec) in &entry.parameters {
            if spec.required && !present.contains(key.as_str()) {
                issues.push(ParamIssue {
                    block_path: block.path.clone(),
                    kind: ParamIssueKind::MissingRequired,
                    key: key.clone(),
                    object: entry.name.clone(),
                });
            }
        }
        for key in present {
            if BUILTIN_PARAMS.contains(&key) {
                continue;
            }
            if !entry.parameters.contains_key(key) {
                issues.push(ParamIssue {
                    block_path: block.path.clone(),
                    kind: ParamIssueKind::UnknownParam,
                    key: key.to_owned(),
                    object: entry.name.clone(),
                });
            }
        }
    }
    issues
}

#[cfg(test)]
#[path = "registry_tests.rs"]
mod tests;
