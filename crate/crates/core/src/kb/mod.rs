//! The knowledge base: registered domains and feature tables, Janus statuses,
//! and a numbered log of repair edits.
//!
//! A [`KnowledgeBase`] value is an immutable snapshot. [`KnowledgeBase::apply`]
//! returns the successor version and leaves the original untouched, so a
//! build can hold a snapshot while a repair produces the next one.

mod domain;
mod features;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{Diagnostic, Lowered, Span};

pub use domain::*;
pub use features::{FeatureSet, FeatureTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("a {what} named `{name}` is already registered")]
    Duplicate { what: &'static str, name: String },
    #[error("feature table `{table}`: term `{term}` uses `{feature}`, which is not in its vocabulary")]
    Vocabulary { table: String, term: String, feature: String },
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown concept `{concept}` in domain `{domain}`")]
    UnknownConcept { domain: String, concept: String },
    #[error("no demon `{demon}` on `{domain}/{concept}`")]
    UnknownDemon { domain: String, concept: String, demon: String },
    #[error("role `{slot}` of `{concept}` has no default to withdraw")]
    NoDefault { concept: String, slot: String },
    #[error("janus entity `{0}` is already differentiated")]
    AlreadyDifferentiated(String),
    #[error("rebinding `{entity}` to `{concept}` was already tried")]
    AlreadyTried { entity: String, concept: String },
}

impl KbError {
    pub fn code(&self) -> &'static str {
        match self {
            KbError::Duplicate { .. } => "KB-DUP",
            KbError::Vocabulary { .. } => "KB-VOCAB",
            KbError::UnknownTerm(_) => "KB-UNKNOWN-TERM",
            KbError::UnknownDomain(_) => "KB-UNKNOWN-DOMAIN",
            KbError::UnknownConcept { .. } => "KB-UNKNOWN-CONCEPT",
            KbError::UnknownDemon { .. } => "KB-UNKNOWN-DEMON",
            KbError::NoDefault { .. } => "KB-NO-DEFAULT",
            KbError::AlreadyDifferentiated(_) => "KB-ALREADY-DIFFERENTIATED",
            KbError::AlreadyTried { .. } => "KB-ALREADY-TRIED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DemonRef {
    pub domain: String,
    pub concept: String,
    pub demon: String,
}

/// A knowledge-base change produced by repair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum KbEdit {
    /// Marks a Janus entity differentiated and blocks the demon in the target context.
    Differentiate { janus: String, target: String, demon: Option<DemonRef>, aspect: Option<String> },
    /// Pins a scene entity to a target concept for later builds.
    Rebind { scene: String, entity: String, concept: String },
    /// Drops a default from a role of a notional schema.
    WithdrawDefault { domain: String, concept: String, slot: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionedEdit {
    /// Version produced by this edit.
    pub version: u64,
    pub edit: KbEdit,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct KnowledgeBase {
    version: u64,
    domains: BTreeMap<String, Arc<Domain>>,
    features: BTreeMap<String, Arc<FeatureTable>>,
    differentiated: BTreeSet<String>,
    /// `scene/entity` to concept.
    pins: BTreeMap<String, String>,
    tried: BTreeSet<(String, String, String)>,
    log: Vec<VersionedEdit>,
}

fn normalise(term: &str) -> String {
    term.trim().replace(' ', "-")
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn log(&self) -> &[VersionedEdit] {
        &self.log
    }

    pub fn register(&mut self, entity: Lowered) -> Result<(), KbError> {
        match entity {
            Lowered::Domain(d) => self.register_domain(d),
            Lowered::Features(f) => self.register_features(f),
            Lowered::Scene(_) => Ok(()),
        }
    }

    pub fn register_domain(&mut self, d: Domain) -> Result<(), KbError> {
        if self.domains.contains_key(&d.name) {
            return Err(KbError::Duplicate { what: "domain", name: d.name });
        }
        self.domains.insert(d.name.clone(), Arc::new(d));
        Ok(())
    }

    pub fn register_features(&mut self, f: FeatureTable) -> Result<(), KbError> {
        if self.features.contains_key(&f.name) {
            return Err(KbError::Duplicate { what: "feature table", name: f.name });
        }
        if let Some((term, feature)) = f.undeclared().first() {
            return Err(KbError::Vocabulary {
                table: f.name.clone(),
                term: term.to_string(),
                feature: feature.to_string(),
            });
        }
        self.features.insert(f.name.clone(), Arc::new(f));
        Ok(())
    }

    pub fn domain(&self, name: &str) -> Result<&Domain, KbError> {
        self.domains.get(name).map(|d| d.as_ref()).ok_or_else(|| KbError::UnknownDomain(name.to_string()))
    }

    pub fn domain_arc(&self, name: &str) -> Option<Arc<Domain>> {
        self.domains.get(name).cloned()
    }

    pub fn domains(&self) -> impl Iterator<Item = &Domain> {
        self.domains.values().map(|d| d.as_ref())
    }

    pub fn feature_tables(&self) -> impl Iterator<Item = &FeatureTable> {
        self.features.values().map(|f| f.as_ref())
    }

    /// Operational domains in name order, excluding `except`.
    pub fn operational_domains(&self, except: &str) -> Vec<String> {
        self.domains.values().filter(|d| d.operational && d.name != except).map(|d| d.name.clone()).collect()
    }

    /// Union of the feature entries for a term. A concept name with no entry of
    /// its own takes the union over the lexicon words mapped to it.
    pub fn notional_core(&self, term: &str) -> Result<FeatureSet, KbError> {
        let direct = self.direct_core(term);
        if !direct.is_empty() {
            return Ok(direct);
        }
        let mut out = FeatureSet::new();
        for d in self.domains.values() {
            for w in d.words_for(term) {
                out.extend(self.direct_core(w));
            }
        }
        if out.is_empty() {
            Err(KbError::UnknownTerm(term.to_string()))
        } else {
            Ok(out)
        }
    }

    fn direct_core(&self, term: &str) -> FeatureSet {
        let keys = [term.to_string(), normalise(term)];
        let mut out = FeatureSet::new();
        for f in self.features.values() {
            for k in &keys {
                if let Some(fs) = f.entries.get(k) {
                    out.extend(fs.iter().cloned());
                }
            }
        }
        out
    }

    /// Core of a concept as seen from one domain: the union over the words its
    /// lexicon maps to the concept.
    pub fn concept_core(&self, domain: &str, concept: &str) -> Result<FeatureSet, KbError> {
        let d = self.domain(domain)?;
        let mut out = FeatureSet::new();
        for w in d.words_for(concept) {
            out.extend(self.direct_core(w));
        }
        if out.is_empty() {
            return self.notional_core(concept);
        }
        Ok(out)
    }

    pub fn parent_category(&self, category: &str) -> Option<&str> {
        self.features.values().find_map(|f| f.categories.get(category)).map(String::as_str)
    }

    /// `category` followed by its declared ancestors.
    pub fn category_lineage(&self, category: &str) -> Vec<String> {
        let mut out = vec![category.to_string()];
        let mut cur = category.to_string();
        while let Some(p) = self.parent_category(&cur) {
            if out.iter().any(|o| o == p) {
                break;
            }
            out.push(p.to_string());
            cur = p.to_string();
        }
        out
    }

    pub fn category_is_a(&self, category: &str, ancestor: &str) -> bool {
        self.category_lineage(category).iter().any(|c| c == ancestor)
    }

    pub fn is_differentiated(&self, janus: &str) -> bool {
        self.differentiated.contains(janus)
    }

    pub fn differentiated(&self) -> &BTreeSet<String> {
        &self.differentiated
    }

    pub fn pinned(&self, scene: &str, entity: &str) -> Option<&str> {
        self.pins.get(&format!("{scene}/{entity}")).map(String::as_str)
    }

    pub fn was_tried(&self, scene: &str, entity: &str, concept: &str) -> bool {
        self.tried.contains(&(scene.to_string(), entity.to_string(), concept.to_string()))
    }

    /// Returns the successor version with `edit` applied and logged.
    pub fn apply(&self, edit: &KbEdit) -> Result<KnowledgeBase, KbError> {
        let mut next = self.clone();
        match edit {
            KbEdit::Differentiate { janus, target, demon, .. } => {
                if !next.differentiated.insert(janus.clone()) {
                    return Err(KbError::AlreadyDifferentiated(janus.clone()));
                }
                if let Some(r) = demon {
                    let slot =
                        next.domains.get_mut(&r.domain).ok_or_else(|| KbError::UnknownDomain(r.domain.clone()))?;
                    let d = Arc::make_mut(slot);
                    let schema = d.concept_mut(&r.concept).ok_or_else(|| KbError::UnknownConcept {
                        domain: r.domain.clone(),
                        concept: r.concept.clone(),
                    })?;
                    let dm =
                        schema.demons.iter_mut().find(|x| x.id == r.demon).ok_or_else(|| KbError::UnknownDemon {
                            domain: r.domain.clone(),
                            concept: r.concept.clone(),
                            demon: r.demon.clone(),
                        })?;
                    dm.blocked_contexts.insert(target.clone());
                }
            }
            KbEdit::Rebind { scene, entity, concept } => {
                if !next.tried.insert((scene.clone(), entity.clone(), concept.clone())) {
                    return Err(KbError::AlreadyTried { entity: entity.clone(), concept: concept.clone() });
                }
                next.pins.insert(format!("{scene}/{entity}"), concept.clone());
            }
            KbEdit::WithdrawDefault { domain, concept, slot } => {
                let entry = next.domains.get_mut(domain).ok_or_else(|| KbError::UnknownDomain(domain.clone()))?;
                let d = Arc::make_mut(entry);
                let schema = d
                    .concept_mut(concept)
                    .ok_or_else(|| KbError::UnknownConcept { domain: domain.clone(), concept: concept.clone() })?;
                let role = schema.roles.iter_mut().find(|r| r.name == *slot);
                match role {
                    Some(r) if r.default.is_some() => r.default = None,
                    _ => return Err(KbError::NoDefault { concept: concept.clone(), slot: slot.clone() }),
                }
            }
        }
        next.version += 1;
        next.log.push(VersionedEdit { version: next.version, edit: edit.clone() });
        Ok(next)
    }

    /// Applies logged edits in order, starting from this snapshot.
    pub fn replay(&self, edits: &[VersionedEdit]) -> Result<KnowledgeBase, KbError> {
        let mut kb = self.clone();
        for e in edits {
            kb = kb.apply(&e.edit)?;
        }
        Ok(kb)
    }

    /// Content digest of the snapshot, independent of allocation.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("knowledge base serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Cross-reference check. Empty iff everything resolves.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let at = Span::empty(0);
        for d in self.domains.values() {
            for (word, concept) in &d.lexicon {
                if d.concept(concept).is_none() {
                    out.push(Diagnostic::error(
                        "KB-UNRESOLVED",
                        at,
                        format!("{}: lexicon word `{word}` maps to undeclared `{concept}`", d.name),
                    ));
                }
            }
            for c in &d.concepts {
                if let Some(p) = &c.parent {
                    if d.concept(p).is_none() {
                        out.push(Diagnostic::error(
                            "KB-UNRESOLVED",
                            at,
                            format!("{}: `{}` extends undeclared `{p}`", d.name, c.name),
                        ));
                    }
                }
                let Some(resolved) = d.resolved(&c.name) else { continue };
                for dm in &c.demons {
                    if !self.domains.contains_key(&dm.home_domain) {
                        out.push(Diagnostic::error(
                            "KB-UNKNOWN-DOMAIN",
                            at,
                            format!("{}: demon `{}` names home domain `{}`", d.name, dm.id, dm.home_domain),
                        ));
                    }
                    let mut slots = vec![&dm.writes];
                    slots.extend(dm.conditions.iter().filter_map(|cond| match cond {
                        Condition::SlotIn { slot, .. } | Condition::Filled { slot } => Some(slot),
                        _ => None,
                    }));
                    for s in slots {
                        if resolved.role(s).is_none() {
                            out.push(Diagnostic::error(
                                "KB-DANGLING-SLOT",
                                at,
                                format!(
                                    "{}: demon `{}` on `{}` refers to undeclared role `{s}`",
                                    d.name, dm.id, c.name
                                ),
                            ));
                        }
                    }
                    for cond in &dm.conditions {
                        if let Condition::FromIs { concept } | Condition::ToIs { concept } = cond {
                            if d.concept(concept).is_none() {
                                out.push(Diagnostic::error(
                                    "KB-UNRESOLVED",
                                    at,
                                    format!("{}: demon `{}` tests undeclared `{concept}`", d.name, dm.id),
                                ));
                            }
                        }
                    }
                }
                for (a, b) in &c.distinct {
                    for r in [a, b] {
                        if resolved.role(r).is_none() {
                            out.push(Diagnostic::error(
                                "KB-DANGLING-SLOT",
                                at,
                                format!("{}: `{}` requires distinct undeclared role `{r}`", d.name, c.name),
                            ));
                        }
                    }
                }
            }
            for r in &d.meta_constraints {
                for cl in &r.clauses {
                    let (label, concept) = match cl {
                        Clause::ChainStarts { concept } | Clause::ChainEnds { concept } => (None, Some(concept)),
                        Clause::EdgeFrom { label, concept } | Clause::EdgeTo { label, concept } => {
                            (Some(label), Some(concept))
                        }
                        _ => (None, None),
                    };
                    if let Some(l) = label.filter(|l| !d.edge_labels.contains(l)) {
                        out.push(Diagnostic::error(
                            "KB-UNRESOLVED",
                            at,
                            format!("{}: rule `{}` names unknown edge label `{l}`", d.name, r.id),
                        ));
                    }
                    if let Some(c) = concept.filter(|c| d.concept(c).is_none()) {
                        out.push(Diagnostic::error(
                            "KB-UNRESOLVED",
                            at,
                            format!("{}: rule `{}` names undeclared `{c}`", d.name, r.id),
                        ));
                    }
                }
            }
            for f in &d.world_facts {
                let (Assertion::Forbid { kind, concept } | Assertion::Require { kind, concept }) = &f.assertion;
                if !CONSEQUENCE_KINDS.contains(&kind.as_str()) {
                    out.push(Diagnostic::error(
                        "KB-UNKNOWN-CONSEQUENCE",
                        at,
                        format!("{}: fact `{}` asserts over unknown consequence `{kind}`", d.name, f.id),
                    ));
                }
                if d.concept(concept).is_none() {
                    out.push(Diagnostic::error(
                        "KB-UNRESOLVED",
                        at,
                        format!("{}: fact `{}` names undeclared `{concept}`", d.name, f.id),
                    ));
                }
            }
        }
        for f in self.features.values() {
            for (term, feature) in f.undeclared() {
                out.push(Diagnostic::error(
                    "KB-VOCAB",
                    at,
                    format!("{}: term `{term}` uses undeclared feature `{feature}`", f.name),
                ));
            }
        }
        out
    }
}
