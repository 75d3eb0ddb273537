//! Notional overlap, Janus entities and borrowing across their faces.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Demon, FeatureSet, KbError, KnowledgeBase, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssocError {
    #[error("`{target}` and `{source_face}` share no notional feature")]
    NoOverlap { target: String, source_face: String },
    #[error("janus entity `{0}` is differentiated and lends nothing")]
    Differentiated(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}

impl AssocError {
    pub fn code(&self) -> &'static str {
        match self {
            AssocError::NoOverlap { .. } => "ASSOC-NO-OVERLAP",
            AssocError::Differentiated(_) => "ASSOC-DIFFERENTIATED",
            AssocError::Kb(e) => e.code(),
        }
    }
}

/// An exact ratio `shared / union`, compared by cross-multiplication.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Score {
    pub shared: u32,
    pub union: u32,
}

impl Score {
    pub const ZERO: Score = Score { shared: 0, union: 0 };

    pub fn value(self) -> f64 {
        if self.union == 0 {
            0.0
        } else {
            f64::from(self.shared) / f64::from(self.union)
        }
    }

    pub fn at_least(self, threshold: f64) -> bool {
        self.value() >= threshold
    }

    fn key(self) -> (u64, u64) {
        if self.union == 0 {
            (0, 1)
        } else {
            (u64::from(self.shared), u64::from(self.union))
        }
    }
}

impl PartialEq for Score {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = self.key();
        let (c, d) = other.key();
        (a * d).cmp(&(c * b))
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.shared, self.union)
    }
}

/// Jaccard index of two feature sets; zero when both are empty.
pub fn overlap(a: &FeatureSet, b: &FeatureSet) -> Score {
    let shared = a.intersection(b).count() as u32;
    let union = (a.len() + b.len()) as u32 - shared;
    Score { shared, union }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JanusStatus {
    Active,
    Differentiated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JanusEntity {
    pub id: String,
    pub target_domain: String,
    pub target_face: String,
    /// Scene category or source-domain word.
    pub source_face: String,
    /// Domain and concept the source face resolves to, if any.
    pub source_domain: Option<String>,
    pub source_concept: Option<String>,
    pub shared_features: FeatureSet,
    pub score: Score,
    pub status: JanusStatus,
}

impl JanusEntity {
    pub fn is_active(&self) -> bool {
        self.status == JanusStatus::Active
    }
}

pub fn janus_id(target: &str, source: &str) -> String {
    format!("janus:{target}~{source}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BorrowKind {
    Demon,
    Aspect,
}

/// A demon or aspect lent across a Janus entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Borrowing {
    pub janus: String,
    pub kind: BorrowKind,
    /// Demon id or aspect name.
    pub payload: String,
    /// Domain that owns the payload.
    pub home: String,
    pub from_face: String,
    pub to_face: String,
}

/// What a holder lacks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Need<'a> {
    Slot(&'a str),
    Aspect(&'a str),
}

/// Candidates scoring at least `threshold` against the target concept's core,
/// best first, ties by name. Candidates without a core are an error.
pub fn propose_janus(
    kb: &KnowledgeBase,
    target_domain: &str,
    target_concept: &str,
    candidates: &[String],
    threshold: f64,
) -> Result<Vec<JanusEntity>, AssocError> {
    let core = kb.concept_core(target_domain, target_concept)?;
    let mut out = Vec::new();
    for c in candidates {
        let other = kb.notional_core(c)?;
        let score = overlap(&core, &other);
        if score.shared > 0 && score.at_least(threshold) {
            out.push(entity(kb, target_domain, target_concept, c, &core, &other, &[]));
        }
    }
    out.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.source_face.cmp(&b.source_face)));
    Ok(out)
}

fn entity(
    kb: &KnowledgeBase,
    target_domain: &str,
    target: &str,
    source: &str,
    core: &FeatureSet,
    other: &FeatureSet,
    sources: &[String],
) -> JanusEntity {
    let id = janus_id(target, source);
    let resolved = resolve_source(kb, source, sources);
    JanusEntity {
        status: if kb.is_differentiated(&id) { JanusStatus::Differentiated } else { JanusStatus::Active },
        id,
        target_domain: target_domain.to_string(),
        target_face: target.to_string(),
        source_face: source.to_string(),
        source_domain: resolved.as_ref().map(|r| r.0.clone()),
        source_concept: resolved.map(|r| r.1),
        shared_features: core.intersection(other).cloned().collect(),
        score: overlap(core, other),
    }
}

/// The first source domain whose lexicon maps the term. With no explicit
/// sources, every operational domain is searched in name order.
pub fn resolve_source(kb: &KnowledgeBase, term: &str, sources: &[String]) -> Option<(String, String)> {
    let names: Vec<String> = if sources.is_empty() {
        kb.domains().filter(|d| d.operational).map(|d| d.name.clone()).collect()
    } else {
        sources.to_vec()
    };
    names.iter().find_map(|n| {
        let d = kb.domain(n).ok()?;
        d.lexicon.get(term).map(|c| (n.clone(), c.clone()))
    })
}

/// Forms the association of a target concept with a source term.
pub fn form(
    kb: &KnowledgeBase,
    target_domain: &str,
    target: &str,
    source: &str,
    sources: &[String],
) -> Result<JanusEntity, AssocError> {
    let core = kb.concept_core(target_domain, target)?;
    let other = kb.notional_core(source)?;
    if core.intersection(&other).next().is_none() {
        return Err(AssocError::NoOverlap { target: target.to_string(), source_face: source.to_string() });
    }
    Ok(entity(kb, target_domain, target, source, &core, &other, sources))
}

/// Janus entities of one build, keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JanusRegistry {
    pub entities: BTreeMap<String, JanusEntity>,
}

impl JanusRegistry {
    /// Records `j`; forming the same pair twice keeps one entry.
    pub fn record(&mut self, j: JanusEntity) {
        self.entities.entry(j.id.clone()).or_insert(j);
    }

    pub fn get(&self, id: &str) -> Option<&JanusEntity> {
        self.entities.get(id)
    }

    /// Entities with the given target face, best first, ties by source name.
    pub fn for_target(&self, target: &str) -> Vec<&JanusEntity> {
        let mut v: Vec<&JanusEntity> = self.entities.values().filter(|j| j.target_face == target).collect();
        v.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.source_face.cmp(&b.source_face)));
        v
    }

    /// Best entity whose source face is `category`, whatever its status.
    pub fn best_for_source(&self, category: &str) -> Option<&JanusEntity> {
        self.entities
            .values()
            .filter(|j| j.source_face == category)
            .min_by(|a, b| b.score.cmp(&a.score).then_with(|| a.target_face.cmp(&b.target_face)))
    }

    /// Targets with more than one active association.
    pub fn multi_associated(&self) -> Vec<String> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for j in self.entities.values().filter(|j| j.is_active()) {
            *counts.entry(&j.target_face).or_default() += 1;
        }
        counts.into_iter().filter(|(_, n)| *n > 1).map(|(t, _)| t.to_string()).collect()
    }
}

/// Resolved schema behind the source face.
pub fn source_schema(kb: &KnowledgeBase, janus: &JanusEntity) -> Option<Schema> {
    let d = kb.domain(janus.source_domain.as_deref()?).ok()?;
    d.resolved(janus.source_concept.as_deref()?)
}

fn normalise_slot(s: &str) -> String {
    s.trim().to_lowercase().replace(' ', "-")
}

/// Demons of the source face that write `slot` and are not blocked in the
/// target context, in declaration order.
pub fn borrowable_demons(kb: &KnowledgeBase, janus: &JanusEntity, slot: &str) -> Result<Vec<Demon>, AssocError> {
    if !janus.is_active() {
        return Err(AssocError::Differentiated(janus.id.clone()));
    }
    let Some(schema) = source_schema(kb, janus) else { return Ok(Vec::new()) };
    let want = normalise_slot(slot);
    Ok(schema
        .demons
        .into_iter()
        .filter(|d| normalise_slot(&d.writes) == want && !d.blocked_in(&janus.target_domain))
        .collect())
}

/// What the Janus entity can lend for `need`, if anything.
pub fn borrow(kb: &KnowledgeBase, janus: &JanusEntity, need: Need<'_>) -> Result<Option<Borrowing>, AssocError> {
    if !janus.is_active() {
        return Err(AssocError::Differentiated(janus.id.clone()));
    }
    match need {
        Need::Slot(slot) => Ok(borrowable_demons(kb, janus, slot)?.into_iter().next().map(|d| Borrowing {
            janus: janus.id.clone(),
            kind: BorrowKind::Demon,
            payload: d.id,
            home: d.home_domain,
            from_face: janus.source_face.clone(),
            to_face: janus.target_face.clone(),
        })),
        Need::Aspect(aspect) => {
            let target = kb.domain(&janus.target_domain)?.resolved(&janus.target_face);
            let source = source_schema(kb, janus);
            let has = |s: &Option<Schema>| s.as_ref().is_some_and(|s| s.aspects.iter().any(|a| a == aspect));
            let (t, s) = (has(&target), has(&source));
            let b = |home: &str, from: &str, to: &str| Borrowing {
                janus: janus.id.clone(),
                kind: BorrowKind::Aspect,
                payload: aspect.to_string(),
                home: home.to_string(),
                from_face: from.to_string(),
                to_face: to.to_string(),
            };
            Ok(match (t, s) {
                (true, false) => Some(b(&janus.target_domain, &janus.target_face, &janus.source_face)),
                (false, true) => {
                    Some(b(janus.source_domain.as_deref().unwrap_or_default(), &janus.source_face, &janus.target_face))
                }
                _ => None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> FeatureSet {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identity_and_disjoint() {
        let s = set(&["a", "b"]);
        assert_eq!(overlap(&s, &s).value(), 1.0);
        assert_eq!(overlap(&s, &set(&[])).value(), 0.0);
        assert_eq!(overlap(&set(&[]), &set(&[])).value(), 0.0);
    }

    #[test]
    fn scores_compare_exactly() {
        let half = Score { shared: 3, union: 6 };
        let three_sevenths = Score { shared: 3, union: 7 };
        assert!(half > three_sevenths);
        assert_eq!(half, Score { shared: 1, union: 2 });
        assert_eq!(Score::ZERO, Score { shared: 0, union: 5 });
    }
}
