//! Conceptual domains: schemata, demons, lexicon, meta-constraints and world facts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Types a role may name that are not concepts of the domain.
pub const BUILTIN_TYPES: &[&str] = &["Direction", "Label", "Quantity", "Text"];

/// Consequence kinds the checker derives; world facts may only mention these.
pub const CONSEQUENCE_KINDS: &[&str] =
    &["leaves", "arrives-at", "level-decreasing", "level-non-decreasing", "receives"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Notional,
    Conceptual,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Notional => "notional",
            Level::Conceptual => "conceptual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    /// Instantiated as a model node.
    Node,
    /// Instantiated as a model edge between two nodes.
    Edge,
    /// Never instantiated directly.
    Abstract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Necessity {
    Required,
    Optional,
}

/// Admissible fillers of a role.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Constraint {
    Any,
    /// Concept names (capitalised), builtin types, or scene categories.
    OneOf(BTreeSet<String>),
}

impl Constraint {
    pub fn is_builtin(&self, ty: &str) -> bool {
        matches!(self, Constraint::OneOf(s) if s.len() == 1 && s.contains(ty))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub constraint: Constraint,
    pub default: Option<String>,
    pub necessity: Necessity,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "kebab-case")]
pub enum Condition {
    /// The slot holds a category from the set (or a descendant of one).
    SlotIn {
        slot: String,
        categories: BTreeSet<String>,
    },
    FromIs {
        concept: String,
    },
    ToIs {
        concept: String,
    },
    Filled {
        slot: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "kebab-case")]
pub enum Effect {
    Literal {
        value: String,
    },
    /// Orientation along the closed loop that leaves a `plus` terminal.
    CircuitOrder,
    /// Orientation away from the nearest causal source.
    AwayFromSource,
    /// The holder's own category.
    SelfCategory,
    IncomingLabel,
    OutgoingLabel,
    /// Labels read from observations on the edge's origin entity.
    Observed {
        map: Vec<(String, String)>,
    },
}

impl Effect {
    pub fn keyword(&self) -> &'static str {
        match self {
            Effect::Literal { .. } => "literal",
            Effect::CircuitOrder => "circuit-order",
            Effect::AwayFromSource => "away-from-source",
            Effect::SelfCategory => "self",
            Effect::IncomingLabel => "incoming-label",
            Effect::OutgoingLabel => "outgoing-label",
            Effect::Observed { .. } => "observed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demon {
    pub id: String,
    pub writes: String,
    pub conditions: Vec<Condition>,
    pub effect: Effect,
    pub home_domain: String,
    pub blocked_contexts: BTreeSet<String>,
}

impl Demon {
    pub fn blocked_in(&self, context: &str) -> bool {
        self.blocked_contexts.contains(context)
    }
}

/// Equality of a quantity across the initial and final states of a transform.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Invariance {
    pub quantity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub level: Level,
    pub kind: SchemaKind,
    pub parent: Option<String>,
    pub postulable: bool,
    pub roles: Vec<Slot>,
    pub aspects: Vec<String>,
    pub demons: Vec<Demon>,
    /// Pairs of roles whose fillers must differ.
    pub distinct: Vec<(String, String)>,
    pub invariants: Vec<Invariance>,
}

impl Schema {
    pub fn new(name: &str, level: Level, kind: SchemaKind) -> Self {
        Schema {
            name: name.to_string(),
            level,
            kind,
            parent: None,
            postulable: false,
            roles: Vec::new(),
            aspects: Vec::new(),
            demons: Vec::new(),
            distinct: Vec::new(),
            invariants: Vec::new(),
        }
    }

    pub fn role(&self, name: &str) -> Option<&Slot> {
        self.roles.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Syntactic,
    Integrity,
}

impl ConstraintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::Syntactic => "syntactic",
            ConstraintKind::Integrity => "integrity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "clause", rename_all = "kebab-case")]
pub enum Clause {
    RolesComplete,
    LabelsAuthorized,
    ChainExists,
    ChainStarts { concept: String },
    ChainEnds { concept: String },
    DistinctEndpoints,
    EdgeFrom { label: String, concept: String },
    EdgeTo { label: String, concept: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetaConstraint {
    pub id: String,
    pub kind: ConstraintKind,
    pub message: String,
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Assertion {
    /// No consequence of this kind may hold of a node of the concept.
    Forbid { kind: String, concept: String },
    /// Every node of the concept must have a consequence of this kind.
    Require { kind: String, concept: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldFact {
    pub id: String,
    pub message: String,
    pub assertion: Assertion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub level: Level,
    pub operational: bool,
    pub concepts: Vec<Schema>,
    /// Surface word to concept name.
    pub lexicon: BTreeMap<String, String>,
    /// Authorised transfer labels.
    pub edge_labels: Vec<String>,
    pub meta_constraints: Vec<MetaConstraint>,
    pub world_facts: Vec<WorldFact>,
}

impl Domain {
    pub fn new(name: &str, level: Level) -> Self {
        Domain {
            name: name.to_string(),
            level,
            operational: false,
            concepts: Vec::new(),
            lexicon: BTreeMap::new(),
            edge_labels: Vec::new(),
            meta_constraints: Vec::new(),
            world_facts: Vec::new(),
        }
    }

    pub fn concept(&self, name: &str) -> Option<&Schema> {
        self.concepts.iter().find(|c| c.name == name)
    }

    pub fn concept_mut(&mut self, name: &str) -> Option<&mut Schema> {
        self.concepts.iter_mut().find(|c| c.name == name)
    }

    /// `concept` itself followed by its ancestors, nearest first.
    pub fn lineage(&self, concept: &str) -> Vec<&Schema> {
        let mut out: Vec<&Schema> = Vec::new();
        let mut cur = self.concept(concept);
        while let Some(s) = cur {
            if out.iter().any(|o| o.name == s.name) {
                break;
            }
            out.push(s);
            cur = s.parent.as_deref().and_then(|p| self.concept(p));
        }
        out
    }

    pub fn is_a(&self, concept: &str, ancestor: &str) -> bool {
        self.lineage(concept).iter().any(|s| s.name == ancestor)
    }

    /// The schema with inherited roles, aspects, demons and conditions folded in.
    /// Ancestor members come first; a child's role replaces a same-named parent role.
    pub fn resolved(&self, concept: &str) -> Option<Schema> {
        let lineage = self.lineage(concept);
        let own = *lineage.first()?;
        let mut out = own.clone();
        out.roles.clear();
        out.aspects.clear();
        out.demons.clear();
        out.distinct.clear();
        out.invariants.clear();
        for s in lineage.iter().rev() {
            for r in &s.roles {
                match out.roles.iter_mut().find(|o| o.name == r.name) {
                    Some(slot) => *slot = r.clone(),
                    None => out.roles.push(r.clone()),
                }
            }
            for a in &s.aspects {
                if !out.aspects.contains(a) {
                    out.aspects.push(a.clone());
                }
            }
            out.demons.extend(s.demons.iter().cloned());
            out.distinct.extend(s.distinct.iter().cloned());
            out.invariants.extend(s.invariants.iter().cloned());
        }
        Some(out)
    }

    /// The concept in this domain's lineage that declares `role`.
    pub fn role_owner(&self, concept: &str, role: &str) -> Option<&Schema> {
        self.lineage(concept).into_iter().find(|s| s.role(role).is_some())
    }

    pub fn instantiable(&self) -> impl Iterator<Item = &Schema> {
        self.concepts.iter().filter(|c| c.kind != SchemaKind::Abstract && !c.postulable)
    }

    /// Surface words that the lexicon maps to `concept`.
    pub fn words_for(&self, concept: &str) -> Vec<&str> {
        self.lexicon.iter().filter(|(_, c)| *c == concept).map(|(w, _)| w.as_str()).collect()
    }

    /// Whether `value` may fill a slot constrained by `constraint` in this domain.
    /// Categories are compared literally; hierarchy checks live in the feature tables.
    pub fn admits(&self, constraint: &Constraint, value: &str) -> bool {
        match constraint {
            Constraint::Any => true,
            Constraint::OneOf(types) => types.iter().any(|t| {
                if BUILTIN_TYPES.contains(&t.as_str()) {
                    return t != "Direction";
                }
                if is_concept_name(t) {
                    let target = self.lexicon.get(value).map(String::as_str).unwrap_or(value);
                    return self.is_a(target, t);
                }
                t == value
            }),
        }
    }
}

/// Concept references are capitalised; categories are not.
pub fn is_concept_name(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
