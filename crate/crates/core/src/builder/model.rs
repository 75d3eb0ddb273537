//! Interpretation models, per-fact provenance and the replayable build trace.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assoc::{BorrowKind, Borrowing};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Value {
    Term(String),
    Labels(BTreeSet<String>),
    Direction { from: String, to: String },
}

impl Value {
    pub fn labels(&self) -> Option<&BTreeSet<String>> {
        match self {
            Value::Labels(l) => Some(l),
            _ => None,
        }
    }

    /// Category-like fillers of the value, for constraint checks.
    pub fn fillers(&self) -> Vec<String> {
        match self {
            Value::Term(t) => vec![t.clone()],
            Value::Labels(l) => l.iter().cloned().collect(),
            Value::Direction { .. } => Vec::new(),
        }
    }
}

/// Where a model fact came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "kebab-case")]
pub enum Provenance {
    /// Produced inside the target domain: by lexicon, recognition, or a target demon.
    Native {
        by: String,
        janus: Option<String>,
    },
    /// Lent by another domain through a Janus entity.
    Borrowed {
        domain: String,
        kind: BorrowKind,
        item: String,
        janus: String,
    },
    Default {
        schema: String,
    },
    Postulated {
        constraint: String,
    },
}

impl Provenance {
    /// Sort rank: borrowed tags first.
    pub fn rank(&self) -> u8 {
        match self {
            Provenance::Borrowed { .. } => 0,
            Provenance::Native { .. } => 1,
            Provenance::Default { .. } => 2,
            Provenance::Postulated { .. } => 3,
        }
    }

    pub fn is_borrowed(&self) -> bool {
        matches!(self, Provenance::Borrowed { .. })
    }

    pub fn janus(&self) -> Option<&str> {
        match self {
            Provenance::Native { janus, .. } => janus.as_deref(),
            Provenance::Borrowed { janus, .. } => Some(janus),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::Native { .. } => "native",
            Provenance::Borrowed { .. } => "borrowed",
            Provenance::Default { .. } => "default",
            Provenance::Postulated { .. } => "postulated",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Provenance::Native { by, janus: Some(j) } => format!("native ({by} via {j})"),
            Provenance::Native { by, janus: None } => format!("native ({by})"),
            Provenance::Borrowed { domain, kind, item, janus } => {
                let k = match kind {
                    BorrowKind::Demon => "demon",
                    BorrowKind::Aspect => "aspect",
                };
                format!("borrowed {k} `{item}` from {domain} via {janus}")
            }
            Provenance::Default { schema } => format!("default of {schema}"),
            Provenance::Postulated { constraint } => format!("postulated for {constraint}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub provenance: Provenance,
    /// Facts this one was derived from.
    pub inputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Bound {
    Entity { id: String, category: String },
    Postulated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub concept: String,
    pub bound: Bound,
    pub slots: BTreeMap<String, Value>,
    pub aspects: BTreeSet<String>,
}

impl Node {
    pub fn category(&self) -> Option<&str> {
        match &self.bound {
            Bound::Entity { category, .. } => Some(category),
            Bound::Postulated => None,
        }
    }

    pub fn is_postulated(&self) -> bool {
        self.bound == Bound::Postulated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub concept: String,
    /// The two nodes the edge joins, undirected.
    pub ends: Vec<String>,
    /// Scene entities realising the edge.
    pub means: Vec<String>,
    pub slots: BTreeMap<String, Value>,
}

impl Edge {
    pub fn direction(&self) -> Option<(&str, &str)> {
        match self.slots.get("direction") {
            Some(Value::Direction { from, to }) => Some((from, to)),
            _ => None,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.slots.get("label").map(Value::fillers).unwrap_or_default()
    }
}

pub fn node_fact(id: &str) -> String {
    format!("node:{id}")
}

pub fn edge_fact(id: &str) -> String {
    format!("edge:{id}")
}

pub fn slot_fact(holder: &str, slot: &str) -> String {
    format!("slot:{holder}.{slot}")
}

pub fn aspect_fact(node: &str, aspect: &str) -> String {
    format!("aspect:{node}.{aspect}")
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InterpretationModel {
    pub target: String,
    pub scene: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub facts: BTreeMap<String, Fact>,
    /// Required roles left empty, as `holder.role`.
    pub unfilled: Vec<String>,
    /// Salient entities with no target counterpart.
    pub unbound: Vec<String>,
    pub notes: Vec<String>,
}

impl InterpretationModel {
    pub fn new(target: &str, scene: &str) -> Self {
        InterpretationModel { target: target.to_string(), scene: scene.to_string(), ..Default::default() }
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn slots_of(&self, holder: &str) -> Option<&BTreeMap<String, Value>> {
        self.node(holder).map(|n| &n.slots).or_else(|| self.edge(holder).map(|e| &e.slots))
    }

    pub fn holder_fact(&self, holder: &str) -> String {
        if self.node(holder).is_some() {
            node_fact(holder)
        } else {
            edge_fact(holder)
        }
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (&Edge, &str, &str)> {
        self.edges.iter().filter_map(|e| e.direction().map(|(f, t)| (e, f, t)))
    }

    pub fn is_complete(&self) -> bool {
        self.unfilled.is_empty()
    }

    pub fn count(&self, tag: &str) -> usize {
        self.facts.values().filter(|f| f.provenance.tag() == tag).count()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Applies one trace operation.
    pub fn apply(&mut self, op: &TraceOp) {
        match op {
            TraceOp::AddNode { node, fact } => {
                self.facts.insert(node_fact(&node.id), fact.clone());
                self.nodes.push(node.clone());
            }
            TraceOp::AddEdge { edge, fact } => {
                self.facts.insert(edge_fact(&edge.id), fact.clone());
                self.edges.push(edge.clone());
            }
            TraceOp::SetSlot { holder, slot, value, fact } => {
                if let Some(n) = self.nodes.iter_mut().find(|n| n.id == *holder) {
                    n.slots.insert(slot.clone(), value.clone());
                } else if let Some(e) = self.edges.iter_mut().find(|e| e.id == *holder) {
                    e.slots.insert(slot.clone(), value.clone());
                }
                self.facts.insert(slot_fact(holder, slot), fact.clone());
            }
            TraceOp::AddAspect { node, aspect, fact } => {
                if let Some(n) = self.nodes.iter_mut().find(|n| n.id == *node) {
                    n.aspects.insert(aspect.clone());
                }
                self.facts.insert(aspect_fact(node, aspect), fact.clone());
            }
            TraceOp::FoldEdge { edge, into } => {
                let Some(pos) = self.edges.iter().position(|e| e.id == *edge) else { return };
                let folded = self.edges.remove(pos);
                if let Some(target) = self.edges.iter_mut().find(|e| e.id == *into) {
                    target.means.extend(folded.means);
                }
                let old_edge = edge_fact(edge);
                let old_slot = format!("slot:{edge}.");
                self.facts.retain(|k, _| *k != old_edge && !k.starts_with(&old_slot));
                let new_slot = format!("slot:{into}.");
                for f in self.facts.values_mut() {
                    for i in f.inputs.iter_mut() {
                        if *i == old_edge {
                            *i = edge_fact(into);
                        } else if let Some(rest) = i.strip_prefix(&old_slot) {
                            *i = format!("{new_slot}{rest}");
                        }
                    }
                    let mut seen = BTreeSet::new();
                    f.inputs.retain(|i| seen.insert(i.clone()));
                }
            }
            TraceOp::MarkUnfilled { slots } => self.unfilled = slots.clone(),
            TraceOp::MarkUnbound { entities } => self.unbound = entities.clone(),
            TraceOp::Note { text } => self.notes.push(text.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum TraceOp {
    AddNode {
        node: Node,
        fact: Fact,
    },
    AddEdge {
        edge: Edge,
        fact: Fact,
    },
    SetSlot {
        holder: String,
        slot: String,
        value: Value,
        fact: Fact,
    },
    AddAspect {
        node: String,
        aspect: String,
        fact: Fact,
    },
    /// Merges an edge into an earlier one with the same direction.
    FoldEdge {
        edge: String,
        into: String,
    },
    MarkUnfilled {
        slots: Vec<String>,
    },
    MarkUnbound {
        entities: Vec<String>,
    },
    Note {
        text: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Bind,
    Fill,
    BorrowFire,
    Default,
    Postulate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: usize,
    pub kind: EventKind,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub borrowing: Option<Borrowing>,
    pub op: TraceOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildTrace {
    pub events: Vec<TraceEvent>,
}

impl BuildTrace {
    /// Rebuilds the model from an empty one.
    pub fn replay(&self, target: &str, scene: &str) -> InterpretationModel {
        let mut m = InterpretationModel::new(target, scene);
        for e in &self.events {
            m.apply(&e.op);
        }
        m
    }

    pub fn borrowings(&self) -> impl Iterator<Item = &Borrowing> {
        self.events.iter().filter_map(|e| e.borrowing.as_ref())
    }
}
