//! Model construction: role binding, then prioritised slot filling.
//!
//! Fill sources are tried in a fixed order on every round: a native demon of
//! the target schema, a demon borrowed through an active Janus entity, a
//! declared default, and finally postulation of a missing chain endpoint.
//! Each round fills exactly one slot, so the trace is a total order.

pub mod chain;
mod demons;
pub mod model;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{self, borrow, AssocError, BorrowKind, JanusRegistry, Need};
use crate::config::RunConfig;
use crate::kb::{Clause, Constraint, Domain, KbError, KnowledgeBase, Schema, SchemaKind};
use crate::scene::SceneGraph;

pub use chain::{chain, render_chain, render_model, Chain};
pub use demons::{evaluation_counts, CAUSAL_SOURCE};
pub use model::{
    aspect_fact, edge_fact, node_fact, slot_fact, Bound, BuildTrace, Edge, EventKind, Fact, InterpretationModel, Node,
    Provenance, TraceEvent, TraceOp, Value,
};

use demons::{evaluate, EvalCx};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Assoc(#[from] AssocError),
}

impl BuildError {
    pub fn code(&self) -> &'static str {
        match self {
            BuildError::Kb(e) => e.code(),
            BuildError::Assoc(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Build {
    pub model: InterpretationModel,
    pub trace: BuildTrace,
    pub janus: JanusRegistry,
}

/// Terms that may serve as source faces: salient scene categories and the
/// source domains' lexicon words, minus words the target already names.
pub fn janus_candidates(
    kb: &KnowledgeBase,
    scene: &SceneGraph,
    target: &Domain,
    sources: &[String],
    config: &RunConfig,
) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let scene_terms =
        scene.entities.iter().filter(|e| e.saliency >= config.saliency_threshold).map(|e| e.category.clone());
    let source_terms = sources.iter().filter_map(|s| kb.domain(s).ok()).flat_map(|d| d.lexicon.keys().cloned());
    for t in scene_terms.chain(source_terms) {
        if target.lexicon.contains_key(&t) || kb.notional_core(&t).is_err() {
            continue;
        }
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

/// Proposes and forms every Janus entity for the target's instantiable concepts.
pub fn form_janus(
    kb: &KnowledgeBase,
    scene: &SceneGraph,
    target: &Domain,
    sources: &[String],
    config: &RunConfig,
) -> Result<JanusRegistry, BuildError> {
    let candidates = janus_candidates(kb, scene, target, sources, config);
    let mut reg = JanusRegistry::default();
    for concept in target.instantiable() {
        if kb.concept_core(&target.name, &concept.name).is_err() {
            continue;
        }
        for proposal in assoc::propose_janus(kb, &target.name, &concept.name, &candidates, config.janus_threshold)? {
            reg.record(assoc::form(kb, &target.name, &concept.name, &proposal.source_face, sources)?);
        }
    }
    Ok(reg)
}

struct Builder<'a> {
    kb: &'a KnowledgeBase,
    scene: &'a SceneGraph,
    target: &'a Domain,
    janus: &'a JanusRegistry,
    config: &'a RunConfig,
    model: InterpretationModel,
    trace: BuildTrace,
    postulated: BTreeSet<String>,
}

impl<'a> Builder<'a> {
    fn emit(&mut self, kind: EventKind, detail: String, borrowing: Option<assoc::Borrowing>, op: TraceOp) {
        self.model.apply(&op);
        let step = self.trace.events.len() + 1;
        self.trace.events.push(TraceEvent { step, kind, detail, borrowing, op });
    }

    fn schema(&self, concept: &str) -> Option<Schema> {
        self.target.resolved(concept)
    }

    // ---- binding ----

    fn bind(&mut self) {
        let mut unbound = Vec::new();
        let mut edge_entities = Vec::new();
        for ent in &self.scene.entities {
            if ent.saliency < self.config.saliency_threshold {
                continue;
            }
            let (concept, prov) = if let Some(c) = self.kb.pinned(&self.scene.name, &ent.id) {
                let j = assoc::janus_id(c, &ent.category);
                let janus = self.janus.get(&j).map(|j| j.id.clone());
                (c.to_string(), Provenance::Native { by: "rebind".into(), janus })
            } else if let Some(c) = self.target.lexicon.get(&ent.category) {
                (c.clone(), Provenance::Native { by: "lexicon".into(), janus: None })
            } else if let Some(j) = self.janus.best_for_source(&ent.category) {
                (j.target_face.clone(), Provenance::Native { by: "recognition".into(), janus: Some(j.id.clone()) })
            } else {
                unbound.push(ent.id.clone());
                continue;
            };
            let Some(schema) = self.target.concept(&concept) else {
                unbound.push(ent.id.clone());
                continue;
            };
            if schema.kind == SchemaKind::Edge {
                edge_entities.push((ent.clone(), concept, prov));
                continue;
            }
            if schema.kind == SchemaKind::Abstract || schema.postulable {
                unbound.push(ent.id.clone());
                continue;
            }
            let node = Node {
                id: ent.id.clone(),
                concept: concept.clone(),
                bound: Bound::Entity { id: ent.id.clone(), category: ent.category.clone() },
                slots: Default::default(),
                aspects: Default::default(),
            };
            let detail = format!("{} as {concept} ({})", ent.id, prov.describe());
            let fact = Fact { provenance: prov.clone(), inputs: Vec::new() };
            self.emit(EventKind::Bind, detail, None, TraceOp::AddNode { node, fact });
            self.aspects(&ent.id, &concept, prov.janus().map(str::to_string));
        }
        for (ent, concept, prov) in edge_entities {
            let ends: Vec<String> = self
                .scene
                .neighbours(&ent.id)
                .into_iter()
                .filter(|n| self.model.node(n).is_some())
                .map(str::to_string)
                .collect();
            if ends.len() != 2 {
                unbound.push(ent.id.clone());
                continue;
            }
            let id = format!(
                "e{}",
                self.model.edges.len()
                    + self.trace.events.iter().filter(|e| matches!(e.op, TraceOp::FoldEdge { .. })).count()
                    + 1
            );
            let edge = Edge {
                id: id.clone(),
                concept: concept.clone(),
                ends: ends.clone(),
                means: vec![ent.id.clone()],
                slots: Default::default(),
            };
            let detail =
                format!("{} as {concept} {id} between {} and {} ({})", ent.id, ends[0], ends[1], prov.describe());
            let inputs = ends.iter().map(|n| node_fact(n)).collect();
            self.emit(
                EventKind::Bind,
                detail,
                None,
                TraceOp::AddEdge { edge, fact: Fact { provenance: prov.clone(), inputs } },
            );
            if self.schema(&concept).is_some_and(|s| s.role("means").is_some()) {
                let fact = Fact { provenance: prov.clone(), inputs: vec![edge_fact(&id)] };
                let op = TraceOp::SetSlot {
                    holder: id.clone(),
                    slot: "means".into(),
                    value: Value::Term(ent.category.clone()),
                    fact,
                };
                self.emit(EventKind::Bind, format!("{id}.means = {}", ent.category), None, op);
            }
        }
        if !unbound.is_empty() {
            let detail = format!("unbound: {}", unbound.join(", "));
            self.emit(EventKind::Bind, detail, None, TraceOp::MarkUnbound { entities: unbound });
        }
    }

    /// Aspects of a node. Through an active Janus entity, aspects only one face
    /// owns are lent to the other face and tagged borrowed.
    fn aspects(&mut self, node: &str, concept: &str, janus: Option<String>) {
        let target_aspects = self.schema(concept).map(|s| s.aspects).unwrap_or_default();
        let Some(j) = janus.and_then(|id| self.janus.get(&id).cloned()) else {
            for a in target_aspects {
                let fact = Fact {
                    provenance: Provenance::Native { by: concept.to_string(), janus: None },
                    inputs: vec![node_fact(node)],
                };
                self.emit(
                    EventKind::Bind,
                    format!("{node} has {a}"),
                    None,
                    TraceOp::AddAspect { node: node.into(), aspect: a, fact },
                );
            }
            return;
        };
        let source_aspects = assoc::source_schema(self.kb, &j).map(|s| s.aspects).unwrap_or_default();
        let mut all: Vec<String> = source_aspects.clone();
        all.extend(target_aspects.iter().filter(|a| !source_aspects.contains(a)).cloned());
        for a in all {
            let inputs = vec![node_fact(node)];
            if source_aspects.contains(&a) && target_aspects.contains(&a) {
                let fact = Fact {
                    provenance: Provenance::Native { by: "recognition".into(), janus: Some(j.id.clone()) },
                    inputs,
                };
                self.emit(
                    EventKind::Bind,
                    format!("{node} has {a}"),
                    None,
                    TraceOp::AddAspect { node: node.into(), aspect: a, fact },
                );
                continue;
            }
            let Ok(Some(b)) = borrow(self.kb, &j, Need::Aspect(&a)) else { continue };
            let provenance = Provenance::Borrowed {
                domain: b.home.clone(),
                kind: BorrowKind::Aspect,
                item: a.clone(),
                janus: j.id.clone(),
            };
            let detail = format!("aspect {a} lent from {} to {} for {node} via {}", b.from_face, b.to_face, j.id);
            let op = TraceOp::AddAspect { node: node.into(), aspect: a, fact: Fact { provenance, inputs } };
            self.emit(EventKind::BorrowFire, detail, Some(b), op);
        }
    }

    // ---- filling ----

    /// `(holder, concept, role)` for every unfilled role, in fill order.
    fn open_slots(&self) -> Vec<(String, String, crate::kb::Slot)> {
        let mut out = Vec::new();
        let holders = self
            .model
            .nodes
            .iter()
            .map(|n| (n.id.clone(), n.concept.clone(), &n.slots))
            .chain(self.model.edges.iter().map(|e| (e.id.clone(), e.concept.clone(), &e.slots)));
        for (id, concept, slots) in holders {
            let Some(schema) = self.schema(&concept) else { continue };
            for r in schema.roles {
                if !slots.contains_key(&r.name) {
                    out.push((id.clone(), concept.clone(), r));
                }
            }
        }
        out
    }

    fn cx(&self) -> EvalCx<'_> {
        EvalCx { kb: self.kb, target: self.target, scene: self.scene, model: &self.model }
    }

    fn try_native(&mut self) -> bool {
        for (holder, concept, role) in self.open_slots() {
            let schema = self.schema(&concept).expect("holder concept resolves");
            let label = role.constraint.is_builtin("Label");
            for d in schema.demons.iter().filter(|d| d.writes == role.name && !d.blocked_in(&self.target.name)) {
                let Some((value, inputs)) = evaluate(&self.cx(), d, &holder, label) else { continue };
                let fact = Fact { provenance: Provenance::Native { by: d.id.clone(), janus: None }, inputs };
                let detail = format!("{holder}.{} by {}", role.name, d.id);
                self.set(EventKind::Fill, detail, None, holder, role.name.clone(), value, fact);
                return true;
            }
        }
        false
    }

    fn try_borrowed(&mut self) -> Result<bool, BuildError> {
        for (holder, concept, role) in self.open_slots() {
            let label = role.constraint.is_builtin("Label");
            let janus: Vec<assoc::JanusEntity> =
                self.janus.for_target(&concept).into_iter().filter(|j| j.is_active()).cloned().collect();
            for j in janus {
                for d in assoc::borrowable_demons(self.kb, &j, &role.name)? {
                    let Some((value, inputs)) = evaluate(&self.cx(), &d, &holder, label) else { continue };
                    let provenance = Provenance::Borrowed {
                        domain: d.home_domain.clone(),
                        kind: BorrowKind::Demon,
                        item: d.id.clone(),
                        janus: j.id.clone(),
                    };
                    let b = assoc::Borrowing {
                        janus: j.id.clone(),
                        kind: BorrowKind::Demon,
                        payload: d.id.clone(),
                        home: d.home_domain.clone(),
                        from_face: j.source_face.clone(),
                        to_face: j.target_face.clone(),
                    };
                    let detail = format!("{holder}.{} by {} from {} via {}", role.name, d.id, d.home_domain, j.id);
                    self.set(
                        EventKind::BorrowFire,
                        detail,
                        Some(b),
                        holder,
                        role.name.clone(),
                        value,
                        Fact { provenance, inputs },
                    );
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    fn try_default(&mut self) -> bool {
        for (holder, concept, role) in self.open_slots() {
            let Some(v) = role.default.clone() else { continue };
            let owner = self.target.role_owner(&concept, &role.name).map_or(concept.clone(), |s| s.name.clone());
            let value = if role.constraint.is_builtin("Label") {
                Value::Labels(BTreeSet::from([v.clone()]))
            } else {
                Value::Term(v.clone())
            };
            let fact = Fact {
                provenance: Provenance::Default { schema: owner.clone() },
                inputs: vec![self.model.holder_fact(&holder)],
            };
            let detail = format!("{holder}.{} = {v} by default of {owner}", role.name);
            self.set(EventKind::Default, detail, None, holder, role.name, value, fact);
            return true;
        }
        false
    }

    #[allow(clippy::too_many_arguments)]
    fn set(
        &mut self,
        kind: EventKind,
        detail: String,
        borrowing: Option<assoc::Borrowing>,
        holder: String,
        slot: String,
        value: Value,
        fact: Fact,
    ) {
        let dir = match &value {
            Value::Direction { from, to } => Some((from.clone(), to.clone())),
            _ => None,
        };
        self.emit(kind, detail, borrowing, TraceOp::SetSlot { holder: holder.clone(), slot, value, fact });
        let Some((from, to)) = dir else { return };
        let concept = self.model.edge(&holder).map(|e| e.concept.clone());
        let twin = self
            .model
            .edges
            .iter()
            .find(|e| e.id != holder && Some(&e.concept) == concept.as_ref() && e.direction() == Some((&from, &to)))
            .map(|e| e.id.clone());
        if let Some(into) = twin {
            let detail = format!("{holder} coincides with {into} ({from} to {to}); folded");
            self.emit(EventKind::Fill, detail, None, TraceOp::FoldEdge { edge: holder, into });
        }
    }

    /// Instantiates a postulable concept at an open chain end demanded by a rule.
    fn try_postulate(&mut self) -> bool {
        let Some(ch) = chain(&self.model, self.target) else { return false };
        if ch.closed {
            return false;
        }
        for rule in &self.target.meta_constraints {
            for clause in &rule.clauses {
                let (at_end, concept) = match clause {
                    Clause::ChainEnds { concept } => (true, concept),
                    Clause::ChainStarts { concept } => (false, concept),
                    _ => continue,
                };
                let key = format!("{}:{}", rule.id, if at_end { "ends" } else { "starts" });
                let anchor = if at_end { ch.end.clone() } else { ch.start().to_string() };
                let Some(anchor_node) = self.model.node(&anchor) else { continue };
                if self.target.is_a(&anchor_node.concept, concept) || self.postulated.contains(&key) {
                    continue;
                }
                self.postulated.insert(key);
                let fits: Vec<&Schema> = self
                    .target
                    .concepts
                    .iter()
                    .filter(|c| c.postulable && self.target.is_a(&c.name, concept))
                    .collect();
                let edges: Vec<&Schema> = self.target.instantiable().filter(|c| c.kind == SchemaKind::Edge).collect();
                if fits.len() != 1 || edges.len() != 1 {
                    let names: Vec<&str> = fits.iter().map(|c| c.name.as_str()).collect();
                    let text = format!(
                        "postulation for {} refused: {} postulable candidate(s) [{}], {} edge concept(s)",
                        rule.id,
                        fits.len(),
                        names.join(", "),
                        edges.len()
                    );
                    self.emit(EventKind::Postulate, text.clone(), None, TraceOp::Note { text });
                    continue;
                }
                let (new_concept, edge_concept) = (fits[0].name.clone(), edges[0].name.clone());
                let base = new_concept.to_lowercase();
                let mut id = base.clone();
                let mut n = 2;
                while self.model.node(&id).is_some() || self.model.edge(&id).is_some() {
                    id = format!("{base}-{n}");
                    n += 1;
                }
                let prov = Provenance::Postulated { constraint: rule.id.clone() };
                let node = Node {
                    id: id.clone(),
                    concept: new_concept.clone(),
                    bound: Bound::Postulated,
                    slots: Default::default(),
                    aspects: Default::default(),
                };
                let detail = format!("{id} as {new_concept} for {}", rule.id);
                self.emit(
                    EventKind::Postulate,
                    detail,
                    None,
                    TraceOp::AddNode {
                        node,
                        fact: Fact { provenance: prov.clone(), inputs: vec![node_fact(&anchor)] },
                    },
                );
                self.aspects(&id, &new_concept, None);
                let edge_id = self.next_edge_id();
                let (from, to) = if at_end { (anchor.clone(), id.clone()) } else { (id.clone(), anchor.clone()) };
                let edge = Edge {
                    id: edge_id.clone(),
                    concept: edge_concept.clone(),
                    ends: vec![from.clone(), to.clone()],
                    means: Vec::new(),
                    slots: Default::default(),
                };
                let inputs = vec![node_fact(&from), node_fact(&to)];
                self.emit(
                    EventKind::Postulate,
                    format!("{edge_id} as {edge_concept} between {from} and {to}"),
                    None,
                    TraceOp::AddEdge { edge, fact: Fact { provenance: prov.clone(), inputs } },
                );
                let fact = Fact { provenance: prov, inputs: vec![edge_fact(&edge_id)] };
                let op = TraceOp::SetSlot {
                    holder: edge_id.clone(),
                    slot: "direction".into(),
                    value: Value::Direction { from: from.clone(), to: to.clone() },
                    fact,
                };
                self.emit(EventKind::Postulate, format!("{edge_id}.direction = {from} to {to}"), None, op);
                return true;
            }
        }
        false
    }

    fn next_edge_id(&self) -> String {
        let mut n = 1;
        loop {
            let id = format!("e{n}");
            let used = self.model.edge(&id).is_some()
                || self.trace.events.iter().any(|e| matches!(&e.op, TraceOp::FoldEdge { edge, .. } if *edge == id));
            if !used {
                return id;
            }
            n += 1;
        }
    }

    fn fill(&mut self) -> Result<(), BuildError> {
        loop {
            if self.try_native() {
                continue;
            }
            if self.try_borrowed()? {
                continue;
            }
            if self.try_default() {
                continue;
            }
            if self.try_postulate() {
                continue;
            }
            break;
        }
        let missing: Vec<String> = self
            .open_slots()
            .into_iter()
            .filter(|(_, _, r)| r.necessity == crate::kb::Necessity::Required)
            .map(|(h, _, r)| format!("{h}.{}", r.name))
            .collect();
        if !missing.is_empty() {
            let detail = format!("still unfilled: {}", missing.join(", "));
            self.emit(EventKind::Fill, detail, None, TraceOp::MarkUnfilled { slots: missing });
        }
        Ok(())
    }
}

/// Binds salient scene entities to target concepts. Entities bound to an edge
/// concept become edges between the two bound nodes they relate to.
pub fn bind_roles(
    kb: &KnowledgeBase,
    scene: &SceneGraph,
    target: &Domain,
    janus: &JanusRegistry,
    config: &RunConfig,
) -> (InterpretationModel, BuildTrace) {
    let mut b = Builder {
        kb,
        scene,
        target,
        janus,
        config,
        model: InterpretationModel::new(&target.name, &scene.name),
        trace: BuildTrace::default(),
        postulated: BTreeSet::new(),
    };
    b.bind();
    (b.model, b.trace)
}

/// Fills roles of a bound model; continues the given trace.
pub fn fill_slots(
    kb: &KnowledgeBase,
    scene: &SceneGraph,
    target: &Domain,
    janus: &JanusRegistry,
    config: &RunConfig,
    partial: InterpretationModel,
    trace: BuildTrace,
) -> Result<(InterpretationModel, BuildTrace), BuildError> {
    let mut b = Builder { kb, scene, target, janus, config, model: partial, trace, postulated: BTreeSet::new() };
    b.fill()?;
    Ok((b.model, b.trace))
}

/// Janus formation, binding and filling in one call.
pub fn build_model(
    kb: &KnowledgeBase,
    scene: &SceneGraph,
    target: &str,
    sources: &[String],
    config: &RunConfig,
) -> Result<Build, BuildError> {
    let domain = kb.domain(target)?;
    let janus = form_janus(kb, scene, domain, sources, config)?;
    let (partial, trace) = bind_roles(kb, scene, domain, &janus, config);
    let (model, trace) = fill_slots(kb, scene, domain, &janus, config, partial, trace)?;
    Ok(Build { model, trace, janus })
}

/// Whether `value` may fill a role, using the category hierarchy for
/// lower-case types.
pub fn admits(kb: &KnowledgeBase, domain: &Domain, constraint: &Constraint, value: &str) -> bool {
    match constraint {
        Constraint::Any => true,
        Constraint::OneOf(types) => {
            domain.admits(constraint, value) || types.iter().any(|t| kb.category_is_a(value, t))
        }
    }
}
