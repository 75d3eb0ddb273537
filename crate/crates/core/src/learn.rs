//! Repair: turning violations into knowledge-base edits, and the
//! build-check-repair loop.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{overlap, BorrowKind, JanusRegistry};
use crate::builder::{build_model, BuildError, BuildTrace, InterpretationModel, Provenance};
use crate::checker::{check, Consequence, ViolationReport};
use crate::config::RunConfig;
use crate::kb::{
    Constraint, DemonRef, Invariance, KbEdit, KbError, KnowledgeBase, Level, Necessity, Schema, SchemaKind,
    VersionedEdit,
};
use crate::scene::{Observation, SceneGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnError {
    #[error("janus entity `{0}` is already differentiated")]
    AlreadySplit(String),
    #[error("`{node}` is not a positive instance of `{schema}`: {reason}")]
    NotPositive { schema: String, node: String, reason: String },
    #[error("host model has {0} violation(s); only a valid model can be specialized from")]
    HostInvalid(usize),
    #[error("action `{0}` is not of the expected kind")]
    WrongAction(String),
    #[error(transparent)]
    Kb(KbError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

impl From<KbError> for LearnError {
    fn from(e: KbError) -> Self {
        match e {
            KbError::AlreadyDifferentiated(j) => LearnError::AlreadySplit(j),
            e => LearnError::Kb(e),
        }
    }
}

impl LearnError {
    pub fn code(&self) -> &'static str {
        match self {
            LearnError::AlreadySplit(_) => "LEARN-ALREADY-SPLIT",
            LearnError::NotPositive { .. } => "LEARN-NOT-POSITIVE",
            LearnError::HostInvalid(_) => "LEARN-HOST-INVALID",
            LearnError::WrongAction(_) => "LEARN-WRONG-ACTION",
            LearnError::Kb(e) => e.code(),
            LearnError::Build(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum ActionKind {
    Differentiate {
        janus: String,
        demon: Option<DemonRef>,
        aspect: Option<String>,
    },
    Rebind {
        scene: String,
        entity: String,
        concept: String,
    },
    /// Withdraws the default that filled `slot`, so the notional schema stops
    /// supplying it unchecked.
    Specialize {
        domain: String,
        schema: String,
        slot: String,
    },
}

impl ActionKind {
    fn order(&self) -> u8 {
        match self {
            ActionKind::Differentiate { .. } => 0,
            ActionKind::Rebind { .. } => 1,
            ActionKind::Specialize { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairAction {
    pub id: String,
    #[serde(flatten)]
    pub kind: ActionKind,
    /// Violations the action answers.
    pub justification: Vec<String>,
}

impl RepairAction {
    pub fn edit(&self, target: &str) -> KbEdit {
        match &self.kind {
            ActionKind::Differentiate { janus, demon, aspect } => KbEdit::Differentiate {
                janus: janus.clone(),
                target: target.to_string(),
                demon: demon.clone(),
                aspect: aspect.clone(),
            },
            ActionKind::Rebind { scene, entity, concept } => {
                KbEdit::Rebind { scene: scene.clone(), entity: entity.clone(), concept: concept.clone() }
            }
            ActionKind::Specialize { domain, schema, slot } => {
                KbEdit::WithdrawDefault { domain: domain.clone(), concept: schema.clone(), slot: slot.clone() }
            }
        }
    }
}

fn demon_owner(kb: &KnowledgeBase, domain: &str, concept: Option<&str>, demon: &str) -> Option<String> {
    let d = kb.domain(domain).ok()?;
    if let Some(c) = concept {
        if let Some(s) = d.lineage(c).into_iter().find(|s| s.demons.iter().any(|x| x.id == demon)) {
            return Some(s.name.clone());
        }
    }
    d.concepts.iter().find(|s| s.demons.iter().any(|x| x.id == demon)).map(|s| s.name.clone())
}

fn rebind_target(
    kb: &KnowledgeBase,
    scene: &SceneGraph,
    model: &InterpretationModel,
    entity: &str,
    current: &str,
    config: &RunConfig,
) -> Option<String> {
    let target = kb.domain(&model.target).ok()?;
    let category = &scene.entity(entity)?.category;
    let core = kb.notional_core(category).ok()?;
    let want_edge = target.concept(current).is_some_and(|c| c.kind == SchemaKind::Edge);
    let mut best: Option<(crate::assoc::Score, String)> = None;
    for c in target.instantiable() {
        if c.name == current || (c.kind == SchemaKind::Edge) != want_edge || kb.was_tried(&scene.name, entity, &c.name)
        {
            continue;
        }
        let Ok(cc) = kb.concept_core(&target.name, &c.name) else { continue };
        let s = overlap(&core, &cc);
        if s.shared == 0 || !s.at_least(config.janus_threshold) {
            continue;
        }
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, c.name.clone()));
        }
    }
    best.map(|(_, c)| c)
}

/// Candidate actions for one implicated fact.
fn actions_for(
    kb: &KnowledgeBase,
    scene: &SceneGraph,
    model: &InterpretationModel,
    janus: &JanusRegistry,
    config: &RunConfig,
    fact: &str,
    prov: &Provenance,
) -> Vec<ActionKind> {
    match prov {
        Provenance::Borrowed { domain, kind, item, janus: j } => {
            let (demon, aspect) = match kind {
                BorrowKind::Demon => {
                    let concept = janus.get(j).and_then(|e| e.source_concept.clone());
                    let owner = demon_owner(kb, domain, concept.as_deref(), item);
                    let r = owner.map(|c| DemonRef { domain: domain.clone(), concept: c, demon: item.clone() });
                    (r, None)
                }
                BorrowKind::Aspect => (None, Some(item.clone())),
            };
            if kb.is_differentiated(j) {
                return Vec::new();
            }
            vec![ActionKind::Differentiate { janus: j.clone(), demon, aspect }]
        }
        Provenance::Native { janus: Some(_), .. } => {
            let (entities, concept) = if let Some(id) = fact.strip_prefix("node:") {
                match model.node(id) {
                    Some(n) => (vec![id.to_string()], n.concept.clone()),
                    None => return Vec::new(),
                }
            } else if let Some(id) = fact.strip_prefix("edge:") {
                match model.edge(id) {
                    Some(e) => (e.means.clone(), e.concept.clone()),
                    None => return Vec::new(),
                }
            } else {
                return Vec::new();
            };
            entities
                .into_iter()
                .filter_map(|ent| {
                    let to = rebind_target(kb, scene, model, &ent, &concept, config)?;
                    Some(ActionKind::Rebind { scene: scene.name.clone(), entity: ent, concept: to })
                })
                .collect()
        }
        Provenance::Default { schema } => {
            let Some(slot) = fact.strip_prefix("slot:").and_then(|s| s.rsplit_once('.')).map(|(_, s)| s.to_string())
            else {
                return Vec::new();
            };
            let notional = kb
                .domain(&model.target)
                .ok()
                .and_then(|d| d.concept(schema))
                .is_some_and(|s| s.level == Level::Notional);
            if !notional {
                return Vec::new();
            }
            vec![ActionKind::Specialize { domain: model.target.clone(), schema: schema.clone(), slot }]
        }
        _ => Vec::new(),
    }
}

fn action_id(kind: &ActionKind) -> String {
    match kind {
        ActionKind::Differentiate { janus, demon: Some(d), .. } => format!("differentiate {janus} block {}", d.demon),
        ActionKind::Differentiate { janus, aspect: Some(a), .. } => format!("differentiate {janus} withhold {a}"),
        ActionKind::Differentiate { janus, .. } => format!("differentiate {janus}"),
        ActionKind::Rebind { entity, concept, .. } => format!("rebind {entity} to {concept}"),
        ActionKind::Specialize { schema, slot, .. } => format!("specialize {schema}.{slot}"),
    }
}

/// Ranked repair actions: most violations covered first, then Differentiate,
/// Rebind, Specialize, then id.
pub fn diagnose(
    violations: &[ViolationReport],
    model: &InterpretationModel,
    kb: &KnowledgeBase,
    scene: &SceneGraph,
    janus: &JanusRegistry,
    config: &RunConfig,
) -> Vec<RepairAction> {
    let mut by_id: BTreeMap<String, (ActionKind, BTreeSet<String>)> = BTreeMap::new();
    for v in violations {
        for imp in &v.implicated {
            for fact in &imp.facts {
                for kind in actions_for(kb, scene, model, janus, config, fact, &imp.provenance) {
                    let id = action_id(&kind);
                    by_id.entry(id).or_insert_with(|| (kind, BTreeSet::new())).1.insert(v.id.clone());
                }
            }
        }
    }
    let mut out: Vec<RepairAction> = by_id
        .into_iter()
        .map(|(id, (kind, just))| {
            let mut justification: Vec<String> = just.into_iter().collect();
            justification.sort_by_key(|v| (v.len(), v.clone()));
            RepairAction { id, kind, justification }
        })
        .collect();
    out.sort_by(|a, b| {
        b.justification
            .len()
            .cmp(&a.justification.len())
            .then(a.kind.order().cmp(&b.kind.order()))
            .then_with(|| a.id.cmp(&b.id))
    });
    out
}

/// Splits the Janus entity and blocks the demon in the target context.
pub fn differentiate(action: &RepairAction, target: &str, kb: &KnowledgeBase) -> Result<KnowledgeBase, LearnError> {
    if !matches!(action.kind, ActionKind::Differentiate { .. }) {
        return Err(LearnError::WrongAction(action.id.clone()));
    }
    Ok(kb.apply(&action.edit(target))?)
}

/// Applies any repair action, producing the successor knowledge base.
pub fn apply_action(action: &RepairAction, target: &str, kb: &KnowledgeBase) -> Result<KnowledgeBase, LearnError> {
    Ok(kb.apply(&action.edit(target))?)
}

fn measured(measurements: &[Observation], predicate: &str, quantity: &str) -> bool {
    measurements.iter().any(|o| o.predicate == predicate && o.args.first().is_some_and(|q| q == quantity))
}

fn fillers_admitted(kb: &KnowledgeBase, domain: &crate::kb::Domain, c: &Constraint, fillers: &[String]) -> bool {
    fillers.iter().all(|f| crate::builder::admits(kb, domain, c, f))
}

/// Why `node` fails the schema's constraints, if it does.
fn positive_failure(
    kb: &KnowledgeBase,
    domain: &crate::kb::Domain,
    schema: &Schema,
    model: &InterpretationModel,
    node: &str,
) -> Option<String> {
    let Some(n) = model.node(node) else { return Some("no such node".into()) };
    if !domain.is_a(&n.concept, &schema.name) {
        return Some(format!("its concept `{}` is not a `{}`", n.concept, schema.name));
    }
    for r in &schema.roles {
        match n.slots.get(&r.name) {
            None if r.necessity == Necessity::Required => return Some(format!("role `{}` is empty", r.name)),
            Some(v) if !fillers_admitted(kb, domain, &r.constraint, &v.fillers()) => {
                return Some(format!("role `{}` holds an inadmissible filler", r.name));
            }
            _ => {}
        }
    }
    for (a, b) in &schema.distinct {
        if let (Some(x), Some(y)) = (n.slots.get(a), n.slots.get(b)) {
            if x == y {
                return Some(format!("`{a}` and `{b}` are the same"));
            }
        }
    }
    None
}

/// Most specific declared category covering all `fillers`.
fn covering(kb: &KnowledgeBase, fillers: &[String]) -> BTreeSet<String> {
    if fillers.len() == 1 {
        return BTreeSet::from([fillers[0].clone()]);
    }
    let first = kb.category_lineage(&fillers[0]);
    let common = first.into_iter().find(|c| fillers.iter().all(|f| kb.category_is_a(f, c)));
    match common {
        Some(c) => BTreeSet::from([c]),
        None => fillers.iter().cloned().collect(),
    }
}

/// Tightens a notional schema around one instance of a validated model,
/// yielding a conceptual schema. Each filled role is narrowed to the most
/// specific category covering its filler. An `equal(q, before, after)`
/// measurement adds an invariance condition on `q`.
pub fn specialize(
    kb: &KnowledgeBase,
    schema: &str,
    model: &InterpretationModel,
    node: &str,
    measurements: &[Observation],
) -> Result<Schema, LearnError> {
    let domain = kb.domain(&model.target)?;
    let outcome = check(model, domain);
    if !outcome.violations.is_empty() {
        return Err(LearnError::HostInvalid(outcome.violations.len()));
    }
    let loose = domain
        .resolved(schema)
        .ok_or_else(|| KbError::UnknownConcept { domain: domain.name.clone(), concept: schema.to_string() })?;
    if let Some(reason) = positive_failure(kb, domain, &loose, model, node) {
        return Err(LearnError::NotPositive { schema: schema.to_string(), node: node.to_string(), reason });
    }
    let n = model.node(node).expect("checked above");
    let mut out = loose.clone();
    out.level = Level::Conceptual;
    out.parent = None;
    if out.kind == SchemaKind::Abstract {
        out.kind = SchemaKind::Node;
    }
    for r in out.roles.iter_mut() {
        let Some(v) = n.slots.get(&r.name) else { continue };
        let fillers = v.fillers();
        if fillers.is_empty() {
            continue;
        }
        r.constraint = Constraint::OneOf(covering(kb, &fillers));
        r.necessity = Necessity::Required;
        r.default = None;
    }
    let quantities: BTreeSet<&str> = measurements
        .iter()
        .filter(|o| o.predicate == "equal" && o.args.len() == 3)
        .map(|o| o.args[0].as_str())
        .collect();
    for q in quantities {
        if !measured(measurements, "unequal", q) {
            out.invariants.push(Invariance { quantity: q.to_string() });
        }
    }
    Ok(out)
}

/// Whether a schema produced by [`specialize`] admits `node` with the given
/// measurements: every constrained role filler fits and every invariant
/// quantity is measured equal.
pub fn accepts(
    kb: &KnowledgeBase,
    schema: &Schema,
    model: &InterpretationModel,
    node: &str,
    measurements: &[Observation],
) -> bool {
    let Some(n) = model.node(node) else { return false };
    for r in &schema.roles {
        match n.slots.get(&r.name) {
            None => {
                if r.necessity == Necessity::Required {
                    return false;
                }
            }
            Some(v) => {
                let ok = match &r.constraint {
                    Constraint::Any => true,
                    Constraint::OneOf(types) => {
                        v.fillers().iter().all(|f| types.iter().any(|t| f == t || kb.category_is_a(f, t)))
                    }
                };
                if !ok {
                    return false;
                }
            }
        }
    }
    schema
        .invariants
        .iter()
        .all(|inv| measured(measurements, "equal", &inv.quantity) && !measured(measurements, "unequal", &inv.quantity))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    ValidModel,
    Stuck,
    BudgetExhausted,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::ValidModel => "valid-model",
            Outcome::Stuck => "stuck",
            Outcome::BudgetExhausted => "budget-exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub index: usize,
    pub kb_version: u64,
    pub model: InterpretationModel,
    pub trace: BuildTrace,
    pub janus: JanusRegistry,
    pub multi_associated: Vec<String>,
    pub violations: Vec<ViolationReport>,
    pub consequences: Vec<Consequence>,
    pub actions: Vec<RepairAction>,
    pub chosen: Option<RepairAction>,
    pub edit: Option<VersionedEdit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub scene: String,
    pub target: String,
    pub sources: Vec<String>,
    pub initial_kb_version: u64,
    pub initial_kb_digest: String,
    pub iterations: Vec<Iteration>,
    /// Edits applied during the episode, in order.
    pub edits: Vec<VersionedEdit>,
    pub final_kb_version: u64,
    pub final_kb_digest: String,
    pub outcome: Outcome,
}

impl Episode {
    pub fn last(&self) -> &Iteration {
        self.iterations.last().expect("an episode has at least one iteration")
    }

    pub fn final_model(&self) -> &InterpretationModel {
        &self.last().model
    }
}

/// Build, check, repair until valid, stuck, or out of budget. Returns the
/// episode with the final knowledge base.
pub fn repair_loop(
    kb: &KnowledgeBase,
    scene: &SceneGraph,
    target: &str,
    sources: &[String],
    config: &RunConfig,
) -> Result<(Episode, KnowledgeBase), LearnError> {
    let sources: Vec<String> = if sources.is_empty() { kb.operational_domains(target) } else { sources.to_vec() };
    let start = kb.version();
    let start_digest = kb.digest();
    let mut kb = kb.clone();
    let mut iterations = Vec::new();
    let mut edits = Vec::new();
    let mut outcome = Outcome::BudgetExhausted;
    for index in 1..=config.iteration_budget as usize {
        let build = build_model(&kb, scene, target, &sources, config)?;
        let domain = kb.domain(target)?;
        let checked = check(&build.model, domain);
        let mut it = Iteration {
            index,
            kb_version: kb.version(),
            multi_associated: build.janus.multi_associated(),
            model: build.model,
            trace: build.trace,
            janus: build.janus,
            violations: checked.violations,
            consequences: checked.consequences,
            actions: Vec::new(),
            chosen: None,
            edit: None,
        };
        if it.violations.is_empty() {
            iterations.push(it);
            outcome = Outcome::ValidModel;
            break;
        }
        it.actions = diagnose(&it.violations, &it.model, &kb, scene, &it.janus, config);
        let Some(top) = it.actions.first().cloned() else {
            iterations.push(it);
            outcome = Outcome::Stuck;
            break;
        };
        kb = apply_action(&top, target, &kb)?;
        let edit = kb.log().last().cloned().expect("apply logs the edit");
        edits.push(edit.clone());
        it.chosen = Some(top);
        it.edit = Some(edit);
        iterations.push(it);
    }
    let episode = Episode {
        scene: scene.name.clone(),
        target: target.to_string(),
        sources,
        initial_kb_version: start,
        initial_kb_digest: start_digest,
        iterations,
        edits,
        final_kb_version: kb.version(),
        final_kb_digest: kb.digest(),
        outcome,
    };
    Ok((episode, kb))
}
