//! Demon evaluation over a partial model.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::model::{edge_fact, node_fact, slot_fact, InterpretationModel, Value};
use crate::kb::{Condition, Demon, Domain, Effect, KnowledgeBase};
use crate::scene::SceneGraph;

/// Feature marking a scene entity as the origin of a causal influence.
pub const CAUSAL_SOURCE: &str = "causal-source";

thread_local! {
    static EVALUATIONS: RefCell<BTreeMap<String, u64>> = const { RefCell::new(BTreeMap::new()) };
}

/// Demon evaluations on this thread so far, by home domain.
pub fn evaluation_counts() -> BTreeMap<String, u64> {
    EVALUATIONS.with(|e| e.borrow().clone())
}

pub(crate) struct EvalCx<'a> {
    pub kb: &'a KnowledgeBase,
    pub target: &'a Domain,
    pub scene: &'a SceneGraph,
    pub model: &'a InterpretationModel,
}

/// Value the demon assigns to its slot on `holder`, with the facts it read.
/// `None` when a condition fails or the effect has nothing to say.
pub(crate) fn evaluate(cx: &EvalCx, demon: &Demon, holder: &str, label_slot: bool) -> Option<(Value, Vec<String>)> {
    EVALUATIONS.with(|e| *e.borrow_mut().entry(demon.home_domain.clone()).or_default() += 1);
    let slots = cx.model.slots_of(holder)?;
    let mut inputs = vec![cx.model.holder_fact(holder)];
    for c in &demon.conditions {
        match c {
            Condition::SlotIn { slot, categories } => {
                let v = slots.get(slot)?;
                let ok = v.fillers().iter().any(|f| categories.iter().any(|c| cx.kb.category_is_a(f, c)));
                if !ok {
                    return None;
                }
                inputs.push(slot_fact(holder, slot));
            }
            Condition::Filled { slot } => {
                slots.get(slot)?;
                inputs.push(slot_fact(holder, slot));
            }
            Condition::FromIs { concept } | Condition::ToIs { concept } => {
                let (from, to) = cx.model.edge(holder)?.direction()?;
                let end = if matches!(c, Condition::FromIs { .. }) { from } else { to };
                let node = cx.model.node(end)?;
                if !cx.target.is_a(&node.concept, concept) {
                    return None;
                }
                inputs.push(slot_fact(holder, "direction"));
                inputs.push(node_fact(end));
            }
        }
    }
    let value = match &demon.effect {
        Effect::Literal { value } => {
            if label_slot {
                Value::Labels(BTreeSet::from([value.clone()]))
            } else {
                Value::Term(value.clone())
            }
        }
        Effect::SelfCategory => Value::Term(cx.model.node(holder)?.category()?.to_string()),
        Effect::IncomingLabel | Effect::OutgoingLabel => {
            let incoming = matches!(demon.effect, Effect::IncomingLabel);
            let mut labels = BTreeSet::new();
            for (e, from, to) in cx.model.directed_edges() {
                if (incoming && to == holder) || (!incoming && from == holder) {
                    let Some(Value::Labels(ls)) = e.slots.get("label") else { continue };
                    labels.extend(ls.iter().cloned());
                    inputs.push(slot_fact(&e.id, "direction"));
                    inputs.push(slot_fact(&e.id, "label"));
                }
            }
            if labels.is_empty() {
                return None;
            }
            Value::Labels(labels)
        }
        Effect::Observed { map } => {
            let (from, _) = cx.model.edge(holder)?.direction()?;
            let entity = match &cx.model.node(from)?.bound {
                super::model::Bound::Entity { id, .. } => id.clone(),
                super::model::Bound::Postulated => return None,
            };
            let mut labels = BTreeSet::new();
            for (obs, label) in map {
                if cx.scene.observations_of(&entity).any(|o| o.predicate == *obs) {
                    labels.insert(label.clone());
                }
            }
            if labels.is_empty() {
                return None;
            }
            inputs.push(slot_fact(holder, "direction"));
            inputs.push(node_fact(from));
            Value::Labels(labels)
        }
        Effect::CircuitOrder => {
            let (walk, used) = circuit(cx)?;
            let (from, to) = walk.get(holder)?.clone();
            inputs.extend(used.iter().map(|e| edge_fact(e)));
            Value::Direction { from, to }
        }
        Effect::AwayFromSource => {
            let (from, to, sources) = away_from_source(cx, holder)?;
            inputs.extend(sources.iter().map(|s| node_fact(s)));
            Value::Direction { from, to }
        }
    };
    let mut seen = BTreeSet::new();
    inputs.retain(|i| seen.insert(i.clone()));
    Some((value, inputs))
}

/// Edge id to its (from, to) orientation.
type Orientation = BTreeMap<String, (String, String)>;

/// Orientation of every edge on the closed loop leaving a `plus` terminal.
fn circuit(cx: &EvalCx) -> Option<(Orientation, Vec<String>)> {
    let m = cx.model;
    let (start, first) = cx.scene.relations.iter().filter(|r| r.label == "plus").find_map(|r| {
        let node = m.node(&r.from)?;
        let edge = m.edges.iter().find(|e| e.means.contains(&r.to) && e.ends.contains(&node.id))?;
        Some((node.id.clone(), edge.id.clone()))
    })?;
    let mut oriented = BTreeMap::new();
    let mut order = Vec::new();
    let mut cur = start.clone();
    let mut edge = first;
    loop {
        let e = m.edge(&edge)?;
        let other = if e.ends[0] == cur { e.ends[1].clone() } else { e.ends[0].clone() };
        oriented.insert(edge.clone(), (cur.clone(), other.clone()));
        order.push(edge.clone());
        if other == start {
            return Some((oriented, order));
        }
        cur = other;
        edge = m.edges.iter().find(|e| e.ends.contains(&cur) && !oriented.contains_key(&e.id))?.id.clone();
    }
}

/// Orients `holder` from the end nearer (in undirected hops) to a causal source.
fn away_from_source(cx: &EvalCx, holder: &str) -> Option<(String, String, Vec<String>)> {
    let m = cx.model;
    let e = m.edge(holder)?;
    let sources: Vec<String> = m
        .nodes
        .iter()
        .filter(|n| n.category().is_some_and(|c| cx.kb.notional_core(c).is_ok_and(|f| f.contains(CAUSAL_SOURCE))))
        .map(|n| n.id.clone())
        .collect();
    let mut dist: BTreeMap<String, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for s in &sources {
        dist.insert(s.clone(), 0);
        queue.push_back(s.clone());
    }
    while let Some(n) = queue.pop_front() {
        let d = dist[&n];
        for edge in m.edges.iter().filter(|x| x.ends.contains(&n)) {
            for end in &edge.ends {
                if !dist.contains_key(end) {
                    dist.insert(end.clone(), d + 1);
                    queue.push_back(end.clone());
                }
            }
        }
    }
    let (a, b) = (&e.ends[0], &e.ends[1]);
    match (dist.get(a), dist.get(b)) {
        (Some(da), Some(db)) if da < db => Some((a.clone(), b.clone(), sources)),
        (Some(da), Some(db)) if db < da => Some((b.clone(), a.clone(), sources)),
        _ => None,
    }
}
