//! Target-only reinterpretation of a built model and the three checks over it:
//! syntactic rules, integrity rules, and adequacy to world facts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::{chain, evaluation_counts, node_fact, slot_fact, InterpretationModel, Provenance};
use crate::kb::{Assertion, Clause, ConstraintKind, Domain, MetaConstraint, WorldFact};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("violation `{violation}` was raised against a different model")]
    Stale { violation: String },
}

impl CheckError {
    pub fn code(&self) -> &'static str {
        match self {
            CheckError::Stale { .. } => "CHECK-STALE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Syntactic,
    Integrity,
    Adequacy,
}

impl From<ConstraintKind> for ViolationKind {
    fn from(k: ConstraintKind) -> Self {
        match k {
            ConstraintKind::Syntactic => ViolationKind::Syntactic,
            ConstraintKind::Integrity => ViolationKind::Integrity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consequence {
    pub id: String,
    /// One of the consequence kinds world facts may name.
    pub kind: String,
    pub subject: String,
    /// Concept of the subject node and its ancestors.
    pub subject_kinds: Vec<String>,
    pub statement: String,
    pub derivation: Vec<String>,
}

/// Facts sharing one provenance tag among those a violation depends on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Implicated {
    pub provenance: Provenance,
    pub facts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub id: String,
    pub kind: ViolationKind,
    /// Id of the rule or world fact.
    pub constraint: String,
    pub message: String,
    /// Model facts the failure is read off.
    pub cites: Vec<String>,
    pub implicated: Vec<Implicated>,
    pub model_digest: String,
}

impl ViolationReport {
    /// Whether any implicated tag names `janus`.
    pub fn implicates_janus(&self, janus: &str) -> bool {
        self.implicated.iter().any(|i| i.provenance.janus() == Some(janus))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reinterpretation {
    pub consequences: Vec<Consequence>,
    /// Demon evaluations during the call whose home is not the target.
    pub foreign_firings: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub violations: Vec<ViolationReport>,
    pub consequences: Vec<Consequence>,
    pub foreign_firings: u64,
}

fn dedup(v: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    v.retain(|x| seen.insert(x.clone()));
}

fn pending(
    model: &InterpretationModel,
    kind: ViolationKind,
    constraint: &str,
    message: &str,
    mut cites: Vec<String>,
) -> ViolationReport {
    dedup(&mut cites);
    let mut v = ViolationReport {
        id: String::new(),
        kind,
        constraint: constraint.to_string(),
        message: message.to_string(),
        cites,
        implicated: Vec::new(),
        model_digest: model.digest(),
    };
    v.implicated = closure(&v.cites, model);
    v
}

/// Facts cited by one failing clause, or `None` when it holds.
fn clause_failure(model: &InterpretationModel, domain: &Domain, clause: &Clause) -> Option<Vec<String>> {
    let ch = chain(model, domain);
    let dir = |e: &str| slot_fact(e, "direction");
    match clause {
        Clause::RolesComplete => {
            if model.unfilled.is_empty() {
                return None;
            }
            let holders: Vec<String> =
                model.unfilled.iter().filter_map(|s| s.split_once('.').map(|(h, _)| model.holder_fact(h))).collect();
            Some(holders)
        }
        Clause::LabelsAuthorized => {
            let bad: Vec<String> = model
                .edges
                .iter()
                .filter(|e| e.labels().iter().any(|l| !domain.edge_labels.contains(l)))
                .map(|e| slot_fact(&e.id, "label"))
                .collect();
            (!bad.is_empty()).then_some(bad)
        }
        Clause::ChainExists => match ch {
            Some(_) => None,
            None => {
                let mut cites: Vec<String> = model.edges.iter().map(|e| crate::builder::edge_fact(&e.id)).collect();
                if cites.is_empty() {
                    cites = model.nodes.iter().map(|n| node_fact(&n.id)).collect();
                }
                Some(cites)
            }
        },
        Clause::ChainStarts { concept } => {
            let c = ch?;
            let start = model.node(c.start())?;
            (!domain.is_a(&start.concept, concept)).then(|| vec![node_fact(&start.id), dir(c.first_edge())])
        }
        Clause::ChainEnds { concept } => {
            let c = ch?;
            let end = model.node(&c.end)?;
            (!domain.is_a(&end.concept, concept)).then(|| vec![node_fact(&end.id), dir(c.last_edge())])
        }
        Clause::DistinctEndpoints => {
            let c = ch?;
            (c.start() == c.end).then(|| vec![node_fact(&c.end), dir(c.first_edge()), dir(c.last_edge())])
        }
        Clause::EdgeFrom { label, concept } | Clause::EdgeTo { label, concept } => {
            let from = matches!(clause, Clause::EdgeFrom { .. });
            let mut cites = Vec::new();
            for (e, f, t) in model.directed_edges() {
                if !e.labels().contains(label) {
                    continue;
                }
                let end = if from { f } else { t };
                if !model.node(end).is_some_and(|n| domain.is_a(&n.concept, concept)) {
                    cites.push(slot_fact(&e.id, "label"));
                    cites.push(dir(&e.id));
                }
            }
            (!cites.is_empty()).then_some(cites)
        }
    }
}

fn rule_reports(model: &InterpretationModel, domain: &Domain, kind: ConstraintKind) -> Vec<ViolationReport> {
    let rules: Vec<&MetaConstraint> = domain.meta_constraints.iter().filter(|r| r.kind == kind).collect();
    let mut out = Vec::new();
    for r in rules {
        let mut cites = Vec::new();
        let mut failed = false;
        for c in &r.clauses {
            if let Some(f) = clause_failure(model, domain, c) {
                failed = true;
                cites.extend(f);
            }
        }
        if failed {
            out.push(pending(model, kind.into(), &r.id, &r.message, cites));
        }
    }
    out
}

/// One report per violated syntactic or integrity rule, syntactic first.
pub fn check_syntactic(model: &InterpretationModel, domain: &Domain) -> Vec<ViolationReport> {
    let mut out = rule_reports(model, domain, ConstraintKind::Syntactic);
    out.extend(rule_reports(model, domain, ConstraintKind::Integrity));
    out
}

fn foreign(counts: &BTreeMap<String, u64>, target: &str) -> u64 {
    counts.iter().filter(|(d, _)| d.as_str() != target).map(|(_, n)| n).sum()
}

/// Consequences derived by target-domain flow rules only.
///
/// Every directed transfer yields `energy leaves <from>` and
/// `energy arrives-at <to>`. Nodes of the chain-rule concept also get a level
/// trend: outflow only gives `level decreasing`, outflow with inflow
/// `level non-decreasing`, inflow only `receives energy`.
pub fn reinterpret(model: &InterpretationModel, domain: &Domain) -> Reinterpretation {
    let before = evaluation_counts();
    let mut out: Vec<Consequence> = Vec::new();
    let mut push = |kind: &str, subject: &str, statement: String, derivation: Vec<String>| {
        let subject_kinds = model
            .node(subject)
            .map(|n| domain.lineage(&n.concept).iter().map(|s| s.name.clone()).collect())
            .unwrap_or_default();
        out.push(Consequence {
            id: format!("c{}", out.len() + 1),
            kind: kind.to_string(),
            subject: subject.to_string(),
            subject_kinds,
            statement,
            derivation,
        });
    };
    let mut ins: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut outs: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (e, f, t) in model.directed_edges() {
        let d = slot_fact(&e.id, "direction");
        push("leaves", f, format!("energy leaves {f}"), vec![node_fact(f), d.clone()]);
        push("arrives-at", t, format!("energy arrives-at {t}"), vec![node_fact(t), d.clone()]);
        outs.entry(f).or_default().push(d.clone());
        ins.entry(t).or_default().push(d);
    }
    if let Some(anchor) = crate::builder::chain::anchor(domain) {
        for n in model.nodes.iter().filter(|n| domain.is_a(&n.concept, anchor)) {
            let (i, o) = (ins.get(n.id.as_str()), outs.get(n.id.as_str()));
            let mut derivation = vec![node_fact(&n.id)];
            derivation.extend(o.into_iter().flatten().cloned());
            derivation.extend(i.into_iter().flatten().cloned());
            match (i.is_some(), o.is_some()) {
                (false, true) => push("level-decreasing", &n.id, format!("{} level decreasing", n.id), derivation),
                (true, true) => {
                    push("level-non-decreasing", &n.id, format!("{} level non-decreasing", n.id), derivation)
                }
                (true, false) => push("receives", &n.id, format!("{} receives energy", n.id), derivation),
                (false, false) => {}
            }
        }
    }
    let after = evaluation_counts();
    let foreign_firings = foreign(&after, &domain.name) - foreign(&before, &domain.name);
    Reinterpretation { consequences: out, foreign_firings }
}

/// One report per world fact the consequences contradict. A `Require` fact
/// only constrains nodes that appear in some consequence.
pub fn check_adequacy(
    model: &InterpretationModel,
    consequences: &[Consequence],
    facts: &[WorldFact],
) -> Vec<ViolationReport> {
    let mut out = Vec::new();
    for f in facts {
        match &f.assertion {
            Assertion::Forbid { kind, concept } => {
                let hits: Vec<&Consequence> =
                    consequences.iter().filter(|c| c.kind == *kind && c.subject_kinds.contains(concept)).collect();
                if hits.is_empty() {
                    continue;
                }
                let cites = hits.iter().flat_map(|c| c.derivation.iter().cloned()).collect();
                out.push(pending(model, ViolationKind::Adequacy, &f.id, &f.message, cites));
            }
            Assertion::Require { kind, concept } => {
                let has: BTreeSet<&str> =
                    consequences.iter().filter(|c| c.kind == *kind).map(|c| c.subject.as_str()).collect();
                let mut missing: Vec<String> = consequences
                    .iter()
                    .filter(|c| c.subject_kinds.contains(concept) && !has.contains(c.subject.as_str()))
                    .map(|c| node_fact(&c.subject))
                    .collect();
                dedup(&mut missing);
                if !missing.is_empty() {
                    out.push(pending(model, ViolationKind::Adequacy, &f.id, &f.message, missing));
                }
            }
        }
    }
    out
}

/// Transitive closure of `facts` over fact inputs, grouped by provenance,
/// borrowed tags first.
fn closure(facts: &[String], model: &InterpretationModel) -> Vec<Implicated> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<String> = facts.to_vec();
    while let Some(f) = stack.pop() {
        if !seen.insert(f.clone()) {
            continue;
        }
        if let Some(fact) = model.facts.get(&f) {
            stack.extend(fact.inputs.iter().cloned());
        }
    }
    let mut groups: BTreeMap<Provenance, Vec<String>> = BTreeMap::new();
    for f in seen {
        if let Some(fact) = model.facts.get(&f) {
            groups.entry(fact.provenance.clone()).or_default().push(f);
        }
    }
    let mut out: Vec<Implicated> =
        groups.into_iter().map(|(provenance, facts)| Implicated { provenance, facts }).collect();
    out.sort_by(|a, b| a.provenance.rank().cmp(&b.provenance.rank()).then_with(|| a.provenance.cmp(&b.provenance)));
    out
}

/// Provenance tags the violation depends on. Fails if the violation was raised
/// against another model.
pub fn implicate(violation: &ViolationReport, model: &InterpretationModel) -> Result<Vec<Implicated>, CheckError> {
    if violation.model_digest != model.digest() {
        return Err(CheckError::Stale { violation: violation.id.clone() });
    }
    Ok(closure(&violation.cites, model))
}

/// All checks in report order: syntactic, integrity, adequacy; ids `v1..`.
pub fn check(model: &InterpretationModel, domain: &Domain) -> CheckOutcome {
    let mut violations = check_syntactic(model, domain);
    let r = reinterpret(model, domain);
    violations.extend(check_adequacy(model, &r.consequences, &domain.world_facts));
    for (i, v) in violations.iter_mut().enumerate() {
        v.id = format!("v{}", i + 1);
    }
    CheckOutcome { violations, consequences: r.consequences, foreign_firings: r.foreign_firings }
}
