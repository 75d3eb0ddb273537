//! Canonical text output. Two-space indentation, LF line endings, one item per line.

use std::fmt::Write;

use super::parser::quote;
use super::Lowered;
use crate::kb::{
    Assertion, Clause, Condition, Constraint, Domain, Effect, FeatureTable, Necessity, Schema, SchemaKind,
};
use crate::scene::SceneGraph;

const RESERVED: &[&str] = &[
    "any",
    "optional",
    "default",
    "is",
    "in",
    "and",
    "when",
    "writes",
    "blocked",
    "saliency",
    "filled",
    "on",
    "observed",
    "self",
    "circuit-order",
    "away-from-source",
    "incoming-label",
    "outgoing-label",
];

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else { return false };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        && !s.contains("->")
        && !s.ends_with('-')
}

/// An identifier where possible, otherwise a quoted string.
fn word(s: &str) -> String {
    if is_ident(s) && !RESERVED.contains(&s) {
        s.to_string()
    } else {
        quote(s)
    }
}

pub fn serialize(entity: &Lowered) -> String {
    match entity {
        Lowered::Domain(d) => serialize_domain(d),
        Lowered::Scene(s) => serialize_scene(s),
        Lowered::Features(f) => serialize_features(f),
    }
}

fn block(out: &mut String, header: &str, lines: &[String]) {
    if lines.is_empty() {
        let _ = writeln!(out, "{header} {{ }}");
        return;
    }
    let _ = writeln!(out, "{header} {{");
    for l in lines {
        for part in l.lines() {
            let _ = writeln!(out, "  {part}");
        }
    }
    out.push_str("}\n");
}

fn nested(header: &str, lines: &[String]) -> String {
    let mut s = String::new();
    block(&mut s, header, lines);
    s.trim_end().to_string()
}

pub fn serialize_domain(d: &Domain) -> String {
    let mut lines = vec![format!("level {}", d.level), format!("operational {}", d.operational)];
    for c in &d.concepts {
        lines.push(schema_text(c, d));
    }
    if !d.lexicon.is_empty() || !d.edge_labels.is_empty() {
        let mut lex: Vec<String> = d.lexicon.iter().map(|(w, c)| format!("{} -> {c}", quote(w))).collect();
        lex.extend(d.edge_labels.iter().map(|l| format!("edge {}", quote(l))));
        lines.push(nested("lexicon", &lex));
    }
    for r in &d.meta_constraints {
        let clauses: Vec<String> = r.clauses.iter().map(clause_text).collect();
        lines.push(nested(&format!("rule {} {} {}", r.id, r.kind.as_str(), quote(&r.message)), &clauses));
    }
    for f in &d.world_facts {
        let a = match &f.assertion {
            Assertion::Forbid { kind, concept } => format!("forbid {kind} on {concept}"),
            Assertion::Require { kind, concept } => format!("require {kind} on {concept}"),
        };
        lines.push(nested(&format!("fact {} {}", f.id, quote(&f.message)), &[a]));
    }
    let mut out = String::new();
    block(&mut out, &format!("domain {}", d.name), &lines);
    out
}

fn schema_text(s: &Schema, d: &Domain) -> String {
    let mut header = format!("concept {}", s.name);
    if s.level != d.level {
        let _ = write!(header, " {}", s.level);
    }
    match s.kind {
        SchemaKind::Node => {}
        SchemaKind::Edge => header.push_str(" edge"),
        SchemaKind::Abstract => header.push_str(" abstract"),
    }
    if s.postulable {
        header.push_str(" postulable");
    }
    if let Some(p) = &s.parent {
        let _ = write!(header, " is {p}");
    }
    let mut lines = Vec::new();
    for r in &s.roles {
        let ty = match &r.constraint {
            Constraint::Any => "any".to_string(),
            Constraint::OneOf(ts) => ts.iter().map(|t| word(t)).collect::<Vec<_>>().join(" | "),
        };
        let mut l = format!("role {} : {ty}", r.name);
        if r.necessity == Necessity::Optional {
            l.push_str(" optional");
        }
        if let Some(v) = &r.default {
            let _ = write!(l, " default {}", word(v));
        }
        lines.push(l);
    }
    for a in &s.aspects {
        lines.push(format!("aspect {a}"));
    }
    for dm in &s.demons {
        let mut l = format!("demon {} writes {}", dm.id, dm.writes);
        if !dm.conditions.is_empty() {
            let conds: Vec<String> = dm
                .conditions
                .iter()
                .map(|c| match c {
                    Condition::SlotIn { slot, categories } => {
                        format!("{slot} in ({})", categories.iter().map(|c| word(c)).collect::<Vec<_>>().join(", "))
                    }
                    Condition::FromIs { concept } => format!("from is {concept}"),
                    Condition::ToIs { concept } => format!("to is {concept}"),
                    Condition::Filled { slot } => format!("{slot} filled"),
                })
                .collect();
            let _ = write!(l, " when {}", conds.join(" and "));
        }
        let effect = match &dm.effect {
            Effect::Literal { value } => quote(value),
            Effect::Observed { map } => format!(
                "observed({})",
                map.iter().map(|(o, lbl)| format!("{} -> {}", word(o), word(lbl))).collect::<Vec<_>>().join(", ")
            ),
            other => other.keyword().to_string(),
        };
        let _ = write!(l, " = {effect}");
        if !dm.blocked_contexts.is_empty() {
            let ctx: Vec<String> = dm.blocked_contexts.iter().map(|c| word(c)).collect();
            let _ = write!(l, " blocked ({})", ctx.join(", "));
        }
        lines.push(l);
    }
    for (a, b) in &s.distinct {
        lines.push(format!("require {a} != {b}"));
    }
    for inv in &s.invariants {
        lines.push(format!("invariant {}", word(&inv.quantity)));
    }
    nested(&header, &lines)
}

fn clause_text(c: &Clause) -> String {
    match c {
        Clause::RolesComplete => "roles complete".into(),
        Clause::LabelsAuthorized => "labels authorized".into(),
        Clause::ChainExists => "chain exists".into(),
        Clause::ChainStarts { concept } => format!("chain starts {concept}"),
        Clause::ChainEnds { concept } => format!("chain ends {concept}"),
        Clause::DistinctEndpoints => "chain distinct-endpoints".into(),
        Clause::EdgeFrom { label, concept } => format!("edge {} from {concept}", quote(label)),
        Clause::EdgeTo { label, concept } => format!("edge {} to {concept}", quote(label)),
    }
}

pub fn serialize_scene(s: &SceneGraph) -> String {
    let mut lines = Vec::new();
    for e in &s.entities {
        lines.push(format!("entity {} : {} saliency {}", e.id, word(&e.category), e.saliency));
    }
    for r in &s.relations {
        lines.push(format!("relation {} {} {}", r.label, r.from, r.to));
    }
    for o in &s.observations {
        let args: Vec<String> = o.args.iter().map(|a| word(a)).collect();
        lines.push(format!("observe {}({})", o.predicate, args.join(", ")));
    }
    let mut out = String::new();
    block(&mut out, &format!("scene {}", s.name), &lines);
    out
}

pub fn serialize_features(f: &FeatureTable) -> String {
    let mut lines = Vec::new();
    if !f.vocabulary.is_empty() {
        let words: Vec<&str> = f.vocabulary.iter().map(String::as_str).collect();
        let rows: Vec<String> = words.chunks(6).map(|c| c.join(" ")).collect();
        lines.push(nested("vocabulary", &rows));
    }
    for (term, fs) in &f.entries {
        let feats: Vec<&str> = fs.iter().map(String::as_str).collect();
        lines.push(format!("term {} {{ {} }}", word(term), feats.join(" ")));
    }
    for (child, parent) in &f.categories {
        lines.push(format!("category {} is {}", word(child), word(parent)));
    }
    let mut out = String::new();
    block(&mut out, &format!("features {}", f.name), &lines);
    out
}
