//! Name resolution and typing of parsed files.

use std::collections::{BTreeMap, BTreeSet};

use super::diagnostic::{has_errors, Diagnostic, Span};
use super::parser::{Ast, AstNode, Atom, AtomKind, NodeKind};
use super::{FileKind, Lowered};
use crate::kb::{
    is_concept_name, Assertion, Clause, Condition, Constraint, ConstraintKind, Demon, Domain, Effect, FeatureTable,
    Invariance, Level, MetaConstraint, Necessity, Schema, SchemaKind, Slot, WorldFact, BUILTIN_TYPES,
};
use crate::scene::{Entity, Observation, Relation, SceneGraph};

/// Lowers a parsed file. Any error diagnostic means the entity is `None`.
pub fn lower(ast: &Ast, kind: FileKind) -> (Option<Lowered>, Vec<Diagnostic>) {
    let mut cx = Lowerer { ast, diags: Vec::new() };
    let header = ast.header();
    let declared = match header.kind {
        NodeKind::Domain => FileKind::Domain,
        NodeKind::Scene => FileKind::Scene,
        _ => FileKind::Features,
    };
    if declared != kind {
        cx.error(
            "DSL-018",
            header.atoms[0].span,
            format!("expected a {} declaration, found `{}`", kind.extension(), header.atoms[0].text),
        );
        return (None, cx.diags);
    }
    let lowered = match kind {
        FileKind::Domain => cx.domain(header).map(Lowered::Domain),
        FileKind::Scene => cx.scene(header).map(Lowered::Scene),
        FileKind::Features => cx.features(header).map(Lowered::Features),
    };
    let lowered = if has_errors(&cx.diags) { None } else { lowered };
    (lowered, cx.diags)
}

struct Lowerer<'a> {
    ast: &'a Ast,
    diags: Vec<Diagnostic>,
}

/// Cursor over the atoms of one item.
struct Cursor<'a> {
    atoms: &'a [Atom],
    pos: usize,
    span: Span,
}

impl<'a> Cursor<'a> {
    fn new(node: &'a AstNode) -> Self {
        Cursor { atoms: &node.atoms, pos: 0, span: node.span }
    }

    fn peek(&self) -> Option<&'a Atom> {
        self.atoms.get(self.pos)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.atoms.len()
    }

    /// Span of the next atom, or an empty span at the end of the item.
    fn here(&self) -> Span {
        match self.peek() {
            Some(a) => a.span,
            None => Span::empty(self.atoms.last().map_or(self.span.end, |a| a.span.end)),
        }
    }

    fn ident(&mut self) -> Option<&'a Atom> {
        let a = self.peek().filter(|a| a.kind == AtomKind::Ident)?;
        self.pos += 1;
        Some(a)
    }

    /// An identifier or a string literal.
    fn word(&mut self) -> Option<&'a Atom> {
        let a = self.peek().filter(|a| matches!(a.kind, AtomKind::Ident | AtomKind::Str))?;
        self.pos += 1;
        Some(a)
    }

    fn value(&mut self) -> Option<&'a Atom> {
        let a = self.peek().filter(|a| a.kind != AtomKind::Punct)?;
        self.pos += 1;
        Some(a)
    }

    fn string(&mut self) -> Option<&'a Atom> {
        let a = self.peek().filter(|a| a.kind == AtomKind::Str)?;
        self.pos += 1;
        Some(a)
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if self.peek().is_some_and(|a| a.is_ident(kw)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn punct(&mut self, p: &str) -> bool {
        if self.peek().is_some_and(|a| a.is_punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// `( a , b , ... )` of words.
    fn word_list(&mut self) -> Option<Vec<&'a Atom>> {
        if !self.punct("(") {
            return None;
        }
        let mut out = Vec::new();
        loop {
            out.push(self.value()?);
            if self.punct(")") {
                return Some(out);
            }
            if !self.punct(",") {
                return None;
            }
        }
    }
}

const EFFECT_KEYWORDS: &[&str] = &["circuit-order", "away-from-source", "self", "incoming-label", "outgoing-label"];

impl<'a> Lowerer<'a> {
    fn error(&mut self, code: &str, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(code, span, msg));
    }

    fn malformed(&mut self, cur: &Cursor, expected: &str) {
        let span = cur.here();
        self.error("DSL-020", span, format!("malformed item: expected {expected}"));
    }

    fn trailing(&mut self, cur: &Cursor) -> bool {
        if cur.at_end() {
            true
        } else {
            self.malformed(cur, "end of item");
            false
        }
    }

    fn children(&self, node: &'a AstNode) -> impl Iterator<Item = &'a AstNode> + 'a {
        let ast = self.ast;
        node.children.iter().map(move |&c| &ast.nodes[c])
    }

    fn header_name(&mut self, node: &AstNode) -> String {
        node.atoms.get(1).map(|a| a.text.clone()).unwrap_or_default()
    }

    // ---- domains ----

    fn domain(&mut self, header: &'a AstNode) -> Option<Domain> {
        let name = self.header_name(header);
        let mut domain = Domain::new(&name, Level::Notional);
        let mut concept_spans: BTreeMap<String, Span> = BTreeMap::new();
        let mut seen_level = false;
        let mut seen_ids: BTreeSet<String> = BTreeSet::new();

        // concept names first so references may point forward
        for item in self.children(header) {
            if item.kind == NodeKind::Concept {
                if let Some(n) = item.atoms.get(1).filter(|a| a.kind == AtomKind::Ident) {
                    if concept_spans.contains_key(&n.text) {
                        self.error("DSL-013", n.span, format!("duplicate concept `{}`", n.text));
                    } else {
                        concept_spans.insert(n.text.clone(), n.span);
                    }
                }
            }
        }
        for item in self.children(header) {
            if item.kind == NodeKind::Level {
                let mut cur = Cursor::new(item);
                cur.pos = 1;
                match cur.ident().map(|a| a.text.as_str()) {
                    Some("notional") => domain.level = Level::Notional,
                    Some("conceptual") => domain.level = Level::Conceptual,
                    _ => {
                        cur.pos = 1;
                        self.malformed(&cur, "`notional` or `conceptual`");
                    }
                }
                self.trailing(&cur);
                if seen_level {
                    self.error("DSL-024", item.span, "duplicate `level` declaration");
                }
                seen_level = true;
            }
        }
        let concept_names: BTreeSet<String> = concept_spans.keys().cloned().collect();
        let mut pending_refs: Vec<(String, Span)> = Vec::new();

        for item in self.children(header) {
            match item.kind {
                NodeKind::Level => {}
                NodeKind::Operational => {
                    let mut cur = Cursor::new(item);
                    cur.pos = 1;
                    match cur.ident().map(|a| a.text.as_str()) {
                        Some("true") => domain.operational = true,
                        Some("false") => domain.operational = false,
                        _ => {
                            cur.pos = 1;
                            self.malformed(&cur, "`true` or `false`")
                        }
                    }
                    self.trailing(&cur);
                }
                NodeKind::Concept => {
                    if let Some(schema) = self.concept(item, &domain, &mut pending_refs) {
                        if domain.concept(&schema.name).is_none() {
                            domain.concepts.push(schema);
                        }
                    }
                }
                NodeKind::Lexicon => self.lexicon(item, &mut domain, &mut pending_refs),
                NodeKind::Rule => {
                    if let Some(rule) = self.rule(item, &mut pending_refs) {
                        if !seen_ids.insert(rule.id.clone()) {
                            self.error("DSL-024", item.atoms[1].span, format!("duplicate identifier `{}`", rule.id));
                        }
                        domain.meta_constraints.push(rule);
                    }
                }
                NodeKind::Fact => {
                    if let Some(fact) = self.fact(item, &mut pending_refs) {
                        if !seen_ids.insert(fact.id.clone()) {
                            self.error("DSL-024", item.atoms[1].span, format!("duplicate identifier `{}`", fact.id));
                        }
                        domain.world_facts.push(fact);
                    }
                }
                _ => {}
            }
        }

        for (name, span) in pending_refs {
            if let Some(label) = name.strip_prefix("edge:") {
                if !domain.edge_labels.iter().any(|l| l == label) {
                    self.error("DSL-012", span, format!("unknown edge label `{label}`"));
                }
            } else if !concept_names.contains(&name) && !BUILTIN_TYPES.contains(&name.as_str()) {
                self.error("DSL-010", span, format!("undefined concept `{name}`"));
            }
        }
        if has_errors(&self.diags) {
            return None;
        }
        self.check_defaults(header, &domain);
        for d in domain.concepts.iter_mut().flat_map(|c| c.demons.iter_mut()) {
            d.home_domain = name.clone();
        }
        Some(domain)
    }

    fn check_defaults(&mut self, header: &'a AstNode, domain: &Domain) {
        for item in self.children(header).filter(|i| i.kind == NodeKind::Concept) {
            let Some(concept) = item.atoms.get(1).and_then(|a| domain.concept(&a.text)) else { continue };
            for (slot, role_item) in concept.roles.iter().zip(self.children(item).filter(|r| r.kind == NodeKind::Role))
            {
                let Some(default) = &slot.default else { continue };
                let checkable =
                    matches!(&slot.constraint, Constraint::OneOf(ts) if ts.iter().all(|t| is_concept_name(t)));
                if checkable && !domain.admits(&slot.constraint, default) {
                    let span = role_item.atoms.last().map_or(role_item.span, |a| a.span);
                    self.error(
                        "DSL-022",
                        span,
                        format!("default `{default}` does not satisfy the constraint of role `{}`", slot.name),
                    );
                }
            }
        }
    }

    fn concept(&mut self, item: &'a AstNode, domain: &Domain, refs: &mut Vec<(String, Span)>) -> Option<Schema> {
        let mut cur = Cursor::new(item);
        cur.pos = 1;
        let Some(name) = cur.ident() else {
            self.malformed(&cur, "a concept name");
            return None;
        };
        if !is_concept_name(&name.text) {
            self.error("DSL-020", name.span, format!("concept names are capitalised: `{}`", name.text));
        }
        let mut schema = Schema::new(&name.text, domain.level, SchemaKind::Node);
        loop {
            if cur.keyword("notional") {
                schema.level = Level::Notional;
            } else if cur.keyword("conceptual") {
                schema.level = Level::Conceptual;
            } else if cur.keyword("edge") {
                schema.kind = SchemaKind::Edge;
            } else if cur.keyword("abstract") {
                schema.kind = SchemaKind::Abstract;
            } else if cur.keyword("postulable") {
                schema.postulable = true;
            } else {
                break;
            }
        }
        if cur.keyword("is") {
            match cur.ident() {
                Some(p) => {
                    refs.push((p.text.clone(), p.span));
                    schema.parent = Some(p.text.clone());
                }
                None => self.malformed(&cur, "a parent concept"),
            }
        }
        self.trailing(&cur);

        for member in self.children(item) {
            match member.kind {
                NodeKind::Role => {
                    if let Some(slot) = self.role(member, schema.level, refs) {
                        if schema.role(&slot.name).is_some() {
                            self.error("DSL-011", member.atoms[1].span, format!("duplicate role `{}`", slot.name));
                        } else {
                            schema.roles.push(slot);
                        }
                    }
                }
                NodeKind::Aspect => {
                    let mut cur = Cursor::new(member);
                    cur.pos = 1;
                    match cur.ident() {
                        Some(a) if !schema.aspects.contains(&a.text) => schema.aspects.push(a.text.clone()),
                        Some(a) => self.error("DSL-024", a.span, format!("duplicate aspect `{}`", a.text)),
                        None => self.malformed(&cur, "an aspect name"),
                    }
                    self.trailing(&cur);
                }
                NodeKind::Demon => {
                    if let Some(d) = self.demon(member, refs) {
                        if schema.demons.iter().any(|o| o.id == d.id) {
                            self.error("DSL-024", member.atoms[1].span, format!("duplicate demon `{}`", d.id));
                        } else {
                            schema.demons.push(d);
                        }
                    }
                }
                NodeKind::Require => {
                    let mut cur = Cursor::new(member);
                    cur.pos = 1;
                    let a = cur.ident();
                    let ne = cur.punct("!=");
                    let b = cur.ident();
                    match (a, ne, b) {
                        (Some(a), true, Some(b)) => schema.distinct.push((a.text.clone(), b.text.clone())),
                        _ => self.malformed(&cur, "`require <role> != <role>`"),
                    }
                    self.trailing(&cur);
                }
                NodeKind::Invariant => {
                    let mut cur = Cursor::new(member);
                    cur.pos = 1;
                    match cur.word() {
                        Some(q) => schema.invariants.push(Invariance { quantity: q.text.clone() }),
                        None => self.malformed(&cur, "a quantity"),
                    }
                    self.trailing(&cur);
                }
                _ => {}
            }
        }
        Some(schema)
    }

    fn role(&mut self, item: &'a AstNode, level: Level, refs: &mut Vec<(String, Span)>) -> Option<Slot> {
        let mut cur = Cursor::new(item);
        cur.pos = 1;
        let Some(name) = cur.ident() else {
            self.malformed(&cur, "a role name");
            return None;
        };
        if !cur.punct(":") {
            self.malformed(&cur, "`:`");
            return None;
        }
        let mut types = BTreeSet::new();
        let mut any = false;
        loop {
            match cur.word() {
                Some(t) if t.is_ident("any") => any = true,
                Some(t) => {
                    if t.kind == AtomKind::Ident && is_concept_name(&t.text) {
                        refs.push((t.text.clone(), t.span));
                    }
                    types.insert(t.text.clone());
                }
                None => {
                    self.malformed(&cur, "a type");
                    return None;
                }
            }
            if !cur.punct("|") {
                break;
            }
        }
        if any && !types.is_empty() {
            self.error("DSL-020", item.span, "`any` cannot be combined with other types");
        }
        if any && level == Level::Conceptual {
            self.error(
                "DSL-023",
                name.span,
                format!("role `{}` of a conceptual schema must list its admissible types", name.text),
            );
        }
        let mut necessity = Necessity::Required;
        let mut default = None;
        loop {
            if cur.keyword("optional") {
                necessity = Necessity::Optional;
            } else if cur.keyword("default") {
                match cur.value() {
                    Some(v) => default = Some(v.text.clone()),
                    None => {
                        self.malformed(&cur, "a default value");
                        return None;
                    }
                }
            } else {
                break;
            }
        }
        if !self.trailing(&cur) {
            return None;
        }
        let constraint = if any { Constraint::Any } else { Constraint::OneOf(types) };
        Some(Slot { name: name.text.clone(), constraint, default, necessity })
    }

    fn demon(&mut self, item: &'a AstNode, refs: &mut Vec<(String, Span)>) -> Option<Demon> {
        let mut cur = Cursor::new(item);
        cur.pos = 1;
        let id = cur.ident();
        let writes = if cur.keyword("writes") { cur.ident() } else { None };
        let (Some(id), Some(writes)) = (id, writes) else {
            self.malformed(&cur, "`demon <id> writes <role>`");
            return None;
        };
        let mut conditions = Vec::new();
        if cur.keyword("when") {
            loop {
                let Some(c) = self.condition(&mut cur, refs) else {
                    self.malformed(&cur, "a condition");
                    return None;
                };
                conditions.push(c);
                if !cur.keyword("and") {
                    break;
                }
            }
        }
        if !cur.punct("=") {
            self.malformed(&cur, "`=` followed by an effect");
            return None;
        }
        let effect = match cur.peek() {
            Some(a) if a.kind == AtomKind::Str => {
                cur.pos += 1;
                Effect::Literal { value: a.text.clone() }
            }
            Some(a) if a.is_ident("observed") => {
                cur.pos += 1;
                let mut map = Vec::new();
                let ok = cur.punct("(")
                    && loop {
                        let (Some(obs), true, Some(label)) = (cur.word(), cur.punct("->"), cur.word()) else {
                            break false;
                        };
                        map.push((obs.text.clone(), label.text.clone()));
                        if cur.punct(")") {
                            break true;
                        }
                        if !cur.punct(",") {
                            break false;
                        }
                    };
                if !ok {
                    self.malformed(&cur, "`observed(<observation> -> <label>, ...)`");
                    return None;
                }
                Effect::Observed { map }
            }
            Some(a) if a.kind == AtomKind::Ident && EFFECT_KEYWORDS.contains(&a.text.as_str()) => {
                cur.pos += 1;
                match a.text.as_str() {
                    "circuit-order" => Effect::CircuitOrder,
                    "away-from-source" => Effect::AwayFromSource,
                    "self" => Effect::SelfCategory,
                    "incoming-label" => Effect::IncomingLabel,
                    _ => Effect::OutgoingLabel,
                }
            }
            _ => {
                self.malformed(&cur, "an effect");
                return None;
            }
        };
        let mut blocked = BTreeSet::new();
        if cur.keyword("blocked") {
            match cur.word_list() {
                Some(ws) => blocked.extend(ws.into_iter().map(|w| w.text.clone())),
                None => {
                    self.malformed(&cur, "`blocked (<domain>, ...)`");
                    return None;
                }
            }
        }
        if !self.trailing(&cur) {
            return None;
        }
        Some(Demon {
            id: id.text.clone(),
            writes: writes.text.clone(),
            conditions,
            effect,
            home_domain: String::new(),
            blocked_contexts: blocked,
        })
    }

    fn condition(&mut self, cur: &mut Cursor<'a>, refs: &mut Vec<(String, Span)>) -> Option<Condition> {
        let subject = cur.ident()?;
        if cur.keyword("in") {
            let cats = cur.word_list()?;
            return Some(Condition::SlotIn {
                slot: subject.text.clone(),
                categories: cats.into_iter().map(|c| c.text.clone()).collect(),
            });
        }
        if cur.keyword("filled") {
            return Some(Condition::Filled { slot: subject.text.clone() });
        }
        if cur.keyword("is") {
            let c = cur.ident()?;
            refs.push((c.text.clone(), c.span));
            return match subject.text.as_str() {
                "from" => Some(Condition::FromIs { concept: c.text.clone() }),
                "to" => Some(Condition::ToIs { concept: c.text.clone() }),
                _ => None,
            };
        }
        None
    }

    fn lexicon(&mut self, item: &'a AstNode, domain: &mut Domain, refs: &mut Vec<(String, Span)>) {
        for entry in self.children(item) {
            let mut cur = Cursor::new(entry);
            match entry.kind {
                NodeKind::LexEntry => {
                    let word = cur.string();
                    let arrow = cur.punct("->");
                    let target = cur.ident();
                    let (Some(word), true, Some(target)) = (word, arrow, target) else {
                        self.malformed(&cur, "`\"word\" -> Concept`");
                        continue;
                    };
                    if !self.trailing(&cur) {
                        continue;
                    }
                    refs.push((target.text.clone(), target.span));
                    if domain.lexicon.contains_key(&word.text) {
                        self.error("DSL-021", word.span, format!("duplicate lexicon word `{}`", word.text));
                    } else {
                        domain.lexicon.insert(word.text.clone(), target.text.clone());
                    }
                }
                NodeKind::EdgeLabel => {
                    cur.pos = 1;
                    let Some(label) = cur.string() else {
                        self.malformed(&cur, "a quoted edge label");
                        continue;
                    };
                    if !self.trailing(&cur) {
                        continue;
                    }
                    if domain.edge_labels.contains(&label.text) {
                        self.error("DSL-021", label.span, format!("duplicate edge label `{}`", label.text));
                    } else {
                        domain.edge_labels.push(label.text.clone());
                    }
                }
                _ => {}
            }
        }
    }

    fn rule(&mut self, item: &'a AstNode, refs: &mut Vec<(String, Span)>) -> Option<MetaConstraint> {
        let mut cur = Cursor::new(item);
        cur.pos = 1;
        let id = cur.ident();
        let kind = match cur.ident().map(|a| a.text.as_str()) {
            Some("syntactic") => Some(ConstraintKind::Syntactic),
            Some("integrity") => Some(ConstraintKind::Integrity),
            _ => None,
        };
        let message = cur.string();
        let (Some(id), Some(kind), Some(message)) = (id, kind, message) else {
            self.malformed(&cur, "`rule <id> syntactic|integrity \"message\" { ... }`");
            return None;
        };
        self.trailing(&cur);
        let mut clauses = Vec::new();
        for c in self.children(item) {
            let mut cur = Cursor::new(c);
            let clause = match cur.ident().map(|a| a.text.as_str()) {
                Some("roles") => cur.keyword("complete").then_some(Clause::RolesComplete),
                Some("labels") => cur.keyword("authorized").then_some(Clause::LabelsAuthorized),
                Some("chain") => {
                    if cur.keyword("exists") {
                        Some(Clause::ChainExists)
                    } else if cur.keyword("distinct-endpoints") {
                        Some(Clause::DistinctEndpoints)
                    } else if cur.keyword("starts") {
                        cur.ident().map(|a| {
                            refs.push((a.text.clone(), a.span));
                            Clause::ChainStarts { concept: a.text.clone() }
                        })
                    } else if cur.keyword("ends") {
                        cur.ident().map(|a| {
                            refs.push((a.text.clone(), a.span));
                            Clause::ChainEnds { concept: a.text.clone() }
                        })
                    } else {
                        None
                    }
                }
                Some("edge") => {
                    let label = cur.string();
                    let from = if cur.keyword("from") {
                        Some(true)
                    } else if cur.keyword("to") {
                        Some(false)
                    } else {
                        None
                    };
                    let concept = cur.ident();
                    match (label, from, concept) {
                        (Some(l), Some(from), Some(c)) => {
                            refs.push((format!("edge:{}", l.text), l.span));
                            refs.push((c.text.clone(), c.span));
                            let (label, concept) = (l.text.clone(), c.text.clone());
                            Some(if from {
                                Clause::EdgeFrom { label, concept }
                            } else {
                                Clause::EdgeTo { label, concept }
                            })
                        }
                        _ => None,
                    }
                }
                _ => None,
            };
            match clause {
                Some(cl) if cur.at_end() => clauses.push(cl),
                _ => self.malformed(&cur, "a rule clause"),
            }
        }
        if clauses.is_empty() {
            self.error("DSL-020", item.span, format!("rule `{}` has no clauses", id.text));
        }
        Some(MetaConstraint { id: id.text.clone(), kind, message: message.text.clone(), clauses })
    }

    fn fact(&mut self, item: &'a AstNode, refs: &mut Vec<(String, Span)>) -> Option<WorldFact> {
        let mut cur = Cursor::new(item);
        cur.pos = 1;
        let (Some(id), Some(message)) = (cur.ident(), cur.string()) else {
            self.malformed(&cur, "`fact <id> \"message\" { ... }`");
            return None;
        };
        self.trailing(&cur);
        let mut assertion = None;
        for c in self.children(item) {
            let mut cur = Cursor::new(c);
            let mode = cur.ident().map(|a| a.text.clone());
            let kind = cur.ident();
            let on = cur.keyword("on");
            let concept = cur.ident();
            let (Some(mode), Some(kind), true, Some(concept), true) = (mode, kind, on, concept, cur.at_end()) else {
                self.malformed(&cur, "`forbid|require <consequence> on <Concept>`");
                continue;
            };
            refs.push((concept.text.clone(), concept.span));
            let (kind, concept) = (kind.text.clone(), concept.text.clone());
            let a = if mode == "forbid" {
                Assertion::Forbid { kind, concept }
            } else {
                Assertion::Require { kind, concept }
            };
            if assertion.is_some() {
                self.error("DSL-020", c.span, "a fact holds exactly one assertion");
            }
            assertion = Some(a);
        }
        let Some(assertion) = assertion else {
            self.error("DSL-020", item.span, format!("fact `{}` has no assertion", id.text));
            return None;
        };
        Some(WorldFact { id: id.text.clone(), message: message.text.clone(), assertion })
    }

    // ---- scenes ----

    fn scene(&mut self, header: &'a AstNode) -> Option<SceneGraph> {
        let mut scene = SceneGraph::new(&self.header_name(header));
        let mut relation_items = Vec::new();
        for item in self.children(header) {
            let mut cur = Cursor::new(item);
            cur.pos = 1;
            match item.kind {
                NodeKind::Entity => {
                    let id = cur.ident();
                    let colon = cur.punct(":");
                    let category = cur.word();
                    let (Some(id), true, Some(category)) = (id, colon, category) else {
                        self.malformed(&cur, "`entity <id> : <category> saliency <number>`");
                        continue;
                    };
                    let saliency = if cur.keyword("saliency") {
                        match cur.peek() {
                            Some(n) if n.kind == AtomKind::Number => {
                                cur.pos += 1;
                                match n.text.parse::<f64>() {
                                    Ok(v) if (0.0..=1.0).contains(&v) => Some(v),
                                    Ok(_) => {
                                        self.error("DSL-016", n.span, format!("saliency {} is outside [0, 1]", n.text));
                                        None
                                    }
                                    Err(_) => {
                                        self.error("DSL-017", n.span, format!("bad number `{}`", n.text));
                                        None
                                    }
                                }
                            }
                            _ => {
                                self.malformed(&cur, "a saliency number");
                                None
                            }
                        }
                    } else {
                        self.malformed(&cur, "`saliency <number>`");
                        None
                    };
                    if !self.trailing(&cur) {
                        continue;
                    }
                    let Some(saliency) = saliency else { continue };
                    if scene.entity(&id.text).is_some() {
                        self.error("DSL-014", id.span, format!("duplicate entity `{}`", id.text));
                        continue;
                    }
                    scene.entities.push(Entity { id: id.text.clone(), category: category.text.clone(), saliency });
                }
                NodeKind::Relation => {
                    let (Some(label), Some(from), Some(to)) = (cur.ident(), cur.ident(), cur.ident()) else {
                        self.malformed(&cur, "`relation <label> <from> <to>`");
                        continue;
                    };
                    if !self.trailing(&cur) {
                        continue;
                    }
                    relation_items.push((from, to));
                    scene.relations.push(Relation {
                        label: label.text.clone(),
                        from: from.text.clone(),
                        to: to.text.clone(),
                    });
                }
                NodeKind::Observe => {
                    let pred = cur.ident();
                    let args = cur.word_list();
                    let (Some(pred), Some(args)) = (pred, args) else {
                        self.malformed(&cur, "`observe <predicate>(<arg>, ...)`");
                        continue;
                    };
                    if !self.trailing(&cur) {
                        continue;
                    }
                    scene.observations.push(Observation {
                        predicate: pred.text.clone(),
                        args: args.into_iter().map(|a| a.text.clone()).collect(),
                    });
                }
                _ => {}
            }
        }
        for (from, to) in relation_items {
            for end in [from, to] {
                if scene.entity(&end.text).is_none() {
                    self.error("DSL-015", end.span, format!("unknown entity `{}`", end.text));
                }
            }
        }
        Some(scene)
    }

    // ---- feature tables ----

    fn features(&mut self, header: &'a AstNode) -> Option<FeatureTable> {
        let mut table = FeatureTable::new(&self.header_name(header));
        let mut uses: Vec<&Atom> = Vec::new();
        for item in self.children(header) {
            let mut cur = Cursor::new(item);
            cur.pos = 1;
            match item.kind {
                NodeKind::Vocabulary => {
                    self.trailing(&cur);
                    for line in self.children(item) {
                        for a in &line.atoms {
                            if a.kind == AtomKind::Ident {
                                table.vocabulary.insert(a.text.clone());
                            } else {
                                self.error("DSL-020", a.span, "feature names are identifiers");
                            }
                        }
                    }
                }
                NodeKind::Term => {
                    let Some(term) = cur.word() else {
                        self.malformed(&cur, "a term");
                        continue;
                    };
                    self.trailing(&cur);
                    let mut set = BTreeSet::new();
                    for line in self.children(item) {
                        for a in &line.atoms {
                            if a.kind == AtomKind::Ident {
                                set.insert(a.text.clone());
                                uses.push(a);
                            } else {
                                self.error("DSL-020", a.span, "feature names are identifiers");
                            }
                        }
                    }
                    if set.is_empty() {
                        self.error("DSL-020", item.span, format!("term `{}` has an empty feature set", term.text));
                        continue;
                    }
                    if table.entries.contains_key(&term.text) {
                        self.error("DSL-024", term.span, format!("duplicate term `{}`", term.text));
                        continue;
                    }
                    table.entries.insert(term.text.clone(), set);
                }
                NodeKind::Category => {
                    let child = cur.word();
                    let is = cur.keyword("is");
                    let parent = cur.word();
                    let (Some(child), true, Some(parent)) = (child, is, parent) else {
                        self.malformed(&cur, "`category <child> is <parent>`");
                        continue;
                    };
                    if !self.trailing(&cur) {
                        continue;
                    }
                    if table.categories.contains_key(&child.text) {
                        self.error("DSL-024", child.span, format!("category `{}` already has a parent", child.text));
                        continue;
                    }
                    table.categories.insert(child.text.clone(), parent.text.clone());
                }
                _ => {}
            }
        }
        for a in uses {
            if !table.vocabulary.contains(&a.text) {
                self.error("DSL-019", a.span, format!("feature `{}` is not in the vocabulary", a.text));
            }
        }
        Some(table)
    }
}
