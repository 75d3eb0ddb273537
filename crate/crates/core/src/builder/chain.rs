//! Chain extraction and the bracketed chain notation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::InterpretationModel;
use crate::kb::{Clause, Domain};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    /// Nodes in walk order, each once.
    pub nodes: Vec<String>,
    /// Edges in walk order; a closed chain ends with the edge back into `end`.
    pub edges: Vec<String>,
    pub end: String,
    pub closed: bool,
}

impl Chain {
    pub fn start(&self) -> &str {
        &self.nodes[0]
    }

    pub fn first_edge(&self) -> &str {
        &self.edges[0]
    }

    pub fn last_edge(&self) -> &str {
        &self.edges[self.edges.len() - 1]
    }
}

/// Walks the directed edges from the chain start. The start is the first node
/// with outgoing but no incoming transfers, else the first node of the chain-rule concept
/// with an outgoing transfer. `None` when no edge is directed.
pub fn chain(model: &InterpretationModel, domain: &Domain) -> Option<Chain> {
    let anchor = anchor(domain);
    let mut out_deg: BTreeMap<&str, usize> = BTreeMap::new();
    let mut in_deg: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, f, t) in model.directed_edges() {
        *out_deg.entry(f).or_default() += 1;
        *in_deg.entry(t).or_default() += 1;
    }
    if out_deg.is_empty() {
        return None;
    }
    let has_out = |n: &str| out_deg.get(n).copied().unwrap_or(0) > 0;
    let has_in = |n: &str| in_deg.get(n).copied().unwrap_or(0) > 0;
    let start = model
        .nodes
        .iter()
        .find(|n| has_out(&n.id) && !has_in(&n.id))
        .or_else(|| {
            let a = anchor?;
            model.nodes.iter().find(|n| has_out(&n.id) && domain.is_a(&n.concept, a))
        })
        .or_else(|| model.nodes.iter().find(|n| has_out(&n.id)))?;

    let mut nodes = vec![start.id.clone()];
    let mut edges: Vec<String> = Vec::new();
    let mut cur = start.id.clone();
    loop {
        let next = model.directed_edges().find(|(e, f, _)| *f == cur && !edges.contains(&e.id));
        let Some((e, _, t)) = next else {
            return Some(Chain { end: cur, nodes, edges, closed: false });
        };
        edges.push(e.id.clone());
        if nodes.iter().any(|n| n == t) {
            return Some(Chain { nodes, edges, end: t.to_string(), closed: true });
        }
        nodes.push(t.to_string());
        cur = t.to_string();
    }
}

/// The concept a chain should start at, from the domain's chain rules.
pub(crate) fn anchor(domain: &Domain) -> Option<&str> {
    let clauses = || domain.meta_constraints.iter().flat_map(|r| r.clauses.iter());
    clauses()
        .find_map(|c| match c {
            Clause::ChainStarts { concept } => Some(concept.as_str()),
            _ => None,
        })
        .or_else(|| {
            clauses().find_map(|c| match c {
                Clause::ChainEnds { concept } => Some(concept.as_str()),
                _ => None,
            })
        })
}

fn node_text(model: &InterpretationModel, id: &str) -> String {
    match model.node(id) {
        Some(n) => format!("[{}:{}{}]", n.id, n.concept, if n.is_postulated() { "*" } else { "" }),
        None => format!("[{id}]"),
    }
}

fn edge_text(model: &InterpretationModel, id: &str) -> String {
    let labels = model.edge(id).map(|e| e.labels()).unwrap_or_default();
    if labels.is_empty() {
        "-(?)->".to_string()
    } else {
        format!("-({})->", labels.join(","))
    }
}

/// `[battery:Reservoir] -(electrical work)-> [bulb:Transformer]`, with `*` on postulated nodes.
pub fn render_chain(model: &InterpretationModel, chain: &Chain) -> String {
    let mut out = node_text(model, chain.start());
    for (i, e) in chain.edges.iter().enumerate() {
        let to = chain.nodes.get(i + 1).map(String::as_str).unwrap_or(&chain.end);
        out.push(' ');
        out.push_str(&edge_text(model, e));
        out.push(' ');
        out.push_str(&node_text(model, to));
    }
    out
}

/// Chain notation plus a line per node or edge the chain does not reach.
pub fn render_model(model: &InterpretationModel, domain: &Domain) -> String {
    let mut lines = Vec::new();
    let ch = chain(model, domain);
    match &ch {
        Some(c) => lines.push(render_chain(model, c)),
        None => lines.push("(no directed transfer)".to_string()),
    }
    for n in &model.nodes {
        if !ch.as_ref().is_some_and(|c| c.nodes.contains(&n.id)) {
            lines.push(format!("  off-chain {}", node_text(model, &n.id)));
        }
    }
    for e in &model.edges {
        if ch.as_ref().is_some_and(|c| c.edges.contains(&e.id)) {
            continue;
        }
        let ends = match e.direction() {
            Some((f, t)) => format!("{} {} {}", node_text(model, f), edge_text(model, &e.id), node_text(model, t)),
            None => {
                format!("{} -(undirected {})- {}", node_text(model, &e.ends[0]), e.id, node_text(model, &e.ends[1]))
            }
        };
        lines.push(format!("  off-chain {ends}"));
    }
    lines.join("\n")
}
