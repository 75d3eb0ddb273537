//! Block-structured parser producing a generic syntax tree.
//!
//! Every item is a run of atoms terminated by a newline, `;` or `}`, with an
//! optional `{ ... }` block that must open on the same line. The parser only
//! knows which keywords may start an item in each block; item shapes are
//! checked during lowering. Errors recover at item and block boundaries so one
//! run reports every independent problem in a file.

use serde::{Deserialize, Serialize};

use super::diagnostic::{has_errors, Diagnostic, Span};
use super::lexer::{tokenize, Token, TokenKind};
use super::{FileKind, SourceFile};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    File,
    Domain,
    Scene,
    Features,
    Level,
    Operational,
    Concept,
    Role,
    Aspect,
    Demon,
    Require,
    Invariant,
    Lexicon,
    LexEntry,
    EdgeLabel,
    Rule,
    Clause,
    Fact,
    FactClause,
    Entity,
    Relation,
    Observe,
    Vocabulary,
    Term,
    Category,
    FeatureList,
}

impl NodeKind {
    fn takes_block(self) -> bool {
        matches!(
            self,
            NodeKind::Domain
                | NodeKind::Scene
                | NodeKind::Features
                | NodeKind::Concept
                | NodeKind::Lexicon
                | NodeKind::Rule
                | NodeKind::Fact
                | NodeKind::Vocabulary
                | NodeKind::Term
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Context {
    Top,
    Domain,
    Concept,
    Lexicon,
    Rule,
    Fact,
    Scene,
    Features,
    FeatureSet,
    Leaf,
    /// Inside a rejected item; children are skipped without diagnostics.
    Skipped,
}

impl Context {
    fn classify(self, head: &Token) -> Option<NodeKind> {
        use NodeKind as K;
        if head.kind == TokenKind::Str {
            return (self == Context::Lexicon).then_some(K::LexEntry);
        }
        if head.kind != TokenKind::Ident {
            return None;
        }
        let kw = head.text.as_str();
        Some(match (self, kw) {
            (Context::Top, "domain") => K::Domain,
            (Context::Top, "scene") => K::Scene,
            (Context::Top, "features") => K::Features,
            (Context::Domain, "level") => K::Level,
            (Context::Domain, "operational") => K::Operational,
            (Context::Domain, "concept") => K::Concept,
            (Context::Domain, "lexicon") => K::Lexicon,
            (Context::Domain, "rule") => K::Rule,
            (Context::Domain, "fact") => K::Fact,
            (Context::Concept, "role") => K::Role,
            (Context::Concept, "aspect") => K::Aspect,
            (Context::Concept, "demon") => K::Demon,
            (Context::Concept, "require") => K::Require,
            (Context::Concept, "invariant") => K::Invariant,
            (Context::Lexicon, "edge") => K::EdgeLabel,
            (Context::Rule, "chain" | "roles" | "labels" | "edge") => K::Clause,
            (Context::Fact, "forbid" | "require") => K::FactClause,
            (Context::Scene, "entity") => K::Entity,
            (Context::Scene, "relation") => K::Relation,
            (Context::Scene, "observe") => K::Observe,
            (Context::Features, "vocabulary") => K::Vocabulary,
            (Context::Features, "term") => K::Term,
            (Context::Features, "category") => K::Category,
            (Context::FeatureSet, _) => K::FeatureList,
            _ => return None,
        })
    }

    fn child(kind: NodeKind) -> Context {
        match kind {
            NodeKind::Domain => Context::Domain,
            NodeKind::Scene => Context::Scene,
            NodeKind::Features => Context::Features,
            NodeKind::Concept => Context::Concept,
            NodeKind::Lexicon => Context::Lexicon,
            NodeKind::Rule => Context::Rule,
            NodeKind::Fact => Context::Fact,
            NodeKind::Vocabulary | NodeKind::Term => Context::FeatureSet,
            _ => Context::Leaf,
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Context::Top => "at top level",
            Context::Domain => "in a domain",
            Context::Concept => "in a concept",
            Context::Lexicon => "in a lexicon",
            Context::Rule => "in a rule",
            Context::Fact => "in a fact",
            Context::Scene => "in a scene",
            Context::Features => "in a feature table",
            Context::FeatureSet => "in a feature set",
            Context::Leaf | Context::Skipped => "here",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(skip)]
    pub kind: AtomKind,
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum AtomKind {
    #[default]
    Ident,
    Str,
    Number,
    Punct,
}

impl Atom {
    pub fn is_ident(&self, text: &str) -> bool {
        self.kind == AtomKind::Ident && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.kind == AtomKind::Punct && self.text == text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: NodeKind,
    pub span: Span,
    pub children: Vec<NodeId>,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ast {
    pub nodes: Vec<AstNode>,
    pub root: NodeId,
}

/// Span-free view of a subtree, for comparing trees parsed from different text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub kind: NodeKind,
    pub atoms: Vec<(AtomKind, String)>,
    pub children: Vec<Shape>,
}

impl Ast {
    pub fn node(&self, id: NodeId) -> &AstNode {
        &self.nodes[id]
    }

    /// The single top-level declaration.
    pub fn header(&self) -> &AstNode {
        &self.nodes[self.nodes[self.root].children[0]]
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = &AstNode> {
        self.nodes[id].children.iter().map(move |&c| &self.nodes[c])
    }

    pub fn header_id(&self) -> NodeId {
        self.nodes[self.root].children[0]
    }

    pub fn shape(&self) -> Shape {
        self.shape_of(self.root)
    }

    fn shape_of(&self, id: NodeId) -> Shape {
        let n = &self.nodes[id];
        Shape {
            kind: n.kind,
            atoms: n.atoms.iter().map(|a| (a.kind, a.text.clone())).collect(),
            children: n.children.iter().map(|&c| self.shape_of(c)).collect(),
        }
    }

    /// Re-emits the tree as text that parses back to the same shape.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for &c in &self.nodes[self.root].children {
            self.write_item(c, 0, &mut out);
        }
        out
    }

    fn write_item(&self, id: NodeId, depth: usize, out: &mut String) {
        let n = &self.nodes[id];
        out.push_str(&"  ".repeat(depth));
        let atoms: Vec<String> = n
            .atoms
            .iter()
            .map(|a| match a.kind {
                AtomKind::Str => quote(&a.text),
                _ => a.text.clone(),
            })
            .collect();
        out.push_str(&atoms.join(" "));
        if n.kind.takes_block() {
            if n.children.is_empty() {
                out.push_str(" { }\n");
            } else {
                out.push_str(" {\n");
                for &c in &n.children {
                    self.write_item(c, depth + 1, out);
                }
                out.push_str(&"  ".repeat(depth));
                out.push_str("}\n");
            }
        } else {
            out.push('\n');
        }
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    nodes: Vec<AstNode>,
    diags: Vec<Diagnostic>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn skip_separators(&mut self) {
        while let Some(t) = self.peek() {
            if matches!(t.kind, TokenKind::Newline | TokenKind::Semi) {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Parses items until EOF or, when `in_block`, until a `}` (left unconsumed).
    fn items(&mut self, ctx: Context, in_block: bool) -> Vec<NodeId> {
        let mut out = Vec::new();
        loop {
            self.skip_separators();
            let Some(tok) = self.peek() else { break };
            match tok.kind {
                TokenKind::RBrace if in_block => break,
                TokenKind::RBrace => {
                    self.diags.push(Diagnostic::error("DSL-004", tok.span, "unexpected `}`"));
                    self.pos += 1;
                }
                TokenKind::LBrace => {
                    self.diags.push(Diagnostic::error("DSL-004", tok.span, "block without a header"));
                    self.pos += 1;
                    self.items(Context::Skipped, true);
                    self.close_block(tok.span);
                }
                _ => {
                    if let Some(id) = self.item(ctx) {
                        out.push(id);
                    }
                }
            }
        }
        out
    }

    fn close_block(&mut self, open: Span) -> Span {
        match self.peek() {
            Some(t) if t.kind == TokenKind::RBrace => {
                self.pos += 1;
                t.span
            }
            _ => {
                self.diags.push(Diagnostic::error("DSL-003", open, "unclosed block: missing `}`"));
                open
            }
        }
    }

    fn item(&mut self, ctx: Context) -> Option<NodeId> {
        let start = self.pos;
        while let Some(t) = self.peek() {
            if matches!(t.kind, TokenKind::Newline | TokenKind::Semi | TokenKind::LBrace | TokenKind::RBrace) {
                break;
            }
            self.pos += 1;
        }
        let toks = &self.tokens[start..self.pos];
        let head = &toks[0];
        let kind = if ctx == Context::Skipped { None } else { ctx.classify(head) };
        if kind.is_none() && ctx != Context::Skipped {
            let (code, what) = if ctx == Context::Top {
                ("DSL-005", "unknown top-level keyword")
            } else {
                ("DSL-006", "unknown keyword")
            };
            self.diags.push(Diagnostic::error(code, head.span, format!("{what} `{}` {}", head.text, ctx.describe())));
        }
        let mut span = toks[0].span.join(toks[toks.len() - 1].span);
        let mut children = Vec::new();
        let has_block = self.peek().is_some_and(|t| t.kind == TokenKind::LBrace);
        if has_block {
            let open = self.peek().unwrap().span;
            self.pos += 1;
            let child_ctx = match kind {
                Some(k) if k.takes_block() => Context::child(k),
                Some(_) => {
                    self.diags.push(Diagnostic::error(
                        "DSL-009",
                        open,
                        format!("`{}` does not take a block", head.text),
                    ));
                    Context::Skipped
                }
                None => Context::Skipped,
            };
            children = self.items(child_ctx, true);
            let close = self.close_block(open);
            span = span.join(close);
        } else if let Some(k) = kind.filter(|k| k.takes_block()) {
            let _ = k;
            self.diags.push(Diagnostic::error(
                "DSL-009",
                span,
                format!("`{}` requires a `{{ ... }}` block on the same line", head.text),
            ));
            return None;
        }
        let kind = kind?;
        let atoms = toks
            .iter()
            .map(|t| Atom {
                kind: match t.kind {
                    TokenKind::Ident => AtomKind::Ident,
                    TokenKind::Str => AtomKind::Str,
                    TokenKind::Number => AtomKind::Number,
                    _ => AtomKind::Punct,
                },
                text: t.text.clone(),
                span: t.span,
            })
            .collect();
        self.nodes.push(AstNode { kind, span, children, atoms });
        Some(self.nodes.len() - 1)
    }
}

/// Parses a source file into a syntax tree, or returns every error found.
pub fn parse(source: &SourceFile) -> Result<Ast, Vec<Diagnostic>> {
    let src = source.content.as_str();
    let (tokens, mut diags) = tokenize(src);
    let mut p = Parser { tokens: &tokens, pos: 0, nodes: Vec::new(), diags: Vec::new() };
    let top = p.items(Context::Top, false);
    diags.append(&mut p.diags);

    if top.is_empty() && !has_errors(&diags) {
        diags.push(Diagnostic::error("DSL-007", Span::empty(0), "missing top-level declaration"));
    }
    for &extra in top.iter().skip(1) {
        diags.push(Diagnostic::error("DSL-008", p.nodes[extra].span, "a file holds exactly one top-level declaration"));
    }
    if let Some(&first) = top.first() {
        let header = &p.nodes[first];
        let named = header.atoms.len() == 2 && header.atoms[1].kind == AtomKind::Ident;
        if !named {
            diags.push(Diagnostic::error(
                "DSL-009",
                header.span,
                format!("expected `{} <name> {{ ... }}`", header.atoms[0].text),
            ));
        }
        let declared = match header.kind {
            NodeKind::Domain => FileKind::Domain,
            NodeKind::Scene => FileKind::Scene,
            _ => FileKind::Features,
        };
        if declared != source.kind {
            diags.push(Diagnostic::error(
                "DSL-018",
                header.atoms[0].span,
                format!("`{}` declaration in a .{} file", header.atoms[0].text, source.kind.extension()),
            ));
        }
    }
    diags.sort_by_key(|d| (d.span.start, d.span.end));
    if has_errors(&diags) {
        return Err(diags);
    }
    let file_span = top.first().map(|&t| p.nodes[t].span).unwrap_or(Span::empty(0));
    p.nodes.push(AstNode {
        kind: NodeKind::File,
        span: Span::new(0, src.len()).join(file_span),
        children: top,
        atoms: Vec::new(),
    });
    let root = p.nodes.len() - 1;
    Ok(Ast { nodes: p.nodes, root })
}
