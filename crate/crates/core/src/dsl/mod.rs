//! The definition language for domains, scenes and notional feature tables.
//!
//! Text goes through [`parse`] into a generic [`Ast`], then [`lower`] resolves
//! names and produces the typed entity. [`serialize`] emits canonical text that
//! lowers back to an equal entity.

pub mod diagnostic;
pub mod lexer;
mod lower;
pub mod parser;
mod serialize;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kb::{Domain, FeatureTable};
use crate::scene::SceneGraph;

pub use diagnostic::{has_errors, line_col, Diagnostic, Severity, Span};
pub use lower::lower;
pub use parser::{parse, Ast, AstNode, Atom, AtomKind, NodeId, NodeKind, Shape};
pub use serialize::{serialize, serialize_domain, serialize_features, serialize_scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Domain,
    Scene,
    Features,
}

impl FileKind {
    pub fn extension(self) -> &'static str {
        match self {
            FileKind::Domain => "domain",
            FileKind::Scene => "scene",
            FileKind::Features => "features",
        }
    }

    pub fn from_path(path: &Path) -> Option<FileKind> {
        match path.extension()?.to_str()? {
            "domain" => Some(FileKind::Domain),
            "scene" => Some(FileKind::Scene),
            "features" => Some(FileKind::Features),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub content: String,
    pub kind: FileKind,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>, kind: FileKind) -> Self {
        SourceFile { path: path.into(), content: content.into(), kind }
    }

    /// Renders diagnostics as `path:line:col: error[CODE]: message` lines.
    pub fn render(&self, diags: &[Diagnostic]) -> String {
        diags.iter().map(|d| d.render(&self.path, &self.content) + "\n").collect()
    }
}

/// A lowered source file.
#[derive(Debug, Clone, PartialEq)]
pub enum Lowered {
    Domain(Domain),
    Scene(SceneGraph),
    Features(FeatureTable),
}

impl Lowered {
    pub fn kind(&self) -> FileKind {
        match self {
            Lowered::Domain(_) => FileKind::Domain,
            Lowered::Scene(_) => FileKind::Scene,
            Lowered::Features(_) => FileKind::Features,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Lowered::Domain(d) => &d.name,
            Lowered::Scene(s) => &s.name,
            Lowered::Features(f) => &f.name,
        }
    }
}

/// Parses and lowers in one step.
pub fn load(source: &SourceFile) -> Result<Lowered, Vec<Diagnostic>> {
    let ast = parse(source)?;
    let (lowered, diags) = lower(&ast, source.kind);
    match lowered {
        Some(l) if !has_errors(&diags) => Ok(l),
        _ => Err(diags),
    }
}
