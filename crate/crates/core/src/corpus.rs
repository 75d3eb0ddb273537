//! Loading a directory tree of definition files into a knowledge base.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{load, Diagnostic, FileKind, Lowered, SourceFile, Span};
use crate::kb::KnowledgeBase;
use crate::scene::SceneGraph;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} file(s) with errors", .0.len())]
    Invalid(Vec<FileReport>),
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "CORPUS-IO",
            CorpusError::Invalid(_) => "CORPUS-INVALID",
        }
    }
}

/// Diagnostics for one file, already rendered with line and column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReport {
    pub path: String,
    pub diagnostics: Vec<Diagnostic>,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub kind: FileKind,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub kb: KnowledgeBase,
    pub scenes: BTreeMap<String, SceneGraph>,
    pub inputs: Vec<InputDigest>,
}

/// Definition files under `paths`, sorted. Directories are walked; files with
/// other extensions inside them are skipped.
pub fn collect(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CorpusError> {
    let mut out = Vec::new();
    for p in paths {
        walk(p, true, &mut out)?;
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn walk(p: &Path, explicit: bool, out: &mut Vec<PathBuf>) -> Result<(), CorpusError> {
    let meta = fs::metadata(p).map_err(|source| CorpusError::Io { path: p.to_path_buf(), source })?;
    if meta.is_dir() {
        let rd = fs::read_dir(p).map_err(|source| CorpusError::Io { path: p.to_path_buf(), source })?;
        for entry in rd {
            let entry = entry.map_err(|source| CorpusError::Io { path: p.to_path_buf(), source })?;
            walk(&entry.path(), false, out)?;
        }
    } else if explicit || FileKind::from_path(p).is_some() {
        out.push(p.to_path_buf());
    }
    Ok(())
}

fn rank(kind: FileKind) -> u8 {
    match kind {
        FileKind::Features => 0,
        FileKind::Domain => 1,
        FileKind::Scene => 2,
    }
}

fn report(src: &SourceFile, diagnostics: Vec<Diagnostic>) -> FileReport {
    FileReport { path: src.path.clone(), rendered: src.render(&diagnostics), diagnostics }
}

impl Corpus {
    /// Loads every definition file under `paths`: feature tables first, then
    /// domains, then scenes, and validates the resulting knowledge base.
    pub fn load(paths: &[PathBuf]) -> Result<Corpus, CorpusError> {
        let mut sources = Vec::new();
        let mut bad = Vec::new();
        for p in collect(paths)? {
            let content = fs::read_to_string(&p).map_err(|source| CorpusError::Io { path: p.clone(), source })?;
            let path = p.display().to_string();
            let Some(kind) = FileKind::from_path(&p) else {
                let d = Diagnostic::error(
                    "DSL-000",
                    Span::empty(0),
                    "unrecognised file extension; expected .domain, .scene or .features",
                );
                bad.push(FileReport {
                    rendered: format!("{path}:1:1: error[DSL-000]: {}\n", d.message),
                    path,
                    diagnostics: vec![d],
                });
                continue;
            };
            sources.push(SourceFile::new(path, content, kind));
        }
        sources.sort_by(|a, b| rank(a.kind).cmp(&rank(b.kind)).then_with(|| a.path.cmp(&b.path)));
        Self::from_sources(&sources, bad)
    }

    /// Builds a corpus from in-memory sources, in the order given.
    pub fn from_sources(sources: &[SourceFile], mut bad: Vec<FileReport>) -> Result<Corpus, CorpusError> {
        let mut kb = KnowledgeBase::new();
        let mut scenes = BTreeMap::new();
        let mut inputs = Vec::new();
        for src in sources {
            inputs.push(InputDigest {
                path: src.path.clone(),
                kind: src.kind,
                sha256: hex::encode(Sha256::digest(src.content.as_bytes())),
            });
            let lowered = match load(src) {
                Ok(l) => l,
                Err(diags) => {
                    bad.push(report(src, diags));
                    continue;
                }
            };
            let res = match lowered {
                Lowered::Scene(s) => if scenes.contains_key(&s.name) {
                    Err(format!("a scene named `{}` is already registered", s.name))
                } else {
                    scenes.insert(s.name.clone(), s);
                    Ok(())
                }
                .map_err(|m| ("KB-DUP", m)),
                other => kb.register(other).map_err(|e| (e.code(), e.to_string())),
            };
            if let Err((code, msg)) = res {
                bad.push(report(src, vec![Diagnostic::error(code, Span::empty(0), msg)]));
            }
        }
        if bad.is_empty() {
            let diags = kb.validate();
            if !diags.is_empty() {
                let rendered =
                    diags.iter().map(|d| format!("<knowledge base>: error[{}]: {}\n", d.code, d.message)).collect();
                bad.push(FileReport { path: "<knowledge base>".into(), diagnostics: diags, rendered });
            }
        }
        if bad.is_empty() {
            Ok(Corpus { kb, scenes, inputs })
        } else {
            Err(CorpusError::Invalid(bad))
        }
    }

    pub fn scene(&self, name: &str) -> Option<&SceneGraph> {
        self.scenes.get(name)
    }
}
