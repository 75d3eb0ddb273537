#![allow(dead_code)]

use std::path::PathBuf;

use janus_core::corpus::Corpus;
use janus_core::dsl::{load, FileKind, Lowered, SourceFile};
use janus_core::kb::{KbEdit, KnowledgeBase};
use janus_core::scene::SceneGraph;
use janus_core::{build_model, Build, RunConfig};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus() -> Corpus {
    Corpus::load(&[corpus_dir()]).expect("shipped corpus loads")
}

pub fn scene(c: &Corpus, name: &str) -> SceneGraph {
    c.scene(name).cloned().unwrap_or_else(|| panic!("no scene {name}"))
}

pub fn build(c: &Corpus, kb: &KnowledgeBase, scene_name: &str, target: &str) -> Build {
    let sources = kb.operational_domains(target);
    build_model(kb, &scene(c, scene_name), target, &sources, &RunConfig::default()).expect("build succeeds")
}

/// Every shipped definition file with its kind.
pub fn corpus_files() -> Vec<(PathBuf, FileKind)> {
    let mut out = Vec::new();
    for sub in ["features", "domains", "scenes"] {
        for entry in std::fs::read_dir(corpus_dir().join(sub)).unwrap() {
            let p = entry.unwrap().path();
            if let Some(k) = FileKind::from_path(&p) {
                out.push((p, k));
            }
        }
    }
    out.sort();
    out
}

pub fn lowered(path: &str, kind: FileKind, src: &str) -> Lowered {
    load(&SourceFile::new(path, src, kind)).unwrap_or_else(|d| panic!("{path}: {d:?}"))
}

/// The knowledge base with every Janus entity formed for the scene already
/// differentiated (no demon blocked).
pub fn all_differentiated(c: &Corpus, scene_name: &str, target: &str) -> KnowledgeBase {
    let b = build(c, &c.kb, scene_name, target);
    let mut kb = c.kb.clone();
    for id in b.janus.entities.keys() {
        kb = kb
            .apply(&KbEdit::Differentiate { janus: id.clone(), target: target.into(), demon: None, aspect: None })
            .unwrap();
    }
    kb
}

/// The shipped corpus with the text of each file passed through `patch`
/// (called with the file name) before loading.
pub fn corpus_patched(patch: impl Fn(&str, String) -> String) -> Corpus {
    let mut files = corpus_files();
    files.sort_by_key(|(p, k)| (rank(*k), p.clone()));
    let sources: Vec<SourceFile> = files
        .into_iter()
        .map(|(p, k)| {
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            let text = patch(&name, std::fs::read_to_string(&p).unwrap());
            SourceFile::new(name, text, k)
        })
        .collect();
    Corpus::from_sources(&sources, Vec::new()).unwrap_or_else(|e| match e {
        janus_core::corpus::CorpusError::Invalid(r) => {
            panic!("{}", r.iter().map(|r| r.rendered.clone()).collect::<String>())
        }
        other => panic!("{other}"),
    })
}

fn rank(k: FileKind) -> u8 {
    match k {
        FileKind::Features => 0,
        FileKind::Domain => 1,
        FileKind::Scene => 2,
    }
}

/// The repair the battery-bulb episode chooses first.
pub fn split_current() -> KbEdit {
    KbEdit::Differentiate {
        janus: "janus:Transfer~electrical-current".into(),
        target: "energy".into(),
        demon: Some(janus_core::kb::DemonRef {
            domain: "electricity".into(),
            concept: "Current".into(),
            demon: "direction-from-terminals".into(),
        }),
        aspect: None,
    }
}

/// Structure of a model with entity names kept: node (id, concept, postulated)
/// and directed edges (from, to, labels).
pub type Shape = (Vec<(String, String, bool)>, Vec<(String, String, Vec<String>)>);

pub fn shape(m: &janus_core::InterpretationModel) -> Shape {
    let mut nodes: Vec<_> = m.nodes.iter().map(|n| (n.id.clone(), n.concept.clone(), n.is_postulated())).collect();
    nodes.sort();
    let mut edges: Vec<_> = m.directed_edges().map(|(e, f, t)| (f.to_string(), t.to_string(), e.labels())).collect();
    edges.sort();
    (nodes, edges)
}
