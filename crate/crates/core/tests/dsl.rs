mod common;

use janus_core::dsl::{
    load, lower, parse, serialize, serialize_scene, Diagnostic, FileKind, Lowered, NodeKind, SourceFile, Span,
};
use janus_core::kb::{Clause, Domain, Level, Schema, SchemaKind};
use janus_core::scene::SceneGraph;
use proptest::prelude::*;

fn src(kind: FileKind, text: &str) -> SourceFile {
    SourceFile::new(format!("t.{}", kind.extension()), text, kind)
}

fn errors(kind: FileKind, text: &str) -> Vec<Diagnostic> {
    load(&src(kind, text)).expect_err("expected diagnostics")
}

#[test]
fn minimal_domain_parses_to_one_concept() {
    let ast = parse(&src(FileKind::Domain, "domain energy { concept Reservoir { role stores : Energy } }")).unwrap();
    let header = ast.header();
    assert_eq!(header.kind, NodeKind::Domain);
    let kids: Vec<_> = ast.children(ast.header_id()).collect();
    assert_eq!(kids.len(), 1);
    assert_eq!(kids[0].kind, NodeKind::Concept);
}

#[test]
fn empty_file_is_missing_declaration() {
    let d = parse(&src(FileKind::Domain, "")).unwrap_err();
    assert_eq!(d[0].message, "missing top-level declaration");
    assert_eq!(d[0].span, Span::empty(0));
    assert_eq!(d[0].code, "DSL-007");
}

#[test]
fn seed_file_has_expected_parts() {
    let path = common::corpus_dir().join("domains/energy_seed.domain");
    let text = std::fs::read_to_string(&path).unwrap();
    let ast = parse(&src(FileKind::Domain, &text)).unwrap();
    let concepts: Vec<String> = ast
        .children(ast.header_id())
        .filter(|n| n.kind == NodeKind::Concept)
        .map(|n| n.atoms[1].text.clone())
        .collect();
    for c in ["Reservoir", "Transformer", "Transfer"] {
        assert!(concepts.iter().any(|x| x == c), "{c} missing");
    }
    assert!(ast.children(ast.header_id()).any(|n| n.kind == NodeKind::Rule));
    assert!(ast.children(ast.header_id()).any(|n| n.kind == NodeKind::Lexicon));

    let Lowered::Domain(d) = common::lowered("seed.domain", FileKind::Domain, &text) else { panic!() };
    let rule = d.meta_constraints.iter().find(|r| r.id == "chain-endpoints").unwrap();
    assert!(rule.clauses.contains(&Clause::ChainStarts { concept: "Reservoir".into() }));
    assert!(rule.clauses.contains(&Clause::ChainEnds { concept: "Reservoir".into() }));
}

#[test]
fn undefined_concept_is_reported() {
    let d = errors(FileKind::Domain, "domain e {\n  concept A is Conduit { }\n}\n");
    assert!(d.iter().any(|x| x.code == "DSL-010" && x.message == "undefined concept `Conduit`"), "{d:?}");
}

#[test]
fn duplicate_role_and_unknown_edge_label() {
    let d = errors(FileKind::Domain, "domain e {\n  concept A {\n    role r : any\n    role r : any\n  }\n}\n");
    assert!(d.iter().any(|x| x.code == "DSL-011"), "{d:?}");
    let d = errors(
        FileKind::Domain,
        "domain e {\n  concept T { }\n  rule r integrity \"m\" {\n    edge \"heat\" from T\n  }\n}\n",
    );
    assert!(d.iter().any(|x| x.code == "DSL-012"), "{d:?}");
}

#[test]
fn battery_scene_has_four_salient_entities() {
    let c = common::corpus();
    let s = common::scene(&c, "battery-bulb");
    let ids: Vec<&str> = s.entities.iter().filter(|e| e.saliency >= 0.5).map(|e| e.id.as_str()).collect();
    assert_eq!(ids, ["battery", "wire1", "wire2", "bulb"]);
}

#[test]
fn empty_scene_serializes_compactly() {
    assert_eq!(serialize_scene(&SceneGraph::new("nothing")), "scene nothing { }\n");
}

#[test]
fn one_empty_concept_is_stable() {
    let mut d = Domain::new("tiny", Level::Conceptual);
    d.concepts.push(Schema::new("Thing", Level::Conceptual, SchemaKind::Node));
    let a = serialize(&Lowered::Domain(d.clone()));
    let b = serialize(&Lowered::Domain(d.clone()));
    assert_eq!(a, b);
    assert_eq!(common::lowered("tiny.domain", FileKind::Domain, &a), Lowered::Domain(d));
}

#[test]
fn every_corpus_file_round_trips() {
    for (path, kind) in common::corpus_files() {
        let text = std::fs::read_to_string(&path).unwrap();
        let first = common::lowered(&path.display().to_string(), kind, &text);
        let printed = serialize(&first);
        let second = common::lowered("printed", kind, &printed);
        assert_eq!(first, second, "{}", path.display());
        assert_eq!(printed, serialize(&second), "{} not a text fixpoint", path.display());
    }
}

#[test]
fn ast_spans_nest_and_siblings_are_disjoint() {
    for (path, kind) in common::corpus_files() {
        let text = std::fs::read_to_string(&path).unwrap();
        let ast = parse(&src(kind, &text)).unwrap();
        for n in &ast.nodes {
            assert!(n.span.end <= text.len());
            let kids: Vec<_> = n.children.iter().map(|c| ast.node(*c)).collect();
            for k in &kids {
                assert!(n.span.contains(&k.span), "{}: child outside parent", path.display());
            }
            for w in kids.windows(2) {
                assert!(w[0].span.end <= w[1].span.start, "{}: siblings overlap", path.display());
            }
        }
        let reparsed = parse(&src(kind, &ast.to_source())).unwrap();
        assert_eq!(ast.shape(), reparsed.shape());
    }
}

#[test]
fn every_non_whitespace_token_is_covered() {
    for (path, kind) in common::corpus_files() {
        let text = std::fs::read_to_string(&path).unwrap();
        let ast = parse(&src(kind, &text)).unwrap();
        let (tokens, _) = janus_core::dsl::lexer::tokenize(&text);
        let root = ast.node(ast.root).span;
        for t in tokens.iter().filter(|t| !t.text.trim().is_empty()) {
            assert!(root.contains(&t.span), "{}: token {:?} uncovered", path.display(), t.text);
        }
    }
}

#[test]
fn diagnostic_codes_are_stable() {
    let cases: &[(FileKind, &str, &str)] = &[
        (FileKind::Domain, "domain e { concept A { role r : any } ", "DSL-003"),
        (FileKind::Domain, "domain e { } }", "DSL-004"),
        (FileKind::Domain, "theory e { }", "DSL-005"),
        (FileKind::Domain, "domain e { widget x }", "DSL-006"),
        (FileKind::Domain, "domain e { }\ndomain f { }", "DSL-008"),
        (FileKind::Domain, "domain e { concept A { } concept A { } }", "DSL-013"),
        (FileKind::Scene, "scene s { entity a : x saliency 1\n entity a : y saliency 1 }", "DSL-014"),
        (FileKind::Scene, "scene s { relation r a b }", "DSL-015"),
        (FileKind::Scene, "scene s { entity a : x saliency 1.5 }", "DSL-016"),
        (FileKind::Features, "features f { vocabulary { a } term t { b } }", "DSL-019"),
        (FileKind::Scene, "domain e { }", "DSL-018"),
        (FileKind::Domain, "domain e { concept A { role r : any } \"", "DSL-002"),
        (FileKind::Domain, "domain e { @ }", "DSL-001"),
    ];
    for (kind, text, code) in cases {
        let first = errors(*kind, text);
        assert!(first.iter().any(|d| d.code == *code), "{text:?}: wanted {code}, got {first:?}");
        assert_eq!(first, errors(*kind, text), "{text:?}: diagnostics differ between runs");
    }
}

fn fragment() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("domain".to_string()),
        Just("scene".to_string()),
        Just("concept".to_string()),
        Just("role".to_string()),
        Just("entity".to_string()),
        Just("{".to_string()),
        Just("}".to_string()),
        Just(":".to_string()),
        Just("->".to_string()),
        Just("\"".to_string()),
        Just("\n".to_string()),
        Just(" ".to_string()),
        Just("0.5".to_string()),
        Just("é".to_string()),
        "[a-zA-Z#@(),|=!;-]{1,6}",
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn diagnostic_spans_stay_in_bounds(parts in proptest::collection::vec(fragment(), 0..40), kind in 0usize..3) {
        let text: String = parts.concat();
        let kind = [FileKind::Domain, FileKind::Scene, FileKind::Features][kind];
        let file = src(kind, &text);
        let diags = match parse(&file) {
            Err(d) => d,
            Ok(ast) => lower(&ast, kind).1,
        };
        for d in &diags {
            prop_assert!(d.span.start <= d.span.end && d.span.end <= text.len(), "{d:?} in {text:?}");
            prop_assert!(text.is_char_boundary(d.span.start) && text.is_char_boundary(d.span.end));
        }
        let again = match parse(&file) {
            Err(d) => d,
            Ok(ast) => lower(&ast, kind).1,
        };
        prop_assert_eq!(diags, again);
    }

    #[test]
    fn generated_scenes_round_trip(
        n in 0usize..6,
        sal in proptest::collection::vec(0u32..=100, 6),
        cats in proptest::collection::vec("[a-z][a-z-]{0,6}[a-z]", 6),
    ) {
        let mut s = SceneGraph::new("gen");
        for i in 0..n {
            s.entities.push(janus_core::scene::Entity {
                id: format!("e{i}"),
                category: cats[i].clone(),
                saliency: f64::from(sal[i]) / 100.0,
            });
        }
        for i in 1..n {
            s.relations.push(janus_core::scene::Relation { label: "touches".into(), from: format!("e{}", i - 1), to: format!("e{i}") });
        }
        let text = serialize_scene(&s);
        let back = common::lowered("gen.scene", FileKind::Scene, &text);
        prop_assert_eq!(back, Lowered::Scene(s));
    }
}
