mod common;

use std::collections::BTreeSet;

use janus_core::builder::{InterpretationModel, Value};
use janus_core::checker::check;
use janus_core::kb::{Constraint, Level, SchemaKind};
use janus_core::learn::{accepts, apply_action, differentiate, ActionKind};
use janus_core::scene::{Entity, Observation, SceneGraph};
use janus_core::{build_model, diagnose, repair_loop, specialize, Corpus, KnowledgeBase, Outcome, RunConfig};
use proptest::prelude::*;

fn s(x: &str) -> String {
    x.to_string()
}

fn episode(c: &Corpus, scene: &str, target: &str) -> (janus_core::Episode, KnowledgeBase) {
    repair_loop(&c.kb, &common::scene(c, scene), target, &[], &RunConfig::default()).unwrap()
}

fn diagnosed(kb: &KnowledgeBase, scene: &SceneGraph, cfg: &RunConfig) -> Vec<janus_core::RepairAction> {
    let b = build_model(kb, scene, "energy", &kb.operational_domains("energy"), cfg).unwrap();
    let vs = check(&b.model, kb.domain("energy").unwrap()).violations;
    diagnose(&vs, &b.model, kb, scene, &b.janus, cfg)
}

#[test]
fn circularity_is_answered_by_splitting_current() {
    let c = common::corpus();
    let scene = common::scene(&c, "battery-bulb");
    let actions = diagnosed(&c.kb, &scene, &RunConfig::default());
    let top = &actions[0];
    assert_eq!(top.id, "differentiate janus:Transfer~electrical-current block direction-from-terminals");
    match &top.kind {
        ActionKind::Differentiate { janus, demon: Some(d), aspect: None } => {
            assert_eq!(janus, "janus:Transfer~electrical-current");
            assert_eq!(
                (d.domain.as_str(), d.concept.as_str(), d.demon.as_str()),
                ("electricity", "Current", "direction-from-terminals")
            );
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(top.justification, ["v1", "v2"]);
    // coverage never increases down the list
    let cov: Vec<usize> = actions.iter().map(|a| a.justification.len()).collect();
    assert!(cov.windows(2).all(|w| w[0] >= w[1]), "{cov:?}");
}

/// A `cell` whose features sit closer to a transformer than to a reservoir.
fn cell_corpus() -> Corpus {
    common::corpus_patched(|name, text| {
        if name == "notions.features" {
            text.replace(
                "  term energy ",
                "  term cell { stores-fluid fillable emptyable changes-form gives device receives }\n  term energy ",
            )
        } else {
            text
        }
    })
}

fn lone_cell() -> SceneGraph {
    let mut g = SceneGraph::new("lone-cell");
    g.entities.push(Entity { id: s("cell"), category: s("cell"), saliency: 1.0 });
    g
}

#[test]
fn wrong_binding_is_answered_by_rebinding() {
    let c = cell_corpus();
    let cfg = RunConfig { janus_threshold: 0.3, ..RunConfig::default() };
    let scene = lone_cell();
    let b = build_model(&c.kb, &scene, "energy", &c.kb.operational_domains("energy"), &cfg).unwrap();
    assert_eq!(b.model.node("cell").unwrap().concept, "Transformer");
    let vs = check(&b.model, c.kb.domain("energy").unwrap()).violations;
    assert!(!vs.is_empty());
    assert!(vs.iter().all(|v| v.implicated.iter().all(|g| !g.provenance.is_borrowed())));
    let actions = diagnose(&vs, &b.model, &c.kb, &scene, &b.janus, &cfg);
    assert_eq!(actions[0].id, "rebind cell to Reservoir");
    assert_eq!(
        actions[0].kind,
        ActionKind::Rebind { scene: s("lone-cell"), entity: s("cell"), concept: s("Reservoir") }
    );

    let kb = apply_action(&actions[0], "energy", &c.kb).unwrap();
    let b = build_model(&kb, &scene, "energy", &kb.operational_domains("energy"), &cfg).unwrap();
    assert_eq!(b.model.node("cell").unwrap().concept, "Reservoir");
    // a pair is tried once
    let again = diagnose(&vs, &b.model, &kb, &scene, &b.janus, &cfg);
    assert!(again.iter().all(|a| a.id != "rebind cell to Reservoir"));
}

#[test]
fn nothing_implicated_nothing_to_do() {
    let c = common::corpus();
    let scene = common::scene(&c, "battery-bulb");
    let b = common::build(&c, &c.kb, "battery-bulb", "energy");
    let mut vs = check(&b.model, c.kb.domain("energy").unwrap()).violations;
    for v in &mut vs {
        v.implicated.clear();
    }
    assert!(diagnose(&vs, &b.model, &c.kb, &scene, &b.janus, &RunConfig::default()).is_empty());
    assert!(diagnose(&[], &b.model, &c.kb, &scene, &b.janus, &RunConfig::default()).is_empty());
}

#[test]
fn differentiating_twice_fails() {
    let c = common::corpus();
    let scene = common::scene(&c, "battery-bulb");
    let top = diagnosed(&c.kb, &scene, &RunConfig::default()).remove(0);
    let kb = differentiate(&top, "energy", &c.kb).unwrap();
    assert!(kb.is_differentiated("janus:Transfer~electrical-current"));
    assert_eq!(kb.version(), c.kb.version() + 1);
    let dm = &kb.domain("electricity").unwrap().concept("Current").unwrap().demons;
    assert!(dm.iter().any(|d| d.id == "direction-from-terminals" && d.blocked_in("energy")));
    assert_eq!(differentiate(&top, "energy", &kb).unwrap_err().code(), "LEARN-ALREADY-SPLIT");

    let rebind = janus_core::RepairAction {
        id: s("rebind x to Reservoir"),
        kind: ActionKind::Rebind { scene: s("s"), entity: s("x"), concept: s("Reservoir") },
        justification: vec![],
    };
    assert_eq!(differentiate(&rebind, "energy", &c.kb).unwrap_err().code(), "LEARN-WRONG-ACTION");
}

fn valid_instance(c: &Corpus) -> (KnowledgeBase, InterpretationModel, Vec<Observation>) {
    let kb = c.kb.apply(&common::split_current()).unwrap();
    let m = common::build(c, &kb, "battery-bulb", "energy").model;
    let obs = common::scene(c, "battery-bulb").observations;
    (kb, m, obs)
}

#[test]
fn specializing_transform_adds_conservation() {
    let c = common::corpus();
    let (kb, m, obs) = valid_instance(&c);
    let sch = specialize(&kb, "Transform", &m, "bulb", &obs).unwrap();
    assert_eq!(sch.level, Level::Conceptual);
    assert_eq!(sch.kind, SchemaKind::Node);
    assert_eq!(sch.parent, None);
    assert_eq!(sch.invariants.iter().map(|i| i.quantity.as_str()).collect::<Vec<_>>(), ["energy"]);
    let role = |n: &str| sch.roles.iter().find(|r| r.name == n).unwrap().constraint.clone();
    let one = |xs: &[&str]| Constraint::OneOf(xs.iter().map(|x| x.to_string()).collect());
    // no declared parent: the exact category
    assert_eq!(role("transformer"), one(&["bulb"]));
    assert_eq!(role("initial-state"), one(&["electrical work"]));
    // heat and radiation meet at their declared parent
    assert_eq!(role("final-state"), one(&["dissipated-energy"]));
    assert!(accepts(&kb, &sch, &m, "bulb", &obs));
    let unequal = [Observation::new("unequal", &["energy", "before", "after"])];
    assert!(!accepts(&kb, &sch, &m, "bulb", &unequal));
    assert!(!accepts(&kb, &sch, &m, "bulb", &[]));
}

#[test]
fn no_evidence_no_invariance() {
    let c = common::corpus();
    let (kb, m, _) = valid_instance(&c);
    let sch = specialize(&kb, "Transform", &m, "bulb", &[]).unwrap();
    assert!(sch.invariants.is_empty());
    let contested = [
        Observation::new("equal", &["energy", "before", "after"]),
        Observation::new("unequal", &["energy", "before", "after"]),
    ];
    assert!(specialize(&kb, "Transform", &m, "bulb", &contested).unwrap().invariants.is_empty());
}

fn with_slot(m: &InterpretationModel, node: &str, slot: &str, v: Value) -> InterpretationModel {
    let mut m = m.clone();
    m.nodes.iter_mut().find(|n| n.id == node).unwrap().slots.insert(slot.to_string(), v);
    m
}

#[test]
fn unchanged_state_is_not_a_positive_instance() {
    let c = common::corpus();
    let (kb, m, obs) = valid_instance(&c);
    let initial = m.node("bulb").unwrap().slots["initial-state"].clone();
    let same = with_slot(&m, "bulb", "final-state", initial);
    let err = specialize(&kb, "Transform", &same, "bulb", &obs).unwrap_err();
    assert_eq!(err.code(), "LEARN-NOT-POSITIVE");
    assert!(err.to_string().contains("final-state"), "{err}");
}

#[test]
fn specializing_needs_a_valid_host_and_a_fitting_node() {
    let c = common::corpus();
    let circ = common::build(&c, &c.kb, "battery-bulb", "energy").model;
    assert_eq!(specialize(&c.kb, "Transform", &circ, "bulb", &[]).unwrap_err().code(), "LEARN-HOST-INVALID");
    let (kb, m, obs) = valid_instance(&c);
    assert_eq!(specialize(&kb, "Transform", &m, "battery", &obs).unwrap_err().code(), "LEARN-NOT-POSITIVE");
    assert_eq!(specialize(&kb, "Nothing", &m, "bulb", &obs).unwrap_err().code(), "KB-UNKNOWN-CONCEPT");
}

#[test]
fn battery_bulb_episode() {
    let c = common::corpus();
    let (ep, _) = episode(&c, "battery-bulb", "energy");
    assert_eq!(ep.outcome, Outcome::ValidModel);
    assert_eq!(ep.iterations.len(), 2);
    let first = &ep.iterations[0];
    assert_eq!(first.violations.len(), 2);
    assert_eq!(
        first.chosen.as_ref().unwrap().id,
        "differentiate janus:Transfer~electrical-current block direction-from-terminals"
    );
    let (nodes, _) = common::shape(ep.final_model());
    assert!(nodes.contains(&(s("environment"), s("Environment"), true)));
    assert!(ep.last().violations.is_empty());
    assert!(ep.last().chosen.is_none());
}

#[test]
fn native_target_needs_no_repair() {
    let c = common::corpus();
    let (ep, kb) = episode(&c, "battery-bulb", "energy-native");
    assert_eq!(ep.outcome, Outcome::ValidModel);
    assert_eq!(ep.iterations.len(), 1);
    assert_eq!(ep.final_model().count("borrowed"), 0);
    assert_eq!(kb, c.kb);
}

#[test]
fn stripped_target_lets_the_import_through() {
    let c = common::corpus();
    let (ep, _) = episode(&c, "battery-bulb", "energy-stripped");
    assert_eq!(ep.outcome, Outcome::ValidModel);
    assert_eq!(ep.iterations.len(), 1);
    assert!(ep.final_model().count("borrowed") > 0);
    let (_, edges) = common::shape(ep.final_model());
    assert_eq!(
        edges.iter().map(|(f, t, _)| (f.as_str(), t.as_str())).collect::<Vec<_>>(),
        [("battery", "bulb"), ("bulb", "battery")]
    );
}

#[test]
fn budget_of_one_is_exhausted() {
    let c = common::corpus();
    let cfg = RunConfig { iteration_budget: 1, ..RunConfig::default() };
    let (ep, _) = repair_loop(&c.kb, &common::scene(&c, "battery-bulb"), "energy", &[], &cfg).unwrap();
    assert_eq!(ep.outcome, Outcome::BudgetExhausted);
    assert_eq!(ep.iterations.len(), 1);
    assert_eq!(ep.edits.len(), 1);
}

#[test]
fn stuck_when_nothing_is_actionable() {
    let c = cell_corpus();
    // at the default threshold no other concept is close enough to rebind to
    let mut scene = lone_cell();
    scene.entities[0].category = s("bulb");
    let (ep, _) = repair_loop(&c.kb, &scene, "energy", &[], &RunConfig::default()).unwrap();
    assert_eq!(ep.outcome, Outcome::Stuck);
    assert!(ep.last().actions.is_empty());
    assert!(!ep.last().violations.is_empty());
}

fn all_episodes(c: &Corpus) -> Vec<janus_core::Episode> {
    let mut out = Vec::new();
    for scene in c.scenes.keys() {
        for t in ["energy", "energy-stripped", "energy-native"] {
            out.push(episode(c, scene, t).0);
        }
    }
    out
}

#[test]
fn every_corpus_episode_terminates() {
    let c = common::corpus();
    for ep in all_episodes(&c) {
        assert!(ep.iterations.len() <= 16);
        assert_ne!(ep.outcome, Outcome::BudgetExhausted, "{} in {}", ep.scene, ep.target);
        if ep.outcome == Outcome::ValidModel {
            assert!(ep.last().violations.is_empty());
        }
    }
}

#[test]
fn kb_versions_increase_and_replay() {
    let c = common::corpus();
    for ep in all_episodes(&c) {
        let versions: Vec<u64> = ep.iterations.iter().map(|i| i.kb_version).collect();
        assert!(versions.windows(2).all(|w| w[0] < w[1]), "{versions:?}");
        assert_eq!(ep.initial_kb_version, c.kb.version());
        let replayed = c.kb.replay(&ep.edits).unwrap();
        assert_eq!(replayed.version(), ep.final_kb_version);
        assert_eq!(replayed.digest(), ep.final_kb_digest);
    }
}

#[test]
fn each_repair_removes_an_offending_fact() {
    let c = common::corpus();
    for ep in all_episodes(&c) {
        for w in ep.iterations.windows(2) {
            let (now, next) = (&w[0], &w[1]);
            let offending: BTreeSet<(String, janus_core::Provenance)> = now
                .violations
                .iter()
                .flat_map(|v| {
                    v.implicated.iter().flat_map(|g| g.facts.iter().map(|f| (f.clone(), g.provenance.clone())))
                })
                .collect();
            let gone = offending.iter().any(|(f, p)| next.model.facts.get(f).is_none_or(|x| x.provenance != *p));
            assert!(gone, "{} iteration {}: nothing changed", ep.scene, now.index);
        }
    }
}

#[test]
fn episodes_are_reproducible() {
    let c = common::corpus();
    let a = serde_json::to_string(&episode(&c, "weight-generator", "energy").0).unwrap();
    let b = serde_json::to_string(&episode(&c, "weight-generator", "energy").0).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn specialized_schema_rejects_other_categories(
        transformer in proptest::sample::select(vec!["bulb", "battery", "wire", "generator", "weight", "heat"]),
        final_state in proptest::sample::subsequence(vec!["heat", "radiation", "electrical work", "mechanical work"], 1..=2),
    ) {
        let c = common::corpus();
        let (kb, m, obs) = valid_instance(&c);
        let sch = specialize(&kb, "Transform", &m, "bulb", &obs).unwrap();
        let fs: BTreeSet<String> = final_state.iter().map(|x| x.to_string()).collect();
        let variant = with_slot(&with_slot(&m, "bulb", "transformer", Value::Term(transformer.to_string())), "bulb", "final-state", Value::Labels(fs.clone()));
        let fits = transformer == "bulb" && fs.iter().all(|l| l == "heat" || l == "radiation");
        prop_assert_eq!(accepts(&kb, &sch, &variant, "bulb", &obs), fits);
    }
}
