//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p janus-core --test acceptance -- --nocapture` to see them.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use janus_core::builder::{slot_fact, EventKind, InterpretationModel, Provenance};
use janus_core::checker::reinterpret;
use janus_core::dsl::serialize;
use janus_core::learn::accepts;
use janus_core::scene::Observation;
use janus_core::{overlap, repair_loop, specialize, Corpus, KnowledgeBase, Outcome, RunConfig, ViolationKind};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

/// Wall-clock bound for any single build, check or repair run.
const RUN_LIMIT: Duration = Duration::from_secs(1);
/// Iteration bound for the battery-bulb repair.
const MAX_REPAIR_ITERATIONS: usize = 3;
const OVERLAP_PAIRS: usize = 1000;
const OVERLAP_VOCABULARY: u8 = 16;

type Verdict = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Verdict {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed<T>(what: &str, f: impl FnOnce() -> T) -> Result<T, String> {
    let t = Instant::now();
    let out = f();
    let spent = t.elapsed();
    ensure(spent < RUN_LIMIT, || format!("{what} took {spent:?}"))?;
    Ok(out)
}

/// Reference graph: nodes (label, concept, postulated) and directed edges
/// between node labels with their transfer labels.
struct Reference {
    nodes: Vec<(&'static str, &'static str, bool)>,
    edges: Vec<(&'static str, &'static str, &'static [&'static str])>,
}

/// Whether some bijection from reference nodes to model nodes preserves
/// concepts, postulation and the labelled directed edge multiset.
fn isomorphic(m: &InterpretationModel, r: &Reference) -> bool {
    if m.nodes.len() != r.nodes.len() {
        return false;
    }
    let mut model_edges: Vec<(usize, usize, Vec<String>)> = Vec::new();
    let index = |id: &str| m.nodes.iter().position(|n| n.id == id);
    for (e, from, to) in m.directed_edges() {
        match (index(from), index(to)) {
            (Some(a), Some(b)) => model_edges.push((a, b, e.labels())),
            _ => return false,
        }
    }
    if model_edges.len() != m.edges.len() || model_edges.len() != r.edges.len() {
        return false;
    }
    model_edges.sort();
    let n = m.nodes.len();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        let fits = r.nodes.iter().enumerate().all(|(i, (_, concept, post))| {
            let node = &m.nodes[perm[i]];
            node.concept == *concept && node.is_postulated() == *post
        });
        if fits {
            let at = |label: &str| perm[r.nodes.iter().position(|(l, _, _)| *l == label).unwrap()];
            let mut mapped: Vec<(usize, usize, Vec<String>)> =
                r.edges.iter().map(|(f, t, ls)| (at(f), at(t), ls.iter().map(|l| l.to_string()).collect())).collect();
            mapped.sort();
            if mapped == model_edges {
                return true;
            }
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else { return false };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn circular_reference() -> Reference {
    Reference {
        nodes: vec![("battery", "Reservoir", false), ("bulb", "Transformer", false)],
        edges: vec![("battery", "bulb", &["electrical work"]), ("bulb", "battery", &["electrical work"])],
    }
}

fn target_reference() -> Reference {
    Reference {
        nodes: vec![
            ("battery", "Reservoir", false),
            ("bulb", "Transformer", false),
            ("environment", "Environment", true),
        ],
        edges: vec![("battery", "bulb", &["electrical work"]), ("bulb", "environment", &["heat", "radiation"])],
    }
}

fn battery_episode(c: &Corpus) -> Result<janus_core::Episode, String> {
    let scene = common::scene(c, "battery-bulb");
    timed("battery-bulb repair", || repair_loop(&c.kb, &scene, "energy", &[], &RunConfig::default()))?
        .map(|(e, _)| e)
        .map_err(|e| e.to_string())
}

fn criterion_1(c: &Corpus) -> Verdict {
    let ep = battery_episode(c)?;
    let m = &ep.iterations[0].model;
    ensure(isomorphic(m, &circular_reference()), || {
        format!("iteration 1 is not the circular model: {:?}", common::shape(m))
    })?;
    for e in &m.edges {
        let p = &m.facts.get(&slot_fact(&e.id, "direction")).ok_or(format!("{} has no direction", e.id))?.provenance;
        ensure(matches!(p, Provenance::Borrowed { domain, .. } if domain == "electricity"), || {
            format!("{} direction is {p:?}", e.id)
        })?;
    }
    Ok(())
}

fn criterion_2(c: &Corpus) -> Verdict {
    let ep = battery_episode(c)?;
    let got: BTreeSet<(ViolationKind, String)> =
        ep.iterations[0].violations.iter().map(|v| (v.kind, v.constraint.clone())).collect();
    let want = BTreeSet::from([
        (ViolationKind::Integrity, "endpoints-differ".to_string()),
        (ViolationKind::Adequacy, "wear-out".to_string()),
    ]);
    ensure(got == want && ep.iterations[0].violations.len() == 2, || format!("violations {got:?}"))
}

fn criterion_3(c: &Corpus) -> Verdict {
    let ep = battery_episode(c)?;
    ensure(ep.outcome == Outcome::ValidModel, || format!("outcome {}", ep.outcome.as_str()))?;
    ensure(ep.iterations.len() <= MAX_REPAIR_ITERATIONS, || format!("{} iterations", ep.iterations.len()))?;
    let m = ep.final_model();
    ensure(isomorphic(m, &target_reference()), || format!("final model {:?}", common::shape(m)))?;
    let env = m.nodes.iter().find(|n| n.is_postulated()).ok_or("no postulated node")?;
    let p = &m.facts[&format!("node:{}", env.id)].provenance;
    ensure(matches!(p, Provenance::Postulated { .. }), || format!("environment tagged {p:?}"))
}

fn criterion_4(c: &Corpus) -> Verdict {
    let kb = common::all_differentiated(c, "battery-bulb", "energy");
    let b = timed("build", || common::build(c, &kb, "battery-bulb", "energy"))?;
    let directions = b.model.edges.iter().filter(|e| e.slots.contains_key("direction")).count();
    ensure(!b.model.edges.is_empty(), || "no transfer edges".into())?;
    ensure(directions == 0, || format!("{directions} direction attribute(s) present"))?;
    ensure(!b.model.is_complete(), || "model reported complete".into())
}

fn criterion_5(c: &Corpus) -> Verdict {
    let mut calls = 0;
    let kbs: Vec<KnowledgeBase> = vec![
        c.kb.clone(),
        c.kb.apply(&common::split_current()).unwrap(),
        common::all_differentiated(c, "battery-bulb", "energy"),
    ];
    for kb in &kbs {
        for scene in c.scenes.keys() {
            for t in ["energy", "energy-stripped", "energy-native"] {
                let m = common::build(c, kb, scene, t).model;
                let r = reinterpret(&m, kb.domain(t).unwrap());
                calls += 1;
                ensure(r.foreign_firings == 0, || format!("{scene} in {t}: {} foreign firings", r.foreign_firings))?;
            }
        }
    }
    ensure(calls > 0, || "no reinterpret calls".into())
}

fn criterion_6() -> Verdict {
    let mut runner = TestRunner::deterministic();
    let set = proptest::collection::btree_set(0..OVERLAP_VOCABULARY, 0..=OVERLAP_VOCABULARY as usize);
    let pair = (set.clone(), set);
    for _ in 0..OVERLAP_PAIRS {
        let (a, b) = pair.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let names = |s: &BTreeSet<u8>| s.iter().map(|x| format!("f{x}")).collect::<BTreeSet<String>>();
        let got = overlap(&names(&a), &names(&b));
        let mut shared = 0;
        let mut union = 0;
        for f in 0..OVERLAP_VOCABULARY {
            shared += u32::from(a.contains(&f) && b.contains(&f));
            union += u32::from(a.contains(&f) || b.contains(&f));
        }
        let value = if union == 0 { 0.0 } else { f64::from(shared) / f64::from(union) };
        ensure((got.shared, got.union) == (shared, union) && got.value() == value, || format!("{a:?} {b:?}: {got:?}"))?;
    }
    Ok(())
}

fn criterion_7(c: &Corpus) -> Verdict {
    let b = timed("build", || common::build(c, &c.kb, "weight-generator", "energy"))?;
    let found = b.trace.events.iter().any(|e| {
        e.kind == EventKind::BorrowFire
            && e.borrowing.as_ref().is_some_and(|x| {
                x.kind == janus_core::assoc::BorrowKind::Aspect && x.payload == "fillable" && x.to_face == "weight"
            })
    });
    ensure(found, || "no aspect borrowing of fillable onto weight".into())?;
    ensure(b.model.node("weight").is_some_and(|n| n.aspects.contains("fillable")), || "weight lacks fillable".into())
}

fn criterion_8(c: &Corpus) -> Verdict {
    let kb = c.kb.apply(&common::split_current()).unwrap();
    let m = common::build(c, &kb, "battery-bulb", "energy").model;
    let evidence = common::scene(c, "battery-bulb").observations;
    let sch = specialize(&kb, "Transform", &m, "bulb", &evidence).map_err(|e| e.to_string())?;
    ensure(sch.invariants.iter().any(|i| i.quantity == "energy"), || "no invariance on energy".into())?;
    ensure(accepts(&kb, &sch, &m, "bulb", &evidence), || "rejects its own instance".into())?;
    let unequal = [Observation::new("unequal", &["energy", "before", "after"])];
    ensure(!accepts(&kb, &sch, &m, "bulb", &unequal), || "accepts unequal before/after".into())
}

fn criterion_9() -> Verdict {
    for (path, kind) in common::corpus_files() {
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let first = common::lowered(&path.display().to_string(), kind, &text);
        let printed = serialize(&first);
        let second = common::lowered("printed", kind, &printed);
        ensure(first == second && printed == serialize(&second), || format!("{} is not a fixpoint", path.display()))?;
    }
    Ok(())
}

fn criterion_10(c: &Corpus) -> Verdict {
    for scene in c.scenes.keys() {
        for t in ["energy", "energy-stripped", "energy-native"] {
            let sc = common::scene(c, scene);
            let run = || repair_loop(&c.kb, &sc, t, &[], &RunConfig::default()).unwrap();
            let (a, kb) = timed("repair", run)?;
            let (b, _) = run();
            ensure(serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap(), || {
                format!("{scene} in {t} differs")
            })?;
            for it in &a.iterations {
                ensure(it.trace.replay(t, scene) == it.model, || {
                    format!("{scene} in {t}: iteration {} replay differs", it.index)
                })?;
            }
            let replayed = c.kb.replay(&a.edits).map_err(|e| e.to_string())?;
            ensure(replayed == kb && replayed.digest() == a.final_kb_digest, || {
                format!("{scene} in {t}: edit log replay differs")
            })?;
        }
    }
    Ok(())
}

#[test]
fn acceptance() {
    let c = common::corpus();
    let results: Vec<(&str, Verdict)> = vec![
        ("1 circular model at iteration 1", criterion_1(&c)),
        ("2 exactly endpoints-differ and wear-out", criterion_2(&c)),
        ("3 valid target chain with postulated environment", criterion_3(&c)),
        ("4 no directions without the association", criterion_4(&c)),
        ("5 reinterpretation stays in the target", criterion_5(&c)),
        ("6 overlap equals brute force", criterion_6()),
        ("7 weight borrows fillable", criterion_7(&c)),
        ("8 specialization carries invariance", criterion_8(&c)),
        ("9 definition files round-trip", criterion_9()),
        ("10 determinism and replay", criterion_10(&c)),
    ];
    let mut failed = Vec::new();
    for (name, r) in &results {
        match r {
            Ok(()) => println!("PASS criterion {name}"),
            Err(why) => {
                println!("FAIL criterion {name}: {why}");
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}

#[test]
fn isomorphism_oracle_tells_models_apart() {
    let c = common::corpus();
    let circ = common::build(&c, &c.kb, "battery-bulb", "energy").model;
    assert!(isomorphic(&circ, &circular_reference()));
    assert!(!isomorphic(&circ, &target_reference()));
    let reversed = Reference {
        nodes: vec![("battery", "Reservoir", false), ("bulb", "Transformer", false)],
        edges: vec![("battery", "bulb", &["electrical work"]), ("battery", "bulb", &["electrical work"])],
    };
    assert!(!isomorphic(&circ, &reversed));
    let mut p = vec![0, 1, 2];
    let mut seen = 1;
    while next_permutation(&mut p) {
        seen += 1;
    }
    assert_eq!(seen, 6);
}
