//! `janus`: check corpora, interpret scenes, run repair episodes, explain violations.
//!
//! Exit codes: 0 success, 1 diagnostics or golden mismatch, 2 usage/IO/config
//! error, 3 repair stuck, 4 repair budget exhausted.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use janus_core::builder::{build_model, render_model};
use janus_core::checker::{check, implicate};
use janus_core::corpus::{Corpus, CorpusError};
use janus_core::learn::{repair_loop, Outcome};
use janus_core::{OutputFormat, RunConfig, TraceDocument};

#[derive(Parser)]
#[command(name = "janus", version, about = "Scene interpretation with borrowed inference, checking and repair")]
struct Cli {
    /// Corpus root holding features/, domains/ and scenes/.
    #[arg(long, global = true, env = "JANUS_CORPUS", default_value = "corpus")]
    corpus: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, lower and validate definition files (default: the corpus root).
    Check { paths: Vec<PathBuf> },
    /// Build and check one model, without repair.
    Interpret(RunArgs),
    /// Run the build-check-repair loop.
    Repair(RunArgs),
    /// Print the provenance chain behind a violation in a trace file.
    Explain {
        trace: PathBuf,
        violation: String,
        /// Episode iteration to read instead of the reported model.
        #[arg(long)]
        iteration: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scene: String,
    #[arg(long, default_value = "energy")]
    target: String,
    /// Source domain; repeatable. Default: every operational domain.
    #[arg(long = "source")]
    sources: Vec<String>,
    #[arg(long)]
    saliency_threshold: Option<f64>,
    #[arg(long)]
    janus_threshold: Option<f64>,
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    output: Option<Format>,
    /// TOML file with RunConfig keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Compare the model section (or, for a .txt file, the text rendering) with this file.
    #[arg(long)]
    golden: Option<PathBuf>,
    /// Rewrite the golden file instead of comparing.
    #[arg(long, requires = "golden")]
    update_golden: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Json,
    Text,
    Both,
}

enum Failure {
    Diagnostics(String),
    Usage(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Diagnostics(m) => {
                eprint!("{m}");
                ExitCode::from(1)
            }
            Failure::Usage(m) => {
                eprintln!("error: {m}");
                ExitCode::from(2)
            }
        }
    }
}

fn corpus_failure(e: CorpusError) -> Failure {
    match e {
        CorpusError::Io { .. } => Failure::Usage(e.to_string()),
        CorpusError::Invalid(reports) => Failure::Diagnostics(reports.iter().map(|r| r.rendered.clone()).collect()),
    }
}

fn config_for(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = args.saliency_threshold {
        cfg.saliency_threshold = v;
    }
    if let Some(v) = args.janus_threshold {
        cfg.janus_threshold = v;
    }
    if let Some(v) = args.budget {
        cfg.iteration_budget = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(f) = args.output {
        cfg.output = match f {
            Format::Json => OutputFormat::Json,
            Format::Text => OutputFormat::Text,
            Format::Both => OutputFormat::Both,
        };
    }
    cfg.validate().map_err(|e| Failure::Usage(format!("invalid configuration: {e}")))?;
    Ok(cfg)
}

fn text_of(doc: &TraceDocument, corpus: &Corpus) -> String {
    let mut out = String::new();
    let domain = corpus.kb.domain(&doc.target).ok();
    let render = |m: &janus_core::InterpretationModel| domain.map(|d| render_model(m, d)).unwrap_or_default();
    let violations = |out: &mut String, vs: &[janus_core::ViolationReport]| {
        if vs.is_empty() {
            out.push_str("violations: none\n");
        }
        for v in vs {
            let kind =
                serde_json::to_value(v.kind).ok().and_then(|k| k.as_str().map(str::to_string)).unwrap_or_default();
            let _ = writeln!(out, "{} {kind} {}: {}", v.id, v.constraint, v.message);
        }
    };
    match &doc.episode {
        None => {
            let _ = writeln!(out, "{} in {}", doc.scene, doc.target);
            let _ = writeln!(out, "{}", render(&doc.model));
            violations(&mut out, &doc.violations);
        }
        Some(ep) => {
            for it in &ep.iterations {
                let _ = writeln!(out, "iteration {} (kb version {})", it.index, it.kb_version);
                let _ = writeln!(out, "{}", render(&it.model));
                violations(&mut out, &it.violations);
                if let Some(a) = &it.chosen {
                    let _ = writeln!(out, "repair: {}", a.id);
                }
            }
            let _ = writeln!(out, "outcome: {}", ep.outcome.as_str());
        }
    }
    out
}

fn golden(args: &RunArgs, doc: &TraceDocument, text: &str) -> Result<(), Failure> {
    let Some(path) = &args.golden else { return Ok(()) };
    let actual = if path.extension().is_some_and(|e| e == "txt") {
        text.to_string()
    } else {
        serde_json::to_string_pretty(&doc.model).expect("model serializes") + "\n"
    };
    if args.update_golden {
        fs::write(path, &actual).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
        eprintln!(
            "WARNING: golden file {} was regenerated from this run; review the diff before committing",
            path.display()
        );
        return Ok(());
    }
    let expected =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    if expected != actual {
        return Err(Failure::Diagnostics(format!("golden mismatch: output differs from {}\n", path.display())));
    }
    Ok(())
}

fn emit(doc: &TraceDocument, corpus: &Corpus, args: &RunArgs) -> Result<(), Failure> {
    let text = text_of(doc, corpus);
    match doc.config.output {
        OutputFormat::Json => write_stdout(&doc.to_json()),
        OutputFormat::Text => write_stdout(&text),
        OutputFormat::Both => write_stdout(&format!("{text}\n{}", doc.to_json())),
    }
    golden(args, doc, &text)
}

fn load(root: &Path) -> Result<Corpus, Failure> {
    Corpus::load(&[root.to_path_buf()]).map_err(corpus_failure)
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.cmd {
        Cmd::Check { paths } => {
            let paths = if paths.is_empty() { vec![cli.corpus.clone()] } else { paths };
            let corpus = Corpus::load(&paths).map_err(corpus_failure)?;
            write_stdout(&format!("ok: {} file(s), {} scene(s)\n", corpus.inputs.len(), corpus.scenes.len()));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Interpret(args) => {
            let cfg = config_for(&args)?;
            let corpus = load(&cli.corpus)?;
            let scene =
                corpus.scene(&args.scene).ok_or_else(|| Failure::Usage(format!("unknown scene `{}`", args.scene)))?;
            let sources = if args.sources.is_empty() {
                corpus.kb.operational_domains(&args.target)
            } else {
                args.sources.clone()
            };
            let build = build_model(&corpus.kb, scene, &args.target, &sources, &cfg)
                .map_err(|e| Failure::Diagnostics(format!("error[{}]: {e}\n", e.code())))?;
            let domain = corpus.kb.domain(&args.target).map_err(|e| Failure::Usage(e.to_string()))?;
            let checked = check(&build.model, domain);
            let doc = TraceDocument {
                schema_version: janus_core::report::SCHEMA_VERSION.into(),
                command: "interpret".into(),
                scene: scene.name.clone(),
                target: args.target.clone(),
                sources,
                config: cfg,
                inputs: corpus.inputs.clone(),
                multi_associated: build.janus.multi_associated(),
                janus: build.janus,
                trace: build.trace,
                model: build.model,
                consequences: checked.consequences,
                violations: checked.violations,
                episode: None,
                outcome: None,
            };
            emit(&doc, &corpus, &args)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Repair(args) => {
            let cfg = config_for(&args)?;
            let corpus = load(&cli.corpus)?;
            let scene =
                corpus.scene(&args.scene).ok_or_else(|| Failure::Usage(format!("unknown scene `{}`", args.scene)))?;
            corpus.kb.domain(&args.target).map_err(|e| Failure::Usage(e.to_string()))?;
            let (episode, _) = repair_loop(&corpus.kb, scene, &args.target, &args.sources, &cfg)
                .map_err(|e| Failure::Diagnostics(format!("error[{}]: {e}\n", e.code())))?;
            let last = episode.last().clone();
            let outcome = episode.outcome;
            let doc = TraceDocument {
                schema_version: janus_core::report::SCHEMA_VERSION.into(),
                command: "repair".into(),
                scene: scene.name.clone(),
                target: args.target.clone(),
                sources: episode.sources.clone(),
                config: cfg,
                inputs: corpus.inputs.clone(),
                multi_associated: last.multi_associated,
                janus: last.janus,
                trace: last.trace,
                model: last.model,
                consequences: last.consequences,
                violations: last.violations,
                episode: Some(episode),
                outcome: Some(outcome),
            };
            emit(&doc, &corpus, &args)?;
            Ok(match outcome {
                Outcome::ValidModel => ExitCode::SUCCESS,
                Outcome::Stuck => ExitCode::from(3),
                Outcome::BudgetExhausted => ExitCode::from(4),
            })
        }
        Cmd::Explain { trace, violation, iteration } => {
            let text = fs::read_to_string(&trace)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", trace.display())))?;
            let doc: TraceDocument = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{} is not a trace document: {e}", trace.display())))?;
            let (model, violations) = match iteration {
                None => (&doc.model, &doc.violations),
                Some(i) => {
                    let it = doc
                        .episode
                        .as_ref()
                        .and_then(|ep| ep.iterations.iter().find(|it| it.index == i))
                        .ok_or_else(|| Failure::Usage(format!("trace has no iteration {i}")))?;
                    (&it.model, &it.violations)
                }
            };
            let v = violations
                .iter()
                .find(|v| v.id == violation)
                .ok_or_else(|| Failure::Usage(format!("no violation `{violation}` in this trace")))?;
            let groups =
                implicate(v, model).map_err(|e| Failure::Diagnostics(format!("error[{}]: {e}\n", e.code())))?;
            let mut out = format!("{} {}: {}\ncites: {}\n", v.id, v.constraint, v.message, v.cites.join(", "));
            for g in groups {
                out.push_str(&g.provenance.describe());
                out.push('\n');
                for f in &g.facts {
                    let inputs = model.facts.get(f).map(|x| x.inputs.join(", ")).unwrap_or_default();
                    if inputs.is_empty() {
                        out.push_str(&format!("  {f}\n"));
                    } else {
                        out.push_str(&format!("  {f} <- {inputs}\n"));
                    }
                }
            }
            write_stdout(&out);
            Ok(ExitCode::SUCCESS)
        }
    }
}

// A closed pipe (`janus ... | head`) is not an error worth a panic.
fn write_stdout(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(s.as_bytes()).and_then(|_| out.flush());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(f) => f.exit(),
    }
}
