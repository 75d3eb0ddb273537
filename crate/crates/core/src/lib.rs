//! Interpretation of physical scenes in a target conceptual domain, with
//! inference borrowed from operational source domains through Janus entities,
//! target-only checking of the result, and knowledge-base repair.
//!
//! The usual flow is [`corpus::Corpus::load`] to get a [`KnowledgeBase`] and
//! scenes, then [`build_model`] for one interpretation or [`repair_loop`] for
//! a full episode.

pub mod assoc;
pub mod builder;
pub mod checker;
pub mod config;
pub mod corpus;
pub mod dsl;
pub mod kb;
pub mod learn;
pub mod report;
pub mod scene;

pub use assoc::{overlap, propose_janus, JanusEntity, JanusRegistry, JanusStatus, Score};
pub use builder::{build_model, Build, BuildTrace, InterpretationModel, Provenance};
pub use checker::{check, Consequence, ViolationKind, ViolationReport};
pub use config::{OutputFormat, RunConfig};
pub use corpus::Corpus;
pub use kb::{Domain, KnowledgeBase, Schema};
pub use learn::{diagnose, repair_loop, specialize, Episode, Outcome, RepairAction};
pub use report::TraceDocument;
pub use scene::SceneGraph;
