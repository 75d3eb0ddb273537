//! The JSON trace document written by the command-line front end.

use serde::{Deserialize, Serialize};

use crate::assoc::JanusRegistry;
use crate::builder::{BuildTrace, InterpretationModel};
use crate::checker::{Consequence, ViolationReport};
use crate::config::RunConfig;
use crate::corpus::InputDigest;
use crate::learn::{Episode, Outcome};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub schema_version: String,
    pub command: String,
    pub scene: String,
    pub target: String,
    pub sources: Vec<String>,
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
    /// Janus registry of the reported build.
    pub janus: JanusRegistry,
    pub multi_associated: Vec<String>,
    pub trace: BuildTrace,
    pub model: InterpretationModel,
    pub consequences: Vec<Consequence>,
    pub violations: Vec<ViolationReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub episode: Option<Episode>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outcome: Option<Outcome>,
}

impl TraceDocument {
    /// Pretty JSON with a trailing newline; byte-stable for equal documents.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }
}
