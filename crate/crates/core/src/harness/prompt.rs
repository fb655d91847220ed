//! The five-section repair prompt.

use serde::{Deserialize, Serialize};

use crate::rdf::{serialize_turtle_subset, Compactor, Graph, PrefixMap};
use crate::shacl::Manifest;
use crate::validator::ValidationResult;

use super::context::source_shape_graph;

pub const PRIMER: &str = "You are an expert in repairing RDF graphs that violate SHACL shapes. Output a SPARQL operation that fixes the violation.";

pub const INSTRUCTIONS: &str = "Use \"INSERT DATA { }\", \"DELETE DATA { }\", or \"DELETE { } INSERT { } WHERE { }\" to fix the violation with minimal change that is contextually appropriate. Invent placeholder names or remove existing instances only if necessary. Do not use nested curly brackets.\n\nRespond only with valid json format using key \"answer\" without explanations. For example, {\"answer\":\"INSERT DATA {...}\"} or {\"answer\":\"DELETE DATA {...}\"} or {\"answer\":\"DELETE {...} INSERT {...} WHERE {...}\"}.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub primer: String,
    pub violation: String,
    pub manifest_context: String,
    pub graph_context: String,
    pub instructions: String,
}

impl Prompt {
    /// The sections in order, separated by blank lines.
    pub fn text(&self) -> String {
        [
            self.primer.as_str(),
            &self.violation,
            &self.manifest_context,
            &self.graph_context,
            &self.instructions,
        ]
        .join("\n\n")
    }
}

/// Builds the prompt for result `r` from already selected contexts.
pub fn build_prompt(
    r: &ValidationResult,
    m: &Manifest,
    cm: &Graph,
    cg: &Graph,
    prefixes: &PrefixMap,
) -> Prompt {
    let c = Compactor::new(prefixes);
    let shape = source_shape_graph(&r.source_shape, m);
    let turtle = |g: &Graph| serialize_turtle_subset(g.iter(), prefixes);
    Prompt {
        primer: PRIMER.to_owned(),
        violation: format!(
            "Focus Node: {}\nViolated source SHACL shape:\n{}Reason: {} is violated",
            c.node(&r.focus),
            turtle(&shape),
            r.component.name()
        ),
        manifest_context: format!("SHACL shapes graph:\n{}", turtle(cm)),
        graph_context: format!("RDF knowledge graph:\n{}", turtle(cg)),
        instructions: INSTRUCTIONS.to_owned(),
    }
}

/// Whitespace-separated token count, used when an adapter reports none.
pub fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
