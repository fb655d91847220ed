//! The reviewer running example used throughout the tests and docs: papers
//! need between one and three reviewers who are professors and committee
//! members.
//!
//! The data graph spells the class `ex:CommitteeMember` like the manifest does,
//! so the pair conforms.

use crate::rdf::{parse_turtle, Graph, Node};
use crate::shacl::{parse_manifest_turtle, Manifest, ShapeId};

pub const SHAPES_NS: &str = "http://example.org/shapes#";
pub const EX_NS: &str = "http://example.org/";

pub const RUNNING_MANIFEST: &str = r#"@prefix sh: <http://www.w3.org/ns/shacl#> .
@prefix ex: <http://example.org/> .
@prefix : <http://example.org/shapes#> .

:PaperShape a sh:NodeShape ;
    sh:targetClass ex:Paper ;
    sh:property :ReviewedByShape .

:ReviewedByShape a sh:PropertyShape ;
    sh:path ex:reviewedBy ;
    sh:qualifiedValueShape :ReviewerShape ;
    sh:qualifiedMaxCount 3 ;
    sh:qualifiedMinCount 1 .

:ReviewerShape a sh:NodeShape ;
    sh:targetNode ex:Dan ;
    sh:class ex:Professor, ex:CommitteeMember .
"#;

pub const RUNNING_GRAPH: &str = r#"@prefix ex: <http://example.org/> .

ex:PaperABC a ex:Paper ;
    ex:reviewedBy ex:Alice, ex:Bob, ex:Clark ;
    ex:author ex:Ethan .
ex:PaperA a ex:Paper ;
    ex:reviewedBy ex:Alice .
ex:Alice a ex:Professor, ex:CommitteeMember .
ex:Bob a ex:Professor, ex:CommitteeMember .
ex:Clark a ex:Student .
ex:Dan a ex:Professor, ex:CommitteeMember .
"#;

pub fn running_manifest() -> Manifest {
    parse_manifest_turtle(RUNNING_MANIFEST).expect("bundled manifest parses")
}

pub fn running_graph() -> Graph {
    parse_turtle(RUNNING_GRAPH).expect("bundled graph parses")
}

/// A shape of the running example by local name, e.g. `ReviewerShape`.
pub fn shape(local: &str) -> ShapeId {
    ShapeId::new(format!("{SHAPES_NS}{local}"))
}

/// An `ex:` node by local name.
pub fn ex(local: &str) -> Node {
    Node::iri(format!("{EX_NS}{local}"))
}
