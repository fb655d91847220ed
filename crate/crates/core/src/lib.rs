//! Generate SHACL violations on valid knowledge graphs, package them as repair
//! test cases and score repair systems against them.

pub mod fixtures;
pub mod harness;
pub mod materialize;
pub mod metrics;
pub mod parallel;
pub mod rdf;
pub mod shacl;
pub mod sparql;
pub mod validator;
pub mod vio;
