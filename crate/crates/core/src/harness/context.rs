//! The manifest and graph context variants a repair prompt can carry.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexSet;
use serde::Serialize;

use crate::rdf::{vocab, Graph, Iri, Node, Triple};
use crate::shacl::{Constraint, Manifest, ShapeId};
use crate::validator::{Evaluator, ValidationResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ManifestContext {
    /// The whole manifest without natural-language descriptions.
    M,
    /// The source shape and the shapes it depends on.
    S,
    /// `S` plus descriptions of the classes it mentions.
    Sn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum GraphContext {
    /// The whole graph.
    G,
    /// The triples read while validating the focus.
    F,
    /// `F` plus the triples of one conforming example.
    FPlus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Strategy {
    pub manifest: ManifestContext,
    pub graph: GraphContext,
}

impl Strategy {
    pub fn new(manifest: ManifestContext, graph: GraphContext) -> Self {
        Strategy { manifest, graph }
    }

    /// All nine combinations, manifest variant varying slowest.
    pub fn all() -> Vec<Strategy> {
        let mut out = Vec::new();
        for m in [ManifestContext::M, ManifestContext::S, ManifestContext::Sn] {
            for g in [GraphContext::G, GraphContext::F, GraphContext::FPlus] {
                out.push(Strategy::new(m, g));
            }
        }
        out
    }
}

impl fmt::Display for ManifestContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManifestContext::M => "M",
            ManifestContext::S => "S",
            ManifestContext::Sn => "Sn",
        })
    }
}

impl fmt::Display for GraphContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphContext::G => "G",
            GraphContext::F => "F",
            GraphContext::FPlus => "F+",
        })
    }
}

/// Written as `S,F+`.
impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.manifest, self.graph)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy \"{0}\" (expected <M|S|Sn>,<G|F|F+>, e.g. S,F+)")]
pub struct StrategyError(pub String);

impl FromStr for Strategy {
    type Err = StrategyError;

    /// Accepts `S,F+` as well as the joined form `SF+`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || StrategyError(s.to_owned());
        let t = s.trim();
        let (m, g) = match t.split_once(',') {
            Some((m, g)) => (m.trim(), g.trim()),
            None => {
                let cut = if t.starts_with("Sn") { 2 } else { 1 };
                (t.get(..cut).ok_or_else(err)?, &t[cut..])
            }
        };
        let manifest = match m {
            "M" => ManifestContext::M,
            "S" => ManifestContext::S,
            "Sn" => ManifestContext::Sn,
            _ => return Err(err()),
        };
        let graph = match g {
            "G" => GraphContext::G,
            "F" => GraphContext::F,
            "F+" | "Fplus" => GraphContext::FPlus,
            _ => return Err(err()),
        };
        Ok(Strategy { manifest, graph })
    }
}

/// Predicates holding natural-language descriptions.
pub const DESCRIPTION_PREDICATES: [&str; 5] = [
    vocab::rdfs::LABEL,
    vocab::rdfs::COMMENT,
    vocab::dcterms::DESCRIPTION,
    vocab::dc::DESCRIPTION,
    vocab::skos::DEFINITION,
];

fn is_description(p: &Iri) -> bool {
    DESCRIPTION_PREDICATES.contains(&p.as_str())
}

/// Manifest triples that declare `id`: header, targets and every constraint.
pub fn shape_triples(id: &ShapeId, m: &Manifest) -> Vec<Triple> {
    let s = m.shape(id);
    let mut out: IndexSet<Triple> = IndexSet::new();
    out.extend(s.header_triples().iter().cloned());
    out.extend(s.target_triples().iter().cloned());
    for i in 0..s.len() {
        out.extend(s.defining_triples(i).iter().cloned());
    }
    out.into_iter().collect()
}

/// The source shape together with the anonymous shapes nested in it, as
/// shown in the violation section.
pub fn source_shape_graph(source: &ShapeId, m: &Manifest) -> Graph {
    let mut g = Graph::with_prefixes(m.prefixes().clone());
    let mut stack = vec![source.clone()];
    let mut seen = IndexSet::new();
    while let Some(id) = stack.pop() {
        if !seen.insert(id.clone()) {
            continue;
        }
        g.extend(shape_triples(&id, m));
        for r in m.shape(&id).references() {
            if m.shape(r).node.is_blank() {
                stack.push(r.clone());
            }
        }
    }
    g
}

/// The manifest part of a prompt for result `r`.
pub fn manifest_context(
    r: &ValidationResult,
    m: &Manifest,
    data: &Graph,
    v: ManifestContext,
) -> Graph {
    let mut out = Graph::with_prefixes(m.prefixes().clone());
    if v == ManifestContext::M {
        out.extend(
            m.graph()
                .iter()
                .filter(|t| !is_description(t.predicate()))
                .cloned(),
        );
        return out;
    }
    let mut shapes = vec![r.source_shape.clone()];
    shapes.extend(m.dependencies(&r.source_shape));
    for id in &shapes {
        out.extend(shape_triples(id, m));
    }
    if v == ManifestContext::Sn {
        let classes: IndexSet<Node> = shapes
            .iter()
            .flat_map(|id| {
                let s = m.shape(id);
                let targets = s.target_triples().iter().map(|t| t.object().clone());
                let constrained = s.constraints.iter().filter_map(|c| match c {
                    Constraint::Class(class) => Some(Node::Iri(class.clone())),
                    _ => None,
                });
                targets.chain(constrained).collect::<Vec<_>>()
            })
            .filter(|n| n.as_iri().is_some())
            .collect();
        for source in [m.graph(), data] {
            for class in &classes {
                out.extend(
                    source
                        .with_subject(class)
                        .filter(|t| is_description(t.predicate()))
                        .cloned(),
                );
            }
        }
    }
    out
}

/// Nodes validated against `shape` as focus: its targets and, for shapes
/// reached through `sh:property`, the focus nodes of the referencing shapes.
fn focus_candidates(shape: &ShapeId, g: &Graph, m: &Manifest) -> IndexSet<Node> {
    let mut out = m.shape(shape).target_nodes(g);
    for (parent, i) in m.referrers(shape) {
        if matches!(m.shape(&parent).constraint(i), Constraint::Property(_)) {
            out.extend(focus_candidates(&parent, g, m));
        }
    }
    out
}

/// A graph context and the warnings raised while building it.
pub struct GraphContextOut {
    pub graph: Graph,
    pub warnings: Vec<String>,
}

/// The graph part of a prompt for result `r` against graph `g`.
///
/// The manifest variant does not change the selected triples: every variant
/// keeps the source shape and its dependencies, which is all validation reads.
pub fn graph_context(
    r: &ValidationResult,
    g: &Graph,
    m: &Manifest,
    v: GraphContext,
    _cm: ManifestContext,
) -> GraphContextOut {
    let mut warnings = Vec::new();
    if v == GraphContext::G {
        return GraphContextOut {
            graph: g.clone(),
            warnings,
        };
    }
    let mut out = Graph::with_prefixes(g.prefixes().clone());
    out.extend(r.touched.iter().cloned());
    let ev = Evaluator::new(g, m);
    if let Constraint::QualifiedMin { shape: q, .. } =
        m.shape(&r.source_shape).constraint(r.constraint_index)
    {
        for u in g.nodes().into_iter().filter(|n| !n.is_literal()) {
            let eval = ev.eval(&u, q);
            if eval.conforms() {
                out.extend(eval.consulted().iter().cloned());
            }
        }
    }
    if v == GraphContext::FPlus {
        let mut candidates: Vec<Node> = focus_candidates(&r.source_shape, g, m)
            .into_iter()
            .filter(|n| n != &r.focus)
            .collect();
        candidates.sort_by_key(|n| n.to_string());
        let example = candidates
            .into_iter()
            .find(|u| ev.eval(u, &r.source_shape).conforms());
        match example {
            Some(u) => {
                out.extend(ev.eval(&u, &r.source_shape).consulted().iter().cloned());
                for s in m.shapes() {
                    out.extend(s.targeting_triples(&u, g));
                }
            }
            None => warnings.push(format!(
                "no node other than the focus satisfies {}; F+ falls back to F",
                r.source_shape
            )),
        }
    }
    GraphContextOut {
        graph: out,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ex, running_graph, running_manifest, shape};
    use crate::rdf::parse_turtle;
    use crate::validator::validate;

    fn e1_invalid() -> Graph {
        let mut g = running_graph();
        assert!(g.remove(&Triple::iris(
            "http://example.org/Alice",
            vocab::rdf::TYPE,
            "http://example.org/CommitteeMember"
        )));
        assert!(g.remove(&Triple::iris(
            "http://example.org/PaperABC",
            "http://example.org/reviewedBy",
            "http://example.org/Bob"
        )));
        g
    }

    #[test]
    fn strategy_names() {
        assert_eq!(
            "S,F+".parse::<Strategy>().unwrap(),
            Strategy::new(ManifestContext::S, GraphContext::FPlus)
        );
        assert_eq!(
            "SnF".parse::<Strategy>().unwrap(),
            Strategy::new(ManifestContext::Sn, GraphContext::F)
        );
        assert_eq!("MG".parse::<Strategy>().unwrap().to_string(), "M,G");
        assert!("X,F".parse::<Strategy>().is_err());
        assert!("S,H".parse::<Strategy>().is_err());
        assert_eq!(Strategy::all().len(), 9);
    }

    #[test]
    fn e1_contexts() {
        let (g, m) = (e1_invalid(), running_manifest());
        let report = validate(&g, &m);
        let r = &report.results()[1];
        assert_eq!(r.focus, ex("PaperABC"));

        let s = manifest_context(r, &m, &g, ManifestContext::S);
        let subjects: IndexSet<Node> = s.iter().map(|t| t.subject().clone()).collect();
        let expect: IndexSet<Node> = [shape("ReviewedByShape"), shape("ReviewerShape")]
            .iter()
            .map(|s| Node::Iri(s.iri().clone()))
            .collect();
        assert_eq!(subjects, expect);
        assert!(s.is_subset_of(m.graph()));
        assert!(manifest_context(r, &m, &g, ManifestContext::M) == *m.graph());
        assert!(manifest_context(r, &m, &g, ManifestContext::Sn) == s);

        let f = graph_context(r, &g, &m, GraphContext::F, ManifestContext::S).graph;
        let expect = parse_turtle(
            "@prefix ex: <http://example.org/> .
             ex:PaperABC a ex:Paper ; ex:reviewedBy ex:Alice, ex:Clark .
             ex:Alice a ex:Professor . ex:Clark a ex:Student .
             ex:Bob a ex:Professor, ex:CommitteeMember .
             ex:Dan a ex:Professor, ex:CommitteeMember .",
        )
        .unwrap();
        assert!(f == expect);
        let fplus = graph_context(r, &g, &m, GraphContext::FPlus, ManifestContext::S);
        assert!(fplus.graph == f);
        assert_eq!(fplus.warnings.len(), 1);
        assert!(graph_context(r, &g, &m, GraphContext::G, ManifestContext::S).graph == g);
    }

    #[test]
    fn positive_example_and_descriptions() {
        let m = crate::shacl::parse_manifest_turtle(
            "@prefix sh: <http://www.w3.org/ns/shacl#> . @prefix ex: <http://example.org/> .
             @prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
             ex:S a sh:NodeShape ; sh:targetClass ex:T ; rdfs:label \"shape\" ;
                 sh:property [ sh:path ex:p ; sh:class ex:C ] .
             ex:C rdfs:comment \"a thing\" .",
        )
        .unwrap();
        let g = parse_turtle(
            "@prefix ex: <http://example.org/> .
             ex:a a ex:T ; ex:p ex:x . ex:x a ex:D .
             ex:b a ex:T ; ex:p ex:y . ex:y a ex:C .
             ex:c a ex:T ; ex:p ex:z . ex:z a ex:C .",
        )
        .unwrap();
        let report = validate(&g, &m);
        assert_eq!(report.len(), 1);
        let r = &report.results()[0];
        let f = graph_context(r, &g, &m, GraphContext::F, ManifestContext::S).graph;
        let fplus = graph_context(r, &g, &m, GraphContext::FPlus, ManifestContext::S);
        assert!(fplus.warnings.is_empty());
        assert!(f.is_subset_of(&fplus.graph) && fplus.graph.is_subset_of(&g));
        assert!(fplus.graph.contains(&Triple::iris(
            "http://example.org/b",
            "http://example.org/p",
            "http://example.org/y"
        )));
        assert!(!fplus.graph.contains(&Triple::iris(
            "http://example.org/c",
            "http://example.org/p",
            "http://example.org/z"
        )));

        let s = manifest_context(r, &m, &g, ManifestContext::S);
        let sn = manifest_context(r, &m, &g, ManifestContext::Sn);
        let mm = manifest_context(r, &m, &g, ManifestContext::M);
        assert_eq!(sn.len(), s.len() + 1);
        assert!(!mm.iter().any(|t| is_description(t.predicate())));
    }
}
