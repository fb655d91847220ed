//! Class-aware matching of graph nodes against the pattern a shape describes.

use indexmap::IndexSet;

use crate::rdf::{vocab, Graph, Iri, Node, Triple};
use crate::shacl::{Constraint, Manifest, ShapeId, ShapeKind};
use crate::validator::{is_instance, Evaluator};

use super::namer::MINT_PARAM;

/// The triples a node `x` needs for `shape`, as far as they can be written
/// down: its classes and fixed property values, following `sh:node` and
/// `sh:and` on the same node. Subject is [`MINT_PARAM`].
pub fn shape_pattern(shape: &ShapeId, m: &Manifest) -> Vec<Triple> {
    let x = Node::iri(MINT_PARAM);
    let mut out: IndexSet<Triple> = IndexSet::new();
    let mut stack = vec![shape.clone()];
    let mut seen = IndexSet::new();
    let rdf_type = Iri::new(vocab::rdf::TYPE);
    while let Some(id) = stack.pop() {
        if !seen.insert(id.clone()) {
            continue;
        }
        let s = m.shape(&id);
        if s.kind != ShapeKind::Node {
            continue;
        }
        for c in &s.constraints {
            match c {
                Constraint::Class(class) => {
                    out.insert(
                        Triple::new(x.clone(), rdf_type.clone(), Node::Iri(class.clone()))
                            .expect("IRI subject"),
                    );
                }
                Constraint::Node(r) => stack.push(r.clone()),
                Constraint::And(list) => stack.extend(list.iter().rev().cloned()),
                Constraint::Property(p) => {
                    let ps = m.shape(p);
                    if let Some(path) = &ps.path {
                        for pc in &ps.constraints {
                            if let Constraint::HasValue(v) = pc {
                                out.insert(
                                    Triple::new(x.clone(), path.clone(), v.clone())
                                        .expect("IRI subject"),
                                );
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    out.into_iter().collect()
}

/// Pattern triples with `node` in place of the stand-in subject.
pub fn bind_pattern(pattern: &[Triple], node: &Node) -> Vec<Triple> {
    let x = Node::iri(MINT_PARAM);
    pattern
        .iter()
        .map(|t| t.map_nodes(|n| if n == &x { node.clone() } else { n.clone() }))
        .collect()
}

fn satisfied(t: &Triple, g: &Graph) -> bool {
    if t.predicate().as_str() == vocab::rdf::TYPE {
        if let Some(class) = t.object().as_iri() {
            return is_instance(t.subject(), class, g);
        }
    }
    g.contains(t)
}

/// Graph nodes ranked by how much of `shape` they already satisfy: conforming
/// nodes first (with no missing triples), then partial matches by the number
/// of pattern triples they have, ties in graph order.
pub fn monomorphism_candidates(
    shape: &ShapeId,
    g: &Graph,
    m: &Manifest,
    exclude: &IndexSet<Node>,
) -> Vec<(Node, Vec<Triple>)> {
    let pattern = shape_pattern(shape, m);
    let ev = Evaluator::new(g, m);
    let mut scored: Vec<(bool, usize, Node, Vec<Triple>)> = g
        .nodes()
        .into_iter()
        .filter(|n| !n.is_literal() && !exclude.contains(n))
        .map(|n| {
            let full = ev.eval(&n, shape).conforms();
            let bound = bind_pattern(&pattern, &n);
            let missing: Vec<Triple> = if full {
                Vec::new()
            } else {
                bound.iter().filter(|t| !satisfied(t, g)).cloned().collect()
            };
            let matched = bound.len() - missing.len();
            (full, matched, n, missing)
        })
        .collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
    scored
        .into_iter()
        .map(|(_, _, n, missing)| (n, missing))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ex, running_graph, running_manifest, shape};

    #[test]
    fn dan_is_the_only_full_match() {
        let (g, m) = (running_graph(), running_manifest());
        let exclude: IndexSet<Node> = [ex("Alice"), ex("Bob")].into_iter().collect();
        let c = monomorphism_candidates(&shape("ReviewerShape"), &g, &m, &exclude);
        assert_eq!(c[0], (ex("Dan"), vec![]));
        assert!(!c[1].1.is_empty());

        let exclude: IndexSet<Node> = [ex("Alice"), ex("Bob"), ex("Dan")].into_iter().collect();
        let c = monomorphism_candidates(&shape("ReviewerShape"), &g, &m, &exclude);
        assert!(c.iter().all(|(_, missing)| !missing.is_empty()));
        let clark = c.iter().find(|(n, _)| n == &ex("Clark")).unwrap();
        assert_eq!(clark.1.len(), 2);

        assert!(monomorphism_candidates(
            &shape("ReviewerShape"),
            &Graph::new(),
            &m,
            &IndexSet::new()
        )
        .is_empty());
    }
}
