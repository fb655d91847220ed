//! Violation-inducing operations: the rewriting system that turns
//! shape-based VIO terms into normalized ones, the complexity measure that
//! witnesses its termination, and the DFS that collects plans.

mod collect;
mod expand;

use std::collections::HashMap;
use std::fmt;

use serde_json::{json, Value};

use crate::rdf::{Compactor, Iri, Node};
use crate::shacl::{Constraint, Manifest, ShapeId, ShapeKind};

pub use collect::{
    collect_plans, collect_with, dfs_roots, ChildView, ChoicePolicy, CollectOptions, Collection,
    PathMode, Plan, ScriptedPolicy, SeededPolicy,
};
pub use expand::{expand, Alternatives, Expansion, ProductChildren, Rule};

/// What a VIO term asks to violate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermTarget {
    /// Constraint `index` of a manifest shape.
    Manifest { shape: ShapeId, index: usize },
    /// The artificial node shape `v_node` holding `(sh:node, shape)` and
    /// targeting `node`.
    ValueNode { node: Node, shape: ShapeId },
    /// The artificial property shape `f_v_prop` holding `(sh:minCount, 1)`
    /// over `path` with the single value `value`.
    ValueEdge { focus: Node, path: Iri, value: Node },
}

/// `VIO(κ, F)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VioTerm {
    pub target: TermTarget,
    pub focus: Vec<Node>,
}

impl VioTerm {
    pub fn manifest(shape: ShapeId, index: usize, focus: Vec<Node>) -> Self {
        VioTerm {
            target: TermTarget::Manifest { shape, index },
            focus,
        }
    }

    /// The manifest constraint this term names, if any.
    pub fn constraint<'m>(&self, m: &'m Manifest) -> Option<&'m Constraint> {
        match &self.target {
            TermTarget::Manifest { shape, index } => Some(m.shape(shape).constraint(*index)),
            _ => None,
        }
    }

    pub fn is_shape_based(&self, m: &Manifest) -> bool {
        match &self.target {
            TermTarget::Manifest { .. } => {
                self.constraint(m).is_some_and(Constraint::is_shape_based)
            }
            TermTarget::ValueNode { .. } => true,
            TermTarget::ValueEdge { .. } => false,
        }
    }

    /// Whether the materializer has an edit for this (normalized) term.
    ///
    /// Value constraints on a node shape could only be broken by replacing
    /// the focus node itself.
    pub fn is_materializable(&self, m: &Manifest) -> bool {
        match &self.target {
            TermTarget::Manifest { shape, index } => {
                let s = m.shape(shape);
                !(s.kind == ShapeKind::Node
                    && matches!(
                        s.constraint(*index),
                        Constraint::Datatype(_)
                            | Constraint::NodeKind(_)
                            | Constraint::HasValue(_)
                            | Constraint::In(_)
                    ))
            }
            TermTarget::ValueNode { .. } => false,
            TermTarget::ValueEdge { .. } => true,
        }
    }

    /// `VIO((shape, param), {focus})` with compacted names.
    pub fn render(&self, m: &Manifest, c: &Compactor) -> String {
        let focus: Vec<String> = self.focus.iter().map(|n| c.node(n)).collect();
        let head = match &self.target {
            TermTarget::Manifest { shape, index } => format!(
                "{}, {}",
                c.iri(shape.iri()),
                m.shape(shape).constraint(*index).describe(c)
            ),
            TermTarget::ValueNode { node, shape } => {
                format!("{}_node, sh:node, {}", short(node), c.iri(shape.iri()))
            }
            TermTarget::ValueEdge { focus, value, .. } => {
                format!("{}_{}_prop, sh:minCount, 1", short(focus), short(value))
            }
        };
        format!("VIO(({head}), {{{}}})", focus.join(", "))
    }

    /// Plan metadata for one term.
    pub fn to_json(&self, m: &Manifest, c: &Compactor) -> Value {
        let focus: Vec<String> = self.focus.iter().map(|n| n.to_string()).collect();
        match &self.target {
            TermTarget::Manifest { shape, index } => {
                let k = m.shape(shape).constraint(*index);
                json!({
                    "shape": shape.as_str(),
                    "constraint": k.kind().name(),
                    "parameter": k.parameter(c),
                    "focus": focus,
                })
            }
            TermTarget::ValueNode { node, shape } => json!({
                "shape": format!("{}_node", short(node)),
                "constraint": "node",
                "parameter": c.iri(shape.iri()),
                "focus": focus,
            }),
            TermTarget::ValueEdge {
                focus: f,
                path,
                value,
            } => json!({
                "shape": format!("{}_{}_prop", short(f), short(value)),
                "constraint": "minCount",
                "parameter": "1",
                "focus": focus,
                "path": path.as_str(),
                "value": value.to_string(),
            }),
        }
    }
}

/// A `·`-product of terms: one node of an expansion tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VioProduct(pub Vec<VioTerm>);

impl VioProduct {
    pub fn single(term: VioTerm) -> Self {
        VioProduct(vec![term])
    }

    pub fn terms(&self) -> &[VioTerm] {
        &self.0
    }

    pub fn is_normalized(&self, m: &Manifest) -> bool {
        self.0.iter().all(|t| !t.is_shape_based(m))
    }

    pub fn render(&self, m: &Manifest, c: &Compactor) -> String {
        let parts: Vec<String> = self.0.iter().map(|t| t.render(m, c)).collect();
        parts.join(" · ")
    }

    /// Order-independent identity used for seeding and de-duplication.
    pub fn canonical(&self) -> String {
        let mut parts: Vec<String> = self.0.iter().map(|t| format!("{t:?}")).collect();
        parts.sort();
        parts.join(" * ")
    }
}

impl fmt::Display for VioProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

fn short(node: &Node) -> String {
    match node {
        Node::Iri(iri) => iri.local_name().to_owned(),
        Node::Blank(b) => b.as_str().to_owned(),
        Node::Literal(l) => l.lexical().to_owned(),
    }
}

/// The complexity measure `χ`, counted in shape-based hops.
///
/// Non-shape-based terms (including qualified maxima and `f_v_prop` terms)
/// have `χ = 0`. A shape-based manifest term has `1 + max H(r)` over the
/// shapes `r` its parameter names, and a `v_node` term on shape `q` has
/// `1 + H(q)`, where `H(r)` is the largest `χ` among the constraints of `r`.
/// A product takes the maximum over its terms.
pub struct Complexity<'m> {
    m: &'m Manifest,
    memo: HashMap<ShapeId, u32>,
}

impl<'m> Complexity<'m> {
    pub fn new(m: &'m Manifest) -> Self {
        Complexity {
            m,
            memo: HashMap::new(),
        }
    }

    fn height(&mut self, shape: &ShapeId) -> u32 {
        if let Some(h) = self.memo.get(shape) {
            return *h;
        }
        let m = self.m;
        let h = m
            .shape(shape)
            .constraints
            .iter()
            .map(|c| self.constraint(c))
            .max()
            .unwrap_or(0);
        self.memo.insert(shape.clone(), h);
        h
    }

    fn constraint(&mut self, c: &Constraint) -> u32 {
        if !c.is_shape_based() {
            return 0;
        }
        1 + c
            .references()
            .into_iter()
            .map(|r| self.height(r))
            .max()
            .unwrap_or(0)
    }

    pub fn term(&mut self, t: &VioTerm) -> u32 {
        match &t.target {
            TermTarget::Manifest { shape, index } => {
                let m = self.m;
                self.constraint(m.shape(shape).constraint(*index))
            }
            TermTarget::ValueNode { shape, .. } => 1 + self.height(shape),
            TermTarget::ValueEdge { .. } => 0,
        }
    }

    pub fn product(&mut self, p: &VioProduct) -> u32 {
        p.0.iter().map(|t| self.term(t)).max().unwrap_or(0)
    }
}

/// `χ` of a single product.
pub fn complexity(p: &VioProduct, m: &Manifest) -> u32 {
    Complexity::new(m).product(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ex, running_manifest, shape};

    #[test]
    fn complexity_of_the_running_example() {
        let m = running_manifest();
        let root = VioTerm::manifest(shape("PaperShape"), 0, vec![ex("PaperABC"), ex("PaperA")]);
        let mut chi = Complexity::new(&m);
        assert_eq!(chi.term(&root), 2);
        assert_eq!(
            chi.term(&VioTerm::manifest(shape("ReviewedByShape"), 0, vec![])),
            1
        );
        assert_eq!(
            chi.term(&VioTerm::manifest(shape("ReviewedByShape"), 1, vec![])),
            0
        );
        assert_eq!(
            chi.term(&VioTerm::manifest(shape("ReviewerShape"), 0, vec![])),
            0
        );
        let node = VioTerm {
            target: TermTarget::ValueNode {
                node: ex("Alice"),
                shape: shape("ReviewerShape"),
            },
            focus: vec![ex("Alice")],
        };
        assert_eq!(chi.term(&node), 1);
    }

    #[test]
    fn rendering_follows_the_tree_notation() {
        let m = running_manifest();
        let c = Compactor::new(m.prefixes());
        let t = VioTerm::manifest(
            shape("ReviewedByShape"),
            0,
            vec![ex("PaperABC"), ex("PaperA")],
        );
        assert_eq!(
            t.render(&m, &c),
            "VIO((:ReviewedByShape, sh:qualifiedValueShape, :ReviewerShape; sh:qualifiedMinCount, 1), {ex:PaperABC, ex:PaperA})"
        );
        let edge = VioTerm {
            target: TermTarget::ValueEdge {
                focus: ex("PaperABC"),
                path: Iri::new("http://example.org/reviewedBy"),
                value: ex("Bob"),
            },
            focus: vec![ex("PaperABC")],
        };
        assert_eq!(
            edge.render(&m, &c),
            "VIO((PaperABC_Bob_prop, sh:minCount, 1), {ex:PaperABC})"
        );
    }
}
