//! Shapes, constraints and manifest parsing.

mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::rdf::{vocab, Compactor, Graph, Iri, Node, NodeKind, PrefixMap, Triple};

pub use parse::{parse_manifest, parse_manifest_turtle};

/// Identifier of a shape: its IRI, or a skolem IRI for anonymous shapes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapeId(Iri);

impl ShapeId {
    pub fn new(iri: impl AsRef<str>) -> Self {
        ShapeId(Iri::new(iri))
    }

    pub fn iri(&self) -> &Iri {
        &self.0
    }

    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }
}

impl fmt::Display for ShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.as_str())
    }
}

impl fmt::Debug for ShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ShapeId({})", self.0.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Node,
    Property,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Class(Iri),
    Node(Node),
}

/// The constraint components this crate understands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ConstraintKind {
    Class,
    MinCount,
    MaxCount,
    Datatype,
    NodeKind,
    HasValue,
    In,
    Node,
    Property,
    QualifiedMinCount,
    QualifiedMaxCount,
    And,
    Or,
}

impl ConstraintKind {
    /// Name of the SHACL constraint component, as used in validation reports.
    pub fn component(self) -> &'static str {
        match self {
            ConstraintKind::Class => "ClassConstraintComponent",
            ConstraintKind::MinCount => "MinCountConstraintComponent",
            ConstraintKind::MaxCount => "MaxCountConstraintComponent",
            ConstraintKind::Datatype => "DatatypeConstraintComponent",
            ConstraintKind::NodeKind => "NodeKindConstraintComponent",
            ConstraintKind::HasValue => "HasValueConstraintComponent",
            ConstraintKind::In => "InConstraintComponent",
            ConstraintKind::Node => "NodeConstraintComponent",
            ConstraintKind::Property => "PropertyConstraintComponent",
            ConstraintKind::QualifiedMinCount => "QualifiedMinCountConstraintComponent",
            ConstraintKind::QualifiedMaxCount => "QualifiedMaxCountConstraintComponent",
            ConstraintKind::And => "AndConstraintComponent",
            ConstraintKind::Or => "OrConstraintComponent",
        }
    }

    /// The parameter's local name, e.g. `qualifiedMinCount`.
    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::Class => "class",
            ConstraintKind::MinCount => "minCount",
            ConstraintKind::MaxCount => "maxCount",
            ConstraintKind::Datatype => "datatype",
            ConstraintKind::NodeKind => "nodeKind",
            ConstraintKind::HasValue => "hasValue",
            ConstraintKind::In => "in",
            ConstraintKind::Node => "node",
            ConstraintKind::Property => "property",
            ConstraintKind::QualifiedMinCount => "qualifiedMinCount",
            ConstraintKind::QualifiedMaxCount => "qualifiedMaxCount",
            ConstraintKind::And => "and",
            ConstraintKind::Or => "or",
        }
    }

    pub fn from_component(name: &str) -> Option<Self> {
        ALL_KINDS.iter().copied().find(|k| k.component() == name)
    }
}

pub const ALL_KINDS: [ConstraintKind; 13] = [
    ConstraintKind::Class,
    ConstraintKind::MinCount,
    ConstraintKind::MaxCount,
    ConstraintKind::Datatype,
    ConstraintKind::NodeKind,
    ConstraintKind::HasValue,
    ConstraintKind::In,
    ConstraintKind::Node,
    ConstraintKind::Property,
    ConstraintKind::QualifiedMinCount,
    ConstraintKind::QualifiedMaxCount,
    ConstraintKind::And,
    ConstraintKind::Or,
];

/// A constraint with its parameter.
///
/// A `sh:qualifiedValueShape` carrying both qualifiers becomes two entries,
/// `QualifiedMin` then `QualifiedMax`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    Class(Iri),
    MinCount(u64),
    MaxCount(u64),
    Datatype(Iri),
    NodeKind(NodeKind),
    HasValue(Node),
    In(Vec<Node>),
    Node(ShapeId),
    Property(ShapeId),
    QualifiedMin { shape: ShapeId, count: u64 },
    QualifiedMax { shape: ShapeId, count: u64 },
    And(Vec<ShapeId>),
    Or(Vec<ShapeId>),
}

impl Constraint {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            Constraint::Class(_) => ConstraintKind::Class,
            Constraint::MinCount(_) => ConstraintKind::MinCount,
            Constraint::MaxCount(_) => ConstraintKind::MaxCount,
            Constraint::Datatype(_) => ConstraintKind::Datatype,
            Constraint::NodeKind(_) => ConstraintKind::NodeKind,
            Constraint::HasValue(_) => ConstraintKind::HasValue,
            Constraint::In(_) => ConstraintKind::In,
            Constraint::Node(_) => ConstraintKind::Node,
            Constraint::Property(_) => ConstraintKind::Property,
            Constraint::QualifiedMin { .. } => ConstraintKind::QualifiedMinCount,
            Constraint::QualifiedMax { .. } => ConstraintKind::QualifiedMaxCount,
            Constraint::And(_) => ConstraintKind::And,
            Constraint::Or(_) => ConstraintKind::Or,
        }
    }

    /// Shapes referenced by the parameter.
    pub fn references(&self) -> Vec<&ShapeId> {
        match self {
            Constraint::Node(s) | Constraint::Property(s) => vec![s],
            Constraint::QualifiedMin { shape, .. } | Constraint::QualifiedMax { shape, .. } => {
                vec![shape]
            }
            Constraint::And(list) | Constraint::Or(list) => list.iter().collect(),
            _ => Vec::new(),
        }
    }

    /// Whether a violation must be induced through another shape.
    ///
    /// A qualified maximum is violated by adding conforming values directly, so
    /// it counts as already normalized.
    pub fn is_shape_based(&self) -> bool {
        matches!(
            self,
            Constraint::Node(_)
                | Constraint::Property(_)
                | Constraint::QualifiedMin { .. }
                | Constraint::And(_)
                | Constraint::Or(_)
        )
    }

    /// Renders the parameter the way the expansion tree prints it.
    pub fn describe(&self, c: &Compactor) -> String {
        let shapes = |list: &[ShapeId]| {
            let names: Vec<String> = list.iter().map(|s| c.iri(s.iri())).collect();
            format!("({})", names.join(" "))
        };
        match self {
            Constraint::Class(iri) | Constraint::Datatype(iri) => {
                format!("sh:{}, {}", self.kind().name(), c.iri(iri))
            }
            Constraint::MinCount(n) | Constraint::MaxCount(n) => {
                format!("sh:{}, {n}", self.kind().name())
            }
            Constraint::NodeKind(k) => format!("sh:nodeKind, {}", c.iri(&node_kind_iri(*k))),
            Constraint::HasValue(v) => format!("sh:hasValue, {}", c.node(v)),
            Constraint::In(list) => {
                let items: Vec<String> = list.iter().map(|n| c.node(n)).collect();
                format!("sh:in, ({})", items.join(" "))
            }
            Constraint::Node(s) | Constraint::Property(s) => {
                format!("sh:{}, {}", self.kind().name(), c.iri(s.iri()))
            }
            Constraint::QualifiedMin { shape, count } => format!(
                "sh:qualifiedValueShape, {}; sh:qualifiedMinCount, {count}",
                c.iri(shape.iri())
            ),
            Constraint::QualifiedMax { shape, count } => format!(
                "sh:qualifiedValueShape, {}; sh:qualifiedMaxCount, {count}",
                c.iri(shape.iri())
            ),
            Constraint::And(list) | Constraint::Or(list) => {
                format!("sh:{}, {}", self.kind().name(), shapes(list))
            }
        }
    }

    /// The parameter alone, for bundle metadata.
    pub fn parameter(&self, c: &Compactor) -> String {
        let full = self.describe(c);
        match full.split_once(", ") {
            Some((_, rest)) => rest.to_owned(),
            None => full,
        }
    }
}

pub fn node_kind_iri(kind: NodeKind) -> Iri {
    Iri::new(match kind {
        NodeKind::Iri => vocab::sh::IRI,
        NodeKind::Blank => vocab::sh::BLANK_NODE,
        NodeKind::Literal => vocab::sh::LITERAL,
    })
}

#[derive(Clone, Debug)]
pub struct Shape {
    pub id: ShapeId,
    /// The term that denotes this shape in the manifest graph.
    pub node: Node,
    pub kind: ShapeKind,
    pub targets: Vec<Target>,
    pub path: Option<Iri>,
    pub constraints: Vec<Constraint>,
    /// Manifest triples that state each constraint, parallel to `constraints`.
    pub(crate) defining: Vec<Vec<Triple>>,
    /// `rdf:type` and `sh:path` triples.
    pub(crate) header: Vec<Triple>,
    pub(crate) target_triples: Vec<Triple>,
}

impl Shape {
    pub fn constraint(&self, index: usize) -> &Constraint {
        &self.constraints[index]
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Manifest triples that state constraint `index`, including list cells.
    pub fn defining_triples(&self, index: usize) -> &[Triple] {
        &self.defining[index]
    }

    pub fn header_triples(&self) -> &[Triple] {
        &self.header
    }

    pub fn target_triples(&self) -> &[Triple] {
        &self.target_triples
    }

    /// Shapes referenced by any constraint, in constraint order.
    pub fn references(&self) -> IndexSet<&ShapeId> {
        self.constraints
            .iter()
            .flat_map(|c| c.references())
            .collect()
    }

    /// `τ_s(g)`: union of the target declarations, in graph order. Class
    /// targets include instances of `rdfs:subClassOf` descendants.
    pub fn target_nodes(&self, g: &Graph) -> IndexSet<Node> {
        let mut out = IndexSet::new();
        let rdf_type = Iri::new(vocab::rdf::TYPE);
        for t in &self.targets {
            match t {
                Target::Class(c) => {
                    let (classes, _) = subclass_closure(c, g);
                    if classes.len() == 1 {
                        out.extend(g.subjects(&rdf_type, &Node::Iri(c.clone())).cloned());
                    } else {
                        out.extend(
                            g.iter()
                                .filter(|t| {
                                    t.predicate() == &rdf_type
                                        && t.object().as_iri().is_some_and(|o| classes.contains(o))
                                })
                                .map(|t| t.subject().clone()),
                        );
                    }
                }
                Target::Node(n) => {
                    out.insert(n.clone());
                }
            }
        }
        out
    }

    /// Triples that make `focus` a target: the type triples behind class
    /// targets and the subclass links they rely on.
    pub fn targeting_triples(&self, focus: &Node, g: &Graph) -> Vec<Triple> {
        let mut out = Vec::new();
        for t in &self.targets {
            if let Target::Class(c) = t {
                let (classes, links) = subclass_closure(c, g);
                let mut used = false;
                for tr in g.type_triples(focus) {
                    if tr.object().as_iri().is_some_and(|o| classes.contains(o)) {
                        out.push(tr.clone());
                        used = true;
                    }
                }
                if used {
                    out.extend(links);
                }
            }
        }
        out
    }

    /// `μ_s(focus)` in graph order: `{focus}` for node shapes, path objects otherwise.
    pub fn value_nodes(&self, focus: &Node, g: &Graph) -> Vec<Node> {
        match &self.path {
            None => vec![focus.clone()],
            Some(p) => g.objects(focus, p).cloned().collect(),
        }
    }

    /// The path triples read by `value_nodes`.
    pub fn path_triples(&self, focus: &Node, g: &Graph) -> Vec<Triple> {
        match &self.path {
            None => Vec::new(),
            Some(p) => g.with_subject_predicate(focus, p).cloned().collect(),
        }
    }
}

/// `class` and its transitive `rdfs:subClassOf` descendants, with the
/// subclass triples linking them.
pub(crate) fn subclass_closure(class: &Iri, g: &Graph) -> (IndexSet<Iri>, Vec<Triple>) {
    let sub = Iri::new(vocab::rdfs::SUB_CLASS_OF);
    let mut classes = IndexSet::new();
    classes.insert(class.clone());
    let mut links = Vec::new();
    let mut i = 0;
    while i < classes.len() {
        let current = Node::Iri(classes[i].clone());
        for t in g.with_object(&current).filter(|t| t.predicate() == &sub) {
            if let Some(child) = t.subject().as_iri() {
                links.push(t.clone());
                classes.insert(child.clone());
            }
        }
        i += 1;
    }
    (classes, links)
}

#[derive(Debug, thiserror::Error)]
pub enum ShaclError {
    #[error("manifest is not valid Turtle: {0}")]
    Turtle(#[from] crate::rdf::TurtleError),
    #[error("recursive shapes are not supported (the rewriting only terminates on acyclic manifests): {}", .0.join(" -> "))]
    Recursion(Vec<String>),
    #[error("shape {shape}: {message}")]
    Malformed { shape: String, message: String },
}

/// A parsed manifest.
#[derive(Clone, Debug)]
pub struct Manifest {
    shapes: IndexMap<ShapeId, Shape>,
    order: Vec<ShapeId>,
    roots: Vec<ShapeId>,
    graph: Graph,
    warnings: Vec<String>,
}

impl Manifest {
    pub fn shapes(&self) -> impl Iterator<Item = &Shape> {
        self.shapes.values()
    }

    pub fn shape(&self, id: &ShapeId) -> &Shape {
        &self.shapes[id]
    }

    pub fn get(&self, id: &ShapeId) -> Option<&Shape> {
        self.shapes.get(id)
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    /// Shapes not referenced by any other shape, in dependency order.
    pub fn roots(&self) -> &[ShapeId] {
        &self.roots
    }

    /// Topological order: every shape precedes the shapes it references.
    pub fn dependency_order(&self) -> &[ShapeId] {
        &self.order
    }

    pub fn position(&self, id: &ShapeId) -> usize {
        self.order
            .iter()
            .position(|s| s == id)
            .unwrap_or(usize::MAX)
    }

    /// The manifest as parsed, including non-shape triples.
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn prefixes(&self) -> &PrefixMap {
        self.graph.prefixes()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Shapes reachable from `id` through references, excluding `id` itself.
    pub fn dependencies(&self, id: &ShapeId) -> IndexSet<ShapeId> {
        let mut out = IndexSet::new();
        let mut stack: Vec<ShapeId> = self.shape(id).references().into_iter().cloned().collect();
        stack.reverse();
        while let Some(s) = stack.pop() {
            if out.insert(s.clone()) {
                let mut refs: Vec<ShapeId> =
                    self.shape(&s).references().into_iter().cloned().collect();
                refs.reverse();
                stack.extend(refs);
            }
        }
        out
    }

    /// Every `(shape, constraint index)` pair, in dependency order.
    pub fn constraint_ids(&self) -> Vec<(ShapeId, usize)> {
        self.order
            .iter()
            .flat_map(|id| (0..self.shape(id).len()).map(move |i| (id.clone(), i)))
            .collect()
    }

    /// The shapes referencing `id`, with the referencing constraint index.
    pub fn referrers(&self, id: &ShapeId) -> Vec<(ShapeId, usize)> {
        let mut out = Vec::new();
        for s in self.shapes.values() {
            for (i, c) in s.constraints.iter().enumerate() {
                if c.references().contains(&id) {
                    out.push((s.id.clone(), i));
                }
            }
        }
        out
    }

    fn from_parts(
        shapes: IndexMap<ShapeId, Shape>,
        graph: Graph,
        warnings: Vec<String>,
    ) -> Result<Self, ShaclError> {
        check_acyclic(&shapes)?;
        let order = topological_order(&shapes);
        let referenced: BTreeSet<&ShapeId> = shapes.values().flat_map(|s| s.references()).collect();
        let roots = order
            .iter()
            .filter(|id| !referenced.contains(id))
            .cloned()
            .collect();
        Ok(Manifest {
            shapes,
            order,
            roots,
            graph,
            warnings,
        })
    }
}

fn check_acyclic(shapes: &IndexMap<ShapeId, Shape>) -> Result<(), ShaclError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        id: &'a ShapeId,
        shapes: &'a IndexMap<ShapeId, Shape>,
        marks: &mut HashMap<&'a ShapeId, Mark>,
        stack: &mut Vec<&'a ShapeId>,
    ) -> Result<(), ShaclError> {
        match marks.get(id) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Active) => {
                let start = stack.iter().position(|s| *s == id).unwrap_or(0);
                let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                cycle.push(id.to_string());
                return Err(ShaclError::Recursion(cycle));
            }
            None => {}
        }
        marks.insert(id, Mark::Active);
        stack.push(id);
        for r in shapes[id].references() {
            visit(r, shapes, marks, stack)?;
        }
        stack.pop();
        marks.insert(id, Mark::Done);
        Ok(())
    }
    let mut marks = HashMap::new();
    for id in shapes.keys() {
        visit(id, shapes, &mut marks, &mut Vec::new())?;
    }
    Ok(())
}

/// Kahn's algorithm; among ready shapes the smallest id goes first.
fn topological_order(shapes: &IndexMap<ShapeId, Shape>) -> Vec<ShapeId> {
    let mut indegree: HashMap<&ShapeId, usize> = shapes.keys().map(|k| (k, 0)).collect();
    for s in shapes.values() {
        for r in s.references() {
            *indegree.entry(r).or_default() += 1;
        }
    }
    let mut ready: BTreeSet<&ShapeId> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(k, _)| *k)
        .collect();
    let mut out = Vec::with_capacity(shapes.len());
    while let Some(id) = ready.pop_first() {
        out.push(id.clone());
        for r in shapes[id].references() {
            let d = indegree.get_mut(r).expect("reference resolves");
            *d -= 1;
            if *d == 0 {
                ready.insert(r);
            }
        }
    }
    out
}
