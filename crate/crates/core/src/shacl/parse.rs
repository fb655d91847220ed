use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use super::{Constraint, Manifest, ShaclError, Shape, ShapeId, ShapeKind, Target};
use crate::rdf::{parse_turtle, vocab, Graph, Iri, Node, NodeKind, Triple};

/// Parses a Turtle manifest.
pub fn parse_manifest_turtle(text: &str) -> Result<Manifest, ShaclError> {
    parse_manifest(&parse_turtle(text)?)
}

/// Lifts the shapes of a shapes graph.
///
/// Anonymous shapes are named after the constraint that references them:
/// `urn:skolem:<parent>#c<i>` for the `i`-th constraint (1-based, a qualified
/// value shape counting once), with a
/// `.<k>` suffix for the `k`-th member of an `sh:and`/`sh:or` list. Shapes
/// nested under an anonymous shape extend its id with `/c<i>`.
pub fn parse_manifest(g: &Graph) -> Result<Manifest, ShaclError> {
    let mut lifter = Lifter::new(g);
    let candidates = lifter.candidates();
    let referenced = lifter.referenced();
    for node in candidates.iter().filter(|n| !referenced.contains(*n)) {
        let id = lifter.top_level_id(node);
        lifter.lift(node.clone(), id)?;
    }
    // shapes only referenced from outside any shape
    for node in &candidates {
        if !lifter.ids.contains_key(node) {
            let id = lifter.top_level_id(node);
            lifter.lift(node.clone(), id)?;
        }
    }
    lifter.check_property_references()?;
    Manifest::from_parts(lifter.shapes, g.clone(), lifter.warnings)
}

const METADATA: [&str; 8] = [
    "name",
    "description",
    "message",
    "severity",
    "order",
    "group",
    "defaultValue",
    "declare",
];

struct Lifter<'g> {
    g: &'g Graph,
    ids: HashMap<Node, ShapeId>,
    shapes: IndexMap<ShapeId, Shape>,
    warnings: Vec<String>,
    anon: usize,
}

struct Qualified {
    position: usize,
    shape_triple: Triple,
    shape: ShapeId,
    min: Option<(u64, Triple)>,
    max: Option<(u64, Triple)>,
}

impl<'g> Lifter<'g> {
    fn new(g: &'g Graph) -> Self {
        Lifter {
            g,
            ids: HashMap::new(),
            shapes: IndexMap::new(),
            warnings: Vec::new(),
            anon: 0,
        }
    }

    fn iri(s: &str) -> Iri {
        Iri::new(s)
    }

    fn candidates(&self) -> Vec<Node> {
        let shape_types = [vocab::sh::NODE_SHAPE, vocab::sh::PROPERTY_SHAPE];
        let target_preds = [vocab::sh::TARGET_CLASS, vocab::sh::TARGET_NODE];
        self.g
            .subject_nodes()
            .into_iter()
            .filter(|n| {
                self.g.with_subject(n).any(|t| {
                    let p = t.predicate().as_str();
                    target_preds.contains(&p)
                        || (p == vocab::rdf::TYPE
                            && t.object()
                                .as_iri()
                                .is_some_and(|c| shape_types.contains(&c.as_str())))
                })
            })
            .collect()
    }

    fn referenced(&self) -> HashSet<Node> {
        let mut out = HashSet::new();
        for t in self.g {
            match t.predicate().as_str() {
                vocab::sh::NODE | vocab::sh::PROPERTY | vocab::sh::QUALIFIED_VALUE_SHAPE => {
                    out.insert(t.object().clone());
                }
                vocab::sh::AND | vocab::sh::OR => {
                    if let Ok((members, _)) = self.list(t.object()) {
                        out.extend(members);
                    }
                }
                _ => {}
            }
        }
        out
    }

    fn top_level_id(&mut self, node: &Node) -> ShapeId {
        match node {
            Node::Iri(iri) => ShapeId::new(iri.as_str()),
            _ => {
                self.anon += 1;
                ShapeId::new(format!("urn:skolem:anon#{}", self.anon))
            }
        }
    }

    fn child_id(parent: &ShapeId, index: usize, member: Option<usize>) -> ShapeId {
        let suffix = match member {
            Some(k) => format!("c{index}.{k}"),
            None => format!("c{index}"),
        };
        let p = parent.as_str();
        if p.starts_with("urn:skolem:") && p.contains('#') {
            ShapeId::new(format!("{p}/{suffix}"))
        } else {
            ShapeId::new(format!("urn:skolem:{p}#{suffix}"))
        }
    }

    /// The id of a referenced shape, assigning one on first sight.
    fn reference(
        &mut self,
        node: &Node,
        parent: &ShapeId,
        index: usize,
        member: Option<usize>,
        pending: &mut Vec<(Node, ShapeId)>,
    ) -> Result<ShapeId, ShaclError> {
        if let Some(id) = self.ids.get(node) {
            return Ok(id.clone());
        }
        let id = match node {
            Node::Iri(iri) => ShapeId::new(iri.as_str()),
            Node::Blank(_) => Self::child_id(parent, index, member),
            Node::Literal(_) => {
                return Err(malformed(
                    parent,
                    format!("a literal cannot name a shape: {node}"),
                ))
            }
        };
        self.ids.insert(node.clone(), id.clone());
        pending.push((node.clone(), id.clone()));
        Ok(id)
    }

    fn lift(&mut self, node: Node, id: ShapeId) -> Result<(), ShaclError> {
        if self.shapes.contains_key(&id) {
            return Ok(());
        }
        self.ids.insert(node.clone(), id.clone());
        let mut pending = Vec::new();
        let shape = self.build(&node, &id, &mut pending)?;
        self.shapes.insert(id, shape);
        for (child, child_id) in pending {
            self.lift(child, child_id)?;
        }
        Ok(())
    }

    fn build(
        &mut self,
        node: &Node,
        id: &ShapeId,
        pending: &mut Vec<(Node, ShapeId)>,
    ) -> Result<Shape, ShaclError> {
        let g = self.g;
        let triples: Vec<&Triple> = g.with_subject(node).collect();
        if triples.is_empty() {
            self.warnings.push(format!(
                "shape {id} is referenced but never defined; it has no constraints"
            ));
        }
        let paths: Vec<&Triple> = triples
            .iter()
            .copied()
            .filter(|t| t.predicate().as_str() == vocab::sh::PATH)
            .collect();
        if paths.len() > 1 {
            return Err(malformed(id, "more than one sh:path"));
        }
        let path = match paths.first() {
            None => None,
            Some(t) => match t.object() {
                Node::Iri(p) => Some(p.clone()),
                _ => {
                    return Err(malformed(
                        id,
                        "only predicate paths are supported (sequence, alternative and inverse paths are not)",
                    ))
                }
            },
        };
        let kind = if path.is_some() {
            ShapeKind::Property
        } else {
            ShapeKind::Node
        };
        let is_typed = |class: &str| g.has_type(node, &Self::iri(class));
        if kind == ShapeKind::Property && is_typed(vocab::sh::NODE_SHAPE) {
            return Err(malformed(id, "a sh:NodeShape cannot have a sh:path"));
        }
        if kind == ShapeKind::Node && is_typed(vocab::sh::PROPERTY_SHAPE) {
            return Err(malformed(id, "a sh:PropertyShape needs a sh:path"));
        }

        let mut shape = Shape {
            id: id.clone(),
            node: node.clone(),
            kind,
            targets: Vec::new(),
            path,
            constraints: Vec::new(),
            defining: Vec::new(),
            header: Vec::new(),
            target_triples: Vec::new(),
        };
        let mut qualified: Option<Qualified> = None;
        let mut pending_min: Option<(u64, Triple)> = None;
        let mut pending_max: Option<(u64, Triple)> = None;

        for t in triples {
            let p = t.predicate().as_str();
            let o = t.object();
            let index = shape.constraints.len() + 1 + usize::from(qualified.is_some());
            let constraint = match p {
                vocab::rdf::TYPE => {
                    let c = o.as_iri().map(Iri::as_str);
                    if c == Some(vocab::sh::NODE_SHAPE) || c == Some(vocab::sh::PROPERTY_SHAPE) {
                        shape.header.push(t.clone());
                    } else if c == Some(vocab::rdfs::CLASS) {
                        // implicit class target
                        shape.targets.push(Target::Class(node_iri(node, id)?));
                        shape.target_triples.push(t.clone());
                    }
                    continue;
                }
                vocab::sh::PATH => {
                    shape.header.push(t.clone());
                    continue;
                }
                vocab::sh::TARGET_CLASS => {
                    let class = o
                        .as_iri()
                        .ok_or_else(|| malformed(id, "sh:targetClass must be an IRI"))?;
                    shape.targets.push(Target::Class(class.clone()));
                    shape.target_triples.push(t.clone());
                    continue;
                }
                vocab::sh::TARGET_NODE => {
                    shape.targets.push(Target::Node(o.clone()));
                    shape.target_triples.push(t.clone());
                    continue;
                }
                vocab::sh::CLASS => Constraint::Class(
                    o.as_iri()
                        .ok_or_else(|| malformed(id, "sh:class must be an IRI"))?
                        .clone(),
                ),
                vocab::sh::DATATYPE => Constraint::Datatype(
                    o.as_iri()
                        .ok_or_else(|| malformed(id, "sh:datatype must be an IRI"))?
                        .clone(),
                ),
                vocab::sh::MIN_COUNT | vocab::sh::MAX_COUNT => {
                    if kind == ShapeKind::Node {
                        return Err(malformed(
                            id,
                            format!("{} needs a property shape", local(p)),
                        ));
                    }
                    let n = count(o, id, p)?;
                    if p == vocab::sh::MIN_COUNT {
                        Constraint::MinCount(n)
                    } else {
                        Constraint::MaxCount(n)
                    }
                }
                vocab::sh::NODE_KIND => Constraint::NodeKind(node_kind(o, id)?),
                vocab::sh::HAS_VALUE => Constraint::HasValue(o.clone()),
                vocab::sh::IN => {
                    let (members, cells) = self.list(o).map_err(|m| malformed(id, m))?;
                    shape.constraints.push(Constraint::In(members));
                    let mut defining = vec![t.clone()];
                    defining.extend(cells);
                    shape.defining.push(defining);
                    continue;
                }
                vocab::sh::NODE | vocab::sh::PROPERTY => {
                    let child = self.reference(o, id, index, None, pending)?;
                    if p == vocab::sh::NODE {
                        Constraint::Node(child)
                    } else {
                        Constraint::Property(child)
                    }
                }
                vocab::sh::AND | vocab::sh::OR => {
                    let (members, cells) = self.list(o).map_err(|m| malformed(id, m))?;
                    let mut ids = Vec::with_capacity(members.len());
                    for (k, m) in members.iter().enumerate() {
                        ids.push(self.reference(m, id, index, Some(k + 1), pending)?);
                    }
                    shape.constraints.push(if p == vocab::sh::AND {
                        Constraint::And(ids)
                    } else {
                        Constraint::Or(ids)
                    });
                    let mut defining = vec![t.clone()];
                    defining.extend(cells);
                    shape.defining.push(defining);
                    continue;
                }
                vocab::sh::QUALIFIED_VALUE_SHAPE => {
                    if kind == ShapeKind::Node {
                        return Err(malformed(
                            id,
                            "sh:qualifiedValueShape needs a property shape",
                        ));
                    }
                    if qualified.is_some() {
                        return Err(malformed(id, "more than one sh:qualifiedValueShape"));
                    }
                    let child = self.reference(o, id, index, None, pending)?;
                    qualified = Some(Qualified {
                        position: shape.constraints.len(),
                        shape_triple: t.clone(),
                        shape: child,
                        min: None,
                        max: None,
                    });
                    continue;
                }
                vocab::sh::QUALIFIED_MIN_COUNT => {
                    if pending_min.is_some() {
                        return Err(malformed(id, "more than one sh:qualifiedMinCount"));
                    }
                    pending_min = Some((count(o, id, p)?, t.clone()));
                    continue;
                }
                vocab::sh::QUALIFIED_MAX_COUNT => {
                    if pending_max.is_some() {
                        return Err(malformed(id, "more than one sh:qualifiedMaxCount"));
                    }
                    pending_max = Some((count(o, id, p)?, t.clone()));
                    continue;
                }
                "http://www.w3.org/ns/shacl#qualifiedValueShapesDisjoint" => {
                    self.warnings.push(format!(
                        "shape {id}: sh:qualifiedValueShapesDisjoint is ignored"
                    ));
                    continue;
                }
                "http://www.w3.org/ns/shacl#targetSubjectsOf"
                | "http://www.w3.org/ns/shacl#targetObjectsOf" => {
                    self.warnings
                        .push(format!("shape {id}: target {} is not supported", local(p)));
                    continue;
                }
                "http://www.w3.org/ns/shacl#deactivated" => {
                    self.warnings
                        .push(format!("shape {id}: sh:deactivated is ignored"));
                    continue;
                }
                other if other.starts_with(vocab::sh::NS) => {
                    if !METADATA.contains(&local(other)) {
                        self.warnings.push(format!(
                            "shape {id}: unsupported constraint sh:{} is ignored",
                            local(other)
                        ));
                    }
                    continue;
                }
                _ => continue,
            };
            shape.constraints.push(constraint);
            shape.defining.push(vec![t.clone()]);
        }

        match qualified {
            None => {
                if pending_min.is_some() || pending_max.is_some() {
                    return Err(malformed(
                        id,
                        "sh:qualifiedMinCount/sh:qualifiedMaxCount without sh:qualifiedValueShape",
                    ));
                }
            }
            Some(mut q) => {
                q.min = pending_min;
                q.max = pending_max;
                if q.min.is_none() && q.max.is_none() {
                    return Err(malformed(
                        id,
                        "sh:qualifiedValueShape needs sh:qualifiedMinCount or sh:qualifiedMaxCount",
                    ));
                }
                let mut at = q.position;
                if let Some((count, triple)) = q.min {
                    shape.constraints.insert(
                        at,
                        Constraint::QualifiedMin {
                            shape: q.shape.clone(),
                            count,
                        },
                    );
                    shape
                        .defining
                        .insert(at, vec![q.shape_triple.clone(), triple]);
                    at += 1;
                }
                if let Some((count, triple)) = q.max {
                    shape.constraints.insert(
                        at,
                        Constraint::QualifiedMax {
                            shape: q.shape.clone(),
                            count,
                        },
                    );
                    shape
                        .defining
                        .insert(at, vec![q.shape_triple.clone(), triple]);
                }
            }
        }
        Ok(shape)
    }

    /// Members and cell triples of an RDF list.
    fn list(&self, head: &Node) -> Result<(Vec<Node>, Vec<Triple>), String> {
        let first = Self::iri(vocab::rdf::FIRST);
        let rest = Self::iri(vocab::rdf::REST);
        let nil = Node::iri(vocab::rdf::NIL);
        let mut members = Vec::new();
        let mut cells = Vec::new();
        let mut seen = HashSet::new();
        let mut cell = head.clone();
        while cell != nil {
            if !seen.insert(cell.clone()) {
                return Err("cyclic RDF list".into());
            }
            let f: Vec<&Triple> = self.g.with_subject_predicate(&cell, &first).collect();
            let r: Vec<&Triple> = self.g.with_subject_predicate(&cell, &rest).collect();
            if f.len() != 1 || r.len() != 1 {
                return Err(format!("malformed RDF list at {cell}"));
            }
            members.push(f[0].object().clone());
            cells.push(f[0].clone());
            cells.push(r[0].clone());
            cell = r[0].object().clone();
        }
        Ok((members, cells))
    }

    fn check_property_references(&self) -> Result<(), ShaclError> {
        for s in self.shapes.values() {
            for c in &s.constraints {
                if let Constraint::Property(child) = c {
                    if self.shapes[child].kind != ShapeKind::Property {
                        return Err(malformed(
                            &s.id,
                            format!("sh:property value {child} has no sh:path"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn malformed(id: &ShapeId, message: impl Into<String>) -> ShaclError {
    ShaclError::Malformed {
        shape: id.to_string(),
        message: message.into(),
    }
}

fn local(iri: &str) -> &str {
    iri.rsplit(['#', '/']).next().unwrap_or(iri)
}

fn node_iri(node: &Node, id: &ShapeId) -> Result<Iri, ShaclError> {
    node.as_iri()
        .cloned()
        .ok_or_else(|| malformed(id, "an anonymous shape cannot be an rdfs:Class"))
}

fn count(o: &Node, id: &ShapeId, predicate: &str) -> Result<u64, ShaclError> {
    o.as_literal()
        .and_then(|l| l.lexical().trim_start_matches('+').parse::<u64>().ok())
        .ok_or_else(|| {
            malformed(
                id,
                format!(
                    "sh:{} must be a non-negative integer, found {o}",
                    local(predicate)
                ),
            )
        })
}

fn node_kind(o: &Node, id: &ShapeId) -> Result<NodeKind, ShaclError> {
    match o.as_iri().map(Iri::as_str) {
        Some(vocab::sh::IRI) => Ok(NodeKind::Iri),
        Some(vocab::sh::BLANK_NODE) => Ok(NodeKind::Blank),
        Some(vocab::sh::LITERAL) => Ok(NodeKind::Literal),
        _ => Err(malformed(
            id,
            format!("sh:nodeKind {o} is not supported (only sh:IRI, sh:BlankNode and sh:Literal)"),
        )),
    }
}
