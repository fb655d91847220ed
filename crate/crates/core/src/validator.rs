//! SHACL core validation over the supported constraints, with per-result
//! provenance (the triples read while producing each result).

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;

use indexmap::{IndexMap, IndexSet};
use serde_json::{json, Value};

use crate::parallel::Exec;
use crate::rdf::{vocab, Compactor, Graph, Iri, Literal, Node, NodeKind, PrefixMap, Triple};
use crate::shacl::{Constraint, ConstraintKind, Manifest, Shape, ShapeId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationResult {
    pub source_shape: ShapeId,
    pub constraint_index: usize,
    pub focus: Node,
    /// The offending value node for per-value components.
    pub value: Option<Node>,
    pub path: Option<Iri>,
    pub component: ConstraintKind,
    pub message: String,
    /// Graph triples read while validating `focus` against the source shape,
    /// plus the triples that made it a focus.
    pub touched: IndexSet<Triple>,
}

impl ValidationResult {
    pub fn to_json(&self) -> Value {
        json!({
            "source_shape": self.source_shape.as_str(),
            "constraint_index": self.constraint_index,
            "component": self.component.component(),
            "focus": self.focus.to_string(),
            "path": self.path.as_ref().map(|p| p.as_str()),
            "value": self.value.as_ref().map(|v| v.to_string()),
            "message": self.message,
            "touched": self.touched.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        })
    }
}

/// `Γ(G, S)`: conforms iff there are no results.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    results: Vec<ValidationResult>,
}

impl Report {
    pub fn conforms(&self) -> bool {
        self.results.is_empty()
    }

    pub fn results(&self) -> &[ValidationResult] {
        &self.results
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    /// Human-readable report in the usual SHACL text layout.
    pub fn render_text(&self, c: &Compactor) -> String {
        let mut out = String::from("Validation Report\n");
        if self.conforms() {
            out.push_str("Conforms: True\n");
            return out;
        }
        let _ = writeln!(out, "Conforms: False\nResults ({}):", self.results.len());
        for r in &self.results {
            let _ = writeln!(out, "Constraint Violation in {}:", r.component.component());
            let _ = writeln!(out, "    Source Shape: {}", c.iri(r.source_shape.iri()));
            let _ = writeln!(out, "    Focus Node: {}", c.node(&r.focus));
            if let Some(v) = &r.value {
                let _ = writeln!(out, "    Value Node: {}", c.node(v));
            }
            if let Some(p) = &r.path {
                let _ = writeln!(out, "    Result Path: {}", c.iri(p));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "conforms": self.conforms(),
            "results": self.results.iter().map(ValidationResult::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Manifest prefixes followed by graph prefixes under names not yet taken.
pub fn merged_prefixes(m: &Manifest, g: &Graph) -> PrefixMap {
    let mut out = m.prefixes().clone();
    for (k, v) in g.prefixes() {
        out.entry(k.clone()).or_insert_with(|| v.clone());
    }
    out
}

pub fn validate(g: &Graph, m: &Manifest) -> Report {
    validate_with(g, m, Exec::default())
}

/// Validates every target of every shape; `exec` chooses how (shape, focus)
/// pairs are spread over threads. The result does not depend on it.
pub fn validate_with(g: &Graph, m: &Manifest, exec: Exec) -> Report {
    let mut tasks: Vec<(&Shape, Node)> = Vec::new();
    for id in m.dependency_order() {
        let shape = m.shape(id);
        tasks.extend(shape.target_nodes(g).into_iter().map(|f| (shape, f)));
    }
    let batches = exec.map(&tasks, |(shape, focus)| {
        let ev = Evaluator::new(g, m);
        let targeting = shape.targeting_triples(focus, g);
        ev.eval(focus, &shape.id)
            .results
            .iter()
            .map(|(_, r)| {
                let mut r = r.clone();
                r.touched.extend(targeting.iter().cloned());
                r
            })
            .collect::<Vec<_>>()
    });
    let mut merged: IndexMap<(ShapeId, usize, Node, Option<Node>), ValidationResult> =
        IndexMap::new();
    for r in batches.into_iter().flatten() {
        let key = (
            r.source_shape.clone(),
            r.constraint_index,
            r.focus.clone(),
            r.value.clone(),
        );
        match merged.get_mut(&key) {
            Some(existing) => existing.touched.extend(r.touched),
            None => {
                merged.insert(key, r);
            }
        }
    }
    let position: HashMap<&ShapeId, usize> = m
        .dependency_order()
        .iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let mut results: Vec<ValidationResult> = merged.into_values().collect();
    results.sort_by(|a, b| {
        (
            position[&a.source_shape],
            &a.focus,
            a.constraint_index,
            &a.value,
        )
            .cmp(&(
                position[&b.source_shape],
                &b.focus,
                b.constraint_index,
                &b.value,
            ))
    });
    Report { results }
}

/// `Γ(v, κ_s^i)`: the results constraint `index` of `shape` produces for
/// `focus`. Empty iff the focus satisfies the constraint. Property constraints
/// report the nested shape's results.
pub fn check_constraint(
    focus: &Node,
    shape: &ShapeId,
    index: usize,
    g: &Graph,
    m: &Manifest,
) -> Vec<ValidationResult> {
    Evaluator::new(g, m)
        .eval(focus, shape)
        .results
        .iter()
        .filter(|(i, _)| *i == index)
        .map(|(_, r)| r.clone())
        .collect()
}

/// Whether `node` conforms to `shape`.
pub fn conforms(node: &Node, shape: &ShapeId, g: &Graph, m: &Manifest) -> bool {
    Evaluator::new(g, m).eval(node, shape).conforms()
}

/// `ψ_q(f)`: the value nodes of `focus` under `s` that conform to `q`, in graph order.
pub fn conforming_values(
    q: &ShapeId,
    s: &Shape,
    focus: &Node,
    g: &Graph,
    m: &Manifest,
) -> Vec<Node> {
    let ev = Evaluator::new(g, m);
    s.value_nodes(focus, g)
        .into_iter()
        .filter(|v| ev.eval(v, q).conforms())
        .collect()
}

/// Outcome of validating one node against one shape.
#[derive(Debug)]
pub struct ShapeEval {
    /// Each result with the index of the constraint of the evaluated shape
    /// that produced it.
    results: Vec<(usize, ValidationResult)>,
    consulted: IndexSet<Triple>,
}

impl ShapeEval {
    pub fn conforms(&self) -> bool {
        self.results.is_empty()
    }

    pub fn results(&self) -> impl Iterator<Item = &ValidationResult> {
        self.results.iter().map(|(_, r)| r)
    }

    /// Every graph triple read during the evaluation.
    pub fn consulted(&self) -> &IndexSet<Triple> {
        &self.consulted
    }
}

/// Memoizing evaluator for one graph and manifest. Not shared across threads.
pub struct Evaluator<'a> {
    g: &'a Graph,
    m: &'a Manifest,
    cache: RefCell<HashMap<(Node, ShapeId), Rc<ShapeEval>>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(g: &'a Graph, m: &'a Manifest) -> Self {
        Evaluator {
            g,
            m,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn graph(&self) -> &'a Graph {
        self.g
    }

    pub fn manifest(&self) -> &'a Manifest {
        self.m
    }

    pub fn eval(&self, focus: &Node, shape: &ShapeId) -> Rc<ShapeEval> {
        let key = (focus.clone(), shape.clone());
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Rc::clone(hit);
        }
        let out = Rc::new(self.compute(focus, self.m.shape(shape)));
        self.cache.borrow_mut().insert(key, Rc::clone(&out));
        out
    }

    fn compute(&self, focus: &Node, shape: &Shape) -> ShapeEval {
        let g = self.g;
        let mut consulted: IndexSet<Triple> = shape.path_triples(focus, g).into_iter().collect();
        let values = shape.value_nodes(focus, g);
        let mut direct: Vec<(usize, Option<Node>, String)> = Vec::new();
        let mut nested: Vec<(usize, ValidationResult)> = Vec::new();
        let on = || match &shape.path {
            Some(p) => format!("{focus}->{}", Node::Iri(p.clone())),
            None => focus.to_string(),
        };

        for (i, c) in shape.constraints.iter().enumerate() {
            match c {
                Constraint::Class(class) => {
                    for v in &values {
                        if !self.instance_of(v, class, &mut consulted) {
                            direct.push((
                                i,
                                Some(v.clone()),
                                format!(
                                    "Value {v} does not have class {}",
                                    Node::Iri(class.clone())
                                ),
                            ));
                        }
                    }
                }
                Constraint::Datatype(dt) => {
                    for v in values.iter().filter(|v| !has_datatype(v, dt)) {
                        direct.push((
                            i,
                            Some(v.clone()),
                            format!(
                                "Value {v} is not a literal with datatype {}",
                                Node::Iri(dt.clone())
                            ),
                        ));
                    }
                }
                Constraint::NodeKind(kind) => {
                    for v in values.iter().filter(|v| v.kind() != *kind) {
                        direct.push((
                            i,
                            Some(v.clone()),
                            format!("Value {v} is not of node kind {}", kind_name(*kind)),
                        ));
                    }
                }
                Constraint::HasValue(x) => {
                    if !values.contains(x) {
                        direct.push((i, None, format!("{} does not have value {x}", on())));
                    }
                }
                Constraint::In(list) => {
                    for v in values.iter().filter(|v| !list.contains(v)) {
                        direct.push((
                            i,
                            Some(v.clone()),
                            format!("Value {v} is not in the allowed list"),
                        ));
                    }
                }
                Constraint::MinCount(n) => {
                    if (values.len() as u64) < *n {
                        direct.push((i, None, format!("Less than {n} values on {}", on())));
                    }
                }
                Constraint::MaxCount(n) => {
                    if (values.len() as u64) > *n {
                        direct.push((i, None, format!("More than {n} values on {}", on())));
                    }
                }
                Constraint::Node(target) => {
                    for v in &values {
                        let e = self.eval(v, target);
                        consulted.extend(e.consulted.iter().cloned());
                        if !e.conforms() {
                            direct.push((
                                i,
                                Some(v.clone()),
                                format!("Value {v} does not conform to shape {target}"),
                            ));
                        }
                    }
                }
                Constraint::Property(p) => {
                    for v in &values {
                        let e = self.eval(v, p);
                        consulted.extend(e.consulted.iter().cloned());
                        let link: Vec<Triple> = match &shape.path {
                            Some(path) => g
                                .with_subject_predicate(focus, path)
                                .filter(|t| t.object() == v)
                                .cloned()
                                .collect(),
                            None => Vec::new(),
                        };
                        for (_, r) in &e.results {
                            let mut r = r.clone();
                            r.touched.extend(link.iter().cloned());
                            nested.push((i, r));
                        }
                    }
                }
                Constraint::And(members) | Constraint::Or(members) => {
                    let is_and = matches!(c, Constraint::And(_));
                    for v in &values {
                        let mut passed = 0;
                        for s in members {
                            let e = self.eval(v, s);
                            consulted.extend(e.consulted.iter().cloned());
                            passed += usize::from(e.conforms());
                        }
                        let ok = if is_and {
                            passed == members.len()
                        } else {
                            passed > 0
                        };
                        if !ok {
                            let which = if is_and { "all" } else { "any" };
                            direct.push((
                                i,
                                Some(v.clone()),
                                format!(
                                    "Value {v} does not conform to {which} of the listed shapes"
                                ),
                            ));
                        }
                    }
                }
                Constraint::QualifiedMin { shape: q, count }
                | Constraint::QualifiedMax { shape: q, count } => {
                    let mut conforming = 0u64;
                    for v in &values {
                        let e = self.eval(v, q);
                        consulted.extend(e.consulted.iter().cloned());
                        conforming += u64::from(e.conforms());
                    }
                    let is_min = matches!(c, Constraint::QualifiedMin { .. });
                    if is_min && conforming < *count {
                        direct.push((
                            i,
                            None,
                            format!(
                                "{} has {conforming} values conforming to {q}, fewer than {count}",
                                on()
                            ),
                        ));
                    } else if !is_min && conforming > *count {
                        direct.push((
                            i,
                            None,
                            format!(
                                "{} has {conforming} values conforming to {q}, more than {count}",
                                on()
                            ),
                        ));
                    }
                }
            }
        }

        let mut results: Vec<(usize, ValidationResult)> = direct
            .into_iter()
            .map(|(i, value, message)| {
                (
                    i,
                    ValidationResult {
                        source_shape: shape.id.clone(),
                        constraint_index: i,
                        focus: focus.clone(),
                        value,
                        path: shape.path.clone(),
                        component: shape.constraints[i].kind(),
                        message,
                        touched: consulted.clone(),
                    },
                )
            })
            .collect();
        results.extend(nested);
        results.sort_by_key(|(i, _)| *i);
        ShapeEval { results, consulted }
    }

    fn instance_of(&self, v: &Node, class: &Iri, consulted: &mut IndexSet<Triple>) -> bool {
        instance_check(self.g, v, class, consulted)
    }
}

/// SHACL instance check through `rdfs:subClassOf`.
pub fn is_instance(v: &Node, class: &Iri, g: &Graph) -> bool {
    instance_check(g, v, class, &mut IndexSet::new())
}

/// Instance check that records every type and subclass triple it reads.
fn instance_check(g: &Graph, v: &Node, class: &Iri, consulted: &mut IndexSet<Triple>) -> bool {
    let sub = Iri::new(vocab::rdfs::SUB_CLASS_OF);
    let mut frontier: IndexSet<Iri> = IndexSet::new();
    for t in g.type_triples(v) {
        consulted.insert(t.clone());
        if let Some(c) = t.object().as_iri() {
            frontier.insert(c.clone());
        }
    }
    let mut i = 0;
    let mut found = false;
    while i < frontier.len() {
        if &frontier[i] == class {
            found = true;
        }
        let current = Node::Iri(frontier[i].clone());
        let supers: Vec<Triple> = g.with_subject_predicate(&current, &sub).cloned().collect();
        for t in supers {
            if let Some(c) = t.object().as_iri() {
                frontier.insert(c.clone());
            }
            consulted.insert(t);
        }
        i += 1;
    }
    found
}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Iri => "sh:IRI",
        NodeKind::Blank => "sh:BlankNode",
        NodeKind::Literal => "sh:Literal",
    }
}

/// Whether `v` is a well-formed literal of datatype `dt`.
pub fn has_datatype(v: &Node, dt: &Iri) -> bool {
    match v {
        Node::Literal(lit) => &lit.datatype() == dt && well_formed(lit),
        _ => false,
    }
}

/// Lexical-form check for the common XSD types; other datatypes are trusted.
fn well_formed(lit: &Literal) -> bool {
    let lex = lit.lexical();
    let unsigned = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let signed = |s: &str| unsigned(s.strip_prefix(['+', '-']).unwrap_or(s));
    match lit.datatype().as_str() {
        vocab::xsd::INTEGER => signed(lex),
        vocab::xsd::DECIMAL => {
            let body = lex.strip_prefix(['+', '-']).unwrap_or(lex);
            match body.split_once('.') {
                Some((a, b)) => {
                    (!a.is_empty() || !b.is_empty())
                        && (a.is_empty() || unsigned(a))
                        && (b.is_empty() || unsigned(b))
                }
                None => unsigned(body),
            }
        }
        vocab::xsd::BOOLEAN => matches!(lex, "true" | "false" | "1" | "0"),
        vocab::xsd::DOUBLE | "http://www.w3.org/2001/XMLSchema#float" => {
            matches!(lex, "INF" | "-INF" | "+INF" | "NaN")
                || (lex.parse::<f64>().is_ok() && !lex.contains(['i', 'I', 'n', 'N']))
        }
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ex, running_graph, running_manifest, shape};
    use crate::rdf::parse_turtle;

    fn type_triple(s: &str, c: &str) -> Triple {
        Triple::new(ex(s), Iri::new(vocab::rdf::TYPE), ex(c)).unwrap()
    }

    #[test]
    fn running_example_conforms() {
        let m = running_manifest();
        assert!(validate(&running_graph(), &m).conforms());
    }

    #[test]
    fn empty_graph_still_has_the_node_target() {
        // sh:targetNode selects ex:Dan whether or not the graph mentions it
        let report = validate(&Graph::new(), &running_manifest());
        assert_eq!(report.len(), 2);
        assert!(report.results().iter().all(|r| r.focus == ex("Dan")));
        let class_only = crate::shacl::parse_manifest_turtle(
            "@prefix sh: <http://www.w3.org/ns/shacl#> . @prefix ex: <http://example.org/> .
             ex:S a sh:NodeShape ; sh:targetClass ex:Paper ; sh:class ex:Thing .",
        )
        .unwrap();
        assert!(validate(&Graph::new(), &class_only).conforms());
    }

    #[test]
    fn conforming_values_of_the_running_example() {
        let m = running_manifest();
        let g = running_graph();
        let s = m.shape(&shape("ReviewedByShape"));
        let q = shape("ReviewerShape");
        assert_eq!(
            conforming_values(&q, s, &ex("PaperABC"), &g, &m),
            [ex("Alice"), ex("Bob")]
        );
        assert_eq!(
            conforming_values(&q, s, &ex("PaperA"), &g, &m),
            [ex("Alice")]
        );
        assert!(conforming_values(&q, s, &ex("Clark"), &g, &m).is_empty());
    }

    #[test]
    fn clark_is_not_a_professor() {
        let m = running_manifest();
        let g = running_graph();
        let r = check_constraint(&ex("Clark"), &shape("ReviewerShape"), 0, &g, &m);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].component, ConstraintKind::Class);
        assert!(check_constraint(&ex("PaperA"), &shape("ReviewedByShape"), 0, &g, &m).is_empty());
    }

    #[test]
    fn report_after_removing_a_committee_membership_and_a_reviewer() {
        let m = running_manifest();
        let mut g = running_graph();
        g.remove(&type_triple("Alice", "CommitteeMember"));
        g.remove(
            &Triple::new(
                ex("PaperABC"),
                Iri::new("http://example.org/reviewedBy"),
                ex("Bob"),
            )
            .unwrap(),
        );
        let report = validate(&g, &m);
        let text = report.render_text(&Compactor::new(&merged_prefixes(&m, &g)));
        assert_eq!(
            text,
            "Validation Report\nConforms: False\nResults (2):\n\
             Constraint Violation in QualifiedMinCountConstraintComponent:\n    Source Shape: :ReviewedByShape\n    Focus Node: ex:PaperA\n    Result Path: ex:reviewedBy\n\
             Constraint Violation in QualifiedMinCountConstraintComponent:\n    Source Shape: :ReviewedByShape\n    Focus Node: ex:PaperABC\n    Result Path: ex:reviewedBy\n"
        );
        let abc = report
            .results()
            .iter()
            .find(|r| r.focus == ex("PaperABC"))
            .unwrap();
        assert!(abc.touched.contains(&type_triple("PaperABC", "Paper")));
        assert!(abc.touched.contains(&type_triple("Clark", "Student")));
        assert!(!abc
            .touched
            .iter()
            .any(|t| t.predicate().as_str().ends_with("author")));
        assert_eq!(report.to_json()["results"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn subclasses_count_as_instances() {
        let m = crate::shacl::parse_manifest_turtle(
            "@prefix sh: <http://www.w3.org/ns/shacl#> . @prefix ex: <http://example.org/> .
             ex:S a sh:NodeShape ; sh:targetClass ex:Person ; sh:class ex:Agent .",
        )
        .unwrap();
        let g = parse_turtle(
            "@prefix ex: <http://example.org/> . @prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
             ex:Student rdfs:subClassOf ex:Person . ex:Person rdfs:subClassOf ex:Agent .
             ex:a a ex:Student . ex:b a ex:Person .",
        )
        .unwrap();
        let s = m.shape(&ShapeId::new("http://example.org/S"));
        assert_eq!(s.target_nodes(&g).len(), 2);
        assert!(validate(&g, &m).conforms());
    }

    #[test]
    fn literal_forms() {
        let int = Iri::new(vocab::xsd::INTEGER);
        assert!(has_datatype(
            &Node::typed_literal("-12", vocab::xsd::INTEGER),
            &int
        ));
        assert!(!has_datatype(
            &Node::typed_literal("1.5", vocab::xsd::INTEGER),
            &int
        ));
        assert!(!has_datatype(&Node::literal("12"), &int));
        assert!(has_datatype(
            &Node::literal("x"),
            &Iri::new(vocab::xsd::STRING)
        ));
    }
}
