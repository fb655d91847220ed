//! Turns normalized VIO products into concrete edits, producing test cases.

mod bundle;
mod mono;
mod namer;

use std::fmt;

use indexmap::IndexSet;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::parallel::Exec;
use crate::rdf::writer::escape_label;
use crate::rdf::{isomorphic, vocab, Compactor, Graph, Iri, Literal, Node, NodeKind, Triple};
use crate::shacl::{subclass_closure, Constraint, Manifest, ShapeId};
use crate::sparql::{apply_update, diff_update, parse_update};
use crate::validator::{has_datatype, is_instance, validate, Evaluator};
use crate::vio::{Plan, TermTarget, VioProduct, VioTerm};

pub use bundle::{read_bundle, write_bundle, Bundle, BundleError, BundleMeta};
pub use mono::{bind_pattern, monomorphism_candidates, shape_pattern};
pub use namer::{
    compact_lines, mint_prompt, DeterministicNamer, LlmNamer, MintRequest, Namer, MINT_PARAM,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Add,
    Remove,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Add => "add",
            Action::Remove => "remove",
        }
    }

    fn flip(self) -> Self {
        match self {
            Action::Add => Action::Remove,
            Action::Remove => Action::Add,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EditOp {
    pub action: Action,
    pub triple: Triple,
}

impl EditOp {
    pub fn add(triple: Triple) -> Self {
        EditOp {
            action: Action::Add,
            triple,
        }
    }

    pub fn remove(triple: Triple) -> Self {
        EditOp {
            action: Action::Remove,
            triple,
        }
    }

    /// Blank nodes are written with the labels bundle files use.
    pub fn to_json(&self) -> Value {
        let t = &self.triple;
        let mut v = json!({
            "action": self.action.name(),
            "s": term_text(t.subject()),
            "p": t.predicate().as_str(),
            "o": term_text(t.object()),
            "o_type": match t.object() {
                Node::Iri(_) => "iri",
                Node::Blank(_) => "blank",
                Node::Literal(_) => "literal",
            },
        });
        if let Node::Literal(l) = t.object() {
            match l.language() {
                Some(lang) => v["lang"] = json!(lang),
                None => v["datatype"] = json!(l.datatype().as_str()),
            }
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<Self, String> {
        let field = |k: &str| {
            v.get(k)
                .and_then(Value::as_str)
                .ok_or_else(|| format!("op is missing \"{k}\""))
        };
        let action = match field("action")? {
            "add" => Action::Add,
            "remove" => Action::Remove,
            other => return Err(format!("unknown action \"{other}\"")),
        };
        let node = |text: &str| match text.strip_prefix("_:") {
            Some(label) => Node::blank(label),
            None => Node::iri(text),
        };
        let o = match field("o_type")? {
            "literal" => {
                let lex = field("o")?;
                Node::Literal(
                    match (
                        v.get("lang").and_then(Value::as_str),
                        v.get("datatype").and_then(Value::as_str),
                    ) {
                        (Some(lang), _) => Literal::lang(lex, lang),
                        (None, Some(dt)) => Literal::typed(lex, Iri::new(dt)),
                        (None, None) => Literal::plain(lex),
                    },
                )
            }
            _ => node(field("o")?),
        };
        let triple =
            Triple::new(node(field("s")?), Iri::new(field("p")?), o).map_err(|e| e.to_string())?;
        Ok(EditOp { action, triple })
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.action.name(), self.triple)
    }
}

fn term_text(n: &Node) -> String {
    match n {
        Node::Iri(iri) => iri.as_str().to_owned(),
        Node::Blank(b) => format!("_:{}", escape_label(b.as_str())),
        Node::Literal(l) => l.lexical().to_owned(),
    }
}

/// An op that cannot be applied: adding a present or removing an absent triple.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot {0}")]
pub struct OpError(pub String);

/// Applies ops in order, enforcing their preconditions.
pub fn apply_ops(g: &Graph, ops: &[EditOp]) -> Result<Graph, OpError> {
    let mut out = g.clone();
    for op in ops {
        let ok = match op.action {
            Action::Add => out.insert(op.triple.clone()),
            Action::Remove => out.remove(&op.triple),
        };
        if !ok {
            return Err(OpError(op.to_string()));
        }
    }
    Ok(out)
}

/// The reversed list with actions flipped.
pub fn invert(ops: &[EditOp]) -> Vec<EditOp> {
    ops.iter()
        .rev()
        .map(|op| EditOp {
            action: op.action.flip(),
            triple: op.triple.clone(),
        })
        .collect()
}

/// A generated repair problem: a conforming graph and its violated copy.
#[derive(Clone, Debug)]
pub struct TestCase {
    pub id: String,
    pub seed: u64,
    pub tree: usize,
    pub path: Vec<u128>,
    pub product: VioProduct,
    /// Per-term provenance for the bundle metadata.
    pub plan: Vec<Value>,
    pub rendered: String,
    pub ops: Vec<EditOp>,
    pub inverse_ops: Vec<EditOp>,
    pub original: Graph,
    pub invalid: Graph,
    pub alpha: usize,
    pub notes: Vec<String>,
}

impl TestCase {
    pub fn meta_json(&self) -> Value {
        let path: Vec<String> = self.path.iter().map(u128::to_string).collect();
        json!({
            "id": self.id,
            "seed": self.seed,
            "plan": self.plan,
            "rendered": self.rendered,
            "tree": self.tree,
            "path": path.join("/"),
            "ops": self.ops.iter().map(EditOp::to_json).collect::<Vec<_>>(),
            "inverse_ops": self.inverse_ops.iter().map(EditOp::to_json).collect::<Vec<_>>(),
            "alpha": self.alpha,
            "files": {
                "original": bundle::ORIGINAL,
                "invalid": bundle::INVALID,
                "manifest": bundle::MANIFEST,
            },
            "notes": self.notes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MaterializeError {
    #[error("plan still contains shape-based terms")]
    NotNormalized,
    #[error("no edit available: {0}")]
    Unmaterializable(String),
    #[error("the edits left the graph conforming")]
    NoViolation,
    #[error("the restoring change cannot be written as a single update")]
    Inexpressible,
}

/// A stable 64-bit FNV-1a hash, used to derive per-plan seeds.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The seed a plan is materialized with under run seed `seed`.
pub fn plan_seed(seed: u64, product: &VioProduct) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(product.canonical().as_bytes());
    fnv1a(&bytes)
}

struct Work<'a> {
    m: &'a Manifest,
    g: Graph,
    ops: Vec<EditOp>,
    rng: ChaCha8Rng,
    namer: &'a mut dyn Namer,
    notes: Vec<String>,
}

impl Work<'_> {
    fn add(&mut self, t: Triple) -> bool {
        if self.g.insert(t.clone()) {
            self.ops.push(EditOp::add(t));
            true
        } else {
            false
        }
    }

    fn remove(&mut self, t: &Triple) -> bool {
        if self.g.remove(t) {
            self.ops.push(EditOp::remove(t.clone()));
            true
        } else {
            false
        }
    }

    /// Removes the description of every blank node that lost its last
    /// incoming edge, since nothing could refer to it again.
    fn drop_orphans(&mut self, original: &Graph) {
        loop {
            let orphans: Vec<Node> = self
                .g
                .subject_nodes()
                .into_iter()
                .filter(|n| {
                    n.is_blank()
                        && self.g.with_object(n).next().is_none()
                        && original.with_object(n).next().is_some()
                })
                .collect();
            if orphans.is_empty() {
                return;
            }
            for n in orphans {
                let outgoing: Vec<Triple> = self.g.with_subject(&n).cloned().collect();
                for t in &outgoing {
                    self.remove(t);
                }
            }
        }
    }

    fn pick<'n, T>(&mut self, items: &'n [T]) -> Option<&'n T> {
        (!items.is_empty()).then(|| &items[self.rng.gen_range(0..items.len())])
    }

    fn mint(
        &mut self,
        exemplar: &Node,
        template: &[Triple],
        example: &[Triple],
        literal: bool,
    ) -> Node {
        let prefixes = self.m.prefixes().clone();
        let req = MintRequest {
            exemplar,
            template,
            example,
            prefixes: &prefixes,
            literal,
        };
        let node = self.namer.mint(&req, &self.g);
        self.notes.extend(self.namer.take_notes());
        node
    }

    /// A literal that is not already an object of `(f, p)` and differs from `avoid`.
    fn fresh_literal(&self, f: &Node, p: &Iri, base: Literal, avoid: &[Node]) -> Node {
        let mut candidate = Node::Literal(base.clone());
        let mut n = 0;
        while avoid.contains(&candidate)
            || self
                .g
                .contains(&Triple::new(f.clone(), p.clone(), candidate.clone()).expect("subject"))
        {
            n += 1;
            let lex = format!("{}_{n}", base.lexical());
            candidate = Node::Literal(match base.explicit_datatype() {
                Some(dt) if dt.as_str() == vocab::xsd::INTEGER => {
                    Literal::typed(format!("{}", n), dt.clone())
                }
                Some(dt) => Literal::typed(lex, dt.clone()),
                None => Literal::plain(lex),
            });
        }
        candidate
    }

    /// Replaces `(f, p, old)` by `(f, p, new)`, or adds the new triple when there is no old value.
    fn replace(&mut self, f: &Node, p: &Iri, old: Option<&Node>, new: Node) {
        if let Some(old) = old {
            self.remove(&Triple::new(f.clone(), p.clone(), old.clone()).expect("subject"));
        }
        if let Ok(t) = Triple::new(f.clone(), p.clone(), new) {
            self.add(t);
        }
    }

    fn term(&mut self, term: &VioTerm) -> Result<(), MaterializeError> {
        let m = self.m;
        match &term.target {
            TermTarget::ValueNode { .. } => Err(MaterializeError::NotNormalized),
            TermTarget::ValueEdge { focus, path, value } => {
                let t = Triple::new(focus.clone(), path.clone(), value.clone())
                    .expect("value edges have node subjects");
                if !self.remove(&t) {
                    self.notes.push(format!("{t} was already absent"));
                }
                Ok(())
            }
            TermTarget::Manifest { shape, index } => {
                let s = m.shape(shape);
                let c = s.constraint(*index);
                if c.is_shape_based() {
                    return Err(MaterializeError::NotNormalized);
                }
                if let Constraint::QualifiedMax { shape: q, count } = c {
                    return self.qualified_max(shape, q, *count, &term.focus);
                }
                let Some(f) = self.pick(&term.focus).cloned() else {
                    return Err(MaterializeError::Unmaterializable("empty focus set".into()));
                };
                let values = s.value_nodes(&f, &self.g);
                let path = s.path.clone();
                match c {
                    Constraint::Class(class) => self.class(&f, path.as_ref(), &values, class),
                    Constraint::MinCount(n) => {
                        let p = path.expect("count constraints sit on property shapes");
                        let k = (values.len() as u64 + 1).saturating_sub(*n) as usize;
                        if k == 0 {
                            self.notes
                                .push(format!("sh:minCount {n} on {f} was already violated"));
                            return Ok(());
                        }
                        let mut picked =
                            sample(&mut self.rng, values.len(), k.min(values.len())).into_vec();
                        picked.sort_unstable();
                        for i in picked {
                            self.remove(
                                &Triple::new(f.clone(), p.clone(), values[i].clone())
                                    .expect("subject"),
                            );
                        }
                        Ok(())
                    }
                    Constraint::MaxCount(n) => {
                        let p = path.expect("count constraints sit on property shapes");
                        let needed = (*n + 1).saturating_sub(values.len() as u64);
                        let exemplar = values
                            .first()
                            .cloned()
                            .or_else(|| {
                                self.g
                                    .iter()
                                    .find(|t| t.predicate() == &p)
                                    .map(|t| t.object().clone())
                            })
                            .unwrap_or_else(|| f.clone());
                        let literal = exemplar.is_literal();
                        for _ in 0..needed {
                            let x = self.mint(&exemplar, &[], &[], literal);
                            self.add(Triple::new(f.clone(), p.clone(), x).expect("subject"));
                        }
                        Ok(())
                    }
                    Constraint::Datatype(dt) => {
                        let p = path.ok_or_else(|| {
                            MaterializeError::Unmaterializable("sh:datatype on a node shape".into())
                        })?;
                        let good: Vec<Node> = values
                            .iter()
                            .filter(|v| has_datatype(v, dt))
                            .cloned()
                            .collect();
                        let old = self.pick(&good).cloned();
                        let base = if dt.as_str() == vocab::xsd::STRING {
                            Literal::typed("0", Iri::new(vocab::xsd::INTEGER))
                        } else {
                            Literal::plain("placeholder")
                        };
                        let new = self.fresh_literal(&f, &p, base, &[]);
                        self.replace(&f, &p, old.as_ref(), new);
                        Ok(())
                    }
                    Constraint::NodeKind(kind) => {
                        let p = path.ok_or_else(|| {
                            MaterializeError::Unmaterializable("sh:nodeKind on a node shape".into())
                        })?;
                        let good: Vec<Node> = values
                            .iter()
                            .filter(|v| v.kind() == *kind)
                            .cloned()
                            .collect();
                        let old = self.pick(&good).cloned();
                        let new = match kind {
                            NodeKind::Literal => self.mint(&f, &[], &[], false),
                            _ => self.fresh_literal(&f, &p, Literal::plain("placeholder"), &[]),
                        };
                        self.replace(&f, &p, old.as_ref(), new);
                        Ok(())
                    }
                    Constraint::HasValue(x) => {
                        let p = path.ok_or_else(|| {
                            MaterializeError::Unmaterializable("sh:hasValue on a node shape".into())
                        })?;
                        if !self.remove(&Triple::new(f.clone(), p, x.clone()).expect("subject")) {
                            self.notes
                                .push(format!("sh:hasValue on {f} was already violated"));
                        }
                        Ok(())
                    }
                    Constraint::In(list) => {
                        let p = path.ok_or_else(|| {
                            MaterializeError::Unmaterializable("sh:in on a node shape".into())
                        })?;
                        let x = self.fresh_literal(&f, &p, Literal::plain("placeholder"), list);
                        self.add(Triple::new(f.clone(), p, x).expect("subject"));
                        Ok(())
                    }
                    _ => unreachable!("shape-based and qualified constraints handled above"),
                }
            }
        }
    }

    fn class(
        &mut self,
        f: &Node,
        path: Option<&Iri>,
        values: &[Node],
        class: &Iri,
    ) -> Result<(), MaterializeError> {
        if values.is_empty() {
            let p = path.expect("a node shape always has its focus as value");
            let literals: Vec<Node> = self
                .g
                .iter()
                .filter(|t| t.object().is_literal())
                .map(|t| t.object().clone())
                .collect::<IndexSet<Node>>()
                .into_iter()
                .collect();
            let lit = match self.pick(&literals) {
                Some(l) => l.clone(),
                None => {
                    self.notes
                        .push("no literal in the graph; added the literal \"placeholder\"".into());
                    Node::literal("placeholder")
                }
            };
            self.add(Triple::new(f.clone(), p.clone(), lit).expect("subject"));
            return Ok(());
        }
        let members: Vec<Node> = values
            .iter()
            .filter(|v| is_instance(v, class, &self.g))
            .cloned()
            .collect();
        let Some(v) = self.pick(&members).cloned() else {
            self.notes
                .push(format!("sh:class {class} on {f} was already violated"));
            return Ok(());
        };
        // drop every type triple that makes v an instance
        let (classes, _) = subclass_closure(class, &self.g);
        let typed: Vec<Triple> = self
            .g
            .type_triples(&v)
            .filter(|t| t.object().as_iri().is_some_and(|o| classes.contains(o)))
            .cloned()
            .collect();
        for t in typed {
            self.remove(&t);
        }
        Ok(())
    }

    /// Adds enough conforming values to `f`'s property to exceed the maximum,
    /// picking the focus that needs the fewest additions.
    fn qualified_max(
        &mut self,
        s: &ShapeId,
        q: &ShapeId,
        count: u64,
        focus: &[Node],
    ) -> Result<(), MaterializeError> {
        let m = self.m;
        let shape = m.shape(s);
        let p = shape
            .path
            .clone()
            .expect("qualified constraints sit on property shapes");
        let (f, psi, values) = {
            let ev = Evaluator::new(&self.g, m);
            let mut best: Option<(Node, Vec<Node>, Vec<Node>)> = None;
            for f in focus {
                let values = shape.value_nodes(f, &self.g);
                let psi: Vec<Node> = values
                    .iter()
                    .filter(|v| ev.eval(v, q).conforms())
                    .cloned()
                    .collect();
                if best.as_ref().is_none_or(|b| psi.len() > b.1.len()) {
                    best = Some((f.clone(), psi, values));
                }
            }
            best.ok_or_else(|| MaterializeError::Unmaterializable("empty focus set".into()))?
        };
        let needed = (count + 1).saturating_sub(psi.len() as u64) as usize;
        let exclude: IndexSet<Node> = values.iter().cloned().collect();
        let candidates = monomorphism_candidates(q, &self.g, m, &exclude);
        let full: Vec<Node> = candidates
            .iter()
            .filter(|(_, missing)| missing.is_empty())
            .map(|(n, _)| n.clone())
            .filter(|n| Evaluator::new(&self.g, m).eval(n, q).conforms())
            .collect();
        let mut chosen: Vec<Node> = full.iter().take(needed).cloned().collect();
        if chosen.len() < needed {
            let exemplar = psi.first().or(full.first()).cloned().ok_or_else(|| {
                MaterializeError::Unmaterializable(format!(
                    "no node conforms to {q} to model a new value on"
                ))
            })?;
            let example: Vec<Triple> = {
                let ev = Evaluator::new(&self.g, m);
                let eval = ev.eval(&exemplar, q);
                eval.consulted()
                    .iter()
                    .filter(|t| t.subject() == &exemplar)
                    .cloned()
                    .collect()
            };
            let param = Node::iri(MINT_PARAM);
            let template: Vec<Triple> = example
                .iter()
                .map(|t| {
                    t.map_nodes(|n| {
                        if n == &exemplar {
                            param.clone()
                        } else {
                            n.clone()
                        }
                    })
                })
                .collect();
            while chosen.len() < needed {
                let x = self.mint(&exemplar, &template, &example, false);
                for t in bind_pattern(&template, &x) {
                    self.add(t);
                }
                chosen.push(x);
            }
        }
        for v in chosen {
            self.add(Triple::new(f.clone(), p.clone(), v).expect("subject"));
        }
        Ok(())
    }
}

/// Materializes one normalized product on a copy of `g`.
pub fn materialize(
    product: &VioProduct,
    g: &Graph,
    m: &Manifest,
    seed: u64,
    namer: &mut dyn Namer,
) -> Result<TestCase, MaterializeError> {
    if !product.is_normalized(m) {
        return Err(MaterializeError::NotNormalized);
    }
    let mut work = Work {
        m,
        g: g.clone(),
        ops: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        namer,
        notes: Vec::new(),
    };
    for term in product.terms() {
        work.term(term)?;
    }
    work.drop_orphans(g);
    let report = validate(&work.g, m);
    if report.conforms() {
        return Err(MaterializeError::NoViolation);
    }
    if !restorable(&work.g, g, m) {
        return Err(MaterializeError::Inexpressible);
    }
    let c = Compactor::new(m.prefixes());
    let inverse_ops = invert(&work.ops);
    Ok(TestCase {
        id: String::new(),
        seed,
        tree: 0,
        path: Vec::new(),
        product: product.clone(),
        plan: product.terms().iter().map(|t| t.to_json(m, &c)).collect(),
        rendered: product.render(m, &c),
        ops: work.ops,
        inverse_ops,
        original: g.clone(),
        invalid: work.g,
        alpha: report.len(),
        notes: work.notes,
    })
}

/// Whether one update statement turns `invalid` back into `original`.
fn restorable(invalid: &Graph, original: &Graph, m: &Manifest) -> bool {
    let text = diff_update(invalid, original, m.prefixes());
    parse_update(&text)
        .ok()
        .and_then(|u| apply_update(invalid, &u).ok())
        .is_some_and(|g| isomorphic(&g, original))
}

/// A plan that could not become a test case.
#[derive(Clone, Debug)]
pub struct Dropped {
    pub rendered: String,
    pub reason: String,
}

/// Materializes collected plans with per-plan seeds, drops failures and
/// duplicates, and numbers the survivors `case_0001`, `case_0002`, ...
pub fn materialize_plans(
    plans: &[Plan],
    g: &Graph,
    m: &Manifest,
    seed: u64,
    namer: &(dyn Fn() -> Box<dyn Namer> + Sync),
    exec: Exec,
) -> (Vec<TestCase>, Vec<Dropped>) {
    let c = Compactor::new(m.prefixes());
    let results = exec.map(plans, |plan| {
        let plan_seed = plan_seed(seed, &plan.product);
        let mut n = namer();
        materialize(&plan.product, g, m, plan_seed, n.as_mut()).map(|mut case| {
            case.tree = plan.tree;
            case.path = plan.path.clone();
            case
        })
    });
    let mut cases = Vec::new();
    let mut dropped = Vec::new();
    for (plan, r) in plans.iter().zip(results) {
        match r {
            Ok(case) => cases.push(case),
            Err(e) => dropped.push(Dropped {
                rendered: plan.render(m, &c),
                reason: e.to_string(),
            }),
        }
    }
    let (mut kept, dups) = dedupe(cases);
    dropped.extend(dups.into_iter().map(|case| Dropped {
        rendered: case.rendered,
        reason: "duplicate of an earlier case".into(),
    }));
    for (i, case) in kept.iter_mut().enumerate() {
        case.id = format!("case_{:04}", i + 1);
    }
    (kept, dropped)
}

/// Keeps the first of every group of cases with the same plan and
/// isomorphic invalid graphs.
pub fn dedupe(cases: Vec<TestCase>) -> (Vec<TestCase>, Vec<TestCase>) {
    let mut kept: Vec<TestCase> = Vec::new();
    let mut dropped = Vec::new();
    for case in cases {
        let key = case.product.canonical();
        let dup = kept
            .iter()
            .any(|k| k.product.canonical() == key && isomorphic(&k.invalid, &case.invalid));
        if dup {
            dropped.push(case);
        } else {
            kept.push(case);
        }
    }
    (kept, dropped)
}
