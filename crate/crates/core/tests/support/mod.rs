//! Random non-recursive manifests with a data graph built to conform to them.
//!
//! Shapes form a tree of depth at most four. Every property shape gets its own
//! predicate, so building one node against several shapes never mixes value
//! counts. Graphs are built top-down: each (node, shape) pair is satisfied once.

#![allow(dead_code)]

use std::collections::HashSet;

use kgrepair::rdf::{parse_turtle, Graph};
use kgrepair::shacl::{parse_manifest_turtle, Manifest};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PREFIXES: &str = "@prefix sh: <http://www.w3.org/ns/shacl#> .
@prefix ex: <http://example.org/> .
@prefix s: <http://example.org/shapes#> .
@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .
@prefix rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#> .
@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .
";

pub const MAX_DEPTH: usize = 4;
pub const MAX_TRIPLES: usize = 200;
const CLASSES: usize = 5;

#[derive(Clone, Copy, Debug)]
enum LitKind {
    Str,
    Int,
    Lang,
}

impl LitKind {
    fn datatype(self) -> &'static str {
        match self {
            LitKind::Str => "xsd:string",
            LitKind::Int => "xsd:integer",
            LitKind::Lang => "rdf:langString",
        }
    }

    fn pool(self) -> Vec<String> {
        (0..4)
            .map(|i| match self {
                LitKind::Str => format!("\"v{i}\""),
                LitKind::Int => format!("{i}"),
                LitKind::Lang => format!("\"w{i}\"@en"),
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
enum Values {
    Lit {
        kind: LitKind,
        datatype: bool,
        node_kind: Option<&'static str>,
        in_list: Option<Vec<String>>,
        has_value: Option<String>,
    },
    Res {
        blank: bool,
        node_kind: Option<&'static str>,
        classes: Vec<usize>,
        node: Option<usize>,
        and: Option<Vec<usize>>,
        or: Option<Vec<usize>>,
        qualified: Option<(usize, Option<usize>, Option<usize>)>,
        has_value: Option<String>,
        in_list: Option<Vec<String>>,
    },
}

#[derive(Clone, Debug)]
enum Def {
    Node {
        target: Option<String>,
        classes: Vec<usize>,
        props: Vec<usize>,
        node: Option<usize>,
        and: Option<Vec<usize>>,
        or: Option<Vec<usize>>,
    },
    Prop {
        inline: bool,
        pred: usize,
        lo: usize,
        hi: usize,
        min: Option<usize>,
        max: Option<usize>,
        values: Values,
    },
}

struct Gen {
    rng: ChaCha8Rng,
    defs: Vec<Def>,
    preds: usize,
}

impl Gen {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn classes(&mut self, max: usize) -> Vec<usize> {
        let n = self.rng.gen_range(0..=max);
        let mut all: Vec<usize> = (0..CLASSES).collect();
        all.shuffle(&mut self.rng);
        all.truncate(n);
        all
    }

    fn push(&mut self, d: Def) -> usize {
        self.defs.push(d);
        self.defs.len() - 1
    }

    fn node_shape(&mut self, depth: usize, target: Option<String>) -> usize {
        let deeper = depth + 1 < MAX_DEPTH;
        let mut classes = self.classes(2);
        let mut props = Vec::new();
        let (mut node, mut and, mut or) = (None, None, None);
        if deeper {
            for _ in 0..self.rng.gen_range(0..=2) {
                props.push(self.prop_shape(depth + 1));
            }
            if self.chance(0.2) {
                node = Some(self.node_shape(depth + 1, None));
            }
            if self.chance(0.15) {
                and = Some(vec![
                    self.node_shape(depth + 1, None),
                    self.node_shape(depth + 1, None),
                ]);
            }
            if self.chance(0.15) {
                or = Some(vec![
                    self.node_shape(depth + 1, None),
                    self.node_shape(depth + 1, None),
                ]);
            }
        }
        if classes.is_empty() && props.is_empty() && node.is_none() && and.is_none() && or.is_none()
        {
            classes.push(self.rng.gen_range(0..CLASSES));
        }
        self.push(Def::Node {
            target,
            classes,
            props,
            node,
            and,
            or,
        })
    }

    fn prop_shape(&mut self, depth: usize) -> usize {
        let pred = self.preds;
        self.preds += 1;
        let lo = self.rng.gen_range(0..=2);
        let hi = self.rng.gen_range(lo.max(1)..=2);
        let min = (lo > 0 || self.chance(0.2))
            .then_some(lo)
            .filter(|_| self.chance(0.8));
        let max = self.chance(0.5).then_some(hi);
        let deeper = depth + 1 < MAX_DEPTH;
        let values = if self.chance(0.4) {
            let kind = *[LitKind::Str, LitKind::Int, LitKind::Lang]
                .choose(&mut self.rng)
                .unwrap();
            let mut pool = kind.pool();
            pool.shuffle(&mut self.rng);
            let in_list = self.chance(0.3).then(|| pool[..hi.max(2)].to_vec());
            let has_value =
                (lo > 0 && self.chance(0.3)).then(|| in_list.as_ref().unwrap_or(&pool)[0].clone());
            Values::Lit {
                kind,
                datatype: self.chance(0.6),
                node_kind: self.chance(0.3).then_some("sh:Literal"),
                in_list,
                has_value,
            }
        } else {
            let blank = self.chance(0.2);
            let node_kind =
                self.chance(0.3)
                    .then_some(if blank { "sh:BlankNode" } else { "sh:IRI" });
            let classes = self.classes(2);
            let shaped = |g: &mut Gen, p: f64| {
                (deeper && g.chance(p)).then(|| g.node_shape(depth + 1, None))
            };
            let node = shaped(self, 0.3);
            let and = (deeper && self.chance(0.1)).then(|| {
                vec![
                    self.node_shape(depth + 1, None),
                    self.node_shape(depth + 1, None),
                ]
            });
            let or = (deeper && self.chance(0.15)).then(|| {
                vec![
                    self.node_shape(depth + 1, None),
                    self.node_shape(depth + 1, None),
                ]
            });
            let qualified = shaped(self, 0.35).map(|q| {
                let qmin = (lo > 0 && self.chance(0.8)).then(|| self.rng.gen_range(1..=lo));
                let qmax =
                    (qmin.is_none() || self.chance(0.5)).then(|| self.rng.gen_range(hi..=hi + 1));
                (q, qmin, qmax)
            });
            let constants = !blank && self.chance(0.25);
            let pool: Vec<String> = (0..4).map(|i| format!("ex:c{pred}_{i}")).collect();
            let in_list = constants.then(|| pool[..hi.max(2)].to_vec());
            let has_value = (constants && lo > 0 && self.chance(0.5)).then(|| pool[0].clone());
            Values::Res {
                blank,
                node_kind,
                classes,
                node,
                and,
                or,
                qualified,
                has_value,
                in_list,
            }
        };
        let inline = self.chance(0.4);
        self.push(Def::Prop {
            inline,
            pred,
            lo,
            hi,
            min,
            max,
            values,
        })
    }

    fn manifest(&self) -> String {
        let mut out = String::from(PREFIXES);
        for (i, d) in self.defs.iter().enumerate() {
            match d {
                Def::Node { .. } => out.push_str(&format!(
                    "\ns:S{i} a sh:NodeShape ;\n    {} .\n",
                    self.body(i)
                )),
                Def::Prop { inline: false, .. } => out.push_str(&format!(
                    "\ns:S{i} a sh:PropertyShape ;\n    {} .\n",
                    self.body(i)
                )),
                Def::Prop { inline: true, .. } => {}
            }
        }
        out
    }

    fn shape_ref(&self, i: usize) -> String {
        match &self.defs[i] {
            Def::Prop { inline: true, .. } => format!("[ {} ]", self.body(i)),
            _ => format!("s:S{i}"),
        }
    }

    fn list(&self, items: &[usize]) -> String {
        let names: Vec<String> = items.iter().map(|i| format!("s:S{i}")).collect();
        format!("( {} )", names.join(" "))
    }

    fn body(&self, i: usize) -> String {
        let mut parts: Vec<String> = Vec::new();
        match &self.defs[i] {
            Def::Node {
                target,
                classes,
                props,
                node,
                and,
                or,
            } => {
                if let Some(t) = target {
                    parts.push(t.clone());
                }
                parts.extend(classes.iter().map(|c| format!("sh:class ex:K{c}")));
                parts.extend(
                    props
                        .iter()
                        .map(|p| format!("sh:property {}", self.shape_ref(*p))),
                );
                if let Some(n) = node {
                    parts.push(format!("sh:node s:S{n}"));
                }
                if let Some(a) = and {
                    parts.push(format!("sh:and {}", self.list(a)));
                }
                if let Some(o) = or {
                    parts.push(format!("sh:or {}", self.list(o)));
                }
            }
            Def::Prop {
                pred,
                min,
                max,
                values,
                ..
            } => {
                parts.push(format!("sh:path ex:p{pred}"));
                if let Some(n) = min {
                    parts.push(format!("sh:minCount {n}"));
                }
                if let Some(n) = max {
                    parts.push(format!("sh:maxCount {n}"));
                }
                match values {
                    Values::Lit {
                        kind,
                        datatype,
                        node_kind,
                        in_list,
                        has_value,
                    } => {
                        if *datatype {
                            parts.push(format!("sh:datatype {}", kind.datatype()));
                        }
                        if let Some(k) = node_kind {
                            parts.push(format!("sh:nodeKind {k}"));
                        }
                        if let Some(l) = in_list {
                            parts.push(format!("sh:in ( {} )", l.join(" ")));
                        }
                        if let Some(v) = has_value {
                            parts.push(format!("sh:hasValue {v}"));
                        }
                    }
                    Values::Res {
                        node_kind,
                        classes,
                        node,
                        and,
                        or,
                        qualified,
                        has_value,
                        in_list,
                        ..
                    } => {
                        if let Some(k) = node_kind {
                            parts.push(format!("sh:nodeKind {k}"));
                        }
                        parts.extend(classes.iter().map(|c| format!("sh:class ex:K{c}")));
                        if let Some(n) = node {
                            parts.push(format!("sh:node s:S{n}"));
                        }
                        if let Some(a) = and {
                            parts.push(format!("sh:and {}", self.list(a)));
                        }
                        if let Some(o) = or {
                            parts.push(format!("sh:or {}", self.list(o)));
                        }
                        if let Some((q, qmin, qmax)) = qualified {
                            parts.push(format!("sh:qualifiedValueShape s:S{q}"));
                            if let Some(n) = qmin {
                                parts.push(format!("sh:qualifiedMinCount {n}"));
                            }
                            if let Some(n) = qmax {
                                parts.push(format!("sh:qualifiedMaxCount {n}"));
                            }
                        }
                        if let Some(l) = in_list {
                            parts.push(format!("sh:in ( {} )", l.join(" ")));
                        }
                        if let Some(v) = has_value {
                            parts.push(format!("sh:hasValue {v}"));
                        }
                    }
                }
            }
        }
        parts.join(" ;\n    ")
    }
}

struct Builder<'a> {
    defs: &'a [Def],
    rng: ChaCha8Rng,
    lines: Vec<String>,
    done: HashSet<(String, usize)>,
    fresh: usize,
    subclasses: bool,
}

impl Builder<'_> {
    fn add(&mut self, s: &str, p: &str, o: &str) {
        self.lines.push(format!("{s} {p} {o} ."));
    }

    fn typed(&mut self, node: &str, class: usize) {
        let c = if self.subclasses && self.rng.gen_bool(0.3) {
            format!("ex:K{class}sub")
        } else {
            format!("ex:K{class}")
        };
        self.add(node, "a", &c);
    }

    fn fresh(&mut self, blank: bool) -> String {
        self.fresh += 1;
        if blank {
            format!("_:b{}", self.fresh)
        } else {
            format!("ex:n{}", self.fresh)
        }
    }

    fn build(&mut self, node: &str, shape: usize) {
        if !self.done.insert((node.to_owned(), shape)) {
            return;
        }
        let defs = self.defs;
        match &defs[shape] {
            Def::Node {
                classes,
                props,
                node: n,
                and,
                or,
                ..
            } => {
                for c in classes {
                    self.typed(node, *c);
                }
                for p in props {
                    self.build(node, *p);
                }
                if let Some(n) = n {
                    self.build(node, *n);
                }
                for a in and.iter().flatten() {
                    self.build(node, *a);
                }
                if let Some(o) = or {
                    let pick = o[self.rng.gen_range(0..o.len())];
                    self.build(node, pick);
                }
            }
            Def::Prop {
                pred,
                lo,
                hi,
                values,
                ..
            } => {
                let count = self.rng.gen_range(*lo..=*hi);
                let p = format!("ex:p{pred}");
                match values {
                    Values::Lit {
                        kind,
                        in_list,
                        has_value,
                        ..
                    } => {
                        let mut pool = in_list.clone().unwrap_or_else(|| kind.pool());
                        pool.shuffle(&mut self.rng);
                        let mut chosen: Vec<String> = has_value.iter().cloned().collect();
                        for v in pool {
                            if chosen.len() >= count {
                                break;
                            }
                            if !chosen.contains(&v) {
                                chosen.push(v);
                            }
                        }
                        for v in chosen {
                            self.add(node, &p, &v);
                        }
                    }
                    Values::Res {
                        blank,
                        classes,
                        node: n,
                        and,
                        or,
                        qualified,
                        has_value,
                        in_list,
                        ..
                    } => {
                        let mut chosen: Vec<String> = has_value.iter().cloned().collect();
                        let mut pool = in_list.clone().unwrap_or_default();
                        pool.shuffle(&mut self.rng);
                        while chosen.len() < count {
                            let v = match in_list {
                                Some(_) => pool.pop().expect("in-lists hold at least hi values"),
                                None => self.fresh(*blank),
                            };
                            if !chosen.contains(&v) {
                                chosen.push(v);
                            }
                        }
                        for v in chosen {
                            self.add(node, &p, &v);
                            for c in classes {
                                self.typed(&v, *c);
                            }
                            let shapes = n
                                .iter()
                                .chain(and.iter().flatten())
                                .chain(qualified.iter().map(|(q, _, _)| q))
                                .copied()
                                .collect::<Vec<_>>();
                            for s in shapes {
                                self.build(&v, s);
                            }
                            if let Some(o) = or {
                                let pick = o[self.rng.gen_range(0..o.len())];
                                self.build(&v, pick);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// One randomized (manifest, graph) pair.
pub struct Instance {
    pub seed: u64,
    pub manifest_ttl: String,
    pub graph_ttl: String,
    pub manifest: Manifest,
    pub graph: Graph,
}

/// A random instance whose graph conforms to its manifest by construction and
/// holds at most [`MAX_TRIPLES`] triples.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut g = Gen {
            rng: ChaCha8Rng::seed_from_u64(rng.gen()),
            defs: Vec::new(),
            preds: 0,
        };
        let roots = g.rng.gen_range(1..=2);
        let mut targets = Vec::new();
        for r in 0..roots {
            let target = if g.chance(0.8) {
                format!("sh:targetClass ex:T{r}")
            } else {
                format!("sh:targetNode ex:t{r}_0")
            };
            targets.push((g.node_shape(0, Some(target.clone())), r, target));
        }
        let manifest_ttl = g.manifest();
        let mut b = Builder {
            defs: &g.defs,
            rng: ChaCha8Rng::seed_from_u64(g.rng.gen()),
            lines: Vec::new(),
            done: HashSet::new(),
            fresh: 0,
            subclasses: g.rng.gen_bool(0.3),
        };
        for (shape, r, target) in &targets {
            let class_target = target.contains("targetClass");
            let foci = if class_target {
                b.rng.gen_range(1..=3)
            } else {
                1
            };
            for i in 0..foci {
                let focus = format!("ex:t{r}_{i}");
                if class_target {
                    b.add(&focus, "a", &format!("ex:T{r}"));
                }
                b.build(&focus, *shape);
            }
        }
        if b.subclasses {
            for c in 0..CLASSES {
                b.add(
                    &format!("ex:K{c}sub"),
                    "rdfs:subClassOf",
                    &format!("ex:K{c}"),
                );
            }
        }
        for i in 0..b.rng.gen_range(0..3) {
            b.add(
                &format!("ex:noise{i}"),
                "ex:label",
                &format!("\"noise {i}\""),
            );
        }
        let graph_ttl = format!("{PREFIXES}\n{}\n", b.lines.join("\n"));
        let graph = parse_turtle(&graph_ttl).expect("generated graph parses");
        if graph.len() > MAX_TRIPLES {
            continue;
        }
        let manifest = parse_manifest_turtle(&manifest_ttl).expect("generated manifest parses");
        return Instance {
            seed,
            manifest_ttl,
            graph_ttl,
            manifest,
            graph,
        };
    }
}
