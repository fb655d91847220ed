//! Fresh entity names for values the materializer has to invent.

use std::collections::{HashMap, HashSet};

use serde_json::Value;

use crate::rdf::{vocab, Compactor, Graph, Iri, Literal, Node, PrefixMap, Triple};

/// The stand-in subject of a minting template.
pub const MINT_PARAM: &str = "urn:___param___#name";

/// What to name: a node like `exemplar`, described by `template` triples whose
/// subject is [`MINT_PARAM`].
pub struct MintRequest<'a> {
    pub exemplar: &'a Node,
    pub template: &'a [Triple],
    /// Triples of the exemplar matching the template, shown as the example.
    pub example: &'a [Triple],
    pub prefixes: &'a PrefixMap,
    pub literal: bool,
}

pub trait Namer {
    /// A term absent from `g` and from everything this namer minted before.
    fn mint(&mut self, req: &MintRequest, g: &Graph) -> Node;

    /// Warnings collected since the last call.
    fn take_notes(&mut self) -> Vec<String> {
        Vec::new()
    }
}

/// `<exemplar>_<n>` with a per-exemplar counter.
#[derive(Default)]
pub struct DeterministicNamer {
    counters: HashMap<String, usize>,
    minted: HashSet<Node>,
}

impl DeterministicNamer {
    pub fn new() -> Self {
        Self::default()
    }

    fn candidate(exemplar: &Node, n: usize, literal: bool) -> Node {
        let stem = match exemplar {
            Node::Iri(iri) => iri.as_str().to_owned(),
            Node::Blank(b) => format!("urn:minted:{}", b.as_str()),
            Node::Literal(l) => l.lexical().to_owned(),
        };
        if literal {
            let lex = match exemplar {
                Node::Iri(iri) => iri.local_name().to_owned(),
                _ => stem,
            };
            Node::Literal(Literal::plain(format!("{lex}_{n}")))
        } else if exemplar.is_literal() {
            let local: String = stem
                .chars()
                .map(|c| if c.is_alphanumeric() { c } else { '_' })
                .collect();
            Node::iri(format!("urn:minted:{local}_{n}"))
        } else {
            Node::iri(format!("{stem}_{n}"))
        }
    }
}

impl Namer for DeterministicNamer {
    fn mint(&mut self, req: &MintRequest, g: &Graph) -> Node {
        let key = format!("{}|{}", req.exemplar, req.literal);
        let counter = self.counters.entry(key).or_insert(0);
        loop {
            *counter += 1;
            let node = Self::candidate(req.exemplar, *counter, req.literal);
            if !g.contains_term(&node) && self.minted.insert(node.clone()) {
                return node;
            }
        }
    }
}

type Ask = Box<dyn FnMut(&str) -> Result<String, String> + Send>;

/// Asks a language model for a name and falls back to [`DeterministicNamer`]
/// when the answer is unusable.
pub struct LlmNamer {
    ask: Ask,
    fallback: DeterministicNamer,
    minted: HashSet<Node>,
    notes: Vec<String>,
}

impl LlmNamer {
    pub fn new(ask: impl FnMut(&str) -> Result<String, String> + Send + 'static) -> Self {
        LlmNamer {
            ask: Box::new(ask),
            fallback: DeterministicNamer::new(),
            minted: HashSet::new(),
            notes: Vec::new(),
        }
    }

    fn parse(&self, raw: &str, req: &MintRequest) -> Result<Node, String> {
        let start = raw.find('{').ok_or("no JSON object in the answer")?;
        let end = raw.rfind('}').ok_or("no JSON object in the answer")?;
        let v: Value = serde_json::from_str(&raw[start..=end]).map_err(|e| e.to_string())?;
        let answer = match v.get("answer") {
            Some(Value::String(s)) => s.trim().to_owned(),
            Some(other) => other.to_string(),
            None => return Err("missing key \"answer\"".into()),
        };
        let is_iri = v
            .get("is URIRef")
            .and_then(Value::as_bool)
            .ok_or("missing boolean key \"is URIRef\"")?;
        if !is_iri {
            return Ok(Node::Literal(Literal::plain(answer)));
        }
        let text = answer.trim_start_matches('<').trim_end_matches('>');
        if let Some((prefix, local)) = text.split_once(':') {
            if let Some(ns) = req.prefixes.get(prefix) {
                if !local.starts_with("//") {
                    return Ok(Node::iri(format!("{ns}{local}")));
                }
            }
            if !prefix.is_empty() && !text.contains(char::is_whitespace) {
                return Ok(Node::iri(text));
            }
        }
        Err(format!("\"{answer}\" is not an IRI"))
    }
}

impl Namer for LlmNamer {
    fn mint(&mut self, req: &MintRequest, g: &Graph) -> Node {
        let prompt = mint_prompt(req);
        let outcome = (self.ask)(&prompt).and_then(|raw| self.parse(&raw, req));
        match outcome {
            Ok(node) if !g.contains_term(&node) && !self.minted.contains(&node) => {
                self.minted.insert(node.clone());
                return node;
            }
            Ok(node) => self.notes.push(format!(
                "minted name {node} already exists; using a counter name"
            )),
            Err(e) => self.notes.push(format!(
                "unusable minting answer ({e}); using a counter name"
            )),
        }
        loop {
            let node = self.fallback.mint(req, g);
            if self.minted.insert(node.clone()) {
                return node;
            }
        }
    }

    fn take_notes(&mut self) -> Vec<String> {
        std::mem::take(&mut self.notes)
    }
}

/// The naming prompt sent to a language model.
pub fn mint_prompt(req: &MintRequest) -> String {
    let c = Compactor::new(req.prefixes);
    format!(
        "Generate an entity name to replace {MINT_PARAM} in the following graph.\n\
         {}\n\
         Your answer must be semantically similar to the corresponding entity in the following example but not exactly identical.\n\
         {}\n\
         Compare with the example, observe if {MINT_PARAM} should be a URIRef. If so, make it a valid URIRef. Otherwise, make it a Literal.\n\
         Return your answer in json without explanations. {{\"answer\":your answer, \"is URIRef\":true/false}}.",
        compact_lines(req.template, &c),
        compact_lines(req.example, &c)
    )
}

/// `s p o1, o2; q o3.` lines, one per subject, with `a` for `rdf:type`.
pub fn compact_lines(triples: &[Triple], c: &Compactor) -> String {
    let mut subjects: Vec<&Node> = Vec::new();
    for t in triples {
        if !subjects.contains(&t.subject()) {
            subjects.push(t.subject());
        }
    }
    let show = |n: &Node| match n {
        Node::Iri(iri) if iri.as_str() == MINT_PARAM => MINT_PARAM.to_owned(),
        _ => c.node(n),
    };
    let rdf_type = Iri::new(vocab::rdf::TYPE);
    let mut lines = Vec::new();
    for s in subjects {
        let mut groups: Vec<(&Iri, Vec<String>)> = Vec::new();
        for t in triples.iter().filter(|t| t.subject() == s) {
            let o = show(t.object());
            match groups.iter_mut().find(|(p, _)| *p == t.predicate()) {
                Some((_, os)) => os.push(o),
                None => groups.push((t.predicate(), vec![o])),
            }
        }
        let body: Vec<String> = groups
            .into_iter()
            .map(|(p, os)| {
                let p = if p == &rdf_type {
                    "a".to_owned()
                } else {
                    c.iri(p)
                };
                format!("{p} {}", os.join(", "))
            })
            .collect();
        lines.push(format!("{} {}.", show(s), body.join("; ")));
    }
    lines.join("\n")
}
