use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use indexmap::{IndexMap, IndexSet};

use super::lexer::is_pn_char;
use super::{vocab, Graph, Iri, Literal, Node, PrefixMap, Triple};

/// Escapes a string for a double-quoted Turtle or N-Triples literal.
pub fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

/// Renders terms with prefixed names where a declared namespace allows it.
#[derive(Debug, Clone)]
pub struct Compactor {
    prefixes: PrefixMap,
}

impl Compactor {
    pub fn new(prefixes: &PrefixMap) -> Self {
        Compactor {
            prefixes: prefixes.clone(),
        }
    }

    /// The prefix and local part used for `iri`, preferring the longest namespace.
    pub fn split<'a>(&'a self, iri: &'a Iri) -> Option<(&'a str, &'a str)> {
        let s = iri.as_str();
        self.prefixes
            .iter()
            .filter(|(_, ns)| !ns.is_empty() && s.starts_with(ns.as_str()))
            .map(|(p, ns)| (p.as_str(), &s[ns.len()..]))
            .filter(|(_, local)| valid_local(local))
            .min_by_key(|(_, local)| local.len())
    }

    pub fn iri(&self, iri: &Iri) -> String {
        match self.split(iri) {
            Some((prefix, local)) => format!("{prefix}:{local}"),
            None => format!("<{}>", iri.as_str()),
        }
    }

    pub fn literal(&self, lit: &Literal) -> String {
        if let Some(dt) = lit.explicit_datatype() {
            let lex = lit.lexical();
            let bare = match dt.as_str() {
                vocab::xsd::INTEGER => is_integer(lex),
                vocab::xsd::DECIMAL => is_decimal(lex),
                vocab::xsd::BOOLEAN => lex == "true" || lex == "false",
                _ => false,
            };
            if bare {
                return lex.to_owned();
            }
            return format!("\"{}\"^^{}", escape_string(lex), self.iri(dt));
        }
        match lit.language() {
            Some(lang) => format!("\"{}\"@{lang}", escape_string(lit.lexical())),
            None => format!("\"{}\"", escape_string(lit.lexical())),
        }
    }

    /// Renders a term; blank nodes keep their label as-is.
    pub fn node(&self, node: &Node) -> String {
        match node {
            Node::Iri(iri) => self.iri(iri),
            Node::Blank(b) => format!("_:{}", b.as_str()),
            Node::Literal(lit) => self.literal(lit),
        }
    }
}

fn valid_local(local: &str) -> bool {
    if local.is_empty() {
        return true;
    }
    let first = local.chars().next().unwrap_or(' ');
    if first == '-' || first == '.' || first == '\u{b7}' {
        return false;
    }
    !local.ends_with('.') && local.chars().all(|c| is_pn_char(c) || c == '.' || c == ':')
}

fn valid_label(label: &str) -> bool {
    let first = label.chars().next().unwrap_or('-');
    !label.is_empty()
        && (first.is_alphanumeric() || first == '_')
        && !label.ends_with('.')
        && label.chars().all(|c| is_pn_char(c) || c == '.')
}

fn is_integer(s: &str) -> bool {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn is_decimal(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    match body.split_once('.') {
        Some((int, frac)) => {
            int.bytes().all(|b| b.is_ascii_digit())
                && !frac.is_empty()
                && frac.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

/// Serializes the whole graph using its prefixes.
pub fn serialize_turtle(graph: &Graph) -> String {
    serialize_turtle_subset(graph.iter(), graph.prefixes())
}

/// Serializes the given triples, declaring only the prefixes that are used.
///
/// Blank nodes referenced exactly once are nested as `[ ]`, well-formed lists
/// as `( )`. Subjects appear in first-occurrence order.
pub fn serialize_turtle_subset<'a, I>(triples: I, prefixes: &PrefixMap) -> String
where
    I: IntoIterator<Item = &'a Triple>,
{
    let triples: Vec<&Triple> = triples.into_iter().collect();
    Writer::new(&triples, prefixes, false).run()
}

/// Serializes the whole graph writing every blank node as `_:label`, where
/// the label is an injective escape of the node's own label.
///
/// Graphs that share blank nodes in memory keep sharing them after being
/// written this way and parsed back, file by file.
pub fn serialize_turtle_labeled(graph: &Graph) -> String {
    let triples: Vec<&Triple> = graph.iter().collect();
    Writer::new(&triples, graph.prefixes(), true).run()
}

/// Alphanumerics stay, every other byte becomes `_` plus two hex digits.
pub(crate) fn escape_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for b in label.bytes() {
        if b.is_ascii_alphanumeric() {
            out.push(b as char);
        } else {
            let _ = write!(out, "_{b:02x}");
        }
    }
    out
}

struct Writer<'a> {
    compactor: Compactor,
    by_subject: IndexMap<&'a Node, Vec<&'a Triple>>,
    refs: HashMap<&'a Node, usize>,
    lists: HashMap<&'a Node, Vec<&'a Node>>,
    list_cells: HashSet<&'a Node>,
    labels: HashMap<&'a Node, String>,
    printed: HashSet<&'a Node>,
    used: IndexSet<String>,
    keep_labels: bool,
}

impl<'a> Writer<'a> {
    fn new(triples: &[&'a Triple], prefixes: &PrefixMap, keep_labels: bool) -> Self {
        let mut by_subject: IndexMap<&Node, Vec<&Triple>> = IndexMap::new();
        let mut refs: HashMap<&Node, usize> = HashMap::new();
        for t in triples {
            by_subject.entry(t.subject()).or_default().push(t);
            if t.object().is_blank() {
                *refs.entry(t.object()).or_default() += 1;
            }
        }
        let mut w = Writer {
            compactor: Compactor::new(prefixes),
            by_subject,
            refs,
            lists: HashMap::new(),
            list_cells: HashSet::new(),
            labels: HashMap::new(),
            printed: HashSet::new(),
            used: IndexSet::new(),
            keep_labels,
        };
        if !keep_labels {
            w.find_lists();
        }
        w.assign_labels();
        w
    }

    fn find_lists(&mut self) {
        let heads: Vec<&Node> = self
            .refs
            .iter()
            .filter(|(_, &n)| n == 1)
            .map(|(&b, _)| b)
            .collect();
        for head in heads {
            if let Some((items, cells)) = self.walk_list(head) {
                self.list_cells.extend(cells);
                self.lists.insert(head, items);
            }
        }
        // a cell that heads its own shorter list belongs to the longer one
        let cells = &self.list_cells;
        let inner: Vec<&Node> = self
            .lists
            .keys()
            .filter(|h| cells.contains(*h))
            .copied()
            .collect();
        for h in inner {
            self.lists.remove(h);
        }
    }

    fn walk_list(&self, head: &'a Node) -> Option<(Vec<&'a Node>, Vec<&'a Node>)> {
        let mut items = Vec::new();
        let mut cells = Vec::new();
        let mut seen = HashSet::new();
        let mut cell = head;
        loop {
            if !seen.insert(cell) {
                return None;
            }
            let props = self.by_subject.get(cell)?;
            if props.len() != 2 {
                return None;
            }
            let first = props
                .iter()
                .find(|t| t.predicate().as_str() == vocab::rdf::FIRST)?;
            let rest = props
                .iter()
                .find(|t| t.predicate().as_str() == vocab::rdf::REST)?;
            items.push(first.object());
            if cell != head {
                cells.push(cell);
            }
            let next = rest.object();
            if next.as_iri().is_some_and(|i| i.as_str() == vocab::rdf::NIL) {
                return Some((items, cells));
            }
            if !next.is_blank() || self.refs.get(next) != Some(&1) {
                return None;
            }
            cell = next;
        }
    }

    fn assign_labels(&mut self) {
        let mut blanks: IndexSet<&Node> = IndexSet::new();
        for (s, ts) in &self.by_subject {
            if s.is_blank() {
                blanks.insert(s);
            }
            for t in ts {
                if t.object().is_blank() {
                    blanks.insert(t.object());
                }
            }
        }
        if self.keep_labels {
            for b in blanks {
                if let Node::Blank(id) = b {
                    self.labels.insert(b, escape_label(id.as_str()));
                }
            }
            return;
        }
        let taken: HashSet<&str> = blanks
            .iter()
            .filter_map(|b| match b {
                Node::Blank(id) if valid_label(id.as_str()) => Some(id.as_str()),
                _ => None,
            })
            .collect();
        let mut counter = 0usize;
        for b in blanks {
            let Node::Blank(id) = b else { continue };
            let label = if valid_label(id.as_str()) {
                id.as_str().to_owned()
            } else {
                loop {
                    counter += 1;
                    let candidate = format!("b{counter}");
                    if !taken.contains(candidate.as_str()) {
                        break candidate;
                    }
                }
            };
            self.labels.insert(b, label);
        }
    }

    fn inlinable(&self, node: &Node) -> bool {
        !self.keep_labels
            && node.is_blank()
            && self.refs.get(node) == Some(&1)
            && !self.list_cells.contains(node)
    }

    fn run(mut self) -> String {
        let mut body = String::new();
        let subjects: Vec<&Node> = self.by_subject.keys().copied().collect();
        for s in &subjects {
            if self.inlinable(s) || self.list_cells.contains(s) || self.printed.contains(s) {
                continue;
            }
            self.top_level(s, &mut body);
        }
        // blank nodes on a reference cycle are never reached above
        for s in &subjects {
            if !self.printed.contains(s) && !self.list_cells.contains(s) {
                self.top_level(s, &mut body);
            }
        }
        let mut out = String::new();
        for prefix in &self.used {
            if let Some(ns) = self.compactor.prefixes.get(prefix) {
                let _ = writeln!(out, "@prefix {prefix}: <{ns}> .");
            }
        }
        if !out.is_empty() && !body.is_empty() {
            out.push('\n');
        }
        out.push_str(&body);
        out
    }

    fn top_level(&mut self, s: &'a Node, body: &mut String) {
        self.printed.insert(s);
        let subject = match s {
            Node::Blank(_) => format!("_:{}", self.labels[s]),
            other => self.term(other),
        };
        let props = self.predicate_list(s, 1);
        let _ = writeln!(body, "{subject} {props} .");
        body.push('\n');
    }

    fn predicate_list(&mut self, s: &'a Node, depth: usize) -> String {
        let mut groups: IndexMap<&Iri, Vec<&Node>> = IndexMap::new();
        for t in self.by_subject.get(s).cloned().unwrap_or_default() {
            groups.entry(t.predicate()).or_default().push(t.object());
        }
        let indent = "    ".repeat(depth);
        let mut parts = Vec::new();
        for (p, objects) in groups {
            let pred = if p.as_str() == vocab::rdf::TYPE {
                "a".to_owned()
            } else {
                self.term(&Node::Iri(p.clone()))
            };
            let objs: Vec<String> = objects.into_iter().map(|o| self.object(o, depth)).collect();
            parts.push(format!("{pred} {}", objs.join(", ")));
        }
        parts.join(&format!(" ;\n{indent}"))
    }

    fn object(&mut self, o: &'a Node, depth: usize) -> String {
        if o.as_iri().is_some_and(|i| i.as_str() == vocab::rdf::NIL) {
            return "()".to_owned();
        }
        if let Some(items) = self.lists.get(o).cloned() {
            if !self.printed.contains(o) {
                self.printed.insert(o);
                let rendered: Vec<String> = items
                    .into_iter()
                    .map(|i| self.object(i, depth + 1))
                    .collect();
                return format!("( {} )", rendered.join(" "));
            }
        }
        if self.inlinable(o) && !self.printed.contains(o) {
            self.printed.insert(o);
            if !self.by_subject.contains_key(o) {
                return "[]".to_owned();
            }
            let inner = self.predicate_list(o, depth + 1);
            let indent = "    ".repeat(depth + 1);
            let close = "    ".repeat(depth);
            return format!("[\n{indent}{inner}\n{close}]");
        }
        match o {
            Node::Blank(_) => format!("_:{}", self.labels[o]),
            other => self.term(other),
        }
    }

    fn term(&mut self, node: &Node) -> String {
        let iri = match node {
            Node::Iri(iri) => Some(iri),
            Node::Literal(lit) => lit.explicit_datatype(),
            Node::Blank(_) => None,
        };
        if let Some((prefix, _)) = iri.and_then(|i| self.compactor.split(i)) {
            if !self.used.contains(prefix) {
                self.used.insert(prefix.to_owned());
            }
        }
        self.compactor.node(node)
    }
}
