//! The SPARQL Update fragment repairs are written in: `INSERT DATA`,
//! `DELETE DATA` and a single `DELETE { } INSERT { } WHERE { }` over a basic
//! graph pattern.

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexSet;

use crate::rdf::lexer::{tokenize, Mode, SyntaxError, Tok};
use crate::rdf::turtle::{TermParser, VAR_MARKER};
use crate::rdf::{BlankId, Compactor, Graph, Node, PrefixMap, Triple};

/// A position in a triple pattern.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Node(Node),
    /// A variable. Blank nodes of a `WHERE` pattern become variables named `_:label`.
    Var(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Node(n) => write!(f, "{n}"),
            Term::Var(v) if v.starts_with("_:") => f.write_str(v),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub s: Term,
    pub p: Term,
    pub o: Term,
}

impl TriplePattern {
    fn terms(&self) -> [&Term; 3] {
        [&self.s, &self.p, &self.o]
    }

    fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms().into_iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Node(_) => None,
        })
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.s, self.p, self.o)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateForm {
    InsertData,
    DeleteData,
    /// `DELETE { } INSERT { } WHERE { }`, with either template optional, or
    /// the `DELETE WHERE { }` shorthand.
    Modify,
}

#[derive(Clone, Debug)]
pub struct Update {
    pub form: UpdateForm,
    pub delete: Vec<TriplePattern>,
    pub insert: Vec<TriplePattern>,
    pub pattern: Vec<TriplePattern>,
    pub prefixes: PrefixMap,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error("variable ?{0} is not bound by the WHERE pattern")]
    Unbound(String),
}

/// A solution of a basic graph pattern.
pub type Bindings = HashMap<String, Node>;

/// Parses exactly one update operation.
pub fn parse_update(text: &str) -> Result<Update, SyntaxError> {
    let tokens = tokenize(text, Mode::Sparql)?;
    let mut p = TermParser::new(tokens, None);
    while p.directive()? {}
    let head = p.peek().clone();
    let Tok::Word(w) = &head.tok else {
        return Err(p.unexpected("expected INSERT or DELETE"));
    };
    let keyword = w.to_ascii_uppercase();
    p.next();
    let mut update = Update {
        form: UpdateForm::Modify,
        delete: Vec::new(),
        insert: Vec::new(),
        pattern: Vec::new(),
        prefixes: PrefixMap::new(),
    };
    match keyword.as_str() {
        "INSERT" if p.at_word("data") => {
            p.next();
            update.form = UpdateForm::InsertData;
            update.insert = block(&mut p, Block::InsertData)?;
        }
        "DELETE" if p.at_word("data") => {
            p.next();
            update.form = UpdateForm::DeleteData;
            update.delete = block(&mut p, Block::DeleteData)?;
        }
        "DELETE" if p.at_word("where") => {
            p.next();
            let pattern = block(&mut p, Block::Where)?;
            if pattern.iter().any(|t| {
                t.terms()
                    .iter()
                    .any(|x| matches!(x, Term::Var(v) if v.starts_with("_:")))
            }) {
                return Err(SyntaxError::at(
                    &head,
                    "blank nodes are not allowed in DELETE WHERE",
                ));
            }
            update.delete = pattern.clone();
            update.pattern = pattern;
        }
        "DELETE" => {
            update.delete = block(&mut p, Block::Delete)?;
            if p.at_word("insert") {
                p.next();
                update.insert = block(&mut p, Block::Insert)?;
            }
            p.expect_word("where")?;
            update.pattern = block(&mut p, Block::Where)?;
        }
        "INSERT" => {
            update.insert = block(&mut p, Block::Insert)?;
            p.expect_word("where")?;
            update.pattern = block(&mut p, Block::Where)?;
        }
        "WITH" | "USING" | "LOAD" | "CLEAR" | "CREATE" | "DROP" | "COPY" | "MOVE" | "ADD" => {
            return Err(SyntaxError::at(
                &head,
                format!("{keyword} is not supported"),
            ));
        }
        _ => return Err(SyntaxError::at(&head, "expected INSERT or DELETE")),
    }
    if p.at(&Tok::Semicolon) {
        p.next();
        if !p.at(&Tok::Eof) {
            return Err(p.unexpected("only a single update operation is accepted"));
        }
    }
    if !p.at(&Tok::Eof) {
        return Err(p.unexpected("expected end of update"));
    }
    if update.form == UpdateForm::Modify {
        let bound: HashSet<&str> = update.pattern.iter().flat_map(|t| t.vars()).collect();
        for t in update.delete.iter().chain(&update.insert) {
            if let Some(v) = t.vars().find(|v| !bound.contains(v)) {
                return Err(SyntaxError::at(
                    &head,
                    format!("variable ?{v} does not occur in WHERE"),
                ));
            }
        }
    }
    update.prefixes = p.prefixes;
    Ok(update)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Block {
    InsertData,
    DeleteData,
    Delete,
    Insert,
    Where,
}

fn block(p: &mut TermParser, kind: Block) -> Result<Vec<TriplePattern>, SyntaxError> {
    let open = p.expect(&Tok::LBrace)?;
    let mut g = Graph::new();
    loop {
        if p.at(&Tok::RBrace) {
            p.next();
            break;
        }
        match &p.peek().tok {
            Tok::LBrace => return Err(p.unexpected("nested group patterns are not supported")),
            Tok::Eof => return Err(SyntaxError::at(&open, "unclosed '{'")),
            Tok::Word(w) if !w.eq_ignore_ascii_case("a") => {
                let w = w.to_ascii_uppercase();
                return Err(p.unexpected(&format!("{w} is not supported inside a block")));
            }
            _ => {}
        }
        p.triples_block(&mut g)?;
        if p.at(&Tok::Dot) {
            p.next();
        } else if !p.at(&Tok::RBrace) {
            return Err(p.unexpected("expected '.' or '}'"));
        }
    }
    let mut out = Vec::with_capacity(g.len());
    for t in g.iter() {
        let conv = |n: &Node| -> Result<Term, SyntaxError> {
            match n {
                Node::Iri(iri) if iri.as_str().starts_with(VAR_MARKER) => {
                    if matches!(kind, Block::InsertData | Block::DeleteData) {
                        return Err(SyntaxError::at(
                            &open,
                            "variables are not allowed in a DATA block",
                        ));
                    }
                    Ok(Term::Var(iri.as_str()[VAR_MARKER.len()..].to_owned()))
                }
                Node::Blank(b) => match kind {
                    Block::DeleteData | Block::Delete => Err(SyntaxError::at(
                        &open,
                        "blank nodes are not allowed in a DELETE block",
                    )),
                    Block::Where => Ok(Term::Var(format!("_:{}", b.as_str()))),
                    _ => Ok(Term::Node(n.clone())),
                },
                _ => Ok(Term::Node(n.clone())),
            }
        };
        out.push(TriplePattern {
            s: conv(t.subject())?,
            p: conv(&Node::Iri(t.predicate().clone()))?,
            o: conv(t.object())?,
        });
    }
    Ok(out)
}

/// All solutions of a basic graph pattern, in a deterministic order.
pub fn evaluate_pattern(g: &Graph, pattern: &[TriplePattern]) -> Vec<Bindings> {
    let mut out = Vec::new();
    let mut remaining: Vec<&TriplePattern> = pattern.iter().collect();
    // ground and selective patterns first
    remaining.sort_by_key(|t| t.vars().count());
    extend(g, &remaining, Bindings::new(), &mut out);
    out
}

fn resolve<'a>(t: &'a Term, b: &'a Bindings) -> Option<&'a Node> {
    match t {
        Term::Node(n) => Some(n),
        Term::Var(v) => b.get(v),
    }
}

fn extend(g: &Graph, patterns: &[&TriplePattern], b: Bindings, out: &mut Vec<Bindings>) {
    let Some((first, rest)) = patterns.split_first() else {
        out.push(b);
        return;
    };
    let s = resolve(&first.s, &b).cloned();
    let o = resolve(&first.o, &b).cloned();
    let candidates: Vec<&Triple> = match (&s, &o) {
        (Some(s), _) => g.with_subject(s).collect(),
        (None, Some(o)) => g.with_object(o).collect(),
        (None, None) => g.iter().collect(),
    };
    for t in candidates {
        let mut next = b.clone();
        let ok = bind(&first.s, t.subject(), &mut next)
            && bind(&first.p, &Node::Iri(t.predicate().clone()), &mut next)
            && bind(&first.o, t.object(), &mut next);
        if ok {
            extend(g, rest, next, out);
        }
    }
}

fn bind(term: &Term, value: &Node, b: &mut Bindings) -> bool {
    match term {
        Term::Node(n) => n == value,
        Term::Var(v) => match b.get(v) {
            Some(x) => x == value,
            None => {
                b.insert(v.clone(), value.clone());
                true
            }
        },
    }
}

/// Applies an update, returning the new graph.
///
/// All solutions are computed first, then every instantiated delete is
/// removed and every instantiated insert added. Blank nodes in insert
/// templates become fresh blank nodes per solution. Instantiations that are
/// not valid triples are dropped.
pub fn apply_update(g: &Graph, u: &Update) -> Result<Graph, ApplyError> {
    let solutions = match u.form {
        UpdateForm::Modify => evaluate_pattern(g, &u.pattern),
        _ => vec![Bindings::new()],
    };
    let mut used: HashSet<String> = g
        .nodes()
        .into_iter()
        .filter_map(|n| match n {
            Node::Blank(b) => Some(b.as_str().to_owned()),
            _ => None,
        })
        .collect();
    let mut counter = 0usize;
    let mut deletes = Vec::new();
    let mut inserts = Vec::new();
    for b in &solutions {
        for t in &u.delete {
            if let Some(tr) = instantiate(t, b, &mut HashMap::new(), &mut || -> Node {
                unreachable!("delete templates hold no blank nodes")
            })? {
                deletes.push(tr);
            }
        }
        let mut fresh: HashMap<Node, Node> = HashMap::new();
        let mut mint = || loop {
            counter += 1;
            let label = format!("u{counter}");
            if used.insert(label.clone()) {
                return Node::Blank(BlankId::new(label));
            }
        };
        for t in &u.insert {
            if let Some(tr) = instantiate(t, b, &mut fresh, &mut mint)? {
                inserts.push(tr);
            }
        }
    }
    let mut out = g.clone();
    for t in &deletes {
        out.remove(t);
    }
    out.extend(inserts);
    Ok(out)
}

fn instantiate(
    t: &TriplePattern,
    b: &Bindings,
    fresh: &mut HashMap<Node, Node>,
    mint: &mut dyn FnMut() -> Node,
) -> Result<Option<Triple>, ApplyError> {
    let mut get = |term: &Term| -> Result<Node, ApplyError> {
        match term {
            Term::Var(v) => b
                .get(v)
                .cloned()
                .ok_or_else(|| ApplyError::Unbound(v.clone())),
            Term::Node(n @ Node::Blank(_)) => {
                Ok(fresh.entry(n.clone()).or_insert_with(&mut *mint).clone())
            }
            Term::Node(n) => Ok(n.clone()),
        }
    };
    let (s, p, o) = (get(&t.s)?, get(&t.p)?, get(&t.o)?);
    let Node::Iri(p) = p else { return Ok(None) };
    Ok(Triple::new(s, p, o).ok())
}

/// One update statement turning `from` into a graph isomorphic to `to`.
///
/// Blank nodes of `from` that the change touches are pinned by variables
/// bound to every `from` triple around them.
pub fn diff_update(from: &Graph, to: &Graph, prefixes: &PrefixMap) -> String {
    let deletes: Vec<&Triple> = from.iter().filter(|t| !to.contains(t)).collect();
    let inserts: Vec<&Triple> = to.iter().filter(|t| !from.contains(t)).collect();
    let existing: HashSet<Node> = from.nodes().into_iter().filter(Node::is_blank).collect();

    // blank nodes of `from` mentioned by the change, closed over their neighbourhood
    let mut pinned: IndexSet<Node> = deletes
        .iter()
        .chain(&inserts)
        .flat_map(|t| [t.subject().clone(), t.object().clone()])
        .filter(|n| existing.contains(n))
        .collect();
    let mut i = 0;
    while i < pinned.len() {
        let n = pinned[i].clone();
        for t in from.with_subject(&n).chain(from.with_object(&n)) {
            for x in [t.subject(), t.object()] {
                if x.is_blank() {
                    pinned.insert(x.clone());
                }
            }
        }
        i += 1;
    }
    let c = Compactor::new(prefixes);
    let term = |n: &Node| -> String {
        match n {
            Node::Blank(b) if pinned.contains(n) => format!("?b_{}", sanitize(b.as_str())),
            Node::Blank(b) => format!("_:n_{}", sanitize(b.as_str())),
            _ => c.node(n),
        }
    };
    let line = |t: &Triple| {
        format!(
            "{} {} {} .",
            term(t.subject()),
            c.iri(t.predicate()),
            term(t.object())
        )
    };
    let body = |ts: &[&Triple]| ts.iter().map(|t| line(t)).collect::<Vec<_>>().join(" ");

    let mut used_prefixes = String::new();
    for (prefix, ns) in prefixes.iter() {
        used_prefixes.push_str(&format!("PREFIX {prefix}: <{ns}>\n"));
    }
    let text = if pinned.is_empty() {
        match (deletes.is_empty(), inserts.is_empty()) {
            (true, _) => format!("INSERT DATA {{ {} }}", body(&inserts)),
            (false, true) => format!("DELETE DATA {{ {} }}", body(&deletes)),
            (false, false) => format!(
                "DELETE {{ {} }} INSERT {{ {} }} WHERE {{ }}",
                body(&deletes),
                body(&inserts)
            ),
        }
    } else {
        let context: Vec<&Triple> = from
            .iter()
            .filter(|t| pinned.contains(t.subject()) || pinned.contains(t.object()))
            .collect();
        format!(
            "DELETE {{ {} }} INSERT {{ {} }} WHERE {{ {} }}",
            body(&deletes),
            body(&inserts),
            body(&context)
        )
    };
    format!("{used_prefixes}{text}")
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
