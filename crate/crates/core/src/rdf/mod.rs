//! RDF terms, graphs, Turtle I/O and graph isomorphism.

mod graph;
mod iso;
pub(crate) mod lexer;
pub(crate) mod turtle;
pub(crate) mod writer;

pub mod vocab;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use graph::{Graph, PrefixMap};
pub use iso::{isomorphic, relax_literals, relaxed_isomorphic, PLACEHOLDER};
pub use turtle::{parse_turtle, parse_turtle_with_base, TurtleError};
pub use writer::{serialize_turtle, serialize_turtle_labeled, serialize_turtle_subset, Compactor};

/// An absolute IRI.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Iri(Arc<str>);

impl Iri {
    pub fn new(value: impl AsRef<str>) -> Self {
        Iri(Arc::from(value.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The part after the last `#` or `/`, used for display and minting.
    pub fn local_name(&self) -> &str {
        let s = self.as_str();
        match s.rfind(['#', '/', ':']) {
            Some(pos) if pos + 1 < s.len() => &s[pos + 1..],
            _ => s,
        }
    }
}

impl fmt::Debug for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl From<&str> for Iri {
    fn from(value: &str) -> Self {
        Iri::new(value)
    }
}

/// A blank node label, unique within one graph.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlankId(Arc<str>);

impl BlankId {
    pub fn new(label: impl AsRef<str>) -> Self {
        BlankId(Arc::from(label.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for BlankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_:{}", self.0)
    }
}

/// A literal. Simple literals carry no datatype (their datatype is `xsd:string`),
/// language-tagged literals carry no datatype either.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    lexical: Arc<str>,
    datatype: Option<Iri>,
    lang: Option<Arc<str>>,
}

impl Literal {
    pub fn plain(lexical: impl AsRef<str>) -> Self {
        Literal {
            lexical: Arc::from(lexical.as_ref()),
            datatype: None,
            lang: None,
        }
    }

    pub fn typed(lexical: impl AsRef<str>, datatype: Iri) -> Self {
        if datatype.as_str() == vocab::xsd::STRING {
            return Literal::plain(lexical);
        }
        Literal {
            lexical: Arc::from(lexical.as_ref()),
            datatype: Some(datatype),
            lang: None,
        }
    }

    pub fn lang(lexical: impl AsRef<str>, lang: impl AsRef<str>) -> Self {
        Literal {
            lexical: Arc::from(lexical.as_ref()),
            datatype: None,
            lang: Some(Arc::from(lang.as_ref().to_ascii_lowercase())),
        }
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn language(&self) -> Option<&str> {
        self.lang.as_deref()
    }

    /// The explicit datatype, `None` for simple and language-tagged literals.
    pub fn explicit_datatype(&self) -> Option<&Iri> {
        self.datatype.as_ref()
    }

    /// The effective datatype IRI.
    pub fn datatype(&self) -> Iri {
        match (&self.datatype, &self.lang) {
            (Some(dt), _) => dt.clone(),
            (None, Some(_)) => Iri::new(vocab::rdf::LANG_STRING),
            (None, None) => Iri::new(vocab::xsd::STRING),
        }
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Node::Literal(self.clone()))
    }
}

/// An RDF term.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Iri(Iri),
    Blank(BlankId),
    Literal(Literal),
}

/// The three pure node kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Iri,
    Blank,
    Literal,
}

impl Node {
    pub fn iri(value: impl AsRef<str>) -> Self {
        Node::Iri(Iri::new(value))
    }

    pub fn blank(label: impl AsRef<str>) -> Self {
        Node::Blank(BlankId::new(label))
    }

    pub fn literal(lexical: impl AsRef<str>) -> Self {
        Node::Literal(Literal::plain(lexical))
    }

    pub fn typed_literal(lexical: impl AsRef<str>, datatype: &str) -> Self {
        Node::Literal(Literal::typed(lexical, Iri::new(datatype)))
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Iri(_) => NodeKind::Iri,
            Node::Blank(_) => NodeKind::Blank,
            Node::Literal(_) => NodeKind::Literal,
        }
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Node::Iri(iri) => Some(iri),
            _ => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Node::Literal(lit) => Some(lit),
            _ => None,
        }
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, Node::Blank(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Node::Literal(_))
    }
}

impl From<Iri> for Node {
    fn from(value: Iri) -> Self {
        Node::Iri(value)
    }
}

impl From<Literal> for Node {
    fn from(value: Literal) -> Self {
        Node::Literal(value)
    }
}

/// N-Triples rendering.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Iri(iri) => write!(f, "<{}>", iri.as_str()),
            Node::Blank(id) => write!(f, "_:{}", id.as_str()),
            Node::Literal(lit) => {
                write!(f, "\"{}\"", writer::escape_string(lit.lexical()))?;
                if let Some(lang) = lit.language() {
                    write!(f, "@{lang}")
                } else if let Some(dt) = lit.explicit_datatype() {
                    write!(f, "^^<{}>", dt.as_str())
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("literal {0} cannot be the subject of a triple")]
pub struct LiteralSubject(pub Node);

/// A triple. The predicate is always an IRI and the subject never a literal.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    subject: Node,
    predicate: Iri,
    object: Node,
}

impl Triple {
    pub fn new(subject: Node, predicate: Iri, object: Node) -> Result<Self, LiteralSubject> {
        if subject.is_literal() {
            return Err(LiteralSubject(subject));
        }
        Ok(Triple {
            subject,
            predicate,
            object,
        })
    }

    /// Convenience constructor over IRI strings, panics on a literal subject.
    pub fn iris(s: &str, p: &str, o: &str) -> Self {
        Triple::new(Node::iri(s), Iri::new(p), Node::iri(o)).expect("IRI subject")
    }

    pub fn subject(&self) -> &Node {
        &self.subject
    }

    pub fn predicate(&self) -> &Iri {
        &self.predicate
    }

    pub fn object(&self) -> &Node {
        &self.object
    }

    pub fn map_nodes(&self, mut f: impl FnMut(&Node) -> Node) -> Self {
        Triple {
            subject: f(&self.subject),
            predicate: self.predicate.clone(),
            object: f(&self.object),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} <{}> {} .",
            self.subject,
            self.predicate.as_str(),
            self.object
        )
    }
}

impl fmt::Debug for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
