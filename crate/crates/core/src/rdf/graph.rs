use std::collections::HashMap;

use indexmap::{IndexMap, IndexSet};

use super::{vocab, Iri, Node, Triple};

/// Prefix declarations, kept in declaration order. Only a serialization hint.
pub type PrefixMap = IndexMap<String, String>;

/// A set of triples that remembers insertion order.
///
/// Equality is set equality over triples; prefixes and insertion order are
/// ignored. Subject and object indexes are kept in sync on every mutation.
#[derive(Clone, Default)]
pub struct Graph {
    triples: IndexSet<Triple>,
    by_subject: HashMap<Node, IndexSet<Triple>>,
    by_object: HashMap<Node, IndexSet<Triple>>,
    predicates: HashMap<Iri, usize>,
    prefixes: PrefixMap,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_prefixes(prefixes: PrefixMap) -> Self {
        Graph {
            prefixes,
            ..Self::default()
        }
    }

    pub fn prefixes(&self) -> &PrefixMap {
        &self.prefixes
    }

    pub fn prefixes_mut(&mut self) -> &mut PrefixMap {
        &mut self.prefixes
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triples.contains(triple)
    }

    /// Inserts a triple; returns false if it was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        if self.triples.contains(&triple) {
            return false;
        }
        self.by_subject
            .entry(triple.subject().clone())
            .or_default()
            .insert(triple.clone());
        self.by_object
            .entry(triple.object().clone())
            .or_default()
            .insert(triple.clone());
        *self
            .predicates
            .entry(triple.predicate().clone())
            .or_default() += 1;
        self.triples.insert(triple);
        true
    }

    /// Removes a triple; returns false if it was absent.
    pub fn remove(&mut self, triple: &Triple) -> bool {
        if !self.triples.shift_remove(triple) {
            return false;
        }
        unindex(&mut self.by_subject, triple.subject(), triple);
        unindex(&mut self.by_object, triple.object(), triple);
        if let Some(count) = self.predicates.get_mut(triple.predicate()) {
            *count -= 1;
            if *count == 0 {
                self.predicates.remove(triple.predicate());
            }
        }
        true
    }

    pub fn extend<I: IntoIterator<Item = Triple>>(&mut self, triples: I) {
        for t in triples {
            self.insert(t);
        }
    }

    /// Triples in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    pub fn with_subject<'a>(&'a self, subject: &Node) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_subject.get(subject).into_iter().flatten()
    }

    pub fn with_object<'a>(&'a self, object: &Node) -> impl Iterator<Item = &'a Triple> + 'a {
        self.by_object.get(object).into_iter().flatten()
    }

    /// Triples `(subject, predicate, *)` in insertion order.
    pub fn with_subject_predicate<'a>(
        &'a self,
        subject: &Node,
        predicate: &'a Iri,
    ) -> impl Iterator<Item = &'a Triple> + 'a {
        self.with_subject(subject)
            .filter(move |t| t.predicate() == predicate)
    }

    pub fn objects<'a>(
        &'a self,
        subject: &Node,
        predicate: &'a Iri,
    ) -> impl Iterator<Item = &'a Node> + 'a {
        self.with_subject_predicate(subject, predicate)
            .map(Triple::object)
    }

    pub fn subjects<'a>(
        &'a self,
        predicate: &'a Iri,
        object: &Node,
    ) -> impl Iterator<Item = &'a Node> + 'a {
        self.with_object(object)
            .filter(move |t| t.predicate() == predicate)
            .map(Triple::subject)
    }

    pub fn object(&self, subject: &Node, predicate: &Iri) -> Option<&Node> {
        self.with_subject(subject)
            .find(|t| t.predicate() == predicate)
            .map(Triple::object)
    }

    /// `(node, rdf:type, *)` triples.
    pub fn type_triples<'a>(&'a self, node: &Node) -> impl Iterator<Item = &'a Triple> + 'a {
        self.with_subject(node)
            .filter(|t| t.predicate().as_str() == vocab::rdf::TYPE)
    }

    pub fn has_type(&self, node: &Node, class: &Iri) -> bool {
        self.type_triples(node)
            .any(|t| t.object().as_iri() == Some(class))
    }

    /// Whether the term occurs anywhere in the graph.
    pub fn contains_term(&self, node: &Node) -> bool {
        if self.by_subject.contains_key(node) || self.by_object.contains_key(node) {
            return true;
        }
        match node {
            Node::Iri(iri) => self.predicates.contains_key(iri),
            _ => false,
        }
    }

    /// Distinct subject and object terms in first-occurrence order.
    pub fn nodes(&self) -> IndexSet<Node> {
        let mut out = IndexSet::new();
        for t in &self.triples {
            out.insert(t.subject().clone());
            out.insert(t.object().clone());
        }
        out
    }

    /// Distinct subjects in first-occurrence order.
    pub fn subject_nodes(&self) -> IndexSet<Node> {
        self.triples.iter().map(|t| t.subject().clone()).collect()
    }

    /// A graph holding the given triples with this graph's prefixes.
    pub fn subgraph<'a, I: IntoIterator<Item = &'a Triple>>(&self, triples: I) -> Graph {
        let mut g = Graph::with_prefixes(self.prefixes.clone());
        g.extend(triples.into_iter().cloned());
        g
    }

    pub fn is_subset_of(&self, other: &Graph) -> bool {
        self.triples.iter().all(|t| other.contains(t))
    }

    pub fn into_triples(self) -> impl Iterator<Item = Triple> {
        self.triples.into_iter()
    }
}

fn unindex(index: &mut HashMap<Node, IndexSet<Triple>>, key: &Node, triple: &Triple) {
    if let Some(set) = index.get_mut(key) {
        set.shift_remove(triple);
        if set.is_empty() {
            index.remove(key);
        }
    }
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.is_subset_of(other)
    }
}

impl Eq for Graph {}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.triples.iter()).finish()
    }
}

impl FromIterator<Triple> for Graph {
    fn from_iter<T: IntoIterator<Item = Triple>>(iter: T) -> Self {
        let mut g = Graph::new();
        g.extend(iter);
        g
    }
}

impl<'a> IntoIterator for &'a Graph {
    type Item = &'a Triple;
    type IntoIter = indexmap::set::Iter<'a, Triple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}
