use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};

use super::{BlankId, Graph, Literal, Node, Triple};

/// The lexical form every literal takes under [`relax_literals`].
pub const PLACEHOLDER: &str = "placeholder";

/// Replaces every literal by the plain literal [`PLACEHOLDER`].
pub fn relax_literals(graph: &Graph) -> Graph {
    let mut out = Graph::with_prefixes(graph.prefixes().clone());
    for t in graph {
        out.insert(t.map_nodes(|n| match n {
            Node::Literal(_) => Node::Literal(Literal::plain(PLACEHOLDER)),
            other => other.clone(),
        }));
    }
    out
}

/// Isomorphism after replacing all literals by a placeholder.
pub fn relaxed_isomorphic(a: &Graph, b: &Graph) -> bool {
    isomorphic(&relax_literals(a), &relax_literals(b))
}

/// Graph isomorphism: equality up to a bijective renaming of blank nodes.
pub fn isomorphic(a: &Graph, b: &Graph) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let (ground_a, blank_a): (Vec<&Triple>, Vec<&Triple>) = a.iter().partition(|t| is_ground(t));
    let blank_b_count = b.iter().filter(|t| !is_ground(t)).count();
    if blank_a.len() != blank_b_count || !ground_a.iter().all(|t| b.contains(t)) {
        return false;
    }
    if blank_a.is_empty() {
        return true;
    }
    let sa = Side::new(a);
    let sb = Side::new(b);
    if sa.blanks.len() != sb.blanks.len() {
        return false;
    }
    let ca: HashMap<BlankId, u64> = sa.blanks.iter().map(|b| (b.clone(), 0)).collect();
    let cb: HashMap<BlankId, u64> = sb.blanks.iter().map(|b| (b.clone(), 0)).collect();
    search(&sa, &sb, ca, cb, a, b)
}

fn is_ground(t: &Triple) -> bool {
    !t.subject().is_blank() && !t.object().is_blank()
}

type Edge = (bool, u64, Option<BlankId>);

struct Side {
    blanks: Vec<BlankId>,
    // per blank: (is_incoming, hash of predicate and ground neighbour, blank neighbour)
    edges: HashMap<BlankId, Vec<Edge>>,
}

impl Side {
    fn new(g: &Graph) -> Self {
        let mut edges: HashMap<BlankId, Vec<Edge>> = HashMap::new();
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        for t in g.iter().filter(|t| !is_ground(t)) {
            let ends = [
                (t.subject(), t.object(), false),
                (t.object(), t.subject(), true),
            ];
            for (this, other, incoming) in ends {
                let Node::Blank(id) = this else { continue };
                if seen.insert(id.clone()) {
                    order.push(id.clone());
                }
                let (ground, blank) = match other {
                    Node::Blank(o) => (hash_of(&(t.predicate(), "blank")), Some(o.clone())),
                    n => (hash_of(&(t.predicate(), n)), None),
                };
                edges
                    .entry(id.clone())
                    .or_default()
                    .push((incoming, ground, blank));
            }
        }
        Side {
            blanks: order,
            edges,
        }
    }

    fn refine_once(&self, colours: &HashMap<BlankId, u64>) -> HashMap<BlankId, u64> {
        self.blanks
            .iter()
            .map(|b| {
                let mut sig: Vec<(bool, u64, u64)> = self.edges[b]
                    .iter()
                    .map(|(inc, g, other)| (*inc, *g, other.as_ref().map_or(0, |o| colours[o])))
                    .collect();
                sig.sort_unstable();
                (b.clone(), hash_of(&(colours[b], sig)))
            })
            .collect()
    }
}

fn hash_of<T: Hash>(value: &T) -> u64 {
    let mut h = DefaultHasher::new();
    value.hash(&mut h);
    h.finish()
}

fn class_count(c: &HashMap<BlankId, u64>) -> usize {
    c.values().collect::<HashSet<_>>().len()
}

fn histogram(c: &HashMap<BlankId, u64>) -> HashMap<u64, usize> {
    let mut h = HashMap::new();
    for v in c.values() {
        *h.entry(*v).or_default() += 1;
    }
    h
}

fn refine(
    sa: &Side,
    sb: &Side,
    mut ca: HashMap<BlankId, u64>,
    mut cb: HashMap<BlankId, u64>,
) -> (HashMap<BlankId, u64>, HashMap<BlankId, u64>) {
    loop {
        let before = class_count(&ca);
        let na = sa.refine_once(&ca);
        let nb = sb.refine_once(&cb);
        let stable = class_count(&na) == before;
        ca = na;
        cb = nb;
        if stable {
            return (ca, cb);
        }
    }
}

fn search(
    sa: &Side,
    sb: &Side,
    ca: HashMap<BlankId, u64>,
    cb: HashMap<BlankId, u64>,
    a: &Graph,
    b: &Graph,
) -> bool {
    let (ca, cb) = refine(sa, sb, ca, cb);
    let ha = histogram(&ca);
    if ha != histogram(&cb) {
        return false;
    }
    let pick = sa
        .blanks
        .iter()
        .filter(|x| ha[&ca[*x]] > 1)
        .min_by_key(|x| (ha[&ca[*x]], ca[*x]));
    let Some(x) = pick else {
        let by_colour: HashMap<u64, &BlankId> = cb.iter().map(|(k, v)| (*v, k)).collect();
        let mapping: HashMap<&BlankId, &BlankId> =
            ca.iter().map(|(k, v)| (k, by_colour[v])).collect();
        return a.iter().all(|t| {
            b.contains(&t.map_nodes(|n| match n {
                Node::Blank(id) => Node::Blank(mapping[id].clone()),
                other => other.clone(),
            }))
        });
    };
    let target = ca[x];
    let marked = hash_of(&(target, "individualized"));
    for y in sb.blanks.iter().filter(|y| cb[*y] == target) {
        let mut na = ca.clone();
        let mut nb = cb.clone();
        na.insert(x.clone(), marked);
        nb.insert(y.clone(), marked);
        if search(sa, sb, na, nb, a, b) {
            return true;
        }
    }
    false
}
