//! One rewriting step on a product of VIO terms.
//!
//! Children of a product are enumerated lazily: a qualified expansion over a
//! large `ψ` has exponentially many alternatives, so each child is decoded
//! from its ordinal on demand.

use indexmap::IndexSet;

use super::{TermTarget, VioProduct, VioTerm};
use crate::rdf::{Iri, Node};
use crate::shacl::{Constraint, Manifest, ShapeId};
use crate::validator::Evaluator;

/// Which rewrite rule produced a set of children.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Replace a term by the sum of the constraints of the shapes it names.
    Decompose,
    /// Replace a qualified minimum (or a disjunction) by the sum of ways to
    /// make enough conforming values stop conforming.
    Qualified,
}

/// The alternatives one factor rewrites to; each is a fragment of terms that
/// replaces the factor in the product.
#[derive(Clone, Debug)]
pub enum Alternatives {
    List(Vec<Vec<VioTerm>>),
    Qualified(Vec<QualifiedBlock>),
}

/// The children contributed by one focus node of a qualified minimum: every
/// `k`-subset of `psi`, each element either losing conformance (`v_node`) or
/// its edge (`f_v_prop`).
#[derive(Clone, Debug)]
pub struct QualifiedBlock {
    focus: Node,
    path: Iri,
    shape: ShapeId,
    psi: Vec<Node>,
    k: usize,
}

impl QualifiedBlock {
    fn len(&self) -> u128 {
        binomial(self.psi.len() as u128, self.k as u128).saturating_mul(pow2(self.k))
    }

    fn get(&self, i: u128) -> Vec<VioTerm> {
        let assignments = pow2(self.k);
        let subset = unrank_combination(self.psi.len(), self.k, i / assignments);
        let bits = i % assignments;
        subset
            .into_iter()
            .enumerate()
            .map(|(j, idx)| {
                let v = self.psi[idx].clone();
                let shift = self.k - 1 - j;
                let prop = shift < 128 && (bits >> shift) & 1 == 1;
                if prop {
                    VioTerm {
                        target: TermTarget::ValueEdge {
                            focus: self.focus.clone(),
                            path: self.path.clone(),
                            value: v,
                        },
                        focus: vec![self.focus.clone()],
                    }
                } else {
                    VioTerm {
                        target: TermTarget::ValueNode {
                            node: v.clone(),
                            shape: self.shape.clone(),
                        },
                        focus: vec![v],
                    }
                }
            })
            .collect()
    }
}

impl Alternatives {
    pub fn len(&self) -> u128 {
        match self {
            Alternatives::List(l) => l.len() as u128,
            Alternatives::Qualified(blocks) => blocks
                .iter()
                .fold(0u128, |acc, b| acc.saturating_add(b.len())),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, mut i: u128) -> Vec<VioTerm> {
        match self {
            Alternatives::List(l) => l[i as usize].clone(),
            Alternatives::Qualified(blocks) => {
                for b in blocks {
                    let n = b.len();
                    if i < n {
                        return b.get(i);
                    }
                    i -= n;
                }
                panic!("alternative ordinal out of range")
            }
        }
    }
}

/// The children of an expanded product: the factors at `slots` are replaced
/// simultaneously, the first slot varying slowest.
#[derive(Clone, Debug)]
pub struct ProductChildren {
    base: VioProduct,
    slots: Vec<(usize, Alternatives)>,
}

impl ProductChildren {
    pub fn len(&self) -> u128 {
        self.slots
            .iter()
            .fold(1u128, |acc, (_, a)| acc.saturating_mul(a.len()))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, mut i: u128) -> VioProduct {
        let mut picks = vec![0u128; self.slots.len()];
        for (k, (_, alts)) in self.slots.iter().enumerate().rev() {
            let n = alts.len();
            picks[k] = i % n;
            i /= n;
        }
        let mut out = Vec::new();
        let mut slot = 0;
        for (idx, term) in self.base.0.iter().enumerate() {
            if slot < self.slots.len() && self.slots[slot].0 == idx {
                out.extend(self.slots[slot].1.get(picks[slot]));
                slot += 1;
            } else {
                out.push(term.clone());
            }
        }
        VioProduct(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = VioProduct> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }
}

/// The outcome of one rewriting step on a product.
#[derive(Clone, Debug)]
pub enum Expansion {
    /// Normalized and every term has an edit.
    Leaf,
    /// Normalized but unmaterializable, or a factor rewrites to nothing.
    Dead,
    Step(Rule, ProductChildren),
}

/// One rewriting step.
///
/// Qualified factors are rewritten first and alone, so each step applies a
/// single rule. Otherwise every shape-based factor is decomposed at once.
pub fn expand(p: &VioProduct, ev: &Evaluator) -> Expansion {
    let m = ev.manifest();
    if p.is_normalized(m) {
        return if p.0.iter().all(|t| t.is_materializable(m)) {
            Expansion::Leaf
        } else {
            Expansion::Dead
        };
    }
    let qualified: Vec<usize> =
        p.0.iter()
            .enumerate()
            .filter(|(_, t)| {
                matches!(
                    t.constraint(m),
                    Some(Constraint::QualifiedMin { .. } | Constraint::Or(_))
                )
            })
            .map(|(i, _)| i)
            .collect();
    let (rule, positions) = if qualified.is_empty() {
        let shaped =
            p.0.iter()
                .enumerate()
                .filter(|(_, t)| t.is_shape_based(m))
                .map(|(i, _)| i)
                .collect();
        (Rule::Decompose, shaped)
    } else {
        (Rule::Qualified, qualified)
    };
    let slots: Vec<(usize, Alternatives)> = positions
        .into_iter()
        .map(|i| (i, alternatives(&p.0[i], ev)))
        .collect();
    let children = ProductChildren {
        base: p.clone(),
        slots,
    };
    if children.is_empty() {
        Expansion::Dead
    } else {
        Expansion::Step(rule, children)
    }
}

fn shape_terms(shape: &ShapeId, focus: &[Node], m: &Manifest) -> Vec<Vec<VioTerm>> {
    (0..m.shape(shape).len())
        .map(|j| vec![VioTerm::manifest(shape.clone(), j, focus.to_vec())])
        .collect()
}

/// The alternatives of a single shape-based term.
fn alternatives(t: &VioTerm, ev: &Evaluator) -> Alternatives {
    let m = ev.manifest();
    let g = ev.graph();
    match &t.target {
        TermTarget::ValueNode { node, shape } => {
            Alternatives::List(shape_terms(shape, std::slice::from_ref(node), m))
        }
        TermTarget::ValueEdge { .. } => Alternatives::List(Vec::new()),
        TermTarget::Manifest { shape, index } => {
            let s = m.shape(shape);
            let values = || -> Vec<Node> {
                let set: IndexSet<Node> =
                    t.focus.iter().flat_map(|f| s.value_nodes(f, g)).collect();
                set.into_iter().collect()
            };
            match s.constraint(*index) {
                Constraint::Node(r) | Constraint::Property(r) => {
                    let v = values();
                    if v.is_empty() {
                        return Alternatives::List(Vec::new());
                    }
                    Alternatives::List(shape_terms(r, &v, m))
                }
                Constraint::And(list) => {
                    let v = values();
                    if v.is_empty() {
                        return Alternatives::List(Vec::new());
                    }
                    Alternatives::List(list.iter().flat_map(|r| shape_terms(r, &v, m)).collect())
                }
                Constraint::Or(list) => Alternatives::List(
                    values()
                        .into_iter()
                        .map(|v| {
                            list.iter()
                                .map(|r| VioTerm {
                                    target: TermTarget::ValueNode {
                                        node: v.clone(),
                                        shape: r.clone(),
                                    },
                                    focus: vec![v.clone()],
                                })
                                .collect()
                        })
                        .collect(),
                ),
                Constraint::QualifiedMin { shape: q, count } => {
                    let path = s
                        .path
                        .clone()
                        .expect("qualified constraints sit on property shapes");
                    let blocks = t
                        .focus
                        .iter()
                        .filter_map(|f| {
                            let psi: Vec<Node> = s
                                .value_nodes(f, g)
                                .into_iter()
                                .filter(|v| ev.eval(v, q).conforms())
                                .collect();
                            let k = (psi.len() as u64 + 1).checked_sub(*count)?;
                            if k == 0 || k as usize > psi.len() {
                                return None;
                            }
                            Some(QualifiedBlock {
                                focus: f.clone(),
                                path: path.clone(),
                                shape: q.clone(),
                                psi,
                                k: k as usize,
                            })
                        })
                        .collect();
                    Alternatives::Qualified(blocks)
                }
                _ => Alternatives::List(Vec::new()),
            }
        }
    }
}

fn pow2(k: usize) -> u128 {
    if k >= 127 {
        u128::MAX
    } else {
        1u128 << k
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        match acc.checked_mul(n - i) {
            Some(x) => acc = x / (i + 1),
            None => return u128::MAX,
        }
    }
    acc
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
pub(crate) fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for remaining in (1..=k).rev() {
        let mut c = next;
        loop {
            let count = binomial((n - c - 1) as u128, (remaining - 1) as u128);
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        next = c + 1;
    }
    out
}
