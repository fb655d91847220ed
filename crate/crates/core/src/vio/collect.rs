//! Depth-first collection of normalized products over the expansion trees.
//!
//! There is one tree per constraint of every DFS root shape. Trees are
//! visited round-robin, one descent at a time; each descent follows open
//! (not yet exhausted) children chosen by a [`ChoicePolicy`] until it hits a
//! leaf or a dead end.

use std::collections::{HashMap, HashSet, VecDeque};

use indexmap::IndexSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::expand::{expand, Expansion, ProductChildren};
use super::{TermTarget, VioProduct, VioTerm};
use crate::rdf::{Compactor, Graph, Node};
use crate::shacl::{Constraint, Manifest, ShapeId};
use crate::validator::Evaluator;

/// When to stop collecting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PathMode {
    /// Stop once every violable constraint lies on a collected path.
    #[default]
    First,
    /// Exhaust every tree.
    All,
}

#[derive(Clone, Debug)]
pub struct CollectOptions {
    pub mode: PathMode,
    pub max_descents: usize,
    /// Consecutive descents without progress before giving up. Progress is new
    /// coverage in [`PathMode::First`] and a new plan in [`PathMode::All`].
    pub max_stall: usize,
}

impl Default for CollectOptions {
    fn default() -> Self {
        CollectOptions {
            mode: PathMode::First,
            max_descents: 10_000,
            max_stall: 1_000,
        }
    }
}

/// One collected normalized product.
#[derive(Clone, Debug)]
pub struct Plan {
    pub tree: usize,
    /// Child ordinals from the tree root.
    pub path: Vec<u128>,
    pub product: VioProduct,
    /// Manifest constraints named anywhere on the path, root included.
    pub coverage: Vec<(ShapeId, usize)>,
}

impl Plan {
    pub fn render(&self, m: &Manifest, c: &Compactor) -> String {
        self.product.render(m, c)
    }
}

#[derive(Clone, Debug)]
pub struct Collection {
    pub roots: Vec<VioProduct>,
    pub plans: Vec<Plan>,
    /// Constraints the collection tries to cover.
    pub target: IndexSet<(ShapeId, usize)>,
    pub covered: IndexSet<(ShapeId, usize)>,
    pub complete: bool,
    pub descents: usize,
    pub warnings: Vec<String>,
}

impl Collection {
    pub fn uncovered(&self) -> Vec<(ShapeId, usize)> {
        self.target
            .iter()
            .filter(|k| !self.covered.contains(*k))
            .cloned()
            .collect()
    }
}

/// The children of the node being descended, as seen by a policy.
pub struct ChildView<'a> {
    count: u128,
    closed: &'a HashSet<u128>,
}

impl ChildView<'_> {
    pub fn len(&self) -> u128 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_open(&self, i: u128) -> bool {
        i < self.count && !self.closed.contains(&i)
    }

    /// Open ordinals in order, or `None` when there are more than `limit` children.
    pub fn open(&self, limit: u128) -> Option<Vec<u128>> {
        (self.count <= limit).then(|| {
            (0..self.count)
                .filter(|i| !self.closed.contains(i))
                .collect()
        })
    }
}

/// Decides which tree to descend next and which child to follow.
pub trait ChoicePolicy {
    /// The next tree among `open`, or `None` to stop collecting.
    fn next_tree(&mut self, open: &[usize]) -> Option<usize>;
    /// An open child ordinal, or `None` to stop collecting.
    fn choose(&mut self, tree: usize, children: &ChildView) -> Option<u128>;
}

/// Uniform choices from a ChaCha8 stream per tree, trees round-robin.
pub struct SeededPolicy {
    seed: u64,
    rngs: HashMap<usize, ChaCha8Rng>,
    last: Option<usize>,
}

impl SeededPolicy {
    pub fn new(seed: u64) -> Self {
        SeededPolicy {
            seed,
            rngs: HashMap::new(),
            last: None,
        }
    }
}

impl ChoicePolicy for SeededPolicy {
    fn next_tree(&mut self, open: &[usize]) -> Option<usize> {
        let next = match self.last {
            Some(last) => open
                .iter()
                .copied()
                .find(|t| *t > last)
                .or(open.first().copied()),
            None => open.first().copied(),
        };
        self.last = next;
        next
    }

    fn choose(&mut self, tree: usize, children: &ChildView) -> Option<u128> {
        let seed = self.seed;
        let rng = self.rngs.entry(tree).or_insert_with(|| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(tree as u64);
            r
        });
        if let Some(open) = children.open(4096) {
            return (!open.is_empty()).then(|| open[rng.gen_range(0..open.len())]);
        }
        for _ in 0..64 {
            let i = rng.gen_range(0..children.len());
            if children.is_open(i) {
                return Some(i);
            }
        }
        let start = rng.gen_range(0..children.len());
        (start..children.len())
            .chain(0..start)
            .find(|i| children.is_open(*i))
    }
}

/// Follows fixed ordinal paths, one per descent, then stops.
pub struct ScriptedPolicy {
    paths: VecDeque<(usize, VecDeque<u128>)>,
    current: VecDeque<u128>,
}

impl ScriptedPolicy {
    /// Paths given as `(tree, ordinals)`.
    pub fn new(paths: impl IntoIterator<Item = (usize, Vec<u128>)>) -> Self {
        ScriptedPolicy {
            paths: paths.into_iter().map(|(t, p)| (t, p.into())).collect(),
            current: VecDeque::new(),
        }
    }

    /// Paths that all start in tree 0.
    pub fn single_tree(paths: &[&[u128]]) -> Self {
        Self::new(paths.iter().map(|p| (0, p.to_vec())))
    }
}

impl ChoicePolicy for ScriptedPolicy {
    fn next_tree(&mut self, open: &[usize]) -> Option<usize> {
        let (tree, path) = self.paths.pop_front()?;
        self.current = path;
        open.contains(&tree).then_some(tree)
    }

    fn choose(&mut self, _tree: usize, children: &ChildView) -> Option<u128> {
        let i = self.current.pop_front()?;
        children.is_open(i).then_some(i)
    }
}

enum State {
    Unexpanded,
    Leaf,
    Dead,
    Inner(ProductChildren),
}

struct Slot {
    product: VioProduct,
    parent: Option<usize>,
    ordinal: u128,
    state: State,
    children: HashMap<u128, usize>,
    closed: HashSet<u128>,
    exhausted: bool,
}

enum Descent {
    Leaf(usize),
    DeadEnd,
    Abort,
}

struct Forest<'a> {
    ev: Evaluator<'a>,
    slots: Vec<Slot>,
}

impl Forest<'_> {
    fn push(&mut self, product: VioProduct, parent: Option<usize>, ordinal: u128) -> usize {
        self.slots.push(Slot {
            product,
            parent,
            ordinal,
            state: State::Unexpanded,
            children: HashMap::new(),
            closed: HashSet::new(),
            exhausted: false,
        });
        self.slots.len() - 1
    }

    fn close(&mut self, mut id: usize) {
        loop {
            self.slots[id].exhausted = true;
            let Some(parent) = self.slots[id].parent else {
                return;
            };
            let ordinal = self.slots[id].ordinal;
            let p = &mut self.slots[parent];
            p.closed.insert(ordinal);
            let full = match &p.state {
                State::Inner(ch) => p.closed.len() as u128 >= ch.len(),
                _ => true,
            };
            if !full {
                return;
            }
            id = parent;
        }
    }

    fn descend(&mut self, tree: usize, root: usize, policy: &mut dyn ChoicePolicy) -> Descent {
        let mut id = root;
        loop {
            if matches!(self.slots[id].state, State::Unexpanded) {
                self.slots[id].state = match expand(&self.slots[id].product, &self.ev) {
                    Expansion::Leaf => State::Leaf,
                    Expansion::Dead => State::Dead,
                    Expansion::Step(_, ch) => State::Inner(ch),
                };
            }
            let next = match &self.slots[id].state {
                State::Leaf => {
                    self.close(id);
                    return Descent::Leaf(id);
                }
                State::Dead | State::Unexpanded => {
                    self.close(id);
                    return Descent::DeadEnd;
                }
                State::Inner(ch) => {
                    let slot = &self.slots[id];
                    let view = ChildView {
                        count: ch.len(),
                        closed: &slot.closed,
                    };
                    let Some(i) = policy.choose(tree, &view) else {
                        return Descent::Abort;
                    };
                    match slot.children.get(&i) {
                        Some(c) => *c,
                        None => {
                            let product = ch.get(i);
                            let c = self.push(product, Some(id), i);
                            self.slots[id].children.insert(i, c);
                            c
                        }
                    }
                }
            };
            id = next;
        }
    }

    fn path_of(&self, mut id: usize) -> (Vec<u128>, Vec<(ShapeId, usize)>) {
        let mut ordinals = Vec::new();
        let mut chain = Vec::new();
        loop {
            chain.push(id);
            let slot = &self.slots[id];
            match slot.parent {
                Some(p) => {
                    ordinals.push(slot.ordinal);
                    id = p;
                }
                None => break,
            }
        }
        ordinals.reverse();
        chain.reverse();
        let mut coverage = IndexSet::new();
        for id in chain {
            for t in self.slots[id].product.terms() {
                if let TermTarget::Manifest { shape, index } = &t.target {
                    coverage.insert((shape.clone(), *index));
                }
            }
        }
        (ordinals, coverage.into_iter().collect())
    }
}

/// Shapes that seed expansion trees: targeted shapes not reachable, through
/// expandable references, from another targeted shape.
pub fn dfs_roots(g: &Graph, m: &Manifest) -> Vec<(ShapeId, Vec<Node>)> {
    let targeted: Vec<(ShapeId, Vec<Node>)> = m
        .dependency_order()
        .iter()
        .map(|id| {
            (
                id.clone(),
                m.shape(id).target_nodes(g).into_iter().collect::<Vec<_>>(),
            )
        })
        .filter(|(_, t)| !t.is_empty())
        .collect();
    let mut shadowed: HashSet<ShapeId> = HashSet::new();
    for (id, _) in &targeted {
        let reach = reachable(m, (0..m.shape(id).len()).map(|i| (id.clone(), i)));
        shadowed.extend(reach.into_iter().map(|(s, _)| s).filter(|s| s != id));
    }
    targeted
        .into_iter()
        .filter(|(id, _)| !shadowed.contains(id))
        .collect()
}

/// Constraints reachable from `start` without passing through a qualified maximum.
fn reachable(
    m: &Manifest,
    start: impl IntoIterator<Item = (ShapeId, usize)>,
) -> IndexSet<(ShapeId, usize)> {
    let mut seen: IndexSet<(ShapeId, usize)> = IndexSet::new();
    let mut queue: VecDeque<(ShapeId, usize)> = start.into_iter().collect();
    while let Some(k) = queue.pop_front() {
        if !seen.insert(k.clone()) {
            continue;
        }
        let c = m.shape(&k.0).constraint(k.1);
        if c.is_shape_based() {
            for r in c.references() {
                queue.extend((0..m.shape(r).len()).map(|j| (r.clone(), j)));
            }
        }
    }
    seen
}

/// Why a constraint can never be violated by an edit, if it cannot.
fn unviolable(m: &Manifest, shape: &ShapeId, index: usize) -> Option<&'static str> {
    let c = m.shape(shape).constraint(index);
    match c {
        Constraint::MinCount(0) => Some("sh:minCount 0 always holds"),
        Constraint::QualifiedMin { count: 0, .. } => Some("sh:qualifiedMinCount 0 always holds"),
        _ if !VioTerm::manifest(shape.clone(), index, Vec::new()).is_materializable(m) => {
            Some("a value constraint on a node shape can only fail by changing the focus node")
        }
        _ => None,
    }
}

/// Collects plans with a seeded policy.
pub fn collect_plans(g: &Graph, m: &Manifest, seed: u64, opts: &CollectOptions) -> Collection {
    collect_with(g, m, opts, &mut SeededPolicy::new(seed))
}

pub fn collect_with(
    g: &Graph,
    m: &Manifest,
    opts: &CollectOptions,
    policy: &mut dyn ChoicePolicy,
) -> Collection {
    let c = Compactor::new(m.prefixes());
    let name = |(s, i): &(ShapeId, usize)| {
        format!(
            "{} #{i} ({})",
            c.iri(s.iri()),
            m.shape(s).constraint(*i).describe(&c)
        )
    };
    let mut warnings = Vec::new();

    let mut forest = Forest {
        ev: Evaluator::new(g, m),
        slots: Vec::new(),
    };
    let mut roots = Vec::new();
    let mut tree_roots = Vec::new();
    let mut tree_reach = Vec::new();
    for (shape, targets) in dfs_roots(g, m) {
        for i in 0..m.shape(&shape).len() {
            let product = VioProduct::single(VioTerm::manifest(shape.clone(), i, targets.clone()));
            tree_roots.push(forest.push(product.clone(), None, 0));
            roots.push(product);
            tree_reach.push(reachable(m, [(shape.clone(), i)]));
        }
    }

    let mut target = IndexSet::new();
    for reach in &tree_reach {
        for k in reach {
            if target.contains(k) {
                continue;
            }
            match unviolable(m, &k.0, k.1) {
                Some(why) => warnings.push(format!("skipping {}: {why}", name(k))),
                None => {
                    target.insert(k.clone());
                }
            }
        }
    }
    for k in m.constraint_ids() {
        if !tree_reach.iter().any(|r| r.contains(&k)) {
            warnings.push(format!(
                "skipping {}: not reachable from a targeted shape except through a qualified maximum",
                name(&k)
            ));
        }
    }
    let tree_reach: Vec<IndexSet<(ShapeId, usize)>> = tree_reach
        .into_iter()
        .map(|r| r.into_iter().filter(|k| target.contains(k)).collect())
        .collect();

    let mut plans = Vec::new();
    let mut covered: IndexSet<(ShapeId, usize)> = IndexSet::new();
    let mut descents = 0;
    let mut stall = 0;
    loop {
        if opts.mode == PathMode::First && target.iter().all(|k| covered.contains(k)) {
            break;
        }
        let open: Vec<usize> = (0..tree_roots.len())
            .filter(|t| !forest.slots[tree_roots[*t]].exhausted)
            .filter(|t| {
                opts.mode == PathMode::All || tree_reach[*t].iter().any(|k| !covered.contains(k))
            })
            .collect();
        if open.is_empty() {
            break;
        }
        if descents >= opts.max_descents {
            warnings.push(format!("stopped after {descents} descents"));
            break;
        }
        if stall >= opts.max_stall {
            warnings.push(format!("stopped after {stall} descents without progress"));
            break;
        }
        let Some(tree) = policy.next_tree(&open) else {
            break;
        };
        descents += 1;
        match forest.descend(tree, tree_roots[tree], policy) {
            Descent::Leaf(id) => {
                let (path, coverage) = forest.path_of(id);
                let before = covered.len();
                covered.extend(coverage.iter().filter(|k| target.contains(*k)).cloned());
                let progress = match opts.mode {
                    PathMode::First => covered.len() > before,
                    PathMode::All => true,
                };
                stall = if progress { 0 } else { stall + 1 };
                plans.push(Plan {
                    tree,
                    path,
                    product: forest.slots[id].product.clone(),
                    coverage,
                });
            }
            Descent::DeadEnd => stall += 1,
            Descent::Abort => break,
        }
    }

    let complete = target.iter().all(|k| covered.contains(k));
    for k in target.iter().filter(|k| !covered.contains(*k)) {
        warnings.push(format!("not covered: {}", name(k)));
    }
    Collection {
        roots,
        plans,
        target,
        covered,
        complete,
        descents,
        warnings,
    }
}
