//! Query-plan algebra: plan trees, maximal left-deep fragments, the
//! replacement sequence that abstracts fragments as virtual relations, nice
//! plan validation, tree merging, and the construction of a join tree from a
//! (possibly bushy) plan.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::jointree::{
    check_reverse_gyo, compute_key, join_attrs, recover_join_tree, GyoViolation, JoinTree,
};
use crate::relmodel::{Attr, AttrSet, RelationDecl, Schema};

/// A binary join plan over relation leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Plan {
    Leaf(RelationDecl),
    Join(Box<Plan>, Box<Plan>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Location of a subplan as a root-to-node path.
pub type SubplanPath = Vec<Side>;

impl Plan {
    pub fn leaf(decl: RelationDecl) -> Self {
        Plan::Leaf(decl)
    }

    pub fn join(left: Plan, right: Plan) -> Self {
        Plan::Join(Box::new(left), Box::new(right))
    }

    /// Left-deep plan over `seq` (the first leaf is the outermost scan).
    pub fn left_deep(seq: &[RelationDecl]) -> Self {
        let mut it = seq.iter().cloned();
        let first = Plan::Leaf(it.next().expect("left_deep needs at least one relation"));
        it.fold(first, |acc, r| Plan::join(acc, Plan::Leaf(r)))
    }

    /// Parses `plan := name | "(" plan " " plan ")"`, resolving names against
    /// `catalog`.
    pub fn parse(text: &str, catalog: &[RelationDecl]) -> Result<Plan> {
        let mut p = PlanParser { src: text.as_bytes(), pos: 0, catalog };
        p.skip_ws();
        let plan = p.plan()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        let names = plan.leaves();
        let distinct: BTreeSet<&str> = names.iter().map(|r| r.name.as_str()).collect();
        if distinct.len() != names.len() {
            return Err(Error::PlanParse { pos: 0, msg: "relation appears more than once".into() });
        }
        Ok(plan)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Plan::Leaf(_))
    }

    pub fn leaves(&self) -> Vec<RelationDecl> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<RelationDecl>) {
        match self {
            Plan::Leaf(r) => out.push(r.clone()),
            Plan::Join(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    pub fn leftmost(&self) -> &RelationDecl {
        match self {
            Plan::Leaf(r) => r,
            Plan::Join(l, _) => l.leftmost(),
        }
    }

    pub fn attrs(&self) -> AttrSet {
        self.leaves().iter().flat_map(|r| r.attr_set()).collect()
    }

    pub fn join_count(&self) -> usize {
        match self {
            Plan::Leaf(_) => 0,
            Plan::Join(l, r) => 1 + l.join_count() + r.join_count(),
        }
    }

    /// Every right child is a leaf (and so is the leftmost join's left child).
    pub fn is_left_deep(&self) -> bool {
        match self {
            Plan::Leaf(_) => true,
            Plan::Join(l, r) => r.is_leaf() && l.is_left_deep(),
        }
    }

    pub fn subplan(&self, path: &[Side]) -> &Plan {
        path.iter().fold(self, |p, side| match (p, side) {
            (Plan::Join(l, _), Side::Left) => l,
            (Plan::Join(_, r), Side::Right) => r,
            (Plan::Leaf(_), _) => panic!("path descends below a leaf"),
        })
    }

    /// Copy of `self` with the subplan at `path` replaced.
    pub fn replaced(&self, path: &[Side], with: Plan) -> Plan {
        match path.split_first() {
            None => with,
            Some((side, rest)) => match self {
                Plan::Join(l, r) => match side {
                    Side::Left => Plan::join(l.replaced(rest, with), (**r).clone()),
                    Side::Right => Plan::join((**l).clone(), r.replaced(rest, with)),
                },
                Plan::Leaf(_) => panic!("path descends below a leaf"),
            },
        }
    }

    /// Copy of `self` without the leaf named `name`; its sibling takes the
    /// place of their join. `None` if the plan is that single leaf.
    pub fn without_leaf(&self, name: &str) -> Option<Plan> {
        match self {
            Plan::Leaf(r) if r.name == name => None,
            Plan::Leaf(_) => Some(self.clone()),
            Plan::Join(l, r) => match (l.without_leaf(name), r.without_leaf(name)) {
                (Some(l), Some(r)) => Some(Plan::join(l, r)),
                (Some(x), None) | (None, Some(x)) => Some(x),
                (None, None) => None,
            },
        }
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Plan::Leaf(r) => f.write_str(&r.name),
            Plan::Join(l, r) => write!(f, "({l} {r})"),
        }
    }
}

struct PlanParser<'a> {
    src: &'a [u8],
    pos: usize,
    catalog: &'a [RelationDecl],
}

impl PlanParser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::PlanParse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn plan(&mut self) -> Result<Plan> {
        match self.src.get(self.pos) {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let l = self.plan()?;
                let before = self.pos;
                self.skip_ws();
                if self.pos == before {
                    return Err(self.err("expected whitespace between join operands"));
                }
                let r = self.plan()?;
                self.skip_ws();
                if self.src.get(self.pos) != Some(&b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(Plan::join(l, r))
            }
            Some(c) if c.is_ascii_alphanumeric() || *c == b'_' => {
                let start = self.pos;
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                self.catalog
                    .iter()
                    .find(|r| r.name == name)
                    .cloned()
                    .map(Plan::Leaf)
                    .ok_or_else(|| Error::UnknownRelation(name.to_string()))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

pub fn leaves(p: &Plan) -> Vec<RelationDecl> {
    p.leaves()
}

pub fn is_left_deep(p: &Plan) -> bool {
    p.is_left_deep()
}

/// The first maximal left-deep subplan met when scanning leaves right to
/// left. `None` for a bare leaf. An empty path means the plan is terminal.
pub fn first_maximal_left_deep_subplan(p: &Plan) -> Option<SubplanPath> {
    match p {
        Plan::Leaf(_) => None,
        Plan::Join(..) if p.is_left_deep() => Some(Vec::new()),
        Plan::Join(l, r) => {
            // Any join subtree contains a left-deep join, so the right side
            // answers unless it is a bare leaf.
            if let Some(mut path) = first_maximal_left_deep_subplan(r) {
                path.insert(0, Side::Right);
                Some(path)
            } else {
                let mut path = first_maximal_left_deep_subplan(l)?;
                path.insert(0, Side::Left);
                Some(path)
            }
        }
    }
}

pub fn is_terminal(p: &Plan) -> bool {
    matches!(first_maximal_left_deep_subplan(p), Some(path) if path.is_empty())
}

/// One replacement: the consumed fragment, the virtual relation standing for
/// it, and the reduced plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplacementStep {
    pub consumed: Plan,
    pub virtual_rel: RelationDecl,
    pub reduced: Plan,
}

/// Attributes of a plan in first-appearance order over its leaves.
fn plan_schema(p: &Plan) -> Schema {
    let mut seen: Vec<Attr> = Vec::new();
    for leaf in p.leaves() {
        for a in leaf.schema.attrs() {
            if !seen.contains(a) {
                seen.push(a.clone());
            }
        }
    }
    Schema::new(seen).expect("plan leaves have nonempty schemas")
}

/// Replaces the first maximal left-deep subplan of `p` by a fresh virtual
/// leaf named `virtual_name`. The input plan is left untouched.
pub fn replacement_step(p: &Plan, virtual_name: &str) -> Result<ReplacementStep> {
    let path = first_maximal_left_deep_subplan(p).ok_or(Error::PlanIsTerminal)?;
    if path.is_empty() {
        return Err(Error::PlanIsTerminal);
    }
    let consumed = p.subplan(&path).clone();
    let virtual_rel = RelationDecl::virtual_rel(virtual_name, plan_schema(&consumed));
    let reduced = p.replaced(&path, Plan::Leaf(virtual_rel.clone()));
    Ok(ReplacementStep { consumed, virtual_rel, reduced })
}

/// Hands out `V1, V2, ...`, skipping names already taken by relations.
struct VirtualNames {
    taken: BTreeSet<String>,
    next: usize,
}

impl VirtualNames {
    fn new(p: &Plan) -> Self {
        VirtualNames {
            taken: p.leaves().into_iter().map(|r| r.name).collect(),
            next: 1,
        }
    }

    fn fresh(&mut self) -> String {
        loop {
            let name = format!("V{}", self.next);
            self.next += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// The full replacement sequence `P^0 -> P^1 -> ... -> P^m` (terminal).
pub fn replacement_sequence(p: &Plan) -> Result<Vec<ReplacementStep>> {
    let mut names = VirtualNames::new(p);
    let mut steps: Vec<ReplacementStep> = Vec::new();
    let mut cur = p.clone();
    while !cur.is_leaf() && !is_terminal(&cur) {
        let step = replacement_step(&cur, &names.fresh())?;
        cur = step.reduced.clone();
        steps.push(step);
    }
    Ok(steps)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NiceViolation {
    /// A join whose operands share no attribute.
    Cartesian { left: Vec<String>, right: Vec<String> },
    /// A fragment at replacement stage `stage` violates reverse-GYO order.
    ReverseGyo { stage: usize, violation: GyoViolation },
    /// A virtual relation whose key no earlier leaf covers.
    VirtualUncovered { stage: usize, relation: String, key: AttrSet },
}

impl fmt::Display for NiceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NiceViolation::Cartesian { left, right } => {
                write!(f, "Cartesian join of [{}] and [{}]", left.join(","), right.join(","))
            }
            NiceViolation::ReverseGyo { stage, violation } => {
                write!(f, "stage {stage} fragment: {violation}")
            }
            NiceViolation::VirtualUncovered { stage, relation, key } => {
                write!(f, "stage {stage}: key {{{}}} of {relation} uncovered", join_attrs(key))
            }
        }
    }
}

fn first_cartesian(p: &Plan) -> Option<NiceViolation> {
    match p {
        Plan::Leaf(_) => None,
        Plan::Join(l, r) => first_cartesian(l).or_else(|| first_cartesian(r)).or_else(|| {
            if l.attrs().is_disjoint(&r.attrs()) {
                let names = |p: &Plan| p.leaves().into_iter().map(|r| r.name).collect();
                Some(NiceViolation::Cartesian { left: names(l), right: names(r) })
            } else {
                None
            }
        }),
    }
}

/// Nice-plan check: no Cartesian joins, every fragment of every replacement
/// stage in reverse-GYO order, and every virtual relation's key covered by
/// an earlier leaf of its reduced plan.
pub fn is_nice(p: &Plan) -> std::result::Result<(), NiceViolation> {
    if let Some(v) = first_cartesian(p) {
        return Err(v);
    }
    let mut names = VirtualNames::new(p);
    let mut cur = p.clone();
    let mut stage = 0;
    loop {
        let Some(path) = first_maximal_left_deep_subplan(&cur) else { return Ok(()) };
        check_reverse_gyo(&cur.subplan(&path).leaves())
            .map_err(|violation| NiceViolation::ReverseGyo { stage, violation })?;
        if path.is_empty() {
            return Ok(());
        }
        let step = replacement_step(&cur, &names.fresh()).expect("non-terminal plan");
        let seq = step.reduced.leaves();
        let j = seq
            .iter()
            .position(|r| r.name == step.virtual_rel.name)
            .expect("virtual leaf is in the reduced plan");
        let key = compute_key(&seq[..j], &seq[j]);
        if !seq[..j].iter().any(|r| key.is_subset(&r.attr_set())) {
            return Err(NiceViolation::VirtualUncovered {
                stage,
                relation: step.virtual_rel.name.clone(),
                key,
            });
        }
        cur = step.reduced;
        stage += 1;
    }
}

/// Union of two trees sharing exactly one node. The result is rooted at the
/// root of the tree in which the shared node is not the root. Merging with
/// the empty tree is the identity.
pub fn merge_trees(t1: &JoinTree, t2: &JoinTree) -> Result<JoinTree> {
    if t2.is_empty() {
        return Ok(t1.clone());
    }
    if t1.is_empty() {
        return Ok(t2.clone());
    }
    let shared: Vec<&str> = t1
        .nodes()
        .iter()
        .filter(|n| t2.contains(&n.name))
        .map(|n| n.name.as_str())
        .collect();
    if shared.len() != 1 {
        return Err(Error::BadOverlap { shared: shared.len() });
    }
    let u = shared[0];
    let root1 = t1.root().expect("nonempty").name.as_str();
    let root2 = t2.root().expect("nonempty").name.as_str();
    // the tree that keeps its root is the one where u hangs below
    let (upper, lower) = match (root1 == u, root2 == u) {
        (false, true) => (t1, t2),
        (true, false) => (t2, t1),
        (true, true) if t1.len() == 1 => (t2, t1),
        (true, true) => (t1, t2),
        (false, false) => {
            return Err(Error::MalformedTree(format!(
                "shared node {u} is the root of neither tree"
            )))
        }
    };
    let mut nodes: Vec<RelationDecl> = upper.nodes().to_vec();
    nodes.extend(lower.nodes().iter().filter(|n| n.name != u).cloned());
    let index = |name: &str| nodes.iter().position(|n| n.name == name).expect("node present");
    let mut parent = vec![None; nodes.len()];
    for (p, c) in upper.edges().into_iter().chain(lower.edges()) {
        parent[index(&c)] = Some(index(&p));
    }
    JoinTree::from_parents(nodes, parent)
}

/// Parent of a fragment leaf inside a fragment tree rooted at the fragment's
/// virtual relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FragmentParent {
    /// Index of an earlier leaf of the fragment.
    Leaf(usize),
    Virtual,
}

/// In the sequence `V, l_1, ..., l_k` every key of `l_j` is all of
/// `Attr(l_j)`, since `Attr(V)` spans the fragment. The smallest earlier real
/// leaf covering that set is preferred; otherwise the virtual root.
pub fn fragment_parent(fragment_seq: &[RelationDecl], fragment_virtual: &RelationDecl, j: usize) -> FragmentParent {
    debug_assert!(j < fragment_seq.len());
    let key: AttrSet = fragment_seq[j]
        .attr_set()
        .intersection(&fragment_virtual.attr_set())
        .cloned()
        .collect();
    (0..j)
        .find(|&i| key.is_subset(&fragment_seq[i].attr_set()))
        .map_or(FragmentParent::Virtual, FragmentParent::Leaf)
}

/// Join tree of a fragment rooted at its virtual relation.
pub fn fragment_tree(fragment_seq: &[RelationDecl], fragment_virtual: &RelationDecl) -> Result<JoinTree> {
    let mut nodes = vec![fragment_virtual.clone()];
    nodes.extend(fragment_seq.iter().cloned());
    let mut parent = vec![None, Some(0)];
    for j in 1..fragment_seq.len() {
        parent.push(Some(match fragment_parent(fragment_seq, fragment_virtual, j) {
            FragmentParent::Leaf(i) => i + 1,
            FragmentParent::Virtual => 0,
        }));
    }
    JoinTree::from_parents(nodes, parent)
}

/// How the terminal fragment is rooted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreeShape {
    /// Terminal fragment rooted at its leftmost leaf; virtual nodes that
    /// duplicate a child's attributes are contracted away.
    #[default]
    Rooted,
    /// Every fragment, including the terminal one, rooted at its own virtual
    /// relation; no contraction.
    AllVirtual,
}

/// One left-deep fragment of the decomposition, in evaluation order.
#[derive(Debug, Clone)]
pub struct Fragment {
    pub leaves: Vec<RelationDecl>,
    /// Virtual relation standing for this fragment's output; `None` for the
    /// terminal fragment in [`TreeShape::Rooted`].
    pub virtual_rel: Option<RelationDecl>,
    /// Tree over this fragment alone.
    pub tree: JoinTree,
    /// Backjump parent of each leaf as an index into `leaves`; `None` for the
    /// first leaf and for leaves hanging directly off the virtual root.
    pub parents: Vec<Option<usize>>,
}

/// Result of the virtual-relation method.
#[derive(Debug, Clone)]
pub struct Construction {
    /// `P^0, ..., P^m`.
    pub stages: Vec<Plan>,
    pub steps: Vec<ReplacementStep>,
    pub fragments: Vec<Fragment>,
    /// Merged tree after each fragment, before any contraction.
    pub intermediate: Vec<JoinTree>,
    /// Final tree (contracted in [`TreeShape::Rooted`]).
    pub tree: JoinTree,
}

/// Runs the replacement sequence, builds a tree for every fragment and
/// merges them. A fragment is merged with every earlier fragment tree whose
/// virtual root it consumes; each merge shares exactly that one node.
pub fn virtual_relation_method(p: &Plan, shape: TreeShape) -> Result<Construction> {
    let steps = replacement_sequence(p)?;
    let mut stages = vec![p.clone()];
    stages.extend(steps.iter().map(|s| s.reduced.clone()));
    let terminal = stages.last().expect("at least P^0").clone();

    let mut pieces: Vec<(Vec<RelationDecl>, Option<RelationDecl>)> = steps
        .iter()
        .map(|s| (s.consumed.leaves(), Some(s.virtual_rel.clone())))
        .collect();
    let terminal_virtual = match shape {
        TreeShape::Rooted => None,
        TreeShape::AllVirtual => {
            let mut names = VirtualNames::new(p);
            for s in &steps {
                names.taken.insert(s.virtual_rel.name.clone());
            }
            Some(RelationDecl::virtual_rel(names.fresh(), plan_schema(&terminal)))
        }
    };
    pieces.push((terminal.leaves(), terminal_virtual));

    let mut fragments = Vec::new();
    let mut pending: Vec<JoinTree> = Vec::new();
    let mut intermediate = Vec::new();
    for (leaves, virtual_rel) in pieces {
        let (tree, parents) = match &virtual_rel {
            Some(v) => {
                let tree = fragment_tree(&leaves, v)?;
                let parents = (0..leaves.len())
                    .map(|j| match j {
                        0 => None,
                        _ => match fragment_parent(&leaves, v, j) {
                            FragmentParent::Leaf(i) => Some(i),
                            FragmentParent::Virtual => None,
                        },
                    })
                    .collect();
                (tree, parents)
            }
            None => {
                let tree = recover_join_tree(&leaves)?;
                let parents = leaves
                    .iter()
                    .map(|l| tree.parent_of(&l.name).map(|p| leaves.iter().position(|x| x.name == p.name).expect("in fragment")))
                    .collect();
                (tree, parents)
            }
        };
        let mut merged = tree.clone();
        for leaf in leaves.iter().filter(|l| l.is_virtual) {
            let k = pending
                .iter()
                .position(|t| t.root().is_some_and(|r| r.name == leaf.name))
                .ok_or_else(|| Error::MalformedTree(format!("no fragment tree for {}", leaf.name)))?;
            let consumed = pending.remove(k);
            merged = merge_trees(&merged, &consumed)?;
        }
        intermediate.push(merged.clone());
        pending.push(merged);
        fragments.push(Fragment { leaves, virtual_rel, tree, parents });
    }
    let mut tree = pending.pop().expect("terminal fragment tree");
    debug_assert!(pending.is_empty());
    if shape == TreeShape::Rooted {
        tree = contract_redundant_virtuals(&tree)?;
    }
    Ok(Construction { stages, steps, fragments, intermediate, tree })
}

/// Removes every virtual node that has a child with exactly its attributes;
/// that child takes the virtual node's place.
pub fn contract_redundant_virtuals(tree: &JoinTree) -> Result<JoinTree> {
    let mut nodes = tree.nodes().to_vec();
    let mut parent = tree.parents().to_vec();
    loop {
        let found = (0..nodes.len()).find_map(|v| {
            if !nodes[v].is_virtual {
                return None;
            }
            (0..nodes.len())
                .find(|&c| parent[c] == Some(v) && nodes[c].attr_set() == nodes[v].attr_set())
                .map(|c| (v, c))
        });
        let Some((v, c)) = found else { break };
        parent[c] = parent[v];
        for p in parent.iter_mut() {
            if *p == Some(v) {
                *p = Some(c);
            }
        }
        parent[c] = parent[c].filter(|&p| p != c);
        nodes.remove(v);
        parent.remove(v);
        for p in parent.iter_mut().flatten() {
            if *p > v {
                *p -= 1;
            }
        }
    }
    JoinTree::from_parents(nodes, parent)
}

/// Join tree for a nice plan. Left-deep plans reduce to min-index recovery.
pub fn build_join_tree_from_plan(p: &Plan) -> Result<JoinTree> {
    is_nice(p).map_err(Error::NotNice)?;
    Ok(virtual_relation_method(p, TreeShape::Rooted)?.tree)
}

/// Bottom-up runtime mapping without virtual relations: each right operand's
/// subtree root is attached to the min-index left leaf covering its key.
/// Produces RIP-violating trees for some bushy plans.
pub fn naive_bottom_up_tree(p: &Plan) -> Result<JoinTree> {
    fn go(p: &Plan) -> Result<(Vec<RelationDecl>, Vec<Option<usize>>)> {
        match p {
            Plan::Leaf(r) => Ok((vec![r.clone()], vec![None])),
            Plan::Join(l, r) => {
                let (mut nodes, mut parent) = go(l)?;
                let (rnodes, rparent) = go(r)?;
                let sub_root = &rnodes[0];
                let key = compute_key(&nodes, sub_root);
                let attach = nodes
                    .iter()
                    .position(|n| key.is_subset(&n.attr_set()))
                    .ok_or_else(|| Error::NoCoveringParent { relation: sub_root.name.clone(), key })?;
                let offset = nodes.len();
                parent.extend(rparent.into_iter().map(|p| Some(p.map_or(attach, |p| p + offset))));
                nodes.extend(rnodes);
                Ok((nodes, parent))
            }
        }
    }
    let (nodes, parent) = go(p)?;
    JoinTree::from_parents(nodes, parent)
}
