//! Join trees: structure, key computation, reverse-GYO validation of leaf
//! sequences, min-index parent recovery and join-tree validity checks.
//!
//! Positions into a leaf sequence are 0-based throughout; the first leaf is
//! position 0 and is never assigned a parent.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::relmodel::{Attr, AttrSet, RelationDecl};

/// A rooted tree over relation declarations, possibly including virtual
/// relations. The empty tree (no nodes) is the identity for [`merge`].
///
/// [`merge`]: crate::planalg::merge_trees
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinTree {
    nodes: Vec<RelationDecl>,
    parent: Vec<Option<usize>>,
    root: Option<usize>,
}

impl JoinTree {
    pub fn empty() -> Self {
        JoinTree {
            nodes: Vec::new(),
            parent: Vec::new(),
            root: None,
        }
    }

    pub fn single(node: RelationDecl) -> Self {
        JoinTree {
            nodes: vec![node],
            parent: vec![None],
            root: Some(0),
        }
    }

    /// Builds a tree from a node list and a parent array, checking that the
    /// parent mapping induces a single rooted tree.
    pub fn from_parents(nodes: Vec<RelationDecl>, parent: Vec<Option<usize>>) -> Result<Self> {
        if nodes.len() != parent.len() {
            return Err(Error::MalformedTree("parent array length differs from node count".into()));
        }
        if nodes.is_empty() {
            return Ok(JoinTree::empty());
        }
        let mut names = BTreeSet::new();
        for n in &nodes {
            if !names.insert(n.name.as_str()) {
                return Err(Error::MalformedTree(format!("duplicate node {}", n.name)));
            }
        }
        let roots: Vec<usize> = (0..nodes.len()).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::MalformedTree(format!("expected one root, found {}", roots.len())));
        }
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= nodes.len() || p == i {
                    return Err(Error::MalformedTree(format!("bad parent for {}", nodes[i].name)));
                }
            }
        }
        // every node must reach the root without revisiting
        for start in 0..nodes.len() {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = parent[cur] {
                cur = p;
                steps += 1;
                if steps > nodes.len() {
                    return Err(Error::MalformedTree(format!("cycle through {}", nodes[start].name)));
                }
            }
        }
        Ok(JoinTree {
            root: Some(roots[0]),
            nodes,
            parent,
        })
    }

    /// Builds a tree from `(parent, child)` name pairs.
    pub fn from_edges(nodes: Vec<RelationDecl>, root: &str, edges: &[(String, String)]) -> Result<Self> {
        let index: BTreeMap<&str, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::MalformedTree(format!("edge references unknown node {name}")))
        };
        let mut parent = vec![None; nodes.len()];
        for (p, c) in edges {
            let (pi, ci) = (lookup(p)?, lookup(c)?);
            if parent[ci].is_some() {
                return Err(Error::MalformedTree(format!("{c} has two parents")));
            }
            parent[ci] = Some(pi);
        }
        let ri = lookup(root)?;
        if parent[ri].is_some() {
            return Err(Error::MalformedTree(format!("root {root} has a parent")));
        }
        JoinTree::from_parents(nodes, parent)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[RelationDecl] {
        &self.nodes
    }

    pub fn root(&self) -> Option<&RelationDecl> {
        self.root.map(|r| &self.nodes[r])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn node(&self, name: &str) -> Option<&RelationDecl> {
        self.index_of(name).map(|i| &self.nodes[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn parent_index(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn parent_of(&self, name: &str) -> Option<&RelationDecl> {
        self.index_of(name).and_then(|i| self.parent[i]).map(|p| &self.nodes[p])
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&c| self.parent[c] == Some(i))
    }

    /// `(parent, child)` name pairs in breadth-first order from the root.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let Some(root) = self.root else { return out };
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for c in self.children(i) {
                out.push((self.nodes[i].name.clone(), self.nodes[c].name.clone()));
                queue.push_back(c);
            }
        }
        out
    }

    /// Union of attributes over all nodes.
    pub fn attrs(&self) -> AttrSet {
        self.nodes.iter().flat_map(|n| n.attr_set()).collect()
    }

    /// True when no node has more than one child.
    pub fn is_degenerate(&self) -> bool {
        (0..self.nodes.len()).all(|i| self.children(i).count() <= 1)
    }

    /// Removes a node, hanging its children off its parent. A root can only
    /// be removed when it has at most one child, which becomes the new root.
    /// The result is a tree but not necessarily a join tree.
    pub fn without_node(&self, name: &str) -> Option<JoinTree> {
        let v = self.index_of(name)?;
        let kids: Vec<usize> = self.children(v).collect();
        if self.parent[v].is_none() && kids.len() > 1 {
            return None;
        }
        let mut nodes = self.nodes.clone();
        let mut parent = self.parent.clone();
        for &c in &kids {
            parent[c] = self.parent[v];
        }
        nodes.remove(v);
        parent.remove(v);
        for p in parent.iter_mut().flatten() {
            if *p > v {
                *p -= 1;
            }
        }
        JoinTree::from_parents(nodes, parent).ok()
    }

    pub(crate) fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }
}

impl fmt::Display for JoinTree {
    /// Nested form, e.g. `T{V1{R,S}}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &JoinTree, i: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str(&t.nodes[i].name)?;
            let kids: Vec<usize> = t.children(i).collect();
            if !kids.is_empty() {
                f.write_str("{")?;
                for (n, c) in kids.into_iter().enumerate() {
                    if n > 0 {
                        f.write_str(",")?;
                    }
                    go(t, c, f)?;
                }
                f.write_str("}")?;
            }
            Ok(())
        }
        match self.root {
            Some(r) => go(self, r, f),
            None => f.write_str("{}"),
        }
    }
}

/// Attributes `r` shares with the union of `prefix`.
pub fn compute_key(prefix: &[RelationDecl], r: &RelationDecl) -> AttrSet {
    let seen: AttrSet = prefix.iter().flat_map(|p| p.attr_set()).collect();
    r.attr_set().intersection(&seen).cloned().collect()
}

/// First failing position of a reverse-GYO check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GyoViolation {
    /// 0-based position of the uncovered leaf.
    pub index: usize,
    pub relation: String,
    pub key: AttrSet,
}

impl fmt::Display for GyoViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "j={} ({}) key {{{}}} not covered by any earlier leaf",
            self.index + 1,
            self.relation,
            join_attrs(&self.key)
        )
    }
}

pub(crate) fn join_attrs(set: &AttrSet) -> String {
    set.iter().map(Attr::as_str).collect::<Vec<_>>().join(",")
}

/// Checks that every leaf after the first has its key covered by some
/// earlier leaf; reports the smallest violating position.
pub fn check_reverse_gyo(seq: &[RelationDecl]) -> std::result::Result<(), GyoViolation> {
    for j in 1..seq.len() {
        if covering_parent(seq, j).is_none() {
            return Err(GyoViolation {
                index: j,
                relation: seq[j].name.clone(),
                key: compute_key(&seq[..j], &seq[j]),
            });
        }
    }
    Ok(())
}

fn covering_parent(seq: &[RelationDecl], j: usize) -> Option<usize> {
    let key = compute_key(&seq[..j], &seq[j]);
    (0..j).find(|&i| key.is_subset(&seq[i].attr_set()))
}

/// Smallest `i < j` whose attributes cover the key of `seq[j]`. This yields
/// the shallowest join tree compatible with the sequence.
pub fn recover_parent(seq: &[RelationDecl], j: usize) -> Result<usize> {
    assert!(j >= 1 && j < seq.len(), "recover_parent needs 1 <= j < len");
    covering_parent(seq, j).ok_or_else(|| Error::NoCoveringParent {
        relation: seq[j].name.clone(),
        key: compute_key(&seq[..j], &seq[j]),
    })
}

/// First position whose key is empty, i.e. a Cartesian product with all of
/// its predecessors.
pub fn has_cartesian(seq: &[RelationDecl]) -> Option<usize> {
    (1..seq.len()).find(|&j| compute_key(&seq[..j], &seq[j]).is_empty())
}

/// Join tree rooted at the first leaf with min-index parents.
pub fn recover_join_tree(seq: &[RelationDecl]) -> Result<JoinTree> {
    let mut parent = vec![None];
    for j in 1..seq.len() {
        parent.push(Some(recover_parent(seq, j)?));
    }
    if seq.is_empty() {
        return Ok(JoinTree::empty());
    }
    JoinTree::from_parents(seq.to_vec(), parent)
}

/// An attribute whose holders do not form a connected subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RipViolation {
    pub attr: Attr,
    /// Every node holding `attr`, in tree node order.
    pub nodes: Vec<String>,
}

impl fmt::Display for RipViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "attribute {} is disconnected across {{{}}}", self.attr, self.nodes.join(","))
    }
}

/// Running intersection property; reports the lexicographically smallest
/// offending attribute.
pub fn check_rip(tree: &JoinTree) -> std::result::Result<(), RipViolation> {
    for a in tree.attrs() {
        let holders: Vec<usize> = (0..tree.len()).filter(|&i| tree.nodes[i].schema.contains(&a)).collect();
        let inner_edges = holders
            .iter()
            .filter(|&&i| tree.parent[i].is_some_and(|p| tree.nodes[p].schema.contains(&a)))
            .count();
        if inner_edges + 1 != holders.len() {
            return Err(RipViolation {
                attr: a,
                nodes: holders.iter().map(|&i| tree.nodes[i].name.clone()).collect(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeFailure {
    MissingRelation(String),
    /// A non-virtual node that is not one of the query relations.
    UnknownNode(String),
    SchemaDiffers(String),
    NotAdjacent { parent: String, child: String },
    Rip(RipViolation),
}

impl fmt::Display for TreeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeFailure::MissingRelation(n) => write!(f, "bijection: relation {n} has no node"),
            TreeFailure::UnknownNode(n) => write!(f, "bijection: node {n} is not a query relation"),
            TreeFailure::SchemaDiffers(n) => write!(f, "node {n} has a different schema than the relation"),
            TreeFailure::NotAdjacent { parent, child } => {
                write!(f, "adjacency: {parent} and {child} share no attribute")
            }
            TreeFailure::Rip(v) => write!(f, "RIP: {v}"),
        }
    }
}

/// Full validity check: node/relation bijection (virtual nodes are allowed
/// in addition to the query relations), adjacency, and RIP. Returns every
/// failure found.
pub fn check_join_tree(tree: &JoinTree, query: &[RelationDecl]) -> std::result::Result<(), Vec<TreeFailure>> {
    let mut failures = Vec::new();
    for q in query {
        match tree.node(&q.name) {
            None => failures.push(TreeFailure::MissingRelation(q.name.clone())),
            Some(n) if n.attr_set() != q.attr_set() => failures.push(TreeFailure::SchemaDiffers(q.name.clone())),
            Some(_) => {}
        }
    }
    for n in tree.nodes() {
        if !n.is_virtual && !query.iter().any(|q| q.name == n.name) {
            failures.push(TreeFailure::UnknownNode(n.name.clone()));
        }
    }
    for (i, p) in tree.parent.iter().enumerate() {
        if let Some(p) = *p {
            if tree.nodes[i].attr_set().is_disjoint(&tree.nodes[p].attr_set()) {
                failures.push(TreeFailure::NotAdjacent {
                    parent: tree.nodes[p].name.clone(),
                    child: tree.nodes[i].name.clone(),
                });
            }
        }
    }
    if let Err(v) = check_rip(tree) {
        failures.push(TreeFailure::Rip(v));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures)
    }
}

/// True when `seq` lists every tree node once with each parent before its
/// children.
pub fn is_linear_extension(seq: &[RelationDecl], tree: &JoinTree) -> bool {
    if seq.len() != tree.len() {
        return false;
    }
    let mut placed = BTreeSet::new();
    for r in seq {
        let Some(i) = tree.index_of(&r.name) else { return false };
        if let Some(p) = tree.parent[i] {
            if !placed.contains(&p) {
                return false;
            }
        }
        if !placed.insert(i) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relmodel::attrs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(name: &str, a: &[&str]) -> RelationDecl {
        RelationDecl::of(name, a)
    }

    fn running() -> Vec<RelationDecl> {
        vec![rel("R", &["a", "x"]), rel("S", &["a", "w"]), rel("T", &["a", "z"])]
    }

    fn gyo_counter() -> Vec<RelationDecl> {
        vec![rel("R", &["a", "b"]), rel("S", &["b", "c"]), rel("T", &["a", "b", "c"])]
    }

    fn edges(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(p, c)| (p.to_string(), c.to_string())).collect()
    }

    #[test]
    fn keys() {
        let q = running();
        assert_eq!(compute_key(&q[..1], &q[1]), attrs(["a"]));
        let g = gyo_counter();
        assert_eq!(compute_key(&g[..2], &g[2]), attrs(["a", "b", "c"]));
        assert!(compute_key(&[], &g[0]).is_empty());
    }

    #[test]
    fn reverse_gyo_examples() {
        let v = check_reverse_gyo(&gyo_counter()).unwrap_err();
        assert_eq!(v.index, 2);
        assert_eq!(v.relation, "T");
        assert_eq!(v.key, attrs(["a", "b", "c"]));

        let g = gyo_counter();
        let reordered = vec![g[2].clone(), g[0].clone(), g[1].clone()];
        assert!(check_reverse_gyo(&reordered).is_ok());
        assert!(check_reverse_gyo(&g[..1]).is_ok());
    }

    #[test]
    fn recover_parent_examples() {
        assert_eq!(recover_parent(&running(), 2).unwrap(), 0);
        assert!(matches!(
            recover_parent(&gyo_counter(), 2),
            Err(Error::NoCoveringParent { ref relation, .. }) if relation == "T"
        ));
        let disjoint = vec![rel("R", &["a"]), rel("S", &["b"])];
        assert_eq!(recover_parent(&disjoint, 1).unwrap(), 0);
        assert_eq!(has_cartesian(&disjoint), Some(1));
        assert_eq!(has_cartesian(&running()), None);
    }

    #[test]
    fn recover_tree_examples() {
        let t = recover_join_tree(&running()).unwrap();
        assert_eq!(t.edges(), edges(&[("R", "S"), ("R", "T")]));
        assert_eq!(t.to_string(), "R{S,T}");

        let g = gyo_counter();
        let t = recover_join_tree(&[g[2].clone(), g[0].clone(), g[1].clone()]).unwrap();
        assert_eq!(t.edges(), edges(&[("T", "R"), ("T", "S")]));
        assert!(check_rip(&t).is_ok());

        let t = recover_join_tree(&g[..1]).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.edges().is_empty());

        assert!(recover_join_tree(&gyo_counter()).is_err());
    }

    #[test]
    fn rip_examples() {
        let g = gyo_counter();
        let chain = JoinTree::from_edges(
            vec![g[2].clone(), g[0].clone(), g[1].clone()],
            "T",
            &edges(&[("T", "R"), ("R", "S")]),
        )
        .unwrap();
        let v = check_rip(&chain).unwrap_err();
        assert_eq!(v.attr.as_str(), "c");
        assert_eq!(v.nodes.iter().collect::<BTreeSet<_>>(), ["S".to_string(), "T".to_string()].iter().collect());

        assert!(check_rip(&JoinTree::single(rel("R", &["a"]))).is_ok());

        let with_virtual = JoinTree::from_edges(
            vec![
                g[2].clone(),
                RelationDecl::virtual_rel("V1", crate::relmodel::Schema::from_names(["a", "b", "c"]).unwrap()),
                g[0].clone(),
                g[1].clone(),
            ],
            "T",
            &edges(&[("T", "V1"), ("V1", "R"), ("V1", "S")]),
        )
        .unwrap();
        assert!(check_rip(&with_virtual).is_ok());
        assert!(check_join_tree(&with_virtual, &g).is_ok());
    }

    #[test]
    fn join_tree_validation() {
        let q = running();
        let tree_a = JoinTree::from_edges(q.clone(), "R", &edges(&[("R", "S"), ("S", "T")])).unwrap();
        assert!(check_join_tree(&tree_a, &q).is_ok());

        let missing_t = JoinTree::from_edges(q[..2].to_vec(), "R", &edges(&[("R", "S")])).unwrap();
        assert_eq!(
            check_join_tree(&missing_t, &q).unwrap_err(),
            vec![TreeFailure::MissingRelation("T".into())]
        );

        let q2 = vec![rel("R", &["a"]), rel("S", &["a", "b"]), rel("U", &["c"])];
        let bad = JoinTree::from_edges(q2.clone(), "R", &edges(&[("R", "S"), ("S", "U")])).unwrap();
        let failures = check_join_tree(&bad, &q2).unwrap_err();
        assert!(failures.contains(&TreeFailure::NotAdjacent {
            parent: "S".into(),
            child: "U".into()
        }));
    }

    #[test]
    fn malformed_trees_rejected() {
        let q = running();
        assert!(JoinTree::from_edges(q.clone(), "R", &edges(&[("R", "S")])).is_err());
        assert!(JoinTree::from_edges(q.clone(), "R", &edges(&[("R", "S"), ("T", "S")])).is_err());
        assert!(JoinTree::from_edges(q, "R", &edges(&[("R", "S"), ("S", "X")])).is_err());
    }

    #[test]
    fn node_removal() {
        let t = JoinTree::from_parents(
            vec![RelationDecl::of("R", &["a"]), RelationDecl::of("S", &["a"]), RelationDecl::of("T", &["a"])],
            vec![None, Some(0), Some(1)],
        )
        .unwrap();
        assert_eq!(t.without_node("T").unwrap().to_string(), "R{S}");
        assert_eq!(t.without_node("R").unwrap().to_string(), "S{T}");
        assert_eq!(t.without_node("S").unwrap().to_string(), "R{T}");
        let star = t.without_node("T").unwrap();
        let star = JoinTree::from_parents(
            vec![star.nodes()[0].clone(), star.nodes()[1].clone(), RelationDecl::of("U", &["a"])],
            vec![None, Some(0), Some(0)],
        )
        .unwrap();
        assert!(star.without_node("R").is_none());
        assert!(t.without_node("X").is_none());
    }

    #[test]
    fn linear_extension() {
        let q = running();
        let tree_c = JoinTree::from_edges(q.clone(), "R", &edges(&[("R", "S"), ("R", "T")])).unwrap();
        assert!(is_linear_extension(&q, &tree_c));
        assert!(!is_linear_extension(&[q[1].clone(), q[0].clone(), q[2].clone()], &tree_c));
    }

    // Literal reading of the reverse-GYO definition: try every i < j.
    fn brute_force_gyo(seq: &[RelationDecl]) -> Option<usize> {
        for j in 1..seq.len() {
            let mut seen = AttrSet::new();
            for r in &seq[..j] {
                seen.extend(r.attr_set());
            }
            let key: AttrSet = seq[j].attr_set().intersection(&seen).cloned().collect();
            let mut covered = false;
            for r in &seq[..j] {
                if key.iter().all(|a| r.schema.contains(a)) {
                    covered = true;
                }
            }
            if !covered {
                return Some(j);
            }
        }
        None
    }

    fn random_seq(rng: &mut ChaCha8Rng) -> Vec<RelationDecl> {
        let pool = ["a", "b", "c", "d", "e"];
        let n = rng.gen_range(1..=5);
        (0..n)
            .map(|i| {
                let mut picked: Vec<&str> = pool.iter().copied().filter(|_| rng.gen_bool(0.45)).collect();
                if picked.is_empty() {
                    picked.push(pool[rng.gen_range(0..pool.len())]);
                }
                rel(&format!("R{i}"), &picked)
            })
            .collect()
    }

    #[test]
    fn reverse_gyo_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6a0);
        let mut violations = 0;
        for _ in 0..1000 {
            let seq = random_seq(&mut rng);
            let got = check_reverse_gyo(&seq).err().map(|v| v.index);
            assert_eq!(got, brute_force_gyo(&seq), "{seq:?}");
            violations += got.is_some() as usize;
            if got.is_none() {
                // prefix closure
                for k in 1..=seq.len() {
                    assert!(check_reverse_gyo(&seq[..k]).is_ok());
                }
                let tree = recover_join_tree(&seq).unwrap();
                assert!(check_rip(&tree).is_ok(), "{tree}");
                assert!(is_linear_extension(&seq, &tree));
                if has_cartesian(&seq).is_none() {
                    assert!(check_join_tree(&tree, &seq).is_ok());
                }
            }
        }
        assert!(violations > 0, "generator never produced a violation");
    }
}
