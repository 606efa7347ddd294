//! Seeded test-case synthesis.
//!
//! Path A builds a random rooted tree and derives schemas top-down so every
//! child's schema is a subset of its parent's; the tree is a join tree by
//! construction. Path B builds overlapping schemas and then a random leaf
//! permutation with a uniformly random parenthesization, so it reaches
//! bushy and non-reverse-GYO plans as well.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::DefectFlags;
use crate::harness::{Provenance, TestCase};
use crate::jointree::JoinTree;
use crate::planalg::Plan;
use crate::relmodel::{Attr, Database, Relation, RelationDecl, Schema, Tuple, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    /// Maximum number of relations.
    pub max_size: usize,
    /// Maximum tuples per relation.
    pub max_rel_size: usize,
    pub attr_pool: Vec<Attr>,
    /// Values are drawn from `1..=value_domain`.
    pub value_domain: Value,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_size: 5,
            max_rel_size: 10,
            attr_pool: ["a", "b", "c", "d", "e", "f"].into_iter().map(Attr::from).collect(),
            value_domain: 10,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        SynthConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_size == 0 {
            return Err("max_size must be at least 1".into());
        }
        if self.max_rel_size == 0 {
            return Err("max_rel_size must be at least 1".into());
        }
        if self.attr_pool.is_empty() {
            return Err("attr_pool must be nonempty".into());
        }
        if self.value_domain < 1 {
            return Err("value_domain must be at least 1".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        if !self.attr_pool.iter().all(|a| seen.insert(a)) {
            return Err("attr_pool has duplicates".into());
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// A rooted tree skeleton over nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSkeleton {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
}

impl TreeSkeleton {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn children(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.parent.len()).filter(move |&c| self.parent[c] == Some(v))
    }
}

/// Random attachment: a random root, then each remaining node (in random
/// order) hangs off a uniformly chosen already-placed node.
pub fn generate_random_tree(n: usize, rng: &mut impl Rng) -> TreeSkeleton {
    assert!(n >= 1, "tree needs at least one node");
    let mut nodes: Vec<usize> = (0..n).collect();
    let mut parent = vec![None; n];
    let root = nodes.remove(rng.gen_range(0..nodes.len()));
    let mut placed = vec![root];
    while !nodes.is_empty() {
        let u = nodes.remove(rng.gen_range(0..nodes.len()));
        let v = placed[rng.gen_range(0..placed.len())];
        parent[u] = Some(v);
        placed.push(u);
    }
    TreeSkeleton { root, parent }
}

/// `min(x, |pool|)` distinct attributes of `pool`, at least one, in pool
/// order.
pub fn sample_nonempty(pool: &[Attr], x: usize, rng: &mut impl Rng) -> Vec<Attr> {
    let k = x.clamp(1, pool.len());
    let mut picked = rand::seq::index::sample(rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i].clone()).collect()
}

fn gen_tuples(schema: &Schema, count: usize, domain: Value, rng: &mut impl Rng) -> Vec<Tuple> {
    (0..count)
        .map(|_| {
            let row: Vec<Value> = (0..schema.len()).map(|_| rng.gen_range(1..=domain)).collect();
            Tuple::from_row(schema, &row).expect("row matches schema")
        })
        .collect()
}

fn relation_name(i: usize) -> String {
    format!("R{}", i + 1)
}

/// Random linear extension of `tree`: the root first, then repeatedly any
/// node whose parent is already placed.
pub fn linearize(tree: &JoinTree, rng: &mut impl Rng) -> Vec<RelationDecl> {
    let Some(root) = tree.root() else { return Vec::new() };
    let mut frontier = vec![tree.index_of(&root.name).expect("root is a node")];
    let mut out = Vec::with_capacity(tree.len());
    while !frontier.is_empty() {
        let v = frontier.swap_remove(rng.gen_range(0..frontier.len()));
        out.push(tree.nodes()[v].clone());
        let mut kids: Vec<usize> = tree.children(v).collect();
        kids.sort_unstable();
        frontier.extend(kids);
        frontier.sort_unstable();
    }
    out
}

/// Path A: join tree, instance and a linearized left-deep plan.
pub fn generate_case(cfg: &SynthConfig) -> TestCase {
    cfg.validate().expect("valid synthesis config");
    let mut rng = cfg.rng();
    let n = rng.gen_range(1..=cfg.max_size);
    let skel = generate_random_tree(n, &mut rng);

    let mut schemas: Vec<Option<Vec<Attr>>> = vec![None; n];
    let mut rows: Vec<Vec<Tuple>> = vec![Vec::new(); n];
    let mut inherited: Vec<Vec<Attr>> = vec![Vec::new(); n];
    inherited[skel.root] = cfg.attr_pool.clone();
    let mut x = rng.gen_range(1..=cfg.attr_pool.len());
    let mut queue = vec![skel.root];
    while !queue.is_empty() {
        let mut next_level = Vec::new();
        for &node in &queue {
            let attrs = sample_nonempty(&inherited[node], x, &mut rng);
            let schema = Schema::new(attrs.clone()).expect("distinct attributes");
            let count = rng.gen_range(1..=cfg.max_rel_size);
            rows[node] = gen_tuples(&schema, count, cfg.value_domain, &mut rng);
            for child in skel.children(node) {
                inherited[child] = attrs.clone();
                next_level.push(child);
            }
            schemas[node] = Some(attrs);
        }
        x = (x - rng.gen_range(0..=x)).max(1);
        queue = next_level;
    }

    let relations: Vec<Relation> = (0..n)
        .map(|i| {
            let schema = Schema::new(schemas[i].take().expect("every node visited")).expect("distinct attributes");
            Relation::new(RelationDecl::new(relation_name(i), schema), std::mem::take(&mut rows[i]))
                .expect("generated rows conform")
        })
        .collect();
    let db = Database::new(relations).expect("distinct names");
    let tree = JoinTree::from_parents(db.decls(), skel.parent.clone()).expect("skeleton is a tree");
    let plan = Plan::left_deep(&linearize(&tree, &mut rng));
    TestCase::new(cfg.seed, db, Some(tree), Some(plan), DefectFlags::NONE, Provenance::TreeFirst)
}

fn catalan(n: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..n as u128 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

/// Uniformly random binary parenthesization of `leaves` in the given order.
pub fn random_parenthesization(leaves: &[RelationDecl], rng: &mut impl Rng) -> Plan {
    let n = leaves.len();
    if n == 1 {
        return Plan::leaf(leaves[0].clone());
    }
    // left subtree size k has weight C(k-1) * C(n-k-1)
    let total = catalan(n - 1);
    let mut pick = rng.gen_range(0..total);
    let mut k = 1;
    loop {
        let w = catalan(k - 1) * catalan(n - k - 1);
        if pick < w {
            break;
        }
        pick -= w;
        k += 1;
    }
    let left = random_parenthesization(&leaves[..k], rng);
    let right = random_parenthesization(&leaves[k..], rng);
    Plan::join(left, right)
}

/// Path B: overlapping schemas, a random permutation and a random
/// parenthesization. The query is acyclic but the plan may be bushy, fail
/// reverse-GYO or contain Cartesian joins; such cases are kept.
pub fn generate_plan_case(cfg: &SynthConfig) -> TestCase {
    cfg.validate().expect("valid synthesis config");
    let mut rng = cfg.rng();
    let n = rng.gen_range(1..=cfg.max_size);
    let skel = generate_random_tree(n, &mut rng);

    // children keep part of the parent's schema and may add attributes no
    // other relation uses
    let mut unused: Vec<Attr> = cfg.attr_pool.clone();
    unused.shuffle(&mut rng);
    let mut schemas: Vec<Vec<Attr>> = vec![Vec::new(); n];
    let mut queue = vec![skel.root];
    let root_width = rng.gen_range(1..=unused.len().min(3));
    schemas[skel.root] = unused.drain(..root_width).collect();
    while let Some(v) = queue.pop() {
        for c in skel.children(v).collect::<Vec<_>>() {
            let mut attrs = sample_nonempty(&schemas[v], rng.gen_range(1..=schemas[v].len()), &mut rng);
            let fresh = rng.gen_range(0..=unused.len().min(2));
            attrs.extend(unused.drain(..fresh));
            schemas[c] = attrs;
            queue.insert(0, c);
        }
    }

    let relations: Vec<Relation> = (0..n)
        .map(|i| {
            let schema = Schema::new(schemas[i].clone()).expect("distinct attributes");
            let count = rng.gen_range(1..=cfg.max_rel_size);
            let rows = gen_tuples(&schema, count, cfg.value_domain, &mut rng);
            Relation::new(RelationDecl::new(relation_name(i), schema), rows).expect("generated rows conform")
        })
        .collect();
    let db = Database::new(relations).expect("distinct names");
    let mut leaves = db.decls();
    leaves.shuffle(&mut rng);
    let plan = random_parenthesization(&leaves, &mut rng);
    TestCase::new(cfg.seed, db, None, Some(plan), DefectFlags::NONE, Provenance::PlanFirst)
}
