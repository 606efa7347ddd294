//! Greedy delta debugging toward a minimal reproducing case.

use crate::error::{Error, Result};
use crate::relmodel::{Database, Relation};

use super::{run_case, TestCase, VerdictKind};

fn reproduces(tc: &TestCase, target: &VerdictKind) -> bool {
    run_case(tc).verdict.kind() == *target
}

fn without_tuple(tc: &TestCase, rel: usize, row: usize) -> TestCase {
    let mut out = tc.clone();
    out.db.relations_mut()[rel].remove_row(row);
    out
}

fn without_relation(tc: &TestCase, name: &str) -> Option<TestCase> {
    let tree = match &tc.tree {
        Some(t) => Some(t.without_node(name)?),
        None => None,
    };
    let plan = match &tc.plan {
        Some(p) => Some(p.without_leaf(name)?),
        None => None,
    };
    let rels: Vec<Relation> = tc.db.relations().iter().filter(|r| r.name() != name).cloned().collect();
    let db = Database::new(rels).ok()?;
    Some(TestCase { db, tree, plan, ..tc.clone() })
}

/// Drops tuples, then relations, keeping every removal that preserves the
/// `target` verdict kind, until neither step makes progress.
///
/// The executed plan is pinned into the case first so that removing
/// relations does not change the leaf order of the survivors.
pub fn shrink(tc: &TestCase, target: &VerdictKind) -> Result<TestCase> {
    if *target == VerdictKind::Pass || !reproduces(tc, target) {
        return Err(Error::NotFailing);
    }
    let mut cur = tc.clone();
    if cur.plan.is_none() {
        cur.plan = Some(cur.effective_plan()?);
    }
    loop {
        let mut progress = false;
        for rel in 0..cur.db.relations().len() {
            let mut row = 0;
            while row < cur.db.relations()[rel].len() {
                let cand = without_tuple(&cur, rel, row);
                if reproduces(&cand, target) {
                    cur = cand;
                    progress = true;
                } else {
                    row += 1;
                }
            }
        }
        let names: Vec<String> = cur.db.relations().iter().map(|r| r.name().to_string()).collect();
        for name in names {
            if cur.db.relations().len() == 1 {
                break;
            }
            if let Some(cand) = without_relation(&cur, &name) {
                if reproduces(&cand, target) {
                    cur = cand;
                    progress = true;
                }
            }
        }
        if !progress {
            return Ok(cur);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DefectFlags;
    use crate::harness::Provenance;
    use crate::jointree::JoinTree;
    use crate::planalg::Plan;

    fn padded_star() -> TestCase {
        let db = Database::new(vec![
            Relation::from_rows("R", &["a", "x"], &[&[13, 1], &[14, 2], &[15, 3]]).unwrap(),
            Relation::from_rows("S", &["a", "w"], &[&[13, 1], &[14, 2], &[16, 9]]).unwrap(),
            Relation::from_rows("T", &["a", "z"], &[&[14, 1], &[14, 2]]).unwrap(),
            Relation::from_rows("U", &["a", "u"], &[&[14, 1], &[13, 1], &[15, 5]]).unwrap(),
        ])
        .unwrap();
        let edges: Vec<(String, String)> =
            [("R", "S"), ("R", "T"), ("R", "U")].iter().map(|(p, c)| (p.to_string(), c.to_string())).collect();
        let tree = JoinTree::from_edges(db.decls(), "R", &edges).unwrap();
        let plan = Plan::parse("(((R S) T) U)", &db.decls()).unwrap();
        TestCase::new(7, db, Some(tree), Some(plan), DefectFlags::m1(), Provenance::TreeFirst)
    }

    #[test]
    fn shrinks_to_three_relations() {
        let tc = padded_star();
        assert_eq!(run_case(&tc).verdict.kind(), VerdictKind::Mismatch);
        let mre = shrink(&tc, &VerdictKind::Mismatch).unwrap();
        assert_eq!(run_case(&mre).verdict.kind(), VerdictKind::Mismatch);
        assert!(mre.relation_count() <= 3, "{}", mre.relation_count());
        assert!(mre.tuple_count() <= 5, "{}", mre.tuple_count());
        // fixpoint
        assert_eq!(shrink(&mre, &VerdictKind::Mismatch).unwrap(), mre);
    }

    #[test]
    fn passing_case_is_not_shrunk() {
        let tc = padded_star().with_flags(DefectFlags::NONE);
        assert!(matches!(shrink(&tc, &VerdictKind::Mismatch), Err(Error::NotFailing)));
        assert!(matches!(shrink(&tc, &VerdictKind::Pass), Err(Error::NotFailing)));
    }
}
