//! The recursive TTJ evaluator. State lives on the call stack: a failed
//! lookup returns the position of the join-tree parent, and the frame for
//! that position catches it and deletes its current tuple.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::jointree::{compute_key, JoinTree};
use crate::planalg::Construction;
use crate::relmodel::{AttrSet, Database, HashIndex, RelationDecl, ResultBag, Tuple};

struct Run {
    keys: Vec<AttrSet>,
    parents: Vec<Option<usize>>,
    indexes: Vec<HashIndex>,
    out: Vec<Tuple>,
}

impl Run {
    fn ttj(&mut self, t: &Tuple, i: usize) -> Result<Option<usize>> {
        if i == self.indexes.len() {
            self.out.push(t.clone());
            return Ok(None);
        }
        let k = t.project(&self.keys[i])?;
        let parent = self.parents[i];
        if self.indexes[i].get(&k).is_none() && parent.is_some() {
            return Ok(parent);
        }
        let mut pos = 0;
        loop {
            let Some(r) = self.indexes[i].get(&k).and_then(|b| b.get(pos)).cloned() else { break };
            match self.ttj(&t.concat(&r)?, i + 1)? {
                Some(target) if target == i => {
                    self.indexes[i].remove(&k, pos);
                }
                Some(target) => return Ok(Some(target)),
                None => pos += 1,
            }
        }
        Ok(None)
    }
}

/// Evaluates `seq` with backjump parents given as positions into `seq`.
/// Rows for virtual leaves come from `materialized`.
fn run_sequence(
    db: &Database,
    materialized: &HashMap<String, Vec<Tuple>>,
    seq: &[RelationDecl],
    parents: &[Option<usize>],
) -> Result<ResultBag> {
    let mut indexes = Vec::with_capacity(seq.len());
    let mut keys = Vec::with_capacity(seq.len());
    for (i, r) in seq.iter().enumerate() {
        let key = compute_key(&seq[..i], r);
        let rows: &[Tuple] = match materialized.get(&r.name) {
            Some(rows) => rows,
            None => db.relation(&r.name)?.rows(),
        };
        indexes.push(HashIndex::build(rows, &key)?);
        keys.push(key);
    }
    let mut run = Run { keys, parents: parents.to_vec(), indexes, out: Vec::new() };
    run.ttj(&Tuple::empty(), 0)?;
    let attrs: AttrSet = seq.iter().flat_map(|r| r.attr_set()).collect();
    ResultBag::from_tuples(attrs, run.out)
}

/// Backjump positions of `seq` under `tree`. A parent outside `seq` must be a
/// virtual relation (the root of a fragment tree) and maps to `None`.
fn parent_positions(seq: &[RelationDecl], tree: &JoinTree) -> Result<Vec<Option<usize>>> {
    let mut parents = Vec::with_capacity(seq.len());
    for (j, r) in seq.iter().enumerate() {
        if !tree.contains(&r.name) {
            return Err(Error::InvalidLinearization(format!("{} is not in the join tree", r.name)));
        }
        let p = match tree.parent_of(&r.name) {
            None => None,
            Some(p) => match seq.iter().position(|x| x.name == p.name) {
                Some(pi) if pi < j => Some(pi),
                Some(_) => {
                    return Err(Error::InvalidLinearization(format!(
                        "{} precedes its parent {}",
                        r.name, p.name
                    )))
                }
                None if p.is_virtual => None,
                None => {
                    return Err(Error::InvalidLinearization(format!(
                        "parent {} of {} is missing from the sequence",
                        p.name, r.name
                    )))
                }
            },
        };
        if j > 0 && p.is_none() && tree.parent_of(&r.name).is_none() {
            return Err(Error::InvalidLinearization(format!("tree root {} is not first", r.name)));
        }
        parents.push(p);
    }
    Ok(parents)
}

/// Recursive TTJ over a left-deep order `seq` with join tree `tree`.
pub fn ttj_logical(db: &Database, seq: &[RelationDecl], tree: &JoinTree) -> Result<ResultBag> {
    let parents = parent_positions(seq, tree)?;
    run_sequence(db, &HashMap::new(), seq, &parents)
}

/// Recursive TTJ over every fragment of a plan decomposition, materializing
/// each non-terminal fragment as its virtual relation.
pub fn ttj_logical_plan(db: &Database, construction: &Construction) -> Result<ResultBag> {
    let mut materialized: HashMap<String, Vec<Tuple>> = HashMap::new();
    let Some((terminal, rest)) = construction.fragments.split_last() else {
        return Err(Error::ProtocolViolation("plan decomposition has no fragments".into()));
    };
    for f in rest {
        let bag = run_sequence(db, &materialized, &f.leaves, &f.parents)?;
        let v = f.virtual_rel.as_ref().expect("non-terminal fragment has a virtual relation");
        let rows = bag.iter().flat_map(|(t, c)| std::iter::repeat(t.clone()).take(c)).collect();
        materialized.insert(v.name.clone(), rows);
    }
    run_sequence(db, &materialized, &terminal.leaves, &terminal.parents)
}
