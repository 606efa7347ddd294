//! TTJ evaluation: the recursive logical evaluator and the pipelined
//! physical iterators, plus pipeline construction from a plan and join tree.

pub mod logical;
pub mod physical;
pub mod trace;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationFailure};
use crate::jointree::{
    check_join_tree, check_reverse_gyo, compute_key, has_cartesian, is_linear_extension, recover_parent, JoinTree,
};
use crate::planalg::{is_nice, naive_bottom_up_tree, virtual_relation_method, Plan, TreeShape};
use crate::relmodel::{AttrSet, Database, RelationDecl, ResultBag};

pub use logical::{ttj_logical, ttj_logical_plan};
pub use physical::{InnerUnit, LeafScan, MatchCursor, Operator, Pipeline, TtjIterator};
pub use trace::{Trace, TraceEvent};

/// Runtime switches that re-introduce known translation defects.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefectFlags {
    /// Keep the match cursor when a backjump passes through an iterator.
    #[serde(rename = "m1")]
    pub m1_skip_mt_clear: bool,
    /// Skip reverse-GYO / nice-plan validation and recover parents at runtime.
    #[serde(rename = "m2")]
    pub m2_skip_gyo_validation: bool,
    /// Map bushy plans with the bottom-up runtime recovery instead of
    /// virtual relations.
    #[serde(rename = "m3")]
    pub m3_naive_bushy_mapping: bool,
}

impl DefectFlags {
    pub const NONE: DefectFlags = DefectFlags {
        m1_skip_mt_clear: false,
        m2_skip_gyo_validation: false,
        m3_naive_bushy_mapping: false,
    };

    pub fn m1() -> Self {
        DefectFlags { m1_skip_mt_clear: true, ..Self::NONE }
    }

    pub fn m2() -> Self {
        DefectFlags { m2_skip_gyo_validation: true, ..Self::NONE }
    }

    pub fn m3() -> Self {
        DefectFlags { m3_naive_bushy_mapping: true, ..Self::NONE }
    }

    pub fn is_clean(&self) -> bool {
        *self == Self::NONE
    }

    /// Parses `none`, `m1`, `m2`, `m3` or a comma-separated combination.
    pub fn parse(s: &str) -> Option<Self> {
        let mut flags = Self::NONE;
        for part in s.split(',').map(str::trim) {
            match part {
                "none" | "" => {}
                "m1" => flags.m1_skip_mt_clear = true,
                "m2" => flags.m2_skip_gyo_validation = true,
                "m3" => flags.m3_naive_bushy_mapping = true,
                _ => return None,
            }
        }
        Some(flags)
    }

    /// Bit 0 = m1, bit 1 = m2, bit 2 = m3.
    pub fn bits(&self) -> u32 {
        self.m1_skip_mt_clear as u32 | (self.m2_skip_gyo_validation as u32) << 1 | (self.m3_naive_bushy_mapping as u32) << 2
    }

    pub fn from_bits(bits: u32) -> Self {
        DefectFlags {
            m1_skip_mt_clear: bits & 1 != 0,
            m2_skip_gyo_validation: bits & 2 != 0,
            m3_naive_bushy_mapping: bits & 4 != 0,
        }
    }
}

impl std::fmt::Display for DefectFlags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        if self.m1_skip_mt_clear {
            parts.push("m1");
        }
        if self.m2_skip_gyo_validation {
            parts.push("m2");
        }
        if self.m3_naive_bushy_mapping {
            parts.push("m3");
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

fn validation(f: ValidationFailure) -> Error {
    Error::ValidationFailed(f)
}

/// Builds a left-deep chain of iterators over `leaves`. `parents[j]` is the
/// backjump target of leaf `j` as an index into `leaves`.
fn build_chain(
    leaves: &[RelationDecl],
    parents: &[Option<usize>],
    db: &Database,
    fragments: &mut HashMap<String, Pipeline>,
    flags: DefectFlags,
) -> Result<Operator> {
    let first = &leaves[0];
    if first.is_virtual {
        return Err(Error::ProtocolViolation(format!("virtual relation {} cannot be scanned", first.name)));
    }
    let mut op = Operator::Scan(LeafScan::new(db.relation(&first.name)?.clone()));
    for j in 1..leaves.len() {
        let key = compute_key(&leaves[..j], &leaves[j]);
        let inner = if leaves[j].is_virtual {
            let pipeline = fragments
                .remove(&leaves[j].name)
                .ok_or_else(|| Error::ProtocolViolation(format!("no fragment for {}", leaves[j].name)))?;
            InnerUnit::Fragment { decl: leaves[j].clone(), pipeline: Box::new(pipeline) }
        } else {
            InnerUnit::Relation(db.relation(&leaves[j].name)?.clone())
        };
        let parent = parents[j].map(|i| leaves[i].name.clone());
        op = Operator::Ttj(Box::new(TtjIterator::new(j, op, inner, key, parent, flags)));
    }
    Ok(op)
}

fn attrs_of(leaves: &[RelationDecl]) -> AttrSet {
    leaves.iter().flat_map(|r| r.attr_set()).collect()
}

/// Binds TTJ iterators to `plan`.
///
/// Left-deep plans take backjump parents from `tree` when given (validated
/// against the query and the leaf order) or recover them with the min-index
/// rule. Bushy plans are decomposed into left-deep fragments; every
/// non-terminal fragment becomes a materialized inner unit of the fragment
/// that consumes it. A supplied tree for a bushy plan is validated only.
///
/// `m2` skips the reverse-GYO / nice checks, so an uncovered key surfaces as
/// `NoCoveringParent`. `m3` maps bushy plans with the naive bottom-up tree
/// and runs their leaves as one left-deep pipeline.
pub fn build_pipeline(plan: &Plan, tree: Option<&JoinTree>, db: &Database, flags: DefectFlags) -> Result<Pipeline> {
    let leaves = plan.leaves();
    for l in &leaves {
        db.relation(&l.name)?;
    }
    let attrs = attrs_of(&leaves);
    let query = db.decls();
    let query: Vec<RelationDecl> = query.into_iter().filter(|q| leaves.iter().any(|l| l.name == q.name)).collect();

    if plan.is_left_deep() || flags.m3_naive_bushy_mapping {
        let parents: Vec<Option<usize>> = if !plan.is_left_deep() {
            let naive = naive_bottom_up_tree(plan)?;
            leaves
                .iter()
                .map(|l| naive.parent_of(&l.name).map(|p| leaves.iter().position(|x| x.name == p.name).expect("leaf")))
                .collect()
        } else if let Some(t) = tree {
            check_join_tree(t, &query)
                .map_err(|fs| validation(ValidationFailure::InvalidTree(fs.iter().map(ToString::to_string).collect())))?;
            if !is_linear_extension(&leaves, t) {
                return Err(Error::InvalidLinearization(format!("plan {plan} does not follow tree {t}")));
            }
            leaves
                .iter()
                .map(|l| t.parent_of(&l.name).map(|p| leaves.iter().position(|x| x.name == p.name).expect("leaf")))
                .collect()
        } else {
            if !flags.m2_skip_gyo_validation {
                if let Some(j) = has_cartesian(&leaves) {
                    return Err(validation(ValidationFailure::Cartesian { relation: leaves[j].name.clone() }));
                }
                check_reverse_gyo(&leaves).map_err(|v| validation(ValidationFailure::ReverseGyo(v)))?;
            }
            let mut parents = vec![None];
            for j in 1..leaves.len() {
                parents.push(Some(recover_parent(&leaves, j)?));
            }
            parents
        };
        let root = build_chain(&leaves, &parents, db, &mut HashMap::new(), flags)?;
        return Ok(Pipeline::new(root, attrs));
    }

    if !flags.m2_skip_gyo_validation {
        is_nice(plan).map_err(|v| validation(ValidationFailure::NotNice(v)))?;
    }
    let construction = virtual_relation_method(plan, TreeShape::Rooted)?;
    if let Some(t) = tree {
        check_join_tree(t, &query)
            .map_err(|fs| validation(ValidationFailure::InvalidTree(fs.iter().map(ToString::to_string).collect())))?;
    }
    let mut fragments: HashMap<String, Pipeline> = HashMap::new();
    let last = construction.fragments.len() - 1;
    for (i, f) in construction.fragments.iter().enumerate() {
        let root = build_chain(&f.leaves, &f.parents, db, &mut fragments, flags)?;
        let pipeline = Pipeline::new(root, attrs_of(&f.leaves));
        if i == last {
            return Ok(pipeline);
        }
        let v = f.virtual_rel.as_ref().expect("non-terminal fragment has a virtual relation");
        fragments.insert(v.name.clone(), pipeline);
    }
    unreachable!("construction always ends with a terminal fragment")
}

/// Drains `pipeline` into a bag. Opens it first if needed.
pub fn evaluate(pipeline: &mut Pipeline, trace: &mut Trace) -> Result<ResultBag> {
    pipeline.open(trace)?;
    let mut bag = ResultBag::new(pipeline.attrs().clone());
    while let Some(t) = pipeline.next(trace)? {
        trace.record(|| TraceEvent::Emit { tuple: t.clone() });
        bag.insert(t)?;
    }
    Ok(bag)
}
