//! Differential evaluation of test cases: physical TTJ, recursive TTJ and
//! the oracle are run on the same instance and their bags compared.

mod fuzz;
mod shrink;

pub use fuzz::{case_seed, fuzz, fuzz_path, fuzz_paths, CampaignSummary, PathSummary, SynthesisPath};
pub use shrink::shrink;

use std::fmt;

use serde_json::json;

use crate::engine::{build_pipeline, evaluate, ttj_logical, ttj_logical_plan, DefectFlags, Trace};
use crate::error::{Error, Result};
use crate::jointree::{recover_join_tree, JoinTree};
use crate::oracle::oracle_join;
use crate::planalg::{is_nice, virtual_relation_method, Plan, TreeShape};
use crate::relmodel::{bag_equal, BagComparison, Database, ResultBag, Tuple};
use crate::synth::linearize;

/// Which synthesis entry point produced a case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Join tree first; the plan, if any, is a linearization of it.
    TreeFirst,
    /// Plan first; any tree is derived from the plan.
    PlanFirst,
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::TreeFirst => "A",
            Provenance::PlanFirst => "B",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub id: String,
    pub seed: u64,
    pub db: Database,
    pub tree: Option<JoinTree>,
    pub plan: Option<Plan>,
    pub flags: DefectFlags,
    pub provenance: Provenance,
}

impl TestCase {
    pub fn new(
        seed: u64,
        db: Database,
        tree: Option<JoinTree>,
        plan: Option<Plan>,
        flags: DefectFlags,
        provenance: Provenance,
    ) -> Self {
        TestCase { id: format!("{}-{seed}", provenance.tag()), seed, db, tree, plan, flags, provenance }
    }

    pub fn with_flags(&self, flags: DefectFlags) -> Self {
        TestCase { flags, ..self.clone() }
    }

    pub fn tuple_count(&self) -> usize {
        self.db.tuple_count()
    }

    pub fn relation_count(&self) -> usize {
        self.db.relations().len()
    }

    /// The executed plan: the stored one, or a seeded linearization of the
    /// tree.
    pub fn effective_plan(&self) -> Result<Plan> {
        if let Some(p) = &self.plan {
            return Ok(p.clone());
        }
        let tree = self.tree.as_ref().ok_or_else(|| Error::CaseFormat("case has neither plan nor join tree".into()))?;
        let mut rng = crate::synth::SynthConfig::default().with_seed(self.seed).rng();
        Ok(Plan::left_deep(&linearize(tree, &mut rng)))
    }

    /// Structural checks: plan leaves and tree nodes name exactly the
    /// relations of the instance.
    pub fn check(&self) -> Result<()> {
        let mut rels: Vec<&str> = self.db.relations().iter().map(|r| r.name()).collect();
        rels.sort_unstable();
        if let Some(p) = &self.plan {
            let leaves = p.leaves();
            let mut names: Vec<&str> = leaves.iter().map(|l| l.name.as_str()).collect();
            names.sort_unstable();
            if names != rels {
                return Err(Error::CaseFormat(format!("plan {p} does not cover exactly the relations {rels:?}")));
            }
            for l in &leaves {
                if self.db.relation(&l.name)?.decl != *l {
                    return Err(Error::CaseFormat(format!("plan leaf {} differs from its relation", l.name)));
                }
            }
        }
        if let Some(t) = &self.tree {
            let mut names: Vec<&str> = t.nodes().iter().map(|n| n.name.as_str()).collect();
            names.sort_unstable();
            if names != rels {
                return Err(Error::CaseFormat(format!("join tree {t} does not cover exactly the relations {rels:?}")));
            }
        }
        if self.plan.is_none() && self.tree.is_none() {
            return Err(Error::CaseFormat("case has neither plan nor join tree".into()));
        }
        Ok(())
    }
}

/// Which evaluator produced a bag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluator {
    Physical,
    Logical,
    Oracle,
}

impl fmt::Display for Evaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Evaluator::Physical => "physical",
            Evaluator::Logical => "logical",
            Evaluator::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// All evaluators agree, or the case was rejected by validation (then
    /// `diagnostic` says why).
    Pass { diagnostic: Option<String> },
    Mismatch {
        witness: Tuple,
        /// Multiplicity of `witness` in each compared bag.
        left: (Evaluator, usize),
        right: (Evaluator, usize),
    },
    StructuredError { kind: String, message: String },
}

/// A verdict without its payload, for comparing runs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VerdictKind {
    Pass,
    Mismatch,
    StructuredError(String),
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerdictKind::Pass => f.write_str("pass"),
            VerdictKind::Mismatch => f.write_str("mismatch"),
            VerdictKind::StructuredError(k) => write!(f, "structured_error({k})"),
        }
    }
}

impl Verdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::Pass { .. } => VerdictKind::Pass,
            Verdict::Mismatch { .. } => VerdictKind::Mismatch,
            Verdict::StructuredError { kind, .. } => VerdictKind::StructuredError(kind.clone()),
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }

    /// 0 pass, 1 mismatch, 2 structured error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Pass { .. } => 0,
            Verdict::Mismatch { .. } => 1,
            Verdict::StructuredError { .. } => 2,
        }
    }

    fn from_error(e: &Error) -> Self {
        Verdict::StructuredError { kind: e.kind().to_string(), message: e.to_string() }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass { diagnostic: None } => f.write_str("PASS"),
            Verdict::Pass { diagnostic: Some(d) } => write!(f, "PASS (rejected: {d})"),
            Verdict::Mismatch { witness, left, right } => write!(
                f,
                "MISMATCH witness {witness}: {} x{} vs {} x{}",
                left.0, left.1, right.0, right.1
            ),
            Verdict::StructuredError { kind, message } => write!(f, "STRUCTURED_ERROR {kind}: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefectReport {
    pub case_id: String,
    pub flags: DefectFlags,
    pub verdict: Verdict,
    pub physical_rows: Option<usize>,
    pub logical_rows: Option<usize>,
    pub oracle_rows: Option<usize>,
    /// Physical-pipeline events, when tracing was requested.
    pub trace: Vec<String>,
    pub mre: Option<TestCase>,
}

impl DefectReport {
    fn new(tc: &TestCase, verdict: Verdict) -> Self {
        DefectReport {
            case_id: tc.id.clone(),
            flags: tc.flags,
            verdict,
            physical_rows: None,
            logical_rows: None,
            oracle_rows: None,
            trace: Vec::new(),
            mre: None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let verdict = match &self.verdict {
            Verdict::Pass { diagnostic } => json!({ "kind": "pass", "diagnostic": diagnostic }),
            Verdict::Mismatch { witness, left, right } => json!({
                "kind": "mismatch",
                "witness": witness.to_string(),
                "multiplicities": { left.0.to_string(): left.1, right.0.to_string(): right.1 },
            }),
            Verdict::StructuredError { kind, message } => {
                json!({ "kind": "structured_error", "error": kind, "message": message })
            }
        };
        let mut doc = json!({
            "case": self.case_id,
            "flags": self.flags,
            "verdict": verdict,
            "rows": {
                "physical": self.physical_rows,
                "logical": self.logical_rows,
                "oracle": self.oracle_rows,
            },
        });
        if !self.trace.is_empty() {
            doc["trace"] = json!(self.trace);
        }
        if let Some(m) = &self.mre {
            doc["mre"] = crate::casefile::CaseFile::from_case(m).to_value();
        }
        doc
    }
}

impl fmt::Display for DefectReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case {} [{}]: {}", self.case_id, self.flags, self.verdict)?;
        let show = |n: Option<usize>| n.map_or("-".to_string(), |n| n.to_string());
        write!(
            f,
            "rows: physical {} logical {} oracle {}",
            show(self.physical_rows),
            show(self.logical_rows),
            show(self.oracle_rows)
        )
    }
}

/// True when some join in `plan` has operands with no attribute in common.
pub fn plan_has_cartesian(plan: &Plan) -> bool {
    match plan {
        Plan::Leaf(_) => false,
        Plan::Join(l, r) => l.attrs().is_disjoint(&r.attrs()) || plan_has_cartesian(l) || plan_has_cartesian(r),
    }
}

/// Recursive evaluation under the correct mapping; `Ok(None)` when the plan
/// admits no valid tree (only reachable when a defect flag skipped
/// validation).
fn logical_reference(tc: &TestCase, plan: &Plan) -> Result<Option<ResultBag>> {
    let leaves = plan.leaves();
    if plan.is_left_deep() {
        let tree = match &tc.tree {
            Some(t) => t.clone(),
            None => match recover_join_tree(&leaves) {
                Ok(t) => t,
                Err(_) => return Ok(None),
            },
        };
        return ttj_logical(&tc.db, &leaves, &tree).map(Some);
    }
    if is_nice(plan).is_err() {
        return Ok(None);
    }
    let construction = virtual_relation_method(plan, TreeShape::Rooted)?;
    ttj_logical_plan(&tc.db, &construction).map(Some)
}

fn compare(a: (Evaluator, &ResultBag), b: (Evaluator, &ResultBag)) -> Result<Option<Verdict>> {
    Ok(match bag_equal(a.1, b.1)? {
        BagComparison::Equal => None,
        BagComparison::Differ { witness, left, right } => {
            Some(Verdict::Mismatch { witness, left: (a.0, left), right: (b.0, right) })
        }
    })
}

/// Runs a case through all three evaluators.
pub fn run_case(tc: &TestCase) -> DefectReport {
    run_case_traced(tc, false)
}

pub fn run_case_traced(tc: &TestCase, traced: bool) -> DefectReport {
    match run_inner(tc, traced) {
        Ok(r) => r,
        Err(e) => DefectReport::new(tc, Verdict::from_error(&e)),
    }
}

fn run_inner(tc: &TestCase, traced: bool) -> Result<DefectReport> {
    tc.check()?;
    let plan = tc.effective_plan()?;
    let refused = |why: String| Ok(DefectReport::new(tc, Verdict::Pass { diagnostic: Some(why) }));
    if plan_has_cartesian(&plan) {
        return refused(format!("plan {plan} contains a Cartesian product"));
    }
    let tree = match tc.provenance {
        Provenance::TreeFirst => tc.tree.as_ref(),
        Provenance::PlanFirst => None,
    };
    let mut pipeline = match build_pipeline(&plan, tree, &tc.db, tc.flags) {
        Ok(p) => p,
        Err(Error::ValidationFailed(f)) => return refused(f.to_string()),
        Err(e) => return Ok(DefectReport::new(tc, Verdict::from_error(&e))),
    };
    let mut trace = if traced { Trace::enabled() } else { Trace::disabled() };
    let physical = evaluate(&mut pipeline, &mut trace);
    let events: Vec<String> = trace.events().iter().map(ToString::to_string).collect();
    let physical = match physical {
        Ok(b) => b,
        Err(e) => {
            let mut r = DefectReport::new(tc, Verdict::from_error(&e));
            r.trace = events;
            return Ok(r);
        }
    };
    let logical = logical_reference(tc, &plan)?;
    let oracle = oracle_join(&tc.db)?;

    let mut report = DefectReport::new(tc, Verdict::Pass { diagnostic: None });
    report.physical_rows = Some(physical.len());
    report.logical_rows = logical.as_ref().map(ResultBag::len);
    report.oracle_rows = Some(oracle.len());
    report.trace = events;
    let mut checks = vec![((Evaluator::Physical, &physical), (Evaluator::Oracle, &oracle))];
    if let Some(l) = &logical {
        checks.push(((Evaluator::Logical, l), (Evaluator::Oracle, &oracle)));
        checks.push(((Evaluator::Physical, &physical), (Evaluator::Logical, l)));
    }
    for (a, b) in checks {
        if let Some(v) = compare(a, b)? {
            report.verdict = v;
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relmodel::{Relation, RelationDecl};

    fn running(edges: &[(&str, &str)], flags: DefectFlags) -> TestCase {
        let db = Database::new(vec![
            Relation::from_rows("R", &["a", "x"], &[&[13, 1], &[14, 2]]).unwrap(),
            Relation::from_rows("S", &["a", "w"], &[&[13, 1], &[14, 2]]).unwrap(),
            Relation::from_rows("T", &["a", "z"], &[&[14, 1]]).unwrap(),
        ])
        .unwrap();
        let e: Vec<(String, String)> = edges.iter().map(|(p, c)| (p.to_string(), c.to_string())).collect();
        let tree = JoinTree::from_edges(db.decls(), "R", &e).unwrap();
        let plan = Plan::parse("((R S) T)", &db.decls()).unwrap();
        TestCase::new(1, db, Some(tree), Some(plan), flags, Provenance::TreeFirst)
    }

    #[test]
    fn running_example_verdicts() {
        let chain = [("R", "S"), ("S", "T")];
        let star = [("R", "S"), ("R", "T")];
        assert!(run_case(&running(&chain, DefectFlags::NONE)).verdict.is_pass());
        assert!(run_case(&running(&star, DefectFlags::NONE)).verdict.is_pass());
        assert!(run_case(&running(&chain, DefectFlags::m1())).verdict.is_pass());
        let r = run_case(&running(&star, DefectFlags::m1()));
        match r.verdict {
            Verdict::Mismatch { witness, left, right } => {
                assert_eq!(witness, Tuple::from_pairs([("a", 14), ("x", 2), ("w", 2), ("z", 1)]));
                assert_eq!(left, (Evaluator::Physical, 0));
                assert_eq!(right, (Evaluator::Oracle, 1));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!((r.physical_rows, r.logical_rows, r.oracle_rows), (Some(0), Some(1), Some(1)));
    }

    fn gyo_case(flags: DefectFlags) -> TestCase {
        let db = Database::new(vec![
            Relation::from_rows("R", &["a", "b"], &[&[1, 1]]).unwrap(),
            Relation::from_rows("S", &["b", "c"], &[&[1, 1]]).unwrap(),
            Relation::from_rows("T", &["a", "b", "c"], &[&[1, 1, 1]]).unwrap(),
        ])
        .unwrap();
        let plan = Plan::parse("((R S) T)", &db.decls()).unwrap();
        TestCase::new(2, db, None, Some(plan), flags, Provenance::PlanFirst)
    }

    #[test]
    fn gyo_violation_verdicts() {
        match run_case(&gyo_case(DefectFlags::NONE)).verdict {
            Verdict::Pass { diagnostic: Some(d) } => assert!(d.contains("j=3"), "{d}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            run_case(&gyo_case(DefectFlags::m2())).verdict.kind(),
            VerdictKind::StructuredError("NoCoveringParent".into())
        );
    }

    #[test]
    fn cartesian_refused() {
        let db = Database::new(vec![
            Relation::from_rows("R", &["a"], &[&[1]]).unwrap(),
            Relation::from_rows("S", &["b"], &[&[1]]).unwrap(),
            Relation::from_rows("T", &["a", "b"], &[&[1, 1]]).unwrap(),
        ])
        .unwrap();
        let plan = Plan::parse("((R S) T)", &db.decls()).unwrap();
        for flags in [DefectFlags::NONE, DefectFlags::m2()] {
            let tc = TestCase::new(3, db.clone(), None, Some(plan.clone()), flags, Provenance::PlanFirst);
            assert!(matches!(run_case(&tc).verdict, Verdict::Pass { diagnostic: Some(_) }));
        }
    }

    #[test]
    fn bushy_m3_mismatch() {
        let db = Database::new(vec![
            Relation::from_rows("T", &["a", "b", "c"], &[&[1, 1, 1], &[1, 1, 2]]).unwrap(),
            Relation::from_rows("R", &["a", "b"], &[&[1, 1]]).unwrap(),
            Relation::from_rows("S", &["b", "c"], &[&[1, 2]]).unwrap(),
        ])
        .unwrap();
        let plan = Plan::parse("(T (R S))", &db.decls()).unwrap();
        let tc = TestCase::new(4, db, None, Some(plan), DefectFlags::NONE, Provenance::PlanFirst);
        assert!(run_case(&tc).verdict.is_pass());
        assert_eq!(run_case(&tc.with_flags(DefectFlags::m3())).verdict.kind(), VerdictKind::Mismatch);
    }

    #[test]
    fn malformed_case_is_structured_error() {
        let mut tc = gyo_case(DefectFlags::NONE);
        tc.plan = Some(Plan::left_deep(&[RelationDecl::of("R", &["a", "b"]), RelationDecl::of("S", &["b", "c"])]));
        assert_eq!(run_case(&tc).verdict.kind(), VerdictKind::StructuredError("CaseFormat".into()));
    }

    #[test]
    fn tracing_collects_events() {
        let r = run_case_traced(&running(&[("R", "S"), ("R", "T")], DefectFlags::m1()), true);
        assert!(r.trace.iter().any(|l| l.starts_with("BACKJUMP j2 T -> R")), "{:?}", r.trace);
        // the stale cursor on S ends the stream before T is probed again
        assert_eq!(r.trace.iter().filter(|l| l.starts_with("PROBE_MISS")).count(), 1);
        assert!(!r.trace.iter().any(|l| l.starts_with("EMIT")));
    }

    #[test]
    fn deterministic_reports() {
        let tc = running(&[("R", "S"), ("R", "T")], DefectFlags::m1());
        assert_eq!(run_case(&tc), run_case(&tc));
    }
}
