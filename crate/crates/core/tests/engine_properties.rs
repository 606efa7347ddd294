//! Seeded properties of the physical pipeline against the recursive
//! evaluator and the oracle.

use ttj::engine::{build_pipeline, evaluate, ttj_logical, DefectFlags, Trace, TraceEvent};
use ttj::harness::{case_seed, run_case, SynthesisPath, TestCase, Verdict};
use ttj::oracle::oracle_join;
use ttj::relmodel::{bag_equal, BagComparison};
use ttj::synth::SynthConfig;

const CASES: usize = 1000;

fn cases(path: SynthesisPath, base: u64) -> impl Iterator<Item = TestCase> {
    (0..CASES).map(move |i| path.generate(&SynthConfig::default().with_seed(case_seed(base, i))))
}

#[test]
fn physical_logical_and_oracle_agree() {
    for tc in cases(SynthesisPath::A, 1) {
        let tree = tc.tree.as_ref().expect("tree-first case has a tree");
        let plan = tc.effective_plan().unwrap();
        let mut p = build_pipeline(&plan, Some(tree), &tc.db, DefectFlags::NONE).unwrap();
        let physical = evaluate(&mut p, &mut Trace::disabled()).unwrap();
        let logical = ttj_logical(&tc.db, &plan.leaves(), tree).unwrap();
        let oracle = oracle_join(&tc.db).unwrap();
        assert_eq!(bag_equal(&physical, &oracle).unwrap(), BagComparison::Equal, "{}", tc.id);
        assert_eq!(bag_equal(&logical, &oracle).unwrap(), BagComparison::Equal, "{}", tc.id);
    }
}

#[test]
fn backjumps_target_the_tree_parent() {
    for tc in cases(SynthesisPath::A, 2) {
        let tree = tc.tree.as_ref().unwrap();
        let plan = tc.effective_plan().unwrap();
        let mut p = build_pipeline(&plan, Some(tree), &tc.db, DefectFlags::NONE).unwrap();
        let mut trace = Trace::enabled();
        evaluate(&mut p, &mut trace).unwrap();
        for ev in trace.events() {
            if let TraceEvent::Backjump { inner, target: Some(t), .. } = ev {
                let parent = tree.parent_of(inner).map(|d| d.name.as_str());
                assert_eq!(parent, Some(t.as_str()), "{}: {ev}", tc.id);
            }
        }
    }
}

#[test]
fn indexes_only_shrink_and_exhaustion_is_fused() {
    for tc in cases(SynthesisPath::A, 3) {
        let plan = tc.effective_plan().unwrap();
        let mut p = build_pipeline(&plan, tc.tree.as_ref(), &tc.db, DefectFlags::NONE).unwrap();
        let mut trace = Trace::disabled();
        p.open(&mut trace).unwrap();
        let mut sizes = p.index_sizes();
        while p.next(&mut trace).unwrap().is_some() {
            let now = p.index_sizes();
            assert!(now.iter().zip(&sizes).all(|(n, s)| n <= s), "{}: {sizes:?} -> {now:?}", tc.id);
            sizes = now;
        }
        for _ in 0..3 {
            assert_eq!(p.next(&mut trace).unwrap(), None, "{}", tc.id);
        }
    }
}

#[test]
fn clean_runs_never_raise_structured_errors() {
    for path in [SynthesisPath::A, SynthesisPath::B] {
        for tc in cases(path, 4) {
            let report = run_case(&tc);
            assert!(
                !matches!(report.verdict, Verdict::StructuredError { .. } | Verdict::Mismatch { .. }),
                "{}: {}",
                tc.id,
                report.verdict
            );
        }
    }
}
