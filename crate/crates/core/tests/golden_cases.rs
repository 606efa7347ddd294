//! The checked-in case files: canonical on disk, and their verdict under
//! each single defect flag.

use std::path::PathBuf;

use ttj::casefile::{read_case, CaseFile};
use ttj::engine::DefectFlags;
use ttj::harness::{run_case, VerdictKind};

fn path(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "cases", name].iter().collect()
}

const FILES: [&str; 5] = ["fig1a.json", "fig1c.json", "gyo_violation.json", "bushy_p1.json", "bushy_p2.json"];

#[test]
fn case_files_are_canonical() {
    for f in FILES {
        let text = std::fs::read_to_string(path(f)).unwrap();
        let tc = read_case(&path(f)).unwrap();
        assert_eq!(CaseFile::from_case(&tc).to_json(), text, "{f} is not in canonical form");
        assert!(tc.flags.is_clean(), "{f} carries defect flags");
    }
}

#[test]
fn verdict_matrix() {
    use VerdictKind::*;
    let flags = [DefectFlags::NONE, DefectFlags::m1(), DefectFlags::m2(), DefectFlags::m3()];
    let expect: Vec<(&str, [VerdictKind; 4])> = vec![
        ("fig1a.json", [Pass, Pass, Pass, Pass]),
        ("fig1c.json", [Pass, Mismatch, Pass, Pass]),
        ("gyo_violation.json", [Pass, Pass, StructuredError("NoCoveringParent".into()), Pass]),
        ("bushy_p1.json", [Pass, Pass, Pass, Pass]),
        ("bushy_p2.json", [Pass, Pass, Pass, Mismatch]),
    ];
    for (f, kinds) in expect {
        let tc = read_case(&path(f)).unwrap();
        for (fl, want) in flags.iter().zip(kinds) {
            let r = run_case(&tc.with_flags(*fl));
            assert_eq!(r.verdict.kind(), want, "{f} under {fl}: {}", r.verdict);
        }
    }
}

#[test]
fn clean_runs_match_the_oracle_row_counts() {
    for (f, rows) in [("fig1a.json", 1), ("fig1c.json", 1), ("bushy_p1.json", 2), ("bushy_p2.json", 1)] {
        let r = run_case(&read_case(&path(f)).unwrap());
        assert_eq!(r.oracle_rows, Some(rows), "{f}");
        assert_eq!(r.physical_rows, Some(rows), "{f}");
    }
}
