//! Seeded campaigns over both synthesis paths.

use std::fmt;

use rayon::prelude::*;
use serde_json::json;

use crate::engine::DefectFlags;
use crate::synth::{generate_case, generate_plan_case, SynthConfig};

use super::{run_case, DefectReport, TestCase, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthesisPath {
    /// Join tree first.
    A,
    /// Plan first.
    B,
}

impl SynthesisPath {
    pub fn generate(&self, cfg: &SynthConfig) -> TestCase {
        match self {
            SynthesisPath::A => generate_case(cfg),
            SynthesisPath::B => generate_plan_case(cfg),
        }
    }
}

impl fmt::Display for SynthesisPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisPath::A => "A",
            SynthesisPath::B => "B",
        })
    }
}

/// Seed of the `i`-th case of a campaign rooted at `base`.
pub fn case_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSummary {
    pub path: SynthesisPath,
    pub cases: usize,
    /// Passing cases, including validation rejections.
    pub pass: usize,
    /// Passing cases that were rejected by validation rather than executed.
    pub rejected: usize,
    pub mismatch: usize,
    pub structured_error: usize,
    /// Every non-passing case with its report, in seed order.
    pub failures: Vec<(TestCase, DefectReport)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignSummary {
    pub seed: u64,
    pub flags: DefectFlags,
    pub paths: Vec<PathSummary>,
}

/// Runs `n_cases` cases from one synthesis path. Cases run in parallel; the
/// summary does not depend on scheduling.
pub fn fuzz_path(cfg: &SynthConfig, n_cases: usize, flags: DefectFlags, path: SynthesisPath) -> PathSummary {
    let results: Vec<(TestCase, DefectReport)> = (0..n_cases)
        .into_par_iter()
        .map(|i| {
            let tc = path.generate(&cfg.with_seed(case_seed(cfg.seed, i))).with_flags(flags);
            let report = run_case(&tc);
            (tc, report)
        })
        .collect();
    let mut s = PathSummary {
        path,
        cases: n_cases,
        pass: 0,
        rejected: 0,
        mismatch: 0,
        structured_error: 0,
        failures: Vec::new(),
    };
    for (tc, report) in results {
        match &report.verdict {
            Verdict::Pass { diagnostic } => {
                s.pass += 1;
                s.rejected += diagnostic.is_some() as usize;
            }
            Verdict::Mismatch { .. } => s.mismatch += 1,
            Verdict::StructuredError { .. } => s.structured_error += 1,
        }
        if !report.verdict.is_pass() {
            s.failures.push((tc, report));
        }
    }
    s
}

/// `n_cases` cases per synthesis path.
pub fn fuzz(cfg: &SynthConfig, n_cases: usize, flags: DefectFlags) -> CampaignSummary {
    fuzz_paths(cfg, n_cases, flags, &[SynthesisPath::A, SynthesisPath::B])
}

pub fn fuzz_paths(cfg: &SynthConfig, n_cases: usize, flags: DefectFlags, paths: &[SynthesisPath]) -> CampaignSummary {
    CampaignSummary {
        seed: cfg.seed,
        flags,
        paths: paths.iter().map(|&p| fuzz_path(cfg, n_cases, flags, p)).collect(),
    }
}

impl CampaignSummary {
    pub fn total(&self) -> usize {
        self.paths.iter().map(|p| p.cases).sum()
    }

    pub fn mismatches(&self) -> usize {
        self.paths.iter().map(|p| p.mismatch).sum()
    }

    pub fn structured_errors(&self) -> usize {
        self.paths.iter().map(|p| p.structured_error).sum()
    }

    pub fn all_pass(&self) -> bool {
        self.mismatches() == 0 && self.structured_errors() == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &(TestCase, DefectReport)> {
        self.paths.iter().flat_map(|p| p.failures.iter())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let paths: Vec<serde_json::Value> = self
            .paths
            .iter()
            .map(|p| {
                json!({
                    "path": p.path.to_string(),
                    "cases": p.cases,
                    "pass": p.pass,
                    "rejected": p.rejected,
                    "mismatch": p.mismatch,
                    "structured_error": p.structured_error,
                    "failures": p.failures.iter().map(|(tc, r)| json!({
                        "id": tc.id,
                        "seed": tc.seed,
                        "verdict": r.verdict.kind().to_string(),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({ "seed": self.seed, "flags": self.flags, "paths": paths })
    }
}

impl fmt::Display for CampaignSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "campaign seed {} flags {}", self.seed, self.flags)?;
        for p in &self.paths {
            writeln!(
                f,
                "path {}: {} cases, {} pass ({} rejected), {} mismatch, {} structured_error",
                p.path, p.cases, p.pass, p.rejected, p.mismatch, p.structured_error
            )?;
        }
        for (tc, r) in self.failures() {
            writeln!(f, "  {} seed {}: {}", tc.id, tc.seed, r.verdict)?;
        }
        Ok(())
    }
}
