//! On-disk JSON form of a test case.
//!
//! ```json
//! {"seed": 1, "attrs": ["a", "x"], "relations": [{"name": "R", "schema": ["a", "x"], "tuples": [[13, 1]]}],
//!  "join_tree": {"root": "R", "edges": []}, "plan": "R", "flags": {"m1": false, "m2": false, "m3": false}}
//! ```
//!
//! Canonical form: `attrs` sorted, tree edges in breadth-first order, plan
//! re-rendered, two-space pretty printing with a trailing newline.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::DefectFlags;
use crate::error::{Error, Result};
use crate::harness::{Provenance, TestCase};
use crate::jointree::JoinTree;
use crate::planalg::Plan;
use crate::relmodel::{Attr, Database, Relation, RelationDecl, Schema, Tuple, Value};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationFile {
    pub name: String,
    pub schema: Vec<String>,
    pub tuples: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeFile {
    pub root: String,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub seed: u64,
    pub attrs: Vec<String>,
    pub relations: Vec<RelationFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join_tree: Option<TreeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<String>,
    #[serde(default)]
    pub flags: DefectFlags,
}

impl CaseFile {
    pub fn from_case(tc: &TestCase) -> Self {
        let attrs: BTreeSet<String> = tc.db.attrs().iter().map(|a| a.as_str().to_string()).collect();
        let relations = tc
            .db
            .relations()
            .iter()
            .map(|r| RelationFile {
                name: r.name().to_string(),
                schema: r.schema().attrs().iter().map(|a| a.as_str().to_string()).collect(),
                tuples: r.rows().iter().map(|t| t.row(r.schema()).expect("conforming row")).collect(),
            })
            .collect();
        let join_tree = tc.tree.as_ref().and_then(|t| {
            Some(TreeFile { root: t.root()?.name.clone(), edges: t.edges() })
        });
        CaseFile {
            seed: tc.seed,
            attrs: attrs.into_iter().collect(),
            relations,
            join_tree,
            plan: tc.plan.as_ref().map(ToString::to_string),
            flags: tc.flags,
        }
    }

    pub fn to_case(&self) -> Result<TestCase> {
        let mut relations = Vec::with_capacity(self.relations.len());
        for r in &self.relations {
            let attrs = r.schema.iter().map(|a| Attr::new(a.clone())).collect::<Result<Vec<_>>>()?;
            let schema = Schema::new(attrs)?;
            let mut rows = Vec::with_capacity(r.tuples.len());
            for (i, t) in r.tuples.iter().enumerate() {
                rows.push(Tuple::from_row(&schema, t).map_err(|e| {
                    Error::CaseFormat(format!("relations[{}] ({}): tuples[{i}]: {e}", r.name, r.name))
                })?);
            }
            relations.push(Relation::new(RelationDecl::new(r.name.clone(), schema), rows)?);
        }
        let db = Database::new(relations)?;
        let declared: BTreeSet<&str> = self.attrs.iter().map(String::as_str).collect();
        let db_attrs = db.attrs();
        let used: BTreeSet<&str> = db_attrs.iter().map(Attr::as_str).collect();
        if declared != used {
            return Err(Error::CaseFormat(format!(
                "attrs: declared {declared:?} but relations use {used:?}"
            )));
        }
        let decls = db.decls();
        let tree = match &self.join_tree {
            Some(t) => Some(
                JoinTree::from_edges(decls.clone(), &t.root, &t.edges)
                    .map_err(|e| Error::CaseFormat(format!("join_tree: {e}")))?,
            ),
            None => None,
        };
        let plan = match &self.plan {
            Some(p) => Some(Plan::parse(p, &decls).map_err(|e| Error::CaseFormat(format!("plan: {e}")))?),
            None => None,
        };
        let provenance = if tree.is_some() { Provenance::TreeFirst } else { Provenance::PlanFirst };
        let tc = TestCase::new(self.seed, db, tree, plan, self.flags, provenance);
        tc.check()?;
        Ok(tc)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("case files always serialize")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("case files always serialize");
        s.push('\n');
        s
    }
}

pub fn read_case(path: &Path) -> Result<TestCase> {
    let text = std::fs::read_to_string(path)?;
    CaseFile::parse(&text)?.to_case()
}

pub fn write_case(path: &Path, tc: &TestCase) -> Result<()> {
    std::fs::write(path, CaseFile::from_case(tc).to_json())?;
    Ok(())
}

/// Parse then re-serialize in canonical form.
pub fn canonicalize(text: &str) -> Result<String> {
    Ok(CaseFile::from_case(&CaseFile::parse(text)?.to_case()?).to_json())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_case, generate_plan_case, SynthConfig};

    const FIG1C: &str = r#"{
  "seed": 1,
  "attrs": ["a", "w", "x", "z"],
  "relations": [
    {"name": "R", "schema": ["a", "x"], "tuples": [[13, 1], [14, 2]]},
    {"name": "S", "schema": ["a", "w"], "tuples": [[13, 1], [14, 2]]},
    {"name": "T", "schema": ["a", "z"], "tuples": [[14, 1]]}
  ],
  "join_tree": {"root": "R", "edges": [["R", "S"], ["R", "T"]]},
  "plan": "((R S) T)",
  "flags": {"m1": true}
}"#;

    #[test]
    fn parses_and_round_trips() {
        let tc = CaseFile::parse(FIG1C).unwrap().to_case().unwrap();
        assert_eq!(tc.provenance, Provenance::TreeFirst);
        assert!(tc.flags.m1_skip_mt_clear);
        assert_eq!(tc.tuple_count(), 5);
        let canon = canonicalize(FIG1C).unwrap();
        assert_eq!(canonicalize(&canon).unwrap(), canon);
        assert_eq!(CaseFile::parse(&canon).unwrap().to_case().unwrap(), tc);
    }

    #[test]
    fn generated_cases_round_trip() {
        for seed in 0..200 {
            let cfg = SynthConfig::default().with_seed(seed);
            for tc in [generate_case(&cfg), generate_plan_case(&cfg)] {
                let text = CaseFile::from_case(&tc).to_json();
                let back = CaseFile::parse(&text).unwrap().to_case().unwrap();
                assert_eq!(back, tc);
                assert_eq!(CaseFile::from_case(&back).to_json(), text);
            }
        }
    }

    #[test]
    fn rejects_unknown_fields() {
        let bad = FIG1C.replacen("\"seed\"", "\"extra\": 1, \"seed\"", 1);
        assert!(matches!(CaseFile::parse(&bad), Err(Error::Json(_))));
        let bad = FIG1C.replace("{\"m1\": true}", "{\"m9\": true}");
        assert!(matches!(CaseFile::parse(&bad), Err(Error::Json(_))));
    }

    #[test]
    fn rejects_inconsistent_content() {
        let bad = FIG1C.replace("[14, 1]]", "[14]]");
        assert!(matches!(CaseFile::parse(&bad).unwrap().to_case(), Err(Error::CaseFormat(_))));
        let bad = FIG1C.replace("\"x\", \"z\"]", "\"x\"]");
        assert!(matches!(CaseFile::parse(&bad).unwrap().to_case(), Err(Error::CaseFormat(_))));
        let bad = FIG1C.replace("((R S) T)", "(R S)");
        assert!(matches!(CaseFile::parse(&bad).unwrap().to_case(), Err(Error::CaseFormat(_))));
        let bad = FIG1C.replace("[\"R\", \"T\"]", "[\"R\", \"Q\"]");
        assert!(matches!(CaseFile::parse(&bad).unwrap().to_case(), Err(Error::CaseFormat(_))));
    }
}
