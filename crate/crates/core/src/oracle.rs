//! Ground truth: a brute-force natural join under bag semantics and a SQL
//! rendering of the same query for external engines.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::relmodel::{Attr, AttrSet, Database, Relation, ResultBag, Tuple};

/// Relation indices in an order where every relation after the first shares
/// an attribute with an earlier one, or `None` if the join graph is
/// disconnected.
fn connected_order(rels: &[&Relation]) -> Option<Vec<usize>> {
    let mut order = vec![0];
    let mut seen: AttrSet = rels[0].decl.attr_set();
    while order.len() < rels.len() {
        let next = (0..rels.len())
            .find(|i| !order.contains(i) && !rels[*i].decl.attr_set().is_disjoint(&seen))?;
        seen.extend(rels[next].decl.attr_set());
        order.push(next);
    }
    Some(order)
}

/// Natural join of `rels` by nested loops. The visiting order only keeps
/// intermediate results small; the bag is the same for any order.
pub fn oracle_join_relations(rels: &[&Relation]) -> Result<ResultBag> {
    if rels.is_empty() {
        return Ok(ResultBag::new(AttrSet::new()));
    }
    let order = connected_order(rels).ok_or(Error::DisconnectedQuery)?;
    let attrs: AttrSet = rels.iter().flat_map(|r| r.decl.attr_set()).collect();
    let mut partial = vec![Tuple::empty()];
    for i in order {
        let mut next = Vec::new();
        for t in &partial {
            for r in rels[i].rows() {
                if let Ok(joined) = t.concat(r) {
                    next.push(joined);
                }
            }
        }
        partial = next;
    }
    ResultBag::from_tuples(attrs, partial)
}

/// Natural join of every relation in `db`.
pub fn oracle_join(db: &Database) -> Result<ResultBag> {
    let rels: Vec<&Relation> = db.relations().iter().collect();
    oracle_join_relations(&rels)
}

fn quote(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// DDL, inserts and a SELECT whose result equals [`oracle_join`] on `db`.
///
/// Every pair of relations sharing an attribute gets an equality predicate,
/// so the predicate set is already transitively closed.
pub fn emit_sql(db: &Database) -> String {
    let mut out = String::new();
    for r in db.relations() {
        let cols: Vec<String> =
            r.schema().attrs().iter().map(|a| format!("{} INTEGER NOT NULL", quote(a.as_str()))).collect();
        writeln!(out, "CREATE TABLE {} ({});", quote(r.name()), cols.join(", ")).unwrap();
    }
    for r in db.relations() {
        let cols: Vec<String> = r.schema().attrs().iter().map(|a| quote(a.as_str())).collect();
        for t in r.rows() {
            let vals: Vec<String> = t.row(r.schema()).expect("conforming row").iter().map(i64::to_string).collect();
            writeln!(out, "INSERT INTO {} ({}) VALUES ({});", quote(r.name()), cols.join(", "), vals.join(", ")).unwrap();
        }
    }
    out.push_str(&select_sql(db));
    out.push('\n');
    out
}

/// Just the query part of [`emit_sql`].
pub fn select_sql(db: &Database) -> String {
    let rels = db.relations();
    if rels.len() == 1 {
        return format!("SELECT * FROM {};", quote(rels[0].name()));
    }
    let attrs: BTreeSet<&Attr> = rels.iter().flat_map(|r| r.schema().attrs()).collect();
    let mut select = Vec::new();
    let mut preds = Vec::new();
    for a in attrs {
        let holders: Vec<&str> = rels.iter().filter(|r| r.schema().contains(a)).map(|r| r.name()).collect();
        let col = |r: &str| format!("{}.{}", quote(r), quote(a.as_str()));
        select.push(format!("{} AS {}", col(holders[0]), quote(a.as_str())));
        for i in 0..holders.len() {
            for j in i + 1..holders.len() {
                preds.push(format!("{} = {}", col(holders[i]), col(holders[j])));
            }
        }
    }
    let from: Vec<String> = rels.iter().map(|r| quote(r.name())).collect();
    let mut sql = format!("SELECT {} FROM {}", select.join(", "), from.join(", "));
    if !preds.is_empty() {
        write!(sql, " WHERE {}", preds.join(" AND ")).unwrap();
    }
    sql.push(';');
    sql
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running() -> Database {
        Database::new(vec![
            Relation::from_rows("R", &["a", "x"], &[&[13, 1], &[14, 2]]).unwrap(),
            Relation::from_rows("S", &["a", "w"], &[&[13, 1], &[14, 2]]).unwrap(),
            Relation::from_rows("T", &["a", "z"], &[&[14, 1]]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn running_example_result() {
        let bag = oracle_join(&running()).unwrap();
        assert_eq!(bag.len(), 1);
        assert_eq!(bag.count(&Tuple::from_pairs([("a", 14), ("x", 2), ("w", 2), ("z", 1)])), 1);
    }

    #[test]
    fn bushy_instance_result() {
        let db = Database::new(vec![
            Relation::from_rows("T", &["a", "b", "c"], &[&[1, 1, 1], &[1, 1, 2]]).unwrap(),
            Relation::from_rows("R", &["a", "b"], &[&[1, 1]]).unwrap(),
            Relation::from_rows("S", &["b", "c"], &[&[1, 2]]).unwrap(),
        ])
        .unwrap();
        let bag = oracle_join(&db).unwrap();
        assert_eq!(bag.len(), 1);
        assert_eq!(bag.count(&Tuple::from_pairs([("a", 1), ("b", 1), ("c", 2)])), 1);
    }

    #[test]
    fn empty_relation_gives_empty_result() {
        let mut db = running();
        db.relations_mut()[2] = Relation::from_rows("T", &["a", "z"], &[]).unwrap();
        assert!(oracle_join(&db).unwrap().is_empty());
    }

    #[test]
    fn duplicates_multiply() {
        let db = Database::new(vec![
            Relation::from_rows("R", &["a"], &[&[1], &[1]]).unwrap(),
            Relation::from_rows("S", &["a", "b"], &[&[1, 5], &[1, 5], &[1, 5]]).unwrap(),
        ])
        .unwrap();
        let bag = oracle_join(&db).unwrap();
        assert_eq!(bag.count(&Tuple::from_pairs([("a", 1), ("b", 5)])), 6);
    }

    #[test]
    fn disconnected_is_refused() {
        let db = Database::new(vec![
            Relation::from_rows("R", &["a"], &[&[1]]).unwrap(),
            Relation::from_rows("S", &["b"], &[&[1]]).unwrap(),
        ])
        .unwrap();
        assert!(matches!(oracle_join(&db), Err(Error::DisconnectedQuery)));
    }

    #[test]
    fn connected_through_later_relation() {
        // R and S only meet through T
        let db = Database::new(vec![
            Relation::from_rows("R", &["a"], &[&[1], &[2]]).unwrap(),
            Relation::from_rows("S", &["b"], &[&[3]]).unwrap(),
            Relation::from_rows("T", &["a", "b"], &[&[1, 3], &[2, 4]]).unwrap(),
        ])
        .unwrap();
        assert_eq!(oracle_join(&db).unwrap().len(), 1);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn commutative_over_all_permutations() {
        let db = Database::new(vec![
            Relation::from_rows("R", &["a", "b"], &[&[1, 1], &[1, 2], &[2, 1], &[1, 1]]).unwrap(),
            Relation::from_rows("S", &["b", "c"], &[&[1, 1], &[2, 2], &[1, 3]]).unwrap(),
            Relation::from_rows("T", &["a", "c"], &[&[1, 1], &[1, 3], &[2, 2]]).unwrap(),
            Relation::from_rows("U", &["c", "d"], &[&[1, 9], &[3, 9], &[3, 8]]).unwrap(),
        ])
        .unwrap();
        let base = oracle_join(&db).unwrap();
        assert!(!base.is_empty());
        for p in permutations(4) {
            let rels: Vec<&Relation> = p.iter().map(|&i| &db.relations()[i]).collect();
            assert_eq!(oracle_join_relations(&rels).unwrap(), base, "{p:?}");
        }
    }

    #[test]
    fn sql_for_running_example() {
        let sql = emit_sql(&running());
        assert_eq!(sql.matches("CREATE TABLE").count(), 3);
        assert_eq!(sql.matches("INSERT INTO").count(), 5);
        assert!(sql.contains("\"a\" INTEGER NOT NULL"));
        assert!(!sql.contains("DISTINCT"));
        let select = select_sql(&running());
        for p in [r#""R"."a" = "S"."a""#, r#""R"."a" = "T"."a""#, r#""S"."a" = "T"."a""#] {
            assert!(select.contains(p), "{select}");
        }
        assert!(select.starts_with(r#"SELECT "R"."a" AS "a", "S"."w" AS "w", "R"."x" AS "x", "T"."z" AS "z" FROM"#));
    }

    #[test]
    fn sql_for_single_relation() {
        let db = Database::new(vec![Relation::from_rows("R", &["a"], &[&[1]]).unwrap()]).unwrap();
        assert_eq!(select_sql(&db), r#"SELECT * FROM "R";"#);
    }
}
