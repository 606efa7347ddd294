//! Relational data model: attributes, schemas, tuples, relations, hash
//! indexes and multiset result comparison.
//!
//! Tuples are attribute-keyed maps, so their canonical form (attributes in
//! lexicographic order) falls out of the `BTreeMap` representation and
//! hashing/comparison is independent of the schema order a relation was
//! declared with.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attribute values. Symbolic constants are encoded as small integers in a
/// per-attribute namespace.
pub type Value = i64;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Attr(String);

impl Attr {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidSchema("empty attribute name".into()));
        }
        Ok(Attr(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Attr {
    /// Panics on the empty string; for literals only.
    fn from(s: &str) -> Self {
        Attr::new(s).expect("attribute literal must be nonempty")
    }
}

pub type AttrSet = BTreeSet<Attr>;

/// Builds an attribute set from string literals.
pub fn attrs<'a>(names: impl IntoIterator<Item = &'a str>) -> AttrSet {
    names.into_iter().map(Attr::from).collect()
}

/// Ordered, duplicate-free attribute list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schema(Vec<Attr>);

impl Schema {
    pub fn new(attrs: Vec<Attr>) -> Result<Self> {
        if attrs.is_empty() {
            return Err(Error::InvalidSchema("schema must be nonempty".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &attrs {
            if !seen.insert(a) {
                return Err(Error::InvalidSchema(format!("duplicate attribute {a}")));
            }
        }
        Ok(Schema(attrs))
    }

    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let attrs = names
            .into_iter()
            .map(Attr::new)
            .collect::<Result<Vec<_>>>()?;
        Schema::new(attrs)
    }

    pub fn attrs(&self) -> &[Attr] {
        &self.0
    }

    pub fn attr_set(&self) -> AttrSet {
        self.0.iter().cloned().collect()
    }

    pub fn contains(&self, a: &Attr) -> bool {
        self.0.contains(a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(Attr::as_str).collect();
        write!(f, "({})", names.join(","))
    }
}

/// A tuple in canonical form.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tuple(BTreeMap<Attr, Value>);

impl Tuple {
    pub fn empty() -> Self {
        Tuple(BTreeMap::new())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Value)>) -> Self {
        Tuple(pairs.into_iter().map(|(a, v)| (Attr::from(a), v)).collect())
    }

    /// Zips a positional row with a schema.
    pub fn from_row(schema: &Schema, row: &[Value]) -> Result<Self> {
        if row.len() != schema.len() {
            return Err(Error::InvalidSchema(format!(
                "row has {} values, schema {schema} has {}",
                row.len(),
                schema.len()
            )));
        }
        Ok(Tuple(schema.attrs().iter().cloned().zip(row.iter().copied()).collect()))
    }

    pub fn get(&self, a: &Attr) -> Option<Value> {
        self.0.get(a).copied()
    }

    pub fn attrs(&self) -> AttrSet {
        self.0.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Attr, Value)> {
        self.0.iter().map(|(a, v)| (a, *v))
    }

    /// Values in the order of `schema`.
    pub fn row(&self, schema: &Schema) -> Result<Vec<Value>> {
        schema
            .attrs()
            .iter()
            .map(|a| self.get(a).ok_or_else(|| Error::MissingAttribute { attr: a.clone() }))
            .collect()
    }

    /// Schema-resolving concatenation (`++`).
    pub fn concat(&self, other: &Tuple) -> Result<Tuple> {
        let mut out = self.0.clone();
        for (a, v) in &other.0 {
            match out.get(a) {
                Some(existing) if *existing != *v => {
                    return Err(Error::ConflictingBinding {
                        attr: a.clone(),
                        left: *existing,
                        right: *v,
                    })
                }
                Some(_) => {}
                None => {
                    out.insert(a.clone(), *v);
                }
            }
        }
        Ok(Tuple(out))
    }

    pub fn project(&self, attrs: &AttrSet) -> Result<Tuple> {
        let mut out = BTreeMap::new();
        for a in attrs {
            let v = self.get(a).ok_or_else(|| Error::MissingAttribute { attr: a.clone() })?;
            out.insert(a.clone(), v);
        }
        Ok(Tuple(out))
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (a, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}:{v}")?;
        }
        f.write_str(")")
    }
}

/// Free-function form of [`Tuple::concat`].
pub fn concat_tuples(t1: &Tuple, t2: &Tuple) -> Result<Tuple> {
    t1.concat(t2)
}

/// Free-function form of [`Tuple::project`].
pub fn project(t: &Tuple, attrs: &AttrSet) -> Result<Tuple> {
    t.project(attrs)
}

/// A relation's name and schema, without data. Join trees and plans refer to
/// relations through declarations; virtual relations only ever exist as
/// declarations (or as materialized fragment output inside the engine).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelationDecl {
    pub name: String,
    pub schema: Schema,
    pub is_virtual: bool,
}

impl RelationDecl {
    pub fn new(name: impl Into<String>, schema: Schema) -> Self {
        RelationDecl {
            name: name.into(),
            schema,
            is_virtual: false,
        }
    }

    pub fn virtual_rel(name: impl Into<String>, schema: Schema) -> Self {
        RelationDecl {
            name: name.into(),
            schema,
            is_virtual: true,
        }
    }

    /// Shorthand for tests and goldens: `RelationDecl::of("R", &["a", "b"])`.
    pub fn of(name: &str, attrs: &[&str]) -> Self {
        RelationDecl::new(name, Schema::from_names(attrs.iter().copied()).expect("valid schema literal"))
    }

    pub fn attr_set(&self) -> AttrSet {
        self.schema.attr_set()
    }
}

impl fmt::Display for RelationDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.name, self.schema)
    }
}

/// A named bag of tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub decl: RelationDecl,
    rows: Vec<Tuple>,
}

impl Relation {
    pub fn new(decl: RelationDecl, rows: Vec<Tuple>) -> Result<Self> {
        let expected = decl.attr_set();
        for t in &rows {
            if t.attrs() != expected {
                return Err(Error::NonConformingTuple {
                    relation: decl.name.clone(),
                    detail: format!("{t} vs schema {}", decl.schema),
                });
            }
        }
        Ok(Relation { decl, rows })
    }

    pub fn from_rows(name: &str, attrs: &[&str], rows: &[&[Value]]) -> Result<Self> {
        let decl = RelationDecl::new(name, Schema::from_names(attrs.iter().copied())?);
        let tuples = rows
            .iter()
            .map(|r| Tuple::from_row(&decl.schema, r))
            .collect::<Result<Vec<_>>>()?;
        Relation::new(decl, tuples)
    }

    pub fn name(&self) -> &str {
        &self.decl.name
    }

    pub fn schema(&self) -> &Schema {
        &self.decl.schema
    }

    pub fn rows(&self) -> &[Tuple] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn remove_row(&mut self, idx: usize) -> Tuple {
        self.rows.remove(idx)
    }
}

/// An instance: relations in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    relations: Vec<Relation>,
}

impl Database {
    pub fn new(relations: Vec<Relation>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for r in &relations {
            if !names.insert(r.name()) {
                return Err(Error::InvalidSchema(format!("duplicate relation {}", r.name())));
            }
        }
        Ok(Database { relations })
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.name() == name)
    }

    pub fn relation(&self, name: &str) -> Result<&Relation> {
        self.get(name).ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relations_mut(&mut self) -> &mut Vec<Relation> {
        &mut self.relations
    }

    pub fn decls(&self) -> Vec<RelationDecl> {
        self.relations.iter().map(|r| r.decl.clone()).collect()
    }

    /// Union of all relation attributes.
    pub fn attrs(&self) -> AttrSet {
        self.relations.iter().flat_map(|r| r.decl.attr_set()).collect()
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.iter().map(Relation::len).sum()
    }
}

/// Hash index grouping tuples by their projection onto `key_attrs`.
#[derive(Debug, Clone)]
pub struct HashIndex {
    key_attrs: AttrSet,
    buckets: HashMap<Tuple, Vec<Tuple>>,
    len: usize,
}

impl HashIndex {
    pub fn build<'a>(rows: impl IntoIterator<Item = &'a Tuple>, key_attrs: &AttrSet) -> Result<Self> {
        let mut buckets: HashMap<Tuple, Vec<Tuple>> = HashMap::new();
        let mut len = 0;
        for t in rows {
            let k = t.project(key_attrs)?;
            buckets.entry(k).or_default().push(t.clone());
            len += 1;
        }
        Ok(HashIndex {
            key_attrs: key_attrs.clone(),
            buckets,
            len,
        })
    }

    pub fn key_attrs(&self) -> &AttrSet {
        &self.key_attrs
    }

    pub fn get(&self, key: &Tuple) -> Option<&[Tuple]> {
        self.buckets.get(key).map(Vec::as_slice)
    }

    /// Removes the tuple at `pos` of bucket `key`. A drained bucket is
    /// dropped so later lookups see it as absent. Returns the removed tuple
    /// and whether the bucket was drained.
    pub fn remove(&mut self, key: &Tuple, pos: usize) -> Option<(Tuple, bool)> {
        let bucket = self.buckets.get_mut(key)?;
        if pos >= bucket.len() {
            return None;
        }
        let t = bucket.remove(pos);
        self.len -= 1;
        let drained = bucket.is_empty();
        if drained {
            self.buckets.remove(key);
        }
        Some((t, drained))
    }

    /// Number of stored tuples.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn buckets(&self) -> impl Iterator<Item = (&Tuple, &[Tuple])> {
        self.buckets.iter().map(|(k, v)| (k, v.as_slice()))
    }
}

/// Free-function form of [`HashIndex::build`].
pub fn build_index(rows: &[Tuple], key_attrs: &AttrSet) -> Result<HashIndex> {
    HashIndex::build(rows, key_attrs)
}

/// A multiset of result tuples over a fixed attribute set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResultBag {
    attrs: AttrSet,
    rows: BTreeMap<Tuple, usize>,
}

impl ResultBag {
    pub fn new(attrs: AttrSet) -> Self {
        ResultBag {
            attrs,
            rows: BTreeMap::new(),
        }
    }

    pub fn from_tuples(attrs: AttrSet, tuples: impl IntoIterator<Item = Tuple>) -> Result<Self> {
        let mut bag = ResultBag::new(attrs);
        for t in tuples {
            bag.insert(t)?;
        }
        Ok(bag)
    }

    pub fn insert(&mut self, t: Tuple) -> Result<()> {
        if t.attrs() != self.attrs {
            return Err(Error::SchemaMismatch {
                left: self.attrs.clone(),
                right: t.attrs(),
            });
        }
        *self.rows.entry(t).or_insert(0) += 1;
        Ok(())
    }

    pub fn attrs(&self) -> &AttrSet {
        &self.attrs
    }

    pub fn count(&self, t: &Tuple) -> usize {
        self.rows.get(t).copied().unwrap_or(0)
    }

    /// Total number of rows, counting multiplicity.
    pub fn len(&self) -> usize {
        self.rows.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct rows with their multiplicities, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&Tuple, usize)> {
        self.rows.iter().map(|(t, c)| (t, *c))
    }
}

/// Outcome of a bag comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BagComparison {
    Equal,
    /// The smallest tuple (in canonical order) whose multiplicities differ.
    Differ {
        witness: Tuple,
        left: usize,
        right: usize,
    },
}

impl BagComparison {
    pub fn is_equal(&self) -> bool {
        matches!(self, BagComparison::Equal)
    }
}

pub fn bag_equal(b1: &ResultBag, b2: &ResultBag) -> Result<BagComparison> {
    if b1.attrs != b2.attrs {
        return Err(Error::SchemaMismatch {
            left: b1.attrs.clone(),
            right: b2.attrs.clone(),
        });
    }
    let keys: BTreeSet<&Tuple> = b1.rows.keys().chain(b2.rows.keys()).collect();
    for t in keys {
        let (l, r) = (b1.count(t), b2.count(t));
        if l != r {
            return Ok(BagComparison::Differ {
                witness: t.clone(),
                left: l,
                right: r,
            });
        }
    }
    Ok(BagComparison::Equal)
}
