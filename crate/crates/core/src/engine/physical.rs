//! Pipelined TTJ iterators.
//!
//! `get_next` and `delete_dt` are mutually recursive: a probe miss asks the
//! outer chain to backjump to the inner relation's join-tree parent, and the
//! iterator owning that parent deletes its current match before resuming.

use crate::engine::trace::{Trace, TraceEvent};
use crate::engine::DefectFlags;
use crate::error::{Error, Result};
use crate::relmodel::{AttrSet, HashIndex, Relation, RelationDecl, Tuple};

/// The set-of-matching-tuples state of an iterator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchCursor {
    Absent,
    /// The current bucket was drained by deletion.
    Emptied,
    /// Cursor into the bucket for `key`; `pos` matches have been handed out,
    /// so the current match is at `pos - 1`.
    Active { key: Tuple, pos: usize },
}

/// Scan over the leftmost relation of a (fragment) pipeline.
#[derive(Debug)]
pub struct LeafScan {
    relation: Relation,
    cursor: usize,
}

impl LeafScan {
    pub fn new(relation: Relation) -> Self {
        LeafScan { relation, cursor: 0 }
    }

    fn open(&mut self) {
        self.cursor = 0;
    }

    fn get_next(&mut self, trace: &mut Trace) -> Option<Tuple> {
        let t = self.relation.rows().get(self.cursor)?.clone();
        self.cursor += 1;
        trace.record(|| TraceEvent::Fetch {
            relation: self.relation.name().to_string(),
            tuple: t.clone(),
        });
        Some(t)
    }

    // Deleting from the leftmost relation is just moving on.
    fn delete_dt(&mut self, target: &str, trace: &mut Trace) -> Result<Option<Tuple>> {
        if self.relation.name() != target {
            return Err(Error::ProtocolViolation(format!(
                "backjump target {target} not found on the pipeline spine (reached scan of {})",
                self.relation.name()
            )));
        }
        Ok(self.get_next(trace))
    }
}

/// What an iterator builds its hash table from.
#[derive(Debug)]
pub enum InnerUnit {
    Relation(Relation),
    /// A materialized sub-pipeline standing for a virtual relation.
    Fragment { decl: RelationDecl, pipeline: Box<Pipeline> },
}

impl InnerUnit {
    pub fn name(&self) -> &str {
        match self {
            InnerUnit::Relation(r) => r.name(),
            InnerUnit::Fragment { decl, .. } => &decl.name,
        }
    }

    fn drain(&mut self, trace: &mut Trace) -> Result<Vec<Tuple>> {
        match self {
            InnerUnit::Relation(r) => Ok(r.rows().to_vec()),
            InnerUnit::Fragment { pipeline, .. } => {
                pipeline.open(trace)?;
                let mut rows = Vec::new();
                while let Some(t) = pipeline.next(trace)? {
                    rows.push(t);
                }
                Ok(rows)
            }
        }
    }
}

#[derive(Debug)]
pub struct TtjIterator {
    label: usize,
    outer: Operator,
    inner: InnerUnit,
    inner_name: String,
    key_attrs: AttrSet,
    index: Option<HashIndex>,
    r: Option<Tuple>,
    mt: MatchCursor,
    /// Join-tree parent of the inner unit; `None` falls back to a plain fetch.
    backjump_parent: Option<String>,
    flags: DefectFlags,
}

impl TtjIterator {
    pub fn new(
        label: usize,
        outer: Operator,
        inner: InnerUnit,
        key_attrs: AttrSet,
        backjump_parent: Option<String>,
        flags: DefectFlags,
    ) -> Self {
        TtjIterator {
            label,
            inner_name: inner.name().to_string(),
            outer,
            inner,
            key_attrs,
            index: None,
            r: None,
            mt: MatchCursor::Absent,
            backjump_parent,
            flags,
        }
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn inner_name(&self) -> &str {
        &self.inner_name
    }

    pub fn key_attrs(&self) -> &AttrSet {
        &self.key_attrs
    }

    pub fn backjump_parent(&self) -> Option<&str> {
        self.backjump_parent.as_deref()
    }

    pub fn cursor(&self) -> &MatchCursor {
        &self.mt
    }

    pub fn outer(&self) -> &Operator {
        &self.outer
    }

    pub fn index(&self) -> Option<&HashIndex> {
        self.index.as_ref()
    }

    fn open(&mut self, trace: &mut Trace) -> Result<()> {
        self.r = None;
        self.mt = MatchCursor::Absent;
        let rows = self.inner.drain(trace)?;
        self.index = Some(HashIndex::build(&rows, &self.key_attrs)?);
        self.outer.open(trace)
    }

    fn built_index(&self) -> Result<&HashIndex> {
        self.index
            .as_ref()
            .ok_or_else(|| Error::ProtocolViolation(format!("j{} used before open", self.label)))
    }

    fn current_outer(&self) -> Result<&Tuple> {
        self.r
            .as_ref()
            .ok_or_else(|| Error::ProtocolViolation(format!("j{} has no outer tuple", self.label)))
    }

    /// `MT.next()`: the next match of an active cursor, if any.
    fn next_match(&mut self) -> Result<Option<Tuple>> {
        let MatchCursor::Active { key, pos } = &self.mt else {
            return Ok(None);
        };
        let next = self.built_index()?.get(key).and_then(|b| b.get(*pos)).cloned();
        if next.is_some() {
            if let MatchCursor::Active { pos, .. } = &mut self.mt {
                *pos += 1;
            }
        }
        Ok(next)
    }

    fn get_next(&mut self, trace: &mut Trace) -> Result<Option<Tuple>> {
        self.built_index()?;
        if matches!(self.mt, MatchCursor::Active { .. }) {
            if let Some(m) = self.next_match()? {
                return Ok(Some(self.current_outer()?.concat(&m)?));
            }
            self.r = self.outer.get_next(trace)?;
            if self.r.is_none() {
                return Ok(None);
            }
        }
        if self.r.is_none() || self.mt == MatchCursor::Emptied {
            self.r = self.outer.get_next(trace)?;
        }
        while let Some(r) = self.r.clone() {
            let key = r.project(&self.key_attrs)?;
            let hit = self.built_index()?.get(&key).map(|bucket| bucket[0].clone());
            match hit {
                Some(m) => {
                    trace.record(|| TraceEvent::ProbeHit {
                        label: self.label,
                        inner: self.inner_name.clone(),
                        key: key.clone(),
                        tuple: m.clone(),
                    });
                    let out = r.concat(&m)?;
                    self.mt = MatchCursor::Active { key, pos: 1 };
                    return Ok(Some(out));
                }
                None => {
                    self.mt = MatchCursor::Absent;
                    trace.record(|| TraceEvent::ProbeMiss {
                        label: self.label,
                        inner: self.inner_name.clone(),
                        key,
                    });
                    trace.record(|| TraceEvent::Backjump {
                        label: self.label,
                        inner: self.inner_name.clone(),
                        target: self.backjump_parent.clone(),
                    });
                    self.r = match &self.backjump_parent {
                        Some(p) => self.outer.delete_dt(p, trace)?,
                        None => self.outer.get_next(trace)?,
                    };
                }
            }
        }
        Ok(None)
    }

    fn delete_dt(&mut self, target: &str, trace: &mut Trace) -> Result<Option<Tuple>> {
        if self.inner_name == target {
            let MatchCursor::Active { key, pos } = &self.mt else {
                return Err(Error::ProtocolViolation(format!(
                    "j{} asked to delete from {target} without a current match",
                    self.label
                )));
            };
            let (key, pos) = (key.clone(), *pos);
            let index = self.index.as_mut().expect("opened");
            let (removed, drained) = pos
                .checked_sub(1)
                .and_then(|p| index.remove(&key, p))
                .ok_or_else(|| {
                    Error::ProtocolViolation(format!("j{}: current match of {target} is gone", self.label))
                })?;
            trace.record(|| TraceEvent::Delete {
                label: self.label,
                relation: target.to_string(),
                tuple: removed,
            });
            self.mt = if drained {
                MatchCursor::Emptied
            } else {
                MatchCursor::Active { key, pos: pos - 1 }
            };
        } else {
            if !self.flags.m1_skip_mt_clear {
                self.mt = MatchCursor::Absent;
            }
            self.r = self.outer.delete_dt(target, trace)?;
            if self.r.is_none() {
                return Ok(None);
            }
        }
        self.get_next(trace)
    }
}

/// A node of a physical pipeline.
#[derive(Debug)]
pub enum Operator {
    Scan(LeafScan),
    Ttj(Box<TtjIterator>),
}

impl Operator {
    pub fn open(&mut self, trace: &mut Trace) -> Result<()> {
        match self {
            Operator::Scan(s) => {
                s.open();
                Ok(())
            }
            Operator::Ttj(it) => it.open(trace),
        }
    }

    pub fn get_next(&mut self, trace: &mut Trace) -> Result<Option<Tuple>> {
        match self {
            Operator::Scan(s) => Ok(s.get_next(trace)),
            Operator::Ttj(it) => it.get_next(trace),
        }
    }

    pub fn delete_dt(&mut self, target: &str, trace: &mut Trace) -> Result<Option<Tuple>> {
        match self {
            Operator::Scan(s) => s.delete_dt(target, trace),
            Operator::Ttj(it) => it.delete_dt(target, trace),
        }
    }

    /// Iterators from the root down the outer spine.
    pub fn iterators(&self) -> Vec<&TtjIterator> {
        let mut out = Vec::new();
        let mut cur = self;
        while let Operator::Ttj(it) = cur {
            out.push(it.as_ref());
            cur = &it.outer;
        }
        out
    }
}

/// An executable pipeline with fused exhaustion.
#[derive(Debug)]
pub struct Pipeline {
    root: Operator,
    attrs: AttrSet,
    opened: bool,
    exhausted: bool,
}

impl Pipeline {
    pub fn new(root: Operator, attrs: AttrSet) -> Self {
        Pipeline { root, attrs, opened: false, exhausted: false }
    }

    pub fn root(&self) -> &Operator {
        &self.root
    }

    pub fn attrs(&self) -> &AttrSet {
        &self.attrs
    }

    pub fn open(&mut self, trace: &mut Trace) -> Result<()> {
        self.root.open(trace)?;
        self.opened = true;
        self.exhausted = false;
        Ok(())
    }

    pub fn next(&mut self, trace: &mut Trace) -> Result<Option<Tuple>> {
        if !self.opened {
            return Err(Error::ProtocolViolation("pipeline used before open".into()));
        }
        if self.exhausted {
            return Ok(None);
        }
        let t = self.root.get_next(trace)?;
        if t.is_none() {
            self.exhausted = true;
        }
        Ok(t)
    }

    /// Sizes of every hash index on the outer spine, root first.
    pub fn index_sizes(&self) -> Vec<usize> {
        self.root
            .iterators()
            .iter()
            .map(|it| it.index.as_ref().map_or(0, HashIndex::len))
            .collect()
    }
}
