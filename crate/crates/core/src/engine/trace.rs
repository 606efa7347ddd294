use std::fmt;

use crate::relmodel::Tuple;

/// One execution event of a physical pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    /// A leaf scan produced a tuple.
    Fetch { relation: String, tuple: Tuple },
    ProbeHit { label: usize, inner: String, key: Tuple, tuple: Tuple },
    ProbeMiss { label: usize, inner: String, key: Tuple },
    /// Iterator `label` failed its probe of `inner` and sends control to
    /// `target`; `None` means a plain fetch from the outer (no parent to
    /// delete from).
    Backjump { label: usize, inner: String, target: Option<String> },
    Delete { label: usize, relation: String, tuple: Tuple },
    Emit { tuple: Tuple },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Fetch { relation, tuple } => write!(f, "FETCH {relation} {tuple}"),
            TraceEvent::ProbeHit { label, inner, key, tuple } => {
                write!(f, "PROBE_HIT j{label} {inner}{key} -> {tuple}")
            }
            TraceEvent::ProbeMiss { label, inner, key } => write!(f, "PROBE_MISS j{label} {inner}{key}"),
            TraceEvent::Backjump { label, inner, target } => match target {
                Some(t) => write!(f, "BACKJUMP j{label} {inner} -> {t}"),
                None => write!(f, "BACKJUMP j{label} {inner} -> outer"),
            },
            TraceEvent::Delete { label, relation, tuple } => write!(f, "DELETE j{label} {relation}{tuple}"),
            TraceEvent::Emit { tuple } => write!(f, "EMIT {tuple}"),
        }
    }
}

/// Event sink threaded through the iterator calls. Disabled traces never
/// build events.
#[derive(Debug, Default)]
pub struct Trace {
    enabled: bool,
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn enabled() -> Self {
        Trace { enabled: true, events: Vec::new() }
    }

    pub fn disabled() -> Self {
        Trace::default()
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub(crate) fn record(&mut self, event: impl FnOnce() -> TraceEvent) {
        if self.enabled {
            self.events.push(event());
        }
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }
}
