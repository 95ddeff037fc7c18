//! Event timelines with explicit causal dependencies.

use serde::{Deserialize, Serialize};

use crate::channel::LinkKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Es,
    Ue(usize),
    /// A link used by one UE; D2D links are attributed to the sender.
    Link { kind: LinkKind, ue: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Compute,
    Transmit,
    Fuse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub label: String,
    pub actor: Actor,
    pub kind: EventKind,
    pub start_s: f64,
    pub end_s: f64,
    /// Indices of events that must finish before this one starts.
    pub deps: Vec<usize>,
}

impl TimelineEvent {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    events: Vec<TimelineEvent>,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an event that starts once all `deps` are done and not before
    /// `not_before`. Returns its index.
    pub fn push(
        &mut self,
        label: impl Into<String>,
        actor: Actor,
        kind: EventKind,
        not_before: f64,
        duration: f64,
        deps: &[usize],
    ) -> usize {
        let start = deps.iter().map(|&d| self.events[d].end_s).fold(not_before, f64::max);
        self.events.push(TimelineEvent {
            label: label.into(),
            actor,
            kind,
            start_s: start,
            end_s: start + duration,
            deps: deps.to_vec(),
        });
        self.events.len() - 1
    }

    /// Copies events `0..=upto` of `other`, times unchanged, and returns
    /// the index offset applied to them.
    pub fn splice(&mut self, other: &Timeline, upto: usize) -> usize {
        let offset = self.events.len();
        for e in &other.events[..=upto] {
            let mut e = e.clone();
            e.deps.iter_mut().for_each(|d| *d += offset);
            self.events.push(e);
        }
        offset
    }

    pub fn events(&self) -> &[TimelineEvent] {
        &self.events
    }

    pub fn end_of(&self, i: usize) -> f64 {
        self.events[i].end_s
    }

    /// Latest completion time, 0 for an empty timeline.
    pub fn completion(&self) -> f64 {
        self.events.iter().map(|e| e.end_s).fold(0.0, f64::max)
    }

    /// `(label, end time)` pairs ordered by completion.
    pub fn ordered(&self) -> Vec<(&str, f64)> {
        let mut idx: Vec<usize> = (0..self.events.len()).collect();
        idx.sort_by(|&a, &b| self.events[a].end_s.total_cmp(&self.events[b].end_s).then(a.cmp(&b)));
        idx.into_iter()
            .map(|i| (self.events[i].label.as_str(), self.events[i].end_s))
            .collect()
    }

    /// Chain of events ending at the last completion, following at each
    /// step the dependency that finished last.
    pub fn critical_path(&self) -> Vec<usize> {
        // The latest-pushed event wins ties, so zero-length tails are kept.
        let Some(mut cur) = (0..self.events.len()).max_by(|&a, &b| self.events[a].end_s.total_cmp(&self.events[b].end_s))
        else {
            return Vec::new();
        };
        let mut path = vec![cur];
        loop {
            let e = &self.events[cur];
            let Some(&prev) = e
                .deps
                .iter()
                .filter(|&&d| self.events[d].end_s == e.start_s)
                .min()
            else {
                break;
            };
            path.push(prev);
            cur = prev;
        }
        path.reverse();
        path
    }

    /// Summed durations of the critical-path events of each kind.
    pub fn critical_durations(&self) -> (f64, f64) {
        let mut tx = 0.0;
        let mut compute = 0.0;
        for i in self.critical_path() {
            let e = &self.events[i];
            match e.kind {
                EventKind::Transmit => tx += e.duration(),
                EventKind::Compute | EventKind::Fuse => compute += e.duration(),
            }
        }
        (tx, compute)
    }

    /// Checks that times are finite and ordered, that every event starts
    /// after its dependencies, and that no UE or link does two things at
    /// once. The ES serves UEs concurrently and is exempt.
    pub fn audit(&self) -> Result<()> {
        for (i, e) in self.events.iter().enumerate() {
            if !(e.start_s.is_finite() && e.end_s.is_finite()) || e.start_s < 0.0 || e.end_s < e.start_s {
                return Err(Error::InvalidValue(format!(
                    "event {i} `{}` has bad interval [{}, {}]",
                    e.label, e.start_s, e.end_s
                )));
            }
            for &d in &e.deps {
                if d >= i {
                    return Err(Error::InvalidValue(format!(
                        "event {i} `{}` depends on later event {d}",
                        e.label
                    )));
                }
                if self.events[d].end_s > e.start_s {
                    return Err(Error::InvalidValue(format!(
                        "event {i} `{}` starts at {} before dependency `{}` ends at {}",
                        e.label, e.start_s, self.events[d].label, self.events[d].end_s
                    )));
                }
            }
        }
        for (i, a) in self.events.iter().enumerate() {
            for b in &self.events[i + 1..] {
                let overlap = a.start_s.max(b.start_s) < a.end_s.min(b.end_s);
                if a.actor == b.actor && a.actor != Actor::Es && overlap {
                    return Err(Error::InvalidValue(format!(
                        "`{}` and `{}` overlap on {:?}",
                        a.label, b.label, a.actor
                    )));
                }
            }
        }
        Ok(())
    }
}
