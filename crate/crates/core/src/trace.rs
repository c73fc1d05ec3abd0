//! Per-step trace records and run observers.

use serde::{Deserialize, Serialize};

use crate::action::EnvAction;
use crate::archive::{Archive, ObjectiveId};
use crate::state::DiscretizedState;

/// One line of the line-delimited JSON trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Global step index, 1-based, equal to the budget consumed after the step.
    pub step: u64,
    pub episode: u64,
    /// Objective whose Q-table picked the action; absent for random moves.
    pub guide: Option<ObjectiveId>,
    pub state: DiscretizedState,
    pub action: EnvAction,
    pub rewards: Vec<f64>,
    /// Environment-native rewards when they differ from `rewards`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_rewards: Option<Vec<f64>>,
    pub epsilon: f64,
    pub terminal: bool,
}

/// Receives progress and trace events from a running search.
pub trait RunObserver {
    /// Trace records are only built when this returns true.
    fn wants_trace(&self) -> bool {
        false
    }

    fn on_trace(&mut self, _record: &TraceRecord) {}

    /// Called after every environment step (MORLOT) or evaluation
    /// (chromosome-based searches) with the budget consumed so far.
    fn on_progress(&mut self, _consumed: u64, _archive: &Archive) {}
}

/// Observer that ignores everything.
#[derive(Clone, Copy, Debug, Default)]
pub struct Silent;

impl RunObserver for Silent {}

/// Collects trace records in memory.
#[derive(Clone, Debug, Default)]
pub struct TraceBuffer {
    pub records: Vec<TraceRecord>,
}

impl RunObserver for TraceBuffer {
    fn wants_trace(&self) -> bool {
        true
    }

    fn on_trace(&mut self, record: &TraceRecord) {
        self.records.push(record.clone());
    }
}

/// Samples archive coverage every `interval` consumed steps.
#[derive(Clone, Debug)]
pub struct CoverageTimeline {
    interval: u64,
    next: u64,
    n_objectives: usize,
    pub samples: Vec<(u64, f64)>,
}

impl CoverageTimeline {
    pub fn new(interval: u64, n_objectives: usize) -> Self {
        let interval = interval.max(1);
        Self { interval, next: interval, n_objectives, samples: Vec::new() }
    }

    /// Records the final coverage at `consumed` if it is not already sampled.
    pub fn finish(&mut self, consumed: u64, archive: &Archive) {
        self.on_progress(consumed, archive);
        if self.samples.last().map(|s| s.0) != Some(consumed) {
            self.samples.push((consumed, self.fraction(archive)));
        }
    }

    fn fraction(&self, archive: &Archive) -> f64 {
        archive.len() as f64 / self.n_objectives.max(1) as f64
    }
}

impl RunObserver for CoverageTimeline {
    fn on_progress(&mut self, consumed: u64, archive: &Archive) {
        while consumed >= self.next {
            let f = self.fraction(archive);
            self.samples.push((self.next, f));
            self.next += self.interval;
        }
    }
}

/// Forwards every event to two observers.
pub struct Tee<'a, A: ?Sized, B: ?Sized>(pub &'a mut A, pub &'a mut B);

impl<A: RunObserver + ?Sized, B: RunObserver + ?Sized> RunObserver for Tee<'_, A, B> {
    fn wants_trace(&self) -> bool {
        self.0.wants_trace() || self.1.wants_trace()
    }

    fn on_trace(&mut self, record: &TraceRecord) {
        if self.0.wants_trace() {
            self.0.on_trace(record);
        }
        if self.1.wants_trace() {
            self.1.on_trace(record);
        }
    }

    fn on_progress(&mut self, consumed: u64, archive: &Archive) {
        self.0.on_progress(consumed, archive);
        self.1.on_progress(consumed, archive);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testcase::TestCase;

    #[test]
    fn timeline_samples_each_boundary() {
        let mut t = CoverageTimeline::new(10, 4);
        let mut a = Archive::new();
        t.on_progress(5, &a);
        assert!(t.samples.is_empty());
        let mut tc = TestCase::new("x", 0);
        tc.push(DiscretizedState::default(), EnvAction::NoOp);
        a.offer(ObjectiveId(0), tc);
        t.on_progress(25, &a);
        assert_eq!(t.samples, vec![(10, 0.25), (20, 0.25)]);
        t.finish(27, &a);
        assert_eq!(t.samples.last(), Some(&(27, 0.25)));
        t.finish(27, &a);
        assert_eq!(t.samples.len(), 3);
    }
}
