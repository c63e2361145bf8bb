use crate::geometry::Vec2;
use crate::scenario::GoalSpec;

/// Where a pedestrian is in its target sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TargetProgress {
    pub agent_id: u64,
    pub index: usize,
    pub done: bool,
}

impl TargetProgress {
    pub fn new(agent_id: u64) -> Self {
        TargetProgress {
            agent_id,
            index: 0,
            done: false,
        }
    }

    /// The goal currently pursued, if any.
    pub fn current<'a>(&self, targets: &'a [GoalSpec]) -> Option<&'a GoalSpec> {
        if self.done {
            None
        } else {
            targets.get(self.index)
        }
    }
}

/// Moves to the next target once `position` is inside the current one.
/// At most one advance happens per call. Past the last target the sequence
/// wraps when `cycle` is set, otherwise the progress is marked done.
pub fn advance_goal(progress: TargetProgress, position: Vec2, targets: &[GoalSpec], cycle: bool) -> TargetProgress {
    let Some(goal) = progress.current(targets) else {
        return progress;
    };
    if !goal.contains(position) {
        return progress;
    }
    let next = progress.index + 1;
    if next < targets.len() {
        TargetProgress { index: next, ..progress }
    } else if cycle {
        TargetProgress { index: 0, ..progress }
    } else {
        TargetProgress { done: true, ..progress }
    }
}
