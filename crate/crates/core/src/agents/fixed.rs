use std::collections::VecDeque;

use crate::level::Placement;

use super::{Agent, AgentError, ProposeContext};

/// Replays a prepared sequence of turns, one per call; empty once exhausted.
/// Used to push logged partner behaviour back through the evaluator.
#[derive(Clone, Debug, Default)]
pub struct FixedPolicyAgent {
    name: String,
    turns: VecDeque<Vec<Placement>>,
}

impl FixedPolicyAgent {
    pub fn new(name: impl Into<String>, turns: impl IntoIterator<Item = Vec<Placement>>) -> Self {
        FixedPolicyAgent { name: name.into(), turns: turns.into_iter().collect() }
    }

    pub fn remaining(&self) -> usize {
        self.turns.len()
    }
}

impl Agent for FixedPolicyAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn propose(&mut self, _ctx: &mut ProposeContext<'_>) -> Result<Vec<Placement>, AgentError> {
        Ok(self.turns.pop_front().unwrap_or_default())
    }
}
