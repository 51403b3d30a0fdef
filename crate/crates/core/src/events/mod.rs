//! Session event logs: the canonical record of a human/AI design session,
//! replay onto a grid, and segmentation into alternating turns.

mod jsonl;
mod replay;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::level::{LevelError, SpriteId};

pub use jsonl::{
    event_line, header_line, log_file_name, parse_jsonl, parse_jsonl_lenient, read_jsonl, read_jsonl_lenient, to_jsonl_string,
    write_jsonl, LOG_SCHEMA_VERSION,
};
pub use replay::{replay, segment_turns, Replayer, Turn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Human,
    Ai,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Actor::Human => "human",
            Actor::Ai => "ai",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    AboveGround,
    BelowGround,
}

/// Post-session ranks for one session; 1 means ranked first of the pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub reuse_rank: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fun: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frustration: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aided: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creative: Option<u8>,
}

impl Ranking {
    pub fn reuse(reuse_rank: u8) -> Self {
        Ranking { reuse_rank, fun: None, frustration: None, challenge: None, aided: None, creative: None }
    }

    /// Every given rank is 1 or 2.
    pub fn is_valid(&self) -> bool {
        self.ranks().all(|v| v == 1 || v == 2)
    }

    fn ranks(&self) -> impl Iterator<Item = u8> {
        [Some(self.reuse_rank), self.fun, self.frustration, self.challenge, self.aided, self.creative]
            .into_iter()
            .flatten()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    SessionStart,
    SessionEnd,
    Place { x: usize, y: usize, sprite: SpriteId },
    Delete { x: usize, y: usize, deleted_actor: Actor },
    /// Camera column reported by the client when the turn ended.
    EndTurn { camera_x: Option<usize> },
    Rank(Ranking),
    /// Playtest request; carries no level change.
    Run,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionStart => "session_start",
            EventKind::SessionEnd => "session_end",
            EventKind::Place { .. } => "place",
            EventKind::Delete { .. } => "delete",
            EventKind::EndTurn { .. } => "end_turn",
            EventKind::Rank(_) => "rank",
            EventKind::Run => "run",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionEvent {
    pub timestamp_ms: u64,
    pub actor: Actor,
    pub kind: EventKind,
    /// Fields this version does not know about; kept on read, dropped on write.
    pub extra: BTreeMap<String, Value>,
}

impl SessionEvent {
    pub fn new(timestamp_ms: u64, actor: Actor, kind: EventKind) -> Self {
        SessionEvent { timestamp_ms, actor, kind, extra: BTreeMap::new() }
    }

    pub fn human(timestamp_ms: u64, kind: EventKind) -> Self {
        Self::new(timestamp_ms, Actor::Human, kind)
    }

    pub fn ai(timestamp_ms: u64, kind: EventKind) -> Self {
        Self::new(timestamp_ms, Actor::Ai, kind)
    }
}

/// The full event stream of one design session.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionLog {
    pub session_id: String,
    pub participant_id: String,
    pub agent_name: String,
    pub task: Task,
    pub level_width: usize,
    pub events: Vec<SessionEvent>,
}

impl SessionLog {
    pub fn new(
        session_id: impl Into<String>,
        participant_id: impl Into<String>,
        agent_name: impl Into<String>,
        task: Task,
        level_width: usize,
    ) -> Self {
        SessionLog {
            session_id: session_id.into(),
            participant_id: participant_id.into(),
            agent_name: agent_name.into(),
            task,
            level_width,
            events: Vec::new(),
        }
    }

    /// The session's own reuse ranking, if it has been ranked.
    pub fn ranking(&self) -> Option<Ranking> {
        self.events.iter().rev().find_map(|e| match &e.kind {
            EventKind::Rank(r) => Some(*r),
            _ => None,
        })
    }

    /// A log is complete when it validates and contains its `session_end`.
    pub fn is_complete(&self) -> bool {
        self.validate().is_ok()
            && self.events.iter().any(|e| matches!(e.kind, EventKind::SessionEnd))
    }

    /// Checks ordering, turn structure and replay consistency.
    ///
    /// The log may still be open (no `session_end` yet). Rank events are only
    /// allowed after `session_end`; nothing else may follow it.
    pub fn validate(&self) -> Result<(), LogError> {
        if self.level_width == 0 {
            return Err(LogError::Validation("level width must be at least 1".into()));
        }
        let first = self.events.first().ok_or_else(|| LogError::Validation("log has no events".into()))?;
        if !matches!(first.kind, EventKind::SessionStart) {
            return Err(LogError::Validation("first event must be session_start".into()));
        }
        let mut last_t = 0;
        let mut ended = false;
        let mut ai_window = false;
        let mut replayer = Replayer::new(self.level_width);
        for (i, e) in self.events.iter().enumerate() {
            let bad = |msg: String| LogError::Validation(format!("event {i}: {msg}"));
            if e.timestamp_ms < last_t {
                return Err(bad("timestamp goes backwards".into()));
            }
            last_t = e.timestamp_ms;
            if i > 0 && matches!(e.kind, EventKind::SessionStart) {
                return Err(bad("repeated session_start".into()));
            }
            if ended && !matches!(e.kind, EventKind::Rank(_)) {
                return Err(bad(format!("{} after session_end", e.kind.name())));
            }
            match (&e.kind, e.actor) {
                (EventKind::Rank(r), _) => {
                    if !ended {
                        return Err(bad("rank before session_end".into()));
                    }
                    if !r.is_valid() {
                        return Err(bad("ranks must be 1 or 2".into()));
                    }
                }
                (EventKind::SessionEnd, _) => ended = true,
                (EventKind::EndTurn { .. }, Actor::Human) => ai_window = true,
                (EventKind::Place { .. }, Actor::Ai) if !ai_window => {
                    return Err(bad("ai placement outside an ai turn".into()));
                }
                (EventKind::Place { .. }, Actor::Ai) => {}
                (_, Actor::Ai) => {
                    return Err(bad(format!("ai cannot emit {}", e.kind.name())));
                }
                (_, Actor::Human) => ai_window = false,
            }
            if matches!(e.kind, EventKind::SessionEnd) {
                ai_window = false;
            }
            replayer.apply(e).map_err(|err| match err {
                LogError::Replay { reason, .. } => LogError::Replay { index: i, reason },
                other => other,
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid log: {0}")]
    Validation(String),
    #[error("replay failed at event {index}: {reason}")]
    Replay { index: usize, reason: String },
    #[error("turn structure: {0}")]
    Structure(String),
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}


#[cfg(test)]
mod tests {
    use super::fixtures::LogBuilder;
    use super::*;

    #[test]
    fn well_formed_log_validates() {
        let log = LogBuilder::new(10)
            .human_place(0, 14, 0)
            .end_turn()
            .ai_place(1, 14, 0)
            .delete(1, 14, Actor::Ai)
            .end()
            .rank(1)
            .build();
        log.validate().unwrap();
        assert!(log.is_complete());
        assert_eq!(log.ranking().unwrap().reuse_rank, 1);
    }

    #[test]
    fn ai_place_without_end_turn_is_rejected() {
        let log = LogBuilder::new(10).human_place(0, 14, 0).ai_place(1, 14, 0).build();
        assert!(matches!(log.validate(), Err(LogError::Validation(_))));
    }

    #[test]
    fn ai_place_after_human_event_is_rejected() {
        let log = LogBuilder::new(10).end_turn().human_place(0, 14, 0).ai_place(1, 14, 0).build();
        assert!(log.validate().is_err());
    }

    #[test]
    fn rank_before_end_and_events_after_end_are_rejected() {
        assert!(LogBuilder::new(5).rank(1).build().validate().is_err());
        assert!(LogBuilder::new(5).end().human_place(0, 0, 0).build().validate().is_err());
        assert!(LogBuilder::new(5).end().rank(3).build().validate().is_err());
    }

    #[test]
    fn backwards_timestamp_is_rejected() {
        let mut log = LogBuilder::new(5).human_place(0, 0, 1).end().build();
        log.events[1].timestamp_ms = 100;
        assert!(log.validate().is_err());
    }

    #[test]
    fn wrong_deleted_actor_is_a_replay_error() {
        let log = LogBuilder::new(5).human_place(0, 0, 1).delete(0, 0, Actor::Ai).build();
        assert!(matches!(log.validate(), Err(LogError::Replay { index: 2, .. })));
    }

    #[test]
    fn open_log_is_not_complete() {
        let log = LogBuilder::new(5).human_place(0, 0, 1).build();
        log.validate().unwrap();
        assert!(!log.is_complete());
    }
}
