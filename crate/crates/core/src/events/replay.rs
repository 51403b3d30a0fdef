use crate::level::{Placement, TileGrid, LEVEL_HEIGHT};

use super::{Actor, EventKind, LogError, SessionEvent, SessionLog};

/// Applies place/delete events to a grid while tracking who placed each sprite.
#[derive(Clone, Debug)]
pub struct Replayer {
    grid: TileGrid,
    owners: Vec<Option<Actor>>,
}

impl Replayer {
    pub fn new(width: usize) -> Self {
        Replayer { grid: TileGrid::empty(width.max(1)), owners: vec![None; width.max(1) * LEVEL_HEIGHT] }
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn into_grid(self) -> TileGrid {
        self.grid
    }

    pub fn owner(&self, x: usize, y: usize) -> Option<Actor> {
        if x < self.grid.width() && y < LEVEL_HEIGHT {
            self.owners[x * LEVEL_HEIGHT + y]
        } else {
            None
        }
    }

    /// Applies one event. Errors carry index 0; callers rewrite it.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), LogError> {
        let fail = |reason: String| LogError::Replay { index: 0, reason };
        match event.kind {
            EventKind::Place { x, y, sprite } => {
                self.grid.place(x, y, sprite).map_err(|e| fail(e.to_string()))?;
                self.owners[x * LEVEL_HEIGHT + y] = Some(event.actor);
            }
            EventKind::Delete { x, y, deleted_actor } => {
                let owner = self.owner(x, y);
                self.grid.remove(x, y).map_err(|e| fail(e.to_string()))?;
                if owner != Some(deleted_actor) {
                    return Err(fail(format!(
                        "delete at ({x},{y}) names {deleted_actor} but the sprite belongs to {}",
                        owner.map_or("nobody".to_string(), |a| a.to_string())
                    )));
                }
                self.owners[x * LEVEL_HEIGHT + y] = None;
            }
            _ => {}
        }
        Ok(())
    }
}

/// Final grid after applying every place/delete event in order.
pub fn replay(log: &SessionLog) -> Result<TileGrid, LogError> {
    let mut r = Replayer::new(log.level_width);
    for (i, e) in log.events.iter().enumerate() {
        r.apply(e).map_err(|err| match err {
            LogError::Replay { reason, .. } => LogError::Replay { index: i, reason },
            other => other,
        })?;
    }
    Ok(r.into_grid())
}

/// One human turn and the AI turn that answered it.
#[derive(Clone, Debug, PartialEq)]
pub struct Turn {
    pub index: usize,
    /// Human events since the previous `end_turn`, including this one.
    pub human_events: Vec<SessionEvent>,
    pub ai_additions: Vec<Placement>,
    pub state_after_human: TileGrid,
    pub camera_x: Option<usize>,
    /// Position of the closing `end_turn` in the log.
    pub end_turn_event: usize,
}

/// Splits a log into turns, one per human `end_turn`.
pub fn segment_turns(log: &SessionLog) -> Result<Vec<Turn>, LogError> {
    let mut r = Replayer::new(log.level_width);
    let mut turns: Vec<Turn> = Vec::new();
    let mut pending: Vec<SessionEvent> = Vec::new();
    let mut in_ai_window = false;
    for (i, e) in log.events.iter().enumerate() {
        r.apply(e).map_err(|err| match err {
            LogError::Replay { reason, .. } => LogError::Replay { index: i, reason },
            other => other,
        })?;
        match (e.actor, &e.kind) {
            (Actor::Ai, EventKind::Place { x, y, sprite }) => {
                let turn = turns.last_mut().filter(|_| in_ai_window).ok_or_else(|| {
                    LogError::Structure(format!("event {i}: ai placement outside an ai turn"))
                })?;
                turn.ai_additions.push(Placement::new(*x, *y, *sprite));
            }
            (Actor::Ai, kind) => {
                return Err(LogError::Structure(format!("event {i}: ai cannot emit {}", kind.name())));
            }
            (Actor::Human, EventKind::EndTurn { camera_x }) => {
                pending.push(e.clone());
                turns.push(Turn {
                    index: turns.len(),
                    human_events: std::mem::take(&mut pending),
                    ai_additions: Vec::new(),
                    state_after_human: r.grid().clone(),
                    camera_x: *camera_x,
                    end_turn_event: i,
                });
                in_ai_window = true;
            }
            (Actor::Human, _) => {
                in_ai_window = false;
                pending.push(e.clone());
            }
        }
    }
    Ok(turns)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::LogBuilder;
    use super::*;
    use crate::level::SpriteId;

    #[test]
    fn start_end_only_is_empty() {
        let g = replay(&LogBuilder::new(8).end().build()).unwrap();
        assert_eq!(g.occupied_count(), 0);
        assert_eq!(g.width(), 8);
    }

    #[test]
    fn place_then_delete_is_empty() {
        let log = LogBuilder::new(8).human_place(1, 14, 0).delete(1, 14, Actor::Human).end().build();
        assert_eq!(replay(&log).unwrap().occupied_count(), 0);
    }

    #[test]
    fn place_on_occupied_reports_event_index() {
        let log = LogBuilder::new(8).human_place(1, 14, 0).human_place(1, 14, 2).build();
        assert!(matches!(replay(&log), Err(LogError::Replay { index: 2, .. })));
    }

    #[test]
    fn one_turn_two_additions() {
        let log = LogBuilder::new(8)
            .human_place(0, 14, 0)
            .end_turn()
            .ai_place(1, 14, 0)
            .ai_place(2, 14, 0)
            .end()
            .build();
        let turns = segment_turns(&log).unwrap();
        assert_eq!(turns.len(), 1);
        assert_eq!(turns[0].ai_additions.len(), 2);
        assert_eq!(turns[0].state_after_human.occupied_count(), 1);
        assert_eq!(turns[0].human_events.len(), 3);
    }

    #[test]
    fn no_end_turn_no_turns() {
        let log = LogBuilder::new(8).human_place(0, 14, 0).end().build();
        assert!(segment_turns(&log).unwrap().is_empty());
    }

    #[test]
    fn addition_counts_follow_turns() {
        let log = LogBuilder::new(8)
            .end_turn()
            .ai_place(0, 0, 5)
            .ai_place(1, 0, 5)
            .human_place(0, 14, 0)
            .end_turn()
            .end_turn()
            .ai_place(2, 0, 5)
            .end()
            .build();
        let turns = segment_turns(&log).unwrap();
        let counts: Vec<usize> = turns.iter().map(|t| t.ai_additions.len()).collect();
        assert_eq!(counts, vec![2, 0, 1]);
        assert_eq!(turns[2].state_after_human.occupied_count(), 3);
        assert_eq!(turns[2].ai_additions[0], Placement::new(2, 0, SpriteId(5)));
        for t in &turns {
            let mut prefix = log.clone();
            prefix.events.truncate(t.end_turn_event + 1);
            assert_eq!(replay(&prefix).unwrap(), t.state_after_human);
        }
    }

    #[test]
    fn stray_ai_event_is_structure_error() {
        let log = LogBuilder::new(8).ai_place(0, 0, 5).build();
        assert!(matches!(segment_turns(&log), Err(LogError::Structure(_))));
    }
}
