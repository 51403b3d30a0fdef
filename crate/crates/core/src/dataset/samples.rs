use std::collections::{BTreeMap, HashSet};

use log::warn;

use crate::events::{segment_turns, SessionLog};
use crate::level::{encode_chunk, ChunkTensor, SpriteId, TileGrid, CHUNK_WIDTH, LEVEL_HEIGHT, SPRITE_COUNT};

use super::credit::{assign_credit, CreditConfig, CreditMap};
use super::DatasetError;

/// One credited primitive action inside a chunk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionEntry {
    pub x: usize,
    pub y: usize,
    pub sprite: SpriteId,
    pub reward: f64,
}

/// A 40×15 state chunk and the credited additions made over it.
#[derive(Clone, Debug, PartialEq)]
pub struct SmdpSample {
    pub participant_id: String,
    /// The chunk, always `CHUNK_WIDTH` columns wide.
    pub state: TileGrid,
    pub actions: Vec<ActionEntry>,
}

impl SmdpSample {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::Sample(m));
        if self.state.width() != CHUNK_WIDTH {
            return bad(format!("state is {} columns wide", self.state.width()));
        }
        let mut seen = HashSet::new();
        for a in &self.actions {
            if a.x >= CHUNK_WIDTH || a.y >= LEVEL_HEIGHT || a.sprite.index() >= SPRITE_COUNT {
                return bad(format!("action ({},{},{}) outside the chunk", a.x, a.y, a.sprite));
            }
            if !a.reward.is_finite() {
                return bad(format!("action ({},{}) has non-finite reward", a.x, a.y));
            }
            if !self.state.is_empty_at(a.x, a.y) {
                return bad(format!("action targets occupied cell ({},{})", a.x, a.y));
            }
            if !seen.insert((a.x, a.y)) {
                return bad(format!("duplicate action cell ({},{})", a.x, a.y));
            }
        }
        Ok(())
    }

    /// One-hot encoding of the state.
    pub fn state_tensor(&self) -> ChunkTensor {
        encode_chunk(&self.state, 0).expect("offset 0 is valid")
    }

    /// State with every action applied.
    pub fn completed(&self) -> TileGrid {
        let mut g = self.state.clone();
        for a in &self.actions {
            let _ = g.set(a.x, a.y, Some(a.sprite));
        }
        g
    }
}

/// Splits every turn into non-overlapping 40-column windows anchored at x = 0
/// and emits one sample per window that received at least one AI addition.
pub fn build_samples(log: &SessionLog, credits: &CreditMap) -> Result<Vec<SmdpSample>, DatasetError> {
    let turns = segment_turns(log)?;
    let mut out = Vec::new();
    for turn in &turns {
        let mut windows: BTreeMap<usize, Vec<ActionEntry>> = BTreeMap::new();
        for c in credits.for_turn(turn.index) {
            let p = c.placement;
            if p.x >= log.level_width {
                return Err(DatasetError::Structure(format!(
                    "addition at column {} outside a {}-wide level",
                    p.x, log.level_width
                )));
            }
            let w = p.x / CHUNK_WIDTH;
            windows.entry(w).or_default().push(ActionEntry {
                x: p.x - w * CHUNK_WIDTH,
                y: p.y,
                sprite: p.sprite,
                reward: c.reward,
            });
        }
        for (w, actions) in windows {
            let sample = SmdpSample {
                participant_id: log.participant_id.clone(),
                state: turn.state_after_human.window(w * CHUNK_WIDTH, CHUNK_WIDTH),
                actions,
            };
            sample.validate()?;
            out.push(sample);
        }
    }
    Ok(out)
}

/// Samples from a whole corpus of logs, plus the participants that have at
/// least one incomplete or uncreditable session.
#[derive(Clone, Debug, Default)]
pub struct LogDataset {
    pub samples: Vec<SmdpSample>,
    pub incomplete_participants: HashSet<String>,
}

/// Credits and chunks every log in input order. Logs that are incomplete or
/// cannot be credited are skipped and mark their participant incomplete.
pub fn build_log_dataset(logs: &[SessionLog], cfg: &CreditConfig) -> LogDataset {
    let mut ds = LogDataset::default();
    for log in logs {
        if !log.is_complete() {
            warn!("session {} of {} is incomplete; skipped", log.session_id, log.participant_id);
            ds.incomplete_participants.insert(log.participant_id.clone());
            continue;
        }
        match assign_credit(log, cfg).and_then(|c| build_samples(log, &c)) {
            Ok(s) => ds.samples.extend(s),
            Err(e) => {
                warn!("session {} of {}: {e}; skipped", log.session_id, log.participant_id);
                ds.incomplete_participants.insert(log.participant_id.clone());
            }
        }
    }
    ds
}
