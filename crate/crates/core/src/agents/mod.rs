//! Turn-based design partners. Every agent looks at the current level and
//! returns an ordered list of additions; none of them ever deletes.

mod fixed;
mod lstm;
mod markov;
mod random;
mod shape;

use std::collections::HashSet;

use rand::RngCore;
use thiserror::Error;

use crate::dataset::SmdpSample;
use crate::level::{from_abstract, LevelError, Placement, SpritePalette, Symbol, TileGrid, CHUNK_WIDTH};
use crate::nn::NnError;

pub use fixed::FixedPolicyAgent;
pub use lstm::{serialize_columns, token_position, LstmAgent, LstmConfig, LSTM_WINDOW, SEPARATOR};
pub use markov::{MarkovAgent, MarkovModel, MarkovContext};
pub use random::RandomAgent;
pub use shape::{ShapeAgent, ShapeEntry, ShapeModel, ShapeReference};

/// Per-turn addition cap of the Markov, LSTM and CNN partners.
pub const MAX_ADDITIONS: usize = 30;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("active mode: {0}")]
    Mode(String),
    #[error("training: {0}")]
    Train(String),
    #[error("state: {0}")]
    State(String),
    #[error("model format: {0}")]
    Format(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What an agent sees when asked for a turn.
pub struct ProposeContext<'a> {
    pub level: &'a TileGrid,
    /// Center column of the user's view.
    pub camera_x: usize,
    /// Left edge of the 40-column window used by chunk-based agents.
    pub window_x: usize,
    pub rng: &'a mut dyn RngCore,
}

impl<'a> ProposeContext<'a> {
    /// Live session: the chunk window is centered on the camera where possible.
    pub fn live(level: &'a TileGrid, camera_x: usize, rng: &'a mut dyn RngCore) -> Self {
        let max_x = level.width().saturating_sub(CHUNK_WIDTH);
        let window_x = camera_x.saturating_sub(CHUNK_WIDTH / 2).min(max_x);
        ProposeContext { level, camera_x: camera_x.min(level.width().saturating_sub(1)), window_x, rng }
    }

    /// Replay on a stored 40-column chunk.
    pub fn chunk(level: &'a TileGrid, rng: &'a mut dyn RngCore) -> Self {
        ProposeContext { level, camera_x: CHUNK_WIDTH / 2, window_x: 0, rng }
    }
}

pub trait Agent: Send {
    fn name(&self) -> &str;

    fn propose(&mut self, ctx: &mut ProposeContext<'_>) -> Result<Vec<Placement>, AgentError>;

    fn supports_active(&self) -> bool {
        false
    }

    /// One online update on a credited sample.
    fn active_update(&mut self, _sample: &SmdpSample) -> Result<(), AgentError> {
        Err(AgentError::Mode(format!("{} does not learn online", self.name())))
    }

    /// Restore the post-training state.
    fn reset(&mut self) -> Result<(), AgentError> {
        Ok(())
    }
}

/// Checks the contract every proposal must satisfy: in bounds, empty target
/// cells, no duplicates, at most `cap` entries, and no added flying enemy
/// resting on support once all additions are applied.
pub fn check_additions(
    level: &TileGrid,
    additions: &[Placement],
    cap: Option<usize>,
    palette: &SpritePalette,
) -> Result<(), String> {
    if let Some(cap) = cap {
        if additions.len() > cap {
            return Err(format!("{} additions exceed the cap of {cap}", additions.len()));
        }
    }
    let mut after = level.clone();
    let mut seen = HashSet::new();
    for p in additions {
        if !level.in_bounds(p.x as i64, p.y as i64) {
            return Err(format!("({}, {}) is outside the level", p.x, p.y));
        }
        if !level.is_empty_at(p.x, p.y) {
            return Err(format!("({}, {}) is already occupied", p.x, p.y));
        }
        if !seen.insert((p.x, p.y)) {
            return Err(format!("({}, {}) proposed twice", p.x, p.y));
        }
        after.place(p.x, p.y, p.sprite).map_err(|e| e.to_string())?;
    }
    for p in additions {
        if palette.is_flying(p.sprite) && after.supported(p.x, p.y) {
            return Err(format!("flying {} at ({}, {}) rests on support", palette.get(p.sprite).name, p.x, p.y));
        }
    }
    Ok(())
}

/// Converts chosen abstract symbols to sprites. Cells are resolved bottom-up
/// against the level plus already-resolved picks, so the solid, pipe and
/// enemy rules see what will actually be below them. The result keeps the
/// order of `picks`.
pub fn realize_symbols(
    level: &TileGrid,
    picks: &[(usize, usize, Symbol)],
    palette: &SpritePalette,
    rng: &mut dyn RngCore,
) -> Result<Vec<Placement>, AgentError> {
    let mut order: Vec<usize> = (0..picks.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(picks[i].1), picks[i].0));
    let mut projected = level.clone();
    let mut sprites = vec![None; picks.len()];
    for i in order {
        let (x, y, sym) = picks[i];
        let s = from_abstract(sym, x, y, &projected, palette, rng)?;
        projected.place(x, y, s)?;
        sprites[i] = Some(s);
    }
    Ok(picks.iter().zip(sprites).map(|(&(x, y, _), s)| Placement::new(x, y, s.expect("resolved"))).collect())
}

/// Drops flying enemies that would rest on support once every other
/// placement is applied, keeping order otherwise.
pub fn drop_supported_flyers(level: &TileGrid, placements: Vec<Placement>, palette: &SpritePalette) -> Vec<Placement> {
    let mut after = level.clone();
    for p in &placements {
        let _ = after.place(p.x, p.y, p.sprite);
    }
    // removing placements only takes support away, so one pass is enough
    placements.into_iter().filter(|p| !(palette.is_flying(p.sprite) && after.supported(p.x, p.y))).collect()
}
