//! Concrete and abstract tile levels, the sprite palette, the level text
//! format and one-hot chunk encoding.

mod encode;
mod grid;
mod palette;
mod synth;
mod text;

use thiserror::Error;

pub use encode::{encode_chunk, ChunkTensor, CHUNK_LEN, CHUNK_WIDTH};
pub use grid::{from_abstract, to_abstract, AbstractGrid, TileGrid, GROUND_ROW, LEVEL_HEIGHT};
pub use palette::*;
pub use synth::synth_level;
pub use text::{parse_level_text, serialize_level_text};

/// A single sprite placed at a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Placement {
    pub x: usize,
    pub y: usize,
    pub sprite: SpriteId,
}

impl Placement {
    pub fn new(x: usize, y: usize, sprite: SpriteId) -> Self {
        Placement { x, y, sprite }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevelError {
    #[error("level format: {0}")]
    Format(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("unknown character {ch:?} at line {line}, column {column}")]
    UnknownChar { ch: char, line: usize, column: usize },
    #[error("level width must be at least 1")]
    ZeroWidth,
    #[error("sprite index {0} outside the 32-sprite palette")]
    SpriteOutOfRange(usize),
    #[error("cell ({x},{y}) is outside the level")]
    OutOfBounds { x: i64, y: i64 },
    #[error("cell ({x},{y}) is already occupied")]
    Occupied { x: usize, y: usize },
    #[error("cell ({x},{y}) is empty")]
    EmptyCell { x: usize, y: usize },
    #[error("cannot realize the empty symbol as a sprite")]
    EmptySymbol,
    #[error("negative chunk offset {0}")]
    NegativeOffset(i64),
    #[error("invalid palette: {0}")]
    Palette(String),
}
