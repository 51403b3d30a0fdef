use super::grid::{TileGrid, LEVEL_HEIGHT};
use super::palette::{SpriteId, SPRITE_COUNT};
use super::LevelError;

/// Columns in one chunk (one editor screen).
pub const CHUNK_WIDTH: usize = 40;

/// Number of values in a chunk tensor.
pub const CHUNK_LEN: usize = CHUNK_WIDTH * LEVEL_HEIGHT * SPRITE_COUNT;

/// A 40×15×32 array, laid out `[x][y][sprite]` (x-major, channel-last).
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkTensor {
    values: Vec<f64>,
}

impl Default for ChunkTensor {
    fn default() -> Self {
        Self::zeros()
    }
}

impl ChunkTensor {
    pub fn zeros() -> Self {
        ChunkTensor { values: vec![0.0; CHUNK_LEN] }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self, LevelError> {
        if values.len() != CHUNK_LEN {
            return Err(LevelError::Format(format!(
                "chunk tensor needs {CHUNK_LEN} values, got {}",
                values.len()
            )));
        }
        Ok(ChunkTensor { values })
    }

    #[inline]
    pub fn offset(x: usize, y: usize, s: usize) -> usize {
        (x * LEVEL_HEIGHT + y) * SPRITE_COUNT + s
    }

    pub fn get(&self, x: usize, y: usize, s: usize) -> f64 {
        self.values[Self::offset(x, y, s)]
    }

    pub fn set(&mut self, x: usize, y: usize, s: usize, v: f64) {
        self.values[Self::offset(x, y, s)] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Channel slice for one cell.
    pub fn cell(&self, x: usize, y: usize) -> &[f64] {
        let o = Self::offset(x, y, 0);
        &self.values[o..o + SPRITE_COUNT]
    }

    /// Decodes a one-hot tensor back into a 40-column grid.
    pub fn decode_one_hot(&self) -> Result<TileGrid, LevelError> {
        let mut grid = TileGrid::empty(CHUNK_WIDTH);
        for x in 0..CHUNK_WIDTH {
            for y in 0..LEVEL_HEIGHT {
                let cell = self.cell(x, y);
                let hot: Vec<usize> = (0..SPRITE_COUNT).filter(|&s| cell[s] != 0.0).collect();
                match hot.as_slice() {
                    [] => {}
                    [s] if cell[*s] == 1.0 => grid.set(x, y, Some(SpriteId(*s as u8)))?,
                    _ => return Err(LevelError::Format(format!("cell ({x},{y}) is not one-hot"))),
                }
            }
        }
        Ok(grid)
    }
}

/// One-hot encodes the 40-column window starting at `x_offset`.
pub fn encode_chunk(grid: &TileGrid, x_offset: i64) -> Result<ChunkTensor, LevelError> {
    if x_offset < 0 {
        return Err(LevelError::NegativeOffset(x_offset));
    }
    let x0 = x_offset as usize;
    let mut t = ChunkTensor::zeros();
    for x in 0..CHUNK_WIDTH {
        for y in 0..LEVEL_HEIGHT {
            if let Some(s) = grid.get(x0 + x, y) {
                t.set(x, y, s.index(), 1.0);
            }
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_encodes_to_zeros() {
        let t = encode_chunk(&TileGrid::empty(10), 0).unwrap();
        assert!(t.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_sprite_and_shift() {
        let mut g = TileGrid::empty(50);
        g.place(2, 14, SpriteId(7)).unwrap();
        let t = encode_chunk(&g, 0).unwrap();
        assert_eq!(t.values().iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(t.get(2, 14, 7), 1.0);
        let t1 = encode_chunk(&g, 1).unwrap();
        assert_eq!(t1.values().iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(t1.get(1, 14, 7), 1.0);
        assert_eq!(encode_chunk(&g, 3).unwrap(), ChunkTensor::zeros());
    }

    #[test]
    fn negative_offset_is_rejected() {
        assert!(matches!(encode_chunk(&TileGrid::empty(3), -1), Err(LevelError::NegativeOffset(-1))));
    }

    #[test]
    fn decode_inverts_encode() {
        let mut g = TileGrid::empty(CHUNK_WIDTH);
        g.place(39, 0, SpriteId(31)).unwrap();
        g.place(0, 14, SpriteId(0)).unwrap();
        assert_eq!(encode_chunk(&g, 0).unwrap().decode_one_hot().unwrap(), g);
    }
}
