use rand::Rng;
use rand::RngCore;

use super::palette::*;
use super::LevelError;

/// Rows in every level. Row 0 is the top, row 14 the ground row.
pub const LEVEL_HEIGHT: usize = 15;

/// The bottom row index.
pub const GROUND_ROW: usize = LEVEL_HEIGHT - 1;

/// A concrete level: `width` columns by 15 rows of optional sprites.
///
/// Cells are stored column-major (`x * 15 + y`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TileGrid {
    width: usize,
    cells: Vec<Option<SpriteId>>,
}

impl TileGrid {
    pub fn new(width: usize) -> Result<Self, LevelError> {
        if width == 0 {
            return Err(LevelError::ZeroWidth);
        }
        Ok(TileGrid { width, cells: vec![None; width * LEVEL_HEIGHT] })
    }

    /// Empty grid; panics on zero width. Use [`TileGrid::new`] for untrusted input.
    pub fn empty(width: usize) -> Self {
        Self::new(width).expect("grid width must be at least 1")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        LEVEL_HEIGHT
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < LEVEL_HEIGHT
    }

    #[inline]
    fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < LEVEL_HEIGHT);
        x * LEVEL_HEIGHT + y
    }

    /// Sprite at `(x, y)`; out-of-bounds reads as empty.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<SpriteId> {
        if x < self.width && y < LEVEL_HEIGHT {
            self.cells[self.idx(x, y)]
        } else {
            None
        }
    }

    pub fn is_empty_at(&self, x: usize, y: usize) -> bool {
        self.get(x, y).is_none()
    }

    pub fn set(&mut self, x: usize, y: usize, sprite: Option<SpriteId>) -> Result<(), LevelError> {
        if x >= self.width || y >= LEVEL_HEIGHT {
            return Err(LevelError::OutOfBounds { x: x as i64, y: y as i64 });
        }
        let i = self.idx(x, y);
        self.cells[i] = sprite;
        Ok(())
    }

    /// Places a sprite into an empty cell.
    pub fn place(&mut self, x: usize, y: usize, sprite: SpriteId) -> Result<(), LevelError> {
        if x >= self.width || y >= LEVEL_HEIGHT {
            return Err(LevelError::OutOfBounds { x: x as i64, y: y as i64 });
        }
        if self.get(x, y).is_some() {
            return Err(LevelError::Occupied { x, y });
        }
        self.set(x, y, Some(sprite))
    }

    /// Clears an occupied cell, returning what was there.
    pub fn remove(&mut self, x: usize, y: usize) -> Result<SpriteId, LevelError> {
        if x >= self.width || y >= LEVEL_HEIGHT {
            return Err(LevelError::OutOfBounds { x: x as i64, y: y as i64 });
        }
        let i = self.idx(x, y);
        self.cells[i].take().ok_or(LevelError::EmptyCell { x, y })
    }

    /// Occupied cells in column-major order.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize, SpriteId)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|s| (i / LEVEL_HEIGHT, i % LEVEL_HEIGHT, s)))
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_full(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    /// Copy of columns `[x0, x0 + width)`; columns past the right edge are empty.
    pub fn window(&self, x0: usize, width: usize) -> TileGrid {
        let mut out = TileGrid::empty(width);
        for x in 0..width {
            let src = x0 + x;
            if src >= self.width {
                break;
            }
            for y in 0..LEVEL_HEIGHT {
                out.cells[x * LEVEL_HEIGHT + y] = self.cells[src * LEVEL_HEIGHT + y];
            }
        }
        out
    }

    /// Whether the cell below `(x, y)` holds a sprite. The ground row counts as supported.
    pub fn supported(&self, x: usize, y: usize) -> bool {
        y >= GROUND_ROW || self.get(x, y + 1).is_some()
    }
}

/// A level in the abstract alphabet; same shape as [`TileGrid`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AbstractGrid {
    width: usize,
    cells: Vec<Symbol>,
}

impl AbstractGrid {
    pub fn filled(width: usize, symbol: Symbol) -> Self {
        assert!(width > 0, "grid width must be at least 1");
        AbstractGrid { width, cells: vec![symbol; width * LEVEL_HEIGHT] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, x: usize, y: usize) -> Symbol {
        self.cells[x * LEVEL_HEIGHT + y]
    }

    pub fn set(&mut self, x: usize, y: usize, s: Symbol) {
        self.cells[x * LEVEL_HEIGHT + y] = s;
    }

    /// Parses rows of abstract symbols (15 lines, one char per column).
    pub fn parse(text: &str) -> Result<Self, LevelError> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != LEVEL_HEIGHT {
            return Err(LevelError::Format(format!("expected {LEVEL_HEIGHT} rows, got {}", lines.len())));
        }
        let width = lines[0].chars().count();
        if width == 0 {
            return Err(LevelError::ZeroWidth);
        }
        let mut g = AbstractGrid::filled(width, Symbol::Empty);
        for (y, line) in lines.iter().enumerate() {
            let row: Vec<char> = line.chars().collect();
            if row.len() != width {
                return Err(LevelError::Ragged { line: y + 1, expected: width, found: row.len() });
            }
            for (x, c) in row.into_iter().enumerate() {
                let s = Symbol::from_char(c)
                    .ok_or(LevelError::UnknownChar { ch: c, line: y + 1, column: x + 1 })?;
                g.set(x, y, s);
            }
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * LEVEL_HEIGHT);
        for y in 0..LEVEL_HEIGHT {
            for x in 0..self.width {
                out.push(self.get(x, y).as_char());
            }
            out.push('\n');
        }
        out
    }
}

/// Maps every cell through the palette's abstract class; empty cells become `E`.
pub fn to_abstract(grid: &TileGrid, palette: &SpritePalette) -> AbstractGrid {
    let mut out = AbstractGrid::filled(grid.width(), Symbol::Empty);
    for (x, y, s) in grid.occupied() {
        out.set(x, y, palette.class_of(s));
    }
    out
}

/// Picks a concrete sprite for an abstract symbol placed at `(x, y)` in `grid`.
///
/// Solids become ground when they sit on the ground row or on ground, hard
/// blocks otherwise. Enemies are drawn uniformly, but flying enemies are only
/// eligible when the cell below is empty (the ground row counts as support).
pub fn from_abstract(
    symbol: Symbol,
    x: usize,
    y: usize,
    grid: &TileGrid,
    palette: &SpritePalette,
    rng: &mut dyn RngCore,
) -> Result<SpriteId, LevelError> {
    let is = |dx: i64, dy: i64, pred: &dyn Fn(SpriteId) -> bool| -> bool {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        grid.in_bounds(nx, ny) && grid.get(nx as usize, ny as usize).is_some_and(pred)
    };
    let above_empty = y == 0 || grid.is_empty_at(x, y - 1);
    let id = match symbol {
        Symbol::Empty => return Err(LevelError::EmptySymbol),
        Symbol::Solid => {
            if y == GROUND_ROW || is(0, 1, &|s| s == GROUND) {
                GROUND
            } else {
                HARD_BLOCK
            }
        }
        Symbol::Breakable => BRICK,
        Symbol::Question => QUESTION_BLOCK,
        Symbol::Coin => COIN,
        Symbol::Pipe => {
            let right = is(-1, 0, &|s| s == PIPE_TOP_LEFT || s == PIPE_LEFT);
            match (above_empty, right) {
                (true, false) => PIPE_TOP_LEFT,
                (true, true) => PIPE_TOP_RIGHT,
                (false, false) => PIPE_LEFT,
                (false, true) => PIPE_RIGHT,
            }
        }
        Symbol::Cannon => {
            if above_empty {
                CANNON_TOP
            } else {
                CANNON_BASE
            }
        }
        Symbol::Goal => {
            if above_empty {
                FLAG_TOP
            } else {
                FLAGPOLE
            }
        }
        Symbol::Enemy => {
            let supported = grid.supported(x, y);
            let pool: Vec<SpriteId> =
                palette.enemies().filter(|&e| !supported || !palette.is_flying(e)).collect();
            pool[rng.gen_range(0..pool.len())]
        }
        Symbol::Decoration => {
            let pool = palette.members(Symbol::Decoration);
            pool[rng.gen_range(0..pool.len())]
        }
    };
    Ok(id)
}
