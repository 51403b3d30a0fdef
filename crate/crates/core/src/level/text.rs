//! Plain-text level format: 15 newline-terminated rows, one glyph per tile,
//! `-` for empty cells.

use super::grid::{TileGrid, LEVEL_HEIGHT};
use super::palette::{SpritePalette, EMPTY_GLYPH};
use super::LevelError;

pub fn parse_level_text(text: &str, palette: &SpritePalette) -> Result<TileGrid, LevelError> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != LEVEL_HEIGHT {
        return Err(LevelError::Format(format!(
            "expected {LEVEL_HEIGHT} rows, got {}",
            lines.len()
        )));
    }
    let width = lines[0].chars().count();
    let mut grid = TileGrid::new(width)?;
    for (y, line) in lines.iter().enumerate() {
        let n = line.chars().count();
        if n != width {
            return Err(LevelError::Ragged { line: y + 1, expected: width, found: n });
        }
        for (x, c) in line.chars().enumerate() {
            if c == EMPTY_GLYPH {
                continue;
            }
            let id = palette
                .by_glyph(c)
                .ok_or(LevelError::UnknownChar { ch: c, line: y + 1, column: x + 1 })?;
            grid.set(x, y, Some(id))?;
        }
    }
    Ok(grid)
}

pub fn serialize_level_text(grid: &TileGrid, palette: &SpritePalette) -> String {
    let mut out = String::with_capacity((grid.width() + 1) * LEVEL_HEIGHT);
    for y in 0..LEVEL_HEIGHT {
        for x in 0..grid.width() {
            out.push(grid.get(x, y).map_or(EMPTY_GLYPH, |s| palette.glyph(s)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::palette::{SpriteId, GROUND, SPRITE_COUNT};

    fn pal() -> &'static SpritePalette {
        SpritePalette::standard()
    }

    fn rows(width: usize, bottom: &str) -> String {
        let mut s = String::new();
        for _ in 0..LEVEL_HEIGHT - 1 {
            s.push_str(&"-".repeat(width));
            s.push('\n');
        }
        s.push_str(bottom);
        s.push('\n');
        s
    }

    #[test]
    fn all_dashes_is_empty_grid() {
        let g = parse_level_text(&rows(3, "---"), pal()).unwrap();
        assert_eq!(g.width(), 3);
        assert_eq!(g.occupied_count(), 0);
        assert_eq!(serialize_level_text(&g, pal()), rows(3, "---"));
    }

    #[test]
    fn ground_line_lands_in_row_14() {
        let g = parse_level_text(&rows(3, "XXX"), pal()).unwrap();
        let cells: Vec<_> = g.occupied().collect();
        assert_eq!(cells, vec![(0, 14, GROUND), (1, 14, GROUND), (2, 14, GROUND)]);
    }

    #[test]
    fn ragged_and_unknown_are_format_errors() {
        let mut t = rows(3, "XXX");
        t.replace_range(0..3, "--");
        assert!(matches!(
            parse_level_text(&t, pal()),
            Err(LevelError::Ragged { line: 2, expected: 2, found: 3 })
        ));
        let t = rows(3, "X@X");
        assert!(matches!(
            parse_level_text(&t, pal()),
            Err(LevelError::UnknownChar { ch: '@', line: 15, column: 2 })
        ));
        assert!(parse_level_text("---\n---\n", pal()).is_err());
    }

    #[test]
    fn every_sprite_glyph_appears_once() {
        let mut g = TileGrid::empty(SPRITE_COUNT);
        for i in 0..SPRITE_COUNT {
            g.place(i, 7, SpriteId(i as u8)).unwrap();
        }
        let text = serialize_level_text(&g, pal());
        for e in pal().entries() {
            assert_eq!(text.matches(e.glyph).count(), 1, "{}", e.name);
        }
        assert_eq!(parse_level_text(&text, pal()).unwrap(), g);
    }
}
