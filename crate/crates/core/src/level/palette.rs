//! The fixed 32-sprite editor palette and the abstract tile alphabet.
//!
//! Sprite indices are stable: they are the channel indices of every one-hot
//! chunk tensor, so reordering this table invalidates trained models.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::LevelError;

/// Number of sprites in the editor palette (one-hot channel count).
pub const SPRITE_COUNT: usize = 32;

/// Character used for an empty cell in the level text format.
pub const EMPTY_GLYPH: char = '-';

/// Index of a sprite in the palette, always `< SPRITE_COUNT` once validated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpriteId(pub u8);

impl SpriteId {
    pub fn new(index: usize) -> Result<Self, LevelError> {
        if index < SPRITE_COUNT {
            Ok(SpriteId(index as u8))
        } else {
            Err(LevelError::SpriteOutOfRange(index))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SpriteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Coarse tile category used by the Markov, shape and LSTM representations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    #[serde(rename = "E")]
    Empty,
    #[serde(rename = "S")]
    Solid,
    #[serde(rename = "B")]
    Breakable,
    #[serde(rename = "Q")]
    Question,
    #[serde(rename = "P")]
    Pipe,
    #[serde(rename = "O")]
    Coin,
    #[serde(rename = "X")]
    Enemy,
    #[serde(rename = "C")]
    Cannon,
    #[serde(rename = "L")]
    Goal,
    #[serde(rename = "D")]
    Decoration,
}

impl Symbol {
    pub const ALL: [Symbol; 10] = [
        Symbol::Empty,
        Symbol::Solid,
        Symbol::Breakable,
        Symbol::Question,
        Symbol::Pipe,
        Symbol::Coin,
        Symbol::Enemy,
        Symbol::Cannon,
        Symbol::Goal,
        Symbol::Decoration,
    ];

    pub const COUNT: usize = 10;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Symbol> {
        Self::ALL.get(i).copied()
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::Empty => 'E',
            Symbol::Solid => 'S',
            Symbol::Breakable => 'B',
            Symbol::Question => 'Q',
            Symbol::Pipe => 'P',
            Symbol::Coin => 'O',
            Symbol::Enemy => 'X',
            Symbol::Cannon => 'C',
            Symbol::Goal => 'L',
            Symbol::Decoration => 'D',
        }
    }

    pub fn from_char(c: char) -> Option<Symbol> {
        Self::ALL.iter().copied().find(|s| s.as_char() == c)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// One palette entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpriteInfo {
    pub id: SpriteId,
    pub name: &'static str,
    pub glyph: char,
    pub class: Symbol,
    pub is_enemy: bool,
    pub is_flying: bool,
    pub is_solid: bool,
}

const fn sprite(
    id: u8,
    name: &'static str,
    glyph: char,
    class: Symbol,
    is_enemy: bool,
    is_flying: bool,
    is_solid: bool,
) -> SpriteInfo {
    SpriteInfo { id: SpriteId(id), name, glyph, class, is_enemy, is_flying, is_solid }
}

use Symbol::*;

// Normative table: index, name, text glyph, abstract class, enemy, flying, solid.
const STANDARD: [SpriteInfo; SPRITE_COUNT] = [
    sprite(0, "ground", 'X', Solid, false, false, true),
    sprite(1, "hard_block", '#', Solid, false, false, true),
    sprite(2, "brick", 'B', Breakable, false, false, true),
    sprite(3, "question_block", '?', Question, false, false, true),
    sprite(4, "used_block", 'U', Solid, false, false, true),
    sprite(5, "coin", 'o', Coin, false, false, false),
    sprite(6, "pipe_top_left", '<', Pipe, false, false, true),
    sprite(7, "pipe_top_right", '>', Pipe, false, false, true),
    sprite(8, "pipe_left", '[', Pipe, false, false, true),
    sprite(9, "pipe_right", ']', Pipe, false, false, true),
    sprite(10, "cannon_top", 'C', Cannon, false, false, true),
    sprite(11, "cannon_base", 'c', Cannon, false, false, true),
    sprite(12, "flag_top", 'F', Goal, false, false, false),
    sprite(13, "flagpole", '|', Goal, false, false, false),
    sprite(14, "castle_block", 'K', Decoration, false, false, false),
    sprite(15, "platform", '=', Solid, false, false, true),
    sprite(16, "spring", 'J', Decoration, false, false, false),
    sprite(17, "goomba", 'g', Enemy, true, false, false),
    sprite(18, "koopa", 'k', Enemy, true, false, false),
    sprite(19, "red_koopa", 'r', Enemy, true, false, false),
    sprite(20, "buzzy_beetle", 'z', Enemy, true, false, false),
    sprite(21, "spiny", 's', Enemy, true, false, false),
    sprite(22, "hammer_bro", 'h', Enemy, true, false, false),
    sprite(23, "piranha_plant", 'p', Enemy, true, false, false),
    sprite(24, "cheep_cheep", 'e', Enemy, true, false, false),
    sprite(25, "paratroopa", 'W', Enemy, true, true, false),
    sprite(26, "lakitu", 'L', Enemy, true, true, false),
    sprite(27, "bush", 'v', Decoration, false, false, false),
    sprite(28, "cloud", 'n', Decoration, false, false, false),
    sprite(29, "hill", 'm', Decoration, false, false, false),
    sprite(30, "fence", 't', Decoration, false, false, false),
    sprite(31, "tree", 'T', Decoration, false, false, false),
];

pub const GROUND: SpriteId = SpriteId(0);
pub const HARD_BLOCK: SpriteId = SpriteId(1);
pub const BRICK: SpriteId = SpriteId(2);
pub const QUESTION_BLOCK: SpriteId = SpriteId(3);
pub const COIN: SpriteId = SpriteId(5);
pub const PIPE_TOP_LEFT: SpriteId = SpriteId(6);
pub const PIPE_TOP_RIGHT: SpriteId = SpriteId(7);
pub const PIPE_LEFT: SpriteId = SpriteId(8);
pub const PIPE_RIGHT: SpriteId = SpriteId(9);
pub const CANNON_TOP: SpriteId = SpriteId(10);
pub const CANNON_BASE: SpriteId = SpriteId(11);
pub const FLAG_TOP: SpriteId = SpriteId(12);
pub const FLAGPOLE: SpriteId = SpriteId(13);

/// The ordered sprite table plus lookup indices.
#[derive(Clone, Debug)]
pub struct SpritePalette {
    entries: Vec<SpriteInfo>,
    by_glyph: Vec<(char, SpriteId)>,
    by_class: Vec<Vec<SpriteId>>,
}

impl SpritePalette {
    /// Builds a palette after checking the table invariants.
    pub fn new(entries: Vec<SpriteInfo>) -> Result<Self, LevelError> {
        if entries.len() != SPRITE_COUNT {
            return Err(LevelError::Palette(format!(
                "expected {SPRITE_COUNT} sprites, got {}",
                entries.len()
            )));
        }
        let mut seen_ids = [false; SPRITE_COUNT];
        let mut names = HashSet::new();
        let mut glyphs = HashSet::new();
        for e in &entries {
            let i = e.id.index();
            if i >= SPRITE_COUNT || seen_ids[i] {
                return Err(LevelError::Palette(format!("index {i} out of range or repeated")));
            }
            seen_ids[i] = true;
            if !names.insert(e.name) {
                return Err(LevelError::Palette(format!("duplicate name {}", e.name)));
            }
            if e.glyph == EMPTY_GLYPH || !glyphs.insert(e.glyph) {
                return Err(LevelError::Palette(format!("glyph {:?} reserved or repeated", e.glyph)));
            }
            if e.is_flying && !e.is_enemy {
                return Err(LevelError::Palette(format!("{} is flying but not an enemy", e.name)));
            }
            if e.class == Symbol::Empty {
                return Err(LevelError::Palette(format!("{} maps to the empty class", e.name)));
            }
            if e.is_enemy != (e.class == Symbol::Enemy) {
                return Err(LevelError::Palette(format!("{} enemy flag disagrees with class", e.name)));
            }
        }
        let mut entries = entries;
        entries.sort_by_key(|e| e.id);
        let by_glyph = entries.iter().map(|e| (e.glyph, e.id)).collect();
        let mut by_class = vec![Vec::new(); Symbol::COUNT];
        for e in &entries {
            by_class[e.class.index()].push(e.id);
        }
        Ok(SpritePalette { entries, by_glyph, by_class })
    }

    /// The shared standard palette.
    pub fn standard() -> &'static SpritePalette {
        static PALETTE: OnceLock<SpritePalette> = OnceLock::new();
        PALETTE.get_or_init(|| {
            SpritePalette::new(STANDARD.to_vec()).expect("standard palette table is valid")
        })
    }

    pub fn entries(&self) -> &[SpriteInfo] {
        &self.entries
    }

    pub fn get(&self, id: SpriteId) -> &SpriteInfo {
        &self.entries[id.index()]
    }

    pub fn by_glyph(&self, c: char) -> Option<SpriteId> {
        self.by_glyph.iter().find(|(g, _)| *g == c).map(|(_, id)| *id)
    }

    pub fn by_name(&self, name: &str) -> Option<SpriteId> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn glyph(&self, id: SpriteId) -> char {
        self.get(id).glyph
    }

    pub fn class_of(&self, id: SpriteId) -> Symbol {
        self.get(id).class
    }

    /// Sprites belonging to an abstract class, in index order.
    pub fn members(&self, class: Symbol) -> &[SpriteId] {
        &self.by_class[class.index()]
    }

    pub fn is_flying(&self, id: SpriteId) -> bool {
        self.get(id).is_flying
    }

    pub fn enemies(&self) -> impl Iterator<Item = SpriteId> + '_ {
        self.entries.iter().filter(|e| e.is_enemy).map(|e| e.id)
    }
}
