use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::level::{to_abstract, AbstractGrid, Placement, SpritePalette, Symbol, LEVEL_HEIGHT};

use super::{realize_symbols, Agent, AgentError, ProposeContext, MAX_ADDITIONS};

/// The three cells a tile is conditioned on: left, below-left and below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MarkovContext {
    pub left: Symbol,
    pub below_left: Symbol,
    pub below: Symbol,
}

impl MarkovContext {
    /// Context of `(x, y)`, if all three cells lie inside the grid.
    pub fn at(grid: &AbstractGrid, x: usize, y: usize) -> Option<Self> {
        if x == 0 || y + 1 >= LEVEL_HEIGHT || x >= grid.width() {
            return None;
        }
        Some(MarkovContext { left: grid.get(x - 1, y), below_left: grid.get(x - 1, y + 1), below: grid.get(x, y + 1) })
    }

    fn key(&self) -> String {
        [self.left, self.below_left, self.below].iter().map(|s| s.as_char()).collect()
    }

    fn from_key(k: &str) -> Option<Self> {
        let c: Vec<Symbol> = k.chars().map(Symbol::from_char).collect::<Option<_>>()?;
        (c.len() == 3).then(|| MarkovContext { left: c[0], below_left: c[1], below: c[2] })
    }
}

/// Counts of each symbol following each context over every 2×2 square.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarkovModel {
    counts: BTreeMap<MarkovContext, BTreeMap<Symbol, u64>>,
}

#[derive(Serialize, Deserialize)]
struct RawMarkov {
    kind: String,
    contexts: BTreeMap<String, BTreeMap<char, u64>>,
}

impl MarkovModel {
    pub fn train(levels: &[AbstractGrid]) -> Self {
        let mut counts: BTreeMap<MarkovContext, BTreeMap<Symbol, u64>> = BTreeMap::new();
        for level in levels {
            for x in 1..level.width() {
                for y in 0..LEVEL_HEIGHT - 1 {
                    let ctx = MarkovContext::at(level, x, y).expect("inside");
                    *counts.entry(ctx).or_default().entry(level.get(x, y)).or_default() += 1;
                }
            }
        }
        MarkovModel { counts }
    }

    pub fn contexts(&self) -> impl Iterator<Item = &MarkovContext> {
        self.counts.keys()
    }

    pub fn count(&self, ctx: &MarkovContext, next: Symbol) -> u64 {
        self.counts.get(ctx).and_then(|m| m.get(&next)).copied().unwrap_or(0)
    }

    pub fn total(&self, ctx: &MarkovContext) -> u64 {
        self.counts.get(ctx).map(|m| m.values().sum()).unwrap_or(0)
    }

    pub fn probability(&self, ctx: &MarkovContext, next: Symbol) -> f64 {
        match self.total(ctx) {
            0 => 0.0,
            t => self.count(ctx, next) as f64 / t as f64,
        }
    }

    /// Distribution for a context in alphabet order; `None` when unseen.
    pub fn distribution(&self, ctx: &MarkovContext) -> Option<Vec<(Symbol, f64)>> {
        let m = self.counts.get(ctx)?;
        let t: u64 = m.values().sum();
        Some(m.iter().map(|(&s, &c)| (s, c as f64 / t as f64)).collect())
    }

    fn sample(&self, ctx: &MarkovContext, rng: &mut dyn rand::RngCore) -> Symbol {
        let Some(m) = self.counts.get(ctx) else {
            return Symbol::Empty;
        };
        let t: u64 = m.values().sum();
        let mut r = rng.gen_range(0..t);
        for (&s, &c) in m {
            if r < c {
                return s;
            }
            r -= c;
        }
        unreachable!("draw below total")
    }

    pub fn to_json(&self) -> String {
        let raw = RawMarkov {
            kind: "markov".into(),
            contexts: self
                .counts
                .iter()
                .map(|(k, m)| (k.key(), m.iter().map(|(s, c)| (s.as_char(), *c)).collect()))
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        let raw: RawMarkov = serde_json::from_str(text).map_err(|e| AgentError::Format(e.to_string()))?;
        if raw.kind != "markov" {
            return Err(AgentError::Format(format!("expected a markov table, found {:?}", raw.kind)));
        }
        let mut counts = BTreeMap::new();
        for (k, m) in raw.contexts {
            let ctx = MarkovContext::from_key(&k).ok_or_else(|| AgentError::Format(format!("bad context {k:?}")))?;
            let mut row = BTreeMap::new();
            for (c, n) in m {
                let s = Symbol::from_char(c).ok_or_else(|| AgentError::Format(format!("bad symbol {c:?}")))?;
                if n > 0 {
                    row.insert(s, n);
                }
            }
            if !row.is_empty() {
                counts.insert(ctx, row);
            }
        }
        Ok(MarkovModel { counts })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AgentError> {
        Ok(fs::write(path, self.to_json())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Clone)]
pub struct MarkovAgent {
    pub model: MarkovModel,
    palette: &'static SpritePalette,
}

impl MarkovAgent {
    pub fn new(model: MarkovModel) -> Self {
        MarkovAgent { model, palette: SpritePalette::standard() }
    }
}

impl Agent for MarkovAgent {
    fn name(&self) -> &str {
        "markov"
    }

    /// Walks empty cells column by column (left to right, bottom to top),
    /// sampling each from its context in the partially generated level.
    fn propose(&mut self, ctx: &mut ProposeContext<'_>) -> Result<Vec<Placement>, AgentError> {
        let level = ctx.level;
        let mut work = to_abstract(level, self.palette);
        let mut picks = Vec::new();
        'scan: for x in 1..level.width() {
            for y in (0..LEVEL_HEIGHT - 1).rev() {
                if !level.is_empty_at(x, y) {
                    continue;
                }
                let c = MarkovContext::at(&work, x, y).expect("inside");
                let s = self.model.sample(&c, ctx.rng);
                if s != Symbol::Empty {
                    work.set(x, y, s);
                    picks.push((x, y, s));
                    if picks.len() == MAX_ADDITIONS {
                        break 'scan;
                    }
                }
            }
        }
        realize_symbols(level, &picks, self.palette, ctx.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{TileGrid, GROUND};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(l: Symbol, bl: Symbol, b: Symbol) -> MarkovContext {
        MarkovContext { left: l, below_left: bl, below: b }
    }

    #[test]
    fn all_empty_level_has_single_context() {
        let m = MarkovModel::train(&[AbstractGrid::filled(5, Symbol::Empty)]);
        let e = Symbol::Empty;
        assert_eq!(m.contexts().count(), 1);
        assert_eq!(m.probability(&ctx(e, e, e), e), 1.0);
    }

    #[test]
    fn two_column_ground_table() {
        // 2 columns, ground on row 14 only: one x (x = 1), rows 0..=13
        let mut g = AbstractGrid::filled(2, Symbol::Empty);
        g.set(0, 14, Symbol::Solid);
        g.set(1, 14, Symbol::Solid);
        let m = MarkovModel::train(&[g]);
        let (e, s) = (Symbol::Empty, Symbol::Solid);
        // y = 13 sees (left E, below-left S, below S); y < 13 sees all E
        assert_eq!(m.count(&ctx(e, s, s), e), 1);
        assert_eq!(m.count(&ctx(e, e, e), e), 13);
        assert_eq!(m.contexts().count(), 2);
    }

    #[test]
    fn duplicate_corpus_keeps_probabilities() {
        let mut a = AbstractGrid::filled(6, Symbol::Empty);
        for x in 0..6 {
            a.set(x, 14, Symbol::Solid);
        }
        a.set(3, 13, Symbol::Enemy);
        let one = MarkovModel::train(&[a.clone()]);
        let two = MarkovModel::train(&[a.clone(), a]);
        for c in one.contexts() {
            for s in Symbol::ALL {
                assert_eq!(one.probability(c, s), two.probability(c, s));
            }
        }
    }

    #[test]
    fn deterministic_context_fills_hole() {
        let mut model = MarkovModel::default();
        let s = Symbol::Solid;
        model.counts.entry(ctx(s, s, s)).or_default().insert(s, 4);
        let mut level = TileGrid::empty(2);
        for x in 0..2 {
            level.place(x, 14, GROUND).unwrap();
        }
        level.place(0, 13, GROUND).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = MarkovAgent::new(model).propose(&mut ProposeContext::chunk(&level, &mut rng)).unwrap();
        assert_eq!(out, vec![Placement::new(1, 13, GROUND)]);
    }

    #[test]
    fn empty_model_and_full_level_add_nothing() {
        let model = MarkovModel::train(&[AbstractGrid::filled(4, Symbol::Empty)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let level = TileGrid::empty(10);
        assert!(MarkovAgent::new(model).propose(&mut ProposeContext::chunk(&level, &mut rng)).unwrap().is_empty());

        let model = MarkovModel::train(&[AbstractGrid::filled(4, Symbol::Solid)]);
        let mut level = TileGrid::empty(4);
        for x in 0..4 {
            for y in 0..LEVEL_HEIGHT {
                level.place(x, y, GROUND).unwrap();
            }
        }
        assert!(MarkovAgent::new(model).propose(&mut ProposeContext::chunk(&level, &mut rng)).unwrap().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let mut a = AbstractGrid::filled(5, Symbol::Empty);
        a.set(2, 14, Symbol::Pipe);
        a.set(3, 10, Symbol::Coin);
        let m = MarkovModel::train(&[a]);
        assert_eq!(MarkovModel::from_json(&m.to_json()).unwrap(), m);
        assert!(MarkovModel::from_json(r#"{"kind":"shape","contexts":{}}"#).is_err());
    }
}
