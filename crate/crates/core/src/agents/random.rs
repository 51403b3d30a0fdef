use rand::seq::SliceRandom;
use rand::Rng;

use crate::level::{Placement, SpriteId, SpritePalette, CHUNK_WIDTH, LEVEL_HEIGHT, SPRITE_COUNT};

use super::{drop_supported_flyers, Agent, AgentError, ProposeContext, MAX_ADDITIONS};

/// Reference partner: a uniform number of uniformly random sprites on
/// uniformly random empty cells of the current chunk window.
#[derive(Clone, Debug, Default)]
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn propose(&mut self, ctx: &mut ProposeContext<'_>) -> Result<Vec<Placement>, AgentError> {
        let level = ctx.level;
        let x1 = (ctx.window_x + CHUNK_WIDTH).min(level.width());
        let mut empty: Vec<(usize, usize)> = (ctx.window_x..x1)
            .flat_map(|x| (0..LEVEL_HEIGHT).map(move |y| (x, y)))
            .filter(|&(x, y)| level.is_empty_at(x, y))
            .collect();
        if empty.is_empty() {
            return Ok(Vec::new());
        }
        let k = ctx.rng.gen_range(1..=MAX_ADDITIONS.min(empty.len()));
        let (picked, _) = empty.partial_shuffle(ctx.rng, k);
        let out: Vec<Placement> = picked
            .iter()
            .map(|&(x, y)| Placement::new(x, y, SpriteId(ctx.rng.gen_range(0..SPRITE_COUNT) as u8)))
            .collect();
        Ok(drop_supported_flyers(level, out, SpritePalette::standard()))
    }
}
