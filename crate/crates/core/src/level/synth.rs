//! Seeded generator of platformer levels in the usual side-scroller
//! vocabulary: ground with gaps, pipes, brick and question rows, coins,
//! stairs, cannons, walking enemies and a flag at the end.

use rand::Rng;
use rand::RngCore;

use super::grid::{TileGrid, GROUND_ROW, LEVEL_HEIGHT};
use super::palette::*;

/// Level of the given width (at least 16 columns).
pub fn synth_level(width: usize, rng: &mut dyn RngCore) -> TileGrid {
    let width = width.max(16);
    let mut g = TileGrid::empty(width);
    let put = |g: &mut TileGrid, x: usize, y: usize, s: SpriteId| {
        if x < g.width() && y < LEVEL_HEIGHT && g.is_empty_at(x, y) {
            g.place(x, y, s).expect("checked empty");
        }
    };
    let mut ground = vec![true; width];
    let flag_x = width - 4;
    let mut x = 6;
    while x + 3 < flag_x - 2 {
        if rng.gen_bool(0.08) {
            let len = rng.gen_range(2..=3);
            ground[x..x + len].iter_mut().for_each(|c| *c = false);
            x += len + 4;
        } else {
            x += 1;
        }
    }
    for (x, &solid) in ground.iter().enumerate() {
        if solid {
            put(&mut g, x, GROUND_ROW, GROUND);
        }
    }
    let flat = |x: usize, w: usize| x + w < flag_x && ground[x..x + w].iter().all(|&c| c);

    let mut x = 4;
    while x < flag_x - 2 {
        match rng.gen_range(0..10) {
            0 if flat(x, 2) => {
                let h = rng.gen_range(2..=4);
                let top = GROUND_ROW - h;
                put(&mut g, x, top, PIPE_TOP_LEFT);
                put(&mut g, x + 1, top, PIPE_TOP_RIGHT);
                for y in top + 1..GROUND_ROW {
                    put(&mut g, x, y, PIPE_LEFT);
                    put(&mut g, x + 1, y, PIPE_RIGHT);
                }
                x += 4;
            }
            1 | 2 => {
                let w = rng.gen_range(3..=5).min(flag_x - 1 - x);
                let y = if rng.gen_bool(0.7) { 10 } else { 6 };
                for i in 0..w {
                    let s = if rng.gen_bool(0.3) { QUESTION_BLOCK } else { BRICK };
                    put(&mut g, x + i, y, s);
                    if rng.gen_bool(0.3) {
                        put(&mut g, x + i, y - 1, COIN);
                    }
                }
                x += w + 1;
            }
            3 if flat(x, 4) => {
                for i in 0..4 {
                    for y in GROUND_ROW - 1 - i..GROUND_ROW {
                        put(&mut g, x + i, y, HARD_BLOCK);
                    }
                }
                x += 6;
            }
            4 if flat(x, 1) => {
                put(&mut g, x, GROUND_ROW - 2, CANNON_TOP);
                put(&mut g, x, GROUND_ROW - 1, CANNON_BASE);
                x += 3;
            }
            5 | 6 if flat(x, 1) => {
                let s = [SpriteId(17), SpriteId(17), SpriteId(18)][rng.gen_range(0..3)];
                put(&mut g, x, GROUND_ROW - 1, s);
                x += 2;
            }
            7 => {
                for i in 0..rng.gen_range(2..=4) {
                    put(&mut g, x + i, 8, COIN);
                }
                x += 4;
            }
            8 if rng.gen_bool(0.3) => {
                put(&mut g, x, rng.gen_range(5..10), SpriteId(25));
                x += 2;
            }
            _ => x += 1,
        }
    }
    put(&mut g, flag_x, 2, FLAG_TOP);
    for y in 3..GROUND_ROW - 1 {
        put(&mut g, flag_x, y, FLAGPOLE);
    }
    put(&mut g, flag_x, GROUND_ROW - 1, HARD_BLOCK);
    g
}
